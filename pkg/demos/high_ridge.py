"""
Gluing along the high ridge
===========================

Put a segment Gamma on the high ridge of a long rectangle.  The potential near
the segment is the distance profile 1 - |x2|, and near the short sides it glues
onto a cone.  We compare the solved field with that profile and run the check
that packages the comparison.  At h = 1/32 the deviation sits right at the
0.03 tolerance, since the error is first order in h; h = 1/64 halves it.
"""
from infpot import checks
from infpot.geometry import ConvexRing, Segment, high_ridge, rectangle
from infpot.solver import SolveParams

ring = ConvexRing(rectangle(-2, -1, 2, 1), Segment(((-1.0, 0.0), (1.0, 0.0))))
hr = high_ridge(ring.outer)
print(f"high ridge: {hr.kind} {hr.body}, clearance {hr.clearance:.3f}")

for v in checks.hr_glued_check(ring, 1 / 64, SolveParams(omega=1.5)):
    print(f"{v.name:20s} {v.status:12s} {v.measured}")

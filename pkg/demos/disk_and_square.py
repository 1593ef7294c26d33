"""
Streamlines on a disk and on a square
=====================================

Both rings hold a single point at the origin.  On the disk the potential is the
cone 1 - |x| and every streamline is a radius, so nothing merges.  On the square
the potential bends near the corners and streamlines from neighbouring boundary
points run together before they reach the centre.

Run from the repository root:  python demos/disk_and_square.py [outdir]
"""
import sys
from pathlib import Path

import numpy as np

from infpot import io as fio
from infpot.field import build_grid, gradient, sample_gradient
from infpot.flow import merge_tree, trace_many
from infpot.geometry import ConvexRing, Disk, Point, rectangle
from infpot.solver import SolveParams, solve_infinity

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)
h = 1 / 64

# %% the disk first
disk = ConvexRing(Disk((0.0, 0.0), 1.0), Point((0.0, 0.0)))
f = solve_infinity(build_grid(disk, h), SolveParams(omega=1.5))
vf = gradient(f)
X = f.grid.coords
r = np.hypot(X[..., 0], X[..., 1])
m = f.grid.interior & (r > 4 * h)
print(f"disk: sup |V - (1 - r)| = {np.max(np.abs(f.values - (1 - r))[m]):.4f}")

seeds = [tuple(p) for p in disk.outer.boundary_points(16)]
S = trace_many(f, vf, seeds)
tree = merge_tree(S, h / 2)
print(f"disk: {len(S)} streamlines, {len(tree.edges)} merges")

# Denser seeding is a resolution trap.  Radii 2*pi/24 apart come within h/2 of
# each other at r ~ 0.03, just before capture, and register as merges near V = 1.
dense = trace_many(f, vf, [tuple(p) for p in disk.outer.boundary_points(24)])
levels = sorted({round(e[2].level, 3) for e in merge_tree(dense, h / 2).edges})
print(f"disk, 24 seeds: merges only at V = {levels}")
fio.render_svg(f, S, tree, path=out / "disk.svg")

# %% now the square
square = ConvexRing(rectangle(-1, -1, 1, 1), Point((0.0, 0.0)))
f = solve_infinity(build_grid(square, h), SolveParams(omega=1.5))
vf = gradient(f)

# speed along the diagonal grows from the corner toward the centre
t = np.linspace(0.05, 0.95, 7)
print("square: |grad V| along the diagonal")
for s in t:
    x = (1 - s, 1 - s)
    print(f"   dist to corner {np.sqrt(2) * s:.3f}   speed {np.linalg.norm(sample_gradient(vf, x)):.3f}")

seeds = [tuple(p) for p in square.outer.boundary_points(32)]
S = trace_many(f, vf, seeds)
tree = merge_tree(S, h / 2)
print(f"square: {len(S)} streamlines, {len(tree.edges)} merges, roots {tree.roots}")
for child, parent, cl in tree.edges[:6]:
    print(f"   {child} joins {parent} at V = {cl.level:.3f}, x = ({cl.location[0]:+.3f}, {cl.location[1]:+.3f})")
fio.render_svg(f, S, tree, path=out / "square.svg")
print(f"figures in {out}/")

"""Numerical predicates with explicit tolerances, each returning a Verdict."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from skimage.measure import points_in_poly

from . import flow
from .errors import (ContourTouchesBoundary, GammaNotOnRidge, IsAStadium, NotAPoint,
                     StreamlinesMergedInBand, WrongFixture)
from .field import INTERIOR, build_grid, gradient, level_curve, sample_gradient_many, sample_many
from .geometry import ConvexRing, Point, Polygon, high_ridge, is_stadium
from .solver import SolveParams, solve_infinity

PASS = "pass"
FAIL = "fail"
REPORT = "report-only"

C_G = 8.0  # gradient tolerance constant: bounds hold up to C_G * h
C_F = 1.0  # flux tolerance constant: eps_flux = C_F * h**0.5


@dataclass
class Verdict:
    name: str
    measured: dict
    threshold: dict
    status: str
    note: str = ""

    @property
    def passed(self):
        return self.status != FAIL

    def to_dict(self):
        return {"name": self.name, "measured": _plain(self.measured),
                "threshold": _plain(self.threshold), "status": self.status, "note": self.note}


def _plain(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        elif isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _status(ok):
    return PASS if ok else FAIL


@dataclass(frozen=True)
class GradientLimits:
    alpha: float
    beta: float
    xi0: tuple
    windows: dict = dc_field(default_factory=dict)


def eps_flux(h):
    return C_F * math.sqrt(h)


def _clearance(grid, X):
    """Distance of points to the boundary of the ring (negative outside)."""
    ring = grid.ring
    outer = -ring.outer.sdf(X)
    inner = ring.inner.distance(X)
    return np.minimum(outer, inner)


def _interior_clear(grid, margin):
    X = grid.coords
    return grid.interior & (_clearance(grid, X) >= margin)


def _closed(contour):
    P = np.asarray(getattr(contour, "vertices", contour), float)
    if not np.allclose(P[0], P[-1]):
        P = np.vstack([P, P[:1]])
    area = 0.5 * np.sum(P[:-1, 0] * P[1:, 1] - P[1:, 0] * P[:-1, 1])
    return P if area > 0 else P[::-1].copy()


def _densify(P, h):
    """Split segments longer than h so the midpoint rule samples at grid resolution."""
    out = [P[:1]]
    for a, b in zip(P[:-1], P[1:]):
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / h)))
        t = np.arange(1, n + 1)[:, None] / n
        out.append(a + t * (b - a))
    return np.vstack(out)


def _check_contour(grid, P):
    if np.min(_clearance(grid, P)) < 2 * grid.h:
        raise ContourTouchesBoundary("contour comes within 2h of the ring boundary")


def _line_terms(vf, P):
    """Midpoints, outward normals and lengths of the contour segments."""
    A, B = P[:-1], P[1:]
    M = 0.5 * (A + B)
    E = B - A
    L = np.linalg.norm(E, axis=1)
    N = np.column_stack([E[:, 1], -E[:, 0]]) / L[:, None]
    return M, N, L


def _flux(G, N, L, p):
    sp = np.linalg.norm(G, axis=1)
    return float(np.sum(sp ** (p - 2) * np.einsum("ij,ij->i", G, N) * L)), sp


def flux_check(field, vf, contour, p):
    """Line integral of |grad V|^(p-2) <grad V, n> over a closed contour."""
    if p < 2:
        raise ValueError("p must be at least 2")
    grid = field.grid
    P = _densify(_closed(contour), grid.h)
    _check_contour(grid, P)
    M, N, L = _line_terms(vf, P)
    flux, sp = _flux(sample_gradient_many(vf, M), N, L, p)
    scale = float(np.sum(L)) * max(float(sp.max()), 1e-300) ** (p - 1)
    norm = flux / scale
    eps = eps_flux(grid.h)
    return Verdict("flux", {"flux": flux, "normalized": norm, "p": p},
                   {"eps_flux": eps}, _status(norm <= eps), "outward p-flux of the potential is non-positive")


def _area_samples(grid, P, sub=4):
    """Quadrature points at spacing h/sub inside the polygon, each of weight (h/sub)^2."""
    d = grid.h / sub
    x0, y0 = P.min(axis=0)
    x1, y1 = P.max(axis=0)
    # align with the cell lattice so refinement nests
    i0 = math.floor((x0 - grid.origin[0]) / d)
    j0 = math.floor((y0 - grid.origin[1]) / d)
    cx = grid.origin[0] + d * (np.arange(i0, math.ceil((x1 - grid.origin[0]) / d)) + 0.5)
    cy = grid.origin[1] + d * (np.arange(j0, math.ceil((y1 - grid.origin[1]) / d)) + 0.5)
    C = np.stack(np.meshgrid(cx, cy, indexing="ij"), -1).reshape(-1, 2)
    return (C[points_in_poly(C, P[:-1])] if len(C) else C), d * d


def log_flux_check(field, vf, contour, p):
    """Area form of the flux inequality for W = log V, checked with slack eps_flux."""
    grid = field.grid
    P = _densify(_closed(contour), grid.h)
    _check_contour(grid, P)
    M, N, L = _line_terms(vf, P)
    GW = sample_gradient_many(vf, M) / sample_many(field, M)[:, None]
    line, sp = _flux(GW, N, L, p)
    C, w = _area_samples(grid, P)
    if len(C):
        Vc = sample_many(field, C)
        Gc = sample_gradient_many(vf, C) / Vc[:, None]
        area = float(np.sum(np.linalg.norm(Gc, axis=1) ** p) * w)
    else:
        area = 0.0
    lhs = -(p - 1) * area
    scale = float(np.sum(L)) * max(float(sp.max()), 1e-300) ** (p - 1)
    violation = (line - lhs) / scale
    eps = eps_flux(grid.h)
    return Verdict("log_flux", {"lhs": lhs, "rhs": line, "normalized_violation": violation, "p": p},
                   {"eps_flux": eps}, _status(violation <= eps),
                   "area term dominates the outward flux of log V")


def gradient_bounds_check(field, vf, ring=None, C_g=C_G):
    """Nonzero gradient, upper bound 1/separation and lower bound V/diam."""
    grid = field.grid
    ring = ring or grid.ring
    m = _interior_clear(grid, 2 * grid.h)
    sp = vf.speed[m]
    V = field.values[m]
    slack = C_g * grid.h
    up = 1.0 / ring.separation
    low_gap = float(np.max(V / ring.diameter - sp))
    meas = {"min_speed": float(sp.min()), "max_speed": float(sp.max()), "footnote_gap": low_gap}
    ok = sp.min() > 0 and sp.max() <= up + slack and low_gap <= slack
    return Verdict("gradient_bounds", meas, {"upper": up + slack, "footnote_slack": slack},
                   _status(bool(ok)), "0 < |grad V| <= 1/separation and |grad V| >= V/diam")


def _gamma_annulus(grid, r0, r1):
    d = grid.inner_distance(grid.coords)
    return grid.interior & (d >= r0) & (d <= r1)


def inner_limit_check(field, vf, ring=None, rel=0.10):
    """Mean speed on the 4h-8h annulus around a point Gamma against 1/separation
    and the global max."""
    grid = field.grid
    ring = ring or grid.ring
    if not isinstance(ring.inner, Point):
        raise NotAPoint("inner limit check needs a point Gamma")
    h = grid.h
    win = _gamma_annulus(grid, 4 * h, 8 * h)
    mean = float(vf.speed[win].mean())
    gmax = float(vf.speed[_interior_clear(grid, 2 * h)].max())
    target = 1.0 / ring.separation
    ok = abs(mean - target) <= rel * target and abs(mean - gmax) <= rel * gmax
    return Verdict("inner_limit", {"window_mean": mean, "global_max": gmax, "inverse_separation": target},
                   {"relative": rel}, _status(ok), "speed at Gamma equals the supremum 1/separation")


def outer_lower_bound_check(field, vf, ring=None, C_g=C_G):
    grid = field.grid
    ring = ring or grid.ring
    h = grid.h
    win = _gamma_annulus(grid, 4 * h, 8 * h)
    mn = float(vf.speed[win].min())
    bound = 1.0 / ring.diameter - C_g * h
    return Verdict("outer_lower_bound", {"window_min": mn}, {"bound": bound}, _status(mn >= bound),
                   "speed near Gamma is at least 1/diam")


def _arc_between(curve, a, b):
    """Shorter arc of the closed polyline between the points nearest to a and b."""
    P = curve.vertices[:-1]
    n = len(P)
    ia = int(np.argmin(np.linalg.norm(P - a, axis=1)))
    ib = int(np.argmin(np.linalg.norm(P - b, axis=1)))
    i0, i1 = min(ia, ib), max(ia, ib)
    inner = P[i0:i1 + 1]
    outer = np.vstack([P[i1:], P[:i0 + 1]])
    seg = lambda Q: float(np.sum(np.linalg.norm(np.diff(Q, axis=0), axis=1))) if len(Q) > 1 else 0.0
    arc = inner if seg(inner) <= seg(outer) or n < 3 else outer
    return np.vstack([a, arc, b])


def speed_level_check(field, vf, s1, s2, a, b, C_g=C_G, tol_merge=None):
    """Sup of the speed on the upper level arc between two streamlines is at most
    the sup on the lower arc."""
    if not a < b:
        raise ValueError("need a < b")
    grid = field.grid
    tol = tol_merge if tol_merge is not None else 0.5 * grid.h
    cl = flow.detect_merge(s1, s2, tol)
    if cl is not None and cl.level <= b:
        raise StreamlinesMergedInBand(f"streamlines merge at level {cl.level:.4f} inside [{a}, {b}]")
    sups = []
    for c in (a, b):
        curve = level_curve(field, c)
        arc = _arc_between(curve, s1.point_at_level(c), s2.point_at_level(c))
        # densify so the sup sees the whole arc, not only marching-squares vertices
        t = np.linspace(0.0, 1.0, 5)[:-1]
        dense = (arc[:-1, None, :] + t[None, :, None] * np.diff(arc, axis=0)[:, None, :]).reshape(-1, 2)
        dense = np.vstack([dense, arc[-1:]])
        sups.append(float(np.max(np.linalg.norm(sample_gradient_many(vf, dense), axis=1))))
    slack = C_g * grid.h
    return Verdict("speed_level", {"sup_lower": sups[0], "sup_upper": sups[1], "levels": (a, b)},
                   {"slack": slack}, _status(sups[1] <= sups[0] + slack),
                   "lower level arc carries the larger maximum speed")


def _boundary_pair(outer, xi0, spacing):
    """Two boundary points about ``spacing`` apart around xi0."""
    xi0 = np.asarray(xi0, float)
    if isinstance(outer, Polygon):
        P = np.array(outer.vertices)
        dv = np.linalg.norm(P - xi0, axis=1)
        k = int(np.argmin(dv))
        if dv[k] <= 1e-9:
            u = P[k - 1] - P[k]
            w = P[(k + 1) % len(P)] - P[k]
            u /= np.linalg.norm(u)
            w /= np.linalg.norm(w)
            half = 0.5 * math.acos(float(np.clip(u @ w, -1, 1)))
            t = spacing / (2 * math.sin(half))
            return P[k] + t * u, P[k] + t * w
    e = 1e-6
    n = np.array([outer.sdf(xi0 + [e, 0]) - outer.sdf(xi0 - [e, 0]),
                  outer.sdf(xi0 + [0, e]) - outer.sdf(xi0 - [0, e])], float)
    n /= np.linalg.norm(n)
    tang = np.array([-n[1], n[0]])
    return (outer.closest_point(xi0 + 0.5 * spacing * tang), outer.closest_point(xi0 - 0.5 * spacing * tang))


def cl_criterion(field, vf, ring=None, xi0=(1.0, -1.0), margin=0.1, spacings=(4.0, 2.0),
                 params=flow.TraceParams()):
    """Compare the speed near xi0 (alpha) with the speed near Gamma (beta); when
    beta clearly exceeds alpha, two streamlines seeded next to xi0 must merge."""
    grid = field.grid
    ring = ring or grid.ring
    h = grid.h
    xi0 = tuple(float(c) for c in xi0)
    near = grid.interior & (np.linalg.norm(grid.coords - np.array(xi0), axis=-1) <= 6 * h)
    alpha = float(vf.speed[near].max()) if near.any() else 0.0
    beta = float(vf.speed[_gamma_annulus(grid, 4 * h, 8 * h)].min())
    lim = GradientLimits(alpha, beta, xi0, {"alpha_radius": 6 * h, "beta_annulus": (4 * h, 8 * h)})
    meas = {"alpha": alpha, "beta": beta}
    if not beta > alpha + margin:
        return lim, Verdict("cl_criterion", meas, {"margin": margin}, REPORT, "criterion not triggered")
    tol = params.tol_merge if params.tol_merge is not None else 0.5 * h
    tried = []
    for sp in spacings:
        p1, p2 = _boundary_pair(ring.outer, xi0, sp * h)
        s1, s2 = flow.trace_many(field, vf, [tuple(p1), tuple(p2)], params)
        cl = flow.detect_merge(s1, s2, tol, params.delta_stop)
        tried.append(sp)
        if cl is not None:
            meas.update(spacing=sp * h, merge_level=cl.level, merge_point=cl.location, tried=tried)
            return lim, Verdict("cl_criterion", meas, {"margin": margin}, PASS,
                                "beta > alpha forces streamlines near xi0 to meet")
    meas.update(tried=tried)
    return lim, Verdict("cl_criterion", meas, {"margin": margin}, FAIL,
                        "beta > alpha forces streamlines near xi0 to meet")


def theorem_single_check(field, vf, ring=None, n_boundary=64, neighbours=2, params=flow.TraceParams()):
    """Streamlines from boundary seeds outside the inscribed disk around a point
    Gamma all meet a neighbouring streamline."""
    grid = field.grid
    ring = ring or grid.ring
    if not isinstance(ring.inner, Point):
        raise NotAPoint("needs a point Gamma")
    if is_stadium(ring):
        raise IsAStadium("every streamline is a straight segment on a stadium")
    h = grid.h
    tol = params.tol_merge if params.tol_merge is not None else 0.5 * h
    B = np.asarray(ring.outer.boundary_points(n_boundary))
    far = np.flatnonzero(ring.inner.distance(B) > ring.separation + 4 * h)
    if len(far) < 8:
        raise ValueError("fewer than 8 seeds lie outside the inscribed disk; raise n_boundary")
    need = sorted({(i + d) % len(B) for i in far for d in range(-neighbours, neighbours + 1)})
    S = {i: sl for i, sl in zip(need, flow.trace_many(field, vf, [tuple(B[i]) for i in need], params))}
    merged = {}
    for i in far:
        best = None
        for d in range(-neighbours, neighbours + 1):
            j = (i + d) % len(B)
            if d == 0 or j not in S:
                continue
            cl = flow.detect_merge(S[i], S[j], tol, params.delta_stop)
            if cl is not None and (best is None or cl.level < best):
                best = cl.level
        merged[int(i)] = best
    missing = [i for i, lv in merged.items() if lv is None]
    meas = {"seeds": len(far), "unmerged": len(missing),
            "max_merge_level": max((lv for lv in merged.values() if lv is not None), default=float("nan"))}
    return Verdict("single_point_merges", meas, {"unmerged": 0}, _status(not missing),
                   "non-disk rings force streamlines outside the inscribed disk to meet")


def _solve(ring, h, params):
    g = build_grid(ring, h)
    return solve_infinity(g, params)


def hr_glued_check(ring, h, params=SolveParams(), field=None, glue_tol=0.03, rect_tol=0.02,
                   n_seeds=8, trace_params=flow.TraceParams()):
    """Compare V with the field glued from the two endpoint potentials and the
    distance function in the middle band."""
    hr = high_ridge(ring.outer)
    inner = ring.inner
    if inner.kind != "segment" or hr.body.kind != "segment":
        raise GammaNotOnRidge("Gamma and the High Ridge must both be segments")
    R = np.array(hr.body.endpoints)
    E = np.array(inner.endpoints)
    if np.max(hr.body.distance(E)) > 1e-6:
        raise GammaNotOnRidge("Gamma leaves the High Ridge")
    if abs(hr.clearance - 1.0) > 1e-6 or np.max(np.abs(E[:, 1])) > 1e-12 or abs(E[0, 0] + E[1, 0]) > 1e-12:
        raise ValueError("normalize Gamma to the segment (+-a, 0) with clearance 1")
    a = float(abs(E[0, 0]))
    f = field if field is not None else _solve(ring, h, params)
    grid = f.grid
    fL = solve_infinity(build_grid(ConvexRing(ring.outer, Point((-a, 0.0))), h), params)
    fR = solve_infinity(build_grid(ConvexRing(ring.outer, Point((a, 0.0))), h), params)
    if fL.grid.shape != grid.shape or fR.grid.shape != grid.shape:
        raise RuntimeError("endpoint grids differ from the main grid")
    X = grid.coords
    m = grid.interior & fL.grid.interior & fR.grid.interior
    dist = ring.outer.boundary_distance(X)
    glued = np.where(X[..., 0] <= -a, fL.values, np.where(X[..., 0] >= a, fR.values, dist))
    gdev = float(np.max(np.abs(f.values - glued)[m]))
    band = m & (np.abs(X[..., 0]) <= a)
    rdev = float(np.max(np.abs(f.values - (1 - np.abs(X[..., 1])))[band])) if band.any() else 0.0
    meas = {"glued_deviation": gdev, "rectangle_deviation": rdev, "a": a}
    ok = gdev <= glue_tol and rdev <= rect_tol
    out = [Verdict("high_ridge_glued", meas, {"glued": glue_tol, "rectangle": rect_tol}, _status(ok),
                   "potential is glued from the endpoint potentials and the distance function")]
    if is_stadium(ring):
        out.append(Verdict("high_ridge_merges", {"stadium": True}, {}, REPORT, "stadium: no merges expected"))
        return out
    vf = gradient(f)
    seeds = flow.boundary_seeds(ring.outer, n_seeds) if isinstance(ring.outer, Polygon) else \
        [tuple(x) for x in ring.outer.boundary_points(4 * n_seeds)]
    S = flow.trace_many(f, vf, seeds, trace_params)
    tol = trace_params.tol_merge if trace_params.tol_merge is not None else 0.5 * h
    tree = flow.merge_tree(S, tol, trace_params.delta_stop)
    out.append(Verdict("high_ridge_merges", {"merges": len(tree.edges), "streamlines": len(S)},
                       {"merges": 1}, _status(len(tree.edges) >= 1),
                       "off-stadium rings with Gamma on the ridge have meeting streamlines"))
    return out


def _is_unit_square_ring(ring):
    o = ring.outer
    if not isinstance(o, Polygon) or not isinstance(ring.inner, Point):
        return False
    V = np.array(o.vertices)
    return (len(V) == 4 and np.allclose(np.sort(np.abs(V), axis=0), 1.0)
            and np.allclose(ring.inner.center, 0.0))


def _distinct(points, sep):
    out = []
    for p in points:
        if all(np.hypot(p[0] - q[0], p[1] - q[1]) > sep for q in out):
            out.append(p)
    return out


def symmetry_deviation(field):
    """Max deviation of V under the dihedral group of the square, on INTERIOR nodes."""
    g = field.grid
    u = field.values
    if g.nx != g.ny or not np.allclose(g.origin[0] + g.origin[1] + (g.nx - 1) * g.h, 0.0):
        raise WrongFixture("grid is not symmetric about the origin")
    m = g.interior
    worst = 0.0
    for k in range(4):
        for flip in (False, True):
            w = np.rot90(u, k)
            w = w.T if flip else w
            mw = np.rot90(m, k)
            mw = mw.T if flip else mw
            both = m & mw
            worst = max(worst, float(np.max(np.abs(u - w)[both])))
    return worst


def square_suite(field, vf, tol_res=None, seeds_per_side=16, params=flow.TraceParams(),
                 corner_offsets=(0.03, 0.06, 0.1, 0.15, 0.2)):
    """Every square property as a verdict, plus report-only evidence."""
    grid = field.grid
    ring = grid.ring
    if not _is_unit_square_ring(ring):
        raise WrongFixture("square suite needs the square [-1,1]^2 with Gamma at the origin")
    h = grid.h
    tol_res = tol_res if tol_res is not None else field.info.get("tol_res", 1e-8)
    tol = params.tol_merge if params.tol_merge is not None else 0.5 * h
    X = grid.coords
    m = grid.interior
    u = field.values
    out = []

    lower = 1.0 - np.hypot(X[..., 0], X[..., 1])
    upper = ring.outer.boundary_distance(X)
    lo_v = float(np.max((lower - u)[m]))
    up_v = float(np.max((u - upper)[m]))
    out.append(Verdict("sandwich", {"lower_violation": lo_v, "upper_violation": up_v}, {"slack": 0.02},
                       _status(max(lo_v, up_v) <= 0.02), "1-|x| <= V <= dist(x, boundary)"))

    t = np.arange(-1.0 + h, 1.0 - 0.5 * h, h)
    pts = np.concatenate([np.column_stack([np.zeros_like(t), t]), np.column_stack([t, np.zeros_like(t)])])
    med = float(np.max(np.abs(sample_many(field, pts) - (1 - np.abs(np.concatenate([t, t]))))))
    out.append(Verdict("median_linearity", {"max_deviation": med}, {"tol": 0.02}, _status(med <= 0.02),
                       "V is linear on the medians"))

    corners = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], float)
    cmask = np.zeros_like(m)
    for c in corners:
        cmask |= np.linalg.norm(X - c, axis=-1) <= 2 * h + 1e-12
    # gradients exist on INTERIOR nodes only; the nearest sit sqrt(2) h from a corner
    cs = vf.speed[cmask & m]
    cmax = float(cs.max())
    out.append(Verdict("corner_speed", {"max_speed": cmax, "nodes": int(cs.size)}, {"tol": 0.15},
                       _status(cmax <= 0.15), "gradient vanishes at the corners"))

    diag = flow.trace_ascending(field, vf, (-1.0, -1.0), params)
    keep = np.linalg.norm(diag.vertices, axis=1) >= 4 * h
    sp = diag.speed[keep]
    back = float(np.max(np.maximum.accumulate(sp) - sp))
    out.append(Verdict("diagonal_speed_monotone", {"max_backslide": back, "first": float(sp[0]),
                                                   "last": float(sp[-1])},
                       {"tol": 0.02}, _status(back <= 0.02), "speed is non-decreasing on the diagonals"))

    sym = symmetry_deviation(field)
    out.append(Verdict("symmetry", {"max_deviation": sym}, {"tol": 10 * tol_res}, _status(sym <= 10 * tol_res),
                       "V is invariant under the symmetries of the square"))

    all_cl = []
    counts = []
    for c in corners:
        # seeds on the two sides meeting at corner c, plus the corner itself
        sx = np.array([-np.sign(c[0]), 0.0])
        sy = np.array([0.0, -np.sign(c[1])])
        seeds = [tuple(c)] + [tuple(c + d * sx) for d in corner_offsets] + [tuple(c + d * sy) for d in corner_offsets]
        S = flow.trace_many(field, vf, seeds, params)
        tree = flow.merge_tree(S, tol, params.delta_stop)
        inside = [e[2].location for e in tree.edges
                  if abs(e[2].location[0] - c[0]) <= 0.25 and abs(e[2].location[1] - c[1]) <= 0.25]
        counts.append(len(_distinct(inside, h)))
        all_cl += [e[2] for e in tree.edges]
    out.append(Verdict("corner_cl_points", {"per_corner": counts}, {"min": 3}, _status(min(counts) >= 3),
                       "infinitely many Cl-points near the corners"))

    body = flow.boundary_seeds(ring.outer, seeds_per_side)
    extra = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)]
    S = flow.trace_many(field, vf, body + extra, params)
    tree = flow.merge_tree(S, tol, params.delta_stop)
    near0 = [e[2].location for e in tree.edges if e[2].level > 0.8]
    n0 = len(_distinct(near0, h))
    out.append(Verdict("origin_cl_points", {"count": n0}, {"min": 3}, _status(n0 >= 3),
                       "infinitely many Cl-points near the origin"))
    involved = set(tree.parent) | set(tree.parent.values())
    unmerged = [S[i].seed for i in range(len(body)) if S[i].id not in involved]
    out.append(Verdict("boundary_seeds_merge", {"seeds": len(body), "unmerged": len(unmerged)},
                       {"unmerged": 0}, _status(not unmerged), "every non-median streamline meets another"))
    all_cl += [e[2] for e in tree.edges]

    dd = [min(abs(x - y), abs(x + y)) / math.sqrt(2) for x, y in (c.location for c in all_cl)]
    out.append(Verdict("cl_distance_to_diagonal", {"max": max(dd, default=0.0), "mean": float(np.mean(dd)) if dd else 0.0,
                                                   "count": len(dd)}, {}, REPORT,
                       "conjecture: Cl-points lie on the diagonals"))
    mm = _interior_clear(grid, 2 * h)
    glog = float(np.min(vf.speed[mm] / u[mm]))
    out.append(Verdict("log_gradient_min", {"min": glog}, {"compare": 1.0}, REPORT,
                       "open question: |grad log V| >= 1 in the square"))
    backs = []
    for sl in S[:len(body)]:
        k = np.linalg.norm(sl.vertices, axis=1) >= 4 * h
        if k.sum() > 1:
            v = sl.speed[k]
            backs.append(float(np.max(np.maximum.accumulate(v) - v)))
    out.append(Verdict("speed_monotone_all", {"max_backslide": max(backs, default=0.0),
                                              "over_0.02": int(sum(b > 0.02 for b in backs))},
                       {"compare": 0.02}, REPORT, "open question: speed is non-decreasing on every streamline"))
    out.append(Verdict("crossings", {"crossing_pairs": _count_crossings(S, tol, params.delta_stop)},
                       {"max": 0}, REPORT, "ascending streamlines do not cross"))
    return out


def _count_crossings(S, tol, delta_stop):
    n = 0
    for i in range(len(S)):
        for j in range(i + 1, len(S)):
            n += flow.crossing_check(S[i], S[j], tol, delta_stop)
    return n


def p_trend_check(field_inf, ps=(8, 16, 32, 64), params=SolveParams(), fields=None, allowance=0.005):
    """||V_p - V_inf|| should not increase with p; one small uptick is reported only."""
    from .solver import solve_p
    grid = field_inf.grid
    m = grid.interior
    errs = []
    init = None
    for p in ps:
        fp = fields[p] if fields is not None else solve_p(grid, p, params, init=init)
        init = fp.values
        errs.append(float(np.max(np.abs(fp.values - field_inf.values)[m])))
    ups = [b - a for a, b in zip(errs, errs[1:]) if b > a]
    if not ups:
        status = PASS
    elif len(ups) == 1 and ups[0] <= allowance:
        status = REPORT
    else:
        status = FAIL
    return Verdict("p_trend", {"p": list(ps), "sup_error": errs}, {"uptick_allowance": allowance}, status,
                   "V_p approaches V_inf as p grows")

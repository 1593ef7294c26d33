"""Acceptance criteria 1-11, one test each.  Every test records a PASS/FAIL line
that is printed in the terminal summary."""
import time

import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

from conftest import RINGS, record, solved
from infpot import checks, flow
from infpot.errors import IsAStadium
from infpot.field import build_grid, gradient
from infpot.solver import SolveParams, solve_infinity

FAST = SolveParams(omega=1.5)


def radius(grid):
    X = grid.coords
    return np.hypot(X[..., 0], X[..., 1])


def random_boxes(rng, n, lo, hi, fits, min_side=0.1):
    """n axis-aligned rectangles inside [lo, hi]^2 whose contour passes ``fits``."""
    out = []
    while len(out) < n:
        x = np.sort(rng.uniform(lo, hi, 2))
        y = np.sort(rng.uniform(lo, hi, 2))
        if x[1] - x[0] < min_side or y[1] - y[0] < min_side:
            continue
        P = np.array([[x[0], y[0]], [x[1], y[0]], [x[1], y[1]], [x[0], y[1]], [x[0], y[0]]])
        if fits(P):
            out.append(P)
    return out


def clear_of_origin(P, gap=0.05):
    # the closed box keeps a gap to the point Gamma at the origin
    dx = max(P[0, 0], -P[1, 0], 0.0)
    dy = max(P[0, 1], -P[2, 1], 0.0)
    return np.hypot(dx, dy) >= gap


@pytest.fixture(scope="module")
def disk_timed():
    t0 = time.perf_counter()
    g = build_grid(RINGS["disk"](), 1 / 128)
    f = solve_infinity(g, SolveParams())
    return f, gradient(f), time.perf_counter() - t0


@pytest.fixture(scope="module")
def square256(square128):
    f1, _ = square128
    g = build_grid(RINGS["square"](), 1 / 256)
    # start from the coarse solution; the fixed point does not depend on the start
    init = RegularGridInterpolator((f1.grid.xs, f1.grid.ys), f1.values, bounds_error=False, fill_value=0.0)(g.coords)
    f = solve_infinity(g, FAST, init=init)
    return f, gradient(f)


def test_criterion_01_disk_is_the_cone(disk_timed):
    f, vf, secs = disk_timed
    g = f.grid
    r = radius(g)
    m = g.interior & (r > 4 * g.h)
    err = float(np.max(np.abs(f.values - (1 - r))[m]))
    lo, hi = float(vf.speed[m].min()), float(vf.speed[m].max())
    ok = err <= 0.02 and lo >= 0.95 and hi <= 1.05 and secs <= 60
    record(1, ok, f"disk h=1/128: sup|V-(1-|x|)| = {err:.4f}, |grad V| in [{lo:.3f}, {hi:.3f}], "
                  f"solve {secs:.1f} s")
    assert ok


def test_criterion_02_annulus_cone():
    g = build_grid(RINGS["annulus"](), 1 / 128)
    f = solve_infinity(g, FAST)
    vf = gradient(f)
    r = radius(g)
    err = float(np.max(np.abs(f.values - (1 - r) / 0.6)[g.interior]))
    m = checks._interior_clear(g, 2 * g.h)
    smax = float(vf.speed[m].max())
    rel = abs(smax * 0.6 - 1)
    ok = err <= 0.02 and rel <= 0.03
    record(2, ok, f"annulus r0=0.4 h=1/128: sup|V-(1-r)/0.6| = {err:.4f}, max|grad V| = {smax:.4f} "
                  f"({100 * rel:.2f}% from 1/0.6)")
    assert ok


def test_criterion_03_square_suite(square128):
    f, vf = square128
    vs = checks.square_suite(f, vf)
    failed = [v.name for v in vs if not v.passed]
    m = {v.name: v.measured for v in vs}
    record(3, not failed, f"square h=1/128: failed {failed or 'none'}; corner max speed "
                          f"{m['corner_speed']['max_speed']:.3f}, corner Cl {m['corner_cl_points']['per_corner']}, "
                          f"origin Cl {m['origin_cl_points']['count']}, unmerged seeds "
                          f"{m['boundary_seeds_merge']['unmerged']}")
    assert not failed


def _flux_violation(f, vf, boxes):
    worst = -np.inf
    for P in boxes:
        for p in (2, 3, 6):
            v = checks.flux_check(f, vf, P, p)
            worst = max(worst, v.measured["normalized"])
    return worst


def test_criterion_04_flux_inequality(square128, square256):
    rng = np.random.default_rng(4)
    boxes = random_boxes(rng, 50, -0.9, 0.9, clear_of_origin)
    w128 = _flux_violation(*square128, boxes)
    w256 = _flux_violation(*square256, boxes)
    v128, v256 = max(w128, 0.0), max(w256, 0.0)
    ok = w128 <= checks.eps_flux(1 / 128) and w256 <= checks.eps_flux(1 / 256) and v256 <= v128
    record(4, ok, f"50 boxes x p in {{2,3,6}}: max normalized flux {w128:.2e} (h=1/128), {w256:.2e} (h=1/256); "
                  f"violation {v128:.2e} -> {v256:.2e}")
    assert ok


def test_criterion_05_log_inequality(square128, disk_timed):
    rng = np.random.default_rng(5)
    lines = []
    ok = True
    fixtures = (("square", square128, 0.9), ("disk", disk_timed[:2], 0.6))
    for name, (f, vf), half in fixtures:
        boxes = random_boxes(rng, 20, -half, half, clear_of_origin)
        worst = max(checks.log_flux_check(f, vf, P, 2).measured["normalized_violation"] for P in boxes)
        ok &= worst <= checks.eps_flux(f.grid.h)
        lines.append(f"{name} worst {worst:.2e}")
    record(5, ok, f"20 boxes, p=2, slack h^1/2 = {checks.eps_flux(1 / 128):.3f}: " + ", ".join(lines))
    assert ok


def test_criterion_06_inner_gradient_limit():
    f, vf = solved("ellipse", 128)
    v = checks.inner_limit_check(f, vf)
    m = v.measured
    record(6, v.passed, f"ellipse h=1/128: window mean {m['window_mean']:.4f}, global max {m['global_max']:.4f}, "
                        f"1/separation {m['inverse_separation']:.4f}")
    assert v.passed


def test_criterion_07_cl_criterion_at_corner(square128):
    f, vf = square128
    lim, v = checks.cl_criterion(f, vf, xi0=(1.0, -1.0))
    ok = lim.alpha <= 0.2 and lim.beta >= 0.8 and v.status == checks.PASS
    record(7, ok, f"square xi0=(1,-1): alpha {lim.alpha:.3f} (<= 0.2), beta {lim.beta:.3f} (>= 0.8), "
                  f"merge {v.status}{' at spacing %.4f' % v.measured['spacing'] if 'spacing' in v.measured else ''}")
    assert ok


def test_criterion_08_single_point_merges(disk_timed):
    f, vf = solved("ellipse", 128)
    v = checks.theorem_single_check(f, vf)
    with pytest.raises(IsAStadium):
        checks.theorem_single_check(*disk_timed[:2])
    m = v.measured
    record(8, v.passed, f"ellipse h=1/128: {m['seeds']} seeds beyond the inscribed disk, {m['unmerged']} unmerged, "
                        f"latest merge level {m['max_merge_level']:.4f}; disk skipped as a stadium")
    assert v.passed


def test_criterion_09_high_ridge_gluing():
    ring = RINGS["rectangle"]()
    f, _ = solved("rectangle", 64)
    vs = checks.hr_glued_check(ring, 1 / 64, FAST, field=f)
    glued = vs[0]
    m = glued.measured
    extra = ", ".join(f"{v.name}: {v.measured}" for v in vs[1:])
    record(9, glued.passed, f"rectangle ring h=1/64: glued deviation {m['glued_deviation']:.4f} (<= 0.03), "
                            f"1-|x2| deviation {m['rectangle_deviation']:.4f} (<= 0.02); {extra}")
    assert glued.passed


def test_criterion_10_uniqueness_surrogate(disk_timed, square128):
    fields = {"disk": disk_timed[:2], "square": square128,
              "annulus": solved("annulus", 128), "ellipse": solved("ellipse", 128),
              "rectangle": solved("rectangle", 64)}
    worst = {}
    crossings = {}
    for name, (f, vf) in fields.items():
        seeds = [tuple(x) for x in f.grid.ring.outer.boundary_points(20)]
        worst[name] = max(flow.refinement_consistency(f, vf, s) for s in seeds) / f.grid.h
        S = flow.trace_many(f, vf, seeds)
        crossings[name] = sum(flow.crossing_check(S[i], S[j], 0.5 * f.grid.h)
                              for i in range(len(S)) for j in range(i + 1, len(S)))
    ok = max(worst.values()) <= 2 and not any(crossings.values())
    record(10, ok, "refinement drift / h: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
           + f"; crossing pairs {sum(crossings.values())}")
    assert ok


def test_criterion_11_p_trend(square64):
    f, _ = square64
    v = checks.p_trend_check(f)
    errs = ", ".join(f"{e:.4f}" for e in v.measured["sup_error"])
    record(11, v.passed, f"square h=1/64, p = 8,16,32,64: sup|V_p - V_inf| = {errs} ({v.status})")
    assert v.passed

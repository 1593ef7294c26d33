import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import RINGS, cone_field
from infpot.errors import EmptyLevel, OutOfDomain, TooCoarse
from infpot.field import (EXTERIOR, INNER_BC, INTERIOR, OUTER_BC, ScalarField, build_grid, convexity_defect,
                          gradient, level_curve, sample, sample_gradient, sample_many)

H = 1 / 32


@pytest.fixture(scope="module")
def disk_grid():
    return build_grid(RINGS["disk"](), H)


@pytest.fixture(scope="module")
def disk_cone(disk_grid):
    return cone_field(disk_grid, lambda x, y: np.clip(1 - np.hypot(x, y), 0, 1))


def test_classification(disk_grid):
    g = disk_grid
    X = g.coords
    r = np.hypot(X[..., 0], X[..., 1])
    assert np.all((r < 1) == ((g.classes == INTERIOR) | (g.classes == INNER_BC)))
    ob = g.classes == OUTER_BC
    assert np.all((r[ob] >= 1) & (r[ob] <= 1 + 2 * H + 1e-12))
    assert np.all(r[g.classes == EXTERIOR] > 1 + 2 * H - 1e-12)
    # point Gamma is captured within max(h, r_gamma)
    assert np.all((g.classes == INNER_BC) == (r <= H))
    assert g.r_gamma == H


def test_too_coarse():
    with pytest.raises(TooCoarse):
        build_grid(RINGS["annulus"](), 0.6 / 8)
    build_grid(RINGS["annulus"](), 0.6 / 8 - 1e-3)


def test_boundary_values(disk_grid):
    b = disk_grid.boundary_values()
    assert np.all(np.isnan(b[disk_grid.interior]))
    assert np.all(b[disk_grid.classes == INNER_BC] == 1)
    assert np.all(b[disk_grid.classes == OUTER_BC] == 0)


def test_gradient_is_exact_for_affine_data():
    # an annulus with affine data that also matches the 0/1 boundary values is impossible,
    # so use the grid geometry with the affine function on every node and no clipping
    g = build_grid(RINGS["square"](), H)
    f = cone_field(g, lambda x, y: 0.3 * x - 0.2 * y + 0.5)
    # cut stencils use boundary data, so compare only on nodes whose axis stencil is intact
    T, _ = g.axis_clip
    intact = g.interior & np.all(T == H, axis=-1)
    vf = gradient(f)
    assert np.allclose(vf.gx[intact], 0.3, atol=1e-12)
    assert np.allclose(vf.gy[intact], -0.2, atol=1e-12)


def test_cone_gradient(disk_grid, disk_cone):
    vf = gradient(disk_cone)
    X = disk_grid.coords
    r = np.hypot(X[..., 0], X[..., 1])
    m = disk_grid.interior & (r > 4 * H)
    assert np.max(np.abs(vf.speed[m] - 1)) < 0.02
    # direction points at Gamma
    cos = -(vf.gx[m] * X[..., 0][m] + vf.gy[m] * X[..., 1][m]) / (r[m] * vf.speed[m])
    assert np.min(cos) > 0.999


def test_cut_stencil_uses_boundary_values(disk_grid, disk_cone):
    # the cone matches the boundary data, so cut stencils stay first-order accurate
    vf = gradient(disk_cone)
    T, _ = disk_grid.axis_clip
    cut = disk_grid.interior & np.any(T < H, axis=-1)
    X = disk_grid.coords
    r = np.hypot(X[..., 0], X[..., 1])
    assert np.max(np.abs(vf.speed[cut & (r > 0.5)] - 1)) < 0.05


@settings(max_examples=80, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
def test_bilinear_sampling_reproduces_affine(x, y):
    g = build_grid(RINGS["square"](), 1 / 16)
    f = cone_field(g, lambda a, b: 0.25 * a + 0.5 * b + 0.1)
    assert sample(f, (x, y)) == pytest.approx(0.25 * x + 0.5 * y + 0.1, abs=1e-12)
    assert sample_many(f, np.array([[x, y]]))[0] == pytest.approx(sample(f, (x, y)), abs=1e-15)


def test_sampling_outside_raises(disk_cone, disk_grid):
    with pytest.raises(OutOfDomain):
        sample(disk_cone, (3.0, 0.0))
    with pytest.raises(OutOfDomain):
        sample_gradient(gradient(disk_cone), (1.2, 0.0))


def test_level_curve_of_cone(disk_cone):
    c = level_curve(disk_cone, 0.5)
    V = c.vertices
    assert np.allclose(V[0], V[-1])
    # linear interpolation along cell edges of a curved function: O(h^2) error
    assert np.max(np.abs(np.hypot(V[:, 0], V[:, 1]) - 0.5)) < H**2 / 2
    # counterclockwise
    area = 0.5 * np.sum(V[:-1, 0] * V[1:, 1] - V[1:, 0] * V[:-1, 1])
    assert area == pytest.approx(math.pi / 4, rel=2e-3)
    assert c.length == pytest.approx(math.pi, rel=2e-3)
    assert convexity_defect(c) < 1e-3


def test_level_curve_errors(disk_grid):
    f = ScalarField(disk_grid, np.where(disk_grid.classes == INNER_BC, 1.0, 0.0))
    with pytest.raises(ValueError):
        level_curve(f, 0.0)
    g = build_grid(RINGS["disk"](), H)
    flat = ScalarField(g, np.zeros(g.shape))
    with pytest.raises(EmptyLevel):
        level_curve(flat, 0.5)


def test_convexity_defect_of_nonconvex_curve():
    t = np.linspace(0, 2 * np.pi, 400)
    r = 1 + 0.3 * np.cos(3 * t)
    P = np.column_stack([r * np.cos(t), r * np.sin(t)])
    # support value h(pi/3) minus the dent radius 0.7 bounds the gap from above
    tt = np.linspace(0, 2 * np.pi, 200_001)
    support = np.max((1 + 0.3 * np.cos(3 * tt)) * np.cos(tt - np.pi / 3))
    d = convexity_defect(P)
    assert 0.15 < d <= support - 0.7 + 1e-3
    circle = np.column_stack([np.cos(t), np.sin(t)])
    assert convexity_defect(circle) < 1e-3

"""Uniform-grid carrier for the potential: node classification, gradients,
bilinear sampling and level curves."""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull

from .errors import EmptyLevel, OutOfDomain, TooCoarse
from .geometry import ConvexRing

INTERIOR, OUTER_BC, INNER_BC, EXTERIOR = 0, 1, 2, 3
NODE_CLASS_NAMES = {INTERIOR: "INTERIOR", OUTER_BC: "OUTER_BC", INNER_BC: "INNER_BC",
                    EXTERIOR: "EXTERIOR"}

# axis directions used by the gradient stencil: +x, -x, +y, -y
AXIS_DIRS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes ``origin + h*(i, j)``; arrays are indexed ``[i, j]`` (x index first)."""

    origin: tuple
    h: float
    nx: int
    ny: int
    classes: np.ndarray
    ring: ConvexRing | None = None
    r_gamma: float = 0.0
    extra: dict = dc_field(default_factory=dict)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @cached_property
    def xs(self):
        return self.origin[0] + self.h * np.arange(self.nx)

    @cached_property
    def ys(self):
        return self.origin[1] + self.h * np.arange(self.ny)

    @cached_property
    def coords(self):
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([X, Y], -1)

    @property
    def interior(self):
        return self.classes == INTERIOR

    def boundary_values(self):
        """Node values fixed by the Dirichlet data (NaN on INTERIOR nodes)."""
        v = np.zeros(self.shape)
        v[self.classes == INNER_BC] = 1.0
        v[self.classes == INTERIOR] = np.nan
        return v

    # exact distance along a ray to the first boundary crossing, and the value there
    def ray_clip(self, X, d, tmax):
        ring = self.ring
        t_out = ring.outer.ray_exit(X, d)
        if ring.inner.has_interior:
            t_in = ring.inner.ray_entry(X, d)
        else:
            t_in = ring.inner.ray_entry(X, d, inflate=self.r_gamma)
        t = np.minimum(np.minimum(t_out, t_in), tmax)
        g = np.where(t_in <= t_out, 1.0, 0.0)
        return t, g

    @cached_property
    def axis_clip(self):
        """Per node and axis direction: distance to the neighbour or to the boundary
        crossing before it, and the boundary value there (NaN if not clipped)."""
        X = self.coords
        T = np.full(self.shape + (4,), self.h)
        G = np.full(self.shape + (4,), np.nan)
        mask = self.interior
        for k, d in enumerate(AXIS_DIRS):
            t, g = self.ray_clip(X[mask], d, self.h)
            clipped = t < self.h
            tk = T[..., k]
            gk = G[..., k]
            tk[mask] = t
            gk[mask] = np.where(clipped, g, np.nan)
        return T, G

    def cell_of(self, x):
        fx = (x[0] - self.origin[0]) / self.h
        fy = (x[1] - self.origin[1]) / self.h
        i = int(np.floor(fx))
        j = int(np.floor(fy))
        return i, j, fx - i, fy - j

    def inner_distance(self, X):
        """Distance to Gamma (zero inside K)."""
        return self.ring.inner.distance(X)


def build_grid(ring, h, r_gamma=0.0):
    """Classify a uniform grid covering the outer body padded by two cells."""
    if not h < ring.separation / 8.0:
        raise TooCoarse(f"h={h:g} must be below separation/8 = {ring.separation / 8:g}")
    r_gamma = max(h, r_gamma) if not ring.inner.has_interior else 0.0
    x0, y0, x1, y1 = ring.outer.bbox
    origin = (x0 - 2 * h, y0 - 2 * h)
    nx = int(np.ceil((x1 - x0) / h - 1e-9)) + 5
    ny = int(np.ceil((y1 - y0) / h - 1e-9)) + 5
    xs = origin[0] + h * np.arange(nx)
    ys = origin[1] + h * np.arange(ny)
    X = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1)

    sdf = ring.outer.sdf(X)
    if ring.inner.has_interior:
        in_k = ring.inner.contains(X)
    else:
        in_k = ring.inner.distance(X) <= r_gamma
    classes = np.full((nx, ny), EXTERIOR, dtype=np.int8)
    classes[sdf <= 2.0 * h] = OUTER_BC
    classes[sdf < 0.0] = INTERIOR
    classes[in_k] = INNER_BC

    interior = classes == INTERIOR
    if not interior.any():
        raise TooCoarse("no interior nodes")
    _, ncomp = ndimage.label(interior)
    if ncomp != 1:
        raise TooCoarse(f"interior node set has {ncomp} components")
    return Grid(origin=origin, h=float(h), nx=nx, ny=ny, classes=classes, ring=ring,
                r_gamma=float(r_gamma))


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray
    info: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape does not match grid")

    def sample(self, x):
        return sample(self, x)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: Grid
    gx: np.ndarray
    gy: np.ndarray

    @cached_property
    def speed(self):
        return np.hypot(self.gx, self.gy)

    @cached_property
    def _filled(self):
        return _extend(self.gx, self.grid.interior), _extend(self.gy, self.grid.interior)


def _extend(a, known, layers=3):
    """Fill unknown nodes next to known ones with the mean of known 8-neighbours."""
    a = np.where(known, a, np.nan)
    for _ in range(layers):
        nan = np.isnan(a)
        if not nan.any():
            break
        z = np.where(nan, 0.0, a)
        w = (~nan).astype(float)
        k = np.ones((3, 3))
        s = ndimage.convolve(z, k, mode="constant")
        c = ndimage.convolve(w, k, mode="constant")
        a = np.where(nan & (c > 0), s / np.where(c > 0, c, 1.0), a)
    return a


def _axis_derivative(u0, um, up, a, b, gm, gp):
    """Derivative at a node from values at -a (um) and +b (up); a or b shorter than h
    means the stencil was clipped at the boundary (value gm/gp placed there)."""
    um = np.where(np.isnan(gm), um, gm)
    up = np.where(np.isnan(gp), up, gp)
    three_pt = (a * a * (up - u0) - b * b * (um - u0)) / (a * b * (a + b))
    two_pt = (up - um) / (a + b)
    short = np.minimum(a, b)
    return np.where(short >= 0.25 * np.maximum(a, b), three_pt, two_pt)


def gradient(f):
    """Finite-difference gradient at INTERIOR nodes; central where the axis stencil is
    intact, nonuniform three-point where it is cut by the boundary."""
    g = f.grid
    u = f.values
    T, G = g.axis_clip
    mask = g.interior
    up_x = np.roll(u, -1, axis=0)
    um_x = np.roll(u, 1, axis=0)
    up_y = np.roll(u, -1, axis=1)
    um_y = np.roll(u, 1, axis=1)
    gx = np.full(g.shape, np.nan)
    gy = np.full(g.shape, np.nan)
    gx[mask] = _axis_derivative(u[mask], um_x[mask], up_x[mask], T[..., 1][mask], T[..., 0][mask],
                                G[..., 1][mask], G[..., 0][mask])
    gy[mask] = _axis_derivative(u[mask], um_y[mask], up_y[mask], T[..., 3][mask], T[..., 2][mask],
                                G[..., 3][mask], G[..., 2][mask])
    return VectorField(g, gx, gy)


def _bilinear(a, i, j, fx, fy):
    return ((1 - fx) * (1 - fy) * a[i, j] + fx * (1 - fy) * a[i + 1, j]
            + (1 - fx) * fy * a[i, j + 1] + fx * fy * a[i + 1, j + 1])


def _usable_cell(g, i, j, ok):
    return 0 <= i < g.nx - 1 and 0 <= j < g.ny - 1 and ok[i:i + 2, j:j + 2].all()


def _interp(g, arrays, ok, x):
    i, j, fx, fy = g.cell_of(x)
    if not _usable_cell(g, i, j, ok):
        best = None
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ii, jj = i + di, j + dj
                if _usable_cell(g, ii, jj, ok):
                    cx = g.origin[0] + (ii + 0.5) * g.h
                    cy = g.origin[1] + (jj + 0.5) * g.h
                    dd = (cx - x[0]) ** 2 + (cy - x[1]) ** 2
                    if best is None or dd < best[0]:
                        best = (dd, ii, jj)
        if best is None:
            raise OutOfDomain(f"point {tuple(x)} is outside the sampled region")
        _, ii, jj = best
        fx += i - ii
        fy += j - jj
        i, j = ii, jj
    return [float(_bilinear(a, i, j, fx, fy)) for a in arrays]


def sample(f, x):
    """Bilinear value of a scalar field at x."""
    g = f.grid
    return _interp(g, [f.values], g.classes != EXTERIOR, np.asarray(x, float))[0]


def sample_gradient(vf, x):
    gx, gy = vf._filled
    return np.array(_interp(vf.grid, [gx, gy], ~np.isnan(gx), np.asarray(x, float)))


def sample_many(f, X):
    """Vectorised bilinear sampling; points in cells touching EXTERIOR nodes raise."""
    return _sample_many(f.grid, f.values, f.grid.classes != EXTERIOR, X)


def sample_gradient_many(vf, X):
    gx, gy = vf._filled
    ok = ~np.isnan(gx)
    return np.stack([_sample_many(vf.grid, gx, ok, X), _sample_many(vf.grid, gy, ok, X)], -1)


def _sample_many(g, a, ok, X):
    X = np.asarray(X, float)
    fx = (X[..., 0] - g.origin[0]) / g.h
    fy = (X[..., 1] - g.origin[1]) / g.h
    i = np.floor(fx).astype(int)
    j = np.floor(fy).astype(int)
    inside = (i >= 0) & (i < g.nx - 1) & (j >= 0) & (j < g.ny - 1)
    if not inside.all():
        raise OutOfDomain("points outside the grid")
    cell_ok = ok[i, j] & ok[i + 1, j] & ok[i, j + 1] & ok[i + 1, j + 1]
    if not cell_ok.all():
        out = np.empty(X.shape[:-1])
        flat_pts = X.reshape(-1, 2)
        flat = out.reshape(-1)
        for n, x in enumerate(flat_pts):
            flat[n] = _interp(g, [a], ok, x)[0]
        return out
    return _bilinear(a, i, j, fx - i, fy - j)


@dataclass(frozen=True)
class LevelCurve:
    level: float
    vertices: np.ndarray  # (n, 2) closed: first vertex repeated at the end

    @property
    def length(self):
        return float(np.sum(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)))


def _signed_area(P):
    return 0.5 * float(np.sum(P[:-1, 0] * P[1:, 1] - P[1:, 0] * P[:-1, 1]))


def level_curve(f, c):
    """Marching-squares contour {V = c}; returns the longest closed component,
    oriented counterclockwise."""
    from skimage.measure import find_contours

    if not 0.0 < c < 1.0:
        raise ValueError("level must lie in (0, 1)")
    g = f.grid
    vals = np.where(g.classes == EXTERIOR, 0.0, f.values)
    contours = find_contours(vals, c)
    closed = [C for C in contours if len(C) > 3 and np.allclose(C[0], C[-1])]
    if not closed:
        raise EmptyLevel(f"no closed crossing of level {c}")
    C = max(closed, key=len)
    P = np.column_stack([g.origin[0] + g.h * C[:, 0], g.origin[1] + g.h * C[:, 1]])
    P[-1] = P[0]
    if _signed_area(P) < 0:
        P = P[::-1].copy()
    return LevelCurve(float(c), P)


def _points_to_polyline(X, P):
    """Distance from points X (m,2) to the closed polyline P (n+1,2)."""
    A = P[:-1]
    B = P[1:]
    E = B - A
    ee = np.einsum("ij,ij->i", E, E)
    ee = np.where(ee > 0, ee, 1.0)
    W = X[:, None, :] - A[None, :, :]
    t = np.clip(np.einsum("mni,ni->mn", W, E) / ee, 0.0, 1.0)
    D = W - t[..., None] * E[None]
    return np.sqrt(np.min(np.einsum("mni,mni->mn", D, D), axis=1))


def convexity_defect(curve, samples_per_edge=32):
    """Largest distance from the convex hull boundary back to the curve."""
    V = curve.vertices if isinstance(curve, LevelCurve) else np.asarray(curve, float)
    if not np.allclose(V[0], V[-1]):
        V = np.vstack([V, V[:1]])
    hull = ConvexHull(V[:-1])
    H = V[:-1][hull.vertices]
    H = np.vstack([H, H[:1]])
    s = (np.arange(samples_per_edge) + 0.5) / samples_per_edge
    pts = (H[:-1, None, :] + s[None, :, None] * (H[1:] - H[:-1])[:, None, :]).reshape(-1, 2)
    best = 0.0
    for chunk in np.array_split(pts, max(1, len(pts) // 512)):
        best = max(best, float(np.max(_points_to_polyline(chunk, V))))
    return best

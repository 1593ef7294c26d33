"""Convex bodies, convex rings and the distance geometry the gradient estimates use.

All bodies are immutable.  Point-valued methods accept arrays of shape ``(..., 2)``
and broadcast, so a whole grid can be classified in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .errors import GammaNotOnRidge, NotAPoint, ValidationError, ZeroSeparation

GEOM_TOL = 1e-12


def _as_xy(x):
    return np.asarray(x, dtype=float)


def _pair(v):
    v = tuple(float(c) for c in v)
    if len(v) != 2 or not all(math.isfinite(c) for c in v):
        raise ValidationError(f"expected a finite coordinate pair, got {v!r}")
    return v


def _segment_distance(X, p, q):
    """Distance from points X to the closed segment pq."""
    X = _as_xy(X)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    e = q - p
    ee = float(e @ e)
    if ee == 0.0:
        return np.linalg.norm(X - p, axis=-1)
    t = np.clip(((X - p) @ e) / ee, 0.0, 1.0)
    proj = p + t[..., None] * e
    return np.linalg.norm(X - proj, axis=-1)


def _circle_entry(X, d, c, r):
    """First t >= 0 with |X + t d - c| <= r (d unit); inf if the ray misses."""
    w = X - c
    b = w @ d
    cc = np.einsum("...i,...i->...", w, w) - r * r
    disc = b * b - cc
    t = -b - np.sqrt(np.maximum(disc, 0.0))
    out = np.where((disc >= 0.0) & (t >= 0.0), t, np.inf)
    return np.where(cc <= 0.0, 0.0, out)


def _halfplane_entry(X, d, normals, offsets):
    """Cyrus-Beck entry distance of rays into {y : n_i . y <= c_i for all i}."""
    X = _as_xy(X)
    nx = X @ normals.T - offsets  # (..., m), <= 0 means inside half-plane i
    nd = normals @ d  # (m,)
    t_lo = np.zeros(X.shape[:-1])
    t_hi = np.full(X.shape[:-1], np.inf)
    for i, ndi in enumerate(nd):
        if abs(ndi) < 1e-300:
            t_hi = np.where(nx[..., i] > 0.0, -np.inf, t_hi)
            continue
        ti = -nx[..., i] / ndi
        if ndi > 0:
            t_hi = np.minimum(t_hi, ti)
        else:
            t_lo = np.maximum(t_lo, ti)
    return np.where(t_lo <= t_hi, t_lo, np.inf)


@dataclass(frozen=True)
class Point:
    center: tuple

    kind = "point"
    has_interior = False

    def __post_init__(self):
        object.__setattr__(self, "center", _pair(self.center))

    def contains(self, X):
        return np.linalg.norm(_as_xy(X) - self.center, axis=-1) == 0.0

    def distance(self, X):
        return np.linalg.norm(_as_xy(X) - self.center, axis=-1)

    def boundary_distance(self, X):
        return self.distance(X)

    def closest_point(self, X):
        return np.broadcast_to(np.asarray(self.center), _as_xy(X).shape).copy()

    def ray_entry(self, X, d, inflate=0.0):
        return _circle_entry(_as_xy(X), np.asarray(d, float), np.asarray(self.center), inflate)

    @property
    def diameter(self):
        return 0.0

    @property
    def bbox(self):
        x, y = self.center
        return (x, y, x, y)

    def boundary_points(self, n=1):
        return np.array([self.center])

    @property
    def extreme_points(self):
        return np.array([self.center])


@dataclass(frozen=True)
class Segment:
    endpoints: tuple

    kind = "segment"
    has_interior = False

    def __post_init__(self):
        p, q = (_pair(e) for e in self.endpoints)
        if p == q:
            raise ValidationError("segment endpoints must be distinct")
        object.__setattr__(self, "endpoints", (p, q))

    def contains(self, X):
        return self.distance(X) == 0.0

    def distance(self, X):
        return _segment_distance(X, *self.endpoints)

    def boundary_distance(self, X):
        return self.distance(X)

    def closest_point(self, X):
        X = _as_xy(X)
        p, q = (np.asarray(e) for e in self.endpoints)
        e = q - p
        t = np.clip(((X - p) @ e) / float(e @ e), 0.0, 1.0)
        return p + t[..., None] * e

    def ray_entry(self, X, d, inflate=0.0):
        """Entry distance into the capsule of radius ``inflate`` around the segment."""
        X = _as_xy(X)
        d = np.asarray(d, float)
        p, q = (np.asarray(e) for e in self.endpoints)
        t = np.minimum(_circle_entry(X, d, p, inflate), _circle_entry(X, d, q, inflate))
        if inflate > 0.0:
            e = (q - p) / np.linalg.norm(q - p)
            nrm = np.array([-e[1], e[0]])
            normals = np.array([e, -e, nrm, -nrm])
            offsets = np.array([e @ q, -(e @ p), nrm @ p + inflate, -(nrm @ p) + inflate])
            t = np.minimum(t, _halfplane_entry(X, d, normals, offsets))
        return t

    @property
    def length(self):
        p, q = self.endpoints
        return math.dist(p, q)

    @property
    def diameter(self):
        return self.length

    @property
    def bbox(self):
        (x0, y0), (x1, y1) = self.endpoints
        return (min(x0, x1), min(y0, y1), max(x0, x1), max(y0, y1))

    def boundary_points(self, n=64):
        p, q = (np.asarray(e) for e in self.endpoints)
        s = np.linspace(0.0, 1.0, max(n, 2))
        return p + s[:, None] * (q - p)

    @property
    def extreme_points(self):
        return np.array(self.endpoints)


@dataclass(frozen=True)
class Disk:
    center: tuple
    radius: float

    kind = "disk"
    has_interior = True

    def __post_init__(self):
        object.__setattr__(self, "center", _pair(self.center))
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValidationError("disk radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    def sdf(self, X):
        return np.linalg.norm(_as_xy(X) - self.center, axis=-1) - self.radius

    def contains(self, X):
        return self.sdf(X) <= 0.0

    def boundary_distance(self, X):
        return np.abs(self.sdf(X))

    def distance(self, X):
        return np.maximum(self.sdf(X), 0.0)

    def closest_point(self, X):
        W = _as_xy(X) - self.center
        r = np.linalg.norm(W, axis=-1, keepdims=True)
        u = np.where(r > 0, W / np.where(r > 0, r, 1.0), np.array([1.0, 0.0]))
        return np.asarray(self.center) + self.radius * u

    def ray_exit(self, X, d):
        X = _as_xy(X)
        d = np.asarray(d, float)
        w = X - self.center
        b = w @ d
        cc = np.einsum("...i,...i->...", w, w) - self.radius**2
        return -b + np.sqrt(np.maximum(b * b - cc, 0.0))

    def ray_entry(self, X, d, inflate=0.0):
        return _circle_entry(_as_xy(X), np.asarray(d, float), np.asarray(self.center),
                             self.radius + inflate)

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def bbox(self):
        x, y = self.center
        r = self.radius
        return (x - r, y - r, x + r, y + r)

    def boundary_points(self, n=256):
        th = 2.0 * np.pi * np.arange(n) / n
        return np.asarray(self.center) + self.radius * np.stack([np.cos(th), np.sin(th)], -1)


@dataclass(frozen=True)
class Ellipse:
    center: tuple
    a: float
    b: float
    rotation: float = 0.0

    kind = "ellipse"
    has_interior = True

    def __post_init__(self):
        object.__setattr__(self, "center", _pair(self.center))
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValidationError("ellipse semi-axes must be positive")
        if self.b > self.a:
            raise ValidationError("ellipse requires a >= b")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "rotation", float(self.rotation))

    def _local(self, X):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        W = _as_xy(X) - self.center
        return np.stack([c * W[..., 0] + s * W[..., 1], -s * W[..., 0] + c * W[..., 1]], -1)

    def _dir_local(self, d):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([c * d[0] + s * d[1], -s * d[0] + c * d[1]])

    def contains(self, X):
        L = self._local(X)
        return (L[..., 0] / self.a) ** 2 + (L[..., 1] / self.b) ** 2 <= 1.0

    def closest_point(self, X):
        """Closest point on the ellipse curve, by safeguarded Newton on the
        stationarity condition of the closest-point problem (tolerance 1e-12)."""
        L = self._local(X)
        sgn = np.where(L < 0, -1.0, 1.0)
        L = np.abs(L)
        shape = L.shape[:-1]
        x0 = L[..., 0].ravel()
        y0 = L[..., 1].ravel()
        a, b = self.a, self.b
        xc = np.empty_like(x0)
        yc = np.empty_like(y0)

        on_axis = y0 <= 1e-14 * b
        # points on the major axis: closed form
        if np.any(on_axis):
            xa = x0[on_axis]
            focal = a * a - b * b
            inner = xa < focal / a
            xx = np.where(inner, a * a * xa / (focal if focal > 0 else 1.0), a)
            xc[on_axis] = xx
            yc[on_axis] = np.where(inner, b * np.sqrt(np.clip(1.0 - (xx / a) ** 2, 0.0, 1.0)), 0.0)

        gen = ~on_axis
        if np.any(gen):
            xg, yg = x0[gen], y0[gen]
            ax, by = a * xg, b * yg

            def F(t):
                return (ax / (t + a * a)) ** 2 + (by / (t + b * b)) ** 2 - 1.0

            def dF(t):
                return -2.0 * ax**2 / (t + a * a) ** 3 - 2.0 * by**2 / (t + b * b) ** 3

            # F decreases on (-b^2, inf); the root is bracketed by these bounds
            lo = -b * b + by
            hi = -b * b + np.sqrt(ax**2 + by**2)
            t = 0.5 * (lo + hi)
            for _ in range(200):
                f = F(t)
                lo = np.where(f > 0, t, lo)
                hi = np.where(f <= 0, t, hi)
                tn = t - f / dF(t)
                bad = ~((tn > lo) & (tn < hi))
                tn = np.where(bad, 0.5 * (lo + hi), tn)
                done = np.abs(tn - t) <= 1e-12 * (1.0 + np.abs(t))
                t = tn
                if np.all(done):
                    break
            xc[gen] = a * a * xg / (t + a * a)
            yc[gen] = b * b * yg / (t + b * b)
        P = np.stack([xc.reshape(shape), yc.reshape(shape)], -1) * sgn
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.asarray(self.center) + np.stack(
            [c * P[..., 0] - s * P[..., 1], s * P[..., 0] + c * P[..., 1]], -1)

    def boundary_distance(self, X):
        return np.linalg.norm(_as_xy(X) - self.closest_point(X), axis=-1)

    def sdf(self, X):
        dist = self.boundary_distance(X)
        return np.where(self.contains(X), -dist, dist)

    def distance(self, X):
        return np.maximum(self.sdf(X), 0.0)

    def _quad(self, X, d):
        L = self._local(X)
        dl = self._dir_local(np.asarray(d, float))
        u = L / np.array([self.a, self.b])
        v = dl / np.array([self.a, self.b])
        A = float(v @ v)
        B = u @ v
        C = np.einsum("...i,...i->...", u, u) - 1.0
        return A, B, C

    def ray_exit(self, X, d):
        A, B, C = self._quad(X, d)
        return (-B + np.sqrt(np.maximum(B * B - A * C, 0.0))) / A

    def ray_entry(self, X, d, inflate=0.0):
        if inflate:
            raise NotImplementedError("inflated ellipses are not supported")
        A, B, C = self._quad(X, d)
        disc = B * B - A * C
        t = (-B - np.sqrt(np.maximum(disc, 0.0))) / A
        out = np.where((disc >= 0.0) & (t >= 0.0), t, np.inf)
        return np.where(C <= 0.0, 0.0, out)

    @property
    def diameter(self):
        return 2.0 * self.a

    @property
    def bbox(self):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        hx = math.hypot(self.a * c, self.b * s)
        hy = math.hypot(self.a * s, self.b * c)
        x, y = self.center
        return (x - hx, y - hy, x + hx, y + hy)

    def boundary_points(self, n=256):
        th = 2.0 * np.pi * np.arange(n) / n
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        lx, ly = self.a * np.cos(th), self.b * np.sin(th)
        return np.asarray(self.center) + np.stack([c * lx - s * ly, s * lx + c * ly], -1)


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    kind = "polygon"
    has_interior = True

    def __post_init__(self):
        V = tuple(_pair(v) for v in self.vertices)
        if len(V) < 3:
            raise ValidationError("polygon needs at least three vertices")
        P = np.array(V)
        E = np.roll(P, -1, axis=0) - P
        cross = E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0]
        if np.any(cross <= 0.0):
            raise ValidationError("polygon vertices must form a strictly convex counterclockwise chain")
        object.__setattr__(self, "vertices", V)

    @cached_property
    def _halfplanes(self):
        P = np.array(self.vertices)
        E = np.roll(P, -1, axis=0) - P
        N = np.stack([E[:, 1], -E[:, 0]], -1)
        N /= np.linalg.norm(N, axis=1, keepdims=True)
        return N, np.einsum("ij,ij->i", N, P)

    def sdf(self, X):
        X = _as_xy(X)
        N, c = self._halfplanes
        lin = X @ N.T - c
        inside = np.all(lin <= 0.0, axis=-1)
        P = np.array(self.vertices)
        Q = np.roll(P, -1, axis=0)
        dmin = np.min(np.stack([_segment_distance(X, p, q) for p, q in zip(P, Q)], -1), axis=-1)
        return np.where(inside, -dmin, dmin)

    def contains(self, X):
        N, c = self._halfplanes
        return np.all(_as_xy(X) @ N.T - c <= 0.0, axis=-1)

    def closest_point(self, X):
        X = _as_xy(X)
        P = np.array(self.vertices)
        Q = np.roll(P, -1, axis=0)
        best = None
        bestd = None
        for p, q in zip(P, Q):
            e = q - p
            t = np.clip(((X - p) @ e) / float(e @ e), 0.0, 1.0)
            c = p + t[..., None] * e
            d = np.linalg.norm(X - c, axis=-1)
            if best is None:
                best, bestd = c, d
            else:
                closer = d < bestd
                best = np.where(closer[..., None], c, best)
                bestd = np.where(closer, d, bestd)
        return best

    def boundary_distance(self, X):
        return np.abs(self.sdf(X))

    def distance(self, X):
        return np.maximum(self.sdf(X), 0.0)

    def ray_exit(self, X, d):
        X = _as_xy(X)
        N, c = self._halfplanes
        nd = N @ np.asarray(d, float)
        slack = c - X @ N.T
        with np.errstate(divide="ignore"):
            t = np.where(nd > 0, slack / np.where(nd > 0, nd, 1.0), np.inf)
        return np.min(t, axis=-1)

    def ray_entry(self, X, d, inflate=0.0):
        if inflate:
            raise NotImplementedError("inflated polygons are not supported")
        N, c = self._halfplanes
        return _halfplane_entry(X, np.asarray(d, float), N, c)

    @property
    def diameter(self):
        return polygon_diameter(np.array(self.vertices))

    @property
    def bbox(self):
        P = np.array(self.vertices)
        return (*P.min(axis=0), *P.max(axis=0))

    def boundary_points(self, n=256):
        P = np.array(self.vertices)
        Q = np.roll(P, -1, axis=0)
        lens = np.linalg.norm(Q - P, axis=1)
        per = lens.sum()
        pts = []
        for p, q, ln in zip(P, Q, lens):
            k = max(1, int(round(n * ln / per)))
            s = np.arange(k) / k
            pts.append(p + s[:, None] * (q - p))
        return np.concatenate(pts)

    @property
    def extreme_points(self):
        return np.array(self.vertices)


ConvexBody = Union[Point, Segment, Disk, Ellipse, Polygon]


def polygon_diameter(P):
    """Largest vertex distance of a convex CCW polygon by rotating calipers."""
    n = len(P)
    if n == 2:
        return float(np.linalg.norm(P[1] - P[0]))

    def area2(i, j, k):
        return abs((P[j, 0] - P[i, 0]) * (P[k, 1] - P[i, 1]) - (P[j, 1] - P[i, 1]) * (P[k, 0] - P[i, 0]))

    best = 0.0
    j = 1
    for i in range(n):
        i1 = (i + 1) % n
        while area2(i, i1, (j + 1) % n) > area2(i, i1, j):
            j = (j + 1) % n
        best = max(best, np.linalg.norm(P[i] - P[j]), np.linalg.norm(P[i1] - P[j]))
    return float(best)


def regular_polygon(n, radius=1.0, center=(0.0, 0.0), phase=0.0):
    th = phase + 2.0 * np.pi * np.arange(n) / n
    return Polygon(tuple(zip(center[0] + radius * np.cos(th), center[1] + radius * np.sin(th))))


def rectangle(x0, y0, x1, y1):
    return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


@dataclass(frozen=True)
class HighRidge:
    body: Union[Point, Segment]
    clearance: float

    @property
    def kind(self):
        return self.body.kind


@dataclass(frozen=True)
class ConvexRing:
    outer: ConvexBody
    inner: ConvexBody

    def __post_init__(self):
        if not self.outer.has_interior:
            raise ValidationError("outer body must have nonempty interior")
        pts = self.inner.extreme_points if hasattr(self.inner, "extreme_points") \
            else self.inner.boundary_points(512)
        if not np.all(self.outer.contains(pts)):
            raise ValidationError("inner body must lie inside the outer body")
        if self.separation <= GEOM_TOL:
            raise ZeroSeparation(f"dist(inner, outer boundary) = {self.separation:g}")

    @cached_property
    def separation(self):
        return _separation(self.outer, self.inner)

    @property
    def diameter(self):
        return self.outer.diameter

    @property
    def gamma_is_point(self):
        return self.inner.kind == "point"


def contains(body, x):
    return bool(body.contains(np.asarray(x, float)))


def boundary_distance(body, x):
    if not body.has_interior:
        raise ValidationError("boundary_distance needs a body with interior")
    return float(body.boundary_distance(np.asarray(x, float)))


def _separation(outer, inner):
    if inner.kind in ("point", "segment", "polygon"):
        # distance to the outer boundary is concave inside, so the minimum sits at an extreme point
        return float(np.min(outer.boundary_distance(inner.extreme_points)))
    n = 4096
    pts = inner.boundary_points(n)
    dist = outer.boundary_distance(pts)
    k = int(np.argmin(dist))

    # local refinement on the boundary parameter
    th0 = 2.0 * np.pi * k / n
    step = 2.0 * np.pi / n

    def f(th):
        c, s = math.cos(th), math.sin(th)
        if inner.kind == "disk":
            p = np.asarray(inner.center) + inner.radius * np.array([c, s])
        else:
            cr, sr = math.cos(inner.rotation), math.sin(inner.rotation)
            lx, ly = inner.a * c, inner.b * s
            p = np.asarray(inner.center) + np.array([cr * lx - sr * ly, sr * lx + cr * ly])
        return float(outer.boundary_distance(p))

    res = minimize_scalar(f, bounds=(th0 - step, th0 + step), method="bounded",
                          options={"xatol": 1e-13})
    return float(min(res.fun, dist[k]))


def separation(ring):
    """dist(Gamma, outer boundary)."""
    return ring.separation


def diameter(body):
    return float(body.diameter)


def _polygon_ridge(poly, tol):
    N, c = poly._halfplanes
    m = len(c)
    # Chebyshev centre: max r subject to n_i . x + r <= c_i
    A = np.hstack([N, np.ones((m, 1))])
    res = linprog([0.0, 0.0, -1.0], A_ub=A, b_ub=c, bounds=[(None, None)] * 3, method="highs")
    x = res.x[:2]
    r = float(res.x[2])
    slack = c - N @ x - r
    active = np.flatnonzero(slack <= max(tol, 1e-9))
    axis = None
    for i in active:
        for j in active:
            if i < j and N[i] @ N[j] < -1.0 + 1e-9:
                axis = np.array([-N[i, 1], N[i, 0]])
    if axis is not None:
        ends = []
        for sgn in (1.0, -1.0):
            rr = linprog(-sgn * axis, A_ub=N, b_ub=c - r, bounds=[(None, None)] * 2, method="highs")
            ends.append(rr.x)
        if np.linalg.norm(ends[0] - ends[1]) > tol:
            return HighRidge(Segment((tuple(ends[1] + 0.0), tuple(ends[0] + 0.0))), r)
        x = 0.5 * (ends[0] + ends[1])
    return HighRidge(Point(tuple(x + 0.0)), r)


def high_ridge(body, tol=1e-9):
    """Maximizer set of dist(., boundary): a point or a segment in the plane."""
    if body.kind == "disk":
        return HighRidge(Point(body.center), body.radius)
    if body.kind == "ellipse":
        return HighRidge(Point(body.center), body.b)
    if body.kind == "polygon":
        return _polygon_ridge(body, tol)
    raise ValidationError("high ridge needs a body with interior")


def _hausdorff_small(A, B, tol):
    """Hausdorff distance between two point/segment sets, by sampling the extremes."""
    pa = A.boundary_points(256)
    pb = B.boundary_points(256)
    return max(float(np.max(B.distance(pa))), float(np.max(A.distance(pb)))) <= tol


def is_stadium(ring, tol=1e-6, n_samples=2048):
    """True iff Gamma is the High Ridge of the outer body and the outer body is the
    clearance-neighbourhood of that ridge."""
    H = high_ridge(ring.outer, tol)
    if ring.inner.has_interior:
        return False
    if not _hausdorff_small(ring.inner, H.body, tol):
        return False
    xi = ring.outer.boundary_points(n_samples)
    return bool(np.max(np.abs(H.body.distance(xi) - H.clearance)) <= tol)


def corner_angles(body):
    """Interior angle at each polygon vertex; smooth bodies have none."""
    if body.kind != "polygon":
        return []
    P = np.array(body.vertices)
    out = []
    n = len(P)
    for i in range(n):
        a = P[i - 1] - P[i]
        b = P[(i + 1) % n] - P[i]
        ang = math.acos(np.clip(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)), -1.0, 1.0))
        out.append((tuple(P[i]), ang))
    return out


def inscribed_disk(ring):
    if not ring.gamma_is_point:
        raise NotAPoint("inscribed_disk needs a point Gamma")
    return Disk(ring.inner.center, ring.separation)


def require_ridge_segment(ring, tol=1e-6):
    """Validate that Gamma is a segment lying on the High Ridge of the outer body."""
    if ring.inner.kind not in ("segment", "point"):
        raise GammaNotOnRidge("Gamma must be a point or segment")
    H = high_ridge(ring.outer, tol)
    pts = ring.inner.boundary_points(64)
    if np.max(np.abs(ring.outer.boundary_distance(pts) - H.clearance)) > tol:
        raise GammaNotOnRidge("Gamma leaves the High Ridge")
    return H

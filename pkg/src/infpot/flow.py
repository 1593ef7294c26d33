"""Streamlines of the gradient field, Cl-point detection and merge trees."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .errors import OutOfDomain, SeedOutOfDomain
from .field import EXTERIOR

REACHED_GAMMA = "REACHED_GAMMA"
REACHED_OUTER = "REACHED_OUTER"
STALLED = "STALLED"
LEFT_DOMAIN = "LEFT_DOMAIN"


@dataclass(frozen=True)
class TraceParams:
    max_step: float | None = None  # default h/2
    delta_stop: float = 1e-3
    eps_speed: float | None = None  # default 1e-6 / separation
    stall_steps: int = 200
    max_steps: int = 200_000
    corner_nudge: float = 2.0  # in units of h
    tol_merge: float | None = None  # default h/2


@dataclass
class Streamline:
    seed: tuple
    vertices: np.ndarray
    s: np.ndarray
    V: np.ndarray
    speed: np.ndarray
    termination: str
    ascending: bool = True
    id: int = 0
    start: tuple | None = None  # first traced point (differs from seed after a nudge)

    @property
    def length(self):
        return float(self.s[-1])

    def point_at_level(self, c):
        return np.array([np.interp(c, self.V, self.vertices[:, 0]),
                         np.interp(c, self.V, self.vertices[:, 1])])

    def s_at_level(self, c):
        return float(np.interp(c, self.V, self.s))


@dataclass(frozen=True)
class ClPoint:
    location: tuple
    level: float
    pair: tuple
    s: tuple


@dataclass
class MergeTree:
    nodes: list
    edges: list  # (child id, parent id, ClPoint)
    parent: dict = dc_field(default_factory=dict)

    @property
    def roots(self):
        return [n for n in self.nodes if n not in self.parent]

    def merged(self, sid):
        return sid in self.parent


class _Sampler:
    """Scalar bilinear sampling of the potential and its gradient, tuned for tracing."""

    def __init__(self, field, vf):
        g = field.grid
        self.grid = g
        self.ox, self.oy = g.origin
        self.h = g.h
        self.nx, self.ny = g.nx, g.ny
        self.u = np.where(g.classes == EXTERIOR, 0.0, field.values)
        self.gx, self.gy = vf._filled
        self.ok = ~np.isnan(self.gx)

    def _cell(self, x, y):
        fx = (x - self.ox) / self.h
        fy = (y - self.oy) / self.h
        i = int(math.floor(fx))
        j = int(math.floor(fy))
        if not (0 <= i < self.nx - 1 and 0 <= j < self.ny - 1):
            raise OutOfDomain("point left the grid")
        ok = self.ok
        if not (ok[i, j] and ok[i + 1, j] and ok[i, j + 1] and ok[i + 1, j + 1]):
            best = None
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    a, b = i + di, j + dj
                    if (0 <= a < self.nx - 1 and 0 <= b < self.ny - 1 and ok[a, b] and ok[a + 1, b]
                            and ok[a, b + 1] and ok[a + 1, b + 1]):
                        d = (a + 0.5 - fx) ** 2 + (b + 0.5 - fy) ** 2
                        if best is None or d < best[0]:
                            best = (d, a, b)
            if best is None:
                raise OutOfDomain("no usable cell near point")
            _, i, j = best
        return i, j, fx - i, fy - j

    @staticmethod
    def _bil(a, i, j, tx, ty):
        return ((1 - tx) * (1 - ty) * a[i, j] + tx * (1 - ty) * a[i + 1, j]
                + (1 - tx) * ty * a[i, j + 1] + tx * ty * a[i + 1, j + 1])

    def grad(self, x, y):
        i, j, tx, ty = self._cell(x, y)
        return self._bil(self.gx, i, j, tx, ty), self._bil(self.gy, i, j, tx, ty)

    def value(self, x, y):
        i, j, tx, ty = self._cell(x, y)
        return self._bil(self.u, i, j, tx, ty)


def _gamma_distance(ring, x, y):
    inner = ring.inner
    if inner.kind == "point":
        return math.hypot(x - inner.center[0], y - inner.center[1])
    return float(inner.distance(np.array([x, y])))


def _prepare_seed(ring, grid, seed, params, ascending):
    x = np.asarray(seed, dtype=float)
    outer = ring.outer
    sdf = float(outer.sdf(x))
    if sdf > 1e-9 * max(1.0, grid.h):
        raise SeedOutOfDomain(f"seed {tuple(seed)} lies outside the outer body")
    if ring.inner.has_interior:
        if bool(ring.inner.contains(x)) and float(ring.inner.sdf(x)) < -1e-12:
            raise SeedOutOfDomain(f"seed {tuple(seed)} lies inside the inner body")
    elif _gamma_distance(ring, *x) < grid.r_gamma and ascending is False:
        raise SeedOutOfDomain("descending seed inside the Gamma capture disk")
    if outer.kind == "polygon" and sdf > -params.corner_nudge * grid.h:
        P = np.array(outer.vertices)
        dv = np.linalg.norm(P - x, axis=1)
        kv = int(np.argmin(dv))
        if dv[kv] <= 1e-9:
            # corners carry zero gradient: start a short way in along the bisector
            a = P[kv - 1] - P[kv]
            b = P[(kv + 1) % len(P)] - P[kv]
            bis = a / np.linalg.norm(a) + b / np.linalg.norm(b)
            x = P[kv] + params.corner_nudge * grid.h * bis / np.linalg.norm(bis)
    return x


def _rk4_dir(sam, x, y, sign):
    """Unit direction field sign*grad V/|grad V| and the raw speed at (x, y)."""
    gx, gy = sam.grad(x, y)
    sp = math.hypot(gx, gy)
    if sp == 0.0:
        return 0.0, 0.0, 0.0
    return sign * gx / sp, sign * gy / sp, sp


def _trace(field, vf, seed, params, ascending):
    grid = field.grid
    ring = grid.ring
    h = grid.h
    step_cap = params.max_step if params.max_step is not None else 0.5 * h
    eps_speed = params.eps_speed if params.eps_speed is not None else 1e-6 / ring.separation
    capture = max(2.0 * h, grid.r_gamma)
    sign = 1.0 if ascending else -1.0
    sam = _Sampler(field, vf)
    x0 = _prepare_seed(ring, grid, seed, params, ascending)
    x, y = float(x0[0]), float(x0[1])

    gx, gy = sam.grad(x, y)
    verts = [(x, y)]
    svals = [0.0]
    Vs = [sam.value(x, y)]
    speeds = [math.hypot(gx, gy)]
    term = STALLED
    slow = 0
    s = 0.0
    outer = ring.outer
    for _ in range(params.max_steps):
        if ascending:
            dg = _gamma_distance(ring, x, y)
            if dg < capture or Vs[-1] >= 1.0 - params.delta_stop:
                term = REACHED_GAMMA
                break
            ds = min(step_cap, max(0.5 * (dg - capture), 0.05 * h) + 1e-3 * h)
        else:
            if Vs[-1] <= params.delta_stop:
                term = REACHED_OUTER
                break
            ds = step_cap
        # classical RK4 on the unit direction field, step halved on sharp turns
        while True:
            k1x, k1y, _ = _rk4_dir(sam, x, y, sign)
            k2x, k2y, _ = _rk4_dir(sam, x + 0.5 * ds * k1x, y + 0.5 * ds * k1y, sign)
            k3x, k3y, _ = _rk4_dir(sam, x + 0.5 * ds * k2x, y + 0.5 * ds * k2y, sign)
            k4x, k4y, _ = _rk4_dir(sam, x + ds * k3x, y + ds * k3y, sign)
            turn = abs(k1x * k4y - k1y * k4x)
            if turn < 0.25 or ds < 1e-3 * h:
                break
            ds *= 0.5
        dx = ds * (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0
        dy = ds * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
        nx_, ny_ = x + dx, y + dy
        if float(outer.sdf(np.array([nx_, ny_]))) > 0.0:
            # clip the last step at the outer boundary
            lo, hi = 0.0, 1.0
            for _b in range(60):
                mid = 0.5 * (lo + hi)
                if float(outer.sdf(np.array([x + mid * dx, y + mid * dy]))) > 0.0:
                    hi = mid
                else:
                    lo = mid
            nx_, ny_ = x + lo * dx, y + lo * dy
            term = LEFT_DOMAIN if ascending else REACHED_OUTER
            x, y = nx_, ny_
            s += lo * math.hypot(dx, dy)
            gx, gy = sam.grad(x, y)
            verts.append((x, y))
            svals.append(s)
            Vs.append(0.0 if not ascending else sam.value(x, y))
            speeds.append(math.hypot(gx, gy))
            break
        s += math.hypot(dx, dy)
        x, y = nx_, ny_
        gx, gy = sam.grad(x, y)
        sp = math.hypot(gx, gy)
        verts.append((x, y))
        svals.append(s)
        Vs.append(sam.value(x, y))
        speeds.append(sp)
        slow = slow + 1 if sp < eps_speed else 0
        if slow > params.stall_steps:
            term = STALLED
            break
    return Streamline(seed=tuple(float(c) for c in seed), vertices=np.array(verts), s=np.array(svals),
                      V=np.array(Vs), speed=np.array(speeds), termination=term,
                      ascending=ascending, start=(float(x0[0]), float(x0[1])))


def trace_ascending(field, vf, seed, params=TraceParams()):
    """Follow dx/dt = grad V from ``seed`` until Gamma is reached."""
    return _trace(field, vf, seed, params, True)


def trace_descending(field, vf, seed, params=TraceParams()):
    """Follow dx/dt = -grad V from ``seed`` to the outer boundary.  Descending
    trajectories may branch; the numerically followed branch is returned."""
    return _trace(field, vf, seed, params, False)


def _common_levels(s1, s2):
    lo = max(s1.V[0], s2.V[0])
    hi = min(s1.V[-1], s2.V[-1])
    if not hi > lo:
        return None
    lv = np.union1d(s1.V, s2.V)
    lv = lv[(lv >= lo) & (lv <= hi)]
    return np.unique(np.concatenate([[lo], lv, [hi]]))


def _monotone(sl):
    """Vertex data restricted to a strictly increasing run of V (for level lookup)."""
    V = np.maximum.accumulate(sl.V)
    keep = np.concatenate([[True], np.diff(V) > 0])
    return V[keep], sl.vertices[keep], sl.s[keep]


def level_distances(s1, s2):
    """Distances between the points of two ascending streamlines on common levels."""
    V1, P1, S1 = _monotone(s1)
    V2, P2, S2 = _monotone(s2)
    lo = max(V1[0], V2[0])
    hi = min(V1[-1], V2[-1])
    if not hi > lo:
        return None
    lv = np.union1d(V1, V2)
    lv = np.unique(np.concatenate([[lo], lv[(lv >= lo) & (lv <= hi)], [hi]]))
    A = np.column_stack([np.interp(lv, V1, P1[:, 0]), np.interp(lv, V1, P1[:, 1])])
    B = np.column_stack([np.interp(lv, V2, P2[:, 0]), np.interp(lv, V2, P2[:, 1])])
    return lv, A, B, np.interp(lv, V1, S1), np.interp(lv, V2, S2)


def detect_merge(s1, s2, tol_merge, delta_stop=1e-3):
    """First level from which the two streamlines stay within ``tol_merge``."""
    res = level_distances(s1, s2)
    if res is None:
        return None
    lv, A, B, S1, S2 = res
    d = np.linalg.norm(A - B, axis=1)
    far = np.flatnonzero(d > tol_merge)
    if far.size == 0:
        k = 0
    else:
        k = int(far[-1]) + 1
        if k >= len(lv):
            return None
    if lv[k] >= 1.0 - delta_stop:
        return None
    loc = 0.5 * (A[k] + B[k])
    return ClPoint(location=(float(loc[0]), float(loc[1])), level=float(lv[k]),
                   pair=(s1.id, s2.id), s=(float(S1[k]), float(S2[k])))


def merge_tree(streamlines, tol_merge, delta_stop=1e-3):
    """Fold pairwise first meetings into a forest; each streamline keeps only its
    earliest merge, and ties resolve toward the lower id as parent."""
    ids = [sl.id for sl in streamlines]
    if len(set(ids)) != len(ids):
        raise ValueError("streamline ids must be unique")
    n = len(streamlines)
    first = {}
    for a in range(n):
        for b in range(a + 1, n):
            cl = detect_merge(streamlines[a], streamlines[b], tol_merge, delta_stop)
            if cl is None:
                continue
            for me, other in ((a, b), (b, a)):
                cur = first.get(me)
                key = (cl.level, streamlines[other].id)
                if cur is None or key < (cur[1].level, streamlines[cur[0]].id):
                    first[me] = (other, cl)
    parent = {}
    edges = []

    def ancestors(x):
        seen = set()
        while x in parent:
            x = parent[x]
            if x in seen:
                break
            seen.add(x)
        return seen

    order = sorted(first, key=lambda a: (first[a][1].level, streamlines[a].id))
    for a in order:
        b, cl = first[a]
        ia, ib = streamlines[a].id, streamlines[b].id
        if ia in ancestors(ib) or ia == ib:
            continue
        parent[ia] = ib
        edges.append((ia, ib, cl))
    return MergeTree(nodes=ids, edges=edges, parent=parent)


def _segments_intersect(P, Q):
    """All proper intersection points between polylines P and Q."""
    A0, A1 = P[:-1], P[1:]
    B0, B1 = Q[:-1], Q[1:]
    out = []
    rr = A1 - A0
    for start in range(0, len(B0), 256):
        b0 = B0[start:start + 256]
        ss = (B1[start:start + 256] - b0)
        denom = rr[:, None, 0] * ss[None, :, 1] - rr[:, None, 1] * ss[None, :, 0]
        w = b0[None, :, :] - A0[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[..., 0] * ss[None, :, 1] - w[..., 1] * ss[None, :, 0]) / denom
            u = (w[..., 0] * rr[:, None, 1] - w[..., 1] * rr[:, None, 0]) / denom
        hit = (np.abs(denom) > 1e-300) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
        ia, ib = np.nonzero(hit)
        for i, j in zip(ia, ib):
            out.append(A0[i] + t[i, j] * rr[i])
    return out


def crossing_check(s1, s2, tol_merge=None, delta_stop=1e-3):
    """True iff the polylines cross at a point that is not part of a merge."""
    if tol_merge is None:
        tol_merge = 1e-9
    if s1 is s2:
        return False
    cl = detect_merge(s1, s2, tol_merge, delta_stop)
    pts = _segments_intersect(s1.vertices, s2.vertices)
    # the shared terminal neighbourhood and a merged tail are not crossings
    ends = [s1.vertices[-1], s2.vertices[-1]]
    for p in pts:
        if any(np.linalg.norm(p - e) <= tol_merge for e in ends):
            continue
        if cl is not None:
            k = int(np.argmin(np.linalg.norm(s1.vertices - p, axis=1)))
            if s1.V[k] >= cl.level - 1e-12:
                continue
        return True
    return False


def refinement_consistency(field, vf, seed, params=TraceParams()):
    """Sup distance between traces with step caps h/2 and h/4, matched by arclength."""
    h = field.grid.h
    base = params.max_step if params.max_step is not None else 0.5 * h
    a = trace_ascending(field, vf, seed, replace(params, max_step=base))
    b = trace_ascending(field, vf, seed, replace(params, max_step=0.5 * base))
    smax = min(a.s[-1], b.s[-1])
    S = np.union1d(a.s[a.s <= smax], b.s[b.s <= smax])
    A = np.column_stack([np.interp(S, a.s, a.vertices[:, 0]), np.interp(S, a.s, a.vertices[:, 1])])
    B = np.column_stack([np.interp(S, b.s, b.vertices[:, 0]), np.interp(S, b.s, b.vertices[:, 1])])
    return float(np.max(np.linalg.norm(A - B, axis=1)))


def boundary_seeds(body, per_side):
    """Evenly spaced seeds on each polygon side, excluding corners and midpoints
    when the count is even; smooth bodies get ``per_side`` equally spaced points."""
    if body.kind == "polygon":
        P = np.array(body.vertices)
        Q = np.roll(P, -1, axis=0)
        t = (np.arange(per_side) + 0.5) / per_side
        return [tuple(p + ti * (q - p)) for p, q in zip(P, Q) for ti in t]
    return [tuple(x) for x in body.boundary_points(per_side)]


def trace_many(field, vf, seeds, params=TraceParams(), ascending=True, first_id=0):
    fn = trace_ascending if ascending else trace_descending
    out = []
    for n, sd in enumerate(seeds):
        sl = fn(field, vf, sd, params)
        sl.id = first_id + n
        out.append(sl)
    return out

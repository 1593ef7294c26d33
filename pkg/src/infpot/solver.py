"""Discrete infinity-harmonic and p-harmonic potentials on a classified grid.

The infinity solver iterates the monotone midrange scheme: at each interior node
the value is replaced by the average of the largest and smallest neighbour values
sampled on a circle of radius ``m*h`` in ``k`` directions.  Rays that leave the
ring are cut at the boundary crossing; the update then balances the steepest
ascending and descending slopes, which reduces to the plain midrange when no ray
is cut.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numba
import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .errors import NoConvergence
from .field import EXTERIOR, INNER_BC, INTERIOR, ScalarField

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveParams:
    m: float = 3.0
    k: int = 16
    tol_res: float = 1e-8
    max_sweeps: int = 200_000
    order: str = "lexicographic"  # or "checkerboard"
    omega: float = 1.0  # over-relaxation of the nodal update; 1 is plain Gauss-Seidel

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("stencil radius m must be >= 2")
        if self.k < 8:
            raise ValueError("need at least 8 stencil directions")
        if not self.tol_res > 0:
            raise ValueError("tol_res must be positive")
        if not 0.0 < self.omega < 2.0:
            raise ValueError("omega must lie in (0, 2)")
        if self.order not in ("lexicographic", "checkerboard"):
            raise ValueError(f"unknown sweep order {self.order!r}")


def stencil_directions(k):
    th = 2.0 * np.pi * np.arange(k) / k
    d = np.stack([np.cos(th), np.sin(th)], -1)
    d[np.abs(d) < 1e-15] = 0.0
    return d


class Stencil:
    """Precomputed ray geometry for every interior node of a grid.

    Column ``q < k`` is the ray in stencil direction ``q``; the last two columns are
    rays along the normal to the nearest outer / inner boundary point, used only
    when that point is closer than the stencil radius (outer) or ``inner_reach``
    stencil radii (inner, where the potential behaves like a cone).  ``mode`` is 0 for an
    interpolated end point, 1 for an end point on the boundary, -1 for unused.
    """

    def __init__(self, grid, m, k, inner_reach=None):
        self.grid = grid
        h = grid.h
        self.eps = eps = m * h
        D = stencil_directions(k)
        idx = np.argwhere(grid.interior)  # lexicographic in (i, j)
        self.I = idx[:, 0].astype(np.int64)
        self.J = idx[:, 1].astype(np.int64)
        N = len(idx)
        X = grid.coords[self.I, self.J]
        R = np.full((N, k + 2), eps)
        G = np.zeros((N, k + 2))
        mode = np.zeros((N, k + 2), dtype=np.int8)

        # constant bilinear offsets of the interpolated ray end points
        off = D * m
        base = np.floor(off + 1e-9)
        self.di = base[:, 0].astype(np.int64)
        self.dj = base[:, 1].astype(np.int64)
        self.fx = np.where(off[:, 0] - base[:, 0] < 1e-9, 0.0, off[:, 0] - base[:, 0])
        self.fy = np.where(off[:, 1] - base[:, 1] < 1e-9, 0.0, off[:, 1] - base[:, 1])

        cls = grid.classes
        for q, d in enumerate(D):
            t, g = grid.ray_clip(X, d, eps + 2.0 * h)
            a = self.I + self.di[q]
            b = self.J + self.dj[q]
            corners = [(a, b), (a + 1, b), (a, b + 1), (a + 1, b + 1)]
            weights = [(1 - self.fx[q]) * (1 - self.fy[q]), self.fx[q] * (1 - self.fy[q]),
                       (1 - self.fx[q]) * self.fy[q], self.fx[q] * self.fy[q]]
            dirty = np.zeros(N, dtype=bool)
            for (ca, cb), w in zip(corners, weights):
                if w > 0:
                    dirty |= cls[ca, cb] != INTERIOR
            # cut at the crossing; end points interpolating boundary-layer nodes are
            # moved out to the crossing just beyond the stencil radius
            to_bdry = (t < eps) | (dirty & (t < eps + 2.0 * h))
            R[:, q] = np.where(to_bdry, t, eps)
            G[:, q] = np.where(to_bdry, g, 0.0)
            mode[:, q] = to_bdry.astype(np.int8)

        ring = grid.ring
        if inner_reach is None:
            # near a point or segment the potential is cone-like and the fixed
            # direction set misses the apex; elsewhere one stencil radius suffices
            inner_reach = 1.0 if ring.inner.has_interior else 8.0
        d_out = ring.outer.boundary_distance(X)
        if ring.inner.has_interior:
            d_in = ring.inner.distance(X)
        else:
            d_in = ring.inner.distance(X) - grid.r_gamma
        for col, dd, gval, reach in ((k, d_out, 0.0, eps), (k + 1, d_in, 1.0, inner_reach * eps)):
            use = (dd < reach) & (dd > 0)
            R[:, col] = np.where(use, dd, -1.0)
            G[:, col] = gval
            mode[:, col] = np.where(use, 1, -1)
        self.R = R
        self.G = G
        self.mode = mode
        self.clipped = np.any(mode == 1, axis=1)
        self.k = k

    def colors(self, m):
        period = int(np.ceil(m)) + 4
        return (self.I % period) * period + (self.J % period), period * period


@numba.njit(cache=True)
def _node_update(u, n, I, J, R, G, mode, clipped, di, dj, fx, fy):
    kk = R.shape[1]
    k = di.shape[0]
    i = I[n]
    j = J[n]
    if not clipped[n]:
        vmax = -1e300
        vmin = 1e300
        for q in range(k):
            a = i + di[q]
            b = j + dj[q]
            v = ((1.0 - fx[q]) * (1.0 - fy[q]) * u[a, b] + fx[q] * (1.0 - fy[q]) * u[a + 1, b]
                 + (1.0 - fx[q]) * fy[q] * u[a, b + 1] + fx[q] * fy[q] * u[a + 1, b + 1])
            if v > vmax:
                vmax = v
            if v < vmin:
                vmin = v
        return 0.5 * (vmax + vmin)
    # solve max_q s_q(w) + min_q s_q(w) = 0 with slopes s_q(w) = (v_q - w) / r_q
    vals = np.empty(kk)
    lo = 1e300
    hi = -1e300
    for q in range(kk):
        md = mode[n, q]
        if md < 0:
            continue
        if md == 1:
            v = G[n, q]
        else:
            a = i + di[q]
            b = j + dj[q]
            v = ((1.0 - fx[q]) * (1.0 - fy[q]) * u[a, b] + fx[q] * (1.0 - fy[q]) * u[a + 1, b]
                 + (1.0 - fx[q]) * fy[q] * u[a, b + 1] + fx[q] * fy[q] * u[a + 1, b + 1])
        vals[q] = v
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    if hi - lo <= 0.0:
        return lo
    w = u[i, j]
    if w < lo or w > hi:
        w = 0.5 * (lo + hi)
    for _ in range(200):
        smax = -1e300
        smin = 1e300
        qa = 0
        qb = 0
        for q in range(kk):
            if mode[n, q] < 0:
                continue
            s = (vals[q] - w) / R[n, q]
            if s > smax:
                smax = s
                qa = q
            if s < smin:
                smin = s
                qb = q
        F = smax + smin
        if F > 0.0:
            lo = w
        elif F < 0.0:
            hi = w
        else:
            return w
        # root of the active linear piece
        ra = R[n, qa]
        rb = R[n, qb]
        wn = (vals[qa] / ra + vals[qb] / rb) / (1.0 / ra + 1.0 / rb)
        if not (wn > lo and wn < hi):
            wn = 0.5 * (lo + hi)
        if abs(wn - w) <= 1e-16 * (1.0 + abs(w)) or hi - lo <= 1e-16:
            return wn
        w = wn
    return w


@numba.njit(cache=True)
def _sweep_lex(u, I, J, R, G, mode, clipped, di, dj, fx, fy, omega):
    big = 0.0
    for n in range(I.shape[0]):
        w = _node_update(u, n, I, J, R, G, mode, clipped, di, dj, fx, fy)
        d = w - u[I[n], J[n]]
        if abs(d) > big:
            big = abs(d)
        u[I[n], J[n]] += omega * d
    return big


@numba.njit(cache=True, parallel=True)
def _sweep_colored(u, order, starts, I, J, R, G, mode, clipped, di, dj, fx, fy, omega):
    ncol = starts.shape[0] - 1
    big = 0.0
    for c in range(ncol):
        s0 = starts[c]
        s1 = starts[c + 1]
        upd = np.empty(s1 - s0)
        for t in numba.prange(s1 - s0):
            n = order[s0 + t]
            w = _node_update(u, n, I, J, R, G, mode, clipped, di, dj, fx, fy)
            d = w - u[I[n], J[n]]
            upd[t] = abs(d)
            u[I[n], J[n]] += omega * d
        for t in range(s1 - s0):
            if upd[t] > big:
                big = upd[t]
    return big


@numba.njit(cache=True)
def _apply_all(u, I, J, R, G, mode, clipped, di, dj, fx, fy):
    out = np.empty(I.shape[0])
    for n in range(I.shape[0]):
        out[n] = _node_update(u, n, I, J, R, G, mode, clipped, di, dj, fx, fy)
    return out


_STENCILS = {}


def get_stencil(grid, m, k):
    key = (id(grid), m, k)
    st = _STENCILS.get(key)
    if st is None or st.grid is not grid:
        st = Stencil(grid, m, k)
        _STENCILS.clear()
        _STENCILS[key] = st
    return st


def distance_initial_guess(grid):
    """min{1, dist(x, outer boundary)/separation}: the Lipschitz competitor."""
    ring = grid.ring
    u = grid.boundary_values()
    mask = grid.interior
    dist = ring.outer.boundary_distance(grid.coords[mask])
    u[mask] = np.minimum(1.0, dist / ring.separation)
    return u


def midrange_operator(field, params=SolveParams()):
    """One application of the scheme at every interior node (array over interior nodes)."""
    st = get_stencil(field.grid, params.m, params.k)
    u = np.ascontiguousarray(field.values, dtype=float)
    return _apply_all(u, st.I, st.J, st.R, st.G, st.mode, st.clipped, st.di, st.dj, st.fx, st.fy), st


def residual_infinity(field, params=SolveParams()):
    """max |T(u) - u| / h^2 over interior nodes."""
    Tu, st = midrange_operator(field, params)
    return float(np.max(np.abs(Tu - field.values[st.I, st.J]))) / field.grid.h**2


def solve_infinity(grid, params=SolveParams(), init=None, callback=None):
    """Gauss-Seidel iteration of the midrange scheme to a fixed point.

    Iteration stops once the observed per-sweep update, corrected by the estimated
    contraction factor, bounds the remaining error by ``tol_res``.
    """
    st = get_stencil(grid, params.m, params.k)
    u = distance_initial_guess(grid) if init is None else np.array(init, dtype=float)
    u[grid.classes != INTERIOR] = 0.0
    u[grid.classes == INNER_BC] = 1.0
    u = np.ascontiguousarray(u)
    args = (st.I, st.J, st.R, st.G, st.mode, st.clipped, st.di, st.dj, st.fx, st.fy)
    omega = params.omega
    if params.order == "checkerboard":
        col, ncol = st.colors(params.m)
        order = np.argsort(col, kind="stable").astype(np.int64)
        starts = np.searchsorted(col[order], np.arange(ncol + 1)).astype(np.int64)

        def sweep():
            return _sweep_colored(u, order, starts, *args, omega)
    else:
        def sweep():
            return _sweep_lex(u, *args, omega)

    t0 = time.perf_counter()
    prev = np.inf
    rho = 0.0
    history = []
    window = 200
    best = np.inf
    for it in range(1, params.max_sweeps + 1):
        upd = sweep()
        history.append(upd)
        if omega > 1.0 and it % window == 0:
            # over-relaxing a max/min operator can lock into a cycle; back off toward
            # plain Gauss-Seidel, which has the same fixed point
            recent = min(history[-window:])
            if recent > 0.9 * best:
                omega = 1.0 if omega < 1.05 else 1.0 + 0.5 * (omega - 1.0)
                log.info("sweep %d: no progress, omega reduced to %.3f", it, omega)
                rho = 0.0
            best = min(best, recent)
        if prev < np.inf and prev > 0:
            r = upd / prev
            # smooth the contraction estimate over recent sweeps
            rho = r if it < 20 else max(r, 0.9 * rho + 0.1 * r)
        prev = upd
        bound = upd / max(1.0 - min(rho, 0.999999), 1e-6)
        if callback is not None:
            callback(it, upd)
        if it % 500 == 0:
            log.info("sweep %d residual %.3e elapsed %.2fs", it, upd, time.perf_counter() - t0)
        if upd < params.tol_res and bound < params.tol_res:
            break
    else:
        raise NoConvergence(f"no convergence after {params.max_sweeps} sweeps (update {upd:.3e})",
                            residual=upd, sweeps=params.max_sweeps)
    log.info("converged: sweep %d residual %.3e elapsed %.2fs", it, upd, time.perf_counter() - t0)
    np.clip(u, 0.0, 1.0, out=u)
    info = {"sweeps": it, "last_update": upd, "rho": rho, "seconds": time.perf_counter() - t0,
            "m": params.m, "k": params.k, "tol_res": params.tol_res, "omega": omega}
    return ScalarField(grid, u, info)


# ---------------------------------------------------------------- p-Laplacian

@numba.njit(cache=True)
def _tri_terms(u, i, j, classes, p, qs, dq, d2q):
    """Collect (q, dq/du, d2q/du2) for every corner triangle touching node (i, j).

    A corner triangle at node c uses the two cell edges meeting at c; each cell
    contributes its four corner triangles with weight 1/2."""
    nt = 0
    w = u[i, j]
    for sx in (-1, 1):
        for sy in (-1, 1):
            ci = i + sx
            cj = j + sy
            # cell spanned by (i,j),(ci,j),(i,cj),(ci,cj) must not touch EXTERIOR
            if (classes[ci, j] == EXTERIOR or classes[i, cj] == EXTERIOR
                    or classes[ci, cj] == EXTERIOR):
                continue
            # triangle cornered at (i,j)
            a = u[ci, j] - w
            b = u[i, cj] - w
            qs[nt] = a * a + b * b
            dq[nt] = -2.0 * (a + b)
            d2q[nt] = 4.0
            nt += 1
            # triangle cornered at (ci, j): legs to (i, j) and (ci, cj)
            a = w - u[ci, j]
            b = u[ci, cj] - u[ci, j]
            qs[nt] = a * a + b * b
            dq[nt] = 2.0 * a
            d2q[nt] = 2.0
            nt += 1
            # triangle cornered at (i, cj): legs to (ci, cj) and (i, j)
            a = u[ci, cj] - u[i, cj]
            b = w - u[i, cj]
            qs[nt] = a * a + b * b
            dq[nt] = 2.0 * b
            d2q[nt] = 2.0
            nt += 1
    return nt


@numba.njit(cache=True)
def _local_energy(u, i, j, classes, p, w):
    old = u[i, j]
    u[i, j] = w
    qs = np.empty(12)
    dq = np.empty(12)
    d2q = np.empty(12)
    nt = _tri_terms(u, i, j, classes, p, qs, dq, d2q)
    u[i, j] = old
    e = 0.0
    for t in range(nt):
        e += qs[t] ** (0.5 * p)
    return e


@numba.njit(cache=True)
def _p_sweep(u, I, J, classes, p, newton_iters):
    qs = np.empty(12)
    dq = np.empty(12)
    d2q = np.empty(12)
    big = 0.0
    half = 0.5 * p
    for n in range(I.shape[0]):
        i = I[n]
        j = J[n]
        start = u[i, j]
        for _ in range(newton_iters):
            nt = _tri_terms(u, i, j, classes, p, qs, dq, d2q)
            s = 0.0
            for t in range(nt):
                if qs[t] > s:
                    s = qs[t]
            if s <= 0.0:
                break
            g1 = 0.0
            g2 = 0.0
            for t in range(nt):
                q = qs[t] / s
                g1 += q ** (half - 1.0) * dq[t]
                g2 += (half - 1.0) * q ** (half - 2.0) * dq[t] * dq[t] / s + q ** (half - 1.0) * d2q[t]
            if g2 <= 0.0:
                break
            step = -g1 / g2
            # damping: halve until the local energy does not increase
            e0 = _local_energy(u, i, j, classes, p, u[i, j])
            lam = 1.0
            for _b in range(30):
                cand = u[i, j] + lam * step
                if _local_energy(u, i, j, classes, p, cand) <= e0:
                    break
                lam *= 0.5
            else:
                lam = 0.0
            u[i, j] += lam * step
            if abs(lam * step) < 1e-15:
                break
        if u[i, j] < 0.0:
            u[i, j] = 0.0
        elif u[i, j] > 1.0:
            u[i, j] = 1.0
        d = abs(u[i, j] - start)
        if d > big:
            big = d
    return big


def _p_triangles(grid):
    """Node indices (corner, x-leg, y-leg) of the four corner triangles of every
    cell whose corners are all non-EXTERIOR."""
    ok = grid.classes != EXTERIOR
    cells = ok[:-1, :-1] & ok[1:, :-1] & ok[:-1, 1:] & ok[1:, 1:]
    ci, cj = np.nonzero(cells)
    ny = grid.ny
    n00 = ci * ny + cj
    n10 = n00 + ny
    n01 = n00 + 1
    n11 = n10 + 1
    C = np.concatenate([n00, n10, n01, n11])
    A = np.concatenate([n10, n00, n11, n01])
    B = np.concatenate([n01, n11, n00, n10])
    return C, A, B


def _newton_p(u, free, tri, p, tol, max_iter):
    """Damped Newton on the corner-triangle p-energy; ``u`` is the flat node vector."""
    C, A, B = tri
    nfree = int(free.max()) + 1
    fc, fa, fb = free[C], free[A], free[B]
    half = 0.5 * p
    rows = np.concatenate([fc, fc, fc, fa, fa, fa, fb, fb, fb])
    cols = np.concatenate([fc, fa, fb, fc, fa, fb, fc, fa, fb])
    keep = (rows >= 0) & (cols >= 0)
    rows, cols = rows[keep], cols[keep]

    def energy(v, s):
        d1 = v[A] - v[C]
        d2 = v[B] - v[C]
        return float(np.sum(((d1 * d1 + d2 * d2) / s) ** half))

    for it in range(1, max_iter + 1):
        d1 = u[A] - u[C]
        d2 = u[B] - u[C]
        q = d1 * d1 + d2 * d2
        s = float(q.max())
        if s <= 0.0:
            return u, it, 0.0
        qn = q / s
        w = qn ** (half - 1.0)
        # w2 = (p-2) (q/s)^(p/2-2) / s, written to stay finite at q = 0
        w2 = np.where(q > 0, (p - 2.0) * w / np.where(q > 0, q, 1.0), 0.0)
        ga, gb = w * d1, w * d2
        g = np.zeros(nfree)
        for f, val in ((fa, ga), (fb, gb), (fc, -ga - gb)):
            m = f >= 0
            np.add.at(g, f[m], val[m])
        m11 = w + w2 * d1 * d1
        m22 = w + w2 * d2 * d2
        m12 = w2 * d1 * d2
        # local Hessian in (c, a, b) from A^T M A with A = [[-1, 1, 0], [-1, 0, 1]]
        hcc = m11 + 2 * m12 + m22
        hca = -(m11 + m12)
        hcb = -(m12 + m22)
        vals = np.concatenate([hcc, hca, hcb, hca, m11, m12, hcb, m12, m22])[keep]
        H = sparse.csr_matrix((vals, (rows, cols)), shape=(nfree, nfree))
        # rows whose triangle weights underflowed get a tiny floor, not a huge step
        H = H + sparse.diags(1e-13 * H.diagonal() + 1e-280)
        step = spsolve(H.tocsc(), -g)
        big = float(np.max(np.abs(step)))
        if big > 0.25:
            step *= 0.25 / big
        full = np.zeros_like(u)
        full[free >= 0] = step[free[free >= 0]]
        e0 = energy(u, s)
        # directional derivative of the scaled energy: dE/du = (p/s) * g
        slope = (p / s) * float(g @ step)
        lam = 1.0
        if -slope < 1e-10 * e0:
            # decrease below energy roundoff: take the pure Newton step
            lam = 0.0
            cand = np.clip(u + full, 0.0, 1.0)
        while 1e-12 < lam:
            cand = np.clip(u + lam * full, 0.0, 1.0)
            if energy(cand, s) <= e0 + 1e-4 * lam * slope:
                break
            lam *= 0.5
        if 0.0 < lam <= 1e-12:
            cand = u
        upd = big
        u = cand
        if upd < tol:
            return u, it, upd
        if 0.0 < lam <= 1e-12:
            raise NoConvergence("p-solver: line search failed", residual=upd, sweeps=it)
    raise NoConvergence(f"p-solver: Newton did not converge in {max_iter} iterations", residual=upd,
                        sweeps=max_iter)


def solve_p(grid, p, params=SolveParams(), init=None, method="newton", newton_iters=4, max_iter=500,
            boundary=None):
    """Minimise the discrete p-Dirichlet energy.

    ``method="newton"`` runs a global damped Newton iteration, continued in p
    from p=2 (or from ``init``) by doubling; ``"gauss-seidel"`` runs nodewise
    damped Newton in Gauss-Seidel sweeps.  Both converge to the same minimiser.
    ``boundary`` optionally overrides the 0/1 data at non-INTERIOR nodes (values in [0, 1])."""
    if not (p >= 2 and np.isfinite(p)):
        raise ValueError("p must be finite and >= 2")
    if method not in ("newton", "gauss-seidel"):
        raise ValueError("method must be 'newton' or 'gauss-seidel'")
    u = distance_initial_guess(grid) if init is None else np.array(init, dtype=float)
    u[grid.classes != INTERIOR] = 0.0
    u[grid.classes == INNER_BC] = 1.0
    if boundary is not None:
        fixed = ~grid.interior
        u[fixed] = np.asarray(boundary, float)[fixed]
    t0 = time.perf_counter()
    if method == "newton":
        flat = grid.interior.ravel()
        free = np.full(flat.size, -1, dtype=np.int64)
        free[flat] = np.arange(int(flat.sum()))
        tri = _p_triangles(grid)
        v = u.ravel().copy()
        ladder = [p] if init is not None else []
        if init is None:
            q = 2.0
            while q < p:
                ladder.append(q)
                q *= 2.0
            ladder.append(p)
        total = 0
        for q in ladder:
            tol = params.tol_res if q == p else max(params.tol_res, 1e-6)
            v, its, upd = _newton_p(v, free, tri, q, tol, max_iter)
            total += its
        u = v.reshape(grid.shape)
        info = {"iterations": total, "last_update": upd, "p": p, "method": method,
                "seconds": time.perf_counter() - t0}
        return ScalarField(grid, u, info)
    u = np.ascontiguousarray(u)
    idx = np.argwhere(grid.interior)
    I = idx[:, 0].astype(np.int64)
    J = idx[:, 1].astype(np.int64)
    classes = np.ascontiguousarray(grid.classes)
    prev = np.inf
    rho = 0.0
    for it in range(1, params.max_sweeps + 1):
        upd = _p_sweep(u, I, J, classes, float(p), newton_iters)
        if prev < np.inf and prev > 0:
            r = upd / prev
            rho = r if it < 20 else max(r, 0.9 * rho + 0.1 * r)
        prev = upd
        bound = upd / max(1.0 - min(rho, 0.999999), 1e-6)
        if upd < params.tol_res and bound < params.tol_res:
            break
    else:
        raise NoConvergence(f"p-solver: no convergence after {params.max_sweeps} sweeps",
                            residual=upd, sweeps=params.max_sweeps)
    info = {"sweeps": it, "last_update": upd, "p": p, "method": method,
            "seconds": time.perf_counter() - t0}
    return ScalarField(grid, u, info)

"""Command-line entry point: ``infpot <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checks, flow
from . import io as fio
from .errors import InfPotError, IoError, NoConvergence, ParseError, TooCoarse, ValidationError
from .field import EXTERIOR, build_grid, gradient
from .geometry import ConvexRing, Disk, Ellipse, Point, rectangle

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

log = logging.getLogger("infpot")


class _NumericFailure(Exception):
    pass


def _solver_flags(p):
    p.add_argument("--h", type=float, default=1 / 128, help="grid spacing (default: 1/128)")
    p.add_argument("--r-gamma", type=float, default=0.0,
                   help="capture radius around a point or segment Gamma; values below h are raised to h (default: 0)")
    p.add_argument("--tol", type=float, default=1e-8, help="solver stopping tolerance tol_res (default: 1e-8)")
    p.add_argument("--stencil-m", type=float, default=3.0, help="stencil radius in cells (default: 3)")
    p.add_argument("--stencil-k", type=int, default=16, help="number of stencil directions (default: 16)")
    p.add_argument("--parallel", action="store_true",
                   help="checkerboard sweep order with parallel colour classes (default: off, lexicographic)")


def _seed_flags(p):
    p.add_argument("--seeds", default="16",
                   help="seed specification: N seeds per side, 'x,y;x,y;...' explicit list, "
                        "or 'random:N' boundary points (default: 16)")
    p.add_argument("--seed-int", type=int, default=0, help="integer seed for 'random:N' seeds (default: 0)")


def build_parser():
    ap = argparse.ArgumentParser(prog="infpot", description="Infinity-harmonic potentials in convex rings.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a domain spec and write a field snapshot")
    p.add_argument("--domain", required=True, help="domain spec JSON file")
    p.add_argument("--p", type=float, default=None,
                   help="solve the p-Laplace problem for this finite p instead of p = infinity (default: none)")
    _solver_flags(p)
    p.add_argument("--out", default=".", help="output directory (default: current directory)")

    p = sub.add_parser("trace", help="trace ascending streamlines and build the merge tree")
    p.add_argument("--field", required=True, help="field snapshot file")
    _seed_flags(p)
    p.add_argument("--tol-merge", type=float, default=None, help="merge tolerance (default: h/2)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")

    p = sub.add_parser("verify", help="run the applicable checks on a field; exit 1 if any fails")
    p.add_argument("--field", required=True, help="field snapshot file")
    p.add_argument("--out", default=".", help="output directory for report.json (default: current directory)")

    p = sub.add_parser("render", help="write an SVG figure")
    p.add_argument("--field", required=True, help="field snapshot file")
    p.add_argument("--streamlines", default=None, help="streamline CSV (default: none)")
    p.add_argument("--merge-tree", default=None, help="merge-tree JSON (default: none)")
    p.add_argument("--out", default=".", help="output directory for figure.svg (default: current directory)")

    for name, what in (("reproduce-square", "square with Gamma at the centre"),
                       ("reproduce-stadium", "unit disk with Gamma at the centre"),
                       ("reproduce-ellipse", "ellipse a=1.5, b=1 with Gamma at the centre")):
        p = sub.add_parser(name, help=f"full pipeline on the {what}")
        _solver_flags(p)
        _seed_flags(p)
        p.add_argument("--out", default=name, help=f"output directory (default: ./{name})")
    return ap


def _params(a):
    from .solver import SolveParams
    return SolveParams(m=a.stencil_m, k=a.stencil_k, tol_res=a.tol,
                       order="checkerboard" if a.parallel else "lexicographic")


def _outdir(a):
    d = Path(a.out)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoError(f"{d}: {e}") from e
    return d


def parse_seeds(text, ring, seed_int=0):
    text = text.strip()
    if text.startswith("random:"):
        n = int(text.split(":", 1)[1])
        rng = np.random.default_rng(seed_int)
        B = np.asarray(ring.outer.boundary_points(4096))
        return [tuple(map(float, B[i])) for i in np.sort(rng.choice(len(B), size=n, replace=False))]
    if ";" in text or "," in text:
        out = []
        for part in text.split(";"):
            if part.strip():
                x, y = part.split(",")
                out.append((float(x), float(y)))
        return out
    return flow.boundary_seeds(ring.outer, int(text))


def _require_finite(field):
    live = field.grid.classes != EXTERIOR
    if not np.all(np.isfinite(field.values[live])):
        raise _NumericFailure("field contains non-finite values")


def _solve(ring, a):
    from .solver import solve_infinity, solve_p
    grid = build_grid(ring, a.h, a.r_gamma)
    if getattr(a, "p", None) is not None:
        return solve_p(grid, a.p, _params(a))
    return solve_infinity(grid, _params(a))


def _trace_and_tree(field, vf, seeds, tol_merge=None):
    params = flow.TraceParams(tol_merge=tol_merge)
    S = flow.trace_many(field, vf, seeds, params)
    tol = tol_merge if tol_merge is not None else 0.5 * field.grid.h
    return S, flow.merge_tree(S, tol, params.delta_stop)


def _general_verdicts(field, vf):
    ring = field.grid.ring
    out = [checks.gradient_bounds_check(field, vf), checks.outer_lower_bound_check(field, vf)]
    if isinstance(ring.inner, Point):
        out.append(checks.inner_limit_check(field, vf))
        try:
            out.append(checks.theorem_single_check(field, vf))
        except checks.IsAStadium:
            out.append(checks.Verdict("single_point_merges", {"stadium": True}, {}, checks.REPORT,
                                      "stadium: skipped"))
    if checks._is_unit_square_ring(ring):
        out += checks.square_suite(field, vf)
    return out


def _report(verdicts, path):
    fio.save_report(path, verdicts)
    for v in verdicts:
        print(f"{v.status.upper():11s} {v.name}")
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_VERIFY


def cmd_solve(a):
    ring = fio.load_domain(a.domain)
    f = _solve(ring, a)
    _require_finite(f)
    fio.save_field(_outdir(a) / "field.txt", f)
    return EXIT_OK


def cmd_trace(a):
    f = fio.load_field(a.field)
    _require_finite(f)
    vf = gradient(f)
    S, tree = _trace_and_tree(f, vf, parse_seeds(a.seeds, f.grid.ring, a.seed_int), a.tol_merge)
    d = _outdir(a)
    fio.save_streamlines(d / "streamlines.csv", S)
    fio.save_merge_tree(d / "merge_tree.json", tree)
    return EXIT_OK


def cmd_verify(a):
    f = fio.load_field(a.field)
    _require_finite(f)
    return _report(_general_verdicts(f, gradient(f)), _outdir(a) / "report.json")


def cmd_render(a):
    f = fio.load_field(a.field)
    _require_finite(f)
    S = fio.load_streamlines(a.streamlines) if a.streamlines else []
    tree = fio.load_merge_tree(a.merge_tree) if a.merge_tree else None
    fio.render_svg(f, S, tree, fio.RenderSpec(), _outdir(a) / "figure.svg")
    return EXIT_OK


def _reproduce(a, ring, extra_seeds, extra_checks):
    d = _outdir(a)
    fio.save_domain(d / "domain.json", ring)
    f = _solve(ring, a)
    _require_finite(f)
    fio.save_field(d / "field.txt", f)
    vf = gradient(f)
    seeds = parse_seeds(a.seeds, ring, a.seed_int) + extra_seeds
    S, tree = _trace_and_tree(f, vf, seeds)
    fio.save_streamlines(d / "streamlines.csv", S)
    fio.save_merge_tree(d / "merge_tree.json", tree)
    fio.render_svg(f, S, tree, fio.RenderSpec(), d / "figure.svg")
    return _report(extra_checks(f, vf, S, tree), d / "report.json")


def cmd_reproduce_square(a):
    ring = ConvexRing(rectangle(-1, -1, 1, 1), Point((0.0, 0.0)))
    extra = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)]

    def run(f, vf, S, tree):
        out = checks.square_suite(f, vf)
        out += [checks.gradient_bounds_check(f, vf), checks.inner_limit_check(f, vf),
                checks.cl_criterion(f, vf, xi0=(1.0, -1.0))[1]]
        return out
    return _reproduce(a, ring, extra, run)


def cmd_reproduce_stadium(a):
    ring = ConvexRing(Disk((0.0, 0.0), 1.0), Point((0.0, 0.0)))

    def run(f, vf, S, tree):
        g = f.grid
        X = g.coords
        r = np.hypot(X[..., 0], X[..., 1])
        m = g.interior & (r > 4 * g.h)
        err = float(np.max(np.abs(f.values - (1 - r))[m]))
        sp = vf.speed[m]
        out = [checks.Verdict("cone_exactness", {"sup_error": err, "speed_min": float(sp.min()),
                                                 "speed_max": float(sp.max())},
                              {"sup_error": 0.02, "speed": [0.95, 1.05]},
                              checks._status(err <= 0.02 and sp.min() >= 0.95 and sp.max() <= 1.05),
                              "the potential of a stadium is the distance function"),
               checks.Verdict("stadium_no_merges", {"merges": len(tree.edges)}, {"merges": 0},
                              checks._status(not tree.edges), "streamlines of a stadium never meet")]
        return out + _general_verdicts(f, vf)
    return _reproduce(a, ring, [], run)


def cmd_reproduce_ellipse(a):
    ring = ConvexRing(Ellipse((0.0, 0.0), 1.5, 1.0), Point((0.0, 0.0)))

    def run(f, vf, S, tree):
        return _general_verdicts(f, vf) + [checks.cl_criterion(f, vf, xi0=(1.5, 0.0))[1]]
    return _reproduce(a, ring, [], run)


COMMANDS = {"solve": cmd_solve, "trace": cmd_trace, "verify": cmd_verify, "render": cmd_render,
            "reproduce-square": cmd_reproduce_square, "reproduce-stadium": cmd_reproduce_stadium,
            "reproduce-ellipse": cmd_reproduce_ellipse}


def main(argv=None):
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a)
    except (NoConvergence, _NumericFailure) as e:
        print(f"infpot: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, IoError, ValidationError, TooCoarse, ValueError) as e:
        print(f"infpot: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InfPotError as e:
        print(f"infpot: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

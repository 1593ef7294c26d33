"""Files: domain specs, field snapshots, streamline sets, merge trees, reports, SVG."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import EmptyLevel, IoError, ParseError, VersionMismatch
from .field import NODE_CLASS_NAMES, ScalarField, build_grid, level_curve
from .flow import ClPoint, MergeTree, Streamline
from .geometry import ConvexRing, Disk, Ellipse, Point, Polygon, Segment

FORMAT_VERSION = 1


# ------------------------------------------------------------------ geometry

def body_to_dict(body):
    if isinstance(body, Disk):
        return {"type": "disk", "center": list(body.center), "radius": body.radius}
    if isinstance(body, Ellipse):
        return {"type": "ellipse", "center": list(body.center), "a": body.a, "b": body.b,
                "rotation": body.rotation}
    if isinstance(body, Polygon):
        return {"type": "polygon", "vertices": [list(v) for v in body.vertices]}
    if isinstance(body, Point):
        return {"type": "point", "center": list(body.center)}
    if isinstance(body, Segment):
        return {"type": "segment", "endpoints": [list(e) for e in body.endpoints]}
    raise TypeError(f"unknown body {body!r}")


def _need(d, key, where):
    if not isinstance(d, dict):
        raise ParseError(f"{where}: expected an object")
    if key not in d:
        raise ParseError(f"{where}: missing key {key!r}")
    return d[key]


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _xy(v, where):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ParseError(f"{where}: expected a coordinate pair")
    return (_num(v[0], where), _num(v[1], where))


def body_from_dict(d, where="body"):
    kind = _need(d, "type", where)
    if kind == "disk":
        return Disk(_xy(_need(d, "center", where), f"{where}.center"), _num(_need(d, "radius", where), f"{where}.radius"))
    if kind == "ellipse":
        return Ellipse(_xy(_need(d, "center", where), f"{where}.center"),
                       _num(_need(d, "a", where), f"{where}.a"), _num(_need(d, "b", where), f"{where}.b"),
                       _num(d.get("rotation", 0.0), f"{where}.rotation"))
    if kind == "polygon":
        verts = _need(d, "vertices", where)
        if not isinstance(verts, list):
            raise ParseError(f"{where}.vertices: expected a list")
        return Polygon(tuple(_xy(v, f"{where}.vertices[{n}]") for n, v in enumerate(verts)))
    if kind == "point":
        return Point(_xy(_need(d, "center", where), f"{where}.center"))
    if kind == "segment":
        ends = _need(d, "endpoints", where)
        if not isinstance(ends, list) or len(ends) != 2:
            raise ParseError(f"{where}.endpoints: expected two points")
        return Segment(tuple(_xy(e, f"{where}.endpoints[{n}]") for n, e in enumerate(ends)))
    raise ParseError(f"{where}.type: unknown shape {kind!r}")


def _check_version(d, where):
    v = d.get("format_version", FORMAT_VERSION) if isinstance(d, dict) else None
    if v != FORMAT_VERSION:
        raise VersionMismatch(f"{where}: unsupported format_version {v!r}")


def ring_to_dict(ring):
    return {"format_version": FORMAT_VERSION, "outer": body_to_dict(ring.outer), "inner": body_to_dict(ring.inner)}


def ring_from_dict(d, where="domain"):
    _check_version(d, where)
    outer = body_from_dict(_need(d, "outer", where), f"{where}.outer")
    inner = body_from_dict(_need(d, "inner", where), f"{where}.inner")
    return ConvexRing(outer, inner)


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise IoError(f"{path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e


def _write_text(path, text):
    try:
        Path(path).write_text(text)
    except OSError as e:
        raise IoError(f"{path}: {e}") from e


def load_domain(path):
    return ring_from_dict(_read_json(path), str(path))


def save_domain(path, ring):
    _write_text(path, json.dumps(ring_to_dict(ring), indent=2) + "\n")


# ------------------------------------------------------------------ fields

def _g17(x):
    return format(float(x), ".17g")


def save_field(path, field):
    """Text snapshot: header, then one grid row (fixed x index) per line, then classes."""
    g = field.grid
    legend = " ".join(f"{k}={v}" for k, v in sorted(NODE_CLASS_NAMES.items()))
    lines = [
        "# infpot field snapshot",
        f"format_version {FORMAT_VERSION}",
        f"nx ny h origin_x origin_y {g.nx} {g.ny} {_g17(g.h)} {_g17(g.origin[0])} {_g17(g.origin[1])}",
        f"r_gamma {_g17(g.r_gamma)}",
        f"classes {legend}",
        "domain " + json.dumps(ring_to_dict(g.ring), separators=(",", ":")),
        "values",
    ]
    lines += [" ".join(_g17(v) for v in row) for row in field.values]
    lines.append("class_rows")
    lines += ["".join(str(int(c)) for c in row) for row in g.classes]
    _write_text(path, "\n".join(lines) + "\n")


def load_field(path):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise IoError(f"{path}: {e}") from e

    def fail(n, msg):
        raise ParseError(f"{path}: line {n + 1}: {msg}")

    if len(lines) < 7 or not lines[0].startswith("#"):
        fail(0, "not a field snapshot")
    tag = lines[1].split()
    if len(tag) != 2 or tag[0] != "format_version":
        fail(1, "expected format_version")
    if tag[1] != str(FORMAT_VERSION):
        raise VersionMismatch(f"{path}: unsupported format_version {tag[1]!r}")
    hdr = lines[2].split()
    if hdr[:5] != ["nx", "ny", "h", "origin_x", "origin_y"] or len(hdr) != 10:
        fail(2, "expected 'nx ny h origin_x origin_y' header")
    try:
        nx, ny = int(hdr[5]), int(hdr[6])
        h, ox, oy = float(hdr[7]), float(hdr[8]), float(hdr[9])
        r_gamma = float(lines[3].split()[1])
    except (ValueError, IndexError):
        fail(2, "bad header numbers")
    if not lines[5].startswith("domain "):
        fail(5, "expected domain line")
    try:
        ring = ring_from_dict(json.loads(lines[5][7:]), f"{path}: domain")
    except json.JSONDecodeError as e:
        fail(5, f"domain JSON: {e.msg}")
    if lines[6] != "values":
        fail(6, "expected 'values'")
    if len(lines) < 7 + nx + 1 + nx:
        fail(len(lines) - 1, "file truncated")
    vals = np.empty((nx, ny))
    for i in range(nx):
        parts = lines[7 + i].split()
        if len(parts) != ny:
            fail(7 + i, f"expected {ny} values, found {len(parts)}")
        try:
            vals[i] = [float(p) for p in parts]
        except ValueError:
            fail(7 + i, "non-numeric value")
    grid = build_grid(ring, h, r_gamma)
    if (grid.nx, grid.ny) != (nx, ny) or grid.origin != (ox, oy):
        fail(2, "header does not match the grid rebuilt from the domain")
    base = 8 + nx
    for i in range(nx):
        row = lines[base + i]
        if row != "".join(str(int(c)) for c in grid.classes[i]):
            fail(base + i, "node classes differ from the rebuilt grid")
    return ScalarField(grid, vals, {"source": str(path)})


# ------------------------------------------------------------------ streamlines

STREAMLINE_COLUMNS = ["id", "s", "x1", "x2", "V", "speed", "termination"]


def save_streamlines(path, streamlines):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(STREAMLINE_COLUMNS)
            for sl in streamlines:
                n = len(sl.s)
                for k in range(n):
                    w.writerow([sl.id, repr(float(sl.s[k])), repr(float(sl.vertices[k, 0])),
                                repr(float(sl.vertices[k, 1])), repr(float(sl.V[k])), repr(float(sl.speed[k])),
                                sl.termination if k == n - 1 else ""])
    except OSError as e:
        raise IoError(f"{path}: {e}") from e


def load_streamlines(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise IoError(f"{path}: {e}") from e
    if not rows or rows[0] != STREAMLINE_COLUMNS:
        raise ParseError(f"{path}: line 1: expected header {','.join(STREAMLINE_COLUMNS)}")
    groups = {}
    order = []
    for n, r in enumerate(rows[1:], start=2):
        if len(r) != len(STREAMLINE_COLUMNS):
            raise ParseError(f"{path}: line {n}: expected {len(STREAMLINE_COLUMNS)} fields")
        try:
            sid = int(r[0])
            nums = [float(x) for x in r[1:6]]
        except ValueError:
            raise ParseError(f"{path}: line {n}: bad number") from None
        if sid not in groups:
            groups[sid] = ([], None)
            order.append(sid)
        data, term = groups[sid]
        if term is not None:
            raise ParseError(f"{path}: line {n}: rows after the termination flag of streamline {sid}")
        data.append(nums)
        groups[sid] = (data, r[6] or None)
    out = []
    for sid in order:
        data, term = groups[sid]
        if term is None:
            raise ParseError(f"{path}: streamline {sid} has no termination flag")
        A = np.array(data)
        out.append(Streamline(seed=(A[0, 1], A[0, 2]), vertices=A[:, 1:3].copy(), s=A[:, 0].copy(),
                              V=A[:, 3].copy(), speed=A[:, 4].copy(), termination=term,
                              ascending=bool(A[-1, 3] >= A[0, 3]), id=sid, start=(A[0, 1], A[0, 2])))
    return out


# ------------------------------------------------------------------ merge trees and reports

def merge_tree_to_dict(tree):
    return {"format_version": FORMAT_VERSION, "nodes": list(tree.nodes),
            "edges": [{"child": c, "parent": p, "location": list(cl.location), "level": cl.level,
                       "pair": list(cl.pair), "s": list(cl.s)} for c, p, cl in tree.edges]}


def merge_tree_from_dict(d, where="merge tree"):
    _check_version(d, where)
    nodes = _need(d, "nodes", where)
    edges = []
    for n, e in enumerate(_need(d, "edges", where)):
        w = f"{where}.edges[{n}]"
        cl = ClPoint(location=_xy(_need(e, "location", w), w), level=_num(_need(e, "level", w), w),
                     pair=tuple(_need(e, "pair", w)), s=tuple(_need(e, "s", w)))
        edges.append((_need(e, "child", w), _need(e, "parent", w), cl))
    return MergeTree(nodes=list(nodes), edges=edges, parent={c: p for c, p, _ in edges})


def save_merge_tree(path, tree):
    _write_text(path, json.dumps(merge_tree_to_dict(tree), indent=2) + "\n")


def load_merge_tree(path):
    return merge_tree_from_dict(_read_json(path), str(path))


def save_report(path, verdicts, meta=None):
    doc = {"format_version": FORMAT_VERSION, "all_pass": all(v.passed for v in verdicts),
           "verdicts": [v.to_dict() for v in verdicts]}
    if meta:
        doc["meta"] = meta
    _write_text(path, json.dumps(doc, indent=2, allow_nan=True) + "\n")


def load_report(path):
    d = _read_json(path)
    _check_version(d, str(path))
    _need(d, "verdicts", str(path))
    return d


# ------------------------------------------------------------------ SVG

@dataclass(frozen=True)
class RenderSpec:
    size: int = 800
    levels: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    seeds_per_side: int | None = 16
    seeds: tuple | None = None
    styles: dict = dc_field(default_factory=lambda: {
        "boundary": 'fill="none" stroke="#000000" stroke-width="2"',
        "gamma": 'fill="#c00000" stroke="#c00000" stroke-width="2"',
        "level": 'fill="none" stroke="#7f7f7f" stroke-width="1"',
        "streamline": 'fill="none" stroke="#1f4e9c" stroke-width="1"',
        "clpoint": 'fill="#e08000" stroke="none"',
    })

    def __post_init__(self):
        lv = list(self.levels)
        if any(not 0.0 < c < 1.0 for c in lv) or any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError("levels must lie in (0, 1) and increase strictly")


def _fmt(x):
    s = f"{x:.4f}"
    return "0.0000" if s == "-0.0000" else s


def render_svg(field, streamlines, merge_tree, spec=RenderSpec(), path=None):
    """Write (and return) an SVG of the ring, level curves, streamlines and Cl-points."""
    ring = field.grid.ring
    x0, y0, x1, y1 = ring.outer.bbox
    pad = 0.05 * max(x1 - x0, y1 - y0)
    x0, y0, x1, y1 = x0 - pad, y0 - pad, x1 + pad, y1 + pad
    scale = spec.size / max(x1 - x0, y1 - y0)
    W = (x1 - x0) * scale
    H = (y1 - y0) * scale

    def pt(p):
        return f"{_fmt((p[0] - x0) * scale)},{_fmt((y1 - p[1]) * scale)}"

    def poly(P, style, closed=False):
        tag = "polygon" if closed else "polyline"
        return f'<{tag} points="{" ".join(pt(p) for p in P)}" {style}/>'

    st = spec.styles
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(W)}" height="{_fmt(H)}" '
           f'viewBox="0 0 {_fmt(W)} {_fmt(H)}">',
           f'<rect x="0" y="0" width="{_fmt(W)}" height="{_fmt(H)}" fill="#ffffff"/>',
           '<g id="levels">']
    for c in spec.levels:
        try:
            curve = level_curve(field, c)
        except EmptyLevel:
            continue
        out.append(poly(curve.vertices, st["level"]))
    out.append("</g>")
    out.append('<g id="streamlines">')
    for sl in sorted(streamlines, key=lambda s: s.id):
        out.append(poly(sl.vertices, st["streamline"]))
    out.append("</g>")
    outer = ring.outer
    P = np.array(outer.vertices) if isinstance(outer, Polygon) else outer.boundary_points(256)
    out.append('<g id="boundary">' + poly(P, st["boundary"], closed=True) + "</g>")
    inner = ring.inner
    r = 4.0 / scale
    if isinstance(inner, Point):
        g = f'<circle cx="{_fmt((inner.center[0] - x0) * scale)}" cy="{_fmt((y1 - inner.center[1]) * scale)}" ' \
            f'r="{_fmt(r * scale)}" {st["gamma"]}/>'
    elif isinstance(inner, Segment):
        g = poly(np.array(inner.endpoints), st["gamma"])
    else:
        Q = np.array(inner.vertices) if isinstance(inner, Polygon) else inner.boundary_points(256)
        g = poly(Q, st["gamma"], closed=True)
    out.append('<g id="gamma">' + g + "</g>")
    out.append('<g id="clpoints">')
    if merge_tree is not None:
        for c, p, cl in sorted(merge_tree.edges, key=lambda e: (e[0], e[1])):
            out.append(f'<circle cx="{_fmt((cl.location[0] - x0) * scale)}" '
                       f'cy="{_fmt((y1 - cl.location[1]) * scale)}" r="2.5000" {st["clpoint"]}/>')
    out.append("</g>")
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        _write_text(path, text)
    return text

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import RINGS, cone_field
from infpot import io as fio
from infpot.checks import FAIL, PASS, Verdict
from infpot.errors import IoError, ParseError, ValidationError, VersionMismatch
from infpot.field import build_grid, gradient
from infpot.flow import merge_tree, trace_many
from infpot.geometry import ConvexRing, Disk, Ellipse, Point, Polygon, Segment, rectangle

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def cone():
    g = build_grid(RINGS["disk"](), 1 / 16)
    f = cone_field(g, lambda x, y: np.clip(1 - np.hypot(x, y), 0, 1))
    return f, gradient(f)


@pytest.mark.parametrize("name", sorted(RINGS))
def test_domain_round_trip(tmp_path, name):
    ring = RINGS[name]()
    p = tmp_path / "d.json"
    fio.save_domain(p, ring)
    back = fio.load_domain(p)
    assert fio.ring_to_dict(back) == fio.ring_to_dict(ring)


def test_rotated_ellipse_round_trip():
    ring = ConvexRing(Ellipse((0.1, 0.2), 2.0, 1.0, 0.3), Segment(((-0.2, 0.0), (0.3, 0.1))))
    d = json.loads(json.dumps(fio.ring_to_dict(ring)))
    assert fio.ring_to_dict(fio.ring_from_dict(d)) == fio.ring_to_dict(ring)


def test_domain_errors(tmp_path):
    with pytest.raises(ParseError, match="outer"):
        fio.ring_from_dict({"inner": {"type": "point", "center": [0, 0]}})
    with pytest.raises(ParseError, match="radius"):
        fio.ring_from_dict({"outer": {"type": "disk", "center": [0, 0]}, "inner": {"type": "point", "center": [0, 0]}})
    with pytest.raises(ParseError, match="hexagon"):
        fio.body_from_dict({"type": "hexagon"})
    with pytest.raises(ParseError):
        fio.body_from_dict({"type": "disk", "center": [0, "x"], "radius": 1})
    with pytest.raises(VersionMismatch):
        fio.ring_from_dict({"format_version": 99, "outer": {}, "inner": {}})
    # non-convex polygon parses but fails validation
    with pytest.raises(ValidationError):
        fio.body_from_dict({"type": "polygon", "vertices": [[0, 0], [2, 0], [1, 0.2], [1, 2]]})
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ParseError, match="line 1"):
        fio.load_domain(bad)
    with pytest.raises(IoError):
        fio.load_domain(tmp_path / "missing.json")


def test_field_round_trip_is_bit_exact(tmp_path, cone):
    f, _ = cone
    vals = f.values.copy()
    vals[f.grid.interior] += np.random.default_rng(0).normal(scale=1e-3, size=int(f.grid.interior.sum()))
    f2 = type(f)(f.grid, vals)
    p = tmp_path / "field.txt"
    fio.save_field(p, f2)
    back = fio.load_field(p)
    assert np.array_equal(back.values, f2.values)
    assert np.array_equal(back.grid.classes, f.grid.classes)
    assert back.grid.h == f.grid.h and back.grid.origin == f.grid.origin
    assert back.grid.r_gamma == f.grid.r_gamma
    assert fio.ring_to_dict(back.grid.ring) == fio.ring_to_dict(f.grid.ring)


def test_field_snapshot_errors(tmp_path, cone):
    f, _ = cone
    p = tmp_path / "field.txt"
    fio.save_field(p, f)
    lines = p.read_text().splitlines()
    assert lines[0] == "# infpot field snapshot"
    bad = tmp_path / "v2.txt"
    bad.write_text("\n".join([lines[0], "format_version 2"] + lines[2:]) + "\n")
    with pytest.raises(VersionMismatch):
        fio.load_field(bad)
    cut = tmp_path / "cut.txt"
    cut.write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(ParseError):
        fio.load_field(cut)
    with pytest.raises(IoError):
        fio.load_field(tmp_path / "nope.txt")


def test_streamline_round_trip(tmp_path, cone):
    f, vf = cone
    S = trace_many(f, vf, [(0.5, 0.0), (0.0, -0.7), (-0.3, 0.3)])
    p = tmp_path / "s.csv"
    fio.save_streamlines(p, S)
    back = fio.load_streamlines(p)
    assert [b.id for b in back] == [s.id for s in S]
    for a, b in zip(S, back):
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.V, b.V) and np.array_equal(a.s, b.s) and np.array_equal(a.speed, b.speed)
        assert a.termination == b.termination
    assert p.read_text().splitlines()[0] == "id,s,x1,x2,V,speed,termination"


def test_empty_streamline_list(tmp_path):
    p = tmp_path / "s.csv"
    fio.save_streamlines(p, [])
    assert fio.load_streamlines(p) == []


def test_streamline_csv_errors(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("id,s,x1,x2,V,speed,termination\n0,0,0.5,0,0.5,1,\n")
    with pytest.raises(ParseError, match="termination"):
        fio.load_streamlines(p)
    p.write_text("id,s,x1\n")
    with pytest.raises(ParseError, match="line 1"):
        fio.load_streamlines(p)
    p.write_text("id,s,x1,x2,V,speed,termination\n0,zero,0.5,0,0.5,1,REACHED_GAMMA\n")
    with pytest.raises(ParseError, match="line 2"):
        fio.load_streamlines(p)


def test_merge_tree_round_trip(tmp_path):
    x = np.linspace(0, 1, 201)
    from test_flow import polyline
    S = [polyline(np.column_stack([x, c * np.maximum(0.5 - x, 0)]), x, i) for i, c in enumerate((0.0, 0.4, -0.3))]
    tree = merge_tree(S, 1e-3)
    p = tmp_path / "t.json"
    fio.save_merge_tree(p, tree)
    back = fio.load_merge_tree(p)
    assert back.nodes == tree.nodes and back.parent == tree.parent
    assert [e[2] for e in back.edges] == [e[2] for e in tree.edges]


def test_report_round_trip(tmp_path):
    vs = [Verdict("a", {"x": 1.0}, {"t": 2.0}, PASS), Verdict("b", {"x": float("nan")}, {}, FAIL, "n")]
    p = tmp_path / "r.json"
    fio.save_report(p, vs)
    d = fio.load_report(p)
    assert d["all_pass"] is False
    assert [v["name"] for v in d["verdicts"]] == ["a", "b"]
    assert math.isnan(d["verdicts"][1]["measured"]["x"])


def test_render_spec_validation():
    with pytest.raises(ValueError):
        fio.RenderSpec(levels=(0.5, 0.2))
    with pytest.raises(ValueError):
        fio.RenderSpec(levels=(0.0, 0.5))


def test_svg_is_deterministic_and_matches_golden(tmp_path, cone):
    f, vf = cone
    S = trace_many(f, vf, [(0.9, 0.0), (0.0, 0.9), (-0.6, -0.6)])
    tree = merge_tree(S, 0.5 * f.grid.h)
    a = fio.render_svg(f, S, tree, path=tmp_path / "a.svg")
    b = fio.render_svg(f, list(reversed(S)), tree)
    assert a == b == (tmp_path / "a.svg").read_text()
    assert a.startswith('<?xml version="1.0" encoding="UTF-8"?>')
    assert a.count("<polyline") == 3 + len(fio.RenderSpec().levels)
    assert "-0.0000" not in a
    assert a == (GOLDEN / "cone_disk.svg").read_text()


def test_svg_for_every_inner_kind():
    for inner in (Segment(((-0.3, 0), (0.3, 0))), Disk((0, 0), 0.3)):
        ring = ConvexRing(rectangle(-1, -1, 1, 1), inner)
        g = build_grid(ring, 1 / 16)
        f = cone_field(g, lambda x, y: np.clip(1 - ring.inner.distance(np.stack([x, y], -1)) / 0.7, 0, 1))
        svg = fio.render_svg(f, [], None)
        assert '<g id="gamma">' in svg and svg.rstrip().endswith("</svg>")


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0, 3.1))
def test_body_dict_round_trip(cx, cy, a, b, rot):
    a, b = max(a, b), min(a, b)
    for body in (Disk((cx, cy), a), Ellipse((cx, cy), a, b, rot), Point((cx, cy)),
                 Polygon(((cx, cy), (cx + a, cy), (cx, cy + b)))):
        d = json.loads(json.dumps(fio.body_to_dict(body)))
        assert fio.body_to_dict(fio.body_from_dict(d)) == fio.body_to_dict(body)

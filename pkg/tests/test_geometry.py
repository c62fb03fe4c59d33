import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wgscat.geometry import (
    PORT,
    CircuitGraph,
    GeometryError,
    PanelOptions,
    Segment,
    build_component,
    chain_graph,
    check_interfaces,
    component_mode_counts,
    corner_kind,
    default_image_radius,
    external_mode_count,
    grading_levels,
    image_curves,
    lattice_generator,
    panelize,
    polygon_component,
    port_panel_count,
    rectangle,
    reflect_points,
    reflect_vectors,
    single_component_graph,
    two_component_template,
    union_component,
    vertex_levels,
)
from wgscat.geometry.graph import JUNCTION_SIMPLIFY
from wgscat.geometry.panels import GRADING_RATIO, MIN_PANEL_FRACTION, _grade
from wgscat.modal import NEUMANN

W = math.pi + 1


# -- components ---------------------------------------------------------------

def test_unit_square_with_one_port():
    c = polygon_component([(0, 0), (4, 0), (4, 4), (0, 4)], {1})
    assert len(c.ports) == 1
    assert np.allclose(c.angles, math.pi / 2)


def test_rectangle_two_ports_and_frames():
    c = rectangle(2.0, 3.5, ("left", "right"))
    assert len(c.ports) == 2 and len(c.angles) == 4
    right = c.ports[c.port_index("right")]
    assert np.allclose(right.axis, (1, 0)) and right.width == pytest.approx(3.5)
    left = c.ports[c.port_index("left")]
    assert np.allclose(left.axis, (-1, 0))


def test_open_polyline_rejected():
    with pytest.raises(GeometryError):
        build_component([((0, 0), (1, 0), "wall"), ((1, 0), (1, 1), "wall"), ((1, 1), (0, 2), "wall")])


def test_invalid_components_rejected():
    with pytest.raises(GeometryError):  # ports must meet walls at right angles
        polygon_component([(0, 0), (4, 0), (5, 4), (0, 4)], {1})
    with pytest.raises(GeometryError):  # adjacent ports
        polygon_component([(0, 0), (4, 0), (4, 4), (0, 4)], {0, 1})
    with pytest.raises(GeometryError):  # self-intersecting
        polygon_component([(0, 0), (4, 4), (4, 0), (0, 4)])
    with pytest.raises(GeometryError):
        build_component([((0, 0), (1, 0), "door"), ((1, 0), (0, 1), "wall"), ((0, 1), (0, 0), "wall")])


def test_clockwise_input_is_reversed():
    c = polygon_component([(0, 4), (4, 4), (4, 0), (0, 0)], {1}, names={1: "east"})
    assert c.polygon().exterior.is_ccw
    s = c.segment(c.port_segments[0])
    assert s.name == "east" and min(s.start[0], s.end[0]) == 4


def test_component_with_hole():
    outer = [(0, 0), (10, 0), (10, 10), (0, 10)]
    segs = [Segment(outer[i], outer[(i + 1) % 4], PORT if i == 1 else "wall") for i in range(4)]
    c = build_component(segs, holes=[[(3, 3), (6, 3), (6, 6), (3, 6)]])
    assert c.rings == (4, 4) and c.n_holes == 1
    assert c.polygon().area == pytest.approx(91.0)
    assert not c.contains([[4.5, 4.5]])[0] and c.contains([[1, 1]])[0]
    # hole corners are reentrant from the domain side and the ring wraps onto itself
    assert np.allclose(c.angles[4:], 1.5 * math.pi)
    assert c.next_vertex(7) == 4 and c.prev_vertex(4) == 7
    disc = panelize(c)
    assert np.all(disc.segment[disc.panel_is_port] == 1)
    with pytest.raises(GeometryError):
        build_component(segs, holes=[[(8, 8), (12, 8), (12, 12)]])


# -- panels ---------------------------------------------------------------------

def test_straight_segment_equal_panels():
    c = rectangle(10.0, 4.0, ())
    disc = panelize(c, PanelOptions(h=1.0, levels=0))
    bottom = disc.lengths[disc.segment == 0]
    assert len(bottom) == 10 and np.allclose(bottom, 1.0)


def test_dyadic_grading_with_ratio_two():
    pts, lev = _grade(0.0, 3.0, 3, 0, 3, ratio=2.0)
    lengths = np.diff(pts)
    assert np.allclose(lengths, [1, 1, 0.5, 0.25, 0.125, 0.125])
    assert list(lev) == [0, 0, 1, 2, 3, 3]


def test_default_grading_ratio():
    pts, _ = _grade(0.0, 1.0, 1, 2, 0)
    assert np.diff(pts)[0] == pytest.approx(1 / GRADING_RATIO**2)
    with pytest.raises(ValueError):
        PanelOptions(ratio=1.0)


def test_port_panel_count():
    assert port_panel_count(5) >= max(4, math.ceil(5 / 4)) == 4
    assert port_panel_count(30) == 15
    c = rectangle(6.0, W, ("left", "right"))
    disc = panelize(c, PanelOptions(mode_counts=(5, 5), levels=0))
    assert len(disc.port_panels(0)) >= 4


def test_corner_kinds_and_levels():
    # L-shaped channel with a port at the bottom-left end
    c = polygon_component([(0, 0), (8, 0), (8, 8), (4, 8), (4, 4), (0, 4)], {5})
    kinds = [corner_kind(c, v) for v in range(6)]
    assert kinds == ["port", "convex", "convex", "convex", "reentrant", "port"]
    assert vertex_levels(c) == [grading_levels("dirichlet", k) for k in kinds]
    assert vertex_levels(c, 2) == [2] * 6
    with pytest.raises(ValueError):
        vertex_levels(c, (1, 2))
    cn = c.with_physics(NEUMANN, 1.0)
    assert set(vertex_levels(cn)) == {grading_levels(NEUMANN)}


def test_image_curves_touch_port_and_reflect():
    c = rectangle(8.0, W, ("left",))
    disc = panelize(c)
    a, b, nrm, src, port = image_curves(c, disc)
    spec = c.ports[0]
    assert len(src) > 0
    # every image panel is the pointwise mirror of its source, collinear with the flanking wall
    for j, q in enumerate(src):
        assert np.allclose(reflect_points(a[j], spec.origin, spec.axis), disc.start[q])
        assert np.allclose(reflect_vectors(nrm[j], spec.axis), disc.normals[q])
        assert abs(a[j][1] - disc.start[q][1]) < 1e-12
    corners = {tuple(np.round(p, 12)) for p in (c.segment(c.port_segments[0]).start,
                                                 c.segment(c.port_segments[0]).end)}
    touching = {tuple(np.round(p, 12)) for p in np.vstack([a, b])}
    assert corners <= touching
    # nothing further than the radius from the port is mirrored
    far = np.abs(spec.along_axis(np.vstack([disc.start[src], disc.end[src]])))
    assert far.max() <= disc.image_radius[0] * (1 + 1e-12)


def test_image_radius_one_panel():
    c = rectangle(8.0, W, ("left",))
    disc = panelize(c, PanelOptions(image_radius=(1.0,), levels=0))
    _, _, _, src, _ = image_curves(c, disc)
    assert len(src) == 2  # one panel per flanking wall
    assert default_image_radius(c) == [pytest.approx(W)]
    with pytest.raises(GeometryError):
        image_curves(c, disc, r=0.0)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5))
def test_reflection_is_an_involution(ox, oy, ang, px, py):
    axis = (math.cos(ang), math.sin(ang))
    p = np.array([px, py])
    q = reflect_points(reflect_points(p, (ox, oy), axis), (ox, oy), axis)
    assert np.allclose(q, p, atol=1e-12)
    v = reflect_vectors(reflect_vectors(p, axis), axis)
    assert np.allclose(v, p, atol=1e-12)


# -- graphs -------------------------------------------------------------------

def test_full_square_lattice():
    g = lattice_generator(2, 2, jitter=0.0, edge_keep_prob=1.0, seed=1)
    assert g.n_components == 4 and len(g.interfaces) == 4 and g.is_connected()
    with pytest.raises(ValueError):
        lattice_generator(2, 2, edge_keep_prob=0.0)
    with pytest.raises(ValueError):
        lattice_generator(1, 4)


def test_lattice_reproducible_and_interfaces_consistent():
    g1 = lattice_generator(3, 3, seed=7)
    g2 = lattice_generator(3, 3, seed=7)
    assert g1.to_json() == g2.to_json()
    check_interfaces(g1)
    for e in g1.interfaces:
        a = g1.components[e.a].ports[e.port_a]
        b = g1.components[e.b].ports[e.port_b]
        assert np.allclose(a.origin, b.origin) and np.allclose(a.axis, -np.asarray(b.axis))
        assert e.spec == a


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_lattice_junctions_have_no_slivers(seed):
    # near-tangent arm/hull intersections must not leave sub-width notches
    g = lattice_generator(2, 2, seed=seed)
    width = g.meta["width"]
    for c in g.components:
        v = c.vertices
        n = len(v)
        ports = {i for i in c.port_segments} | {(i + 1) % n for i in c.port_segments}
        flank = {(i - 1) % n for i in c.port_segments} | {(i + 2) % n for i in c.port_segments}
        for i in range(n):
            if i in ports or i in flank:
                continue
            a, b, cc = v[i - 1], v[i], v[(i + 1) % n]
            ac = cc - a
            dev = abs(ac[0] * (b - a)[1] - ac[1] * (b - a)[0]) / np.linalg.norm(ac)
            assert dev >= JUNCTION_SIMPLIFY * width


def test_grading_depth_capped_by_panel_floor():
    # a tiny wall between two deep Neumann corners
    comp = polygon_component([(0, 0), (8, 0), (8, 4), (4.001, 4), (4, 4.001), (0, 4)], {1}, NEUMANN)
    disc = panelize(comp)
    lengths = np.linalg.norm(disc.end - disc.start, axis=1)
    assert lengths.min() >= MIN_PANEL_FRACTION * math.hypot(8, 4) * (1 - 1e-9)
    assert lengths.min() < 1e-9


def test_graph_json_round_trip(tmp_path):
    g = lattice_generator(2, 3, seed=3)
    path = tmp_path / "g.json"
    g.to_json(path)
    h = CircuitGraph.from_json(path)
    assert h.to_dict() == g.to_dict()
    assert json.loads(h.to_json())["format"] == "wgscat-circuit"
    u, _ = union_component(lattice_generator(2, 2, jitter=0.0, edge_keep_prob=1.0))
    single = single_component_graph(u)
    assert CircuitGraph.from_dict(single.to_dict()).components[0].rings == u.rings


def test_port_reuse_rejected():
    g = chain_graph([3.0, 4.0])
    with pytest.raises(GeometryError):
        CircuitGraph(g.components, g.interfaces, g.externals + [g.externals[0]])


def test_chain_and_template_layout():
    g = chain_graph([3.0, 4.0, 5.0])
    assert [g.port_role(0, g.interfaces[0].port_a)[0], g.port_role(1, g.interfaces[0].port_b)[0]] == ["owner",
                                                                                                     "other"]
    assert g.externals[0].length == 3.0 and g.externals[1].length == 5.0
    t = two_component_template(6.0)
    assert t.n_components == 2 and len(t.interfaces) == 1
    assert t.interfaces[0].spec.origin[0] == pytest.approx(3.0)
    with pytest.raises(ValueError):
        two_component_template(0.0)


def test_mode_counts_from_tolerance():
    g = chain_graph([3.0, 4.0])
    counts = component_mode_counts(g, 0, 1e-14)
    assert len(counts) == 2 and min(counts) >= 1
    assert external_mode_count(g, 0, 1e-14) >= 1


def test_union_of_chain_is_rectangle():
    g = chain_graph([3.0, 4.0])
    u, pm = union_component(g)
    assert len(u.vertices) == 4 and u.polygon().area == pytest.approx(7.0 * W)
    assert sorted(pm) == sorted((x.comp, x.port) for x in g.externals)


def test_union_of_loop_has_hole():
    g = lattice_generator(2, 2, jitter=0.0, edge_keep_prob=1.0)
    u, pm = union_component(g)
    assert u.n_holes == 1 and len(pm) == len(g.externals)
    assert u.polygon().area == pytest.approx(sum(c.polygon().area for c in g.components))

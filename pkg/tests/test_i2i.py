import math

import numpy as np
import pytest

from wgscat.geometry import PanelOptions, chain_graph, panelize, polygon_component, rectangle, two_component_template
from wgscat.geometry import union_component
from wgscat.i2i import I2IMap, channel_blocks, channel_i2i_analytic, compute_i2i, far_port, monolithic_i2i
from wgscat.modal import DIRICHLET, NEUMANN, betas, parity
from wgscat.solver import DEFAULT_ETA

W = math.pi + 1


def analytic_for(comp, L, count):
    """Analytic map in the rectangle's own port order (right end first)."""
    spec = comp.ports[comp.port_index("right")]
    I = channel_i2i_analytic(spec, L, DEFAULT_ETA, count)
    order = [0, 1] if comp.port_index("right") == 0 else [1, 0]
    return I.reordered(order)


@pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
def test_bie_channel_matches_analytic(bc):
    L, M = 3.0, 4
    comp = rectangle(L, W, ("left", "right"), bc)
    I = compute_i2i(comp, counts=[M, M])
    ref = analytic_for(comp, L, M)
    assert I.provenance == "bie"
    assert np.max(np.abs(I.matrix - ref.matrix)) < 1e-8


def test_far_port_frame():
    spec = rectangle(3.0, W).ports[0]
    fp = far_port(spec, 3.0)
    assert np.allclose(fp.axis, -np.asarray(spec.axis)) and np.allclose(fp.origin, (0.0, 0.0))


def test_evanescent_semi_infinite_limit():
    spec = rectangle(3.0, W).ports[0]
    taa, tab, tba, tbb = channel_blocks(spec, 200.0, DEFAULT_ETA, 5)
    b = betas(spec, 5)
    eva = b.imag > 0
    assert np.allclose(taa[eva], ((b + DEFAULT_ETA) / (b - DEFAULT_ETA))[eva], atol=1e-14)
    assert np.allclose(tab[eva], 0, atol=1e-14)
    with pytest.raises(ValueError):
        channel_blocks(spec, 0.0, DEFAULT_ETA, 2)


@pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
def test_analytic_channel_port_swap_symmetry(bc):
    spec = rectangle(3.0, W, bc=bc).ports[0]
    taa, tab, tba, tbb = channel_blocks(spec, 2.7, -0.1 + 0.05j, 6)
    assert np.allclose(taa, tbb, atol=1e-14) and np.allclose(tab, tba, atol=1e-14)


def test_mirror_symmetric_component_blocks():
    # channel with a centred cavity on top: symmetric under x -> 6 - x
    h = W / 2
    v = [(0, -h), (6, -h), (6, h), (4, h), (4, h + 1), (2, h + 1), (2, h), (0, h)]
    comp = polygon_component(v, {1, 7}, names={1: "right", 7: "left"})
    I = compute_i2i(comp, counts=[4, 4])
    r, l_ = comp.port_index("right"), comp.port_index("left")
    D = np.diag(parity(comp.ports[0], 4))
    # the mirror maps y_right onto -y_left: blocks agree after conjugation with D
    assert np.allclose(I.block(l_, l_), D @ I.block(r, r) @ D, atol=1e-10)
    assert np.allclose(I.block(l_, r), D @ I.block(r, l_) @ D, atol=1e-10)


def test_mesh_refinement_self_consistency():
    comp = polygon_component([(0, 0), (8, 0), (8, 8), (4, 8), (4, 4), (0, 4)], {5})
    coarse = compute_i2i(comp, panelize(comp, PanelOptions(mode_counts=(4,))))
    fine = compute_i2i(comp, panelize(comp, PanelOptions(h=0.5, mode_counts=(4,))))
    assert coarse.matrix.shape == (4, 4)
    assert np.max(np.abs(coarse.matrix - fine.matrix)) < 1e-8


def test_columns_bounded_on_template():
    g = two_component_template(3.0)
    for comp in g.components:
        I = compute_i2i(comp, counts=[4, 4])
        assert np.all(np.isfinite(I.matrix))
        assert np.max(np.linalg.norm(I.matrix, axis=0)) <= 1e3


def test_monolithic_union_of_rectangles_is_analytic():
    g = chain_graph([2.0, 3.0])
    u, _ = union_component(g)
    I = monolithic_i2i(u, counts=[3, 3])
    assert I.provenance == "monolithic"
    assert np.max(np.abs(I.matrix - analytic_for(u, 5.0, 3).matrix)) < 1e-8


def test_single_component_graph_is_bitwise_compute_i2i():
    from wgscat.glue import assemble_graph_system, schur_reduce
    from wgscat.geometry import single_component_graph

    comp = rectangle(3.0, W)
    I = compute_i2i(comp, counts=[2, 2])
    sys = assemble_graph_system(single_component_graph(comp), [I])
    assert sys.n_interface_unknowns == 0
    assert np.array_equal(schur_reduce(sys).matrix, I.matrix)


def test_map_container_operations(tmp_path):
    spec = rectangle(3.0, W).ports[0]
    I = channel_i2i_analytic(spec, 2.0, DEFAULT_ETA, 3)
    J = I.reordered([1, 0])
    assert np.array_equal(J.block(0, 1), I.block(1, 0)) and J.names == ["B", "A"]
    T = I.truncated([1, 2])
    assert T.matrix.shape == (3, 3) and T.block(1, 0)[0, 0] == I.block(1, 0)[0, 0]
    with pytest.raises(ValueError):
        I.truncated([4, 1])
    path = tmp_path / "map.json"
    I.to_json(path)
    K = I2IMap.from_json(path)
    assert np.array_equal(K.matrix, I.matrix) and K.ports == I.ports and K.eta == I.eta
    assert np.array_equal(I2IMap.from_json(I.to_json()).matrix, I.matrix)
    with pytest.raises(ValueError):
        I2IMap.from_dict({"format": "other"})
    with pytest.raises(ValueError):
        I2IMap(I.ports, [3, 3], np.zeros((5, 5)), -0.2)
    with pytest.raises(ValueError):
        I2IMap(I.ports, [3, 3], np.full((6, 6), np.nan), -0.2)
    with pytest.raises(ValueError):
        I2IMap(I.ports, [3, 3], np.zeros((6, 6)), -0.2, provenance="guess")
    assert np.allclose(I.apply(np.ones(6)), I.matrix.sum(axis=1))

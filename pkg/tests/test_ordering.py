import pytest

from snnmap.generators import LayeredSnnSpec, gen_layered
from snnmap.ordering import NodeOrder, OrderKind, greedy_order, make_order, topo_order


def test_greedy_order_on_cycle(cyclic):
    order = greedy_order(cyclic)
    assert order.sequence == (2, 0, 1)
    assert order.provenance is OrderKind.greedy


def test_greedy_order_without_inputs(build_graph):
    g = build_graph(3, [(0, (1,), 1.0), (1, (2,), 1.0), (2, (0,), 1.0)])
    assert greedy_order(g).sequence == (0, 1, 2)


def test_greedy_prefers_heavy_successors(build_graph):
    g = build_graph(4, [(0, (2,), 1.0), (1, (3,), 5.0)])
    assert greedy_order(g).sequence == (0, 1, 3, 2)


def test_topo_order_diamond(diamond):
    order = topo_order(diamond)
    assert order is not None
    assert order.sequence == (0, 1, 2, 3)
    assert order.provenance is OrderKind.topo


def test_topo_order_heavier_first(build_graph):
    g = build_graph(5, [(0, (1,), 1.0), (2, (3,), 1.0), (4, (0, 2), 1.0)])
    assert topo_order(g).sequence == (4, 0, 2, 1, 3)
    g = build_graph(3, [(0, (1,), 1.0), (0, (2,), 9.0)], snn=False)
    assert topo_order(g).sequence == (0, 2, 1)


def test_topo_order_cycle(cyclic):
    assert topo_order(cyclic) is None


def test_make_order(cyclic, diamond):
    assert make_order(diamond, "natural").sequence == (0, 1, 2, 3)
    assert make_order(diamond, OrderKind.topo).provenance is OrderKind.topo
    fallback = make_order(cyclic, OrderKind.topo)
    assert fallback.provenance is OrderKind.greedy
    assert fallback.sequence == (2, 0, 1)
    assert make_order(diamond, "layered", (0, 2, 1, 3)).sequence == (0, 2, 1, 3)
    with pytest.raises(ValueError):
        make_order(diamond, "layered", (0, 0, 1, 3))
    with pytest.raises(ValueError):
        make_order(diamond, "bogus")


def test_orders_are_permutations():
    g = gen_layered(LayeredSnnSpec(layers=(6, 4, 3), window=2, stride=2))
    for kind in OrderKind:
        order = make_order(g, kind)
        assert sorted(order.sequence) == list(range(g.num_nodes))
        assert len(order) == g.num_nodes


def test_layered_topological_respects_layers():
    spec = LayeredSnnSpec(layers=(4, 3, 2))
    order = make_order(gen_layered(spec), OrderKind.topo).sequence
    layer = [0] * 4 + [1] * 3 + [2] * 2
    assert [layer[v] for v in order] == sorted(layer[v] for v in order)


def test_node_order_validation():
    with pytest.raises(ValueError):
        NodeOrder(sequence=(1, 2))
    assert len(NodeOrder(sequence=(1, 0))) == 2

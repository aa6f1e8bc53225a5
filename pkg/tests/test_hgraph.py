import io

import numpy as np
import pytest

from snnmap.costmodel import HardwareConfig
from snnmap.errors import HgxParseError
from snnmap.generators import RandomSnnSpec, gen_random_cyclic
from snnmap.hgraph import (
    ConstraintKind,
    Hyperedge,
    Partitioning,
    as_base,
    as_indexed,
    build_indices,
    check_constraints,
    connectivity,
    parse_hypergraph,
    parse_partitioning,
    partition_stats,
    push_forward,
    resource_usage,
    serialize_hypergraph,
    serialize_partitioning,
)

DIAMOND_HGX = """HGX 1
4 3
1.0 0 2 1 2
1.0 1 1 3
1.0 2 1 3
"""


def test_hyperedge_pins():
    hedge = Hyperedge(source=2, destinations=(0, 1), weight=0.5)
    assert hedge.pins == (2, 0, 1)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"source": 0, "destinations": (1, 1), "weight": 1.0},
        {"source": 0, "destinations": (1,), "weight": 0.0},
        {"source": 0, "destinations": (1,), "weight": float("inf")},
        {"source": -1, "destinations": (1,), "weight": 1.0},
    ],
)
def test_hyperedge_rejects(kwargs):
    with pytest.raises(ValueError):
        Hyperedge(**kwargs)


def test_snn_form_enforced(build_graph):
    with pytest.raises(ValueError):
        build_graph(3, [(0, (1,), 1.0), (0, (2,), 1.0)])
    with pytest.raises(ValueError):
        build_graph(2, [(0, (0, 1), 1.0)])
    with pytest.raises(ValueError):
        build_graph(2, [(0, (2,), 1.0)])
    g = build_graph(3, [(0, (1,), 1.0), (0, (0, 2), 1.0)], snn=False)
    assert g.num_hedges == 2
    assert g.num_connections == 3


def test_indices(diamond):
    g = as_indexed(diamond)
    assert g.inbound(3) == (1, 2)
    assert g.outbound(0) == (0,)
    assert g.inbound(0) == ()
    assert as_indexed(g) is g
    assert as_base(g) is diamond
    assert build_indices(diamond) == g


def test_partitioning_from_labels():
    rho = Partitioning.from_labels([5, 5, 2, 7])
    assert rho.assignment == (0, 0, 1, 2)
    assert rho.num_partitions == 3
    assert rho.members() == [[0, 1], [2], [3]]
    assert rho.sizes() == [2, 1, 1]


def test_partitioning_must_be_dense():
    with pytest.raises(ValueError):
        Partitioning(assignment=(0, 2), num_partitions=3)
    with pytest.raises(ValueError):
        Partitioning(assignment=(0, 0), num_partitions=2)


def test_singleton_and_single():
    assert Partitioning.singleton(3).num_partitions == 3
    assert Partitioning.single(3).assignment == (0, 0, 0)
    assert Partitioning.single(0).num_partitions == 0


def test_push_forward_merges_parallel_hyperedges(build_graph):
    g = build_graph(4, [(0, (2,), 1.0), (1, (3,), 2.0), (2, (3,), 4.0)])
    rho = Partitioning.from_labels([0, 0, 1, 1])
    gp = push_forward(g, rho)
    assert not gp.snn
    assert gp.num_nodes == 2
    assert len(gp.hedges) == 1
    hedge = gp.hedges[0]
    assert (hedge.source, hedge.destinations) == (0, (1,))
    assert hedge.weight == pytest.approx(3.0)
    assert connectivity(gp) == pytest.approx(3.0)


def test_push_forward_identity_keeps_connectivity(diamond):
    gp = push_forward(diamond, Partitioning.singleton(4))
    assert connectivity(gp) == pytest.approx(4.0)
    assert connectivity(push_forward(diamond, Partitioning.single(4))) == 0


def test_push_forward_rejects_partial_partitioning(diamond):
    with pytest.raises(ValueError):
        push_forward(diamond, Partitioning.singleton(3))


def test_resource_usage_counts_local_axons(build_graph):
    g = build_graph(3, [(0, (1, 2), 1.0), (1, (2,), 1.0)])
    nodes, axons, synapses = resource_usage(g, Partitioning.single(3))
    assert nodes == [3]
    assert axons == [2]
    assert synapses == [3]


def test_check_constraints(build_graph):
    hw = HardwareConfig(width=1, height=1, c_npc=2, c_apc=4, c_spc=8)
    g = build_graph(3, [(0, (1, 2), 1.0)])
    report = check_constraints(g, Partitioning.single(3), hw)
    assert not report.valid
    assert [v.kind for v in report.violations] == [ConstraintKind.npc]
    assert report.violations[0].observed == 3
    assert "partition 0" in str(report.violations[0])

    report = check_constraints(g, Partitioning.singleton(3), hw)
    assert [v.kind for v in report.violations] == [ConstraintKind.partitions]
    assert "mapping" in str(report.violations[0])

    hw = hw.replace(width=2, height=2)
    report = check_constraints(g, Partitioning.from_labels([0, 0, 1]), hw)
    assert report.valid
    assert report.node_counts == (2, 1)
    assert report.axon_counts == (1, 1)
    assert report.synapse_counts == (1, 1)


def test_partition_stats(diamond):
    stats = partition_stats(diamond, Partitioning.from_labels([0, 0, 1, 2]))
    assert stats.num_partitions == 3
    assert stats.sizes == (2, 1, 1)
    assert stats.size_histogram == {1: 2, 2: 1}
    assert stats.synapses == (1, 1, 2)
    assert stats.axons == (1, 1, 2)


def test_parse_hypergraph(diamond):
    g = parse_hypergraph(DIAMOND_HGX)
    assert g == diamond
    assert parse_hypergraph(io.StringIO(DIAMOND_HGX)) == diamond


def test_serialize_hypergraph(diamond):
    assert serialize_hypergraph(diamond) == DIAMOND_HGX
    assert serialize_hypergraph(as_indexed(diamond)) == DIAMOND_HGX


def test_serialize_keeps_weight_precision(build_graph):
    g = build_graph(2, [(0, (1,), 0.1 + 0.2)])
    assert parse_hypergraph(serialize_hypergraph(g)).hedges[0].weight == 0.1 + 0.2


@pytest.mark.parametrize(
    ("text", "line"),
    [
        ("", 1),
        ("HGX 2\n1 0\n", 1),
        ("HGX 1\n1\n", 2),
        ("HGX 1\n2 x\n", 2),
        ("HGX 1\n2 2\n1.0 0 1 1\n", 4),
        ("HGX 1\n2 1\n1.0 0 1 5\n", 3),
        ("HGX 1\n2 1\n-1.0 0 1 1\n", 3),
        ("HGX 1\n2 1\nnan 0 1 1\n", 3),
        ("HGX 1\n2 1\n1.0 0 2 1\n", 3),
        ("HGX 1\n3 1\n1.0 0 2 1 1\n", 3),
        ("HGX 1\n2 1\n1.0 0 1 0\n", 3),
        ("HGX 1\n3 2\n1.0 0 1 1\n1.0 0 1 2\n", 4),
    ],
)
def test_parse_hypergraph_errors(text, line):
    with pytest.raises(HgxParseError) as err:
        parse_hypergraph(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_parse_hypergraph_without_snn_form():
    g = parse_hypergraph("HGX 1\n3 2\n1.0 0 1 0\n1.0 0 1 2\n", snn=False)
    assert g.num_hedges == 2


def test_partition_file():
    rho = Partitioning.from_labels([0, 1, 1])
    text = serialize_partitioning(rho)
    assert text == "0 0\n1 1\n2 1\n"
    assert parse_partitioning(text, 3) == rho
    assert parse_partitioning("1 0\n0 1\n").assignment == (1, 0)


@pytest.mark.parametrize(
    "text",
    ["0 0\n0 1\n", "0 0\n1 2\n", "0\n", "0 a\n", "0 0\n5 0\n", "0 -1\n1 0\n"],
)
def test_parse_partitioning_errors(text):
    with pytest.raises(HgxParseError):
        parse_partitioning(text)


def test_parse_partitioning_missing_node():
    with pytest.raises(HgxParseError, match="node 2"):
        parse_partitioning("0 0\n1 0\n", num_nodes=3)


@pytest.fixture
def random_net():
    return gen_random_cyclic(RandomSnnSpec(num_nodes=64, mean_cardinality=6, seed=9))


def test_hgx_round_trip_generated(random_net):
    text = serialize_hypergraph(random_net)
    again = parse_hypergraph(text)
    assert again == random_net
    assert serialize_hypergraph(again) == text


def test_connectivity_never_grows_when_merging(random_net):
    naive = sum(e.weight * len(e.destinations) for e in random_net.hedges)
    labels = list(range(random_net.num_nodes))
    previous = connectivity(push_forward(random_net, Partitioning.from_labels(labels)))
    assert previous == pytest.approx(naive, rel=1e-12)
    rng = np.random.default_rng(1)
    while len(set(labels)) > 1:
        keep, gone = rng.choice(sorted(set(labels)), size=2, replace=False).tolist()
        labels = [keep if x == gone else x for x in labels]
        current = connectivity(push_forward(random_net, Partitioning.from_labels(labels)))
        assert current <= previous + 1e-12
        previous = current
    assert previous == 0


@pytest.mark.parametrize("num_parts", [1, 5, 17, 64])
def test_synapse_counts_cover_every_connection(random_net, num_parts):
    labels = np.random.default_rng(num_parts).integers(num_parts, size=64).tolist()
    rho = Partitioning.from_labels(labels)
    nodes, axons, synapses = resource_usage(random_net, rho)
    assert sum(nodes) == random_net.num_nodes
    assert sum(synapses) == random_net.num_connections
    assert all(a <= s for a, s in zip(axons, synapses, strict=True))

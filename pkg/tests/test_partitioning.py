import itertools
import math
import statistics

import pytest

from snnmap.costmodel import HardwareConfig
from snnmap.errors import CapacityError
from snnmap.generators import LayeredSnnSpec, RandomSnnSpec, gen_layered, gen_random_cyclic
from snnmap.hgraph import (
    Partitioning,
    as_indexed,
    check_constraints,
    connectivity,
    push_forward,
)
from snnmap.ordering import NodeOrder
from snnmap.partitioning import (
    HierarchicalPartitioner,
    OverlapPartitioner,
    PartitionerKind,
    _LevelRefiner,
    hierarchical_partition,
    overlap_partition,
    partition,
    sequential_partition,
)


@pytest.fixture
def pairs_hw() -> HardwareConfig:
    return HardwareConfig(width=2, height=2, c_npc=2, c_apc=8, c_spc=16)


@pytest.fixture
def random_net():
    return gen_random_cyclic(RandomSnnSpec(num_nodes=120, mean_cardinality=6, seed=3))


def test_sequential_fills_cores_in_order(diamond, pairs_hw):
    rho = sequential_partition(diamond, None, pairs_hw)
    assert rho.assignment == (0, 0, 1, 1)
    order = NodeOrder(sequence=(0, 2, 1, 3))
    assert sequential_partition(diamond, order, pairs_hw).assignment == (0, 1, 0, 1)


def test_sequential_respects_axon_limit(build_graph):
    hw = HardwareConfig(width=2, height=2, c_npc=4, c_apc=1, c_spc=4)
    g = build_graph(4, [(0, (2,), 1.0), (1, (3,), 1.0)])
    # 2 and 3 are fed by different axons and cannot share a core.
    assert sequential_partition(g, None, hw).assignment == (0, 0, 0, 1)


def test_node_that_cannot_fit(diamond):
    hw = HardwareConfig(width=2, height=2, c_npc=4, c_apc=1, c_spc=4)
    for kind in PartitionerKind:
        with pytest.raises(CapacityError):
            partition(diamond, hw, kind)


def test_too_many_partitions(diamond):
    hw = HardwareConfig(width=1, height=1, c_npc=2, c_apc=8, c_spc=16)
    with pytest.raises(CapacityError):
        sequential_partition(diamond, None, hw)


def test_overlap_single_hyperedge(build_graph, desk):
    g = build_graph(4, [(0, (1, 2, 3), 1.0)])
    partitioner = OverlapPartitioner(g, desk)
    rho = partitioner.run()
    assert rho.num_partitions == 1
    assert partitioner.visits == [1]
    assert partitioner.assignments == [1, 1, 1, 1]


def test_overlap_keeps_hyperedges_together(build_graph, pairs_hw):
    g = build_graph(4, [(0, (1,), 1.0), (2, (3,), 1.0)])
    rho = overlap_partition(g, pairs_hw)
    assert rho.num_partitions == 2
    assert rho.assignment[0] == rho.assignment[1]
    assert rho.assignment[2] == rho.assignment[3]
    assert connectivity(push_forward(g, rho)) == 0


def test_overlap_visits_and_assigns_once(random_net, desk):
    partitioner = OverlapPartitioner(random_net, desk)
    rho = partitioner.run()
    assert set(partitioner.visits) == {1}
    assert set(partitioner.assignments) == {1}
    assert check_constraints(random_net, rho, desk).valid


@pytest.mark.parametrize("kind", list(PartitionerKind))
def test_partitioners_produce_valid_mappings(kind, random_net, desk):
    rho = partition(random_net, desk, kind)
    assert rho.num_nodes == random_net.num_nodes
    assert check_constraints(random_net, rho, desk).valid


@pytest.mark.parametrize("kind", list(PartitionerKind))
def test_partitioners_on_layered_network(kind, desk):
    g = gen_layered(LayeredSnnSpec(layers=(32, 24, 10), window=6, stride=2))
    rho = partition(g, desk, kind)
    assert check_constraints(g, rho, desk).valid


def test_hierarchical_is_seeded(random_net, desk):
    first = hierarchical_partition(random_net, desk, seed=5)
    assert hierarchical_partition(random_net, desk, seed=5) == first


def test_hierarchical_history(random_net, desk):
    partitioner = HierarchicalPartitioner(as_indexed(random_net), desk, seed=1)
    rho = partitioner.run()
    assert len(partitioner.levels) > 1
    assert [i for i, _ in partitioner.history] == list(range(len(partitioner.levels)))[::-1]
    assert partitioner.history[-1][1] == pytest.approx(
        connectivity(push_forward(random_net, rho))
    )
    singleton = connectivity(push_forward(random_net, Partitioning.singleton(120)))
    assert partitioner.history[-1][1] < singleton
    conns = [c for _, c in partitioner.history]
    assert all(b <= a + 1e-9 for a, b in zip(conns, conns[1:]))
    assert all(gain > 0 for gain in partitioner.gains)


def test_coarse_nodes_fit_a_core(random_net, desk):
    levels = HierarchicalPartitioner(as_indexed(random_net), desk).coarsen()
    for level in levels:
        assert max(level.sizes) <= desk.c_npc
        assert max(level.synapses) <= desk.c_spc
        assert max(map(len, level.inbound)) <= desk.c_apc
        assert sum(level.sizes) == random_net.num_nodes


def test_refiner_gain_is_exact(random_net, desk):
    level = HierarchicalPartitioner(as_indexed(random_net), desk).coarsen()[0]
    labels = list(sequential_partition(random_net, None, desk).assignment)
    refiner = _LevelRefiner(level, labels, desk)
    parts = sorted(set(labels))
    for v in range(0, random_net.num_nodes, 7):
        for target in parts[:4]:
            if target == refiner.labels[v]:
                continue
            before = connectivity(
                push_forward(random_net, Partitioning.from_labels(refiner.labels))
            )
            after_labels = list(refiner.labels)
            after_labels[v] = target
            after = connectivity(
                push_forward(random_net, Partitioning.from_labels(after_labels))
            )
            assert refiner.gain(v, target) == pytest.approx(before - after, abs=1e-9)


def naive_connectivity(g, labels) -> float:
    """Sum of weight times foreign destination partitions, hyperedge by hyperedge."""
    return math.fsum(
        e.weight * len({labels[d] for d in e.destinations} - {labels[e.source]})
        for e in g.hedges
    )


def bounded_partitions(n: int, cap: int):
    """Every set partition of ``range(n)`` into blocks of at most ``cap`` nodes."""
    labels = [0] * n
    sizes: list[int] = []

    def extend(i: int):
        if i == n:
            yield tuple(labels)
            return
        for b in range(len(sizes)):
            if sizes[b] < cap:
                labels[i] = b
                sizes[b] += 1
                yield from extend(i + 1)
                sizes[b] -= 1
        labels[i] = len(sizes)
        sizes.append(1)
        yield from extend(i + 1)
        sizes.pop()

    yield from extend(0)


def test_bounded_partitions_count():
    # Set partitions of 4 nodes without the single block of four.
    assert sum(1 for _ in bounded_partitions(4, 3)) == 14


def test_unlinked_nodes_still_share_cores(build_graph, desk):
    g = build_graph(100, [(0, (1, 2), 1.0)])
    rho = hierarchical_partition(g, desk)
    assert rho.num_partitions == 7
    assert check_constraints(g, rho, desk).valid
    assert connectivity(push_forward(g, rho)) == 0


def test_isolated_nodes_fill_one_core(build_graph):
    hw = HardwareConfig(width=2, height=2, c_npc=4, c_apc=8, c_spc=16)
    rho = hierarchical_partition(build_graph(4, []), hw)
    assert rho.assignment == (0, 0, 0, 0)


def test_network_within_one_core(desk):
    g = gen_random_cyclic(RandomSnnSpec(num_nodes=12, mean_cardinality=3, seed=4))
    rho = hierarchical_partition(g, desk)
    assert rho.num_partitions == 1
    assert connectivity(push_forward(g, rho)) == 0


@pytest.mark.parametrize("seed", range(5))
def test_hierarchical_separates_two_cliques(build_graph, seed):
    hw = HardwareConfig(width=2, height=2, c_npc=4, c_apc=16, c_spc=32)
    edges = [(i, tuple(j for j in range(4) if j != i), 1.0) for i in range(4)]
    edges += [(i, tuple(j for j in range(4, 8) if j != i), 1.0) for i in range(4, 7)]
    edges.append((7, (4, 5, 6, 0), 0.1))
    g = build_graph(8, edges)
    best = min(
        naive_connectivity(g, [int(v in block) for v in range(8)])
        for block in itertools.combinations(range(8), 4)
    )
    rho = hierarchical_partition(g, hw, seed=seed)
    assert best == pytest.approx(0.1)
    assert connectivity(push_forward(g, rho)) == pytest.approx(best)
    assert {frozenset(p) for p in rho.members()} == {
        frozenset(range(4)),
        frozenset(range(4, 8)),
    }


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_hierarchical_close_to_optimum_on_small_networks(seed):
    hw = HardwareConfig(width=3, height=3, c_npc=3, c_apc=64, c_spc=192)
    g = gen_random_cyclic(RandomSnnSpec(num_nodes=9, mean_cardinality=2, seed=seed))
    optimum = min(naive_connectivity(g, labels) for labels in bounded_partitions(9, 3))
    rho = hierarchical_partition(g, hw, seed=seed)
    conn = connectivity(push_forward(g, rho))
    assert conn == pytest.approx(naive_connectivity(g, rho.assignment))
    assert conn <= 1.25 * optimum + 1e-9


def test_refiner_swaps_between_full_partitions(build_graph):
    hw = HardwareConfig(width=2, height=2, c_npc=2, c_apc=8, c_spc=16)
    g = build_graph(
        4, [(0, (2,), 1.0), (2, (0,), 1.0), (1, (3,), 1.0), (3, (1,), 1.0)]
    )
    level = HierarchicalPartitioner(as_indexed(g), hw).coarsen()[0]
    refiner = _LevelRefiner(level, [0, 0, 1, 1], hw)
    assert refiner.run_pass([0, 1, 2, 3]) == pytest.approx(4.0)
    assert refiner.labels[0] == refiner.labels[2]
    assert refiner.labels[1] == refiner.labels[3]
    assert refiner.overfull is None
    assert max(refiner.part_nodes.values()) <= hw.c_npc


def test_refiner_undoes_a_losing_pass(build_graph):
    hw = HardwareConfig(width=2, height=2, c_npc=2, c_apc=8, c_spc=16)
    g = build_graph(
        4,
        [
            (0, (1,), 1.0),
            (1, (0,), 1.0),
            (2, (3,), 1.0),
            (3, (2,), 1.0),
            (1, (2,), 0.5),
        ],
    )
    level = HierarchicalPartitioner(as_indexed(g), hw).coarsen()[0]
    refiner = _LevelRefiner(level, [0, 0, 1, 1], hw)
    # Every move loses, so the pass keeps nothing.
    assert refiner.run_pass([3, 2, 1, 0]) == 0
    assert refiner.labels == [0, 0, 1, 1]


@pytest.mark.slow
def test_partitioner_connectivity_ranking(desk):
    vs_sequential: list[float] = []
    vs_overlap: list[float] = []
    for seed in range(20):
        g = gen_random_cyclic(RandomSnnSpec(num_nodes=256, mean_cardinality=4, seed=seed))
        seq = connectivity(push_forward(g, sequential_partition(g, None, desk)))
        ovl = connectivity(push_forward(g, overlap_partition(g, desk)))
        hier = connectivity(push_forward(g, hierarchical_partition(g, desk, seed=seed)))
        vs_sequential.append(ovl / seq)
        vs_overlap.append(hier / ovl)
    assert statistics.median(vs_sequential) < 1.0
    assert statistics.median(vs_overlap) <= 1.05

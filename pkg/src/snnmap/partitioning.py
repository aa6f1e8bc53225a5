"""Partition SNN nodes into cores under per-core capacity limits.

Three partitioners are provided:

- ``sequential_partition`` fills cores along a node order.
- ``overlap_partition`` grows each core around hyperedges whose nodes it
  already holds, favoring nodes that add the fewest new inbound axons.
- ``hierarchical_partition`` coarsens the hypergraph by grouping strongly
  connected nodes, then uncoarsens with Fiduccia-Mattheyses style node moves.

All of them break ties by the lowest id and return compacted partition ids.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import StrEnum, auto
from typing import TYPE_CHECKING

import numpy as np
from loguru import logger

from snnmap.errors import CapacityError
from snnmap.hgraph import (
    AnyHypergraph,
    Hypergraph,
    IndexedHypergraph,
    Partitioning,
    as_base,
    as_indexed,
    connectivity,
    push_forward,
)
from snnmap.ordering import NodeOrder
from snnmap.pqueue import AddressablePriorityQueue

if TYPE_CHECKING:
    from snnmap.costmodel import HardwareConfig

MAX_REFINE_PASSES = 8
"""Refinement passes per uncoarsening level."""
FM_STALL_MOVES = 64
"""Moves a refinement pass makes past its best prefix before giving up."""
GAIN_EPS = 1e-9


class PartitionerKind(StrEnum):
    """Available partitioners."""

    sequential = auto()
    overlap = auto()
    hierarchical = auto()


def check_node_fits(g: IndexedHypergraph, hw: HardwareConfig):
    """Ensure every node fits an empty core on its own.

    Raises:
        CapacityError: When a node has more inbound hyperedges than a core
            accepts axons or synapses.

    """
    limit = min(hw.c_apc, hw.c_spc)
    for node in range(g.num_nodes):
        if (count := len(g.inbound(node))) > limit:
            raise CapacityError(
                f"Node {node} has {count} inbound hyperedges, a core accepts {limit}."
            )


def check_budget(num_partitions: int, hw: HardwareConfig):
    """Ensure the partitions fit the lattice.

    Raises:
        CapacityError: When there are more partitions than cores.

    """
    if num_partitions > hw.num_cores:
        raise CapacityError(
            f"Exceeded the partition budget: {num_partitions} > {hw.num_cores} cores."
        )


def sequential_partition(
    g: AnyHypergraph, order: NodeOrder | None, hw: HardwareConfig
) -> Partitioning:
    """Fill cores with successive nodes of ``order`` while limits allow.

    Args:
        g: The SNN hypergraph.
        order: Node order; None means ascending ids.
        hw: Hardware providing the per-core limits.

    Returns:
        The partitioning.

    Raises:
        CapacityError: When a node cannot fit an empty core or the
            partitions outnumber the cores.

    """
    ig = as_indexed(g)
    check_node_fits(ig, hw)
    sequence = range(ig.num_nodes) if order is None else order.sequence
    labels = [0] * ig.num_nodes
    part = 0
    nodes = synapses = 0
    axons: set[int] = set()
    for node in sequence:
        inbound = ig.inbound(node)
        fits = (
            nodes < hw.c_npc
            and synapses + len(inbound) <= hw.c_spc
            and len(axons.union(inbound)) <= hw.c_apc
        )
        if not fits:
            part += 1
            nodes = synapses = 0
            axons = set()
        labels[node] = part
        nodes += 1
        synapses += len(inbound)
        axons.update(inbound)
    rho = Partitioning.from_labels(labels)
    check_budget(rho.num_partitions, hw)
    logger.debug(f"Sequential partitioning: {rho.num_partitions} partitions.")
    return rho


class OverlapPartitioner:
    """Grow partitions hyperedge by hyperedge, maximizing synaptic reuse.

    Hyperedges are drawn from a priority queue keyed by weight times the
    share of their nodes already in the current partition; when the queue is
    empty the largest unseen hyperedge is taken. Visiting a hyperedge assigns
    its unassigned destinations, plus its source if that is an input node.
    """

    def __init__(self, g: AnyHypergraph, hw: HardwareConfig):
        """Prepare a run over ``g``."""
        self.g = as_indexed(g)
        self.hw = hw
        hedges = self.g.hedges
        self.labels = [-1] * self.g.num_nodes
        self.size = [len(e.destinations) + 1 for e in hedges]
        self.ratio = [0.0] * len(hedges)
        self.seen = [False] * len(hedges)
        self.visits = [0] * len(hedges)
        """Times each hyperedge was visited, for instrumentation."""
        self.assignments = [0] * self.g.num_nodes
        """Times each node was assigned, for instrumentation."""
        self.queue = AddressablePriorityQueue()
        self._inbound = [frozenset(self.g.inbound(v)) for v in range(self.g.num_nodes)]
        self._touched: list[int] = []
        self.part = 0
        self.npc = 0
        self.spc = 0
        self.apc: set[int] = set()

    def _fits(self, node: int) -> bool:
        inbound = self._inbound[node]
        return (
            self.npc < self.hw.c_npc
            and self.spc + len(inbound) <= self.hw.c_spc
            and len(self.apc) + len(inbound - self.apc) <= self.hw.c_apc
        )

    def _new_partition(self, node: int):
        if self.npc == 0:
            raise CapacityError(f"Node {node} cannot fit an empty core.")
        self.queue.clear()
        for e in self._touched:
            self.ratio[e] = 0.0
        self._touched.clear()
        self.part += 1
        self.npc = self.spc = 0
        self.apc = set()

    def _assign(self, node: int):
        self.labels[node] = self.part
        self.assignments[node] += 1
        self.npc += 1
        self.spc += len(self._inbound[node])
        self.apc |= self._inbound[node]
        for e in (*self.g.inbound(node), *self.g.outbound(node)):
            if not self.seen[e]:
                self._bump(e)

    def _bump(self, e: int):
        size = self.size[e]
        if size <= 1:
            self.size[e] = 0
            self.ratio[e] = 0.0
            if e in self.queue:
                del self.queue[e]
            return
        self.ratio[e] = (self.ratio[e] * size + 1) / (size - 1)
        self.size[e] = size - 1
        self._touched.append(e)
        self.queue[e] = self.g.hedges[e].weight * self.ratio[e]

    def _place(self, node: int):
        while not self._fits(node):
            self._new_partition(node)
        self._assign(node)

    def _visit(self, e: int):
        self.seen[e] = True
        self.visits[e] += 1
        if e in self.queue:
            del self.queue[e]
        hedge = self.g.hedges[e]
        nodes = {d for d in hedge.destinations if self.labels[d] == -1}
        if not self.g.inbound(hedge.source) and self.labels[hedge.source] == -1:
            nodes.add(hedge.source)
        while nodes:
            node = min(
                nodes,
                key=lambda m: (
                    len(self._inbound[m] - self.apc),
                    -len(self._inbound[m]),
                    m,
                ),
            )
            if not self._fits(node):
                self._new_partition(node)
                continue
            self._assign(node)
            nodes.discard(node)

    def run(self) -> Partitioning:
        """Partition every node.

        Returns:
            The partitioning.

        Raises:
            CapacityError: When a node cannot fit an empty core or the
                partitions outnumber the cores.

        """
        check_node_fits(self.g, self.hw)
        num_hedges = len(self.g.hedges)
        fallback = sorted(range(num_hedges), key=lambda e: (-self.size[e], e))
        cursor = 0
        for _ in range(num_hedges):
            if self.queue and self.queue.peek()[1] > 0:
                e, _ = self.queue.pop()
            else:
                while self.seen[fallback[cursor]]:
                    cursor += 1
                e = fallback[cursor]
            self._visit(e)
        for node in range(self.g.num_nodes):
            if self.labels[node] == -1:
                self._place(node)
        rho = Partitioning.from_labels(self.labels)
        check_budget(rho.num_partitions, self.hw)
        logger.debug(f"Overlap partitioning: {rho.num_partitions} partitions.")
        return rho


def overlap_partition(g: AnyHypergraph, hw: HardwareConfig) -> Partitioning:
    """Partition by hyperedge overlap.

    Returns:
        The partitioning.

    """
    return OverlapPartitioner(g, hw).run()


@dataclass(slots=True)
class CoarseningLevel:
    """One level of the coarsening hierarchy.

    Level 0 holds the original hypergraph with one node per fine node.
    """

    graph: Hypergraph
    groups: list[tuple[int, ...]]
    """Finer-level nodes merged into each node of this level."""
    index: int
    sizes: list[int]
    """Original nodes per node."""
    inbound: list[frozenset[int]]
    """Original inbound hyperedge ids per node."""
    synapses: list[int]
    """Original inbound connections per node."""

    @property
    def num_nodes(self) -> int:
        """Number of nodes at this level."""
        return self.graph.num_nodes


def _pins(graph: Hypergraph) -> list[tuple[int, ...]]:
    return [hedge.pins for hedge in graph.hedges]


def _incidence(num_nodes: int, pins: list[tuple[int, ...]]) -> list[list[int]]:
    incident: list[list[int]] = [[] for _ in range(num_nodes)]
    for e, members in enumerate(pins):
        for v in members:
            incident[v].append(e)
    return incident


class _LevelRefiner:
    """Fiduccia-Mattheyses style node moves between partitions at one level.

    A pass takes the highest gain move of any unlocked node, even a losing
    one, then locks that node. A move may overfill its target partition as
    long as the next move takes a node out of it again, which lets two nodes
    trade places between full partitions. Each pass rolls back to its best
    feasible prefix, so kept passes strictly lower connectivity.
    """

    def __init__(self, level: CoarseningLevel, labels: list[int], hw: HardwareConfig):
        self.level = level
        self.hw = hw
        self.labels = labels
        graph = level.graph
        self.weights = [e.weight for e in graph.hedges]
        self.sources = [e.source for e in graph.hedges]
        self.dest_sets = [frozenset(e.destinations) for e in graph.hedges]
        self.pins = _pins(graph)
        self.incident = _incidence(level.num_nodes, self.pins)
        self.dest_parts: list[Counter[int]] = [
            Counter(labels[d] for d in dests) for dests in self.dest_sets
        ]
        self.part_nodes: Counter[int] = Counter()
        self.part_synapses: Counter[int] = Counter()
        self.part_axons: dict[int, Counter[int]] = {}
        self.members: dict[int, set[int]] = {}
        self.overfull: int | None = None
        """Partition over its limits after the last move, if any."""
        self.vacated: int | None = None
        """Partition the overfilling move left."""
        for v, part in enumerate(labels):
            self._add(v, part)

    def _add(self, v: int, part: int):
        self.part_nodes[part] += self.level.sizes[v]
        self.part_synapses[part] += self.level.synapses[v]
        self.part_axons.setdefault(part, Counter()).update(self.level.inbound[v])
        self.members.setdefault(part, set()).add(v)

    def _remove(self, v: int, part: int):
        self.part_nodes[part] -= self.level.sizes[v]
        self.part_synapses[part] -= self.level.synapses[v]
        axons = self.part_axons[part]
        for a in self.level.inbound[v]:
            axons[a] -= 1
            if axons[a] == 0:
                del axons[a]
        self.members[part].discard(v)

    def _fits(self, v: int, part: int) -> bool:
        axons = self.part_axons.get(part, Counter())
        new_axons = sum(1 for a in self.level.inbound[v] if a not in axons)
        return (
            self.part_nodes[part] + self.level.sizes[v] <= self.hw.c_npc
            and self.part_synapses[part] + self.level.synapses[v] <= self.hw.c_spc
            and len(axons) + new_axons <= self.hw.c_apc
        )

    def _relieves(self, v: int, part: int) -> bool:
        """Whether taking ``v`` out of ``part`` brings it within limits."""
        axons = self.part_axons[part]
        freed = sum(1 for a in self.level.inbound[v] if axons[a] == 1)
        return (
            self.part_nodes[part] - self.level.sizes[v] <= self.hw.c_npc
            and self.part_synapses[part] - self.level.synapses[v] <= self.hw.c_spc
            and len(axons) - freed <= self.hw.c_apc
        )

    @staticmethod
    def _cut(parts: Counter[int], src_part: int) -> int:
        return len(parts) - (1 if src_part in parts else 0)

    def gain(self, v: int, target: int) -> float:
        """Connectivity decrease obtained by moving ``v`` to ``target``.

        Returns:
            The exact gain, positive when the move helps.

        """
        here = self.labels[v]
        terms: list[float] = []
        for e in self.incident[v]:
            parts = self.dest_parts[e]
            src = self.sources[e]
            before = self._cut(parts, self.labels[src])
            after_parts = parts
            if v in self.dest_sets[e]:
                after_parts = parts.copy()
                after_parts[here] -= 1
                if after_parts[here] == 0:
                    del after_parts[here]
                after_parts[target] += 1
            after = self._cut(after_parts, target if src == v else self.labels[src])
            if before != after:
                terms.append(self.weights[e] * (before - after))
        return math.fsum(terms)

    def move(self, v: int, target: int):
        """Move ``v`` to partition ``target``, updating every counter."""
        here = self.labels[v]
        for e in self.incident[v]:
            if v in self.dest_sets[e]:
                parts = self.dest_parts[e]
                parts[here] -= 1
                if parts[here] == 0:
                    del parts[here]
                parts[target] += 1
        self._remove(v, here)
        self._add(v, target)
        self.labels[v] = target

    def neighbors(self, v: int) -> set[int]:
        """Nodes sharing a hyperedge with ``v``."""
        return {u for e in self.incident[v] for u in self.pins[e]} - {v}

    def best_move(self, v: int) -> tuple[float, int] | None:
        """Highest gain move of ``v`` allowed in the current state.

        While a partition is overfull only moves out of it that fit their
        target and bring it back within limits are allowed.

        Returns:
            ``(gain, target)``, or None when ``v`` cannot move.

        """
        here = self.labels[v]
        if self.overfull is not None and (here != self.overfull or not self._relieves(v, here)):
            return None
        candidates = {self.labels[u] for u in self.neighbors(v)}
        if self.overfull is not None and self.vacated is not None:
            candidates.add(self.vacated)
        candidates.discard(here)
        best: tuple[float, bool, int] | None = None
        for part in sorted(candidates):
            fits = self._fits(v, part)
            if self.overfull is not None and not fits:
                continue
            key = (self.gain(v, part), fits, -part)
            if best is None or key > best:
                best = key
        return None if best is None else (best[0], -best[2])

    def run_pass(self, order: list[int]) -> float:
        """Move every node at most once, then keep the best feasible prefix.

        Args:
            order: Node visiting order; it breaks ties between equal gains.

        Returns:
            The connectivity decrease kept, zero when the pass was undone.

        """
        queue = AddressablePriorityQueue()
        rank = {v: i for i, v in enumerate(order)}
        locked: set[int] = set()
        parked: set[int] = set()

        def requeue(v: int):
            if (move := self.best_move(v)) is not None:
                queue[rank[v]] = move[0]
            elif self.overfull is not None:
                parked.add(v)
            elif rank[v] in queue:
                del queue[rank[v]]

        for v in order:
            requeue(v)
        moves: list[tuple[int, int]] = []
        total = best = 0.0
        best_len = stall = 0
        while queue and stall < FM_STALL_MOVES:
            key, priority = queue.pop()
            v = order[key]
            move = self.best_move(v)
            if move is None:
                if self.overfull is not None:
                    parked.add(v)
                continue
            gain, target = move
            if gain < priority - GAIN_EPS:
                queue[key] = gain
                continue
            here = self.labels[v]
            overfills = not self._fits(v, target)
            self.move(v, target)
            locked.add(v)
            moves.append((v, here))
            total += gain
            if overfills:
                self.overfull, self.vacated = target, here
                for u in self.members[target] - locked:
                    requeue(u)
            elif self.overfull is not None:
                self.overfull = self.vacated = None
                for u in parked - locked:
                    requeue(u)
                parked.clear()
            for u in self.neighbors(v) - locked:
                requeue(u)
            if self.overfull is None and total > best + GAIN_EPS:
                best, best_len, stall = total, len(moves), 0
            else:
                stall += 1
        for v, here in reversed(moves[best_len:]):
            self.move(v, here)
        self.overfull = self.vacated = None
        return best


@dataclass
class HierarchicalPartitioner:
    """Multilevel partitioner: cluster, coarsen, then refine while uncoarsening."""

    g: IndexedHypergraph
    hw: HardwareConfig
    seed: int | None = 0
    levels: list[CoarseningLevel] = field(default_factory=list)
    history: list[tuple[int, float]] = field(default_factory=list)
    """``(level index, connectivity)`` after each uncoarsening step."""
    gains: list[float] = field(default_factory=list)
    """Connectivity decrease kept by every refinement pass that moved nodes."""

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def _base_level(self) -> CoarseningLevel:
        n = self.g.num_nodes
        inbound = [frozenset(self.g.inbound(v)) for v in range(n)]
        return CoarseningLevel(
            graph=as_base(self.g),
            groups=[(v,) for v in range(n)],
            index=0,
            sizes=[1] * n,
            inbound=inbound,
            synapses=[len(x) for x in inbound],
        )

    def _group(self, level: CoarseningLevel, target: int) -> list[tuple[int, ...]] | None:
        """Merge strongly linked nodes into groups that fit a core.

        Nodes are visited in seeded random order. An ungrouped node joins the
        node or group it shares the heaviest hyperedges with, provided the
        result fits a core. Nodes left alone are then packed first-fit in id
        order, so unlinked nodes still coarsen.

        Returns:
            The groups ordered by lowest member, or None when nothing merged.

        """
        n = level.num_nodes
        pins = _pins(level.graph)
        incident = _incidence(n, pins)
        weights = [e.weight for e in level.graph.hedges]
        root = list(range(n))
        sizes = list(level.sizes)
        synapses = list(level.synapses)
        inbound = list(level.inbound)
        grouped = [False] * n

        def fits(u: int, r: int) -> bool:
            return (
                sizes[r] + sizes[u] <= self.hw.c_npc
                and synapses[r] + synapses[u] <= self.hw.c_spc
                and len(inbound[r] | inbound[u]) <= self.hw.c_apc
            )

        def join(u: int, r: int):
            root[u] = r
            sizes[r] += sizes[u]
            synapses[r] += synapses[u]
            inbound[r] |= inbound[u]
            grouped[u] = grouped[r] = True

        remaining = n
        for u in self.rng.permutation(n).tolist():
            if remaining <= target:
                break
            if grouped[u]:
                continue
            scores: dict[int, float] = {}
            for e in incident[u]:
                for r in {root[v] for v in pins[e]} - {u}:
                    scores[r] = scores.get(r, 0.0) + weights[e]
            for r in sorted(scores, key=lambda x: (-scores[x], x)):
                if fits(u, r):
                    join(u, r)
                    remaining -= 1
                    break
        open_roots: list[int] = []
        for u in range(n):
            if remaining <= target:
                break
            if grouped[u]:
                continue
            r = next((r for r in open_roots if fits(u, r)), None)
            if r is None:
                if sizes[u] < self.hw.c_npc:
                    open_roots.append(u)
                continue
            join(u, r)
            remaining -= 1
            if sizes[r] >= self.hw.c_npc:
                open_roots.remove(r)
        if remaining == n:
            return None
        groups: dict[int, list[int]] = {}
        for v in range(n):
            groups.setdefault(root[v], []).append(v)
        return [tuple(m) for m in groups.values()]

    def _coarsen(self, level: CoarseningLevel, groups: list[tuple[int, ...]]) -> CoarseningLevel:
        labels = [0] * level.num_nodes
        for c, members in enumerate(groups):
            for v in members:
                labels[v] = c
        rho = Partitioning.model_construct(assignment=tuple(labels), num_partitions=len(groups))
        return CoarseningLevel(
            graph=push_forward(level.graph, rho),
            groups=groups,
            index=level.index + 1,
            sizes=[sum(level.sizes[v] for v in m) for m in groups],
            inbound=[frozenset().union(*(level.inbound[v] for v in m)) for m in groups],
            synapses=[sum(level.synapses[v] for v in m) for m in groups],
        )

    def coarsen(self) -> list[CoarseningLevel]:
        """Build the coarsening hierarchy.

        Returns:
            Levels from the original graph to the coarsest.

        """
        target = math.ceil(self.g.num_nodes / self.hw.c_npc)
        self.levels = [self._base_level()]
        while self.levels[-1].num_nodes > target:
            groups = self._group(self.levels[-1], target)
            if groups is None:
                break
            self.levels.append(self._coarsen(self.levels[-1], groups))
            logger.debug(
                f"Coarsening level {self.levels[-1].index}: "
                f"{self.levels[-1].num_nodes} nodes."
            )
        return self.levels

    def _refine(self, level: CoarseningLevel, labels: list[int]) -> list[int]:
        refiner = _LevelRefiner(level, labels, self.hw)
        for _ in range(MAX_REFINE_PASSES):
            gain = refiner.run_pass(self.rng.permutation(level.num_nodes).tolist())
            if gain <= 0:
                break
            self.gains.append(gain)
        return refiner.labels

    def run(self) -> Partitioning:
        """Coarsen, then uncoarsen with refinement at every level.

        Returns:
            The partitioning.

        Raises:
            CapacityError: When a node cannot fit an empty core or the
                partitions outnumber the cores.

        """
        check_node_fits(self.g, self.hw)
        levels = self.coarsen()
        labels = list(range(levels[-1].num_nodes))
        for level in reversed(levels):
            labels = self._refine(level, labels)
            gp = push_forward(level.graph, Partitioning.from_labels(labels))
            self.history.append((level.index, connectivity(gp)))
            if level.index > 0:
                finer = [0] * sum(len(m) for m in level.groups)
                for c, members in enumerate(level.groups):
                    for v in members:
                        finer[v] = labels[c]
                labels = finer
        rho = Partitioning.from_labels(labels)
        check_budget(rho.num_partitions, self.hw)
        logger.debug(
            f"Hierarchical partitioning: {len(levels)} levels, "
            f"{rho.num_partitions} partitions."
        )
        return rho


def hierarchical_partition(
    g: AnyHypergraph, hw: HardwareConfig, seed: int | None = 0
) -> Partitioning:
    """Multilevel partitioning with seeded random visiting order.

    Returns:
        The partitioning.

    """
    return HierarchicalPartitioner(as_indexed(g), hw, seed).run()


def partition(
    g: AnyHypergraph,
    hw: HardwareConfig,
    kind: PartitionerKind | str,
    *,
    order: NodeOrder | None = None,
    seed: int | None = 0,
) -> Partitioning:
    """Run the requested partitioner.

    Returns:
        The partitioning.

    Raises:
        ValueError: On an unknown partitioner.

    """
    match PartitionerKind(kind):
        case PartitionerKind.sequential:
            return sequential_partition(g, order, hw)
        case PartitionerKind.overlap:
            return overlap_partition(g, hw)
        case PartitionerKind.hierarchical:
            return hierarchical_partition(g, hw, seed)

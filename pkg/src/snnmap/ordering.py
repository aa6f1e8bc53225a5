"""Node orderings consumed by sequential partitioning and placement."""

from collections import deque
from enum import StrEnum, auto
from typing import Self

from loguru import logger
from pydantic import model_validator

from snnmap.base import BaseNode
from snnmap.hgraph import AnyHypergraph, as_indexed
from snnmap.pqueue import AddressablePriorityQueue


class OrderKind(StrEnum):
    """How a node order was obtained."""

    natural = auto()
    """Node ids ascending."""
    layered = auto()
    """Layer-major order supplied by the network's producer."""
    greedy = auto()
    """Greedy approximation of a topological order, cycles allowed."""
    topo = auto()
    """Kahn order, heavier hyperedges first. Falls back to greedy on cycles."""


class NodeOrder(BaseNode):
    """A permutation of node ids and where it came from."""

    sequence: tuple[int, ...] = ()
    provenance: OrderKind = OrderKind.natural

    @model_validator(mode="after")
    def _check_permutation(self) -> Self:
        if sorted(self.sequence) != list(range(len(self.sequence))):
            raise ValueError("A node order must hold every node id exactly once.")
        return self

    def __len__(self) -> int:
        return len(self.sequence)


def greedy_order(g: AnyHypergraph) -> NodeOrder:
    """Order nodes so that connected nodes tend to be neighbors.

    All nodes with the fewest inbound hyperedges start at infinite priority.
    The queued node of highest priority is appended next, lowest id first on
    ties, and every unordered destination of its outbound hyperedges gains
    that hyperedge's weight. When nothing is queued the unordered node with
    the fewest inbound hyperedges is taken.

    Returns:
        The greedy order.

    """
    ig = as_indexed(g)
    n = ig.num_nodes
    in_deg = [len(ig.inbound(v)) for v in range(n)]
    fallback = sorted(range(n), key=lambda v: (in_deg[v], v))
    ordered = [False] * n
    queue = AddressablePriorityQueue()
    if n:
        least = in_deg[fallback[0]]
        for v in fallback:
            if in_deg[v] != least:
                break
            queue[v] = float("inf")

    sequence: list[int] = []
    cursor = 0
    while len(sequence) < n:
        if queue:
            node, _ = queue.pop()
        else:
            while ordered[fallback[cursor]]:
                cursor += 1
            node = fallback[cursor]
        ordered[node] = True
        sequence.append(node)
        for e in ig.outbound(node):
            hedge = ig.hedges[e]
            for d in hedge.destinations:
                if not ordered[d]:
                    queue.increase(d, hedge.weight)
    return NodeOrder.model_construct(sequence=tuple(sequence), provenance=OrderKind.greedy)


def topo_order(g: AnyHypergraph) -> NodeOrder | None:
    """Kahn topological order processing heavier outbound hyperedges first.

    Returns:
        The order, or None when ``g`` has a cycle.

    """
    ig = as_indexed(g)
    n = ig.num_nodes
    pending = [0] * n
    for hedge in ig.hedges:
        for d in hedge.destinations:
            pending[d] += 1
    queue = deque(v for v in range(n) if pending[v] == 0)
    sequence: list[int] = []
    while queue:
        node = queue.popleft()
        sequence.append(node)
        outbound = sorted(ig.outbound(node), key=lambda e: (-ig.hedges[e].weight, e))
        for e in outbound:
            for d in sorted(ig.hedges[e].destinations):
                pending[d] -= 1
                if pending[d] == 0:
                    queue.append(d)
    if len(sequence) < n:
        logger.debug(f"Cycle detected: {n - len(sequence)} nodes left unordered.")
        return None
    return NodeOrder.model_construct(
        sequence=tuple(sequence), provenance=OrderKind.topo
    )


def make_order(
    g: AnyHypergraph,
    strategy: OrderKind | str,
    sequence: tuple[int, ...] | None = None,
) -> NodeOrder:
    """Build a node order with the requested strategy.

    Args:
        g: The hypergraph whose nodes are ordered.
        strategy: One of the ``OrderKind`` values.
        sequence: Layer-major order for ``layered``. Defaults to the natural
            order, which is layer-major for generated layered networks.

    Returns:
        The node order. A topological request on a cyclic graph returns the
        greedy order instead.

    Raises:
        ValueError: On an unknown strategy.

    """
    match OrderKind(strategy):
        case OrderKind.natural:
            return NodeOrder.model_construct(sequence=tuple(range(g.num_nodes)))
        case OrderKind.layered:
            seq = tuple(range(g.num_nodes)) if sequence is None else sequence
            return NodeOrder(sequence=seq, provenance=OrderKind.layered)
        case OrderKind.greedy:
            return greedy_order(g)
        case OrderKind.topo:
            order = topo_order(g)
            if order is None:
                logger.warning("Graph has cycles, using the greedy order instead.")
                order = greedy_order(g)
            return order

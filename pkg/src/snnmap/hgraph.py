"""Directed single-source hypergraphs and their partitionings.

A hypergraph in SNN form houses one hyperedge (axon) per spiking neuron:
a source node, the destination nodes it synapses onto and its spike
frequency. Pushing such a graph forward through a partitioning yields the
partition-level hypergraph whose weighted connectivity counts inter-core
spike traffic.
"""

import math
from collections import Counter
from enum import StrEnum, auto
from typing import TYPE_CHECKING, Any, Self, TextIO

from pydantic import Field, PrivateAttr, model_validator

from snnmap.base import BaseNode
from snnmap.errors import HgxParseError

if TYPE_CHECKING:
    from collections.abc import Iterable

    from snnmap.costmodel import HardwareConfig

HGX_MAGIC = "HGX 1"


class Hyperedge(BaseNode):
    """One axon: a source node, its destination nodes and a spike frequency."""

    source: int = Field(ge=0)
    destinations: tuple[int, ...] = ()
    weight: float = Field(gt=0, allow_inf_nan=False)
    """Spike frequency in spikes per timestep."""

    @model_validator(mode="after")
    def _check_destinations(self) -> Self:
        if len(set(self.destinations)) != len(self.destinations):
            raise ValueError(f"Duplicate destination in hyperedge of {self.source}.")
        if any(d < 0 for d in self.destinations):
            raise ValueError(f"Negative destination in hyperedge of {self.source}.")
        return self

    @property
    def pins(self) -> tuple[int, ...]:
        """Source followed by every destination distinct from it."""
        return (self.source, *(d for d in self.destinations if d != self.source))


class Hypergraph(BaseNode):
    """Directed weighted hypergraph with exactly one source per hyperedge.

    Node ids are the dense integers ``0..num_nodes-1``.
    """

    num_nodes: int = Field(default=0, ge=0)
    hedges: tuple[Hyperedge, ...] = ()
    snn: bool = True
    """SNN form: every node sources at most one hyperedge and no hyperedge
    targets its own source. Partition-level graphs drop this restriction."""

    @model_validator(mode="after")
    def _check_incidence(self) -> Self:
        sources: set[int] = set()
        for idx, hedge in enumerate(self.hedges):
            if hedge.source >= self.num_nodes:
                raise ValueError(f"Hyperedge {idx} source {hedge.source} out of range.")
            if any(d >= self.num_nodes for d in hedge.destinations):
                raise ValueError(f"Hyperedge {idx} has a destination out of range.")
            if self.snn:
                if hedge.source in sources:
                    raise ValueError(f"Node {hedge.source} sources two hyperedges.")
                if hedge.source in hedge.destinations:
                    raise ValueError(f"Hyperedge {idx} targets its own source.")
                sources.add(hedge.source)
        return self

    @property
    def num_hedges(self) -> int:
        """Number of hyperedges."""
        return len(self.hedges)

    @property
    def num_connections(self) -> int:
        """Number of individual source to destination connections (synapses)."""
        return sum(len(e.destinations) for e in self.hedges)


class IndexedHypergraph(BaseNode):
    """A hypergraph with inbound and outbound hyperedge indices per node."""

    base: Hypergraph
    _inbound: tuple[tuple[int, ...], ...] = PrivateAttr(default=())
    _outbound: tuple[tuple[int, ...], ...] = PrivateAttr(default=())

    def model_post_init(self, context: Any, /) -> None:
        """Build both incidence indices."""
        inbound: list[list[int]] = [[] for _ in range(self.base.num_nodes)]
        outbound: list[list[int]] = [[] for _ in range(self.base.num_nodes)]
        for idx, hedge in enumerate(self.base.hedges):
            outbound[hedge.source].append(idx)
            for d in hedge.destinations:
                inbound[d].append(idx)
        self._inbound = tuple(map(tuple, inbound))
        self._outbound = tuple(map(tuple, outbound))
        return super().model_post_init(context)

    @property
    def num_nodes(self) -> int:
        """Number of nodes of the underlying hypergraph."""
        return self.base.num_nodes

    @property
    def hedges(self) -> tuple[Hyperedge, ...]:
        """Hyperedges of the underlying hypergraph."""
        return self.base.hedges

    def inbound(self, node: int) -> tuple[int, ...]:
        """Ids of the hyperedges whose destinations include ``node``."""
        return self._inbound[node]

    def outbound(self, node: int) -> tuple[int, ...]:
        """Ids of the hyperedges sourced at ``node``."""
        return self._outbound[node]


type AnyHypergraph = Hypergraph | IndexedHypergraph


def build_indices(g: Hypergraph) -> IndexedHypergraph:
    """Attach inbound and outbound indices to a hypergraph.

    Returns:
        The indexed hypergraph.

    """
    return IndexedHypergraph.model_construct(base=g)


def as_indexed(g: AnyHypergraph) -> IndexedHypergraph:
    """Index ``g`` unless it already is.

    Returns:
        An indexed hypergraph over the same nodes and hyperedges.

    """
    return g if isinstance(g, IndexedHypergraph) else build_indices(g)


def as_base(g: AnyHypergraph) -> Hypergraph:
    """Strip indices, if any.

    Returns:
        The underlying hypergraph.

    """
    return g.base if isinstance(g, IndexedHypergraph) else g


class Partitioning(BaseNode):
    """Total surjective assignment of nodes to dense partition ids."""

    assignment: tuple[int, ...] = ()
    num_partitions: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_surjective(self) -> Self:
        used = set(self.assignment)
        if any(p < 0 or p >= self.num_partitions for p in used):
            raise ValueError("Partition id out of range.")
        if len(used) != self.num_partitions:
            raise ValueError("Every partition must hold at least one node.")
        return self

    @classmethod
    def from_labels(cls, labels: Iterable[int]) -> Self:
        """Create a partitioning from arbitrary labels.

        Labels are compacted to dense ids in order of first appearance.

        Returns:
            A valid partitioning.

        """
        compact: dict[int, int] = {}
        assignment = tuple(compact.setdefault(x, len(compact)) for x in labels)
        return cls.model_construct(assignment=assignment, num_partitions=len(compact))

    @classmethod
    def singleton(cls, num_nodes: int) -> Self:
        """Every node in its own partition."""
        return cls.model_construct(
            assignment=tuple(range(num_nodes)), num_partitions=num_nodes
        )

    @classmethod
    def single(cls, num_nodes: int) -> Self:
        """Every node in partition 0."""
        return cls.model_construct(
            assignment=(0,) * num_nodes, num_partitions=min(num_nodes, 1)
        )

    @property
    def num_nodes(self) -> int:
        """Number of assigned nodes."""
        return len(self.assignment)

    def members(self) -> list[list[int]]:
        """Node ids per partition, ascending.

        Returns:
            One list of node ids per partition id.

        """
        out: list[list[int]] = [[] for _ in range(self.num_partitions)]
        for node, part in enumerate(self.assignment):
            out[part].append(node)
        return out

    def sizes(self) -> list[int]:
        """Number of nodes per partition."""
        counts = Counter(self.assignment)
        return [counts[p] for p in range(self.num_partitions)]


def _check_total(g: AnyHypergraph, rho: Partitioning):
    if rho.num_nodes != g.num_nodes:
        raise ValueError(
            f"Partitioning covers {rho.num_nodes} nodes, hypergraph has {g.num_nodes}."
        )


def push_forward(g: AnyHypergraph, rho: Partitioning) -> Hypergraph:
    """Build the partition-level hypergraph of ``g`` under ``rho``.

    Each hyperedge ``(s, D)`` maps to ``(rho(s), rho(D) - {rho(s)})``. Mapped
    hyperedges without remote destinations are dropped and those sharing
    source and destination set are merged by summing their weights.

    Returns:
        A hypergraph over partition ids, not in SNN form.

    Raises:
        ValueError: When ``rho`` does not cover every node of ``g``.

    """
    _check_total(g, rho)
    assign = rho.assignment
    groups: dict[tuple[int, tuple[int, ...]], list[float]] = {}
    for hedge in as_base(g).hedges:
        src = assign[hedge.source]
        dests = tuple(sorted({assign[d] for d in hedge.destinations} - {src}))
        if dests:
            groups.setdefault((src, dests), []).append(hedge.weight)
    hedges = tuple(
        Hyperedge.model_construct(source=s, destinations=d, weight=math.fsum(ws))
        for (s, d), ws in groups.items()
    )
    return Hypergraph.model_construct(
        num_nodes=rho.num_partitions, hedges=hedges, snn=False
    )


def connectivity(gp: Hypergraph) -> float:
    """Weighted connectivity (lambda minus one) of a partition-level graph.

    Returns:
        The sum of ``w * |D|`` over all hyperedges.

    """
    return math.fsum(e.weight * len(e.destinations) for e in gp.hedges)


class ConstraintKind(StrEnum):
    """Per-core resource limits a partitioning must respect."""

    npc = auto()
    """Neurons per core."""
    apc = auto()
    """Distinct inbound axons per core."""
    spc = auto()
    """Inbound synapses per core."""
    partitions = auto()
    """Number of partitions versus number of cores."""


class Violation(BaseNode):
    """A single broken limit."""

    kind: ConstraintKind
    partition: int | None = None
    observed: int
    limit: int

    def __str__(self) -> str:
        where = "mapping" if self.partition is None else f"partition {self.partition}"
        return f"{where}: {self.kind} {self.observed} > {self.limit}"


class ConstraintReport(BaseNode):
    """Per-partition resource usage and the limits it breaks."""

    node_counts: tuple[int, ...] = ()
    axon_counts: tuple[int, ...] = ()
    """Distinct inbound hyperedges per partition."""
    synapse_counts: tuple[int, ...] = ()
    """Inbound connections per partition."""
    violations: tuple[Violation, ...] = ()

    @property
    def valid(self) -> bool:
        """True when no limit is broken."""
        return not self.violations


def resource_usage(
    g: AnyHypergraph, rho: Partitioning
) -> tuple[list[int], list[int], list[int]]:
    """Count nodes, distinct inbound axons and inbound synapses per partition.

    An inbound hyperedge counts toward a partition even when its source
    lies in the same partition.

    Returns:
        The three per-partition count lists.

    Raises:
        ValueError: When ``rho`` does not cover every node of ``g``.

    """
    _check_total(g, rho)
    k = rho.num_partitions
    assign = rho.assignment
    nodes = [0] * k
    axons = [0] * k
    synapses = [0] * k
    for part in assign:
        nodes[part] += 1
    for hedge in as_base(g).hedges:
        parts = [assign[d] for d in hedge.destinations]
        for part in parts:
            synapses[part] += 1
        for part in set(parts):
            axons[part] += 1
    return nodes, axons, synapses


def check_constraints(
    g: AnyHypergraph, rho: Partitioning, hw: HardwareConfig
) -> ConstraintReport:
    """Check a partitioning against the per-core capacities of ``hw``.

    Returns:
        Usage counts and every violation found. Violations are data, the
        function does not raise on them.

    """
    nodes, axons, synapses = resource_usage(g, rho)
    violations: list[Violation] = []
    limits = (
        (ConstraintKind.npc, nodes, hw.c_npc),
        (ConstraintKind.apc, axons, hw.c_apc),
        (ConstraintKind.spc, synapses, hw.c_spc),
    )
    for part in range(rho.num_partitions):
        violations.extend(
            Violation(kind=kind, partition=part, observed=counts[part], limit=limit)
            for kind, counts, limit in limits
            if counts[part] > limit
        )
    if rho.num_partitions > hw.num_cores:
        violations.append(
            Violation(
                kind=ConstraintKind.partitions,
                observed=rho.num_partitions,
                limit=hw.num_cores,
            )
        )
    return ConstraintReport(
        node_counts=tuple(nodes),
        axon_counts=tuple(axons),
        synapse_counts=tuple(synapses),
        violations=tuple(violations),
    )


class PartitionStats(BaseNode):
    """Summary of a partitioning used in reports."""

    num_partitions: int
    sizes: tuple[int, ...]
    size_histogram: dict[int, int]
    """Partition size -> number of partitions of that size."""
    axons: tuple[int, ...]
    synapses: tuple[int, ...]


def partition_stats(g: AnyHypergraph, rho: Partitioning) -> PartitionStats:
    """Summarize partition sizes and per-partition axon and synapse usage.

    Returns:
        The partition statistics.

    """
    nodes, axons, synapses = resource_usage(g, rho)
    return PartitionStats(
        num_partitions=rho.num_partitions,
        sizes=tuple(nodes),
        size_histogram=dict(sorted(Counter(nodes).items())),
        axons=tuple(axons),
        synapses=tuple(synapses),
    )


# HGX and partition file formats


def _read(stream: str | TextIO) -> list[str]:
    text = stream if isinstance(stream, str) else stream.read()
    lines = text.split("\n")
    if lines and not lines[-1]:
        lines.pop()
    return lines


def _int(token: str, line: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise HgxParseError(f"invalid {what} {token!r}", line=line) from None


def _parse_hedge(tokens: list[str], lineno: int, num_nodes: int) -> Hyperedge:
    if len(tokens) < 3:  # noqa: PLR2004
        raise HgxParseError("expected '<weight> <source> <k> <d_1> ...'", line=lineno)
    try:
        weight = float(tokens[0])
    except ValueError:
        raise HgxParseError(f"invalid weight {tokens[0]!r}", line=lineno) from None
    if not math.isfinite(weight) or weight <= 0:
        raise HgxParseError(f"non-positive or non-finite weight {weight}", line=lineno)
    source = _int(tokens[1], lineno, "source")
    count = _int(tokens[2], lineno, "destination count")
    if count < 0 or len(tokens) != 3 + count:
        raise HgxParseError(
            f"expected {count} destinations, found {len(tokens) - 3}", line=lineno
        )
    dests = tuple(_int(t, lineno, "destination") for t in tokens[3:])
    for node in (source, *dests):
        if not 0 <= node < num_nodes:
            raise HgxParseError(f"node id {node} out of range", line=lineno)
    if len(set(dests)) != len(dests):
        raise HgxParseError("duplicate destination", line=lineno)
    return Hyperedge.model_construct(source=source, destinations=dests, weight=weight)


def parse_hypergraph(stream: str | TextIO, *, snn: bool = True) -> Hypergraph:
    """Parse HGX v1 text.

    Args:
        stream: HGX text or a readable text stream.
        snn: Enforce SNN form (one hyperedge per source, no self-synapses).

    Returns:
        The validated hypergraph.

    Raises:
        HgxParseError: On any grammar or invariant violation, with the line
            number of the offending line.

    """
    lines = _read(stream)
    if not lines or lines[0].strip() != HGX_MAGIC:
        raise HgxParseError(f"missing {HGX_MAGIC!r} header", line=1)
    header = lines[1].split() if len(lines) > 1 else []
    if len(header) != 2:  # noqa: PLR2004
        raise HgxParseError("expected '<num_nodes> <num_hedges>'", line=2)
    num_nodes = _int(header[0], 2, "node count")
    num_hedges = _int(header[1], 2, "hyperedge count")
    if num_nodes < 0 or num_hedges < 0:
        raise HgxParseError("negative count in header", line=2)
    body = lines[2:]
    if len(body) != num_hedges:
        raise HgxParseError(
            f"header declares {num_hedges} hyperedges, found {len(body)}",
            line=len(lines) + 1,
        )

    sources: set[int] = set()
    hedges: list[Hyperedge] = []
    for lineno, line in enumerate(body, start=3):
        hedge = _parse_hedge(line.split(), lineno, num_nodes)
        if snn:
            if hedge.source in hedge.destinations:
                raise HgxParseError("destination equals source", line=lineno)
            if hedge.source in sources:
                raise HgxParseError(f"duplicate source {hedge.source}", line=lineno)
            sources.add(hedge.source)
        hedges.append(hedge)
    return Hypergraph.model_construct(
        num_nodes=num_nodes, hedges=tuple(hedges), snn=snn
    )


def serialize_hypergraph(g: AnyHypergraph) -> str:
    """Emit HGX v1 text, weights as shortest round-trip decimals.

    Returns:
        LF terminated HGX text.

    """
    base = as_base(g)
    lines = [HGX_MAGIC, f"{base.num_nodes} {base.num_hedges}"]
    lines.extend(
        " ".join(
            (repr(float(e.weight)), str(e.source), str(len(e.destinations)))
            + tuple(map(str, e.destinations))
        )
        for e in base.hedges
    )
    return "\n".join(lines) + "\n"


def serialize_partitioning(rho: Partitioning) -> str:
    """Emit one ``<node_id> <partition_id>`` line per node.

    Returns:
        LF terminated text.

    """
    return "".join(f"{node} {part}\n" for node, part in enumerate(rho.assignment))


def parse_partitioning(stream: str | TextIO, num_nodes: int | None = None) -> Partitioning:
    """Parse a partition file.

    Args:
        stream: Partition file text or a readable text stream.
        num_nodes: Expected node count, if known.

    Returns:
        The partitioning. Partition ids must already be dense.

    Raises:
        HgxParseError: On malformed lines, duplicate or missing nodes, or
            non dense partition ids.

    """
    lines = _read(stream)
    size = len(lines) if num_nodes is None else num_nodes
    assignment: list[int | None] = [None] * size
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if len(tokens) != 2:  # noqa: PLR2004
            raise HgxParseError("expected '<node_id> <partition_id>'", line=lineno)
        node = _int(tokens[0], lineno, "node id")
        part = _int(tokens[1], lineno, "partition id")
        if not 0 <= node < size:
            raise HgxParseError(f"node id {node} out of range", line=lineno)
        if assignment[node] is not None:
            raise HgxParseError(f"node {node} assigned twice", line=lineno)
        if part < 0:
            raise HgxParseError(f"negative partition id {part}", line=lineno)
        assignment[node] = part
    if None in assignment:
        missing = assignment.index(None)
        raise HgxParseError(f"node {missing} is not assigned")
    labels = [p for p in assignment if p is not None]
    try:
        return Partitioning(assignment=tuple(labels), num_partitions=len(set(labels)))
    except ValueError as exc:
        raise HgxParseError(f"partition ids are not dense: {exc}") from None

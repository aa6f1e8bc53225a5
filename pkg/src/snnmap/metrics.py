"""Mapping property measures and hypergraph diagnostics.

Synaptic reuse tells how many synapses one transmitted spike feeds inside a
partition; connections locality counts the cores enclosed by the convex
hull of every partition-level hyperedge. Both come with arithmetic and
geometric means, and ``spearman`` relates them to mapping quality.
"""

import itertools
import math
from enum import StrEnum, auto
from typing import TYPE_CHECKING, Self

import numpy as np
import scipy.sparse as sp
from pydantic import model_validator
from scipy.sparse.csgraph import shortest_path
from scipy.stats import gmean, rankdata

from snnmap.base import BaseNode
from snnmap.hgraph import AnyHypergraph, Partitioning, as_base, resource_usage

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from snnmap.costmodel import Placement, Point

_PAIR_CHUNK = 256
_SAMPLE_ROUNDS = 8


class MeanKind(StrEnum):
    """How per-item values are averaged."""

    arithmetic = auto()
    geometric = auto()


def mean(values: Sequence[float], kind: MeanKind | str) -> float:
    """Average ``values`` with the requested mean.

    Returns:
        The mean, 1.0 for no values.

    Raises:
        ValueError: When a geometric mean meets a non-positive value.

    """
    if not values:
        return 1.0
    if MeanKind(kind) is MeanKind.arithmetic:
        return math.fsum(values) / len(values)
    if min(values) <= 0:
        raise ValueError("Geometric means need positive values.")
    return float(gmean(values))


def _cross(o: Point, a: Point, b: Point) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


class ConvexHull2D(BaseNode):
    """Convex hull of a set of lattice points.

    Vertices are counterclockwise, starting from the lowest ``(x, y)``,
    without collinear vertices. Degenerate hulls hold one or two vertices.
    """

    vertices: tuple[tuple[int, int], ...]

    @model_validator(mode="after")
    def _check_nonempty(self) -> Self:
        if not self.vertices:
            raise ValueError("A hull needs at least one vertex.")
        return self

    @classmethod
    def of(cls, points: Iterable[Point]) -> Self:
        """Hull of ``points`` by the monotone chain algorithm.

        Returns:
            The hull.

        """
        pts = sorted(set(map(tuple, points)))
        if len(pts) <= 2:  # noqa: PLR2004
            return cls(vertices=tuple(pts))
        lower: list[Point] = []
        for p in pts:
            while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:  # noqa: PLR2004
                lower.pop()
            lower.append(p)
        upper: list[Point] = []
        for p in reversed(pts):
            while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:  # noqa: PLR2004
                upper.pop()
            upper.append(p)
        return cls(vertices=tuple(lower[:-1] + upper[:-1]))

    def _edges(self) -> list[tuple[Point, Point]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def lattice_count(self) -> int:
        """Lattice points inside or on the hull, scanned row by row."""
        ys = [y for _, y in self.vertices]
        total = 0
        for y in range(min(ys), max(ys) + 1):
            lo: int | None = None
            hi: int | None = None
            for (ax, ay), (bx, by) in self._edges():
                if not min(ay, by) <= y <= max(ay, by):
                    continue
                if ay == by:
                    left, right = min(ax, bx), max(ax, bx)
                else:
                    num = ax * (by - ay) + (y - ay) * (bx - ax)
                    den = by - ay
                    if den < 0:
                        num, den = -num, -den
                    left = -((-num) // den)
                    right = num // den
                lo = left if lo is None else min(lo, left)
                hi = right if hi is None else max(hi, right)
            if lo is not None and hi is not None and hi >= lo:
                total += hi - lo + 1
        return total


def lattice_hull_count(points: Iterable[Point]) -> int:
    """Number of lattice points inside or on the convex hull of ``points``.

    Returns:
        The count, at least 1.

    Raises:
        ValueError: On an empty point set.

    """
    return ConvexHull2D.of(points).lattice_count()


def synaptic_reuse(
    gs: AnyHypergraph, rho: Partitioning, kind: MeanKind | str = MeanKind.geometric
) -> float:
    """Mean over partitions of inbound synapses per distinct inbound axon.

    Partitions without inbound hyperedges count as ratio 1.

    Returns:
        The synaptic reuse, at least 1.

    """
    _, axons, synapses = resource_usage(gs, rho)
    ratios = [s / a if a else 1.0 for a, s in zip(axons, synapses, strict=True)]
    return mean(ratios, kind)


def connections_locality(
    gp: AnyHypergraph, gamma: Placement, kind: MeanKind | str = MeanKind.arithmetic
) -> float:
    """Mean over partition-level hyperedges of the cores their hull encloses.

    The hull spans the source core and every destination core. A graph
    without hyperedges has locality 1.

    Returns:
        The connections locality.

    Raises:
        ValueError: When a partition is not placed.

    """
    coords = gamma.coords
    counts: list[float] = []
    for hedge in as_base(gp).hedges:
        if max(hedge.pins) >= len(coords):
            raise ValueError(f"Partition {max(hedge.pins)} is not placed.")
        counts.append(float(lattice_hull_count(coords[p] for p in hedge.pins)))
    return mean(counts, kind)


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation, ties sharing their average rank.

    Returns:
        The correlation in ``[-1, 1]``.

    Raises:
        ValueError: On unequal lengths, fewer than three values, or a
            constant series.

    """
    if len(xs) != len(ys):
        raise ValueError("Series must have equal lengths.")
    if len(xs) < 3:  # noqa: PLR2004
        raise ValueError("Rank correlation needs at least three pairs.")
    rx, ry = rankdata(xs), rankdata(ys)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise ValueError("Rank correlation is undefined for a constant series.")
    return float(np.clip(np.corrcoef(rx, ry)[0, 1], -1.0, 1.0))


def _adjacency(g: AnyHypergraph) -> sp.csr_array:
    base = as_base(g)
    rows = [h.source for h in base.hedges for _ in h.destinations]
    cols = [d for h in base.hedges for d in h.destinations]
    n = base.num_nodes
    return sp.csr_array((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def avg_path_length(g: AnyHypergraph, samples: int = 10_000, seed: int = 0) -> float:
    """Mean hop distance between reachable ordered node pairs.

    Every destination of a hyperedge is one hop from its source. All pairs
    are used when there are at most ``samples`` of them. Otherwise rounds of
    ``samples`` uniformly drawn ordered pairs are measured and unreachable
    ones rejected, until ``samples`` pairs were kept or the rounds run out.

    Returns:
        The average path length.

    Raises:
        ValueError: When no (sampled) node reaches another.

    """
    adj = _adjacency(g)
    n = adj.shape[0]
    lengths: list[float] = []
    if n * (n - 1) <= samples:
        for start in range(0, n, _PAIR_CHUNK):
            chunk = np.arange(start, min(start + _PAIR_CHUNK, n))
            dist = np.atleast_2d(shortest_path(adj, unweighted=True, indices=chunk))
            dist[np.arange(chunk.size), chunk] = np.inf
            lengths.extend(dist[np.isfinite(dist)].tolist())
    else:
        rng = np.random.default_rng(seed)
        for _ in range(_SAMPLE_ROUNDS):
            sources = rng.integers(n, size=samples)
            targets = rng.integers(n - 1, size=samples)
            targets += targets >= sources
            by_source = np.argsort(sources, kind="stable")
            for start in range(0, samples, _PAIR_CHUNK):
                idx = by_source[start : start + _PAIR_CHUNK]
                rows, inverse = np.unique(sources[idx], return_inverse=True)
                dist = np.atleast_2d(shortest_path(adj, unweighted=True, indices=rows))
                hops = dist[inverse, targets[idx]]
                lengths.extend(hops[np.isfinite(hops)].tolist())
            if len(lengths) >= samples:
                break
    if not lengths:
        raise ValueError("No node reaches another node.")
    return math.fsum(lengths) / len(lengths)


def avg_hedge_overlap(g: AnyHypergraph, samples: int = 10_000, seed: int = 0) -> float:
    """Mean Jaccard overlap of destination sets over hyperedge pairs.

    All pairs are used when there are at most ``samples`` of them;
    otherwise ``samples`` distinct-index pairs are drawn.

    Returns:
        The average overlap in ``[0, 1]``.

    Raises:
        ValueError: With fewer than two hyperedges.

    """
    dests = [frozenset(h.destinations) for h in as_base(g).hedges]
    m = len(dests)
    if m < 2:  # noqa: PLR2004
        raise ValueError("Overlap needs at least two hyperedges.")
    if m * (m - 1) // 2 <= samples:
        pairs: Iterable[tuple[int, int]] = itertools.combinations(range(m), 2)
    else:
        rng = np.random.default_rng(seed)
        first = rng.integers(m, size=samples)
        second = (first + rng.integers(1, m, size=samples)) % m
        pairs = zip(first.tolist(), second.tolist(), strict=True)
    overlaps = [len(dests[a] & dests[b]) / len(dests[a] | dests[b]) for a, b in pairs]
    return math.fsum(overlaps) / len(overlaps)

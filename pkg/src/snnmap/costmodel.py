"""Hardware lattice model and post-layout performance metrics.

Spikes travel between cores along minimal Manhattan routes. Energy and
latency charge every hop and every router on the way; congestion assumes a
spike takes any of the minimal routes with equal probability.
"""

import math
from functools import cache
from typing import TYPE_CHECKING, Any, Self, TextIO

import numpy as np
from pydantic import Field, PositiveInt, PrivateAttr, model_validator
from scipy.special import gammaln

from snnmap.base import BaseNode
from snnmap.errors import HgxParseError
from snnmap.hgraph import (
    AnyHypergraph,
    Hypergraph,
    Partitioning,
    as_indexed,
    check_constraints,
    connectivity,
    push_forward,
)

if TYPE_CHECKING:
    from collections.abc import Iterable

type Point = tuple[int, int]

# Displacements up to this many hops use exact integer binomials.
_EXACT_PATHS_LIMIT = 256


class HardwareConfig(BaseNode):
    """A single-chip 2D mesh of neuromorphic cores.

    Defaults match the "small" reference chip.
    """

    width: PositiveInt = 64
    height: PositiveInt = 64
    c_npc: PositiveInt = 1024
    """Neurons per core."""
    c_apc: PositiveInt = 4096
    """Distinct inbound axons per core."""
    c_spc: PositiveInt = 16384
    """Inbound synapses per core."""
    energy_route: float = Field(default=1.7, gt=0, allow_inf_nan=False)
    """Energy per routing operation, picojoules."""
    energy_link: float = Field(default=3.5, gt=0, allow_inf_nan=False)
    """Energy per link transmission, picojoules."""
    latency_route: float = Field(default=2.1, gt=0, allow_inf_nan=False)
    """Latency per routing operation, nanoseconds."""
    latency_link: float = Field(default=5.3, gt=0, allow_inf_nan=False)
    """Latency per link transmission, nanoseconds."""

    @model_validator(mode="after")
    def _check_synapse_limit(self) -> Self:
        if self.c_spc > self.c_npc * self.c_apc:
            raise ValueError("c_spc cannot exceed c_npc * c_apc.")
        return self

    @property
    def num_cores(self) -> int:
        """Number of cores on the lattice."""
        return self.width * self.height

    def contains(self, point: Point) -> bool:
        """Whether ``point`` is a lattice coordinate."""
        return 0 <= point[0] < self.width and 0 <= point[1] < self.height


class Placement(BaseNode):
    """Injective assignment of partition ids to lattice coordinates."""

    coords: tuple[tuple[int, int], ...] = ()
    """Coordinate ``(x, y)`` per partition id."""
    width: PositiveInt
    height: PositiveInt
    _occupancy: dict[Point, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_injective(self) -> Self:
        seen: set[Point] = set()
        for part, (x, y) in enumerate(self.coords):
            if not (0 <= x < self.width and 0 <= y < self.height):
                raise ValueError(f"Partition {part} placed outside the lattice.")
            if (x, y) in seen:
                raise ValueError(f"Partition {part} shares core {(x, y)}.")
            seen.add((x, y))
        return self

    def model_post_init(self, context: Any, /) -> None:
        """Build the inverse occupancy map."""
        self._occupancy = {cell: part for part, cell in enumerate(self.coords)}
        return super().model_post_init(context)

    @classmethod
    def from_cells(cls, cells: Iterable[Iterable[int]], width: int, height: int) -> Self:
        """Create a validated placement from any sequence of ``(x, y)`` pairs.

        Returns:
            The placement.

        """
        coords = tuple((int(x), int(y)) for x, y in cells)
        return cls(coords=coords, width=width, height=height)

    @property
    def num_partitions(self) -> int:
        """Number of placed partitions."""
        return len(self.coords)

    def at(self, cell: Point) -> int | None:
        """Partition placed on ``cell``, if any."""
        return self._occupancy.get(cell)

    def array(self) -> np.ndarray:
        """Coordinates as an integer array of shape ``(P, 2)``."""
        return np.array(self.coords, dtype=np.int64).reshape(-1, 2)

    def translated(self, dx: int, dy: int) -> Self:
        """Shift every coordinate by ``(dx, dy)``.

        Returns:
            The shifted placement.

        Raises:
            ValueError: When a shifted coordinate leaves the lattice.

        """
        return self.replace(coords=[(x + dx, y + dy) for x, y in self.coords])


def manhattan(a: Point, b: Point) -> int:
    """L1 distance between two lattice points."""
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def rect(a: Point, b: Point) -> list[Point]:
    """Lattice points of the closed axis-aligned rectangle spanned by a and b.

    Returns:
        Points ordered by row then column.

    """
    xs = range(min(a[0], b[0]), max(a[0], b[0]) + 1)
    ys = range(min(a[1], b[1]), max(a[1], b[1]) + 1)
    return [(x, y) for y in ys for x in xs]


def _log_paths(dx: int, dy: int) -> float:
    return math.lgamma(dx + dy + 1) - math.lgamma(dx + 1) - math.lgamma(dy + 1)


def _path_fraction(a: tuple[int, int], b: tuple[int, int], total: tuple[int, int]) -> float:
    """Share of minimal routes over ``total`` passing the split ``a`` then ``b``."""
    if sum(total) <= _EXACT_PATHS_LIMIT:
        num = math.comb(sum(a), a[0]) * math.comb(sum(b), b[0])
        return num / math.comb(sum(total), total[0])
    return math.exp(_log_paths(*a) + _log_paths(*b) - _log_paths(*total))


def tau(h: Point, hs: Point, hd: Point) -> float:
    """Probability that a spike from ``hs`` to ``hd`` traverses core ``h``.

    Every monotone minimal route is taken with equal probability.

    Returns:
        A probability in ``[0, 1]``; 0 outside ``rect(hs, hd)``.

    """
    in_x = min(hs[0], hd[0]) <= h[0] <= max(hs[0], hd[0])
    in_y = min(hs[1], hd[1]) <= h[1] <= max(hs[1], hd[1])
    if not (in_x and in_y):
        return 0.0
    first = (abs(h[0] - hs[0]), abs(h[1] - hs[1]))
    second = (abs(hd[0] - h[0]), abs(hd[1] - h[1]))
    total = (abs(hd[0] - hs[0]), abs(hd[1] - hs[1]))
    return min(1.0, _path_fraction(first, second, total))


def _log_paths_array(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return gammaln(dx + dy + 1) - gammaln(dx + 1) - gammaln(dy + 1)


@cache
def _tau_grid(dx: int, dy: int) -> np.ndarray:
    """Traversal probabilities over a ``(dy+1, dx+1)`` rectangle, source at 0."""
    xs = np.arange(dx + 1, dtype=np.float64)[np.newaxis, :]
    ys = np.arange(dy + 1, dtype=np.float64)[:, np.newaxis]
    log_tau = (
        _log_paths_array(xs, ys)
        + _log_paths_array(dx - xs, dy - ys)
        - _log_paths_array(np.float64(dx), np.float64(dy))
    )
    grid = np.minimum(np.exp(log_tau), 1.0)
    grid.setflags(write=False)
    return grid


@cache
def _tau_sum(dx: int, dy: int) -> float:
    return math.fsum(_tau_grid(dx, dy).ravel().tolist())


def _connections(gp: Hypergraph, gamma: Placement) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weight, source cell and destination cell of every connection.

    Raises:
        ValueError: When a partition of ``gp`` is not placed.

    """
    if gp.num_nodes > gamma.num_partitions:
        raise ValueError(f"Partition {gamma.num_partitions} is not placed.")
    weights: list[float] = []
    sources: list[int] = []
    dests: list[int] = []
    for hedge in gp.hedges:
        for d in hedge.destinations:
            weights.append(hedge.weight)
            sources.append(hedge.source)
            dests.append(d)
    cells = gamma.array()
    src = cells[np.asarray(sources, dtype=np.int64)].reshape(-1, 2)
    dst = cells[np.asarray(dests, dtype=np.int64)].reshape(-1, 2)
    return np.asarray(weights, dtype=np.float64), src, dst


def _hop_cost(gp: Hypergraph, gamma: Placement, route: float, link: float) -> float:
    weights, src, dst = _connections(gp, gamma)
    dist = np.abs(src - dst).sum(axis=1)
    return math.fsum((weights * (dist * (route + link) + route)).tolist())


def energy(gp: Hypergraph, gamma: Placement, hw: HardwareConfig) -> float:
    """Energy in picojoules spent routing one timestep of spikes.

    Returns:
        Sum over connections of ``w * (dist * (E_R + E_T) + E_R)``.

    """
    return _hop_cost(gp, gamma, hw.energy_route, hw.energy_link)


def avg_latency(gp: Hypergraph, gamma: Placement, hw: HardwareConfig) -> float:
    """Spike-frequency weighted latency in nanoseconds.

    Returns:
        The latency sum divided by the total hyperedge weight, 0 when ``gp``
        has no hyperedges.

    """
    total = math.fsum(e.weight for e in gp.hedges)
    if total == 0:
        return 0.0
    return _hop_cost(gp, gamma, hw.latency_route, hw.latency_link) / total


def avg_congestion(gp: Hypergraph, gamma: Placement) -> float:
    """Expected spike traversals summed over all cores.

    Returns:
        Sum over connections of ``w * sum_h tau(h)``, not normalized.

    """
    weights, src, dst = _connections(gp, gamma)
    delta = np.abs(src - dst)
    return math.fsum(
        w * _tau_sum(int(dx), int(dy))
        for w, (dx, dy) in zip(weights.tolist(), delta.tolist(), strict=True)
    )


def congestion_map(gp: Hypergraph, gamma: Placement, hw: HardwareConfig) -> np.ndarray:
    """Expected spike traversals per core.

    Returns:
        An array of shape ``(height, width)``; its sum is ``avg_congestion``.

    """
    out = np.zeros((hw.height, hw.width))
    weights, src, dst = _connections(gp, gamma)
    for w, (sx, sy), (dx, dy) in zip(weights.tolist(), src.tolist(), dst.tolist(), strict=True):
        grid = _tau_grid(abs(dx - sx), abs(dy - sy))
        if dx < sx:
            grid = grid[:, ::-1]
        if dy < sy:
            grid = grid[::-1, :]
        out[min(sy, dy) : max(sy, dy) + 1, min(sx, dx) : max(sx, dx) + 1] += w * grid
    return out


class MappingReport(BaseNode):
    """Evaluated metrics of one mapping."""

    connectivity: float = Field(ge=0)
    energy_pj: float = Field(ge=0)
    avg_latency_ns: float = Field(ge=0)
    avg_congestion: float = Field(ge=0)
    max_congestion: float = Field(default=0.0, ge=0)
    elp: float = Field(ge=0)
    """Energy-latency product."""
    sr_arith: float = Field(default=1.0, ge=0)
    sr_geo: float = Field(default=1.0, ge=0)
    cl_arith: float = Field(default=1.0, ge=0)
    cl_geo: float = Field(default=1.0, ge=0)
    num_partitions: int = Field(default=0, ge=0)
    cores_used: int = Field(default=0, ge=0)
    valid: bool = True
    choices: dict[str, str] = Field(default_factory=dict)
    """Algorithm choices that produced the mapping."""
    runtimes: dict[str, float] = Field(default_factory=dict)
    """Wall-clock seconds per pipeline phase."""

    @model_validator(mode="after")
    def _check_elp(self) -> Self:
        expected = self.energy_pj * self.avg_latency_ns
        if not math.isclose(self.elp, expected, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError("elp must equal energy_pj * avg_latency_ns.")
        return self


def evaluate(
    gs: AnyHypergraph,
    rho: Partitioning,
    gamma: Placement,
    hw: HardwareConfig,
    *,
    choices: dict[str, str] | None = None,
    runtimes: dict[str, float] | None = None,
) -> MappingReport:
    """Compute every metric of a mapping.

    Returns:
        The populated report.

    Raises:
        ValueError: When ``rho`` or ``gamma`` do not cover the graph.

    """
    from snnmap import metrics

    g = as_indexed(gs)
    gp = push_forward(g, rho)
    e = energy(gp, gamma, hw)
    lat = avg_latency(gp, gamma, hw)
    cmap = congestion_map(gp, gamma, hw)
    return MappingReport(
        connectivity=connectivity(gp),
        energy_pj=e,
        avg_latency_ns=lat,
        avg_congestion=avg_congestion(gp, gamma),
        max_congestion=float(cmap.max()) if cmap.size else 0.0,
        elp=e * lat,
        sr_arith=metrics.synaptic_reuse(g, rho, metrics.MeanKind.arithmetic),
        sr_geo=metrics.synaptic_reuse(g, rho, metrics.MeanKind.geometric),
        cl_arith=metrics.connections_locality(gp, gamma, metrics.MeanKind.arithmetic),
        cl_geo=metrics.connections_locality(gp, gamma, metrics.MeanKind.geometric),
        num_partitions=rho.num_partitions,
        cores_used=gamma.num_partitions,
        valid=check_constraints(g, rho, hw).valid,
        choices=choices or {},
        runtimes=runtimes or {},
    )


def serialize_placement(gamma: Placement) -> str:
    """Emit one ``<partition_id> <x> <y>`` line per partition.

    Returns:
        LF terminated text.

    """
    return "".join(f"{p} {x} {y}\n" for p, (x, y) in enumerate(gamma.coords))


def parse_placement(stream: str | TextIO, hw: HardwareConfig) -> Placement:
    """Parse a placement file against the lattice of ``hw``.

    Returns:
        The validated placement.

    Raises:
        HgxParseError: On malformed lines, missing or repeated partitions,
            and on cells outside the lattice or shared by two partitions.

    """
    text = stream if isinstance(stream, str) else stream.read()
    rows: dict[int, Point] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if len(tokens) != 3:  # noqa: PLR2004
            raise HgxParseError("expected '<partition_id> <x> <y>'", line=lineno)
        try:
            part, x, y = map(int, tokens)
        except ValueError:
            raise HgxParseError("non-integer field", line=lineno) from None
        if part in rows:
            raise HgxParseError(f"partition {part} placed twice", line=lineno)
        rows[part] = (x, y)
    if sorted(rows) != list(range(len(rows))):
        raise HgxParseError("partition ids are not dense")
    try:
        return Placement(
            coords=tuple(rows[p] for p in range(len(rows))),
            width=hw.width,
            height=hw.height,
        )
    except ValueError as exc:
        raise HgxParseError(str(exc)) from None

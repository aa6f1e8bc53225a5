"""Place partitions on the core lattice and refine placements.

Initial placements follow a Hilbert curve over a node order or discretize a
spectral embedding. Force-directed refinement then swaps partitions, or
moves them to free cores, while that lowers the total potential: the
spike-frequency weighted distance of every partition to the sources of its
inbound hyperedges. Minimum-distance placement is an alternative that grows
the placement outward from spread out input partitions.
"""

import heapq
import math
import time
from dataclasses import dataclass, field
from enum import StrEnum, auto

import numpy as np
from loguru import logger
from scipy.spatial import cKDTree

from snnmap.costmodel import (
    HardwareConfig,
    Placement,
    Point,
    avg_congestion,
    avg_latency,
    energy,
)
from snnmap.errors import CapacityError, SolverError
from snnmap.hgraph import AnyHypergraph, as_base, as_indexed
from snnmap.hilbert import HilbertCurve
from snnmap.ordering import NodeOrder, OrderKind, make_order
from snnmap.spectral import DENSE_LIMIT, build_laplacian, smallest_nonzero_eigenpairs

DIRECTIONS: tuple[Point, ...] = ((1, 0), (-1, 0), (0, 1), (0, -1))
_FORCE_EPS = 1e-12


class PlacerKind(StrEnum):
    """Available placers."""

    hilbert = auto()
    spectral = auto()
    mindist = auto()
    ensemble = auto()
    """Every initial placer refined, plus plain minimum distance; the best wins."""


INITIAL_PLACERS = (PlacerKind.hilbert, PlacerKind.spectral, PlacerKind.mindist)


class EnsembleGoal(StrEnum):
    """Measure the ensemble placer minimizes."""

    elp = auto()
    """Energy times average latency."""
    congestion = auto()
    """Average congestion."""


class RefineKind(StrEnum):
    """Available placement refiners."""

    none = auto()
    force = auto()


def check_capacity(num_partitions: int, hw: HardwareConfig):
    """Ensure every partition gets a core.

    Raises:
        CapacityError: When there are more partitions than cores.

    """
    if num_partitions > hw.num_cores:
        raise CapacityError(
            f"{num_partitions} partitions cannot be placed on {hw.num_cores} cores."
        )


def hilbert_place(order: NodeOrder, hw: HardwareConfig) -> Placement:
    """Lay partitions along a Hilbert curve in the given order.

    The curve covers the smallest power of two square holding the lattice;
    cells outside the lattice are skipped.

    Returns:
        The placement.

    Raises:
        CapacityError: When there are more partitions than cores.

    """
    check_capacity(len(order.sequence), hw)
    curve = HilbertCurve.covering(hw.width, hw.height)
    cells = (cell for cell in curve if hw.contains(cell))
    coords: list[Point] = [(0, 0)] * len(order.sequence)
    for part, cell in zip(order.sequence, cells, strict=False):
        coords[part] = cell
    return Placement(coords=tuple(coords), width=hw.width, height=hw.height)


def region_shape(num_partitions: int, hw: HardwareConfig) -> tuple[int, int]:
    """Nearly square ``(width, height)`` region holding every partition.

    Returns:
        The smallest ``a`` by ``b`` region with ``a * b >= num_partitions``
        and ``a - b`` in ``{0, 1}``, clipped to the lattice.

    """
    a = max(1, math.isqrt(max(num_partitions - 1, 0)) + 1)
    b = a - 1 if a * (a - 1) >= num_partitions else a
    a, b = min(a, hw.width), min(max(b, 1), hw.height)
    if a * b < num_partitions:
        if a == hw.width:
            b = min(hw.height, math.ceil(num_partitions / a))
        else:
            a = min(hw.width, math.ceil(num_partitions / b))
    return a, b


class FreeCells:
    """Nearest free lattice cell queries backed by a KD-tree.

    Ties in Euclidean distance go to the lowest ``(y, x)``.
    """

    def __init__(self, hw: HardwareConfig):
        """Index every cell of the lattice as free."""
        ys, xs = np.mgrid[0 : hw.height, 0 : hw.width]
        self.cells = np.column_stack([xs.ravel(), ys.ravel()]).astype(np.float64)
        self.taken = np.zeros(len(self.cells), dtype=bool)
        self._rebuild()

    def _rebuild(self):
        self.ids = np.flatnonzero(~self.taken)
        self.tree = cKDTree(self.cells[self.ids]) if self.ids.size else None
        self.stale = 0

    def take_nearest(self, target: tuple[float, float]) -> Point:
        """Claim the free cell nearest to ``target``.

        Returns:
            The claimed cell.

        Raises:
            CapacityError: When no free cell remains.

        """
        if self.tree is None or self.taken.all():
            raise CapacityError("No free core left.")
        k = 4
        while True:
            kk = min(k, self.ids.size)
            dist, loc = self.tree.query(target, k=kk)
            dist, loc = np.atleast_1d(dist), np.atleast_1d(loc)
            free = [d for d, i in zip(dist, loc, strict=True) if not self.taken[self.ids[i]]]
            if free or kk == self.ids.size:
                break
            k *= 4
        ring = self.tree.query_ball_point(target, r=min(free) * (1 + 1e-9) + 1e-9)
        tx, ty = target
        best = min(
            (self.ids[i] for i in ring if not self.taken[self.ids[i]]),
            key=lambda c: (
                round((self.cells[c, 0] - tx) ** 2 + (self.cells[c, 1] - ty) ** 2, 9),
                self.cells[c, 1],
                self.cells[c, 0],
            ),
        )
        self.taken[best] = True
        self.stale += 1
        if self.stale * 2 > self.ids.size:
            self._rebuild()
        return int(self.cells[best, 0]), int(self.cells[best, 1])


def _strengths(gp: AnyHypergraph) -> np.ndarray:
    out = np.zeros(gp.num_nodes)
    for hedge in as_base(gp).hedges:
        for p in set(hedge.pins):
            out[p] += hedge.weight
    return out


def spectral_place(
    gp: AnyHypergraph,
    hw: HardwareConfig,
    *,
    budget: int | None = None,
    dense_limit: int = DENSE_LIMIT,
) -> Placement:
    """Place partitions by discretizing their spectral embedding.

    The embedding is normalized per axis to the unit square, scaled to a
    nearly square region centered in the lattice and snapped, partition by
    partition in descending order of total spike frequency, to the nearest
    free core. Partitions without connections go last, aimed at the region
    center.

    Returns:
        The placement.

    Raises:
        CapacityError: When there are more partitions than cores.
        SolverError: When the eigensolver fails.

    """
    num = gp.num_nodes
    check_capacity(num, hw)
    lap = build_laplacian(gp)
    active = lap.active
    if active.size >= 3:  # noqa: PLR2004
        embedding = smallest_nonzero_eigenpairs(lap, budget=budget, dense_limit=dense_limit)
        continuous = embedding.array()
    else:
        continuous = np.column_stack([np.arange(active.size), np.zeros(active.size)])
    if continuous.size:
        lo = continuous.min(axis=0)
        span = continuous.max(axis=0) - lo
        unit = np.full_like(continuous, 0.5)
        np.divide(continuous - lo, span, out=unit, where=span > 1e-12)
    else:
        unit = continuous

    a, b = region_shape(num, hw)
    origin = np.array([(hw.width - a) // 2, (hw.height - b) // 2], dtype=np.float64)
    scale = np.array([a - 1, b - 1], dtype=np.float64)
    targets = {int(p): tuple(origin + scale * u) for p, u in zip(active, unit, strict=True)}
    center = tuple(origin + scale * 0.5)

    strength = _strengths(gp)
    visit = sorted(active.tolist(), key=lambda p: (-strength[p], p))
    visit += [p for p in range(num) if p not in targets]
    free = FreeCells(hw)
    coords: list[Point] = [(0, 0)] * num
    for p in visit:
        coords[p] = free.take_nearest(targets.get(p, center))
    return Placement(coords=tuple(coords), width=hw.width, height=hw.height)


class Links:
    """Aggregated connection weights between partitions."""

    def __init__(self, gp: AnyHypergraph):
        """Collect inbound and outbound weights of every partition."""
        n = gp.num_nodes
        self.inbound: list[dict[int, float]] = [{} for _ in range(n)]
        self.outbound: list[dict[int, float]] = [{} for _ in range(n)]
        for hedge in as_base(gp).hedges:
            s = hedge.source
            for d in hedge.destinations:
                self.inbound[d][s] = self.inbound[d].get(s, 0.0) + hedge.weight
                self.outbound[s][d] = self.outbound[s].get(d, 0.0) + hedge.weight

    def potential(self, p: int, coords: list[Point], at: Point | None = None) -> float:
        """Potential of ``p``, optionally as if it sat on ``at``."""
        x, y = coords[p] if at is None else at
        return math.fsum(
            w * max(abs(x - coords[s][0]) + abs(y - coords[s][1]), 1)
            for s, w in self.inbound[p].items()
        )

    def total(self, coords: list[Point]) -> float:
        """Sum of the potentials of every partition."""
        return math.fsum(self.potential(p, coords) for p in range(len(self.inbound)))

    def delta(self, coords: list[Point], moves: dict[int, Point]) -> float:
        """Exact change of the total potential caused by ``moves``."""
        pairs: set[tuple[int, int]] = set()
        for m in moves:
            pairs.update((s, m) for s in self.inbound[m])
            pairs.update((m, d) for d in self.outbound[m])
        terms: list[float] = []
        for s, d in pairs:
            w = self.inbound[d][s]
            old_s, old_d = coords[s], coords[d]
            new_s, new_d = moves.get(s, old_s), moves.get(d, old_d)
            before = max(abs(old_s[0] - old_d[0]) + abs(old_s[1] - old_d[1]), 1)
            after = max(abs(new_s[0] - new_d[0]) + abs(new_s[1] - new_d[1]), 1)
            if before != after:
                terms.append(w * (after - before))
        return math.fsum(terms)


def potential(p: int, gamma: Placement, gp: AnyHypergraph) -> float:
    """Spike-frequency weighted distance of ``p`` to its inbound sources.

    Co-located partitions count as one hop apart.

    Returns:
        The potential of ``p``.

    """
    return Links(gp).potential(p, list(gamma.coords))


def force(p: int, v: Point, gamma: Placement, gp: AnyHypergraph) -> float:
    """Potential decrease of ``p`` if it moved by ``v``; the target may be occupied.

    Returns:
        The force, ``-inf`` when the target is off the lattice.

    """
    x, y = gamma.coords[p]
    target = (x + v[0], y + v[1])
    if not (0 <= target[0] < gamma.width and 0 <= target[1] < gamma.height):
        return -math.inf
    links = Links(gp)
    coords = list(gamma.coords)
    return links.potential(p, coords) - links.potential(p, coords, at=target)


def global_potential(gamma: Placement, gp: AnyHypergraph) -> float:
    """Sum of the potentials of every partition.

    Returns:
        The total potential.

    """
    return Links(gp).total(list(gamma.coords))


@dataclass(slots=True)
class ForceState:
    """Mutable refinement state over one placement."""

    coords: list[Point]
    occupancy: dict[Point, int]
    potentials: list[float]
    """Cached potential per partition, valid unless the partition is dirty."""
    dirty: set[int] = field(default_factory=set)
    history: list[float] = field(default_factory=list)
    """Total potential after every applied move, starting with the initial one."""


class ForceDirectedRefiner:
    """Swap adjacent partitions, or move them to free cores, while it pays.

    Candidates are ranked by the force sum of the partitions involved and a
    move is applied only when the exact total potential decreases.
    """

    def __init__(self, gamma0: Placement, gp: AnyHypergraph, hw: HardwareConfig):
        """Prepare refinement of ``gamma0``."""
        self.hw = hw
        self.links = Links(gp)
        coords = list(gamma0.coords)
        self.state = ForceState(
            coords=coords,
            occupancy={cell: p for p, cell in enumerate(coords)},
            potentials=[self.links.potential(p, coords) for p in range(len(coords))],
        )
        self.state.history.append(math.fsum(self.state.potentials))
        self.moves = 0

    def _potential(self, p: int) -> float:
        state = self.state
        if p in state.dirty:
            state.potentials[p] = self.links.potential(p, state.coords)
            state.dirty.discard(p)
        return state.potentials[p]

    def _force_to(self, p: int, cell: Point) -> float:
        return self._potential(p) - self.links.potential(p, self.state.coords, at=cell)

    def pair_force(self, p: int, cell: Point) -> float:
        """Force of moving ``p`` onto ``cell``, swapping with its occupant if any."""
        total = self._force_to(p, cell)
        q = self.state.occupancy.get(cell)
        if q is not None:
            total += self._force_to(q, self.state.coords[p])
        return total

    def _candidates(self) -> list[tuple[float, int, Point]]:
        heap: list[tuple[float, int, Point]] = []
        for p, (x, y) in enumerate(self.state.coords):
            for dx, dy in DIRECTIONS:
                cell = (x + dx, y + dy)
                if self.hw.contains(cell) and (f := self.pair_force(p, cell)) > _FORCE_EPS:
                    heap.append((-f, p, cell))
        heapq.heapify(heap)
        return heap

    def _apply(self, moves: dict[int, Point], delta: float):
        state = self.state
        for p in moves:
            del state.occupancy[state.coords[p]]
        for p, cell in moves.items():
            state.coords[p] = cell
            state.occupancy[cell] = p
            state.dirty.add(p)
            state.dirty.update(self.links.outbound[p])
        state.history.append(state.history[-1] + delta)
        self.moves += 1

    def sweep(self, deadline: float | None = None) -> int:
        """Apply every profitable candidate, highest force first.

        Returns:
            Number of applied moves.

        """
        heap = self._candidates()
        applied = 0
        while heap:
            if deadline is not None and time.monotonic() > deadline:
                break
            neg, p, cell = heapq.heappop(heap)
            x, y = self.state.coords[p]
            if abs(cell[0] - x) + abs(cell[1] - y) != 1:
                continue
            f = self.pair_force(p, cell)
            if f <= _FORCE_EPS:
                continue
            if f < -neg - _FORCE_EPS:
                heapq.heappush(heap, (-f, p, cell))
                continue
            moves = {p: cell}
            q = self.state.occupancy.get(cell)
            if q is not None:
                moves[q] = (x, y)
            delta = self.links.delta(self.state.coords, moves)
            if delta < 0:
                self._apply(moves, delta)
                applied += 1
        return applied

    def stale_entries(self) -> list[int]:
        """Clean partitions whose cached potential disagrees with a recomputation."""
        state = self.state
        return [
            p
            for p in range(len(state.coords))
            if p not in state.dirty
            and not math.isclose(
                state.potentials[p],
                self.links.potential(p, state.coords),
                rel_tol=1e-12,
                abs_tol=1e-12,
            )
        ]

    def run(self, max_iters: int = 1000, time_limit_s: float | None = None) -> Placement:
        """Sweep until no move pays, ``max_iters`` sweeps, or the time limit.

        Returns:
            The refined placement.

        """
        deadline = None if time_limit_s is None else time.monotonic() + time_limit_s
        for sweep in range(max_iters):
            if not self.sweep(deadline):
                break
            if deadline is not None and time.monotonic() > deadline:
                logger.info(f"Refinement stopped by the time limit after {sweep + 1} sweeps.")
                break
        logger.debug(
            f"Refinement applied {self.moves} moves, potential "
            f"{self.state.history[0]:.6g} -> {self.state.history[-1]:.6g}."
        )
        return Placement(
            coords=tuple(self.state.coords), width=self.hw.width, height=self.hw.height
        )


def force_directed_refine(
    gamma0: Placement,
    gp: AnyHypergraph,
    hw: HardwareConfig,
    max_iters: int = 1000,
    time_limit_s: float | None = None,
) -> Placement:
    """Refine a placement with force-directed swaps and moves.

    Returns:
        The refined placement.

    """
    return ForceDirectedRefiner(gamma0, gp, hw).run(max_iters, time_limit_s)


def spread_cells(k: int, hw: HardwareConfig) -> list[Point]:
    """Evenly spaced, centered cells for ``k`` input partitions.

    Cells are spread along the longer lattice axis on the central line,
    wrapping to several evenly spaced lines when they do not fit one.

    Returns:
        ``k`` distinct cells.

    """
    if k == 0:
        return []
    transpose = hw.height > hw.width
    long, short = (hw.height, hw.width) if transpose else (hw.width, hw.height)
    lines = -(-k // long)
    base, extra = divmod(k, lines)
    cells: list[Point] = []
    for j in range(lines):
        count = base + (1 if j < extra else 0)
        across = ((2 * j + 1) * short) // (2 * lines)
        for i in range(count):
            along = ((2 * i + 1) * long) // (2 * count)
            cells.append((across, along) if transpose else (along, across))
    return cells


def min_distance_place(
    gp: AnyHypergraph,
    hw: HardwareConfig,
    order: NodeOrder,
    *,
    frontier: bool = True,
) -> Placement:
    """Place partitions one by one at the cheapest cell.

    Input partitions, those without inbound hyperedges, are spread first;
    when there are none the first partition of ``order`` takes the center.
    Every other partition, in ``order``, takes the cell minimizing its
    spike-frequency weighted distance to already placed partitions it is
    connected to, ties by lowest ``(y, x)``.

    Args:
        gp: Partition-level hypergraph.
        hw: Target hardware.
        order: Partition order, topological or greedy.
        frontier: Only consider free cells next to used ones.

    Returns:
        The placement.

    Raises:
        CapacityError: When there are more partitions than cores.

    """
    ig = as_indexed(gp)
    num = ig.num_nodes
    check_capacity(num, hw)
    links = Links(ig)
    inputs = [p for p in order.sequence if not ig.inbound(p)]
    if not inputs and order.sequence:
        inputs = [order.sequence[0]]
        seeds = [(hw.width // 2, hw.height // 2)]
    else:
        seeds = spread_cells(len(inputs), hw)

    coords: dict[int, Point] = {}
    used: set[Point] = set()
    edge: set[Point] = set()

    def occupy(p: int, cell: Point):
        coords[p] = cell
        used.add(cell)
        edge.discard(cell)
        for dx, dy in DIRECTIONS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if hw.contains(nxt) and nxt not in used:
                edge.add(nxt)

    for p, cell in zip(inputs, seeds, strict=True):
        occupy(p, cell)
    for p in order.sequence:
        if p in coords:
            continue
        pool = edge if frontier and edge else {
            (x, y) for y in range(hw.height) for x in range(hw.width) if (x, y) not in used
        }
        cand = np.array(sorted(pool, key=lambda c: (c[1], c[0])), dtype=np.int64)
        peers = {**links.inbound[p]}
        for q, w in links.outbound[p].items():
            peers[q] = peers.get(q, 0.0) + w
        placed = [(coords[q], w) for q, w in peers.items() if q in coords]
        if placed:
            pos = np.array([c for c, _ in placed], dtype=np.int64)
            weights = np.array([w for _, w in placed])
            cost = np.abs(cand[:, np.newaxis, :] - pos[np.newaxis, :, :]).sum(axis=2) @ weights
            best = int(np.argmin(cost))
        else:
            best = 0
        occupy(p, (int(cand[best, 0]), int(cand[best, 1])))
    return Placement(
        coords=tuple(coords[p] for p in range(num)), width=hw.width, height=hw.height
    )


def place(
    gp: AnyHypergraph,
    hw: HardwareConfig,
    placer: PlacerKind | str,
    *,
    order: NodeOrder | None = None,
    budget: int | None = None,
    fallback: bool = True,
) -> Placement:
    """Run the requested placer.

    Args:
        gp: Partition-level hypergraph.
        hw: Target hardware.
        placer: One of the ``PlacerKind`` values.
        order: Partition order for order-driven placers, topological with
            greedy fallback by default.
        budget: Eigensolver restart budget.
        fallback: Use Hilbert placement when the eigensolver fails.

    Returns:
        The placement.

    Raises:
        SolverError: When the eigensolver fails and ``fallback`` is off.

    """
    kind = PlacerKind(placer)
    if kind is PlacerKind.ensemble:
        return ensemble_place(gp, hw, order=order, budget=budget, fallback=fallback)[0]
    if kind is PlacerKind.spectral:
        try:
            return spectral_place(gp, hw, budget=budget)
        except SolverError as exc:
            if not fallback:
                raise
            logger.warning(f"Spectral placement failed ({exc}), using the Hilbert curve.")
    order = order or make_order(gp, OrderKind.topo)
    if kind is PlacerKind.mindist:
        return min_distance_place(gp, hw, order)
    return hilbert_place(order, hw)


def ensemble_place(
    gp: AnyHypergraph,
    hw: HardwareConfig,
    *,
    order: NodeOrder | None = None,
    budget: int | None = None,
    fallback: bool = True,
    max_iters: int = 1000,
    time_limit_s: float | None = None,
    goal: EnsembleGoal | str = EnsembleGoal.elp,
) -> tuple[Placement, str]:
    """Refine every initial placement and keep the best mapping.

    Each initial placer runs through force-directed refinement, stopped
    after ``time_limit_s`` if given. Plain minimum-distance placement
    competes as well. Ties go to the earlier candidate.

    Returns:
        The winning placement and its label, e.g. ``spectral+force``.

    Raises:
        SolverError: When the eigensolver fails and ``fallback`` is off.

    """
    goal = EnsembleGoal(goal)
    base = as_base(gp)
    order = order or make_order(gp, OrderKind.topo)
    candidates: dict[str, Placement] = {}
    for kind in INITIAL_PLACERS:
        gamma0 = place(gp, hw, kind, order=order, budget=budget, fallback=fallback)
        candidates[f"{kind}+force"] = force_directed_refine(
            gamma0, gp, hw, max_iters, time_limit_s
        )
        if kind is PlacerKind.mindist:
            candidates[str(kind)] = gamma0
    scores = {
        label: (
            avg_congestion(base, gamma)
            if goal is EnsembleGoal.congestion
            else energy(base, gamma, hw) * avg_latency(base, gamma, hw)
        )
        for label, gamma in candidates.items()
    }
    best = min(scores, key=scores.__getitem__)
    logger.info(f"Ensemble placement picked {best} ({goal} {scores[best]:.6g}).")
    return candidates[best], best

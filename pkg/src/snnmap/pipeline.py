"""End to end mapping: load, order, partition, place, refine, evaluate, write."""

import csv
import io
import json
import time
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from loguru import logger

from snnmap.config import PipelineConfig
from snnmap.costmodel import (
    HardwareConfig,
    MappingReport,
    Placement,
    evaluate,
    serialize_placement,
)
from snnmap.errors import ConstraintViolationError, MappingError
from snnmap.generators import gen_random_cyclic
from snnmap.hgraph import (
    ConstraintReport,
    Hypergraph,
    IndexedHypergraph,
    PartitionStats,
    Partitioning,
    as_indexed,
    check_constraints,
    parse_hypergraph,
    partition_stats,
    push_forward,
    serialize_partitioning,
)
from snnmap.ordering import make_order
from snnmap.partitioning import PartitionerKind, partition
from snnmap.placement import (
    PlacerKind,
    RefineKind,
    ensemble_place,
    force_directed_refine,
    place,
)
from snnmap.writer import ArtifactWriter

PARTITION_FILE = "partition.txt"
PLACEMENT_FILE = "placement.txt"
REPORT_FILE = "report.json"
TIMINGS_FILE = "timings.json"
SUMMARY_FILE = "summary.txt"
SUMMARY_TEMPLATE = "summary.txt.j2"

REPORT_COLUMNS = (
    "connectivity",
    "energy_pj",
    "avg_latency_ns",
    "avg_congestion",
    "max_congestion",
    "elp",
    "sr_arith",
    "sr_geo",
    "cl_arith",
    "cl_geo",
    "num_partitions",
    "cores_used",
    "valid",
)
RATIO_COLUMNS = {
    "conn_ratio": "connectivity",
    "energy_ratio": "energy_pj",
    "latency_ratio": "avg_latency_ns",
    "elp_ratio": "elp",
}
PHASES = ("load", "partition", "place", "refine", "evaluate")


@dataclass
class MappingResult:
    """Everything one pipeline run produced."""

    graph: IndexedHypergraph
    partitioning: Partitioning
    placement: Placement
    report: MappingReport
    constraints: ConstraintReport
    stats: PartitionStats
    paths: list[Path] = field(default_factory=list)


def load_graph(config: PipelineConfig) -> Hypergraph:
    """Read the configured HGX file or generate the random network.

    Returns:
        The SNN hypergraph.

    Raises:
        HgxParseError: On a malformed input file.

    """
    if config.input is not None:
        logger.info(f"Reading {config.input}.")
        return parse_hypergraph(config.input.read_text(encoding="utf-8"))
    spec = config.network_spec()
    logger.info(
        f"Generating a random network of {spec.num_nodes} neurons, "
        f"mean cardinality {spec.mean_cardinality}, seed {spec.seed}."
    )
    return gen_random_cyclic(spec)


class MappingPipeline:
    """Run every mapping phase for one configuration and write its artifacts."""

    def __init__(self, config: PipelineConfig, hw: HardwareConfig | None = None):
        """Prepare a run.

        Args:
            config: Pipeline configuration.
            hw: Hardware overriding ``config.hw``.

        """
        self.config = config
        self.hw = hw or config.hardware()
        self.runtimes: dict[str, float] = {}
        self.picked: str | None = None
        """Winning candidate of the ensemble placer."""
        self.writer = ArtifactWriter(config)

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """Time a pipeline phase."""
        start = time.perf_counter()
        logger.debug(f"Phase {name} started.")
        yield
        self.runtimes[name] = time.perf_counter() - start
        logger.debug(f"Phase {name} took {self.runtimes[name]:.3f}s.")

    def partition(self, g: IndexedHypergraph) -> Partitioning:
        """Partition ``g`` with the configured algorithm.

        Raises:
            ConstraintViolationError: When the result breaks a core limit.

        """
        cfg = self.config
        order = None
        if cfg.partitioner is PartitionerKind.sequential:
            order = make_order(g, cfg.order)
        rho = partition(g, self.hw, cfg.partitioner, order=order, seed=cfg.seed)
        report = check_constraints(g, rho, self.hw)
        if not report.valid:
            raise ConstraintViolationError(report)
        return rho

    def place(self, gp: Hypergraph) -> Placement:
        """Place and optionally refine the partition-level graph.

        The ensemble placer refines its candidates itself and records the
        winner in ``picked``.
        """
        cfg = self.config
        order = make_order(gp, cfg.order)
        if cfg.placer is PlacerKind.ensemble:
            with self.phase("place"):
                gamma, self.picked = ensemble_place(
                    gp,
                    self.hw,
                    order=order,
                    budget=cfg.eig_budget,
                    fallback=not cfg.strict_solver,
                    max_iters=cfg.max_iters,
                    time_limit_s=cfg.time_limit_s,
                    goal=cfg.ensemble_goal,
                )
            return gamma
        with self.phase("place"):
            gamma = place(
                gp,
                self.hw,
                cfg.placer,
                order=order,
                budget=cfg.eig_budget,
                fallback=not cfg.strict_solver,
            )
        with self.phase("refine"):
            if cfg.refine is RefineKind.force:
                gamma = force_directed_refine(
                    gamma, gp, self.hw, cfg.max_iters, cfg.time_limit_s
                )
        return gamma

    def run(self) -> MappingResult:
        """Map the configured network.

        Returns:
            The mapping and its evaluation.

        Raises:
            MappingError: On parse errors, capacity or constraint failures
                and solver failures without fallback.

        """
        with self.phase("load"):
            g = as_indexed(load_graph(self.config))
        with self.phase("partition"):
            rho = self.partition(g)
        logger.info(f"{g.num_nodes} neurons in {rho.num_partitions} partitions.")
        gp = push_forward(g, rho)
        gamma = self.place(gp)
        choices = self.config.choices()
        if self.picked is not None:
            choices["picked"] = self.picked
        with self.phase("evaluate"):
            report = evaluate(
                g, rho, gamma, self.hw, choices=choices, runtimes=self.runtimes
            )
            constraints = check_constraints(g, rho, self.hw)
            stats = partition_stats(g, rho)
        logger.info(
            f"Connectivity {report.connectivity:.6g}, energy {report.energy_pj:.6g} pJ, "
            f"latency {report.avg_latency_ns:.6g} ns."
        )
        return MappingResult(
            graph=g,
            partitioning=rho,
            placement=gamma,
            report=report.replace(runtimes=dict(self.runtimes)),
            constraints=constraints,
            stats=stats,
        )

    def write(self, result: MappingResult) -> list[Path]:
        """Write partition, placement, report, timings and summary files.

        The report excludes wall-clock runtimes so reruns are identical.

        Returns:
            Paths of the files actually written.

        """
        w = self.writer
        report = result.report.replace(runtimes={})
        artifacts = {
            PARTITION_FILE: serialize_partitioning(result.partitioning),
            PLACEMENT_FILE: serialize_placement(result.placement),
            REPORT_FILE: report.model_dump_json(indent=2) + "\n",
            TIMINGS_FILE: json.dumps(result.report.runtimes, indent=2) + "\n",
            SUMMARY_FILE: w.render(
                SUMMARY_TEMPLATE,
                app_info=report.app_info,
                report=report,
                stats=result.stats,
                hw=self.hw,
            ),
        }
        for name, text in artifacts.items():
            path, written = w.write(name, text)
            if written and path is not None:
                result.paths.append(path)
        return result.paths

    def __enter__(self):
        """Connect the artifact writer to the cache.

        Returns:
            The pipeline.

        """
        self.writer.__enter__()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        """Release the cache."""
        self.writer.__exit__(exc_type, exc_value, traceback)


def run_map(config: PipelineConfig) -> MappingResult:
    """Run the pipeline and write its artifacts.

    Returns:
        The mapping result.

    """
    with MappingPipeline(config) as pipeline:
        result = pipeline.run()
        pipeline.write(result)
    return result


def _label(config: PipelineConfig) -> str:
    return f"{config.partitioner}-{config.placer}-{config.refine}-s{config.seed}"


def _compare_row(config: PipelineConfig) -> dict[str, str]:
    row = {"label": _label(config), "status": "ok"}
    try:
        result = MappingPipeline(config.replace(output_dir=None)).run()
    except MappingError as exc:
        logger.warning(f"{row['label']} failed: {exc}")
        row["status"] = f"error:{exc.kind}"
        return row
    report = result.report
    for col in REPORT_COLUMNS:
        value = report[col]
        row[col] = repr(value) if isinstance(value, float) else str(value)
    for phase in PHASES:
        row[f"{phase}_s"] = repr(report.runtimes.get(phase, 0.0))
    return row


def _ratio(value: str | None, base: str | None) -> str:
    if not value or not base or float(base) == 0:
        return ""
    return repr(float(value) / float(base))


def run_compare(configs: list[PipelineConfig], workers: int = 0) -> str:
    """Run several pipelines and tabulate their reports.

    Failed runs keep their row with ``status`` set to ``error:<kind>``.
    Ratio columns divide by the first row.

    Args:
        configs: One configuration per row.
        workers: Threads running pipelines concurrently, 0 runs them in order.

    Returns:
        CSV text with one row per configuration.

    """
    if workers:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_compare_row, configs))
    else:
        rows = [_compare_row(c) for c in configs]
    if rows:
        first = rows[0]
        for row in rows:
            for col, src in RATIO_COLUMNS.items():
                row[col] = _ratio(row.get(src), first.get(src))
    fields = [
        "label",
        "status",
        *REPORT_COLUMNS,
        *(f"{p}_s" for p in PHASES),
        *RATIO_COLUMNS,
    ]
    buf = io.StringIO()
    out = csv.DictWriter(buf, fieldnames=fields, restval="", lineterminator="\n")
    out.writeheader()
    out.writerows(rows)
    return buf.getvalue()

"""Application commands."""

import functools
import sys
from contextlib import suppress
from pathlib import Path
from shutil import rmtree
from typing import TYPE_CHECKING, Annotated

from cyclopts import App, Parameter
from loguru import logger

from snnmap import homedirs
from snnmap.cache import Cache
from snnmap.config import PipelineConfig, load_config
from snnmap.errors import ConstraintViolationError, MappingError
from snnmap.partitioning import PartitionerKind
from snnmap.placement import PlacerKind

if TYPE_CHECKING:
    from collections.abc import Callable

app = App(help="Map spiking neural networks onto a mesh of neuromorphic cores.")
cache_app = app.command(App(name="cache", help="Interact with the application cache."))
config_app = app.command(
    App(name="config", help="Interact with the application config.")
)


def setup(opt: PipelineConfig | None) -> PipelineConfig:
    """Load the configuration and point the log sink at stderr.

    Returns:
        The merged configuration.

    """
    config = load_config(opt)
    logger.remove()
    logger.add(sys.stderr, level=config.log_level, format="{level: <8} {message}")
    return config


def exits_on_mapping_errors[**P](func: Callable[P, int]) -> Callable[P, int]:
    """Turn mapping failures into log lines and the matching exit code.

    Returns:
        The wrapped command.

    """

    @functools.wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except MappingError as exc:
            logger.error(f"{type(exc).__name__}: {exc}")
            if isinstance(exc, ConstraintViolationError):
                print(str(exc), file=sys.stderr)
            return exc.exit_code

    return wrapper


@app.command
@exits_on_mapping_errors
def gen(
    name: str = "network",
    *,
    layers: Annotated[list[int] | None, Parameter(consume_multiple=True)] = None,
    window: int | None = None,
    stride: int = 1,
    opt: PipelineConfig | None = None,
) -> int:
    """Generate a benchmark network as `<name>.hgx` plus a `<name>.toml` sidecar.

    Without `--layers` a random recurrent network of `--nodes` neurons is
    drawn; with it a feed-forward layered network is built.

    Usage examples:
    - snm gen --nodes 1024 --cardinality 32 --seed 7
    - snm gen lenet --layers 64 32 10 --window 4 --stride 2

    Args:
        name: Base name of the written files.
        layers: Layer sizes of a layered network.
        window: Receptive field width of a layered network, dense when unset.
        stride: Receptive field stride of a layered network.
        opt: Options.

    """
    from snnmap.generators import LayeredSnnSpec, gen_layered, gen_random_cyclic
    from snnmap.hgraph import serialize_hypergraph
    from snnmap.writer import ArtifactWriter

    config = setup(opt)
    if layers:
        spec = LayeredSnnSpec(
            layers=tuple(layers), window=window, stride=stride, seed=config.seed
        )
        g = gen_layered(spec)
        meta = spec.to_toml(generator="layered")
    else:
        spec = config.network_spec()
        g = gen_random_cyclic(spec)
        meta = spec.to_toml(generator="random")
    logger.info(f"Generated {g.num_nodes} neurons and {g.num_connections} synapses.")
    with ArtifactWriter(config) as writer:
        writer.write(f"{name}.hgx", serialize_hypergraph(g))
        writer.write(f"{name}.toml", meta)
    return 0


@app.command
@exits_on_mapping_errors
def order(hgx: Path, *, opt: PipelineConfig | None = None) -> int:
    """Compute a node order and write it to `order.txt`, one id per line.

    Args:
        hgx: Hypergraph file.
        opt: Options. `--order` selects the strategy.

    """
    from snnmap.hgraph import parse_hypergraph
    from snnmap.ordering import make_order
    from snnmap.writer import ArtifactWriter

    config = setup(opt)
    g = parse_hypergraph(hgx.read_text(encoding="utf-8"))
    node_order = make_order(g, config.order)
    logger.info(f"Ordered {len(node_order)} nodes ({node_order.provenance}).")
    with ArtifactWriter(config) as writer:
        writer.write("order.txt", "".join(f"{v}\n" for v in node_order.sequence))
    return 0


@app.command
@exits_on_mapping_errors
def partition(hgx: Path, *, opt: PipelineConfig | None = None) -> int:
    """Partition a hypergraph and write `partition.txt`.

    Prints the partition statistics.

    Args:
        hgx: Hypergraph file.
        opt: Options. `--partitioner`, `--order` and `--hw` apply.

    """
    from rich import print_json

    from snnmap.hgraph import as_indexed, parse_hypergraph, partition_stats
    from snnmap.hgraph import serialize_partitioning as dump
    from snnmap.pipeline import PARTITION_FILE, MappingPipeline

    config = setup(opt)
    with MappingPipeline(config) as pipeline:
        g = as_indexed(parse_hypergraph(hgx.read_text(encoding="utf-8")))
        rho = pipeline.partition(g)
        pipeline.writer.write(PARTITION_FILE, dump(rho))
    print_json(partition_stats(g, rho).model_dump_json())
    return 0


@app.command
@exits_on_mapping_errors
def place(hgx: Path, partition_file: Path, *, opt: PipelineConfig | None = None) -> int:
    """Place and refine a partitioned hypergraph and write `placement.txt`.

    Args:
        hgx: Hypergraph file.
        partition_file: Partition file of the hypergraph.
        opt: Options. `--placer`, `--refine`, `--max-iters` and `--hw` apply.

    """
    from snnmap.costmodel import serialize_placement
    from snnmap.hgraph import parse_hypergraph, parse_partitioning, push_forward
    from snnmap.pipeline import PLACEMENT_FILE, MappingPipeline

    config = setup(opt)
    g = parse_hypergraph(hgx.read_text(encoding="utf-8"))
    rho = parse_partitioning(partition_file.read_text(encoding="utf-8"), g.num_nodes)
    with MappingPipeline(config) as pipeline:
        gamma = pipeline.place(push_forward(g, rho))
        pipeline.writer.write(PLACEMENT_FILE, serialize_placement(gamma))
    logger.info(f"Placed {gamma.num_partitions} partitions.")
    return 0


@app.command(name="map")
@exits_on_mapping_errors
def map_(hgx: Path | None = None, *, opt: PipelineConfig | None = None) -> int:
    """Run the whole mapping pipeline and write its artifacts.

    Writes `partition.txt`, `placement.txt`, `report.json`, `timings.json`
    and `summary.txt` into `--out` (`./build` by default).

    Usage examples:
    - snm map net.hgx --hw small -P hierarchical
    - snm map --nodes 512 --placer mindist --refine none --out runs/a

    Args:
        hgx: Hypergraph file. A random network is generated when omitted.
        opt: Options.

    """
    from rich import print_json

    from snnmap.pipeline import run_map

    config = setup(opt)
    if hgx is not None:
        config = config.replace(input=hgx)
    if config.dry_run:
        print("DRY-RUN. No mapping artifacts will be written.")
    result = run_map(config)
    if not config.quiet:
        print_json(result.report.replace(runtimes={}).model_dump_json())
    return 0


@app.command(name="eval")
@exits_on_mapping_errors
def eval_(
    hgx: Path,
    partition_file: Path,
    placement_file: Path | None = None,
    *,
    opt: PipelineConfig | None = None,
) -> int:
    """Print every measure of an existing mapping.

    Without a placement only partition-level measures are printed. Average
    path length and hyperedge overlap of the network are always included.

    Args:
        hgx: Hypergraph file.
        partition_file: Partition file of the hypergraph.
        placement_file: Placement file of the partitions.
        opt: Options. `--samples` and `--seed` drive the diagnostics.

    """
    import json

    from rich import print_json

    from snnmap import metrics
    from snnmap.costmodel import evaluate, parse_placement
    from snnmap.hgraph import (
        as_indexed,
        check_constraints,
        connectivity,
        parse_hypergraph,
        parse_partitioning,
        push_forward,
    )

    config = setup(opt)
    hw = config.hardware()
    g = as_indexed(parse_hypergraph(hgx.read_text(encoding="utf-8")))
    rho = parse_partitioning(partition_file.read_text(encoding="utf-8"), g.num_nodes)
    out: dict[str, object] = {
        "connectivity": connectivity(push_forward(g, rho)),
        "valid": check_constraints(g, rho, hw).valid,
        "num_partitions": rho.num_partitions,
        "sr_arith": metrics.synaptic_reuse(g, rho, metrics.MeanKind.arithmetic),
        "sr_geo": metrics.synaptic_reuse(g, rho, metrics.MeanKind.geometric),
    }
    if placement_file is not None:
        gamma = parse_placement(placement_file.read_text(encoding="utf-8"), hw)
        report = evaluate(g, rho, gamma, hw)
        out |= report.model_dump(exclude={"choices", "runtimes"})
    for key, func in (
        ("avg_path_length", metrics.avg_path_length),
        ("avg_hedge_overlap", metrics.avg_hedge_overlap),
    ):
        try:
            out[key] = func(g, config.samples, config.seed)
        except ValueError:
            out[key] = None
    print_json(json.dumps(out))
    return 0


@app.command
@exits_on_mapping_errors
def compare(
    hgx: Path | None = None,
    *,
    partitioners: Annotated[
        list[PartitionerKind] | None, Parameter(consume_multiple=True)
    ] = None,
    placers: Annotated[list[PlacerKind] | None, Parameter(consume_multiple=True)] = None,
    seeds: Annotated[list[int] | None, Parameter(consume_multiple=True)] = None,
    opt: PipelineConfig | None = None,
) -> int:
    """Map one network with several algorithm combinations and tabulate them.

    Every combination of partitioner, placer and seed becomes one row of
    `compare.csv`. Ratio columns divide by the first row.

    Usage examples:
    - snm compare net.hgx --partitioners sequential overlap hierarchical
    - snm compare --nodes 512 --placers hilbert spectral --seeds 0 1 2 -w 4

    Args:
        hgx: Hypergraph file. A random network is generated when omitted.
        partitioners: Partitioners to compare, `--partitioner` by default.
        placers: Placers to compare, `--placer` by default.
        seeds: Seeds to compare, `--seed` by default.
        opt: Options.

    """
    import itertools

    from snnmap.pipeline import run_compare
    from snnmap.writer import ArtifactWriter

    config = setup(opt)
    if hgx is not None:
        config = config.replace(input=hgx)
    configs = [
        config.replace(partitioner=p, placer=pl, seed=s)
        for p, pl, s in itertools.product(
            partitioners or [config.partitioner],
            placers or [config.placer],
            seeds or [config.seed],
        )
    ]
    table = run_compare(configs, workers=config.workers)
    with ArtifactWriter(config) as writer:
        writer.write("compare.csv", table)
    if not config.quiet:
        print(table, end="")
    return 0


@config_app.command(name="schema")
def config_schema():
    """Display configuration schema."""
    import json

    from rich import print_json

    print_json(json.dumps(PipelineConfig.model_json_schema()))


@config_app.command(name="init")
def config_init(opts: PipelineConfig | None = None):
    """Write the resolved configuration as TOML.

    The file goes to `--out` (a `.toml` path or a directory) or to the user
    config home. An existing file is kept unless `--force`; `--out stdout`
    prints the TOML instead.
    """
    config = load_config(opts)
    text = config.to_toml()
    if str(config.output_dir) == "stdout":
        print(text)
        return
    target = homedirs.config()
    if "output_dir" in config.model_fields_set and config.output_dir is not None:
        target = config.output_dir
    if target.suffix != ".toml":
        target /= "config.toml"

    if target.exists():
        if not config.quiet:
            print(f"{target} exists{', overwriting' if config.force else ''}.")
        if not config.force:
            return
    elif not config.quiet:
        print(f"Creating {target}")
    if not config.dry_run:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")


@config_app.command(name="options")
def config_options(opts: PipelineConfig | None = None):
    """Show the configuration `Options` that are loaded."""
    from rich import print_json

    config = load_config(opts)
    print_json(config.opt.model_dump_json())


@cache_app.command(name="clean")
def cache_clean(opt: PipelineConfig | None = None):
    """Delete the cache directory and every digest in it."""
    config = load_config(opt)
    if not config.quiet:
        verb = "Would remove" if config.dry_run else "Removing"
        print(f"{verb} {config.cache_dir}")
        if config.verbose:
            for path in sorted(config.cache_dir.rglob("*")):
                if path.is_file():
                    print(f"  {path}")
    if not config.dry_run:
        with suppress(FileNotFoundError):
            rmtree(config.cache_dir)


@cache_app.command(name="dir")
def cache_dir(opt: PipelineConfig | None = None):
    """Show the cache directory."""
    config = load_config(opt)
    print(config.cache_dir)


@cache_app.command(name="list", alias=["ls"])
def cache_list(opt: PipelineConfig | None = None):
    """List the artifact digests in the application cache."""
    import json

    from rich import print_json

    config = load_config(opt)

    with Cache(config.opt) as cache:
        print_json(json.dumps(cache.get_digests()))


@cache_app.command(name="prune")
def cache_prune(opt: PipelineConfig | None = None):
    """Forget digests of artifacts that no longer exist."""
    config = load_config(opt)
    if config.dry_run:
        print("DRY-RUN: Cache entries will not be removed.")
        return
    with Cache(config.opt) as cache:
        gone = cache.prune()
    if not config.quiet:
        print("\n".join(gone))

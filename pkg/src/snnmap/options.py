"""Runtime options shared by the mapping pipeline and every CLI command."""

from pathlib import Path
from typing import Annotated, Any

from cyclopts.parameter import Parameter
from pydantic import AfterValidator, Field, NonNegativeInt, PositiveInt

from snnmap import homedirs
from snnmap.base import BaseNode
from snnmap.ordering import OrderKind
from snnmap.partitioning import PartitionerKind
from snnmap.placement import EnsembleGoal, PlacerKind, RefineKind


NULL_WORDS = frozenset({"none", "null"})


def validate_nullable_path(val: str | Path | None) -> Path | None:
    """Map the words `none` and `null` to None so `--out none` disables writing.

    Returns:
        The path, or None.

    """
    if val is None or str(val).lower() in NULL_WORDS:
        return None
    return Path(val)


EXCLUSIVE_OPTIONS = (
    ("verbose", "quiet"),
    ("no_cache", "cache_in_memory"),
    ("no_config", "config_file"),
)


@Parameter(name="*")
class Options(BaseNode):
    """Flags every command accepts, also settable from config files and env."""

    seed: int = 0
    """Seed of every randomized step: generation, coarsening, sampling."""
    hw: Annotated[str, Parameter(alias=["--hardware"])] = Field(
        default="desk", examples=["small", "large", "desk", "chip.toml"]
    )
    """Hardware preset name or path to a TOML file of hardware fields."""
    output_dir: Annotated[
        Path | None,
        Parameter(alias=["--output", "--out", "-o"]),
        AfterValidator(validate_nullable_path),
    ] = Field(default=Path("build"), examples=[Path("./build"), Path("./runs/a")])
    """Directory receiving mapping artifacts. Set to `none` to skip writing."""
    partitioner: Annotated[PartitionerKind, Parameter(alias=["-P"])] = (
        PartitionerKind.overlap
    )
    """Partitioning algorithm."""
    order: OrderKind = OrderKind.topo
    """Node order feeding sequential partitioning and order-driven placers."""
    placer: Annotated[PlacerKind, Parameter(alias=["-L"])] = PlacerKind.spectral
    """Initial placement algorithm, or `ensemble` to try them all and keep the best."""
    refine: RefineKind = RefineKind.force
    """Placement refinement."""
    ensemble_goal: EnsembleGoal = EnsembleGoal.elp
    """Measure the `ensemble` placer minimizes."""
    max_iters: PositiveInt = 1000
    """Maximum refinement sweeps."""
    time_limit_s: float | None = Field(default=None, gt=0)
    """Stop refinement after this many seconds."""
    eig_budget: PositiveInt | None = None
    """Eigensolver iteration budget, ten times the partition count by default."""
    strict_solver: Annotated[bool, Parameter(negative="")] = False
    """Fail instead of falling back to Hilbert placement when the eigensolver fails."""
    samples: PositiveInt = 10_000
    """Sampled pairs for path length and overlap diagnostics."""
    workers: Annotated[NonNegativeInt, Parameter(alias=["-w"])] = 0
    """Parallel pipelines when comparing; 0 runs them sequentially."""
    cache_dir: Annotated[Path, Parameter(parse=True)] = homedirs.cache()
    """Directory holding the artifact digest database."""
    config_file: Path | None = None
    """TOML file replacing the user config sources of ``UserConfig``."""
    cache_in_memory: Annotated[bool, Parameter(negative="")] = False
    """Keep artifact digests in memory for this run only."""
    dry_run: Annotated[bool, Parameter(alias="-n", negative="")] = False
    """Report what would be written without touching files or the cache."""
    force: Annotated[bool, Parameter(alias="-f", negative="")] = False
    """Force rewriting of artifacts even when their digest is cached."""
    no_cache: Annotated[bool, Parameter(negative="")] = False
    """Ignore cache completely. Artifact digests are not recorded."""
    no_config: Annotated[bool, Parameter(negative="")] = False
    """Do not read settings from user config files."""
    quiet: Annotated[bool, Parameter(alias="-q", negative="")] = False
    """Only log warnings and errors."""
    verbose: Annotated[bool, Parameter(alias="-v", negative="")] = False
    """Log every phase at debug level."""

    def model_post_init(self, context: Any, /) -> None:
        """Reject flag combinations that contradict each other.

        Raises:
            ValueError: When two mutually exclusive options are both set.

        """
        for first, second in EXCLUSIVE_OPTIONS:
            if self[first] and self[second]:
                raise ValueError(f"Cannot set both {first} and {second}.")
        return super().model_post_init(context)

    @property
    def use_cache(self) -> bool:
        """Whether artifact digests are read and recorded."""
        return not self.no_cache

    @property
    def log_level(self) -> str:
        """Loguru level implied by the verbosity flags."""
        if self.quiet:
            return "WARNING"
        return "DEBUG" if self.verbose else "INFO"

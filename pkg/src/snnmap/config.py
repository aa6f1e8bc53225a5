"""Pipeline configuration and the layered user settings sources."""

from pathlib import Path

from cyclopts.parameter import Parameter
from pydantic import Field, PrivateAttr
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from snnmap import homedirs
from snnmap.costmodel import HardwareConfig
from snnmap.generators import HardwarePreset, RandomSnnSpec, hardware_preset
from snnmap.options import Options


def load_hardware(name: str | Path) -> HardwareConfig:
    """Resolve a hardware preset name or TOML file.

    Relative file names that do not exist are also looked up in the user
    hardware directory.

    Returns:
        The hardware configuration.

    Raises:
        ValueError: When ``name`` is neither a preset nor a readable file.

    """
    if str(name) in HardwarePreset.__members__:
        return hardware_preset(str(name))
    path = Path(name)
    if not path.exists() and (homedirs.hardware() / path).exists():
        path = homedirs.hardware() / path
    if not path.is_file():
        raise ValueError(f"{name!r} is neither a hardware preset nor a file.")
    return HardwareConfig.from_toml(path)


@Parameter(name="*")
class PipelineConfig(Options):
    """Everything a mapping run needs.

    The input is either an HGX file or a random network generated from
    ``nodes``, ``cardinality``, ``decay`` and ``seed``.
    """

    input: Path | None = None
    """HGX hypergraph file. A random network is generated when unset."""
    nodes: int = Field(default=256, ge=2)
    """Neurons of the generated network."""
    cardinality: float = Field(default=8.0, ge=1)
    """Mean destinations per neuron of the generated network."""
    decay: float = Field(default=0.1, gt=0)
    """Distance decay scale of the generated network."""
    _opts: Options | None = PrivateAttr(default=None)

    @property
    def opt(self) -> Options:
        """The runtime options this configuration set explicitly, as ``Options``."""
        if self._opts is None:
            keys = self.model_fields_set & Options.model_fields.keys()
            self._opts = Options.model_validate(self.model_dump(include=keys))
        return self._opts

    def hardware(self) -> HardwareConfig:
        """Resolve the configured hardware."""
        return load_hardware(self.hw)

    def network_spec(self) -> RandomSnnSpec:
        """Generator parameters of the random network."""
        return RandomSnnSpec(
            num_nodes=self.nodes,
            mean_cardinality=self.cardinality,
            decay_scale=self.decay,
            seed=self.seed,
        )

    def choices(self) -> dict[str, str]:
        """Algorithm choices recorded in reports."""
        return {
            "partitioner": str(self.partitioner),
            "order": str(self.order),
            "placer": str(self.placer),
            "refine": str(self.refine),
            "seed": str(self.seed),
            "hw": self.hw,
        }


class UserConfig(PipelineConfig):
    """A ``PipelineConfig`` that also reads the user's settings.

    Sources, highest priority first:

    - init arguments, i.e. command line flags
    - environment variables prefixed with `SNNMAP_`
    - environment variables in `./snnmap.env` prefixed with `SNNMAP_`
    - settings in `./snnmap.toml`
    - settings in `$XDG_CONFIG_HOME/snnmap/config.toml`
    """

    model_config = SettingsConfigDict(
        frozen=True,
        env_file=["snnmap.env"],
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        env_prefix="snnmap_",
        env_parse_none_str="null",
        env_parse_enums=True,
        extra="forbid",
        nested_model_default_partial_update=True,
        toml_file=[homedirs.config() / "config.toml", "snnmap.toml"],
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        """Layer init, environment, dotenv and TOML sources.

        Returns:
            The sources, highest priority first.

        """
        return (
            init_settings,
            env_settings,
            dotenv_settings,
            file_secret_settings,
            TomlConfigSettingsSource(settings_cls),
        )


def load_config(opt: Options | None = None) -> PipelineConfig:
    """Resolve the configuration a command runs with.

    The explicitly set fields of ``opt`` win over every file and environment
    source; ``--config-file`` replaces the user sources and ``--no-config``
    drops them.

    Args:
        opt: Command line options, possibly a full ``PipelineConfig``.

    Returns:
        A ``UserConfig`` when user sources apply, a ``PipelineConfig`` otherwise.

    """
    match opt:
        case None:
            return UserConfig()
        case Options(config_file=Path() as path):
            return PipelineConfig.from_toml(path) | opt
        case Options(no_config=True):
            return PipelineConfig() | opt
        case _:
            return UserConfig() | opt

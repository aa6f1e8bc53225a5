"""XDG base directories the application uses."""

from pathlib import Path  # required for pydantic

import xdg_base_dirs

from snnmap.const import APP_NAME

APP_DIR = Path(APP_NAME)


def config() -> Path:
    """Application user configuration home.

    Returns:
        The application configuration home directory.

    """
    return xdg_base_dirs.xdg_config_home() / APP_DIR


def cache() -> Path:
    """Application cache home, where artifact digests are stored.

    Returns:
        The application cache directory.

    """
    return xdg_base_dirs.xdg_cache_home() / APP_DIR


def hardware() -> Path:
    """Directory searched for user defined hardware TOML files.

    Returns:
        The hardware definitions directory.

    """
    return config() / "hardware"

"""Constants."""

from importlib.metadata import version

APP_NAME: str = "snnmap"
APP_VERSION = version("snnmap")

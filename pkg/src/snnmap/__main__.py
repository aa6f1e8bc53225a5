"""Allow running the snnmap cli via `python -m snnmap`."""

from snnmap.cli.main import app

if __name__ == "__main__":
    app()

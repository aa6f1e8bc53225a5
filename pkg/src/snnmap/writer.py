"""Render and atomically write mapping artifacts."""

import os
import tempfile
from hashlib import blake2b
from pathlib import Path
from typing import TYPE_CHECKING, Any, ClassVar

from jinja2 import Environment, PackageLoader, StrictUndefined, Template
from loguru import logger

from snnmap import const
from snnmap.cache import Cache

if TYPE_CHECKING:
    from snnmap.options import Options


def digest(data: bytes) -> str:
    """Content digest recorded in the cache.

    Returns:
        A 64 character hex digest.

    """
    return blake2b(data, digest_size=32).hexdigest()


def atomic_write(path: Path, data: bytes):
    """Write ``data`` to a temporary sibling of ``path``, then rename it over."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fp:
            fp.write(data)
        Path(tmp).replace(path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class ArtifactWriter:
    """Write artifact files into the configured output directory.

    Files whose content digest matches the cache are left alone unless
    ``force`` is set; ``dry_run`` writes nothing.
    """

    _templates: ClassVar[Environment] = Environment(
        loader=PackageLoader(const.APP_NAME),
        undefined=StrictUndefined,
        autoescape=False,
        keep_trailing_newline=True,
    )

    def __init__(self, opt: Options, output_dir: Path | None = None):
        """Prepare an instance for writing files.

        Initialization does not connect to the cache database or write
        any files.

        Args:
            opt: Runtime options.
            output_dir: Overrides ``opt.output_dir``.

        """
        self.opt = opt
        self.output_dir = output_dir if output_dir is not None else opt.output_dir
        self.cache = Cache(opt)
        self.written: list[Path] = []

    def _skip(self, path: Path, hexdigest: str) -> bool:
        return (
            not self.opt.force
            and self.opt.use_cache
            and path.exists()
            and self.cache.get(path.absolute()) == hexdigest
        )

    def get_template(self, name: str) -> Template:
        """Load a template shipped with the package.

        Returns:
            A jinja2.Template instance.

        """
        return self._templates.get_template(name)

    def render(self, name: str, **context: Any) -> str:
        """Render a packaged template.

        Returns:
            The rendered text.

        """
        return self.get_template(name).render(**context)

    def write(self, name: str, text: str) -> tuple[Path | None, bool]:
        """Write one artifact relative to the output directory.

        Returns:
            The artifact path, None without an output directory, and whether
            it was written.

        """
        if self.output_dir is None:
            return None, False
        path = self.output_dir / name
        data = text.encode()
        hexdigest = digest(data)
        if self.opt.dry_run:
            logger.info(f"DRY-RUN: would write {path}.")
            return path, False
        if self._skip(path, hexdigest):
            logger.debug(f"Unchanged {path}, skipping.")
            return path, False
        atomic_write(path, data)
        logger.debug(f"Wrote {path} {hexdigest}.")
        if self.opt.use_cache:
            self.cache.add(path.absolute(), hexdigest)
        self.written.append(path)
        return path, True

    def __enter__(self):
        """Connect to the cache.

        Returns:
            The instance with a connection to the cache db.

        """
        if self.opt.use_cache and not self.opt.dry_run:
            self.cache.connect()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        """Close cache db connection."""
        if exc_type is not None:
            logger.error((exc_type, exc_value, traceback))
        self.cache.close()

"""Artifact digest cache."""

import sqlite3
from pathlib import Path
from typing import Self

from loguru import logger

from snnmap.options import Options


class Cache:
    """Sqlite store mapping artifact paths to the digest of their content.

    A mapping artifact whose path and digest match an entry, and which still
    exists on disk, need not be rewritten.
    """

    DB_NAME = "artifacts.db"

    def __init__(self, opts: Options | None = None):
        """Create a new instance.

        Args:
            opts: Runtime options controlling location of cache, whether to
               keep it in memory, etc.

        """
        self.opt = opts or Options()
        self.cache_dir: Path = self.opt.cache_dir
        self.db_file: Path = self.cache_dir / self.DB_NAME
        self._conn: sqlite3.Connection | None = None

    def connect(self) -> Self:
        """Open the database, creating the digest table if needed.

        Returns:
            The connected instance.

        """
        if self.opt.cache_in_memory:
            target: str | Path = ":memory:"
        else:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            target = self.db_file
        self._conn = sqlite3.connect(target)
        with self._conn:
            self._conn.execute(
                "CREATE TABLE IF NOT EXISTS digests(path TEXT PRIMARY KEY, digest TEXT)"
            )
        return self

    @property
    def conn(self) -> sqlite3.Connection:
        """The open connection.

        Raises:
            RuntimeError: When the cache is not connected.

        """
        if self._conn is None:
            raise RuntimeError("Cache is not connected.")
        return self._conn

    def close(self):
        """Close the database connection."""
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    def add(self, path: str | Path, digest: str):
        """Record the digest of a freshly written artifact."""
        with self.conn:
            self.conn.execute(
                """INSERT INTO digests VALUES(:path, :digest)
                ON CONFLICT(path) DO UPDATE SET digest=:digest""",
                {"path": str(path), "digest": digest},
            )

    def delete(self, path: str | Path):
        """Remove a cache entry."""
        with self.conn:
            self.conn.execute("DELETE FROM digests WHERE path == ?", [str(path)])

    def get(self, path: str | Path) -> str | None:
        """Digest recorded for ``path``, None when unknown."""
        row = self.conn.execute(
            "SELECT digest FROM digests WHERE path == ? LIMIT 1", [str(path)]
        ).fetchone()
        return row[0] if row else None

    def get_digests(self) -> dict[str, str]:
        """Obtain every recorded artifact digest.

        Returns:
            Mapping of path -> hash digest.

        """
        return dict(self.conn.execute("SELECT path, digest FROM digests ORDER BY path"))

    def prune(self) -> list[str]:
        """Drop entries whose artifact no longer exists.

        Returns:
            The removed paths.

        """
        gone = [p for p in self.get_digests() if not Path(p).exists()]
        with self.conn:
            self.conn.executemany("DELETE FROM digests WHERE path == ?", [[p] for p in gone])
        if gone:
            logger.debug(f"Pruned {len(gone)} stale cache entries.")
        return gone

    def __len__(self) -> int:
        return self.conn.execute("SELECT COUNT(*) FROM digests").fetchone()[0]

    def __enter__(self) -> Self:
        """Connect to the database.

        Returns:
            The connected instance.

        """
        return self.connect()

    def __exit__(self, exc_type, exc_value, traceback):
        """Close the database connection."""
        if exc_type is not None:
            logger.error((exc_type, exc_value, traceback))
        self.close()

"""Exceptions raised by the mapping pipeline.

Each error carries the process exit code the CLI reports for it.
"""

from typing import TYPE_CHECKING, ClassVar

if TYPE_CHECKING:
    from snnmap.hgraph import ConstraintReport


class MappingError(Exception):
    """Base class for failures that abort a mapping run."""

    exit_code: ClassVar[int] = 1
    kind: ClassVar[str] = "mapping"
    """Short label used in failure markers."""


class HgxParseError(MappingError, ValueError):
    """Malformed hypergraph, partition or placement file."""

    exit_code: ClassVar[int] = 1
    kind: ClassVar[str] = "parse"

    def __init__(self, message: str, line: int | None = None):
        """Create a new instance.

        Args:
            message: What is wrong with the input.
            line: One based line number of the offending line, if known.

        """
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class ConstraintViolationError(MappingError):
    """A produced mapping breaks per-core capacity limits."""

    exit_code: ClassVar[int] = 2
    kind: ClassVar[str] = "constraints"

    def __init__(self, report: ConstraintReport):
        """Create a new instance.

        Args:
            report: The failing constraint report.

        """
        self.report = report
        super().__init__(
            f"{len(report.violations)} constraint violation(s):\n"
            + "\n".join(f"  {v}" for v in report.violations)
        )


class CapacityError(MappingError, ValueError):
    """A node or a partition count cannot fit the hardware."""

    exit_code: ClassVar[int] = 3
    kind: ClassVar[str] = "capacity"


class SolverError(MappingError, RuntimeError):
    """The eigensolver failed to produce a usable embedding."""

    exit_code: ClassVar[int] = 4
    kind: ClassVar[str] = "solver"

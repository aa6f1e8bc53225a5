"""Hilbert space-filling curve over a ``2**order`` square lattice.

Index 0 sits at ``(0, 0)`` and the first step goes along ``+y``.
"""

from collections.abc import Iterator
from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class HilbertCurve:
    """Bijection between curve indices and lattice cells."""

    order: int

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("Curve order must be non-negative.")

    @classmethod
    def covering(cls, width: int, height: int) -> HilbertCurve:
        """Smallest curve whose square covers a ``width`` by ``height`` lattice.

        Returns:
            The curve.

        """
        side = max(width, height, 1)
        return cls(order=(side - 1).bit_length())

    @property
    def side(self) -> int:
        """Lattice side length."""
        return 1 << self.order

    def __len__(self) -> int:
        return self.side * self.side

    def point(self, index: int) -> tuple[int, int]:
        """Cell visited at curve position ``index``."""
        if not 0 <= index < len(self):
            raise IndexError(index)
        x = y = 0
        s = 1
        while s < self.side:
            rx = 1 & (index // 2)
            ry = 1 & (index ^ rx)
            if ry == 0:
                if rx == 1:
                    x = s - 1 - x
                    y = s - 1 - y
                x, y = y, x
            x += s * rx
            y += s * ry
            index //= 4
            s *= 2
        return x, y

    def index(self, x: int, y: int) -> int:
        """Curve position of cell ``(x, y)``."""
        n = self.side
        if not (0 <= x < n and 0 <= y < n):
            raise IndexError((x, y))
        d = 0
        s = n // 2
        while s > 0:
            rx = 1 if x & s else 0
            ry = 1 if y & s else 0
            d += s * s * ((3 * rx) ^ ry)
            if ry == 0:
                if rx == 1:
                    x = n - 1 - x
                    y = n - 1 - y
                x, y = y, x
            s //= 2
        return d

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return (self.point(i) for i in range(len(self)))

"""Addressable max-priority queue keyed by integer ids."""

from collections.abc import Iterable, Iterator

type _Entry = tuple[float, int]
"""Heap entry ``(-priority, key)``: higher priority first, then lower key."""


class AddressablePriorityQueue:
    """Binary max-heap with priority updates and removal by key.

    ``pop`` returns a maximizer of the priority; ties go to the lowest key.
    Sifting follows ``heapq`` while an index map tracks every key's position.
    """

    __slots__ = ("_data", "_index")

    def __init__(self, items: Iterable[tuple[int, float]] = ()):
        """Create a queue, optionally from ``(key, priority)`` pairs."""
        self._data: list[_Entry] = []
        self._index: dict[int, int] = {}
        for key, priority in items:
            self[key] = priority

    def __len__(self) -> int:
        return len(self._data)

    def __bool__(self) -> bool:
        return bool(self._data)

    def __contains__(self, key: object) -> bool:
        return key in self._index

    def __iter__(self) -> Iterator[int]:
        return iter(self._index)

    def __getitem__(self, key: int) -> float:
        return -self._data[self._index[key]][0]

    def __setitem__(self, key: int, priority: float):
        """Insert ``key`` or update its priority."""
        entry = (-priority, key)
        pos = self._index.get(key)
        if pos is None:
            self._data.append(entry)
            self._index[key] = len(self._data) - 1
            self._sift_up(len(self._data) - 1)
            return
        old = self._data[pos]
        self._data[pos] = entry
        if entry < old:
            self._sift_up(pos)
        else:
            self._sift_down(pos)

    def __delitem__(self, key: int):
        pos = self._index.pop(key)
        last = self._data.pop()
        if pos == len(self._data):
            return
        self._data[pos] = last
        self._index[last[1]] = pos
        self._sift_up(pos)
        self._sift_down(self._index[last[1]])

    def push(self, key: int, priority: float):
        """Insert a new key.

        Raises:
            KeyError: When ``key`` is already queued.

        """
        if key in self._index:
            raise KeyError(key)
        self[key] = priority

    def increase(self, key: int, delta: float):
        """Add ``delta`` to the priority of ``key``, inserting it at 0 if absent."""
        self[key] = (self[key] if key in self._index else 0.0) + delta

    def peek(self) -> tuple[int, float]:
        """Return the top ``(key, priority)`` without removing it.

        Raises:
            IndexError: When the queue is empty.

        """
        neg, key = self._data[0]
        return key, -neg

    def pop(self) -> tuple[int, float]:
        """Remove and return the top ``(key, priority)``.

        Raises:
            IndexError: When the queue is empty.

        """
        key, priority = self.peek()
        del self[key]
        return key, priority

    def clear(self):
        """Remove every entry."""
        self._data.clear()
        self._index.clear()

    def _sift_up(self, pos: int):
        data = self._data
        item = data[pos]
        while pos > 0:
            parent_pos = (pos - 1) >> 1
            parent = data[parent_pos]
            if not item < parent:
                break
            data[pos] = parent
            self._index[parent[1]] = pos
            pos = parent_pos
        data[pos] = item
        self._index[item[1]] = pos

    def _sift_down(self, pos: int):
        data = self._data
        end = len(data)
        item = data[pos]
        child = 2 * pos + 1
        while child < end:
            right = child + 1
            if right < end and data[right] < data[child]:
                child = right
            if not data[child] < item:
                break
            data[pos] = data[child]
            self._index[data[pos][1]] = pos
            pos = child
            child = 2 * pos + 1
        data[pos] = item
        self._index[item[1]] = pos

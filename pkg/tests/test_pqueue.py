import pytest
from hypothesis import given
from hypothesis import strategies as st

from snnmap.pqueue import AddressablePriorityQueue


def test_pop_highest_first_lowest_key_on_ties():
    queue = AddressablePriorityQueue([(3, 1.0), (1, 2.0), (2, 2.0), (0, 0.5)])
    assert [queue.pop()[0] for _ in range(4)] == [1, 2, 3, 0]
    assert not queue


def test_update_and_delete():
    queue = AddressablePriorityQueue([(0, 1.0), (1, 2.0), (2, 3.0)])
    queue[0] = 5.0
    assert queue.peek() == (0, 5.0)
    queue[0] = 0.0
    assert queue.peek() == (2, 3.0)
    del queue[2]
    assert 2 not in queue
    assert queue.pop() == (1, 2.0)
    assert len(queue) == 1


def test_increase_inserts_missing_keys():
    queue = AddressablePriorityQueue()
    queue.increase(4, 1.5)
    queue.increase(4, 1.0)
    queue.increase(2, float("inf"))
    assert queue[4] == 2.5
    assert queue.pop() == (2, float("inf"))


def test_push_rejects_duplicates():
    queue = AddressablePriorityQueue([(0, 1.0)])
    with pytest.raises(KeyError):
        queue.push(0, 2.0)


def test_empty_queue():
    queue = AddressablePriorityQueue()
    with pytest.raises(IndexError):
        queue.peek()
    with pytest.raises(IndexError):
        queue.pop()


@given(
    st.lists(
        st.tuples(st.integers(0, 20), st.floats(-100, 100)), min_size=1, max_size=60
    )
)
def test_matches_sorted_order(ops):
    queue = AddressablePriorityQueue()
    expected: dict[int, float] = {}
    for key, priority in ops:
        if key in expected and priority < 0:
            del queue[key]
            del expected[key]
        else:
            queue[key] = priority
            expected[key] = priority
    drained = [queue.pop() for _ in range(len(queue))]
    assert drained == sorted(expected.items(), key=lambda kv: (-kv[1], kv[0]))
    assert set(queue) == set()

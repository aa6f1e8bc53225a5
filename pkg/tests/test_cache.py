import pytest

from snnmap.cache import Cache
from snnmap.options import Options


@pytest.fixture
def cache(tmp_path) -> Cache:
    opt = Options(cache_dir=tmp_path)
    return Cache(opt)


def test_add_and_delete(cache: Cache):
    with cache:
        path = "partition.txt"
        cache.add(path, "123")
        assert cache.get(path) == "123"
        cache.add(path, "456")
        assert cache.get(path) == "456"
        assert len(cache) == 1
        cache.delete(path)
        assert cache.get(path) is None
    assert cache.db_file.exists()


def test_add_and_delete_in_memory():
    with Cache(Options(cache_in_memory=True)) as cache:
        path = "partition.txt"
        cache.add(path, "123")
        assert cache.get(path) == "123"
        cache.delete(path)
        assert cache.get(path) is None


def test_digests_persist(cache: Cache):
    with cache:
        cache.add("b.txt", "2")
        cache.add("a.txt", "1")
    with cache:
        assert cache.get_digests() == {"a.txt": "1", "b.txt": "2"}


def test_prune(cache: Cache, tmp_path):
    kept = tmp_path / "kept.txt"
    kept.write_text("x")
    with cache:
        cache.add(kept, "1")
        cache.add(tmp_path / "gone.txt", "2")
        assert cache.prune() == [str(tmp_path / "gone.txt")]
        assert list(cache.get_digests()) == [str(kept)]


def test_requires_connection(cache: Cache):
    with pytest.raises(RuntimeError):
        cache.get("partition.txt")


def test_exit_with_error():
    with pytest.raises(ValueError), Cache(Options(cache_in_memory=True)):
        raise ValueError("bomb")

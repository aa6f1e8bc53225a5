import math

import numpy as np
import pytest

from snnmap.errors import SolverError
from snnmap.spectral import build_laplacian, smallest_nonzero_eigenpairs, smoothness


@pytest.fixture
def path(build_graph):
    def _path(n: int):
        return build_graph(n, [(i, (i + 1,), 1.0) for i in range(n - 1)], snn=False)

    return _path


def test_two_partition_laplacian(build_graph):
    lap = build_laplacian(build_graph(2, [(0, (1,), 3.0)], snn=False))
    assert lap.wdeg == (3.0, 3.0)
    eigenvalues = np.linalg.eigvalsh(lap.matrix.toarray())
    assert eigenvalues == pytest.approx([0.0, 2.0], abs=1e-12)
    with pytest.raises(SolverError):
        smallest_nonzero_eigenpairs(lap)


def test_clique_expansion_weights(build_graph):
    g = build_graph(4, [(0, (1, 2), 2.0), (1, (2,), 1.0)], snn=False)
    lap = build_laplacian(g)
    assert lap.wdeg == (4.0, 5.0, 5.0, 0.0)
    dense = lap.matrix.toarray()
    assert dense[1, 2] == pytest.approx(-3.0 / 5.0)
    assert dense[0, 1] == pytest.approx(-2.0 / math.sqrt(20.0))
    assert dense[3, 3] == 1.0
    assert lap.active.tolist() == [0, 1, 2]


def test_path_eigenvalues(path):
    lap = build_laplacian(path(3))
    embedding = smallest_nonzero_eigenpairs(lap)
    assert embedding.eigenvalues == pytest.approx((1.0, 2.0))
    assert embedding.index == (0, 1, 2)
    assert max(embedding.residuals) < 1e-9
    assert smoothness(lap, embedding) == pytest.approx(3.0)


def test_eigenvectors_are_signed(path):
    embedding = smallest_nonzero_eigenpairs(build_laplacian(path(7)))
    coords = embedding.array()
    for col in coords.T:
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0


def test_isolated_partitions_are_left_out(build_graph):
    g = build_graph(5, [(0, (1, 2), 1.0), (2, (4,), 1.0)], snn=False)
    lap = build_laplacian(g)
    embedding = smallest_nonzero_eigenpairs(lap)
    assert embedding.index == (0, 1, 2, 4)
    assert embedding.array().shape == (4, 2)


def test_iterative_solver_matches_dense(path):
    n = 30
    lap = build_laplacian(path(n))
    sparse = smallest_nonzero_eigenpairs(lap, dense_limit=4)
    dense = smallest_nonzero_eigenpairs(lap)
    expected = [1 - math.cos(math.pi * k / (n - 1)) for k in (1, 2)]
    assert sparse.eigenvalues == pytest.approx(expected, abs=1e-9)
    assert dense.eigenvalues == pytest.approx(expected, abs=1e-9)
    assert np.abs(sparse.array()) == pytest.approx(np.abs(dense.array()), abs=1e-6)


def test_disconnected_components_are_skipped(build_graph):
    # Two separate paths: the second zero eigenvalue must not be picked.
    edges = [(0, (1,), 1.0), (1, (2,), 1.0), (3, (4,), 1.0), (4, (5,), 1.0)]
    embedding = smallest_nonzero_eigenpairs(build_laplacian(build_graph(6, edges, snn=False)))
    assert min(embedding.eigenvalues) > 1e-6


def test_smoothness_row_count(path):
    lap = build_laplacian(path(3))
    assert smoothness(lap, np.ones(3)) == pytest.approx(
        float(lap.matrix.toarray().sum())
    )
    with pytest.raises(ValueError):
        smoothness(lap, np.ones(5))

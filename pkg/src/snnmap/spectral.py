"""Normalized hypergraph Laplacian and its low eigenvectors.

Hyperedges are exploded into pairwise connections between all of their
pins. The two eigenvectors of the smallest non-zero eigenvalues give each
partition a 2D coordinate that keeps strongly connected partitions close.
"""

from typing import Any

import numpy as np
import scipy.sparse as sp
from loguru import logger
from pydantic import PrivateAttr
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from snnmap.base import BaseNode
from snnmap.errors import SolverError
from snnmap.hgraph import AnyHypergraph, as_base

ZERO_EIGENVALUE = 2e-8
"""Eigenvalues at or below this are treated as zero; the spectrum lies in [0, 2]."""
RESIDUAL_TOL = 1e-6
DENSE_LIMIT = 512
"""Active dimensions up to this use a dense eigensolver."""


class SparseLaplacian(BaseNode):
    """Normalized Laplacian of a partition-level hypergraph.

    Isolated partitions keep a unit diagonal and no off-diagonal entries.
    """

    dimension: int
    rows: tuple[int, ...] = ()
    cols: tuple[int, ...] = ()
    values: tuple[float, ...] = ()
    wdeg: tuple[float, ...] = ()
    """Weighted degree: row sums of the exploded weight matrix."""
    _matrix: sp.csr_array | None = PrivateAttr(default=None)

    def model_post_init(self, context: Any, /) -> None:
        """Assemble the sparse matrix."""
        self._matrix = sp.csr_array(
            (self.values, (self.rows, self.cols)),
            shape=(self.dimension, self.dimension),
        )
        return super().model_post_init(context)

    @property
    def matrix(self) -> sp.csr_array:
        """The Laplacian as a CSR array."""
        return self._matrix

    @property
    def active(self) -> np.ndarray:
        """Ids of partitions with at least one connection."""
        return np.flatnonzero(np.asarray(self.wdeg) > 0)

    def submatrix(self, index: np.ndarray) -> sp.csr_array:
        """Restriction to the rows and columns in ``index``."""
        return self.matrix[index][:, index]


def build_laplacian(gp: AnyHypergraph) -> SparseLaplacian:
    """Build the normalized Laplacian of the clique expansion of ``gp``.

    The off-diagonal entry ``(i, j)`` is minus the total weight of the
    hyperedges holding both pins, divided by ``sqrt(wdeg(i) * wdeg(j))``.

    Returns:
        The Laplacian.

    """
    base = as_base(gp)
    n = base.num_nodes
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for hedge in base.hedges:
        pins = sorted(set(hedge.pins))
        for i in pins:
            for j in pins:
                if i != j:
                    rows.append(i)
                    cols.append(j)
                    vals.append(hedge.weight)
    adjacency = sp.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()
    adjacency.sum_duplicates()
    wdeg = np.asarray(adjacency.sum(axis=1)).ravel()
    scale = np.zeros(n)
    np.divide(1.0, np.sqrt(wdeg), out=scale, where=wdeg > 0)
    normalized = sp.diags_array(scale) @ adjacency @ sp.diags_array(scale)
    laplacian = (sp.eye_array(n) - normalized).tocoo()
    order = np.lexsort((laplacian.col, laplacian.row))
    return SparseLaplacian(
        dimension=n,
        rows=tuple(laplacian.row[order].tolist()),
        cols=tuple(laplacian.col[order].tolist()),
        values=tuple(laplacian.data[order].tolist()),
        wdeg=tuple(wdeg.tolist()),
    )


class SpectralEmbedding(BaseNode):
    """Two-dimensional spectral coordinates of the connected partitions."""

    index: tuple[int, ...]
    """Partition id of every embedded row."""
    coords: tuple[tuple[float, float], ...]
    eigenvalues: tuple[float, float]
    residuals: tuple[float, float]

    def array(self) -> np.ndarray:
        """Coordinates as an array of shape ``(len(index), 2)``."""
        return np.array(self.coords, dtype=np.float64).reshape(-1, 2)


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    nonzero = np.flatnonzero(np.abs(vec) > 1e-12)
    if nonzero.size and vec[nonzero[0]] < 0:
        return -vec
    return vec


def _eigs(matrix: sp.csr_array, k: int, budget: int, dense_limit: int) -> tuple[np.ndarray, np.ndarray]:
    m = matrix.shape[0]
    if m <= dense_limit or k >= m - 1:
        return np.linalg.eigh(matrix.toarray())
    # Largest eigenvalues of 2I - L are the smallest of L.
    shifted = 2.0 * sp.eye_array(m, format="csr") - matrix
    try:
        vals, vecs = eigsh(
            shifted, k=k, which="LA", v0=np.linspace(1.0, 2.0, m), maxiter=budget
        )
    except (ArpackNoConvergence, ArpackError) as exc:
        raise SolverError(f"Eigensolver did not converge: {exc}") from exc
    vals = 2.0 - vals
    order = np.argsort(vals, kind="stable")
    return vals[order], vecs[:, order]


def smallest_nonzero_eigenpairs(
    lap: SparseLaplacian,
    *,
    budget: int | None = None,
    dense_limit: int = DENSE_LIMIT,
) -> SpectralEmbedding:
    """Eigenpairs of the two smallest non-zero eigenvalues.

    Only partitions with connections take part. Eigenvectors are signed so
    that their first non-zero component is positive.

    Args:
        lap: The Laplacian.
        budget: Restart budget of the iterative solver, ``10 * m`` by default
            where ``m`` is the number of connected partitions.
        dense_limit: Largest dimension handled by a dense solver.

    Returns:
        The embedding of the connected partitions.

    Raises:
        SolverError: With fewer than three connected partitions, fewer than
            two non-zero eigenvalues, or when the solver fails.

    """
    active = lap.active
    m = active.size
    if m < 3:  # noqa: PLR2004
        raise SolverError(f"Spectral embedding needs 3 connected partitions, got {m}.")
    matrix = lap.submatrix(active)
    num_components, _ = connected_components(matrix, directed=False)
    k = min(num_components + 2, m)
    vals, vecs = _eigs(matrix, k, budget or 10 * m, dense_limit)
    nonzero = np.flatnonzero(vals > ZERO_EIGENVALUE)
    if nonzero.size < 2:  # noqa: PLR2004
        raise SolverError("Fewer than two non-zero eigenvalues.")
    picked = nonzero[:2]
    u = np.column_stack([_fix_sign(vecs[:, i]) for i in picked])
    lam = vals[picked]
    residuals = np.linalg.norm(matrix @ u - u * lam, axis=0)
    if np.any(residuals > RESIDUAL_TOL * np.linalg.norm(u, axis=0)):
        raise SolverError(f"Eigenpair residuals too large: {residuals.tolist()}.")
    logger.debug(f"Spectral embedding of {m} partitions, eigenvalues {lam.tolist()}.")
    return SpectralEmbedding(
        index=tuple(active.tolist()),
        coords=tuple(map(tuple, u.tolist())),
        eigenvalues=(float(lam[0]), float(lam[1])),
        residuals=(float(residuals[0]), float(residuals[1])),
    )


def smoothness(lap: SparseLaplacian, coords: np.ndarray | SpectralEmbedding) -> float:
    """Trace of ``coords.T @ L @ coords``.

    ``coords`` holds one row per partition, or one row per connected
    partition in which case the restricted Laplacian is used.

    Returns:
        The quadratic form trace.

    Raises:
        ValueError: When the row count matches neither dimension.

    """
    gamma = coords.array() if isinstance(coords, SpectralEmbedding) else np.asarray(coords, dtype=np.float64)
    if gamma.ndim == 1:
        gamma = gamma[:, np.newaxis]
    if gamma.shape[0] == lap.dimension:
        matrix = lap.matrix
    elif gamma.shape[0] == lap.active.size:
        matrix = lap.submatrix(lap.active)
    else:
        raise ValueError(f"Expected {lap.dimension} or {lap.active.size} rows.")
    return float(np.sum(gamma * (matrix @ gamma)))

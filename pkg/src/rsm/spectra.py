"""Constraint vectors from submatrices and the Gram accumulator.

Each accepted submatrix contributes the right singular vectors belonging to
its smallest singular values. Zero-padded to length n, these are
(approximately) annihilated by the true row-space basis. Only the n x n sum
of their outer products is kept; the n x z matrix of constraints is never
formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Array
from .errors import DegenerateSubmatrix, DimensionMismatch, DomainError, IndexOutOfRange
from .sampler import Submatrix


@dataclass(frozen=True, eq=False)
class ConstraintVector:
    col_indices: Array
    coefficients: Array
    singular_value: float


def sign_fix(vectors: Array) -> Array:
    """Flip columns in place so each one's largest-magnitude entry is positive."""
    if vectors.ndim == 1:
        if vectors[np.argmax(np.abs(vectors))] < 0:
            vectors *= -1.0
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    vectors *= signs
    return vectors


def minor_right_singular(values: Array, count: int) -> tuple[Array, Array]:
    """The ``count`` right singular vectors with smallest singular values.

    Returns ``(sigmas, vectors)`` in ascending singular-value order with the
    vectors as columns. A wide block has ``cols - rows`` implicit zero
    singular values; ties keep the lower SVD index first.
    """
    rows, cols = values.shape
    # a tall block already yields all `cols` right vectors from the thin SVD
    _, s, vt = np.linalg.svd(values, full_matrices=rows < cols)
    sigmas = np.zeros(cols)
    sigmas[: s.size] = s
    order = np.argsort(sigmas, kind="stable")[:count]
    vectors = sign_fix(vt[order].T.copy())
    return sigmas[order], vectors


def small_singular_vectors(S: Submatrix, r: int, count: int | None = None) -> list[ConstraintVector]:
    """Constraint vectors from one submatrix; ``count`` defaults to ``cols - r``."""
    rows, cols = S.shape
    if cols - r < 1:
        raise DegenerateSubmatrix(f"{cols} columns leave no room beyond rank {r}")
    if rows < r + 1:
        raise DegenerateSubmatrix(f"{rows} rows are too few for rank {r}")
    if count is None:
        count = cols - r
    if not 1 <= count <= cols - r:
        raise DomainError(f"count={count} must lie in [1, {cols - r}]")
    sigmas, vectors = minor_right_singular(S.values, count)
    return [
        ConstraintVector(S.col_indices, vectors[:, j], float(sigmas[j]))
        for j in range(count)
    ]


def embed(cv: ConstraintVector, n: int) -> Array:
    idx = np.asarray(cv.col_indices)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexOutOfRange(f"column index out of range [0, {n})")
    xi = np.zeros(n)
    xi[idx] = cv.coefficients
    return xi


@dataclass(eq=False)
class GramAccumulator:
    """Running ``sum xi xi^T`` over constraint vectors, with their count ``z``.

    Single writer. Parallel harvesting keeps one accumulator per worker and
    combines them with ``merge``.
    """

    n: int
    gram: Array = field(default=None, repr=False)  # type: ignore[assignment]
    count: int = 0

    def __post_init__(self) -> None:
        if self.gram is None:
            self.gram = np.zeros((self.n, self.n))
        elif self.gram.shape != (self.n, self.n):
            raise DimensionMismatch(f"gram must be {self.n} x {self.n}")

    def add_block(self, cols: Array, coefficients: Array) -> "GramAccumulator":
        """Add the columns of ``coefficients`` (supported on ``cols``) as constraints.

        Only the ``len(cols)**2`` affected cells are touched.
        """
        coefficients = np.asarray(coefficients, dtype=np.float64)
        if coefficients.ndim == 1:
            coefficients = coefficients[:, None]
        cols = np.asarray(cols, dtype=np.intp)
        if coefficients.shape[0] != cols.size:
            raise DimensionMismatch("coefficients and column indices differ in length")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n):
            raise IndexOutOfRange(f"column index out of range [0, {self.n})")
        self.gram[np.ix_(cols, cols)] += coefficients @ coefficients.T
        self.count += coefficients.shape[1]
        return self

    def add_constraint(self, cv: ConstraintVector) -> "GramAccumulator":
        return self.add_block(cv.col_indices, cv.coefficients)

    @property
    def trace(self) -> float:
        return float(np.trace(self.gram))


def accumulate(G: GramAccumulator, xi: Array | ConstraintVector) -> GramAccumulator:
    """``G += xi xi^T`` and ``z += 1``, restricted to the support of ``xi``."""
    if isinstance(xi, ConstraintVector):
        return G.add_constraint(xi)
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (G.n,):
        raise DimensionMismatch(f"expected a vector of length {G.n}, got {xi.shape}")
    support = np.flatnonzero(xi)
    return G.add_block(support, xi[support])


def merge(G1: GramAccumulator, G2: GramAccumulator) -> GramAccumulator:
    if G1.n != G2.n:
        raise DimensionMismatch(f"cannot merge n={G1.n} with n={G2.n}")
    return GramAccumulator(G1.n, G1.gram + G2.gram, G1.count + G2.count)


def merge_into(target: GramAccumulator, other: GramAccumulator) -> GramAccumulator:
    """In-place ``merge``: add ``other`` onto ``target`` without a fresh n x n array."""
    if target.n != other.n:
        raise DimensionMismatch(f"cannot merge n={target.n} with n={other.n}")
    target.gram += other.gram
    target.count += other.count
    return target

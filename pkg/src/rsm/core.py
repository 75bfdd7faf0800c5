"""Masked matrices, factorizations and the masked error metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np

from .errors import DimensionMismatch, EmptyMask, UnsupportedNorm

Array = np.ndarray

# Values per temporary block when a kernel sweeps the rows of an m x n matrix.
BLOCK_VALUES = 8192


def row_blocks(m: int, n: int, budget: int = BLOCK_VALUES) -> Iterator[slice]:
    step = max(1, budget // max(n, 1))
    for start in range(0, m, step):
        yield slice(start, min(start + step, m))


def _frozen(a: Array) -> Array:
    view = a.view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True, eq=False)
class MaskedMatrix:
    """Observed values plus a boolean mask (``True`` = entry known).

    Hidden cells are stored as NaN. Kernels must select through ``mask``;
    the NaNs are only there so a kernel that forgets to do so poisons its
    result instead of silently using garbage.
    """

    values: Array
    mask: Array

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise DimensionMismatch(
                f"values {values.shape} and mask {mask.shape} must be equal 2-D shapes"
            )
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionMismatch("matrix must have at least one row and one column")
        hidden = ~mask
        if hidden.any() and not np.isnan(values[hidden]).all():
            values = values.copy()
            values[hidden] = np.nan
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @classmethod
    def from_nan(cls, values: Array) -> "MaskedMatrix":
        """Build from an array whose NaN cells are the missing entries."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, ~np.isnan(values))

    @classmethod
    def full(cls, values: Array) -> "MaskedMatrix":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.ones(values.shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def known(self) -> int:
        return int(np.count_nonzero(self.mask))

    def transpose(self) -> "MaskedMatrix":
        return MaskedMatrix(self.values.T, self.mask.T)

    @property
    def T(self) -> "MaskedMatrix":
        return self.transpose()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MaskedMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values[self.mask], other.values[other.mask])
        )


@dataclass(frozen=True, eq=False)
class Factorization:
    """A rank-r pair with ``u @ v.T`` approximating the data."""

    u: Array
    v: Array

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
            raise DimensionMismatch(f"u {u.shape} and v {v.shape} need the same column count")
        r = u.shape[1]
        if r < 1 or r >= min(u.shape[0], v.shape[0]):
            raise DimensionMismatch(
                f"rank {r} must satisfy 1 <= r < min(m, n) = {min(u.shape[0], v.shape[0])}"
            )
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "v", _frozen(v))

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.u.shape[0], self.v.shape[0])

    def transpose(self) -> "Factorization":
        return Factorization(self.v, self.u)

    def reconstruct(self) -> Array:
        return self.u @ self.v.T


@dataclass
class DecompositionReport:
    error: float = float("nan")
    trials_planned: int = 0
    trials_attempted: int = 0
    trials_accepted: int = 0
    constraint_vectors: int = 0
    underdetermined_rows: int = 0
    gram_rank: int = 0
    wall_time: float = 0.0
    # smallest harvested eigenvalues of the Gram matrix, ascending
    gram_eigenvalues: list[float] = field(default_factory=list)
    max_constraint_sigma: float = 0.0
    mean_constraint_sigma: float = 0.0
    # masked objective after every ALS half-step (baseline only)
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def density(M: MaskedMatrix) -> float:
    return M.known / (M.m * M.n)


def _check_dims(M: MaskedMatrix, F: Factorization) -> None:
    if F.shape != M.shape:
        raise DimensionMismatch(f"factorization {F.shape} does not match matrix {M.shape}")


def _masked_sq_residual(M: MaskedMatrix, F: Factorization) -> float:
    total = 0.0
    for rows in row_blocks(M.m, M.n):
        diff = M.values[rows] - F.u[rows] @ F.v.T
        diff[~M.mask[rows]] = 0.0
        total += float(np.einsum("ij,ij->", diff, diff))
    return total


def masked_objective(M: MaskedMatrix, F: Factorization, norm: str = "frobenius") -> float:
    """Un-normalised ``||W * (Y - U V^T)||``; only the Frobenius norm is supported."""
    if norm != "frobenius":
        raise UnsupportedNorm(f"norm {norm!r} is not supported (only 'frobenius')")
    _check_dims(M, F)
    return float(np.sqrt(_masked_sq_residual(M, F)))


def masked_residual_norm(M: MaskedMatrix, F: Factorization) -> float:
    """RMS residual over the known entries.

    Sweeps row blocks so no m x n temporary is ever formed.
    """
    _check_dims(M, F)
    known = M.known
    if known == 0:
        raise EmptyMask("matrix has no known entries")
    return float(np.sqrt(_masked_sq_residual(M, F) / known))

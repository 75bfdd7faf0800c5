"""Random extraction of fully observed submatrices.

Two procedures are provided. ``sample_m1`` draws ``l`` columns and keeps
every row observed on all of them; ``sample_m2`` draws ``k`` rows and keeps
every column observed on all of them. A draw that leaves too few rows (or
columns) is rejected and reported as ``None``; callers count it as an
attempted but not accepted trial.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Array, MaskedMatrix
from .errors import DomainError, IndexOutOfRange


@dataclass(frozen=True)
class TrialRng:
    """Random stream for one trial, a pure function of ``(master_seed, trial_index)``."""

    master_seed: int
    trial_index: int

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.trial_index,))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True, eq=False)
class Submatrix:
    row_indices: Array
    col_indices: Array
    values: Array

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Submatrix):
            return NotImplemented
        return (
            np.array_equal(self.row_indices, other.row_indices)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )


def draw_without_replacement(rng: np.random.Generator, population: int, count: int) -> Array:
    """Uniform ``count``-subset of ``range(population)``, sorted ascending.

    Partial Fisher-Yates over a virtual index array: only displaced slots are
    stored, so time and memory are O(count) regardless of ``population``.
    """
    if not 0 <= count <= population:
        raise DomainError(f"cannot draw {count} of {population}")
    if count == 0:
        return np.empty(0, dtype=np.intp)
    picks = rng.integers(np.arange(count), population)
    displaced: dict[int, int] = {}
    out = np.empty(count, dtype=np.intp)
    for i, j in enumerate(picks.tolist()):
        out[i] = displaced.get(j, j)
        displaced[j] = displaced.get(i, i)
    out.sort()
    return out


def _as_index(indices: Iterable[int], bound: int, what: str) -> Array:
    idx = np.unique(np.asarray(indices, dtype=np.intp))
    if idx.size == 0:
        raise DomainError(f"at least one {what} index is required")
    if idx[0] < 0 or idx[-1] >= bound:
        raise IndexOutOfRange(f"{what} index out of range [0, {bound})")
    return idx


def extract_by_columns(M: MaskedMatrix, cols: Sequence[int], min_rows: int = 1) -> Submatrix | None:
    """Keep the rows fully observed on ``cols``; ``None`` if fewer than ``min_rows``."""
    cols = _as_index(cols, M.n, "column")
    keep = M.mask[:, cols[0]].copy()
    for c in cols[1:]:
        keep &= M.mask[:, c]
    rows = np.flatnonzero(keep)
    if rows.size < max(min_rows, 1):
        return None
    return Submatrix(rows, cols, M.values[np.ix_(rows, cols)])


def extract_by_rows(M: MaskedMatrix, rows: Sequence[int], min_cols: int = 1) -> Submatrix | None:
    """Keep the columns fully observed on ``rows``; ``None`` if fewer than ``min_cols``."""
    rows = _as_index(rows, M.m, "row")
    keep = M.mask[rows].all(axis=0)
    cols = np.flatnonzero(keep)
    if cols.size < max(min_cols, 1):
        return None
    return Submatrix(rows, cols, M.values[np.ix_(rows, cols)])


def sample_m1(M: MaskedMatrix, l: int, rng: TrialRng, min_rows: int = 1) -> Submatrix | None:
    if not 1 <= l <= M.n:
        raise DomainError(f"l={l} must lie in [1, {M.n}]")
    cols = draw_without_replacement(rng.generator(), M.n, l)
    return extract_by_columns(M, cols, min_rows)


def sample_m2(M: MaskedMatrix, k: int, rng: TrialRng, min_cols: int = 1) -> Submatrix | None:
    if not 1 <= k <= M.m:
        raise DomainError(f"k={k} must lie in [1, {M.m}]")
    rows = draw_without_replacement(rng.generator(), M.m, k)
    return extract_by_rows(M, rows, min_cols)


def visited_entry_ledger(trials: Iterable[Submatrix | None], M: MaskedMatrix) -> float:
    """Fraction of known entries covered by at least one accepted submatrix."""
    known = M.known
    if known == 0:
        return 0.0
    visited = np.zeros(M.shape, dtype=bool)
    for sub in trials:
        if sub is not None:
            visited[np.ix_(sub.row_indices, sub.col_indices)] = True
    return int(np.count_nonzero(visited & M.mask)) / known

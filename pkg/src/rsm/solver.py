"""The random-submatrix decomposition pipeline and an ALS baseline.

``decompose`` runs plan -> sample -> harvest -> accumulate -> solve_v ->
solve_u. Trials are identified by their index; trial ``i`` draws from a
stream fixed by ``(seed, i)``, so the set of trials a run uses does not
depend on how many workers share the work.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, Literal

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .core import (
    Array,
    DecompositionReport,
    Factorization,
    MaskedMatrix,
    masked_residual_norm,
)
from .errors import EmptyMask, InsufficientCoverage, InvalidConfig
from .planner import TrialPlan, plan_trials_heuristic, plan_trials_theorem3
from .sampler import TrialRng, sample_m1, sample_m2
from .spectra import ConstraintVector, GramAccumulator, merge_into, sign_fix, small_singular_vectors

log = logging.getLogger(__name__)

ConstraintHook = Callable[[int, ConstraintVector], None]
GramHook = Callable[[GramAccumulator], None]

# Values per temporary block in solve_u; ALS trades memory for speed.
SOLVE_BLOCK_VALUES = 8192
ALS_BLOCK_VALUES = 1 << 18


@dataclass(frozen=True)
class RsmConfig:
    """Knobs of one decomposition run.

    ``trials`` is an explicit count, ``"auto"`` (``multiplier * n``) or
    ``"theorem3"`` (the coverage bound at probability ``epsilon``).
    ``block`` is l (columns, M1) or k (rows, M2) and defaults to ``rank + 1``.
    """

    rank: int
    mode: Literal["m1", "m2"] = "m1"
    block: int | None = None
    vectors_per_trial: int | None = None
    trials: int | str = "auto"
    epsilon: float = 0.99
    multiplier: float = 25
    seed: int = 0
    workers: int = 1
    gram_rank_tol: float = 1e-9
    retry_factor: int = 20

    @property
    def block_size(self) -> int:
        return self.rank + 1 if self.block is None else self.block

    def validate(self, M: MaskedMatrix) -> None:
        r = self.rank
        if r < 1:
            raise InvalidConfig(f"rank must be >= 1, got {r}")
        if r >= min(M.m, M.n):
            raise InvalidConfig(f"rank {r} must be below min(m, n) = {min(M.m, M.n)}")
        if self.mode not in ("m1", "m2"):
            raise InvalidConfig(f"mode must be 'm1' or 'm2', got {self.mode!r}")
        block = self.block_size
        if block <= r:
            raise InvalidConfig(f"block {block} must exceed rank {r}")
        if self.vectors_per_trial is not None:
            limit = block - r if self.mode == "m1" else None
            if self.vectors_per_trial < 1 or (limit is not None and self.vectors_per_trial > limit):
                raise InvalidConfig(
                    f"vectors_per_trial must lie in [1, {limit if limit else 'cols - rank'}]"
                )
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidConfig(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if isinstance(self.trials, str):
            if self.trials not in ("auto", "theorem3"):
                raise InvalidConfig(f"trials must be a count, 'auto' or 'theorem3', got {self.trials!r}")
        elif int(self.trials) < 1:
            raise InvalidConfig(f"trial count must be >= 1, got {self.trials}")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")
        if self.retry_factor < 1:
            raise InvalidConfig("retry_factor must be >= 1")
        if not self.gram_rank_tol > 0:
            raise InvalidConfig("gram_rank_tol must be positive")


@dataclass(frozen=True)
class HarvestStats:
    trials_attempted: int
    trials_accepted: int
    sigma_sum: float
    sigma_max: float


@dataclass(frozen=True)
class SubspaceSolution:
    basis: Array
    # the r + 1 smallest eigenvalues of G, ascending
    eigenvalues: Array
    lambda_max: float
    gram_rank: int


def _oriented(M: MaskedMatrix) -> tuple[MaskedMatrix, bool]:
    if M.m < M.n:
        return M.transpose(), True
    return M, False


def _check_block(M: MaskedMatrix, cfg: RsmConfig) -> None:
    lines = M.n if cfg.mode == "m1" else M.m
    if cfg.block_size > lines:
        raise InvalidConfig(f"block {cfg.block_size} exceeds the {lines} available lines")


def plan_for(M: MaskedMatrix, cfg: RsmConfig) -> TrialPlan:
    """Resolve ``cfg.trials`` against an (already m >= n oriented) matrix."""
    if cfg.trials == "auto":
        return replace(plan_trials_heuristic(M.n, cfg.multiplier), k_or_l=cfg.block_size, mode=cfg.mode)
    if cfg.trials == "theorem3":
        rho = M.known / (M.m * M.n)
        return plan_trials_theorem3(M.m, M.n, rho, cfg.rank, cfg.block_size, cfg.epsilon, cfg.mode)
    return TrialPlan(trials=int(cfg.trials), k_or_l=cfg.block_size, mode=cfg.mode, source="explicit")


def _run_trials(
    M: MaskedMatrix,
    cfg: RsmConfig,
    indices: range,
    acc: GramAccumulator,
    hook: ConstraintHook | None,
) -> tuple[int, float, float]:
    r = cfg.rank
    block = cfg.block_size
    sampler = sample_m1 if cfg.mode == "m1" else sample_m2
    accepted = 0
    sigma_sum = 0.0
    sigma_max = 0.0
    for i in indices:
        sub = sampler(M, block, TrialRng(cfg.seed, i), r + 1)
        if sub is None:
            continue
        count = sub.shape[1] - r
        if cfg.vectors_per_trial is not None:
            count = min(count, cfg.vectors_per_trial)
        cvs = small_singular_vectors(sub, r, count)
        acc.add_block(sub.col_indices, np.column_stack([cv.coefficients for cv in cvs]))
        for cv in cvs:
            sigma_sum += cv.singular_value
            sigma_max = max(sigma_max, cv.singular_value)
            if hook is not None:
                hook(i, cv)
        accepted += 1
    return accepted, sigma_sum, sigma_max


def _split(indices: range, parts: int) -> list[range]:
    size, extra = divmod(len(indices), parts)
    out = []
    start = indices.start
    for w in range(parts):
        stop = start + size + (w < extra)
        out.append(range(start, stop))
        start = stop
    return out


def harvest(
    M: MaskedMatrix,
    cfg: RsmConfig,
    plan: TrialPlan,
    on_constraint: ConstraintHook | None = None,
) -> tuple[GramAccumulator, HarvestStats]:
    """Run trials until ``plan.trials`` are accepted or the retry budget is spent.

    Work proceeds in rounds; each round attempts exactly as many new trial
    indices as acceptances are still missing, so no accepted trial is ever
    discarded and the attempted index range is independent of the worker
    count. Workers own contiguous slices of each round and private
    accumulators, merged in worker order at the end.
    """
    target = plan.trials
    budget = cfg.retry_factor * target
    workers = max(1, cfg.workers)
    accs = [GramAccumulator(M.n) for _ in range(workers)]
    attempted = accepted = 0
    sigma_sum = sigma_max = 0.0

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while accepted < target and attempted < budget:
            batch = range(attempted, attempted + min(target - accepted, budget - attempted))
            if pool is None:
                results = [_run_trials(M, cfg, batch, accs[0], on_constraint)]
            else:
                chunks = _split(batch, workers)
                results = list(pool.map(
                    lambda wc: _run_trials(M, cfg, wc[1], accs[wc[0]], on_constraint),
                    enumerate(chunks),
                ))
            for got, ssum, smax in results:
                accepted += got
                sigma_sum += ssum
                sigma_max = max(sigma_max, smax)
            attempted += len(batch)
    finally:
        if pool is not None:
            pool.shutdown()

    if accepted < target:
        log.warning(
            "retry budget exhausted: %d of %d trials accepted after %d attempts",
            accepted, target, attempted,
        )
    acc = accs[0]
    for other in accs[1:]:
        merge_into(acc, other)
    return acc, HarvestStats(attempted, accepted, sigma_sum, sigma_max)


def _largest_eigenvalue(gram: Array) -> float:
    n = gram.shape[0]
    if not np.any(gram):
        return 0.0
    if n <= 16:
        return float(np.linalg.eigvalsh(gram)[-1])
    # Lanczos keeps the workspace O(n); a dense solve would need a second n x n array.
    v0 = np.random.default_rng(0).standard_normal(n)
    return float(scipy.sparse.linalg.eigsh(
        gram, k=1, which="LA", v0=v0, tol=1e-10, return_eigenvectors=False,
    )[0])


def solve_v(G: GramAccumulator, r: int, tol: float = 1e-9, overwrite: bool = False) -> SubspaceSolution:
    """Orthonormal basis of the r least-constrained directions of ``G``.

    The columns are the eigenvectors for the r smallest eigenvalues. The rank
    gate requires at least ``n - r`` eigenvalues above ``tol * lambda_max``;
    otherwise the constraints have not yet covered the space and
    ``InsufficientCoverage`` is raised. With ``overwrite=True`` the
    accumulator's storage is reused as eigensolver workspace and ``G`` is
    left unusable.
    """
    n = G.n
    if not 1 <= r < n:
        raise InvalidConfig(f"rank {r} must satisfy 1 <= r < n = {n}")
    lam_max = _largest_eigenvalue(G.gram)
    threshold = tol * lam_max
    # G is symmetric, so its transpose is the same matrix in Fortran order
    # and LAPACK can work in place.
    a = G.gram.T if overwrite else G.gram
    evals, evecs = scipy.linalg.eigh(
        a, subset_by_index=[0, r], driver="evr", overwrite_a=overwrite, check_finite=False,
    )
    if overwrite:
        G.gram = None  # type: ignore[assignment]
    if not evals[r] > threshold:
        raise InsufficientCoverage(
            f"Gram matrix has fewer than n - r = {n - r} eigenvalues above "
            f"{tol:g} * lambda_max; raise the trial count (or epsilon)"
        )
    if evals[r] < 10.0 * threshold:
        log.warning("rank gate passed narrowly: lambda_%d / lambda_max = %.3g", r + 1, evals[r] / lam_max)
    basis = sign_fix(np.ascontiguousarray(evecs[:, :r]))
    gram_rank = n - int(np.count_nonzero(evals[:r] <= threshold))
    return SubspaceSolution(basis, evals, lam_max, gram_rank)


@dataclass(frozen=True, eq=False)
class _PackedRows:
    start: int
    counts: Array
    rows: Array
    cols: Array
    slots: Array
    y: Array


def _pack_rows(M: MaskedMatrix, r: int, block_values: int) -> Iterator[_PackedRows]:
    """Observed entries of each row block, with each entry's slot in its row."""
    step = max(1, block_values // (M.n * (r + 1)))
    for start in range(0, M.m, step):
        w = M.mask[start:start + step]
        counts = np.count_nonzero(w, axis=1)
        rr, cc = np.nonzero(w)
        slots = np.arange(rr.size) - np.repeat(np.cumsum(counts) - counts, counts)
        yield _PackedRows(start, counts, rr, cc, slots, M.values[start + rr, cc])


def solve_u(
    M: MaskedMatrix,
    V: Array,
    block_values: int = SOLVE_BLOCK_VALUES,
    packing: Iterable[_PackedRows] | None = None,
) -> tuple[Array, Array]:
    """Row-wise masked least squares ``min_u ||y_J - V_J u||`` for every row.

    Rows are solved in blocks. Each row's observed entries are packed into a
    zero-padded ``[V_J | y_J]`` stack whose Householder R factor holds both the
    triangular system and ``Q^T y_J`` (zero padding leaves the minimiser
    unchanged). Rows with no observations get zeros; rows with fewer than r
    observations or a rank-deficient restricted basis get the minimum-norm
    solution. Both kinds are returned in the flagged index array.
    """
    U, flagged, _ = _solve_rows(M, V, block_values, packing)
    return U, flagged


def _solve_rows(
    M: MaskedMatrix,
    V: Array,
    block_values: int,
    packing: Iterable[_PackedRows] | None,
) -> tuple[Array, Array, float]:
    """``solve_u`` plus the summed squared residual of the solution."""
    V = np.asarray(V, dtype=np.float64)
    m, n = M.shape
    if V.ndim != 2 or V.shape[0] != n or not 1 <= V.shape[1] < n:
        raise InvalidConfig(f"basis shape {V.shape} does not fit {n} columns")
    r = V.shape[1]
    U = np.zeros((m, r))
    flagged: list[int] = []
    sq_residual = 0.0
    if packing is None:
        packing = _pack_rows(M, r, block_values)
    for blk in packing:
        counts = blk.counts
        depth = max(int(counts.max()), r + 1)
        aug = np.zeros((counts.size, depth, r + 1))
        aug[blk.rows, blk.slots, :r] = V[blk.cols]
        aug[blk.rows, blk.slots, r] = blk.y
        R = np.linalg.qr(aug, mode="r")
        diag = np.abs(np.diagonal(R[:, :r, :r], axis1=1, axis2=2))
        good = (counts >= r) & (diag.min(axis=1) > 1e-10 * np.maximum(diag.max(axis=1), 1e-300))
        block = U[blk.start:blk.start + counts.size]
        if good.any():
            block[good] = np.linalg.solve(R[good, :r, :r], R[good, :r, r:])[..., 0]
            # the part of y_J outside span(V_J) is the last diagonal entry
            sq_residual += float(np.sum(R[good, r, r] ** 2))
        for b in np.flatnonzero(~good):
            i = blk.start + int(b)
            flagged.append(i)
            J = np.flatnonzero(M.mask[i])
            if J.size:
                U[i] = np.linalg.lstsq(V[J], M.values[i, J], rcond=None)[0]
                sq_residual += float(np.sum((V[J] @ U[i] - M.values[i, J]) ** 2))
    return U, np.asarray(flagged, dtype=np.intp), sq_residual


def decompose(
    M: MaskedMatrix,
    cfg: RsmConfig,
    *,
    on_constraint: ConstraintHook | None = None,
    on_gram: GramHook | None = None,
) -> tuple[Factorization, DecompositionReport]:
    """Low-rank decomposition ``U V^T`` of a matrix with missing entries.

    ``on_constraint(trial_index, cv)`` sees every harvested constraint and
    ``on_gram(G)`` sees the accumulator just before it is consumed; both
    exist for inspection and testing. With several workers ``on_constraint``
    is called from worker threads.
    """
    t0 = time.perf_counter()
    cfg.validate(M)
    if M.known == 0:
        raise EmptyMask("matrix has no known entries")
    work, transposed = _oriented(M)
    _check_block(work, cfg)
    plan = plan_for(work, cfg)

    acc, stats = harvest(work, cfg, plan, on_constraint)
    report = DecompositionReport(
        trials_attempted=stats.trials_attempted,
        trials_accepted=stats.trials_accepted,
        constraint_vectors=acc.count,
        max_constraint_sigma=stats.sigma_max,
        mean_constraint_sigma=stats.sigma_sum / acc.count if acc.count else 0.0,
        trials_planned=plan.trials,
    )
    if on_gram is not None:
        on_gram(acc)
    try:
        sol = solve_v(acc, cfg.rank, cfg.gram_rank_tol, overwrite=True)
    except InsufficientCoverage as exc:
        report.wall_time = time.perf_counter() - t0
        exc.report = report
        raise
    del acc

    U, flagged = solve_u(work, sol.basis)
    F = Factorization(U, sol.basis)
    if transposed:
        F = F.transpose()
    report.gram_rank = sol.gram_rank
    report.gram_eigenvalues = [float(x) for x in sol.eigenvalues]
    report.underdetermined_rows = int(flagged.size)
    report.error = masked_residual_norm(M, F)
    report.wall_time = time.perf_counter() - t0
    return F, report


def baseline_als(
    M: MaskedMatrix,
    r: int,
    iterations: int = 200,
    seed: int = 0,
) -> tuple[Factorization, DecompositionReport]:
    """Alternating masked least squares from a seeded Gaussian start.

    Each half-step is ``solve_u`` applied to the rows (then, transposed, to
    the columns), so the masked objective never increases; it is recorded
    after every half-step in ``report.history``.
    """
    t0 = time.perf_counter()
    if iterations < 1:
        raise InvalidConfig("iterations must be >= 1")
    if not 1 <= r < min(M.m, M.n):
        raise InvalidConfig(f"rank {r} must satisfy 1 <= r < min(m, n) = {min(M.m, M.n)}")
    if M.known == 0:
        raise EmptyMask("matrix has no known entries")
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((M.n, r))
    Mt = M.transpose()
    row_packing = list(_pack_rows(M, r, ALS_BLOCK_VALUES))
    col_packing = list(_pack_rows(Mt, r, ALS_BLOCK_VALUES))
    history: list[float] = []
    flagged = np.empty(0, dtype=np.intp)
    for _ in range(iterations):
        # each half-step's own residual is the masked objective after it
        U, flagged, sq = _solve_rows(M, V, ALS_BLOCK_VALUES, row_packing)
        history.append(float(np.sqrt(sq)))
        V, _, sq = _solve_rows(Mt, U, ALS_BLOCK_VALUES, col_packing)
        history.append(float(np.sqrt(sq)))
    F = Factorization(U, V)
    report = DecompositionReport(
        error=masked_residual_norm(M, F),
        underdetermined_rows=int(flagged.size),
        history=history,
        wall_time=time.perf_counter() - t0,
    )
    return F, report

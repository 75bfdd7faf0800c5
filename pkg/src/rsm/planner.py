"""Probability bounds and trial-count planning.

Includes the binary KL divergence, the Zubkov-Serov normal sandwich on the
binomial CDF, the coverage trial bound, Eaton's tail bound, and the
recovery-probability lower bound built from it. Every function is a pure
scalar computation on Python floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

from .errors import DomainError, InfeasiblePlan

Mode = Literal["m1", "m2"]
PlanSource = Literal["theorem3_bound", "heuristic", "explicit"]

EATON_CONSTANT = 2.0 * math.e**3 / 9.0
DEFAULT_MULTIPLIER = 25


@dataclass(frozen=True)
class TrialPlan:
    trials: int
    epsilon: float | None = None
    k_or_l: int | None = None
    mode: Mode = "m1"
    source: PlanSource = "explicit"
    # un-rounded bound, only for source == "theorem3_bound"
    bound: float | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise DomainError(f"trial count must be >= 1, got {self.trials}")
        if self.epsilon is not None and not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class SpectrumAssumption:
    singular_values: tuple[float, ...]
    noise_bound: float
    rank: int

    def __post_init__(self) -> None:
        sv = tuple(float(s) for s in self.singular_values)
        object.__setattr__(self, "singular_values", sv)
        if any(s < 0 for s in sv) or any(a < b for a, b in zip(sv, sv[1:])):
            raise DomainError("singular values must be non-negative and non-increasing")
        if not self.noise_bound > 0:
            raise DomainError("noise bound must be positive")
        if not 1 <= self.rank < len(sv):
            raise DomainError(f"rank must satisfy 1 <= r < n = {len(sv)}")


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _check_rho(rho: float) -> None:
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")


def _check_nk(n: int, k: int) -> None:
    if n < 1 or not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n with n >= 1, got n={n}, k={k}")


def kl_divergence_phi(x: float, rho: float) -> float:
    """Binary KL divergence ``x log(x/rho) + (1-x) log((1-x)/(1-rho))``, with 0 log 0 = 0."""
    _check_rho(rho)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    total = 0.0
    if x > 0.0:
        total += x * math.log(x / rho)
    if x < 1.0:
        total += (1.0 - x) * math.log((1.0 - x) / (1.0 - rho))
    return max(total, 0.0)


def _zs_argument(n: int, rho: float, k: int) -> float:
    x = k / n
    sign = (x > rho) - (x < rho)
    return sign * math.sqrt(2.0 * n * kl_divergence_phi(x, rho))


def zubkov_serov_bound(n: int, rho: float, k: int) -> float:
    """``C_{n,rho}(k)``, the normal-CDF sandwich term for the binomial CDF."""
    _check_rho(rho)
    _check_nk(n, k)
    if k == 0:
        return (1.0 - rho) ** n
    if k == n:
        return 1.0 - rho**n
    return normal_cdf(_zs_argument(n, rho, k))


def zubkov_serov_complement(n: int, rho: float, k: int) -> float:
    """``1 - C_{n,rho}(k)`` evaluated without cancellation."""
    _check_rho(rho)
    _check_nk(n, k)
    if k == 0:
        return -math.expm1(n * math.log1p(-rho))
    if k == n:
        return rho**n
    return normal_cdf(-_zs_argument(n, rho, k))


def _log_comb(n: int, i: int) -> float:
    # exact integers are cheap for small n; lgamma keeps large n fast
    if n <= 1024:
        return math.log(math.comb(n, i))
    return math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)


def _log_terms(n: int, rho: float, lo: int, hi: int) -> list[float]:
    lr, lq = math.log(rho), math.log1p(-rho)
    return [_log_comb(n, i) + i * lr + (n - i) * lq for i in range(lo, hi + 1)]


def _logsumexp(terms: Sequence[float]) -> float:
    top = max(terms)
    return top + math.log(math.fsum(math.exp(t - top) for t in terms))


def binomial_cdf(n: int, rho: float, k: int) -> float:
    """``sum_{i=0}^{k} C(n,i) rho^i (1-rho)^(n-i)``, inclusive of ``i = k``."""
    _check_rho(rho)
    _check_nk(n, k)
    if k == n:
        return 1.0
    return min(1.0, math.exp(_logsumexp(_log_terms(n, rho, 0, k))))


def binomial_sf(n: int, rho: float, k: int) -> float:
    """Upper tail ``sum_{i=k+1}^{n}``, i.e. ``1 - binomial_cdf`` without cancellation."""
    _check_rho(rho)
    _check_nk(n, k)
    if k == n:
        return 0.0
    return min(1.0, math.exp(_logsumexp(_log_terms(n, rho, k + 1, n))))


def _transpose_for_mode(m: int, n: int, mode: Mode) -> tuple[int, int]:
    if mode == "m2":
        return m, n
    if mode == "m1":
        return n, m
    raise DomainError(f"unknown mode {mode!r}")


def theorem3_bound(m: int, n: int, rho: float, r: int, k: int, epsilon: float,
                   mode: Mode = "m2") -> float:
    """Real-valued upper bound on the trials needed for epsilon-probable coverage.

    The bound is stated for row-first extraction (``k`` rows, ``n`` columns);
    for column-first extraction the roles of ``m`` and ``n`` swap.
    """
    if not 0.0 < rho <= 1.0:
        raise DomainError(f"rho must lie in (0, 1], got {rho}")
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if r < 1 or k <= r:
        raise DomainError(f"need 1 <= r < k, got r={r}, k={k}")
    rows, cols = _transpose_for_mode(m, n, mode)
    if k > rows:
        raise DomainError(f"block size {k} exceeds the {rows} available lines")
    if r + 2 > cols:
        raise InfeasiblePlan(f"r + 2 = {r + 2} exceeds the {cols} columns available")
    keep = rho**k
    if keep >= 1.0:
        tail = 1.0  # fully observed: every trial keeps every line
    elif keep > 0.0:
        tail = zubkov_serov_complement(cols, keep, r + 2)
    else:
        tail = 0.0
    if tail <= 1e-300:
        raise InfeasiblePlan(
            f"density {rho} is too low for block {k}: a trial almost never keeps r + 2 lines"
        )
    return m * n * rho / (k * (r + 1) * tail) * -math.log1p(-epsilon)


def plan_trials_theorem3(m: int, n: int, rho: float, r: int, k: int, epsilon: float,
                         mode: Mode = "m2") -> TrialPlan:
    bound = theorem3_bound(m, n, rho, r, k, epsilon, mode)
    return TrialPlan(
        trials=max(1, math.ceil(bound)),
        epsilon=epsilon,
        k_or_l=k,
        mode=mode,
        source="theorem3_bound",
        bound=bound,
    )


def plan_trials_heuristic(n: int, multiplier: float = DEFAULT_MULTIPLIER) -> TrialPlan:
    """Fixed multiple of the column count; 15 to 35 is the customary range."""
    if n < 1 or multiplier <= 0:
        raise DomainError("n and multiplier must be positive")
    return TrialPlan(trials=max(1, math.ceil(multiplier * n)), source="heuristic")


def eaton_bound(x: float) -> float:
    """One-sided Eaton tail bound ``min(1, 2e^3/9 * (1 - Phi(x)))``; 1 for ``x <= 0``."""
    if x <= 0.0:
        return 1.0
    return min(1.0, EATON_CONSTANT * normal_cdf(-x))


def theorem2_lower_bound(spec: SpectrumAssumption) -> float:
    """Lower bound on the probability that noise leaves the minor subspace intact."""
    sv = spec.singular_values
    r = spec.rank
    prob = 1.0
    for i in range(r):
        si2 = sv[i] ** 2
        for j in range(r, len(sv)):
            sj2 = sv[j] ** 2
            denom = 2.0 * (si2 + sj2) * spec.noise_bound
            arg = (si2 - sj2) / denom if denom > 0 else 0.0
            prob *= 1.0 - eaton_bound(arg)
            if prob == 0.0:
                return 0.0
    return min(1.0, max(0.0, prob))

from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from oracles import exact_binomial_cdfs, sandwich_gaps
from rsm.errors import DomainError, InfeasiblePlan
from rsm.planner import (
    EATON_CONSTANT,
    SpectrumAssumption,
    TrialPlan,
    binomial_cdf,
    binomial_sf,
    eaton_bound,
    kl_divergence_phi,
    normal_cdf,
    plan_trials_heuristic,
    plan_trials_theorem3,
    theorem2_lower_bound,
    theorem3_bound,
    zubkov_serov_bound,
    zubkov_serov_complement,
)

# Frozen from a 50-digit mpmath evaluation.
PHI_045_04 = 0.0051461087010762
BINOM_20_04_8 = 0.59559872531222
THEOREM3_BOUND = 17336.114378690265
EATON_AT_3 = 0.0060252059


@pytest.mark.parametrize("rho", [0.01, 0.3, 0.5, 0.99])
def test_phi_vanishes_at_rho(rho):
    assert kl_divergence_phi(rho, rho) == pytest.approx(0.0, abs=1e-15)


def test_phi_closed_forms():
    assert kl_divergence_phi(0.0, 0.5) == pytest.approx(math.log(2), rel=1e-14)
    assert kl_divergence_phi(0.0, 0.3) == pytest.approx(-math.log(0.7), rel=1e-14)
    assert kl_divergence_phi(1.0, 0.3) == pytest.approx(-math.log(0.3), rel=1e-14)
    assert kl_divergence_phi(0.45, 0.4) == pytest.approx(PHI_045_04, rel=1e-12)


@given(st.floats(0, 1), st.floats(1e-6, 1 - 1e-6))
def test_phi_nonnegative(x, rho):
    assert kl_divergence_phi(x, rho) >= 0.0


@pytest.mark.parametrize("x, rho", [(-0.1, 0.5), (1.1, 0.5), (0.5, 0.0), (0.5, 1.0)])
def test_phi_domain(x, rho):
    with pytest.raises(DomainError):
        kl_divergence_phi(x, rho)


def test_normal_cdf_matches_scipy():
    for x in [-8.0, -3.0, -0.5, 0.0, 0.1, 2.0, 7.5]:
        assert normal_cdf(x) == pytest.approx(stats.norm.cdf(x), rel=1e-13, abs=1e-14)


def test_zubkov_serov_examples():
    assert zubkov_serov_bound(10, 0.3, 0) == pytest.approx(0.0282475249, rel=1e-9)
    assert zubkov_serov_bound(20, 0.4, 8) == 0.5
    assert zubkov_serov_bound(10, 0.3, 10) == pytest.approx(1 - 5.9049e-6, rel=1e-14)
    assert zubkov_serov_complement(10, 0.3, 10) == pytest.approx(5.9049e-6, rel=1e-12)


def test_binomial_cdf_examples():
    assert binomial_cdf(17, 0.2, 17) == 1.0
    assert binomial_cdf(10, 0.3, 0) == pytest.approx(0.7**10, rel=1e-14)
    assert binomial_cdf(20, 0.4, 8) == pytest.approx(BINOM_20_04_8, rel=1e-12)


@pytest.mark.parametrize("n, rho", [(1, 0.5), (7, 0.05), (20, 0.4), (30, 0.95), (200, 0.01)])
def test_binomial_cdf_against_exact_sum(n, rho):
    exact = exact_binomial_cdfs(n, rho)
    for k in range(n + 1):
        assert binomial_cdf(n, rho, k) == pytest.approx(float(exact[k]), rel=1e-12)
        assert binomial_sf(n, rho, k) == pytest.approx(float(1 - exact[k]), rel=1e-12, abs=1e-300)


def test_binomial_cdf_large_n_no_underflow():
    # individual terms near k = 0 underflow a plain float product
    value = binomial_cdf(10_000, 0.5, 4_800)
    assert 0.0 < value < 1.0
    assert value == pytest.approx(stats.binom.cdf(4_800, 10_000, 0.5), rel=1e-9)


def test_sandwich_holds_with_equality_only_at_ends():
    for n in range(2, 31):
        for rho in [round(0.1 * i, 1) for i in range(1, 10)]:
            for k, lo, hi in sandwich_gaps(n, rho):
                assert lo >= -1e-10 and hi >= -1e-10, (n, rho, k)
                assert (abs(lo) <= 1e-10) == (k == 0), (n, rho, k, lo)
                assert (abs(hi) <= 1e-10) == (k == n - 1), (n, rho, k, hi)


@given(st.integers(1, 60), st.floats(0.01, 0.99))
def test_zubkov_serov_nondecreasing_in_k(n, rho):
    values = [zubkov_serov_bound(n, rho, k) for k in range(n + 1)]
    assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


def test_zubkov_serov_domain():
    with pytest.raises(DomainError):
        zubkov_serov_bound(10, 0.3, 11)
    with pytest.raises(DomainError):
        binomial_cdf(10, 1.5, 3)


def test_theorem3_reference_value():
    plan = plan_trials_theorem3(1000, 100, 0.6, 3, 4, 0.99)
    assert plan.bound == pytest.approx(THEOREM3_BOUND, rel=1e-10)
    assert plan.trials == 17337
    assert plan.source == "theorem3_bound" and plan.epsilon == 0.99 and plan.k_or_l == 4


def test_theorem3_tiny_epsilon_gives_one_trial():
    assert plan_trials_theorem3(1000, 100, 0.6, 3, 4, 1e-12).trials == 1


def test_theorem3_epsilon_ratio_is_exactly_log_ratio():
    lo = theorem3_bound(1000, 100, 0.6, 3, 4, 0.9)
    hi = theorem3_bound(1000, 100, 0.6, 3, 4, 0.99)
    assert hi / lo == pytest.approx(2.0, rel=1e-12)


@given(st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_theorem3_proportional_to_log_term(eps, step):
    a = theorem3_bound(500, 60, 0.5, 2, 3, eps)
    b = theorem3_bound(500, 60, 0.5, 2, 3, eps + step)
    assert b > a
    assert b / a == pytest.approx(math.log1p(-(eps + step)) / math.log1p(-eps), rel=1e-12)


def test_theorem3_column_first_swaps_roles():
    assert theorem3_bound(1000, 100, 0.6, 3, 4, 0.99, mode="m1") == pytest.approx(
        theorem3_bound(100, 1000, 0.6, 3, 4, 0.99, mode="m2"), rel=1e-14
    )


def test_theorem3_infeasible_cases():
    with pytest.raises(InfeasiblePlan):
        plan_trials_theorem3(100, 4, 0.6, 3, 4, 0.9)
    with pytest.raises(InfeasiblePlan):
        plan_trials_theorem3(10_000, 10, 0.01, 3, 200, 0.9)
    with pytest.raises(DomainError):
        plan_trials_theorem3(1000, 100, 0.6, 3, 3, 0.9)
    with pytest.raises(DomainError):
        plan_trials_theorem3(1000, 100, 0.6, 3, 4, 1.0)


@pytest.mark.parametrize("n, mult, expected", [(1024, 15, 15360), (100, 25, 2500), (72, 35, 2520)])
def test_heuristic_trials(n, mult, expected):
    plan = plan_trials_heuristic(n, mult)
    assert plan.trials == expected and plan.source == "heuristic"


def test_heuristic_default_multiplier():
    assert plan_trials_heuristic(40).trials == 1000


def test_trial_plan_validation():
    with pytest.raises(DomainError):
        TrialPlan(trials=0)
    with pytest.raises(DomainError):
        TrialPlan(trials=3, epsilon=1.0)


def test_eaton_examples():
    assert eaton_bound(0.0) == 1.0
    assert eaton_bound(-2.0) == 1.0
    assert EATON_CONSTANT * stats.norm.sf(0.1) > 2.0
    assert eaton_bound(0.1) == 1.0
    assert eaton_bound(3.0) == pytest.approx(EATON_AT_3, rel=1e-8)
    assert eaton_bound(3.0) == pytest.approx(2 * math.e**3 / 9 * stats.norm.sf(3.0), rel=1e-12)


@given(st.floats(-10, 40), st.floats(0, 5))
def test_eaton_nonincreasing(x, dx):
    assert eaton_bound(x + dx) <= eaton_bound(x)


def _theorem2_oracle(sv, r, psi):
    prob = 1.0
    for i in range(r):
        for j in range(r, len(sv)):
            x = (sv[i] ** 2 - sv[j] ** 2) / (2 * (sv[i] ** 2 + sv[j] ** 2) * psi)
            be = 1.0 if x <= 0 else min(1.0, 2 * math.e**3 / 9 * stats.norm.sf(x))
            prob *= 1 - be
    return prob


def test_theorem2_noiseless_limit():
    assert theorem2_lower_bound(SpectrumAssumption((10, 1, 0, 0), 1e-6, 1)) == 1.0


def test_theorem2_tied_spectrum_gives_zero():
    assert theorem2_lower_bound(SpectrumAssumption((3, 2, 2, 1), 0.01, 2)) == 0.0


def test_theorem2_reference_spectrum():
    # arguments are 99/202, 1/2, 1/2; Eaton saturates on all three
    spec = SpectrumAssumption((10, 1, 0, 0), 1.0, 1)
    assert eaton_bound(99 / 202) == 1.0
    assert theorem2_lower_bound(spec) == 0.0
    tighter = SpectrumAssumption((10, 1, 0, 0), 0.1, 1)
    assert theorem2_lower_bound(tighter) == pytest.approx(_theorem2_oracle((10, 1, 0, 0), 1, 0.1), rel=1e-12)
    assert 0.99999 < theorem2_lower_bound(tighter) < 1.0


def test_theorem2_nonincreasing_in_noise_bound():
    sv = (9.0, 5.0, 2.0, 1.0, 0.5, 0.1)
    values = [theorem2_lower_bound(SpectrumAssumption(sv, psi, 2)) for psi in [0.01 * 1.3**i for i in range(30)]]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert values[0] > 0.99 and values[-1] == 0.0


def test_spectrum_assumption_validation():
    with pytest.raises(DomainError):
        SpectrumAssumption((1, 2, 0), 1.0, 1)
    with pytest.raises(DomainError):
        SpectrumAssumption((2, 1, 0), 0.0, 1)
    with pytest.raises(DomainError):
        SpectrumAssumption((2, 1, 0), 1.0, 3)

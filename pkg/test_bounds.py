"""
Tests for the closed-form bounds, regime checks and the DP-violation witness.
"""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracing_topk.core.bounds import (
    RHO_NOISY_MAX,
    Validity,
    anticonc_lower,
    binomial_upper_tail,
    chernoff_bounds,
    constant_formulas,
    count_above_expectation,
    dp_witness,
    exact_failure_bound,
    exact_regime_check,
    hoeffding_tail,
    noisy_constants,
    noisy_failure_bounds,
    noisy_sample_size,
    positive_alpha_scale,
    topk_bias_gamma,
)
from tracing_topk.core.errors import InvalidParameterError, InvalidRegimeError


# ---------------------------
# Concentration inequalities
# ---------------------------

def test_hoeffding_examples():
    assert hoeffding_tail(1, 2) == pytest.approx(math.exp(-1))
    assert hoeffding_tail(1e-12, 5) == pytest.approx(1.0)
    assert hoeffding_tail(0.5, 24) == pytest.approx(0.049787, abs=1e-6)


def test_hoeffding_rejects_non_positive_nu():
    with pytest.raises(InvalidParameterError):
        hoeffding_tail(0, 3)


@given(st.floats(0.01, 3), st.floats(0.01, 3), st.integers(1, 200))
@settings(max_examples=100)
def test_hoeffding_decreasing_in_nu_and_n(a, b, n):
    lo, hi = sorted((a, b))
    assert hoeffding_tail(hi, n) <= hoeffding_tail(lo, n)
    assert hoeffding_tail(lo, n + 1) <= hoeffding_tail(lo, n)


def test_chernoff_examples():
    assert chernoff_bounds(1, 3).upper_tail == pytest.approx(math.exp(-1))
    assert chernoff_bounds(0.5, 8).lower_tail == pytest.approx(math.exp(-1))
    assert chernoff_bounds(1.5, 2).lower_tail is None


def test_chernoff_rejects_non_positive_mean():
    with pytest.raises(InvalidParameterError):
        chernoff_bounds(0.5, 0)


@given(st.floats(0.01, 0.99), st.floats(0.1, 50), st.floats(0.1, 50))
@settings(max_examples=100)
def test_chernoff_lower_tail_decreasing_in_mean(nu, a, b):
    lo, hi = sorted((a, b))
    assert chernoff_bounds(nu, hi).lower_tail <= chernoff_bounds(nu, lo).lower_tail


def test_anticoncentration_examples_are_unverified():
    first = anticonc_lower(1, 1, 1)
    assert first.value == pytest.approx(math.exp(-1))
    assert first.validity is Validity.UNVERIFIED
    assert anticonc_lower(1, 0.4912, 24).value == pytest.approx(0.003057, abs=5e-6)
    assert anticonc_lower(3, 0.5, 8).value == pytest.approx(0.018316, abs=1e-6)


def test_binomial_upper_tail_is_exact():
    assert binomial_upper_tail(24, 18) == Fraction(190051, 2 ** 24)
    assert binomial_upper_tail(24, 0) == 1
    assert binomial_upper_tail(24, 25) == 0


def test_count_above_expectation_strict_and_inclusive():
    # q_j > 1/2 needs at least 19 of 24 entries at +1; q_j >= 1/2 needs 18
    assert count_above_expectation(24, 65536, 0.5) == pytest.approx(55455 / 256)
    assert count_above_expectation(24, 65536, 0.5, strict=False) == pytest.approx(190051 / 256)


# ---------------------------
# Exact regime
# ---------------------------

def test_exact_regime_desk_configuration():
    regime = exact_regime_check(24, 65536, 100, 0.05)
    assert regime.lhs == pytest.approx(579.2, abs=0.1)
    assert regime.rhs == pytest.approx(575.2, abs=0.1)
    assert regime.satisfied
    assert regime.gamma == pytest.approx(0.4912, abs=1e-4)
    assert regime.failure_bound == pytest.approx(0.05 + math.exp(-25))
    assert regime.advisories


def test_exact_regime_large_n_fails():
    assert not exact_regime_check(1000, 65536, 100, 0.05).satisfied


def test_exact_regime_boundary_is_rejected():
    with pytest.raises(InvalidRegimeError):
        exact_regime_check(1, 20, 10, 0.5)


@given(st.integers(1, 200), st.integers(1, 200), st.integers(3, 40), st.floats(1e-4, 0.9))
@settings(max_examples=200)
def test_satisfied_regime_puts_the_margin_above_tau(n, k, ratio, rho):
    d = 2 * k * ratio
    regime = exact_regime_check(n, d, k, rho)
    if regime.satisfied:
        assert regime.tau_c >= regime.tau * (1 - 1e-9)


def test_topk_bias_gamma_generalizes_with_beta():
    assert topk_bias_gamma(24, 65536, 100) == pytest.approx(exact_regime_check(24, 65536, 100, 0.05).gamma)
    assert topk_bias_gamma(24, 65536, 100, beta=0.5) > topk_bias_gamma(24, 65536, 100, beta=1.0)


def test_exact_failure_bound_clamps():
    assert exact_failure_bound(0.9, 1) == 1.0


# ---------------------------
# Approximate regime
# ---------------------------

def test_noisy_constants_reject_the_boundary():
    with pytest.raises(InvalidParameterError):
        noisy_constants(math.exp(-2), 24, 1000, 10)


def test_noisy_constant_c3_at_half():
    consts = constant_formulas(math.exp(-2) / 2)
    assert consts.c == pytest.approx(0.5)
    assert consts.log_inv_rho == pytest.approx(2 + math.log(2))
    assert consts.C3 == pytest.approx(1.3826, abs=1e-3)


def test_constant_formulas_at_c_equal_one():
    consts = constant_formulas(math.exp(-2))
    assert consts.c == pytest.approx(1.0)
    assert consts.C3 == pytest.approx(4 / 3, rel=1e-12)


def test_c5_positive_on_log_grid():
    for rho in np.geomspace(1e-12, RHO_NOISY_MAX * (1 - 1e-9), 100):
        consts = noisy_constants(float(rho), 100, 1000, 10)
        assert consts.C5 > 0
        assert consts.d_lambda <= 2 * consts.d
        assert consts.tau_c <= consts.k


@pytest.mark.parametrize("rho,d,k", [(0.1, 65536, 100), (0.01, 1000, 10), (1e-4, 10 ** 6, 50)])
def test_tau_c_equals_tau_at_the_sample_size(rho, d, k):
    n = noisy_sample_size(rho, d, k)
    consts = noisy_constants(rho, n, d, k)
    assert consts.tau_c == pytest.approx(consts.tau, rel=1e-9)
    assert consts.sample_size_satisfied


def test_noisy_constants_report_derived_checks():
    consts = noisy_constants(0.05, 24, 65536, 100)
    assert consts.completeness_fraction == pytest.approx(1 - math.e ** 2 * 0.05)
    assert consts.beta == pytest.approx(consts.c / (16 * -math.log(0.05)))
    assert consts.union_bound_satisfied == (consts.union_bound_slack >= 0)
    assert consts.failure_bounds == noisy_failure_bounds(0.05, 100)


def test_noisy_failure_bounds_both_forms():
    overall, completeness = noisy_failure_bounds(0.01, 60)
    assert overall == pytest.approx(0.02 + 2 * math.exp(-10))
    assert completeness == pytest.approx(0.02 + math.exp(-15) + math.exp(-10))


def test_positive_alpha_scale_shrinks_with_budget():
    assert positive_alpha_scale(1000, 1000, 10, 8.0, 1e-6, 0.1) < positive_alpha_scale(1000, 1000, 10, 1.0, 1e-6, 0.1)


# ---------------------------
# DP-violation witness
# ---------------------------

def test_witness_examples():
    assert dp_witness(0.25, 0.25, 0).epsilon_max == pytest.approx(math.log(2), abs=1e-12)
    assert dp_witness(0, 0, 0.5).epsilon_max == math.inf
    assert dp_witness(0.05, 0.05, 0.01).epsilon_max == pytest.approx(math.log(0.89 / 0.05))


def test_witness_undefined_when_margin_too_small():
    w = dp_witness(0.4, 0.3, 0.0)
    assert w.epsilon_max is None
    assert not w.defined
    assert not w.rules_out(0.0)


def test_witness_rejects_out_of_range_inputs():
    with pytest.raises(InvalidParameterError):
        dp_witness(1.2, 0, 0)


@given(st.floats(0.01, 0.3), st.floats(0, 0.3), st.floats(0, 0.2), st.floats(1e-4, 0.05))
@settings(max_examples=200)
def test_witness_strictly_decreasing(rho, m, delta, step):
    base = dp_witness(rho, m, delta)
    if base.epsilon_max is None:
        return
    for bumped in (dp_witness(rho + step, m, delta), dp_witness(rho, m + step, delta), dp_witness(rho, m, delta + step)):
        assert bumped.epsilon_max is None or bumped.epsilon_max < base.epsilon_max

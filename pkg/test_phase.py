"""
Tests for phase functions and the binomial phase decomposition.
"""
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from errors import DegenerateFitError, InvalidArgumentError, UndefinedPhaseError
from phase import (BinomialDecompCoeffs, binomial_phase_lhs, binomial_phase_rhs, fit_binomial_coeffs,
                   phase, sample_pairs, two_factor_phase_rhs, validate_identity)

nonzero_complex = st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3,
                                     allow_nan=False, allow_infinity=False)


def test_phase_values():
    assert phase(1.0) == pytest.approx(1.0)
    assert phase(1j) == pytest.approx(-1.0)
    assert phase(1 + 1j) == pytest.approx(-1j)
    np.testing.assert_allclose(phase(np.array([2.0, -3j])), [1.0, -1.0])


def test_phase_undefined_at_origin():
    with pytest.raises(UndefinedPhaseError):
        phase(0.0)
    with pytest.raises(UndefinedPhaseError):
        phase(np.array([1.0, 0.0]))


@settings(max_examples=100, deadline=None)
@given(a=nonzero_complex, b=nonzero_complex)
def test_phase_is_unimodular_and_multiplicative(a, b):
    assert abs(phase(a)) == pytest.approx(1.0, abs=1e-12)
    assert phase(a * b) == pytest.approx(phase(a) * phase(b), abs=1e-10)


def test_degree_one_collapses_on_positive_reals():
    """All phases equal 1 on the positive reals, so the right side is 1."""
    rhs = binomial_phase_rhs(BinomialDecompCoeffs.exact_n1(), 0.3, 0.8)
    assert rhs == pytest.approx(1.0, abs=1e-9)


def test_degree_one_identity_holds():
    coeffs = BinomialDecompCoeffs.exact_n1()
    pairs = sample_pairs(20, np.random.default_rng(5))
    report = validate_identity(coeffs, pairs)
    assert report["pair_count"] == 20
    assert report["max_error"] <= 1e-6
    assert report["max_modulus_error"] <= 1e-6


def test_fit_recovers_degree_one_constants():
    coeffs = fit_binomial_coeffs(1, 200, seed=42, holdout_count=50)
    np.testing.assert_allclose(coeffs.c, [[-2.0, 1.0]], atol=1e-6)
    assert coeffs.fit_residual <= 1e-6
    assert coeffs.seed == 42
    again = BinomialDecompCoeffs.from_json(coeffs.to_json())
    np.testing.assert_array_equal(again.c, coeffs.c)


def test_fit_on_positive_reals_is_degenerate():
    samples = [(0.3, 0.8), (0.5, 0.9), (0.2, 1.5), (0.7, 0.1), (0.4, 1.1)] * 5
    with pytest.raises(DegenerateFitError):
        fit_binomial_coeffs(1, len(samples), seed=0, samples=samples)


def test_fit_argument_checks():
    with pytest.raises(InvalidArgumentError):
        fit_binomial_coeffs(2, 79, seed=0)
    with pytest.raises(InvalidArgumentError):
        fit_binomial_coeffs(7, 10_000, seed=0)
    with pytest.raises(UndefinedPhaseError):
        fit_binomial_coeffs(1, 20, seed=0, samples=[(0.3, 0.3)] * 20)


def test_two_factor_phase():
    coeffs = BinomialDecompCoeffs.exact_n1()
    w1, w2, w = 0.2, -0.3j, 0.5 + 0.5j
    assert two_factor_phase_rhs(coeffs, w1, w2, w) == pytest.approx(phase((w - w1) * (w - w2)), abs=1e-7)
    assert binomial_phase_lhs(1, w2 - w1, w - w1) == pytest.approx(phase((w - w1) * (w - w2)))


def test_two_factor_needs_degree_one():
    coeffs = BinomialDecompCoeffs(2, np.zeros((2, 3)), 0.0)
    with pytest.raises(InvalidArgumentError):
        two_factor_phase_rhs(coeffs, 0.1, 0.2, 0.5)


def test_sample_pairs_respect_constraints():
    for w0, w in sample_pairs(200, np.random.default_rng(1)):
        assert 0.1 <= abs(w0) <= 1.0
        assert 0.05 <= abs(w) <= 2.0
        assert abs(w - w0) >= 0.05


@pytest.mark.slow
def test_fit_degree_two_shape():
    coeffs = fit_binomial_coeffs(2, 80, seed=3)
    assert coeffs.c.shape == (2, 3)
    assert np.isfinite(coeffs.fit_residual)


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2, 3])
def test_fitted_identity_holds_on_held_out_pairs(n):
    coeffs = fit_binomial_coeffs(n, 200, seed=11, holdout_count=1000)
    assert coeffs.fit_residual <= 1e-4
    fresh = sample_pairs(1000, np.random.default_rng(100 + n))
    report = validate_identity(coeffs, fresh)
    assert report["pair_count"] == 1000
    assert report["max_error"] <= 1e-4

"""
Tests for the polar disc grid, sampling and finite-difference derivatives.
"""
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from errors import EvaluationError, InvalidArgumentError
from grid import (GridFunction, CircleFunction, dbar, dz, integrate, interior_mask,
                  lipschitz_estimate, make_polar_grid, ring_trace, sample)

finite_complex = st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False)


def interior_error(u: GridFunction, expected) -> float:
    mask = interior_mask(u.grid)
    reference = expected(u.grid.nodes)
    return float(np.max(np.abs(u.values - reference)[mask]))


def test_small_grid_layout():
    """A 4x8 grid has 32 distinct interior nodes and weights summing to pi."""
    grid = make_polar_grid(4, 8)
    assert grid.node_count == 32
    assert len(np.unique(np.round(grid.nodes, 12))) == 32
    assert np.all(np.abs(grid.nodes) < 1.0)
    assert np.all(np.abs(grid.nodes) > 0.0)
    assert grid.quadrature_weights.sum() == pytest.approx(np.pi, abs=1e-12)


def test_interior_mask_bands():
    grid = make_polar_grid(8, 16)
    assert interior_mask(grid).sum() == 7 * 16
    banded = interior_mask(grid, band=3)
    assert banded.sum() == 5 * 16
    assert np.max(np.abs(grid.nodes[banded])) == pytest.approx(grid.radii[4])
    with pytest.raises(InvalidArgumentError):
        interior_mask(grid, band=8)


def test_grid_below_minimum_is_rejected():
    with pytest.raises(InvalidArgumentError):
        make_polar_grid(2, 8)
    with pytest.raises(InvalidArgumentError):
        make_polar_grid(8, 4)


def test_sample_nonfinite_raises_with_node():
    """A pole at a node is reported with that node."""
    grid = make_polar_grid(8, 16)
    pole = grid.nodes[5]
    with pytest.raises(EvaluationError) as info:
        sample(lambda w: 1.0 / (w - pole), grid)
    assert info.value.details["node"] == pole


def test_sample_accepts_scalar_only_callables():
    grid = make_polar_grid(4, 8)
    u = sample(lambda w: complex(w) ** 2, grid)
    np.testing.assert_allclose(u.values, grid.nodes ** 2)


def test_grid_function_rejects_wrong_length():
    grid = make_polar_grid(4, 8)
    with pytest.raises(InvalidArgumentError):
        GridFunction(grid, np.zeros(10))


def test_dbar_of_conjugate_and_identity():
    """d/dwbar of wbar is 1 and of w is 0, up to the angular truncation error."""
    grid = make_polar_grid(16, 64)
    assert interior_error(dbar(sample(np.conj, grid)), lambda w: np.ones_like(w)) < 2e-3
    assert interior_error(dbar(sample(lambda w: w, grid)), lambda w: np.zeros_like(w)) < 2e-3
    assert interior_error(dz(sample(lambda w: w, grid)), lambda w: np.ones_like(w)) < 2e-3


def test_dbar_of_modulus_squared_is_exact():
    grid = make_polar_grid(16, 64)
    u = sample(lambda w: np.abs(w) ** 2, grid)
    assert interior_error(dbar(u), lambda w: w) < 1e-10


def test_dbar_second_order_convergence():
    """Doubling the angular resolution cuts the error on wbar^2 by about four."""
    errors = []
    for radial, angular in [(16, 64), (32, 128)]:
        grid = make_polar_grid(radial, angular)
        u = sample(lambda w: np.conj(w) ** 2, grid)
        errors.append(interior_error(dbar(u), lambda w: 2.0 * np.conj(w)))
    assert errors[0] / errors[1] > 3.5


def test_derivatives_need_enough_rings():
    grid = make_polar_grid(4, 16)
    with pytest.raises(InvalidArgumentError):
        dbar(sample(lambda w: w, grid))


@settings(max_examples=25, deadline=None)
@given(alpha=finite_complex, beta=finite_complex)
def test_dbar_is_linear(alpha, beta):
    grid = make_polar_grid(8, 32)
    u = sample(lambda w: np.conj(w) * w ** 2, grid)
    v = sample(lambda w: np.exp(np.conj(w)), grid)
    combined = dbar(u.with_values(alpha * u.values + beta * v.values)).values
    separate = alpha * dbar(u).values + beta * dbar(v).values
    scale = 1.0 + abs(alpha) + abs(beta)
    assert np.max(np.abs(combined - separate)) < 1e-9 * scale


def test_integrate_constant_and_radial():
    grid = make_polar_grid(16, 32)
    assert integrate(sample(lambda w: 1.0, grid)) == pytest.approx(np.pi, abs=1e-12)
    # midpoint-in-area rule on |w|^2 is exact up to O(h^2)
    assert abs(integrate(sample(lambda w: np.abs(w) ** 2, grid)) - np.pi / 2) < 1e-2


def test_ring_trace_and_circle_function():
    grid = make_polar_grid(8, 16)
    u = sample(lambda w: w, grid)
    trace = ring_trace(u)
    np.testing.assert_allclose(trace.values, grid.radii[-1] * np.exp(1j * grid.angles))
    circle = CircleFunction.from_function(lambda z: z ** 2, 16)
    np.testing.assert_allclose(circle.values, circle.points ** 2)
    assert list(circle.to_frame().columns) == ["theta", "re_val", "im_val"]


def test_lipschitz_estimate_of_identity():
    grid = make_polar_grid(8, 32)
    assert lipschitz_estimate(sample(lambda w: w, grid)) == pytest.approx(1.0, abs=1e-12)
    assert lipschitz_estimate(sample(lambda w: 3.0 * np.conj(w), grid)) == pytest.approx(3.0, abs=1e-12)

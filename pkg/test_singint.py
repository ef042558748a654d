"""
Tests for the Cauchy-Green, modified Cauchy-Green and circle Cauchy operators.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from errors import InvalidArgumentError, OutOfDomainError
from grid import CircleFunction, dbar, interior_mask, lipschitz_estimate, make_polar_grid, sample
from phase import phase
from singint import (CorrectionRule, KernelQuadratureConfig, cauchy_circle, cauchy_circle_grid,
                     cauchy_green, cauchy_green_grid, modified_boundary_trace,
                     modified_cauchy_green, modified_cauchy_green_grid,
                     phase_transform_closed_form, phase_transform_evaluation)
from vekua import holder_seminorm

POINTS = [0.3 + 0.2j, -0.5j, 0.9, 0.0, 1.0]


def test_transform_of_zero_is_zero():
    grid = make_polar_grid(8, 16)
    zero = sample(lambda w: 0.0, grid)
    assert cauchy_green(zero, 0.4) == 0
    assert np.all(cauchy_green_grid(zero).values == 0)


def test_transform_of_one_is_conjugate():
    """T1 = conj(w) everywhere in the closed disc."""
    grid = make_polar_grid(16, 32)
    one = sample(lambda w: 1.0, grid)
    for w in POINTS:
        assert cauchy_green(one, w) == pytest.approx(np.conj(w), abs=1e-12)
    np.testing.assert_allclose(cauchy_green_grid(one).values, np.conj(grid.nodes), atol=1e-12)


def test_point_and_grid_evaluation_agree():
    grid = make_polar_grid(16, 32)
    u = sample(lambda w: np.exp(w) * np.conj(w) + 0.2 * w, grid)
    on_grid = cauchy_green_grid(u)
    for k in (0, 17, 200, grid.node_count - 1):
        assert cauchy_green(u, grid.nodes[k]) == pytest.approx(on_grid.values[k], abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_transform_of_centred_phase_power(n):
    """T of phase(tau)^n equals conj(w)^(n+1) / ((n+1) w^n) exactly for this rule."""
    grid = make_polar_grid(16, 32)
    u = sample(lambda w: phase(w) ** n, grid)
    for w in [0.3 + 0.2j, -0.5j, 0.9]:
        expected = phase_transform_closed_form(n, 0.0, w)
        assert cauchy_green(u, w) == pytest.approx(expected, abs=1e-10)


def test_phase_transform_closed_form_examples():
    assert phase_transform_closed_form(1, 0.0, 0.5) == pytest.approx(0.25)
    assert phase_transform_closed_form(2, 0.0, 0.5j) == pytest.approx(-1j / 6)
    assert phase_transform_closed_form(3, 0.2, 0.2) == 0
    w0, w = 0.1 - 0.2j, -0.4 + 0.3j
    for n in range(1, 5):
        assert abs(phase_transform_closed_form(n, w0, w)) == pytest.approx(abs(w - w0) / (n + 1))


def test_phase_transform_flags_removable_point():
    at_center = phase_transform_evaluation(2, 0.2 - 0.1j, 0.2 - 0.1j)
    assert at_center == {"value": 0j, "removable_point": True}
    nearby = phase_transform_evaluation(2, 0.2 - 0.1j, 0.5)
    assert not nearby["removable_point"]
    assert nearby["value"] == phase_transform_closed_form(2, 0.2 - 0.1j, 0.5)


def test_phase_transform_closed_form_arguments():
    with pytest.raises(InvalidArgumentError):
        phase_transform_closed_form(0, 0.0, 0.5)
    with pytest.raises(OutOfDomainError):
        phase_transform_closed_form(1, 1.2, 0.5)
    with pytest.raises(OutOfDomainError):
        phase_transform_closed_form(1, 0.0, 1.5)


def test_out_of_domain_points_are_rejected():
    grid = make_polar_grid(8, 16)
    one = sample(lambda w: 1.0, grid)
    with pytest.raises(OutOfDomainError):
        cauchy_green(one, 1.5)
    with pytest.raises(OutOfDomainError):
        modified_cauchy_green(one, 2j)
    with pytest.raises(OutOfDomainError):
        cauchy_circle(CircleFunction(np.ones(16)), 1.0)


def test_dbar_inverts_transform():
    """dbar T conj(tau) = conj(w) on interior nodes."""
    grid = make_polar_grid(64, 128)
    u = sample(np.conj, grid)
    recovered = dbar(cauchy_green_grid(u))
    mask = interior_mask(grid)
    assert np.max(np.abs(recovered.values - u.values)[mask]) <= 2e-2


def test_transform_stays_bounded():
    """sup|Tu| <= 2.5 sup|u| on seeded smooth densities."""
    grid = make_polar_grid(32, 64)
    rng = np.random.default_rng(11)
    for _ in range(5):
        coefs = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        raw = sample(lambda w: sum(coefs[p, q] * w ** p * np.conj(w) ** q
                                   for p in range(4) for q in range(4 - p)), grid)
        u = raw.with_values(raw.values / raw.sup_norm())
        assert cauchy_green_grid(u).sup_norm() <= 2.5


def test_cauchy_green_reconstruction():
    """g = Kg + T(dbar g) for g = conj(w) w^2 + w, away from the circle."""
    grid = make_polar_grid(64, 128)
    g = lambda w: np.conj(w) * w ** 2 + w
    boundary = CircleFunction.from_function(g, 128)
    rebuilt = cauchy_circle_grid(boundary, grid).values + cauchy_green_grid(sample(lambda w: w ** 2, grid)).values
    inside = np.abs(grid.nodes) <= 0.9
    assert np.max(np.abs(rebuilt - g(grid.nodes))[inside]) <= 2e-2


def test_circle_cauchy_of_monomials():
    circle = lambda f: CircleFunction.from_function(f, 64)
    for w in [0.0, 0.3 + 0.4j, -0.7]:
        assert cauchy_circle(circle(lambda z: np.ones_like(z)), w) == pytest.approx(1.0, abs=1e-12)
        for k in (1, 2, 3):
            assert cauchy_circle(circle(lambda z: z ** k), w) == pytest.approx(w ** k, abs=1e-10)
        assert cauchy_circle(circle(lambda z: 1.0 / z), w) == pytest.approx(0.0, abs=1e-8)


def test_modified_transform_of_one():
    """T1 1 = conj(w) - w: imaginary on the circle, dbar equal to 1."""
    grid = make_polar_grid(16, 64)
    one = sample(lambda w: 1.0, grid)
    t1 = modified_cauchy_green_grid(one)
    np.testing.assert_allclose(t1.values, np.conj(grid.nodes) - grid.nodes, atol=1e-12)
    assert modified_cauchy_green(one, 0.3j) == pytest.approx(-0.6j, abs=1e-12)
    trace = modified_boundary_trace(one)
    assert np.max(np.abs(trace.values.real)) <= 1e-10
    mask = interior_mask(grid)
    assert np.max(np.abs(dbar(t1).values - 1.0)[mask]) <= 2e-3


def test_modified_transform_boundary_is_imaginary():
    grid = make_polar_grid(32, 64)
    u = sample(lambda w: w + 0.5 * np.conj(w) ** 2 + 0.25j, grid)
    for count in (0, 100):
        trace = modified_boundary_trace(u, angular_count=count)
        assert np.max(np.abs(trace.values.real)) <= 1e-10
    assert modified_boundary_trace(u, angular_count=100).angular_count == 100
    mask = interior_mask(grid)
    t1 = modified_cauchy_green_grid(sample(lambda w: w, grid))
    assert np.max(np.abs(dbar(t1).values - grid.nodes)[mask]) <= 1e-2


def test_cell_average_rule_agrees_with_default():
    grid = make_polar_grid(32, 64)
    u = sample(lambda w: 1.0 + 0.5 * w, grid)
    cfg = KernelQuadratureConfig(correction_rule=CorrectionRule.CELL_AVERAGE)
    for w in [0.3 + 0.2j, -0.5j]:
        assert abs(cauchy_green(u, w, cfg) - cauchy_green(u, w)) <= 0.1
        assert abs(modified_cauchy_green(u, w, cfg) - modified_cauchy_green(u, w)) <= 0.1


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_transform_matches_phase_closed_form(n):
    """Numerical T of phase(tau - w0)^n against the closed form at 50 targets."""
    grid = make_polar_grid(128, 256)
    w0 = 0.3 + 0.2j
    u = sample(lambda w: phase(w - w0) ** n, grid)
    rng = np.random.default_rng(n)
    checked = 0
    while checked < 50:
        w = np.sqrt(rng.uniform(0, 1)) * np.exp(2j * np.pi * rng.uniform(0, 1))
        if abs(w - w0) < 0.1:
            continue
        assert abs(cauchy_green(u, w) - phase_transform_closed_form(n, w0, w)) <= 1e-2
        checked += 1


def _phase_power_error(n: int, w0: complex, targets: np.ndarray, radial: int, angular: int) -> float:
    u = sample(lambda w: phase(w - w0) ** n, make_polar_grid(radial, angular))
    return max(abs(cauchy_green(u, w) - phase_transform_closed_form(n, w0, w)) for w in targets)


@pytest.mark.slow
@pytest.mark.parametrize("n", [1, 2])
def test_phase_power_error_shrinks_under_refinement(n):
    """Doubling both grid counts cuts the max error by at least 1.8."""
    w0 = 0.3 + 0.2j
    rng = np.random.default_rng(10 + n)
    targets = []
    while len(targets) < 20:
        w = np.sqrt(rng.uniform(0, 0.8)) * np.exp(2j * np.pi * rng.uniform(0, 1))
        if abs(w - w0) >= 0.1:
            targets.append(w)
    coarse = _phase_power_error(n, w0, np.array(targets), 128, 256)
    fine = _phase_power_error(n, w0, np.array(targets), 256, 512)
    assert coarse / fine >= 1.8


@pytest.mark.slow
def test_transform_lipschitz_is_uniform_in_roots():
    """Lip(T(lambda phase(p))) for cubic p stays within a fixed multiple of the norm of lambda."""
    grid = make_polar_grid(32, 64)
    lam = sample(lambda w: 1.0 + 0.5 * np.conj(w), grid)
    lam_norm = float(np.max(np.abs(lam.values))) + holder_seminorm(lam, 0.5)
    rng = np.random.default_rng(3)
    ratios = []
    for _ in range(20):
        roots = np.sqrt(rng.uniform(0, 0.36, 3)) * np.exp(2j * np.pi * rng.uniform(0, 1, 3))

        def density(w, roots=roots):
            p = np.prod([w - root for root in roots], axis=0)
            return (1.0 + 0.5 * np.conj(w)) * phase(p)

        tu = cauchy_green_grid(sample(density, grid))
        ratios.append(lipschitz_estimate(tu) / lam_norm)
    assert max(ratios) <= 3.0 * min(ratios)

"""
Tests for structure pullback through coordinate models, the singular set
report and attaching discs to tori.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from discsolve import SolverConfig
from errors import InvalidArgumentError, OrientationError, OutOfDomainError
from gluing import (_vekua_extension, attach_disc_to_torus, coefficients_from_model, integrable_pullback,
                    pullback_structure, regularity_probe, sigma_nodes, singular_set_report)
from grid import GridFunction, make_polar_grid
from models import (DEFAULT_INTEGRABLE_TERMS, blowup_model, identity_model, integrable_graph_model,
                    reference_a, shear_model)

SLICES = [0.0, 0.3, -0.2j, 0.5 + 0.1j]
EIGHT_SLICES = [0.0] + [0.45 * np.exp(2j * np.pi * k / 8) for k in range(8)]


def test_shear_reverses_orientation_on_unit_disc():
    """a = 2w reaches |a| > 1 for |w| > 1/2."""
    with pytest.raises(OrientationError):
        pullback_structure(shear_model(), [0.3], make_polar_grid(16, 32))


def test_shear_on_small_w_disc():
    grid = make_polar_grid(16, 32)
    result = pullback_structure(shear_model(), SLICES, grid, w_radius=0.4)
    for a, b in zip(result.a, result.b):
        np.testing.assert_allclose(a.values, 2.0 * result.w_nodes, atol=1e-12)
        np.testing.assert_allclose(b.values, 0.0, atol=1e-12)
    assert result.max_abs_a() < 0.8
    report = singular_set_report(result)
    assert report["per_slice_counts"] == [0, 0, 0, 0]
    assert report["sigma_prime_equals_sigma"]
    assert result.extension == ["none"] * 4


def test_blowup_pullback_matches_closed_form():
    """a = conj(w)^2 / w, one zero cluster of f = w per slice."""
    grid = make_polar_grid(16, 32)
    model = blowup_model()
    result = pullback_structure(model, SLICES, grid, w_radius=0.9)
    expected = reference_a(model)
    for z, a in zip(result.z_slices, result.a):
        np.testing.assert_allclose(a.values, expected(z, result.w_nodes), atol=1e-10)
    report = singular_set_report(result)
    assert report["per_slice_counts"] == [1, 1, 1, 1]
    assert report["sigma_prime_equals_sigma"]


def test_identity_pullback_is_standard():
    grid = make_polar_grid(8, 16)
    result = pullback_structure(identity_model(), SLICES, grid)
    assert result.max_abs_a() == 0.0
    assert all(b.sup_norm() == 0.0 for b in result.b)
    frame = result.to_frame()
    assert len(frame) == len(SLICES) * grid.node_count
    assert {"re_a", "im_a", "re_b", "im_b", "sigma"} <= set(frame.columns)


def test_integrable_graph_formula():
    """h = z + 0.3 conj(z) w gives a = -0.3 w and b = 0."""
    grid = make_polar_grid(16, 32)
    model = integrable_graph_model(DEFAULT_INTEGRABLE_TERMS)
    result = integrable_pullback(model, SLICES, grid)
    for a in result.a:
        np.testing.assert_allclose(a.values, -0.3 * grid.nodes, atol=1e-12)
    assert result.method == "integrable"
    assert all(not mask.any() for mask in result.sigma_mask)


def test_integrable_formula_agrees_with_general_rule():
    grid = make_polar_grid(16, 32)
    model = integrable_graph_model(DEFAULT_INTEGRABLE_TERMS)
    general = pullback_structure(model, SLICES, grid)
    closed_form = integrable_pullback(model, SLICES, grid)
    for x, y in zip(general.a, closed_form.a):
        assert np.max(np.abs(x.values - y.values)) <= 1e-2


def test_integrable_graph_with_removable_zero():
    """h = z w + conj(z) w^2 / 4: h_z = w vanishes at w = 0, a = -w/4 is holomorphic."""
    grid = make_polar_grid(16, 32)
    model = integrable_graph_model([[1.0, 0.0, 1, 0, 1], [0.25, 0.0, 0, 1, 2]])
    result = integrable_pullback(model, [0.2], grid)
    np.testing.assert_allclose(result.a[0].values, -0.25 * grid.nodes, atol=1e-10)


def test_integrable_pullback_needs_integrable_model():
    with pytest.raises(InvalidArgumentError):
        integrable_pullback(blowup_model(), [0.0], make_polar_grid(8, 16))


def test_slice_checks():
    grid = make_polar_grid(8, 16)
    with pytest.raises(InvalidArgumentError):
        pullback_structure(identity_model(), [], grid)
    with pytest.raises(OutOfDomainError):
        pullback_structure(identity_model(), [1.2], grid)


def test_sigma_nodes():
    f = np.array([1.0, 1.0, 0.0, 2.0])
    g = np.array([0.5, 1.0, 0.3, 2.0005])
    np.testing.assert_array_equal(sigma_nodes(f, g), [False, True, True, True])


def test_regularity_probe_on_z_independent_structure():
    grid = make_polar_grid(8, 16)
    result = pullback_structure(integrable_graph_model(DEFAULT_INTEGRABLE_TERMS), EIGHT_SLICES, grid)
    assert result.regularity["alpha_hat_z"] == pytest.approx(1.0)
    assert result.regularity["lipschitz_w_hat"] == pytest.approx(0.3, abs=1e-9)
    probe = regularity_probe(result, z_pairs_budget=16)
    assert probe["lip_hat_w"] == pytest.approx(0.3, abs=1e-9)
    short = pullback_structure(identity_model(), SLICES, grid)
    with pytest.raises(InvalidArgumentError):
        regularity_probe(short, z_pairs_budget=16)


def test_coefficients_from_models():
    shear = coefficients_from_model(shear_model(), w_radius=0.4)
    assert shear.a0 == pytest.approx(0.8, abs=1e-9)
    assert shear.lipschitz_w == pytest.approx(2.0, abs=1e-6)
    a, b = shear.evaluate(np.array([0.1]), np.array([0.2j]))
    assert a[0] == pytest.approx(0.4j)
    assert b[0] == pytest.approx(0.0)
    with pytest.raises(OrientationError):
        coefficients_from_model(shear_model(), w_radius=1.0)


def test_blowup_coefficients_have_removable_point():
    coeffs = coefficients_from_model(blowup_model(), w_radius=0.9)
    a, _ = coeffs.evaluate(np.array([0.3, 0.3]), np.array([0.0, 0.5]))
    assert abs(a[0]) <= 1e-6
    assert a[1] == pytest.approx(0.5)
    assert coeffs.validate(tol=1e-6)["at_zero"] <= 1e-6


def test_attach_disc_on_identity():
    cfg = SolverConfig(radial_count=16, angular_count=32)
    attached = attach_disc_to_torus(identity_model(), n=1, r=0.5, t=0.0, cfg=cfg)
    assert attached["torus_distance"] <= 1e-12
    image = attached["disc_in_target"]
    theta = 2.0 * np.pi * np.arange(32) / 32
    np.testing.assert_allclose(image[:, 0], np.exp(1j * theta), atol=1e-12)
    np.testing.assert_allclose(image[:, 1], 0.5 * np.exp(1j * theta), atol=1e-12)
    assert attached["image_distance"] <= 1e-12
    moduli = attached["image_moduli"]
    assert moduli["z_min"] == pytest.approx(1.0) and moduli["z_max"] == pytest.approx(1.0)
    assert moduli["w_min"] == pytest.approx(0.5) and moduli["w_max"] == pytest.approx(0.5)


def test_attach_rejects_radius_beyond_coefficients():
    cfg = SolverConfig(radial_count=16, angular_count=32)
    with pytest.raises(InvalidArgumentError):
        attach_disc_to_torus(blowup_model(), n=1, r=0.95, t=0.0, cfg=cfg, w_radius=0.9)


def test_extension_recovers_holomorphic_quotient():
    """f = w, g = w^2/2 give a = g/f = w/2 across a small inner set."""
    grid = make_polar_grid(32, 64)
    w = grid.nodes
    sigma = np.zeros(grid.node_count, dtype=bool)
    sigma[:grid.angular_count] = True
    extended = _vekua_extension(GridFunction(grid, w), GridFunction(grid, 0.5 * w ** 2), sigma, w_radius=1.0)
    assert np.max(np.abs(extended[sigma] - 0.5 * w[sigma])) <= 1e-3


@pytest.mark.slow
def test_blowup_disc_lands_on_torus():
    cfg = SolverConfig(radial_count=128, angular_count=256)
    attached = attach_disc_to_torus(blowup_model(), n=2, r=0.5, t=0.0, cfg=cfg, w_radius=0.9)
    assert attached["torus_distance"] <= 1e-2
    diagnostics = attached["solution"].diagnostics
    assert diagnostics["winding_w"] == 2
    assert max(diagnostics["residual_z"], diagnostics["residual_w"]) <= 2e-2
    # H(z, w) = (zw, w) keeps |w'| = r and |z'| = r on the torus
    moduli = attached["image_moduli"]
    assert moduli["w_min"] >= 0.5 - 1e-2 and moduli["w_max"] <= 0.5 + 1e-2
    assert moduli["z_min"] >= 0.5 - 2e-2 and moduli["z_max"] <= 0.5 + 2e-2
    assert attached["image_distance"] <= 1e-2

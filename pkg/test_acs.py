"""
Tests for the structure/matrix dictionary and the pullback rule.
"""
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from acs import (AcsMatrix, JacobianBlocks, RLinearMap, a_to_j, anti_linear_part, j_to_a,
                 pullback_matrix, structure_matrix)
from errors import InadmissibleError, NotAStructureError, SingularPullbackError


def random_matrix(rng: np.random.Generator, radius: float = 0.9) -> np.ndarray:
    """Complex 2x2 matrix with operator norm below radius."""
    m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return radius * rng.uniform(0.0, 1.0) * m / np.linalg.norm(m, 2)


def test_standard_structure_has_zero_matrix():
    a = j_to_a(RLinearMap.standard())
    np.testing.assert_allclose(a.a, np.zeros((2, 2)), atol=1e-12)


def test_zero_matrix_gives_standard_structure():
    j = a_to_j(AcsMatrix.zero())
    np.testing.assert_allclose(j.p, 1j * np.eye(2), atol=1e-14)
    np.testing.assert_allclose(j.q, np.zeros((2, 2)), atol=1e-14)


def test_round_trip_on_random_matrices():
    """A -> J -> A on 1000 seeded matrices with norm below 0.9."""
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for _ in range(1000):
        a = random_matrix(rng)
        j = a_to_j(AcsMatrix(a))
        assert j.is_structure()
        worst = max(worst, float(np.max(np.abs(j_to_a(j).a - a))))
    assert worst <= 1e-10


@settings(max_examples=50, deadline=None)
@given(entries=st.lists(st.floats(-1.0, 1.0), min_size=8, max_size=8))
def test_round_trip_property(entries):
    m = np.array(entries[:4]).reshape(2, 2) + 1j * np.array(entries[4:]).reshape(2, 2)
    norm = np.linalg.norm(m, 2)
    a = m if norm < 0.9 else 0.85 * m / norm
    recovered = j_to_a(a_to_j(AcsMatrix(a)))
    assert np.max(np.abs(recovered.a - a)) <= 1e-10


def test_diagonal_half_structure_action():
    """A = diag(1/2, 0) acts on the first component by (i/0.75)(1.25 v - conj(v))."""
    j = a_to_j(AcsMatrix(np.diag([0.5, 0.0])))
    assert j.p[0, 0] == pytest.approx(1j * 1.25 / 0.75)
    assert j.q[0, 0] == pytest.approx(-1j / 0.75)
    assert j.p[1, 1] == pytest.approx(1j)
    assert j.q[1, 1] == pytest.approx(0.0)
    assert j.is_structure()


def test_involution_is_not_a_structure():
    with pytest.raises(NotAStructureError):
        j_to_a(RLinearMap.identity())


def test_inadmissible_matrix_is_rejected():
    with pytest.raises(InadmissibleError):
        AcsMatrix(np.diag([1.0, 0.0]))
    with pytest.raises(InadmissibleError):
        structure_matrix(1.0, 0.3)


def test_anti_linear_part_squares_to_a_abar():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = random_matrix(rng)
        q = anti_linear_part(a_to_j(AcsMatrix(a)))
        assert q.is_anti_linear()
        np.testing.assert_allclose(q.compose(q).p, a @ np.conj(a), atol=1e-10)


def test_structure_matrix_layout():
    a = structure_matrix(0.2 + 0.1j, -0.3j)
    np.testing.assert_allclose(a.a, [[0.2 + 0.1j, 0.0], [-0.3j, 0.0]])
    assert AcsMatrix.from_json(a.to_json()).a.tolist() == a.a.tolist()


def test_pullback_of_shear():
    """H = (z - 2 conj(z) w, w) pulls the standard structure back to a = 2w."""
    z, w = 0.3 + 0.1j, 0.2 - 0.1j
    blocks = JacobianBlocks([[1.0, -2.0 * np.conj(z)], [0.0, 1.0]], [[-2.0 * w, 0.0], [0.0, 0.0]])
    a = pullback_matrix(AcsMatrix.zero(), blocks)
    np.testing.assert_allclose(a.a, [[2.0 * w, 0.0], [0.0, 0.0]], atol=1e-12)


def test_pullback_of_blowup():
    """H = (z w, w) with A' = [[conj(w'), -conj(z')], [0, 0]] gives a = conj(w)^2 / w."""
    z, w = 0.3, 0.4 + 0.2j
    z_prime = z * w
    target = AcsMatrix([[np.conj(w), -np.conj(z_prime)], [0.0, 0.0]])
    blocks = JacobianBlocks([[w, z], [0.0, 1.0]], np.zeros((2, 2)))
    a = pullback_matrix(target, blocks)
    np.testing.assert_allclose(a.a, [[np.conj(w) ** 2 / w, 0.0], [0.0, 0.0]], atol=1e-10)


def test_pullback_by_identity_is_unchanged():
    rng = np.random.default_rng(3)
    a = AcsMatrix(random_matrix(rng))
    np.testing.assert_allclose(pullback_matrix(a, JacobianBlocks.identity()).a, a.a, atol=1e-12)


def test_singular_pullback_reports_point():
    with pytest.raises(SingularPullbackError) as info:
        pullback_matrix(AcsMatrix.zero(), JacobianBlocks(np.zeros((2, 2)), np.zeros((2, 2))),
                        point=(0.1, 0.2))
    assert info.value.point == (0.1, 0.2)

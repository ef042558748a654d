"""
Dictionary between almost complex structures J on C^2 and their complex
matrices A, plus the pullback transformation rule.

An R-linear map of C^2 is stored as the pair (P, Q) acting by
v -> P v + Q conj(v). Composition and inversion go through the complex
4x4 block form [[P, Q], [conj(Q), conj(P)]] acting on (v, conj(v)).
"""
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import get_settings
from errors import (
    InadmissibleError, NonGenericPositionError, NotAStructureError,
    SingularPullbackError,
)

IDENTITY = np.eye(2, dtype=complex)


class RLinearMap:
    """R-linear map v -> P v + Q conj(v) on C^2."""

    def __init__(self, p: Any, q: Any):
        self.p = np.asarray(p, dtype=complex).reshape(2, 2)
        self.q = np.asarray(q, dtype=complex).reshape(2, 2)
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.q))):
            raise InadmissibleError("RLinearMap entries must be finite")

    @classmethod
    def identity(cls) -> "RLinearMap":
        return cls(IDENTITY, np.zeros((2, 2)))

    @classmethod
    def standard(cls) -> "RLinearMap":
        """The standard structure J_st v = i v."""
        return cls(1j * IDENTITY, np.zeros((2, 2)))

    @classmethod
    def from_block(cls, block: np.ndarray) -> "RLinearMap":
        return cls(block[:2, :2], block[:2, 2:])

    def block(self) -> np.ndarray:
        return np.block([[self.p, self.q], [np.conj(self.q), np.conj(self.p)]])

    def apply(self, v: Any) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        return self.p @ v + self.q @ np.conj(v)

    def compose(self, other: "RLinearMap") -> "RLinearMap":
        """self after other."""
        return RLinearMap(
            self.p @ other.p + self.q @ np.conj(other.q),
            self.p @ other.q + self.q @ np.conj(other.p),
        )

    def inverse(self) -> "RLinearMap":
        return RLinearMap.from_block(np.linalg.inv(self.block()))

    def __add__(self, other: "RLinearMap") -> "RLinearMap":
        return RLinearMap(self.p + other.p, self.q + other.q)

    def __sub__(self, other: "RLinearMap") -> "RLinearMap":
        return RLinearMap(self.p - other.p, self.q - other.q)

    def norm(self) -> float:
        return float(np.linalg.norm(self.block(), 2))

    def structure_defect(self) -> float:
        """max-entry size of J^2 + I."""
        square = self.compose(self).block()
        return float(np.max(np.abs(square + np.eye(4))))

    def is_structure(self, tol: Optional[float] = None) -> bool:
        tol = get_settings().structure_tol if tol is None else tol
        return self.structure_defect() <= tol * max(1.0, self.norm() ** 2)

    def is_anti_linear(self, tol: Optional[float] = None) -> bool:
        """Q J_st + J_st Q = 0, equivalently P = 0."""
        tol = get_settings().structure_tol if tol is None else tol
        j_st = RLinearMap.standard()
        defect = self.compose(j_st) + j_st.compose(self)
        return float(np.max(np.abs(defect.block()))) <= tol * max(1.0, self.norm())


class AcsMatrix:
    """Complex matrix A of an almost complex structure: z_zetabar = A conj(z)_zetabar."""

    def __init__(self, a: Any, tol: Optional[float] = None):
        self.a = np.asarray(a, dtype=complex).reshape(2, 2)
        tol = get_settings().structure_tol if tol is None else tol
        self.margin = float(abs(np.linalg.det(IDENTITY - self.a @ np.conj(self.a))))
        if not np.isfinite(self.margin) or self.margin <= tol:
            raise InadmissibleError(
                f"det(I - A conj(A)) = {self.margin:.3e} is not admissible",
                margin=self.margin,
            )

    @classmethod
    def zero(cls) -> "AcsMatrix":
        return cls(np.zeros((2, 2)))

    def to_json(self) -> List[List[List[float]]]:
        """Row-major complex pairs."""
        return [[[float(x.real), float(x.imag)] for x in row] for row in self.a]

    @classmethod
    def from_json(cls, rows: List[List[List[float]]]) -> "AcsMatrix":
        return cls(np.array([[complex(re, im) for re, im in row] for row in rows]))

    def __repr__(self) -> str:
        return f"AcsMatrix({self.a.tolist()}, margin={self.margin:.3e})"


class JacobianBlocks:
    """Complex Jacobian blocks dZ'/dZ and dZ'/dZbar of a map Z -> Z'."""

    def __init__(self, z_prime_Z: Any, z_prime_Zbar: Any):
        self.z_prime_Z = np.asarray(z_prime_Z, dtype=complex)
        self.z_prime_Zbar = np.asarray(z_prime_Zbar, dtype=complex)
        if not (np.all(np.isfinite(self.z_prime_Z)) and np.all(np.isfinite(self.z_prime_Zbar))):
            raise SingularPullbackError("Jacobian blocks must be finite")

    @classmethod
    def identity(cls) -> "JacobianBlocks":
        return cls(IDENTITY, np.zeros((2, 2)))


def anti_linear_part(j: RLinearMap) -> RLinearMap:
    """
    Q = (J_st + J)^{-1} (J_st - J), an anti-linear map whenever J^2 = -I.

    Raises:
        NonGenericPositionError: if det(J_st + J) vanishes
    """
    j_st = RLinearMap.standard()
    lead = j_st + j
    tol = get_settings().structure_tol
    if np.linalg.cond(lead.block()) > 1.0 / tol:
        raise NonGenericPositionError("det(J_st + J) = 0: J is not in generic position")
    return lead.inverse().compose(j_st - j)


def j_to_a(j: RLinearMap) -> AcsMatrix:
    """
    Complex matrix of a structure: A v = Q conj(v) with Q = (J_st + J)^{-1}(J_st - J).

    Args:
        j: R-linear map with J^2 = -I

    Returns:
        AcsMatrix A
    """
    if not j.is_structure():
        raise NotAStructureError(
            f"J^2 + I has size {j.structure_defect():.3e}", defect=j.structure_defect()
        )
    q = anti_linear_part(j)
    return AcsMatrix(q.q)


def a_to_j(a: AcsMatrix) -> RLinearMap:
    """
    J v = i (I - A conj(A))^{-1} [(I + A conj(A)) v - 2 A conj(v)].
    """
    aa = a.a @ np.conj(a.a)
    inv = np.linalg.inv(IDENTITY - aa)
    return RLinearMap(1j * inv @ (IDENTITY + aa), -2j * inv @ a.a)


def structure_matrix(a: complex, b: complex) -> AcsMatrix:
    """The matrix [[a, 0], [b, 0]]; admissible exactly when |a| != 1."""
    return AcsMatrix(np.array([[a, 0.0], [b, 0.0]], dtype=complex))


def pullback_matrices(a_prime: np.ndarray, z_prime_Z: np.ndarray,
                      z_prime_Zbar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Batched transformation rule over a stack of points.

    A = (Z'_Z - A' conj(Z'_Zbar))^{-1} (A' conj(Z'_Z) - Z'_Zbar)

    Args:
        a_prime: (N, 2, 2) target matrices at the image points
        z_prime_Z, z_prime_Zbar: (N, 2, 2) Jacobian blocks

    Returns:
        Tuple of (A stack with NaN where the leading matrix is singular,
        condition numbers of the leading matrices)
    """
    lead = z_prime_Z - a_prime @ np.conj(z_prime_Zbar)
    trail = a_prime @ np.conj(z_prime_Z) - z_prime_Zbar
    cond = np.linalg.cond(lead)
    result = np.full(lead.shape, np.nan + 0j)
    ok = np.isfinite(cond) & (cond < 1e15)
    if np.any(ok):
        result[ok] = np.linalg.solve(lead[ok], trail[ok])
    return result, cond


def pullback_matrix(a_prime: AcsMatrix, blocks: JacobianBlocks,
                    cond_cap: Optional[float] = None,
                    point: Optional[Any] = None) -> AcsMatrix:
    """
    Complex matrix of the pulled-back structure at one point.

    Args:
        a_prime: Target structure matrix A' at the image point
        blocks: Jacobian blocks of the coordinate map at the point
        cond_cap: Condition-number cap of the leading matrix
        point: Optional source point, reported in errors

    Returns:
        AcsMatrix of H*J'
    """
    cond_cap = get_settings().pullback_cond_cap if cond_cap is None else cond_cap
    result, cond = pullback_matrices(
        a_prime.a[None], blocks.z_prime_Z[None], blocks.z_prime_Zbar[None]
    )
    if not np.isfinite(cond[0]) or cond[0] > cond_cap:
        raise SingularPullbackError(
            f"leading matrix ill-conditioned (cond={cond[0]:.3e}) at {point}",
            point=point, cond=float(cond[0]),
        )
    return AcsMatrix(result[0])


def matrix_summary(a: AcsMatrix) -> Dict[str, Any]:
    return {"a": a.to_json(), "margin": a.margin}

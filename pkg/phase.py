"""
Phase functions <w> = conj(w)/w and the decomposition of the phase of
w^n (w - w0) into phases of binomials:

    <w^n (w - w0)> = <w0 w^n> + <w0^n (w - w0)>
        + sum_{k=1..n} sum_{j=1..n+1} c_kj <w0>^(n+1-j) ∫_0^1 <w - w0 t>^j (1-t)^(k-1) dt

The real constants c_kj are extracted by least squares against the exact
identity and certified on held-out samples.
"""
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import quad_vec

from errors import DegenerateFitError, InvalidArgumentError, UndefinedPhaseError

MAX_DEGREE = 6
QUAD_EPSABS = 1e-9
RANK_RTOL = 1e-10

# closed form for n = 1
N1_COEFFICIENTS = np.array([[-2.0, 1.0]])


class BinomialDecompCoeffs:
    """Fitted constants c[k-1, j-1] of the binomial phase identity."""

    def __init__(self, n: int, c: Any, fit_residual: float, seed: Optional[int] = None,
                 train_residual: float = float("nan")):
        self.n = int(n)
        self.c = np.asarray(c, dtype=float).reshape(self.n, self.n + 1)
        if not np.all(np.isfinite(self.c)):
            raise DegenerateFitError("fitted coefficients are not finite")
        self.fit_residual = float(fit_residual)
        self.train_residual = float(train_residual)
        self.seed = seed

    @classmethod
    def exact_n1(cls) -> "BinomialDecompCoeffs":
        return cls(1, N1_COEFFICIENTS, 0.0)

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "seed": self.seed,
            "c": self.c.tolist(),
            "fit_residual": self.fit_residual,
            "train_residual": self.train_residual,
        }

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "BinomialDecompCoeffs":
        return cls(payload["n"], payload["c"], payload["fit_residual"], payload.get("seed"),
                   payload.get("train_residual", float("nan")))


def phase(w: Any) -> Any:
    """
    The unimodular phase conj(w)/w.

    Raises:
        UndefinedPhaseError: at w = 0
    """
    arr = np.asarray(w, dtype=complex)
    if np.any(arr == 0):
        raise UndefinedPhaseError("the phase is undefined at w = 0")
    out = np.conj(arr) / arr
    return complex(out) if out.ndim == 0 else out


def binomial_phase_lhs(n: int, w0: complex, w: complex) -> complex:
    return phase(complex(w) ** n * (complex(w) - complex(w0)))


def _basis(n: int, w0: complex, w: complex) -> np.ndarray:
    """
    B[k-1, j-1] = <w0>^(n+1-j) ∫_0^1 <w - w0 t>^j (1-t)^(k-1) dt.
    """
    j = np.arange(1, n + 2)
    k = np.arange(1, n + 1)

    def integrand(t: float) -> np.ndarray:
        p = phase(w - w0 * t)
        values = np.outer((1.0 - t) ** (k - 1), p ** j)
        return np.concatenate([values.real.ravel(), values.imag.ravel()])

    total, _ = quad_vec(integrand, 0.0, 1.0, epsabs=QUAD_EPSABS)
    half = n * (n + 1)
    integrals = (total[:half] + 1j * total[half:]).reshape(n, n + 1)
    return integrals * phase(w0) ** (n + 1 - j)[None, :]


def _explicit_terms(n: int, w0: complex, w: complex) -> complex:
    return phase(w0 * w ** n) + phase(w0 ** n * (w - w0))


def _segment_clearance(w0: complex, w: complex) -> float:
    """Distance from 0 to the segment {w - w0 t : 0 <= t <= 1}."""
    t = np.clip((np.conj(w0) * w).real / abs(w0) ** 2, 0.0, 1.0)
    return abs(w - w0 * t)


def sample_pairs(count: int, rng: np.random.Generator) -> list:
    """
    Random (w0, w) with |w0| in [0.1, 1], 0.05 <= |w| <= 2, |w - w0| >= 0.05,
    and the segment w - w0 t staying 0.02 away from the origin.
    """
    pairs = []
    while len(pairs) < count:
        w0 = rng.uniform(0.1, 1.0) * np.exp(2j * np.pi * rng.uniform())
        w = 2.0 * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        if abs(w) < 0.05 or abs(w - w0) < 0.05 or _segment_clearance(w0, w) < 0.02:
            continue
        pairs.append((complex(w0), complex(w)))
    return pairs


def _check_degree(n: int) -> None:
    if int(n) != n or not 1 <= n <= MAX_DEGREE:
        raise InvalidArgumentError(f"n must be an integer in [1, {MAX_DEGREE}], got {n}")


def _check_point(w0: complex, w: complex) -> None:
    if w0 == 0 or w == 0 or w == w0:
        raise UndefinedPhaseError(f"degenerate configuration w = {w}, w0 = {w0}")


def binomial_phase_rhs(coeffs: BinomialDecompCoeffs, w0: complex, w: complex) -> complex:
    """
    Right side of the binomial phase identity with the given constants.

    Args:
        coeffs: Constants for degree coeffs.n
        w0: Shift, nonzero
        w: Point, distinct from 0 and w0

    Returns:
        Complex value, unimodular when the constants are valid
    """
    w0, w = complex(w0), complex(w)
    _check_point(w0, w)
    basis = _basis(coeffs.n, w0, w)
    return complex(_explicit_terms(coeffs.n, w0, w) + np.sum(coeffs.c * basis))


def two_factor_phase_rhs(coeffs: BinomialDecompCoeffs, w1: complex, w2: complex,
                         w: complex) -> complex:
    """
    Phase of (w - w1)(w - w2) through the degree-one identity after the
    shift w -> w - w1.
    """
    if coeffs.n != 1:
        raise InvalidArgumentError(f"two-factor decomposition needs n = 1 constants, got n = {coeffs.n}")
    return binomial_phase_rhs(coeffs, complex(w2) - complex(w1), complex(w) - complex(w1))


def fit_binomial_coeffs(n: int, sample_count: int, seed: int,
                        samples: Optional[Sequence[Tuple[complex, complex]]] = None,
                        holdout_count: Optional[int] = None) -> BinomialDecompCoeffs:
    """
    Least-squares extraction of the constants c_kj.

    Args:
        n: Degree, 1 <= n <= 6
        sample_count: Number of training pairs, at least 20 n^2
        seed: Seed of the sample generator
        samples: Explicit (w0, w) training pairs overriding the random draw
        holdout_count: Validation pairs, defaults to max(200, sample_count // 4)

    Returns:
        BinomialDecompCoeffs whose fit_residual is the max held-out error
    """
    _check_degree(n)
    if samples is None and sample_count < 20 * n * n:
        raise InvalidArgumentError(f"sample_count must be >= {20 * n * n} for n = {n}")

    rng = np.random.default_rng(seed)
    train = list(samples) if samples is not None else sample_pairs(sample_count, rng)
    for w0, w in train:
        _check_point(complex(w0), complex(w))

    rows, targets = [], []
    for w0, w in train:
        w0, w = complex(w0), complex(w)
        rows.append(_basis(n, w0, w).ravel())
        targets.append(binomial_phase_lhs(n, w0, w) - _explicit_terms(n, w0, w))
    design = np.asarray(rows)
    rhs = np.asarray(targets)
    real_design = np.vstack([design.real, design.imag])
    real_rhs = np.concatenate([rhs.real, rhs.imag])

    solution, _, rank, singular = np.linalg.lstsq(real_design, real_rhs, rcond=None)
    unknowns = n * (n + 1)
    if rank < unknowns or singular[-1] <= RANK_RTOL * singular[0]:
        raise DegenerateFitError(
            f"design matrix rank {rank} < {unknowns}; draw more (and more varied) samples",
            rank=int(rank), unknowns=unknowns,
        )
    train_residual = float(np.max(np.abs(real_design @ solution - real_rhs)))

    coeffs = BinomialDecompCoeffs(n, solution.reshape(n, n + 1), float("nan"), seed, train_residual)
    holdout = sample_pairs(holdout_count or max(200, sample_count // 4), rng)
    coeffs.fit_residual = validate_identity(coeffs, holdout)["max_error"]
    logger.info(
        f"fitted binomial constants n={n}: train residual {train_residual:.2e}, "
        f"held-out residual {coeffs.fit_residual:.2e}"
    )
    return coeffs


def validate_identity(coeffs: BinomialDecompCoeffs,
                      pairs: Sequence[Tuple[complex, complex]]) -> Dict[str, float]:
    """
    Errors of the identity on given (w0, w) pairs.

    Returns:
        Dict with max_error (|RHS - LHS|) and max_modulus_error (||RHS| - 1|)
    """
    errors, moduli = [], []
    for w0, w in pairs:
        rhs = binomial_phase_rhs(coeffs, w0, w)
        errors.append(abs(rhs - binomial_phase_lhs(coeffs.n, w0, w)))
        moduli.append(abs(abs(rhs) - 1.0))
    return {
        "max_error": float(max(errors)) if errors else 0.0,
        "max_modulus_error": float(max(moduli)) if moduli else 0.0,
        "pair_count": len(errors),
    }

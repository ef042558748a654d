"""
Generalized analytic functions h_wbar = mu conj(h) on the unit disc.

Similarity factorization h = phi exp(Tu) with phi holomorphic and
u = mu conj(h)/h, zero counting by the argument principle, the
normalized form h = phi0 p exp(Tu) with p monic, and empirical
estimators for the regularity statements used downstream.
"""
from itertools import combinations
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config import get_settings
from errors import (
    BoundaryZeroError, HypothesisViolationError, InvalidArgumentError,
    NotGeneralizedAnalyticError, OutOfDomainError, RootFindingError,
)
from grid import (
    CircleFunction, GridFunction, dbar, interior_mask, lipschitz_estimate, ring_trace,
)
from singint import DEFAULT_QUADRATURE, KernelQuadratureConfig, cauchy_green_grid

ZERO_THRESHOLD = 1e-12
NEWTON_MAX_STEPS = 60
NEWTON_TOL = 1e-13
ROOT_MERGE_DISTANCE = 1e-4
MIN_HOLDER_SAMPLES = 8
MIN_MONTE_CARLO_SAMPLES = 10_000


class VekuaDecomposition:
    """h = phi * exp(tu) with phi holomorphic and tu = T(mu conj(h)/h)."""

    def __init__(self, phi: GridFunction, tu: GridFunction, u: GridFunction,
                 zero_count: int, dbar_phi_residual: float, winding_confidence: float = 0.0):
        self.phi = phi
        self.tu = tu
        self.u = u
        self.zero_count = int(zero_count)
        self.dbar_phi_residual = float(dbar_phi_residual)
        self.winding_confidence = float(winding_confidence)

    def reconstruct(self) -> GridFunction:
        return self.phi.with_values(self.phi.values * np.exp(self.tu.values))

    def reconstruction_error(self, h: GridFunction) -> float:
        return float(np.max(np.abs(self.reconstruct().values - h.values)))

    def summary(self) -> Dict[str, Any]:
        return {
            "zero_count": self.zero_count,
            "dbar_phi_residual": self.dbar_phi_residual,
            "winding_confidence": self.winding_confidence,
            "sup_tu": self.tu.sup_norm(),
            "sup_u": self.u.sup_norm(),
        }


class NormalizedDecomposition:
    """h = phi0 * p * exp(tu), p monic with the zeros of h as roots."""

    def __init__(self, phi0: GridFunction, monic_roots: Sequence[complex],
                 tu: GridFunction, bounds: Dict[str, float]):
        self.phi0 = phi0
        self.monic_roots = [complex(r) for r in monic_roots]
        self.tu = tu
        self.bounds = bounds

    def monic_polynomial(self, w: Any) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        out = np.ones_like(w)
        for root in self.monic_roots:
            out = out * (w - root)
        return out

    def reconstruct(self) -> GridFunction:
        nodes = self.phi0.grid.nodes
        return self.phi0.with_values(
            self.phi0.values * self.monic_polynomial(nodes) * np.exp(self.tu.values)
        )

    def summary(self) -> Dict[str, Any]:
        return {
            "monic_roots": [[r.real, r.imag] for r in self.monic_roots],
            "bounds": dict(self.bounds),
        }


class HolomorphicSeries:
    """Truncated Taylor series sum_k coeffs[k] w^k."""

    def __init__(self, coeffs: np.ndarray, radius: float):
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.radius = float(radius)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, w: Any) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(w, dtype=complex), self.coeffs)

    def derivative(self, w: Any) -> np.ndarray:
        return np.polynomial.polynomial.polyval(
            np.asarray(w, dtype=complex), np.polynomial.polynomial.polyder(self.coeffs)
        )


def holomorphic_series(trace: CircleFunction, radius: float = 1.0,
                       max_degree: int = 64) -> HolomorphicSeries:
    """
    Taylor coefficients of a holomorphic function from its values on |w| = radius.

    Args:
        trace: Equispaced samples on the circle of the given radius
        radius: Radius of the sampling circle
        max_degree: Truncation degree, capped below the Nyquist mode

    Returns:
        HolomorphicSeries; negative Fourier modes of the trace are dropped
    """
    T = trace.angular_count
    degree = max(0, min(max_degree, T // 2 - 1))
    modes = np.fft.fft(trace.values) / T
    k = np.arange(degree + 1)
    coeffs = modes[:degree + 1] / radius ** k
    # drop the tail below rounding
    scale = np.abs(modes[:degree + 1])
    keep = np.flatnonzero(scale > 1e-15 * max(scale.max(), 1e-300))
    if keep.size:
        coeffs = coeffs[: keep[-1] + 1]
    return HolomorphicSeries(coeffs, radius)


def grid_series(phi: GridFunction, ring: int = -1, max_degree: int = 64) -> HolomorphicSeries:
    """holomorphic_series of a grid function from one of its rings."""
    return holomorphic_series(ring_trace(phi, ring), float(phi.grid.radii[ring]), max_degree)


def argument_increment(trace: CircleFunction, tol: Optional[float] = None) -> Tuple[int, float]:
    """
    Winding number of a closed circle trace.

    Returns:
        Tuple of (rounded winding, distance of the raw increment from that integer)
    """
    tol = get_settings().boundary_zero_tol if tol is None else tol
    values = trace.values
    smallest = float(np.min(np.abs(values)))
    if smallest <= tol:
        raise BoundaryZeroError(
            f"trace vanishes on the circle (min |value| = {smallest:.3e})", min_modulus=smallest
        )
    steps = np.angle(np.roll(values, -1) / values)
    raw = float(np.sum(steps) / (2.0 * np.pi))
    winding = int(np.rint(raw))
    return winding, abs(raw - winding)


def count_zeros(boundary_values: CircleFunction) -> int:
    """
    Number of zeros inside the circle of a function holomorphic up to it.

    Raises:
        BoundaryZeroError: if a boundary value is numerically zero
        NotGeneralizedAnalyticError: if the trace winds negatively
    """
    winding, confidence = argument_increment(boundary_values)
    logger.debug(f"zero count {winding} (distance from integer {confidence:.2e})")
    if winding < 0:
        raise NotGeneralizedAnalyticError(
            f"negative winding {winding}: trace is not that of a holomorphic function",
            winding=winding,
        )
    return winding


def _check_same_grid(*functions: GridFunction) -> None:
    first = functions[0].grid
    for other in functions[1:]:
        if not first.same_as(other.grid):
            raise InvalidArgumentError(f"grid mismatch: {first!r} vs {other.grid!r}")


def vekua_residual(h: GridFunction, mu: GridFunction) -> float:
    """Max interior |dbar(h) - mu conj(h)|."""
    _check_same_grid(h, mu)
    defect = dbar(h).values - mu.values * np.conj(h.values)
    return float(np.max(np.abs(defect[interior_mask(h.grid)])))


def logarithmic_density(h: GridFunction, mu: GridFunction) -> GridFunction:
    """u = mu conj(h)/h, set to 0 where |h| < 1e-12."""
    _check_same_grid(h, mu)
    small = np.abs(h.values) < ZERO_THRESHOLD
    safe = np.where(small, 1.0, h.values)
    return h.with_values(np.where(small, 0.0, mu.values * np.conj(h.values) / safe))


def forward_pair(u0: GridFunction, roots: Sequence[complex] = (),
                 cfg: KernelQuadratureConfig = DEFAULT_QUADRATURE) -> Tuple[GridFunction, GridFunction]:
    """
    A generalized analytic pair with known factors: h = p exp(T u0) for
    the monic p with the given roots, and mu = u0 h / conj(h).

    Returns:
        (h, mu) on the grid of u0
    """
    grid = u0.grid
    tu = cauchy_green_grid(u0, cfg)
    p = np.ones(grid.node_count, dtype=complex)
    for root in roots:
        p = p * (grid.nodes - complex(root))
    h = u0.with_values(p * np.exp(tu.values))
    small = np.abs(h.values) < ZERO_THRESHOLD
    safe = np.where(small, 1.0, np.conj(h.values))
    mu = u0.with_values(np.where(small, u0.values, u0.values * h.values / safe))
    return h, mu


def similarity_decompose(h: GridFunction, mu: GridFunction,
                         cfg: KernelQuadratureConfig = DEFAULT_QUADRATURE,
                         residual_tol: Optional[float] = None) -> VekuaDecomposition:
    """
    Factor a generalized analytic function as h = phi exp(Tu).

    Args:
        h: Solution of h_wbar = mu conj(h) sampled on a grid
        mu: Coefficient on the same grid
        cfg: Quadrature of the Cauchy-Green transform
        residual_tol: Acceptance of the Vekua equation, defaults to Settings

    Returns:
        VekuaDecomposition
    """
    settings = get_settings()
    residual_tol = settings.vekua_residual_tol if residual_tol is None else residual_tol

    boundary = ring_trace(h)
    smallest = float(np.min(np.abs(boundary.values)))
    if smallest <= settings.boundary_zero_tol:
        raise BoundaryZeroError(
            f"h vanishes on the boundary (min |h| = {smallest:.3e})", min_modulus=smallest
        )
    residual = vekua_residual(h, mu)
    if residual > residual_tol:
        raise NotGeneralizedAnalyticError(
            f"Vekua residual {residual:.3e} exceeds {residual_tol:.3e}", residual=residual
        )

    u = logarithmic_density(h, mu)
    tu = cauchy_green_grid(u, cfg)
    phi = h.with_values(h.values * np.exp(-tu.values))
    winding, confidence = argument_increment(ring_trace(phi))
    if winding < 0:
        raise NotGeneralizedAnalyticError(f"phi winds negatively ({winding})", winding=winding)
    dbar_phi = float(np.max(np.abs(dbar(phi).values[interior_mask(h.grid)])))

    logger.debug(
        f"similarity decomposition: zeros={winding} residual={residual:.2e} "
        f"dbar_phi={dbar_phi:.2e}"
    )
    return VekuaDecomposition(phi, tu, u, winding, dbar_phi, confidence)


def _local_minima(values: np.ndarray) -> np.ndarray:
    """Boolean mask of ring-major nodes not larger than their 4 neighbours."""
    mag = np.abs(values)
    up = np.vstack([mag[1:], np.full((1, mag.shape[1]), np.inf)])
    down = np.vstack([np.full((1, mag.shape[1]), np.inf), mag[:-1]])
    left = np.roll(mag, 1, axis=1)
    right = np.roll(mag, -1, axis=1)
    return (mag <= up) & (mag <= down) & (mag <= left) & (mag <= right)


def _newton(series: HolomorphicSeries, start: complex, limit: float) -> Optional[complex]:
    w = complex(start)
    for _ in range(NEWTON_MAX_STEPS):
        slope = complex(series.derivative(w))
        if slope == 0:
            return None
        step = complex(series(w)) / slope
        w -= step
        if abs(w) >= limit:
            return None
        if abs(step) < NEWTON_TOL:
            return w
    return w if abs(complex(series(w))) < 1e-8 else None


def _multiplicity(series: HolomorphicSeries, root: complex, radius: float) -> int:
    circle = root + radius * np.exp(2j * np.pi * np.arange(64) / 64)
    winding, _ = argument_increment(CircleFunction(series(circle)), tol=0.0)
    return winding


def locate_roots(phi: GridFunction, expected: int) -> List[complex]:
    """
    Zeros of a holomorphic grid function, repeated by multiplicity.

    Candidates are local minima of |phi| on the grid, refined by Newton on
    the Taylor series of phi taken from the outermost ring.

    Raises:
        RootFindingError: if the located multiplicities do not sum to expected
    """
    if expected == 0:
        return []
    grid = phi.grid
    series = grid_series(phi)
    values = phi.as_array()
    minima = _local_minima(values)
    minima[-2:] = False
    order = np.argsort(np.abs(values[minima]))
    candidates = grid.nodes.reshape(grid.shape)[minima][order][: 4 * expected + 8]

    limit = float(grid.radii[-1])
    roots: List[complex] = []
    for start in candidates:
        root = _newton(series, start, limit)
        if root is None or any(abs(root - r) < ROOT_MERGE_DISTANCE for r in roots):
            continue
        roots.append(root)

    located: List[complex] = []
    for index, root in enumerate(roots):
        others = [abs(root - r) for k, r in enumerate(roots) if k != index]
        radius = min([0.05] + [0.45 * d for d in others])
        radius = min(radius, 0.9 * (limit - abs(root)))
        located.extend([root] * _multiplicity(series, root, radius))

    if len(located) != expected:
        raise RootFindingError(
            f"located {len(located)} zeros, argument principle counts {expected}",
            located=len(located), expected=expected,
        )
    return located


def normalized_decompose(h: GridFunction, mu: GridFunction, eps: float,
                         cfg: KernelQuadratureConfig = DEFAULT_QUADRATURE) -> NormalizedDecomposition:
    """
    Normalized factorization h = phi0 * p * exp(Tu), zeros of h inside |w| < 1/2.

    Args:
        h: Generalized analytic function with |h| > eps on |w| > 1/2
        mu: Vekua coefficient
        eps: Lower bound of |h| outside the half disc

    Returns:
        NormalizedDecomposition with a bounds record
    """
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    outer = np.abs(h.grid.nodes) > 0.5
    weakest = float(np.min(np.abs(h.values[outer])))
    if weakest <= eps:
        raise HypothesisViolationError(
            f"|h| = {weakest:.3e} <= eps = {eps:.3e} outside the half disc", min_modulus=weakest
        )

    decomposition = similarity_decompose(h, mu, cfg)
    roots = locate_roots(decomposition.phi, decomposition.zero_count)
    for root in roots:
        if abs(root) >= 0.5:
            raise HypothesisViolationError(f"zero {root} lies outside |w| < 1/2", root=root)

    grid = h.grid
    monic = np.ones(grid.node_count, dtype=complex)
    for root in roots:
        monic = monic * (grid.nodes - root)
    outer_ring = ring_trace(decomposition.phi).values / monic.reshape(grid.shape)[-1]
    phi0_series = holomorphic_series(CircleFunction(outer_ring), float(grid.radii[-1]))
    phi0 = h.with_values(phi0_series(grid.nodes)) if roots else decomposition.phi

    modulus = np.abs(phi0.values)
    bounds = {
        "sup_phi0": float(modulus.max()),
        "inf_phi0": float(modulus.min()),
        "lipschitz_tu": lipschitz_estimate(decomposition.tu),
    }
    if bounds["inf_phi0"] <= ZERO_THRESHOLD:
        raise RootFindingError("phi0 vanishes: a zero was missed", inf_phi0=bounds["inf_phi0"])
    logger.info(f"normalized decomposition: {len(roots)} zeros, bounds {bounds}")
    return NormalizedDecomposition(phi0, roots, decomposition.tu, bounds)


def holder_seminorm(u: GridFunction, alpha: float, pair_count: int = 20_000,
                    seed: int = 0) -> float:
    """
    Empirical C^alpha seminorm: max |u(a) - u(b)| / |a - b|^alpha over
    neighbouring node pairs and a seeded sample of random pairs.
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must lie in (0, 1], got {alpha}")
    grid = u.grid
    U = u.as_array()
    Z = grid.nodes.reshape(grid.shape)

    def quotient(da: np.ndarray, dz: np.ndarray) -> float:
        ok = dz > 0
        return float(np.max(np.abs(da[ok]) / dz[ok] ** alpha)) if np.any(ok) else 0.0

    best = quotient(U[1:] - U[:-1], np.abs(Z[1:] - Z[:-1]))
    best = max(best, quotient(np.roll(U, -1, axis=1) - U, np.abs(np.roll(Z, -1, axis=1) - Z)))
    rng = np.random.default_rng(seed)
    i = rng.integers(0, grid.node_count, pair_count)
    j = rng.integers(0, grid.node_count, pair_count)
    best = max(best, quotient(u.values[i] - u.values[j], np.abs(grid.nodes[i] - grid.nodes[j])))
    return best


def holder_exponent_estimate(family: Sequence[Tuple[complex, GridFunction]],
                             pair_budget: int, seed: int = 0) -> Dict[str, float]:
    """
    Hoelder exponent of z -> tu_z in the sup norm by log-log regression.

    Args:
        family: (z, tu_z) samples on a common grid, at least 8
        pair_budget: Maximum number of (z', z'') pairs entering the fit
        seed: Seed of the pair subsampling

    Returns:
        Dict with alpha_hat clamped to [0, 1], fit_quality (R^2) and pair_count
    """
    if len(family) < MIN_HOLDER_SAMPLES:
        raise InvalidArgumentError(
            f"need at least {MIN_HOLDER_SAMPLES} parameter samples, got {len(family)}"
        )
    if pair_budget < 2:
        raise InvalidArgumentError(f"pair_budget must be >= 2, got {pair_budget}")
    _check_same_grid(*[tu for _, tu in family])

    pairs = list(combinations(range(len(family)), 2))
    if len(pairs) > pair_budget:
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(pairs), size=pair_budget, replace=False)
        pairs = [pairs[k] for k in sorted(chosen)]

    dz, dv = [], []
    for i, j in pairs:
        (zi, ti), (zj, tj) = family[i], family[j]
        dz.append(abs(complex(zi) - complex(zj)))
        dv.append(float(np.max(np.abs(ti.values - tj.values))))
    dz_arr = np.asarray(dz)
    dv_arr = np.asarray(dv)
    usable = (dz_arr > 0) & (dv_arr > 0)

    if np.count_nonzero(usable) < 2:
        # differences vanish: constant in z
        return {"alpha_hat": 1.0, "fit_quality": 1.0, "pair_count": len(pairs)}

    x = np.log(dz_arr[usable])
    y = np.log(dv_arr[usable])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    spread = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((y - fitted) ** 2)) / spread if spread > 0 else 1.0
    alpha_hat = float(np.clip(slope, 0.0, 1.0))
    logger.debug(f"Hoelder fit: slope={slope:.3f} R^2={r_squared:.3f} pairs={usable.sum()}")
    return {"alpha_hat": alpha_hat, "fit_quality": r_squared, "pair_count": len(pairs)}


def area_lemma_check(roots: Sequence[complex], delta: float, sample_count: int,
                     seed: int = 0) -> Dict[str, Any]:
    """
    Monte-Carlo check of the sublevel-set area and |w|^-1 integral bounds
    for E = {|p(w)| < delta}, p monic with the given roots.

    Points are drawn with radius uniform on [0, R] and uniform angle in the
    disc of radius R = max|w_j| + delta^(1/n), which contains E; weighting
    by 2 pi R |w| makes the area and integral estimators unbiased.

    Args:
        roots: Zeros of p, inside the unit disc
        delta: Sublevel threshold
        sample_count: Number of samples, at least 10^4
        seed: 64-bit seed of the generator

    Returns:
        Dict of measured values, bounds, standard errors and the seed
    """
    if sample_count < MIN_MONTE_CARLO_SAMPLES:
        raise InvalidArgumentError(
            f"sample_count must be >= {MIN_MONTE_CARLO_SAMPLES}, got {sample_count}"
        )
    if delta <= 0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    roots = np.asarray(list(roots), dtype=complex)
    if roots.size == 0:
        raise InvalidArgumentError("at least one root is required")
    if np.any(np.abs(roots) >= 1.0):
        raise OutOfDomainError("roots must lie in the unit disc")

    n = roots.size
    reach = float(np.max(np.abs(roots))) + delta ** (1.0 / n)
    rng = np.random.default_rng(seed)
    radius = rng.uniform(0.0, reach, sample_count)
    angle = rng.uniform(0.0, 2.0 * np.pi, sample_count)
    w = radius * np.exp(1j * angle)

    p = np.ones(sample_count, dtype=complex)
    for root in roots:
        p = p * (w - root)
    inside = np.abs(p) < delta

    area_samples = 2.0 * np.pi * reach * radius * inside
    integral_samples = 2.0 * np.pi * reach * inside
    measured_area = float(area_samples.mean())
    measured_integral = float(integral_samples.mean())
    area_se = float(area_samples.std(ddof=1) / np.sqrt(sample_count))
    integral_se = float(integral_samples.std(ddof=1) / np.sqrt(sample_count))

    area_bound = float(np.pi * n * delta ** (2.0 / n))
    integral_bound = float(2.0 * np.sqrt(np.pi * measured_area))
    # the integral bound inherits the error of the measured area
    bound_se = float(np.sqrt(np.pi / measured_area) * area_se) if measured_area > 0 else 0.0
    combined_se = float(np.hypot(integral_se, bound_se))
    result = {
        "measured_area": measured_area,
        "area_bound": area_bound,
        "area_stderr": area_se,
        "measured_integral": measured_integral,
        "integral_bound": integral_bound,
        "integral_stderr": integral_se,
        "area_within_bound": measured_area <= area_bound + 3.0 * area_se,
        "integral_within_bound": measured_integral <= integral_bound + 3.0 * combined_se,
        "sample_count": int(sample_count),
        "seed": int(seed),
        "delta": float(delta),
        "degree": int(n),
    }
    logger.debug(f"area lemma check: {result}")
    return result

"""
Pseudo-holomorphic discs for the quasi-linear system

    z_zetabar = a(z, w) conj(z_zeta),    w_zetabar = b(z, w) conj(z_zeta)

with |z| = 1 and |w| = r on the unit circle. The substitution
z = zeta e^u, w = r e^{it} (zeta/zeta0)^n e^v turns the circle conditions
into Re u = Re v = 0, which the modified Cauchy-Green operator T1
preserves, so both logs are found by damped Picard iteration.
"""
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
from joblib import Parallel, delayed
from loguru import logger
from pydantic import BaseModel, Field

from config import get_settings
from errors import (
    DegenerateJacobianError, DiscsError, EllipticityError, HypothesisViolationError,
    InvalidArgumentError, NoConvergenceError, WindingMismatchError,
)
from grid import CircleFunction, DiscGrid, GridFunction, dbar, dz, interior_mask, make_polar_grid
from singint import modified_boundary_trace, modified_cauchy_green, modified_cauchy_green_grid
from vekua import argument_increment

Evaluable = Callable[[np.ndarray, np.ndarray], np.ndarray]

# rings next to the edge excluded from the PDE residuals
RESIDUAL_BAND = 3


class SolverConfig(BaseModel):
    """Discretization and iteration controls of the disc solver."""

    radial_count: int = Field(default=128, ge=8)
    angular_count: int = Field(default=256, ge=8)
    max_iterations: int = Field(default=300, ge=1)
    contraction_tol: float = Field(default=1e-9, ge=1e-10)
    damping: float = Field(default=0.7, gt=0.0, le=1.0)
    ellipticity_bound: float = Field(default=0.95, gt=0.0, lt=1.0)
    residual_tol: float = Field(default=2e-2, gt=0.0)

    @property
    def grid(self) -> DiscGrid:
        return make_polar_grid(self.radial_count, self.angular_count)

    @classmethod
    def from_settings(cls, **overrides: Any) -> "SolverConfig":
        settings = get_settings()
        values = {
            "radial_count": settings.default_radial_count,
            "angular_count": settings.default_angular_count,
        }
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "SolverConfig":
        payload = orjson.loads(Path(path).read_bytes())
        grid = payload.pop("grid", None)
        if grid:
            payload.setdefault("radial_count", grid["radial_count"])
            payload.setdefault("angular_count", grid["angular_count"])
        return cls(**payload)


class StructureCoefficients:
    """
    Coefficients (a, b) of the disc system, evaluable on arrays of (z, w).

    Args:
        a: Callable a(z, w)
        b: Callable b(z, w)
        a0: Declared bound |a| <= a0 < 1
        lipschitz_w: Declared Lipschitz constant in w
        name: Label used in summaries
        w_radius: Radius of the w-disc on which the bounds are declared
    """

    def __init__(self, a: Evaluable, b: Evaluable, a0: float, lipschitz_w: float,
                 name: str = "custom", w_radius: float = 1.0):
        if not 0.0 <= a0 < 1.0:
            raise InvalidArgumentError(f"a0 must lie in [0, 1), got {a0}")
        self.a = a
        self.b = b
        self.a0 = float(a0)
        self.lipschitz_w = float(lipschitz_w)
        self.name = name
        self.w_radius = float(w_radius)

    def evaluate(self, z: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        a = np.broadcast_to(np.asarray(self.a(z, w), dtype=complex), z.shape)
        b = np.broadcast_to(np.asarray(self.b(z, w), dtype=complex), z.shape)
        return a, b

    def validate(self, lattice_size: int = 24, tol: float = 1e-10) -> Dict[str, float]:
        """
        Spot-check |a| <= a0 and a(z, 0) = b(z, 0) = 0 on a polar lattice.

        Raises:
            HypothesisViolationError: if a check fails
        """
        radii = np.linspace(0.0, 1.0, lattice_size)
        angles = 2.0 * np.pi * np.arange(lattice_size) / lattice_size
        disc = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
        z = np.repeat(disc, disc.size)
        w = np.tile(disc * self.w_radius, disc.size)
        a, _ = self.evaluate(z, w)
        a_max = float(np.max(np.abs(a)))
        a_zero, b_zero = self.evaluate(disc, np.zeros_like(disc))
        at_zero = float(max(np.max(np.abs(a_zero)), np.max(np.abs(b_zero))))

        if a_max > self.a0 + tol:
            raise HypothesisViolationError(
                f"{self.name}: max |a| = {a_max:.4g} exceeds declared a0 = {self.a0}", a_max=a_max
            )
        if at_zero > tol:
            raise HypothesisViolationError(
                f"{self.name}: a(z, 0), b(z, 0) do not vanish (max {at_zero:.3e})", at_zero=at_zero
            )
        return {"a_max": a_max, "at_zero": at_zero}

    def summary(self) -> Dict[str, Any]:
        return {"name": self.name, "a0": self.a0, "lipschitz_w": self.lipschitz_w,
                "w_radius": self.w_radius}


class DiscSolution:
    """A computed disc (z, w) on the zeta-grid with its diagnostics."""

    def __init__(self, z_fn: GridFunction, w_fn: GridFunction, u_fn: GridFunction,
                 v_fn: GridFunction, z_boundary: CircleFunction, w_boundary: CircleFunction,
                 params: Dict[str, Any], diagnostics: Dict[str, Any]):
        self.z_fn = z_fn
        self.w_fn = w_fn
        self.u_fn = u_fn
        self.v_fn = v_fn
        self.z_boundary = z_boundary
        self.w_boundary = w_boundary
        self.params = params
        self.diagnostics = diagnostics

    def summary(self) -> Dict[str, Any]:
        return {"params": dict(self.params), "diagnostics": dict(self.diagnostics)}

    def distance_to(self, other: "DiscSolution") -> Dict[str, float]:
        return {
            "z": float(np.max(np.abs(self.z_fn.values - other.z_fn.values))),
            "w": float(np.max(np.abs(self.w_fn.values - other.w_fn.values))),
        }


def winding_number(trace: CircleFunction) -> int:
    """Winding number of a non-vanishing circle trace, any sign."""
    winding, confidence = argument_increment(trace)
    logger.debug(f"winding {winding} (distance from integer {confidence:.2e})")
    return winding


def _gauged(rhs: GridFunction, anchor: complex) -> Tuple[GridFunction, np.ndarray]:
    """T1 rhs shifted by an imaginary constant so that it vanishes at the anchor."""
    shift = modified_cauchy_green(rhs, anchor)
    values = modified_cauchy_green_grid(rhs)
    boundary = modified_boundary_trace(rhs).values
    return values.with_values(values.values - shift), boundary - shift


def solve_rh_index0(rhs: Evaluable, a_coef: Evaluable, cfg: SolverConfig,
                    initial: Optional[GridFunction] = None) -> GridFunction:
    """
    Solve u_zbar + a(z, u) u_z = rhs(z, u) with Re u = 0 on the circle and u(1) = 0.

    Args:
        rhs: Callable rhs(z, u) on node arrays
        a_coef: Callable a(z, u) on node arrays
        cfg: Solver configuration
        initial: Optional starting iterate

    Returns:
        GridFunction u
    """
    grid = cfg.grid
    z = grid.nodes
    u = initial if initial is not None else GridFunction(grid, np.zeros(grid.node_count))

    for iteration in range(1, cfg.max_iterations + 1):
        a = np.broadcast_to(np.asarray(a_coef(z, u.values), dtype=complex), z.shape)
        a_max = float(np.max(np.abs(a)))
        if a_max > cfg.ellipticity_bound:
            raise EllipticityError(
                f"|a| = {a_max:.4f} exceeds the ellipticity bound {cfg.ellipticity_bound}",
                a_max=a_max, iterations=iteration,
            )
        forcing = np.broadcast_to(np.asarray(rhs(z, u.values), dtype=complex), z.shape)
        density = u.with_values(forcing - a * dz(u).values)
        target, _ = _gauged(density, 1.0)
        step = cfg.damping * (target.values - u.values)
        change = float(np.max(np.abs(step)))
        u = u.with_values(u.values + step)
        logger.debug(f"RH iteration {iteration}: change {change:.3e}")
        if not np.isfinite(change):
            raise NoConvergenceError("iteration diverged", residual=change, iterations=iteration)
        if change < cfg.contraction_tol:
            logger.info(f"Riemann-Hilbert solve converged in {iteration} iterations")
            return u

    raise NoConvergenceError(
        f"no convergence in {cfg.max_iterations} iterations (last change {change:.3e})",
        residual=change, iterations=cfg.max_iterations,
    )


def _assemble(grid: DiscGrid, u: np.ndarray, v: np.ndarray, n: int, scale: complex):
    zeta = grid.nodes
    z = zeta * np.exp(u)
    w = scale * zeta ** n * np.exp(v)
    return zeta, z, w


def solve_disc(coeffs: StructureCoefficients, n: int, r: float, t: float, cfg: SolverConfig,
               initial: Optional[Tuple[GridFunction, GridFunction]] = None,
               anchor_angle: float = 0.0) -> DiscSolution:
    """
    Disc with |z| = 1, |w| = r on the circle, z(0) = 0, z(1) = 1, w(zeta0) = r e^{it}.

    Args:
        coeffs: Structure coefficients (a, b)
        n: Winding number of w along the circle, n >= 0
        r: Boundary radius of w, in (0, 1]
        t: Boundary phase of w at the anchor
        cfg: Solver configuration
        initial: Optional (u, v) starting iterate
        anchor_angle: Angle of the anchor point zeta0 on the circle

    Returns:
        DiscSolution with residual, boundary, winding, Jacobian and decay diagnostics
    """
    if int(n) != n or n < 0:
        raise InvalidArgumentError(f"n must be a non-negative integer, got {n}")
    if not 0.0 < r <= 1.0:
        raise InvalidArgumentError(f"r must lie in (0, 1], got {r}")
    n = int(n)
    t = float(t) % (2.0 * np.pi)
    grid = cfg.grid
    zeta = grid.nodes
    anchor = complex(np.exp(1j * anchor_angle))
    scale = r * np.exp(1j * t) * anchor ** (-n)

    if initial is not None:
        u, v = initial
        if not (u.grid.same_as(grid) and v.grid.same_as(grid)):
            raise InvalidArgumentError("initial iterate lives on a different grid")
    else:
        u = GridFunction(grid, np.zeros(grid.node_count))
        v = GridFunction(grid, np.zeros(grid.node_count))
    u_edge = np.zeros(grid.angular_count, dtype=complex)
    v_edge = np.zeros(grid.angular_count, dtype=complex)

    logger.info(f"Solving disc {coeffs.name}: n={n} r={r} t={t:.4f} on {grid!r}")
    change = float("inf")
    for iteration in range(1, cfg.max_iterations + 1):
        _, z, w = _assemble(grid, u.values, v.values, n, scale)
        a, b = coeffs.evaluate(z, w)
        a_max = float(np.max(np.abs(a)))
        if a_max > cfg.ellipticity_bound:
            raise EllipticityError(
                f"|a| = {a_max:.4f} exceeds the ellipticity bound {cfg.ellipticity_bound}",
                a_max=a_max, iterations=iteration,
            )
        u_zeta = dz(u).values
        z_zeta = np.exp(u.values) * (1.0 + zeta * u_zeta)
        rhs_u = a * np.exp(np.conj(u.values) - u.values) * np.conj(1.0 + zeta * u_zeta) / zeta
        rhs_v = b / w * np.conj(z_zeta)

        u_target, u_target_edge = _gauged(u.with_values(rhs_u), 1.0)
        v_target, v_target_edge = _gauged(v.with_values(rhs_v), anchor)

        du = cfg.damping * (u_target.values - u.values)
        dv = cfg.damping * (v_target.values - v.values)
        u = u.with_values(u.values + du)
        v = v.with_values(v.values + dv)
        u_edge = u_edge + cfg.damping * (u_target_edge - u_edge)
        v_edge = v_edge + cfg.damping * (v_target_edge - v_edge)

        change = float(max(np.max(np.abs(du)), np.max(np.abs(dv))))
        logger.debug(f"disc iteration {iteration}: change {change:.3e}")
        if not np.isfinite(change):
            raise NoConvergenceError("iteration diverged", residual=change, iterations=iteration)
        if change < cfg.contraction_tol:
            break
    else:
        raise NoConvergenceError(
            f"no convergence in {cfg.max_iterations} iterations (last change {change:.3e})",
            residual=change, iterations=cfg.max_iterations,
        )

    _, z, w = _assemble(grid, u.values, v.values, n, scale)
    z_fn = GridFunction(grid, z)
    w_fn = GridFunction(grid, w)
    theta = 2.0 * np.pi * np.arange(grid.angular_count) / grid.angular_count
    edge = np.exp(1j * theta)
    z_boundary = CircleFunction(edge * np.exp(u_edge))
    w_boundary = CircleFunction(scale * edge ** n * np.exp(v_edge))

    diagnostics = _diagnostics(coeffs, z_fn, w_fn, u, z_boundary, w_boundary, n, r)
    diagnostics["iterations"] = iteration
    diagnostics["final_change"] = change
    if diagnostics["jacobian_min"] <= 0.0:
        raise DegenerateJacobianError(
            f"zeta -> z is not a diffeomorphism (jacobian_min = {diagnostics['jacobian_min']:.3e})",
            jacobian_min=diagnostics["jacobian_min"],
        )
    if diagnostics["winding_w"] != n:
        raise WindingMismatchError(
            f"boundary winding {diagnostics['winding_w']} differs from n = {n}",
            winding=diagnostics["winding_w"], n=n,
        )
    residual = max(diagnostics["residual_z"], diagnostics["residual_w"])
    if residual > cfg.residual_tol:
        raise NoConvergenceError(
            f"PDE residual {residual:.3e} exceeds {cfg.residual_tol:.1e} after {iteration} iterations",
            residual=residual, iterations=iteration,
        )
    logger.info(
        f"Disc converged in {iteration} iterations: residual_z={diagnostics['residual_z']:.2e} "
        f"residual_w={diagnostics['residual_w']:.2e} jacobian_min={diagnostics['jacobian_min']:.3f}"
    )
    params = {"n": n, "r": float(r), "t": t, "anchor_angle": float(anchor_angle),
              "coefficients": coeffs.name}
    return DiscSolution(z_fn, w_fn, u, v, z_boundary, w_boundary, params, diagnostics)


def _diagnostics(coeffs: StructureCoefficients, z_fn: GridFunction, w_fn: GridFunction,
                 u: GridFunction, z_boundary: CircleFunction, w_boundary: CircleFunction,
                 n: int, r: float) -> Dict[str, Any]:
    grid = z_fn.grid
    zeta = grid.nodes
    mask = interior_mask(grid, band=RESIDUAL_BAND)
    a, b = coeffs.evaluate(z_fn.values, w_fn.values)

    z_bar_deriv = dbar(z_fn).values
    z_deriv = dz(z_fn).values
    w_bar_deriv = dbar(w_fn).values
    residual_z = np.abs(z_bar_deriv - a * np.conj(z_deriv))
    residual_w = np.abs(w_bar_deriv - b * np.conj(z_deriv))

    # Jacobian from the ansatz derivatives
    u_zeta = dz(u).values
    u_zetabar = dbar(u).values
    z_zeta = np.exp(u.values) * (1.0 + zeta * u_zeta)
    z_zetabar = zeta * np.exp(u.values) * u_zetabar
    jacobian = np.abs(z_zeta) ** 2 - np.abs(z_zetabar) ** 2

    decay = np.abs(w_fn.values) / (r * np.abs(zeta) ** n)
    return {
        "residual_z": float(np.max(residual_z[mask])),
        "residual_w": float(np.max(residual_w[mask])),
        "boundary_err_z": float(np.max(np.abs(np.abs(z_boundary.values) - 1.0))),
        "boundary_err_w": float(np.max(np.abs(np.abs(w_boundary.values) - r))),
        "winding_w": winding_number(w_boundary),
        "jacobian_min": float(np.min(jacobian[mask])),
        "decay_constant": float(np.max(decay)),
        "z_at_one_err": float(abs(z_boundary.values[0] - 1.0)),
    }


def elimination_residual(solution: DiscSolution, coeffs: StructureCoefficients) -> float:
    """
    Max interior |w_zbar + a w_z - b| with w read as a function of z.

    The chain rule gives per node
        [w_zeta   ]   [z_zeta     conj(z_zetabar)] [w_z   ]
        [w_zetabar] = [z_zetabar  conj(z_zeta)   ] [w_zbar]
    """
    z_fn, w_fn = solution.z_fn, solution.w_fn
    z_zeta = dz(z_fn).values
    z_zetabar = dbar(z_fn).values
    w_zeta = dz(w_fn).values
    w_zetabar = dbar(w_fn).values

    det = np.abs(z_zeta) ** 2 - np.abs(z_zetabar) ** 2
    w_z = (np.conj(z_zeta) * w_zeta - np.conj(z_zetabar) * w_zetabar) / det
    w_zbar = (z_zeta * w_zetabar - z_zetabar * w_zeta) / det
    a, b = coeffs.evaluate(z_fn.values, w_fn.values)
    defect = np.abs(w_zbar + a * w_z - b)
    return float(np.max(defect[interior_mask(z_fn.grid, band=RESIDUAL_BAND)]))


def homotopy_sweep(coeffs: StructureCoefficients, n: int, t: float, radii: Sequence[float],
                   cfg: SolverConfig) -> List[DiscSolution]:
    """
    Solve along increasing radii, warm-starting each solve from the previous one.

    Raises:
        InvalidArgumentError: if radii are not strictly increasing in (0, 1]
    """
    radii = [float(x) for x in radii]
    if not radii:
        raise InvalidArgumentError("radii must not be empty")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InvalidArgumentError(f"radii must be strictly increasing, got {radii}")
    if radii[0] <= 0.0 or radii[-1] > 1.0:
        raise InvalidArgumentError("radii must lie in (0, 1]")

    solutions: List[DiscSolution] = []
    initial = None
    for radius in radii:
        logger.info(f"Sweep radius {radius:.4f}")
        try:
            solution = solve_disc(coeffs, n, radius, t, cfg, initial=initial)
        except DiscsError as exc:
            exc.details["radius"] = radius
            exc.message = f"{exc.message} (at r = {radius})"
            exc.args = (exc.message,)
            raise
        solutions.append(solution)
        initial = (solution.u_fn, solution.v_fn)
    return solutions


def consecutive_distances(solutions: Sequence[DiscSolution]) -> List[Dict[str, float]]:
    return [b.distance_to(a) for a, b in zip(solutions, solutions[1:])]


def torus_fill_check(coeffs: StructureCoefficients, n: int, r: float, t_samples: int,
                     cfg: SolverConfig, n_jobs: Optional[int] = None) -> Dict[str, Any]:
    """
    Fraction of the torus |z| = 1, |w| = r reached by disc boundaries as t varies.

    Bins are an angular lattice of (angular_count // 8) x t_samples cells on
    the product of the two circles, offset by half a bin.

    Args:
        coeffs: Structure coefficients
        n: Winding number
        r: Boundary radius of w
        t_samples: Number of equispaced phases t, at least 16
        cfg: Solver configuration
        n_jobs: joblib workers, defaults to Settings.n_jobs

    Returns:
        Dict with coverage_fraction, bin counts and the worst boundary error
    """
    if t_samples < 16:
        raise InvalidArgumentError(f"t_samples must be >= 16, got {t_samples}")
    n_jobs = get_settings().n_jobs if n_jobs is None else n_jobs
    phases = 2.0 * np.pi * np.arange(t_samples) / t_samples

    solutions = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(solve_disc)(coeffs, n, r, t, cfg) for t in phases
    )

    z_bins = max(1, cfg.angular_count // 8)
    w_bins = t_samples
    occupied = np.zeros((z_bins, w_bins), dtype=bool)
    worst = 0.0
    for solution in solutions:
        z_arg = np.angle(solution.z_boundary.values) % (2.0 * np.pi)
        w_arg = np.angle(solution.w_boundary.values) % (2.0 * np.pi)
        zi = np.floor(z_arg / (2.0 * np.pi) * z_bins + 0.5).astype(int) % z_bins
        wi = np.floor(w_arg / (2.0 * np.pi) * w_bins + 0.5).astype(int) % w_bins
        occupied[zi, wi] = True
        worst = max(worst, solution.diagnostics["boundary_err_z"], solution.diagnostics["boundary_err_w"])

    coverage = float(occupied.mean())
    logger.info(f"Torus coverage {coverage:.3f} over {z_bins}x{w_bins} bins")
    return {
        "coverage_fraction": coverage,
        "z_bins": z_bins,
        "w_bins": w_bins,
        "t_samples": t_samples,
        "max_boundary_err": worst,
    }

"""
Singular integral operators on the unit disc.

    T u(w)  = -(1/pi) ∬_D u(tau) / (tau - w) dA          (Cauchy-Green)
    T1 u(w) = T u(w) - (1/pi) ∬_D w conj(u(tau)) / (1 - w conj(tau)) dA
    K g(w)  = (1/2 pi i) ∮ g(zeta) / (zeta - w) dzeta    (circle Cauchy)

T1 differs from T by a function holomorphic in w, so dbar T1 u = u, and
its real part vanishes on the unit circle.

The default rule integrates the kernel exactly in angle and radius over
each polar cell with the density frozen at the node, using the angular
Fourier modes of the density ring by ring. The cell-average rule sums the
kernel at the nodes and averages it over a sub-grid of each cell near w.
"""
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from errors import InvalidArgumentError, OutOfDomainError
from grid import CircleFunction, DiscGrid, GridFunction

BOUNDARY_SLACK = 1e-12
SUBCELL_COUNT = 8
TARGET_CHUNK = 512


class CorrectionRule(str, Enum):
    POLAR_DESINGULARIZED = "polar-desingularized"
    CELL_AVERAGE = "cell-average"


class KernelQuadratureConfig(BaseModel):
    """Evaluation of the Cauchy kernel near its singularity."""

    singularity_exclusion_radius: float = Field(default=1.5, ge=0.5, le=4.0)
    correction_rule: CorrectionRule = CorrectionRule.POLAR_DESINGULARIZED

    model_config = {"frozen": True}


DEFAULT_QUADRATURE = KernelQuadratureConfig()


# ---------------------------------------------------------------------------
# Fourier-mode machinery
# ---------------------------------------------------------------------------

def _modes(angular_count: int) -> np.ndarray:
    return np.rint(np.fft.fftfreq(angular_count, 1.0 / angular_count)).astype(int)


def _density_modes(u: GridFunction) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ring-wise Fourier coefficients f_m(rho_j) of u.

    Returns:
        Tuple of (c, shifted) with c[j, index(m)] = f_m and
        shifted[j, index(m)] = f_{m+1}
    """
    T = u.grid.angular_count
    c = np.fft.fft(u.as_array(), axis=1) / T
    shifted = np.roll(c, -1, axis=1)
    # m = T/2 - 1 would pick the aliased Nyquist coefficient
    shifted[:, T // 2 - 1] = 0.0
    return c, shifted


def _mode_weights(s: float, edges: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """
    Radial weights W[m, j] with T_m(s) = sum_j W[m, j] f_{m+1}(rho_j).

    Inner region rho < s feeds the modes m <= -1, outer region rho > s the
    modes m >= 0; each cell is clipped at s.
    """
    lo = edges[:-1][None, :]
    hi = edges[1:][None, :]
    weights = np.zeros((modes.size, lo.shape[1]))

    neg = modes < 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if s > 0:
            k = -modes[neg][:, None]
            a = lo
            b = np.minimum(hi, s)
            inner = (b * (b / s) ** k - a * (a / s) ** k) / (k + 1)
            weights[neg] = 2.0 * np.where(b > a, inner, 0.0)

        m = modes[~neg][:, None]
        a = np.maximum(lo, s)
        b = hi
        general = (a * (s / a) ** m - b * (s / b) ** m) / np.where(m > 1, m - 1, 1)
        outer = np.where(m == 0, b - a, np.where(m == 1, s * np.log(b / a), general))
        weights[~neg] = -2.0 * np.where(b > a, outer, 0.0)

    # s = 0 leaves 0/0 limits that are exactly zero
    weights[~np.isfinite(weights)] = 0.0
    weights[modes == -(modes.size // 2)] = 0.0
    return weights


@lru_cache(maxsize=2)
def _grid_weights(radial_count: int, angular_count: int) -> np.ndarray:
    """Stack of _mode_weights at every ring radius, shape (R, T, R)."""
    grid = DiscGrid(radial_count, angular_count)
    modes = _modes(angular_count)
    logger.debug(f"Caching Cauchy-Green weights for {grid!r}")
    return np.stack([_mode_weights(s, grid.radial_edges, modes) for s in grid.radii])


def _correction_coefficients(c: np.ndarray, edges: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """
    Coefficients G_m with correction mode m equal to G_m * s^m (m >= 1).
    """
    T = modes.size
    out = np.zeros(T, dtype=complex)
    positive = np.flatnonzero(modes >= 1)
    m = modes[positive]
    source = (1 - m) % T
    lo = edges[:-1][None, :]
    hi = edges[1:][None, :]
    moments = (hi ** (m[:, None] + 1) - lo ** (m[:, None] + 1)) / (m[:, None] + 1)
    out[positive] = -2.0 * np.sum(np.conj(c[:, source].T) * moments, axis=1)
    return out


def _check_disc(w: complex) -> complex:
    w = complex(w)
    if not np.isfinite(w) or abs(w) > 1.0 + BOUNDARY_SLACK:
        raise OutOfDomainError(f"|w| = {abs(w):.6g} lies outside the closed unit disc", point=w)
    return w


def _polar_at(u: GridFunction, w: complex, modified: bool) -> complex:
    grid = u.grid
    modes = _modes(grid.angular_count)
    c, shifted = _density_modes(u)
    s = min(abs(w), 1.0)
    theta = float(np.angle(w))
    tm = np.sum(_mode_weights(s, grid.radial_edges, modes) * shifted.T, axis=1)
    if modified:
        tm = tm + _correction_coefficients(c, grid.radial_edges, modes) * s ** np.maximum(modes, 0)
    return complex(np.sum(tm * np.exp(1j * modes * theta)))


def _polar_grid(u: GridFunction, modified: bool) -> np.ndarray:
    grid = u.grid
    T = grid.angular_count
    modes = _modes(T)
    c, shifted = _density_modes(u)
    weights = _grid_weights(grid.radial_count, T)
    tm = np.einsum("ikj,jk->ik", weights, shifted)
    if modified:
        g = _correction_coefficients(c, grid.radial_edges, modes)
        tm = tm + g[None, :] * grid.radii[:, None] ** np.maximum(modes, 0)[None, :]
    return np.fft.ifft(tm, axis=1) * T


# ---------------------------------------------------------------------------
# Cell-average rule
# ---------------------------------------------------------------------------

def _subcell_kernel(grid: DiscGrid, cells: np.ndarray, points: np.ndarray) -> np.ndarray:
    """∫_cell dA / (tau - w) by an 8x8 midpoint sub-grid, one value per (cell, point)."""
    ring = cells // grid.angular_count
    k = cells % grid.angular_count
    offsets = (np.arange(SUBCELL_COUNT) + 0.5) / SUBCELL_COUNT
    rho = grid.radial_edges[ring][:, None] + offsets[None, :] * grid.radial_step
    phi = grid.angles[k][:, None] + (offsets[None, :] - 0.5) * grid.angular_step
    tau = rho[:, :, None] * np.exp(1j * phi[:, None, :])
    area = (rho * grid.radial_step / SUBCELL_COUNT)[:, :, None] * (grid.angular_step / SUBCELL_COUNT)
    return np.sum(area / (tau - points[:, None, None]), axis=(1, 2))


def _cell_average(u: GridFunction, targets: np.ndarray, cfg: KernelQuadratureConfig,
                  modified: bool) -> np.ndarray:
    grid = u.grid
    tau = grid.nodes
    area = grid.quadrature_weights
    reach = cfg.singularity_exclusion_radius * np.sqrt(area)
    out = np.empty(targets.shape, dtype=complex)

    for start in range(0, targets.size, TARGET_CHUNK):
        w = targets[start:start + TARGET_CHUNK]
        diff = tau[None, :] - w[:, None]
        near = np.abs(diff) < reach[None, :]
        kernel = np.where(near, 0.0, 1.0 / np.where(near, 1.0, diff))
        acc = kernel @ (u.values * area)
        rows, cols = np.nonzero(near)
        if rows.size:
            np.add.at(acc, rows, u.values[cols] * _subcell_kernel(grid, cols, w[rows]))
        if modified:
            # smooth kernel for |w| <= 1 away from tau on the circle
            reflected = w[:, None] / (1.0 - w[:, None] * np.conj(tau)[None, :])
            acc = acc + reflected @ (np.conj(u.values) * area)
        out[start:start + TARGET_CHUNK] = -acc / np.pi
    return out


# ---------------------------------------------------------------------------
# Public operators
# ---------------------------------------------------------------------------

def cauchy_green(u: GridFunction, w: complex,
                 cfg: KernelQuadratureConfig = DEFAULT_QUADRATURE) -> complex:
    """
    Cauchy-Green transform Tu at one point of the closed disc.

    Args:
        u: Density sampled on a polar grid
        w: Evaluation point, |w| <= 1
        cfg: Near-singularity handling

    Returns:
        Tu(w)
    """
    w = _check_disc(w)
    if cfg.correction_rule is CorrectionRule.CELL_AVERAGE:
        return complex(_cell_average(u, np.array([w]), cfg, modified=False)[0])
    return _polar_at(u, w, modified=False)


def modified_cauchy_green(u: GridFunction, w: complex,
                          cfg: KernelQuadratureConfig = DEFAULT_QUADRATURE) -> complex:
    """T1 u at one point: dbar T1 u = u and Re T1 u = 0 on the circle."""
    w = _check_disc(w)
    if cfg.correction_rule is CorrectionRule.CELL_AVERAGE:
        return complex(_cell_average(u, np.array([w]), cfg, modified=True)[0])
    return _polar_at(u, w, modified=True)


def cauchy_green_grid(u: GridFunction,
                      cfg: KernelQuadratureConfig = DEFAULT_QUADRATURE) -> GridFunction:
    """Tu at every node of u's grid."""
    if cfg.correction_rule is CorrectionRule.CELL_AVERAGE:
        return u.with_values(_cell_average(u, u.grid.nodes, cfg, modified=False))
    return u.with_values(_polar_grid(u, modified=False))


def modified_cauchy_green_grid(u: GridFunction,
                               cfg: KernelQuadratureConfig = DEFAULT_QUADRATURE) -> GridFunction:
    """T1 u at every node of u's grid."""
    if cfg.correction_rule is CorrectionRule.CELL_AVERAGE:
        return u.with_values(_cell_average(u, u.grid.nodes, cfg, modified=True))
    return u.with_values(_polar_grid(u, modified=True))


def modified_boundary_trace(u: GridFunction, angular_count: int = 0) -> CircleFunction:
    """
    T1 u on the unit circle at equispaced angles.

    Args:
        u: Density
        angular_count: Number of circle samples; defaults to the grid's angular count

    Returns:
        CircleFunction whose values are purely imaginary up to rounding
    """
    grid = u.grid
    T = grid.angular_count
    count = angular_count or T
    modes = _modes(T)
    c, shifted = _density_modes(u)
    tm = np.sum(_mode_weights(1.0, grid.radial_edges, modes) * shifted.T, axis=1)
    tm = tm + _correction_coefficients(c, grid.radial_edges, modes)
    if count == T:
        return CircleFunction(np.fft.ifft(tm) * T)
    angles = 2.0 * np.pi * np.arange(count) / count
    return CircleFunction(np.exp(1j * np.outer(angles, modes)) @ tm)


def cauchy_circle(g: CircleFunction, w: complex) -> complex:
    """
    Circle Cauchy integral Kg(w) by the trapezoid rule.

    Args:
        g: Equispaced samples on the unit circle
        w: Evaluation point, |w| < 1

    Returns:
        (1/N) sum_k g_k zeta_k / (zeta_k - w)
    """
    w = complex(w)
    if not np.isfinite(w) or abs(w) >= 1.0:
        raise OutOfDomainError(f"|w| = {abs(w):.6g} is not inside the unit circle", point=w)
    zeta = g.points
    return complex(np.mean(g.values * zeta / (zeta - w)))


def cauchy_circle_grid(g: CircleFunction, grid: DiscGrid) -> GridFunction:
    """Kg at every node of a grid."""
    zeta = g.points
    values = np.empty(grid.node_count, dtype=complex)
    for start in range(0, grid.node_count, TARGET_CHUNK):
        w = grid.nodes[start:start + TARGET_CHUNK]
        values[start:start + TARGET_CHUNK] = (zeta / (zeta[None, :] - w[:, None])) @ g.values / g.angular_count
    return GridFunction(grid, values)


def phase_transform_evaluation(n: int, w0: complex, w: complex) -> Dict[str, Any]:
    """
    Closed form of T applied to the n-th power of the phase of (tau - w0):

        (1/(n+1)) conj(w - w0)^(n+1) / (w - w0)^n

    Returns:
        Dict with the value and a removable_point flag, set at w = w0 where
        the value 0 is the continuous extension
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n}")
    w0 = complex(w0)
    w = _check_disc(w)
    if abs(w0) >= 1.0:
        raise OutOfDomainError(f"|w0| = {abs(w0):.6g} must be < 1", point=w0)
    d = w - w0
    if d == 0:
        logger.debug(f"phase transform evaluated at its removable point w = w0 = {w0}")
        return {"value": 0j, "removable_point": True}
    return {"value": complex(np.conj(d) ** (n + 1) / d ** n / (n + 1)), "removable_point": False}


def phase_transform_closed_form(n: int, w0: complex, w: complex) -> complex:
    """Value of :func:`phase_transform_evaluation`."""
    return phase_transform_evaluation(n, w0, w)["value"]

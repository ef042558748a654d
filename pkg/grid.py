"""
Polar discretization of the closed unit disc and of the unit circle.
Sampled complex functions and finite-difference Wirtinger derivatives.
"""
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd
from loguru import logger

from errors import EvaluationError, InvalidArgumentError

MIN_RADIAL_COUNT = 4
MIN_ANGULAR_COUNT = 8
MIN_DERIVATIVE_RADIAL_COUNT = 8


class DiscGrid:
    """
    Tensor-product polar grid with radial midpoints.

    Nodes are stored ring-major: node ``i * angular_count + k`` sits at
    radius ``radii[i]`` and angle ``angles[k] = 2*pi*k/angular_count``.
    No node lies at the origin or on the unit circle.
    """

    def __init__(self, radial_count: int, angular_count: int):
        self.radial_count = int(radial_count)
        self.angular_count = int(angular_count)

        self.radial_edges = np.linspace(0.0, 1.0, self.radial_count + 1)
        self.radii = 0.5 * (self.radial_edges[:-1] + self.radial_edges[1:])
        self.angles = 2.0 * np.pi * np.arange(self.angular_count) / self.angular_count
        self.radial_step = 1.0 / self.radial_count
        self.angular_step = 2.0 * np.pi / self.angular_count

        rr, tt = np.meshgrid(self.radii, self.angles, indexing="ij")
        self.nodes = (rr * np.exp(1j * tt)).ravel()

        # Exact polar cell areas: (hi^2 - lo^2)/2 * dtheta
        ring_area = 0.5 * (self.radial_edges[1:] ** 2 - self.radial_edges[:-1] ** 2) * self.angular_step
        self.quadrature_weights = np.repeat(ring_area, self.angular_count)

    @property
    def shape(self) -> tuple:
        return (self.radial_count, self.angular_count)

    @property
    def node_count(self) -> int:
        return self.radial_count * self.angular_count

    def same_as(self, other: "DiscGrid") -> bool:
        return self.shape == other.shape

    def metadata(self) -> Dict[str, int]:
        return {"radial_count": self.radial_count, "angular_count": self.angular_count}

    def __repr__(self) -> str:
        return f"DiscGrid({self.radial_count}x{self.angular_count})"


class GridFunction:
    """Complex values sampled at the nodes of a DiscGrid."""

    def __init__(self, grid: DiscGrid, values: Any):
        values = np.asarray(values, dtype=complex).ravel()
        if values.shape[0] != grid.node_count:
            raise InvalidArgumentError(
                f"GridFunction needs {grid.node_count} values, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise EvaluationError(f"non-finite value at node {grid.nodes[bad]}", node=grid.nodes[bad])
        self.grid = grid
        self.values = values

    def as_array(self) -> np.ndarray:
        """Values reshaped to (radial_count, angular_count)."""
        return self.values.reshape(self.grid.shape)

    def with_values(self, values: Any) -> "GridFunction":
        return GridFunction(self.grid, values)

    def conj(self) -> "GridFunction":
        return GridFunction(self.grid, np.conj(self.values))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_frame(self) -> pd.DataFrame:
        """CSV layout: one row per node."""
        return pd.DataFrame({
            "re_w": self.grid.nodes.real,
            "im_w": self.grid.nodes.imag,
            "re_val": self.values.real,
            "im_val": self.values.imag,
        })

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "grid": self.grid.metadata(),
            "re_val": self.values.real.tolist(),
            "im_val": self.values.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, payload: Dict[str, Any]) -> "GridFunction":
        grid = make_polar_grid(payload["grid"]["radial_count"], payload["grid"]["angular_count"])
        values = np.asarray(payload["re_val"]) + 1j * np.asarray(payload["im_val"])
        return cls(grid, values)


class CircleFunction:
    """Complex values at the equispaced points exp(i*theta_k) of the unit circle."""

    def __init__(self, values: Any):
        values = np.asarray(values, dtype=complex).ravel()
        if values.size == 0:
            raise InvalidArgumentError("CircleFunction needs at least one value")
        if not np.all(np.isfinite(values)):
            raise EvaluationError("non-finite value on the circle")
        self.values = values

    @property
    def angular_count(self) -> int:
        return self.values.shape[0]

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.angular_count) / self.angular_count

    @property
    def points(self) -> np.ndarray:
        return np.exp(1j * self.angles)

    @classmethod
    def from_function(cls, f: Callable, angular_count: int) -> "CircleFunction":
        points = np.exp(2j * np.pi * np.arange(angular_count) / angular_count)
        return cls(_evaluate(f, points))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "theta": self.angles,
            "re_val": self.values.real,
            "im_val": self.values.imag,
        })


def make_polar_grid(radial_count: int, angular_count: int) -> DiscGrid:
    """
    Build the polar midpoint grid of the unit disc.

    Args:
        radial_count: Number of rings (>= 4)
        angular_count: Number of angles per ring (>= 8)

    Returns:
        DiscGrid with exact polar cell areas as quadrature weights
    """
    if radial_count < MIN_RADIAL_COUNT or angular_count < MIN_ANGULAR_COUNT:
        raise InvalidArgumentError(
            f"grid {radial_count}x{angular_count} below minimum "
            f"{MIN_RADIAL_COUNT}x{MIN_ANGULAR_COUNT}",
            radial_count=radial_count, angular_count=angular_count,
        )
    grid = DiscGrid(radial_count, angular_count)
    logger.debug(f"Built polar grid {grid!r} with {grid.node_count} nodes")
    return grid


def _evaluate(f: Callable, points: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        try:
            values = np.asarray(f(points), dtype=complex)
        except (TypeError, ValueError, ZeroDivisionError):
            values = None
    if values is not None and values.ndim == 0:
        return np.full(points.shape, complex(values))
    if values is None or values.shape != points.shape:
        # scalar-only callables
        values = np.array([_evaluate_scalar(f, p) for p in points])
    return values


def _evaluate_scalar(f: Callable, point: complex) -> complex:
    with np.errstate(all="ignore"):
        try:
            return complex(f(point))
        except ZeroDivisionError:
            return complex(np.nan, np.nan)


def sample(f: Callable, grid: DiscGrid) -> GridFunction:
    """
    Sample a pointwise complex function at the grid nodes.

    Args:
        f: Callable on complex scalars or numpy arrays
        grid: Target grid

    Returns:
        GridFunction with values[k] = f(nodes[k])
    """
    values = _evaluate(f, grid.nodes)
    bad = ~np.isfinite(values)
    if np.any(bad):
        node = grid.nodes[int(np.flatnonzero(bad)[0])]
        raise EvaluationError(f"non-finite value at node {node}", node=node)
    return GridFunction(grid, values)


def _polar_partials(u: GridFunction):
    grid = u.grid
    if grid.radial_count < MIN_DERIVATIVE_RADIAL_COUNT:
        raise InvalidArgumentError(
            f"derivatives need radial_count >= {MIN_DERIVATIVE_RADIAL_COUNT}, got {grid.radial_count}"
        )
    U = u.as_array()
    h = grid.radial_step
    T = grid.angular_count

    U_rho = np.empty_like(U)
    U_rho[1:-1] = (U[2:] - U[:-2]) / (2.0 * h)
    U_rho[-1] = (3.0 * U[-1] - 4.0 * U[-2] + U[-3]) / (2.0 * h)
    if T % 2 == 0:
        # the point at radius -h/2 along theta is ring 0 at theta + pi
        ghost = np.roll(U[0], -T // 2)
        U_rho[0] = (U[1] - ghost) / (2.0 * h)
    else:
        U_rho[0] = (-3.0 * U[0] + 4.0 * U[1] - U[2]) / (2.0 * h)

    U_theta = (np.roll(U, -1, axis=1) - np.roll(U, 1, axis=1)) / (2.0 * grid.angular_step)
    return U_rho, U_theta


def dbar(u: GridFunction) -> GridFunction:
    """
    Second-order finite-difference d/d(wbar) = (d_x + i d_y)/2.

    In polar form d/d(wbar) = exp(i theta)/2 * (d_rho + (i/rho) d_theta).
    """
    U_rho, U_theta = _polar_partials(u)
    grid = u.grid
    rho = grid.radii[:, None]
    phase = np.exp(1j * grid.angles)[None, :]
    return GridFunction(grid, 0.5 * phase * (U_rho + 1j * U_theta / rho))


def dz(u: GridFunction) -> GridFunction:
    """Second-order finite-difference d/dw = (d_x - i d_y)/2."""
    U_rho, U_theta = _polar_partials(u)
    grid = u.grid
    rho = grid.radii[:, None]
    phase = np.exp(-1j * grid.angles)[None, :]
    return GridFunction(grid, 0.5 * phase * (U_rho - 1j * U_theta / rho))


def integrate(u: GridFunction) -> complex:
    """Polar-cell quadrature of u over the disc."""
    return complex(np.sum(u.values * u.grid.quadrature_weights))


def ring_trace(u: GridFunction, ring: int = -1) -> CircleFunction:
    """The values of u along one ring, as circle data."""
    return CircleFunction(u.as_array()[ring])


def interior_mask(grid: DiscGrid, band: int = 1) -> np.ndarray:
    """Boolean node mask excluding the outermost `band` rings."""
    mask = np.ones(grid.shape, dtype=bool)
    if not 1 <= band < grid.radial_count:
        raise InvalidArgumentError(f"band must lie in [1, {grid.radial_count}), got {band}")
    mask[-band:] = False
    return mask.ravel()


def lipschitz_estimate(u: GridFunction, mask: Optional[np.ndarray] = None) -> float:
    """
    Max difference quotient between radially and angularly adjacent nodes.

    Args:
        u: Sampled function
        mask: Optional boolean node mask; pairs touching masked-out nodes are skipped
    """
    grid = u.grid
    U = u.as_array()
    Z = grid.nodes.reshape(grid.shape)
    keep = np.ones(grid.shape, dtype=bool) if mask is None else mask.reshape(grid.shape)

    radial = np.abs(U[1:] - U[:-1]) / np.abs(Z[1:] - Z[:-1])
    radial_keep = keep[1:] & keep[:-1]
    angular = np.abs(np.roll(U, -1, axis=1) - U) / np.abs(np.roll(Z, -1, axis=1) - Z)
    angular_keep = keep & np.roll(keep, -1, axis=1)

    best = 0.0
    if np.any(radial_keep):
        best = max(best, float(np.max(radial[radial_keep])))
    if np.any(angular_keep):
        best = max(best, float(np.max(angular[angular_keep])))
    return best

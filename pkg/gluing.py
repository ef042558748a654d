"""
Pullback of almost complex structures through coordinate models and the
gluing of discs to tori.

For each z-slice the pulled-back matrix A = M^{-1} N (transformation rule,
M = Z'_Z - A' conj(Z'_Zbar), N = A' conj(Z'_Z) - Z'_Zbar) is read in the
form [[a, 0], [b, 0]] through f = det M and adj(M) N:

    a = g / f,  g = [adj(M) N]_00,   b = [adj(M) N]_10 / f

The singular set Sigma is where |f| = |g|. Across it a is extended by the
similarity principle applied to f + g and f - g, or by continuity when
the model is not given in coordinates where that route applies.
"""
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from config import get_settings
from discsolve import DiscSolution, SolverConfig, StructureCoefficients, solve_disc
from errors import (
    BoundaryZeroError, HypothesisViolationError, InvalidArgumentError,
    NotGeneralizedAnalyticError, OrientationError, OutOfDomainError,
)
from grid import CircleFunction, DiscGrid, GridFunction, dbar, lipschitz_estimate, make_polar_grid
from vekua import holder_exponent_estimate, holomorphic_series, similarity_decompose, vekua_residual

MapFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
BlocksFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
TargetFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

FD_STEP = 1e-6
REMOVABLE_RADIUS = 1e-3
REMOVABLE_POINTS = 16
MIN_PROBE_SLICES = 8
FILL_SWEEPS = 10_000


class ModelKind(str, Enum):
    INTEGRABLE_GRAPH = "integrable-graph"
    GENERAL = "general"


class CoordinateModel:
    """
    A map H: (z, w) -> (z', w') with the target structure A'(z', w').

    Args:
        name: Model label
        h_map: Vectorized H returning the pair (z', w')
        target_structure: Vectorized A' returning an (N, 2, 2) stack
        kind: integrable-graph when H = (h(z, w), w) with h holomorphic in w
        jacobian_blocks: Optional analytic (Z'_Z, Z'_Zbar) stacks; finite
            differences are used when omitted
        h_partials: For integrable graphs, optional analytic (h_z, h_zbar)
        params: Numeric parameters, echoed in summaries
    """

    def __init__(self, name: str, h_map: MapFn, target_structure: Optional[TargetFn] = None,
                 kind: ModelKind = ModelKind.GENERAL, jacobian_blocks: Optional[BlocksFn] = None,
                 h_partials: Optional[BlocksFn] = None, params: Optional[Dict[str, Any]] = None):
        self.name = name
        self.h_map = h_map
        self.target_structure = target_structure or _zero_structure
        self.kind = ModelKind(kind)
        self._jacobian_blocks = jacobian_blocks
        self._h_partials = h_partials
        self.params = dict(params or {})

    def blocks(self, z: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        if self._jacobian_blocks is not None:
            return self._jacobian_blocks(z, w)
        return finite_difference_blocks(self.h_map, z, w)

    def h_partials(self, z: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(h_z, h_zbar) of the first component."""
        if self._h_partials is not None:
            return self._h_partials(z, w)
        zz, zzbar = self.blocks(z, w)
        return zz[:, 0, 0], zzbar[:, 0, 0]

    def reflected(self) -> "CoordinateModel":
        """H composed with (z, w) -> (conj(z), w)."""
        def h_map(z, w):
            return self.h_map(np.conj(z), w)

        def blocks(z, w):
            zz, zzbar = self.blocks(np.conj(z), w)
            new_zz, new_zzbar = zz.copy(), zzbar.copy()
            new_zz[:, :, 0], new_zzbar[:, :, 0] = zzbar[:, :, 0], zz[:, :, 0]
            return new_zz, new_zzbar

        return CoordinateModel(f"{self.name}-reflected", h_map, self.target_structure,
                               ModelKind.GENERAL, blocks, params=self.params)

    def validate(self, grid: DiscGrid, z_slices: Sequence[complex], tol: float = 1e-6) -> None:
        """For integrable graphs check H = (h, w) with h holomorphic in w."""
        if self.kind is not ModelKind.INTEGRABLE_GRAPH:
            return
        for z in z_slices:
            zs = np.full(grid.node_count, complex(z))
            z_prime, w_prime = self.h_map(zs, grid.nodes)
            if np.max(np.abs(np.asarray(w_prime) - grid.nodes)) > tol:
                raise InvalidArgumentError(f"{self.name}: second component of H is not w")
            scale = max(1.0, float(np.max(np.abs(z_prime))))
            defect = dbar(GridFunction(grid, z_prime)).sup_norm() / scale
            if defect > 1e-2:
                raise InvalidArgumentError(
                    f"{self.name}: h is not holomorphic in w (dbar defect {defect:.3e})"
                )

    def summary(self) -> Dict[str, Any]:
        return {"name": self.name, "kind": self.kind.value, "params": self.params}


def _zero_structure(z_prime: np.ndarray, w_prime: np.ndarray) -> np.ndarray:
    return np.zeros((np.asarray(z_prime).size, 2, 2), dtype=complex)


def finite_difference_blocks(h_map: MapFn, z: np.ndarray, w: np.ndarray,
                             step: float = FD_STEP) -> Tuple[np.ndarray, np.ndarray]:
    """Central-difference Wirtinger Jacobian blocks of a map C^2 -> C^2."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    zz = np.empty((z.size, 2, 2), dtype=complex)
    zzbar = np.empty((z.size, 2, 2), dtype=complex)

    def image(dz_: complex, dw_: complex) -> np.ndarray:
        zp, wp = h_map(z + dz_, w + dw_)
        return np.stack([np.broadcast_to(zp, z.shape), np.broadcast_to(wp, z.shape)], axis=-1)

    for column, (ez, ew) in enumerate([(1.0, 0.0), (0.0, 1.0)]):
        d_x = (image(step * ez, step * ew) - image(-step * ez, -step * ew)) / (2.0 * step)
        d_y = (image(1j * step * ez, 1j * step * ew) - image(-1j * step * ez, -1j * step * ew)) / (2.0 * step)
        zz[:, :, column] = 0.5 * (d_x - 1j * d_y)
        zzbar[:, :, column] = 0.5 * (d_x + 1j * d_y)
    return zz, zzbar


def structure_entries(model: CoordinateModel, z: np.ndarray,
                      w: np.ndarray) -> Dict[str, np.ndarray]:
    """
    f, g, the numerator of b, and h1 = -M[1, 0] at arbitrary points.
    """
    z = np.asarray(z, dtype=complex).ravel()
    w = np.asarray(w, dtype=complex).ravel()
    zz, zzbar = model.blocks(z, w)
    z_prime, w_prime = model.h_map(z, w)
    a_prime = model.target_structure(np.broadcast_to(z_prime, z.shape), np.broadcast_to(w_prime, z.shape))

    lead = zz - a_prime @ np.conj(zzbar)
    trail = a_prime @ np.conj(zz) - zzbar
    adjugate = np.empty_like(lead)
    adjugate[:, 0, 0] = lead[:, 1, 1]
    adjugate[:, 1, 1] = lead[:, 0, 0]
    adjugate[:, 0, 1] = -lead[:, 0, 1]
    adjugate[:, 1, 0] = -lead[:, 1, 0]
    product = adjugate @ trail
    return {
        "f": lead[:, 0, 0] * lead[:, 1, 1] - lead[:, 0, 1] * lead[:, 1, 0],
        "g": product[:, 0, 0],
        "b_num": product[:, 1, 0],
        "h1": -lead[:, 1, 0],
    }


class PullbackResult:
    """Per-slice structure data a, b, f, g, h1, h2 and the singular set."""

    def __init__(self, model_name: str, grid: DiscGrid, w_radius: float, z_slices: Sequence[complex],
                 a: List[GridFunction], b: List[GridFunction], sigma_mask: List[np.ndarray],
                 f: List[GridFunction], g: List[GridFunction], h1: List[GridFunction],
                 h2: List[GridFunction], extension: List[str], method: str):
        self.model_name = model_name
        self.grid = grid
        self.w_radius = float(w_radius)
        self.z_slices = [complex(z) for z in z_slices]
        self.a = a
        self.b = b
        self.sigma_mask = sigma_mask
        self.f = f
        self.g = g
        self.h1 = h1
        self.h2 = h2
        self.extension = extension
        self.method = method
        self.regularity: Dict[str, float] = {"alpha_hat_z": float("nan"), "lipschitz_w_hat": float("nan")}

    @property
    def w_nodes(self) -> np.ndarray:
        return self.w_radius * self.grid.nodes

    def max_abs_a(self) -> float:
        return float(max(fn.sup_norm() for fn in self.a))

    def to_frame(self) -> pd.DataFrame:
        frames = []
        for k, z in enumerate(self.z_slices):
            frames.append(pd.DataFrame({
                "slice": k,
                "re_z": z.real,
                "im_z": z.imag,
                "re_w": self.w_nodes.real,
                "im_w": self.w_nodes.imag,
                "re_a": self.a[k].values.real,
                "im_a": self.a[k].values.imag,
                "re_b": self.b[k].values.real,
                "im_b": self.b[k].values.imag,
                "sigma": self.sigma_mask[k],
            }))
        return pd.concat(frames, ignore_index=True)

    def summary(self) -> Dict[str, Any]:
        return {
            "model": self.model_name,
            "method": self.method,
            "grid": self.grid.metadata(),
            "w_radius": self.w_radius,
            "z_slices": [[z.real, z.imag] for z in self.z_slices],
            "sigma_counts": [int(m.sum()) for m in self.sigma_mask],
            "extension": list(self.extension),
            "max_abs_a": self.max_abs_a(),
            "regularity": dict(self.regularity),
        }


def _check_slices(z_slices: Sequence[complex]) -> List[complex]:
    slices = [complex(z) for z in z_slices]
    if not slices:
        raise InvalidArgumentError("at least one z-slice is required")
    for z in slices:
        if abs(z) >= 1.0:
            raise OutOfDomainError(f"z-slice {z} is outside the unit disc", point=z)
    return slices


def sigma_nodes(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Nodes with |f| = |g| within sigma_rel_tol, or |f| negligible."""
    settings = get_settings()
    mod_f = np.abs(f)
    scale = float(mod_f.max()) if mod_f.size else 0.0
    tiny = mod_f <= settings.sigma_abs_tol * scale
    ratio = np.abs(g) / np.where(tiny, 1.0, mod_f)
    return tiny | (np.abs(1.0 - ratio) < settings.sigma_rel_tol)


def _fill_by_neighbours(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Replace masked entries of a (R, T) array by means of their filled neighbours."""
    out = values.copy()
    missing = mask.copy()
    out[missing] = 0.0
    for _ in range(FILL_SWEEPS):
        if not missing.any():
            break
        known = (~missing).astype(float)
        total = np.zeros_like(out)
        count = np.zeros_like(known)
        for shift, axis in ((1, 1), (-1, 1)):
            total += np.roll(out * known, shift, axis=axis)
            count += np.roll(known, shift, axis=axis)
        total[1:] += (out * known)[:-1]
        count[1:] += known[:-1]
        total[:-1] += (out * known)[1:]
        count[:-1] += known[1:]
        ready = missing & (count > 0)
        if not ready.any():
            break
        out[ready] = total[ready] / count[ready]
        missing &= ~ready
    return out


def _vekua_extension(f: GridFunction, g: GridFunction, sigma: np.ndarray,
                     w_radius: float) -> np.ndarray:
    """
    a across Sigma by the similarity principle applied to f + g and f - g.

    Raises:
        NotGeneralizedAnalyticError: if the pair does not satisfy the Vekua
            equations with a common mu, or the factors are not compatible
    """
    settings = get_settings()
    grid = f.grid
    dbar_f = dbar(f).values / w_radius
    dbar_g = dbar(g).values / w_radius
    weight = np.abs(f.values) ** 2 + np.abs(g.values) ** 2
    mu_values = np.where(weight > 0, (dbar_f * g.values + dbar_g * f.values) / np.where(weight > 0, weight, 1.0), 0.0)
    # coefficient in unit-disc coordinates
    mu = f.with_values(mu_values * w_radius)

    f_tilde = f.with_values(f.values + g.values)
    g_tilde = f.with_values(f.values - g.values)
    minus_mu = mu.with_values(-mu.values)
    for h, m in ((f_tilde, mu), (g_tilde, minus_mu)):
        residual = vekua_residual(h, m)
        if residual > settings.vekua_residual_tol:
            raise NotGeneralizedAnalyticError(f"Vekua residual {residual:.3e}", residual=residual)

    dec_f = similarity_decompose(f_tilde, mu)
    dec_g = similarity_decompose(g_tilde, minus_mu)
    if dec_f.zero_count != dec_g.zero_count:
        raise NotGeneralizedAnalyticError(
            f"f + g and f - g have {dec_f.zero_count} and {dec_g.zero_count} zeros"
        )

    ring_sigma = sigma.reshape(grid.shape).any(axis=1)
    clean = np.flatnonzero(~ring_sigma)
    if clean.size == 0:
        raise NotGeneralizedAnalyticError("every ring meets Sigma")
    ring = int(clean[-1])
    phi_f = dec_f.phi.as_array()[ring]
    phi_g = dec_g.phi.as_array()[ring]
    if np.min(np.abs(phi_f)) <= 1e-12:
        raise NotGeneralizedAnalyticError("phi of f + g vanishes on the extension ring")
    psi = holomorphic_series(CircleFunction(phi_g / phi_f), float(grid.radii[ring]))

    inside = np.abs(grid.nodes) < grid.radii[ring]
    if np.any(sigma & ~inside):
        raise NotGeneralizedAnalyticError("Sigma reaches outside the extension ring")
    a_tilde = psi(grid.nodes) * np.exp(dec_g.tu.values - dec_f.tu.values)
    return (1.0 - a_tilde) / (1.0 + a_tilde)


def _pullback_slice(model: CoordinateModel, z: complex, grid: DiscGrid,
                    w_radius: float) -> Dict[str, Any]:
    w = w_radius * grid.nodes
    entries = structure_entries(model, np.full(grid.node_count, z), w)
    f, g = entries["f"], entries["g"]
    sigma = sigma_nodes(f, g)
    settings = get_settings()

    if sigma.all():
        raise HypothesisViolationError(f"slice z = {z} lies inside Sigma (f = g identically)", z=z)
    reversed_ = np.abs(g) > np.abs(f) * (1.0 + settings.sigma_rel_tol)
    if np.any(reversed_ & ~sigma):
        worst = int(np.argmax(np.abs(g) - np.abs(f)))
        raise OrientationError(
            f"orientation reversed on slice z = {z}: |g| > |f| at w = {w[worst]:.4f}",
            z=z, point=complex(w[worst]),
        )

    safe_f = np.where(sigma, 1.0, f)
    a = np.where(sigma, 0.0, g / safe_f)
    b_direct = np.where(sigma, 0.0, entries["b_num"] / safe_f)
    h1 = entries["h1"]
    h2 = b_direct - a * h1

    extension = "none"
    if sigma.any():
        f_fn, g_fn = GridFunction(grid, f), GridFunction(grid, g)
        try:
            extended = _vekua_extension(f_fn, g_fn, sigma, w_radius)
            a = np.where(sigma, extended, a)
            extension = "vekua"
        except (NotGeneralizedAnalyticError, BoundaryZeroError) as exc:
            logger.warning(f"slice z = {z}: similarity extension unavailable ({exc}); using continuity")
            a = _fill_by_neighbours(a.reshape(grid.shape), sigma.reshape(grid.shape)).ravel()
            extension = "continuity"
        h2 = _fill_by_neighbours(h2.reshape(grid.shape), sigma.reshape(grid.shape)).ravel()

    b = a * h1 + h2
    return {"a": a, "b": b, "sigma": sigma, "f": f, "g": g, "h1": h1, "h2": h2,
            "extension": extension}


def pullback_structure(model: CoordinateModel, z_slices: Sequence[complex], grid: DiscGrid,
                       w_radius: float = 1.0, allow_reflection: bool = False,
                       n_jobs: Optional[int] = None) -> PullbackResult:
    """
    Pulled-back structure coefficients on w-discs over the given z-slices.

    Args:
        model: Coordinate model H with target structure A'
        z_slices: z values in the unit disc
        grid: Polar grid of the w-disc
        w_radius: Radius of the sampled w-disc
        allow_reflection: Retry a fully reversed slice with H(conj(z), w)
        n_jobs: joblib workers over slices, defaults to Settings.n_jobs

    Returns:
        PullbackResult
    """
    slices = _check_slices(z_slices)
    model.validate(grid, slices)
    n_jobs = get_settings().n_jobs if n_jobs is None else n_jobs
    logger.info(f"Pullback of {model.name} over {len(slices)} slices on {grid!r}")

    def run(z: complex) -> Dict[str, Any]:
        try:
            return _pullback_slice(model, z, grid, w_radius)
        except OrientationError:
            if not allow_reflection:
                raise
            logger.info(f"slice z = {z}: orientation reversed, retrying with the reflection")
            return _pullback_slice(model.reflected(), z, grid, w_radius)

    outputs = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(run)(z) for z in slices)

    def wrap(key: str) -> List[GridFunction]:
        return [GridFunction(grid, out[key]) for out in outputs]

    result = PullbackResult(
        model.name, grid, w_radius, slices, wrap("a"), wrap("b"),
        [out["sigma"] for out in outputs], wrap("f"), wrap("g"), wrap("h1"), wrap("h2"),
        [out["extension"] for out in outputs], method="general",
    )
    _assert_subunit(result)
    if len(slices) >= MIN_PROBE_SLICES:
        probe = regularity_probe(result, z_pairs_budget=64)
        result.regularity = {"alpha_hat_z": probe["alpha_hat_z"], "lipschitz_w_hat": probe["lip_hat_w"]}
    return result


def _assert_subunit(result: PullbackResult) -> None:
    worst = result.max_abs_a()
    if worst >= 1.0:
        raise OrientationError(f"|a| reaches {worst:.6f} >= 1 after extension", a_max=worst)


def integrable_pullback(model: CoordinateModel, z_slices: Sequence[complex], grid: DiscGrid,
                        w_radius: float = 1.0) -> PullbackResult:
    """
    a = -h_zbar / h_z for H = (h(z, w), w), b = 0.

    Zeros of h_z are removable; a is holomorphic in w and is recovered there
    from its Taylor series on the outermost ring free of them.
    """
    if model.kind is not ModelKind.INTEGRABLE_GRAPH:
        raise InvalidArgumentError(f"{model.name} is not an integrable-graph model")
    slices = _check_slices(z_slices)
    model.validate(grid, slices)
    settings = get_settings()
    w = w_radius * grid.nodes

    a_slices, f_slices, g_slices, masks = [], [], [], []
    for z in slices:
        h_z, h_zbar = model.h_partials(np.full(grid.node_count, z), w)
        h_z = np.broadcast_to(np.asarray(h_z, dtype=complex), w.shape)
        h_zbar = np.broadcast_to(np.asarray(h_zbar, dtype=complex), w.shape)
        scale = float(np.max(np.abs(h_z)))
        if scale == 0.0:
            raise HypothesisViolationError(f"h_z vanishes identically on slice z = {z}", z=z)
        small = np.abs(h_z) <= settings.sigma_abs_tol * scale
        a = np.where(small, 0.0, -h_zbar / np.where(small, 1.0, h_z))
        if small.any():
            rings = small.reshape(grid.shape).any(axis=1)
            ring = int(np.flatnonzero(~rings)[-1])
            series = holomorphic_series(CircleFunction(a.reshape(grid.shape)[ring]), float(grid.radii[ring]))
            a = np.where(small, series(grid.nodes), a)
        a_slices.append(GridFunction(grid, a))
        f_slices.append(GridFunction(grid, h_z))
        g_slices.append(GridFunction(grid, -h_zbar))
        masks.append(small)

    zero = [GridFunction(grid, np.zeros(grid.node_count)) for _ in slices]
    result = PullbackResult(model.name, grid, w_radius, slices, a_slices, list(zero), masks,
                            f_slices, g_slices, list(zero), list(zero),
                            ["holomorphic" if m.any() else "none" for m in masks], method="integrable")
    _assert_subunit(result)
    if len(slices) >= MIN_PROBE_SLICES:
        probe = regularity_probe(result, z_pairs_budget=64)
        result.regularity = {"alpha_hat_z": probe["alpha_hat_z"], "lipschitz_w_hat": probe["lip_hat_w"]}
    return result


def _cell_zeros(f: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Polar cells whose corner loop winds around 0, and whether the inner
    ring winds around the centre.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = f[0]
        center = int(np.rint(np.sum(np.angle(np.roll(inner, -1) / inner)) / (2.0 * np.pi))) != 0
        c00 = f[:-1]
        c01 = np.roll(f, -1, axis=1)[:-1]
        c11 = np.roll(f, -1, axis=1)[1:]
        c10 = f[1:]
        total = (np.angle(c01 / c00) + np.angle(c11 / c01) + np.angle(c10 / c11) + np.angle(c00 / c10))
    cells = np.abs(np.rint(total / (2.0 * np.pi))) > 0
    return cells, bool(center)


def _slice_clusters(grid: DiscGrid, sigma: np.ndarray, f: np.ndarray) -> Tuple[int, bool]:
    settings = get_settings()
    R, T = grid.shape
    F = f.reshape(grid.shape)
    cells, center = _cell_zeros(F)

    flagged = sigma.reshape(grid.shape).copy()
    zero_marked = np.zeros(grid.shape, dtype=bool)
    cell_rows, cell_cols = np.nonzero(cells)
    for di, dk in ((0, 0), (0, 1), (1, 0), (1, 1)):
        zero_marked[cell_rows + di, (cell_cols + dk) % T] = True
    flagged |= zero_marked

    # node graph plus a virtual centre node with index R*T
    index = np.arange(R * T).reshape(R, T)
    pairs = [
        (index[:, :], np.roll(index, -1, axis=1), flagged & np.roll(flagged, -1, axis=1)),
        (index[:-1], index[1:], flagged[:-1] & flagged[1:]),
    ]
    rows, cols = [], []
    for src, dst, keep in pairs:
        rows.append(src[keep])
        cols.append(dst[keep])
    active = flagged.ravel().tolist() + [center]
    if center:
        ring0 = index[0][flagged[0]]
        rows.append(ring0)
        cols.append(np.full(ring0.size, R * T))
    rows_arr = np.concatenate(rows) if rows else np.zeros(0, int)
    cols_arr = np.concatenate(cols) if cols else np.zeros(0, int)
    adjacency = coo_matrix((np.ones(rows_arr.size), (rows_arr, cols_arr)), shape=(R * T + 1, R * T + 1))
    _, labels = connected_components(adjacency, directed=False)

    active_arr = np.asarray(active)
    cluster_labels = np.unique(labels[active_arr])
    magnitude = np.append(np.abs(f), 0.0)
    zero_flags = np.append(zero_marked.ravel(), center)
    scale = float(np.max(np.abs(f)))
    all_zero = True
    for label in cluster_labels:
        members = active_arr & (labels == label)
        contains_zero = bool(np.any(zero_flags[members]))
        tiny = float(np.min(magnitude[members])) <= settings.sigma_abs_tol * scale
        all_zero &= contains_zero or tiny
    return int(cluster_labels.size), bool(all_zero)


def singular_set_report(result: PullbackResult) -> Dict[str, Any]:
    """
    Connected clusters of Sigma per slice, and whether each cluster is a
    zero set of f.

    Zeros of f between nodes are found by the winding of f around grid cells.
    """
    counts, equal = [], True
    for sigma, f in zip(result.sigma_mask, result.f):
        count, zero = _slice_clusters(result.grid, sigma, f.values)
        counts.append(count)
        equal &= zero
    logger.debug(f"singular set clusters per slice: {counts}")
    return {"per_slice_counts": counts, "sigma_prime_equals_sigma": bool(equal)}


def regularity_probe(result: PullbackResult, z_pairs_budget: int) -> Dict[str, float]:
    """
    Hoelder exponent of z -> a(z, .) and Lipschitz constant of a in w.

    Returns:
        Dict with alpha_hat_z, its fit quality and lip_hat_w
    """
    if len(result.z_slices) < MIN_PROBE_SLICES:
        raise InvalidArgumentError(
            f"regularity probe needs at least {MIN_PROBE_SLICES} slices, got {len(result.z_slices)}"
        )
    family = list(zip(result.z_slices, result.a))
    holder = holder_exponent_estimate(family, z_pairs_budget)
    lip = max(lipschitz_estimate(a) for a in result.a) / result.w_radius
    return {"alpha_hat_z": holder["alpha_hat"], "fit_quality": holder["fit_quality"], "lip_hat_w": lip}


def coefficients_from_model(model: CoordinateModel, w_radius: float = 1.0,
                            lattice_size: int = 24) -> StructureCoefficients:
    """
    Pointwise structure coefficients of a model, usable by the disc solver.

    At points where f vanishes, a and b are replaced by their mean over a
    small circle in w (removable singularities). a0 and the Lipschitz
    constant are measured on a polar lattice of the bidisc of radii (1, w_radius).
    """
    settings = get_settings()

    def raw(z: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        entries = structure_entries(model, z, w)
        f = entries["f"]
        singular = np.abs(f) <= 1e-12
        safe = np.where(singular, 1.0, f)
        return entries["g"] / safe, entries["b_num"] / safe, singular

    def both(z: Any, w: Any) -> Tuple[np.ndarray, np.ndarray]:
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        shape = np.broadcast(z, w).shape
        zf = np.broadcast_to(z, shape).ravel()
        wf = np.broadcast_to(w, shape).ravel()
        a, b, singular = raw(zf, wf)
        if singular.any():
            ring = REMOVABLE_RADIUS * np.exp(2j * np.pi * np.arange(REMOVABLE_POINTS) / REMOVABLE_POINTS)
            zs = np.repeat(zf[singular], REMOVABLE_POINTS)
            ws = (wf[singular][:, None] + ring[None, :]).ravel()
            a_ring, b_ring, _ = raw(zs, ws)
            a[singular] = a_ring.reshape(-1, REMOVABLE_POINTS).mean(axis=1)
            b[singular] = b_ring.reshape(-1, REMOVABLE_POINTS).mean(axis=1)
        return a.reshape(shape), b.reshape(shape)

    radii = np.linspace(0.0, 1.0, lattice_size)
    angles = 2.0 * np.pi * np.arange(lattice_size) / lattice_size
    disc = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    z = np.repeat(disc, disc.size)
    w = np.tile(disc * w_radius, disc.size)
    a_lattice, _ = both(z, w)
    a0 = float(np.max(np.abs(a_lattice)))
    if a0 >= 1.0:
        raise OrientationError(f"{model.name}: |a| reaches {a0:.4f} on |w| <= {w_radius}", a_max=a0)

    step = 1e-4
    a_shift, _ = both(z, w + step)
    a_shift_i, _ = both(z, w + 1j * step)
    lipschitz = float(max(np.max(np.abs(a_shift - a_lattice)), np.max(np.abs(a_shift_i - a_lattice))) / step)

    logger.info(f"coefficients from {model.name}: a0={a0:.4f} lipschitz_w={lipschitz:.3f}")
    return StructureCoefficients(
        lambda z, w: both(z, w)[0], lambda z, w: both(z, w)[1],
        a0=min(a0 + 1e-12, 1.0 - 1e-12), lipschitz_w=lipschitz, name=model.name, w_radius=w_radius,
    )


def attach_disc_to_torus(model: CoordinateModel, n: int, r: float, t: float, cfg: SolverConfig,
                         w_radius: float = 1.0, precheck_grid: Tuple[int, int] = (16, 32)) -> Dict[str, Any]:
    """
    Solve the disc for the pulled-back structure and map its boundary through H.

    Args:
        model: Coordinate model
        n, r, t: Winding number, boundary radius of w and boundary phase
        cfg: Solver configuration
        w_radius: Radius of the w-disc where the coefficients are declared
        precheck_grid: Grid of the orientation pre-check before solving

    Returns:
        Dict with disc_in_target boundary points, torus_distance of the solver boundary,
        image_distance from H of the torus, image_moduli of the target points and the solution
    """
    if r > w_radius:
        raise InvalidArgumentError(f"r = {r} exceeds the coefficient radius w_radius = {w_radius}")
    check_slices = [0.0, 0.5, 0.5j, -0.5, -0.5j]
    pullback_structure(model, check_slices, make_polar_grid(*precheck_grid), w_radius=w_radius)

    coeffs = coefficients_from_model(model, w_radius)
    coeffs.validate()
    solution: DiscSolution = solve_disc(coeffs, n, r, t, cfg)

    z_edge = solution.z_boundary.values
    w_edge = solution.w_boundary.values
    z_image, w_image = model.h_map(z_edge, w_edge)
    torus_distance = float(max(np.max(np.abs(np.abs(z_edge) - 1.0)), np.max(np.abs(np.abs(w_edge) - r))))
    z_image = np.broadcast_to(z_image, z_edge.shape)
    w_image = np.broadcast_to(w_image, w_edge.shape)

    # H applied to the nearest torus points
    z_torus, w_torus = model.h_map(z_edge / np.abs(z_edge), r * w_edge / np.abs(w_edge))
    image_distance = float(max(np.max(np.abs(z_image - z_torus)), np.max(np.abs(w_image - w_torus))))
    image_moduli = {
        "z_min": float(np.min(np.abs(z_image))), "z_max": float(np.max(np.abs(z_image))),
        "w_min": float(np.min(np.abs(w_image))), "w_max": float(np.max(np.abs(w_image))),
    }
    logger.info(
        f"Attached disc for {model.name}: torus distance {torus_distance:.2e}, "
        f"image distance {image_distance:.2e}, |z'| in [{image_moduli['z_min']:.4f}, {image_moduli['z_max']:.4f}]"
    )
    return {
        "disc_in_target": np.stack([z_image, w_image], axis=-1),
        "torus_distance": torus_distance,
        "image_distance": image_distance,
        "image_moduli": image_moduli,
        "solution": solution,
    }

"""
Built-in coordinate models and structure coefficients, and the JSON
model manifest.

Manifest examples:
    {"model": "shear-2zbar-w", "coefficient": 2.0}
    {"model": "integrable-graph", "terms": [[1, 0, 1, 0, 0], [0.3, 0, 0, 1, 1]]}

An integrable-graph term row [coef_re, coef_im, p, q, k] stands for
coef * z^p * conj(z)^q * w^k in h(z, w).
"""
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import orjson
from loguru import logger

from discsolve import StructureCoefficients
from errors import InvalidArgumentError
from gluing import CoordinateModel, ModelKind, coefficients_from_model

BLOWUP_W_RADIUS = 0.9


def _stack(entries: Sequence[Sequence[Any]], size: int) -> np.ndarray:
    out = np.empty((size, 2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            out[:, i, j] = np.broadcast_to(entries[i][j], (size,))
    return out


def identity_model() -> CoordinateModel:
    def blocks(z, w):
        size = np.asarray(z).size
        return _stack([[1, 0], [0, 1]], size), _stack([[0, 0], [0, 0]], size)

    return CoordinateModel("identity", lambda z, w: (z, w), jacobian_blocks=blocks)


def shear_model(coefficient: float = 2.0) -> CoordinateModel:
    """H(z, w) = (z - c conj(z) w, w) with the standard target structure."""
    c = float(coefficient)

    def h_map(z, w):
        return z - c * np.conj(z) * w, w

    def blocks(z, w):
        size = np.asarray(z).size
        zz = _stack([[1, -c * np.conj(z)], [0, 1]], size)
        zzbar = _stack([[-c * w, 0], [0, 0]], size)
        return zz, zzbar

    return CoordinateModel("shear-2zbar-w", h_map, jacobian_blocks=blocks, params={"coefficient": c})


def blowup_model() -> CoordinateModel:
    """H(z, w) = (z w, w) with A'(z', w') = [[conj(w'), -conj(z')], [0, 0]]."""

    def h_map(z, w):
        return z * w, w

    def blocks(z, w):
        size = np.asarray(z).size
        return _stack([[w, z], [0, 1]], size), _stack([[0, 0], [0, 0]], size)

    def target(z_prime, w_prime):
        size = np.asarray(z_prime).size
        return _stack([[np.conj(w_prime), -np.conj(z_prime)], [0, 0]], size)

    return CoordinateModel("blowup", h_map, target, jacobian_blocks=blocks,
                           params={"w_radius": BLOWUP_W_RADIUS})


def integrable_graph_model(terms: Sequence[Sequence[float]]) -> CoordinateModel:
    """
    H(z, w) = (h(z, w), w) for a polynomial h holomorphic in w.

    Args:
        terms: Rows [coef_re, coef_im, p, q, k] for coef z^p conj(z)^q w^k
    """
    table = np.asarray(terms, dtype=float).reshape(-1, 5)
    if table.size == 0:
        raise InvalidArgumentError("integrable-graph model needs at least one term")
    if np.any(table[:, 2:] < 0) or np.any(table[:, 2:] != np.rint(table[:, 2:])):
        raise InvalidArgumentError("exponents p, q, k must be non-negative integers")
    coefs = table[:, 0] + 1j * table[:, 1]
    powers = table[:, 2:].astype(int)

    def evaluate(z, w, dp=0, dq=0, dk=0):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        total = np.zeros(np.broadcast(z, w).shape, dtype=complex)
        for c, (p, q, k) in zip(coefs, powers):
            factor = c * (p if dp else 1) * (q if dq else 1) * (k if dk else 1)
            if factor == 0:
                continue
            total = total + factor * z ** (p - dp) * np.conj(z) ** (q - dq) * w ** (k - dk)
        return total

    def h_map(z, w):
        return evaluate(z, w), w

    def h_partials(z, w):
        return evaluate(z, w, dp=1), evaluate(z, w, dq=1)

    def blocks(z, w):
        size = np.broadcast(np.asarray(z), np.asarray(w)).size
        zz = _stack([[evaluate(z, w, dp=1), evaluate(z, w, dk=1)], [0, 1]], size)
        zzbar = _stack([[evaluate(z, w, dq=1), 0], [0, 0]], size)
        return zz, zzbar

    return CoordinateModel("integrable-graph", h_map, kind=ModelKind.INTEGRABLE_GRAPH,
                           jacobian_blocks=blocks, h_partials=h_partials,
                           params={"terms": table.tolist()})


# h(z, w) = z + 0.3 conj(z) w
DEFAULT_INTEGRABLE_TERMS = [[1.0, 0.0, 1, 0, 0], [0.3, 0.0, 0, 1, 1]]

MODEL_BUILDERS = {
    "identity": lambda payload: identity_model(),
    "shear-2zbar-w": lambda payload: shear_model(payload.get("coefficient", 2.0)),
    "blowup": lambda payload: blowup_model(),
    "integrable-graph": lambda payload: integrable_graph_model(payload.get("terms", DEFAULT_INTEGRABLE_TERMS)),
}

# closed-form a(z, w) of the built-in models
REFERENCE_A = {
    "identity": lambda z, w, params: np.zeros_like(w),
    "shear-2zbar-w": lambda z, w, params: params.get("coefficient", 2.0) * w,
    "blowup": lambda z, w, params: np.conj(w) ** 2 / w,
}


def load_model(reference: Union[str, Path, Dict[str, Any]]) -> CoordinateModel:
    """
    Build a model from a built-in name, a manifest dict or a manifest file.

    Raises:
        InvalidArgumentError: for unknown model names
    """
    if isinstance(reference, dict):
        payload = dict(reference)
    elif isinstance(reference, Path) or (isinstance(reference, str) and reference.endswith(".json")):
        payload = orjson.loads(Path(reference).read_bytes())
    else:
        payload = {"model": reference}

    name = payload.get("model")
    if name not in MODEL_BUILDERS:
        raise InvalidArgumentError(f"unknown model {name!r}; expected one of {sorted(MODEL_BUILDERS)}")
    model = MODEL_BUILDERS[name](payload)
    logger.debug(f"Loaded model {model.name} with params {model.params}")
    return model


def default_w_radius(model: CoordinateModel) -> float:
    return float(model.params.get("w_radius", 1.0))


def reference_a(model: CoordinateModel) -> Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]]:
    """Closed-form a(z, w) for built-in models, None when there is none."""
    formula = REFERENCE_A.get(model.name)
    if formula is None:
        return None
    return lambda z, w: formula(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex), model.params)


def zero_coefficients() -> StructureCoefficients:
    return StructureCoefficients(lambda z, w: 0.0, lambda z, w: 0.0, a0=0.0, lipschitz_w=0.0, name="zero")


def half_w_coefficients() -> StructureCoefficients:
    """a = w/2, b = 0."""
    return StructureCoefficients(lambda z, w: w / 2.0, lambda z, w: 0.0 * w, a0=0.5,
                                 lipschitz_w=0.5, name="half-w")


def quarter_w_bilinear_coefficients() -> StructureCoefficients:
    """a = w/4, b = w/4."""
    return StructureCoefficients(lambda z, w: w / 4.0, lambda z, w: w / 4.0, a0=0.25,
                                 lipschitz_w=0.25, name="quarter-w-bilinear")


COEFFICIENT_REGISTRY = {
    "zero": zero_coefficients,
    "half-w": half_w_coefficients,
    "quarter-w-bilinear": quarter_w_bilinear_coefficients,
}


def get_coefficients(name: str) -> StructureCoefficients:
    if name not in COEFFICIENT_REGISTRY:
        raise InvalidArgumentError(
            f"unknown coefficients {name!r}; expected one of {sorted(COEFFICIENT_REGISTRY)}"
        )
    return COEFFICIENT_REGISTRY[name]()


def resolve_coefficients(reference: Union[str, Path, Dict[str, Any]],
                         w_radius: Optional[float] = None) -> StructureCoefficients:
    """
    Coefficients by registry name, or pulled back from a coordinate model.

    Args:
        reference: Registry name, model name, manifest dict or manifest file
        w_radius: Radius of the w-disc for model coefficients; the model's default when omitted
    """
    if isinstance(reference, str) and reference in COEFFICIENT_REGISTRY:
        return get_coefficients(reference)
    model = load_model(reference)
    radius = default_w_radius(model) if w_radius is None else float(w_radius)
    return coefficients_from_model(model, radius)


def available() -> Dict[str, List[str]]:
    return {"models": sorted(MODEL_BUILDERS), "coefficients": sorted(COEFFICIENT_REGISTRY)}

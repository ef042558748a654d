"""
Command-line front end for disc computations.

Every command reads an optional JSON run manifest, applies the shorthand
flags on top of it, dispatches to the owning module and writes CSV/JSON
artifacts plus summary.json into the run directory. Failures write
error.json and exit with the error's status (1 usage, 2 hypothesis,
3 numerical).

Usage:
    python cli.py solve --model zero --n 2 --r 0.5 --grid 32x64
    python cli.py pullback --model shear-2zbar-w
    python cli.py verify --model blowup --output runs/blowup
"""
import re
import sys
import time
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import orjson
import pandas as pd
import typer
from loguru import logger
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from config import get_settings
from discsolve import (
    DiscSolution, SolverConfig, consecutive_distances, elimination_residual,
    homotopy_sweep, solve_disc, torus_fill_check,
)
from errors import DiscsError, InvalidArgumentError
from gluing import (
    ModelKind, attach_disc_to_torus, integrable_pullback, pullback_structure, singular_set_report,
)
from grid import DiscGrid, make_polar_grid, sample
from models import (
    DEFAULT_INTEGRABLE_TERMS, default_w_radius, integrable_graph_model, load_model,
    reference_a, resolve_coefficients,
)
from phase import binomial_phase_rhs, fit_binomial_coeffs
from repository import RunRepository, get_repository
from vekua import area_lemma_check, forward_pair, normalized_decompose, similarity_decompose, vekua_residual

GRID_PATTERN = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")
INTEGRABLE_TOL = 1e-2
REFERENCE_TOL = 1e-10


class Command(str, Enum):
    PULLBACK = "pullback"
    SOLVE = "solve"
    SWEEP = "sweep"
    ATTACH = "attach"
    VEKUA = "vekua"
    PHASEFIT = "phasefit"
    VERIFY = "verify"


DEFAULT_MODELS = {
    Command.PULLBACK: "shear-2zbar-w",
    Command.SOLVE: "half-w",
    Command.SWEEP: "half-w",
    Command.ATTACH: "blowup",
    Command.VERIFY: "blowup",
}


class GridSpec(BaseModel):
    radial_count: int = Field(ge=4)
    angular_count: int = Field(ge=8)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        match = GRID_PATTERN.match(text)
        if not match:
            raise InvalidArgumentError(f"--grid expects RxT (e.g. 64x128), got {text!r}")
        return cls(radial_count=int(match.group(1)), angular_count=int(match.group(2)))


class RunParams(BaseModel):
    """Per-command parameters; unused ones are ignored by the other commands."""

    model_config = {"extra": "forbid"}

    n: int = 1
    r: float = 0.5
    t: float = 0.0
    anchor_angle: float = 0.0
    radii: Optional[List[float]] = None
    z_slices: Optional[List[Tuple[float, float]]] = None
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    w_radius: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    allow_reflection: bool = False
    method: str = "general"
    t_samples: Optional[int] = None
    roots: List[Tuple[float, float]] = Field(default_factory=list)
    density: List[Tuple[float, float, int, int]] = Field(default_factory=lambda: [(0.3, 0.0, 0, 1)])
    eps: float = Field(default=1e-3, gt=0.0)
    deltas: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    sample_count: Optional[int] = None

    @field_validator("method")
    @classmethod
    def _known_method(cls, value: str) -> str:
        if value not in ("general", "integrable"):
            raise ValueError(f"method must be 'general' or 'integrable', got {value!r}")
        return value


class RunManifest(BaseModel):
    """Everything a run needs; embedded verbatim in summary.json."""

    command: Command
    model: Optional[Union[str, Dict[str, Any]]] = None
    grid: Optional[GridSpec] = None
    solver: Dict[str, Any] = Field(default_factory=dict)
    params: RunParams = Field(default_factory=RunParams)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _referenced_files_exist(self) -> "RunManifest":
        if isinstance(self.model, str) and self.model.endswith(".json") and not Path(self.model).exists():
            raise ValueError(f"model manifest {self.model} does not exist")
        return self


def configure_logging(verbose: bool = False) -> None:
    """Send loguru output to stderr at the configured level."""
    logger.remove()
    level = "DEBUG" if verbose else get_settings().log_level.upper()
    logger.add(sys.stderr, level=level, format="{time:HH:mm:ss} | {level: <7} | {message}")


def load_manifest(path: Optional[Path], command: Command, overrides: Dict[str, Any]) -> RunManifest:
    """
    Merge a manifest file with command-line overrides.

    Args:
        path: Optional JSON manifest
        command: Subcommand being run; wins over the manifest's own command
        overrides: Non-None flag values keyed as manifest fields or params

    Raises:
        InvalidArgumentError: for unreadable or invalid manifests
    """
    payload: Dict[str, Any] = {}
    if path is not None:
        if not path.exists():
            raise InvalidArgumentError(f"manifest {path} does not exist")
        try:
            payload = orjson.loads(path.read_bytes())
        except orjson.JSONDecodeError as exc:
            raise InvalidArgumentError(f"manifest {path} is not valid JSON: {exc}") from exc

    payload["command"] = command.value
    params = dict(payload.get("params") or {})
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("model", "output_dir"):
            payload[key] = value
        elif key == "grid":
            payload["grid"] = GridSpec.parse(value).model_dump()
        else:
            params[key] = value
    payload["params"] = params

    try:
        return RunManifest(**payload)
    except ValidationError as exc:
        raise InvalidArgumentError(f"invalid manifest: {exc.errors()[0]['msg']}",
                                   errors=[e["msg"] for e in exc.errors()]) from exc


def _grid(manifest: RunManifest) -> DiscGrid:
    if manifest.grid is not None:
        return make_polar_grid(manifest.grid.radial_count, manifest.grid.angular_count)
    settings = get_settings()
    return make_polar_grid(settings.default_radial_count, settings.default_angular_count)


def _solver_config(manifest: RunManifest) -> SolverConfig:
    overrides = dict(manifest.solver)
    if manifest.grid is not None:
        overrides.update(manifest.grid.model_dump())
    try:
        return SolverConfig.from_settings(**overrides)
    except ValidationError as exc:
        raise InvalidArgumentError(f"invalid solver settings: {exc.errors()[0]['msg']}") from exc


def _model_reference(manifest: RunManifest) -> Union[str, Dict[str, Any]]:
    return manifest.model if manifest.model is not None else DEFAULT_MODELS[manifest.command]


def _slices(manifest: RunManifest) -> List[complex]:
    if manifest.params.z_slices:
        return [complex(re_z, im_z) for re_z, im_z in manifest.params.z_slices]
    ring = 0.45 * np.exp(2j * np.pi * np.arange(8) / 8)
    return [0j] + [complex(z) for z in ring]


def _write_solution(repo: RunRepository, solution: DiscSolution, stem: str = "") -> None:
    repo.write_grid_function(f"{stem}z", solution.z_fn)
    repo.write_grid_function(f"{stem}w", solution.w_fn)
    repo.write_circle_function(f"{stem}z_boundary", solution.z_boundary)
    repo.write_circle_function(f"{stem}w_boundary", solution.w_boundary)


def run_pullback(manifest: RunManifest, repo: RunRepository) -> Dict[str, Any]:
    model = load_model(_model_reference(manifest))
    grid = _grid(manifest)
    params = manifest.params
    w_radius = params.w_radius or default_w_radius(model)
    if params.method == "integrable":
        result = integrable_pullback(model, _slices(manifest), grid, w_radius)
    else:
        result = pullback_structure(model, _slices(manifest), grid, w_radius,
                                    allow_reflection=params.allow_reflection)
    repo.write_frame("pullback.csv", result.to_frame())
    return {
        "model": model.summary(),
        "pullback": result.summary(),
        "singular_set": singular_set_report(result),
    }


def run_solve(manifest: RunManifest, repo: RunRepository) -> Dict[str, Any]:
    params = manifest.params
    coeffs = resolve_coefficients(_model_reference(manifest), params.w_radius)
    solution = solve_disc(coeffs, params.n, params.r, params.t, _solver_config(manifest),
                          anchor_angle=params.anchor_angle)
    _write_solution(repo, solution)
    return {
        "coefficients": coeffs.summary(),
        "solution": solution.summary(),
        "elimination_residual": elimination_residual(solution, coeffs),
    }


def run_sweep(manifest: RunManifest, repo: RunRepository) -> Dict[str, Any]:
    params = manifest.params
    coeffs = resolve_coefficients(_model_reference(manifest), params.w_radius)
    cfg = _solver_config(manifest)
    radii = params.radii or [0.1, 0.2, 0.3, 0.4, 0.5]
    solutions = homotopy_sweep(coeffs, params.n, params.t, radii, cfg)
    distances = consecutive_distances(solutions)

    rows = []
    for k, solution in enumerate(solutions):
        row = {"radius": solution.params["r"], **solution.diagnostics}
        row["distance_z"] = distances[k - 1]["z"] if k else 0.0
        row["distance_w"] = distances[k - 1]["w"] if k else 0.0
        rows.append(row)
    repo.write_frame("sweep.csv", pd.DataFrame(rows))

    results: Dict[str, Any] = {
        "coefficients": coeffs.summary(),
        "radii": [float(x) for x in radii],
        "solutions": [s.summary() for s in solutions],
        "distances": distances,
    }
    if params.t_samples:
        results["torus"] = torus_fill_check(coeffs, params.n, radii[-1], params.t_samples, cfg)
    return results


def run_attach(manifest: RunManifest, repo: RunRepository) -> Dict[str, Any]:
    params = manifest.params
    model = load_model(_model_reference(manifest))
    w_radius = params.w_radius or default_w_radius(model)
    attached = attach_disc_to_torus(model, params.n, params.r, params.t, _solver_config(manifest),
                                    w_radius=w_radius)
    solution: DiscSolution = attached["solution"]
    image = attached["disc_in_target"]
    repo.write_frame("disc_in_target.csv", pd.DataFrame({
        "theta": solution.z_boundary.angles,
        "re_z": image[:, 0].real,
        "im_z": image[:, 0].imag,
        "re_w": image[:, 1].real,
        "im_w": image[:, 1].imag,
    }))
    _write_solution(repo, solution)
    return {
        "model": model.summary(),
        "w_radius": w_radius,
        "torus_distance": attached["torus_distance"],
        "image_distance": attached["image_distance"],
        "image_moduli": attached["image_moduli"],
        "solution": solution.summary(),
    }


def run_vekua(manifest: RunManifest, repo: RunRepository) -> Dict[str, Any]:
    params = manifest.params
    grid = _grid(manifest)
    terms = params.density

    def density(w):
        total = np.zeros_like(w, dtype=complex)
        for re_c, im_c, p, q in terms:
            total = total + complex(re_c, im_c) * w ** p * np.conj(w) ** q
        return total

    roots = [complex(re_w, im_w) for re_w, im_w in params.roots]
    h, mu = forward_pair(sample(density, grid), roots)
    decomposition = similarity_decompose(h, mu)
    repo.write_grid_function("phi", decomposition.phi)
    repo.write_grid_function("tu", decomposition.tu)
    results: Dict[str, Any] = {
        "roots": [[r.real, r.imag] for r in roots],
        "vekua_residual": vekua_residual(h, mu),
        "decomposition": decomposition.summary(),
        "reconstruction_error": decomposition.reconstruction_error(h),
        "zero_count_matches": decomposition.zero_count == len(roots),
    }
    if all(abs(r) < 0.5 for r in roots):
        normalized = normalized_decompose(h, mu, params.eps)
        results["normalized"] = normalized.summary()
    if roots:
        count = params.sample_count or 100_000
        results["area_checks"] = [
            area_lemma_check(roots, delta, count, seed=params.seed) for delta in params.deltas
        ]
    return results


def run_phasefit(manifest: RunManifest, repo: RunRepository) -> Dict[str, Any]:
    params = manifest.params
    count = params.sample_count or max(20 * params.n ** 2, 200)
    coeffs = fit_binomial_coeffs(params.n, count, params.seed, holdout_count=1000)
    repo.write_json("coefficients.json", coeffs.to_json())
    collapse = binomial_phase_rhs(coeffs, 0.3, 0.8)
    return {
        "coefficients": coeffs.to_json(),
        "sample_count": count,
        "positive_real_collapse_error": abs(collapse - 1.0),
    }


def _integrable_agreement(model, grid: DiscGrid,
                        slices: List[complex]) -> Dict[str, Any]:
    companion = model if model.kind is ModelKind.INTEGRABLE_GRAPH else integrable_graph_model(DEFAULT_INTEGRABLE_TERMS)
    w_radius = default_w_radius(companion)
    general = pullback_structure(companion, slices, grid, w_radius)
    closed_form = integrable_pullback(companion, slices, grid, w_radius)
    difference = max(
        float(np.max(np.abs(x.values - y.values))) for x, y in zip(general.a, closed_form.a)
    )
    return {
        "model": companion.summary(),
        "is_requested_model": companion is model,
        "max_difference": difference,
        "tolerance": INTEGRABLE_TOL,
        "agrees": difference <= INTEGRABLE_TOL,
    }


def run_verify(manifest: RunManifest, repo: RunRepository) -> Dict[str, Any]:
    model = load_model(_model_reference(manifest))
    grid = _grid(manifest)
    slices = _slices(manifest)
    w_radius = manifest.params.w_radius or default_w_radius(model)
    result = pullback_structure(model, slices, grid, w_radius)
    repo.write_frame("pullback.csv", result.to_frame())
    results: Dict[str, Any] = {
        "model": model.summary(),
        "pullback": result.summary(),
        "singular_set": singular_set_report(result),
        "integrable_companion": _integrable_agreement(model, grid, slices),
    }

    formula = reference_a(model)
    if formula is not None:
        w = result.w_nodes
        errors = []
        for z, a, sigma in zip(result.z_slices, result.a, result.sigma_mask):
            off = ~sigma & (w != 0)
            errors.append(float(np.max(np.abs(a.values - formula(z, w))[off])) if off.any() else 0.0)
        worst = max(errors)
        results["reference"] = {"max_error": worst, "tolerance": REFERENCE_TOL,
                                "agrees": worst <= REFERENCE_TOL}

    checks = [results["integrable_companion"]["agrees"]] + ([results["reference"]["agrees"]] if "reference" in results else [])
    results["passed"] = bool(all(checks))
    if not results["passed"]:
        logger.warning(f"verification of {model.name} did not pass: {results}")
    return results


HANDLERS: Dict[Command, Callable[[RunManifest, RunRepository], Dict[str, Any]]] = {
    Command.PULLBACK: run_pullback,
    Command.SOLVE: run_solve,
    Command.SWEEP: run_sweep,
    Command.ATTACH: run_attach,
    Command.VEKUA: run_vekua,
    Command.PHASEFIT: run_phasefit,
    Command.VERIFY: run_verify,
}


def _output_dir(manifest: RunManifest) -> Path:
    if manifest.output_dir:
        return Path(manifest.output_dir)
    return get_settings().output_path / manifest.command.value


def run(manifest: RunManifest) -> int:
    """
    Execute one run and persist its artifacts.

    Returns:
        Process exit status: 0 on success, the error's exit_code otherwise
    """
    repo = get_repository(_output_dir(manifest))
    document = manifest.model_dump(mode="json")
    started = time.perf_counter()
    logger.info(f"Running {manifest.command.value} into {repo.output_dir}")
    try:
        results = HANDLERS[manifest.command](manifest, repo)
    except DiscsError as exc:
        record = exc.to_record()
        record["manifest"] = document
        repo.write_error(record)
        logger.error(f"{manifest.command.value} failed ({record['error']}): {exc.message}")
        return exc.exit_code
    except Exception as exc:
        logger.exception(f"{manifest.command.value} failed unexpectedly")
        repo.write_error({"error": type(exc).__name__, "message": str(exc), "exit_code": 1,
                          "details": {}, "manifest": document})
        return 1
    repo.write_summary(document, results, time.perf_counter() - started)
    return 0


app = typer.Typer(help="Pseudo-holomorphic discs in coordinate models", add_completion=False)

MANIFEST = typer.Option(None, "--manifest", help="JSON run manifest")
OUTPUT = typer.Option(None, "--output", help="Run directory")
SEED = typer.Option(None, "--seed", help="Seed of random samplers")
GRID = typer.Option(None, "--grid", help="Grid as RxT, e.g. 128x256")
MODEL = typer.Option(None, "--model", help="Built-in model/coefficients name or manifest file")
N = typer.Option(None, "--n", help="Winding number / degree")
R = typer.Option(None, "--r", help="Boundary radius of w")
T = typer.Option(None, "--t", help="Boundary phase of w")
RADII = typer.Option(None, "--radii", help="Comma-separated increasing radii")
VERBOSE = typer.Option(False, "--verbose", "-v", help="Debug logging")


def _dispatch(command: Command, manifest: Optional[Path], verbose: bool, **flags: Any) -> None:
    configure_logging(verbose)
    try:
        radii = flags.pop("radii", None)
        if radii is not None:
            try:
                flags["radii"] = [float(x) for x in radii.split(",") if x.strip()]
            except ValueError as exc:
                raise InvalidArgumentError(f"--radii expects comma-separated numbers, got {radii!r}") from exc
        loaded = load_manifest(manifest, command, flags)
    except DiscsError as exc:
        # no run directory yet: the record goes to stdout
        typer.echo(orjson.dumps(exc.to_record()).decode())
        logger.error(exc.message)
        raise typer.Exit(code=exc.exit_code)
    status = run(loaded)
    if status:
        raise typer.Exit(code=status)


@app.command()
def pullback(manifest: Optional[Path] = MANIFEST, output: Optional[str] = OUTPUT,
             seed: Optional[int] = SEED, grid: Optional[str] = GRID, model: Optional[str] = MODEL,
             verbose: bool = VERBOSE) -> None:
    """Pull back the target structure through a coordinate model."""
    _dispatch(Command.PULLBACK, manifest, verbose, output_dir=output, seed=seed, grid=grid, model=model)


@app.command()
def solve(manifest: Optional[Path] = MANIFEST, output: Optional[str] = OUTPUT,
          seed: Optional[int] = SEED, grid: Optional[str] = GRID, model: Optional[str] = MODEL,
          n: Optional[int] = N, r: Optional[float] = R, t: Optional[float] = T,
          verbose: bool = VERBOSE) -> None:
    """Solve one disc."""
    _dispatch(Command.SOLVE, manifest, verbose, output_dir=output, seed=seed, grid=grid, model=model,
              n=n, r=r, t=t)


@app.command()
def sweep(manifest: Optional[Path] = MANIFEST, output: Optional[str] = OUTPUT,
          seed: Optional[int] = SEED, grid: Optional[str] = GRID, model: Optional[str] = MODEL,
          n: Optional[int] = N, t: Optional[float] = T, radii: Optional[str] = RADII,
          verbose: bool = VERBOSE) -> None:
    """Homotopy sweep over boundary radii, with an optional torus fill check."""
    _dispatch(Command.SWEEP, manifest, verbose, output_dir=output, seed=seed, grid=grid, model=model,
              n=n, t=t, radii=radii)


@app.command()
def attach(manifest: Optional[Path] = MANIFEST, output: Optional[str] = OUTPUT,
           seed: Optional[int] = SEED, grid: Optional[str] = GRID, model: Optional[str] = MODEL,
           n: Optional[int] = N, r: Optional[float] = R, t: Optional[float] = T,
           verbose: bool = VERBOSE) -> None:
    """Attach a disc to the torus of a coordinate model."""
    _dispatch(Command.ATTACH, manifest, verbose, output_dir=output, seed=seed, grid=grid, model=model,
              n=n, r=r, t=t)


@app.command()
def vekua(manifest: Optional[Path] = MANIFEST, output: Optional[str] = OUTPUT,
          seed: Optional[int] = SEED, grid: Optional[str] = GRID, verbose: bool = VERBOSE) -> None:
    """Similarity decomposition of a constructed generalized analytic function."""
    _dispatch(Command.VEKUA, manifest, verbose, output_dir=output, seed=seed, grid=grid)


@app.command()
def phasefit(manifest: Optional[Path] = MANIFEST, output: Optional[str] = OUTPUT,
             seed: Optional[int] = SEED, n: Optional[int] = N, verbose: bool = VERBOSE) -> None:
    """Fit the constants of the binomial phase identity."""
    _dispatch(Command.PHASEFIT, manifest, verbose, output_dir=output, seed=seed, n=n)


@app.command()
def verify(manifest: Optional[Path] = MANIFEST, output: Optional[str] = OUTPUT,
           seed: Optional[int] = SEED, grid: Optional[str] = GRID, model: Optional[str] = MODEL,
           verbose: bool = VERBOSE) -> None:
    """
    Cross-check the general pullback against closed forms.

    The reference check compares the requested model with its closed-form a.
    The integrable_companion check runs the integrable-graph formula on the
    requested model when it is an integrable graph, otherwise on the companion
    model h = z + 0.3 conj(z) w.
    """
    _dispatch(Command.VERIFY, manifest, verbose, output_dir=output, seed=seed, grid=grid, model=model)


if __name__ == "__main__":
    app()

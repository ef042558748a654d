"""
Run-wide settings for disc computations.

Values come from DISCS_* environment variables or a .env file; the output
root is created on first access.
"""
from pathlib import Path
from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings loaded from environment variables and .env file."""

    # Artifact storage
    output_root: str = Field(default="./runs", alias="DISCS_OUTPUT_ROOT")

    # Default discretization
    default_radial_count: int = Field(default=128, alias="DISCS_RADIAL_COUNT")
    default_angular_count: int = Field(default=256, alias="DISCS_ANGULAR_COUNT")

    # Numerical tolerances
    structure_tol: float = Field(default=1e-10, alias="DISCS_STRUCTURE_TOL")
    pullback_cond_cap: float = Field(default=1e8, alias="DISCS_PULLBACK_COND_CAP")
    sigma_rel_tol: float = Field(default=1e-3, alias="DISCS_SIGMA_REL_TOL")
    sigma_abs_tol: float = Field(default=1e-3, alias="DISCS_SIGMA_ABS_TOL")
    boundary_zero_tol: float = Field(default=1e-10, alias="DISCS_BOUNDARY_ZERO_TOL")
    vekua_residual_tol: float = Field(default=0.1, alias="DISCS_VEKUA_RESIDUAL_TOL")

    # Execution
    n_jobs: int = Field(default=1, alias="DISCS_N_JOBS")
    log_level: str = Field(default="INFO", alias="DISCS_LOG_LEVEL")

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "case_sensitive": False,
        "extra": "ignore",
        "populate_by_name": True,
    }

    def ensure_directories(self) -> None:
        self.output_path.mkdir(parents=True, exist_ok=True)

    @property
    def output_path(self) -> Path:
        return Path(self.output_root)


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Process-wide settings, built on first use."""
    global _settings

    if _settings is None:
        _settings = Settings()
        _settings.ensure_directories()

    return _settings


def reload_settings() -> Settings:
    """
    Rebuild the settings from the current environment.

    Returns:
        Settings: The fresh instance, also installed as the process-wide one
    """
    global _settings
    _settings = Settings()
    _settings.ensure_directories()
    return _settings


def get_paths():
    """Output locations derived from the settings."""
    settings = get_settings()

    class Paths:
        output = settings.output_path

    return Paths()

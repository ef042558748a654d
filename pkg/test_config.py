"""
Tests for settings loading from the environment.
"""
import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from config import get_paths, get_settings, reload_settings


def test_defaults():
    """Default tolerances and grid when nothing is configured."""
    settings = reload_settings()
    assert settings.structure_tol == 1e-10
    assert settings.pullback_cond_cap == 1e8
    assert settings.vekua_residual_tol == 0.1
    assert settings.log_level.upper() in {"TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"}


def test_environment_aliases(tmp_path, monkeypatch):
    """DISCS_* variables override the defaults and the output root is created."""
    root = tmp_path / "artifacts"
    monkeypatch.setenv("DISCS_OUTPUT_ROOT", str(root))
    monkeypatch.setenv("DISCS_RADIAL_COUNT", "32")
    monkeypatch.setenv("DISCS_ANGULAR_COUNT", "64")
    monkeypatch.setenv("DISCS_N_JOBS", "2")
    try:
        settings = reload_settings()
        assert settings.output_path == root
        assert root.is_dir()
        assert (settings.default_radial_count, settings.default_angular_count) == (32, 64)
        assert settings.n_jobs == 2
        assert get_settings() is settings
        assert get_paths().output == root
    finally:
        monkeypatch.undo()
        reload_settings()

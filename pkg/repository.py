"""
Run-directory repository for computed artifacts.
Writes grid data as CSV through pandas and JSON documents through orjson
with sorted keys, so identical runs produce byte-identical summaries.
"""
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import orjson
import pandas as pd
from loguru import logger

from config import get_settings
from grid import CircleFunction, GridFunction

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY


def _default(value: Any) -> Any:
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _plain(value: Any) -> Any:
    """Complex numpy arrays become [re, im] pairs."""
    if isinstance(value, np.ndarray) and np.iscomplexobj(value):
        return np.stack([value.real, value.imag], axis=-1).tolist()
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def dumps(document: Any) -> bytes:
    return orjson.dumps(_plain(document), default=_default, option=JSON_OPTIONS)


class RunRepository:
    """Repository for the artifacts of one run."""

    def __init__(self, output_dir: Optional[Union[str, Path]] = None):
        """
        Initialize the repository.

        Args:
            output_dir: Run directory; defaults to the configured output root
        """
        self.output_dir = Path(output_dir) if output_dir is not None else get_settings().output_path
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def write_json(self, name: str, document: Any) -> Path:
        target = self.path(name)
        target.write_bytes(dumps(document))
        logger.debug(f"Wrote {target}")
        return target

    def read_json(self, name: str) -> Any:
        return orjson.loads(self.path(name).read_bytes())

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, index=False, float_format="%.17g")
        logger.debug(f"Wrote {target} ({len(frame)} rows)")
        return target

    def write_grid_function(self, stem: str, fn: GridFunction) -> Dict[str, Path]:
        """CSV (re_w, im_w, re_val, im_val) plus JSON with the grid header."""
        return {
            "csv": self.write_frame(f"{stem}.csv", fn.to_frame()),
            "json": self.write_json(f"{stem}.json", fn.to_json_dict()),
        }

    def read_grid_function(self, stem: str) -> GridFunction:
        return GridFunction.from_json_dict(self.read_json(f"{stem}.json"))

    def write_circle_function(self, stem: str, fn: CircleFunction) -> Path:
        return self.write_frame(f"{stem}.csv", fn.to_frame())

    def write_summary(self, manifest: Dict[str, Any], results: Dict[str, Any],
                      wall_time: Optional[float] = None) -> Path:
        """
        Run summary embedding the manifest; wall time goes to timing.json.
        """
        target = self.write_json("summary.json", {"manifest": manifest, "results": results})
        if wall_time is not None:
            self.write_json("timing.json", {"wall_time_seconds": wall_time})
        logger.info(f"Run summary written to {target}")
        return target

    def write_error(self, record: Dict[str, Any]) -> Path:
        return self.write_json("error.json", record)


def get_repository(output_dir: Optional[Union[str, Path]] = None) -> RunRepository:
    """Get a repository for a run directory."""
    return RunRepository(output_dir)

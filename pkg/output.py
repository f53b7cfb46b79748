"""
File formats for anwave results

All CSV files are written through pandas with 17 significant digits and
'\n' line endings, so identical runs give byte-identical files.
"""

import hashlib
import json
import logging
import platform
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import numpy as np
import pandas as pd
import scipy

from errors import InvalidArgumentError
from grid import RadialGrid
from model import FieldState

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
FLOAT_FORMAT = "%.17g"
SNAPSHOT_COLUMNS = ["r", "value", "velocity"]
DIAGNOSTIC_COLUMNS = ["t", "energy", "kinetic", "gradient", "sine_potential", "quintic_potential",
                      "h_norm", "s_accumulator", "degree_residual"]

PathLike = Union[str, Path]


def _plain(value: Any) -> Any:
    """numpy scalars, arrays and enums to JSON-ready Python values"""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_frame(frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {path}")
    return path


def write_rows(rows: Iterable[Mapping[str, Any]], path: PathLike,
               columns: Optional[List[str]] = None) -> Path:
    return write_frame(pd.DataFrame(list(rows), columns=columns), path)


def write_json(data: Mapping[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_plain(data), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# Snapshots


def write_snapshot(state: FieldState, grid: RadialGrid, path: PathLike) -> Path:
    """CSV r,value,velocity plus a JSON sidecar with the same stem"""
    path = Path(path)
    frame = pd.DataFrame({"r": grid.r, "value": state.value, "velocity": state.velocity},
                         columns=SNAPSHOT_COLUMNS)
    write_frame(frame, path)
    write_json({"formulation": state.formulation.value, "time": state.time,
                "n_points": grid.n_points, "dr": grid.dr}, path.with_suffix(".json"))
    return path


def read_snapshot(path: PathLike, grid: Optional[RadialGrid] = None) -> FieldState:
    """Load a snapshot; with a grid, resample onto it when the meshes differ"""
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"snapshot file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in SNAPSHOT_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidArgumentError(f"{path} lacks columns {missing}")
    sidecar = path.with_suffix(".json")
    meta = read_json(sidecar) if sidecar.exists() else {"formulation": "u5d", "time": 0.0}

    r = frame["r"].to_numpy(dtype=float)
    value = frame["value"].to_numpy(dtype=float)
    velocity = frame["velocity"].to_numpy(dtype=float)
    if grid is not None and (r.size != grid.size or not np.allclose(r, grid.r, rtol=0, atol=1e-12 * grid.r_max)):
        logger.info(f"Resampling {path.name} from {r.size} nodes onto {grid.size} nodes")
        value = np.interp(grid.r, r, value, right=0.0)
        velocity = np.interp(grid.r, r, velocity, right=0.0)
    return FieldState(meta.get("formulation", "u5d"), value, velocity, float(meta.get("time", 0.0)))


# Evolution results


def diagnostics_frame(trajectory) -> pd.DataFrame:
    columns = DIAGNOSTIC_COLUMNS + [f"ext_energy_a{i}" for i in range(1, len(trajectory.radii) + 1)]
    return pd.DataFrame([row.as_dict() for row in trajectory.diagnostics], columns=columns)


def write_trajectory(trajectory, grid: RadialGrid, out_dir: PathLike) -> List[Path]:
    out_dir = Path(out_dir)
    written = [write_frame(diagnostics_frame(trajectory), out_dir / "diagnostics.csv")]
    for i, snapshot in enumerate(trajectory.snapshots):
        written.append(write_snapshot(snapshot, grid, out_dir / "snapshots" / f"snapshot_{i:04d}.csv"))
    written.append(write_json(trajectory.summary(), out_dir / "summary.json"))
    logger.info(f"Wrote {len(trajectory.snapshots)} snapshots and diagnostics to {out_dir}")
    return written


def write_profile(profile, path: PathLike) -> Path:
    """Stationary profile as r,phi,dphi_dr"""
    frame = pd.DataFrame({"r": profile.r, "phi": profile.phi, "dphi_dr": profile.dphi_dr},
                         columns=["r", "phi", "dphi_dr"])
    return write_frame(frame, path)


def versions() -> Dict[str, str]:
    return {
        "anwave": VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def write_manifest(out_dir: PathLike, config_text: str, command: str, wall_seconds: float,
                   files: Iterable[PathLike] = (), extra: Optional[Mapping[str, Any]] = None) -> Path:
    """manifest.json: config echo and its sha256, versions, wall time, files written"""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": config_text,
        "config_hash_sha256": hash_text(config_text),
        "versions": versions(),
        "wall_seconds": wall_seconds,
        "files": sorted(str(Path(p).relative_to(out_dir)) if Path(p).is_relative_to(out_dir) else str(p)
                        for p in files),
    }
    if extra:
        manifest.update(extra)
    return write_json(manifest, out_dir / "manifest.json")

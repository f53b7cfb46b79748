"""
Builtin initial data families

An `initial` config value reads `family key=value ...`, for example
`gaussian_bump amplitude=0.01 center=3 width=0.5`. Parameters left out take
the family defaults listed in FAMILIES.
"""

import logging
from typing import Callable, Dict, Mapping, Tuple, Union

import numpy as np

from errors import InvalidArgumentError
from evolve import WaveProfile, free_wave_state, smooth_cutoff, turok_spergel
from grid import RadialGrid
from model import FieldState, Formulation
from output import read_snapshot

logger = logging.getLogger(__name__)

ParamValue = Union[float, str]


def _inverse_cube(grid: RadialGrid, a: float) -> np.ndarray:
    """r^-3 for r >= a, smoothly cut to 0 inside [a/2, a]"""
    out = np.zeros(grid.size)
    out[1:] = smooth_cutoff(grid.r[1:], a) / grid.r[1:] ** 3
    return out


def gaussian_bump(grid: RadialGrid, amplitude: float, center: float, width: float) -> FieldState:
    u = amplitude * np.exp(-((grid.r - center) / width) ** 2)
    return FieldState(Formulation.U5D, u, np.zeros(grid.size))


def turok_spergel_data(grid: RadialGrid, t0: float) -> FieldState:
    psi, psi_t = turok_spergel(t0, grid.r)
    return FieldState(Formulation.PSI3D, psi, psi_t, t0)


def newton_tail(grid: RadialGrid, a: float) -> FieldState:
    return FieldState(Formulation.U5D, _inverse_cube(grid, a), np.zeros(grid.size))


def plane_velocity(grid: RadialGrid, a: float) -> FieldState:
    return FieldState(Formulation.U5D, np.zeros(grid.size), _inverse_cube(grid, a))


def compact_bump(grid: RadialGrid, amplitude: float, lo: float, hi: float) -> FieldState:
    """A exp(1 - 1/(1 - x^2)) on (lo, hi), peak A at the midpoint"""
    if not hi > lo:
        raise InvalidArgumentError(f"compact_bump needs lo < hi, got lo={lo}, hi={hi}")
    x = (2.0 * grid.r - lo - hi) / (hi - lo)
    inside = np.abs(x) < 1.0
    u = np.zeros(grid.size)
    u[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return FieldState(Formulation.U5D, u, np.zeros(grid.size))


def harmonic(grid: RadialGrid, scale: float) -> FieldState:
    """Degree-one static profile 2 arctan(r / scale)"""
    if not scale > 0:
        raise InvalidArgumentError(f"harmonic scale must be positive, got {scale}")
    return FieldState(Formulation.PSI3D, 2.0 * np.arctan(grid.r / scale), np.zeros(grid.size))


def free_wave(grid: RadialGrid, amplitude: float, center: float, width: float, t0: float) -> FieldState:
    return free_wave_state(WaveProfile(amplitude, center, width), t0, grid)


def custom_file(grid: RadialGrid, path: str) -> FieldState:
    return read_snapshot(path, grid)


FAMILIES: Dict[str, Tuple[Callable[..., FieldState], Dict[str, ParamValue]]] = {
    "gaussian_bump": (gaussian_bump, {"amplitude": 0.01, "center": 3.0, "width": 0.5}),
    "turok_spergel": (turok_spergel_data, {"t0": 1.0}),
    "newton_tail": (newton_tail, {"a": 1.0}),
    "plane_velocity": (plane_velocity, {"a": 1.0}),
    "custom_file": (custom_file, {"path": ""}),
    "compact_bump": (compact_bump, {"amplitude": 1.0, "lo": 2.0, "hi": 3.0}),
    "harmonic": (harmonic, {"scale": 1.0}),
    "free_wave": (free_wave, {"amplitude": 1.0, "center": 5.0, "width": 1.0, "t0": 0.0}),
}


def parse_initial(text: str) -> Tuple[str, Dict[str, ParamValue]]:
    """Split 'family key=value ...' into the family and its full parameter set"""
    parts = text.split()
    if not parts:
        raise InvalidArgumentError("initial data description is empty")
    family, items = parts[0], parts[1:]
    if family not in FAMILIES:
        raise InvalidArgumentError(f"unknown initial data family '{family}'")
    defaults = FAMILIES[family][1]
    params: Dict[str, ParamValue] = dict(defaults)
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key or not raw:
            raise InvalidArgumentError(f"expected key=value, got '{item}'")
        if key not in defaults:
            raise InvalidArgumentError(f"{family} has no parameter '{key}'")
        if isinstance(defaults[key], str):
            params[key] = raw
        else:
            try:
                params[key] = float(raw)
            except ValueError:
                raise InvalidArgumentError(f"parameter {key} must be a number, got '{raw}'")
    if family == "custom_file" and not params["path"]:
        raise InvalidArgumentError("custom_file needs path=...")
    return family, params


def builtin_data(family: str, params: Mapping[str, ParamValue], grid: RadialGrid) -> FieldState:
    """Sample a builtin family on the grid"""
    if family not in FAMILIES:
        raise InvalidArgumentError(f"unknown initial data family '{family}'")
    build, defaults = FAMILIES[family]
    unknown = set(params) - set(defaults)
    if unknown:
        raise InvalidArgumentError(f"{family} has no parameters {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(params)
    logger.debug(f"Building {family} with {merged}")
    return build(grid, **merged)


def initial_state(text: str, grid: RadialGrid) -> FieldState:
    family, params = parse_initial(text)
    return builtin_data(family, params, grid)

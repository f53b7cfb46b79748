#!/usr/bin/env python3
"""
Configuration management for anwave runs

A run is described by plain `key = value` lines. This module parses and
validates them into a RunConfig, renders a RunConfig back to text for the
run manifest, and keeps the named presets for the standard experiments.
"""

import json
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from errors import AnWaveError, InvalidArgumentError
from evolve import STABLE_CFL, EquationKind
from grid import MIN_POINTS
from initial_data import parse_initial

COMMANDS = ("evolve", "stationary", "channels", "smallscale", "truncated", "sweep")
BOUNDARIES = ("none", "sommerfeld")
# commands whose cone-sized grids assume a reflecting-free interior
CONE_SIZED = ("channels", "smallscale", "truncated")


class ConfigParseError(AnWaveError):
    """Invalid run configuration, pointing at the offending line"""
    def __init__(self, message: str, line_number: Optional[int] = None, line_content: Optional[str] = None):
        self.line_number = line_number
        self.line_content = line_content
        if line_number:
            message = f"Line {line_number}: {message}"
        if line_content:
            message += f" ('{line_content.strip()}')"
        super().__init__(message)


@dataclass
class RunConfig:
    """Settings for one anwave run"""
    command: str = "evolve"

    # Equation and grid
    equation: str = "an_u"
    r_max: float = 20.0
    n_points: int = 2000
    cfl: float = 0.45
    t_final: float = 1.0
    outputs: List[float] = None
    n_outputs: int = 0
    boundary: str = "none"
    initial: str = "gaussian_bump amplitude=0.01 center=3 width=0.5"

    # Diagnostics and thresholds
    diagnostic_radii: List[float] = None
    blowup_threshold: float = 1e6
    energy_inflation: float = 10.0
    node_jump: float = 0.5
    small_data_threshold: float = 0.1

    # Stationary family
    alphas: List[float] = None
    r_min: float = 0.05
    abort_threshold: float = 1e3
    s0: float = 3.0
    tail_tol: float = 1e-13

    # Channels and comparison experiments
    channel_radius: float = 1.0
    horizon: float = 10.0
    samples: int = 50
    key_radii: List[float] = None
    fit_window: List[float] = None
    lambdas: List[float] = None
    radii: List[float] = None

    # Sweeps
    sweep_command: str = "evolve"
    sweep_key: str = ""
    sweep_values: List[str] = None

    def __post_init__(self):
        if self.outputs is None:
            self.outputs = []
        if self.diagnostic_radii is None:
            self.diagnostic_radii = []
        if self.alphas is None:
            self.alphas = [0.0, 0.5, -0.5]
        if self.key_radii is None:
            self.key_radii = []
        if self.fit_window is None:
            self.fit_window = []
        if self.lambdas is None:
            self.lambdas = [0.2, 0.1, 0.05]
        if self.radii is None:
            self.radii = [10.0, 20.0, 40.0]
        if self.sweep_values is None:
            self.sweep_values = []

    @property
    def kind(self) -> EquationKind:
        return EquationKind.parse(self.equation)

    def output_times(self, t0: float) -> List[float]:
        """Explicit outputs, else n_outputs uniform times after t0, else just t_final"""
        if self.outputs:
            return list(self.outputs)
        if self.n_outputs > 0:
            step = (self.t_final - t0) / self.n_outputs
            return [t0 + step * i for i in range(1, self.n_outputs)] + [self.t_final]
        return [self.t_final]

    def window(self) -> Tuple[float, float]:
        if self.fit_window:
            return self.fit_window[0], self.fit_window[1]
        return 0.25 * self.r_max, 0.5 * self.r_max

    def validate(self) -> List[Tuple[str, str]]:
        """Problems as (key, message) pairs; empty when the config is usable"""
        problems = []
        if self.command not in COMMANDS:
            problems.append(("command", f"unknown command '{self.command}', expected one of {', '.join(COMMANDS)}"))
        if self.sweep_command not in COMMANDS or self.sweep_command == "sweep":
            problems.append(("sweep_command", f"cannot sweep over '{self.sweep_command}'"))
        try:
            EquationKind.parse(self.equation)
        except InvalidArgumentError as e:
            problems.append(("equation", str(e)))
        if not self.r_max > 0:
            problems.append(("r_max", "r_max must be positive"))
        if self.n_points < MIN_POINTS:
            problems.append(("n_points", f"n_points must be at least {MIN_POINTS}"))
        if not 0.0 < self.cfl < 1.0:
            problems.append(("cfl", f"cfl must lie in (0, 1), stable up to {STABLE_CFL:.3f}"))
        if self.boundary not in BOUNDARIES:
            problems.append(("boundary", f"boundary must be one of {', '.join(BOUNDARIES)}"))
        try:
            parse_initial(self.initial)
        except InvalidArgumentError as e:
            problems.append(("initial", str(e)))
        if self.n_outputs < 0:
            problems.append(("n_outputs", "n_outputs must be nonnegative"))
        for name in ("blowup_threshold", "energy_inflation", "node_jump", "small_data_threshold",
                     "r_min", "abort_threshold", "tail_tol", "channel_radius", "horizon"):
            if not getattr(self, name) > 0:
                problems.append((name, f"{name} must be positive"))
        if self.samples < 1:
            problems.append(("samples", "samples must be at least 1"))
        for name in ("diagnostic_radii", "key_radii", "lambdas", "radii"):
            if any(not r > 0 for r in getattr(self, name)):
                problems.append((name, f"{name} entries must be positive"))
        if self.fit_window and (len(self.fit_window) != 2 or not 0 < self.fit_window[0] < self.fit_window[1]):
            problems.append(("fit_window", "fit_window takes two increasing positive radii"))

        # inconsistent pairs
        if self.boundary == "sommerfeld" and (self.command in CONE_SIZED or
                                              (self.command == "sweep" and self.sweep_command in CONE_SIZED)):
            problems.append(("boundary", f"sommerfeld boundary conflicts with the cone-sized '{self.command}' runs"))
        if self.outputs:
            t0 = self._initial_time()
            lo, hi = sorted((t0, self.t_final))
            if any(t < lo - 1e-12 or t > hi + 1e-12 for t in self.outputs):
                problems.append(("outputs", f"output times must lie between {t0:g} and t_final = {self.t_final:g}"))
        if self.fit_window and self.fit_window[-1] > self.r_max:
            problems.append(("fit_window", "fit_window reaches past r_max"))
        if self.command == "sweep":
            if self.sweep_key not in {f.name for f in fields(self)} or self.sweep_key in ("command", "sweep_key",
                                                                                         "sweep_values", "sweep_command"):
                problems.append(("sweep_key", f"cannot sweep over key '{self.sweep_key}'"))
            if not self.sweep_values:
                problems.append(("sweep_values", "sweep needs at least one value"))
        if self.command == "stationary" and not self.alphas:
            problems.append(("alphas", "stationary needs at least one alpha"))
        return problems

    def _initial_time(self) -> float:
        try:
            family, params = parse_initial(self.initial)
        except InvalidArgumentError:
            return 0.0
        return float(params.get("t0", 0.0)) if family in ("turok_spergel", "free_wave") else 0.0

    def to_text(self) -> str:
        """key = value lines that parse back to an equal RunConfig"""
        lines = [f"{f.name} = {_render(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"


# Parsing

_LIST_FLOAT = ("outputs", "diagnostic_radii", "alphas", "key_radii", "fit_window", "lambdas", "radii")
_LIST_STR = ("sweep_values",)
_INT = ("n_points", "n_outputs", "samples")
_STR = ("command", "equation", "boundary", "initial", "sweep_command", "sweep_key")


def _render(value) -> str:
    if isinstance(value, list):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(key: str, raw: str):
    if key in _LIST_FLOAT:
        return [float(item) for item in raw.split(",") if item.strip()]
    if key in _LIST_STR:
        return [item.strip() for item in raw.split(",") if item.strip()]
    if key in _INT:
        number = float(raw)
        if number != int(number):
            raise ValueError(f"{raw} is not an integer")
        return int(number)
    if key in _STR:
        return raw
    return float(raw)


def parse_config(text: str, base: Optional[RunConfig] = None) -> RunConfig:
    """Parse key = value lines on top of base (or the defaults) and validate"""
    known = {f.name for f in fields(RunConfig)}
    values: Dict[str, object] = {}
    lines: Dict[str, Tuple[int, str]] = {}

    for line_number, line in enumerate(text.splitlines(), 1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, raw = content.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigParseError("expected 'key = value'", line_number, line)
        if key not in known:
            raise ConfigParseError(f"unknown key '{key}'", line_number, line)
        if key in values:
            raise ConfigParseError(f"duplicate key '{key}'", line_number, line)
        try:
            values[key] = _convert(key, raw.strip())
        except ValueError as e:
            raise ConfigParseError(f"malformed value for '{key}': {e}", line_number, line)
        if key == "equation":
            values[key] = _canonical_equation(values[key], line_number, line)
        lines[key] = (line_number, line)

    config = replace(base, **values) if base is not None else RunConfig(**values)
    problems = config.validate()
    if problems:
        key, message = problems[0]
        line_number, line = lines.get(key, (None, None))
        raise ConfigParseError(message, line_number, line)
    return config


def _canonical_equation(raw: str, line_number: int, line: str) -> str:
    try:
        return str(EquationKind.parse(raw))
    except InvalidArgumentError as e:
        raise ConfigParseError(str(e), line_number, line)


def apply_overrides(config: RunConfig, overrides: List[str]) -> RunConfig:
    """--override key=value items, applied after the config file"""
    text = "\n".join(overrides)
    try:
        return parse_config(text, config)
    except ConfigParseError as e:
        raise ConfigParseError(f"in --override: {e}")


# Presets


@dataclass
class PresetSettings:
    """Named RunConfig for one of the standard experiments"""
    name: str
    description: str
    text: str

    @property
    def config(self) -> RunConfig:
        return parse_config(self.text)


BUILTIN_PRESETS = {
    "energy_conservation": (
        "Energy drift of an_psi from degree-0 bump data",
        """command = evolve
equation = an_psi
initial = gaussian_bump amplitude=0.5 center=3 width=1
r_max = 60
n_points = 4096
t_final = 20
n_outputs = 20
"""),
    "turok_spergel": (
        "Wave map from the self-similar solution at t = 1 to t = 0.25",
        """command = evolve
equation = wave_map
initial = turok_spergel t0=1
r_max = 8
n_points = 800
t_final = 0.25
n_outputs = 3
"""),
    "collapse": (
        "Turok-Spergel run toward t = 0, stopped by blow-up detection",
        """command = evolve
equation = wave_map
initial = turok_spergel t0=1
r_max = 8
n_points = 800
t_final = 0
"""),
    "free_wave": (
        "Free 5d evolution of an exact Gaussian-profile wave",
        """command = evolve
equation = free5d
initial = free_wave amplitude=1 center=5 width=1 t0=0
r_max = 20
n_points = 1000
t_final = 4
n_outputs = 4
"""),
    "stationary_family": (
        "Stationary profiles and origin classes across alpha",
        """command = stationary
alphas = 0, 0.1, -0.1, 0.5, -0.5, 1, -1, 2, -2
r_min = 0.05
"""),
    "plane_nullity": (
        "Channel experiment on cut r^-3 data (no exterior energy left)",
        """command = channels
initial = newton_tail a=1
channel_radius = 1
horizon = 10
r_max = 30
n_points = 3000
"""),
    "channel_positivity": (
        "Channel experiment on a bump supported in [2, 3]",
        """command = channels
initial = compact_bump amplitude=1 lo=2 hi=3
channel_radius = 1
horizon = 10
r_max = 16
n_points = 1600
"""),
    "small_scale": (
        "an_u against the quintic equation at shrinking scales",
        """command = smallscale
initial = gaussian_bump amplitude=0.01 center=2 width=0.5
lambdas = 0.2, 0.1, 0.05
horizon = 10
r_max = 5
n_points = 4000
"""),
    "truncated_scaling": (
        "Exterior truncated problem against the free wave for growing R",
        """command = truncated
initial = gaussian_bump amplitude=0.008 center=2 width=0.5
radii = 10, 20, 40
horizon = 60
r_max = 100
n_points = 2000
"""),
}


class ConfigManager:
    """Loads presets and user settings"""

    DEFAULT_CONFIG_NAME = "anwave_presets.json"

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.config_path = self._find_config_file()
        self.presets: Dict[str, PresetSettings] = {}
        self._load_default_presets()

    def _find_config_file(self) -> Optional[Path]:
        """Find the preset file in standard locations"""
        search_paths = [
            Path.cwd() / self.DEFAULT_CONFIG_NAME,
            Path.home() / ".config" / "anwave" / self.DEFAULT_CONFIG_NAME,
            Path(__file__).parent / self.DEFAULT_CONFIG_NAME
        ]

        for path in search_paths:
            if path.exists():
                return path

        return None

    def _load_default_presets(self):
        for name, (description, text) in BUILTIN_PRESETS.items():
            self.presets[name] = PresetSettings(name=name, description=description, text=text)

    def load_config(self, path: Optional[Path] = None) -> bool:
        """Add user presets from a JSON file"""
        load_path = path or self.config_path
        if not load_path or not Path(load_path).exists():
            self.logger.info("No preset file found, using builtin presets")
            return False

        try:
            with open(load_path, 'r') as f:
                data = json.load(f)

            for name, preset in data.get('presets', {}).items():
                candidate = PresetSettings(name=name,
                                           description=preset.get('description', 'Custom preset'),
                                           text=preset['text'])
                parse_config(candidate.text)
                self.presets[name] = candidate

            self.logger.info(f"Loaded presets from {load_path}")
            return True

        except (OSError, ValueError, KeyError, AnWaveError) as e:
            self.logger.error(f"Error loading presets: {e}")
            return False

    def save_config(self, path: Optional[Path] = None) -> bool:
        """Save user presets (builtins are skipped)"""
        save_path = Path(path or self.config_path or Path.cwd() / self.DEFAULT_CONFIG_NAME)

        try:
            data = {'presets': {}}
            for name, preset in self.presets.items():
                if name not in BUILTIN_PRESETS:
                    data['presets'][name] = {'description': preset.description, 'text': preset.text}

            save_path.parent.mkdir(parents=True, exist_ok=True)
            with open(save_path, 'w') as f:
                json.dump(data, f, indent=2)

            self.logger.info(f"Saved presets to {save_path}")
            return True

        except OSError as e:
            self.logger.error(f"Error saving presets: {e}")
            return False

    def get_preset(self, name: str) -> Optional[PresetSettings]:
        return self.presets.get(name)

    def list_presets(self) -> Dict[str, str]:
        """Preset names with descriptions"""
        return {name: preset.description for name, preset in self.presets.items()}

    def add_preset(self, name: str, description: str, config: RunConfig):
        self.presets[name] = PresetSettings(name=name, description=description, text=config.to_text())

    def apply_preset(self, name: str) -> RunConfig:
        """RunConfig of a preset; unknown names raise InvalidArgumentError"""
        preset = self.get_preset(name)
        if not preset:
            raise InvalidArgumentError(f"unknown preset '{name}'")
        self.logger.info(f"Applied preset: {name}")
        return preset.config


# Global config manager instance
config_manager = ConfigManager()


def get_config() -> ConfigManager:
    """Get the global configuration manager"""
    return config_manager

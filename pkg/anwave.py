#!/usr/bin/env python3
"""
anwave - batch experiments for the Adkins-Nappi equivariant wave map equation

Runs one of the experiment commands (evolve, stationary, channels,
smallscale, truncated, sweep) from a key = value configuration and writes
CSV/JSON results plus a manifest.json into the output directory.

Exit status: 0 when the run completed, 2 when blow-up was detected (results
are still written), 1 on any error.
"""

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple

from channels import channel_experiment, decay_diagnostics, key_inequality_report
from config import COMMANDS, ConfigParseError, RunConfig, apply_overrides, get_config, parse_config
from errors import AnWaveError
from evolve import BlowupThresholds, Termination, evolve, loglog_slope, small_scale_experiment, truncated_comparison
from grid import RadialGrid, make_grid
from initial_data import initial_state
from model import FieldState
from output import VERSION, write_json, write_manifest, write_profile, write_rows, write_trajectory
from stationary import sweep

EXIT_COMPLETED = 0
EXIT_ERROR = 1
EXIT_BLOWUP = 2

RunResult = Tuple[int, List[Path]]


class RunStats:
    """Track run outcomes"""
    def __init__(self):
        self.runs_processed = 0
        self.runs_completed = 0
        self.runs_blowup = 0
        self.runs_failed = 0
        self.start_time = time.time()
        self.errors: List[str] = []

    def add_result(self, status: int):
        self.runs_processed += 1
        if status == EXIT_COMPLETED:
            self.runs_completed += 1
        elif status == EXIT_BLOWUP:
            self.runs_blowup += 1
        else:
            self.runs_failed += 1

    def add_failure(self, error: str):
        self.add_result(EXIT_ERROR)
        self.errors.append(error)

    @property
    def exit_status(self) -> int:
        if self.runs_failed:
            return EXIT_ERROR
        if self.runs_blowup:
            return EXIT_BLOWUP
        return EXIT_COMPLETED

    def get_duration(self) -> float:
        return time.time() - self.start_time

    def print_summary(self):
        duration = self.get_duration()
        print(f"\n{'='*50}")
        print(f"RUN SUMMARY")
        print(f"{'='*50}")
        print(f"Runs processed: {self.runs_processed}")
        print(f"Completed: {self.runs_completed}")
        print(f"Blow-up detected: {self.runs_blowup}")
        print(f"Failed: {self.runs_failed}")
        print(f"Duration: {duration:.2f} seconds")

        if self.errors:
            print(f"\nErrors encountered:")
            for i, error in enumerate(self.errors, 1):
                print(f"  {i}. {error}")


def setup_logging(verbose: bool = False) -> logging.Logger:
    """Setup logging configuration"""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )
    return logging.getLogger(__name__)


logger = logging.getLogger(__name__)


def prepare(config: RunConfig) -> Tuple[RadialGrid, FieldState]:
    grid = make_grid(config.r_max, config.n_points)
    return grid, initial_state(config.initial, grid)


# Commands


def run_evolve(config: RunConfig, out_dir: Path, jobs: int = 1) -> RunResult:
    grid, data = prepare(config)
    thresholds = BlowupThresholds(amplitude=config.blowup_threshold,
                                  energy_inflation=config.energy_inflation,
                                  node_jump=config.node_jump)
    trajectory = evolve(config.kind, data, grid, config.t_final, config.cfl,
                        config.output_times(data.time), config.boundary,
                        config.diagnostic_radii, thresholds)
    files = write_trajectory(trajectory, grid, out_dir)
    if config.key_radii:
        rows = key_inequality_report(trajectory, grid, config.key_radii)
        files.append(write_rows((row.as_dict() for row in rows), out_dir / "key_inequality.csv",
                                ["t", "R", "lhs", "rhs", "ratio"]))

    logger.info(f"{trajectory.kind}: {trajectory.termination.value} at t = {trajectory.final_time:.6g} "
                f"after {trajectory.steps} steps")
    if trajectory.termination == Termination.BLOWUP_DETECTED:
        return EXIT_BLOWUP, files
    if trajectory.termination == Termination.CFL_VIOLATION:
        logger.error(f"cfl = {config.cfl} is above the stability bound; nothing was integrated")
        return EXIT_ERROR, files
    return EXIT_COMPLETED, files


def run_stationary(config: RunConfig, out_dir: Path, jobs: int = 1) -> RunResult:
    results = sweep(config.alphas, config.r_min, config.abort_threshold, config.s0, config.tail_tol, jobs)
    files = []
    summary = {}
    for result in results:
        name = f"{result.alpha:.17g}"
        files.append(write_profile(result.profile, out_dir / f"profile_alpha_{name}.csv"))
        entry = result.summary()
        entry["pohozaev"] = result.pohozaev.as_dict()
        summary[name] = entry
    files.append(write_json(summary, out_dir / "stationary_summary.json"))
    return EXIT_COMPLETED, files


def run_channels(config: RunConfig, out_dir: Path, jobs: int = 1) -> RunResult:
    grid, data = prepare(config)
    report = channel_experiment(data, grid, config.channel_radius, config.horizon,
                                samples=config.samples, cfl=config.cfl)
    decay = decay_diagnostics(data, grid, config.window())
    files = [
        write_rows((row.as_dict() for row in report.rows), out_dir / "channel.csv",
                   ["t", "ext_plus", "ext_minus", "perp_norm_sq", "ratio"]),
        write_json(report.summary(), out_dir / "channel_summary.json"),
        write_json(decay.as_dict(), out_dir / "decay.json"),
    ]
    return EXIT_COMPLETED, files


def _halving_ratios(values: List[float]) -> List[float]:
    return [b / a if a else float("nan") for a, b in zip(values, values[1:])]


def run_smallscale(config: RunConfig, out_dir: Path, jobs: int = 1) -> RunResult:
    grid, data = prepare(config)
    rows = small_scale_experiment(data, config.lambdas, grid, config.horizon, config.cfl, config.samples)
    files = [write_rows((row.__dict__ for row in rows), out_dir / "smallscale.csv",
                        ["lam", "h1_difference", "s_difference", "status"])]
    differences = [row.h1_difference for row in rows]
    files.append(write_json({"lambdas": config.lambdas, "h1_differences": differences,
                             "ratios": _halving_ratios(differences)}, out_dir / "smallscale_summary.json"))
    blowup = any(row.status != Termination.COMPLETED.value for row in rows)
    return (EXIT_BLOWUP if blowup else EXIT_COMPLETED), files


def run_truncated(config: RunConfig, out_dir: Path, jobs: int = 1) -> RunResult:
    grid, data = prepare(config)
    rows = truncated_comparison(data, config.radii, grid, config.horizon, config.small_data_threshold,
                                config.cfl, config.samples)
    files = [write_rows((row.__dict__ for row in rows), out_dir / "truncated.csv",
                        ["radius", "sup_difference", "bound", "status"])]
    slope = loglog_slope([row.radius for row in rows], [row.sup_difference for row in rows])
    files.append(write_json({"radii": config.radii, "loglog_slope": slope}, out_dir / "truncated_summary.json"))
    blowup = any(row.status != Termination.COMPLETED.value for row in rows)
    return (EXIT_BLOWUP if blowup else EXIT_COMPLETED), files


def _run_sweep_member(args: Tuple[str, str]) -> int:
    text, out_dir = args
    config = parse_config(text)
    return run(config.command, config, Path(out_dir))


def run_sweep(config: RunConfig, out_dir: Path, jobs: int = 1) -> RunResult:
    members = []
    for i, value in enumerate(config.sweep_values):
        member = parse_config(f"command = {config.sweep_command}\n{config.sweep_key} = {value}", config)
        members.append((member.to_text(), str(out_dir / f"{config.sweep_key}_{i:03d}")))

    logger.info(f"Sweeping {config.sweep_key} over {len(members)} values with {jobs} job(s)")
    if jobs > 1 and len(members) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            statuses = list(executor.map(_run_sweep_member, members))
    else:
        statuses = [_run_sweep_member(member) for member in members]

    stats = RunStats()
    for status in statuses:
        stats.add_result(status)
    summary = {"sweep_key": config.sweep_key, "sweep_command": config.sweep_command,
               "runs": [{"value": value, "directory": Path(path).name, "exit_status": status}
                        for value, (_, path), status in zip(config.sweep_values, members, statuses)]}
    return stats.exit_status, [write_json(summary, out_dir / "sweep_summary.json")]


COMMAND_RUNNERS = {
    "evolve": run_evolve,
    "stationary": run_stationary,
    "channels": run_channels,
    "smallscale": run_smallscale,
    "truncated": run_truncated,
    "sweep": run_sweep,
}


def run(command: str, config: RunConfig, out_dir: Path, jobs: int = 1) -> int:
    """Run one command, write its results and manifest, and return the exit status"""
    out_dir = Path(out_dir)
    started = time.perf_counter()
    try:
        if command not in COMMAND_RUNNERS:
            raise AnWaveError(f"unknown command '{command}'")
        if command != config.command:
            config = replace(config, command=command)
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Running {command} into {out_dir}")
        status, files = COMMAND_RUNNERS[command](config, out_dir, jobs)
        write_manifest(out_dir, config.to_text(), command, time.perf_counter() - started, files,
                       {"exit_status": status})
    except (AnWaveError, OSError) as e:
        logger.error(f"{command} failed: {e}")
        return EXIT_ERROR
    return status


def load_run_config(args) -> RunConfig:
    """Preset, then config file, then --command and --override, later ones winning"""
    config = RunConfig()
    if args.preset:
        config_manager = get_config()
        if config_manager.get_preset(args.preset) is None:
            config_manager.load_config()
        config = config_manager.apply_preset(args.preset)
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        config = parse_config(text, config)
    overrides = list(args.override or [])
    if args.command:
        overrides.append(f"command = {args.command}")
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def main(argv: Optional[List[str]] = None):
    """Main entry point"""
    parser = argparse.ArgumentParser(
        description="Batch experiments for the Adkins-Nappi equivariant wave map equation",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s --config run.cfg --out ./results         # Run the command named in run.cfg
  %(prog)s --preset turok_spergel --out ./ts         # Run a builtin preset
  %(prog)s --config run.cfg --override cfl=0.3      # Override single keys
  %(prog)s --command stationary --override "alphas = 0, 0.5, -0.5"
  %(prog)s --config sweep.cfg --command sweep --jobs 4

Configuration keys (defaults):
  equation = an_u          an_psi, an_u, wave_map, quintic5d, free5d,
                           linearized3d, exterior_truncated(R)
  r_max = 20, n_points = 2000, cfl = 0.45, t_final = 1
  outputs = (t_final)      comma separated; or n_outputs = N uniform times
  boundary = none          none or sommerfeld
  initial = gaussian_bump amplitude=0.01 center=3 width=0.5
                           also turok_spergel t0, newton_tail a,
                           plane_velocity a, compact_bump amplitude lo hi,
                           harmonic scale, free_wave amplitude center width t0,
                           custom_file path
  diagnostic_radii, key_radii       comma separated radii
  blowup_threshold = 1e6, energy_inflation = 10, node_jump = 0.5
  small_data_threshold = 0.1
  alphas = 0, 0.5, -0.5, r_min = 0.05, abort_threshold = 1000, s0 = 3,
  tail_tol = 1e-13
  channel_radius = 1, horizon = 10, samples = 50, fit_window = (r_max/4, r_max/2)
  lambdas = 0.2, 0.1, 0.05, radii = 10, 20, 40
  sweep_command = evolve, sweep_key, sweep_values

Exit status: 0 completed, 2 blow-up detected, 1 error.
Use anwave_config.py to list, show and export presets.
        """
    )

    parser.add_argument('--config', metavar='PATH', help='key = value configuration file')
    parser.add_argument('--out', metavar='DIR', default='./anwave_out', help='Output directory (default: ./anwave_out)')
    parser.add_argument('--command', choices=COMMANDS, help='Command to run (default: the config\'s command key)')
    parser.add_argument('--override', action='append', metavar='KEY=VALUE',
                        help='Override one configuration key (repeatable)')
    parser.add_argument('--jobs', type=int, default=1, metavar='N', help='Worker processes for sweeps (default: 1)')
    parser.add_argument('--preset', help='Start from a builtin preset (see anwave_config.py list)')
    parser.add_argument('-v', '--verbose', action='store_true', help='Verbose output')
    parser.add_argument('--version', action='version', version=f'anwave {VERSION}')

    args = parser.parse_args(argv)

    # Setup logging
    setup_logging(args.verbose)

    stats = RunStats()
    try:
        config = load_run_config(args)
    except (ConfigParseError, AnWaveError, OSError) as e:
        logger.error(f"Configuration error: {e}")
        stats.add_failure(str(e))
        if args.verbose:
            stats.print_summary()
        sys.exit(EXIT_ERROR)

    status = run(config.command, config, Path(args.out), max(args.jobs, 1))
    stats.add_result(status)
    if args.verbose:
        stats.print_summary()

    sys.exit(status)


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""
Example usage of the anwave library

This script shows how to drive the evolution, stationary and channel
experiments programmatically instead of through the anwave command line.
"""

import tempfile
from pathlib import Path

from anwave import run
from channels import channel_experiment, project
from config import get_config, parse_config
from errors import AnWaveError
from evolve import Equation, EquationKind, evolve, turok_spergel
from grid import make_grid
from initial_data import compact_bump, initial_state, newton_tail
from model import energy, inequality_survey
from stationary import solve_profile


def example_energy_drift():
    """Example: energy of an_psi along a small bump evolution"""
    print("Example 1: Energy Conservation")
    print("=" * 40)

    grid = make_grid(20.0, 2000)
    data = initial_state("gaussian_bump amplitude=0.5 center=5 width=1", grid)
    kind = EquationKind(Equation.AN_PSI)
    trajectory = evolve(kind, data, grid, 4.0, outputs=[1.0, 2.0, 3.0, 4.0])

    energies = trajectory.energies()
    print(f"Termination: {trajectory.termination.value} after {trajectory.steps} steps")
    for row in trajectory.diagnostics:
        print(f"  t = {row.t:4.1f}  E = {row.energy.total:.12f}")
    print(f"Relative drift: {abs(energies[-1] - energies[0]) / energies[0]:.3e}")
    print()


def example_turok_spergel():
    """Example: wave map from the self-similar solution"""
    print("Example 2: Turok-Spergel Wave Map")
    print("=" * 40)

    grid = make_grid(8.0, 800)
    data = initial_state("turok_spergel t0=1", grid)
    trajectory = evolve(EquationKind(Equation.WAVE_MAP), data, grid, 0.25)
    final = trajectory.snapshots[-1]
    exact, _ = turok_spergel(final.time, grid.r)
    print(f"Error at t = {final.time}: {abs(final.value - exact).max():.3e}")
    print(f"Energy at t = 1: {energy(data, grid).total:.6f}")
    print()


def example_stationary():
    """Example: stationary profiles and their classification at the origin"""
    print("Example 3: Stationary Profiles")
    print("=" * 40)

    for alpha in (0.0, 0.5, -0.5):
        try:
            result = solve_profile(alpha, r_min=0.1)
        except AnWaveError as e:
            print(f"  alpha = {alpha}: failed ({e})")
            continue
        summary = result.summary()
        print(f"  alpha = {alpha:5.2f}: {summary['origin_class']:<13} "
              f"tail slope {summary['tail_fit_slope']:.3f}, residual {summary['ode_residual']:.2e}")
    print()


def example_channels():
    """Example: exterior energy channels of free waves"""
    print("Example 4: Exterior Energy Channels")
    print("=" * 40)

    grid = make_grid(16.0, 1600)
    split = project(newton_tail(grid, 0.5), grid, 1.0)
    print(f"r^-3 data at a = 1: |pi|^2 = {split.norm_pi_sq:.6f}, |pi_perp|^2 = {split.norm_perp_sq:.2e}")

    report = channel_experiment(compact_bump(grid, 1.0, 2.0, 3.0), grid, 1.0, 10.0, samples=20)
    print(f"Bump in [2, 3]: terminal exterior energy {report.terminal_max:.6f}, "
          f"ratio to perp {report.ratio_to_perp:.4f}, plateau {report.plateau}")
    print()


def example_inequalities():
    """Example: Hardy and Strauss ratios over random data"""
    print("Example 5: Inequality Survey")
    print("=" * 40)

    survey = inequality_survey(make_grid(20.0, 4000), n_samples=20, seed=1)
    print(f"Largest Hardy ratio: {survey['hardy']:.4f} (bound 2/3)")
    print(f"Largest Strauss ratio: {survey['strauss']:.4f} (bound 1/sqrt(3))")
    print()


def example_command_runs():
    """Example: presets and config text through the run driver"""
    print("Example 6: Runs and Presets")
    print("=" * 40)

    config_manager = get_config()
    print("Available presets:")
    for name, description in config_manager.list_presets().items():
        print(f"  {name}: {description}")

    config = parse_config("""command = evolve
equation = free5d
initial = free_wave amplitude=1 center=5 width=1 t0=0
r_max = 20
n_points = 1000
t_final = 2
n_outputs = 2
""")
    with tempfile.TemporaryDirectory() as temp_dir:
        out_dir = Path(temp_dir) / "free_wave"
        status = run(config.command, config, out_dir)
        print(f"\nfree_wave run exit status: {status}")
        for path in sorted(out_dir.rglob("*")):
            if path.is_file():
                print(f"  {path.relative_to(out_dir)}")
    print()


def main():
    """Run all examples"""
    print("anwave - Usage Examples")
    print("=" * 60)
    print()

    example_energy_drift()
    example_turok_spergel()
    example_stationary()
    example_channels()
    example_inequalities()
    example_command_runs()

    print("All examples completed!")
    print("\nFor more information, see:")
    print("  - FEATURES.md for the experiments and file formats")
    print("  - python anwave.py --help for CLI options")
    print("  - python anwave_config.py --help for presets")
    print("  - python -m pytest to run tests")


if __name__ == "__main__":
    main()

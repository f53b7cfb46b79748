#!/usr/bin/env python3
"""
Tests for the time evolution, the exact solutions and the comparison experiments
"""

import unittest

import numpy as np
import sympy as sp

from errors import InvalidArgumentError
from evolve import (STABLE_CFL, BlowupThresholds, CompactProfile, Equation, EquationKind,
                    Termination, WaveProfile, cell_volumes, conserved_energy, difference_state,
                    evolve, exact_free5d, free_wave_state, laplacian_5d_stencil, loglog_slope,
                    rescale, rhs, small_scale_experiment, smooth_cutoff, support_radius,
                    truncated_comparison, turok_spergel)
from grid import make_grid
from initial_data import compact_bump, gaussian_bump, newton_tail, turok_spergel_data
from model import (FieldState, Formulation, convert, degree, degree_residual, energy_norm,
                   exterior_energy, h_norm, h_norm_parts, pointwise_bound_check)


def _sup_error(trajectory, exact, mask=None):
    final = trajectory.snapshots[-1]
    diff = np.abs(final.value - exact)
    if mask is not None:
        diff = diff[mask]
    return float(np.max(diff))


def _gaussian(profile: WaveProfile):
    def f(x):
        return sp.Float(profile.amplitude) * sp.exp(-((x - sp.Float(profile.center))
                                                      / sp.Float(profile.width)) ** 2)
    return f


def _bump(profile: CompactProfile):
    def f(x):
        y = (2 * x - sp.Float(profile.lo) - sp.Float(profile.hi)) / sp.Float(profile.hi - profile.lo)
        return sp.Float(profile.amplitude) * sp.exp(1 - 1 / (1 - y ** 2))
    return f


def _free_wave_expressions(f):
    t, r = sp.symbols("t r", positive=True)
    u = sp.diff((f(t - r) - f(t + r)) / r, r) / r
    return t, r, u, sp.diff(u, t)


class TestEquationKind(unittest.TestCase):
    """Test equation tags and their parsing"""

    def test_parse(self):
        """Test parsing plain and parametrised kinds"""
        kind = EquationKind.parse("free5d")
        self.assertEqual(kind.equation, Equation.FREE5D)
        self.assertIsNone(kind.radius)

        kind = EquationKind.parse("exterior_truncated(4)")
        self.assertEqual(kind.equation, Equation.EXTERIOR_TRUNCATED)
        self.assertEqual(kind.radius, 4.0)
        self.assertEqual(str(kind), "exterior_truncated(4)")

    def test_parse_errors(self):
        """Test malformed kinds are rejected"""
        for text in ("heat", "exterior_truncated", "exterior_truncated(-1)",
                     "free5d(2)", "an_u(", "exterior_truncated(x)"):
            with self.assertRaises(InvalidArgumentError):
                EquationKind.parse(text)

    def test_formulation(self):
        """Test which kinds run on psi and which on u"""
        for name in ("an_psi", "wave_map", "linearized3d"):
            self.assertEqual(EquationKind.parse(name).formulation, Formulation.PSI3D)
        for name in ("an_u", "quintic5d", "free5d", "exterior_truncated(2)"):
            self.assertEqual(EquationKind.parse(name).formulation, Formulation.U5D)


class TestSmoothCutoff(unittest.TestCase):
    """Test the smooth step used by the truncated problem"""

    def test_plateaus(self):
        """Test the cutoff is 0 up to R/2 and 1 from R on"""
        R = 4.0
        self.assertEqual(smooth_cutoff(R, R), 1.0)
        self.assertEqual(smooth_cutoff(R / 2, R), 0.0)
        self.assertEqual(smooth_cutoff(0.0, R), 0.0)
        self.assertEqual(smooth_cutoff(10 * R, R), 1.0)
        middle = smooth_cutoff(0.75 * R, R)
        self.assertGreater(middle, 0.0)
        self.assertLess(middle, 1.0)

    def test_monotone(self):
        """Test the cutoff never decreases"""
        values = smooth_cutoff(np.linspace(0.0, 6.0, 2001), 3.0)
        self.assertTrue(np.all(np.diff(values) >= 0.0))

    def test_flat_matching(self):
        """Test one-sided slopes vanish at both ends of the transition"""
        R, eps = 2.0, 1e-3
        self.assertLess((smooth_cutoff(R / 2 + eps, R) - smooth_cutoff(R / 2, R)) / eps, 1e-12)
        self.assertLess((smooth_cutoff(R, R) - smooth_cutoff(R - eps, R)) / eps, 1e-12)

    def test_invalid_radius(self):
        """Test a non-positive radius is rejected"""
        with self.assertRaises(InvalidArgumentError):
            smooth_cutoff(1.0, 0.0)


class TestRightHandSide(unittest.TestCase):
    """Test the discrete accelerations"""

    def setUp(self):
        """Set up test fixtures"""
        self.grid = make_grid(10.0, 1000)

    def test_newton_potential_static(self):
        """Test free5d acceleration of r^-3 vanishes outside the cut"""
        state = newton_tail(self.grid, 1.0)
        acceleration = rhs(EquationKind(Equation.FREE5D), state, self.grid)
        outside = self.grid.r >= 1.5
        self.assertLess(float(np.max(np.abs(acceleration[outside]))), 1e-3)
        self.assertEqual(acceleration[-1], 0.0)

    def test_linearized_matches_free(self):
        """Test linearized3d acceleration is r times the free5d acceleration"""
        r = self.grid.r
        u = np.exp(-(r - 3.0) ** 2)
        zeros = np.zeros(self.grid.size)
        free = rhs(EquationKind(Equation.FREE5D), FieldState(Formulation.U5D, u, zeros), self.grid)
        linear = rhs(EquationKind(Equation.LINEARIZED3D),
                     FieldState(Formulation.PSI3D, r * u, zeros), self.grid)
        np.testing.assert_allclose(linear[2:-1], (r * free)[2:-1], atol=1e-9)
        self.assertEqual(linear[0], 0.0)

    def test_truncated_support(self):
        """Test exterior_truncated(4) is free inside r = 2 and full outside r = 4"""
        r = self.grid.r
        state = FieldState(Formulation.U5D, 0.8 * np.exp(-((r - 3.0) / 1.5) ** 2),
                           np.zeros(self.grid.size))
        truncated = rhs(EquationKind(Equation.EXTERIOR_TRUNCATED, 4.0), state, self.grid)
        free = rhs(EquationKind(Equation.FREE5D), state, self.grid)
        full = rhs(EquationKind(Equation.AN_U), state, self.grid)
        inner = r <= 2.0
        outer = r >= 4.0
        np.testing.assert_array_equal(truncated[inner], free[inner])
        np.testing.assert_array_equal(truncated[outer], full[outer])
        self.assertFalse(np.array_equal(free[outer], full[outer]))

    def test_stencil_exact_on_quadratics(self):
        """Test the flux-form Laplacian of 2 + 3 r^2 is 30 up to the outer node"""
        u = 2.0 + 3.0 * self.grid.r ** 2
        laplacian = laplacian_5d_stencil(self.grid, u)
        np.testing.assert_allclose(laplacian[:-1], 30.0, rtol=1e-9)
        self.assertEqual(laplacian[-1], 0.0)

    def test_stencil_is_energy_gradient(self):
        """Test sum W v L u is minus the derivative of the discrete gradient energy along v"""
        rng = np.random.default_rng(8)
        kind = EquationKind(Equation.FREE5D)
        zeros = np.zeros(self.grid.size)
        u = rng.normal(size=self.grid.size) * np.exp(-(self.grid.r - 4.0) ** 2)
        v = rng.normal(size=self.grid.size) * np.exp(-(self.grid.r - 3.0) ** 2)
        v[-1] = 0.0

        def gradient_energy(samples):
            return conserved_energy(kind, FieldState(Formulation.U5D, samples, zeros), self.grid).total

        step = 1e-3
        derivative = (gradient_energy(u + step * v) - gradient_energy(u - step * v)) / (2.0 * step)
        pairing = -float(np.dot(cell_volumes(self.grid) * v, laplacian_5d_stencil(self.grid, u)))
        self.assertAlmostEqual(derivative, pairing, delta=1e-9 * (1.0 + abs(pairing)))

    def test_formulation_mismatch(self):
        """Test a u state is rejected by a 3d equation"""
        state = FieldState.zeros(Formulation.U5D, self.grid)
        with self.assertRaises(InvalidArgumentError):
            rhs(EquationKind(Equation.WAVE_MAP), state, self.grid)


class TestExactSolutions(unittest.TestCase):
    """Test the closed-form oracles"""

    def test_turok_spergel_values(self):
        """Test the self-similar solution at simple points"""
        psi, psi_t = turok_spergel(1.0, 1.0)
        self.assertAlmostEqual(psi, np.pi / 2, places=14)
        self.assertAlmostEqual(psi_t, -1.0, places=14)
        self.assertEqual(turok_spergel(2.0, 0.0), (0.0, 0.0))
        with self.assertRaises(InvalidArgumentError):
            turok_spergel(0.0, 1.0)

    def test_turok_spergel_residual(self):
        """Test 2 arctan(r / t) solves the wave map equation"""
        t, r = sp.symbols("t r", positive=True)
        psi = 2 * sp.atan(r / t)
        residual = (sp.diff(psi, t, 2) - sp.diff(psi, r, 2) - 2 / r * sp.diff(psi, r)
                    + sp.sin(2 * psi) / r ** 2)
        evaluate = sp.lambdify((t, r), residual, "numpy")
        rng = np.random.default_rng(2)
        ts = rng.uniform(0.2, 3.0, 200)
        rs = rng.uniform(0.1, 5.0, 200)
        self.assertLess(float(np.max(np.abs(evaluate(ts, rs)))), 1e-10)

        grid = make_grid(5.0, 50)
        psi_num, psi_t_num = turok_spergel(0.7, grid.r)
        psi_sym = sp.lambdify((t, r), psi, "numpy")(0.7, grid.r[1:])
        np.testing.assert_allclose(psi_num[1:], psi_sym, rtol=1e-14)
        np.testing.assert_allclose(psi_t_num[1:],
                                   sp.lambdify((t, r), sp.diff(psi, t), "numpy")(0.7, grid.r[1:]),
                                   rtol=1e-12)

    def test_free_wave_against_symbolic(self):
        """Test the 5d free wave, including the series branch near r = 0"""
        profile = WaveProfile(1.0, 5.0, 1.0)
        t, r, u, u_t = _free_wave_expressions(_gaussian(profile))
        for time in (0.0, 2.5, 5.0):
            for radius in (0.005, 0.0199, 0.0201, 0.5, 3.0, 7.0):
                value, velocity = exact_free5d(profile, time, radius)
                point = {t: sp.Rational(str(time)), r: sp.Rational(str(radius))}
                expected_u = float(sp.N(u.subs(point), 30))
                expected_u_t = float(sp.N(u_t.subs(point), 30))
                self.assertAlmostEqual(float(value[0]), expected_u, delta=1e-8 * (1 + abs(expected_u)))
                self.assertAlmostEqual(float(velocity[0]), expected_u_t,
                                       delta=1e-8 * (1 + abs(expected_u_t)))

    def test_free_wave_residual(self):
        """Test the descent construction solves the 5d radial wave equation"""
        profile = WaveProfile(0.7, 2.0, 0.8)
        t, r, u, _ = _free_wave_expressions(_gaussian(profile))
        residual = sp.diff(u, t, 2) - sp.diff(u, r, 2) - 4 / r * sp.diff(u, r)
        evaluate = sp.lambdify((t, r), residual, "numpy")
        rng = np.random.default_rng(4)
        ts = rng.uniform(0.0, 3.0, 100)
        rs = rng.uniform(0.5, 8.0, 100)
        self.assertLess(float(np.max(np.abs(evaluate(ts, rs)))), 1e-9)

    def test_free_wave_energy_constant(self):
        """Test the energy of the exact free wave does not change in time"""
        grid = make_grid(12.0, 6000)
        profile = WaveProfile(1.0, 5.0, 1.0)
        energies = [energy_norm(free_wave_state(profile, t, grid), grid) ** 2 for t in (0.0, 1.0, 2.0)]
        for value in energies[1:]:
            self.assertAlmostEqual(value, energies[0], delta=1e-5 * energies[0])

    def test_compact_profile_derivatives(self):
        """Test the bump derivatives against symbolic differentiation, and zero off the support"""
        profile = CompactProfile(0.8, 2.0, 3.0)
        x = sp.Symbol("x", real=True)
        expression = _bump(profile)(x)
        for order in range(5):
            derivative = sp.diff(expression, x, order)
            for point in (2.1, 2.5, 2.77, 2.95):
                expected = float(sp.N(derivative.subs(x, sp.Rational(str(point))), 30))
                value = float(profile.derivative(order, point)[0])
                self.assertAlmostEqual(value, expected, delta=1e-10 * (1 + abs(expected)))
            np.testing.assert_array_equal(profile.derivative(order, [1.0, 2.0, 3.0, 4.0]), 0.0)

    def test_compact_wave_support(self):
        """Test the compact wave vanishes wherever t - r and t + r both miss the support"""
        profile = CompactProfile(1.0, 2.0, 3.0)
        cases = ((0.0, [0.5, 1.0, 1.9, 3.1, 4.0, 10.0], 2.5),
                 (1.0, [0.005, 0.5, 2.5, 5.0], 1.5))
        for time, outside, inside in cases:
            value, velocity = exact_free5d(profile, time, outside)
            np.testing.assert_array_equal(value, 0.0)
            np.testing.assert_array_equal(velocity, 0.0)
            value, _ = exact_free5d(profile, time, inside)
            self.assertNotEqual(float(value[0]), 0.0)

        grid = make_grid(10.0, 500)
        state = free_wave_state(profile, 0.0, grid)
        outside = (grid.r <= 2.0) | (grid.r >= 3.0)
        np.testing.assert_array_equal(state.value[outside], 0.0)
        self.assertLessEqual(support_radius(state, grid), 3.0)

    def test_compact_wave_against_symbolic(self):
        """Test the compact wave inside the cone, including the series branch"""
        profile = CompactProfile(1.0, 2.0, 3.0)
        t, r, u, u_t = _free_wave_expressions(_bump(profile))
        for radius in (0.005, 0.3, 0.4):
            value, velocity = exact_free5d(profile, 2.5, radius)
            point = {t: sp.Rational("2.5"), r: sp.Rational(str(radius))}
            expected_u = float(sp.N(u.subs(point), 30))
            expected_u_t = float(sp.N(u_t.subs(point), 30))
            self.assertAlmostEqual(float(value[0]), expected_u, delta=1e-8 * (1 + abs(expected_u)))
            self.assertAlmostEqual(float(velocity[0]), expected_u_t,
                                   delta=1e-8 * (1 + abs(expected_u_t)))

    def test_compact_profile_invalid(self):
        """Test an empty support is rejected"""
        for lo, hi in ((3.0, 2.0), (2.0, 2.0)):
            with self.assertRaises(InvalidArgumentError):
                CompactProfile(1.0, lo, hi)


class TestEvolve(unittest.TestCase):
    """Test the RK4 method-of-lines integrator"""

    def test_zero_data_stays_zero(self):
        """Test an_psi keeps the zero solution"""
        grid = make_grid(5.0, 100)
        zero = FieldState.zeros(Formulation.PSI3D, grid)
        trajectory = evolve(EquationKind(Equation.AN_PSI), zero, grid, 1.0,
                            outputs=[0.25, 0.5, 1.0])
        self.assertTrue(trajectory.completed)
        self.assertEqual(len(trajectory.snapshots), 3)
        np.testing.assert_allclose(trajectory.times(), [0.25, 0.5, 1.0])
        for snapshot in trajectory.snapshots:
            self.assertEqual(float(np.max(np.abs(snapshot.value))), 0.0)
            self.assertEqual(float(np.max(np.abs(snapshot.velocity))), 0.0)
        self.assertEqual(len(trajectory.diagnostics), 3)

    def test_cfl_arguments(self):
        """Test cfl outside (0, 1) is rejected and above the stability bound is flagged"""
        grid = make_grid(5.0, 100)
        zero = FieldState.zeros(Formulation.U5D, grid)
        kind = EquationKind(Equation.FREE5D)
        for cfl in (0.0, -0.1, 1.0, 1.5):
            with self.assertRaises(InvalidArgumentError):
                evolve(kind, zero, grid, 1.0, cfl=cfl)

        self.assertGreater(0.9, STABLE_CFL)
        trajectory = evolve(kind, zero, grid, 1.0, cfl=0.9)
        self.assertEqual(trajectory.termination, Termination.CFL_VIOLATION)
        self.assertEqual(len(trajectory.snapshots), 1)
        self.assertEqual(trajectory.steps, 0)

    def test_output_times_checked(self):
        """Test output times must lie in the run and be ordered"""
        grid = make_grid(5.0, 100)
        zero = FieldState.zeros(Formulation.U5D, grid)
        kind = EquationKind(Equation.FREE5D)
        with self.assertRaises(InvalidArgumentError):
            evolve(kind, zero, grid, 1.0, outputs=[0.5, 2.0])
        with self.assertRaises(InvalidArgumentError):
            evolve(kind, zero, grid, 1.0, outputs=[0.5, 0.25])

    def test_free_wave_convergence(self):
        """Test free5d against the exact wave converges at second order"""
        profile = WaveProfile(1.0, 5.0, 1.0)
        errors = []
        for n in (200, 400, 800):
            grid = make_grid(20.0, n)
            trajectory = evolve(EquationKind(Equation.FREE5D), free_wave_state(profile, 0.0, grid),
                                grid, 1.0, record_diagnostics=False)
            self.assertTrue(trajectory.completed)
            exact, _ = exact_free5d(profile, 1.0, grid.r)
            errors.append(_sup_error(trajectory, exact))
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreaterEqual(coarse / fine, 3.2)
            self.assertLessEqual(coarse / fine, 4.8)

    def test_turok_spergel_backward(self):
        """Test wave_map from the self-similar data at t = 1 back to t = 0.25"""
        errors = []
        for n in (800, 1600, 3200):
            grid = make_grid(10.0, n)
            trajectory = evolve(EquationKind(Equation.WAVE_MAP), turok_spergel_data(grid, 1.0),
                                grid, 0.25, record_diagnostics=False)
            self.assertTrue(trajectory.completed)
            self.assertAlmostEqual(trajectory.final_time, 0.25)
            exact, _ = turok_spergel(0.25, grid.r)
            errors.append(_sup_error(trajectory, exact, grid.r <= 7.0))
        self.assertLess(errors[1], errors[0])
        self.assertGreaterEqual(errors[1] / errors[2], 3.2)
        self.assertLessEqual(errors[1] / errors[2], 4.8)

    def test_collapse_detected(self):
        """Test running the self-similar solution into t = 0 stops with blow-up"""
        grid = make_grid(4.0, 200)
        trajectory = evolve(EquationKind(Equation.WAVE_MAP), turok_spergel_data(grid, 1.0), grid, 0.0)
        self.assertEqual(trajectory.termination, Termination.BLOWUP_DETECTED)
        self.assertGreaterEqual(trajectory.final_time, 0.0)
        self.assertLess(trajectory.final_time, 0.2)
        self.assertEqual(trajectory.summary()["termination"], "blowup_detected")

    def test_amplitude_threshold(self):
        """Test a low amplitude threshold ends the run early"""
        grid = make_grid(10.0, 200)
        data = gaussian_bump(grid, 1.0, 3.0, 1.0)
        trajectory = evolve(EquationKind(Equation.FREE5D), data, grid, 1.0,
                            thresholds=BlowupThresholds(amplitude=0.5))
        self.assertEqual(trajectory.termination, Termination.BLOWUP_DETECTED)
        self.assertEqual(len(trajectory.snapshots), 0)

    def test_energy_inflation_without_diagnostics(self):
        """Test the energy growth check still ends the run when no diagnostics are kept"""
        grid = make_grid(10.0, 200)
        data = gaussian_bump(grid, 1.0, 3.0, 1.0)
        kind = EquationKind(Equation.FREE5D)
        trajectory = evolve(kind, data, grid, 0.5, thresholds=BlowupThresholds(energy_inflation=0.5),
                            record_diagnostics=False)
        self.assertEqual(trajectory.termination, Termination.BLOWUP_DETECTED)
        self.assertEqual(len(trajectory.snapshots), 0)
        self.assertEqual(len(trajectory.diagnostics), 0)
        self.assertAlmostEqual(trajectory.final_time, 0.5)

        trajectory = evolve(kind, data, grid, 0.5, record_diagnostics=False)
        self.assertTrue(trajectory.completed)

    def test_cone_overrun_recorded(self):
        """Test a light cone leaving the grid under boundary none lands in the summary"""
        grid = make_grid(10.0, 200)
        kind = EquationKind(Equation.FREE5D)
        data = gaussian_bump(grid, 0.1, 3.0, 1.0)
        trajectory = evolve(kind, data, grid, 3.0, record_diagnostics=False)
        self.assertTrue(trajectory.completed)
        self.assertGreater(trajectory.cone_overrun, grid.r_max)
        self.assertAlmostEqual(trajectory.cone_overrun, support_radius(data, grid) + 3.0)
        self.assertEqual(trajectory.summary()["cone_overrun"], trajectory.cone_overrun)

        inside = evolve(kind, compact_bump(grid, 0.1, 2.0, 3.0), grid, 1.0, record_diagnostics=False)
        self.assertIsNone(inside.cone_overrun)
        self.assertIsNone(inside.summary()["cone_overrun"])

        absorbed = evolve(kind, data, grid, 3.0, boundary="sommerfeld", record_diagnostics=False)
        self.assertIsNone(absorbed.cone_overrun)

    def test_linearized_matches_free(self):
        """Test linearized3d on psi tracks r times free5d on u"""
        grid = make_grid(15.0, 750)
        u_data = gaussian_bump(grid, 1.0, 6.0, 1.0)
        psi_data = FieldState(Formulation.PSI3D, grid.r * u_data.value, grid.r * u_data.velocity)
        outputs = [0.25, 0.5, 0.75, 1.0]
        free = evolve(EquationKind(Equation.FREE5D), u_data, grid, 1.0, outputs=outputs,
                      record_diagnostics=False)
        linear = evolve(EquationKind(Equation.LINEARIZED3D), psi_data, grid, 1.0, outputs=outputs,
                        record_diagnostics=False)
        for u_snap, psi_snap in zip(free.snapshots, linear.snapshots):
            self.assertLess(float(np.max(np.abs(psi_snap.value - grid.r * u_snap.value))), 1e-6)

    def test_time_reversal(self):
        """Test forward then backward evolution returns the data"""
        grid = make_grid(12.0, 600)
        data = gaussian_bump(grid, 1.0, 5.0, 1.0)
        kind = EquationKind(Equation.FREE5D)
        forward = evolve(kind, data, grid, 1.0, record_diagnostics=False)
        backward = evolve(kind, forward.snapshots[-1], grid, 0.0, record_diagnostics=False)
        self.assertAlmostEqual(backward.final_time, 0.0)
        self.assertLess(float(np.max(np.abs(backward.snapshots[-1].value - data.value))), 1e-5)

    def test_finite_speed(self):
        """Test data supported in r <= 3 stays inside the light cone"""
        grid = make_grid(8.0, 800)
        data = compact_bump(grid, 1.0, 2.0, 3.0)
        self.assertLessEqual(support_radius(data, grid), 3.0)
        trajectory = evolve(EquationKind(Equation.FREE5D), data, grid, 1.0, record_diagnostics=False)
        outside = grid.r > 3.0 + 1.0 + 1.0
        self.assertLess(float(np.max(np.abs(trajectory.snapshots[-1].value[outside]))), 1e-10)

    def test_sommerfeld_absorbs(self):
        """Test the absorbing boundary lets the wave leave the grid"""
        grid = make_grid(6.0, 300)
        data = gaussian_bump(grid, 1.0, 3.0, 0.5)
        kind = EquationKind(Equation.FREE5D)
        trajectory = evolve(kind, data, grid, 10.0, boundary="sommerfeld", record_diagnostics=False)
        self.assertTrue(trajectory.completed)
        before = conserved_energy(kind, data, grid).total
        after = conserved_energy(kind, trajectory.snapshots[-1], grid).total
        self.assertLess(after, 0.05 * before)

    def test_exterior_diagnostics(self):
        """Test exterior energies follow the cone a + |t - t0|"""
        grid = make_grid(20.0, 1000)
        data = gaussian_bump(grid, 0.1, 5.0, 1.0)
        trajectory = evolve(EquationKind(Equation.FREE5D), data, grid, 1.0, outputs=[0.0, 1.0],
                            radii=[2.0, 19.5])
        first, last = trajectory.diagnostics
        self.assertAlmostEqual(first.exterior[0], exterior_energy(data, grid, 2.0), places=12)
        self.assertAlmostEqual(last.exterior[0],
                               exterior_energy(trajectory.snapshots[-1], grid, 3.0), places=12)
        self.assertTrue(np.isnan(last.exterior[1]))
        row = last.as_dict()
        self.assertIn("ext_energy_a1", row)
        self.assertIn("ext_energy_a2", row)

    def test_converts_initial_data(self):
        """Test psi data is converted for a 5d equation"""
        grid = make_grid(10.0, 200)
        psi = FieldState(Formulation.PSI3D, grid.r * np.exp(-(grid.r - 4.0) ** 2), np.zeros(grid.size))
        trajectory = evolve(EquationKind(Equation.FREE5D), psi, grid, 0.5, record_diagnostics=False)
        self.assertEqual(trajectory.snapshots[-1].formulation, Formulation.U5D)


class TestConservation(unittest.TestCase):
    """Test conserved quantities along long an_psi runs and the other equations"""

    @classmethod
    def setUpClass(cls):
        cls.grid = make_grid(60.0, 4096)
        data = convert(gaussian_bump(cls.grid, 0.5, 3.0, 1.0), Formulation.PSI3D, cls.grid)
        cls.kind = EquationKind(Equation.AN_PSI)
        cls.data = data
        cls.trajectory = evolve(cls.kind, data, cls.grid, 20.0, cfl=0.45,
                                outputs=[float(t) for t in range(1, 21)])

    def test_energy_drift(self):
        """Test the an_psi energy drifts by at most 1e-4 up to t = 20"""
        self.assertTrue(self.trajectory.completed)
        self.assertIsNone(self.trajectory.cone_overrun)
        self.assertEqual(len(self.trajectory.snapshots), 20)
        initial = conserved_energy(self.kind, self.data, self.grid).total
        self.assertGreater(initial, 0.0)
        drift = np.max(np.abs(self.trajectory.energies() - initial)) / initial
        self.assertLessEqual(drift, 1e-4)

    def test_degree_conserved(self):
        """Test every snapshot keeps degree 0"""
        self.assertEqual(degree(self.data, self.grid), 0)
        for snapshot in self.trajectory.snapshots:
            self.assertEqual(degree(snapshot, self.grid), 0, f"t={snapshot.time}")
            self.assertLess(degree_residual(snapshot, self.grid), 1e-6)

    def test_pointwise_bound(self):
        """Test G(psi) stays below the energy on every snapshot"""
        for snapshot in [self.data] + self.trajectory.snapshots:
            report = pointwise_bound_check(snapshot, self.grid)
            self.assertTrue(report.passed, f"t={snapshot.time}: {report.max_g} > {report.energy}")

    def test_pointwise_bound_self_similar(self):
        """Test G(psi) stays below the energy on the self-similar wave map run"""
        grid = make_grid(10.0, 800)
        trajectory = evolve(EquationKind(Equation.WAVE_MAP), turok_spergel_data(grid, 1.0),
                            grid, 0.25, outputs=[0.75, 0.5, 0.25], record_diagnostics=False)
        self.assertTrue(trajectory.completed)
        for snapshot in trajectory.snapshots:
            self.assertTrue(pointwise_bound_check(snapshot, grid).passed, f"t={snapshot.time}")

    def test_pointwise_bound_free_wave(self):
        """Test G(psi) stays below the energy along the free wave run"""
        grid = make_grid(20.0, 400)
        profile = WaveProfile(1.0, 5.0, 1.0)
        trajectory = evolve(EquationKind(Equation.FREE5D), free_wave_state(profile, 0.0, grid),
                            grid, 1.0, outputs=[0.5, 1.0], record_diagnostics=False)
        self.assertTrue(trajectory.completed)
        for snapshot in trajectory.snapshots:
            self.assertTrue(pointwise_bound_check(snapshot, grid).passed, f"t={snapshot.time}")

    def _drift(self, kind, data, grid, t_final):
        trajectory = evolve(kind, data, grid, t_final, outputs=[0.25 * t_final * k for k in (1, 2, 3, 4)])
        self.assertTrue(trajectory.completed)
        initial = conserved_energy(kind, data, grid).total
        self.assertGreater(initial, 0.0)
        return float(np.max(np.abs(trajectory.energies() - initial)) / initial)

    def test_wave_map_energy(self):
        """Test the wave map energy drifts by at most 1e-4"""
        grid = make_grid(20.0, 2000)
        data = convert(gaussian_bump(grid, 0.2, 3.0, 1.0), Formulation.PSI3D, grid)
        self.assertLessEqual(self._drift(EquationKind(Equation.WAVE_MAP), data, grid, 4.0), 1e-4)

    def test_quintic_energy(self):
        """Test the quintic 5d energy drifts by at most 1e-4"""
        grid = make_grid(20.0, 2000)
        data = gaussian_bump(grid, 0.5, 3.0, 1.0)
        kind = EquationKind(Equation.QUINTIC5D)
        report = conserved_energy(kind, data, grid)
        self.assertGreater(report.quintic_potential, 0.0)
        self.assertLessEqual(self._drift(kind, data, grid, 4.0), 1e-4)

    def test_an_u_energy(self):
        """Test the an_u energy drifts by at most 1e-4"""
        grid = make_grid(20.0, 2000)
        data = gaussian_bump(grid, 0.5, 5.0, 1.0)
        self.assertLessEqual(self._drift(EquationKind(Equation.AN_U), data, grid, 4.0), 1e-4)


class TestScaling(unittest.TestCase):
    """Test rescaling and the comparison experiments"""

    def setUp(self):
        """Set up test fixtures"""
        self.grid = make_grid(10.0, 2000)
        self.data = FieldState(Formulation.U5D, np.exp(-self.grid.r ** 2), np.zeros(self.grid.size))

    def test_rescale_identity(self):
        """Test lam = 1 leaves the state unchanged"""
        same = rescale(self.data, self.grid, 1.0)
        np.testing.assert_allclose(same.value, self.data.value, atol=1e-15)
        with self.assertRaises(InvalidArgumentError):
            rescale(self.data, self.grid, 0.0)

    def test_rescale_norms(self):
        """Test the energy part scales by lam and the critical part is invariant"""
        lam = 0.5
        scaled = rescale(self.data.with_time(2.0), self.grid, lam)
        self.assertEqual(scaled.time, 1.0)
        energy_before, critical_before = h_norm_parts(self.data, self.grid)
        energy_after, critical_after = h_norm_parts(scaled, self.grid)
        self.assertAlmostEqual(energy_after / energy_before, lam, delta=0.01 * lam)
        self.assertAlmostEqual(critical_after, critical_before, delta=1e-3 * critical_before)

    def test_difference_state(self):
        """Test componentwise differences"""
        gap = difference_state(self.data, self.data)
        self.assertEqual(float(np.max(np.abs(gap.value))), 0.0)

    def test_small_scale_zero(self):
        """Test zero data gives zero differences at every scale"""
        grid = make_grid(5.0, 400)
        rows = small_scale_experiment(FieldState.zeros(Formulation.U5D, grid), [0.2, 0.1], grid,
                                      horizon=2.0, samples=4)
        self.assertEqual(len(rows), 2)
        for row in rows:
            self.assertEqual(row.h1_difference, 0.0)
            self.assertEqual(row.s_difference, 0.0)
            self.assertEqual(row.status, "completed")

    def test_small_scale_decreasing(self):
        """Test the an_u and quintic solutions approach each other, at most 0.6x per halving"""
        grid = make_grid(6.0, 2400)
        unit = gaussian_bump(grid, 1.0, 0.0, 1.0)
        data = gaussian_bump(grid, 0.3 / h_norm(unit, grid), 0.0, 1.0)
        self.assertAlmostEqual(h_norm(data, grid), 0.3, delta=1e-9)
        rows = small_scale_experiment(data, [0.2, 0.1, 0.05], grid, horizon=5.0, samples=10)
        differences = [row.h1_difference for row in rows]
        self.assertTrue(all(row.status == "completed" for row in rows))
        self.assertGreater(differences[0], 0.0)
        for coarse, fine in zip(differences, differences[1:]):
            self.assertLessEqual(fine / coarse, 0.6)

    def test_truncated_zero(self):
        """Test zero data gives identically zero differences"""
        grid = make_grid(10.0, 200)
        rows = truncated_comparison(FieldState.zeros(Formulation.U5D, grid), [2.0, 4.0], grid,
                                    horizon=1.0, samples=4)
        self.assertEqual([row.sup_difference for row in rows], [0.0, 0.0])
        self.assertEqual([row.radius for row in rows], [2.0, 4.0])

    def test_truncated_inside_cutoff(self):
        """Test data far inside R/2 evolves freely under the truncated problem"""
        grid = make_grid(30.0, 1500)
        data = compact_bump(grid, 0.001, 2.0, 4.0)
        rows = truncated_comparison(data, [40.0], grid, horizon=5.0, samples=5)
        self.assertLess(rows[0].sup_difference, 1e-12)
        self.assertGreater(rows[0].bound, 0.0)

    def test_truncated_radius_scaling(self):
        """Test the truncated-problem deviation from the free wave falls like R^-0.7 or faster"""
        grid = make_grid(50.0, 2500)
        unit = gaussian_bump(grid, 1.0, 3.0, 1.0)
        data = gaussian_bump(grid, 0.05 / energy_norm(unit, grid), 3.0, 1.0)
        self.assertAlmostEqual(energy_norm(data, grid), 0.05, delta=1e-9)
        radii = [10.0, 20.0, 40.0]
        rows = truncated_comparison(data, radii, grid, horizon=30.0, samples=30)
        differences = [row.sup_difference for row in rows]
        self.assertTrue(all(row.status == "completed" for row in rows))
        self.assertTrue(all(value > 0.0 for value in differences))
        self.assertLessEqual(loglog_slope(radii, differences), -0.7)

    def test_truncated_threshold(self):
        """Test data above the small-data threshold is rejected"""
        grid = make_grid(10.0, 500)
        with self.assertRaises(InvalidArgumentError):
            truncated_comparison(gaussian_bump(grid, 5.0, 3.0, 1.0), [4.0], grid, horizon=1.0)

    def test_loglog_slope(self):
        """Test the fitted exponent"""
        xs = [10.0, 20.0, 40.0]
        self.assertAlmostEqual(loglog_slope(xs, [3.0 / x for x in xs]), -1.0, places=12)
        self.assertTrue(np.isnan(loglog_slope(xs, [0.0, 1.0, 2.0])))
        self.assertTrue(np.isnan(loglog_slope([1.0], [1.0])))


def run_tests():
    """Run all tests"""
    loader = unittest.TestLoader()
    suite = unittest.TestSuite()

    suite.addTests(loader.loadTestsFromTestCase(TestEquationKind))
    suite.addTests(loader.loadTestsFromTestCase(TestSmoothCutoff))
    suite.addTests(loader.loadTestsFromTestCase(TestRightHandSide))
    suite.addTests(loader.loadTestsFromTestCase(TestExactSolutions))
    suite.addTests(loader.loadTestsFromTestCase(TestEvolve))
    suite.addTests(loader.loadTestsFromTestCase(TestConservation))
    suite.addTests(loader.loadTestsFromTestCase(TestScaling))

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_tests()
    exit(0 if success else 1)

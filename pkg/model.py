"""
Nonlinearities, conserved functionals and norms of the Adkins-Nappi model

Two formulations are used throughout: the 3d azimuth angle psi(t, r) with
psi(t, 0) = 0, and the 5d field u = psi / r. This module holds the
dictionary between them together with the closed-form nonlinearities and
every diagnostic functional that only needs one snapshot.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import IllDefinedDegreeError, InvalidArgumentError, InvalidStateError
from grid import RadialGrid, d2_dr2, d_dr, integrate_weighted, integrate_weighted_tail

logger = logging.getLogger(__name__)

SERIES_THRESHOLD = 1e-3
STRICHARTZ_EXPONENT = 30.0 / 7.0
DEGREE_TOLERANCE = 0.25


class Formulation(str, Enum):
    """Which unknown a FieldState carries"""
    PSI3D = "psi3d"
    U5D = "u5d"


@dataclass(frozen=True)
class FieldState:
    """Snapshot of (value, velocity) at one time on grid nodes"""
    formulation: Formulation
    value: np.ndarray
    velocity: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        formulation = Formulation(self.formulation)
        value = np.array(self.value, dtype=float)
        velocity = np.array(self.velocity, dtype=float)
        if value.shape != velocity.shape or value.ndim != 1:
            raise InvalidArgumentError(
                f"value and velocity must be 1d arrays of equal length, "
                f"got {value.shape} and {velocity.shape}")
        value.flags.writeable = False
        velocity.flags.writeable = False
        object.__setattr__(self, "formulation", formulation)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "velocity", velocity)
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def zeros(cls, formulation: Formulation, grid: RadialGrid, time: float = 0.0) -> "FieldState":
        return cls(formulation, np.zeros(grid.size), np.zeros(grid.size), time)

    def with_time(self, time: float) -> "FieldState":
        return FieldState(self.formulation, self.value, self.velocity, time)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.value)) and np.all(np.isfinite(self.velocity)))


@dataclass(frozen=True)
class EnergyReport:
    """The four nonnegative energy densities integrated over the grid"""
    kinetic: float
    gradient: float
    sine_potential: float
    quintic_potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.gradient + self.sine_potential + self.quintic_potential

    def as_dict(self) -> Dict[str, float]:
        return {
            "energy": self.total,
            "kinetic": self.kinetic,
            "gradient": self.gradient,
            "sine_potential": self.sine_potential,
            "quintic_potential": self.quintic_potential,
        }


@dataclass(frozen=True)
class BoundReport:
    """Outcome of the pointwise bound G(psi) <= energy"""
    max_g: float
    energy: float
    tolerance: float

    @property
    def slack(self) -> float:
        return self.energy - self.max_g

    @property
    def passed(self) -> bool:
        return self.max_g - self.energy <= self.tolerance


@dataclass(frozen=True)
class InequalityReport:
    """Left side, right side (without constant) and their ratio"""
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else float("inf")
        return self.lhs / self.rhs


# Nonlinearities


def Z1(rho):
    """(sin 2rho - 2rho) / rho^3, with Z1(0) = -4/3"""
    rho = np.asarray(rho, dtype=float)
    small = np.abs(rho) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, rho)
    closed = (np.sin(2.0 * safe) - 2.0 * safe) / safe ** 3
    x = rho * rho
    series = -4.0 / 3.0 + x * (4.0 / 15.0 + x * (-8.0 / 315.0 + x * (4.0 / 2835.0)))
    out = np.where(small, series, closed)
    return float(out) if out.ndim == 0 else out


def Z2(rho):
    """(rho - sin rho cos rho)(1 - cos 2rho) / rho^5, with Z2(0) = 4/3"""
    rho = np.asarray(rho, dtype=float)
    small = np.abs(rho) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, rho)
    closed = (safe - np.sin(safe) * np.cos(safe)) * (1.0 - np.cos(2.0 * safe)) / safe ** 5
    x = rho * rho
    series = 4.0 / 3.0 + x * (-32.0 / 45.0 + x * (164.0 / 945.0 + x * (-368.0 / 14175.0)))
    out = np.where(small, series, closed)
    return float(out) if out.ndim == 0 else out


def V1(rho):
    """(sin^2 rho - rho^2) / rho^4, with V1(0) = -1/3; d/du [V1(ru) u^4] = Z1(ru) u^3"""
    rho = np.asarray(rho, dtype=float)
    small = np.abs(rho) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, rho)
    closed = (np.sin(safe) ** 2 - safe * safe) / safe ** 4
    x = rho * rho
    series = -1.0 / 3.0 + x * (2.0 / 45.0 + x * (-1.0 / 315.0 + x * (2.0 / 14175.0)))
    out = np.where(small, series, closed)
    return float(out) if out.ndim == 0 else out


def V2(rho):
    """(rho - sin rho cos rho)^2 / (2 rho^6), with V2(0) = 2/9; d/du [V2(ru) u^6] = Z2(ru) u^5"""
    rho = np.asarray(rho, dtype=float)
    small = np.abs(rho) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, rho)
    closed = 0.5 * (safe - np.sin(safe) * np.cos(safe)) ** 2 / safe ** 6
    x = rho * rho
    series = 2.0 / 9.0 + x * (-4.0 / 45.0 + x * (82.0 / 4725.0))
    out = np.where(small, series, closed)
    return float(out) if out.ndim == 0 else out


def G(rho):
    """(rho^2 - sin^2 rho) / 2, the pointwise energy lower bound"""
    rho = np.asarray(rho, dtype=float)
    out = 0.5 * (rho * rho - np.sin(rho) ** 2)
    return float(out) if out.ndim == 0 else out


def force_psi(r, psi):
    """sin 2psi / r^2 + (psi - sin psi cos psi)(1 - cos 2psi) / r^4 for r > 0"""
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if np.any(r <= 0):
        raise InvalidArgumentError("force_psi needs r > 0")
    out = (np.sin(2.0 * psi) / r ** 2
           + (psi - np.sin(psi) * np.cos(psi)) * (1.0 - np.cos(2.0 * psi)) / r ** 4)
    return float(out) if out.ndim == 0 else out


def force_u(r, u):
    """Z1(ru) u^3 + Z2(ru) u^5, smooth down to r = 0"""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    rho = r * u
    out = np.asarray(Z1(rho)) * u ** 3 + np.asarray(Z2(rho)) * u ** 5
    return float(out) if out.ndim == 0 else out


def z_bound_constants(rho=None) -> Tuple[float, float]:
    """Measured sup |Z1| <rho>^2 and sup |Z2| <rho>^4 over a log sweep"""
    if rho is None:
        rho = np.logspace(-8, 8, 4001)
    rho = np.asarray(rho, dtype=float)
    bracket = 1.0 + rho * rho
    c1 = float(np.max(np.abs(Z1(rho)) * bracket))
    c2 = float(np.max(np.abs(Z2(rho)) * bracket * bracket))
    return c1, c2


# Formulation dictionary


def convert(state: FieldState, to: Formulation, grid: RadialGrid) -> FieldState:
    """Map between psi (3d) and u = psi / r (5d)"""
    to = Formulation(to)
    if state.formulation == to:
        raise InvalidArgumentError(f"state is already in {to.value} form")
    value = grid.check_samples(state.value)
    velocity = grid.check_samples(state.velocity)

    if to == Formulation.U5D:
        if value[0] != 0.0 or velocity[0] != 0.0:
            raise InvalidStateError(
                f"psi3d state must vanish at the origin, got psi(0) = {value[0]}")
        return FieldState(Formulation.U5D, divide_by_r(value, grid),
                          divide_by_r(velocity, grid), state.time)

    return FieldState(Formulation.PSI3D, grid.r * value, grid.r * velocity, state.time)


def divide_by_r(samples: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """samples / r, with the origin value extrapolated from the even fit"""
    out = np.empty_like(samples)
    out[1:] = samples[1:] / grid.r[1:]
    # u is even in r: fit a + b r^2 through nodes 1 and 2
    out[0] = (4.0 * out[1] - out[2]) / 3.0
    return out


def as_psi(state: FieldState, grid: RadialGrid) -> FieldState:
    if state.formulation == Formulation.PSI3D:
        return state
    return convert(state, Formulation.PSI3D, grid)


def as_u(state: FieldState, grid: RadialGrid) -> FieldState:
    if state.formulation == Formulation.U5D:
        return state
    return convert(state, Formulation.U5D, grid)


# Functionals


def _over_r2(grid: RadialGrid, samples: np.ndarray) -> np.ndarray:
    """samples / r^2 with the origin node set to its limit 0"""
    out = np.zeros_like(samples)
    out[1:] = samples[1:] / grid.r[1:] ** 2
    return out


def energy(state: FieldState, grid: RadialGrid) -> EnergyReport:
    """Conserved energy of the azimuth angle, weight r^2"""
    psi_state = as_psi(state, grid)
    psi = grid.check_samples(psi_state.value)
    psi_t = grid.check_samples(psi_state.velocity)
    psi_r = d_dr(grid, psi)

    defect = psi - np.sin(psi) * np.cos(psi)
    return EnergyReport(
        kinetic=0.5 * integrate_weighted(grid, psi_t ** 2, 2),
        gradient=0.5 * integrate_weighted(grid, psi_r ** 2, 2),
        # sin^2(psi) / r^2 against r^2
        sine_potential=integrate_weighted(grid, np.sin(psi) ** 2, 0),
        quintic_potential=integrate_weighted(grid, _over_r2(grid, 0.5 * defect ** 2), 0),
    )


def laplacian_5d(grid: RadialGrid, samples: np.ndarray) -> np.ndarray:
    """u_rr + 4 u_r / r, with the origin limit 5 u_rr(0)"""
    u_r = d_dr(grid, samples)
    u_rr = d2_dr2(grid, samples)
    out = np.empty_like(u_rr)
    out[1:] = u_rr[1:] + 4.0 * u_r[1:] / grid.r[1:]
    out[0] = 5.0 * u_rr[0]
    return out


def h_norm_parts(state: FieldState, grid: RadialGrid) -> Tuple[float, float]:
    """(H1 x L2 part, H2 x H1 part) of the critical norm"""
    u_state = as_u(state, grid)
    u = grid.check_samples(u_state.value)
    u_t = grid.check_samples(u_state.velocity)
    u_r = d_dr(grid, u)
    energy_part = np.sqrt(max(integrate_weighted(grid, u_r ** 2 + u_t ** 2, 4), 0.0))
    critical_part = np.sqrt(max(integrate_weighted(
        grid, laplacian_5d(grid, u) ** 2 + d_dr(grid, u_t) ** 2, 4), 0.0))
    return float(energy_part), float(critical_part)


def h_norm(state: FieldState, grid: RadialGrid) -> float:
    """(H2 x H1) intersect (H1 x L2) norm of a 5d state"""
    energy_part, critical_part = h_norm_parts(state, grid)
    return energy_part + critical_part


def energy_norm(state: FieldState, grid: RadialGrid) -> float:
    """H1 x L2 norm of a 5d state"""
    return h_norm_parts(state, grid)[0]


def exterior_energy(state: FieldState, grid: RadialGrid, a: float) -> float:
    """Integral of (u_t^2 + u_r^2) r^4 over r >= a"""
    if a >= grid.r_max:
        raise InvalidArgumentError(f"radius {a} is outside the grid (r_max = {grid.r_max})")
    u_state = as_u(state, grid)
    u_r = d_dr(grid, u_state.value)
    return integrate_weighted_tail(grid, u_r ** 2 + u_state.velocity ** 2, 4, max(a, 0.0))


def _abs_pow(samples: np.ndarray, exponent: float) -> np.ndarray:
    magnitude = np.abs(samples)
    out = np.zeros_like(magnitude)
    nonzero = magnitude > 0.0
    out[nonzero] = np.exp(exponent * np.log(magnitude[nonzero]))
    return out


def s_norm_increment(state: FieldState, grid: RadialGrid) -> float:
    """L^{30/7} plus W^{1,30/7} norm of u at one time"""
    u = as_u(state, grid).value
    u_r = d_dr(grid, u)
    p = STRICHARTZ_EXPONENT
    inner = integrate_weighted(grid, _abs_pow(u, p), 4)
    outer = integrate_weighted(grid, _abs_pow(u_r, p), 4)
    return float(max(inner, 0.0) ** (1.0 / p) + max(outer, 0.0) ** (1.0 / p))


class SNormAccumulator:
    """Running L^3-in-time integral of s_norm_increment (trapezoid in t)"""

    def __init__(self):
        self.times: List[float] = []
        self.values: List[float] = []
        self._cube_integral = 0.0

    def add(self, time: float, spatial_value: float):
        if self.times:
            dt = abs(time - self.times[-1])
            self._cube_integral += 0.5 * dt * (self.values[-1] ** 3 + spatial_value ** 3)
        self.times.append(float(time))
        self.values.append(float(spatial_value))

    def add_state(self, state: FieldState, grid: RadialGrid):
        self.add(state.time, s_norm_increment(state, grid))

    @property
    def value(self) -> float:
        return self._cube_integral ** (1.0 / 3.0)


def degree_residual(state: FieldState, grid: RadialGrid) -> float:
    """Distance of psi(r_max) / pi from the nearest integer"""
    ratio = as_psi(state, grid).value[-1] / np.pi
    return float(abs(ratio - np.round(ratio)))


def degree(state: FieldState, grid: RadialGrid) -> int:
    """Topological degree n with psi(r_max) close to n pi"""
    ratio = as_psi(state, grid).value[-1] / np.pi
    n = int(np.round(ratio))
    residual = abs(ratio - n)
    if residual > DEGREE_TOLERANCE:
        raise IllDefinedDegreeError(
            f"psi(r_max)/pi = {ratio:.6g} is {residual:.3g} away from an integer", residual)
    return n


def pointwise_bound_check(state: FieldState, grid: RadialGrid,
                          rel_tol: float = 1e-3,
                          energy_report: Optional[EnergyReport] = None) -> BoundReport:
    """Compare max G(psi) against the total energy"""
    psi = as_psi(state, grid).value
    report = energy_report if energy_report is not None else energy(state, grid)
    total = report.total
    return BoundReport(max_g=float(np.max(G(psi))), energy=total, tolerance=rel_tol * abs(total))


def _h1_norm_5d(grid: RadialGrid, samples: np.ndarray) -> float:
    return float(np.sqrt(max(integrate_weighted(grid, d_dr(grid, samples) ** 2, 4), 0.0)))


def hardy_check(samples, grid: RadialGrid) -> InequalityReport:
    """||f / r||_{L2(R^5)} against ||f||_{H1(R^5)}; the sharp constant is 2/3"""
    f = grid.check_samples(samples)
    lhs = np.sqrt(max(integrate_weighted(grid, f ** 2, 2), 0.0))
    return InequalityReport(lhs=float(lhs), rhs=_h1_norm_5d(grid, f))


def strauss_check(samples, grid: RadialGrid) -> InequalityReport:
    """sup r^{3/2}|f(r)| against ||f||_{H1(R^5)}; bounded by 1/sqrt(3)"""
    f = grid.check_samples(samples)
    lhs = float(np.max(grid.r ** 1.5 * np.abs(f)))
    return InequalityReport(lhs=lhs, rhs=_h1_norm_5d(grid, f))


def random_bump_sum(grid: RadialGrid, rng: np.random.Generator, n_bumps: int = 3) -> np.ndarray:
    """Sum of Gaussians with random weights, centres and widths inside the grid"""
    reach = grid.r_max / 4.0
    out = np.zeros(grid.size)
    for _ in range(n_bumps):
        weight = rng.uniform(-1.0, 1.0)
        centre = rng.uniform(0.0, reach)
        width = rng.uniform(0.3, 1.5)
        out += weight * np.exp(-((grid.r - centre) / width) ** 2)
    return out


def inequality_survey(grid: RadialGrid, n_samples: int = 100, seed: int = 0) -> Dict[str, float]:
    """Largest Hardy and Strauss ratios over random bump sums"""
    rng = np.random.default_rng(seed)
    hardy_max = 0.0
    strauss_max = 0.0
    for _ in range(n_samples):
        f = random_bump_sum(grid, rng)
        hardy_max = max(hardy_max, hardy_check(f, grid).ratio)
        strauss_max = max(strauss_max, strauss_check(f, grid).ratio)
    logger.debug(f"Inequality survey: hardy={hardy_max:.6g}, strauss={strauss_max:.6g}")
    return {"hardy": hardy_max, "strauss": strauss_max, "samples": float(n_samples)}

"""
Method-of-lines evolution of the radial wave equations

Seven equations share one integrator: the Adkins-Nappi equation in both
formulations, the equivariant wave map, the defocusing quintic and the free
wave in five dimensions, the linearized 3d equation, and the exterior
truncated problem. The 3d operator is evaluated as r * Lap5(psi / r), which is
the same operator as psi_rr + 2 psi_r / r - 2 psi / r^2 and keeps every
formulation on one stencil. Lap5 is in flux form on dual cells, so each
equation conserves the discrete energy of conserved_energy up to the RK4
error.
"""

import logging
import re
import time as clock
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial, hermite

from errors import InvalidArgumentError
from grid import RadialGrid, integrate_weighted
from model import (V1, V2, Z1, EnergyReport, FieldState, Formulation, SNormAccumulator,
                   as_psi, as_u, convert, degree_residual,
                   energy_norm, exterior_energy, force_u, h_norm, s_norm_increment)

logger = logging.getLogger(__name__)

DEFAULT_CFL = 0.45
# RK4 reaches 2*sqrt(2) on the imaginary axis; the 5d origin row bounds the
# discrete frequency by sqrt(20)/dr.
STABLE_CFL = 2.0 * np.sqrt(2.0) / np.sqrt(20.0)
QUINTIC_COEFFICIENT = 4.0 / 3.0


class Equation(str, Enum):
    AN_PSI = "an_psi"
    AN_U = "an_u"
    WAVE_MAP = "wave_map"
    QUINTIC5D = "quintic5d"
    FREE5D = "free5d"
    LINEARIZED3D = "linearized3d"
    EXTERIOR_TRUNCATED = "exterior_truncated"


THREE_D = {Equation.AN_PSI, Equation.WAVE_MAP, Equation.LINEARIZED3D}

_KIND_PATTERN = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\(\s*([^)]*)\s*\))?\s*$")


@dataclass(frozen=True)
class EquationKind:
    """Equation tag, plus the radius R of exterior_truncated"""
    equation: Equation
    radius: Optional[float] = None

    def __post_init__(self):
        equation = Equation(self.equation)
        object.__setattr__(self, "equation", equation)
        if equation == Equation.EXTERIOR_TRUNCATED:
            if self.radius is None or not self.radius > 0:
                raise InvalidArgumentError("exterior_truncated needs a radius R > 0")
            object.__setattr__(self, "radius", float(self.radius))
        elif self.radius is not None:
            raise InvalidArgumentError(f"{equation.value} takes no radius")

    @classmethod
    def parse(cls, text: str) -> "EquationKind":
        """Parse 'free5d' or 'exterior_truncated(4)'"""
        match = _KIND_PATTERN.match(text)
        if not match:
            raise InvalidArgumentError(f"cannot parse equation kind '{text}'")
        name, argument = match.groups()
        try:
            equation = Equation(name)
        except ValueError:
            raise InvalidArgumentError(f"unknown equation '{name}'")
        radius = None
        if argument:
            try:
                radius = float(argument)
            except ValueError:
                raise InvalidArgumentError(f"bad radius '{argument}' in '{text}'")
        return cls(equation, radius)

    @property
    def formulation(self) -> Formulation:
        return Formulation.PSI3D if self.equation in THREE_D else Formulation.U5D

    def __str__(self) -> str:
        if self.equation == Equation.EXTERIOR_TRUNCATED:
            return f"{self.equation.value}({self.radius:.17g})"
        return self.equation.value


class Termination(str, Enum):
    COMPLETED = "completed"
    BLOWUP_DETECTED = "blowup_detected"
    CFL_VIOLATION = "cfl_violation"


class Boundary(str, Enum):
    NONE = "none"
    SOMMERFELD = "sommerfeld"


@dataclass(frozen=True)
class BlowupThresholds:
    """Early-termination criteria"""
    amplitude: float = 1e6
    energy_inflation: float = 10.0
    # largest psi jump between neighbouring nodes before the angle profile
    # counts as unresolved; u = psi / r has no such scale
    node_jump: float = 0.5


@dataclass
class DiagnosticRow:
    t: float
    energy: EnergyReport
    h_norm: float
    s_accumulator: float
    degree_residual: float
    exterior: Tuple[float, ...] = ()

    def as_dict(self) -> dict:
        row = {"t": self.t}
        row.update(self.energy.as_dict())
        row["h_norm"] = self.h_norm
        row["s_accumulator"] = self.s_accumulator
        row["degree_residual"] = self.degree_residual
        for i, value in enumerate(self.exterior, 1):
            row[f"ext_energy_a{i}"] = value
        return row


@dataclass
class Trajectory:
    """Snapshots at the requested output times plus diagnostics"""
    kind: EquationKind
    snapshots: List[FieldState] = field(default_factory=list)
    diagnostics: List[DiagnosticRow] = field(default_factory=list)
    termination: Termination = Termination.COMPLETED
    termination_time: Optional[float] = None
    radii: Tuple[float, ...] = ()
    steps: int = 0
    wall_seconds: float = 0.0
    # light-cone radius past r_max under boundary none, if any
    cone_overrun: Optional[float] = None

    @property
    def final_time(self) -> float:
        if self.termination_time is not None:
            return self.termination_time
        return self.snapshots[-1].time if self.snapshots else float("nan")

    @property
    def completed(self) -> bool:
        return self.termination == Termination.COMPLETED

    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def energies(self) -> np.ndarray:
        return np.array([row.energy.total for row in self.diagnostics])

    def summary(self) -> dict:
        return {
            "kind": str(self.kind),
            "termination": self.termination.value,
            "final_time": self.final_time,
            "wall_seconds": self.wall_seconds,
            "cone_overrun": self.cone_overrun,
        }


# Cutoff and nonlinearities


def _transition(s: np.ndarray) -> np.ndarray:
    positive = s > 0
    out = np.zeros_like(s)
    out[positive] = np.exp(-1.0 / s[positive])
    return out


def smooth_cutoff(r, R: float):
    """C-infinity step: 0 for r <= R/2, 1 for r >= R, monotone in between"""
    if not R > 0:
        raise InvalidArgumentError(f"cutoff radius must be positive, got {R}")
    r = np.asarray(r, dtype=float)
    s = np.clip(2.0 * r / R - 1.0, 0.0, 1.0)
    s = np.atleast_1d(s)
    rising = _transition(s)
    falling = _transition(1.0 - s)
    out = rising / (rising + falling)
    return float(out[0]) if r.ndim == 0 else out


def _nonlinear_5d(kind: EquationKind, grid: RadialGrid, u: np.ndarray) -> np.ndarray:
    equation = kind.equation
    if equation == Equation.AN_U:
        return force_u(grid.r, u)
    if equation == Equation.QUINTIC5D:
        return QUINTIC_COEFFICIENT * u ** 5
    if equation == Equation.FREE5D:
        return np.zeros_like(u)
    if equation == Equation.EXTERIOR_TRUNCATED:
        return smooth_cutoff(grid.r, kind.radius) * force_u(grid.r, u)
    raise InvalidArgumentError(f"{equation.value} is not a 5d equation")


def _nonlinear_3d(kind: EquationKind, grid: RadialGrid, psi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Force minus its linear part 2 psi / r^2"""
    equation = kind.equation
    if equation == Equation.AN_PSI:
        return grid.r * force_u(grid.r, u)
    if equation == Equation.WAVE_MAP:
        return grid.r * Z1(psi) * u ** 3
    if equation == Equation.LINEARIZED3D:
        return np.zeros_like(psi)
    raise InvalidArgumentError(f"{equation.value} is not a 3d equation")


def cell_volumes(grid: RadialGrid, lumped_origin: bool = False) -> np.ndarray:
    """Integral of r^4 over each node's dual cell [r_j - dr/2, r_j + dr/2] in [0, r_max].

    With lumped_origin the origin cell is added to node 1 and node 0 gets no
    volume; the psi formulation has no unknown at r = 0.
    """
    lo = np.clip(grid.r - 0.5 * grid.dr, 0.0, grid.r_max)
    hi = np.clip(grid.r + 0.5 * grid.dr, 0.0, grid.r_max)
    volumes = (hi - lo) * (hi ** 4 + hi ** 3 * lo + hi ** 2 * lo ** 2 + hi * lo ** 3 + lo ** 4) / 5.0
    if lumped_origin:
        volumes[1] += volumes[0]
        volumes[0] = 0.0
    return volumes


def _face_weights(grid: RadialGrid) -> np.ndarray:
    """r^4 at the cell faces r_j + dr/2"""
    return (grid.r[:-1] + 0.5 * grid.dr) ** 4


def _angle_to_u(grid: RadialGrid, psi: np.ndarray) -> np.ndarray:
    """psi / r on nodes 1.., node 0 copied from node 1 so the origin face carries no flux"""
    u = np.empty_like(psi)
    u[1:] = psi[1:] / grid.r[1:]
    u[0] = u[1]
    return u


def laplacian_5d_stencil(grid: RadialGrid, u: np.ndarray, lumped_origin: bool = False) -> np.ndarray:
    """Flux form of u_rr + 4 u_r / r: face fluxes r^4 u_r differenced over cell volumes.

    Gives 10 (u_1 - u_0) / dr^2 at r = 0. Against cell_volumes it is minus the
    gradient of the discrete energy (1/2) sum r_face^4 (u_{j+1} - u_j)^2 / dr.
    The last node is left at 0; the outer boundary sets it.
    """
    volumes = cell_volumes(grid, lumped_origin)
    flux = _face_weights(grid) * np.diff(u) / grid.dr
    net = np.empty(grid.n_points)
    net[0] = flux[0]
    net[1:] = flux[1:] - flux[:-1]
    out = np.zeros_like(u)
    active = np.nonzero(volumes[:-1] > 0.0)[0]
    out[active] = net[active] / volumes[active]
    return out


def rhs(kind: EquationKind, state: FieldState, grid: RadialGrid) -> np.ndarray:
    """Acceleration of the value field; zero at the outer node"""
    if state.formulation != kind.formulation:
        raise InvalidArgumentError(
            f"{kind} expects a {kind.formulation.value} state, got {state.formulation.value}")
    value = grid.check_samples(state.value)

    if kind.formulation == Formulation.PSI3D:
        u = _angle_to_u(grid, value)
        acceleration = (grid.r * laplacian_5d_stencil(grid, u, lumped_origin=True)
                        - _nonlinear_3d(kind, grid, value, u))
        acceleration[0] = 0.0
    else:
        acceleration = laplacian_5d_stencil(grid, value) - _nonlinear_5d(kind, grid, value)
    acceleration[-1] = 0.0
    return acceleration


# Energies


def _potentials(kind: EquationKind, grid: RadialGrid, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nonlinear potentials against r^4 dr; their u-derivatives are the forces"""
    rho = grid.r * u
    u4 = u ** 4
    u6 = u4 * u * u
    zeros = np.zeros_like(u)
    equation = kind.equation
    if equation in (Equation.AN_PSI, Equation.AN_U):
        return V1(rho) * u4, V2(rho) * u6
    if equation == Equation.WAVE_MAP:
        return V1(rho) * u4, zeros
    if equation in (Equation.FREE5D, Equation.LINEARIZED3D):
        return zeros, zeros
    if equation == Equation.QUINTIC5D:
        return zeros, (QUINTIC_COEFFICIENT / 6.0) * u6
    chi = smooth_cutoff(grid.r, kind.radius)
    return chi * V1(rho) * u4, chi * V2(rho) * u6


def conserved_energy(kind: EquationKind, state: FieldState, grid: RadialGrid) -> EnergyReport:
    """Discrete energy of the semi-discrete equation, exactly conserved up to the RK4 error.

    Kinetic and potential terms are nodal sums against cell_volumes, the
    gradient term sums the face differences of laplacian_5d_stencil. The 5d
    gradient energy equals (1/2) int psi_r^2 r^2 dr + int psi^2 dr; the second
    piece is reported in the sine slot so each slot matches its psi form.
    """
    lumped = kind.formulation == Formulation.PSI3D
    if lumped:
        psi_state = as_psi(state, grid)
        u = _angle_to_u(grid, psi_state.value)
        u_t = _angle_to_u(grid, psi_state.velocity)
    else:
        u_state = as_u(state, grid)
        u, u_t = u_state.value, u_state.velocity
    volumes = cell_volumes(grid, lumped)

    kinetic = 0.5 * float(np.dot(volumes, u_t ** 2))
    gradient_5d = 0.5 * float(np.dot(_face_weights(grid), np.diff(u) ** 2)) / grid.dr
    linear = integrate_weighted(grid, (grid.r * u) ** 2, 0)
    sine, quintic = _potentials(kind, grid, u)
    return EnergyReport(kinetic=kinetic, gradient=gradient_5d - linear,
                        sine_potential=linear + float(np.dot(volumes, sine)),
                        quintic_potential=float(np.dot(volumes, quintic)))


# Time stepping


def _derivative(kind: EquationKind, grid: RadialGrid, boundary: Boundary,
                value: np.ndarray, velocity: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    state = FieldState(kind.formulation, value, velocity)
    d_value = velocity.copy()
    d_velocity = rhs(kind, state, grid)
    if boundary == Boundary.SOMMERFELD:
        # outgoing f(t - r) / r^k: psi_t + psi_r + psi/r = 0, u_t + u_r + 2u/r = 0
        k = 1.0 if kind.formulation == Formulation.PSI3D else 2.0
        h = grid.dr
        r_out = grid.r_max

        def outgoing(f):
            return -(3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h) - k * f[-1] / r_out

        d_value[-1] = outgoing(value)
        d_velocity[-1] = outgoing(velocity)
    return d_value, d_velocity


def _rk4_step(kind, grid, boundary, value, velocity, dt):
    k1v, k1a = _derivative(kind, grid, boundary, value, velocity)
    k2v, k2a = _derivative(kind, grid, boundary, value + 0.5 * dt * k1v, velocity + 0.5 * dt * k1a)
    k3v, k3a = _derivative(kind, grid, boundary, value + 0.5 * dt * k2v, velocity + 0.5 * dt * k2a)
    k4v, k4a = _derivative(kind, grid, boundary, value + dt * k3v, velocity + dt * k3a)
    value = value + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    velocity = velocity + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
    return value, velocity


def support_radius(state: FieldState, grid: RadialGrid, rel_tol: float = 1e-12) -> float:
    """Largest node where the data is not negligible"""
    magnitude = np.maximum(np.abs(state.value), np.abs(state.velocity))
    scale = np.max(magnitude)
    if scale == 0.0:
        return 0.0
    return float(grid.r[np.nonzero(magnitude > rel_tol * scale)[0][-1]])


def _check_outputs(t0: float, t_final: float, outputs: Sequence[float]) -> List[float]:
    direction = 1.0 if t_final >= t0 else -1.0
    ordered = [float(t) for t in outputs]
    previous = t0
    for i, t in enumerate(ordered):
        if direction * (t - t0) < -1e-12 or direction * (t - t_final) > 1e-12:
            raise InvalidArgumentError(f"output time {t} lies outside [{t0}, {t_final}]")
        if i > 0 and direction * (t - previous) <= 0:
            raise InvalidArgumentError("output times must be strictly ordered along the run")
        previous = t
    return ordered


def evolve(kind: EquationKind, initial: FieldState, grid: RadialGrid, t_final: float,
           cfl: float = DEFAULT_CFL, outputs: Optional[Sequence[float]] = None,
           boundary: str = "none", radii: Sequence[float] = (),
           thresholds: Optional[BlowupThresholds] = None,
           record_diagnostics: bool = True) -> Trajectory:
    """Integrate from initial.time to t_final with classical RK4, dt = cfl * dr"""
    if not 0.0 < cfl < 1.0:
        raise InvalidArgumentError(f"cfl must lie in (0, 1), got {cfl}")
    boundary = Boundary(boundary)
    thresholds = thresholds or BlowupThresholds()
    if initial.formulation != kind.formulation:
        logger.debug(f"Converting initial data to {kind.formulation.value}")
        initial = convert(initial, kind.formulation, grid)
    grid.check_samples(initial.value)

    t0 = initial.time
    outputs = _check_outputs(t0, t_final, [t_final] if outputs is None else outputs)
    trajectory = Trajectory(kind=kind, radii=tuple(float(a) for a in radii))
    started = clock.perf_counter()

    if boundary == Boundary.NONE:
        reach = support_radius(initial, grid) + abs(t_final - t0)
        if reach > grid.r_max:
            trajectory.cone_overrun = reach
            logger.warning(f"Light cone reaches r = {reach:.4g} beyond r_max = {grid.r_max:.4g}; "
                           f"the outer node is held at zero acceleration")

    accumulator = SNormAccumulator()
    value = initial.value.copy()
    velocity = initial.velocity.copy()
    t = t0
    accumulator.add(t, s_norm_increment(as_u(initial, grid), grid))
    initial_energy = conserved_energy(kind, initial, grid).total

    if cfl > STABLE_CFL:
        logger.warning(f"cfl {cfl} exceeds the stencil stability bound {STABLE_CFL:.3f}")
        trajectory.termination = Termination.CFL_VIOLATION
        trajectory.termination_time = t0
        trajectory.snapshots.append(initial)
        if record_diagnostics:
            trajectory.diagnostics.append(
                _diagnostic_row(kind, initial, grid, accumulator, t0, trajectory.radii))
        trajectory.wall_seconds = clock.perf_counter() - started
        return trajectory

    dt_max = cfl * grid.dr
    direction = 1.0 if t_final >= t0 else -1.0
    angle_field = kind.formulation == Formulation.PSI3D

    def blown_up() -> Optional[str]:
        if not (np.all(np.isfinite(value)) and np.all(np.isfinite(velocity))):
            return "non-finite values"
        if np.max(np.abs(value)) > thresholds.amplitude:
            return f"amplitude above {thresholds.amplitude:g}"
        if angle_field and np.max(np.abs(np.diff(value))) > thresholds.node_jump:
            return f"node-to-node jump above {thresholds.node_jump:g}"
        return None

    for target in outputs:
        reason = None
        while direction * (target - t) > 1e-12 * max(1.0, abs(target)):
            dt = direction * min(dt_max, abs(target - t))
            value, velocity = _rk4_step(kind, grid, boundary, value, velocity, dt)
            t = t + dt
            trajectory.steps += 1
            reason = blown_up()
            if reason:
                break
            accumulator.add(t, s_norm_increment(
                as_u(FieldState(kind.formulation, value, velocity, t), grid), grid))
        if reason is None:
            t = target
            state = FieldState(kind.formulation, value, velocity, t)
            row = _diagnostic_row(kind, state, grid, accumulator, t0, trajectory.radii) \
                if record_diagnostics else None
            total = row.energy.total if row is not None else conserved_energy(kind, state, grid).total
            if initial_energy > 0 and total > thresholds.energy_inflation * initial_energy:
                reason = f"energy grew beyond {thresholds.energy_inflation:g}x"
            else:
                trajectory.snapshots.append(state)
                if row is not None:
                    trajectory.diagnostics.append(row)
                continue
        logger.warning(f"Blow-up detected for {kind} at t = {t:.6g}: {reason}")
        trajectory.termination = Termination.BLOWUP_DETECTED
        trajectory.termination_time = t
        break

    trajectory.wall_seconds = clock.perf_counter() - started
    logger.debug(f"{kind}: {trajectory.steps} steps, termination {trajectory.termination.value}")
    return trajectory


def _diagnostic_row(kind, state, grid, accumulator, t0, radii) -> DiagnosticRow:
    exterior = []
    for a in radii:
        edge = a + abs(state.time - t0)
        exterior.append(exterior_energy(state, grid, edge) if edge < grid.r_max else float("nan"))
    return DiagnosticRow(
        t=state.time,
        energy=conserved_energy(kind, state, grid),
        h_norm=h_norm(state, grid),
        s_accumulator=accumulator.value,
        degree_residual=degree_residual(state, grid),
        exterior=tuple(exterior),
    )


# Exact solutions


def turok_spergel(t: float, r):
    """Self-similar wave map psi = 2 arctan(r / t) and its time derivative"""
    if not t > 0:
        raise InvalidArgumentError(f"Turok-Spergel time must be positive, got {t}")
    r = np.asarray(r, dtype=float)
    psi = 2.0 * np.arctan(r / t)
    psi_t = -2.0 * r / (t * t + r * r)
    if r.ndim == 0:
        return float(psi), float(psi_t)
    return psi, psi_t


class Profile(Protocol):
    """Smooth 1d profile F; width sets where the r = 0 series takes over"""
    width: float

    def derivative(self, order: int, x) -> np.ndarray:
        ...


@dataclass(frozen=True)
class WaveProfile:
    """Gaussian A exp(-((x - c) / w)^2) with derivatives of any order"""
    amplitude: float
    center: float
    width: float

    def derivative(self, order: int, x) -> np.ndarray:
        s = (np.asarray(x, dtype=float) - self.center) / self.width
        coefficients = np.zeros(order + 1)
        coefficients[order] = 1.0
        return (self.amplitude * (-1.0) ** order * hermite.hermval(s, coefficients)
                * np.exp(-s * s) / self.width ** order)


@dataclass(frozen=True)
class CompactProfile:
    """C-infinity bump A exp(1 - 1/(1 - y^2)) on (lo, hi), y mapping (lo, hi) onto (-1, 1)"""
    amplitude: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InvalidArgumentError(f"profile support needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def derivative(self, order: int, x) -> np.ndarray:
        # d^n/dy^n of the bump is p_n(y) q^-2n times the bump, q = 1 - y^2,
        # with p_{n+1} = q^2 p_n' - 2y p_n + 4n y q p_n
        y_poly = Polynomial([0.0, 1.0])
        q_poly = Polynomial([1.0, 0.0, -1.0])
        p = Polynomial([1.0])
        for n in range(order):
            p = q_poly ** 2 * p.deriv() - 2.0 * y_poly * p + 4.0 * n * y_poly * q_poly * p

        y = (2.0 * np.asarray(x, dtype=float) - self.lo - self.hi) / (self.hi - self.lo)
        y = np.atleast_1d(y)
        out = np.zeros_like(y)
        inside = np.abs(y) < 1.0
        q = 1.0 - y[inside] ** 2
        out[inside] = p(y[inside]) * np.exp(1.0 - 1.0 / q - 2.0 * order * np.log(q))
        return self.amplitude * out / self.width ** order


def exact_free5d(profile: Profile, t: float, r) -> Tuple[np.ndarray, np.ndarray]:
    """Radial free wave in 5d: r^-1 d/dr of the 3d wave (F(t - r) - F(t + r)) / r.

    Any profile with derivatives up to order 8 works; a profile supported in
    [lo, hi] gives u = 0 wherever neither t - r nor t + r lies in (lo, hi).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    F = profile.derivative
    minus, plus = t - r, t + r
    near = r < 0.02 * profile.width
    safe = np.where(near, 1.0, r)

    u = (-(F(1, minus) + F(1, plus)) / safe ** 2
         - (F(0, minus) - F(0, plus)) / safe ** 3)
    u_t = (-(F(2, minus) + F(2, plus)) / safe ** 2
           - (F(1, minus) - F(1, plus)) / safe ** 3)

    # even Taylor expansion about r = 0
    r2 = r * r
    u_series = -(2.0 / 3.0) * F(3, t) - F(5, t) * r2 / 15.0 - F(7, t) * r2 * r2 / 420.0
    u_t_series = -(2.0 / 3.0) * F(4, t) - F(6, t) * r2 / 15.0 - F(8, t) * r2 * r2 / 420.0
    return np.where(near, u_series, u), np.where(near, u_t_series, u_t)


def free_wave_state(profile: Profile, t: float, grid: RadialGrid) -> FieldState:
    u, u_t = exact_free5d(profile, t, grid.r)
    return FieldState(Formulation.U5D, u, u_t, t)


# Scaling and comparison experiments


def rescale(state: FieldState, grid: RadialGrid, lam: float) -> FieldState:
    """(lam^-1/2 u(r/lam), lam^-3/2 u_t(r/lam)) resampled on the same grid"""
    if not lam > 0:
        raise InvalidArgumentError(f"scale must be positive, got {lam}")
    if state.formulation != Formulation.U5D:
        raise InvalidArgumentError("rescale acts on u5d states")
    source = grid.r / lam
    value = lam ** -0.5 * np.interp(source, grid.r, state.value, right=0.0)
    velocity = lam ** -1.5 * np.interp(source, grid.r, state.velocity, right=0.0)
    return FieldState(Formulation.U5D, value, velocity, lam * state.time)


def difference_state(a: FieldState, b: FieldState) -> FieldState:
    return FieldState(a.formulation, a.value - b.value, a.velocity - b.velocity, a.time)


@dataclass
class SmallScaleRow:
    lam: float
    h1_difference: float
    s_difference: float
    status: str


@dataclass
class TruncatedRow:
    radius: float
    sup_difference: float
    bound: float
    status: str


def _sampled_differences(first: Trajectory, second: Trajectory, grid: RadialGrid):
    count = min(len(first.snapshots), len(second.snapshots))
    accumulator = SNormAccumulator()
    sup_norm = 0.0
    for a, b in zip(first.snapshots[:count], second.snapshots[:count]):
        gap = difference_state(as_u(a, grid), as_u(b, grid))
        sup_norm = max(sup_norm, energy_norm(gap, grid))
        accumulator.add_state(gap, grid)
    return sup_norm, accumulator.value


def small_scale_experiment(quintic_data: FieldState, lambdas: Sequence[float], grid: RadialGrid,
                           horizon: float, cfl: float = DEFAULT_CFL,
                           samples: int = 40) -> List[SmallScaleRow]:
    """Compare an_u with the quintic equation from data concentrated at scale lam"""
    rows = []
    for lam in lambdas:
        data = rescale(as_u(quintic_data, grid).with_time(0.0), grid, lam)
        t_end = lam * horizon
        outputs = list(np.linspace(0.0, t_end, samples + 1))
        full = evolve(EquationKind(Equation.AN_U), data, grid, t_end, cfl, outputs,
                      record_diagnostics=False)
        quintic = evolve(EquationKind(Equation.QUINTIC5D), data, grid, t_end, cfl, outputs,
                         record_diagnostics=False)
        status = "completed" if full.completed and quintic.completed else "blowup_detected"
        h1_difference, s_difference = _sampled_differences(full, quintic, grid)
        logger.info(f"lambda={lam:g}: H1xL2 difference {h1_difference:.6g}, "
                    f"S difference {s_difference:.6g} ({status})")
        rows.append(SmallScaleRow(float(lam), h1_difference, s_difference, status))
    return rows


def truncated_comparison(data: FieldState, radii: Sequence[float], grid: RadialGrid,
                         horizon: float, small_data_threshold: float = 0.1,
                         cfl: float = DEFAULT_CFL, samples: int = 50) -> List[TruncatedRow]:
    """sup_t of ||h - h_L|| in H1 x L2 for the truncated problem against the free wave"""
    data = as_u(data, grid)
    size = energy_norm(data, grid)
    if size > small_data_threshold:
        raise InvalidArgumentError(
            f"data norm {size:.4g} exceeds the small-data threshold {small_data_threshold:g}")
    t_end = data.time + horizon
    outputs = list(np.linspace(data.time, t_end, samples + 1))
    free = evolve(EquationKind(Equation.FREE5D), data, grid, t_end, cfl, outputs,
                  record_diagnostics=False)

    rows = []
    for radius in radii:
        truncated = evolve(EquationKind(Equation.EXTERIOR_TRUNCATED, radius), data, grid,
                           t_end, cfl, outputs, record_diagnostics=False)
        sup_difference, _ = _sampled_differences(truncated, free, grid)
        bound = size ** 3 / radius + size ** 5 / radius ** 4
        status = "completed" if truncated.completed and free.completed else "blowup_detected"
        logger.info(f"R={radius:g}: sup difference {sup_difference:.6g}")
        rows.append(TruncatedRow(float(radius), sup_difference, bound, status))
    return rows


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x; nan when any y is zero"""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])

"""
Exterior energy channels of free radial waves in five dimensions

The plane P(a) = {(c1 r^-3, c2 r^-3)} in H1 x L2(r > a) carries the static and
linearly growing free solutions. pi_a is the orthogonal projection onto it;
the energy of a free wave left outside the cone r > a + |t| controls the part
off the plane. This module measures that statement, the projection inequality
along trajectories, and the spatial decay quantities v0 = r^3 u0 and
v1 = r int_r^inf u1(rho) rho drho.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from errors import InvalidArgumentError
from evolve import DEFAULT_CFL, Equation, EquationKind, Trajectory, evolve, support_radius
from grid import RadialGrid, d_dr, integrate_weighted_tail, interpolate_at
from model import FieldState, Formulation, as_u, exterior_energy

logger = logging.getLogger(__name__)

PLATEAU_TOLERANCE = 0.05
PLATEAU_FRACTION = 0.8


def _ratio(numerator: float, denominator: float) -> float:
    if denominator == 0.0:
        return 0.0 if numerator == 0.0 else float("inf")
    return numerator / denominator


@dataclass(frozen=True)
class ExteriorProjection:
    """Split of the exterior H1 x L2 norm on r >= a into plane and complement.

    c1, c2 and norm_pi_sq follow the half-line formulas pi_a(f, 0) = a^3 f(a) r^-3
    and pi_a(0, g) = a r^-3 int_a g rho; norm_perp_sq is the rest of the
    measured total. The grid_* fields are the orthogonal projection in the
    discrete inner product on [a, r_max], which is idempotent on the grid.
    """
    a: float
    c1: float
    c2: float
    norm_pi_sq: float
    norm_perp_sq: float
    total_sq: float
    grid_c1: float
    grid_c2: float
    grid_pi_sq: float
    grid_perp_sq: float

    @property
    def pythagoras_gap(self) -> float:
        return abs(self.norm_pi_sq + self.norm_perp_sq - self.total_sq)

    @property
    def grid_pythagoras_gap(self) -> float:
        return abs(self.grid_pi_sq + self.grid_perp_sq - self.total_sq)


def plane_generator(grid: RadialGrid) -> np.ndarray:
    """r^-3 on the grid nodes, 0 at the origin node"""
    out = np.zeros(grid.size)
    out[1:] = grid.r[1:] ** -3.0
    return out


def project(state: FieldState, grid: RadialGrid, a: float) -> ExteriorProjection:
    """Projection of a 5d pair onto P(a), by the half-line formulas and on the grid.

    The grid inner products are the same tail quadratures that define
    exterior_energy, so the grid split is exactly orthogonal. The two splits
    agree as r_max grows.
    """
    if not 0.0 < a < grid.r_max:
        raise InvalidArgumentError(f"projection radius must lie in (0, {grid.r_max}), got {a}")
    u_state = as_u(state, grid)
    f = u_state.value
    g = u_state.velocity
    total_sq = exterior_energy(u_state, grid, a)

    c1 = a ** 3 * interpolate_at(grid, f, a)
    c2 = a * integrate_weighted_tail(grid, g, 1, a)
    norm_pi_sq = 3.0 * c1 ** 2 / a ** 3 + c2 ** 2 / a
    norm_perp_sq = max(total_sq - norm_pi_sq, 0.0)

    e = plane_generator(grid)
    f_r = d_dr(grid, f)
    e_r = d_dr(grid, e)
    gradient_ee = integrate_weighted_tail(grid, e_r * e_r, 4, a)
    gradient_fe = integrate_weighted_tail(grid, f_r * e_r, 4, a)
    velocity_ee = integrate_weighted_tail(grid, e * e, 4, a)
    velocity_ge = integrate_weighted_tail(grid, g * e, 4, a)
    grid_c1 = gradient_fe / gradient_ee
    grid_c2 = velocity_ge / velocity_ee
    grid_pi_sq = grid_c1 * gradient_fe + grid_c2 * velocity_ge

    return ExteriorProjection(a=float(a), c1=float(c1), c2=float(c2),
                              norm_pi_sq=float(norm_pi_sq), norm_perp_sq=float(norm_perp_sq),
                              total_sq=float(total_sq), grid_c1=float(grid_c1), grid_c2=float(grid_c2),
                              grid_pi_sq=float(grid_pi_sq),
                              grid_perp_sq=float(max(total_sq - grid_pi_sq, 0.0)))


def plane_state(grid: RadialGrid, c1: float, c2: float) -> FieldState:
    """(c1 r^-3, c2 r^-3) sampled on the nodes"""
    e = plane_generator(grid)
    return FieldState(Formulation.U5D, c1 * e, c2 * e)


@dataclass
class ChannelRow:
    t: float
    ext_plus: float
    ext_minus: float
    perp_norm_sq: float

    @property
    def ratio(self) -> float:
        return _ratio(max(self.ext_plus, self.ext_minus), self.perp_norm_sq)

    def as_dict(self) -> Dict[str, float]:
        return {"t": self.t, "ext_plus": self.ext_plus, "ext_minus": self.ext_minus,
                "perp_norm_sq": self.perp_norm_sq, "ratio": self.ratio}


@dataclass
class ChannelReport:
    a: float
    horizon: float
    projection: ExteriorProjection
    rows: List[ChannelRow] = field(default_factory=list)
    terminal_plus: float = 0.0
    terminal_minus: float = 0.0
    plateau: bool = False

    @property
    def terminal_max(self) -> float:
        return max(self.terminal_plus, self.terminal_minus)

    @property
    def ratio_to_perp(self) -> float:
        return _ratio(self.terminal_max, self.projection.norm_perp_sq)

    @property
    def ratio_to_total(self) -> float:
        return _ratio(self.terminal_max, self.projection.total_sq)

    def summary(self) -> Dict[str, float]:
        return {
            "a": self.a,
            "horizon": self.horizon,
            "norm_pi_sq": self.projection.norm_pi_sq,
            "norm_perp_sq": self.projection.norm_perp_sq,
            "grid_pi_sq": self.projection.grid_pi_sq,
            "grid_perp_sq": self.projection.grid_perp_sq,
            "terminal_plus": self.terminal_plus,
            "terminal_minus": self.terminal_minus,
            "ratio_to_perp": self.ratio_to_perp,
            "ratio_to_total": self.ratio_to_total,
            "plateau": self.plateau,
        }


def _exterior_series(trajectory: Trajectory, grid: RadialGrid, a: float) -> List[float]:
    return [exterior_energy(snapshot, grid, a + abs(snapshot.time)) for snapshot in trajectory.snapshots]


def channel_experiment(state: FieldState, grid: RadialGrid, a: float, horizon: float,
                       samples: int = 50, margin: float = 1.0,
                       cfl: float = DEFAULT_CFL) -> ChannelReport:
    """Free 5d evolution forward and backward, measuring energy outside r = a + |t|"""
    if not horizon > 0:
        raise InvalidArgumentError(f"horizon must be positive, got {horizon}")
    if grid.r_max < a + horizon + margin:
        raise InvalidArgumentError(
            f"r_max = {grid.r_max:g} is below a + horizon + margin = {a + horizon + margin:g}")
    data = as_u(state, grid).with_time(0.0)
    projection = project(data, grid, a)
    if support_radius(data, grid) + horizon > grid.r_max:
        logger.info("Data reaches the outer node; exterior values rely on the static outer node")

    kind = EquationKind(Equation.FREE5D)
    times = np.linspace(0.0, horizon, samples + 1)
    forward = evolve(kind, data, grid, horizon, cfl, list(times), record_diagnostics=False)
    backward = evolve(kind, data, grid, -horizon, cfl, list(-times), record_diagnostics=False)
    plus = _exterior_series(forward, grid, a)
    minus = _exterior_series(backward, grid, a)

    report = ChannelReport(a=float(a), horizon=float(horizon), projection=projection)
    for t, ext_plus, ext_minus in zip(times, plus, minus):
        report.rows.append(ChannelRow(float(t), ext_plus, ext_minus, projection.norm_perp_sq))
    report.terminal_plus = plus[-1]
    report.terminal_minus = minus[-1]

    check = int(round(PLATEAU_FRACTION * samples))
    series = plus if report.terminal_plus >= report.terminal_minus else minus
    earlier = series[min(check, len(series) - 1)]
    report.plateau = bool(abs(series[-1] - earlier) <= PLATEAU_TOLERANCE * max(abs(series[-1]), 1e-300))

    logger.info(f"Channel a={a:g}, horizon={horizon:g}: terminal {report.terminal_max:.6g}, "
                f"ratio to perp {report.ratio_to_perp:.4g}, plateau {report.plateau}")
    return report


@dataclass
class KeyInequalityRow:
    t: float
    R: float
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return _ratio(self.lhs, self.rhs)

    def as_dict(self) -> Dict[str, float]:
        return {"t": self.t, "R": self.R, "lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio}


def key_inequality_report(trajectory: Trajectory, grid: RadialGrid,
                          radii: Sequence[float]) -> List[KeyInequalityRow]:
    """||pi_R^perp u(t)|| against R^-1 ||pi_R u(t)||^3 for every snapshot and R"""
    rows = []
    for snapshot in trajectory.snapshots:
        for R in radii:
            if not 0.0 < R < grid.r_max:
                logger.warning(f"Skipping R = {R:g} outside (0, {grid.r_max:g})")
                continue
            split = project(snapshot, grid, R)
            rows.append(KeyInequalityRow(
                t=snapshot.time, R=float(R),
                lhs=float(np.sqrt(split.norm_perp_sq)),
                rhs=float(split.norm_pi_sq ** 1.5 / R)))
    return rows


@dataclass
class DecayDiagnostics:
    r: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    window: Tuple[float, float]
    ell0: float
    v0_slope: float
    v1_slope: float
    # bound on the part of v1 from r > r_max, assuming u1 ~ r^-5 beyond the grid
    v1_error_bar: float

    def as_dict(self) -> Dict[str, object]:
        return {"ell0": self.ell0, "v0_slope": self.v0_slope, "v1_slope": self.v1_slope,
                "window": list(self.window), "v1_error_bar": self.v1_error_bar}


def _log_slope(r: np.ndarray, values: np.ndarray) -> float:
    magnitude = np.abs(values)
    if r.size < 2 or np.any(magnitude <= 0.0) or not np.all(np.isfinite(magnitude)):
        return float("nan")
    return float(np.polyfit(np.log(r), np.log(magnitude), 1)[0])


def decay_diagnostics(state: FieldState, grid: RadialGrid,
                      fit_window: Tuple[float, float]) -> DecayDiagnostics:
    """v0, v1, the limit ell0 of v0 and the decay rates of v0 - ell0 and v1.

    The rate of v0 - ell0 is read off v0' (one power steeper), which needs no
    estimate of ell0 itself.
    """
    r_lo, r_hi = fit_window
    if not 0.0 < r_lo < r_hi <= grid.r_max:
        raise InvalidArgumentError(f"fit window {fit_window} must lie inside (0, {grid.r_max}]")
    u_state = as_u(state, grid)
    r = grid.r
    v0 = r ** 3 * u_state.value
    inward = cumulative_trapezoid((u_state.velocity * r)[::-1], dx=grid.dr, initial=0.0)[::-1]
    v1 = r * inward

    inside = (r >= r_lo) & (r <= r_hi)
    if np.count_nonzero(inside) < 2:
        raise InvalidArgumentError(f"fit window {fit_window} holds fewer than two nodes")
    ell0 = float(np.mean(v0[inside]))

    v0_r = d_dr(grid, v0)
    flat = np.max(np.abs(v0_r[inside] * r[inside])) <= 1e-9 * max(1.0, abs(ell0))
    v0_slope = float("nan") if flat else _log_slope(r[inside], v0_r[inside]) + 1.0
    v1_slope = _log_slope(r[inside], v1[inside])
    error_bar = r_hi * abs(u_state.velocity[-1]) * grid.r_max ** 2 / 3.0

    return DecayDiagnostics(r=r.copy(), v0=v0, v1=v1, window=(float(r_lo), float(r_hi)),
                            ell0=ell0, v0_slope=v0_slope, v1_slope=v1_slope,
                            v1_error_bar=float(error_bar))


def projection_from_decay(diagnostics: DecayDiagnostics, R: float) -> float:
    """||pi_R (u0, u1)||^2 = 3 R^-3 v0(R)^2 + R^-1 v1(R)^2"""
    if not diagnostics.r[0] < R <= diagnostics.r[-1]:
        raise InvalidArgumentError(f"R = {R} is outside the sampled range")
    v0 = float(np.interp(R, diagnostics.r, diagnostics.v0))
    v1 = float(np.interp(R, diagnostics.r, diagnostics.v1))
    return 3.0 * v0 ** 2 / R ** 3 + v1 ** 2 / R

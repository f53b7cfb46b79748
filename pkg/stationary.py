"""
Stationary solutions phi_alpha of the Adkins-Nappi equation

Stationary solutions satisfy

    phi_rr + 2 phi_r / r = sin 2phi / r^2 + (phi - sin phi cos phi)(1 - cos 2phi) / r^4.

In s = log r and g = e^{s/2} phi this becomes g'' - 9g/4 = N1 + N2. The decaying
family g = alpha e^{-3s/2} + O(e^{-11s/2}) is built on [s0, s_max] by
successive approximation of the variation-of-parameters integral equation,
then continued toward the origin with an adaptive Runge-Kutta integrator.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp, trapezoid

from errors import IntegrationFailure, InvalidArgumentError, NoConvergenceError
from model import Z1, Z2

logger = logging.getLogger(__name__)

DEFAULT_S0 = 3.0
TAIL_LENGTH = 12.0
CONTRACTION_RATIO = 0.5
MAX_S0_INCREASES = 5


class OriginClass(str, Enum):
    VANISHES = "vanishes"
    NONVANISHING = "nonvanishing"
    BLOWS_UP = "blows_up"


@dataclass
class TailSolution:
    """Fixed point g_alpha of the tail integral equation on a uniform s-mesh"""
    alpha: float
    s0: float
    s: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    # g - alpha e^{-3s/2}, kept separately so r^2 phi - alpha has no cancellation
    correction: np.ndarray
    iterations: int
    residual: float
    differences: List[float] = field(default_factory=list)

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def phi(self) -> np.ndarray:
        return np.exp(-0.5 * self.s) * self.g

    @property
    def dphi_ds(self) -> np.ndarray:
        return np.exp(-0.5 * self.s) * (self.dg - 0.5 * self.g)

    def leading_deviation(self) -> np.ndarray:
        """r^2 phi - alpha along the tail"""
        return np.exp(1.5 * self.s) * self.correction

    def fit_slope(self, window: Tuple[float, float] = (0.0, 2.5)) -> float:
        """Slope of log|r^2 phi - alpha| against log r, window offsets from s0"""
        lo, hi = self.s0 + window[0], self.s0 + window[1]
        inside = (self.s >= lo) & (self.s <= hi)
        deviation = np.abs(self.leading_deviation()[inside])
        if self.alpha == 0.0 or np.any(deviation <= 0.0):
            return float("nan")
        return float(np.polyfit(self.s[inside], np.log(deviation), 1)[0])


@dataclass
class StationaryProfile:
    """phi_alpha sampled on a uniform s-mesh, ascending in r"""
    alpha: float
    s: np.ndarray
    phi: np.ndarray
    dphi_ds: np.ndarray
    aborted: bool = False
    origin_class: Optional[OriginClass] = None
    tail: Optional[TailSolution] = None

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def dphi_dr(self) -> np.ndarray:
        return self.dphi_ds / self.r

    @property
    def r_min(self) -> float:
        return float(np.exp(self.s[0]))

    @property
    def r_exit(self) -> float:
        return float(np.exp(self.s[-1]))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.phi)) and np.all(np.isfinite(self.dphi_ds)))


def tail_nonlinearity(s: np.ndarray, g: np.ndarray) -> np.ndarray:
    """N1 + N2 written through Z1, Z2 so tiny phi loses no digits"""
    phi = np.exp(-0.5 * s) * g
    n1 = np.exp(0.5 * s) * Z1(phi) * phi ** 3
    n2 = np.exp(-1.5 * s) * Z2(phi) * phi ** 5
    return n1 + n2


def _integral_to_end(values: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Integral from s_i to s[-1], accumulated from the far end"""
    backward = cumulative_trapezoid(values[::-1], s[::-1], initial=0.0)
    return -backward[::-1]


def picard_tail(alpha: float, s0: float = DEFAULT_S0, s_max: Optional[float] = None,
                tol: float = 1e-13, ds: float = 0.005, max_iterations: int = 200) -> TailSolution:
    """Successive approximations g_{k+1} = alpha f1 + (1/3) int_s^inf K(s,t) N(g_k)(t) dt.

    tol bounds the sup-norm change of the last iterate relative to sup|g|.
    s0 grows by one until the first two differences contract by 1/2.
    """
    if not tol > 0:
        raise InvalidArgumentError(f"tolerance must be positive, got {tol}")
    length = TAIL_LENGTH if s_max is None else s_max - s0
    if not length > 0:
        raise InvalidArgumentError(f"s_max must exceed s0, got s0={s0}, s_max={s_max}")

    start = s0
    for attempt in range(MAX_S0_INCREASES + 1):
        n_nodes = int(np.ceil(length / ds)) + 1
        s = np.linspace(start, start + length, n_nodes)
        f1 = np.exp(-1.5 * s)
        f2 = np.exp(1.5 * s)
        g = alpha * f1
        differences: List[float] = []
        contracting = True

        for iteration in range(1, max_iterations + 1):
            nonlinear = tail_nonlinearity(s, g)
            i1 = _integral_to_end(f1 * nonlinear, s)
            i2 = _integral_to_end(f2 * nonlinear, s)
            correction = (f1 * i2 - f2 * i1) / 3.0
            g_next = alpha * f1 + correction
            change = float(np.max(np.abs(g_next - g)))
            differences.append(change)
            g = g_next
            logger.debug(f"alpha={alpha:g} s0={start:g} iterate {iteration}: change {change:.3e}")

            if iteration == 2 and differences[0] > 0 and change > CONTRACTION_RATIO * differences[0]:
                contracting = False
                break
            if change <= tol * max(float(np.max(np.abs(g))), np.finfo(float).tiny):
                dg = -1.5 * alpha * f1 + (-1.5 * f1 * i2 - 1.5 * f2 * i1) / 3.0
                return TailSolution(alpha=float(alpha), s0=float(start), s=s, g=g, dg=dg,
                                    correction=correction, iterations=iteration,
                                    residual=change, differences=differences)

        if contracting:
            raise NoConvergenceError(
                f"no convergence for alpha={alpha} after {max_iterations} iterations")
        logger.info(f"Picard map not contracting at s0={start:g} for alpha={alpha:g}, moving to s0={start + 1:g}")
        start += 1.0

    raise NoConvergenceError(
        f"Picard map for alpha={alpha} failed to contract up to s0={start - 1:g}")


def _ode_rhs(s: float, y: np.ndarray) -> np.ndarray:
    phi, phi_s = y
    source = (np.sin(2.0 * phi)
              + np.exp(-2.0 * s) * (phi - np.sin(phi) * np.cos(phi)) * (1.0 - np.cos(2.0 * phi)))
    return np.array([phi_s, source - phi_s])


def _integrate_inward(tail: TailSolution, r_min: float, abort_threshold: float,
                      method: str, rtol: float, atol: float, samples_per_unit: int):
    s_end = float(np.log(r_min))
    if s_end >= tail.s0:
        raise InvalidArgumentError(f"r_min={r_min} is not inside the tail start r={np.exp(tail.s0):.4g}")
    y0 = [float(tail.phi[0]), float(tail.dphi_ds[0])]
    n_samples = int(np.ceil((tail.s0 - s_end) * samples_per_unit)) + 1
    s_eval = np.linspace(tail.s0, s_end, n_samples)

    def escaped(s, y):
        return abs(y[0]) - abort_threshold
    escaped.terminal = True

    return solve_ivp(_ode_rhs, (tail.s0, s_end), y0, method=method, t_eval=s_eval,
                     events=escaped, rtol=rtol, atol=atol)


def _profile_from_solution(tail: TailSolution, solution, aborted: bool) -> StationaryProfile:
    return StationaryProfile(alpha=tail.alpha, s=solution.t[::-1].copy(),
                             phi=solution.y[0][::-1].copy(), dphi_ds=solution.y[1][::-1].copy(),
                             aborted=aborted, tail=tail)


def extend_inward(tail: TailSolution, r_min: float = 0.05, abort_threshold: float = 1e3,
                  method: str = "RK45", rtol: float = 1e-10, atol: float = 1e-13,
                  samples_per_unit: int = 4000) -> StationaryProfile:
    """Continue phi from r = e^{s0} down to r_min in the s variable"""
    if not r_min > 0 or not abort_threshold > 0:
        raise InvalidArgumentError("r_min and abort_threshold must be positive")
    solution = _integrate_inward(tail, r_min, abort_threshold, method, rtol, atol, samples_per_unit)

    if solution.status == -1:
        partial = _profile_from_solution(tail, solution, aborted=False) if solution.t.size else None
        raise IntegrationFailure(f"integration failed for alpha={tail.alpha}: {solution.message}",
                                 partial)

    aborted = solution.status == 1
    profile = _profile_from_solution(tail, solution, aborted)
    profile.origin_class = origin_classifier(profile)
    if aborted:
        logger.info(f"alpha={tail.alpha:g}: |phi| passed {abort_threshold:g} at r={profile.r_min:.4g}")
    return profile


def resolved_samples(profile: StationaryProfile, resolution: float = 1e-3) -> np.ndarray:
    """Mask of the outer samples up to the first one where a mesh step moves phi by more than resolution.

    The bound is on the phase change itself, since sin 2phi turns over once
    per pi in phi whatever the size of phi. Inside the first unresolved
    sample every stencil is dropped, so near an abort only the outer part counts.
    """
    mask = np.zeros(profile.s.size, dtype=bool)
    if profile.s.size < 2:
        mask[:] = True
        return mask
    ds = float(profile.s[1] - profile.s[0])
    fine = np.abs(profile.dphi_ds) * ds <= resolution
    unresolved = np.flatnonzero(~fine)
    start = int(unresolved[-1]) + 1 if unresolved.size else 0
    mask[start:] = True
    return mask


def oracle_agreement(tail: TailSolution, r_min: float = 0.05, abort_threshold: float = 1e3,
                     profile: Optional[StationaryProfile] = None) -> float:
    """Sup-relative gap between the main integrator and DOP853 at rtol 1e-12, on resolved samples"""
    if profile is None:
        profile = extend_inward(tail, r_min, abort_threshold)
    oracle = _integrate_inward(tail, r_min, abort_threshold, "DOP853", 1e-12, 1e-15, 4000)
    if oracle.status == -1:
        raise IntegrationFailure(f"oracle integration failed: {oracle.message}")
    reference = oracle.y[0][::-1]
    count = min(reference.size, profile.phi.size)
    # both runs share t_eval starting at s0, so the outer ends line up
    main = profile.phi[-count:]
    reference = reference[-count:]
    keep = resolved_samples(profile)[-count:]
    main, reference = main[keep], reference[keep]
    if main.size == 0:
        return float("nan")
    scale = float(np.max(np.abs(reference)))
    if scale == 0.0:
        return float(np.max(np.abs(main)))
    return float(np.max(np.abs(main - reference)) / scale)


def ode_residual(profile: StationaryProfile) -> float:
    """Max of |phi_ss + phi_s - RHS| relative to the size of its terms.

    phi_ss is the central difference of the stored derivative. The stored
    derivative is in turn checked against the central difference of phi, so
    a corrupted phi sample shows up as a spike.
    """
    if profile.s.size < 3:
        return 0.0
    ds = float(profile.s[1] - profile.s[0])
    resolved = resolved_samples(profile)
    keep = resolved[:-2] & resolved[1:-1] & resolved[2:]
    phi = profile.phi[1:-1]
    phi_s = profile.dphi_ds[1:-1]
    s = profile.s[1:-1]
    phi_ss = (profile.dphi_ds[2:] - profile.dphi_ds[:-2]) / (2.0 * ds)
    difference_s = (profile.phi[2:] - profile.phi[:-2]) / (2.0 * ds)

    angle = np.sin(2.0 * phi)
    quintic = np.exp(-2.0 * s) * (phi - np.sin(phi) * np.cos(phi)) * (1.0 - np.cos(2.0 * phi))
    equation = np.abs(phi_ss + phi_s - angle - quintic)
    equation_scale = np.abs(phi_ss) + np.abs(phi_s) + np.abs(angle) + np.abs(quintic)
    consistency = np.abs(difference_s - phi_s)
    # phi_s passes through 0 at turning points, so the field size enters the scale
    consistency_scale = np.abs(difference_s) + np.abs(phi_s) + np.maximum(1.0, np.abs(phi))

    scaled = np.maximum(
        np.divide(equation, equation_scale, out=np.zeros_like(equation), where=equation_scale > 0),
        consistency / consistency_scale,
    )
    if not np.any(keep):
        return float("nan")
    return float(np.max(scaled[keep]))


def pohozaev_function(s: np.ndarray, phi: np.ndarray, phi_s: np.ndarray) -> np.ndarray:
    """Phi = r^2 P = r^2 (phi_s^2 - 2 sin^2 phi) - (phi - sin phi cos phi)^2"""
    r2 = np.exp(2.0 * s)
    return r2 * (phi_s ** 2 - 2.0 * np.sin(phi) ** 2) - (phi - np.sin(phi) * np.cos(phi)) ** 2


@dataclass
class PohozaevReport:
    identity_residual: float
    identity_residual_scaled: float
    integrated_residual: float
    phi_min: float
    phi_max: float
    sign: str
    monotone: bool
    tail_value: float
    tail_decay_slope: float

    def as_dict(self) -> Dict[str, object]:
        return dict(self.__dict__)


def _sign_of(values: np.ndarray, tolerance: float) -> str:
    if np.all(np.abs(values) <= tolerance):
        return "zero"
    if np.all(values >= -tolerance):
        return "positive"
    if np.all(values <= tolerance):
        return "negative"
    return "mixed"


def pohozaev_report(profile: StationaryProfile) -> PohozaevReport:
    """Check Phi' = -4 r sin^2 phi on the resolved outer part of the samples and describe Phi"""
    resolved = np.flatnonzero(resolved_samples(profile))
    start = int(resolved[0]) if resolved.size else profile.s.size
    s = profile.s[start:]
    phi = profile.phi[start:]
    r = np.exp(s)
    if s.size < 3:
        nan = float("nan")
        return PohozaevReport(nan, nan, nan, nan, nan, "unresolved", False, nan, nan)
    ds = float(s[1] - s[0])
    big_phi = pohozaev_function(s, phi, profile.dphi_ds[start:])
    source = 4.0 * r * np.sin(phi) ** 2

    slope = np.gradient(big_phi, ds, edge_order=2) / r
    residual = np.abs(slope + source)
    identity = float(np.max(residual))
    local_scale = np.maximum(1.0, np.abs(slope) + source)
    identity_scaled = float(np.max(residual / local_scale))

    # Phi(r_exit) - Phi(r_start) + 4 int rho sin^2 phi drho, with drho = r ds
    integrated = big_phi[-1] - big_phi[0] + trapezoid(source * r, s)
    magnitude = max(1.0, float(np.max(np.abs(big_phi))))

    increments = np.diff(big_phi)
    monotone = bool(np.all(increments <= 1e-8 * magnitude))

    tail_value = float("nan")
    tail_slope = float("nan")
    if profile.tail is not None and profile.alpha != 0.0:
        tail = profile.tail
        tail_phi = pohozaev_function(tail.s, tail.phi, tail.dphi_ds)
        tail_value = float(tail_phi[-1])
        window = tail.s <= tail.s0 + 2.5
        values = np.abs(tail_phi[window])
        if np.all(values > 0):
            tail_slope = float(np.polyfit(tail.s[window], np.log(values), 1)[0])

    return PohozaevReport(
        identity_residual=identity,
        identity_residual_scaled=identity_scaled,
        integrated_residual=float(abs(integrated) / magnitude),
        phi_min=float(np.min(big_phi)),
        phi_max=float(np.max(big_phi)),
        sign=_sign_of(big_phi, 0.0),
        monotone=monotone,
        tail_value=tail_value,
        tail_decay_slope=tail_slope,
    )


def origin_classifier(profile: StationaryProfile, derivative_bound: float = 1e3) -> OriginClass:
    """vanishes when phi(r_min) looks like phi'(r_min) r_min with bounded phi'"""
    if profile.aborted:
        return OriginClass.BLOWS_UP
    r_min = profile.r_min
    inner = profile.r <= 2.0 * r_min
    slope = float(np.max(np.abs(profile.dphi_dr[inner])))
    value = abs(float(profile.phi[0]))
    if np.isfinite(slope) and slope <= derivative_bound and value <= 10.0 * r_min * slope:
        return OriginClass.VANISHES
    return OriginClass.NONVANISHING


@dataclass
class StationaryResult:
    """Everything the stationary command reports for one alpha"""
    alpha: float
    profile: StationaryProfile
    ode_residual: float
    pohozaev: PohozaevReport
    tail_fit_slope: float
    oracle_agreement: float

    def summary(self) -> Dict[str, object]:
        return {
            "origin_class": self.profile.origin_class.value,
            "tail_fit_slope": self.tail_fit_slope,
            "ode_residual": self.ode_residual,
            "phi_at_rmin": float(self.profile.phi[0]),
            "r_min_reached": self.profile.r_min,
            "oracle_agreement": self.oracle_agreement,
            "pohozaev_sign": self.pohozaev.sign,
            "pohozaev_identity_residual": self.pohozaev.identity_residual,
        }


def solve_profile(alpha: float, r_min: float = 0.05, abort_threshold: float = 1e3,
                  s0: float = DEFAULT_S0, tol: float = 1e-13) -> StationaryResult:
    """Tail, inward continuation and all checks for one alpha"""
    tail = picard_tail(alpha, s0=s0, tol=tol)
    profile = extend_inward(tail, r_min, abort_threshold)
    result = StationaryResult(
        alpha=float(alpha),
        profile=profile,
        ode_residual=ode_residual(profile),
        pohozaev=pohozaev_report(profile),
        tail_fit_slope=tail.fit_slope(),
        oracle_agreement=oracle_agreement(tail, r_min, abort_threshold, profile),
    )
    logger.info(f"alpha={alpha:g}: {profile.origin_class.value}, "
                f"tail slope {result.tail_fit_slope:.4g}, residual {result.ode_residual:.3e}")
    return result


def _solve_profile_args(args) -> StationaryResult:
    return solve_profile(*args)


def sweep(alphas: Sequence[float], r_min: float = 0.05, abort_threshold: float = 1e3,
          s0: float = DEFAULT_S0, tol: float = 1e-13, jobs: int = 1) -> List[StationaryResult]:
    """solve_profile over alphas, in worker processes when jobs > 1"""
    arguments = [(alpha, r_min, abort_threshold, s0, tol) for alpha in alphas]
    if jobs > 1 and len(arguments) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(_solve_profile_args, arguments))
    return [_solve_profile_args(args) for args in arguments]

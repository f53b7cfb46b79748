"""
Uniform radial mesh, weighted trapezoid quadrature and finite differences

Every other module samples its fields on a RadialGrid: nodes r_j = j*dr for
j = 0..n_points, so a field is an array of n_points + 1 values.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from errors import InvalidArgumentError

logger = logging.getLogger(__name__)

MIN_POINTS = 16


@dataclass(frozen=True)
class RadialGrid:
    """Uniform mesh on [0, r_max] with n_points cells"""
    n_points: int
    dr: float
    r_max: float
    r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.arange(self.n_points + 1, dtype=float) * self.dr
        nodes.flags.writeable = False
        object.__setattr__(self, "r", nodes)

    @property
    def size(self) -> int:
        """Number of nodes (n_points + 1)"""
        return self.n_points + 1

    def check_samples(self, samples) -> np.ndarray:
        """Return samples as a float array, rejecting wrong lengths"""
        values = np.asarray(samples, dtype=float)
        if values.shape != (self.size,):
            raise InvalidArgumentError(
                f"expected {self.size} samples, got shape {values.shape}")
        return values

    def index_at(self, radius: float) -> int:
        """Index of the last node with r_j <= radius"""
        return min(int(np.floor(radius / self.dr + 1e-12)), self.n_points)


def make_grid(r_max: float, n_points: int) -> RadialGrid:
    """Build a grid with dr = r_max / n_points"""
    if not np.isfinite(r_max) or r_max <= 0:
        raise InvalidArgumentError(f"r_max must be positive, got {r_max}")
    if int(n_points) != n_points or n_points < MIN_POINTS:
        raise InvalidArgumentError(
            f"n_points must be an integer >= {MIN_POINTS}, got {n_points}")
    n_points = int(n_points)
    grid = RadialGrid(n_points=n_points, dr=r_max / n_points, r_max=float(r_max))
    logger.debug(f"Created grid: r_max={r_max}, n_points={n_points}, dr={grid.dr:.6g}")
    return grid


def _check_power(p) -> int:
    if int(p) != p or p < 0:
        raise InvalidArgumentError(f"weight power must be a nonnegative integer, got {p}")
    return int(p)


def integrate_weighted(grid: RadialGrid, samples, p: int) -> float:
    """Trapezoid approximation of the integral of f(r) r^p over [0, r_max].

    p is 0, 2 or 4 for the energy-type integrals; p = 1 is accepted for the
    moment integrals used by the exterior projections.
    """
    values = grid.check_samples(samples)
    p = _check_power(p)
    return float(trapezoid(values * grid.r ** p, dx=grid.dr))


def integrate_weighted_tail(grid: RadialGrid, samples, p: int, a: float) -> float:
    """Integral of f(r) r^p over [a, r_max], interpolating the cut cell linearly"""
    values = grid.check_samples(samples)
    p = _check_power(p)
    if a < 0 or a >= grid.r_max:
        raise InvalidArgumentError(f"lower limit must lie in [0, r_max), got {a}")

    integrand = values * grid.r ** p
    k = grid.index_at(a)
    if k >= grid.n_points:
        return 0.0

    # Partial cell [a, r_{k+1}]
    r_next = grid.r[k + 1]
    weight = (a - grid.r[k]) / grid.dr
    at_a = (1.0 - weight) * integrand[k] + weight * integrand[k + 1]
    partial = 0.5 * (r_next - a) * (at_a + integrand[k + 1])

    if k + 1 >= grid.n_points:
        return float(partial)
    return float(partial + trapezoid(integrand[k + 1:], dx=grid.dr))


def interpolate_at(grid: RadialGrid, samples, radius: float) -> float:
    """Linear interpolation of nodal samples at one radius"""
    values = grid.check_samples(samples)
    return float(np.interp(radius, grid.r, values))


def d_dr(grid: RadialGrid, samples) -> np.ndarray:
    """First derivative: central in the interior, one-sided second order at the ends"""
    values = grid.check_samples(samples)
    return np.gradient(values, grid.dr, edge_order=2)


def d2_dr2(grid: RadialGrid, samples) -> np.ndarray:
    """Second derivative with second-order stencils everywhere"""
    values = grid.check_samples(samples)
    h2 = grid.dr * grid.dr
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / h2
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2
    out[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / h2
    return out

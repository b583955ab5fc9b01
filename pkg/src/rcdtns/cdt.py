"""1-D cumulative distribution transform against a fixed reference density.

A nonnegative signal is treated as a probability density on a closed interval.
Its transform is the 1-D optimal transport map from the reference density onto
the signal: ``s_hat(t) = F_source^-1(F_reference(t))`` evaluated at the
reference grid points, with CDFs accumulated by the trapezoid rule and the
inverse taken by monotone piecewise-linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

# bins whose total falls below 1e-12 per sample get a uniform floor so the
# density (and hence its CDF) is well defined for all-zero projections
MASS_FLOOR_PER_BIN = 1e-12
EPSILON_FLOOR = 1e-8

# CDF increments at or below this are treated as flat (no transported mass)
FLAT_TOLERANCE = 1e-12

__all__ = [
    "CdtFunction",
    "Density",
    "cdt_forward",
    "normalize_density",
    "uniform_density",
]


@dataclass(frozen=True)
class Density:
    """Nonnegative values on a uniform grid over ``interval``, Riemann-normalized.

    The normalization convention is ``sum(values) * spacing == 1`` with
    ``spacing = (b - a) / (N - 1)``.
    """

    values: np.ndarray
    interval: tuple[float, float]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def spacing(self) -> float:
        a, b = self.interval
        return (b - a) / (self.values.size - 1)

    @property
    def grid(self) -> np.ndarray:
        a, b = self.interval
        return np.linspace(a, b, self.values.size)


@dataclass(frozen=True)
class CdtFunction:
    """Transport map values at the reference grid points (non-decreasing)."""

    values: np.ndarray
    domain_interval: tuple[float, float]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def normalize_density(signal, interval) -> Density:
    """Scale a nonnegative signal to integrate to 1 over ``interval``.

    Signals whose total mass is at most ``1e-12 * len(signal)`` receive a
    uniform floor of 1e-8 per bin before normalizing, so that vanishing
    projections still yield a valid (uniform) density.
    """
    values = np.asarray(signal, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise InvalidInput(f"signal must be 1-D with length >= 2, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidInput("signal contains non-finite entries")
    if values.min() < 0.0:
        raise InvalidInput("signal contains negative entries")
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise InvalidInput(f"interval must satisfy a < b, got [{a}, {b}]")
    if values.sum() <= MASS_FLOOR_PER_BIN * values.size:
        values = values + EPSILON_FLOOR
    spacing = (b - a) / (values.size - 1)
    return Density(values=values / (values.sum() * spacing), interval=(a, b))


def uniform_density(n_points: int, interval=(0.0, 1.0)) -> Density:
    """Constant density on ``interval`` (strictly positive everywhere)."""
    if n_points < 2:
        raise InvalidInput(f"a density needs at least 2 points, got {n_points}")
    return normalize_density(np.ones(n_points), interval)


def _cumtrapz(values: np.ndarray, spacing: float) -> np.ndarray:
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum((values[1:] + values[:-1]) * (0.5 * spacing), out=out[1:])
    return out


def _collapse_flat_runs(grid: np.ndarray, cdf: np.ndarray):
    """Collapse runs of (near-)equal CDF values to a single knot at the run midpoint.

    Returns strictly increasing CDF knots with their grid locations, suitable
    for monotone linear interpolation of the inverse CDF.
    """
    starts = np.empty(cdf.size, dtype=bool)
    starts[0] = True
    np.greater(np.diff(cdf), FLAT_TOLERANCE, out=starts[1:])
    first = np.flatnonzero(starts)
    last = np.append(first[1:] - 1, cdf.size - 1)
    return cdf[first], 0.5 * (grid[first] + grid[last])


def cdt_forward(source: Density, reference: Density) -> CdtFunction:
    """Transport map pushing ``reference`` onto ``source``.

    The result has one value per reference grid point; it is non-decreasing
    and confined to the source support interval.  The reference must be
    strictly positive so its CDF is invertible.
    """
    if reference.values.min() <= 0.0:
        raise InvalidInput("reference density must be strictly positive everywhere")
    ref_cdf = _cumtrapz(reference.values, reference.spacing)
    src_cdf = _cumtrapz(source.values, source.spacing)
    knots_f, knots_x = _collapse_flat_runs(source.grid, src_cdf)
    values = np.interp(ref_cdf, knots_f, knots_x)
    return CdtFunction(values=values, domain_interval=reference.interval)

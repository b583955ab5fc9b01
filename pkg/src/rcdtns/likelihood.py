"""Distance densities per class and the membership likelihood they induce.

Validation distances of a class are smoothed into a Gaussian-kernel density
estimate.  The likelihood of observing a distance at least as large as ``x``
is one minus the mixture CDF, evaluated in closed form so the tail query has
no quadrature error.  A sample is accepted by its nearest class when that
likelihood clears the confidence threshold alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import InsufficientData, InvalidInput, ModelIncomplete

__all__ = [
    "DistanceDensity",
    "Decision",
    "decide",
    "fit_kde",
    "likelihood",
    "silverman_bandwidth",
]


@dataclass(frozen=True)
class DistanceDensity:
    """Gaussian KDE over one class's validation distances."""

    support_points: np.ndarray
    bandwidth: float
    class_id: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.support_points, dtype=np.float64)
        pts.flags.writeable = False
        object.__setattr__(self, "support_points", pts)

    def pdf(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=np.float64)[..., None] - self.support_points) / self.bandwidth
        return np.exp(-0.5 * z * z).mean(axis=-1) / (self.bandwidth * np.sqrt(2.0 * np.pi))

    def cdf(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=np.float64)[..., None] - self.support_points) / self.bandwidth
        return ndtr(z).mean(axis=-1)


def silverman_bandwidth(distances: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(std, IQR/1.34) * n^(-1/5), floored.

    The floor 1e-6 * (range + 1e-12) keeps degenerate (zero-spread) inputs
    usable: they collapse to a narrow spike instead of failing.
    """
    n = distances.size
    spread = float(np.ptp(distances))
    floor = 1e-6 * (spread + 1e-12)
    sigma = float(np.std(distances, ddof=1))
    q75, q25 = np.percentile(distances, [75.0, 25.0])
    iqr = float(q75 - q25)
    h = 0.9 * min(sigma, iqr / 1.34) * n ** (-0.2)
    return max(h, floor)


def fit_kde(distances, bandwidth: float | None = None, class_id: str | None = None) -> DistanceDensity:
    """Fit the Gaussian-kernel density of a class's validation distances."""
    pts = np.asarray(distances, dtype=np.float64).ravel()
    if pts.size < 2 or not np.all(np.isfinite(pts)):
        raise InsufficientData(
            f"need >= 2 finite distances to fit a density, got {pts.size}",
            class_label=class_id,
        )
    if pts.min() < 0.0:
        raise InvalidInput("distances must be nonnegative")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(pts)
    elif bandwidth <= 0.0:
        raise InvalidInput(f"bandwidth must be positive, got {bandwidth}")
    return DistanceDensity(support_points=pts, bandwidth=float(bandwidth), class_id=class_id)


def likelihood(density: DistanceDensity, x) -> float | np.ndarray:
    """Probability of a distance at least ``x``: 1 - CDF(x), clamped to [0, 1]."""
    value = np.clip(1.0 - density.cdf(x), 0.0, 1.0)
    return float(value) if np.isscalar(x) or np.ndim(x) == 0 else value


@dataclass(frozen=True)
class Decision:
    """Accept the nearest class, or reject the sample as out of distribution."""

    accepted: bool
    class_id: str | None
    likelihood: float


def decide(nearest_class: str, nearest_distance: float, densities, alpha: float) -> Decision:
    """Gate the nearest-subspace assignment by its distance likelihood.

    Accepts when the likelihood is at least ``alpha`` (boundary inclusive),
    rejects otherwise.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInput(f"alpha must be in (0, 1), got {alpha}")
    density = densities.get(nearest_class)
    if density is None:
        raise ModelIncomplete(f"no fitted distance density for class {nearest_class!r}")
    value = likelihood(density, float(nearest_distance))
    if value >= alpha:
        return Decision(accepted=True, class_id=nearest_class, likelihood=value)
    return Decision(accepted=False, class_id=None, likelihood=value)

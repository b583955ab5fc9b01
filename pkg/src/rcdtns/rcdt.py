"""Full image transform: Radon projection followed by a per-angle CDT.

Every projection row is normalized to a density on the offset interval and
transported from a shared uniform reference on [0, 1].  The per-angle maps are
stacked angle-major into one flat vector.  Vectors are only comparable when
their configuration fingerprints match.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .cdt import Density, cdt_forward, normalize_density, uniform_density
from .errors import InvalidInput
from .radon import (
    DEFAULT_N_ANGLES,
    DEFAULT_SUPERSAMPLE,
    AngleGrid,
    diagonal_extent,
    offset_grid,
    radon_forward_batch,
    validate_image,
)

REFERENCE_ID = "uniform01"

__all__ = [
    "RcdtVector",
    "ResolvedTransform",
    "TransformConfig",
    "rcdt_forward",
    "rcdt_forward_batch",
]


@dataclass(frozen=True)
class TransformConfig:
    """User-facing transform parameters; ``None`` fields resolve per image shape."""

    n_angles: int = DEFAULT_N_ANGLES
    n_offsets: int | None = None  # default: ceil of the image diagonal
    cdt_points: int | None = None  # default: n_offsets
    supersample: int = DEFAULT_SUPERSAMPLE

    def resolve(self, image_shape) -> "ResolvedTransform":
        if self.n_angles < 1:
            raise InvalidInput(f"n_angles must be >= 1, got {self.n_angles}")
        n_offsets = self.n_offsets if self.n_offsets is not None else diagonal_extent(image_shape)
        if n_offsets < 2:
            raise InvalidInput(f"n_offsets must be >= 2, got {n_offsets}")
        cdt_points = self.cdt_points if self.cdt_points is not None else n_offsets
        if cdt_points < 2:
            raise InvalidInput(f"cdt_points must be >= 2, got {cdt_points}")
        return ResolvedTransform(
            n_angles=self.n_angles,
            n_offsets=n_offsets,
            cdt_points=cdt_points,
            supersample=self.supersample,
        )


@dataclass(frozen=True)
class ResolvedTransform:
    """Concrete discretization; two vectors interoperate iff fingerprints match."""

    n_angles: int
    n_offsets: int
    cdt_points: int
    supersample: int = DEFAULT_SUPERSAMPLE
    reference: str = REFERENCE_ID

    @property
    def fingerprint(self) -> str:
        key = f"{self.n_angles}:{self.cdt_points}:{self.n_offsets}:{self.reference}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    @property
    def dimension(self) -> int:
        return self.n_angles * self.cdt_points


@dataclass(frozen=True)
class RcdtVector:
    """Flat transform vector: ``n_angles`` blocks of ``n_points`` CDT values."""

    values: np.ndarray
    n_angles: int
    n_points: int
    fingerprint: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size != self.n_angles * self.n_points:
            raise InvalidInput(
                f"vector length {values.size} != n_angles*n_points "
                f"({self.n_angles}*{self.n_points})"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def blocks(self) -> np.ndarray:
        """View as (n_angles, n_points)."""
        return self.values.reshape(self.n_angles, self.n_points)


def _sinogram_to_cdt_rows(sino: np.ndarray, offsets, reference: Density) -> np.ndarray:
    """Per-angle CDT of one sinogram, stacked as rows."""
    interval = (float(offsets[0]), float(offsets[-1]))
    out = np.empty((sino.shape[0], reference.values.size))
    for i, row in enumerate(sino):
        density = normalize_density(row, interval)
        out[i] = cdt_forward(density, reference).values
    return out


def rcdt_forward(image, config: TransformConfig | ResolvedTransform = TransformConfig()) -> RcdtVector:
    """Transform one image into its stacked per-angle transport representation."""
    pixels = validate_image(image)
    resolved = config.resolve(pixels.shape) if isinstance(config, TransformConfig) else config
    values = rcdt_forward_batch(pixels[None, :, :], resolved)[0]
    return RcdtVector(
        values=values,
        n_angles=resolved.n_angles,
        n_points=resolved.cdt_points,
        fingerprint=resolved.fingerprint,
    )


def rcdt_forward_batch(images: np.ndarray, config: ResolvedTransform) -> np.ndarray:
    """Transform a stack of validated same-shape images; returns (B, dimension).

    Deterministic and order-independent: each sample's vector depends only on
    that sample and the configuration.
    """
    images = np.asarray(images, dtype=np.float64)
    grid = AngleGrid.uniform(config.n_angles)
    sinos = radon_forward_batch(images, grid, config.n_offsets, config.supersample)
    offsets = offset_grid(images.shape[1:], config.n_offsets)
    reference = uniform_density(config.cdt_points)
    out = np.empty((images.shape[0], config.dimension))
    for b in range(images.shape[0]):
        out[b] = _sinogram_to_cdt_rows(sinos[b], offsets, reference).ravel()
    return out

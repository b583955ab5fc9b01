"""Per-class linear subspaces of transform vectors and distances to them.

A class is modeled by the span of its training vectors.  The basis comes from
an SVD of the stacked sample matrix with a relative singular-value cutoff, and
the distance of a vector to the subspace is the norm of its projection
residual, which is the transform-space transport distance minimized by the
classifier.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigMismatch, InvalidInput
from .rcdt import RcdtVector

DEFAULT_RANK_TOLERANCE = 1e-4

__all__ = [
    "SubspaceBasis",
    "distance_to_subspace",
    "fit_subspace",
    "fit_subspace_matrix",
    "residual_norms",
]


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis (columns) of one class's sample span."""

    basis: np.ndarray  # (dimension, rank)
    singular_values: np.ndarray  # (rank,)
    fingerprint: str

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=np.float64)
        sv = np.asarray(self.singular_values, dtype=np.float64)
        basis.flags.writeable = False
        sv.flags.writeable = False
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "singular_values", sv)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]


def fit_subspace_matrix(
    matrix: np.ndarray,
    fingerprint: str,
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
    rank_cap: int | None = None,
) -> SubspaceBasis:
    """Fit a basis from a (dimension, n_samples) matrix of stacked vectors."""
    if not 0.0 < rank_tolerance < 1.0:
        raise InvalidInput(f"rank_tolerance must be in (0, 1), got {rank_tolerance}")
    u, s, _ = np.linalg.svd(matrix, full_matrices=False)
    keep = s >= rank_tolerance * s[0] if s[0] > 0.0 else s > 0.0
    rank = int(keep.sum())
    if rank < 1:
        raise InvalidInput("all samples are zero vectors; no subspace to fit")
    if rank_cap is not None:
        rank = min(rank, int(rank_cap))
    return SubspaceBasis(
        basis=np.ascontiguousarray(u[:, :rank]),
        singular_values=s[:rank].copy(),
        fingerprint=fingerprint,
    )


def fit_subspace(
    samples: Sequence[RcdtVector],
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE,
    rank_cap: int | None = None,
) -> SubspaceBasis:
    """Orthonormal basis spanning the sample vectors.

    Directions whose singular value falls below ``rank_tolerance`` times the
    largest one are discarded.  All samples must carry the same fingerprint.
    """
    if len(samples) == 0:
        raise InvalidInput("cannot fit a subspace from an empty sample list")
    fingerprint = samples[0].fingerprint
    for v in samples[1:]:
        if v.fingerprint != fingerprint:
            raise ConfigMismatch(
                f"mixed transform fingerprints: {v.fingerprint} != {fingerprint}"
            )
    matrix = np.stack([v.values for v in samples], axis=1)
    return fit_subspace_matrix(matrix, fingerprint, rank_tolerance, rank_cap)


def residual_norms(matrix: np.ndarray, basis: SubspaceBasis) -> np.ndarray:
    """Projection residual norms for stacked vectors (dimension, n) without checks."""
    coeff = basis.basis.T @ matrix
    return np.linalg.norm(matrix - basis.basis @ coeff, axis=0)


def distance_to_subspace(v: RcdtVector, basis: SubspaceBasis) -> float:
    """Euclidean distance from ``v`` to its orthogonal projection on the subspace."""
    if v.fingerprint != basis.fingerprint:
        raise ConfigMismatch(
            f"vector fingerprint {v.fingerprint} does not match basis "
            f"fingerprint {basis.fingerprint}"
        )
    return float(residual_norms(v.values[:, None], basis)[0])

"""Run configuration schema shared by the CLI and the HTTP service.

A run config is a single JSON document; unknown keys are rejected everywhere.
CLI flags override the corresponding config fields.
"""

from __future__ import annotations

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import InvalidInput


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class TransformSection(StrictModel):
    """Discretization of the image transform."""

    n_angles: int = Field(default=180, ge=1)
    n_offsets: int | None = Field(default=None, ge=2)
    cdt_points: int | None = Field(default=None, ge=2)
    supersample: int = Field(default=8, ge=1)


class TrainSection(StrictModel):
    """Subspace and density-fitting hyperparameters."""

    rank_tolerance: float = Field(default=1e-4, gt=0.0, lt=1.0)
    rank_cap: int | None = Field(default=None, ge=1)
    validation_fraction: float = Field(default=0.2, gt=0.0, le=0.5)
    bandwidth: float | None = Field(default=None, gt=0.0)


class GenerateSection(StrictModel):
    """Synthetic dataset parameters."""

    size: int = Field(default=64, ge=8)
    templates: list[str] = Field(default_factory=lambda: ["gaussian", "ring", "cross"])
    ood_templates: list[str] = Field(default_factory=list)
    count_per_class: int = Field(default=100, ge=0)
    translate: tuple[float, float] = (6.0, 6.0)
    scale: tuple[float, float] = (0.8, 1.2)
    shear: tuple[float, float] = (0.0, 0.0)

    @field_validator("translate")
    @classmethod
    def _translate_nonnegative(cls, v):
        if v[0] < 0.0 or v[1] < 0.0:
            raise ValueError(f"translate caps must be nonnegative, got {v}")
        return v

    @field_validator("scale")
    @classmethod
    def _scale_positive(cls, v):
        if v[0] <= 0.0 or v[1] < v[0]:
            raise ValueError(f"scale range must satisfy 0 < lo <= hi, got {v}")
        return v

    @field_validator("shear")
    @classmethod
    def _shear_ordered(cls, v):
        if v[1] < v[0]:
            raise ValueError(f"shear range must satisfy lo <= hi, got {v}")
        return v


class DatasetRef(StrictModel):
    """Points at a dataset: either a manifest or an IDX image/label pair."""

    manifest: str | None = None
    idx_images: str | None = None
    idx_labels: str | None = None

    @model_validator(mode="after")
    def _exactly_one_source(self):
        has_manifest = self.manifest is not None
        has_idx = self.idx_images is not None or self.idx_labels is not None
        if has_manifest == has_idx:
            raise ValueError("provide either 'manifest' or the 'idx_images'/'idx_labels' pair")
        if has_idx and (self.idx_images is None or self.idx_labels is None):
            raise ValueError("'idx_images' and 'idx_labels' must be given together")
        return self


class PathsSection(StrictModel):
    """Optional default input/output locations (CLI flags win)."""

    train_data: DatasetRef | None = None
    test_data: DatasetRef | None = None
    model: str | None = None
    out: str | None = None


def _validate_alphas(alphas):
    for alpha in alphas:
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    return alphas


class RunConfig(StrictModel):
    """Top-level run configuration document."""

    transform: TransformSection = Field(default_factory=TransformSection)
    train: TrainSection = Field(default_factory=TrainSection)
    generate: GenerateSection = Field(default_factory=GenerateSection)
    paths: PathsSection = Field(default_factory=PathsSection)
    alphas: list[float] = Field(default_factory=lambda: [0.0, 0.01, 0.05, 0.10])
    seed: int = 0

    _check_alphas = field_validator("alphas")(_validate_alphas)


def load_run_config(path) -> RunConfig:
    """Parse a JSON run config file; malformed content raises InvalidInput."""
    path = Path(path)
    if not path.exists():
        raise InvalidInput(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: invalid JSON ({exc})") from exc
    try:
        return RunConfig.model_validate(payload)
    except Exception as exc:
        raise InvalidInput(f"{path}: {exc}") from exc

"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import Field, model_validator

from ..runconfig import (
    DatasetRef,
    GenerateSection,
    StrictModel,
    TrainSection,
    TransformSection,
)


class HealthResponse(StrictModel):
    status: str
    version: str


class GenerateRequest(StrictModel):
    out_dir: str
    generate: GenerateSection = Field(default_factory=GenerateSection)
    seed: int = 0


class GenerateResponse(StrictModel):
    manifest_path: str
    n_samples: int
    label_counts: dict[str, int]


class TrainRequest(StrictModel):
    data: DatasetRef
    model_path: str
    transform: TransformSection = Field(default_factory=TransformSection)
    train: TrainSection = Field(default_factory=TrainSection)
    seed: int = 0


class ClassSummaryModel(StrictModel):
    label: str
    n_fit: int
    n_validation: int
    rank: int
    distance_quantiles: dict[str, float]


class TrainResponse(StrictModel):
    model_path: str
    classes: list[ClassSummaryModel]
    fingerprint: str
    dimension: int


class PredictRequest(StrictModel):
    model_path: str
    image_path: str | None = None
    pixels: list[list[float]] | None = None
    alpha: float = Field(default=0.0, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def _exactly_one_image(self):
        if (self.image_path is None) == (self.pixels is None):
            raise ValueError("provide exactly one of 'image_path' or 'pixels'")
        return self


class PredictResponse(StrictModel):
    nearest_class: str
    distances: dict[str, float]
    likelihood: float
    decision: str
    accepted_class: str | None


class EvaluateRequest(StrictModel):
    data: DatasetRef
    model_path: str
    alphas: list[float] = Field(default_factory=lambda: [0.0, 0.01, 0.05, 0.10])
    out_dir: str | None = None

    @model_validator(mode="after")
    def _alphas_in_range(self):
        for alpha in self.alphas:
            if not 0.0 <= alpha < 1.0:
                raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        if not self.alphas:
            raise ValueError("alphas must not be empty")
        return self


class EvaluationRunModel(StrictModel):
    alpha: float
    n_samples: int
    accuracy_percent: float
    per_class_accuracy: dict[str, float]
    confusion: dict[str, dict[str, int]]
    n_rejected: int


class EvaluateResponse(StrictModel):
    runs: list[EvaluationRunModel]
    report_path: str | None = None
    samples_csv: str | None = None
    curves_csv: str | None = None

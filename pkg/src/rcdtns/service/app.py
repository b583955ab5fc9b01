"""FastAPI service wrapping the classifier package.

Endpoints mirror the pipeline stages: dataset generation, training,
single-image prediction, and evaluation.  Requests reference datasets and
models by path on the service host; the CLI drives this same API in process.

Error mapping: precondition and format problems return 400 (client error),
runtime failures such as exhausted generation redraws return 500.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..classifier import TrainConfig, evaluate_multi, load_model, predict, save_model, train
from ..data import (
    DeformationSpec,
    default_templates,
    generate_synthetic,
    load_dataset,
    read_pgm,
    write_dataset,
)
from ..errors import (
    ConfigMismatch,
    FormatError,
    GenerationFailed,
    InsufficientData,
    InvalidInput,
    ModelIncomplete,
    RcdtError,
)
from ..rcdt import TransformConfig
from ..reporting import write_evaluation_outputs
from . import schemas

CLIENT_ERRORS = (InvalidInput, FormatError, InsufficientData, ModelIncomplete, ConfigMismatch)

# small model cache so repeated predictions avoid re-reading the file
_MODEL_CACHE: dict = {}
_MODEL_CACHE_LOCK = threading.Lock()
_MODEL_CACHE_LIMIT = 4


def _cached_model(path: str):
    p = Path(path)
    if not p.exists():
        raise FormatError(f"{p}: model file not found")
    stat = p.stat()
    key = (str(p.resolve()), stat.st_mtime_ns, stat.st_size)
    with _MODEL_CACHE_LOCK:
        model = _MODEL_CACHE.get(key)
    if model is None:
        model = load_model(p)
        with _MODEL_CACHE_LOCK:
            if len(_MODEL_CACHE) >= _MODEL_CACHE_LIMIT:
                _MODEL_CACHE.pop(next(iter(_MODEL_CACHE)))
            _MODEL_CACHE[key] = model
    return model


def _transform_config(section: "schemas.TransformSection") -> TransformConfig:
    return TransformConfig(
        n_angles=section.n_angles,
        n_offsets=section.n_offsets,
        cdt_points=section.cdt_points,
        supersample=section.supersample,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="rcdtns", version=__version__)

    @app.exception_handler(RcdtError)
    async def _rcdt_error(request: Request, exc: RcdtError):
        if isinstance(exc, CLIENT_ERRORS):
            return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "config"})
        return JSONResponse(status_code=500, content={"detail": str(exc), "kind": "runtime"})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/datasets/generate", response_model=schemas.GenerateResponse)
    def generate(request: schemas.GenerateRequest):
        cfg = request.generate
        templates = default_templates(cfg.size, cfg.templates + cfg.ood_templates)
        spec = DeformationSpec(
            translate=cfg.translate,
            scale=cfg.scale,
            shear=cfg.shear,
            count=cfg.count_per_class,
            seed=request.seed,
        )
        dataset = generate_synthetic(templates, spec, ood_names=cfg.ood_templates)
        manifest = write_dataset(dataset, request.out_dir)
        counts: dict[str, int] = {}
        for label in dataset.labels:
            counts[label] = counts.get(label, 0) + 1
        return schemas.GenerateResponse(
            manifest_path=str(manifest), n_samples=len(dataset), label_counts=counts
        )

    @app.post("/models/train", response_model=schemas.TrainResponse)
    def train_endpoint(request: schemas.TrainRequest):
        dataset = load_dataset(
            images=request.data.idx_images,
            labels=request.data.idx_labels,
            manifest=request.data.manifest,
        )
        config = TrainConfig(
            transform=_transform_config(request.transform),
            rank_tolerance=request.train.rank_tolerance,
            rank_cap=request.train.rank_cap,
            validation_fraction=request.train.validation_fraction,
            bandwidth=request.train.bandwidth,
            seed=request.seed,
        )
        model = train(dataset, config)
        Path(request.model_path).parent.mkdir(parents=True, exist_ok=True)
        save_model(model, request.model_path)
        return schemas.TrainResponse(
            model_path=request.model_path,
            classes=[
                schemas.ClassSummaryModel(
                    label=s.label,
                    n_fit=s.n_fit,
                    n_validation=s.n_validation,
                    rank=s.rank,
                    distance_quantiles=s.distance_quantiles,
                )
                for s in model.summaries
            ],
            fingerprint=model.transform.fingerprint,
            dimension=model.transform.dimension,
        )

    @app.post("/models/predict", response_model=schemas.PredictResponse)
    def predict_endpoint(request: schemas.PredictRequest):
        model = _cached_model(request.model_path)
        if request.image_path is not None:
            image = read_pgm(request.image_path)
        else:
            image = np.asarray(request.pixels, dtype=np.float64)
        result = predict(model, image, alpha=request.alpha)
        return schemas.PredictResponse(
            nearest_class=result.nearest_class,
            distances=result.distances,
            likelihood=result.likelihood,
            decision=result.decision,
            accepted_class=result.accepted_class,
        )

    @app.post("/models/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_endpoint(request: schemas.EvaluateRequest):
        model = _cached_model(request.model_path)
        dataset = load_dataset(
            images=request.data.idx_images,
            labels=request.data.idx_labels,
            manifest=request.data.manifest,
        )
        reports = evaluate_multi(model, dataset, request.alphas)
        paths = {}
        if request.out_dir is not None:
            paths = write_evaluation_outputs(reports, model, request.out_dir)
        return schemas.EvaluateResponse(
            runs=[
                schemas.EvaluationRunModel(
                    alpha=r.alpha,
                    n_samples=r.n_samples,
                    accuracy_percent=r.accuracy_percent,
                    per_class_accuracy=r.per_class_accuracy,
                    confusion=r.confusion,
                    n_rejected=r.n_rejected,
                )
                for r in reports
            ],
            report_path=paths.get("report"),
            samples_csv=paths.get("samples_csv"),
            curves_csv=paths.get("curves_csv"),
        )

    return app


app = create_app()

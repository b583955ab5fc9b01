"""End-to-end training, prediction, and evaluation.

Training fits one subspace and one distance density per class: samples are
split per class into a fit part (spanning the subspace) and a validation part
(whose distances to the fitted subspace feed the density).  Prediction assigns
the nearest subspace and, for alpha > 0, gates the assignment by the distance
likelihood of that class.  On mixed test sets a rejection counts as correct
exactly when the sample is out of class.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import OOD_LABEL, LabeledDataset
from .errors import FormatError, InsufficientData, InvalidInput, ModelIncomplete
from .likelihood import DistanceDensity, decide, fit_kde, likelihood
from .rcdt import RcdtVector, ResolvedTransform, TransformConfig, rcdt_forward_batch
from .radon import validate_image
from .subspace import (
    DEFAULT_RANK_TOLERANCE,
    SubspaceBasis,
    fit_subspace_matrix,
    residual_norms,
)

REJECT_LABEL = "__reject__"
MODEL_MAGIC = b"RCDTNS1\n"
MODEL_FORMAT_VERSION = 1

# transform batch size; bounds the (dimension x chunk) temporaries
TRANSFORM_CHUNK = 512

__all__ = [
    "REJECT_LABEL",
    "ClassSummary",
    "ClassifierModel",
    "EvaluationReport",
    "Prediction",
    "TrainConfig",
    "evaluate",
    "evaluate_multi",
    "load_model",
    "predict",
    "save_model",
    "train",
]


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults follow the library-wide conventions."""

    transform: TransformConfig = field(default_factory=TransformConfig)
    rank_tolerance: float = DEFAULT_RANK_TOLERANCE
    rank_cap: int | None = None
    validation_fraction: float = 0.2
    bandwidth: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.validation_fraction <= 0.5:
            raise InvalidInput(
                f"validation_fraction must be in (0, 0.5], got {self.validation_fraction}"
            )


@dataclass(frozen=True)
class ClassSummary:
    """Per-class training diagnostics."""

    label: str
    n_fit: int
    n_validation: int
    rank: int
    distance_quantiles: dict[str, float]


@dataclass
class ClassifierModel:
    """Trained per-class subspaces and distance densities plus the transform."""

    transform: ResolvedTransform
    image_shape: tuple[int, int]
    class_labels: list[str]
    bases: dict[str, SubspaceBasis]
    densities: dict[str, DistanceDensity]
    summaries: list[ClassSummary] = field(default_factory=list)
    format_version: int = MODEL_FORMAT_VERSION

    def __post_init__(self):
        for label in self.class_labels:
            if label not in self.bases or label not in self.densities:
                raise ModelIncomplete(f"class {label!r} is missing a basis or density")
        fingerprints = {b.fingerprint for b in self.bases.values()}
        if len(fingerprints) > 1:
            raise ModelIncomplete(f"mixed fingerprints across classes: {fingerprints}")


@dataclass(frozen=True)
class Prediction:
    """Outcome of classifying one image."""

    nearest_class: str
    distances: dict[str, float]
    likelihood: float
    decision: str  # "accept" | "reject"
    accepted_class: str | None


@dataclass
class EvaluationReport:
    """Accuracy, confusion counts, and per-sample records for one alpha."""

    alpha: float
    n_samples: int
    accuracy_percent: float
    per_class_accuracy: dict[str, float]
    confusion: dict[str, dict[str, int]]
    class_labels: list[str]
    n_rejected: int
    per_sample: list[dict]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n_samples": self.n_samples,
            "accuracy_percent": self.accuracy_percent,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion,
            "class_labels": self.class_labels,
            "n_rejected": self.n_rejected,
            "per_sample": self.per_sample,
        }


def _transform_dataset(images: np.ndarray, transform: ResolvedTransform) -> np.ndarray:
    """Stack transform vectors as columns, chunked to bound memory."""
    n = images.shape[0]
    out = np.empty((transform.dimension, n))
    for start in range(0, n, TRANSFORM_CHUNK):
        stop = min(start + TRANSFORM_CHUNK, n)
        out[:, start:stop] = rcdt_forward_batch(images[start:stop], transform).T
    return out


def train(train_set: LabeledDataset, config: TrainConfig = TrainConfig()) -> ClassifierModel:
    """Fit per-class subspaces and distance densities.

    Deterministic given ``config.seed``: the per-class fit/validation split
    uses a stream seeded by (seed, class index).
    """
    if len(train_set) == 0:
        raise InvalidInput("training set is empty")
    if OOD_LABEL in train_set.labels:
        raise InvalidInput(f"training set must not contain {OOD_LABEL!r} samples")
    for i in range(len(train_set)):
        validate_image(train_set.images[i])
    labels = train_set.class_labels()
    transform = config.transform.resolve(train_set.images.shape[1:])

    bases: dict[str, SubspaceBasis] = {}
    densities: dict[str, DistanceDensity] = {}
    summaries: list[ClassSummary] = []
    label_arr = np.asarray(train_set.labels)
    for k, label in enumerate(labels):
        idx = np.flatnonzero(label_arr == label)
        if idx.size < 2:
            raise InsufficientData(
                f"class {label!r} has {idx.size} sample(s); need at least 2",
                class_label=label,
            )
        n_val = int(round(config.validation_fraction * idx.size))
        if n_val < 2:
            raise InsufficientData(
                f"class {label!r} yields {n_val} validation sample(s); need at least 2 "
                f"(have {idx.size} samples at validation_fraction="
                f"{config.validation_fraction})",
                class_label=label,
            )
        rng = np.random.default_rng([config.seed, k])
        perm = rng.permutation(idx.size)
        val_idx = idx[perm[:n_val]]
        fit_idx = idx[perm[n_val:]]

        fit_vectors = _transform_dataset(train_set.images[fit_idx], transform)
        basis = fit_subspace_matrix(
            fit_vectors, transform.fingerprint, config.rank_tolerance, config.rank_cap
        )
        val_vectors = _transform_dataset(train_set.images[val_idx], transform)
        distances = residual_norms(val_vectors, basis)
        density = fit_kde(distances, bandwidth=config.bandwidth, class_id=label)

        bases[label] = basis
        densities[label] = density
        quantiles = np.percentile(distances, [0, 25, 50, 75, 100])
        summaries.append(
            ClassSummary(
                label=label,
                n_fit=int(fit_idx.size),
                n_validation=int(val_idx.size),
                rank=basis.rank,
                distance_quantiles={
                    "min": float(quantiles[0]),
                    "q25": float(quantiles[1]),
                    "median": float(quantiles[2]),
                    "q75": float(quantiles[3]),
                    "max": float(quantiles[4]),
                },
            )
        )
    return ClassifierModel(
        transform=transform,
        image_shape=tuple(train_set.images.shape[1:]),
        class_labels=labels,
        bases=bases,
        densities=densities,
        summaries=summaries,
    )


def _predict_matrix(model: ClassifierModel, vectors: np.ndarray, alpha: float):
    """Distances (n_classes, n), nearest index, likelihoods, accept flags."""
    n = vectors.shape[1]
    dist = np.empty((len(model.class_labels), n))
    for k, label in enumerate(model.class_labels):
        dist[k] = residual_norms(vectors, model.bases[label])
    nearest = np.argmin(dist, axis=0)  # ties: lowest class index
    like = np.empty(n)
    for k, label in enumerate(model.class_labels):
        mask = nearest == k
        if np.any(mask):
            like[mask] = np.atleast_1d(
                likelihood(model.densities[label], dist[k, mask])
            )
    accepted = np.ones(n, dtype=bool) if alpha == 0.0 else like >= alpha
    return dist, nearest, like, accepted


def predict(model: ClassifierModel, image, alpha: float = 0.0) -> Prediction:
    """Classify one image; ``alpha = 0`` disables rejection entirely."""
    if not 0.0 <= alpha < 1.0:
        raise InvalidInput(f"alpha must be in [0, 1), got {alpha}")
    pixels = validate_image(image)
    vec = _transform_dataset(pixels[None, :, :], model.transform)
    dist, nearest, like, _ = _predict_matrix(model, vec, alpha)
    nearest_label = model.class_labels[int(nearest[0])]
    if alpha == 0.0:
        accepted, value = True, float(like[0])
    else:
        outcome = decide(
            nearest_label, float(dist[int(nearest[0]), 0]), model.densities, alpha
        )
        accepted, value = outcome.accepted, outcome.likelihood
    return Prediction(
        nearest_class=nearest_label,
        distances={
            label: float(dist[k, 0]) for k, label in enumerate(model.class_labels)
        },
        likelihood=value,
        decision="accept" if accepted else "reject",
        accepted_class=nearest_label if accepted else None,
    )


def _compile_report(
    model: ClassifierModel,
    true_labels: list[str],
    dist: np.ndarray,
    nearest: np.ndarray,
    like: np.ndarray,
    accepted: np.ndarray,
    alpha: float,
) -> EvaluationReport:
    labels = model.class_labels
    row_labels = sorted(set(true_labels))
    confusion = {row: {col: 0 for col in labels + [REJECT_LABEL]} for row in row_labels}
    per_sample = []
    n_correct = 0
    for i, true in enumerate(true_labels):
        pred = labels[int(nearest[i])]
        col = pred if accepted[i] else REJECT_LABEL
        confusion[true][col] += 1
        correct = (accepted[i] and pred == true) or (not accepted[i] and true == OOD_LABEL)
        n_correct += int(correct)
        per_sample.append(
            {
                "index": i,
                "true_label": true,
                "nearest_class": pred,
                "distance": float(dist[int(nearest[i]), i]),
                "likelihood": float(like[i]),
                "decision": "accept" if accepted[i] else "reject",
            }
        )
    per_class = {}
    for row in row_labels:
        total = sum(confusion[row].values())
        good = confusion[row][REJECT_LABEL] if row == OOD_LABEL else confusion[row].get(row, 0)
        per_class[row] = 100.0 * good / total if total else 0.0
    return EvaluationReport(
        alpha=alpha,
        n_samples=len(true_labels),
        accuracy_percent=100.0 * n_correct / len(true_labels),
        per_class_accuracy=per_class,
        confusion=confusion,
        class_labels=labels,
        n_rejected=int(len(true_labels) - accepted.sum()),
        per_sample=per_sample,
    )


def evaluate_multi(
    model: ClassifierModel, test_set: LabeledDataset, alphas
) -> list[EvaluationReport]:
    """Evaluate several alphas while transforming the test set only once."""
    if len(test_set) == 0:
        raise InvalidInput("test set is empty")
    for alpha in alphas:
        if not 0.0 <= alpha < 1.0:
            raise InvalidInput(f"alpha must be in [0, 1), got {alpha}")
    for label in set(test_set.labels) - {OOD_LABEL}:
        if label not in model.bases:
            raise InvalidInput(f"test label {label!r} unknown to the model")
    for i in range(len(test_set)):
        validate_image(test_set.images[i])
    vectors = _transform_dataset(test_set.images, model.transform)
    dist, nearest, like, _ = _predict_matrix(model, vectors, 0.0)
    reports = []
    for alpha in alphas:
        accepted = np.ones(len(test_set), dtype=bool) if alpha == 0.0 else like >= alpha
        reports.append(
            _compile_report(model, test_set.labels, dist, nearest, like, accepted, alpha)
        )
    return reports


def evaluate(model: ClassifierModel, test_set: LabeledDataset, alpha: float = 0.0) -> EvaluationReport:
    """Evaluate on a test set that may contain out-of-class samples."""
    return evaluate_multi(model, test_set, [alpha])[0]


# ---------------------------------------------------------------------------
# Model file format (documented in README.md)
# ---------------------------------------------------------------------------
# magic "RCDTNS1\n" | uint64-LE header length | header JSON | raw array blob.
# The header lists every array's name, shape, and byte offset into the blob;
# arrays are float64 little-endian, C order.  Serialization is deterministic:
# identical models produce identical bytes.


def save_model(model: ClassifierModel, path) -> Path:
    path = Path(path)
    arrays: list[tuple[str, np.ndarray]] = []
    for label in model.class_labels:
        basis = model.bases[label]
        density = model.densities[label]
        arrays.append((f"basis/{label}", basis.basis))
        arrays.append((f"singular_values/{label}", basis.singular_values))
        arrays.append((f"kde_points/{label}", density.support_points))
    blob = io.BytesIO()
    entries = []
    for name, arr in arrays:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": blob.tell()})
        blob.write(data)
    header = {
        "format_version": model.format_version,
        "transform": {
            "n_angles": model.transform.n_angles,
            "n_offsets": model.transform.n_offsets,
            "cdt_points": model.transform.cdt_points,
            "supersample": model.transform.supersample,
            "reference": model.transform.reference,
        },
        "image_shape": list(model.image_shape),
        "class_labels": model.class_labels,
        "bandwidths": {
            label: model.densities[label].bandwidth for label in model.class_labels
        },
        "summaries": [
            {
                "label": s.label,
                "n_fit": s.n_fit,
                "n_validation": s.n_validation,
                "rank": s.rank,
                "distance_quantiles": s.distance_quantiles,
            }
            for s in model.summaries
        ],
        "arrays": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        f.write(blob.getvalue())
    return path


def load_model(path) -> ClassifierModel:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise FormatError(f"{path}: not a classifier model file")
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len))
        blob = f.read()
    if header["format_version"] != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported format version {header['format_version']}"
        )
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=start)
        if data.size != count:
            raise FormatError(f"{path}: truncated array {entry['name']!r}")
        arrays[entry["name"]] = data.reshape(shape).copy()
    transform = ResolvedTransform(
        n_angles=header["transform"]["n_angles"],
        n_offsets=header["transform"]["n_offsets"],
        cdt_points=header["transform"]["cdt_points"],
        supersample=header["transform"]["supersample"],
        reference=header["transform"]["reference"],
    )
    bases, densities = {}, {}
    for label in header["class_labels"]:
        try:
            bases[label] = SubspaceBasis(
                basis=arrays[f"basis/{label}"],
                singular_values=arrays[f"singular_values/{label}"],
                fingerprint=transform.fingerprint,
            )
            densities[label] = fit_kde(
                arrays[f"kde_points/{label}"],
                bandwidth=header["bandwidths"][label],
                class_id=label,
            )
        except KeyError as exc:
            raise FormatError(f"{path}: missing array for class {label!r}") from exc
    summaries = [
        ClassSummary(
            label=s["label"],
            n_fit=s["n_fit"],
            n_validation=s["n_validation"],
            rank=s["rank"],
            distance_quantiles=s["distance_quantiles"],
        )
        for s in header.get("summaries", [])
    ]
    return ClassifierModel(
        transform=transform,
        image_shape=tuple(header["image_shape"]),
        class_labels=list(header["class_labels"]),
        bases=bases,
        densities=densities,
        summaries=summaries,
        format_version=header["format_version"],
    )

"""Nearest-subspace image classification in Radon-CDT space with
distance-likelihood rejection of samples from unfamiliar classes."""

from .classifier import (
    ClassifierModel,
    EvaluationReport,
    Prediction,
    TrainConfig,
    evaluate,
    evaluate_multi,
    load_model,
    predict,
    save_model,
    train,
)
from .cdt import CdtFunction, Density, cdt_forward, normalize_density, uniform_density
from .data import (
    OOD_LABEL,
    DeformationSpec,
    LabeledDataset,
    Template,
    default_templates,
    generate_synthetic,
    load_directory,
    load_idx,
    write_dataset,
)
from .errors import (
    ConfigMismatch,
    FormatError,
    GenerationFailed,
    InsufficientData,
    InvalidInput,
    ModelIncomplete,
    RcdtError,
)
from .likelihood import Decision, DistanceDensity, decide, fit_kde, likelihood
from .radon import AngleGrid, Sinogram, radon_forward
from .rcdt import RcdtVector, ResolvedTransform, TransformConfig, rcdt_forward
from .subspace import SubspaceBasis, distance_to_subspace, fit_subspace

__version__ = "0.1.0"

"""Deterministic report emission: JSON report plus plot-ready CSVs.

Outputs are byte-stable under fixed seeds: no timestamps, no absolute paths,
sorted JSON keys, canonical sample ordering.  The likelihood-curve CSV samples
every class's likelihood function on a shared distance grid so the
distance/likelihood figures can be regenerated without rerunning the model.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .classifier import ClassifierModel, EvaluationReport
from .likelihood import likelihood

REPORT_VERSION = 1
CURVE_POINTS = 200

__all__ = ["likelihood_curves", "write_evaluation_outputs", "write_json"]


def write_json(payload: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def likelihood_curves(model: ClassifierModel, n_points: int = CURVE_POINTS):
    """Per-class likelihood samples on a shared distance grid."""
    top = max(
        float(model.densities[label].support_points.max())
        for label in model.class_labels
    )
    grid = np.linspace(0.0, 1.2 * top, n_points)
    return grid, {
        label: np.asarray(likelihood(model.densities[label], grid))
        for label in model.class_labels
    }


def write_evaluation_outputs(
    reports: list[EvaluationReport],
    model: ClassifierModel,
    out_dir,
) -> dict[str, str]:
    """Write report.json, samples.csv, and likelihood_curves.csv under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_path = out_dir / "report.json"
    write_json(
        {
            "format_version": REPORT_VERSION,
            "alphas": [r.alpha for r in reports],
            "runs": [r.to_dict() for r in reports],
        },
        report_path,
    )

    samples_path = out_dir / "samples.csv"
    with open(samples_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            ["alpha", "index", "true_label", "nearest_class", "distance", "likelihood", "decision"]
        )
        for report in reports:
            for rec in report.per_sample:
                writer.writerow(
                    [
                        report.alpha,
                        rec["index"],
                        rec["true_label"],
                        rec["nearest_class"],
                        repr(rec["distance"]),
                        repr(rec["likelihood"]),
                        rec["decision"],
                    ]
                )

    curves_path = out_dir / "likelihood_curves.csv"
    grid, curves = likelihood_curves(model)
    with open(curves_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["class", "distance", "likelihood"])
        for label in model.class_labels:
            for x, value in zip(grid, curves[label]):
                writer.writerow([label, repr(float(x)), repr(float(value))])

    return {
        "report": str(report_path),
        "samples_csv": str(samples_path),
        "curves_csv": str(curves_path),
    }

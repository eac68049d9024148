"""Multi-label metrics and a 2-component PCA over engineered features.

The headline metric is exact-match subset accuracy (the whole 4-flag vector
must match); Hamming loss and per-label precision/recall/F1 are reported
alongside because "accuracy" alone is ambiguous for multi-label output. The
PCA operates on standardized numeric process-parameter features, which is
why exported axes are labeled "feature PC1/PC2".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DefectLabels, LABEL_ORDER, MissingLabels, Record, ToolkitError


class LengthMismatch(ToolkitError):
    pass


class EmptyInput(ToolkitError):
    pass


class TooFewPoints(ToolkitError):
    pass


class DegenerateFeatures(ToolkitError):
    pass


@dataclass(frozen=True)
class LabelMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class LabelConfusion:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class EvalReport:
    subset_accuracy: float
    hamming_loss: float
    per_label: dict[str, LabelMetrics]
    confusion: dict[str, LabelConfusion]
    n_examples: int

    def to_dict(self) -> dict:
        return {
            "n_examples": self.n_examples,
            "subset_accuracy": self.subset_accuracy,
            "hamming_loss": self.hamming_loss,
            "per_label": {
                name: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for name, m in self.per_label.items()
            },
            "confusion": {
                name: {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}
                for name, c in self.confusion.items()
            },
            "accuracy_definition": (
                "subset accuracy: exact match of the full "
                "[keyhole, lack_of_fusion, balling, none] vector"
            ),
        }


def evaluate(
    predictions: Sequence[DefectLabels], truths: Sequence[DefectLabels]
) -> EvalReport:
    """Compare predicted label vectors against ground truth."""
    if len(predictions) != len(truths):
        raise LengthMismatch(
            f"{len(predictions)} predictions vs {len(truths)} truths"
        )
    if not predictions:
        raise EmptyInput("nothing to evaluate")

    predicted = np.array([p.as_vector() for p in predictions], dtype=bool)
    actual = np.array([t.as_vector() for t in truths], dtype=bool)
    n = len(predictions)

    subset_accuracy = float((predicted == actual).all(axis=1).mean())
    hamming_loss = float((predicted != actual).mean())

    per_label: dict[str, LabelMetrics] = {}
    confusion: dict[str, LabelConfusion] = {}
    for j, name in enumerate(LABEL_ORDER):
        p, a = predicted[:, j], actual[:, j]
        tp = int((p & a).sum())
        fp = int((p & ~a).sum())
        fn = int((~p & a).sum())
        tn = int((~p & ~a).sum())
        # 0/0 convention: metrics are 0 when nothing is predicted or supported
        precision = tp / (tp + fp) if (tp + fp) else 0.0
        recall = tp / (tp + fn) if (tp + fn) else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        per_label[name] = LabelMetrics(precision, recall, f1, support=tp + fn)
        confusion[name] = LabelConfusion(tp, fp, fn, tn)

    return EvalReport(
        subset_accuracy=subset_accuracy,
        hamming_loss=hamming_loss,
        per_label=per_label,
        confusion=confusion,
        n_examples=n,
    )


_PCA_FEATURES = ("power", "velocity", "beam_diameter", "hatch_spacing", "layer_height")


def records_to_features(
    records: Iterable[Record],
) -> tuple[np.ndarray, list[DefectLabels]]:
    """Numeric parameter matrix plus labels; missing values mean-imputed."""
    materialized = list(records)
    for record in materialized:
        if record.labels is None:
            raise MissingLabels(f"record {record.id} has no labels")
    matrix = np.array(
        [
            [
                np.nan if getattr(r.params, name) is None else float(getattr(r.params, name))
                for name in _PCA_FEATURES
            ]
            for r in materialized
        ],
        dtype=np.float64,
    )
    for j in range(matrix.shape[1]):
        column = matrix[:, j]
        known = column[~np.isnan(column)]
        fill = known.mean() if known.size else 0.0
        column[np.isnan(column)] = fill
    return matrix, [r.labels for r in materialized]


@dataclass(frozen=True, eq=False)
class PcaProjection:
    components: np.ndarray  # (2, d) orthonormal rows
    explained_variance: np.ndarray  # (2,) descending
    points: list[tuple[float, float, DefectLabels]]


def pca_project(
    features: np.ndarray, labels: Sequence[DefectLabels]
) -> PcaProjection:
    """Top-2 principal components of z-scored features.

    Sign convention: each component's largest-magnitude coordinate is made
    positive, so the projection is fully deterministic.
    """
    matrix = np.asarray(features, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] < 2:
        raise ValueError("features must be a 2-D matrix with >= 2 columns")
    n = matrix.shape[0]
    if n < 3:
        raise TooFewPoints(f"need at least 3 points, got {n}")
    if len(labels) != n:
        raise LengthMismatch(f"{n} feature rows vs {len(labels)} labels")
    if np.all(matrix == matrix[0]):
        raise DegenerateFeatures("all points are identical")

    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)  # population sigma, consistent with the index
    std = np.where(std < 1e-12, 1.0, std)
    z = (matrix - mean) / std

    covariance = z.T @ z / n
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1][:2]
    components = eigenvectors[:, order].T.copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    variance = np.clip(eigenvalues[order], 0.0, None)

    scores = z @ components.T
    points = [
        (float(x), float(y), label) for (x, y), label in zip(scores, labels)
    ]
    return PcaProjection(
        components=components,
        explained_variance=variance,
        points=points,
    )


_EXPORT_HEADER = "x,y,keyhole,lof,balling,none"
_LABEL_COLOR = {
    "keyhole": "tab:red",
    "lack_of_fusion": "tab:orange",
    "balling": "tab:blue",
    "none": "tab:green",
}


def _dominant_label(labels: DefectLabels) -> str:
    for name in LABEL_ORDER:
        if getattr(labels, name):
            return name
    raise ValueError("label vector has no set flag")


def export_projection(proj: PcaProjection, csv_path, image_path=None):
    """Write the projected points as CSV plus a static scatter image."""
    from pathlib import Path

    csv_path = Path(csv_path)
    if image_path is None:
        image_path = csv_path.with_suffix(".png")
    image_path = Path(image_path)

    lines = [_EXPORT_HEADER]
    for x, y, labels in proj.points:
        flags = ",".join(str(int(flag)) for flag in labels.as_vector())
        lines.append(f"{float(x)!r},{float(y)!r},{flags}")
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    figure, axes = plt.subplots(figsize=(7.0, 5.5))
    by_label: dict[str, list[tuple[float, float]]] = {}
    for x, y, labels in proj.points:
        by_label.setdefault(_dominant_label(labels), []).append((x, y))
    for name in LABEL_ORDER:
        if name not in by_label:
            continue
        xs, ys = zip(*by_label[name])
        axes.scatter(xs, ys, s=12, alpha=0.7, color=_LABEL_COLOR[name], label=name)
    axes.set_xlabel("feature PC1")
    axes.set_ylabel("feature PC2")
    axes.legend(loc="best", fontsize="small")
    figure.tight_layout()
    figure.savefig(image_path, dpi=120)
    plt.close(figure)
    return csv_path, image_path

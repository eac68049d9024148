"""Reference defect prediction: exact lookup, k-NN in z-space, criteria oracle.

The index is immutable after build and safe to share across threads. Entries
are held in canonical id order, so predictions do not depend on the order
the training records arrived in. Search is brute force; the expected scale
(10^3 to 10^6 rows, 5 features) does not warrant a spatial structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .core import (
    DefectLabels,
    MeltPoolDims,
    MissingLabels,
    ProcessParameters,
    Record,
    ToolkitError,
    canonicalize_material,
)
from .criteria import CriteriaConfig, DEFAULT_CONFIG, classify

FEATURE_FIELDS = ("power", "velocity", "beam_diameter", "hatch_spacing", "layer_height")

_STD_FLOOR = 1e-12
_EXACT_REL_TOL = 1e-9

INDEX_FORMAT_VERSION = 1


class EmptyTrainingSet(ToolkitError):
    pass


class PredictMethod(str, Enum):
    EXACT_MATCH = "exact_match"
    KNN = "knn"
    ORACLE = "oracle"


@dataclass(frozen=True, eq=False)
class TrainIndex:
    ids: tuple[str, ...]
    materials: tuple[str | None, ...]
    raw: np.ndarray  # (n, 5) feature values, NaN where missing
    zscores: np.ndarray  # (n, 5) standardized, missing imputed to 0
    present: np.ndarray  # (n, 5) bool, False where imputed
    labels: np.ndarray  # (n, 4) bool, [keyhole, lack_of_fusion, balling, none]
    mean: np.ndarray  # (5,)
    std: np.ndarray  # (5,)
    material_partitions: Mapping[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class Prediction:
    labels: DefectLabels
    method: PredictMethod
    neighbors: tuple[tuple[str, float], ...] | None = None
    votes: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if self.method is PredictMethod.KNN and not self.neighbors:
            raise ValueError("k-NN prediction must carry its neighbors")

    def to_dict(self) -> dict:
        return {
            "labels": {
                "keyhole": self.labels.keyhole,
                "lack_of_fusion": self.labels.lack_of_fusion,
                "balling": self.labels.balling,
                "none": self.labels.none,
            },
            "method": self.method.value,
            "neighbors": None
            if self.neighbors is None
            else [[rid, dist] for rid, dist in self.neighbors],
            "votes": None if self.votes is None else dict(self.votes),
        }


def _feature_row(params: ProcessParameters) -> list[float]:
    return [
        float("nan") if getattr(params, name) is None else float(getattr(params, name))
        for name in FEATURE_FIELDS
    ]


def build_index(train_records: Iterable[Record]) -> TrainIndex:
    """Standardize train features (population sigma, floored for constants).

    Missing feature values are imputed at the train mean, which is a z-score
    of 0, and flagged in the ``present`` mask.
    """
    ordered = sorted(train_records, key=lambda r: r.id)
    if not ordered:
        raise EmptyTrainingSet("cannot build an index from zero records")
    for record in ordered:
        if record.labels is None:
            raise MissingLabels(f"training record {record.id} has no labels")

    raw = np.array([_feature_row(r.params) for r in ordered], dtype=np.float64)
    present = ~np.isnan(raw)
    mean = np.zeros(len(FEATURE_FIELDS))
    std = np.ones(len(FEATURE_FIELDS))
    for j in range(len(FEATURE_FIELDS)):
        column = raw[present[:, j], j]
        if column.size:
            mean[j] = column.mean()
            sigma = float(column.std())  # population sigma (ddof=0)
            std[j] = sigma if sigma >= _STD_FLOOR else 1.0
    zscores = (raw - mean) / std
    zscores[~present] = 0.0

    labels = np.array([r.labels.as_vector() for r in ordered], dtype=bool)
    materials = tuple(
        None if r.params.material is None else canonicalize_material(r.params.material)
        for r in ordered
    )
    partitions: dict[str, list[int]] = {}
    for index, material in enumerate(materials):
        if material is not None:
            partitions.setdefault(material, []).append(index)

    return TrainIndex(
        ids=tuple(r.id for r in ordered),
        materials=materials,
        raw=raw,
        zscores=zscores,
        present=present,
        labels=labels,
        mean=mean,
        std=std,
        material_partitions={m: np.array(ix, dtype=int) for m, ix in partitions.items()},
    )


def _labels_from_row(row: np.ndarray) -> DefectLabels:
    return DefectLabels.from_flags(bool(row[0]), bool(row[1]), bool(row[2]))


def _exact_match(index: TrainIndex, params: ProcessParameters, material: str | None) -> int | None:
    query = np.array(_feature_row(params))
    mask = np.ones(len(index), dtype=bool)
    if material is not None:
        mask &= np.array([m == material for m in index.materials])
    for j, value in enumerate(query):
        if np.isnan(value):
            continue
        column = index.raw[:, j]
        tolerance = _EXACT_REL_TOL * np.maximum(np.abs(column), max(abs(value), 1.0))
        mask &= index.present[:, j] & (np.abs(column - value) <= tolerance)
    hits = np.flatnonzero(mask)
    return int(hits[0]) if hits.size else None  # entries are id-ordered


def predict(params: ProcessParameters, index: TrainIndex, k: int = 5) -> Prediction:
    """Exact lookup first, then per-label majority vote among the k nearest.

    ``k`` must be odd so label votes can never tie; the none flag is always
    recomputed from the voted flags.
    """
    if k < 1 or k % 2 == 0:
        raise ValueError(f"k must be an odd integer >= 1, got {k}")

    material = None
    if params.material is not None:
        material = canonicalize_material(params.material)

    hit = _exact_match(index, params, material)
    if hit is not None:
        return Prediction(
            labels=_labels_from_row(index.labels[hit]),
            method=PredictMethod.EXACT_MATCH,
            neighbors=((index.ids[hit], 0.0),),
        )

    if material is not None and material in index.material_partitions:
        partition = index.material_partitions[material]
        candidates = partition if partition.size >= k else np.arange(len(index))
    else:
        candidates = np.arange(len(index))

    query = np.array(_feature_row(params))
    z_query = np.where(np.isnan(query), 0.0, (query - index.mean) / index.std)
    distances = np.sqrt(((index.zscores[candidates] - z_query) ** 2).sum(axis=1))

    effective_k = min(k, candidates.size)
    if effective_k % 2 == 0:
        effective_k -= 1  # keep the vote tie-free when candidates run short
    order = np.argsort(distances, kind="stable")[:effective_k]  # ties fall back to id order
    chosen = candidates[order]

    votes = index.labels[chosen, :3].mean(axis=0)
    flags = votes > 0.5
    labels = DefectLabels.from_flags(bool(flags[0]), bool(flags[1]), bool(flags[2]))
    neighbors = tuple(
        (index.ids[int(i)], float(d)) for i, d in zip(chosen, distances[order])
    )
    return Prediction(
        labels=labels,
        method=PredictMethod.KNN,
        neighbors=neighbors,
        votes={
            "keyhole": float(votes[0]),
            "lack_of_fusion": float(votes[1]),
            "balling": float(votes[2]),
        },
    )


def predict_with_dims(
    params: ProcessParameters,
    dims: MeltPoolDims,
    cfg: CriteriaConfig = DEFAULT_CONFIG,
) -> Prediction:
    """Criteria-oracle path: defers entirely to the classification rules."""
    return Prediction(labels=classify(params, dims, cfg), method=PredictMethod.ORACLE)


def save_index(index: TrainIndex, path) -> None:
    """Versioned JSON snapshot; loads back to identical predictions."""
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "feature_fields": list(FEATURE_FIELDS),
        "normalization": {"mean": index.mean.tolist(), "std": index.std.tolist()},
        "entries": [
            {
                "id": index.ids[i],
                "material": index.materials[i],
                "features": [
                    None if not index.present[i, j] else float(index.raw[i, j])
                    for j in range(len(FEATURE_FIELDS))
                ],
                "labels": [int(v) for v in index.labels[i]],
            }
            for i in range(len(index))
        ],
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
        handle.write("\n")


def load_index(path) -> TrainIndex:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format_version") != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported index snapshot version: {payload.get('format_version')}")
    entries = payload["entries"]
    if not entries:
        raise EmptyTrainingSet("index snapshot holds no entries")
    mean = np.array(payload["normalization"]["mean"], dtype=np.float64)
    std = np.array(payload["normalization"]["std"], dtype=np.float64)
    raw = np.array(
        [[np.nan if v is None else v for v in e["features"]] for e in entries],
        dtype=np.float64,
    )
    present = ~np.isnan(raw)
    zscores = (raw - mean) / std
    zscores[~present] = 0.0
    labels = np.array([[bool(v) for v in e["labels"]] for e in entries], dtype=bool)
    materials = tuple(e["material"] for e in entries)
    partitions: dict[str, list[int]] = {}
    for i, material in enumerate(materials):
        if material is not None:
            partitions.setdefault(material, []).append(i)
    return TrainIndex(
        ids=tuple(e["id"] for e in entries),
        materials=materials,
        raw=raw,
        zscores=zscores,
        present=present,
        labels=labels,
        mean=mean,
        std=std,
        material_partitions={m: np.array(ix, dtype=int) for m, ix in partitions.items()},
    )

"""Domain types, canonical units, and unit normalization.

Canonical units across the toolkit: power in W, velocity in mm/s, and every
length (beam diameter, hatch spacing, layer height, melt pool dimensions) in
micrometers. Values are normalized on the way in so downstream math never
sees mixed units.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib.resources import files


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class IncompatibleUnits(ToolkitError):
    pass


class EmptyMaterial(ToolkitError):
    pass


class NonPositiveDimension(ToolkitError):
    pass


class MalformedNumber(ToolkitError):
    pass


class MissingDims(ToolkitError):
    pass


class MissingLabels(ToolkitError):
    pass


class MissingSplit(ToolkitError):
    pass


class Unit(str, Enum):
    W = "W"
    MM_PER_S = "mm/s"
    M_PER_S = "m/s"
    UM = "um"
    MM = "mm"
    DIMENSIONLESS = "dimensionless"


_DIMENSION = {
    Unit.W: "power",
    Unit.MM_PER_S: "speed",
    Unit.M_PER_S: "speed",
    Unit.UM: "length",
    Unit.MM: "length",
    Unit.DIMENSIONLESS: "dimensionless",
}

# scale factor to the base unit of each dimension (W, mm/s, um)
_TO_BASE = {
    Unit.W: 1.0,
    Unit.MM_PER_S: 1.0,
    Unit.M_PER_S: 1000.0,
    Unit.UM: 1.0,
    Unit.MM: 1000.0,
    Unit.DIMENSIONLESS: 1.0,
}


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: Unit


def unit_dimension(unit: Unit) -> str:
    return _DIMENSION[unit]


def normalize_quantity(q: Quantity, target_unit: Unit) -> Quantity:
    """Re-express ``q`` in ``target_unit``.

    Conversions are exact metric scalings within one dimension; converting
    across dimensions raises :class:`IncompatibleUnits`.
    """
    if _DIMENSION[q.unit] != _DIMENSION[target_unit]:
        raise IncompatibleUnits(
            f"cannot convert {q.unit.value} to {target_unit.value}"
        )
    return Quantity(q.value * _TO_BASE[q.unit] / _TO_BASE[target_unit], target_unit)


def _lexicon_data() -> dict:
    text = files("lpbf_defects").joinpath("data/lexicon.json").read_text("utf-8")
    return json.loads(text)


def _normalize_key(raw: str) -> str:
    return " ".join(raw.split()).lower()


@lru_cache(maxsize=1)
def material_alias_table() -> dict[str, str]:
    """Normalized alias -> canonical material id, from the shipped lexicon.

    Every canonical id maps to itself so canonicalization is idempotent.
    """
    table: dict[str, str] = {}
    for canonical, aliases in _lexicon_data()["materials"].items():
        table[_normalize_key(canonical)] = canonical
        for alias in aliases:
            table[_normalize_key(alias)] = canonical
    return table


def canonicalize_material(raw: str) -> str:
    """Map spelling variants of a material onto one canonical id.

    Unknown materials pass through trimmed and title-cased, so repeated
    canonicalization is a no-op either way. Blank input raises
    :class:`EmptyMaterial`.
    """
    key = _normalize_key(raw)
    if not key:
        raise EmptyMaterial("material string is blank")
    table = material_alias_table()
    if key in table:
        return table[key]
    return key.title()


@dataclass(frozen=True)
class ProcessParameters:
    """One L-PBF build condition. Power in W, velocity in mm/s, lengths in um.

    Any field may be absent; validation applies only to present values.
    """

    material: str | None = None
    power: float | None = None
    velocity: float | None = None
    beam_diameter: float | None = None
    hatch_spacing: float | None = None
    layer_height: float | None = None

    def __post_init__(self) -> None:
        if self.material is not None and not self.material.strip():
            raise EmptyMaterial("material must be non-empty when present")
        if self.power is not None and not (math.isfinite(self.power) and self.power > 0):
            raise ValueError(f"power must be finite and > 0, got {self.power}")
        if self.velocity is not None and not (math.isfinite(self.velocity) and self.velocity > 0):
            raise ValueError(f"velocity must be finite and > 0, got {self.velocity}")
        for name in ("beam_diameter", "hatch_spacing", "layer_height"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class MeltPoolDims:
    """Measured or simulated melt pool size in micrometers."""

    width: float
    depth: float
    length: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.width) and self.width > 0):
            raise NonPositiveDimension(f"width must be finite and > 0, got {self.width}")
        if not (math.isfinite(self.depth) and self.depth > 0):
            raise NonPositiveDimension(f"depth must be finite and > 0, got {self.depth}")
        if self.length is not None and not (math.isfinite(self.length) and self.length > 0):
            raise NonPositiveDimension(f"length must be finite and > 0, got {self.length}")


LABEL_ORDER = ("keyhole", "lack_of_fusion", "balling", "none")


@dataclass(frozen=True)
class DefectLabels:
    """Multi-label defect flags; ``none`` is always derived from the others."""

    keyhole: bool
    lack_of_fusion: bool
    balling: bool
    none: bool

    def __post_init__(self) -> None:
        expected_none = not (self.keyhole or self.lack_of_fusion or self.balling)
        if self.none != expected_none:
            raise ValueError(
                "none flag must equal NOT(keyhole OR lack_of_fusion OR balling)"
            )

    @classmethod
    def from_flags(cls, keyhole: bool, lack_of_fusion: bool, balling: bool) -> "DefectLabels":
        return cls(
            keyhole=keyhole,
            lack_of_fusion=lack_of_fusion,
            balling=balling,
            none=not (keyhole or lack_of_fusion or balling),
        )

    def as_vector(self) -> tuple[bool, bool, bool, bool]:
        """Ordered one-hot vector [keyhole, lack_of_fusion, balling, none]."""
        return (self.keyhole, self.lack_of_fusion, self.balling, self.none)


class Source(str, Enum):
    CLASSIFICATION_TABLE = "classification_table"
    GEOMETRY_TABLE = "geometry_table"
    SIMULATION = "simulation"
    AUGMENTED = "augmented"


class Split(str, Enum):
    UNASSIGNED = "unassigned"
    TRAIN = "train"
    TEST = "test"
    VALIDATION = "validation"


@dataclass(frozen=True)
class Record:
    """Provenance-tagged row joining parameters, optional dims, and labels."""

    id: str
    params: ProcessParameters
    dims: MeltPoolDims | None = None
    labels: DefectLabels | None = None
    source: Source = Source.GEOMETRY_TABLE
    split: Split = Split.UNASSIGNED
    parent_id: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.source is Source.AUGMENTED and not self.parent_id:
            raise ValueError(f"augmented record {self.id} must carry a parent id")


PARAM_FIELDS = (
    "material",
    "power",
    "velocity",
    "beam_diameter",
    "hatch_spacing",
    "layer_height",
)


def params_to_dict(params: ProcessParameters) -> dict:
    return {name: getattr(params, name) for name in PARAM_FIELDS}


def params_from_dict(data: dict) -> ProcessParameters:
    return ProcessParameters(**{name: data.get(name) for name in PARAM_FIELDS})


def record_to_dict(record: Record) -> dict:
    return {
        "id": record.id,
        "params": params_to_dict(record.params),
        "dims": None
        if record.dims is None
        else {
            "width": record.dims.width,
            "depth": record.dims.depth,
            "length": record.dims.length,
        },
        "labels": None
        if record.labels is None
        else {name: getattr(record.labels, name) for name in LABEL_ORDER},
        "source": record.source.value,
        "split": record.split.value,
        "parent_id": record.parent_id,
    }


def record_from_dict(data: dict) -> Record:
    dims = data.get("dims")
    labels = data.get("labels")
    return Record(
        id=data["id"],
        params=params_from_dict(data["params"]),
        dims=None
        if dims is None
        else MeltPoolDims(width=dims["width"], depth=dims["depth"], length=dims.get("length")),
        labels=None
        if labels is None
        else DefectLabels(**{name: labels[name] for name in LABEL_ORDER}),
        source=Source(data["source"]),
        split=Split(data["split"]),
        parent_id=data.get("parent_id"),
    )

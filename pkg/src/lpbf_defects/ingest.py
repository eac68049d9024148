"""CSV ingestion of classification and geometry tables into Records.

Source files are delimiter-separated with a header row. A declarative
:class:`SourceSchema` maps source columns onto canonical fields and declares
per-column source units; rows are normalized to canonical units while they
are read. Bad rows are itemized in the :class:`IngestReport`, never silently
dropped.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .core import (
    DefectLabels,
    EmptyMaterial,
    MeltPoolDims,
    MissingDims,
    NonPositiveDimension,
    ProcessParameters,
    Quantity,
    Record,
    Source,
    ToolkitError,
    Unit,
    canonicalize_material,
    normalize_quantity,
    unit_dimension,
)
from .criteria import CriteriaConfig, DEFAULT_CONFIG, classify


class FileUnreadable(ToolkitError):
    pass


class HeaderMismatch(ToolkitError):
    pass


class SourceKind(str, Enum):
    CLASSIFICATION_TABLE = "classification"
    GEOMETRY_TABLE = "geometry"


NUMERIC_FIELDS = (
    "power",
    "velocity",
    "beam_diameter",
    "hatch_spacing",
    "layer_height",
    "width",
    "depth",
    "length",
)

CANONICAL_FIELDS = frozenset(("material", "label") + NUMERIC_FIELDS)

_FIELD_DIMENSION = {
    "power": "power",
    "velocity": "speed",
    "beam_diameter": "length",
    "hatch_spacing": "length",
    "layer_height": "length",
    "width": "length",
    "depth": "length",
    "length": "length",
}

_CANONICAL_UNIT = {
    "power": Unit.W,
    "velocity": Unit.MM_PER_S,
    "beam_diameter": Unit.UM,
    "hatch_spacing": Unit.UM,
    "layer_height": Unit.UM,
    "width": Unit.UM,
    "depth": Unit.UM,
    "length": Unit.UM,
}

_REQUIRED_FIELDS = {
    SourceKind.CLASSIFICATION_TABLE: frozenset({"material", "power", "velocity", "label"}),
    SourceKind.GEOMETRY_TABLE: frozenset({"material", "power", "velocity", "width", "depth"}),
}

# case-insensitive label-token vocabulary for classification tables
LABEL_TOKEN_ALIASES = {
    "keyhole": frozenset({"keyhole", "keyholing", "keyhole porosity"}),
    "lack_of_fusion": frozenset(
        {"lack of fusion", "lack-of-fusion", "lackoffusion", "lof", "unfused"}
    ),
    "balling": frozenset({"balling", "balled"}),
    "none": frozenset(
        {"none", "desirable", "no defect", "no defects", "defect free", "defect-free", "nominal"}
    ),
}


@dataclass(frozen=True)
class SourceSchema:
    """Declarative mapping of one source file onto canonical fields."""

    kind: SourceKind
    column_map: Mapping[str, str]
    unit_map: Mapping[str, Unit] = field(default_factory=dict)
    delimiter: str = ","
    name: str | None = None
    source_tag: Source | None = None

    def __post_init__(self) -> None:
        unknown = set(self.column_map.values()) - CANONICAL_FIELDS
        if unknown:
            raise ValueError(f"unknown canonical fields in column_map: {sorted(unknown)}")
        missing = _REQUIRED_FIELDS[self.kind] - set(self.column_map.values())
        if missing:
            raise ValueError(
                f"{self.kind.value} schema must map fields: {sorted(missing)}"
            )
        for column, unit in self.unit_map.items():
            if column not in self.column_map:
                raise ValueError(f"unit declared for unmapped column {column!r}")
            fld = self.column_map[column]
            if fld not in _FIELD_DIMENSION:
                raise ValueError(f"unit declared for non-numeric field {fld!r}")
            if unit_dimension(unit) != _FIELD_DIMENSION[fld]:
                raise ValueError(
                    f"unit {unit.value!r} does not measure {fld!r}"
                )

    def record_source(self) -> Source:
        if self.source_tag is not None:
            return self.source_tag
        if self.kind is SourceKind.CLASSIFICATION_TABLE:
            return Source.CLASSIFICATION_TABLE
        return Source.GEOMETRY_TABLE


@dataclass(frozen=True)
class IngestReport:
    rows_read: int
    rows_accepted: int
    rows_rejected: int
    rejection_reasons: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        if self.rows_read != self.rows_accepted + self.rows_rejected:
            raise ValueError("accepted + rejected must reconcile with rows read")
        if len(self.rejection_reasons) != self.rows_rejected:
            raise ValueError("every rejected row needs a reason")

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_accepted": self.rows_accepted,
            "rows_rejected": self.rows_rejected,
            "rejection_reasons": [[index, reason] for index, reason in self.rejection_reasons],
        }


class _RowError(Exception):
    """Internal: row-level rejection with a human-readable reason."""


def _parse_number(field: str, column: str, text: str, unit: Unit | None) -> float:
    try:
        value = float(text)
    except ValueError:
        raise _RowError(f"malformed number in column {column!r}: {text!r}") from None
    if unit is not None:
        value = normalize_quantity(Quantity(value, unit), _CANONICAL_UNIT[field]).value
    return value


def _parse_label_cell(text: str) -> DefectLabels:
    tokens = [t.strip().lower() for t in re.split(r"[;|+,]", text) if t.strip()]
    if not tokens:
        raise _RowError("empty label cell")
    flags = {"keyhole": False, "lack_of_fusion": False, "balling": False}
    saw_none = False
    for token in tokens:
        token = " ".join(token.split())
        matched = False
        for name, aliases in LABEL_TOKEN_ALIASES.items():
            if token in aliases:
                matched = True
                if name == "none":
                    saw_none = True
                else:
                    flags[name] = True
                break
        if not matched:
            raise _RowError(f"unknown label token {token!r}")
    if saw_none and any(flags.values()):
        raise _RowError(f"contradictory label cell {text!r}")
    return DefectLabels.from_flags(**flags)


def _row_to_record(
    row: Mapping[str, str], schema: SourceSchema, record_id: str
) -> Record:
    values: dict[str, object] = {}
    for column, fld in schema.column_map.items():
        cell = (row.get(column) or "").strip()
        if not cell:
            continue
        if fld == "material":
            values[fld] = cell
        elif fld == "label":
            values[fld] = cell
        else:
            values[fld] = _parse_number(fld, column, cell, schema.unit_map.get(column))

    required = _REQUIRED_FIELDS[schema.kind]
    missing = sorted(f for f in required if f not in values)
    if missing:
        raise _RowError(f"missing required value(s): {', '.join(missing)}")

    try:
        params = ProcessParameters(
            material=canonicalize_material(str(values["material"])),
            power=values.get("power"),  # type: ignore[arg-type]
            velocity=values.get("velocity"),  # type: ignore[arg-type]
            beam_diameter=values.get("beam_diameter"),  # type: ignore[arg-type]
            hatch_spacing=values.get("hatch_spacing"),  # type: ignore[arg-type]
            layer_height=values.get("layer_height"),  # type: ignore[arg-type]
        )
    except (ValueError, EmptyMaterial) as exc:
        raise _RowError(str(exc)) from None

    dims = None
    if schema.kind is SourceKind.GEOMETRY_TABLE:
        try:
            dims = MeltPoolDims(
                width=values["width"],  # type: ignore[arg-type]
                depth=values["depth"],  # type: ignore[arg-type]
                length=values.get("length"),  # type: ignore[arg-type]
            )
        except NonPositiveDimension as exc:
            raise _RowError(str(exc)) from None

    labels = None
    if schema.kind is SourceKind.CLASSIFICATION_TABLE:
        labels = _parse_label_cell(str(values["label"]))

    return Record(
        id=record_id,
        params=params,
        dims=dims,
        labels=labels,
        source=schema.record_source(),
    )


def ingest_table(path, schema: SourceSchema) -> tuple[list[Record], IngestReport]:
    """Read one delimiter-separated source file into Records.

    Returns the accepted records plus a report reconciling every input row.
    Raises :class:`FileUnreadable` or :class:`HeaderMismatch` for file-level
    problems; row-level problems reject the row and are itemized by 1-based
    data-row index.
    """
    name = schema.name or _stem(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle, delimiter=schema.delimiter)
            header = reader.fieldnames
            if header is None:
                raise HeaderMismatch(f"{path}: file has no header row")
            absent = [c for c in schema.column_map if c not in header]
            if absent:
                raise HeaderMismatch(f"{path}: header lacks column(s) {absent}")
            rows = list(reader)
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc

    records: list[Record] = []
    reasons: list[tuple[int, str]] = []
    for index, row in enumerate(rows, start=1):
        record_id = f"{name}-{index:05d}"
        try:
            records.append(_row_to_record(row, schema, record_id))
        except _RowError as exc:
            reasons.append((index, str(exc)))
    report = IngestReport(
        rows_read=len(rows),
        rows_accepted=len(records),
        rows_rejected=len(reasons),
        rejection_reasons=tuple(reasons),
    )
    return records, report


def _stem(path) -> str:
    text = str(path)
    base = text.replace("\\", "/").rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


def label_geometry_records(
    records: Iterable[Record], cfg: CriteriaConfig = DEFAULT_CONFIG
) -> list[Record]:
    """Populate labels on dimension-bearing records via the defect criteria.

    Records that already carry labels pass through unchanged, so re-running
    is idempotent. An unlabeled record without dims is an error naming the
    record id.
    """
    out: list[Record] = []
    for record in records:
        if record.labels is not None:
            out.append(record)
            continue
        if record.dims is None:
            raise MissingDims(f"record {record.id} has no melt pool dims")
        try:
            labels = classify(record.params, record.dims, cfg)
        except ToolkitError as exc:
            raise type(exc)(f"record {record.id}: {exc}") from exc
        out.append(replace(record, labels=labels))
    return out


def write_records_jsonl(records: Sequence[Record], path) -> None:
    """One JSON object per line, sorted by record id for determinism."""
    import json

    from .core import record_to_dict

    ordered = sorted(records, key=lambda r: r.id)
    with open(path, "w", encoding="utf-8") as handle:
        for record in ordered:
            handle.write(json.dumps(record_to_dict(record)) + "\n")


def read_records_jsonl(path) -> list[Record]:
    import json

    from .core import record_from_dict

    try:
        with open(path, "r", encoding="utf-8") as handle:
            return [record_from_dict(json.loads(line)) for line in handle if line.strip()]
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc

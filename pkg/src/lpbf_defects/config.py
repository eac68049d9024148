"""Pipeline configuration: one YAML document, validated before any stage runs.

Schema (all keys except ``sources`` optional; defaults in parentheses):

.. code-block:: yaml

    output_dir: out            # stage outputs land here ("out")
    k: 5                       # neighbors for prediction (5)
    seed: 42                   # shorthand for split.seed
    sources:                   # at least one entry
      - path: data/geometry.csv
        kind: geometry         # geometry | classification
        name: geometry_main    # group name (file stem)
        delimiter: ","         # (",")
        tag: simulation        # provenance override (from kind)
        augment: true          # include in the augment stage (kind == geometry)
        columns:               # source column -> canonical field
          Material: material
          Power: power
        units:                 # source column -> W | kW-less source unit token
          Power: W
    criteria:
      keyhole_ratio_threshold: 1.5
      lof_limit: 1.0
      balling_ratio_threshold: 3.141592653589793   # defaults to pi
      unknown_policy: treat_as_no_defect           # or reject
    augment:
      hatch_values: [0, 50, ...]    # default 0..950 step 50
      layer_values: [0, 50, ...]
      mode: cartesian               # or paired
    split:
      train_fraction: 0.75
      test_fraction: 0.15
      validation_fraction: 0.10
      seed: 0
    templates: path/to/templates.txt   # omitted -> packaged library

Every CLI flag (--seed, --k, --out) overrides its config key.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .augment import AugmentGrid, GridMode
from .core import Source, ToolkitError, Unit
from .criteria import CriteriaConfig, UnknownPolicy
from .ingest import SourceKind, SourceSchema
from .split import SplitSpec


class ConfigInvalid(ToolkitError):
    pass


_UNIT_ALIASES = {
    "w": Unit.W,
    "mm/s": Unit.MM_PER_S,
    "m/s": Unit.M_PER_S,
    "um": Unit.UM,
    "µm": Unit.UM,
    "μm": Unit.UM,
    "mm": Unit.MM,
}

_SOURCE_TAGS = {
    "classification": Source.CLASSIFICATION_TABLE,
    "geometry": Source.GEOMETRY_TABLE,
    "simulation": Source.SIMULATION,
}


@dataclass(frozen=True)
class SourceSpec:
    name: str
    path: Path
    schema: SourceSchema
    augment: bool


@dataclass(frozen=True)
class PipelineConfig:
    sources: tuple[SourceSpec, ...]
    criteria: CriteriaConfig
    grid: AugmentGrid
    split: SplitSpec
    template_path: Path | None
    output_dir: Path
    k: int


def _parse_unit(token: str, errors: list[str], where: str) -> Unit | None:
    unit = _UNIT_ALIASES.get(str(token).strip().lower())
    if unit is None:
        errors.append(f"{where}: unknown unit token {token!r}")
    return unit


def _parse_source(entry: dict, base_dir: Path, errors: list[str]) -> SourceSpec | None:
    where = f"sources[{entry.get('name') or entry.get('path')}]"
    path_text = entry.get("path")
    if not path_text:
        errors.append(f"{where}: missing 'path'")
        return None
    path = (base_dir / path_text).resolve() if not Path(path_text).is_absolute() else Path(path_text)
    if not path.is_file():
        errors.append(f"{where}: file not found: {path}")
        return None

    kind_text = str(entry.get("kind", "")).strip().lower()
    if kind_text not in ("geometry", "classification"):
        errors.append(f"{where}: 'kind' must be geometry or classification")
        return None
    kind = SourceKind.GEOMETRY_TABLE if kind_text == "geometry" else SourceKind.CLASSIFICATION_TABLE

    columns = entry.get("columns")
    if not isinstance(columns, dict) or not columns:
        errors.append(f"{where}: 'columns' mapping is required")
        return None

    unit_map: dict[str, Unit] = {}
    for column, token in (entry.get("units") or {}).items():
        unit = _parse_unit(token, errors, where)
        if unit is not None:
            unit_map[str(column)] = unit

    tag = None
    if "tag" in entry:
        tag = _SOURCE_TAGS.get(str(entry["tag"]).strip().lower())
        if tag is None:
            errors.append(f"{where}: unknown tag {entry['tag']!r}")

    name = str(entry.get("name") or path.stem)
    try:
        schema = SourceSchema(
            kind=kind,
            column_map={str(c): str(f) for c, f in columns.items()},
            unit_map=unit_map,
            delimiter=str(entry.get("delimiter", ",")),
            name=name,
            source_tag=tag,
        )
    except ValueError as exc:
        errors.append(f"{where}: {exc}")
        return None

    augment_flag = entry.get("augment")
    if augment_flag is None:
        augment_flag = kind is SourceKind.GEOMETRY_TABLE
    return SourceSpec(name=name, path=path, schema=schema, augment=bool(augment_flag))


def _parse_criteria(data: dict, errors: list[str]) -> CriteriaConfig:
    kwargs = {}
    for key in ("keyhole_ratio_threshold", "lof_limit", "balling_ratio_threshold"):
        if key in data:
            kwargs[key] = float(data[key])
    if "unknown_policy" in data:
        text = str(data["unknown_policy"]).strip().lower()
        try:
            kwargs["unknown_policy"] = UnknownPolicy(text)
        except ValueError:
            errors.append(f"criteria.unknown_policy: unknown policy {text!r}")
    try:
        return CriteriaConfig(**kwargs)
    except ValueError as exc:
        errors.append(f"criteria: {exc}")
        return CriteriaConfig()


def _parse_grid(data: dict, errors: list[str]) -> AugmentGrid:
    if not data:
        return AugmentGrid.default()
    try:
        mode = GridMode(str(data.get("mode", "cartesian")).strip().lower())
    except ValueError:
        errors.append(f"augment.mode: unknown mode {data.get('mode')!r}")
        mode = GridMode.CARTESIAN
    default = AugmentGrid.default()
    try:
        return AugmentGrid(
            hatch_values=tuple(float(v) for v in data.get("hatch_values", default.hatch_values)),
            layer_values=tuple(float(v) for v in data.get("layer_values", default.layer_values)),
            mode=mode,
        )
    except ValueError as exc:
        errors.append(f"augment: {exc}")
        return default


def _parse_split(data: dict, errors: list[str], seed_override: int | None) -> SplitSpec:
    kwargs = {}
    for key in ("train_fraction", "test_fraction", "validation_fraction"):
        if key in data:
            kwargs[key] = float(data[key])
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if seed_override is not None:
        kwargs["seed"] = int(seed_override)
    try:
        return SplitSpec(**kwargs)
    except ValueError as exc:
        errors.append(f"split: {exc}")
        return SplitSpec()


def load_config(
    path,
    *,
    seed: int | None = None,
    k: int | None = None,
    out: str | None = None,
) -> PipelineConfig:
    """Load and validate the pipeline config, applying CLI overrides.

    All problems are collected and reported together in one
    :class:`ConfigInvalid`.
    """
    config_path = Path(path)
    try:
        raw = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {config_path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config {config_path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid(f"config {config_path} must be a mapping")

    errors: list[str] = []
    base_dir = config_path.parent

    entries = raw.get("sources")
    sources: list[SourceSpec] = []
    if not isinstance(entries, list) or not entries:
        errors.append("sources: at least one source is required")
    else:
        seen = set()
        for entry in entries:
            spec = _parse_source(entry, base_dir, errors)
            if spec is not None:
                if spec.name in seen:
                    errors.append(f"sources: duplicate source name {spec.name!r}")
                seen.add(spec.name)
                sources.append(spec)

    criteria = _parse_criteria(raw.get("criteria") or {}, errors)
    grid = _parse_grid(raw.get("augment") or {}, errors)
    split_data = dict(raw.get("split") or {})
    if "seed" in raw and "seed" not in split_data:
        split_data["seed"] = raw["seed"]
    split = _parse_split(split_data, errors, seed)

    template_path = None
    if raw.get("templates"):
        template_path = Path(raw["templates"])
        if not template_path.is_absolute():
            template_path = (base_dir / template_path).resolve()
        if not template_path.is_file():
            errors.append(f"templates: file not found: {template_path}")

    out_text = out if out is not None else raw.get("output_dir", "out")
    output_dir = Path(out_text)
    if not output_dir.is_absolute():
        output_dir = (base_dir / output_dir).resolve()

    k_value = int(k if k is not None else raw.get("k", 5))
    if k_value < 1 or k_value % 2 == 0:
        errors.append(f"k: must be an odd integer >= 1, got {k_value}")

    if errors:
        raise ConfigInvalid("; ".join(errors))

    return PipelineConfig(
        sources=tuple(sources),
        criteria=criteria,
        grid=grid,
        split=split,
        template_path=template_path,
        output_dir=output_dir,
        k=k_value,
    )


def with_overrides(
    cfg: PipelineConfig,
    *,
    seed: int | None = None,
    k: int | None = None,
    out: str | None = None,
) -> PipelineConfig:
    updated = cfg
    if seed is not None:
        updated = replace(updated, split=replace(updated.split, seed=int(seed)))
    if k is not None:
        updated = replace(updated, k=int(k))
    if out is not None:
        updated = replace(updated, output_dir=Path(out))
    return updated

"""File-to-file pipeline stages driven by the CLI.

Every stage reads the previous stage's directory under the configured output
dir and writes its own, with records kept in per-source-file groups so the
split stays a within-group operation:

    ingested/<group>.jsonl -> labeled/ -> augmented/ -> split/
    corpus/baseline_<split>.jsonl, corpus/prompt_<split>.jsonl
    reports/ingest_<group>.json, reports/eval_<split>.json
    index.json, pca/projection.csv + projection.png

All outputs are deterministic functions of (inputs, config, seed).
"""

from __future__ import annotations

import json
from pathlib import Path

from .config import PipelineConfig
from .core import Record, Split, ToolkitError
from .corpus import (
    CorpusExample,
    load_templates,
    render_baseline,
    render_prompts,
    write_corpus,
)
from .augment import augment_lof
from .evaluation import evaluate, export_projection, pca_project, records_to_features
from .ingest import (
    IngestReport,
    ingest_table,
    label_geometry_records,
    read_records_jsonl,
    write_records_jsonl,
)
from .predictor import TrainIndex, build_index, load_index, predict, save_index
from .split import split_records


class StageInputMissing(ToolkitError):
    pass


def _stage_dir(cfg: PipelineConfig, name: str, create: bool = False) -> Path:
    directory = cfg.output_dir / name
    if create:
        directory.mkdir(parents=True, exist_ok=True)
    return directory


def _read_groups(cfg: PipelineConfig, stage: str) -> dict[str, list[Record]]:
    directory = _stage_dir(cfg, stage)
    if not directory.is_dir():
        raise StageInputMissing(f"{directory} not found; run the producing stage first")
    groups = {
        path.stem: read_records_jsonl(path) for path in sorted(directory.glob("*.jsonl"))
    }
    if not groups:
        raise StageInputMissing(f"{directory} holds no record files")
    return groups


def _write_groups(cfg: PipelineConfig, stage: str, groups: dict[str, list[Record]]) -> None:
    directory = _stage_dir(cfg, stage, create=True)
    for name, records in groups.items():
        write_records_jsonl(records, directory / f"{name}.jsonl")


def stage_ingest(cfg: PipelineConfig) -> dict[str, IngestReport]:
    """Read every configured source into ingested/<group>.jsonl plus a report."""
    reports_dir = _stage_dir(cfg, "reports", create=True)
    ingested_dir = _stage_dir(cfg, "ingested", create=True)
    reports: dict[str, IngestReport] = {}
    for source in cfg.sources:
        records, report = ingest_table(source.path, source.schema)
        write_records_jsonl(records, ingested_dir / f"{source.name}.jsonl")
        (reports_dir / f"ingest_{source.name}.json").write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        reports[source.name] = report
    return reports


def stage_label(cfg: PipelineConfig) -> dict[str, int]:
    """Populate labels via the criteria; already-labeled records pass through."""
    groups = _read_groups(cfg, "ingested")
    labeled = {name: label_geometry_records(records, cfg.criteria) for name, records in groups.items()}
    _write_groups(cfg, "labeled", labeled)
    return {name: len(records) for name, records in labeled.items()}


def stage_augment(cfg: PipelineConfig) -> dict[str, int]:
    """Expand augment-enabled groups over the hatch/layer grid."""
    groups = _read_groups(cfg, "labeled")
    augment_enabled = {s.name for s in cfg.sources if s.augment}
    out: dict[str, list[Record]] = {}
    for name, records in groups.items():
        expanded = list(records)
        if name in augment_enabled:
            for record in records:
                expanded.extend(augment_lof(record, cfg.grid, cfg.criteria))
        out[name] = expanded
    _write_groups(cfg, "augmented", out)
    return {name: len(records) for name, records in out.items()}


def stage_split(cfg: PipelineConfig) -> dict[str, dict[str, int]]:
    """Assign train/test/validation within each group."""
    groups = _read_groups(cfg, "augmented")
    assigned = split_records(groups, cfg.split)
    _write_groups(cfg, "split", assigned)
    summary: dict[str, dict[str, int]] = {}
    for name, records in assigned.items():
        counts = {split.value: 0 for split in (Split.TRAIN, Split.TEST, Split.VALIDATION)}
        for record in records:
            counts[record.split.value] += 1
        summary[name] = counts
    return summary


def _split_files(records: list[Record]) -> dict[Split, list[Record]]:
    by_split: dict[Split, list[Record]] = {}
    for record in records:
        by_split.setdefault(record.split, []).append(record)
    return by_split


def _all_split_records(cfg: PipelineConfig) -> list[Record]:
    groups = _read_groups(cfg, "split")
    return [record for records in groups.values() for record in records]


def stage_gen_baseline(cfg: PipelineConfig) -> dict[str, int]:
    """Render the separated-format corpus, one file per split."""
    records = _all_split_records(cfg)
    corpus_dir = _stage_dir(cfg, "corpus", create=True)
    counts: dict[str, int] = {}
    for split, members in sorted(_split_files(records).items(), key=lambda kv: kv[0].value):
        examples = [render_baseline(record) for record in members]
        write_corpus(examples, corpus_dir / f"baseline_{split.value}.jsonl", "baseline")
        counts[split.value] = len(examples)
    return counts


def stage_gen_prompt(cfg: PipelineConfig) -> dict[str, int]:
    """Render the templated prompt corpus, one file per split."""
    records = _all_split_records(cfg)
    templates = load_templates(cfg.template_path)
    corpus_dir = _stage_dir(cfg, "corpus", create=True)
    counts: dict[str, int] = {}
    for split, members in sorted(_split_files(records).items(), key=lambda kv: kv[0].value):
        examples: list[CorpusExample] = []
        for record in members:
            examples.extend(render_prompts(record, templates))
        write_corpus(examples, corpus_dir / f"prompt_{split.value}.jsonl", "prompt")
        counts[split.value] = len(examples)
    return counts


def index_path(cfg: PipelineConfig) -> Path:
    return cfg.output_dir / "index.json"


def build_train_index(cfg: PipelineConfig) -> TrainIndex:
    records = _all_split_records(cfg)
    train = [r for r in records if r.split is Split.TRAIN]
    return build_index(train)


def build_or_load_index(cfg: PipelineConfig) -> TrainIndex:
    """Load the persisted snapshot if present, else build and persist it."""
    path = index_path(cfg)
    if path.is_file():
        return load_index(path)
    index = build_train_index(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    save_index(index, path)
    return index


def stage_eval(cfg: PipelineConfig) -> dict[str, dict]:
    """k-NN predictions on held-out splits, scored against stored labels."""
    records = _all_split_records(cfg)
    index = build_index([r for r in records if r.split is Split.TRAIN])
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    save_index(index, index_path(cfg))
    reports_dir = _stage_dir(cfg, "reports", create=True)
    out: dict[str, dict] = {}
    for split in (Split.TEST, Split.VALIDATION):
        members = [r for r in records if r.split is split and r.labels is not None]
        if not members:
            continue
        predictions = [predict(r.params, index, cfg.k).labels for r in members]
        truths = [r.labels for r in members]
        report = evaluate(predictions, truths).to_dict()
        report["split"] = split.value
        report["k"] = cfg.k
        (reports_dir / f"eval_{split.value}.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        out[split.value] = report
    if not out:
        raise StageInputMissing("no labeled test or validation records to evaluate")
    return out


def stage_pca(cfg: PipelineConfig) -> tuple[Path, Path]:
    """Project all labeled records into the top-2 feature components."""
    records = [r for r in _all_split_records(cfg) if r.labels is not None]
    features, labels = records_to_features(records)
    projection = pca_project(features, labels)
    pca_dir = _stage_dir(cfg, "pca", create=True)
    return export_projection(projection, pca_dir / "projection.csv")

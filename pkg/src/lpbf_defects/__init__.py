"""Toolkit for L-PBF melt pool defect datasets, parsing, and prediction."""

from .core import (
    DefectLabels,
    EmptyMaterial,
    IncompatibleUnits,
    MeltPoolDims,
    ProcessParameters,
    Quantity,
    Record,
    Source,
    Split,
    ToolkitError,
    Unit,
    canonicalize_material,
    normalize_quantity,
)
from .criteria import (
    CriteriaConfig,
    CriterionOutcome,
    Outcome,
    UnknownPolicy,
    balling_criterion,
    classify,
    keyhole_criterion,
    lof_criterion,
)
from .ingest import IngestReport, SourceKind, SourceSchema, ingest_table, label_geometry_records
from .augment import AugmentGrid, GridMode, augment_lof
from .split import SplitSpec, split_records
from .corpus import (
    CorpusExample,
    PromptTemplate,
    format_number,
    load_templates,
    read_corpus,
    render_baseline,
    render_prompts,
    write_corpus,
)
from .parsing import Confidence, Lexicon, ParseResult, load_lexicon, parse_baseline, parse_prompt
from .predictor import (
    Prediction,
    PredictMethod,
    TrainIndex,
    build_index,
    load_index,
    predict,
    predict_with_dims,
    save_index,
)
from .evaluation import EvalReport, PcaProjection, evaluate, export_projection, pca_project

__version__ = "0.1.0"

__all__ = [
    "AugmentGrid",
    "Confidence",
    "CorpusExample",
    "CriteriaConfig",
    "CriterionOutcome",
    "DefectLabels",
    "EmptyMaterial",
    "EvalReport",
    "GridMode",
    "IncompatibleUnits",
    "IngestReport",
    "Lexicon",
    "MeltPoolDims",
    "Outcome",
    "ParseResult",
    "PcaProjection",
    "PredictMethod",
    "Prediction",
    "ProcessParameters",
    "PromptTemplate",
    "Quantity",
    "Record",
    "Source",
    "SourceKind",
    "SourceSchema",
    "Split",
    "SplitSpec",
    "ToolkitError",
    "TrainIndex",
    "Unit",
    "UnknownPolicy",
    "augment_lof",
    "balling_criterion",
    "build_index",
    "canonicalize_material",
    "classify",
    "evaluate",
    "export_projection",
    "format_number",
    "ingest_table",
    "keyhole_criterion",
    "label_geometry_records",
    "load_index",
    "load_lexicon",
    "load_templates",
    "lof_criterion",
    "normalize_quantity",
    "parse_baseline",
    "parse_prompt",
    "pca_project",
    "predict",
    "predict_with_dims",
    "read_corpus",
    "render_baseline",
    "render_prompts",
    "save_index",
    "split_records",
    "write_corpus",
]

"""Defect criteria over melt pool geometry, and the labeling policy.

Three geometric rules decide the defect flags:

* keyhole risk is avoided only when width/depth exceeds a threshold
  (default 1.5); at or below the threshold the flag is set,
* lack of fusion is flagged when (hatch/width)^2 + (layer/depth)^2 exceeds
  the overlap limit (default 1.0); equality still achieves full melting,
* balling is avoided only when length/width stays strictly below a
  threshold (default pi); at or above it the flag is set.

A criterion whose operands are absent reports Unknown; ``classify`` collapses
Unknown according to the configured policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .core import (
    DefectLabels,
    MeltPoolDims,
    NonPositiveDimension,
    ProcessParameters,
    ToolkitError,
)


class IndeterminateCriterion(ToolkitError):
    pass


class UnknownPolicy(str, Enum):
    TREAT_AS_NO_DEFECT = "treat_as_no_defect"
    REJECT = "reject"


@dataclass(frozen=True)
class CriteriaConfig:
    keyhole_ratio_threshold: float = 1.5
    lof_limit: float = 1.0
    balling_ratio_threshold: float = math.pi
    unknown_policy: UnknownPolicy = UnknownPolicy.TREAT_AS_NO_DEFECT

    def __post_init__(self) -> None:
        for name in ("keyhole_ratio_threshold", "lof_limit", "balling_ratio_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


DEFAULT_CONFIG = CriteriaConfig()


class Outcome(str, Enum):
    DEFECT = "defect"
    NO_DEFECT = "no_defect"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CriterionOutcome:
    value: Outcome
    ratio: float | None = None

    def __post_init__(self) -> None:
        if self.value is Outcome.UNKNOWN and self.ratio is not None:
            raise ValueError("unknown outcome must not carry a ratio")


def _check_dims(dims: MeltPoolDims) -> None:
    if not dims.width > 0 or not dims.depth > 0:
        raise NonPositiveDimension("melt pool width and depth must be > 0")


def keyhole_criterion(
    dims: MeltPoolDims, cfg: CriteriaConfig = DEFAULT_CONFIG
) -> CriterionOutcome:
    """Width-to-depth rule; the flag is set unless the ratio exceeds the threshold."""
    _check_dims(dims)
    ratio = dims.width / dims.depth
    flagged = not (ratio > cfg.keyhole_ratio_threshold)
    return CriterionOutcome(Outcome.DEFECT if flagged else Outcome.NO_DEFECT, ratio)


def lof_criterion(
    params: ProcessParameters,
    dims: MeltPoolDims,
    cfg: CriteriaConfig = DEFAULT_CONFIG,
) -> CriterionOutcome:
    """Melt pool overlap rule; Unknown when hatch spacing or layer height is absent."""
    _check_dims(dims)
    if params.hatch_spacing is None or params.layer_height is None:
        return CriterionOutcome(Outcome.UNKNOWN)
    ratio = (params.hatch_spacing / dims.width) ** 2 + (
        params.layer_height / dims.depth
    ) ** 2
    flagged = ratio > cfg.lof_limit
    return CriterionOutcome(Outcome.DEFECT if flagged else Outcome.NO_DEFECT, ratio)


def balling_criterion(
    dims: MeltPoolDims, cfg: CriteriaConfig = DEFAULT_CONFIG
) -> CriterionOutcome:
    """Length-to-width rule; Unknown when the melt pool length is absent."""
    if not dims.width > 0:
        raise NonPositiveDimension("melt pool width must be > 0")
    if dims.length is None:
        return CriterionOutcome(Outcome.UNKNOWN)
    ratio = dims.length / dims.width
    flagged = ratio >= cfg.balling_ratio_threshold
    return CriterionOutcome(Outcome.DEFECT if flagged else Outcome.NO_DEFECT, ratio)


def classify(
    params: ProcessParameters,
    dims: MeltPoolDims,
    cfg: CriteriaConfig = DEFAULT_CONFIG,
) -> DefectLabels:
    """Evaluate all three criteria and collapse them into defect labels.

    Flags are independent, so several defects may be set at once. Unknown
    outcomes are cleared under TREAT_AS_NO_DEFECT and raise
    :class:`IndeterminateCriterion` under REJECT.
    """
    outcomes = {
        "keyhole": keyhole_criterion(dims, cfg),
        "lack_of_fusion": lof_criterion(params, dims, cfg),
        "balling": balling_criterion(dims, cfg),
    }
    flags: dict[str, bool] = {}
    for name, outcome in outcomes.items():
        if outcome.value is Outcome.UNKNOWN:
            if cfg.unknown_policy is UnknownPolicy.REJECT:
                raise IndeterminateCriterion(f"{name} criterion has missing operands")
            flags[name] = False
        else:
            flags[name] = outcome.value is Outcome.DEFECT
    return DefectLabels.from_flags(**flags)

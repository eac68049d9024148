"""Grid augmentation over hatch spacing and layer height.

Each grid point derives a new record from a dimension-bearing parent: the
melt pool width and depth are held fixed, hatch spacing and layer height are
overridden, and labels are recomputed from the criteria. The parent record
is never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .core import MissingDims, Record, Source, Split
from .criteria import CriteriaConfig, DEFAULT_CONFIG, classify


class GridMode(str, Enum):
    CARTESIAN = "cartesian"
    PAIRED = "paired"


def _validate_axis(name: str, values: tuple[float, ...]) -> None:
    if not values:
        raise ValueError(f"{name} must be non-empty")
    if any(v < 0 for v in values):
        raise ValueError(f"{name} must be non-negative")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly increasing")


@dataclass(frozen=True)
class AugmentGrid:
    hatch_values: tuple[float, ...]
    layer_values: tuple[float, ...]
    mode: GridMode = GridMode.CARTESIAN

    def __post_init__(self) -> None:
        object.__setattr__(self, "hatch_values", tuple(self.hatch_values))
        object.__setattr__(self, "layer_values", tuple(self.layer_values))
        _validate_axis("hatch_values", self.hatch_values)
        _validate_axis("layer_values", self.layer_values)
        if self.mode is GridMode.PAIRED and len(self.hatch_values) != len(self.layer_values):
            raise ValueError("paired mode requires equal-length value lists")

    def points(self) -> list[tuple[float, float]]:
        if self.mode is GridMode.PAIRED:
            return list(zip(self.hatch_values, self.layer_values))
        return [(h, l) for h in self.hatch_values for l in self.layer_values]

    @classmethod
    def default(cls) -> "AugmentGrid":
        # 20 equally spaced values, 0 um through 950 um, on both axes
        values = tuple(float(i) * 50.0 for i in range(20))
        return cls(hatch_values=values, layer_values=values, mode=GridMode.CARTESIAN)


def augment_lof(
    record: Record, grid: AugmentGrid, cfg: CriteriaConfig = DEFAULT_CONFIG
) -> list[Record]:
    """Derive one record per grid point; the caller keeps the original.

    Derived records carry the parent id, source AUGMENTED, the parent's dims,
    and freshly classified labels.
    """
    if record.dims is None:
        raise MissingDims(f"record {record.id} has no melt pool dims to augment")
    points = grid.points()
    pad = max(4, len(str(len(points) - 1)))
    derived: list[Record] = []
    for index, (hatch, layer) in enumerate(points):
        params = replace(record.params, hatch_spacing=hatch, layer_height=layer)
        labels = classify(params, record.dims, cfg)
        derived.append(
            Record(
                id=f"{record.id}-aug-{index:0{pad}d}",
                params=params,
                dims=record.dims,
                labels=labels,
                source=Source.AUGMENTED,
                split=Split.UNASSIGNED,
                parent_id=record.id,
            )
        )
    return derived

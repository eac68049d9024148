"""Deterministic train/test/validation assignment, per source-file group.

Each group is shuffled independently with a seeded Fisher-Yates permutation
over records ordered by stable id, so the assignment is a pure function of
(ids, seed): input row order and the presence of other groups never change
it.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .core import Record, Split, ToolkitError


class EmptyGroup(ToolkitError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    test_fraction: float = 0.15
    validation_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self) -> None:
        fractions = (self.train_fraction, self.test_fraction, self.validation_fraction)
        if any(not f > 0 for f in fractions):
            raise ValueError("split fractions must all be positive")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fractions)}")


def split_counts(n: int, spec: SplitSpec) -> tuple[int, int, int]:
    """Floor each fraction, then fill the leftover into train, test, validation."""
    train = math.floor(n * spec.train_fraction + 1e-9)
    test = math.floor(n * spec.test_fraction + 1e-9)
    validation = math.floor(n * spec.validation_fraction + 1e-9)
    leftover = n - train - test - validation
    if leftover >= 1:
        train += 1
    if leftover >= 2:
        test += 1
    if leftover >= 3:
        validation += 1
    assert train + test + validation == n
    return train, test, validation


def split_records(
    records_by_source_file: Mapping[str, Sequence[Record]], spec: SplitSpec
) -> dict[str, list[Record]]:
    """Assign splits within each source-file group independently.

    Returns groups with every record reassigned, each group sorted by id.
    """
    out: dict[str, list[Record]] = {}
    for group in sorted(records_by_source_file):
        records = list(records_by_source_file[group])
        if not records:
            raise EmptyGroup(f"group {group!r} has no records")
        ordered = sorted(records, key=lambda r: r.id)
        rng = random.Random(spec.seed)
        rng.shuffle(ordered)
        n_train, n_test, _ = split_counts(len(ordered), spec)
        assigned = []
        for position, record in enumerate(ordered):
            if position < n_train:
                split = Split.TRAIN
            elif position < n_train + n_test:
                split = Split.TEST
            else:
                split = Split.VALIDATION
            assigned.append(replace(record, split=split))
        out[group] = sorted(assigned, key=lambda r: r.id)
    return out

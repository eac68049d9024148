"""Text corpus rendering: fixed-order separated format and templated prompts.

Two renderings of a labeled record:

* the separated format joins the six parameters, in fixed order with units,
  with the literal token ``[SEP]``; a missing value leaves its slot (value
  and unit) empty while the separators stay put,
* the prompt format substitutes the parameters into a library of templated
  natural-language queries; a missing value renders as "unknown".

Corpora are written as newline-delimited JSON with one-hot label vectors
ordered [keyhole, lack_of_fusion, balling, none].
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib.resources import files
from typing import Iterable, Sequence

from .core import (
    LABEL_ORDER,
    MissingLabels,
    MissingSplit,
    Record,
    Split,
    ToolkitError,
)


class BadPlaceholder(ToolkitError):
    pass


class DuplicateId(ToolkitError):
    pass


class MalformedTemplate(ToolkitError):
    pass


PLACEHOLDERS = (
    "material",
    "power",
    "velocity",
    "beam_diameter",
    "hatch_spacing",
    "layer_height",
)
REQUIRED_PLACEHOLDERS = frozenset({"material", "power", "velocity"})

_UNIT_SUFFIX = {
    "power": " W",
    "velocity": " mm/s",
    "beam_diameter": " um",
    "hatch_spacing": " um",
    "layer_height": " um",
}

_PLACEHOLDER_RE = re.compile(r"\{([^{}]*)\}")


def format_number(value: float) -> str:
    """Shortest exact decimal: no trailing zeros, no exponent below 1e7."""
    number = float(value)
    if number != number or number in (float("inf"), float("-inf")):
        raise ValueError(f"cannot format {value!r}")
    if number == int(number) and abs(number) < 1e16:
        return str(int(number))
    text = repr(number)
    if ("e" in text or "E" in text) and abs(number) < 1e7:
        text = _expand_exponent(text)
    return text


def _expand_exponent(text: str) -> str:
    mantissa, _, exponent = text.lower().partition("e")
    shift = int(exponent)
    sign = "-" if mantissa.startswith("-") else ""
    digits = mantissa.lstrip("-")
    whole, _, frac = digits.partition(".")
    point = len(whole) + shift
    all_digits = whole + frac
    if point <= 0:
        return f"{sign}0.{'0' * (-point)}{all_digits}".rstrip("0")
    if point >= len(all_digits):
        return f"{sign}{all_digits}{'0' * (point - len(all_digits))}"
    return f"{sign}{all_digits[:point]}.{all_digits[point:]}".rstrip(".")


@dataclass(frozen=True)
class PromptTemplate:
    id: int
    text: str
    split: Split

    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER_RE.findall(self.text))


@dataclass(frozen=True)
class CorpusExample:
    text: str
    labels: tuple[bool, bool, bool, bool]
    split: Split
    record_id: str
    template_id: int | None = None

    def __post_init__(self) -> None:
        keyhole, lof, balling, none = self.labels
        if none != (not (keyhole or lof or balling)):
            raise ValueError("label vector violates the none-flag rule")


def _require_labels_and_split(record: Record) -> None:
    if record.labels is None:
        raise MissingLabels(f"record {record.id} has no labels")
    if record.split is Split.UNASSIGNED:
        raise MissingSplit(f"record {record.id} has no split assigned")


def render_baseline(record: Record) -> CorpusExample:
    """Fixed-order separated text; missing values leave empty slots."""
    _require_labels_and_split(record)
    slots = []
    for name in PLACEHOLDERS:
        value = getattr(record.params, name)
        if value is None:
            slots.append("")
        elif name == "material":
            slots.append(str(value))
        else:
            slots.append(format_number(value) + _UNIT_SUFFIX[name])
    return CorpusExample(
        text=" [SEP] ".join(slots),
        labels=record.labels.as_vector(),
        split=record.split,
        record_id=record.id,
    )


def template_split_for_id(template_id: int) -> Split:
    """Ids 1-75 train, 76-90 test, 91-100 validation."""
    if 1 <= template_id <= 75:
        return Split.TRAIN
    if 76 <= template_id <= 90:
        return Split.TEST
    if 91 <= template_id <= 100:
        return Split.VALIDATION
    raise MalformedTemplate(f"template id {template_id} outside 1..100")


def _validate_template_text(template_id: int, text: str) -> None:
    # a stray brace breaks substitution, so probe-format the text up front
    probe = {name: "x" for name in PLACEHOLDERS}
    try:
        text.format_map(probe)
    except (KeyError, ValueError, IndexError) as exc:
        raise BadPlaceholder(f"template {template_id}: {exc}") from None
    names = set(_PLACEHOLDER_RE.findall(text))
    unknown = names - set(PLACEHOLDERS)
    if unknown:
        raise BadPlaceholder(
            f"template {template_id}: unknown placeholder(s) {sorted(unknown)}"
        )
    missing = REQUIRED_PLACEHOLDERS - names
    if missing:
        raise BadPlaceholder(
            f"template {template_id}: required placeholder(s) {sorted(missing)} absent"
        )


def default_templates_path():
    return files("lpbf_defects").joinpath("data/templates.txt")


def load_templates(path=None) -> list[PromptTemplate]:
    """Load ``id<TAB>text`` templates and assign their split by id."""
    source = default_templates_path() if path is None else path
    if hasattr(source, "read_text"):
        text = source.read_text("utf-8")
    else:
        with open(source, "r", encoding="utf-8") as handle:
            text = handle.read()
    templates: list[PromptTemplate] = []
    seen: set[int] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        head, sep, body = line.partition("\t")
        if not sep or not body.strip():
            raise MalformedTemplate(f"line {line_no}: expected 'id<TAB>text'")
        try:
            template_id = int(head)
        except ValueError:
            raise MalformedTemplate(f"line {line_no}: bad id {head!r}") from None
        if template_id in seen:
            raise DuplicateId(f"duplicate template id {template_id}")
        seen.add(template_id)
        _validate_template_text(template_id, body.strip())
        templates.append(
            PromptTemplate(
                id=template_id,
                text=body.strip(),
                split=template_split_for_id(template_id),
            )
        )
    return templates


def render_prompts(
    record: Record, templates: Iterable[PromptTemplate]
) -> list[CorpusExample]:
    """One example per template whose split matches the record's split."""
    _require_labels_and_split(record)
    values: dict[str, str] = {}
    for name in PLACEHOLDERS:
        value = getattr(record.params, name)
        if value is None:
            values[name] = "unknown"
        elif name == "material":
            values[name] = str(value)
        else:
            values[name] = format_number(value) + _UNIT_SUFFIX[name]
    examples = []
    for template in templates:
        if template.split is not record.split:
            continue
        examples.append(
            CorpusExample(
                text=template.text.format_map(values),
                labels=record.labels.as_vector(),
                split=record.split,
                record_id=record.id,
                template_id=template.id,
            )
        )
    return examples


def _sort_key(example: CorpusExample) -> tuple:
    return (example.record_id, -1 if example.template_id is None else example.template_id)


def write_corpus(examples: Sequence[CorpusExample], path, format: str) -> None:
    """Write newline-delimited JSON, stably ordered by (record_id, template_id)."""
    if format not in ("baseline", "prompt"):
        raise ValueError(f"unknown corpus format {format!r}")
    if not examples:
        raise ValueError("refusing to write an empty corpus")
    for example in examples:
        if format == "baseline" and example.template_id is not None:
            raise ValueError("baseline corpus must not carry template ids")
        if format == "prompt" and example.template_id is None:
            raise ValueError("prompt corpus requires template ids")
    with open(path, "w", encoding="utf-8") as handle:
        for example in sorted(examples, key=_sort_key):
            payload = {
                "text": example.text,
                "labels": [int(flag) for flag in example.labels],
                "split": example.split.value,
                "record_id": example.record_id,
            }
            if example.template_id is not None:
                payload["template_id"] = example.template_id
            handle.write(json.dumps(payload) + "\n")


def read_corpus(path) -> list[CorpusExample]:
    examples = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            data = json.loads(line)
            examples.append(
                CorpusExample(
                    text=data["text"],
                    labels=tuple(bool(v) for v in data["labels"]),
                    split=Split(data["split"]),
                    record_id=data["record_id"],
                    template_id=data.get("template_id"),
                )
            )
    return examples


def labels_vector_names() -> tuple[str, ...]:
    return LABEL_ORDER

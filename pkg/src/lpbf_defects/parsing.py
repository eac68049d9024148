"""Extraction of process parameters from separated text and free-form prompts.

The separated format is positional, so parsing it is the exact inverse of
rendering. Free-form prompts go through deterministic rule-based extraction:

1. unit-anchored: a number immediately followed by a power unit binds power,
   by a speed unit binds velocity,
2. keyword-anchored: a number near "beam diameter"/"spot size", "hatch
   spacing"/"hatch", or "layer height"/"layer thickness" binds that field
   (micrometers by default). The keyword may sit on either side of the
   number; the nearest keyword wins, counting whole words between the two,
   with the keyword-before-number reading preferred on ties. Punctuation
   between number and keyword breaks the association (a ':' is allowed
   between a keyword and its value),
3. material: longest alias-table match anywhere in the text.

Bare numbers with neither unit nor keyword are never bound; they are
reported in ``unmatched_spans`` instead. Duplicate bindings for one field
keep the first and report the rest. No input text is fatal: a fully
unparseable prompt yields an all-Missing result whose unmatched span covers
the whole text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib.resources import files
from typing import Mapping

from .core import (
    MalformedNumber,
    PARAM_FIELDS,
    ProcessParameters,
    ToolkitError,
    canonicalize_material,
    material_alias_table,
)


class SeparatorCountMismatch(ToolkitError):
    pass


class Confidence(str, Enum):
    EXACT = "exact"
    INFERRED = "inferred"
    MISSING = "missing"


@dataclass(frozen=True)
class ParseResult:
    params: ProcessParameters
    confidence: Mapping[str, Confidence]
    unmatched_spans: tuple[tuple[int, str], ...] = ()

    def __post_init__(self) -> None:
        if set(self.confidence) != set(PARAM_FIELDS):
            raise ValueError("confidence must cover every canonical field")
        for name in PARAM_FIELDS:
            present = getattr(self.params, name) is not None
            if present and self.confidence[name] is Confidence.MISSING:
                raise ValueError(f"{name} present but marked missing")
            if not present and self.confidence[name] is not Confidence.MISSING:
                raise ValueError(f"{name} absent but not marked missing")

    def bound_fields(self) -> tuple[str, ...]:
        return tuple(
            name for name in PARAM_FIELDS if self.confidence[name] is not Confidence.MISSING
        )

    def to_dict(self) -> dict:
        return {
            "params": {name: getattr(self.params, name) for name in PARAM_FIELDS},
            "confidence": {name: conf.value for name, conf in self.confidence.items()},
            "unmatched_spans": [[offset, text] for offset, text in self.unmatched_spans],
        }


@dataclass(frozen=True)
class Lexicon:
    """Material aliases plus unit and keyword patterns for prompt extraction."""

    material_aliases: Mapping[str, str]  # normalized alias -> canonical id
    keywords: Mapping[str, tuple[str, ...]]  # field -> keyword phrases
    unit_tokens: Mapping[str, tuple[str, float]]  # token -> (kind, factor)

    def number_pattern(self) -> re.Pattern:
        # boundaries reject digits embedded in identifiers ("316L", "1.2.3")
        # while allowing sentence punctuation right after a number or unit
        tokens = sorted(self.unit_tokens, key=len, reverse=True)
        alternation = "|".join(re.escape(token) for token in tokens)
        return re.compile(
            rf"(?<![\w.])(\d+(?:\.\d+)?)(?:\s*({alternation})(?!\w)|(?!\w)(?!\.\w))",
            re.IGNORECASE,
        )

    def keyword_pattern(self) -> re.Pattern:
        pairs = sorted(
            ((phrase, field) for field, phrases in self.keywords.items() for phrase in phrases),
            key=lambda p: len(p[0]),
            reverse=True,
        )
        alternation = "|".join(re.escape(phrase) for phrase, _ in pairs)
        return re.compile(rf"\b({alternation})\b", re.IGNORECASE)

    def field_for_keyword(self, phrase: str) -> str:
        lowered = phrase.lower()
        for field, phrases in self.keywords.items():
            if lowered in phrases:
                return field
        raise KeyError(phrase)


@lru_cache(maxsize=1)
def load_lexicon() -> Lexicon:
    raw = json.loads(files("lpbf_defects").joinpath("data/lexicon.json").read_text("utf-8"))
    unit_tokens = {
        token.lower(): (kind, float(factor))
        for kind, tokens in raw["units"].items()
        for token, factor in tokens.items()
    }
    keywords = {
        field: tuple(p.lower() for p in phrases) for field, phrases in raw["keywords"].items()
    }
    return Lexicon(
        material_aliases=material_alias_table(),
        keywords=keywords,
        unit_tokens=unit_tokens,
    )


# --- separated-format parsing -------------------------------------------------

_SEPARATOR = "[SEP]"
_SLOT_UNITS = {
    "power": {"w": 1.0, "kw": 1000.0},
    "velocity": {"mm/s": 1.0, "m/s": 1000.0},
    "beam_diameter": {"um": 1.0, "µm": 1.0, "μm": 1.0, "mm": 1000.0},
    "hatch_spacing": {"um": 1.0, "µm": 1.0, "μm": 1.0, "mm": 1000.0},
    "layer_height": {"um": 1.0, "µm": 1.0, "μm": 1.0, "mm": 1000.0},
}
_SLOT_RE = re.compile(r"^(\d+(?:\.\d+)?)(?:\s*(\S+))?$")


def _parse_slot(field: str, text: str) -> float:
    match = _SLOT_RE.match(text)
    if not match:
        raise MalformedNumber(f"{field} slot is not a number: {text!r}")
    value = float(match.group(1))
    unit = match.group(2)
    if unit is not None:
        factor = _SLOT_UNITS[field].get(unit.lower())
        if factor is None:
            raise MalformedNumber(f"{field} slot has unusable unit {unit!r}")
        value *= factor
    return value


def parse_baseline(text: str) -> ParseResult:
    """Positional parse of the separated format; exact inverse of rendering."""
    count = text.count(_SEPARATOR)
    if count != 5:
        raise SeparatorCountMismatch(f"expected 5 {_SEPARATOR} separators, found {count}")
    slots = [part.strip() for part in text.split(_SEPARATOR)]
    values: dict[str, object] = {}
    confidence = {name: Confidence.MISSING for name in PARAM_FIELDS}
    for name, slot in zip(PARAM_FIELDS, slots):
        if not slot:
            continue
        if name == "material":
            values[name] = canonicalize_material(slot)
        else:
            values[name] = _parse_slot(name, slot)
        confidence[name] = Confidence.EXACT
    try:
        params = ProcessParameters(**values)  # type: ignore[arg-type]
    except ValueError as exc:
        raise MalformedNumber(str(exc)) from None
    return ParseResult(params=params, confidence=confidence, unmatched_spans=())


# --- prompt parsing -----------------------------------------------------------

# punctuation between a number and a keyword breaks the association; a ':'
# may still introduce a value after its keyword
_BLOCKERS_BEFORE = set(",;.?!")
_BLOCKERS_AFTER = set(",;.:?!")
_WINDOW_CHARS = 40


def _find_material(text: str, lexicon: Lexicon) -> tuple[tuple[int, int] | None, str | None]:
    lowered = text.lower()
    aliases = sorted(lexicon.material_aliases, key=lambda a: (-len(a), a))
    for alias in aliases:
        start = 0
        while True:
            position = lowered.find(alias, start)
            if position < 0:
                break
            end = position + len(alias)
            before_ok = position == 0 or not lowered[position - 1].isalnum()
            after_ok = end == len(lowered) or not lowered[end].isalnum()
            if before_ok and after_ok:
                return (position, end), lexicon.material_aliases[alias]
            start = position + 1
    return None, None


def _word_distance(gap: str) -> int:
    return len(gap.split())


def _keyword_candidates(
    span: tuple[int, int], keywords: list[tuple[str, int, int]], text: str
) -> list[tuple[int, int, int, str]]:
    """(word distance, side order, char gap, field) for keywords near a number."""
    start, end = span
    candidates = []
    for field, kw_start, kw_end in keywords:
        if kw_end <= start:
            gap = text[kw_end:start]
            side = 0  # keyword before number
            blockers = _BLOCKERS_BEFORE
        elif kw_start >= end:
            gap = text[end:kw_start]
            side = 1  # keyword after number
            blockers = _BLOCKERS_AFTER
        else:
            continue
        if len(gap) > _WINDOW_CHARS:
            continue
        if any(ch in blockers for ch in gap):
            continue
        candidates.append((_word_distance(gap), side, len(gap), field))
    return sorted(candidates)


def parse_prompt(text: str, lexicon: Lexicon | None = None) -> ParseResult:
    """Rule-based extraction; never fatal, returns all-Missing at worst."""
    lexicon = lexicon or load_lexicon()
    values: dict[str, float] = {}
    confidence = {name: Confidence.MISSING for name in PARAM_FIELDS}
    unmatched: list[tuple[int, str]] = []

    material_span, material = _find_material(text, lexicon)
    if material is not None:
        confidence["material"] = Confidence.EXACT

    keyword_hits = [
        (lexicon.field_for_keyword(m.group(1)), m.start(1), m.end(1))
        for m in lexicon.keyword_pattern().finditer(text)
    ]

    for match in lexicon.number_pattern().finditer(text):
        span = (match.start(), match.end())
        if material_span and span[0] < material_span[1] and span[1] > material_span[0]:
            continue  # digits inside the material mention
        value = float(match.group(1))
        unit_token = match.group(2)
        kind, factor = (None, 1.0)
        if unit_token is not None:
            kind, factor = lexicon.unit_tokens[unit_token.lower()]

        field: str | None = None
        bound_confidence = Confidence.EXACT
        if kind == "power":
            field = "power"
        elif kind == "velocity":
            field = "velocity"
        else:
            candidates = _keyword_candidates(span, keyword_hits, text)
            if candidates:
                field = candidates[0][3]
                if unit_token is None:
                    bound_confidence = Confidence.INFERRED  # micrometers assumed

        if field is None:
            unmatched.append((span[0], match.group(0)))
            continue
        if field in values:
            unmatched.append((span[0], match.group(0)))  # first binding wins
            continue
        values[field] = value * factor
        confidence[field] = bound_confidence

    bound_anything = material is not None or bool(values)
    if not bound_anything:
        unmatched = [(0, text)]

    params_kwargs: dict[str, object] = dict(values)
    if material is not None:
        params_kwargs["material"] = material
    try:
        params = ProcessParameters(**params_kwargs)  # type: ignore[arg-type]
    except ValueError:
        # a nonsensical bound value (e.g. "0 W") downgrades to unbound
        cleaned: dict[str, object] = {}
        for name, value in params_kwargs.items():
            try:
                ProcessParameters(**{name: value})  # type: ignore[arg-type]
            except ValueError:
                confidence[name] = Confidence.MISSING
                unmatched.append((0, f"{name}={value}"))
            else:
                cleaned[name] = value
        params = ProcessParameters(**cleaned)  # type: ignore[arg-type]
        if not cleaned:
            unmatched = [(0, text)]
    return ParseResult(
        params=params,
        confidence=confidence,
        unmatched_spans=tuple(unmatched),
    )

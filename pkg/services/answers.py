"""
Execution values and answers (what f(G) produces and what gold annotations hold).
"""

import re
import string
from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Optional, Tuple, Union

from services.numbers import format_number, parse_number

_PUNCTUATION = frozenset(string.punctuation)


class Scale(str, Enum):
    NONE = "none"
    THOUSAND = "thousand"
    MILLION = "million"
    BILLION = "billion"
    PERCENT = "percent"

    @classmethod
    def parse(cls, raw: Optional[str]) -> "Scale":
        key = (raw or "").strip().lower()
        if key in ("", "none"):
            return cls.NONE
        return cls(key)


class AnswerKind(str, Enum):
    SPAN = "SPAN"
    SPANS = "SPANS"
    NUMBER = "NUMBER"
    COUNT = "COUNT"


# ---- values ----

@dataclass(frozen=True)
class Text:
    items: Tuple[str, ...]


@dataclass(frozen=True)
class Number:
    value: Decimal


@dataclass(frozen=True)
class Pairs:
    pairs: Tuple[Tuple[str, Decimal], ...]


@dataclass(frozen=True)
class CountVal:
    value: int


Value = Union[Text, Number, Pairs, CountVal]


@dataclass(frozen=True)
class Answer:
    kind: AnswerKind
    payload: Value
    scale: Optional[Scale] = None

    # ---- constructors ----
    @classmethod
    def span(cls, text: str, scale: Optional[Scale] = None) -> "Answer":
        return cls(AnswerKind.SPAN, Text((text,)), scale)

    @classmethod
    def spans(cls, items, scale: Optional[Scale] = None) -> "Answer":
        return cls(AnswerKind.SPANS, Text(tuple(items)), scale)

    @classmethod
    def number(cls, value, scale: Optional[Scale] = None) -> "Answer":
        return cls(AnswerKind.NUMBER, Number(Decimal(str(value))), scale)

    @classmethod
    def count(cls, value: int, scale: Optional[Scale] = None) -> "Answer":
        return cls(AnswerKind.COUNT, CountVal(int(value)), scale)

    def with_scale(self, scale: Optional[Scale]) -> "Answer":
        return Answer(self.kind, self.payload, scale)

    # ---- views ----
    def numeric_value(self) -> Optional[Decimal]:
        """Numeric reading of the answer, if it has one (single numeric spans included)."""
        if isinstance(self.payload, Number):
            return self.payload.value
        if isinstance(self.payload, CountVal):
            return Decimal(self.payload.value)
        if isinstance(self.payload, Text) and len(self.payload.items) == 1:
            return parse_number(self.payload.items[0])
        return None

    def texts(self) -> Tuple[str, ...]:
        if isinstance(self.payload, Text):
            return self.payload.items
        if isinstance(self.payload, Number):
            return (format_number(self.payload.value),)
        if isinstance(self.payload, CountVal):
            return (str(self.payload.value),)
        return tuple(k for k, _ in self.payload.pairs)

    def to_dict(self) -> dict:
        if isinstance(self.payload, Number):
            value = float(self.payload.value)
        elif isinstance(self.payload, CountVal):
            value = self.payload.value
        elif self.kind is AnswerKind.SPAN:
            value = self.payload.items[0]
        else:
            value = list(self.texts())
        return {
            "kind": self.kind.value,
            "value": value,
            "scale": self.scale.value if self.scale is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Answer":
        kind = AnswerKind(data["kind"])
        scale = Scale.parse(data["scale"]) if data.get("scale") is not None else None
        value = data["value"]
        if kind is AnswerKind.NUMBER:
            return cls.number(value, scale)
        if kind is AnswerKind.COUNT:
            return cls.count(int(value), scale)
        if kind is AnswerKind.SPAN:
            return cls.span(value if isinstance(value, str) else value[0], scale)
        return cls.spans(value, scale)


# ---- text normalization (shared by answers_match and the metrics) ----

_ARTICLES = re.compile(r"\b(a|an|the)\b", re.UNICODE)


def normalize_text(text: str) -> str:
    """Lower-case, drop punctuation and articles, collapse whitespace."""
    text = (text or "").lower()
    text = "".join(ch for ch in text if ch not in _PUNCTUATION)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())

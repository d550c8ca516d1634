"""
Deterministic whitespace + punctuation tokenizer with numeric-literal preservation.

Two modes:
  word  - numeric literals ("1,496.5", "$0.53", "(1.2)", "5%") stay single tokens
  digit - numeric literals are split into one token per character, the way
          subword vocabularies fragment numerals
"""

import re
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from services.numbers import has_percent

TOKENIZER_MODES = ("word", "digit")

_CORE = r"(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|\.\d+"
_NOT_WORD = r"(?![^\W_])"
_NUMBER = (
    rf"\([$€£]?-?(?:{_CORE})%?\)"
    rf"|(?:(?<![\w)])-)?[$€£]?(?:(?<=[$€£])-)?(?:{_CORE})%?{_NOT_WORD}"
)
_PATTERN = re.compile(rf"(?P<num>{_NUMBER})|(?P<word>\w+)|(?P<punct>[^\w\s])")


class RegionKind(str, Enum):
    QUESTION = "QUESTION"
    TABLE_CELL = "TABLE_CELL"
    PARAGRAPH = "PARAGRAPH"
    SEPARATOR = "SEPARATOR"


@dataclass(frozen=True, order=True)
class Region:
    """Provenance of a token. TABLE_CELL uses (a, b) = (row, col); PARAGRAPH and SEPARATOR use a."""

    kind: RegionKind
    a: int = 0
    b: int = 0

    @classmethod
    def question(cls) -> "Region":
        return cls(RegionKind.QUESTION)

    @classmethod
    def cell(cls, row: int, col: int) -> "Region":
        return cls(RegionKind.TABLE_CELL, row, col)

    @classmethod
    def paragraph(cls, k: int) -> "Region":
        return cls(RegionKind.PARAGRAPH, k)

    @classmethod
    def separator(cls, i: int) -> "Region":
        return cls(RegionKind.SEPARATOR, i)

    @property
    def is_cell(self) -> bool:
        return self.kind is RegionKind.TABLE_CELL

    @property
    def is_text(self) -> bool:
        return self.kind in (RegionKind.QUESTION, RegionKind.PARAGRAPH)

    @property
    def is_separator(self) -> bool:
        return self.kind is RegionKind.SEPARATOR

    def label(self) -> str:
        if self.kind is RegionKind.TABLE_CELL:
            return f"TABLE_CELL({self.a},{self.b})"
        if self.kind in (RegionKind.PARAGRAPH, RegionKind.SEPARATOR):
            return f"{self.kind.value}({self.a})"
        return self.kind.value


@dataclass(frozen=True)
class Token:
    surface: str
    char_start: int
    char_end: int
    provenance: Optional[Region] = None
    percent: bool = False

    def to_dict(self) -> dict:
        return {
            "surface": self.surface,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "provenance": self.provenance.label() if self.provenance else None,
            "percent": self.percent,
        }


def tokenize(text: str, mode: str = "word") -> List[Token]:
    if mode not in TOKENIZER_MODES:
        raise ValueError(f"unknown tokenizer mode {mode!r}")
    tokens: List[Token] = []
    for m in _PATTERN.finditer(text or ""):
        surface = m.group(0)
        if m.lastgroup == "num":
            if mode == "digit" and len(surface) > 1:
                for offset, ch in enumerate(surface):
                    pos = m.start() + offset
                    tokens.append(Token(ch, pos, pos + 1))
                continue
            tokens.append(Token(surface, m.start(), m.end(), percent=has_percent(surface)))
        else:
            tokens.append(Token(surface, m.start(), m.end()))
    return tokens

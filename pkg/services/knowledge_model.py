"""
Hybrid table + text contexts and their linearization into the sequence S:

    [<s>; question; </s>; table (row-major); </s>; paragraphs (ranked); </s>]

Every token carries its provenance region; cell boundaries live in provenance,
never in surface tokens.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Dict, List, Optional, Sequence, Tuple

from services.answers import Answer, Scale, normalize_text
from services.errors import OversizeContext
from services.numbers import has_percent, parse_number
from services.tokenizer import Region, Token, tokenize

log = logging.getLogger("rpg.knowledge_model")

DEFAULT_MAX_CONTEXT_TOKENS = 2048
OPEN_SEPARATOR = "<s>"
CLOSE_SEPARATOR = "</s>"


# ------------------------------------------------------------
#  Context types
# ------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    row: int
    col: int
    text: str
    number: Optional[Decimal] = None
    percent: bool = False

    @classmethod
    def build(cls, row: int, col: int, text: str) -> "Cell":
        text = "" if text is None else str(text)
        return cls(row, col, text, parse_number(text), has_percent(text))


@dataclass(frozen=True)
class Table:
    cells: Tuple[Tuple[Cell, ...], ...] = ()

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[str]]) -> "Table":
        """Build a dense grid; ragged rows are padded with empty cells."""
        width = max((len(r) for r in rows), default=0)
        if width == 0:
            return cls(())
        grid = []
        for r, row in enumerate(rows):
            padded = list(row) + [""] * (width - len(row))
            grid.append(tuple(Cell.build(r, c, text) for c, text in enumerate(padded)))
        return cls(tuple(grid))

    def cell(self, row: int, col: int) -> Cell:
        return self.cells[row][col]

    def to_rows(self) -> List[List[str]]:
        return [[c.text for c in row] for row in self.cells]


@dataclass(frozen=True)
class Paragraph:
    id: int
    text: str
    rank_score: Optional[float] = None


@dataclass(frozen=True)
class HybridContext:
    id: str
    question: str
    table: Table = field(default_factory=Table)
    paragraphs: Tuple[Paragraph, ...] = ()
    gold_answer: Optional[Answer] = None
    gold_scale: Optional[Scale] = None
    derivation: Optional[str] = None
    answer_from: Optional[str] = None
    source: str = "tatqa"

    def with_question(self, question: str, new_id: str) -> "HybridContext":
        return replace(self, question=question, id=new_id)

    @property
    def gold(self) -> Optional[Answer]:
        """Gold answer carrying the gold scale."""
        if self.gold_answer is None:
            return None
        return self.gold_answer.with_scale(self.gold_scale)


# ------------------------------------------------------------
#  Linearized sequence
# ------------------------------------------------------------

@dataclass(frozen=True)
class LinearizedInput:
    context_id: str
    tokens: Tuple[Token, ...]
    region_bounds: Dict[Region, Tuple[int, int]]
    sources: Dict[Region, str]
    table_shape: Tuple[int, int] = (0, 0)

    @property
    def length(self) -> int:
        return len(self.tokens)

    def region_at(self, i: int) -> Region:
        return self.tokens[i].provenance

    def same_region(self, s: int, e: int) -> Optional[Region]:
        """Region holding the whole range [s, e], or None."""
        if not (0 <= s <= e < self.length):
            return None
        region = self.tokens[s].provenance
        if region.is_separator:
            return None
        first, last = self.region_bounds[region]
        return region if first <= s and e <= last else None

    def span_text(self, s: int, e: int) -> Optional[str]:
        region = self.same_region(s, e)
        if region is None:
            return None
        raw = self.sources[region][self.tokens[s].char_start:self.tokens[e].char_end]
        return " ".join(raw.split())

    def to_dict(self) -> dict:
        return {
            "context_id": self.context_id,
            "length": self.length,
            "tokens": [t.to_dict() for t in self.tokens],
            "region_bounds": {r.label(): list(b) for r, b in self.region_bounds.items()},
        }


def _is_wordlike(surface: str) -> bool:
    return any(ch.isalnum() for ch in surface)


def paragraph_similarity(question: str, text: str) -> float:
    """Token-level F1 between the question and paragraph bags of words."""
    q = Counter(t.surface.lower() for t in tokenize(question) if _is_wordlike(t.surface))
    p = Counter(t.surface.lower() for t in tokenize(text) if _is_wordlike(t.surface))
    common = sum((q & p).values())
    if common == 0:
        return 0.0
    precision = common / sum(p.values())
    recall = common / sum(q.values())
    return 2 * precision * recall / (precision + recall)


def rank_paragraphs(question: str, paragraphs: Sequence[Paragraph]) -> List[Paragraph]:
    scored = [replace(p, rank_score=paragraph_similarity(question, p.text)) for p in paragraphs]
    # sorted() is stable, so equal scores keep input order
    return sorted(scored, key=lambda p: -p.rank_score)


def _ordered_paragraphs(paragraphs: Sequence[Paragraph]) -> List[Paragraph]:
    if paragraphs and all(p.rank_score is not None for p in paragraphs):
        return sorted(paragraphs, key=lambda p: (-p.rank_score, p.id))
    return list(paragraphs)


def linearize(ctx: HybridContext, tokenizer: str = "word",
              max_tokens: int = DEFAULT_MAX_CONTEXT_TOKENS) -> LinearizedInput:
    tokens: List[Token] = []
    bounds: Dict[Region, Tuple[int, int]] = {}
    sources: Dict[Region, str] = {}
    separators = 0

    def add_separator(surface: str):
        nonlocal separators
        region = Region.separator(separators)
        separators += 1
        bounds[region] = (len(tokens), len(tokens))
        tokens.append(Token(surface, 0, 0, region))

    def add_text(region: Region, text: str):
        pieces = tokenize(text, tokenizer)
        sources[region] = text
        if not pieces:
            return
        bounds[region] = (len(tokens), len(tokens) + len(pieces) - 1)
        tokens.extend(replace(t, provenance=region) for t in pieces)

    add_separator(OPEN_SEPARATOR)
    add_text(Region.question(), ctx.question)
    add_separator(CLOSE_SEPARATOR)
    for row in ctx.table.cells:
        for cell in row:
            add_text(Region.cell(cell.row, cell.col), cell.text)
    add_separator(CLOSE_SEPARATOR)
    for p in _ordered_paragraphs(ctx.paragraphs):
        add_text(Region.paragraph(p.id), p.text)
    add_separator(CLOSE_SEPARATOR)

    if len(tokens) > max_tokens:
        raise OversizeContext(len(tokens), max_tokens)
    log.debug("linearized %s into %d tokens", ctx.id, len(tokens))
    return LinearizedInput(ctx.id, tuple(tokens), bounds, sources,
                           (ctx.table.rows, ctx.table.cols))


# ------------------------------------------------------------
#  Mentions inside a linearized sequence
# ------------------------------------------------------------

@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    region: Region
    text: str
    value: Optional[Decimal] = None

    @property
    def range(self) -> Tuple[int, int]:
        return self.start, self.end


def _regions_in_order(li: LinearizedInput) -> List[Tuple[Region, Tuple[int, int]]]:
    return sorted(((r, b) for r, b in li.region_bounds.items() if not r.is_separator),
                  key=lambda rb: rb[1][0])


def numeric_mentions(li: LinearizedInput) -> List[Mention]:
    """
    Maximal numeric literals, whatever tokenizer built the sequence: each literal
    the word tokenizer would keep whole maps to the token range covering it.
    """
    out: List[Mention] = []
    for region, (first, last) in _regions_in_order(li):
        source = li.sources[region]
        for lit in tokenize(source, "word"):
            if parse_number(lit.surface) is None:
                continue
            inside = [i for i in range(first, last + 1)
                      if li.tokens[i].char_start >= lit.char_start and li.tokens[i].char_end <= lit.char_end]
            if not inside:
                continue
            s, e = inside[0], inside[-1]
            text = li.span_text(s, e)
            value = parse_number(text)
            if value is not None:
                out.append(Mention(s, e, region, text, value))
    return out


def text_occurrences(li: LinearizedInput, target: str, max_span_length: int) -> List[Mention]:
    """Every range whose normalized text equals the normalized target, in sequence order."""
    want = normalize_text(target)
    if not want:
        return []
    out: List[Mention] = []
    for region, (first, last) in _regions_in_order(li):
        for s in range(first, last + 1):
            head = normalize_text(li.tokens[s].surface)
            if not head or not want.startswith(head):
                continue
            for e in range(s, min(last, s + max_span_length - 1) + 1):
                text = li.span_text(s, e)
                got = normalize_text(text)
                if got == want:
                    out.append(Mention(s, e, region, text, parse_number(text)))
                if len(got) > len(want):
                    break
    return out

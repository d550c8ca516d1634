"""
Annotated derivations -> grounded programs.

Arithmetic derivations ("0.53-0.47", "(70.07+80.82)/2", "(1,496.5-1,202.9)/1,202.9")
are parsed as infix expressions and rewritten onto the operation set:

    (a + b [+ c]) / n     ->  AVG(a, b [, c])       when n equals the term count
    (a - b) / b           ->  CHANGE_R(a, b)
    + - * /               ->  SUM DIFF TIMES DIV

Count derivations list their items separated by "##".
Each literal is grounded on a number mention of the context: table, then paragraphs, then the question.
"""

import logging
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import List, Optional, Tuple, Union

from services.knowledge_model import (
    HybridContext, LinearizedInput, Mention, linearize, numeric_mentions, text_occurrences,
)
from services.numbers import parse_number
from services.program_dsl import CONSTANTS, Atomic, Const, Higher, Node, Op, Program
from services.tokenizer import RegionKind

log = logging.getLogger("rpg.derivation")

COUNT_SEPARATOR = "##"

_LEXEME = re.compile(
    r"\s*(?:(?P<num>[$€£]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)%?)|(?P<op>[-+*/×÷()]))"
)
_OPS = {"+": Op.SUM, "-": Op.DIFF, "*": Op.TIMES, "×": Op.TIMES, "/": Op.DIV, "÷": Op.DIV}


class DerivationError(ValueError):
    pass


@dataclass(frozen=True)
class Literal:
    surface: str
    value: Decimal


@dataclass(frozen=True)
class BinOp:
    symbol: str
    left: "Expr"
    right: "Expr"


Expr = Union[Literal, BinOp]


# ------------------------------------------------------------
#  Infix parsing
# ------------------------------------------------------------

def _lex(text: str) -> List[Tuple[str, str]]:
    out = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _LEXEME.match(text, pos)
        if not m or m.end() == pos:
            raise DerivationError(f"unexpected character {text[pos]!r} at {pos}")
        out.append(("num", m.group("num")) if m.group("num") else ("op", m.group("op")))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Infix:
    def __init__(self, lexemes):
        self.lx = lexemes
        self.i = 0

    def peek(self):
        return self.lx[self.i] if self.i < len(self.lx) else (None, None)

    def take(self):
        item = self.peek()
        self.i += 1
        return item

    def expr(self) -> Expr:
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            _, sym = self.take()
            node = BinOp(sym, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/×÷":
            _, sym = self.take()
            node = BinOp(sym, node, self.factor())
        return node

    def factor(self) -> Expr:
        kind, val = self.take()
        if kind == "num":
            value = parse_number(val)
            if value is None:
                raise DerivationError(f"malformed number {val!r}")
            return Literal(val, value)
        if (kind, val) == ("op", "-"):
            inner = self.factor()
            if isinstance(inner, Literal):
                return Literal("-" + inner.surface, -inner.value)
            raise DerivationError("unary minus is only supported on literals")
        if (kind, val) == ("op", "("):
            node = self.expr()
            if self.take() != ("op", ")"):
                raise DerivationError("unbalanced parentheses")
            return node
        raise DerivationError(f"unexpected {val!r}")


def parse_derivation(text: str) -> Expr:
    parser = _Infix(_lex(text))
    node = parser.expr()
    if parser.i != len(parser.lx):
        raise DerivationError("trailing input in derivation")
    return node


# ------------------------------------------------------------
#  Grounding
# ------------------------------------------------------------

def _sum_terms(e: Expr) -> List[Expr]:
    if isinstance(e, BinOp) and e.symbol == "+":
        return _sum_terms(e.left) + _sum_terms(e.right)
    return [e]


class _Grounder:
    def __init__(self, li: LinearizedInput, max_avg_args: int):
        self.max_avg_args = max_avg_args
        mentions = numeric_mentions(li)
        # table first, then paragraphs, then the question
        self.mentions = [m for m in mentions if m.region.is_cell] + \
                        [m for m in mentions if m.region.kind is RegionKind.PARAGRAPH] + \
                        [m for m in mentions if m.region.kind is RegionKind.QUESTION]

    def literal(self, lit: Literal) -> Node:
        for m in self.mentions:
            if m.value == lit.value:
                op = Op.CELL_VALUE if m.region.is_cell else Op.VALUE
                return Atomic(op, m.start, m.end)
        if lit.value == lit.value.to_integral_value() and int(lit.value) in CONSTANTS:
            return Const(int(lit.value))
        raise DerivationError(f"{lit.surface} does not occur in the context")

    def build(self, e: Expr) -> Node:
        if isinstance(e, Literal):
            return self.literal(e)
        if e.symbol in "/÷":
            terms = _sum_terms(e.left)
            divisor = e.right
            if isinstance(divisor, Literal) and 2 <= len(terms) <= self.max_avg_args \
                    and divisor.value == len(terms):
                return Higher(Op.AVG, tuple(self.build(t) for t in terms))
            left = e.left
            if isinstance(left, BinOp) and left.symbol == "-" and left.right == divisor:
                return Higher(Op.CHANGE_R, (self.build(left.left), self.build(divisor)))
        return Higher(_OPS[e.symbol], (self.build(e.left), self.build(e.right)))


def _count_program(ctx: HybridContext, li: LinearizedInput, max_span_length: int) -> Optional[Program]:
    items = [it.strip() for it in ctx.derivation.split(COUNT_SEPARATOR) if it.strip()]
    used = set()
    args = []
    for item in items:
        found: Optional[Mention] = None
        for m in text_occurrences(li, item, max_span_length):
            if m.range not in used:
                found = m
                break
        if found is None:
            log.debug("%s: count item %r not found", ctx.id, item)
            return None
        used.add(found.range)
        args.append(Atomic(Op.CELL if found.region.is_cell else Op.SPAN, found.start, found.end))
    return Program(Higher(Op.COUNT, tuple(args))) if args else None


def program_from_derivation(ctx: HybridContext, li: Optional[LinearizedInput] = None,
                            tokenizer: str = "word", max_avg_args: int = 3,
                            max_span_length: int = 48) -> Optional[Program]:
    """The single program a derivation determines, or None when it cannot be grounded."""
    if not ctx.derivation or not ctx.derivation.strip():
        return None
    li = li or linearize(ctx, tokenizer)
    if COUNT_SEPARATOR in ctx.derivation:
        return _count_program(ctx, li, max_span_length)
    try:
        expr = parse_derivation(ctx.derivation)
        return Program(_Grounder(li, max_avg_args).build(expr))
    except DerivationError as e:
        log.debug("%s: derivation %r not grounded: %s", ctx.id, ctx.derivation, e)
        return None

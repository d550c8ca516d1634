"""
Program legality: a batch validator over complete programs and an incremental
next-token mask for external decoders.

Both sides enforce the same rules:

  Index        e >= s, positions inside the sequence, SPAN shorter than
               max_span_length, COUNT / MULTI_SPANS items on distinct ranges
  Type         CELL / CV inside one table cell, SPAN / VALUE inside the question
               or one paragraph, VALUE / CV parse as numbers
  Composition  argument kinds and arities per operation, root is neither KV
               nor a bare constant, disabled operations never appear
  Length       the flattened program (BOS and EOS included) fits max_program_tokens

The session's mask is exact: a token is offered iff the prefix extended by it
can still be completed into a program that passes validate() within budget.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Set, Tuple, Union

from services.errors import ClosedSession, ConfigError, IllegalToken
from services.knowledge_model import LinearizedInput
from services.numbers import is_numeric_surface, parse_number
from services.program_dsl import (
    ARITHMETIC_OPS, ATOMIC_OPS, BOS, CLOSE, CONSTANTS, EOS, Atomic, Const,
    DecodingToken, Higher, Node, Op, Program, TokenKind,
)

log = logging.getLogger("rpg.legality")

INF = float("inf")
# DROP passages carry no table and no multiplicative arithmetic
DROP_DISABLED_OPS = frozenset({Op.CELL, Op.CELL_VALUE, Op.TIMES, Op.DIV})


# ------------------------------------------------------------
#  Config
# ------------------------------------------------------------

@dataclass(frozen=True)
class LegalityConfig:
    max_span_length: int = 48
    max_avg_args: int = 3
    max_variadic_args: int = 16
    max_program_tokens: int = 50
    disabled_ops: FrozenSet[Op] = frozenset()

    def __post_init__(self):
        for name in ("max_span_length", "max_avg_args", "max_variadic_args", "max_program_tokens"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"legality.{name} must be a positive integer, got {value!r}")
        ops = set()
        for op in self.disabled_ops:
            found = op if isinstance(op, Op) else Op.lookup(str(op))
            if found is None:
                raise ConfigError(f"legality.disabled_ops: unknown operation {op!r}")
            ops.add(found)
        object.__setattr__(self, "disabled_ops", frozenset(ops))

    def enabled(self, op: Op) -> bool:
        return op not in self.disabled_ops

    def min_args(self, op: Op) -> int:
        if op is Op.COUNT:
            return 1
        return 2

    def max_args(self, op: Op) -> int:
        if op is Op.AVG:
            return self.max_avg_args
        if op in (Op.COUNT, Op.MULTI_SPANS, Op.ARGMAX, Op.ARGMIN):
            return self.max_variadic_args
        return 2

    def to_dict(self) -> dict:
        return {
            "max_span_length": self.max_span_length,
            "max_avg_args": self.max_avg_args,
            "max_variadic_args": self.max_variadic_args,
            "max_program_tokens": self.max_program_tokens,
            "disabled_ops": sorted(op.value for op in self.disabled_ops),
        }

    def for_source(self, source: str) -> "LegalityConfig":
        if source != "drop" or DROP_DISABLED_OPS <= self.disabled_ops:
            return self
        return replace(self, disabled_ops=self.disabled_ops | DROP_DISABLED_OPS)


# ------------------------------------------------------------
#  Argument slots
# ------------------------------------------------------------

class Slot(str, Enum):
    ROOT = "root"
    NUMERIC = "number"
    KEY = "key"
    CELL_NUMBER = "cell number"
    TEXT_NUMBER = "text number"
    ANY_NUMBER = "key value"
    ITEM = "extracted item"
    PAIR = "key-value pair"


_SLOT_OPS = {
    Slot.ROOT: frozenset(Op) - {Op.KV},
    Slot.NUMERIC: frozenset({Op.VALUE, Op.CELL_VALUE}) | ARITHMETIC_OPS,
    Slot.KEY: frozenset({Op.CELL, Op.SPAN}),
    Slot.CELL_NUMBER: frozenset({Op.CELL_VALUE}),
    Slot.TEXT_NUMBER: frozenset({Op.VALUE}),
    Slot.ANY_NUMBER: frozenset({Op.CELL_VALUE, Op.VALUE}),
    Slot.ITEM: ATOMIC_OPS,
    Slot.PAIR: frozenset({Op.KV}),
}
_ITEM_OPS = frozenset({Op.COUNT, Op.MULTI_SPANS})

KEY_VALUE_KIND = {Op.CELL: Op.CELL_VALUE, Op.SPAN: Op.VALUE}


def _kv_value_slot(key_op: Optional[Op]) -> Slot:
    if key_op is Op.CELL:
        return Slot.CELL_NUMBER
    if key_op is Op.SPAN:
        return Slot.TEXT_NUMBER
    return Slot.ANY_NUMBER


def arg_slot(op: Optional[Op], args: Tuple[Node, ...]) -> Slot:
    """Slot the next argument of `op` fills, given the arguments already present."""
    if op is None:
        return Slot.ROOT
    if op is Op.KV:
        if not args:
            return Slot.KEY
        first = args[0]
        return _kv_value_slot(first.op if isinstance(first, Atomic) else None)
    if op in _ITEM_OPS:
        return Slot.ITEM
    if op in (Op.ARGMAX, Op.ARGMIN):
        return Slot.PAIR
    return Slot.NUMERIC


def fits_slot(node: Node, slot: Slot) -> bool:
    if isinstance(node, Const):
        return slot is Slot.NUMERIC
    return node.op in _SLOT_OPS[slot]


def program_length(p: Program) -> int:
    """Number of decoding tokens, BOS and EOS included."""
    def size(node: Node) -> int:
        if isinstance(node, Const):
            return 1
        if isinstance(node, Atomic):
            return 3
        return 2 + sum(size(a) for a in node.args)
    return 2 + size(p.root)


# ------------------------------------------------------------
#  Batch validation
# ------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Violation:
    path: str
    family: str
    message: str

    def to_dict(self) -> dict:
        return {"family": self.family, "path": self.path, "message": self.message}


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: Tuple[Violation, ...] = ()

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": [v.to_dict() for v in self.violations]}


def _check_atomic(node: Atomic, path: str, li: LinearizedInput,
                  cfg: LegalityConfig, out: List[Violation]):
    s, e = node.start, node.end
    name = node.op.short
    if s < 0 or e >= li.length or s >= li.length or e < 0:
        out.append(Violation(path, "Index", f"{name}({s},{e}) lies outside the sequence of {li.length} tokens"))
        return
    if e < s:
        out.append(Violation(path, "Index", f"{name}({s},{e}) ends before it starts"))
        return
    if node.op is Op.SPAN and e - s >= cfg.max_span_length:
        out.append(Violation(path, "Index",
                             f"SPAN of {e - s + 1} tokens exceeds max_span_length {cfg.max_span_length}"))

    region = li.same_region(s, e)
    if node.op in (Op.CELL, Op.CELL_VALUE):
        if region is None or not region.is_cell:
            out.append(Violation(path, "Type", f"{name}({s},{e}) is not inside a single table cell"))
            return
    elif region is None or not region.is_text:
        out.append(Violation(path, "Type", f"{name}({s},{e}) is not inside the question or one paragraph"))
        return
    if node.op in (Op.VALUE, Op.CELL_VALUE) and parse_number(li.span_text(s, e)) is None:
        out.append(Violation(path, "Type", f"{name}({s},{e}) does not parse as a number"))


def _check_node(node: Node, slot: Slot, path: str, li: LinearizedInput,
                cfg: LegalityConfig, out: List[Violation]):
    if not fits_slot(node, slot):
        what = "constant" if isinstance(node, Const) else node.op.short
        out.append(Violation(path, "Composition", f"{what} cannot be used as a {slot.value}"))
    if isinstance(node, Const):
        return
    if not cfg.enabled(node.op):
        out.append(Violation(path, "Composition", f"{node.op.short} is disabled"))
    if isinstance(node, Atomic):
        _check_atomic(node, path, li, cfg, out)
        return

    n = len(node.args)
    lo, hi = cfg.min_args(node.op), cfg.max_args(node.op)
    if not lo <= n <= hi:
        bound = f"exactly {lo}" if lo == hi else f"{lo}..{hi}"
        out.append(Violation(path, "Composition", f"{node.op.short} takes {bound} arguments, got {n}"))
    for i, arg in enumerate(node.args):
        _check_node(arg, arg_slot(node.op, node.args[:i]), f"{path}.args[{i}]", li, cfg, out)

    if node.op in _ITEM_OPS:
        seen: Dict[Tuple[int, int], int] = {}
        for i, arg in enumerate(node.args):
            if not isinstance(arg, Atomic):
                continue
            key = (arg.start, arg.end)
            if key in seen:
                out.append(Violation(f"{path}.args[{i}]", "Index",
                                     f"repeats the range of args[{seen[key]}]"))
            else:
                seen[key] = i


def validate(p: Program, ctx: LinearizedInput, cfg: Optional[LegalityConfig] = None) -> ValidationReport:
    cfg = cfg or LegalityConfig()
    out: List[Violation] = []
    _check_node(p.root, Slot.ROOT, "root", ctx, cfg, out)
    length = program_length(p)
    if length > cfg.max_program_tokens:
        out.append(Violation("root", "Length",
                             f"program needs {length} tokens, limit is {cfg.max_program_tokens}"))
    violations = tuple(sorted(set(out)))
    return ValidationReport(ok=not violations, violations=violations)


# ------------------------------------------------------------
#  Range index (per context, shared by sessions)
# ------------------------------------------------------------

Range = Tuple[int, int]


class LegalityIndex:
    """Every valid (start, end) range per atomic operation for one context."""

    def __init__(self, li: LinearizedInput, cfg: LegalityConfig):
        self.li = li
        self.cfg = cfg
        self.ends: Dict[Op, Dict[int, Tuple[int, ...]]] = {op: {} for op in ATOMIC_OPS}
        self._build()
        self.ranges: Dict[Op, FrozenSet[Range]] = {
            op: frozenset((s, e) for s, es in by_start.items() for e in es)
            for op, by_start in self.ends.items()
        }
        self.available: FrozenSet[Range] = frozenset().union(*self.ranges.values())

    def _add(self, op: Op, s: int, ends: List[int]):
        if ends and self.cfg.enabled(op):
            self.ends[op][s] = tuple(ends)

    def _numeric_ends(self, s: int, last: int) -> List[int]:
        tokens = self.li.tokens
        ends = []
        e = s
        while e <= last and is_numeric_surface(tokens[e].surface):
            if e > s and tokens[e].char_start != tokens[e - 1].char_end:
                break
            if parse_number(self.li.span_text(s, e)) is not None:
                ends.append(e)
            e += 1
        return ends

    def _build(self):
        for region, (first, last) in self.li.region_bounds.items():
            if region.is_separator:
                continue
            text_op, number_op = (Op.CELL, Op.CELL_VALUE) if region.is_cell else (Op.SPAN, Op.VALUE)
            for s in range(first, last + 1):
                if region.is_cell:
                    self._add(text_op, s, list(range(s, last + 1)))
                else:
                    stop = min(last, s + self.cfg.max_span_length - 1)
                    self._add(text_op, s, list(range(s, stop + 1)))
                self._add(number_op, s, self._numeric_ends(s, last))

    def has(self, op: Op) -> bool:
        return bool(self.ranges[op])


# ------------------------------------------------------------
#  Incremental session
# ------------------------------------------------------------

@dataclass(frozen=True)
class HigherFrame:
    op: Optional[Op]  # None is the root slot
    args: Tuple[Node, ...] = ()


@dataclass(frozen=True)
class AtomicFrame:
    op: Op
    start: Optional[int] = None


Frame = Union[HigherFrame, AtomicFrame]


class _Costs:
    """Minimum number of tokens needed to emit a fresh node, per operation (INF if impossible)."""

    def __init__(self, index: LegalityIndex, cfg: LegalityConfig):
        self.index = index
        self.cfg = cfg
        fresh: Dict[Op, float] = {}
        for op in ATOMIC_OPS:
            fresh[op] = 3 if index.has(op) else INF
        self.kv_args = min(fresh[k] + fresh[v] for k, v in KEY_VALUE_KIND.items())
        fresh[Op.KV] = 2 + self.kv_args if cfg.enabled(Op.KV) else INF
        for op in ARITHMETIC_OPS:
            ok = cfg.enabled(op) and cfg.min_args(op) <= cfg.max_args(op)
            fresh[op] = 2 + cfg.min_args(op) if ok else INF
        n_items = len(index.available)
        for op in _ITEM_OPS:
            need = cfg.min_args(op)
            ok = cfg.enabled(op) and n_items >= need and cfg.max_args(op) >= need
            fresh[op] = 2 + 3 * need if ok else INF
        for op in (Op.ARGMAX, Op.ARGMIN):
            ok = cfg.enabled(op) and cfg.max_args(op) >= 2
            fresh[op] = 2 + 2 * fresh[Op.KV] if ok else INF
        self.fresh = fresh

    def slot(self, slot: Slot) -> float:
        best = min((self.fresh[op] for op in _SLOT_OPS[slot]), default=INF)
        if slot is Slot.NUMERIC:
            best = min(best, 1)
        return best


def _used_ranges(frame: Frame) -> FrozenSet[Range]:
    if isinstance(frame, HigherFrame) and frame.op in _ITEM_OPS:
        return frozenset((a.start, a.end) for a in frame.args if isinstance(a, Atomic))
    return frozenset()


class LegalitySession:
    """Single-owner decoding state. clone() before branching."""

    def __init__(self, ctx: LinearizedInput, cfg: LegalityConfig,
                 index: Optional[LegalityIndex] = None):
        self.ctx = ctx
        self.cfg = cfg
        self.index = index or LegalityIndex(ctx, cfg)
        self.costs = _Costs(self.index, cfg)
        self.prefix: List[DecodingToken] = [BOS]
        self.stack: Tuple[Frame, ...] = (HigherFrame(None),)
        self.program: Optional[Program] = None
        self._legal_cache: Optional[Set[DecodingToken]] = None

    @property
    def closed(self) -> bool:
        return self.program is not None

    @property
    def dead_end(self) -> bool:
        return not self.closed and not self.legal_next()

    def clone(self) -> "LegalitySession":
        twin = LegalitySession.__new__(LegalitySession)
        twin.__dict__.update(self.__dict__)
        twin.prefix = list(self.prefix)
        twin._legal_cache = None if self._legal_cache is None else set(self._legal_cache)
        return twin

    # ---- transitions ----
    def _complete(self, stack: Tuple[Frame, ...], node: Node) -> Tuple[Frame, ...]:
        parent = stack[-1]
        return stack[:-1] + (replace(parent, args=parent.args + (node,)),)

    def _step(self, stack: Tuple[Frame, ...], t: DecodingToken) -> Optional[Tuple[Frame, ...]]:
        """Structural transition, or None when t cannot follow this stack at all."""
        top = stack[-1]
        parent_used = _used_ranges(stack[-2]) if len(stack) > 1 else frozenset()

        if isinstance(top, AtomicFrame):
            if t.kind is not TokenKind.POS:
                return None
            if top.start is None:
                if t.value not in self.index.ends[top.op]:
                    return None
                return stack[:-1] + (AtomicFrame(top.op, t.value),)
            rng = (top.start, t.value)
            if rng not in self.index.ranges[top.op] or rng in parent_used:
                return None
            return self._complete(stack[:-1], Atomic(top.op, top.start, t.value))

        n = len(top.args)
        if t.kind is TokenKind.EOS:
            return stack if top.op is None and n == 1 else None
        if t.kind is TokenKind.CLOSE:
            if top.op is None or n < self.cfg.min_args(top.op):
                return None
            return self._complete(stack[:-1], Higher(top.op, top.args))

        limit = 1 if top.op is None else self.cfg.max_args(top.op)
        if n >= limit:
            return None
        slot = arg_slot(top.op, top.args)
        if t.kind is TokenKind.CONST:
            return self._complete(stack, Const(t.value)) if slot is Slot.NUMERIC else None
        if t.kind is TokenKind.OP:
            if t.op not in _SLOT_OPS[slot] or not self.cfg.enabled(t.op):
                return None
            frame = AtomicFrame(t.op) if t.op.is_atomic else HigherFrame(t.op)
            return stack + (frame,)
        return None

    # ---- completion cost ----
    def _atomic_cost(self, frame: AtomicFrame, used: FrozenSet[Range]) -> float:
        ends = self.index.ends[frame.op]
        if frame.start is None:
            if self.index.ranges[frame.op] - used:
                return 2
            return INF
        if any((frame.start, e) not in used for e in ends.get(frame.start, ())):
            return 1
        return INF

    def _higher_cost(self, frame: HigherFrame, child: Optional[Frame]) -> float:
        costs = self.costs
        filled = len(frame.args) + (1 if child is not None else 0)
        if frame.op is None:
            if filled:
                return 1
            return costs.slot(Slot.ROOT) + 1

        need = max(0, self.cfg.min_args(frame.op) - filled)
        if frame.op is Op.KV:
            if need == 0:
                return 1
            if need == 1:
                key = frame.args[0] if frame.args else child
                value_op = KEY_VALUE_KIND.get(key.op)
                return (costs.fresh[value_op] if value_op else INF) + 1
            return costs.kv_args + 1

        if frame.op in _ITEM_OPS:
            free = len(self.index.available - _used_ranges(frame))
            in_progress = 1 if child is not None else 0
            if free < need + in_progress:
                return INF
            return 3 * need + 1

        return need * costs.slot(arg_slot(frame.op, frame.args)) + 1

    def _completion_cost(self, stack: Tuple[Frame, ...]) -> float:
        total = 0
        for i, frame in enumerate(stack):
            child = stack[i + 1] if i + 1 < len(stack) else None
            if isinstance(frame, AtomicFrame):
                used = _used_ranges(stack[i - 1]) if i > 0 else frozenset()
                total += self._atomic_cost(frame, used)
            else:
                total += self._higher_cost(frame, child)
            if total == INF:
                return INF
        return total

    def _viable(self, stack: Tuple[Frame, ...], consumed: int) -> bool:
        return self._completion_cost(stack) <= self.cfg.max_program_tokens - consumed

    # ---- candidates ----
    def _candidates(self) -> List[DecodingToken]:
        top = self.stack[-1]
        if isinstance(top, AtomicFrame):
            ends = self.index.ends[top.op]
            positions = sorted(ends) if top.start is None else ends.get(top.start, ())
            return [DecodingToken.pos(i) for i in positions]
        out = [EOS] if top.op is None else [CLOSE]
        slot = arg_slot(top.op, top.args)
        out.extend(DecodingToken.of_op(op) for op in Op if op in _SLOT_OPS[slot])
        if slot is Slot.NUMERIC:
            out.extend(DecodingToken.const(c) for c in CONSTANTS)
        return out

    def legal_next(self) -> Set[DecodingToken]:
        if self.closed:
            raise ClosedSession("session already consumed EOS")
        if self._legal_cache is None:
            consumed = len(self.prefix) + 1
            legal = set()
            for t in self._candidates():
                stack = self._step(self.stack, t)
                if stack is None:
                    continue
                if t == EOS:
                    if consumed <= self.cfg.max_program_tokens:
                        legal.add(t)
                elif self._viable(stack, consumed):
                    legal.add(t)
            self._legal_cache = legal
        return set(self._legal_cache)

    def advance(self, t: DecodingToken) -> "LegalitySession":
        legal = self.legal_next()
        if t not in legal:
            raise IllegalToken(t, len(legal))
        self.prefix.append(t)
        self._legal_cache = None
        if t == EOS:
            self.program = Program(self.stack[0].args[0])
            log.debug("session closed with %d tokens", len(self.prefix))
        else:
            self.stack = self._step(self.stack, t)
        return self


# ---- module-level API ----

def open_session(ctx: LinearizedInput, cfg: Optional[LegalityConfig] = None,
                 index: Optional[LegalityIndex] = None) -> LegalitySession:
    return LegalitySession(ctx, cfg or LegalityConfig(), index)


def legal_next(session: LegalitySession) -> Set[DecodingToken]:
    return session.legal_next()


def advance(session: LegalitySession, t: DecodingToken) -> LegalitySession:
    return session.advance(t)


def legal_first_tokens(ctx: LinearizedInput, cfg: Optional[LegalityConfig] = None) -> Set[DecodingToken]:
    return open_session(ctx, cfg).legal_next()


def sorted_tokens(tokens) -> List[DecodingToken]:
    return sorted(tokens, key=lambda t: t.id)

"""
Distant supervision: search the template library for every program that derives
the gold answer, then weight each program by 1 / |programs sharing its signature|.

Template categories:
  extraction     CELL / SPAN (text gold), CV / VALUE (number gold)
  multi-spans    MULTI_SPANS over combinations of item occurrences
  counting       COUNT over located items (direct), plus question rewriting
                 of multi-span instances into synthetic counting instances
  comparison     ARGMAX / ARGMIN over KV pairs along a table row or column
  arithmetic     every tier, unioned (first_arith_tier_only stops at the first tier with a match):
                   1. F(x, y) for F in SUM DIFF TIMES DIV, AVG of 2 or 3, CHANGE_R(x, y)
                   2. DIFF(AVG, AVG), DIFF(CHANGE_R, CHANGE_R)
                   3. F1(F2(x, y), z)
"""

import itertools
import logging
import re
import time
from dataclasses import dataclass, field, replace
from decimal import Decimal
from multiprocessing import Pool
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from services.answers import Answer, AnswerKind, Scale
from services.derivation import COUNT_SEPARATOR, program_from_derivation
from services.errors import ConfigError, ExecutionError, RpgError
from services.knowledge_model import (
    HybridContext, LinearizedInput, linearize, numeric_mentions, text_occurrences,
)
from services.legality import LegalityConfig, validate
from services.program_dsl import (
    Atomic, Const, Higher, Node, Op, Program, operation_signature,
)
from services.program_executor import answers_match, execute
from services.tokenizer import Region, RegionKind

log = logging.getLogger("rpg.synthesis")

MODES = ("with-derivation", "without-derivation")
GOLD_FACTORS = (Decimal(1), Decimal(100), Decimal("0.01"))
_INTERROGATIVE = re.compile(r"\b(what|which|who)\b", re.IGNORECASE)
_BINARY = (Op.SUM, Op.DIFF, Op.TIMES, Op.DIV)


@dataclass(frozen=True)
class SynthesisConfig:
    numeric_tolerance: Decimal = Decimal("5e-5")
    max_occurrences_per_span: int = 4
    max_multispan_combinations: int = 64
    max_arith_numbers: Optional[int] = None
    per_instance_time_budget: float = 1.0
    enable_nested_templates: bool = True
    question_operands: bool = True
    first_arith_tier_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "numeric_tolerance", Decimal(str(self.numeric_tolerance)))
        if self.numeric_tolerance < 0:
            raise ConfigError("synthesis.numeric_tolerance must not be negative")
        for name in ("max_occurrences_per_span", "max_multispan_combinations"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"synthesis.{name} must be a positive integer, got {value!r}")
        if self.max_arith_numbers is not None and self.max_arith_numbers <= 0:
            raise ConfigError("synthesis.max_arith_numbers must be positive")
        if self.per_instance_time_budget <= 0:
            raise ConfigError("synthesis.per_instance_time_budget must be positive")

    def to_dict(self) -> dict:
        return {
            "numeric_tolerance": str(self.numeric_tolerance),
            "max_occurrences_per_span": self.max_occurrences_per_span,
            "max_multispan_combinations": self.max_multispan_combinations,
            "max_arith_numbers": self.max_arith_numbers,
            "per_instance_time_budget": self.per_instance_time_budget,
            "enable_nested_templates": self.enable_nested_templates,
            "question_operands": self.question_operands,
            "first_arith_tier_only": self.first_arith_tier_only,
        }


@dataclass(frozen=True)
class PseudoProgram:
    program: Program
    weight: float
    signature: str
    gold_factor: Decimal = Decimal(1)

    def to_dict(self) -> dict:
        return {
            "program": str(self.program),
            "weight": self.weight,
            "signature": self.signature,
            "gold_factor": float(self.gold_factor),
        }


@dataclass(frozen=True)
class PseudoProgramSet:
    instance_id: str
    programs: Tuple[PseudoProgram, ...] = ()
    truncated: bool = False

    @property
    def covered(self) -> bool:
        return bool(self.programs)

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "truncated": self.truncated,
            "programs": [p.to_dict() for p in self.programs],
        }


def assign_weights(found: Sequence[Tuple[Program, Decimal]]) -> Tuple[PseudoProgram, ...]:
    signatures = [operation_signature(p) for p, _ in found]
    counts: Dict[str, int] = {}
    for s in signatures:
        counts[s] = counts.get(s, 0) + 1
    return tuple(PseudoProgram(p, 1.0 / counts[s], s, f) for (p, f), s in zip(found, signatures))


# ------------------------------------------------------------
#  Per-instance search state
# ------------------------------------------------------------

class _Deadline:
    def __init__(self, seconds: float):
        self.until = time.monotonic() + seconds
        self.hit = False

    def expired(self) -> bool:
        if not self.hit and time.monotonic() > self.until:
            self.hit = True
        return self.hit


class Searcher:
    """Template search over one instance. Programs are accepted only if they validate and execute to gold."""

    def __init__(self, ctx: HybridContext, li: LinearizedInput, cfg: SynthesisConfig,
                 legality: LegalityConfig, deadline: Optional[_Deadline] = None):
        self.ctx = ctx
        self.li = li
        self.cfg = cfg
        self.legality = legality
        self.deadline = deadline or _Deadline(cfg.per_instance_time_budget)
        self.gold = ctx.gold_answer
        self._accepted: Dict[Program, Optional[Decimal]] = {}

    # ---- acceptance ----
    def gold_factor(self, p: Program) -> Optional[Decimal]:
        """Factor f with execute(p) == gold * f, or None when p is rejected."""
        if p in self._accepted:
            return self._accepted[p]
        factor = None
        if validate(p, self.li, self.legality).ok:
            try:
                got = execute(p, self.li)
            except ExecutionError as e:
                log.debug("%s: %s discarded: %s", self.ctx.id, p, e)
            else:
                factor = self._match(got)
        else:
            log.debug("%s: %s discarded: invalid", self.ctx.id, p)
        self._accepted[p] = factor
        return factor

    def _match(self, got: Answer) -> Optional[Decimal]:
        gold = self.gold.with_scale(None)
        if answers_match(got, gold, self.cfg.numeric_tolerance):
            return Decimal(1)
        value = gold.numeric_value()
        if value is None or gold.kind not in (AnswerKind.NUMBER,):
            return None
        for factor in GOLD_FACTORS[1:]:
            if answers_match(got, Answer.number(value * factor), self.cfg.numeric_tolerance):
                return factor
        return None

    def _keep(self, candidates: Iterable[Program]) -> List[Program]:
        out = []
        seen = set()
        for p in candidates:
            if p in seen:
                continue
            seen.add(p)
            if self.gold_factor(p) is not None:
                out.append(p)
        return out

    # ---- occurrences ----
    def _text_atomics(self, text: str) -> List[Atomic]:
        found = text_occurrences(self.li, text, self.legality.max_span_length)
        ordered = [m for m in found if m.region.is_cell] + \
                  [m for m in found if m.region.kind is RegionKind.PARAGRAPH] + \
                  [m for m in found if m.region.kind is RegionKind.QUESTION]
        return [Atomic(Op.CELL if m.region.is_cell else Op.SPAN, m.start, m.end)
                for m in ordered[:self.cfg.max_occurrences_per_span]]

    def _number_atomics(self, value: Decimal) -> List[Atomic]:
        found = [m for m in numeric_mentions(self.li) if m.value == value]
        ordered = [m for m in found if m.region.is_cell] + \
                  [m for m in found if m.region.kind is RegionKind.PARAGRAPH] + \
                  [m for m in found if m.region.kind is RegionKind.QUESTION]
        return [Atomic(Op.CELL_VALUE if m.region.is_cell else Op.VALUE, m.start, m.end)
                for m in ordered[:self.cfg.max_occurrences_per_span]]

    def _combinations(self, items: Sequence[str]) -> List[Tuple[Atomic, ...]]:
        per_item = [self._text_atomics(it) for it in items]
        if not items or any(not occ for occ in per_item):
            return []
        combos = []
        for combo in itertools.product(*per_item):
            ranges = {(a.start, a.end) for a in combo}
            if len(ranges) == len(combo):
                combos.append(combo)
        def distance(combo):
            ranges = sorted((a.start, a.end) for a in combo)
            return sum(max(0, nxt[0] - prev[1]) for prev, nxt in zip(ranges, ranges[1:]))
        combos.sort(key=lambda c: (distance(c), [(a.start, a.end) for a in c]))
        return combos[:self.cfg.max_multispan_combinations]

    # ---- categories ----
    def search_extraction(self) -> List[Program]:
        if self.gold is None:
            return []
        if self.gold.kind is AnswerKind.SPAN:
            atomics = self._text_atomics(self.gold.texts()[0])
        elif self.gold.kind is AnswerKind.NUMBER:
            atomics = self._number_atomics(self.gold.numeric_value())
        else:
            return []
        return self._keep(Program(a) for a in atomics)

    def search_multispans(self) -> List[Program]:
        if self.gold is None or self.gold.kind is not AnswerKind.SPANS:
            return []
        items = list(dict.fromkeys(self.gold.texts()))
        if len(items) < 2:
            return []
        return self._keep(Program(Higher(Op.MULTI_SPANS, combo)) for combo in self._combinations(items))

    def search_counting(self) -> List[Program]:
        if self.gold is None or self.gold.kind is not AnswerKind.COUNT:
            return []
        derivation = self.ctx.derivation or ""
        items = [it.strip() for it in derivation.split(COUNT_SEPARATOR) if it.strip()]
        if not items or len(items) != int(self.gold.numeric_value()):
            return []
        return self._keep(Program(Higher(Op.COUNT, combo)) for combo in self._combinations(items))

    def _cell_range(self, r: int, c: int) -> Optional[Tuple[int, int]]:
        return self.li.region_bounds.get(Region.cell(r, c))

    def _pair_lists(self, r: int, c: int) -> List[List[Tuple[Tuple[int, int], Tuple[int, int]]]]:
        """Key/value cell lists through the answer cell (r, c): keys along its row or its column."""
        table = self.ctx.table
        lists = []
        # keys along row r, values from a parallel row
        for r2 in range(table.rows):
            if r2 == r or table.cell(r2, c).number is None:
                continue
            pairs = [(self._cell_range(r, c2), self._cell_range(r2, c2))
                     for c2 in range(table.cols)
                     if table.cell(r, c2).text.strip() and table.cell(r2, c2).number is not None]
            lists.append(pairs)
        # keys along column c, values from a parallel column
        for c2 in range(table.cols):
            if c2 == c or table.cell(r, c2).number is None:
                continue
            pairs = [(self._cell_range(r2, c), self._cell_range(r2, c2))
                     for r2 in range(table.rows)
                     if table.cell(r2, c).text.strip() and table.cell(r2, c2).number is not None]
            lists.append(pairs)
        return [[p for p in pairs if p[0] and p[1]] for pairs in lists]

    def search_comparison(self) -> List[Program]:
        if self.gold is None or self.gold.kind is not AnswerKind.SPAN:
            return []
        candidates = []
        for m in text_occurrences(self.li, self.gold.texts()[0], self.legality.max_span_length):
            if not m.region.is_cell or (m.start, m.end) != self._cell_range(m.region.a, m.region.b):
                continue
            for pairs in self._pair_lists(m.region.a, m.region.b):
                if not 2 <= len(pairs) <= self.legality.max_variadic_args:
                    continue
                kvs = tuple(Higher(Op.KV, (Atomic(Op.CELL, *k), Atomic(Op.CELL_VALUE, *v)))
                            for k, v in pairs)
                candidates.append(Program(Higher(Op.ARGMAX, kvs)))
                candidates.append(Program(Higher(Op.ARGMIN, kvs)))
        return self._keep(candidates)

    def search_arithmetic(self) -> List[Program]:
        if self.gold is None or self.gold.kind is not AnswerKind.NUMBER:
            return []
        return ArithmeticSearch(self).run()

    # ---- union ----
    def search_all(self) -> List[Program]:
        if self.gold is None:
            return []
        kind = self.gold.kind
        if kind is AnswerKind.SPAN:
            return self.search_extraction() + self.search_comparison()
        if kind is AnswerKind.SPANS:
            return self.search_multispans()
        if kind is AnswerKind.COUNT:
            return self.search_counting()
        return self.search_extraction() + self.search_arithmetic()


# ------------------------------------------------------------
#  Arithmetic templates
# ------------------------------------------------------------

class ArithmeticSearch:
    """numpy prefilter over candidate values, exact Decimal check on the survivors."""

    def __init__(self, searcher: Searcher):
        self.s = searcher
        mentions = numeric_mentions(searcher.li)
        numbers = [m for m in mentions if m.region.is_cell] + \
                  [m for m in mentions if m.region.kind is RegionKind.PARAGRAPH]
        if searcher.cfg.question_operands:
            numbers += [m for m in mentions if m.region.kind is RegionKind.QUESTION]
        if searcher.cfg.max_arith_numbers is not None:
            numbers = numbers[:searcher.cfg.max_arith_numbers]
        self.operands: List[Node] = [
            Atomic(Op.CELL_VALUE if m.region.is_cell else Op.VALUE, m.start, m.end) for m in numbers
        ] + [Const(c) for c in (0, 1, 100)]
        self.values = np.array([float(m.value) for m in numbers] + [0.0, 1.0, 100.0])
        self.is_const = np.array([False] * len(numbers) + [True] * 3)
        self.n = len(self.operands)
        gold = searcher.gold.numeric_value()
        self.targets = np.array([float(gold * f) for f in GOLD_FACTORS])

    # ---- helpers ----
    def _close(self, r: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            hit = np.zeros(r.shape, dtype=bool)
            for t in self.targets:
                hit |= np.abs(r - t) <= 1.5e-4 + 1e-9 * abs(t)
        return hit & np.isfinite(r)

    def _binary_values(self, op: Op) -> np.ndarray:
        a, b = self.values[:, None], self.values[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            if op is Op.SUM:
                return a + b
            if op is Op.DIFF:
                return a - b
            if op is Op.TIMES:
                return a * b
            return np.where(b != 0, a / np.where(b != 0, b, 1), np.nan)

    def _binary_mask(self, op: Op) -> np.ndarray:
        """Which (x, y) operand pairs a binary template may use."""
        n = self.n
        idx = np.arange(n)
        mask = idx[:, None] != idx[None, :]
        mask &= ~(self.is_const[:, None] & self.is_const[None, :])
        if op in (Op.SUM, Op.TIMES):
            mask &= idx[:, None] < idx[None, :]
        v = self.values
        cx = self.is_const[:, None]
        cy = self.is_const[None, :]
        zero_x = cx & (v[:, None] == 0)
        zero_y = cy & (v[None, :] == 0)
        one_x = cx & (v[:, None] == 1)
        one_y = cy & (v[None, :] == 1)
        if op is Op.SUM:
            mask &= ~zero_x & ~zero_y
        elif op is Op.DIFF:
            mask &= ~zero_y
        elif op is Op.TIMES:
            mask &= ~zero_x & ~zero_y & ~one_x & ~one_y
        else:
            mask &= ~zero_x & ~zero_y & ~one_y
        return mask

    def _numbers_only(self) -> np.ndarray:
        return ~self.is_const

    # ---- tiers ----
    def _tier_simple(self) -> Iterable[Program]:
        ops = self.operands
        for op in _BINARY:
            hits = self._close(self._binary_values(op)) & self._binary_mask(op)
            for i, j in np.argwhere(hits):
                yield Program(Higher(op, (ops[i], ops[j])))
            if self.s.deadline.expired():
                return

        num = np.flatnonzero(self._numbers_only())
        v = self.values
        idx = np.arange(self.n)
        pair_ok = (idx[:, None] < idx[None, :]) & self._numbers_only()[:, None] & self._numbers_only()[None, :]
        hits = self._close((v[:, None] + v[None, :]) / 2) & pair_ok
        for i, j in np.argwhere(hits):
            yield Program(Higher(Op.AVG, (ops[i], ops[j])))

        if self.s.legality.max_avg_args >= 3:
            for k in num:
                if self.s.deadline.expired():
                    return
                tri = pair_ok & (idx[None, :] < k)
                hits = self._close((v[:, None] + v[None, :] + v[k]) / 3) & tri
                for i, j in np.argwhere(hits):
                    yield Program(Higher(Op.AVG, (ops[i], ops[j], ops[k])))

        with np.errstate(divide="ignore", invalid="ignore"):
            change = (v[:, None] - v[None, :]) / v[None, :]
        ok = (idx[:, None] != idx[None, :]) & self._numbers_only()[:, None] & \
            self._numbers_only()[None, :] & (v[None, :] != 0)
        for i, j in np.argwhere(self._close(change) & ok):
            yield Program(Higher(Op.CHANGE_R, (ops[i], ops[j])))

    def _lookup(self, sorted_vals: np.ndarray, want: float, slack: float) -> np.ndarray:
        lo = np.searchsorted(sorted_vals, want - slack, side="left")
        hi = np.searchsorted(sorted_vals, want + slack, side="right")
        return np.arange(lo, hi)

    def _difference_of(self, nodes: List[Node], vals: np.ndarray) -> Iterable[Program]:
        """DIFF(a, b) over precomputed sub-programs whose values differ by a target."""
        if not nodes:
            return
        order = np.argsort(vals, kind="stable")
        sorted_vals = vals[order]
        for p in range(len(nodes)):
            if self.s.deadline.expired():
                return
            for t in self.targets:
                slack = 1.5e-4 + 1e-9 * abs(t)
                for pos in self._lookup(sorted_vals, vals[p] - t, slack):
                    q = int(order[pos])
                    if q != p:
                        yield Program(Higher(Op.DIFF, (nodes[p], nodes[q])))

    def _tier_compound(self) -> Iterable[Program]:
        ops = self.operands
        v = self.values
        num = [int(i) for i in np.flatnonzero(self._numbers_only())]

        avg_nodes, avg_vals = [], []
        for i, j in itertools.combinations(num, 2):
            avg_nodes.append(Higher(Op.AVG, (ops[i], ops[j])))
            avg_vals.append((v[i] + v[j]) / 2)
        yield from self._difference_of(avg_nodes, np.array(avg_vals))

        ch_nodes, ch_vals = [], []
        for i, j in itertools.permutations(num, 2):
            if v[j] != 0:
                ch_nodes.append(Higher(Op.CHANGE_R, (ops[i], ops[j])))
                ch_vals.append((v[i] - v[j]) / v[j])
        yield from self._difference_of(ch_nodes, np.array(ch_vals))

    def _tier_nested(self) -> Iterable[Program]:
        ops = self.operands
        inner_nodes: List[Tuple[Node, int, int]] = []
        inner_vals = []
        for op in _BINARY:
            values = self._binary_values(op)
            for i, j in np.argwhere(self._binary_mask(op) & np.isfinite(values)):
                inner_nodes.append((Higher(op, (ops[i], ops[j])), int(i), int(j)))
                inner_vals.append(values[i, j])
        if not inner_nodes:
            return
        inner_vals = np.array(inner_vals)
        order = np.argsort(inner_vals, kind="stable")
        sorted_vals = inner_vals[order]

        for outer in _BINARY:
            for z in range(self.n):
                if self.s.deadline.expired():
                    return
                zv = self.values[z]
                const_z = bool(self.is_const[z])
                if const_z and ((outer in (Op.SUM, Op.DIFF) and zv == 0) or
                                (outer in (Op.TIMES, Op.DIV) and zv in (0, 1))):
                    continue
                for t in self.targets:
                    slack = 1.5e-4 + 1e-9 * abs(t)
                    if outer is Op.SUM:
                        want = t - zv
                    elif outer is Op.DIFF:
                        want = t + zv
                    elif outer is Op.TIMES:
                        if zv == 0:
                            continue
                        want, slack = t / zv, slack / abs(zv)
                    else:
                        if zv == 0:
                            continue
                        want, slack = t * zv, slack * abs(zv)
                    for pos in self._lookup(sorted_vals, want, slack):
                        node, i, j = inner_nodes[int(order[pos])]
                        if z in (i, j):
                            continue
                        yield Program(Higher(outer, (node, ops[z])))

    def run(self) -> List[Program]:
        tiers: List[Callable[[], Iterable[Program]]] = [self._tier_simple, self._tier_compound]
        if self.s.cfg.enable_nested_templates:
            tiers.append(self._tier_nested)
        found: List[Program] = []
        for tier in tiers:
            found += self.s._keep(tier())
            if self.s.deadline.expired() or (found and self.s.cfg.first_arith_tier_only):
                break
        return found


# ------------------------------------------------------------
#  Instance and batch drivers
# ------------------------------------------------------------

def augment_counting(ctx: HybridContext) -> Optional[HybridContext]:
    """Rewrite a multi-span instance into a counting instance ("Which ..." -> "How many ...")."""
    gold = ctx.gold_answer
    if gold is None or gold.kind is not AnswerKind.SPANS:
        return None
    items = list(dict.fromkeys(gold.texts()))
    m = _INTERROGATIVE.search(ctx.question)
    if len(items) < 2 or m is None:
        return None
    phrase = "How many" if m.group(0)[0].isupper() else "how many"
    question = ctx.question[:m.start()] + phrase + ctx.question[m.end():]
    return replace(
        ctx.with_question(question, f"{ctx.id}#count"),
        gold_answer=Answer.count(len(items)),
        gold_scale=Scale.NONE,
        derivation=COUNT_SEPARATOR.join(items),
    )


def synthesize(ctx: HybridContext, cfg: Optional[SynthesisConfig] = None,
               legality: Optional[LegalityConfig] = None, mode: str = "without-derivation",
               tokenizer: str = "word", max_context_tokens: int = 2048,
               li: Optional[LinearizedInput] = None) -> PseudoProgramSet:
    cfg = cfg or SynthesisConfig()
    legality = (legality or LegalityConfig()).for_source(ctx.source)
    if mode not in MODES:
        raise ConfigError(f"unknown synthesis mode {mode!r}")
    if ctx.gold_answer is None:
        return PseudoProgramSet(ctx.id)

    li = li or linearize(ctx, tokenizer, max_context_tokens)
    searcher = Searcher(ctx, li, cfg, legality)

    programs: List[Program] = []
    if mode == "with-derivation":
        derived = program_from_derivation(ctx, li, max_avg_args=legality.max_avg_args,
                                          max_span_length=legality.max_span_length)
        if derived is not None and searcher.gold_factor(derived) is not None:
            programs = [derived]
        else:
            log.debug("%s: no usable derivation program, using template search", ctx.id)
    if not programs:
        programs = searcher.search_all()

    found = [(p, searcher.gold_factor(p)) for p in programs]
    result = PseudoProgramSet(ctx.id, assign_weights(found), searcher.deadline.hit)
    if result.truncated:
        log.debug("%s: search truncated after %.2fs", ctx.id, cfg.per_instance_time_budget)
    return result


@dataclass
class BatchResult:
    sets: List[PseudoProgramSet] = field(default_factory=list)
    augmented: List[Tuple[HybridContext, PseudoProgramSet]] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def coverage_summary(sets: Sequence[PseudoProgramSet]) -> dict:
    covered = [s for s in sets if s.covered]
    return {
        "instances": len(sets),
        "covered": len(covered),
        "coverage": len(covered) / len(sets) if sets else 0.0,
        "mean_programs_per_covered":
            sum(len(s.programs) for s in covered) / len(covered) if covered else 0.0,
        "truncated": sum(1 for s in sets if s.truncated),
    }


def _synthesize_one(job) -> Tuple[PseudoProgramSet, Optional[Tuple[HybridContext, PseudoProgramSet]]]:
    ctx, cfg, legality, mode, tokenizer, max_tokens, augment = job
    try:
        result = synthesize(ctx, cfg, legality, mode, tokenizer, max_tokens)
    except RpgError as e:
        log.warning("%s: skipped: %s", ctx.id, e)
        result = PseudoProgramSet(ctx.id)
    extra = None
    synthetic = augment_counting(ctx) if augment else None
    if synthetic is not None:
        try:
            extra = (synthetic, synthesize(synthetic, cfg, legality, "without-derivation",
                                           tokenizer, max_tokens))
        except RpgError as e:
            log.warning("%s: counting augmentation skipped: %s", synthetic.id, e)
    return result, extra


def synthesize_batch(contexts: Sequence[HybridContext], cfg: Optional[SynthesisConfig] = None,
                     legality: Optional[LegalityConfig] = None, mode: str = "without-derivation",
                     tokenizer: str = "word", max_context_tokens: int = 2048,
                     workers: int = 1, augment: bool = True) -> BatchResult:
    """Synthesize every instance; results keep input order whatever the worker count."""
    cfg = cfg or SynthesisConfig()
    legality = legality or LegalityConfig()
    jobs = [(ctx, cfg, legality, mode, tokenizer, max_context_tokens, augment) for ctx in contexts]

    if workers > 1 and len(jobs) > 1:
        with Pool(processes=workers) as pool:
            outcomes = pool.map(_synthesize_one, jobs)
    else:
        outcomes = [_synthesize_one(job) for job in jobs]

    batch = BatchResult()
    for result, extra in outcomes:
        batch.sets.append(result)
        if extra is not None:
            batch.augmented.append(extra)
    batch.summary = coverage_summary(batch.sets)
    log.info("synthesis: %d/%d instances covered (%.1f%%), %.2f programs per covered instance",
             batch.summary["covered"], batch.summary["instances"],
             100 * batch.summary["coverage"], batch.summary["mean_programs_per_covered"])
    return batch

"""
Exact Match / F1 with scale correctness.

Multi-span answers are aligned one-to-one with scipy's assignment solver, so the
reported F1 is the best achievable pairing rather than a greedy one.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from services.answers import Answer, AnswerKind, Scale, normalize_text
from services.knowledge_model import HybridContext
from services.program_executor import round4

log = logging.getLogger("rpg.metrics")

KIND_ROWS = {
    AnswerKind.SPAN: "Span",
    AnswerKind.SPANS: "Spans",
    AnswerKind.NUMBER: "Arithmetic",
    AnswerKind.COUNT: "Counting",
}
SOURCE_COLUMNS = {"table": "Table", "text": "Text", "table-text": "Table-Text"}


def bag_f1(predicted: str, gold: str) -> float:
    p = normalize_text(predicted).split()
    g = normalize_text(gold).split()
    if not p and not g:
        return 1.0
    common = sum((Counter(p) & Counter(g)).values())
    if common == 0:
        return 0.0
    return 2 * common / (len(p) + len(g))


def align_spans(predicted: Sequence[str], gold: Sequence[str]) -> Tuple[float, List[Tuple[int, int]]]:
    """Optimal one-to-one alignment; returns (summed F1, matched index pairs)."""
    if not predicted or not gold:
        return 0.0, []
    scores = np.array([[bag_f1(p, g) for g in gold] for p in predicted])
    rows, cols = linear_sum_assignment(scores, maximize=True)
    return float(scores[rows, cols].sum()), list(zip(rows.tolist(), cols.tolist()))


def greedy_align(predicted: Sequence[str], gold: Sequence[str]) -> float:
    """Summed F1 of the greedy best-pair-first alignment (reference for the optimal one)."""
    pairs = sorted(((bag_f1(p, g), i, j) for i, p in enumerate(predicted) for j, g in enumerate(gold)),
                   key=lambda x: (-x[0], x[1], x[2]))
    used_p, used_g, total = set(), set(), 0.0
    for score, i, j in pairs:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        total += score
    return total


def _scale(a: Answer) -> Scale:
    return a.scale if a.scale is not None else Scale.NONE


def _number(a: Answer) -> Optional[Decimal]:
    if a.kind is AnswerKind.SPANS:
        return None
    return a.numeric_value()


def score_instance(pred: Optional[Answer], gold: Answer) -> Tuple[float, float]:
    if pred is None:
        return 0.0, 0.0
    if _scale(pred) != _scale(gold):
        return 0.0, 0.0

    if gold.kind in (AnswerKind.NUMBER, AnswerKind.COUNT):
        p, g = _number(pred), _number(gold)
        hit = p is not None and g is not None and round4(p) == round4(g)
        return (1.0, 1.0) if hit else (0.0, 0.0)

    p_texts, g_texts = list(pred.texts()), list(gold.texts())
    if len(p_texts) == 1 and len(g_texts) == 1:
        p, g = _number(pred), _number(gold)
        if p is not None and g is not None:
            hit = round4(p) == round4(g)
            return (1.0, 1.0) if hit else (0.0, 0.0)
        em = float(normalize_text(p_texts[0]) == normalize_text(g_texts[0]))
        return em, bag_f1(p_texts[0], g_texts[0])

    total, _ = align_spans(p_texts, g_texts)
    f1 = total / max(len(p_texts), len(g_texts))
    em = float(Counter(map(normalize_text, p_texts)) == Counter(map(normalize_text, g_texts)))
    return em, f1


@dataclass
class InstanceScore:
    id: str
    em: float
    f1: float
    answer_kind: str
    answer_source: str

    def to_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class EvalResult:
    em: float = 0.0
    f1: float = 0.0
    per_instance: List[InstanceScore] = field(default_factory=list)
    breakdown: Dict[str, Dict[str, dict]] = field(default_factory=dict)

    def to_dict(self, with_instances: bool = False) -> dict:
        out = {"em": self.em, "f1": self.f1, "count": len(self.per_instance),
               "breakdown": self.breakdown}
        if with_instances:
            out["per_instance"] = [s.to_dict() for s in self.per_instance]
        return out


def _source(ctx: HybridContext) -> str:
    return SOURCE_COLUMNS.get((ctx.answer_from or "").lower(), "Text")


def score_dataset(preds: Mapping[str, Optional[Answer]], golds: Sequence[HybridContext]) -> EvalResult:
    """Missing or errored predictions score (0, 0)."""
    result = EvalResult()
    cells: Dict[str, Dict[str, List[Tuple[float, float]]]] = {
        row: {col: [] for col in SOURCE_COLUMNS.values()} for row in KIND_ROWS.values()
    }
    for ctx in golds:
        gold = ctx.gold
        if gold is None:
            continue
        if ctx.id not in preds:
            log.debug("no prediction for %s", ctx.id)
        em, f1 = score_instance(preds.get(ctx.id), gold)
        row, col = KIND_ROWS[gold.kind], _source(ctx)
        result.per_instance.append(InstanceScore(ctx.id, em, f1, row, col))
        cells[row][col].append((em, f1))

    n = len(result.per_instance)
    if n:
        result.em = sum(s.em for s in result.per_instance) / n
        result.f1 = sum(s.f1 for s in result.per_instance) / n
    result.breakdown = {
        row: {
            col: {
                "count": len(scores),
                "em": sum(e for e, _ in scores) / len(scores) if scores else 0.0,
                "f1": sum(f for _, f in scores) / len(scores) if scores else 0.0,
            }
            for col, scores in by_col.items()
        }
        for row, by_col in cells.items()
    }
    return result

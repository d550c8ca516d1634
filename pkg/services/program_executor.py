"""
Symbolic executor: evaluates a Program bottom-up against a linearized context.
"""

import logging
from collections import Counter
from decimal import ROUND_HALF_UP, Decimal, localcontext
from typing import List, Optional

from services.answers import (
    Answer, AnswerKind, CountVal, Number, Pairs, Scale, Text, Value, normalize_text,
)
from services.errors import DivisionByZero, ExecutionError, NonNumericCell, RangeError
from services.knowledge_model import LinearizedInput
from services.numbers import parse_number
from services.program_dsl import Atomic, Const, Node, Op, Program

log = logging.getLogger("rpg.executor")

PRECISION = 28
FOUR_PLACES = Decimal("0.0001")
DEFAULT_TOLERANCE = Decimal("5e-5")


def detokenize(ctx: LinearizedInput, s: int, e: int) -> str:
    if s > e:
        raise RangeError(f"range ({s},{e}) ends before it starts")
    text = ctx.span_text(s, e)
    if text is None:
        raise RangeError(f"range ({s},{e}) is not inside a single region")
    return text


def _number(v: Value, where: Node) -> Decimal:
    if isinstance(v, Number):
        return v.value
    raise ExecutionError(f"{where} expected a number, got {type(v).__name__}")


def _pair(v: Value, where: Node) -> tuple:
    if isinstance(v, Pairs) and len(v.pairs) == 1:
        return v.pairs[0]
    raise ExecutionError(f"{where} expected a key-value pair, got {type(v).__name__}")


def _texts(v: Value) -> List[str]:
    if isinstance(v, Text):
        return list(v.items)
    if isinstance(v, Number):
        return [Answer(AnswerKind.NUMBER, v).texts()[0]]
    raise ExecutionError(f"cannot extract text from {type(v).__name__}")


def _divide(a: Decimal, b: Decimal, op: Op) -> Decimal:
    if b == 0:
        raise DivisionByZero(f"{op.short} with a zero divisor")
    return a / b


def _eval(node: Node, ctx: LinearizedInput) -> Value:
    if isinstance(node, Const):
        return Number(Decimal(node.value))

    if isinstance(node, Atomic):
        text = detokenize(ctx, node.start, node.end)
        if node.op in (Op.SPAN, Op.CELL):
            return Text((text,))
        value = parse_number(text)
        if value is None:
            raise NonNumericCell(f"{node.op.short}({node.start},{node.end}) = {text!r} is not a number")
        return Number(value)

    op = node.op
    args = [_eval(a, ctx) for a in node.args]

    if op is Op.KV:
        key = _texts(args[0])[0]
        return Pairs(((key, _number(args[1], node)),))
    if op is Op.COUNT:
        return CountVal(len(args))
    if op is Op.MULTI_SPANS:
        # items keep their source surface, numeric ones included
        return Text(tuple(detokenize(ctx, a.start, a.end) if isinstance(a, Atomic) else _texts(v)[0]
                          for a, v in zip(node.args, args)))
    if op in (Op.ARGMAX, Op.ARGMIN):
        pairs = [_pair(a, node) for a in args]
        best_key, best_value = pairs[0]
        for key, value in pairs[1:]:
            # strict comparison keeps the earliest argument on ties
            if (value > best_value) if op is Op.ARGMAX else (value < best_value):
                best_key, best_value = key, value
        return Text((best_key,))

    nums = [_number(a, node) for a in args]
    if op is Op.SUM:
        return Number(nums[0] + nums[1])
    if op is Op.DIFF:
        return Number(nums[0] - nums[1])
    if op is Op.TIMES:
        return Number(nums[0] * nums[1])
    if op is Op.DIV:
        return Number(_divide(nums[0], nums[1], op))
    if op is Op.AVG:
        return Number(sum(nums) / len(nums))
    if op is Op.CHANGE_R:
        return Number(_divide(nums[0] - nums[1], nums[1], op))
    raise ExecutionError(f"unsupported operation {op}")


def _wrap(v: Value, scale: Optional[Scale]) -> Answer:
    if isinstance(v, Number):
        return Answer(AnswerKind.NUMBER, v, scale)
    if isinstance(v, CountVal):
        return Answer(AnswerKind.COUNT, v, scale)
    if isinstance(v, Text):
        items = tuple(sorted(set(v.items)))
        if len(items) == 1:
            return Answer(AnswerKind.SPAN, Text(items), scale)
        return Answer(AnswerKind.SPANS, Text(items), scale)
    raise ExecutionError("a key-value pair cannot be an answer")


def execute(p: Program, ctx: LinearizedInput, scale: Optional[Scale] = None) -> Answer:
    with localcontext() as dctx:
        dctx.prec = PRECISION
        value = _eval(p.root, ctx)
    return _wrap(value, scale)


# ------------------------------------------------------------
#  Answer comparison
# ------------------------------------------------------------

def round4(value: Decimal) -> Decimal:
    with localcontext() as dctx:
        dctx.prec = 80
        return value.quantize(FOUR_PLACES, rounding=ROUND_HALF_UP)


def _numeric(a: Answer) -> Optional[Decimal]:
    if a.kind in (AnswerKind.NUMBER, AnswerKind.COUNT, AnswerKind.SPAN):
        return a.numeric_value()
    return None


def answers_match(predicted: Answer, gold: Answer, tol: Decimal = DEFAULT_TOLERANCE) -> bool:
    if predicted.scale is not None and gold.scale is not None and predicted.scale != gold.scale:
        return False
    p, g = _numeric(predicted), _numeric(gold)
    if p is not None and g is not None:
        return abs(round4(p) - round4(g)) <= Decimal(str(tol))
    if predicted.kind in (AnswerKind.NUMBER, AnswerKind.COUNT) or \
            gold.kind in (AnswerKind.NUMBER, AnswerKind.COUNT):
        return False
    return Counter(normalize_text(t) for t in predicted.texts()) == \
        Counter(normalize_text(t) for t in gold.texts())

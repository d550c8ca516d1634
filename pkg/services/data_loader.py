"""
Dataset ingestion (TAT-QA, DROP), single-context documents and prediction files.
File layouts are documented in docs/formats.md.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from services.answers import Answer, Scale
from services.errors import SchemaError
from services.knowledge_model import HybridContext, Paragraph, Table, rank_paragraphs

log = logging.getLogger("rpg.data_loader")

SCHEMA_VERSION = 1
ANSWER_TYPES = ("span", "multi-span", "arithmetic", "count")
ANSWER_SOURCES = ("table", "text", "table-text")

PathLike = Union[str, Path]


def _read_json(path: PathLike):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"{path} is not valid JSON: {e}") from e


def _expect(cond: bool, path: str, message: str):
    if not cond:
        raise SchemaError(path, message)


# ------------------------------------------------------------
#  TAT-QA
# ------------------------------------------------------------

def _tatqa_answer(q: dict, path: str) -> Optional[Answer]:
    if "answer" not in q or q.get("answer_type") is None:
        return None
    kind = q["answer_type"]
    _expect(kind in ANSWER_TYPES, f"{path}.answer_type", f"unknown answer_type {kind!r}")
    raw = q["answer"]
    if kind == "span":
        if isinstance(raw, list):
            _expect(len(raw) == 1, f"{path}.answer", "span answers hold exactly one string")
            raw = raw[0]
        return Answer.span(str(raw))
    if kind == "multi-span":
        _expect(isinstance(raw, list) and len(raw) >= 1, f"{path}.answer",
                "multi-span answers are a list of strings")
        items = [str(x) for x in raw]
        return Answer.spans(items) if len(items) > 1 else Answer.span(items[0])
    try:
        if kind == "count":
            return Answer.count(int(str(raw).strip()))
        return Answer.number(str(raw).strip())
    except (ValueError, ArithmeticError):
        raise SchemaError(f"{path}.answer", f"{raw!r} is not a number") from None


def _tatqa_scale(q: dict, path: str) -> Optional[Scale]:
    if "scale" not in q:
        return None
    try:
        return Scale.parse(q["scale"])
    except ValueError:
        raise SchemaError(f"{path}.scale", f"unknown scale {q['scale']!r}") from None


def parse_tatqa(data, rank: bool = True) -> List[HybridContext]:
    """One context per question; the context id is the question uid."""
    _expect(isinstance(data, list), "$", "a TAT-QA file is a list of documents")
    contexts = []
    for d, doc in enumerate(data):
        dpath = f"$[{d}]"
        _expect(isinstance(doc, dict), dpath, "document must be an object")
        table_obj = doc.get("table") or {}
        rows = table_obj.get("table", []) if isinstance(table_obj, dict) else table_obj
        _expect(isinstance(rows, list) and all(isinstance(r, list) for r in rows),
                f"{dpath}.table.table", "table must be a list of rows")
        table = Table.from_rows([[str(c) for c in r] for r in rows])

        raw_pars = doc.get("paragraphs", [])
        _expect(isinstance(raw_pars, list), f"{dpath}.paragraphs", "paragraphs must be a list")
        ordered = sorted(enumerate(raw_pars), key=lambda ip: (ip[1].get("order", ip[0] + 1), ip[0]))
        paragraphs = []
        for k, (i, p) in enumerate(ordered):
            _expect(isinstance(p, dict) and isinstance(p.get("text"), str),
                    f"{dpath}.paragraphs[{i}].text", "paragraph text must be a string")
            paragraphs.append(Paragraph(k, p["text"]))

        questions = doc.get("questions", [])
        _expect(isinstance(questions, list), f"{dpath}.questions", "questions must be a list")
        for qi, q in enumerate(questions):
            qpath = f"{dpath}.questions[{qi}]"
            _expect(isinstance(q, dict) and isinstance(q.get("question"), str),
                    f"{qpath}.question", "question must be a string")
            answer_from = q.get("answer_from")
            if answer_from is not None:
                _expect(answer_from in ANSWER_SOURCES, f"{qpath}.answer_from",
                        f"unknown answer_from {answer_from!r}")
            pars = rank_paragraphs(q["question"], paragraphs) if rank else list(paragraphs)
            contexts.append(HybridContext(
                id=str(q.get("uid", f"{d}-{qi}")),
                question=q["question"],
                table=table,
                paragraphs=tuple(pars),
                gold_answer=_tatqa_answer(q, qpath),
                gold_scale=_tatqa_scale(q, qpath),
                derivation=q.get("derivation") or None,
                answer_from=answer_from,
                source="tatqa",
            ))
    log.debug("parsed %d TAT-QA questions", len(contexts))
    return contexts


def load_tatqa(path: PathLike, rank: bool = True) -> List[HybridContext]:
    return parse_tatqa(_read_json(path), rank)


# ------------------------------------------------------------
#  DROP
# ------------------------------------------------------------

def _drop_answer(a: dict, path: str) -> Optional[Answer]:
    _expect(isinstance(a, dict), path, "answer must be an object")
    number = str(a.get("number", "") or "").strip()
    spans = [s for s in a.get("spans", []) or [] if str(s).strip()]
    if number:
        try:
            return Answer.number(number)
        except ArithmeticError:
            raise SchemaError(f"{path}.number", f"{number!r} is not a number") from None
    if len(spans) == 1:
        return Answer.span(spans[0])
    if len(spans) > 1:
        return Answer.spans(spans)
    return None


def parse_drop(data) -> List[HybridContext]:
    _expect(isinstance(data, dict), "$", "a DROP file maps passage ids to passages")
    contexts = []
    for pid, entry in data.items():
        ppath = f"$.{pid}"
        _expect(isinstance(entry, dict) and isinstance(entry.get("passage"), str),
                f"{ppath}.passage", "passage must be a string")
        paragraph = Paragraph(0, entry["passage"])
        for qi, qa in enumerate(entry.get("qa_pairs", [])):
            qpath = f"{ppath}.qa_pairs[{qi}]"
            _expect(isinstance(qa, dict) and isinstance(qa.get("question"), str),
                    f"{qpath}.question", "question must be a string")
            answer = _drop_answer(qa.get("answer", {}), f"{qpath}.answer")
            if answer is None:
                log.debug("%s: date or empty answer skipped", qa.get("query_id", qpath))
                continue
            contexts.append(HybridContext(
                id=str(qa.get("query_id", f"{pid}-{qi}")),
                question=qa["question"],
                paragraphs=(paragraph,),
                gold_answer=answer,
                gold_scale=Scale.NONE,
                answer_from="text",
                source="drop",
            ))
    return contexts


def load_drop(path: PathLike) -> List[HybridContext]:
    return parse_drop(_read_json(path))


# ------------------------------------------------------------
#  Single-context documents
# ------------------------------------------------------------

def context_to_dict(ctx: HybridContext) -> dict:
    gold = ctx.gold
    return {
        "schema_version": SCHEMA_VERSION,
        "id": ctx.id,
        "source": ctx.source,
        "question": ctx.question,
        "table": ctx.table.to_rows(),
        "paragraphs": [{"id": p.id, "text": p.text, "rank_score": p.rank_score}
                       for p in ctx.paragraphs],
        "answer": gold.to_dict() if gold is not None else None,
        "derivation": ctx.derivation,
        "answer_from": ctx.answer_from,
    }


def context_from_dict(data: dict, path: str = "$") -> HybridContext:
    _expect(isinstance(data, dict), path, "context must be an object")
    version = data.get("schema_version")
    _expect(version == SCHEMA_VERSION, f"{path}.schema_version",
            f"unsupported schema_version {version!r}")
    _expect(isinstance(data.get("question", ""), str), f"{path}.question", "question must be a string")
    answer = None
    if data.get("answer") is not None:
        try:
            answer = Answer.from_dict(data["answer"])
        except (KeyError, ValueError, ArithmeticError) as e:
            raise SchemaError(f"{path}.answer", f"malformed answer: {e}") from None
    paragraphs = []
    for i, p in enumerate(data.get("paragraphs", [])):
        _expect(isinstance(p, dict) and isinstance(p.get("text"), str),
                f"{path}.paragraphs[{i}].text", "paragraph text must be a string")
        paragraphs.append(Paragraph(int(p.get("id", i)), p["text"], p.get("rank_score")))
    return HybridContext(
        id=str(data.get("id", "context")),
        question=data.get("question", ""),
        table=Table.from_rows([[str(c) for c in r] for r in data.get("table", [])]),
        paragraphs=tuple(paragraphs),
        gold_answer=answer.with_scale(None) if answer else None,
        gold_scale=answer.scale if answer else None,
        derivation=data.get("derivation"),
        answer_from=data.get("answer_from"),
        source=data.get("source", "tatqa"),
    )


def load_contexts(path: PathLike, rank: bool = True) -> List[HybridContext]:
    """Any supported file: TAT-QA list, DROP mapping or a single-context document."""
    data = _read_json(path)
    if isinstance(data, list):
        return parse_tatqa(data, rank)
    if isinstance(data, dict) and "schema_version" in data:
        return [context_from_dict(data)]
    return parse_drop(data)


def read_context(path: PathLike, qid: Optional[str] = None, rank: bool = True) -> HybridContext:
    contexts = load_contexts(path, rank)
    if qid is not None:
        for ctx in contexts:
            if ctx.id == qid:
                return ctx
        raise SchemaError("$", f"question {qid!r} not found in {path}")
    if len(contexts) != 1:
        raise SchemaError("$", f"{path} holds {len(contexts)} questions; pass a question id")
    return contexts[0]


def write_context(ctx: HybridContext, path: PathLike):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(context_to_dict(ctx), f, indent=2, ensure_ascii=False)


# ------------------------------------------------------------
#  Predictions
# ------------------------------------------------------------

def parse_predictions(lines: Iterable[str]) -> Dict[str, Optional[Answer]]:
    """JSONL {id, kind, value, scale} or {id, error}; an error record maps to None."""
    preds: Dict[str, Optional[Answer]] = {}
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"line {n}", f"not JSON: {e}") from None
        _expect(isinstance(rec, dict) and "id" in rec, f"line {n}.id", "prediction needs an id")
        if "error" in rec:
            preds[str(rec["id"])] = None
            continue
        try:
            preds[str(rec["id"])] = Answer.from_dict(rec)
        except (KeyError, ValueError, ArithmeticError) as e:
            raise SchemaError(f"line {n}", f"malformed prediction: {e}") from None
    return preds


def read_predictions(path: PathLike) -> Dict[str, Optional[Answer]]:
    with open(path, encoding="utf-8") as f:
        return parse_predictions(f)

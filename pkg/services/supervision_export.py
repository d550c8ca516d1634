"""
Supervision file for an external trainer: JSONL, one header line then one record
per (instance, program) with the decoding-token ids and the re-weight coefficient.

Synthetic counting instances go to a separate augmented file of the same shape,
where each instance's records follow a context line carrying its rewritten question.
"""

import json
from typing import IO, Dict, Iterable, List, Sequence, Tuple

from services.data_loader import context_from_dict, context_to_dict
from services.errors import SchemaError
from services.knowledge_model import HybridContext
from services.program_dsl import alphabet, operation_signature, parse_program, to_decoding_tokens
from services.synthesis import PseudoProgramSet

SCHEMA_VERSION = 1


def header() -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "header", "alphabet": alphabet()}


def records(sets: Iterable[PseudoProgramSet]) -> Iterable[dict]:
    for s in sets:
        for pp in s.programs:
            yield {
                "schema_version": SCHEMA_VERSION,
                "instance_id": s.instance_id,
                "program": str(pp.program),
                "tokens": [t.id for t in to_decoding_tokens(pp.program)],
                "weight": pp.weight,
                "signature": pp.signature,
                "gold_factor": float(pp.gold_factor),
            }


def export_supervision(sets: Sequence[PseudoProgramSet], out: IO[str]) -> int:
    """Write the header and all records; returns the record count."""
    out.write(json.dumps(header(), ensure_ascii=False) + "\n")
    n = 0
    for rec in records(sets):
        out.write(json.dumps(rec, ensure_ascii=False) + "\n")
        n += 1
    return n


def augmented_records(pairs: Iterable[Tuple[HybridContext, PseudoProgramSet]]) -> Iterable[dict]:
    for ctx, s in pairs:
        yield {"schema_version": SCHEMA_VERSION, "kind": "context", "instance_id": ctx.id,
               "context": context_to_dict(ctx)}
        yield from records([s])


def export_augmented(pairs: Sequence[Tuple[HybridContext, PseudoProgramSet]], out: IO[str]) -> int:
    """Write the header, then each synthetic context followed by its records; returns the instance count."""
    out.write(json.dumps(header(), ensure_ascii=False) + "\n")
    for rec in augmented_records(pairs):
        out.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return len(pairs)


def _read(lines: Iterable[str]) -> Tuple[dict, List[Tuple[int, dict]]]:
    head = None
    recs = []
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        if head is None:
            if rec.get("kind") != "header":
                raise SchemaError(f"line {n}", "supervision file must start with a header line")
            head = rec
            continue
        if rec.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(f"line {n}.schema_version", f"unsupported {rec.get('schema_version')!r}")
        recs.append((n, rec))
    if head is None:
        raise SchemaError("line 1", "missing header")
    return head, recs


def read_supervision(lines: Iterable[str]) -> Tuple[dict, List[dict]]:
    head, recs = _read(lines)
    return head, [rec for _, rec in recs if rec.get("kind") != "context"]


def read_augmented(lines: Iterable[str]) -> List[Tuple[HybridContext, List[dict]]]:
    _, recs = _read(lines)
    out: List[Tuple[HybridContext, List[dict]]] = []
    for n, rec in recs:
        if rec.get("kind") == "context":
            out.append((context_from_dict(rec.get("context"), f"line {n}.context"), []))
        elif not out or rec.get("instance_id") != out[-1][0].id:
            raise SchemaError(f"line {n}.instance_id", "record does not follow its context line")
        else:
            out[-1][1].append(rec)
    return out


def recompute_weights(recs: Iterable[dict]) -> Dict[Tuple[str, str], float]:
    """Weight per (instance_id, program) from signatures alone, re-parsing each program."""
    recs = list(recs)
    counts: Dict[Tuple[str, str], int] = {}
    signatures = []
    for rec in recs:
        sig = operation_signature(parse_program(rec["program"]))
        signatures.append(sig)
        counts[(rec["instance_id"], sig)] = counts.get((rec["instance_id"], sig), 0) + 1
    return {(rec["instance_id"], rec["program"]): 1.0 / counts[(rec["instance_id"], sig)]
            for rec, sig in zip(recs, signatures)}

"""
Command-line surface: every result is one JSON object per line on stdout,
diagnostics go to stderr.

Exit codes: 0 success, 1 validation failure, 2 usage or input error.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from config.settings import PROFILES, RunConfig, configure_logging, load_run_config
from services.answers import Scale
from services.attention_masks import build_attention_masks
from services.data_loader import load_contexts, read_context, read_predictions
from services.errors import ConfigError, OversizeContext, RpgError, SchemaError
from services.knowledge_model import linearize
from services.legality import open_session, sorted_tokens, validate
from services.metrics import score_dataset
from services.program_dsl import (BOS, alphabet, operation_signature, parse_program,
                                  parse_tokens, to_decoding_tokens)
from services.program_executor import execute
from services.supervision_export import export_augmented, export_supervision, records
from services.synthesis import MODES, synthesize_batch
from services.tokenizer import TOKENIZER_MODES

log = logging.getLogger("rpg.cli")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2
_USAGE_ERRORS = (ConfigError, SchemaError, OversizeContext, OSError)


def emit(obj):
    sys.stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")


# ------------------------------------------------------------
#  Subcommands
# ------------------------------------------------------------

def _context(args, cfg: RunConfig):
    ctx = read_context(args.context, args.qid, cfg.rank_paragraphs)
    return ctx, linearize(ctx, cfg.tokenizer, cfg.max_context_tokens)


def _program_text(args) -> str:
    text = args.program_opt if args.program_opt is not None else args.program
    if text is None:
        raise ConfigError("a program is required (positional or --program)")
    return text


def cmd_parse(args, cfg: RunConfig) -> int:
    p = parse_program(_program_text(args))
    tokens = to_decoding_tokens(p)
    emit({"program": str(p), "signature": operation_signature(p),
          "tokens": [str(t) for t in tokens], "token_ids": [t.id for t in tokens]})
    return EXIT_OK


def cmd_check(args, cfg: RunConfig) -> int:
    ctx, li = _context(args, cfg)
    report = validate(parse_program(_program_text(args)), li, cfg.legality.for_source(ctx.source))
    emit(report.to_dict())
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_exec(args, cfg: RunConfig) -> int:
    ctx, li = _context(args, cfg)
    p = parse_program(_program_text(args))
    report = validate(p, li, cfg.legality.for_source(ctx.source))
    if not report.ok:
        emit(report.to_dict())
        return EXIT_INVALID
    scale = ctx.gold_scale
    if args.scale:
        try:
            scale = Scale.parse(args.scale)
        except ValueError:
            raise ConfigError(f"unknown scale {args.scale!r}") from None
    emit(execute(p, li, scale).to_dict())
    return EXIT_OK


def cmd_mask(args, cfg: RunConfig) -> int:
    ctx, li = _context(args, cfg)
    session = open_session(li, cfg.legality.for_source(ctx.source))
    prefix = parse_tokens(args.prefix)
    if prefix and prefix[0] == BOS:
        prefix = prefix[1:]
    for t in prefix:
        session.advance(t)
    if session.closed:
        emit({"legal": [], "ids": [], "closed": True, "dead_end": False,
              "program": str(session.program)})
        return EXIT_OK
    legal = sorted_tokens(session.legal_next())
    emit({"legal": [str(t) for t in legal], "ids": [t.id for t in legal],
          "closed": False, "dead_end": not legal})
    return EXIT_OK


def cmd_search(args, cfg: RunConfig) -> int:
    contexts = load_contexts(args.input, cfg.rank_paragraphs)
    augmented_out = args.augmented_out or (f"{args.out}.augmented.jsonl" if args.out else None)
    augment = not args.no_augment and augmented_out is not None
    if not args.no_augment and not augment:
        log.info("counting augmentation skipped: it needs --out or --augmented-out")
    batch = synthesize_batch(contexts, cfg.synthesis, cfg.legality, cfg.mode, cfg.tokenizer,
                             cfg.max_context_tokens, cfg.workers, augment=augment)
    summary = {**batch.summary, "augmented": len(batch.augmented)}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            n = export_supervision(batch.sets, f)
        log.info("wrote %d supervision records to %s", n, args.out)
        with open(f"{args.out}.summary.json", "w", encoding="utf-8") as f:
            json.dump(summary, f, indent=2)
    else:
        for rec in records(batch.sets):
            emit(rec)
    if augment:
        with open(augmented_out, "w", encoding="utf-8") as f:
            n = export_augmented(batch.augmented, f)
        log.info("wrote %d synthetic counting instances to %s", n, augmented_out)
    emit({"kind": "summary", **summary})
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    golds = load_contexts(args.gold, cfg.rank_paragraphs)
    result = score_dataset(read_predictions(args.predictions), golds)
    emit(result.to_dict(with_instances=args.per_instance))
    return EXIT_OK


def cmd_linearize(args, cfg: RunConfig) -> int:
    _, li = _context(args, cfg)
    out = li.to_dict()
    if args.masks:
        out["masks"] = build_attention_masks(li).to_dict()
    emit(out)
    return EXIT_OK


def cmd_export_alphabet(args, cfg: RunConfig) -> int:
    for entry in alphabet(args.context_length):
        emit(entry)
    return EXIT_OK


# ------------------------------------------------------------
#  Parser
# ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpg", description="Program generation over hybrid table/text contexts")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def add_shared(sp):
        sp.add_argument("--config", default=None, help="JSON run configuration")
        sp.add_argument("--tokenizer", choices=TOKENIZER_MODES, default=None)
        sp.add_argument("--profile", choices=PROFILES, default=None)
        sp.add_argument("--log-level", dest="log_level", default=None)

    def add_program(sp):
        sp.add_argument("program", nargs="?", default=None)
        sp.add_argument("--program", dest="program_opt", default=None)

    def add_context(sp):
        sp.add_argument("--context", required=True, help="context document or TAT-QA file")
        sp.add_argument("--qid", default=None, help="question uid inside a TAT-QA file")

    sp = sub.add_parser("parse", help="parse and print a program")
    add_program(sp)
    add_shared(sp)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("check", help="legality report for a program")
    add_context(sp)
    add_program(sp)
    add_shared(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("exec", help="execute a program")
    add_context(sp)
    add_program(sp)
    sp.add_argument("--scale", default=None)
    add_shared(sp)
    sp.set_defaults(func=cmd_exec)

    sp = sub.add_parser("mask", help="legal next tokens after a prefix")
    add_context(sp)
    sp.add_argument("--prefix", default="", help='space separated tokens, e.g. "OP(DIFF) OP(CV) POS(3)"')
    add_shared(sp)
    sp.set_defaults(func=cmd_mask)

    sp = sub.add_parser("search", help="pseudo-program search over a dataset file")
    sp.add_argument("--input", "--data", dest="input", required=True)
    sp.add_argument("--mode", choices=MODES, default=None)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", default=None, help="write the supervision JSONL here")
    sp.add_argument("--augmented-out", dest="augmented_out", default=None,
                    help="synthetic counting instances (default: <out>.augmented.jsonl)")
    sp.add_argument("--no-augment", action="store_true", help="skip the counting augmentation")
    add_shared(sp)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("eval", help="EM / F1 of predictions against gold")
    sp.add_argument("--predictions", "--pred", dest="predictions", required=True)
    sp.add_argument("--gold", required=True)
    sp.add_argument("--per-instance", dest="per_instance", action="store_true")
    add_shared(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("linearize", help="tokens with provenance")
    add_context(sp)
    sp.add_argument("--masks", action="store_true", help="include both attention masks")
    add_shared(sp)
    sp.set_defaults(func=cmd_linearize)

    sp = sub.add_parser("export-alphabet", help="decoding alphabet with stable ids")
    sp.add_argument("--context-length", dest="context_length", type=int, default=0)
    add_shared(sp)
    sp.set_defaults(func=cmd_export_alphabet)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    overrides = {
        "tokenizer": args.tokenizer,
        "profile": args.profile,
        "log_level": args.log_level,
        "mode": getattr(args, "mode", None),
        "workers": getattr(args, "workers", None),
    }
    try:
        cfg = load_run_config(args.config, overrides)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(cfg.log_level)

    try:
        return args.func(args, cfg)
    except _USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RpgError as e:
        emit({"error": str(e), "type": type(e).__name__})
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

# controllers/common.py
import logging
import os
from functools import lru_cache
from typing import Tuple

from dotenv import load_dotenv
from flask import jsonify, request

from config.settings import RunConfig, load_run_config
from services.data_loader import context_from_dict
from services.errors import (ClosedSession, ExecutionError, IllegalToken, RpgError,
                             SchemaError)
from services.knowledge_model import HybridContext, LinearizedInput, linearize
from services.legality import LegalityConfig
from services.program_dsl import BOS, DecodingToken, parse_token

load_dotenv()
log = logging.getLogger("rpg.http")

# rejected by a well-formed request rather than a malformed one
_UNPROCESSABLE = (IllegalToken, ClosedSession, ExecutionError)


@lru_cache(maxsize=1)
def run_config() -> RunConfig:
    return load_run_config(os.getenv("RPG_CONFIG") or None)


def body() -> dict:
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise SchemaError("$", "request body must be a JSON object")
    return data


def field(data: dict, name: str, kind=None):
    if name not in data:
        raise SchemaError(f"$.{name}", "missing field")
    value = data[name]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"$.{name}", f"expected {getattr(kind, '__name__', kind)}")
    return value


def context_and_input(data: dict) -> Tuple[HybridContext, LinearizedInput]:
    cfg = run_config()
    ctx = context_from_dict(field(data, "context", dict), "$.context")
    return ctx, linearize(ctx, cfg.tokenizer, cfg.max_context_tokens)


def legality_for(ctx: HybridContext) -> LegalityConfig:
    return run_config().legality.for_source(ctx.source)


def decoding_prefix(raw) -> list:
    """Prefix as token strings ("OP(DIFF)") or integer ids; a leading BOS is optional."""
    if isinstance(raw, str):
        raw = raw.split()
    if not isinstance(raw, list):
        raise SchemaError("$.prefix", "prefix must be a list of tokens")
    tokens = []
    for item in raw:
        if isinstance(item, int) and not isinstance(item, bool):
            tokens.append(DecodingToken.from_id(item))
        elif isinstance(item, str):
            tokens.append(parse_token(item))
        else:
            raise SchemaError("$.prefix", f"unrecognized token {item!r}")
    if tokens and tokens[0] == BOS:
        tokens = tokens[1:]
    return tokens


def error_response(e: Exception):
    if isinstance(e, _UNPROCESSABLE):
        return jsonify({"error": str(e), "type": type(e).__name__}), 422
    if isinstance(e, RpgError):
        return jsonify({"error": str(e), "type": type(e).__name__}), 400
    log.exception("unhandled error")
    return jsonify({"error": str(e), "type": "InternalError"}), 500

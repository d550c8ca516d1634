"""
Run configuration shared by the CLI, the HTTP app and the library.

Precedence, lowest first:
    defaults  <-  JSON file (--config)  <-  RPG_* environment (.env honored)  <-  explicit overrides
"""

import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv

from services.errors import ConfigError
from services.legality import LegalityConfig
from services.synthesis import MODES, SynthesisConfig
from services.tokenizer import TOKENIZER_MODES

load_dotenv()

PROFILES = ("tatqa", "drop")

# top-level and nested keys with their coercions
_TOP = {
    "mode": str,
    "tokenizer": str,
    "max_context_tokens": int,
    "rank_paragraphs": bool,
    "workers": int,
    "profile": str,
    "log_level": str,
}
_LEGALITY = {
    "max_span_length": int,
    "max_avg_args": int,
    "max_variadic_args": int,
    "max_program_tokens": int,
    "disabled_ops": list,
}
_SYNTHESIS = {
    "numeric_tolerance": str,
    "max_occurrences_per_span": int,
    "max_multispan_combinations": int,
    "max_arith_numbers": int,
    "per_instance_time_budget": float,
    "enable_nested_templates": bool,
    "question_operands": bool,
    "first_arith_tier_only": bool,
}

ENV_KEYS = {
    "RPG_MODE": "mode",
    "RPG_TOKENIZER": "tokenizer",
    "RPG_MAX_CONTEXT_TOKENS": "max_context_tokens",
    "RPG_WORKERS": "workers",
    "RPG_PROFILE": "profile",
    "RPG_LOG_LEVEL": "log_level",
    "RPG_MAX_SPAN_LENGTH": "legality.max_span_length",
    "RPG_MAX_PROGRAM_TOKENS": "legality.max_program_tokens",
    "RPG_NUMERIC_TOLERANCE": "synthesis.numeric_tolerance",
    "RPG_TIME_BUDGET": "synthesis.per_instance_time_budget",
}


@dataclass(frozen=True)
class RunConfig:
    mode: str = "without-derivation"
    tokenizer: str = "word"
    max_context_tokens: int = 2048
    rank_paragraphs: bool = True
    workers: int = 1
    profile: str = "tatqa"
    log_level: str = "INFO"
    legality: LegalityConfig = field(default_factory=LegalityConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.tokenizer not in TOKENIZER_MODES:
            raise ConfigError(f"tokenizer must be one of {', '.join(TOKENIZER_MODES)}, got {self.tokenizer!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"profile must be one of {', '.join(PROFILES)}, got {self.profile!r}")
        for name in ("max_context_tokens", "workers"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.log_level.upper() not in logging._nameToLevel:
            raise ConfigError(f"unknown log_level {self.log_level!r}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "tokenizer": self.tokenizer,
            "max_context_tokens": self.max_context_tokens,
            "rank_paragraphs": self.rank_paragraphs,
            "workers": self.workers,
            "profile": self.profile,
            "log_level": self.log_level,
            "legality": self.legality.to_dict(),
            "synthesis": self.synthesis.to_dict(),
        }


def legality_profile(profile: str, base: Optional[LegalityConfig] = None) -> LegalityConfig:
    """tatqa keeps all operations; drop disables the table operations plus TIMES and DIV."""
    base = base or LegalityConfig()
    if profile == "tatqa":
        return base
    if profile == "drop":
        return base.for_source("drop")
    raise ConfigError(f"unknown profile {profile!r}")


# ------------------------------------------------------------
#  Loading
# ------------------------------------------------------------

def _coerce(key: str, kind, value: Any):
    if value is None:
        return None
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if kind is list:
            if isinstance(value, str):
                return [v.strip() for v in value.split(",") if v.strip()]
            return list(value)
        if kind is int and isinstance(value, bool):
            raise ValueError(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {value!r} as {kind.__name__}") from None


def _merge(target: Dict[str, Any], source: Mapping[str, Any], prefix: str = ""):
    for key, value in source.items():
        path = f"{prefix}{key}"
        if key in ("legality", "synthesis") and not prefix:
            if not isinstance(value, Mapping):
                raise ConfigError(f"{path} must be an object")
            _merge(target, value, f"{key}.")
            continue
        _set(target, path, value)


def _set(target: Dict[str, Any], path: str, value: Any):
    section, _, name = path.rpartition(".")
    table = {"": _TOP, "legality": _LEGALITY, "synthesis": _SYNTHESIS}.get(section)
    if table is None or name not in table:
        raise ConfigError(f"unknown configuration key {path!r}")
    target[path] = _coerce(path, table[name], value)


def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                    environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    values: Dict[str, Any] = {}
    if path:
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: configuration must be a JSON object")
        _merge(values, data)

    environ = os.environ if environ is None else environ
    for env_key, key in ENV_KEYS.items():
        if environ.get(env_key, "") != "":
            _set(values, key, environ[env_key])

    for key, value in (overrides or {}).items():
        if value is not None:
            _set(values, key, value)

    def section(name: str) -> Dict[str, Any]:
        prefix = f"{name}."
        return {k[len(prefix):]: v for k, v in values.items() if k.startswith(prefix) and v is not None}

    legality_args = section("legality")
    if "disabled_ops" in legality_args:
        legality_args["disabled_ops"] = frozenset(legality_args["disabled_ops"])
    top = {k: v for k, v in values.items() if "." not in k and v is not None}
    profile = top.get("profile", "tatqa")
    legality = legality_profile(profile, LegalityConfig(**legality_args))
    return RunConfig(legality=legality, synthesis=SynthesisConfig(**section("synthesis")), **top)


def configure_logging(level: str = "INFO"):
    """All diagnostics go to stderr; stdout stays reserved for JSON results."""
    logging.basicConfig(
        level=level.upper(),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )

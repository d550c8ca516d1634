"""
Number normalization for cells, paragraph tokens and derivations.

Financial conventions: currency symbols and thousands separators are dropped,
"(x)" means -x and a trailing '%' is stripped (the percent flag is reported
separately by has_percent).
"""

import re
from decimal import Decimal, InvalidOperation
from typing import Optional

CURRENCY = "$€£"
NUMERIC_CHARS = frozenset("0123456789.,%()+-" + CURRENCY)

_PLAIN = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$", re.ASCII)


def is_numeric_surface(text: str) -> bool:
    """True when every character could appear inside a numeric literal."""
    return bool(text) and all(ch in NUMERIC_CHARS for ch in text)


def parse_number(surface: str) -> Optional[Decimal]:
    if surface is None:
        return None
    s = surface.strip()
    if not s or any(ch.isspace() for ch in s):
        return None

    negate = False
    if s.startswith("(") and s.endswith(")"):
        negate = True
        s = s[1:-1]
    if s.endswith("%"):
        s = s[:-1]
    s = s.translate({ord(c): None for c in CURRENCY + ","})
    # "$-5" and "-$5" both land here as "-5"
    if not _PLAIN.match(s):
        return None
    try:
        value = Decimal(s)
    except InvalidOperation:
        return None
    return -value if negate else value


def has_percent(surface: str) -> bool:
    s = (surface or "").strip().rstrip(")")
    return s.endswith("%") and parse_number(surface) is not None


def format_number(value: Decimal) -> str:
    """Plain-decimal rendering; parse_number(format_number(x)) == x."""
    if value == value.to_integral_value():
        return str(int(value))
    return format(value.normalize(), "f")

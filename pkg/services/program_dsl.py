"""
Program AST, surface syntax and the flattened decoding-token form.

Surface grammar (see docs/dsl.md):

    node   := ATOMIC '(' INT ',' INT ')' | HIGHER '(' node (',' node)* ')' | CONST
    CONST  := '0' | '1' | '100'

Decoding form is a pre-order flattening: BOS, per node (Atomic -> OP POS POS,
Higher -> OP args... CLOSE, Const -> CONST), EOS.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Sequence, Tuple, Union

from services.errors import ArityError, MalformedSequence, ProgramSyntaxError


class Op(str, Enum):
    SPAN = "SPAN"
    CELL = "CELL"
    VALUE = "VALUE"
    CELL_VALUE = "CELL_VALUE"
    KV = "KV"
    COUNT = "COUNT"
    MULTI_SPANS = "MULTI_SPANS"
    ARGMAX = "ARGMAX"
    ARGMIN = "ARGMIN"
    SUM = "SUM"
    DIFF = "DIFF"
    TIMES = "TIMES"
    DIV = "DIV"
    AVG = "AVG"
    CHANGE_R = "CHANGE_R"

    @property
    def short(self) -> str:
        return "CV" if self is Op.CELL_VALUE else self.value

    @property
    def is_atomic(self) -> bool:
        return self in ATOMIC_OPS

    @classmethod
    def lookup(cls, name: str) -> Optional["Op"]:
        name = name.upper()
        if name == "CV":
            return cls.CELL_VALUE
        try:
            return cls(name)
        except ValueError:
            return None


ATOMIC_OPS = frozenset({Op.SPAN, Op.CELL, Op.VALUE, Op.CELL_VALUE})
NUMERIC_ATOMIC_OPS = frozenset({Op.VALUE, Op.CELL_VALUE})
ARITHMETIC_OPS = frozenset({Op.SUM, Op.DIFF, Op.TIMES, Op.DIV, Op.AVG, Op.CHANGE_R})
COMMUTATIVE_OPS = frozenset({Op.SUM, Op.TIMES, Op.AVG})
FIXED_ARITY = {Op.KV: 2, Op.SUM: 2, Op.DIFF: 2, Op.TIMES: 2, Op.DIV: 2, Op.CHANGE_R: 2}
CONSTANTS = (0, 1, 100)


# ------------------------------------------------------------
#  AST
# ------------------------------------------------------------

@dataclass(frozen=True)
class Atomic:
    op: Op
    start: int
    end: int


@dataclass(frozen=True)
class Higher:
    op: Op
    args: Tuple["Node", ...]


@dataclass(frozen=True)
class Const:
    value: int


Node = Union[Atomic, Higher, Const]


@dataclass(frozen=True)
class Program:
    root: Node

    def __str__(self) -> str:
        return print_program(self)


def walk(node: Node, path: str = "root") -> Iterator[Tuple[str, Node]]:
    """Pre-order (path, node) pairs; paths look like root.args[1].args[0]."""
    yield path, node
    if isinstance(node, Higher):
        for i, arg in enumerate(node.args):
            yield from walk(arg, f"{path}.args[{i}]")


# ------------------------------------------------------------
#  Printing
# ------------------------------------------------------------

def _print_node(node: Node) -> str:
    if isinstance(node, Const):
        return str(node.value)
    if isinstance(node, Atomic):
        return f"{node.op.short}({node.start},{node.end})"
    return f"{node.op.short}({', '.join(_print_node(a) for a in node.args)})"


def print_program(p: Program) -> str:
    return _print_node(p.root)


def operation_signature(p: Program) -> str:
    """Pre-order op names joined by '/'; positions and constant values are elided."""
    names = []
    for _, node in walk(p.root):
        names.append("CONST" if isinstance(node, Const) else node.op.short)
    return "/".join(names)


# ------------------------------------------------------------
#  Parsing
# ------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.i = 0

    def error(self, message: str, at: Optional[int] = None) -> ProgramSyntaxError:
        at = self.i if at is None else at
        return ProgramSyntaxError(message, len(self.text[:at].encode("utf-8")))

    def skip_ws(self):
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.i] if self.i < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise self.error(f"expected {ch!r}, found {found}")
        self.i += 1

    def read_while(self, pred) -> Tuple[str, int]:
        self.skip_ws()
        start = self.i
        while self.i < len(self.text) and pred(self.text[self.i]):
            self.i += 1
        return self.text[start:self.i], start

    def integer(self) -> int:
        digits, at = self.read_while(str.isdigit)
        if not digits:
            raise self.error("expected an integer")
        return int(digits)

    def node(self) -> Node:
        ch = self.peek()
        if ch.isdigit():
            at = self.i
            value = self.integer()
            if value not in CONSTANTS:
                raise self.error(f"constant {value} is not one of 0, 1, 100", at)
            return Const(value)

        name, at = self.read_while(lambda c: c.isalnum() or c == "_")
        if not name:
            raise self.error("expected an operation name or constant")
        op = Op.lookup(name)
        if op is None:
            raise self.error(f"unknown operation {name!r}", at)

        self.expect("(")
        if op.is_atomic:
            start = self.integer()
            self.expect(",")
            end = self.integer()
            self.expect(")")
            return Atomic(op, start, end)

        args = [self.node()]
        while self.peek() == ",":
            self.i += 1
            args.append(self.node())
        self.expect(")")
        want = FIXED_ARITY.get(op)
        if want is not None and len(args) != want:
            raise ArityError(f"{op.short} takes {want} arguments, got {len(args)}")
        return Higher(op, tuple(args))


def parse_program(text: str) -> Program:
    parser = _Parser(text or "")
    root = parser.node()
    if parser.peek():
        raise parser.error("trailing input after program")
    return Program(root)


# ------------------------------------------------------------
#  Decoding tokens
# ------------------------------------------------------------

class TokenKind(str, Enum):
    BOS = "BOS"
    EOS = "EOS"
    CLOSE = "CLOSE"
    OP = "OP"
    CONST = "CONST"
    POS = "POS"


_OP_ORDER = list(Op)
OP_ID_BASE = 3
CONST_ID_BASE = OP_ID_BASE + len(_OP_ORDER)
POS_ID_BASE = CONST_ID_BASE + len(CONSTANTS)


@dataclass(frozen=True)
class DecodingToken:
    kind: TokenKind
    op: Optional[Op] = None
    value: Optional[int] = None

    # ---- constructors ----
    @classmethod
    def of_op(cls, op: Op) -> "DecodingToken":
        return cls(TokenKind.OP, op=op)

    @classmethod
    def pos(cls, i: int) -> "DecodingToken":
        return cls(TokenKind.POS, value=i)

    @classmethod
    def const(cls, v: int) -> "DecodingToken":
        return cls(TokenKind.CONST, value=v)

    @property
    def id(self) -> int:
        if self.kind is TokenKind.BOS:
            return 0
        if self.kind is TokenKind.EOS:
            return 1
        if self.kind is TokenKind.CLOSE:
            return 2
        if self.kind is TokenKind.OP:
            return OP_ID_BASE + _OP_ORDER.index(self.op)
        if self.kind is TokenKind.CONST:
            return CONST_ID_BASE + CONSTANTS.index(self.value)
        return POS_ID_BASE + self.value

    @classmethod
    def from_id(cls, token_id: int) -> "DecodingToken":
        if token_id < 0:
            raise MalformedSequence(f"negative token id {token_id}")
        if token_id < OP_ID_BASE:
            return (BOS, EOS, CLOSE)[token_id]
        if token_id < CONST_ID_BASE:
            return cls.of_op(_OP_ORDER[token_id - OP_ID_BASE])
        if token_id < POS_ID_BASE:
            return cls.const(CONSTANTS[token_id - CONST_ID_BASE])
        return cls.pos(token_id - POS_ID_BASE)

    def __str__(self) -> str:
        if self.kind is TokenKind.OP:
            return f"OP({self.op.short})"
        if self.kind in (TokenKind.POS, TokenKind.CONST):
            return f"{self.kind.value}({self.value})"
        return self.kind.value

    def sort_key(self) -> int:
        return self.id


BOS = DecodingToken(TokenKind.BOS)
EOS = DecodingToken(TokenKind.EOS)
CLOSE = DecodingToken(TokenKind.CLOSE)


def parse_token(text: str) -> DecodingToken:
    """Inverse of str(DecodingToken): "BOS", "OP(DIFF)", "POS(5)", "CONST(100)", "CLOSE"."""
    s = text.strip().upper()
    for bare in (BOS, EOS, CLOSE):
        if s == bare.kind.value:
            return bare
    if "(" not in s or not s.endswith(")"):
        raise MalformedSequence(f"unrecognized decoding token {text!r}")
    head, inner = s[:-1].split("(", 1)
    inner = inner.strip()
    if head == "OP":
        op = Op.lookup(inner)
        if op is None:
            raise MalformedSequence(f"unknown operation in {text!r}")
        return DecodingToken.of_op(op)
    if head in ("POS", "CONST") and inner.isdigit():
        value = int(inner)
        if head == "CONST":
            if value not in CONSTANTS:
                raise MalformedSequence(f"constant {value} is not one of 0, 1, 100")
            return DecodingToken.const(value)
        return DecodingToken.pos(value)
    raise MalformedSequence(f"unrecognized decoding token {text!r}")


def parse_tokens(text: str) -> List[DecodingToken]:
    return [parse_token(t) for t in (text or "").split()]


def _flatten(node: Node, out: List[DecodingToken]):
    if isinstance(node, Const):
        out.append(DecodingToken.const(node.value))
    elif isinstance(node, Atomic):
        out.extend((DecodingToken.of_op(node.op), DecodingToken.pos(node.start),
                    DecodingToken.pos(node.end)))
    else:
        out.append(DecodingToken.of_op(node.op))
        for arg in node.args:
            _flatten(arg, out)
        out.append(CLOSE)


def to_decoding_tokens(p: Program) -> List[DecodingToken]:
    out = [BOS]
    _flatten(p.root, out)
    out.append(EOS)
    return out


def from_decoding_tokens(ts: Sequence[DecodingToken]) -> Program:
    ts = list(ts)
    if len(ts) < 3 or ts[0] != BOS or ts[-1] != EOS:
        raise MalformedSequence("sequence must start with BOS and end with EOS")
    body = ts[1:-1]
    i = 0

    def node() -> Node:
        nonlocal i
        if i >= len(body):
            raise MalformedSequence("sequence ends inside a program")
        tok = body[i]
        i += 1
        if tok.kind is TokenKind.CONST:
            return Const(tok.value)
        if tok.kind is not TokenKind.OP:
            raise MalformedSequence(f"expected OP or CONST, found {tok} at {i}")
        if tok.op.is_atomic:
            if i + 2 > len(body) or any(t.kind is not TokenKind.POS for t in body[i:i + 2]):
                raise MalformedSequence(f"{tok} must be followed by two POS tokens")
            start, end = body[i].value, body[i + 1].value
            i += 2
            return Atomic(tok.op, start, end)
        args = []
        while i < len(body) and body[i] != CLOSE:
            args.append(node())
        if i >= len(body):
            raise MalformedSequence(f"{tok} is never closed")
        i += 1
        if not args:
            raise MalformedSequence(f"{tok} closed with no arguments")
        return Higher(tok.op, tuple(args))

    root = node()
    if i != len(body):
        raise MalformedSequence(f"trailing tokens after the root program at {i + 1}")
    return Program(root)


def alphabet(context_length: int = 0) -> List[dict]:
    """Decoding alphabet with stable ids; POS entries are listed up to context_length."""
    fixed = [BOS, EOS, CLOSE] + [DecodingToken.of_op(op) for op in _OP_ORDER] + \
        [DecodingToken.const(c) for c in CONSTANTS]
    entries = [{"id": t.id, "token": str(t)} for t in fixed]
    entries.extend({"id": DecodingToken.pos(i).id, "token": str(DecodingToken.pos(i))}
                   for i in range(context_length))
    return entries

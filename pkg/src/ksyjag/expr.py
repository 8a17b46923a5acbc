"""The expression language used by ``size``, ``repeat-expr`` and ``repeat-until``.

Grammar, lowest to highest precedence::

    comparison : additive (("==" | "!=" | "<" | "<=" | ">" | ">=") additive)*
    additive   : term (("+" | "-") term)*
    term       : factor (("*" | "/") factor)*
    factor     : INT | "-" INT | IDENT | "_" | "(" comparison ")"

Integer literals are decimal. Identifiers follow ``[a-z][a-z0-9_]*``.
``_`` names the element just parsed and is only bound inside a
``repeat-until`` condition. There are no boolean connectives.

Values are plain Python objects: ``int`` (signed 64-bit semantics, overflow
is an error), ``float``, ``bool``, ``str``, and ``dict`` for parsed
user-type records (opaque to every operator). ``/`` is truncating integer
division unless a float is involved; text ordering is bytewise over UTF-8.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

from .errors import ExprEvalError, ExprSyntaxError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class IntLiteral:
    value: int


@dataclass(frozen=True)
class FieldRef:
    name: str


@dataclass(frozen=True)
class LastItem:
    pass


@dataclass(frozen=True)
class Binary:
    op: str  # add sub mul div eq ne lt le gt ge
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[IntLiteral, FieldRef, LastItem, Binary]

Value = Union[int, float, bool, str, dict, list]


@dataclass
class Scope:
    """Fields already parsed in the current seq instance, plus ``_``."""

    bindings: Mapping[str, Value] = field(default_factory=dict)
    last_item: Value | None = None


_COMPARE_OPS = {"==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}
_ADD_OPS = {"+": "add", "-": "sub"}
_MUL_OPS = {"*": "mul", "/": "div"}
_OP_SYMBOL = {v: k for d in (_COMPARE_OPS, _ADD_OPS, _MUL_OPS) for k, v in d.items()}


@dataclass(frozen=True)
class _Token:
    kind: str  # int ident under op lparen rparen end
    text: str
    col: int  # 1-based
    value: int = 0


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        col = i + 1
        if c in " \t":
            i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], col, value=int(text[i:j])))
            i = j
            continue
        if c.isalpha():
            if not c.islower() or not c.isascii():
                raise ExprSyntaxError(f"identifiers are lowercase ascii, got {c!r}", col)
            j = i
            while j < n and (text[j].isascii() and (text[j].islower() or text[j].isdigit() or text[j] == "_")):
                j += 1
            tokens.append(_Token("ident", text[i:j], col))
            i = j
            continue
        if c == "_":
            if i + 1 < n and (text[i + 1].isalnum() or text[i + 1] == "_"):
                raise ExprSyntaxError("identifiers must start with a letter", col)
            tokens.append(_Token("under", "_", col))
            i += 1
            continue
        two = text[i : i + 2]
        if two in ("==", "!=", "<=", ">="):
            tokens.append(_Token("op", two, col))
            i += 2
            continue
        if two in ("&&", "||"):
            raise ExprSyntaxError("boolean connectives are not supported", col)
        if c in "+-*/<>":
            tokens.append(_Token("op", c, col))
            i += 1
            continue
        if c == "(":
            tokens.append(_Token("lparen", c, col))
            i += 1
            continue
        if c == ")":
            tokens.append(_Token("rparen", c, col))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", col)
    tokens.append(_Token("end", "", n + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        tok = self._tokens[self._pos]
        self._pos += 1
        return tok

    def parse(self) -> Expr:
        expr = self._comparison()
        tok = self._peek()
        if tok.kind != "end":
            if tok.kind == "ident" and tok.text in ("and", "or", "not"):
                raise ExprSyntaxError("boolean connectives are not supported", tok.col)
            raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.col)
        return expr

    def _comparison(self) -> Expr:
        expr = self._additive()
        while self._peek().kind == "op" and self._peek().text in _COMPARE_OPS:
            op = self._next().text
            expr = Binary(_COMPARE_OPS[op], expr, self._additive())
        return expr

    def _additive(self) -> Expr:
        expr = self._term()
        while self._peek().kind == "op" and self._peek().text in _ADD_OPS:
            op = self._next().text
            expr = Binary(_ADD_OPS[op], expr, self._term())
        return expr

    def _term(self) -> Expr:
        expr = self._factor()
        while self._peek().kind == "op" and self._peek().text in _MUL_OPS:
            op = self._next().text
            expr = Binary(_MUL_OPS[op], expr, self._factor())
        return expr

    def _factor(self) -> Expr:
        tok = self._next()
        if tok.kind == "int":
            if tok.value > INT64_MAX:
                raise ExprSyntaxError("integer literal out of range", tok.col)
            return IntLiteral(tok.value)
        if tok.kind == "op" and tok.text == "-":
            lit = self._next()
            if lit.kind != "int":
                raise ExprSyntaxError("unary minus is only supported on integer literals", tok.col)
            if -lit.value < INT64_MIN:
                raise ExprSyntaxError("integer literal out of range", lit.col)
            return IntLiteral(-lit.value)
        if tok.kind == "ident":
            if tok.text in ("and", "or", "not"):
                raise ExprSyntaxError("boolean connectives are not supported", tok.col)
            return FieldRef(tok.text)
        if tok.kind == "under":
            return LastItem()
        if tok.kind == "lparen":
            expr = self._comparison()
            closing = self._next()
            if closing.kind != "rparen":
                raise ExprSyntaxError("expected ')'", closing.col)
            return expr
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of expression", tok.col)
        raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.col)


def parse_expr(text: str) -> Expr:
    """Parse an expression string into its AST."""
    if not isinstance(text, str):
        raise ExprSyntaxError(f"expected an expression string, got {type(text).__name__}")
    if not text.strip():
        raise ExprSyntaxError("empty expression", 1)
    return _Parser(_tokenize(text)).parse()


_PRECEDENCE = {"eq": 1, "ne": 1, "lt": 1, "le": 1, "gt": 1, "ge": 1,
               "add": 2, "sub": 2, "mul": 3, "div": 3}


def render_expr(expr: Expr) -> str:
    """Render an AST back to source text; inverse of :func:`parse_expr`."""
    text, _ = _render(expr)
    return text


def _render(expr: Expr) -> tuple[str, int]:
    if isinstance(expr, IntLiteral):
        return str(expr.value), 4
    if isinstance(expr, FieldRef):
        return expr.name, 4
    if isinstance(expr, LastItem):
        return "_", 4
    prec = _PRECEDENCE[expr.op]
    lhs, lprec = _render(expr.lhs)
    rhs, rprec = _render(expr.rhs)
    if lprec < prec:
        lhs = f"({lhs})"
    # operators are left-associative, so an equal-precedence rhs needs parens
    if rprec <= prec:
        rhs = f"({rhs})"
    return f"{lhs} {_OP_SYMBOL[expr.op]} {rhs}", prec


def walk_expr(expr: Expr):
    """Yield every node of the AST, pre-order."""
    yield expr
    if isinstance(expr, Binary):
        yield from walk_expr(expr.lhs)
        yield from walk_expr(expr.rhs)


def _kind_name(value: Value) -> str:
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "text"
    if isinstance(value, dict):
        return "record"
    if isinstance(value, list):
        return "list"
    return type(value).__name__


def _is_number(value: Value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_int_range(value: int) -> int:
    if value < INT64_MIN or value > INT64_MAX:
        raise ExprEvalError("integer overflow")
    return value


def _arith(op: str, lhs: Value, rhs: Value) -> Value:
    if not _is_number(lhs) or not _is_number(rhs):
        raise ExprEvalError(
            f"arithmetic needs numbers, got {_kind_name(lhs)} and {_kind_name(rhs)}"
        )
    if op == "add":
        result = lhs + rhs
    elif op == "sub":
        result = lhs - rhs
    elif op == "mul":
        result = lhs * rhs
    else:  # div
        if rhs == 0:
            raise ExprEvalError("division by zero")
        if isinstance(lhs, int) and isinstance(rhs, int):
            # truncating division, not Python's floor division
            quotient = lhs // rhs
            if lhs % rhs != 0 and (lhs < 0) != (rhs < 0):
                quotient += 1
            return _check_int_range(quotient)
        return lhs / rhs
    if isinstance(result, int):
        return _check_int_range(result)
    return result


def _compare(op: str, lhs: Value, rhs: Value) -> bool:
    if isinstance(lhs, (dict, list)) or isinstance(rhs, (dict, list)):
        raise ExprEvalError(
            f"cannot compare {_kind_name(lhs)} with {_kind_name(rhs)}"
        )
    if _is_number(lhs) and _is_number(rhs):
        a, b = lhs, rhs
    elif isinstance(lhs, str) and isinstance(rhs, str):
        # bytewise ordering, deterministic across encodings
        a, b = lhs.encode("utf-8"), rhs.encode("utf-8")
    elif isinstance(lhs, bool) and isinstance(rhs, bool):
        a, b = lhs, rhs
    else:
        raise ExprEvalError(
            f"cannot compare {_kind_name(lhs)} with {_kind_name(rhs)}"
        )
    if op == "eq":
        return a == b
    if op == "ne":
        return a != b
    if op == "lt":
        return a < b
    if op == "le":
        return a <= b
    if op == "gt":
        return a > b
    return a >= b


def eval_expr(expr: Expr, scope: Scope) -> Value:
    """Evaluate an expression against a scope; pure and deterministic."""
    if isinstance(expr, IntLiteral):
        return expr.value
    if isinstance(expr, FieldRef):
        if expr.name not in scope.bindings:
            raise ExprEvalError(f"unbound field '{expr.name}'")
        return scope.bindings[expr.name]
    if isinstance(expr, LastItem):
        if scope.last_item is None:
            raise ExprEvalError("'_' is only bound inside a repeat-until condition")
        return scope.last_item
    lhs = eval_expr(expr.lhs, scope)
    rhs = eval_expr(expr.rhs, scope)
    if expr.op in ("add", "sub", "mul", "div"):
        return _arith(expr.op, lhs, rhs)
    return _compare(expr.op, lhs, rhs)

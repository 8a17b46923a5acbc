"""Schema model for the supported Kaitai Struct YAML subset.

The subset covers ``meta`` (id, endian), a top-level ``seq``, named user
types under ``types``, and per-attribute keys ``id``, ``type``, ``size``,
``repeat``, ``repeat-expr``, ``repeat-until``. Anything else is rejected
rather than skipped, so unsupported full-KSY features surface immediately.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Union

import yaml

from .errors import (
    AttrSizeError,
    DuplicateIdError,
    ExprSyntaxError,
    FieldReferenceError,
    IdentifierError,
    MissingKeyError,
    NestedEosError,
    RepeatError,
    SchemaError,
    TypeCycleError,
    UnknownKeyError,
    UnknownPrimitiveError,
    UnresolvedTypeError,
    YamlSyntaxError,
)
from .expr import (
    INT64_MAX,
    INT64_MIN,
    Expr,
    FieldRef,
    IntLiteral,
    LastItem,
    parse_expr,
    walk_expr,
)


class Endian(Enum):
    LITTLE = "le"
    BIG = "be"


PRIMITIVE_WIDTHS = {
    "u1": 1, "u2": 2, "u4": 4, "u8": 8,
    "s1": 1, "s2": 2, "s4": 4, "s8": 8,
    "f4": 4, "f8": 8,
}

_IDENT_RE = re.compile(r"[a-z][a-z0-9_]*\Z")
_PRIMITIVE_LOOKING_RE = re.compile(r"([usf])(\d+)(le|be)?\Z")


@dataclass(frozen=True)
class Primitive:
    kind: str
    endian_override: Endian | None = None


@dataclass(frozen=True)
class StringType:
    pass


@dataclass(frozen=True)
class UserType:
    name: str


TypeRef = Union[Primitive, StringType, UserType]


@dataclass(frozen=True)
class NoRepeat:
    pass


@dataclass(frozen=True)
class RepeatEos:
    pass


@dataclass(frozen=True)
class RepeatCount:
    count: Expr


@dataclass(frozen=True)
class RepeatUntil:
    condition: Expr


RepeatSpec = Union[NoRepeat, RepeatEos, RepeatCount, RepeatUntil]


@dataclass(frozen=True)
class Attr:
    id: str
    type_ref: TypeRef
    size: Expr | None = None
    repeat: RepeatSpec = NoRepeat()


@dataclass(frozen=True)
class Meta:
    id: str
    endian: Endian


@dataclass(frozen=True)
class TypeDef:
    name: str
    seq: tuple[Attr, ...]


@dataclass(frozen=True)
class Schema:
    meta: Meta
    seq: tuple[Attr, ...]
    types: Mapping[str, TypeDef]


@dataclass(frozen=True)
class ValidatedSchema:
    """A :class:`Schema` that passed :func:`validate_schema`.

    ``seq_ids`` maps each seq owner ("" for the top level, otherwise the
    user-type name) to its attribute ids in declaration order.
    """

    schema: Schema
    seq_ids: Mapping[str, tuple[str, ...]]

    @property
    def meta(self) -> Meta:
        return self.schema.meta

    @property
    def seq(self) -> tuple[Attr, ...]:
        return self.schema.seq

    @property
    def types(self) -> Mapping[str, TypeDef]:
        return self.schema.types


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _require_mapping(node: object, path: str) -> dict:
    if not isinstance(node, dict):
        raise SchemaError(f"expected a mapping, got {type(node).__name__}", path or "document")
    for key in node:
        if not isinstance(key, str):
            raise SchemaError(f"mapping keys must be strings, got {key!r}", path or "document")
    return node


def _reject_unknown_keys(node: dict, allowed: set[str], path: str) -> None:
    for key in node:
        if key not in allowed:
            raise UnknownKeyError(f"unknown key '{key}'", _join(path, key))


def _require_key(node: dict, key: str, path: str) -> object:
    if key not in node:
        raise MissingKeyError(f"missing mandatory key '{key}'", path or "document")
    return node[key]


def _parse_identifier(value: object, path: str) -> str:
    if not isinstance(value, str):
        raise IdentifierError(f"expected an identifier string, got {value!r}", path)
    if not _IDENT_RE.match(value):
        raise IdentifierError(
            f"'{value}' is not a valid identifier (expected [a-z][a-z0-9_]*)", path
        )
    return value


def _parse_expr_node(value: object, path: str) -> Expr:
    if isinstance(value, bool):
        raise SchemaError("expected an integer or expression string", path)
    if isinstance(value, int):
        if value < INT64_MIN or value > INT64_MAX:
            raise SchemaError("integer out of 64-bit range", path)
        return IntLiteral(value)
    if isinstance(value, str):
        try:
            return parse_expr(value)
        except ExprSyntaxError as exc:
            raise ExprSyntaxError(exc.message, col=exc.col, path=path) from None
    raise SchemaError(
        f"expected an integer or expression string, got {type(value).__name__}", path
    )


def _parse_type_name(name: object, path: str) -> TypeRef:
    if not isinstance(name, str):
        raise SchemaError(f"type must be a string, got {name!r}", path)
    if name == "str":
        return StringType()
    if name == "strz":
        raise UnknownPrimitiveError(
            "'strz' is not supported; use 'str' with an explicit size", path
        )
    match = _PRIMITIVE_LOOKING_RE.match(name)
    if match:
        base = match.group(1) + match.group(2)
        suffix = match.group(3)
        if base not in PRIMITIVE_WIDTHS:
            raise UnknownPrimitiveError(f"unsupported primitive type '{name}'", path)
        if suffix and PRIMITIVE_WIDTHS[base] == 1:
            raise UnknownPrimitiveError(
                f"endian suffix is meaningless on single-byte type '{name}'", path
            )
        override = Endian(suffix) if suffix else None
        return Primitive(base, override)
    return UserType(_parse_identifier(name, path))


_ATTR_KEYS = {"id", "type", "size", "repeat", "repeat-expr", "repeat-until"}


def _parse_attr(node: object, path: str) -> Attr:
    attr = _require_mapping(node, path)
    if "encoding" in attr:
        raise UnknownKeyError(
            "unknown key 'encoding': string encoding is fixed to UTF-8",
            _join(path, "encoding"),
        )
    _reject_unknown_keys(attr, _ATTR_KEYS, path)
    attr_id = _parse_identifier(_require_key(attr, "id", path), _join(path, "id"))
    type_ref = _parse_type_name(_require_key(attr, "type", path), _join(path, "type"))

    size = None
    if "size" in attr:
        if isinstance(type_ref, UserType):
            raise AttrSizeError(
                "size on a user type (sized substream) is not supported",
                _join(path, "size"),
            )
        if not isinstance(type_ref, StringType):
            raise AttrSizeError("size is only supported on str attributes", _join(path, "size"))
        size = _parse_expr_node(attr["size"], _join(path, "size"))
    elif isinstance(type_ref, StringType):
        raise AttrSizeError("str attributes require a size", path)

    repeat = _parse_repeat(attr, path)
    return Attr(attr_id, type_ref, size, repeat)


def _parse_repeat(attr: dict, path: str) -> RepeatSpec:
    kind = attr.get("repeat")
    if kind is None:
        for key in ("repeat-expr", "repeat-until"):
            if key in attr:
                raise RepeatError(
                    f"'{key}' requires 'repeat: {key.split('-')[1]}'", _join(path, key)
                )
        return NoRepeat()
    if kind == "eos":
        for key in ("repeat-expr", "repeat-until"):
            if key in attr:
                raise RepeatError(f"'{key}' conflicts with 'repeat: eos'", _join(path, key))
        return RepeatEos()
    if kind == "expr":
        if "repeat-until" in attr:
            raise RepeatError("'repeat-until' conflicts with 'repeat: expr'", _join(path, "repeat-until"))
        if "repeat-expr" not in attr:
            raise MissingKeyError("'repeat: expr' requires 'repeat-expr'", path)
        return RepeatCount(_parse_expr_node(attr["repeat-expr"], _join(path, "repeat-expr")))
    if kind == "until":
        if "repeat-expr" in attr:
            raise RepeatError("'repeat-expr' conflicts with 'repeat: until'", _join(path, "repeat-expr"))
        if "repeat-until" not in attr:
            raise MissingKeyError("'repeat: until' requires 'repeat-until'", path)
        return RepeatUntil(_parse_expr_node(attr["repeat-until"], _join(path, "repeat-until")))
    raise RepeatError(
        f"unknown repeat kind {kind!r} (expected eos, expr, or until)", _join(path, "repeat")
    )


def _parse_seq(node: object, path: str) -> tuple[Attr, ...]:
    if not isinstance(node, list):
        raise SchemaError(f"expected a list, got {type(node).__name__}", path)
    if not node:
        raise SchemaError("seq must not be empty", path)
    return tuple(_parse_attr(item, f"{path}[{i}]") for i, item in enumerate(node))


def _parse_meta(node: object) -> Meta:
    meta = _require_mapping(node, "meta")
    _reject_unknown_keys(meta, {"id", "endian"}, "meta")
    meta_id = _parse_identifier(_require_key(meta, "id", "meta"), "meta.id")
    if "endian" not in meta:
        raise MissingKeyError(
            "missing mandatory key 'endian' (formats must declare a default byte order)",
            "meta",
        )
    endian = meta["endian"]
    if endian not in ("le", "be"):
        raise SchemaError(f"endian must be 'le' or 'be', got {endian!r}", "meta.endian")
    return Meta(meta_id, Endian(endian))


def _parse_types(node: object) -> dict[str, TypeDef]:
    if node is None:
        return {}
    types_node = _require_mapping(node, "types")
    types: dict[str, TypeDef] = {}
    for name, body in types_node.items():
        path = f"types.{name}"
        _parse_identifier(name, path)
        if name == "str" or name == "strz" or _PRIMITIVE_LOOKING_RE.match(name):
            raise IdentifierError(f"type name '{name}' collides with a built-in type", path)
        type_body = _require_mapping(body, path)
        _reject_unknown_keys(type_body, {"seq"}, path)
        seq = _parse_seq(_require_key(type_body, "seq", path), f"{path}.seq")
        types[name] = TypeDef(name, seq)
    return types


def parse_schema(text: str) -> Schema:
    """Parse a KSY document into an unvalidated :class:`Schema`.

    Strict mode: any key outside the supported subset is an error, reported
    with its document path (e.g. ``seq[0].sizee``).
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise YamlSyntaxError(f"malformed YAML at {where}: {exc.problem or exc}") from None
    except yaml.YAMLError as exc:
        raise YamlSyntaxError(f"malformed YAML: {exc}") from None
    doc = _require_mapping(doc, "")
    _reject_unknown_keys(doc, {"meta", "seq", "types"}, "")
    meta = _parse_meta(_require_key(doc, "meta", ""))
    seq = _parse_seq(_require_key(doc, "seq", ""), "seq")
    types = _parse_types(doc.get("types"))
    return Schema(meta, seq, types)


def _check_unique_ids(seq: tuple[Attr, ...], path: str) -> None:
    seen: set[str] = set()
    for i, attr in enumerate(seq):
        if attr.id in seen:
            raise DuplicateIdError(f"duplicate attribute id '{attr.id}'", f"{path}[{i}]")
        seen.add(attr.id)


def _check_references(schema: Schema, seq: tuple[Attr, ...], path: str) -> None:
    for i, attr in enumerate(seq):
        attr_path = f"{path}[{i}]"
        if isinstance(attr.type_ref, UserType) and attr.type_ref.name not in schema.types:
            raise UnresolvedTypeError(
                f"unresolved user type '{attr.type_ref.name}'", _join(attr_path, "type")
            )


def _check_exprs(seq: tuple[Attr, ...], path: str) -> None:
    earlier: set[str] = set()
    all_ids = {attr.id for attr in seq}
    for i, attr in enumerate(seq):
        attr_path = f"{path}[{i}]"
        checks: list[tuple[Expr, str, bool]] = []
        if attr.size is not None:
            checks.append((attr.size, _join(attr_path, "size"), False))
        if isinstance(attr.repeat, RepeatCount):
            checks.append((attr.repeat.count, _join(attr_path, "repeat-expr"), False))
        if isinstance(attr.repeat, RepeatUntil):
            checks.append((attr.repeat.condition, _join(attr_path, "repeat-until"), True))
        for expr, expr_path, allow_last in checks:
            for node in walk_expr(expr):
                if isinstance(node, LastItem) and not allow_last:
                    raise FieldReferenceError("'_' is only valid in repeat-until", expr_path)
                if isinstance(node, FieldRef) and node.name not in earlier:
                    if node.name in all_ids:
                        raise FieldReferenceError(
                            f"forward reference to '{node.name}' (declared later in this seq)",
                            expr_path,
                        )
                    raise FieldReferenceError(f"unknown field '{node.name}'", expr_path)
        earlier.add(attr.id)


def _check_cycles(schema: Schema) -> None:
    state: dict[str, int] = {}  # 1 = in progress, 2 = done

    def visit(name: str, trail: list[str]) -> None:
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise TypeCycleError(trail[trail.index(name):] + [name])
        state[name] = 1
        for attr in schema.types[name].seq:
            ref = attr.type_ref
            if isinstance(ref, UserType) and ref.name in schema.types:
                visit(ref.name, trail + [ref.name])
        state[name] = 2

    for start in schema.types:
        visit(start, [start])


def _check_nested_eos(schema: Schema) -> None:
    contains_eos: dict[str, bool] = {}

    def type_contains_eos(name: str, visiting: set[str]) -> bool:
        if name in contains_eos:
            return contains_eos[name]
        if name in visiting or name not in schema.types:
            return False  # cycles/unresolved reported elsewhere
        visiting.add(name)
        found = False
        for attr in schema.types[name].seq:
            if isinstance(attr.repeat, RepeatEos):
                found = True
            if isinstance(attr.type_ref, UserType) and type_contains_eos(attr.type_ref.name, visiting):
                found = True
        visiting.remove(name)
        contains_eos[name] = found
        return found

    def check_seq(seq: tuple[Attr, ...], path: str) -> None:
        for i, attr in enumerate(seq):
            if isinstance(attr.repeat, (RepeatCount, RepeatUntil)):
                if isinstance(attr.type_ref, UserType) and type_contains_eos(attr.type_ref.name, set()):
                    raise NestedEosError(
                        "repeat-eos inside a counted or conditional repeat is "
                        "ill-defined without substreams",
                        f"{path}[{i}]",
                    )

    check_seq(schema.seq, "seq")
    for name, typedef in schema.types.items():
        check_seq(typedef.seq, f"types.{name}.seq")


def validate_schema(schema: Schema | ValidatedSchema) -> ValidatedSchema:
    """Check all structural invariants; idempotent on validated schemas."""
    if isinstance(schema, ValidatedSchema):
        return schema

    _check_unique_ids(schema.seq, "seq")
    for name, typedef in schema.types.items():
        _check_unique_ids(typedef.seq, f"types.{name}.seq")

    _check_references(schema, schema.seq, "seq")
    for name, typedef in schema.types.items():
        _check_references(schema, typedef.seq, f"types.{name}.seq")

    _check_cycles(schema)

    _check_exprs(schema.seq, "seq")
    for name, typedef in schema.types.items():
        _check_exprs(typedef.seq, f"types.{name}.seq")

    _check_nested_eos(schema)

    seq_ids = {"": tuple(attr.id for attr in schema.seq)}
    for name, typedef in schema.types.items():
        seq_ids[name] = tuple(attr.id for attr in typedef.seq)
    return ValidatedSchema(schema, seq_ids)

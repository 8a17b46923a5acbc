"""Schema compilation and the binary interpreter.

``compile_layout`` lowers a validated schema to a layout plan: primitives
become numeric nodes, strings become string nodes, user types become
records, and any repeated attribute wraps its content in a list-offset
node. ``parse_data`` then walks the plan over a byte stream, appending
into a :class:`~ksyjag.layout.FilledLayout`.

Diagnostics carry an attribute path built from the plan's field names,
with element indices, e.g. ``animalA__Zentry[1].animal_entryA__Zweight``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import (
    DataError,
    ExprEvalError,
    StringDecodeError,
    TrailingBytesError,
    TruncatedStreamError,
)
from .expr import Scope, Value, eval_expr
from .ksy import (
    PRIMITIVE_WIDTHS,
    Attr,
    Endian,
    NoRepeat,
    Primitive,
    RepeatCount,
    RepeatEos,
    RepeatUntil,
    StringType,
    UserType,
    ValidatedSchema,
)
from .layout import (
    FilledLayout,
    LayoutNode,
    ListOffsetNode,
    NumericNode,
    RecordNode,
    StringNode,
    to_form,
    walk_nodes,
)

_STRUCT_FORMATS = {
    "u1": "B", "u2": "H", "u4": "I", "u8": "Q",
    "s1": "b", "s2": "h", "s4": "i", "s8": "q",
    "f4": "f", "f8": "d",
}

NAMING_MODES = ("mangled", "plain")


def mangle_name(owning_type_id: str, attr_id: str) -> str:
    """Flatten an attribute name into its owning type's namespace.

    The top-level seq uses ``meta.id`` as its owning type.
    """
    return f"{owning_type_id}A__Z{attr_id}"


@dataclass
class Cursor:
    """Position and default byte order over an immutable byte sequence."""

    data: bytes
    pos: int = 0
    default_endian: Endian = Endian.LITTLE

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def read_primitive(cursor: Cursor, kind: str, endian: Endian, path: str = "") -> int | float:
    """Decode one primitive at the cursor and advance past it."""
    width = PRIMITIVE_WIDTHS[kind]
    if cursor.remaining < width:
        raise TruncatedStreamError(
            f"need {width} bytes for {kind}, only {cursor.remaining} remain",
            path=path or None,
            offset=cursor.pos,
        )
    prefix = "<" if endian is Endian.LITTLE else ">"
    value = struct.unpack_from(prefix + _STRUCT_FORMATS[kind], cursor.data, cursor.pos)[0]
    cursor.pos += width
    return value


@dataclass(frozen=True)
class LayoutPlan:
    """Compiled layout for one schema.

    ``attr_map`` keys are attribute-id paths from the top level, e.g.
    ``("entry", "weight")``, mapping to the attribute's outermost node id
    (the list-offset node when the attribute repeats).
    """

    root: RecordNode
    attr_map: Mapping[tuple[str, ...], int]
    form: dict
    naming: str

    @property
    def node_count(self) -> int:
        return sum(1 for _ in walk_nodes(self.root))


class _Compiler:
    def __init__(self, validated: ValidatedSchema, naming: str):
        self.validated = validated
        self.naming = naming
        self.next_id = 0
        self.attr_map: dict[tuple[str, ...], int] = {}

    def _take_id(self) -> int:
        node_id = self.next_id
        self.next_id += 1
        return node_id

    def compile(self) -> LayoutPlan:
        root = self._record(self.validated.meta.id, self.validated.seq, ())
        return LayoutPlan(root, self.attr_map, to_form(root), self.naming)

    def _record(self, owner: str, seq: tuple[Attr, ...], path: tuple[str, ...]) -> RecordNode:
        node_id = self._take_id()
        fields = []
        for attr in seq:
            name = mangle_name(owner, attr.id) if self.naming == "mangled" else attr.id
            fields.append((name, self._attr_node(attr, path + (attr.id,))))
        return RecordNode(node_id, tuple(fields))

    def _attr_node(self, attr: Attr, path: tuple[str, ...]) -> LayoutNode:
        if isinstance(attr.repeat, NoRepeat):
            node = self._content_node(attr, path)
            self.attr_map[path] = node.node_id
            return node
        list_id = self._take_id()
        self.attr_map[path] = list_id
        return ListOffsetNode(list_id, self._content_node(attr, path))

    def _content_node(self, attr: Attr, path: tuple[str, ...]) -> LayoutNode:
        ref = attr.type_ref
        if isinstance(ref, Primitive):
            return NumericNode(self._take_id(), ref.kind)
        if isinstance(ref, StringType):
            return StringNode(self._take_id())
        return self._record(ref.name, self.validated.types[ref.name].seq, path)


def compile_layout(validated: ValidatedSchema, naming: str = "mangled") -> LayoutPlan:
    """Deterministically lower a validated schema to a layout plan."""
    if naming not in NAMING_MODES:
        raise ValueError(f"naming must be one of {NAMING_MODES}, got {naming!r}")
    return _Compiler(validated, naming).compile()


class _Interp:
    def __init__(self, plan: LayoutPlan, validated: ValidatedSchema, raw: bytes):
        self.plan = plan
        self.validated = validated
        self.fl = FilledLayout(plan.root)
        self.cursor = Cursor(raw, 0, validated.meta.endian)

    def run(self) -> FilledLayout:
        self._parse_record(self.validated.seq, self.plan.root, "")
        if self.cursor.remaining:
            raise TrailingBytesError(
                f"{self.cursor.remaining} trailing bytes after the top-level seq",
                offset=self.cursor.pos,
            )
        return self.fl

    # ---- structure ------------------------------------------------------

    def _parse_record(self, seq: tuple[Attr, ...], record: RecordNode, prefix: str) -> dict:
        scope: dict[str, Value] = {}
        for attr, (field_name, node) in zip(seq, record.fields, strict=True):
            path = f"{prefix}.{field_name}" if prefix else field_name
            scope[attr.id] = self._parse_attr(attr, node, scope, path)
        return scope

    def _parse_attr(self, attr: Attr, node: LayoutNode, scope: dict, path: str) -> Value:
        if isinstance(attr.repeat, NoRepeat):
            return self._parse_element(attr, node, scope, path)
        assert isinstance(node, ListOffsetNode)
        if isinstance(attr.repeat, RepeatCount):
            return self._parse_count(attr, node, scope, path)
        if isinstance(attr.repeat, RepeatUntil):
            return self._parse_until(attr, node, scope, path)
        return self._parse_eos(attr, node, scope, path)

    def _parse_count(self, attr: Attr, node: ListOffsetNode, scope: dict, path: str) -> list:
        count = self._eval(attr.repeat.count, scope, None, path)
        if isinstance(count, bool) or not isinstance(count, int):
            raise DataError(
                f"repeat-expr must be an integer, got {type(count).__name__}",
                path=path, offset=self.cursor.pos,
            )
        if count < 0:
            raise DataError(f"negative repeat count {count}", path=path, offset=self.cursor.pos)
        self.fl.begin_list(node.node_id)
        values = [
            self._parse_element(attr, node.content, scope, f"{path}[{i}]")
            for i in range(count)
        ]
        self.fl.end_list(node.node_id)
        return values

    def _parse_until(self, attr: Attr, node: ListOffsetNode, scope: dict, path: str) -> list:
        condition = attr.repeat.condition
        self.fl.begin_list(node.node_id)
        values: list[Value] = []
        while True:
            start = self.cursor.pos
            element_path = f"{path}[{len(values)}]"
            element = self._parse_element(attr, node.content, scope, element_path)
            values.append(element)
            done = self._eval(condition, scope, element, element_path)
            if isinstance(done, bool):
                if done:
                    break
            else:
                raise DataError(
                    f"repeat-until must evaluate to a boolean, got {type(done).__name__}",
                    path=element_path, offset=self.cursor.pos,
                )
            if self.cursor.pos == start:
                raise DataError(
                    "repeat-until consumed no bytes and did not terminate",
                    path=element_path, offset=self.cursor.pos,
                )
        self.fl.end_list(node.node_id)
        return values

    def _parse_eos(self, attr: Attr, node: ListOffsetNode, scope: dict, path: str) -> list:
        self.fl.begin_list(node.node_id)
        values: list[Value] = []
        while self.cursor.remaining:
            start = self.cursor.pos
            values.append(self._parse_element(attr, node.content, scope, f"{path}[{len(values)}]"))
            if self.cursor.pos == start:
                raise DataError(
                    "repeat: eos consumed no bytes",
                    path=f"{path}[{len(values) - 1}]", offset=self.cursor.pos,
                )
        self.fl.end_list(node.node_id)
        return values

    # ---- elements -------------------------------------------------------

    def _parse_element(self, attr: Attr, node: LayoutNode, scope: dict, path: str) -> Value:
        ref = attr.type_ref
        if isinstance(ref, Primitive):
            endian = ref.endian_override or self.cursor.default_endian
            value = read_primitive(self.cursor, ref.kind, endian, path)
            self.fl.append_numeric(node.node_id, value)
            return value
        if isinstance(ref, StringType):
            return self._parse_string(attr, node, scope, path)
        assert isinstance(node, RecordNode)
        return self._parse_record(self.validated.types[ref.name].seq, node, path)

    def _parse_string(self, attr: Attr, node: LayoutNode, scope: dict, path: str) -> str:
        size = self._eval(attr.size, scope, None, path)
        if isinstance(size, bool) or not isinstance(size, int):
            raise DataError(
                f"size must be an integer, got {type(size).__name__}",
                path=path, offset=self.cursor.pos,
            )
        if size < 0:
            raise DataError(f"negative string size {size}", path=path, offset=self.cursor.pos)
        if self.cursor.remaining < size:
            raise TruncatedStreamError(
                f"need {size} bytes for str, only {self.cursor.remaining} remain",
                path=path, offset=self.cursor.pos,
            )
        start = self.cursor.pos
        raw = self.cursor.data[start:start + size]
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StringDecodeError(
                f"invalid UTF-8 in string field: {exc.reason}",
                path=path, offset=start + exc.start,
            ) from None
        self.cursor.pos += size
        self.fl.append_string(node.node_id, text)
        return text

    def _eval(self, expr, scope: dict, last_item: Value | None, path: str) -> Value:
        try:
            return eval_expr(expr, Scope(scope, last_item))
        except ExprEvalError as exc:
            raise DataError(
                f"expression error: {exc}", path=path, offset=self.cursor.pos
            ) from None


def parse_data(plan: LayoutPlan, validated: ValidatedSchema, raw: bytes) -> FilledLayout:
    """Interpret ``raw`` against the plan; one root-record row per call.

    The whole input must be consumed: leftover bytes raise
    :class:`TrailingBytesError` rather than being ignored.
    """
    return _Interp(plan, validated, raw).run()


def parse_file(plan: LayoutPlan, validated: ValidatedSchema, path: str | Path) -> FilledLayout:
    """Read a file and delegate to :func:`parse_data`."""
    return parse_data(plan, validated, Path(path).read_bytes())

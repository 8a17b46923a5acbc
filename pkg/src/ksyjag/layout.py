"""Columnar layout builders: numeric, string, list-offset, and record nodes.

A layout tree describes the columnar shape of parsed data. Filling one
appends values into flat buffers: numeric nodes hold packed little-endian
data, string and list-offset nodes hold signed 64-bit offset runs over
their content. Exported bundles are ``form.json`` plus raw buffer files
named ``node{N}-data`` / ``node{N}-offsets`` and are fully self-describing:
:func:`reconstruct` rebuilds the nested values from them alone.

Field names are opaque here; the interpreter decides mangled vs plain.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Union

from .errors import FormError, LayoutError
from .ksy import PRIMITIVE_WIDTHS

_PACK_FORMATS = {
    "u1": "B", "u2": "H", "u4": "I", "u8": "Q",
    "s1": "b", "s2": "h", "s4": "i", "s8": "q",
    "f4": "f", "f8": "d",
}

_INT_RANGES = {
    "u1": (0, 2**8 - 1), "u2": (0, 2**16 - 1), "u4": (0, 2**32 - 1), "u8": (0, 2**64 - 1),
    "s1": (-(2**7), 2**7 - 1), "s2": (-(2**15), 2**15 - 1),
    "s4": (-(2**31), 2**31 - 1), "s8": (-(2**63), 2**63 - 1),
}


@dataclass(frozen=True)
class NumericNode:
    node_id: int
    kind: str


@dataclass(frozen=True)
class StringNode:
    node_id: int


@dataclass(frozen=True)
class ListOffsetNode:
    node_id: int
    content: "LayoutNode"


@dataclass(frozen=True)
class RecordNode:
    node_id: int
    fields: tuple[tuple[str, "LayoutNode"], ...]


LayoutNode = Union[NumericNode, StringNode, ListOffsetNode, RecordNode]


def walk_nodes(node: LayoutNode) -> Iterator[LayoutNode]:
    """Yield the tree depth-first, pre-order."""
    yield node
    if isinstance(node, ListOffsetNode):
        yield from walk_nodes(node.content)
    elif isinstance(node, RecordNode):
        for _, child in node.fields:
            yield from walk_nodes(child)


def _check_node_ids(root: LayoutNode) -> None:
    for expected, node in enumerate(walk_nodes(root)):
        if node.node_id != expected:
            raise LayoutError(
                f"node ids must be depth-first pre-order from 0; "
                f"expected {expected}, found {node.node_id}"
            )


def data_buffer_name(node_id: int) -> str:
    return f"node{node_id}-data"


def offsets_buffer_name(node_id: int) -> str:
    return f"node{node_id}-offsets"


def to_form(node: LayoutNode) -> dict:
    """Convert a layout tree to its JSON-ready form description."""
    if isinstance(node, NumericNode):
        return {"class": "numeric", "node_id": node.node_id, "primitive": node.kind}
    if isinstance(node, StringNode):
        return {"class": "string", "node_id": node.node_id}
    if isinstance(node, ListOffsetNode):
        return {"class": "listoffset", "node_id": node.node_id, "content": to_form(node.content)}
    return {
        "class": "record",
        "node_id": node.node_id,
        "fields": {name: to_form(child) for name, child in node.fields},
    }


def from_form(obj: object) -> LayoutNode:
    """Parse a form description back into a layout tree (strict)."""
    node = _node_from_form(obj, "form")
    _check_node_ids(node)
    return node


def _node_from_form(obj: object, path: str) -> LayoutNode:
    if not isinstance(obj, dict):
        raise FormError(f"{path}: expected an object, got {type(obj).__name__}")
    cls = obj.get("class")
    node_id = obj.get("node_id")
    if not isinstance(node_id, int) or isinstance(node_id, bool) or node_id < 0:
        raise FormError(f"{path}: node_id must be a non-negative integer")
    expected_keys = {
        "numeric": {"class", "node_id", "primitive"},
        "string": {"class", "node_id"},
        "listoffset": {"class", "node_id", "content"},
        "record": {"class", "node_id", "fields"},
    }.get(cls)
    if expected_keys is None:
        raise FormError(f"{path}: unknown class {cls!r}")
    extra = set(obj) - expected_keys
    missing = expected_keys - set(obj)
    if extra or missing:
        raise FormError(f"{path}: bad keys for class '{cls}' (extra {sorted(extra)}, missing {sorted(missing)})")
    if cls == "numeric":
        if obj["primitive"] not in PRIMITIVE_WIDTHS:
            raise FormError(f"{path}: unknown primitive {obj['primitive']!r}")
        return NumericNode(node_id, obj["primitive"])
    if cls == "string":
        return StringNode(node_id)
    if cls == "listoffset":
        return ListOffsetNode(node_id, _node_from_form(obj["content"], f"{path}.content"))
    fields = obj["fields"]
    if not isinstance(fields, dict) or not fields:
        raise FormError(f"{path}: record fields must be a non-empty object")
    children = []
    for name, child in fields.items():
        if not isinstance(name, str):
            raise FormError(f"{path}: field names must be strings")
        children.append((name, _node_from_form(child, f"{path}.fields[{name!r}]")))
    return RecordNode(node_id, tuple(children))


def form_to_json(form: dict) -> str:
    """Serialize a form with stable key order; deterministic bytes."""
    return json.dumps(form, indent=2, ensure_ascii=False) + "\n"


class FilledLayout:
    """Mutable builder state produced by interpreting one raw file.

    Single-writer: not safe for concurrent mutation. The plan tree itself
    is immutable and may back any number of concurrent fills.
    """

    def __init__(self, root: LayoutNode):
        _check_node_ids(root)
        self.root = root
        self._nodes: dict[int, LayoutNode] = {n.node_id: n for n in walk_nodes(root)}
        self._data: dict[int, bytearray] = {}
        self._offsets: dict[int, list[int]] = {}
        self._counts: dict[int, int] = {}
        self._open: dict[int, bool] = {}
        for node in self._nodes.values():
            if isinstance(node, NumericNode):
                self._data[node.node_id] = bytearray()
                self._counts[node.node_id] = 0
            elif isinstance(node, StringNode):
                self._data[node.node_id] = bytearray()
                self._offsets[node.node_id] = [0]
                self._counts[node.node_id] = 0
            elif isinstance(node, ListOffsetNode):
                self._offsets[node.node_id] = [0]
                self._counts[node.node_id] = 0
                self._open[node.node_id] = False

    def _node(self, node_id: int, expected: type) -> LayoutNode:
        node = self._nodes.get(node_id)
        if node is None:
            raise LayoutError(f"no node with id {node_id}")
        if not isinstance(node, expected):
            raise LayoutError(
                f"node {node_id} is a {type(node).__name__}, not a {expected.__name__}"
            )
        return node

    def append_numeric(self, node_id: int, value: int | float) -> None:
        """Append one value to a numeric node, stored little-endian."""
        node = self._node(node_id, NumericNode)
        kind = node.kind
        if kind.startswith("f"):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise LayoutError(f"node {node_id} ({kind}) expects a number, got {value!r}")
            try:
                packed = struct.pack("<" + _PACK_FORMATS[kind], value)
            except OverflowError:
                raise LayoutError(f"value {value!r} out of range for {kind}") from None
        else:
            if isinstance(value, bool) or not isinstance(value, int):
                raise LayoutError(f"node {node_id} ({kind}) expects an integer, got {value!r}")
            lo, hi = _INT_RANGES[kind]
            if value < lo or value > hi:
                raise LayoutError(f"value {value} out of range for {kind}")
            packed = struct.pack("<" + _PACK_FORMATS[kind], value)
        self._data[node_id] += packed
        self._counts[node_id] += 1

    def begin_list(self, node_id: int) -> None:
        self._node(node_id, ListOffsetNode)
        if self._open[node_id]:
            raise LayoutError(f"begin_list on node {node_id} before matching end_list")
        self._open[node_id] = True

    def end_list(self, node_id: int) -> None:
        node = self._node(node_id, ListOffsetNode)
        if not self._open[node_id]:
            raise LayoutError(f"end_list on node {node_id} without begin_list")
        self._offsets[node_id].append(self.length(node.content.node_id))
        self._counts[node_id] += 1
        self._open[node_id] = False

    def append_string(self, node_id: int, text: str) -> None:
        """Append one UTF-8 string to a string node."""
        self._node(node_id, StringNode)
        self._data[node_id] += text.encode("utf-8")
        self._offsets[node_id].append(len(self._data[node_id]))
        self._counts[node_id] += 1

    def length(self, node_id: int) -> int:
        """Element count of a node; records report their first field."""
        node = self._nodes.get(node_id)
        if node is None:
            raise LayoutError(f"no node with id {node_id}")
        if isinstance(node, RecordNode):
            return self.length(node.fields[0][1].node_id)
        return self._counts[node_id]

    @property
    def lengths(self) -> dict[int, int]:
        return {node_id: self.length(node_id) for node_id in self._nodes}

    def check_consistency(self) -> None:
        """Verify every builder invariant; raises :class:`LayoutError`."""
        for node in self._nodes.values():
            node_id = node.node_id
            if isinstance(node, NumericNode):
                want = self._counts[node_id] * PRIMITIVE_WIDTHS[node.kind]
                if len(self._data[node_id]) != want:
                    raise LayoutError(f"node {node_id}: data length {len(self._data[node_id])} != {want}")
            elif isinstance(node, (StringNode, ListOffsetNode)):
                offsets = self._offsets[node_id]
                if isinstance(node, ListOffsetNode):
                    if self._open[node_id]:
                        raise LayoutError(f"node {node_id}: unbalanced begin_list")
                    content_length = self.length(node.content.node_id)
                else:
                    content_length = len(self._data[node_id])
                _check_offsets(offsets, self._counts[node_id], content_length, node_id)
            else:
                lengths = {self.length(child.node_id) for _, child in node.fields}
                if len(lengths) > 1:
                    raise LayoutError(f"node {node_id}: record fields have unequal lengths {sorted(lengths)}")

    def form(self) -> dict:
        return to_form(self.root)

    @property
    def buffers(self) -> dict[str, bytes]:
        """Current buffer contents under their canonical names."""
        out: dict[str, bytes] = {}
        for node in walk_nodes(self.root):
            node_id = node.node_id
            if isinstance(node, NumericNode):
                out[data_buffer_name(node_id)] = bytes(self._data[node_id])
            elif isinstance(node, StringNode):
                out[offsets_buffer_name(node_id)] = _pack_offsets(self._offsets[node_id])
                out[data_buffer_name(node_id)] = bytes(self._data[node_id])
            elif isinstance(node, ListOffsetNode):
                out[offsets_buffer_name(node_id)] = _pack_offsets(self._offsets[node_id])
        return out

    def export_buffers(self) -> tuple[str, dict[str, bytes]]:
        """Return ``(form_json, buffers)`` after a full consistency check."""
        self.check_consistency()
        return form_to_json(self.form()), self.buffers

    def to_nested(self) -> list:
        """Materialize the logical nested content (records as dicts)."""
        self.check_consistency()
        view = _View(
            {node_id: bytes(data) for node_id, data in self._data.items()},
            {node_id: list(offs) for node_id, offs in self._offsets.items()},
        )
        root_length = self.length(self.root.node_id)
        return [_materialize(self.root, view, i) for i in range(root_length)]


def _check_offsets(offsets: list[int], count: int, content_length: int, node_id: int) -> None:
    if not offsets or offsets[0] != 0:
        raise LayoutError(f"node {node_id}: offsets must start at 0")
    if len(offsets) != count + 1:
        raise LayoutError(f"node {node_id}: expected {count + 1} offsets, found {len(offsets)}")
    if any(b < a for a, b in zip(offsets, offsets[1:])):
        raise LayoutError(f"node {node_id}: offsets are not nondecreasing")
    if offsets[-1] != content_length:
        raise LayoutError(
            f"node {node_id}: final offset {offsets[-1]} != content length {content_length}"
        )


def _pack_offsets(offsets: list[int]) -> bytes:
    return struct.pack(f"<{len(offsets)}q", *offsets)


def _unpack_offsets(raw: bytes, node_id: int) -> list[int]:
    if len(raw) % 8 != 0 or len(raw) == 0:
        raise LayoutError(f"node {node_id}: offsets buffer length {len(raw)} is not a positive multiple of 8")
    return list(struct.unpack(f"<{len(raw) // 8}q", raw))


@dataclass
class _View:
    """Decoded buffers keyed by node id, shared by both materializers."""

    data: Mapping[int, bytes]
    offsets: Mapping[int, list[int]]


def _materialize(node: LayoutNode, view: _View, index: int):
    if isinstance(node, NumericNode):
        width = PRIMITIVE_WIDTHS[node.kind]
        raw = view.data[node.node_id][index * width:(index + 1) * width]
        return struct.unpack("<" + _PACK_FORMATS[node.kind], raw)[0]
    if isinstance(node, StringNode):
        offsets = view.offsets[node.node_id]
        return view.data[node.node_id][offsets[index]:offsets[index + 1]].decode("utf-8")
    if isinstance(node, ListOffsetNode):
        offsets = view.offsets[node.node_id]
        return [
            _materialize(node.content, view, j)
            for j in range(offsets[index], offsets[index + 1])
        ]
    return {name: _materialize(child, view, index) for name, child in node.fields}


def reconstruct(form_json: str, buffers: Mapping[str, bytes]) -> list:
    """Rebuild the nested value tree from an exported bundle.

    Validates buffer presence and every offsets/length invariant before
    materializing, so a tampered bundle fails instead of misreading.
    """
    try:
        form_obj = json.loads(form_json)
    except json.JSONDecodeError as exc:
        raise FormError(f"malformed form JSON: {exc}") from None
    root = from_form(form_obj)

    view = _View({}, {})
    lengths: dict[int, int] = {}

    def require(name: str) -> bytes:
        if name not in buffers:
            raise LayoutError(f"missing buffer '{name}'")
        return buffers[name]

    def derive(node: LayoutNode) -> int:
        node_id = node.node_id
        if isinstance(node, NumericNode):
            raw = require(data_buffer_name(node_id))
            width = PRIMITIVE_WIDTHS[node.kind]
            if len(raw) % width != 0:
                raise LayoutError(
                    f"node {node_id}: data length {len(raw)} is not a multiple of {width}"
                )
            view.data[node_id] = raw
            length = len(raw) // width
        elif isinstance(node, StringNode):
            offsets = _unpack_offsets(require(offsets_buffer_name(node_id)), node_id)
            raw = require(data_buffer_name(node_id))
            _check_offsets(offsets, len(offsets) - 1, len(raw), node_id)
            view.data[node_id] = raw
            view.offsets[node_id] = offsets
            length = len(offsets) - 1
        elif isinstance(node, ListOffsetNode):
            offsets = _unpack_offsets(require(offsets_buffer_name(node_id)), node_id)
            content_length = derive(node.content)
            _check_offsets(offsets, len(offsets) - 1, content_length, node_id)
            view.offsets[node_id] = offsets
            length = len(offsets) - 1
        else:
            child_lengths = {derive(child) for _, child in node.fields}
            if len(child_lengths) != 1:
                raise LayoutError(
                    f"node {node_id}: record fields have unequal lengths {sorted(child_lengths)}"
                )
            length = child_lengths.pop()
        lengths[node_id] = length
        return length

    root_length = derive(root)
    return [_materialize(root, view, i) for i in range(root_length)]


def write_bundle(fl: FilledLayout, out_dir: str | Path) -> None:
    """Write ``form.json`` and raw buffer files into a directory."""
    form_json, buffers = fl.export_buffers()
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / "form.json").write_text(form_json, encoding="utf-8")
    for name, raw in buffers.items():
        (path / name).write_bytes(raw)


def read_bundle(bundle_dir: str | Path) -> tuple[str, dict[str, bytes]]:
    """Read a bundle directory back into ``(form_json, buffers)``."""
    path = Path(bundle_dir)
    form_json = (path / "form.json").read_text(encoding="utf-8")
    buffers = {
        entry.name: entry.read_bytes()
        for entry in sorted(path.iterdir())
        if entry.name != "form.json" and entry.is_file()
    }
    return form_json, buffers

/**
 * Rebuild nested values from a form+buffers bundle.
 *
 * The bundle is the contract shared with the ksyjag CLI: `form.json`
 * describes a tree of numeric / string / listoffset / record nodes, and
 * each node's flat data lives in `node{N}-data` / `node{N}-offsets`
 * files. Numeric data and offsets are little-endian; offsets are signed
 * 64-bit, start at 0, never decrease, and end at the content length.
 *
 * Every invariant is checked before materializing, so a damaged bundle
 * throws instead of producing wrong values.
 */

export type Primitive =
  | "u1" | "u2" | "u4" | "u8"
  | "s1" | "s2" | "s4" | "s8"
  | "f4" | "f8";

export type FormNode =
  | { class: "numeric"; node_id: number; primitive: Primitive }
  | { class: "string"; node_id: number }
  | { class: "listoffset"; node_id: number; content: FormNode }
  | { class: "record"; node_id: number; fields: Record<string, FormNode> };

export type NestedValue =
  | number
  | string
  | NestedValue[]
  | { [field: string]: NestedValue };

export class ReconstructError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ReconstructError";
  }
}

const WIDTHS: Record<Primitive, number> = {
  u1: 1, u2: 2, u4: 4, u8: 8,
  s1: 1, s2: 2, s4: 4, s8: 8,
  f4: 4, f8: 8,
};

function view(bytes: Uint8Array): DataView {
  return new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
}

function readNumeric(v: DataView, primitive: Primitive, index: number): number {
  const at = index * WIDTHS[primitive];
  switch (primitive) {
    case "u1": return v.getUint8(at);
    case "u2": return v.getUint16(at, true);
    case "u4": return v.getUint32(at, true);
    case "u8": return Number(v.getBigUint64(at, true));
    case "s1": return v.getInt8(at);
    case "s2": return v.getInt16(at, true);
    case "s4": return v.getInt32(at, true);
    case "s8": return Number(v.getBigInt64(at, true));
    case "f4": return v.getFloat32(at, true);
    case "f8": return v.getFloat64(at, true);
  }
}

function decodeOffsets(raw: Uint8Array, nodeId: number): number[] {
  if (raw.byteLength === 0 || raw.byteLength % 8 !== 0) {
    throw new ReconstructError(
      `node ${nodeId}: offsets buffer length ${raw.byteLength} is not a positive multiple of 8`,
    );
  }
  const v = view(raw);
  const offsets: number[] = [];
  for (let i = 0; i < raw.byteLength / 8; i++) {
    const wide = v.getBigInt64(i * 8, true);
    const narrow = Number(wide);
    if (!Number.isSafeInteger(narrow)) {
      throw new ReconstructError(`node ${nodeId}: offset ${wide} out of safe range`);
    }
    offsets.push(narrow);
  }
  return offsets;
}

function checkOffsets(offsets: number[], contentLength: number, nodeId: number): void {
  if (offsets[0] !== 0) {
    throw new ReconstructError(`node ${nodeId}: offsets must start at 0`);
  }
  for (let i = 1; i < offsets.length; i++) {
    if (offsets[i] < offsets[i - 1]) {
      throw new ReconstructError(`node ${nodeId}: offsets are not nondecreasing`);
    }
  }
  if (offsets[offsets.length - 1] !== contentLength) {
    throw new ReconstructError(
      `node ${nodeId}: final offset ${offsets[offsets.length - 1]} != content length ${contentLength}`,
    );
  }
}

interface Decoded {
  data: Map<number, Uint8Array>;
  offsets: Map<number, number[]>;
}

function requireBuffer(buffers: Map<string, Uint8Array>, name: string): Uint8Array {
  const raw = buffers.get(name);
  if (raw === undefined) {
    throw new ReconstructError(`missing buffer '${name}'`);
  }
  return raw;
}

/** Validate one node's buffers and return its element count. */
function derive(node: FormNode, buffers: Map<string, Uint8Array>, decoded: Decoded): number {
  const nodeId = node.node_id;
  if (node.class === "numeric") {
    const raw = requireBuffer(buffers, `node${nodeId}-data`);
    const width = WIDTHS[node.primitive];
    if (width === undefined) {
      throw new ReconstructError(`node ${nodeId}: unknown primitive '${node.primitive}'`);
    }
    if (raw.byteLength % width !== 0) {
      throw new ReconstructError(
        `node ${nodeId}: data length ${raw.byteLength} is not a multiple of ${width}`,
      );
    }
    decoded.data.set(nodeId, raw);
    return raw.byteLength / width;
  }
  if (node.class === "string") {
    const offsets = decodeOffsets(requireBuffer(buffers, `node${nodeId}-offsets`), nodeId);
    const raw = requireBuffer(buffers, `node${nodeId}-data`);
    checkOffsets(offsets, raw.byteLength, nodeId);
    decoded.data.set(nodeId, raw);
    decoded.offsets.set(nodeId, offsets);
    return offsets.length - 1;
  }
  if (node.class === "listoffset") {
    const offsets = decodeOffsets(requireBuffer(buffers, `node${nodeId}-offsets`), nodeId);
    const contentLength = derive(node.content, buffers, decoded);
    checkOffsets(offsets, contentLength, nodeId);
    decoded.offsets.set(nodeId, offsets);
    return offsets.length - 1;
  }
  if (node.class === "record") {
    const names = Object.keys(node.fields);
    if (names.length === 0) {
      throw new ReconstructError(`node ${nodeId}: record has no fields`);
    }
    const lengths = new Set(names.map((name) => derive(node.fields[name], buffers, decoded)));
    if (lengths.size !== 1) {
      throw new ReconstructError(
        `node ${nodeId}: record fields have unequal lengths ${[...lengths].sort().join(", ")}`,
      );
    }
    return lengths.values().next().value as number;
  }
  throw new ReconstructError(`unknown node class ${JSON.stringify((node as FormNode).class)}`);
}

const utf8 = new TextDecoder("utf-8", { fatal: true });

function materialize(node: FormNode, decoded: Decoded, index: number): NestedValue {
  if (node.class === "numeric") {
    return readNumeric(view(decoded.data.get(node.node_id)!), node.primitive, index);
  }
  if (node.class === "string") {
    const offsets = decoded.offsets.get(node.node_id)!;
    const raw = decoded.data.get(node.node_id)!;
    return utf8.decode(raw.subarray(offsets[index], offsets[index + 1]));
  }
  if (node.class === "listoffset") {
    const offsets = decoded.offsets.get(node.node_id)!;
    const items: NestedValue[] = [];
    for (let j = offsets[index]; j < offsets[index + 1]; j++) {
      items.push(materialize(node.content, decoded, j));
    }
    return items;
  }
  const row: { [field: string]: NestedValue } = {};
  for (const [name, child] of Object.entries(node.fields)) {
    row[name] = materialize(child, decoded, index);
  }
  return row;
}

/** Rebuild the nested value list from a parsed form and its buffers. */
export function reconstruct(form: FormNode, buffers: Map<string, Uint8Array>): NestedValue[] {
  const decoded: Decoded = { data: new Map(), offsets: new Map() };
  const rootLength = derive(form, buffers, decoded);
  const rows: NestedValue[] = [];
  for (let i = 0; i < rootLength; i++) {
    rows.push(materialize(form, decoded, i));
  }
  return rows;
}

"""End-to-end acceptance criteria for the primary component.

Each criterion is one test that prints a `[ACCEPTANCE] <name>: PASS|FAIL`
line directly to the terminal (bypassing capture), so results are visible
in any run log. Assertions carry the details.
"""

import hashlib
import json
import struct
import time

import pytest

from conftest import ANIMAL_NESTED, ANIMAL_RAW
from oracle_gen import generate_case
from ksyjag import compile_layout, parse_data, parse_schema, validate_schema
from ksyjag.cli import main
from ksyjag.layout import reconstruct

ORACLE_SEEDS = range(500)


def _report(capsys, name, ok):
    with capsys.disabled():
        print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}")


def _cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_golden_animal(capsys, animal_ksy_path, tmp_path):
    """CLI JSON for the 24-byte fixture equals the reference nested value."""
    ok = False
    try:
        entries = [(3, b"cat", 5, 12), (3, b"dog", 3, 43), (6, b"turtle", 10, 5)]
        raw = b"".join(
            bytes([str_len]) + species + bytes([age]) + struct.pack("<H", weight)
            for str_len, species, age, weight in entries
        )
        assert raw == ANIMAL_RAW
        data = tmp_path / "animal.raw"
        data.write_bytes(raw)

        started = time.monotonic()
        code, out, _ = _cli(
            capsys, "parse", "--ksy", str(animal_ksy_path),
            "--data", str(data), "--format", "json",
        )
        elapsed = time.monotonic() - started
        assert code == 0
        assert json.loads(out) == ANIMAL_NESTED
        assert elapsed < 1.0, f"took {elapsed:.3f}s"
        ok = True
    finally:
        _report(capsys, "golden-animal", ok)


def test_cow_entry(capsys, animal_ksy_text):
    """One 7-byte entry: 3, 'cow', age 6, weight 1500 (little-endian u2)."""
    ok = False
    try:
        raw = bytes.fromhex("03636F7706DC05")
        validated = validate_schema(parse_schema(animal_ksy_text))
        plan = compile_layout(validated)
        nested = parse_data(plan, validated, raw).to_nested()
        assert nested == [{"animalA__Zentry": [{
            "animal_entryA__Zstr_len": 3,
            "animal_entryA__Zspecies": "cow",
            "animal_entryA__Zage": 6,
            "animal_entryA__Zweight": 1500,
        }]}]
        ok = True
    finally:
        _report(capsys, "cow-entry", ok)


def test_oracle_equivalence(capsys):
    """>= 500 generated schema/data pairs parse to the generator's value."""
    ok = False
    try:
        mismatches = []
        for seed in ORACLE_SEEDS:
            case = generate_case(seed)
            validated = validate_schema(parse_schema(case.ksy_text))
            plan = compile_layout(validated)
            nested = parse_data(plan, validated, case.raw).to_nested()
            if nested != case.expected:
                mismatches.append(seed)
        assert len(ORACLE_SEEDS) >= 500
        assert mismatches == [], f"{len(mismatches)} mismatching seeds: {mismatches[:10]}"
        ok = True
    finally:
        _report(capsys, "oracle-equivalence", ok)


def _unpack_offsets(raw):
    assert len(raw) % 8 == 0 and len(raw) > 0
    return list(struct.unpack(f"<{len(raw) // 8}q", raw))


def _node_length(node, buffers):
    node_id = node["node_id"]
    if node["class"] == "numeric":
        widths = {"u1": 1, "s1": 1, "u2": 2, "s2": 2, "u4": 4, "s4": 4, "f4": 4,
                  "u8": 8, "s8": 8, "f8": 8}
        return len(buffers[f"node{node_id}-data"]) // widths[node["primitive"]]
    if node["class"] in ("string", "listoffset"):
        return len(_unpack_offsets(buffers[f"node{node_id}-offsets"])) - 1
    first = next(iter(node["fields"].values()))
    return _node_length(first, buffers)


def _check_node_invariants(node, buffers, violations):
    node_id = node["node_id"]
    if node["class"] == "string":
        offsets = _unpack_offsets(buffers[f"node{node_id}-offsets"])
        content_length = len(buffers[f"node{node_id}-data"])
    elif node["class"] == "listoffset":
        offsets = _unpack_offsets(buffers[f"node{node_id}-offsets"])
        content_length = _node_length(node["content"], buffers)
        _check_node_invariants(node["content"], buffers, violations)
    elif node["class"] == "record":
        lengths = {_node_length(child, buffers) for child in node["fields"].values()}
        if len(lengths) > 1:
            violations.append(f"node {node_id}: ragged record {sorted(lengths)}")
        for child in node["fields"].values():
            _check_node_invariants(child, buffers, violations)
        return
    else:
        return
    if offsets[0] != 0:
        violations.append(f"node {node_id}: offsets start at {offsets[0]}")
    if any(b < a for a, b in zip(offsets, offsets[1:])):
        violations.append(f"node {node_id}: decreasing offsets")
    if offsets[-1] != content_length:
        violations.append(f"node {node_id}: final offset {offsets[-1]} != {content_length}")


def test_layout_invariants(capsys):
    """Offsets/rectangularity invariants + export/reconstruct round-trip
    hold for every parse in the oracle suite. Zero violations allowed."""
    ok = False
    try:
        violations = []
        for seed in ORACLE_SEEDS:
            case = generate_case(seed)
            validated = validate_schema(parse_schema(case.ksy_text))
            plan = compile_layout(validated)
            filled = parse_data(plan, validated, case.raw)
            form_json, buffers = filled.export_buffers()
            _check_node_invariants(json.loads(form_json), buffers, violations)
            if reconstruct(form_json, buffers) != filled.to_nested():
                violations.append(f"seed {seed}: reconstruct != to_nested")
        assert violations == [], violations[:10]
        ok = True
    finally:
        _report(capsys, "layout-invariants", ok)


CYCLIC_KSY = """\
meta:
  id: x
  endian: le
seq:
  - id: a
    type: loop
types:
  loop:
    seq:
      - id: b
        type: loop
"""

UNKNOWN_TYPE_KSY = """\
meta:
  id: x
  endian: le
seq:
  - id: a
    type: ghost
"""

FORWARD_REF_KSY = """\
meta:
  id: x
  endian: le
seq:
  - id: s
    type: str
    size: later
  - id: later
    type: u1
"""


def test_error_paths(capsys, animal_ksy_path, tmp_path):
    """Invalid truncations exit 3 with an attr path; bad schemas exit 2."""
    ok = False
    try:
        # entry boundaries: prefixes of length 0, 7, 14 are complete files
        valid_lengths = {0, 7, 14}
        for length in range(len(ANIMAL_RAW)):
            data = tmp_path / f"prefix{length}.raw"
            data.write_bytes(ANIMAL_RAW[:length])
            code, out, err = _cli(
                capsys, "parse", "--ksy", str(animal_ksy_path), "--data", str(data)
            )
            if length in valid_lengths:
                assert code == 0, f"prefix {length}: expected exit 0, got {code}"
            else:
                assert code == 3, f"prefix {length}: expected exit 3, got {code}"
                assert "animal_entryA__Z" in err, f"prefix {length}: no attr path in {err!r}"
                assert out == "", f"prefix {length}: stdout not clean"

        for name, text, fragment in [
            ("cyclic", CYCLIC_KSY, "cycle"),
            ("unknown-type", UNKNOWN_TYPE_KSY, "unresolved"),
            ("forward-ref", FORWARD_REF_KSY, "forward"),
        ]:
            ksy = tmp_path / f"{name}.ksy"
            ksy.write_text(text, encoding="utf-8")
            code, out, err = _cli(capsys, "validate", "--ksy", str(ksy))
            assert code == 2, f"{name}: expected exit 2, got {code}"
            assert fragment in err, f"{name}: {fragment!r} not in {err!r}"
        ok = True
    finally:
        _report(capsys, "error-paths", ok)


def test_determinism(capsys, animal_ksy_path, animal_raw_path, tmp_path):
    """Two buffer-bundle runs on the same input are hash-identical."""
    ok = False
    try:
        digests = []
        for run in ("one", "two"):
            out_dir = tmp_path / run
            code, _, _ = _cli(
                capsys, "parse", "--ksy", str(animal_ksy_path),
                "--data", str(animal_raw_path), "--format", "buffers", "--out", str(out_dir),
            )
            assert code == 0
            digests.append({
                p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                for p in sorted(out_dir.iterdir())
            })
        assert digests[0] == digests[1]
        assert set(digests[0]) == {
            "form.json", "node1-offsets", "node3-data",
            "node4-data", "node4-offsets", "node5-data", "node6-data",
        }
        ok = True
    finally:
        _report(capsys, "determinism", ok)

import { beforeAll, describe, expect, it } from "vitest";
import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { CliError, DataError, Reader, SchemaError } from "../src/index.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const fixtures = path.join(here, "fixtures");
const animalKsy = path.join(fixtures, "animal.ksy");
const animalRaw = path.join(fixtures, "animal.raw");
const repoRoot = path.resolve(here, "..", "..");
const bin = process.env.KSYJAG_BIN ?? "ksyjag";

const ANIMAL_NESTED = [
  {
    animalA__Zentry: [
      {
        animal_entryA__Zstr_len: 3,
        animal_entryA__Zspecies: "cat",
        animal_entryA__Zage: 5,
        animal_entryA__Zweight: 12,
      },
      {
        animal_entryA__Zstr_len: 3,
        animal_entryA__Zspecies: "dog",
        animal_entryA__Zage: 3,
        animal_entryA__Zweight: 43,
      },
      {
        animal_entryA__Zstr_len: 6,
        animal_entryA__Zspecies: "turtle",
        animal_entryA__Zage: 10,
        animal_entryA__Zweight: 5,
      },
    ],
  },
];

let scratch: string;

beforeAll(() => {
  scratch = fs.mkdtempSync(path.join(os.tmpdir(), "ksyjag-bindings-test-"));
  return () => fs.rmSync(scratch, { recursive: true, force: true });
});

function cliJson(ksyPath: string, dataPath: string): unknown {
  const proc = spawnSync(
    bin,
    ["parse", "--ksy", ksyPath, "--data", dataPath, "--format", "json"],
    { encoding: "utf-8" },
  );
  expect(proc.error).toBeUndefined();
  expect(proc.status).toBe(0);
  return JSON.parse(proc.stdout);
}

describe("Reader construction", () => {
  it("validates eagerly and rejects a cyclic schema", () => {
    const cyclic = path.join(scratch, "cyclic.ksy");
    fs.writeFileSync(cyclic, [
      "meta:",
      "  id: x",
      "  endian: le",
      "seq:",
      "  - id: a",
      "    type: loop",
      "types:",
      "  loop:",
      "    seq:",
      "      - id: b",
      "        type: loop",
      "",
    ].join("\n"));
    expect(() => new Reader(cyclic)).toThrowError(SchemaError);
    expect(() => new Reader(cyclic)).toThrowError(/cycle/);
  });

  it("rejects a missing format file", () => {
    expect(() => new Reader(path.join(scratch, "ghost.ksy"))).toThrowError(CliError);
  });

  it("reports a missing executable", () => {
    expect(() => new Reader(animalKsy, { bin: "ksyjag-definitely-not-installed" }))
      .toThrowError(CliError);
  });
});

describe("Reader.load", () => {
  it("matches the golden nested value and the CLI JSON", () => {
    const reader = new Reader(animalKsy);
    const rows = reader.load(animalRaw);
    expect(rows).toEqual(ANIMAL_NESTED);
    expect(rows).toEqual(cliJson(animalKsy, animalRaw));
  });

  it("returns one row with an empty list for an empty file", () => {
    const empty = path.join(scratch, "empty.raw");
    fs.writeFileSync(empty, Buffer.alloc(0));
    expect(new Reader(animalKsy).load(empty)).toEqual([{ animalA__Zentry: [] }]);
  });

  it("relays truncation errors with the failing attr path", () => {
    const truncated = path.join(scratch, "trunc.raw");
    fs.writeFileSync(truncated, fs.readFileSync(animalRaw).subarray(0, 13));
    const reader = new Reader(animalKsy);
    expect(() => reader.load(truncated)).toThrowError(DataError);
    expect(() => reader.load(truncated)).toThrowError(/animal_entryA__Zweight/);
  });

  it("supports plain naming", () => {
    const reader = new Reader(animalKsy, { naming: "plain" });
    const rows = reader.load(animalRaw) as Array<Record<string, unknown>>;
    const entries = rows[0]["entry"] as Array<Record<string, unknown>>;
    expect(Object.keys(entries[0])).toEqual(["str_len", "species", "age", "weight"]);
    expect(entries[2]["species"]).toBe("turtle");
  });
});

describe("oracle fidelity", () => {
  it("equals the CLI JSON on 20 generated cases", { timeout: 120_000 }, () => {
    const caseRoot = path.join(scratch, "oracle");
    const gen = spawnSync(
      "python3",
      [path.join(repoRoot, "tests", "oracle_gen.py"), "--out", caseRoot, "--start", "0", "--count", "20"],
      { encoding: "utf-8" },
    );
    expect(gen.error).toBeUndefined();
    expect(gen.status).toBe(0);

    for (let seed = 0; seed < 20; seed++) {
      const caseDir = path.join(caseRoot, `case_${seed}`);
      const ksyPath = path.join(caseDir, "format.ksy");
      const dataPath = path.join(caseDir, "data.raw");
      const reader = new Reader(ksyPath);
      expect(reader.load(dataPath), `seed ${seed}`).toEqual(cliJson(ksyPath, dataPath));
    }
  });
});

/**
 * Runtime interface over the ksyjag CLI.
 *
 * A Reader validates its format description eagerly at construction, then
 * `load(dataPath)` shells out to `ksyjag parse --format buffers`, reads
 * the bundle back, and reconstructs the nested values from the raw
 * buffers (never from re-parsed JSON). The executable is found via the
 * `KSYJAG_BIN` environment variable, an explicit option, or PATH.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { FormNode, NestedValue, reconstruct } from "./reconstruct.js";

export type NamingMode = "mangled" | "plain";

export interface ReaderOptions {
  /** ksyjag executable; defaults to $KSYJAG_BIN, then "ksyjag" on PATH. */
  bin?: string;
  naming?: NamingMode;
}

/** Format description was rejected by the primary component (exit 2). */
export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

/** Raw input failed to parse (exit 3); carries the CLI diagnostic verbatim. */
export class DataError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "DataError";
  }
}

/** File or process trouble (exit 4, usage errors, spawn failures). */
export class CliError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CliError";
  }
}

function throwForExit(code: number | null, stderr: string, context: string): never {
  const detail = stderr.trim() || context;
  if (code === 2) throw new SchemaError(detail);
  if (code === 3) throw new DataError(detail);
  throw new CliError(detail);
}

export class Reader {
  readonly formatPath: string;
  readonly naming: NamingMode;
  private readonly bin: string;

  constructor(formatPath: string, options: ReaderOptions = {}) {
    this.formatPath = formatPath;
    this.naming = options.naming ?? "mangled";
    this.bin = options.bin ?? process.env.KSYJAG_BIN ?? "ksyjag";
    // fail now, not at load time
    const result = this.run(["validate", "--ksy", formatPath, "--naming", this.naming]);
    if (result.status !== 0) {
      throwForExit(result.status, result.stderr, `validate exited with ${result.status}`);
    }
  }

  /**
   * Parse one raw file and return its nested rows.
   *
   * Stateless per call (each load uses a private temp directory), so
   * concurrent loads through one Reader do not interleave.
   */
  load(dataPath: string): NestedValue[] {
    const workDir = fs.mkdtempSync(path.join(os.tmpdir(), "ksyjag-"));
    try {
      const bundleDir = path.join(workDir, "bundle");
      const result = this.run([
        "parse",
        "--ksy", this.formatPath,
        "--data", dataPath,
        "--format", "buffers",
        "--out", bundleDir,
        "--naming", this.naming,
      ]);
      if (result.status !== 0) {
        throwForExit(result.status, result.stderr, `parse exited with ${result.status}`);
      }
      return reconstruct(...readBundle(bundleDir));
    } finally {
      fs.rmSync(workDir, { recursive: true, force: true });
    }
  }

  private run(args: string[]): { status: number | null; stderr: string } {
    const proc = spawnSync(this.bin, args, { encoding: "utf-8" });
    if (proc.error !== undefined) {
      throw new CliError(`failed to run ${this.bin}: ${proc.error.message}`);
    }
    return { status: proc.status, stderr: proc.stderr ?? "" };
  }
}

/** Read a bundle directory into its parsed form and named buffers. */
export function readBundle(bundleDir: string): [FormNode, Map<string, Uint8Array>] {
  const formJson = fs.readFileSync(path.join(bundleDir, "form.json"), "utf-8");
  const form = JSON.parse(formJson) as FormNode;
  const buffers = new Map<string, Uint8Array>();
  for (const name of fs.readdirSync(bundleDir)) {
    if (name !== "form.json") {
      buffers.set(name, fs.readFileSync(path.join(bundleDir, name)));
    }
  }
  return [form, buffers];
}

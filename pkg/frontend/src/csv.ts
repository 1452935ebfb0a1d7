/**
 * CSV loading with schema validation for the experiment outputs.
 *
 * The plotting layer is strictly read-only over these files; any missing
 * column or empty file is a hard error so a silently wrong figure can
 * never be produced.
 */

import { readFileSync } from "node:fs";

export class SchemaError extends Error {}

export interface ResultRow {
  run_id: string;
  experiment: string;
  method: string;
  d: number;
  r: number;
  p: number;
  n1: number;
  n2: number;
  m1: number;
  m2: number;
  seed: number;
  test_mae: number;
  test_mse: number;
  mae_stderr: number;
  wall_seconds: number;
}

export interface ReconRow {
  feature_idx: number;
  true_value: number;
  recon_value: number;
  n1: number;
  m2: number;
  seed: number;
}

export interface UnivRow {
  d: number;
  r: number;
  n: number;
  L: number;
  seed: number;
  mean_abs_mean: number;
  max_cov_dev: number;
  sliced_w1: number;
  gaussian_floor: number;
}

export const RESULT_COLUMNS: (keyof ResultRow)[] = [
  "run_id", "experiment", "method", "d", "r", "p", "n1", "n2", "m1", "m2",
  "seed", "test_mae", "test_mse", "mae_stderr", "wall_seconds",
];

export const RECON_COLUMNS: (keyof ReconRow)[] = [
  "feature_idx", "true_value", "recon_value", "n1", "m2", "seed",
];

export const UNIV_COLUMNS: (keyof UnivRow)[] = [
  "d", "r", "n", "L", "seed", "mean_abs_mean", "max_cov_dev",
  "sliced_w1", "gaussian_floor",
];

const STRING_COLUMNS = new Set(["run_id", "experiment", "method"]);

/** Parse simple comma-separated text (no quoting is emitted upstream). */
export function parseCsv(text: string): Record<string, string>[] {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV input");
  }
  const header = lines[0].split(",");
  return lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    header.forEach((name, i) => {
      row[name] = cells[i] ?? "";
    });
    return row;
  });
}

function coerce<T>(raw: Record<string, string>[], columns: (keyof T)[],
                   path: string): T[] {
  if (raw.length === 0) {
    throw new SchemaError(`${path} contains a header but no rows`);
  }
  for (const col of columns) {
    if (!(String(col) in raw[0])) {
      throw new SchemaError(`${path} is missing column ${String(col)}`);
    }
  }
  return raw.map((row) => {
    const out: Record<string, string | number> = {};
    for (const col of columns) {
      const cell = row[String(col)];
      if (STRING_COLUMNS.has(String(col))) {
        out[String(col)] = cell;
      } else {
        const value = Number(cell);
        if (!Number.isFinite(value)) {
          throw new SchemaError(
            `${path}: column ${String(col)} holds non-numeric ${cell}`,
          );
        }
        out[String(col)] = value;
      }
    }
    return out as T;
  });
}

export function loadResults(path: string): ResultRow[] {
  return coerce<ResultRow>(parseCsv(readFileSync(path, "utf8")),
                           RESULT_COLUMNS, path);
}

export function loadReconstruction(path: string): ReconRow[] {
  return coerce<ReconRow>(parseCsv(readFileSync(path, "utf8")),
                          RECON_COLUMNS, path);
}

export function loadUniversality(path: string): UnivRow[] {
  return coerce<UnivRow>(parseCsv(readFileSync(path, "utf8")),
                         UNIV_COLUMNS, path);
}

/** The run's config hash, embedded in every figure footer. */
export function loadConfigHash(manifestPath: string): string {
  const manifest = JSON.parse(readFileSync(manifestPath, "utf8"));
  if (typeof manifest.config_hash !== "string") {
    throw new SchemaError(`${manifestPath} has no config_hash`);
  }
  return manifest.config_hash;
}

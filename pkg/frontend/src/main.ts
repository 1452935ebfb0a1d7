#!/usr/bin/env node
/**
 * make-figures --in DIR --out DIR [--kind compare|transfer|collapse|scatter]
 *
 * Reads the CSVs an experiment run produced (results.csv,
 * reconstruction.csv, manifest.json) and writes one SVG per requested
 * figure kind.  With no --kind, every kind whose input file exists is
 * rendered.  Figures are byte-stable for identical inputs.
 */

import { existsSync, mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import {
  SchemaError, loadConfigHash, loadReconstruction, loadResults,
} from "./csv.js";
import {
  plotCollapse, plotCompare, plotScatter, plotTransfer,
} from "./plots.js";

const KINDS = ["compare", "transfer", "collapse", "scatter"] as const;
type Kind = (typeof KINDS)[number];

const SOURCES: Record<Kind, string> = {
  compare: "results.csv",
  transfer: "results.csv",
  collapse: "results.csv",
  scatter: "reconstruction.csv",
};

export function makeFigures(inDir: string, outDir: string,
                            kinds: Kind[]): string[] {
  const configHash = loadConfigHash(join(inDir, "manifest.json"));
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  for (const kind of kinds) {
    const source = join(inDir, SOURCES[kind]);
    if (!existsSync(source)) {
      throw new SchemaError(`${kind} figure needs ${source}, not found`);
    }
    let svg: string;
    if (kind === "scatter") {
      svg = plotScatter(loadReconstruction(source), configHash);
    } else if (kind === "compare") {
      svg = plotCompare(loadResults(source), configHash);
    } else if (kind === "transfer") {
      svg = plotTransfer(loadResults(source), configHash);
    } else {
      svg = plotCollapse(loadResults(source), configHash);
    }
    const outPath = join(outDir, `${kind}.svg`);
    writeFileSync(outPath, svg);
    written.push(outPath);
  }
  return written;
}

export function main(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      in: { type: "string" },
      out: { type: "string" },
      kind: { type: "string", multiple: true },
    },
  });
  if (!values.in || !values.out) {
    console.error("usage: make-figures --in DIR --out DIR [--kind KIND ...]");
    return 2;
  }
  let kinds: Kind[];
  if (values.kind && values.kind.length > 0) {
    for (const kind of values.kind) {
      if (!KINDS.includes(kind as Kind)) {
        console.error(`unknown figure kind ${kind} (choose from ` +
                      `${KINDS.join(", ")})`);
        return 2;
      }
    }
    kinds = values.kind as Kind[];
  } else {
    kinds = KINDS.filter(
      (kind) => existsSync(join(values.in!, SOURCES[kind])));
    if (kinds.length === 0) {
      console.error(`no figure inputs found in ${values.in}`);
      return 2;
    }
  }
  try {
    for (const path of makeFigures(values.in, values.out, kinds)) {
      console.log(`wrote ${path}`);
    }
  } catch (error) {
    if (error instanceof SchemaError) {
      console.error(`input error: ${error.message}`);
      return 2;
    }
    throw error;
  }
  return 0;
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}

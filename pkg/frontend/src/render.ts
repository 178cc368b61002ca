#!/usr/bin/env node
/**
 * Command-line figure renderer.
 *
 *   stacknash-plot --kind decay --input runs/control/trace.csv --output decay.svg
 *   stacknash-plot --kind histogram --input runs/obs/samples.csv --output hist.svg
 *   stacknash-plot --spec figures.json          (one FigureSpec or a list)
 *
 * Options: --column NAME, --bins N, --linear-y, --log-y, --title T.
 */

import { readFileSync } from "fs";

import { CsvError } from "./csv";
import { FigureKind, FigureSpec, renderFigure } from "./figures";

function usage(): never {
  process.stderr.write(
    "usage: stacknash-plot --kind decay|histogram|profiles|weights " +
      "--input file.csv --output file.svg [--column NAME] [--bins N] " +
      "[--log-y|--linear-y] [--title T] | --spec figures.json\n"
  );
  process.exit(2);
}

function parseArgs(argv: string[]): FigureSpec[] {
  const opts = new Map<string, string>();
  const flags = new Set<string>();
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--log-y" || a === "--linear-y") {
      flags.add(a);
    } else if (a.startsWith("--")) {
      const v = argv[++i];
      if (v === undefined) usage();
      opts.set(a.slice(2), v);
    } else {
      usage();
    }
  }
  if (opts.has("spec")) {
    const raw = JSON.parse(readFileSync(opts.get("spec")!, "utf8"));
    const list = Array.isArray(raw) ? raw : [raw];
    return list as FigureSpec[];
  }
  const kind = opts.get("kind") as FigureKind | undefined;
  const input = opts.get("input");
  const output = opts.get("output");
  if (!kind || !input || !output) usage();
  const spec: FigureSpec = { kind, input, output };
  if (opts.has("column")) spec.column = opts.get("column");
  if (opts.has("bins")) spec.bins = Number(opts.get("bins"));
  if (opts.has("title")) spec.title = opts.get("title");
  if (flags.has("--log-y")) spec.logY = true;
  if (flags.has("--linear-y")) spec.logY = false;
  return [spec];
}

export function main(argv: string[]): number {
  let specs: FigureSpec[];
  try {
    specs = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`bad arguments: ${(err as Error).message}\n`);
    return 2;
  }
  for (const spec of specs) {
    try {
      const out = renderFigure(spec);
      process.stdout.write(`wrote ${out}\n`);
    } catch (err) {
      if (err instanceof CsvError) {
        process.stderr.write(`error: ${err.message}\n`);
        return 1;
      }
      throw err;
    }
  }
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}

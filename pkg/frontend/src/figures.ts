/**
 * Figure construction from experiment CSVs.
 *
 * Four kinds: "decay" (a positive trace column against iterations,
 * log-scale y by default), "histogram" (binned distribution of a sample
 * column), "profiles" (initial and terminal state over the spatial
 * coordinate), "weights" (temporal weight profiles). Rendering is a pure
 * function of the input file bytes, so re-rendering produces identical
 * images.
 */

import { readFileSync, writeFileSync } from "fs";

import { CsvError, CsvTable, column, parseCsv, textColumn } from "./csv";
import {
  HEIGHT,
  MARGIN,
  SvgCanvas,
  WIDTH,
  color,
  linearScale,
  linearTicks,
  logScale,
  logTicks,
} from "./svg";

export type FigureKind = "decay" | "histogram" | "profiles" | "weights";

export interface FigureSpec {
  kind: FigureKind;
  input: string;
  output: string;
  /** column to plot (decay/histogram); defaults per kind */
  column?: string;
  /** y log-scale flag; defaults: decay=true, others=false */
  logY?: boolean;
  bins?: number;
  title?: string;
  xLabel?: string;
  yLabel?: string;
}

const X0 = MARGIN.left;
const X1 = WIDTH - MARGIN.right;
const Y0 = HEIGHT - MARGIN.bottom;
const Y1 = MARGIN.top;

export function renderFigure(spec: FigureSpec): string {
  const table = parseCsv(readFileSync(spec.input, "utf8"), spec.input);
  let svg: string;
  switch (spec.kind) {
    case "decay":
      svg = decayFigure(table, spec);
      break;
    case "histogram":
      svg = histogramFigure(table, spec);
      break;
    case "profiles":
      svg = profilesFigure(table, spec);
      break;
    case "weights":
      svg = weightsFigure(table, spec);
      break;
    default:
      throw new CsvError(`unknown figure kind "${(spec as FigureSpec).kind}"`);
  }
  writeFileSync(spec.output, svg);
  return spec.output;
}

function yScaleFor(values: number[], logY: boolean, source: string, name: string) {
  if (logY) {
    const positive = values.filter((v) => v > 0);
    if (positive.length !== values.length) {
      throw new CsvError(
        `${source}: column "${name}" has non-positive entries; ` +
          `log-scale decay needs positive values (pass logY=false for a linear axis)`
      );
    }
    const lo = Math.min(...positive);
    const hi = Math.max(...positive);
    return { scale: logScale(lo, hi * 1.05, Y0, Y1), ticks: logTicks(lo, hi) };
  }
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const pad = 0.05 * (hi - lo || 1);
  return {
    scale: linearScale(lo - pad, hi + pad, Y0, Y1),
    ticks: linearTicks(lo, hi),
  };
}

function decayFigure(table: CsvTable, spec: FigureSpec): string {
  const name = spec.column ?? "terminal_norm_sq";
  const logY = spec.logY ?? true;
  const xs = column(table, "iter", spec.input);
  const ys = column(table, name, spec.input);
  const sx = linearScale(Math.min(...xs), Math.max(...xs) || 1, X0, X1);
  const { scale: sy, ticks } = yScaleFor(ys, logY, spec.input, name);
  const canvas = new SvgCanvas(spec.title ?? `${name} along the minimization`);
  canvas.axes(sx, sy, linearTicks(Math.min(...xs), Math.max(...xs)), ticks,
    spec.xLabel ?? "iteration", spec.yLabel ?? name);
  canvas.polyline(xs.map(sx), ys.map(sy), color(0));
  return canvas.render();
}

function histogramFigure(table: CsvTable, spec: FigureSpec): string {
  const name = spec.column ?? "ratio";
  const values = column(table, name, spec.input);
  const bins = spec.bins ?? 20;
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const counts = new Array<number>(bins).fill(0);
  for (const v of values) {
    const idx = Math.min(bins - 1, Math.floor(((v - lo) / span) * bins));
    counts[idx] += 1;
  }
  const sx = linearScale(lo, lo + span, X0, X1);
  const cmax = Math.max(...counts);
  const sy = linearScale(0, cmax * 1.05, Y0, Y1);
  const canvas = new SvgCanvas(
    spec.title ?? `${name}: distribution of ${values.length} samples`
  );
  canvas.axes(sx, sy, linearTicks(lo, lo + span), linearTicks(0, cmax),
    spec.xLabel ?? name, spec.yLabel ?? "count");
  const w = (X1 - X0) / bins;
  counts.forEach((c, i) => {
    if (c > 0) {
      canvas.rect(X0 + i * w, sy(c), w, Y0 - sy(c), color(0));
    }
  });
  return canvas.render();
}

function profilesFigure(table: CsvTable, spec: FigureSpec): string {
  const xs = column(table, "x", spec.input);
  const y0 = column(table, "y0", spec.input);
  const yT = column(table, "yT_mean", spec.input);
  const blocks = textColumn(table, "block", spec.input);
  // plot over the spatial coordinate in order (bulk and boundary together)
  const order = xs.map((_, i) => i).sort((a, b) => xs[a] - xs[b]);
  const ox = order.map((i) => xs[i]);
  const lines = [order.map((i) => y0[i]), order.map((i) => yT[i])];
  const all = lines.flat();
  const sx = linearScale(Math.min(...ox), Math.max(...ox) || 1, X0, X1);
  const { scale: sy, ticks } = yScaleFor(all, spec.logY ?? false, spec.input, "y0/yT_mean");
  const canvas = new SvgCanvas(spec.title ?? "state profiles");
  canvas.axes(sx, sy, linearTicks(Math.min(...ox), Math.max(...ox)), ticks,
    spec.xLabel ?? "x", spec.yLabel ?? "state");
  lines.forEach((ys, j) => canvas.polyline(ox.map(sx), ys.map(sy), color(j)));
  canvas.legend([`initial (${blocks.length} nodes)`, "terminal mean"]);
  return canvas.render();
}

function weightsFigure(table: CsvTable, spec: FigureSpec): string {
  const name = spec.column ?? "log_rho";
  const ts = column(table, "t", spec.input);
  const ys = column(table, name, spec.input);
  const sx = linearScale(Math.min(...ts), Math.max(...ts) || 1, X0, X1);
  const { scale: sy, ticks } = yScaleFor(ys, spec.logY ?? true, spec.input, name);
  const canvas = new SvgCanvas(spec.title ?? `${name} over the horizon`);
  canvas.axes(sx, sy, linearTicks(Math.min(...ts), Math.max(...ts)), ticks,
    spec.xLabel ?? "t", spec.yLabel ?? name);
  canvas.polyline(ts.map(sx), ys.map(sy), color(0));
  return canvas.render();
}

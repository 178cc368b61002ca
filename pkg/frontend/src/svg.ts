/**
 * Minimal deterministic SVG construction: fixed canvas, fixed-precision
 * coordinates, no timestamps or generated ids, so identical inputs give
 * byte-identical files.
 */

export interface Scale {
  (v: number): number;
}

export const WIDTH = 640;
export const HEIGHT = 400;
export const MARGIN = { left: 64, right: 16, top: 40, bottom: 48 };

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

export function color(i: number): string {
  return PALETTE[i % PALETTE.length];
}

function fix(v: number): string {
  // fixed two-decimal coordinates: deterministic and diff-friendly
  return (Math.round(v * 100) / 100).toFixed(2);
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  return (v: number) => outLo + ((v - lo) / span) * (outHi - outLo);
}

export function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  return (v: number) => outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo);
}

/** Round ticks for a linear axis: 5-ish steps snapped to 1/2/5 decades. */
export function linearTicks(lo: number, hi: number): number[] {
  const span = hi - lo || 1;
  const raw = span / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    out.push(v);
  }
  return out;
}

export function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-12); Math.pow(10, e) <= hi * (1 + 1e-12); e++) {
    out.push(Math.pow(10, e));
  }
  return out.length >= 2 ? out : [lo, hi];
}

function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Math.round(v * 1e6) / 1e6);
}

export class SvgCanvas {
  private parts: string[] = [];

  constructor(title: string) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`
    );
    this.parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
    this.parts.push(
      `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="15">${escapeXml(title)}</text>`
    );
  }

  polyline(xs: number[], ys: number[], stroke: string): void {
    const pts = xs.map((x, i) => `${fix(x)},${fix(ys[i])}`).join(" ");
    this.parts.push(
      `<polyline points="${pts}" fill="none" stroke="${stroke}" stroke-width="1.5"/>`
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${fix(x)}" y="${fix(y)}" width="${fix(w)}" height="${fix(h)}" fill="${fill}" stroke="white" stroke-width="0.5"/>`
    );
  }

  text(x: number, y: number, s: string, anchor = "middle", size = 11): void {
    this.parts.push(
      `<text x="${fix(x)}" y="${fix(y)}" text-anchor="${anchor}" font-size="${size}">${escapeXml(s)}</text>`
    );
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#cccccc"): void {
    this.parts.push(
      `<line x1="${fix(x1)}" y1="${fix(y1)}" x2="${fix(x2)}" y2="${fix(y2)}" stroke="${stroke}" stroke-width="1"/>`
    );
  }

  axes(
    xScale: Scale,
    yScale: Scale,
    xTicks: number[],
    yTicks: number[],
    xLabel: string,
    yLabel: string
  ): void {
    const x0 = MARGIN.left;
    const x1 = WIDTH - MARGIN.right;
    const y0 = HEIGHT - MARGIN.bottom;
    const y1 = MARGIN.top;
    for (const t of yTicks) {
      const y = yScale(t);
      this.line(x0, y, x1, y);
      this.text(x0 - 6, y + 4, tickLabel(t), "end", 10);
    }
    for (const t of xTicks) {
      const x = xScale(t);
      this.line(x, y0, x, y0 + 4, "#666666");
      this.text(x, y0 + 16, tickLabel(t), "middle", 10);
    }
    this.line(x0, y0, x1, y0, "#333333");
    this.line(x0, y0, x0, y1, "#333333");
    this.text((x0 + x1) / 2, HEIGHT - 12, xLabel);
    this.parts.push(
      `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${
        (y0 + y1) / 2
      })">${escapeXml(yLabel)}</text>`
    );
  }

  legend(labels: string[]): void {
    labels.forEach((label, i) => {
      const x = MARGIN.left + 12;
      const y = MARGIN.top + 14 + 16 * i;
      this.line(x, y - 4, x + 18, y - 4, color(i));
      this.text(x + 24, y, label, "start", 11);
    });
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

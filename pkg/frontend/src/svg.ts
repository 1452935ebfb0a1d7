/**
 * A minimal deterministic SVG scene builder.
 *
 * Figures are batch artifacts: the same input bytes must yield the same
 * output bytes, so there are no timestamps, no random ids, and all
 * coordinates are emitted with fixed precision.
 */

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { top: 36, right: 20, bottom: 64, left: 64 };

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

export interface Scale {
  (value: number): number;
  ticks: number[];
  format(value: number): string;
}

function fmt(value: number): string {
  return Math.abs(value) >= 1000
    ? value.toExponential(0).replace("+", "")
    : String(Number(value.toPrecision(4)));
}

export function linearScale(lo: number, hi: number, outLo: number,
                            outHi: number, tickCount = 5): Scale {
  if (hi === lo) {
    hi = lo + 1;
  }
  const scale = ((value: number) =>
    outLo + ((value - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  const step = (hi - lo) / (tickCount - 1);
  scale.ticks = Array.from({ length: tickCount }, (_, i) => lo + i * step);
  scale.format = fmt;
  return scale;
}

export function logScale(lo: number, hi: number, outLo: number,
                         outHi: number): Scale {
  const [llo, lhi] = [Math.log(lo), Math.log(hi)];
  const inner = linearScale(llo, lhi === llo ? llo + 1 : lhi, outLo, outHi);
  const scale = ((value: number) => inner(Math.log(value))) as Scale;
  const ticks: number[] = [];
  for (let p = Math.ceil(Math.log2(lo)); Math.pow(2, p) <= hi * 1.0001; p += 2) {
    ticks.push(Math.pow(2, p));
  }
  scale.ticks = ticks.length >= 2 ? ticks : [lo, hi];
  scale.format = fmt;
  return scale;
}

function x2(value: number): string {
  return value.toFixed(2);
}

export class Svg {
  private parts: string[] = [];

  constructor(readonly width = WIDTH, readonly height = HEIGHT) {}

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${x2(x)}" y="${x2(y)}" width="${x2(w)}" height="${x2(h)}" ` +
      `fill="${fill}"/>`,
    );
  }

  line(x1: number, y1: number, x2_: number, y2: number, stroke: string,
       width = 1, dash = ""): void {
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${x2(x1)}" y1="${x2(y1)}" x2="${x2(x2_)}" y2="${x2(y2)}" ` +
      `stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`,
    );
  }

  polyline(points: [number, number][], stroke: string, width = 2): void {
    const attr = points.map(([x, y]) => `${x2(x)},${x2(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${attr}" fill="none" stroke="${stroke}" ` +
      `stroke-width="${width}"/>`,
    );
  }

  polygon(points: [number, number][], fill: string, opacity = 0.2): void {
    const attr = points.map(([x, y]) => `${x2(x)},${x2(y)}`).join(" ");
    this.parts.push(
      `<polygon points="${attr}" fill="${fill}" opacity="${opacity}"/>`,
    );
  }

  circle(cx: number, cy: number, r: number, fill: string,
         opacity = 1): void {
    this.parts.push(
      `<circle cx="${x2(cx)}" cy="${x2(cy)}" r="${x2(r)}" fill="${fill}" ` +
      `opacity="${opacity}"/>`,
    );
  }

  text(x: number, y: number, content: string, size = 12,
       anchor: "start" | "middle" | "end" = "start",
       fill = "#222", rotate = 0): void {
    const transform = rotate
      ? ` transform="rotate(${rotate} ${x2(x)} ${x2(y)})"` : "";
    this.parts.push(
      `<text x="${x2(x)}" y="${x2(y)}" font-size="${size}" ` +
      `font-family="Helvetica, Arial, sans-serif" text-anchor="${anchor}" ` +
      `fill="${fill}"${transform}>${escapeXml(content)}</text>`,
    );
  }

  render(): string {
    return [
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" ` +
      `height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">`,
      `<rect width="${this.width}" height="${this.height}" fill="white"/>`,
      ...this.parts,
      "</svg>",
      "",
    ].join("\n");
  }
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

/** Shared chrome: axes with ticks, labels, title, and the hash footer. */
export function drawFrame(svg: Svg, xScale: Scale, yScale: Scale,
                          xLabel: string, yLabel: string, title: string,
                          configHash: string): void {
  const { top, right, bottom, left } = MARGIN;
  const [x0, x1] = [left, svg.width - right];
  const [y0, y1] = [svg.height - bottom, top];

  svg.line(x0, y0, x1, y0, "#444");
  svg.line(x0, y0, x0, y1, "#444");
  for (const tick of xScale.ticks) {
    const x = xScale(tick);
    svg.line(x, y0, x, y0 + 5, "#444");
    svg.text(x, y0 + 18, xScale.format(tick), 11, "middle");
  }
  for (const tick of yScale.ticks) {
    const y = yScale(tick);
    svg.line(x0 - 5, y, x0, y, "#444");
    svg.text(x0 - 8, y + 4, yScale.format(tick), 11, "end");
  }
  svg.text((x0 + x1) / 2, svg.height - bottom + 38, xLabel, 13, "middle");
  svg.text(18, (y0 + y1) / 2, yLabel, 13, "middle", "#222", -90);
  svg.text((x0 + x1) / 2, top - 14, title, 15, "middle");
  svg.text(svg.width - right, svg.height - 8,
           `config ${configHash}`, 10, "end", "#888");
}

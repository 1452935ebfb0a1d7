/**
 * Figure builders over the experiment CSVs.
 *
 * Each builder is a pure function from parsed rows (plus the manifest's
 * config hash) to an SVG string: error-vs-n curves with mean +- stderr
 * bands, the log_d(n) collapse overlay, and the reconstruction scatter
 * grid with annotated correlations.
 */

import {
  MARGIN, PALETTE, Scale, Svg, drawFrame, linearScale, logScale,
} from "./svg.js";
import { ReconRow, ResultRow, SchemaError } from "./csv.js";

export function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

/** Standard error of the mean (sample std over sqrt(k)); 0 for k = 1. */
export function stderr(values: number[]): number {
  if (values.length < 2) {
    return 0;
  }
  const m = mean(values);
  const variance = values.reduce((a, b) => a + (b - m) * (b - m), 0) /
    (values.length - 1);
  return Math.sqrt(variance) / Math.sqrt(values.length);
}

function groupBy<T>(rows: T[], key: (row: T) => string): Map<string, T[]> {
  const groups = new Map<string, T[]>();
  for (const row of rows) {
    const k = key(row);
    const bucket = groups.get(k);
    if (bucket) {
      bucket.push(row);
    } else {
      groups.set(k, [row]);
    }
  }
  return groups;
}

interface CurvePoint {
  x: number;
  mean: number;
  stderr: number;
}

interface Curve {
  label: string;
  points: CurvePoint[];
}

/** Total sample size of one run: both stages' data combined. */
function totalN(row: ResultRow): number {
  return row.n1 + row.n2;
}

function buildCurves(rows: ResultRow[], curveKey: (row: ResultRow) => string,
                     xOf: (row: ResultRow) => number): Curve[] {
  const curves: Curve[] = [];
  for (const [label, group] of groupBy(rows, curveKey)) {
    const points: CurvePoint[] = [];
    for (const [, atX] of groupBy(group, (row) => String(xOf(row)))) {
      const maes = atX.map((row) => row.test_mae);
      points.push({ x: xOf(atX[0]), mean: mean(maes), stderr: stderr(maes) });
    }
    points.sort((a, b) => a.x - b.x);
    curves.push({ label, points });
  }
  curves.sort((a, b) => a.label.localeCompare(b.label));
  return curves;
}

function renderCurves(curves: Curve[], xScaleOf: (lo: number, hi: number,
                      outLo: number, outHi: number) => Scale,
                      xLabel: string, title: string,
                      configHash: string): string {
  const svg = new Svg();
  const { top, right, bottom, left } = MARGIN;
  const allPoints = curves.flatMap((curve) => curve.points);
  const xs = allPoints.map((point) => point.x);
  const lows = allPoints.map((point) => point.mean - point.stderr);
  const highs = allPoints.map((point) => point.mean + point.stderr);
  const xScale = xScaleOf(Math.min(...xs), Math.max(...xs),
                          left, svg.width - right);
  const pad = 0.05 * (Math.max(...highs) - Math.min(...lows) || 1);
  const yScale = linearScale(Math.min(...lows) - pad, Math.max(...highs) + pad,
                             svg.height - bottom, top);
  drawFrame(svg, xScale, yScale, xLabel, "test MAE", title, configHash);

  curves.forEach((curve, index) => {
    const color = PALETTE[index % PALETTE.length];
    const upper: [number, number][] = curve.points.map(
      (p) => [xScale(p.x), yScale(p.mean + p.stderr)]);
    const lower: [number, number][] = [...curve.points].reverse().map(
      (p) => [xScale(p.x), yScale(p.mean - p.stderr)]);
    if (curve.points.length > 1) {
      svg.polygon([...upper, ...lower], color);
    }
    svg.polyline(curve.points.map(
      (p) => [xScale(p.x), yScale(p.mean)]), color);
    for (const p of curve.points) {
      svg.circle(xScale(p.x), yScale(p.mean), 3, color);
    }
    svg.text(svg.width - MARGIN.right - 6, top + 16 + 16 * index,
             curve.label, 12, "end", color);
  });
  return svg.render();
}

/** Error-vs-n curves, one per (method, d), mean +- stderr over seeds. */
export function plotCompare(rows: ResultRow[], configHash: string): string {
  const methods = new Set(rows.map((row) => row.method));
  if (methods.size < 2) {
    throw new SchemaError(
      `compare figure needs at least 2 methods, found ${methods.size}`,
    );
  }
  const curves = buildCurves(rows,
                             (row) => `${row.method} (d=${row.d})`, totalN);
  return renderCurves(curves, logScale, "total samples n",
                      "Two-stage training vs. random features", configHash);
}

/** Transfer curves: one per (link degree p), x = head sample size n2. */
export function plotTransfer(rows: ResultRow[], configHash: string): string {
  const curves = buildCurves(rows, (row) => `degree p=${row.p}`,
                             (row) => row.n2);
  return renderCurves(curves, logScale, "stage-2 samples n2",
                      "Transfer to new link functions", configHash);
}

/**
 * The collapse overlay: the same error data re-plotted against log_d(n).
 * Rows with d <= 1 are skipped with a warning (the log base is undefined).
 */
export function plotCollapse(rows: ResultRow[], configHash: string,
                             warn: (msg: string) => void = console.warn,
                             ): string {
  const usable = rows.filter((row) => row.d > 1);
  const skipped = rows.length - usable.length;
  if (skipped > 0) {
    warn(`plot_collapse: skipped ${skipped} rows with d <= 1 ` +
         "(log base undefined)");
  }
  if (usable.length === 0) {
    throw new SchemaError("collapse figure has no rows with d > 1");
  }
  const curves = buildCurves(usable,
                             (row) => `${row.method} (d=${row.d})`,
                             (row) => Math.log(totalN(row)) / Math.log(row.d));
  return renderCurves(curves, linearScale,
                      "relative sample complexity log_d(n)",
                      "Sample-complexity collapse", configHash);
}

/**
 * Reconstruction scatter grid: rows = features, columns = n1 values in
 * increasing order, identity line and correlation annotated per panel.
 */
export function plotScatter(rows: ReconRow[], configHash: string): string {
  const features = [...new Set(rows.map((row) => row.feature_idx))]
    .sort((a, b) => a - b);
  const n1Values = [...new Set(rows.map((row) => row.n1))]
    .sort((a, b) => a - b);
  const panel = 170;
  const pad = 44;
  const svg = new Svg(pad + n1Values.length * panel + 20,
                      pad + features.length * panel + 30);
  svg.text(svg.width / 2, 20,
           "Reconstructed vs. true features", 15, "middle");

  features.forEach((feature, i) => {
    n1Values.forEach((n1, j) => {
      const cell = rows.filter(
        (row) => row.feature_idx === feature && row.n1 === n1);
      const x0 = pad + j * panel;
      const y0 = pad + i * panel;
      const side = panel - 24;
      const values = cell.flatMap((row) => [row.true_value, row.recon_value]);
      const lo = Math.min(...values);
      const hi = Math.max(...values);
      const sx = linearScale(lo, hi, x0, x0 + side, 3);
      const sy = linearScale(lo, hi, y0 + side, y0, 3);
      svg.rect(x0, y0, side, side, "#fafafa");
      svg.line(sx(lo), sy(lo), sx(hi), sy(hi), "#999", 1, "4 3");
      for (const row of cell) {
        svg.circle(sx(row.true_value), sy(row.recon_value), 1.6,
                   PALETTE[i % PALETTE.length], 0.55);
      }
      const corr = correlation(cell.map((row) => row.true_value),
                               cell.map((row) => row.recon_value));
      svg.text(x0 + 4, y0 + 14, `corr ${corr.toFixed(3)}`, 11);
      if (i === 0) {
        svg.text(x0 + side / 2, y0 - 6, `n1 = ${n1}`, 12, "middle");
      }
      if (j === 0) {
        svg.text(x0 - 6, y0 + side / 2, `p_${feature}`, 12, "end");
      }
    });
  });
  svg.text(svg.width - 10, svg.height - 8, `config ${configHash}`,
           10, "end", "#888");
  return svg.render();
}

export function correlation(a: number[], b: number[]): number {
  const [ma, mb] = [mean(a), mean(b)];
  let num = 0;
  let va = 0;
  let vb = 0;
  for (let i = 0; i < a.length; i++) {
    num += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) ** 2;
    vb += (b[i] - mb) ** 2;
  }
  const denom = Math.sqrt(va * vb);
  return denom === 0 ? 1 : num / denom;
}

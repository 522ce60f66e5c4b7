import type { Curve, FigureData } from "./schema.js";

const WIDTH = 760;
const HEIGHT = 480;
const MARGIN = { top: 28, right: 24, bottom: 52, left: 76 };

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

interface Scale {
  (value: number): number;
  ticks: number[];
}

function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  if (hi === lo) {
    hi = lo + 1;
  }
  const f = ((value: number) => outLo + ((value - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  const step = niceStep(hi - lo);
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * Math.abs(hi); t += step) {
    ticks.push(roundTick(t));
  }
  f.ticks = ticks;
  return f;
}

function logScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const f = ((value: number) =>
    outLo + ((Math.log10(value) - llo) / (lhi - llo || 1)) * (outHi - outLo)) as Scale;
  const ticks: number[] = [];
  for (let p = Math.ceil(llo); p <= Math.floor(lhi); p += 1) {
    ticks.push(10 ** p);
  }
  if (ticks.length === 0) ticks.push(lo, hi);
  f.ticks = ticks;
  return f;
}

function niceStep(span: number): number {
  const raw = span / 6;
  const power = 10 ** Math.floor(Math.log10(raw));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * power);
  return candidates.find((c) => c >= raw) ?? candidates[candidates.length - 1];
}

function roundTick(t: number): number {
  return Math.abs(t) < 1e-12 ? 0 : Number(t.toPrecision(10));
}

function formatTick(t: number): string {
  if (t === 0) return "0";
  const magnitude = Math.abs(t);
  if (magnitude >= 1e4 || magnitude < 1e-3) return t.toExponential(0);
  return String(Number(t.toPrecision(6)));
}

const escapeXml = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

function polyline(curve: Curve, x: number[], sx: Scale, sy: Scale, color: string, logY: boolean): string {
  const points: string[] = [];
  for (let i = 0; i < x.length; i += 1) {
    const value = curve.values[i];
    if (logY && value <= 0) continue;
    points.push(`${sx(x[i]).toFixed(2)},${sy(value).toFixed(2)}`);
  }
  return `<polyline fill="none" stroke="${color}" stroke-width="1.6" points="${points.join(" ")}"/>`;
}

/**
 * Deterministic standalone SVG: axes, tick labels, one polyline per
 * curve and a legend naming every curve.  Identical input produces
 * byte-identical output.
 */
export function renderSvg(data: FigureData, options: { logY?: boolean } = {}): string {
  const logY = options.logY ?? data.logY;
  const logX = data.logX;
  const xs = data.x;
  let lo = Math.min(...xs);
  let hi = Math.max(...xs);
  const allValues = data.curves.flatMap((c) => c.values).filter((v) => !logY || v > 0);
  if (allValues.length === 0) {
    throw new Error(`figure ${data.figure}: no positive values to draw on a log axis`);
  }
  let vLo = Math.min(...allValues);
  let vHi = Math.max(...allValues);
  if (!logY) {
    const pad = 0.05 * (vHi - vLo || 1);
    vLo = Math.min(vLo, 0) === vLo && vLo > 0 ? 0 : vLo - pad;
    vHi = vHi + pad;
  }
  const sx = (logX ? logScale : linearScale)(lo, hi, MARGIN.left, WIDTH - MARGIN.right);
  const sy = (logY ? logScale : linearScale)(vLo, vHi, HEIGHT - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  const axisY = HEIGHT - MARGIN.bottom;
  parts.push(
    `<line x1="${MARGIN.left}" y1="${axisY}" x2="${WIDTH - MARGIN.right}" y2="${axisY}" stroke="black"/>`,
  );
  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${axisY}" stroke="black"/>`,
  );
  for (const t of sx.ticks) {
    const px = sx(t);
    parts.push(`<line x1="${px.toFixed(2)}" y1="${axisY}" x2="${px.toFixed(2)}" y2="${axisY + 5}" stroke="black"/>`);
    parts.push(
      `<text x="${px.toFixed(2)}" y="${axisY + 18}" font-size="11" text-anchor="middle">${formatTick(t)}</text>`,
    );
  }
  for (const t of sy.ticks) {
    const py = sy(t);
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${py.toFixed(2)}" x2="${MARGIN.left}" y2="${py.toFixed(2)}" stroke="black"/>`);
    parts.push(
      `<text x="${MARGIN.left - 8}" y="${(py + 4).toFixed(2)}" font-size="11" text-anchor="end">${formatTick(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${(MARGIN.left + WIDTH - MARGIN.right) / 2}" y="${HEIGHT - 14}" font-size="13" text-anchor="middle">${escapeXml(data.xLabel)}</text>`,
  );
  parts.push(
    `<text x="18" y="${(MARGIN.top + axisY) / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 ${(MARGIN.top + axisY) / 2})">${escapeXml(
      data.yLabel,
    )}</text>`,
  );
  data.curves.forEach((curve, i) => {
    parts.push(polyline(curve, xs, sx, sy, PALETTE[i % PALETTE.length], logY));
  });
  // legend
  data.curves.forEach((curve, i) => {
    const ly = MARGIN.top + 8 + 16 * i;
    const lx = WIDTH - MARGIN.right - 210;
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${PALETTE[i % PALETTE.length]}" stroke-width="2"/>`);
    parts.push(
      `<text x="${lx + 28}" y="${ly + 4}" font-size="12" class="legend-label">${escapeXml(curve.label)}</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

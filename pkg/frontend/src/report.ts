// Verdict presentation helpers for the result view. Pure, DOM-free.

import type { RunReportWire } from './types.js';

export interface VerdictBadge {
  text: string;
  cssClass: 'badge-safe' | 'badge-unsafe' | 'badge-unknown';
  detail: string;
}

export function verdictBadge(report: RunReportWire): VerdictBadge {
  const verdict = report.verdict;
  if (!verdict) {
    return { text: 'UNKNOWN', cssClass: 'badge-unknown', detail: 'no verdict recorded' };
  }
  const stats = verdict.stats;
  const detail = `${stats.nodes_explored} node(s), ${stats.wall_time.toFixed(3)}s`;
  switch (verdict.status) {
    case 'SAFE':
      return { text: 'SAFE', cssClass: 'badge-safe', detail };
    case 'UNSAFE':
      return { text: 'UNSAFE', cssClass: 'badge-unsafe', detail };
    default:
      return { text: 'UNKNOWN', cssClass: 'badge-unknown', detail };
  }
}

export function hasCounterexampleImage(report: RunReportWire): boolean {
  return Boolean(
    report.verdict?.counterexample
    && report.grounded_spec?.reference.kind === 'image_grayscale',
  );
}

/** Grayscale [0,1] vector -> RGBA pixel buffer for an ImageData of w x h. */
export function grayscaleToRgba(
  values: number[], w: number, h: number,
): Uint8ClampedArray<ArrayBuffer> {
  if (values.length !== w * h) {
    throw new Error(`expected ${w * h} values, got ${values.length}`);
  }
  const rgba = new Uint8ClampedArray(new ArrayBuffer(w * h * 4));
  for (let i = 0; i < values.length; i++) {
    const v = Math.round(Math.min(1, Math.max(0, values[i])) * 255);
    rgba[i * 4] = v;
    rgba[i * 4 + 1] = v;
    rgba[i * 4 + 2] = v;
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}

/** Coordinates whose interval is non-degenerate (the queried region). */
export function freeCoordinates(report: RunReportWire): number[] {
  const gs = report.grounded_spec;
  if (!gs) return [];
  const out: number[] = [];
  for (let i = 0; i < gs.lower.length; i++) {
    if (gs.upper[i] > gs.lower[i]) out.push(i);
  }
  return out;
}

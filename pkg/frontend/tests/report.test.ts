import { describe, expect, it } from 'vitest';

import {
  freeCoordinates,
  grayscaleToRgba,
  hasCounterexampleImage,
  verdictBadge,
} from '../src/report.js';
import type { RunReportWire } from '../src/types.js';

function report(status: 'SAFE' | 'UNSAFE' | 'UNKNOWN',
                counterexample: number[] | null = null): RunReportWire {
  return {
    schema: 1,
    run_id: 'r1',
    property: 'p',
    domain: 'image',
    grounding: { grounding: { regions: [], source: 'detector' } },
    grounded_spec: {
      lower: [0, 0.2, 0.5],
      upper: [0, 0.8, 0.5],
      target_class: 1,
      reference: { kind: 'image_grayscale', values: [0, 0, 0], shape: [1, 3], id: 'i' },
    },
    verdict: { status, counterexample, stats: { nodes_explored: 7, wall_time: 0.25 } },
    approval: { mode: 'review', status: 'approved', edited: false },
  };
}

describe('verdictBadge', () => {
  it('maps each status to its badge class', () => {
    expect(verdictBadge(report('SAFE')).cssClass).toBe('badge-safe');
    expect(verdictBadge(report('UNSAFE', [0, 0, 0])).cssClass).toBe('badge-unsafe');
    expect(verdictBadge(report('UNKNOWN')).cssClass).toBe('badge-unknown');
  });

  it('carries the search statistics', () => {
    expect(verdictBadge(report('SAFE')).detail).toContain('7 node(s)');
  });

  it('handles a missing verdict (rejected approval)', () => {
    const r = { ...report('SAFE'), verdict: null };
    expect(verdictBadge(r).cssClass).toBe('badge-unknown');
  });
});

describe('hasCounterexampleImage', () => {
  it('requires both a counterexample and an image reference', () => {
    expect(hasCounterexampleImage(report('UNSAFE', [0.1, 0.2, 0.3]))).toBe(true);
    expect(hasCounterexampleImage(report('SAFE'))).toBe(false);
    const tabular = report('UNSAFE', [0.1, 0.2, 0.3]);
    tabular.grounded_spec!.reference.kind = 'tabular_vector';
    expect(hasCounterexampleImage(tabular)).toBe(false);
  });
});

describe('grayscaleToRgba', () => {
  it('expands intensities into opaque gray pixels', () => {
    const rgba = grayscaleToRgba([0, 0.5, 1], 3, 1);
    expect(Array.from(rgba.slice(0, 4))).toEqual([0, 0, 0, 255]);
    expect(Array.from(rgba.slice(4, 8))).toEqual([128, 128, 128, 255]);
    expect(Array.from(rgba.slice(8, 12))).toEqual([255, 255, 255, 255]);
  });

  it('clips out-of-range values instead of wrapping', () => {
    const rgba = grayscaleToRgba([-1, 2], 2, 1);
    expect(rgba[0]).toBe(0);
    expect(rgba[4]).toBe(255);
  });

  it('rejects a size mismatch', () => {
    expect(() => grayscaleToRgba([0, 0], 3, 1)).toThrow(/expected 3/);
  });
});

describe('freeCoordinates', () => {
  it('lists exactly the non-degenerate coordinates', () => {
    expect(freeCoordinates(report('SAFE'))).toEqual([1]);
  });

  it('is empty without a grounded spec', () => {
    const r = { ...report('SAFE'), grounded_spec: null };
    expect(freeCoordinates(r)).toEqual([]);
  });
});

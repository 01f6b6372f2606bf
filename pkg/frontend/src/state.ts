// Client-side review state: edits are staged locally and sent exactly once.

import { boxesEqual, regionToBox } from './geometry.js';
import type { DecisionBody, PixelBoxRegion, Region, ReviewSessionWire } from './types.js';

export class ReviewState {
  readonly session: ReviewSessionWire;
  private boxes: PixelBoxRegion[];
  private deleted: Set<number> = new Set();
  private decided = false;
  selectedIndex: number | null = null;

  constructor(session: ReviewSessionWire) {
    this.session = session;
    this.boxes = session.regions.filter(
      (r): r is PixelBoxRegion => r.variant === 'pixel_box',
    ).map((r) => ({ ...r }));
  }

  /** Regions still on the table, in original order. */
  activeBoxes(): PixelBoxRegion[] {
    return this.boxes.filter((_, i) => !this.deleted.has(i));
  }

  activeIndices(): number[] {
    return this.boxes.map((_, i) => i).filter((i) => !this.deleted.has(i));
  }

  boxAt(index: number): PixelBoxRegion {
    return this.boxes[index];
  }

  updateBox(index: number, region: PixelBoxRegion): void {
    if (this.decided) throw new Error('decision already sent');
    this.boxes[index] = region;
  }

  deleteBox(index: number): void {
    if (this.decided) throw new Error('decision already sent');
    this.deleted.add(index);
    if (this.selectedIndex === index) this.selectedIndex = null;
  }

  restoreAll(): void {
    if (this.decided) throw new Error('decision already sent');
    this.deleted.clear();
    this.boxes = this.session.regions.filter(
      (r): r is PixelBoxRegion => r.variant === 'pixel_box',
    ).map((r) => ({ ...r }));
    this.selectedIndex = null;
  }

  /** True when any box moved, resized, or was deleted. */
  isEdited(): boolean {
    if (this.deleted.size > 0) return true;
    const originals = this.session.regions.filter(
      (r): r is PixelBoxRegion => r.variant === 'pixel_box',
    );
    return this.boxes.some((b, i) => !boxesEqual(regionToBox(b), regionToBox(originals[i])));
  }

  canDecide(): boolean {
    return !this.decided && this.session.status === 'pending';
  }

  /** Build the decision body; marks the state decided (one shot). */
  buildDecision(status: 'approved' | 'rejected'): DecisionBody {
    if (!this.canDecide()) throw new Error('decision already sent');
    this.decided = true;
    if (status === 'rejected') {
      return { run_id: this.session.run_id, status };
    }
    const body: DecisionBody = { run_id: this.session.run_id, status };
    if (this.isEdited()) {
      const kept: Region[] = this.activeBoxes();
      // non-box regions (tabular/audio) ride along unchanged
      for (const r of this.session.regions) {
        if (r.variant !== 'pixel_box') kept.push(r);
      }
      body.regions = kept;
    }
    return body;
  }
}

/** Rows for the tabular review table; highlighted rows carry a constraint. */
export function tabularRows(session: ReviewSessionWire): Array<{
  name: string;
  value: number;
  highlighted: boolean;
  bounds: [number, number] | null;
}> {
  const ranges = new Map<number, [number, number]>();
  for (const r of session.regions) {
    if (r.variant === 'feature_range') ranges.set(r.index, [r.lower, r.upper]);
  }
  return session.input.values.map((value, i) => ({
    name: session.attribute_names?.[i] ?? `x${i}`,
    value,
    highlighted: ranges.has(i),
    bounds: ranges.get(i) ?? null,
  }));
}

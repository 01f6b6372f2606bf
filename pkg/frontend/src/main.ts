// Panel bootstrap: review a pending session, or render a finished report.

import { fetchReport, fetchSession, postDecision } from './api.js';
import { applyDrag, boxToRegion, hitTest, regionToBox, type Box, type Handle } from './geometry.js';
import { freeCoordinates, grayscaleToRgba, hasCounterexampleImage, verdictBadge } from './report.js';
import { ReviewState, tabularRows } from './state.js';
import type { PixelBoxRegion, ReviewSessionWire, RunReportWire } from './types.js';

const app = () => document.getElementById('app')!;

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function setStatus(text: string, kind: 'info' | 'error' = 'info'): void {
  const bar = document.getElementById('status')!;
  bar.textContent = text;
  bar.className = kind;
}

// ---- review view -----------------------------------------------------------

const BOX_COLORS = ['#ff5f5f', '#ffcf5f', '#5fff8f', '#5fcfff', '#cf5fff', '#ff5fcf'];
const HANDLE_SLACK = 0.75; // in image pixels

interface DragState {
  index: number;
  handle: Handle;
  startX: number;
  startY: number;
  original: Box;
}

class ImageReview {
  private state: ReviewState;
  private canvas: HTMLCanvasElement;
  private scale: number;
  private bitmap: HTMLImageElement;
  private drag: DragState | null = null;

  constructor(session: ReviewSessionWire, container: HTMLElement) {
    this.state = new ReviewState(session);
    const [h, w] = session.input.shape;
    this.scale = Math.max(4, Math.floor(480 / Math.max(w, h)));
    this.canvas = document.createElement('canvas');
    this.canvas.width = w * this.scale;
    this.canvas.height = h * this.scale;
    this.canvas.className = 'review-canvas';
    this.bitmap = new Image();
    this.bitmap.onload = () => this.redraw();
    this.bitmap.src = '/image';
    container.appendChild(this.canvas);
    container.appendChild(this.buildToolbar());
    this.bindMouse();
    this.bindKeys();
  }

  private imageSize(): [number, number] {
    const [h, w] = this.state.session.input.shape;
    return [w, h];
  }

  private buildToolbar(): HTMLElement {
    const bar = el('div', 'toolbar');
    const del = el('button', 'btn', 'Delete selected') as HTMLButtonElement;
    del.onclick = () => {
      if (this.state.selectedIndex !== null) {
        this.state.deleteBox(this.state.selectedIndex);
        this.redraw();
      }
    };
    const reset = el('button', 'btn', 'Reset edits') as HTMLButtonElement;
    reset.onclick = () => {
      this.state.restoreAll();
      this.redraw();
    };
    const approve = el('button', 'btn btn-approve', 'Approve') as HTMLButtonElement;
    approve.onclick = () => this.decide('approved');
    const reject = el('button', 'btn btn-reject', 'Reject') as HTMLButtonElement;
    reject.onclick = () => this.decide('rejected');
    bar.append(del, reset, approve, reject);
    return bar;
  }

  private async decide(status: 'approved' | 'rejected'): Promise<void> {
    if (!this.state.canDecide()) return;
    if (status === 'approved' && this.state.activeBoxes().length === 0) {
      setStatus('cannot approve an empty region set; reject instead', 'error');
      this.state.restoreAll();
      this.redraw();
      return;
    }
    try {
      await postDecision(this.state.buildDecision(status));
      setStatus(`decision sent: ${status}; waiting for the verdict…`);
      await waitForReportAndRender();
    } catch (err) {
      setStatus(String(err), 'error');
    }
  }

  private canvasToImage(ev: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [(ev.clientX - rect.left) / this.scale, (ev.clientY - rect.top) / this.scale];
  }

  private bindMouse(): void {
    this.canvas.addEventListener('mousedown', (ev) => {
      const [px, py] = this.canvasToImage(ev);
      for (const i of this.state.activeIndices().reverse()) {
        const box = regionToBox(this.state.boxAt(i));
        const handle = hitTest(box, px, py, HANDLE_SLACK);
        if (handle) {
          this.state.selectedIndex = i;
          this.drag = { index: i, handle, startX: px, startY: py, original: box };
          this.redraw();
          return;
        }
      }
      this.state.selectedIndex = null;
      this.redraw();
    });
    this.canvas.addEventListener('mousemove', (ev) => {
      if (!this.drag) return;
      const [px, py] = this.canvasToImage(ev);
      const [w, h] = this.imageSize();
      const moved = applyDrag(
        this.drag.original, this.drag.handle,
        px - this.drag.startX, py - this.drag.startY, w, h,
      );
      this.state.updateBox(this.drag.index,
        boxToRegion(moved, this.state.boxAt(this.drag.index)));
      this.redraw();
    });
    window.addEventListener('mouseup', () => {
      this.drag = null;
    });
  }

  private bindKeys(): void {
    window.addEventListener('keydown', (ev) => {
      if ((ev.key === 'Delete' || ev.key === 'Backspace')
          && this.state.selectedIndex !== null) {
        this.state.deleteBox(this.state.selectedIndex);
        this.redraw();
      }
    });
  }

  private redraw(): void {
    const ctx = this.canvas.getContext('2d')!;
    ctx.imageSmoothingEnabled = false;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.bitmap.complete && this.bitmap.naturalWidth > 0) {
      ctx.drawImage(this.bitmap, 0, 0, this.canvas.width, this.canvas.height);
    }
    const s = this.scale;
    this.state.activeIndices().forEach((i, order) => {
      const region = this.state.boxAt(i);
      const color = BOX_COLORS[order % BOX_COLORS.length];
      const selected = this.state.selectedIndex === i;
      ctx.lineWidth = selected ? 3 : 2;
      ctx.strokeStyle = color;
      ctx.strokeRect(region.x1 * s, region.y1 * s,
        (region.x2 - region.x1) * s, (region.y2 - region.y1) * s);
      ctx.font = '12px sans-serif';
      ctx.fillStyle = color;
      ctx.fillText(`${region.label} (${region.score.toFixed(2)})`,
        region.x1 * s + 2, Math.max(10, region.y1 * s - 4));
      if (selected) {
        ctx.fillStyle = color;
        for (const [hx, hy] of [
          [region.x1, region.y1], [region.x2, region.y1],
          [region.x1, region.y2], [region.x2, region.y2],
        ]) {
          ctx.fillRect(hx * s - 3, hy * s - 3, 6, 6);
        }
      }
    });
  }
}

function renderTabularReview(session: ReviewSessionWire, container: HTMLElement): void {
  const state = new ReviewState(session);
  const table = el('table', 'attr-table');
  const head = el('tr');
  for (const title of ['attribute', 'value', 'constraint']) {
    head.appendChild(el('th', undefined, title));
  }
  table.appendChild(head);
  for (const row of tabularRows(session)) {
    const tr = el('tr', row.highlighted ? 'highlighted' : undefined);
    tr.appendChild(el('td', undefined, row.name));
    tr.appendChild(el('td', undefined, row.value.toFixed(4)));
    tr.appendChild(el('td', undefined,
      row.bounds ? `[${row.bounds[0].toFixed(4)}, ${row.bounds[1].toFixed(4)}]` : '—'));
    table.appendChild(tr);
  }
  container.appendChild(table);

  const bar = el('div', 'toolbar');
  const approve = el('button', 'btn btn-approve', 'Approve') as HTMLButtonElement;
  approve.onclick = async () => {
    try {
      await postDecision(state.buildDecision('approved'));
      setStatus('decision sent: approved; waiting for the verdict…');
      await waitForReportAndRender();
    } catch (err) {
      setStatus(String(err), 'error');
    }
  };
  const reject = el('button', 'btn btn-reject', 'Reject') as HTMLButtonElement;
  reject.onclick = async () => {
    try {
      await postDecision(state.buildDecision('rejected'));
      setStatus('decision sent: rejected; the run returns UNKNOWN');
    } catch (err) {
      setStatus(String(err), 'error');
    }
  };
  bar.append(approve, reject);
  container.appendChild(bar);
}

function renderReview(session: ReviewSessionWire): void {
  const root = app();
  root.textContent = '';
  root.appendChild(el('h2', undefined, 'Region approval'));
  root.appendChild(el('p', 'property', `“${session.property}”`));
  root.appendChild(el('p', 'hint',
    `run ${session.run_id} · ${session.regions.length} proposed region(s)`));
  if (session.input.kind === 'image_grayscale') {
    new ImageReview(session, root);
    root.appendChild(el('p', 'hint',
      'drag inside a box to move it, drag an edge to resize, Delete removes it'));
  } else {
    renderTabularReview(session, root);
  }
  setStatus('review the proposed regions, then approve or reject');
}

// ---- result view -------------------------------------------------------------

function renderReport(report: RunReportWire): void {
  const root = app();
  root.textContent = '';
  root.appendChild(el('h2', undefined, 'Verification result'));
  root.appendChild(el('p', 'property', `“${report.property}”`));

  const badge = verdictBadge(report);
  const badgeEl = el('span', `badge ${badge.cssClass}`, badge.text);
  const line = el('p');
  line.appendChild(badgeEl);
  line.appendChild(el('span', 'hint', ` ${badge.detail}`));
  root.appendChild(line);

  const free = freeCoordinates(report);
  root.appendChild(el('p', 'hint',
    `domain ${report.domain} · approval ${report.approval.status}`
    + ` (${report.approval.mode}) · ${free.length} free coordinate(s)`));

  const grounding = report.grounding?.grounding;
  if (grounding) {
    const list = el('ul', 'region-list');
    for (const r of grounding.regions) {
      if (r.variant === 'pixel_box') {
        list.appendChild(el('li', undefined,
          `${r.label}: box (${r.x1}, ${r.y1}, ${r.x2}, ${r.y2}), score ${r.score.toFixed(2)}`));
      } else if (r.variant === 'feature_range') {
        list.appendChild(el('li', undefined,
          `${r.label}: coordinate ${r.index} in [${r.lower.toFixed(4)}, ${r.upper.toFixed(4)}]`));
      } else {
        list.appendChild(el('li', undefined,
          `${r.label}: samples [${r.t_start}, ${r.t_end})`));
      }
    }
    root.appendChild(list);
  }

  if (report.grounded_spec?.reference.kind === 'image_grayscale') {
    const pane = el('div', 'image-pane');
    pane.appendChild(imageCard('original input', '/image'));
    if (hasCounterexampleImage(report)) {
      pane.appendChild(counterexampleCard(report));
    }
    root.appendChild(pane);
  }
  setStatus(badge.text === 'UNSAFE'
    ? 'a counterexample witnesses the violation'
    : 'done');
}

function imageCard(title: string, src: string): HTMLElement {
  const card = el('div', 'image-card');
  card.appendChild(el('h3', undefined, title));
  const img = new Image();
  img.src = src;
  img.className = 'preview';
  card.appendChild(img);
  return card;
}

function counterexampleCard(report: RunReportWire): HTMLElement {
  const card = el('div', 'image-card');
  card.appendChild(el('h3', undefined, 'counterexample'));
  const gs = report.grounded_spec!;
  const [h, w] = gs.reference.shape;
  const canvas = document.createElement('canvas');
  canvas.width = w;
  canvas.height = h;
  canvas.className = 'preview';
  const ctx = canvas.getContext('2d')!;
  const data = new ImageData(grayscaleToRgba(report.verdict!.counterexample!, w, h), w, h);
  ctx.putImageData(data, 0, 0);
  card.appendChild(canvas);
  return card;
}

// ---- bootstrap ------------------------------------------------------------------

async function waitForReportAndRender(attempts = 40): Promise<void> {
  for (let i = 0; i < attempts; i++) {
    const report = await fetchReport();
    if (report) {
      renderReport(report);
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  setStatus('verdict not available yet; the run may still be verifying', 'error');
}

async function boot(): Promise<void> {
  try {
    const session = await fetchSession();
    if (session && session.status === 'pending') {
      renderReview(session);
      return;
    }
    const report = await fetchReport();
    if (report) {
      renderReport(report);
      return;
    }
    app().textContent = '';
    app().appendChild(el('p', 'hint',
      'no pending review session and no finished report on this server'));
    setStatus('idle');
  } catch (err) {
    setStatus(String(err), 'error');
  }
}

boot();

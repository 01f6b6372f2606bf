// Box editing math for the canvas overlay. Pure functions, in image-pixel
// units; the canvas scale factor is applied by the caller.

import type { PixelBoxRegion } from './types.js';

export interface Box {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export type Handle = 'inside' | 'nw' | 'ne' | 'sw' | 'se' | 'n' | 's' | 'e' | 'w';

/** Clamp a box into image bounds, keeping at least one pixel of extent. */
export function clampBox(box: Box, width: number, height: number): Box {
  let x1 = Math.round(Math.min(box.x1, box.x2));
  let y1 = Math.round(Math.min(box.y1, box.y2));
  let x2 = Math.round(Math.max(box.x1, box.x2));
  let y2 = Math.round(Math.max(box.y1, box.y2));
  x1 = Math.max(0, Math.min(x1, width - 1));
  y1 = Math.max(0, Math.min(y1, height - 1));
  x2 = Math.max(x1 + 1, Math.min(x2, width));
  y2 = Math.max(y1 + 1, Math.min(y2, height));
  return { x1, y1, x2, y2 };
}

/** Which part of the box a point grabs: edges resize, the interior moves. */
export function hitTest(box: Box, px: number, py: number, slack: number): Handle | null {
  const nearX1 = Math.abs(px - box.x1) <= slack;
  const nearX2 = Math.abs(px - box.x2) <= slack;
  const nearY1 = Math.abs(py - box.y1) <= slack;
  const nearY2 = Math.abs(py - box.y2) <= slack;
  const insideX = px >= box.x1 - slack && px <= box.x2 + slack;
  const insideY = py >= box.y1 - slack && py <= box.y2 + slack;
  if (!insideX || !insideY) return null;
  if (nearX1 && nearY1) return 'nw';
  if (nearX2 && nearY1) return 'ne';
  if (nearX1 && nearY2) return 'sw';
  if (nearX2 && nearY2) return 'se';
  if (nearX1) return 'w';
  if (nearX2) return 'e';
  if (nearY1) return 'n';
  if (nearY2) return 's';
  if (px >= box.x1 && px <= box.x2 && py >= box.y1 && py <= box.y2) return 'inside';
  return null;
}

/** Apply a drag of (dx, dy) to the grabbed handle, clamped to the image. */
export function applyDrag(
  box: Box, handle: Handle, dx: number, dy: number,
  width: number, height: number,
): Box {
  const b = { ...box };
  switch (handle) {
    case 'inside': {
      // translation clamps as a unit so the box never changes size
      const w = box.x2 - box.x1;
      const h = box.y2 - box.y1;
      const x1 = Math.max(0, Math.min(Math.round(box.x1 + dx), width - w));
      const y1 = Math.max(0, Math.min(Math.round(box.y1 + dy), height - h));
      return { x1, y1, x2: x1 + w, y2: y1 + h };
    }
    case 'nw': b.x1 += dx; b.y1 += dy; break;
    case 'ne': b.x2 += dx; b.y1 += dy; break;
    case 'sw': b.x1 += dx; b.y2 += dy; break;
    case 'se': b.x2 += dx; b.y2 += dy; break;
    case 'n': b.y1 += dy; break;
    case 's': b.y2 += dy; break;
    case 'w': b.x1 += dx; break;
    case 'e': b.x2 += dx; break;
  }
  return clampBox(b, width, height);
}

export function regionToBox(region: PixelBoxRegion): Box {
  return { x1: region.x1, y1: region.y1, x2: region.x2, y2: region.y2 };
}

export function boxToRegion(box: Box, original: PixelBoxRegion): PixelBoxRegion {
  return { ...original, x1: box.x1, y1: box.y1, x2: box.x2, y2: box.y2 };
}

export function boxesEqual(a: Box, b: Box): boolean {
  return a.x1 === b.x1 && a.y1 === b.y1 && a.x2 === b.x2 && a.y2 === b.y2;
}

// Thin fetch wrappers over the pipeline's local endpoints.

import type { DecisionBody, ReviewSessionWire, RunReportWire } from './types.js';

export async function fetchSession(): Promise<ReviewSessionWire | null> {
  const resp = await fetch('/session');
  if (resp.status === 404) return null;
  if (!resp.ok) throw new Error(`GET /session -> ${resp.status}`);
  return resp.json();
}

export async function fetchReport(): Promise<RunReportWire | null> {
  const resp = await fetch('/report');
  if (resp.status === 404) return null;
  if (!resp.ok) throw new Error(`GET /report -> ${resp.status}`);
  return resp.json();
}

export async function postDecision(body: DecisionBody): Promise<void> {
  const resp = await fetch('/decision', {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
  if (resp.status === 409) throw new Error('a decision was already recorded for this run');
  if (!resp.ok) {
    let message = `POST /decision -> ${resp.status}`;
    try {
      const payload = await resp.json();
      if (payload.error) message = payload.error;
    } catch {
      // keep the status-based message
    }
    throw new Error(message);
  }
}

/**
 * Pure timeline geometry: no DOM, no canvas.
 *
 * The visible window maps [startMs, endMs] onto [0, widthPx]. Tick
 * marks come straight from the timing grid (offset + n * beat / 16)
 * and are styled by their beat division: whole beats largest, then
 * 1/2, 1/4, 1/8, 1/16 progressively smaller, each division with its
 * own color (the palette community editors use).
 */

import type { Snapshot, WireNote } from "./protocol.js";

export const TICKS_PER_BEAT = 16;

export interface Viewport {
  startMs: number;
  endMs: number;
  widthPx: number;
  heightPx: number;
}

export interface TickMark {
  timeMs: number;
  x: number;
  /** 1, 2, 4, 8 or 16: the smallest division this tick belongs to. */
  division: 1 | 2 | 4 | 8 | 16;
  heightPx: number;
  color: string;
}

export interface NoteSprite {
  timeMs: number;
  x: number;
  y: number;
  radius: number;
  fill: string;
  outline: string;
  kind: WireNote["kind"];
  provenance: WireNote["provenance"];
}

export interface RegionBox {
  x: number;
  width: number;
}

const DIVISION_STYLE: Record<number, { heightPx: number; color: string }> = {
  1: { heightPx: 48, color: "#f2f2f2" },
  2: { heightPx: 36, color: "#e04b4b" },
  4: { heightPx: 28, color: "#4b7be0" },
  8: { heightPx: 20, color: "#e0d24b" },
  16: { heightPx: 14, color: "#9b59d0" },
};

const KIND_FILL: Record<WireNote["kind"], string> = {
  don: "#e8503a",
  big_don: "#e8503a",
  kat: "#3a7de8",
  big_kat: "#3a7de8",
};

export function tickIntervalMs(bpm: number): number {
  return 60000 / (bpm * TICKS_PER_BEAT);
}

export function msToX(timeMs: number, view: Viewport): number {
  return ((timeMs - view.startMs) / (view.endMs - view.startMs)) * view.widthPx;
}

export function xToMs(x: number, view: Viewport): number {
  return view.startMs + (x / view.widthPx) * (view.endMs - view.startMs);
}

/** Nearest tick time in integer ms, matching the server's snap rule
 * (nearest tick, ties to the earlier one, half-up rounding). */
export function snapToTickMs(timeMs: number, bpm: number, offsetMs: number): number {
  const interval = tickIntervalMs(bpm);
  const rel = (timeMs - offsetMs) / interval;
  const lo = Math.floor(rel);
  const tLo = offsetMs + lo * interval;
  const tHi = offsetMs + (lo + 1) * interval;
  const tick = timeMs - tLo <= tHi - timeMs ? tLo : tHi;
  return Math.floor(tick + 0.5);
}

function divisionOf(tickIndex: number): 1 | 2 | 4 | 8 | 16 {
  // tick 0 of each beat is the beat itself, tick 8 the half, etc.
  const inBeat = ((tickIndex % TICKS_PER_BEAT) + TICKS_PER_BEAT) % TICKS_PER_BEAT;
  if (inBeat === 0) return 1;
  if (inBeat % 8 === 0) return 2;
  if (inBeat % 4 === 0) return 4;
  if (inBeat % 2 === 0) return 8;
  return 16;
}

export function tickMarks(bpm: number, offsetMs: number, view: Viewport): TickMark[] {
  const interval = tickIntervalMs(bpm);
  const first = Math.ceil((view.startMs - offsetMs) / interval);
  const last = Math.floor((view.endMs - offsetMs) / interval);
  const marks: TickMark[] = [];
  for (let n = first; n <= last; n++) {
    const timeMs = offsetMs + n * interval;
    const division = divisionOf(n);
    const style = DIVISION_STYLE[division]!;
    marks.push({
      timeMs,
      x: msToX(timeMs, view),
      division,
      heightPx: style.heightPx,
      color: style.color,
    });
  }
  return marks;
}

export function noteSprites(notes: readonly WireNote[], view: Viewport): NoteSprite[] {
  const centerY = view.heightPx / 2;
  return notes
    .filter((n) => n.time_ms >= view.startMs && n.time_ms <= view.endMs)
    .map((n) => ({
      timeMs: n.time_ms,
      x: msToX(n.time_ms, view),
      y: centerY,
      radius: n.kind === "big_don" || n.kind === "big_kat" ? 16 : 11,
      fill: KIND_FILL[n.kind],
      // provenance styling: AI contributions get a distinct outline
      outline: n.provenance === "ai" ? "#ffd34d" : "#ffffff",
      kind: n.kind,
      provenance: n.provenance,
    }));
}

export function regionBox(
  selection: { startMs: number; endMs: number } | null,
  view: Viewport,
): RegionBox | null {
  if (!selection) return null;
  const a = Math.max(selection.startMs, view.startMs);
  const b = Math.min(selection.endMs, view.endMs);
  if (b <= a) return null;
  return { x: msToX(a, view), width: msToX(b, view) - msToX(a, view) };
}

/** Full render model: what a painter needs, and what tests assert on. */
export interface TimelineModel {
  ticks: TickMark[];
  sprites: NoteSprite[];
  region: RegionBox | null;
  playheadX: number | null;
}

export function timelineModel(
  snapshot: Snapshot,
  view: Viewport,
  selection: { startMs: number; endMs: number } | null,
  playheadMs: number | null,
): TimelineModel {
  const inWindow =
    playheadMs !== null && playheadMs >= view.startMs && playheadMs <= view.endMs;
  return {
    ticks: tickMarks(snapshot.song.bpm, snapshot.song.offset_ms, view),
    sprites: noteSprites(snapshot.notes, view),
    region: regionBox(selection, view),
    playheadX: inWindow ? msToX(playheadMs, view) : null,
  };
}

/**
 * Playback clock and hit-sound scheduling.
 *
 * The playhead follows the audio clock when song audio is available;
 * without audio a plain monotonic clock drives a metronome fallback
 * built from the timing grid. Scheduling is pulled out into a pure
 * helper (dueNotes) so timing behavior is testable without WebAudio.
 */

import type { Snapshot, WireNote } from "./protocol.js";
import { tickIntervalMs, TICKS_PER_BEAT } from "./layout.js";

export interface ClockSource {
  /** Current song position in ms, or null when stopped. */
  positionMs(): number | null;
}

/** Notes whose time falls in (prevMs, nowMs]; the per-kind click list. */
export function dueNotes(
  notes: readonly WireNote[],
  prevMs: number,
  nowMs: number,
): WireNote[] {
  return notes.filter((n) => n.time_ms > prevMs && n.time_ms <= nowMs);
}

/** Whole-beat metronome times in (prevMs, nowMs] from the grid. */
export function dueBeats(
  bpm: number,
  offsetMs: number,
  prevMs: number,
  nowMs: number,
): number[] {
  const beatMs = tickIntervalMs(bpm) * TICKS_PER_BEAT;
  const first = Math.floor((prevMs - offsetMs) / beatMs) + 1;
  const out: number[] = [];
  for (let n = first; offsetMs + n * beatMs <= nowMs; n++) {
    const t = offsetMs + n * beatMs;
    if (t > prevMs) out.push(t);
  }
  return out;
}

export type HitSoundPlayer = (kind: WireNote["kind"] | "metronome") => void;

/**
 * Drives the playhead and fires hit sounds as the clock crosses note
 * times. Call tick() from an animation frame loop; it returns the
 * playhead position for rendering (null while stopped).
 */
export class Transport {
  private lastMs: number | null = null;

  constructor(
    private readonly clock: ClockSource,
    private readonly play: HitSoundPlayer,
    private readonly metronomeFallback: boolean,
  ) {}

  tick(snapshot: Snapshot | null): number | null {
    const now = this.clock.positionMs();
    if (now === null || !snapshot) {
      this.lastMs = null;
      return null;
    }
    const prev = this.lastMs ?? now;
    this.lastMs = now;
    if (now > prev) {
      for (const note of dueNotes(snapshot.notes, prev, now)) {
        this.play(note.kind);
      }
      if (this.metronomeFallback) {
        for (const _beat of dueBeats(snapshot.song.bpm, snapshot.song.offset_ms, prev, now)) {
          this.play("metronome");
        }
      }
    }
    return now;
  }
}

/**
 * Session store: the last authoritative snapshot plus optimistic
 * echoes for in-flight edits.
 *
 * The rendered note list is a pure function of (snapshot, pending
 * echoes): reconnecting and refetching the snapshot reproduces the
 * identical view. Echoes never mutate the snapshot; a server ack (the
 * reply bundles a fresh snapshot) retires its echo.
 */

import type { NoteKindName, Snapshot, WireNote } from "./protocol.js";
import { snapToTickMs } from "./layout.js";

export interface PendingEcho {
  id: number;
  op: "place" | "delete";
  timeMs: number;
  kind?: NoteKindName;
}

export class SessionStore {
  snapshot: Snapshot | null = null;
  private pending = new Map<number, PendingEcho>();
  private nextEchoId = 1;

  applySnapshot(snapshot: Snapshot): void {
    this.snapshot = snapshot;
  }

  /** Register an optimistic echo; returns its id for retirement. */
  addEcho(op: "place" | "delete", timeMs: number, kind?: NoteKindName): number {
    const id = this.nextEchoId++;
    this.pending.set(id, { id, op, timeMs, kind });
    return id;
  }

  /** Retire an echo, applying the server's authoritative snapshot. */
  resolveEcho(id: number, snapshot: Snapshot): void {
    this.pending.delete(id);
    this.snapshot = snapshot;
  }

  /** Drop an echo without a snapshot (rejection or transport error). */
  revertEcho(id: number): void {
    this.pending.delete(id);
  }

  get pendingCount(): number {
    return this.pending.size;
  }

  /** The note list the timeline should render right now. */
  visibleNotes(): WireNote[] {
    if (!this.snapshot) return [];
    const song = this.snapshot.song;
    let notes = [...this.snapshot.notes];
    for (const echo of this.pending.values()) {
      const snapped = snapToTickMs(echo.timeMs, song.bpm, song.offset_ms);
      if (echo.op === "place" && echo.kind) {
        if (!notes.some((n) => n.time_ms === snapped)) {
          notes.push({ time_ms: snapped, kind: echo.kind, provenance: "human" });
        }
      } else if (echo.op === "delete") {
        notes = notes.filter((n) => Math.abs(n.time_ms - snapped) > 11.5);
      }
    }
    notes.sort((a, b) => a.time_ms - b.time_ms);
    return notes;
  }
}

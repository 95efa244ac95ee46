import { describe, expect, it } from "vitest";

import { Transport, dueBeats, dueNotes } from "../src/playback.js";
import type { Snapshot, WireNote } from "../src/protocol.js";

const NOTES: WireNote[] = [
  { time_ms: 500, kind: "don", provenance: "human" },
  { time_ms: 1000, kind: "kat", provenance: "ai" },
  { time_ms: 1500, kind: "big_don", provenance: "human" },
];

function snapshot(): Snapshot {
  return {
    session_id: "s",
    phase: "editing",
    strategy: "naive",
    song: { song_id: "x", bpm: 120, offset_ms: 0, duration_ms: 24000, audio: null },
    notes: NOTES,
    retrain_count: 0,
    buffer_size: 0,
    frame_count: 1044,
  };
}

describe("dueNotes", () => {
  it("fires a note as the clock crosses its time", () => {
    expect(dueNotes(NOTES, 990, 1010).map((n) => n.kind)).toEqual(["kat"]);
  });

  it("fires nothing when the clock has not moved past a note", () => {
    expect(dueNotes(NOTES, 0, 499)).toHaveLength(0);
  });

  it("never double-fires across adjacent windows", () => {
    const first = dueNotes(NOTES, 0, 1000);
    const second = dueNotes(NOTES, 1000, 2000);
    const all = [...first, ...second].map((n) => n.time_ms);
    expect(all).toEqual([500, 1000, 1500]);
  });
});

describe("dueBeats", () => {
  it("emits whole beats from the grid", () => {
    // bpm 120: beats every 500ms
    expect(dueBeats(120, 0, 0, 1600)).toEqual([500, 1000, 1500]);
  });

  it("honors the grid offset", () => {
    expect(dueBeats(120, 100, 0, 1200)).toEqual([100, 600, 1100]);
  });
});

describe("Transport", () => {
  it("advances with the clock and fires each crossed note within 20ms", () => {
    let now: number | null = 0;
    const played: string[] = [];
    const transport = new Transport(
      { positionMs: () => now },
      (kind) => played.push(kind),
      false,
    );
    // step the clock in 16ms animation frames past the 1000ms note
    for (now = 960; now <= 1040; now += 16) {
      const pos = transport.tick(snapshot());
      expect(pos).toBe(now);
    }
    expect(played).toEqual(["kat"]);
    // the note fired on the frame whose window contained 1000ms: the
    // frame granularity bounds the timing error at 16ms < 20ms
  });

  it("pausing freezes the playhead", () => {
    let now: number | null = 500;
    const transport = new Transport({ positionMs: () => now }, () => {}, false);
    expect(transport.tick(snapshot())).toBe(500);
    now = null; // paused
    expect(transport.tick(snapshot())).toBeNull();
  });

  it("falls back to the metronome when enabled", () => {
    const played: string[] = [];
    let now = 0;
    const transport = new Transport(
      { positionMs: () => now },
      (kind) => played.push(kind),
      true,
    );
    transport.tick(snapshot());
    now = 510;
    transport.tick(snapshot());
    expect(played).toContain("metronome");
  });
});

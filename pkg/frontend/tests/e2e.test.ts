/**
 * End-to-end against the real server: demo data is generated, the
 * server process is spawned, and the documented study flow runs over
 * the actual wire protocol. Asserts both the server-side log contents
 * and that the rendered timeline matches the authoritative snapshot.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { EditorClient } from "../src/protocol.js";
import type { Snapshot, WireNote } from "../src/protocol.js";
import { SessionStore } from "../src/state.js";
import { timelineModel, msToX } from "../src/layout.js";
import type { Viewport } from "../src/layout.js";

const PYTHON = process.env.TAIKODUET_PYTHON ?? "python3";
const PORT = 8873;
const BASE = `http://127.0.0.1:${PORT}`;

let workDir: string;
let server: ChildProcess | null = null;
const client = new EditorClient(BASE);

async function waitForHealthy(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/healthz`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("server did not become healthy in time");
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "taikoduet-e2e-"));
  const demo = spawnSync(PYTHON, ["-m", "taikoduet.cli", "demo", "--out", workDir], {
    encoding: "utf-8",
  });
  if (demo.status !== 0) {
    throw new Error(`demo build failed:\n${demo.stdout}\n${demo.stderr}`);
  }
  server = spawn(
    PYTHON,
    [
      "-m", "taikoduet.cli", "serve",
      "--port", String(PORT),
      "--base-model", join(workDir, "base_model.tdml"),
      "--songs", join(workDir, "songs"),
      "--study-config", join(workDir, "study.json"),
      "--out", join(workDir, "sessions"),
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealthy(20000);
}, 60000);

afterAll(() => {
  server?.kill("SIGTERM");
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

describe("editor against the live server", () => {
  it("runs the full co-creative flow and the log matches exactly", async () => {
    const store = new SessionStore();
    const snapshot = await client.createSession({ strategy: "static", songId: "demo_a" });
    store.applySnapshot(snapshot);
    const sid = snapshot.session_id;

    // place 3 notes (clicks at off-tick times; server snaps)
    for (const [timeMs, kind] of [
      [47, "don"],
      [560, "kat"],
      [1070, "big_don"],
    ] as const) {
      const echo = store.addEcho("place", timeMs, kind);
      const result = await client.place(sid, timeMs, kind);
      expect(result.ack.accepted).toBe(true);
      store.resolveEcho(echo, result.snapshot);
    }

    // pass a region to the AI
    const pass = await client.passToAi(sid, 2000, 6000);
    store.applySnapshot(pass.snapshot);
    expect(pass.fill.placed.length).toBeGreaterThan(0);
    for (const note of pass.fill.placed) {
      expect(note.time_ms).toBeGreaterThanOrEqual(2000);
      expect(note.time_ms).toBeLessThanOrEqual(6000);
      expect(note.provenance).toBe("ai");
    }

    // delete one AI note
    const victim = pass.fill.placed[0]!;
    const del = await client.delete(sid, victim.time_ms);
    expect(del.ack.accepted).toBe(true);
    expect(del.ack.removed!.provenance).toBe("ai");
    store.applySnapshot(del.snapshot);

    // finish
    const finished = await client.finish(sid);
    store.applySnapshot(finished.snapshot);
    expect(finished.snapshot.phase).toBe("finished");
    expect(finished.report.end_turn_count).toBe(1);
    expect(finished.report.human_notes_placed).toBe(3);
    expect(finished.report.ai_notes_kept_pct).toBeCloseTo(
      ((pass.fill.placed.length - 1) / pass.fill.placed.length) * 100,
      6,
    );

    // the server log shows exactly those events in order
    const events = await client.fetchLog(sid);
    expect(events.map((e) => e.kind)).toEqual([
      "session_created",
      "place",
      "place",
      "place",
      "pass_to_ai",
      "ai_fill",
      "delete",
      "finish",
    ]);

    // the rendered chart matches the server snapshot: every note in the
    // final snapshot appears as exactly one sprite at its mapped x
    const final = await client.snapshot(sid);
    const view: Viewport = {
      startMs: 0,
      endMs: final.song.duration_ms,
      widthPx: 2400,
      heightPx: 220,
    };
    const model = timelineModel(
      { ...final, notes: store.visibleNotes() },
      view,
      null,
      null,
    );
    expect(store.pendingCount).toBe(0);
    expect(model.sprites.length).toBe(final.notes.length);
    const byTime = new Map(model.sprites.map((s) => [s.timeMs, s]));
    for (const note of final.notes) {
      const sprite = byTime.get(note.time_ms)!;
      expect(sprite).toBeDefined();
      expect(sprite.x).toBeCloseTo(msToX(note.time_ms, view), 6);
      expect(sprite.provenance).toBe(note.provenance);
    }
  }, 60000);

  it("snapping visibility: off-tick click renders within 1px of its tick", async () => {
    const snapshot = await client.createSession({ strategy: "static", songId: "demo_b" });
    const sid = snapshot.session_id;

    const clickMs = 1507; // off-tick for bpm 150 (ticks every 25ms)
    const result = await client.place(sid, clickMs, "kat");
    expect(result.ack.accepted).toBe(true);
    const snapped = result.ack.snapped_ms!;
    expect(snapped).not.toBe(clickMs);

    const view: Viewport = { startMs: 1000, endMs: 3000, widthPx: 1200, heightPx: 220 };
    const model = timelineModel(result.snapshot, view, null, null);
    const sprite = model.sprites.find((s) => s.timeMs === snapped)!;
    expect(sprite).toBeDefined();
    const nearestTick = model.ticks.reduce((best, t) =>
      Math.abs(t.x - sprite.x) < Math.abs(best.x - sprite.x) ? t : best,
    );
    expect(Math.abs(sprite.x - nearestTick.x)).toBeLessThanOrEqual(1.0);
  }, 30000);

  it("server rejection reconciles the optimistic echo", async () => {
    const snapshot = await client.createSession({ strategy: "static", songId: "demo_a" });
    const store = new SessionStore();
    store.applySnapshot(snapshot);
    const sid = snapshot.session_id;

    const first = await client.place(sid, 63, "don");
    store.applySnapshot(first.snapshot);

    // same frame again: optimistic echo appears, server rejects, echo reverts
    const echo = store.addEcho("place", 60, "kat");
    const second = await client.place(sid, 60, "kat");
    expect(second.ack.accepted).toBe(false);
    if (second.ack.accepted) store.resolveEcho(echo, second.snapshot);
    else store.revertEcho(echo);

    const notes: WireNote[] = store.visibleNotes();
    expect(notes).toEqual(first.snapshot.notes);
  }, 30000);
});

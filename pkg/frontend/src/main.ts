/**
 * Editor entry point: wires the canvas timeline, note palette, region
 * selection, playback, and the wire-protocol client together.
 *
 * All chart state lives on the server; this file only forwards
 * interactions and renders the latest snapshot (plus optimistic echoes
 * that are reconciled on every reply).
 */

import { EditorClient, ProtocolError } from "./protocol.js";
import type { NoteKindName, Snapshot } from "./protocol.js";
import { timelineModel, xToMs, msToX } from "./layout.js";
import type { Viewport } from "./layout.js";
import { SessionStore } from "./state.js";
import { Transport, dueBeats } from "./playback.js";
import { paint } from "./render.js";

const client = new EditorClient("");
const store = new SessionStore();

const canvas = document.getElementById("timeline") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const toastEl = document.getElementById("toast")!;
const audioEl = document.getElementById("song-audio") as HTMLAudioElement;

let sessionId: string | null = null;
let windowStartMs = 0;
let windowSpanMs = 8000;
let selection: { startMs: number; endMs: number } | null = null;
let dragAnchorMs: number | null = null;
let selectedKind: NoteKindName = "don";
let audioAvailable = false;

function view(): Viewport {
  return {
    startMs: windowStartMs,
    endMs: windowStartMs + windowSpanMs,
    widthPx: canvas.width,
    heightPx: canvas.height,
  };
}

function toast(message: string): void {
  toastEl.textContent = message;
  toastEl.classList.add("visible");
  setTimeout(() => toastEl.classList.remove("visible"), 2500);
}

function renderStatus(snapshot: Snapshot | null): void {
  if (!snapshot) {
    statusEl.textContent = "not connected";
    return;
  }
  statusEl.textContent =
    `${snapshot.song.song_id} | ${snapshot.strategy} | phase ${snapshot.phase}` +
    ` | retrains ${snapshot.retrain_count} | buffer ${snapshot.buffer_size}`;
}

// -- audio ----------------------------------------------------------

const audioCtx = new AudioContext();

function clickSound(kind: NoteKindName | "metronome"): void {
  const osc = audioCtx.createOscillator();
  const gain = audioCtx.createGain();
  const freq =
    kind === "metronome" ? 1200 : kind === "don" || kind === "big_don" ? 440 : 660;
  osc.frequency.value = freq;
  gain.gain.setValueAtTime(kind.startsWith("big") ? 0.5 : 0.3, audioCtx.currentTime);
  gain.gain.exponentialRampToValueAtTime(0.001, audioCtx.currentTime + 0.08);
  osc.connect(gain).connect(audioCtx.destination);
  osc.start();
  osc.stop(audioCtx.currentTime + 0.09);
}

let metronomeStart: number | null = null;

const transportClock = {
  positionMs(): number | null {
    if (audioAvailable) {
      return audioEl.paused ? null : audioEl.currentTime * 1000;
    }
    return metronomeStart === null ? null : performance.now() - metronomeStart;
  },
};

const transport = new Transport(transportClock, clickSound, /* metronome */ true);

function togglePlayback(): void {
  if (audioAvailable) {
    if (audioEl.paused) void audioEl.play();
    else audioEl.pause();
  } else {
    metronomeStart = metronomeStart === null ? performance.now() : null;
  }
  void audioCtx.resume();
}

// -- interactions ---------------------------------------------------

async function guarded<T>(work: () => Promise<T>): Promise<T | null> {
  try {
    return await work();
  } catch (err) {
    if (err instanceof ProtocolError) toast(err.message);
    else toast(String(err));
    return null;
  }
}

canvas.addEventListener("click", (event) => {
  if (!sessionId || !store.snapshot) return;
  if (event.shiftKey) return; // shift-click belongs to region selection
  const timeMs = Math.round(xToMs(event.offsetX, view()));
  const echo = store.addEcho("place", timeMs, selectedKind);
  draw();
  void guarded(() => client.place(sessionId!, timeMs, selectedKind)).then((result) => {
    if (!result) {
      store.revertEcho(echo);
    } else {
      store.resolveEcho(echo, result.snapshot);
      if (!result.ack.accepted) toast(`rejected: ${result.ack.reason}`);
    }
    draw();
  });
});

canvas.addEventListener("contextmenu", (event) => {
  event.preventDefault();
  if (!sessionId || !store.snapshot) return;
  const timeMs = Math.round(xToMs(event.offsetX, view()));
  const echo = store.addEcho("delete", timeMs);
  draw();
  void guarded(() => client.delete(sessionId!, timeMs)).then((result) => {
    if (!result) store.revertEcho(echo);
    else store.resolveEcho(echo, result.snapshot);
    draw();
  });
});

canvas.addEventListener("mousedown", (event) => {
  if (event.button !== 0 || !event.shiftKey) return;
  dragAnchorMs = xToMs(event.offsetX, view());
});

canvas.addEventListener("mousemove", (event) => {
  if (dragAnchorMs === null) return;
  const current = xToMs(event.offsetX, view());
  selection = {
    startMs: Math.round(Math.min(dragAnchorMs, current)),
    endMs: Math.round(Math.max(dragAnchorMs, current)),
  };
  draw();
});

window.addEventListener("mouseup", () => {
  dragAnchorMs = null;
});

canvas.addEventListener("wheel", (event) => {
  event.preventDefault();
  const span = windowSpanMs;
  windowStartMs = Math.max(0, windowStartMs + Math.sign(event.deltaY) * span * 0.15);
  const duration = store.snapshot?.song.duration_ms ?? Infinity;
  windowStartMs = Math.min(windowStartMs, Math.max(0, duration - span));
  draw();
});

for (const button of document.querySelectorAll<HTMLButtonElement>(".palette button")) {
  button.addEventListener("click", () => {
    selectedKind = button.dataset.kind as NoteKindName;
    document.querySelectorAll(".palette button").forEach((b) => b.classList.remove("active"));
    button.classList.add("active");
  });
}

document.getElementById("pass-to-ai")!.addEventListener("click", () => {
  if (!sessionId) return;
  if (!selection) {
    toast("shift-drag to select a region first");
    return;
  }
  const region = selection;
  void guarded(() => client.passToAi(sessionId!, region.startMs, region.endMs)).then(
    (result) => {
      if (result) {
        store.applySnapshot(result.snapshot);
        selection = null;
        toast(`AI placed ${result.fill.placed.length} notes`);
      }
      draw();
    },
  );
});

document.getElementById("play")!.addEventListener("click", togglePlayback);

document.getElementById("finish")!.addEventListener("click", () => {
  if (!sessionId) return;
  void guarded(() => client.finish(sessionId!)).then((result) => {
    if (result) {
      store.applySnapshot(result.snapshot);
      const kept = result.report.ai_notes_kept_pct;
      toast(
        `finished: ${result.report.end_turn_count} turns, ` +
          `AI notes kept ${kept === null ? "n/a" : kept.toFixed(1) + "%"}`,
      );
    }
    draw();
  });
});

document.getElementById("connect")!.addEventListener("click", () => {
  const studyRaw = (document.getElementById("study-id") as HTMLInputElement).value;
  const leg = (document.getElementById("leg") as HTMLSelectElement).value as
    | "first"
    | "second";
  void guarded(() =>
    client.createSession(studyRaw === "" ? {} : { studyId: Number(studyRaw), leg }),
  ).then((snapshot) => {
    if (!snapshot) return;
    sessionId = snapshot.session_id;
    store.applySnapshot(snapshot);
    windowStartMs = 0;
    if (snapshot.song.audio) {
      audioEl.src = `/songs/${snapshot.song.audio}`;
      audioAvailable = true;
    } else {
      audioAvailable = false;
    }
    draw();
  });
});

// -- render loop ----------------------------------------------------

function draw(): void {
  const snapshot = store.snapshot;
  renderStatus(snapshot);
  if (!snapshot) return;
  const display: Snapshot = { ...snapshot, notes: store.visibleNotes() };
  const playhead = transport.tick(snapshot);
  if (playhead !== null && (playhead < windowStartMs || playhead > windowStartMs + windowSpanMs)) {
    windowStartMs = Math.max(0, playhead - windowSpanMs * 0.2);
  }
  paint(ctx, timelineModel(display, view(), selection, playhead), canvas.width, canvas.height);
}

function frame(): void {
  draw();
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);

export { dueBeats, msToX }; // re-exported for manual console poking

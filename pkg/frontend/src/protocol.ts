/**
 * Wire protocol client for the editor server.
 *
 * Every request is a POST /api/message with {v, type, session_id,
 * payload}; replies mirror the type as "<type>_result" or carry type
 * "error" with a message. The server is authoritative: every reply
 * bundles a full snapshot which the UI treats as truth.
 */

export const PROTOCOL_VERSION = 1;

export type NoteKindName = "don" | "kat" | "big_don" | "big_kat";
export type Provenance = "human" | "ai";

export interface WireNote {
  time_ms: number;
  kind: NoteKindName;
  provenance: Provenance;
}

export interface SongMeta {
  song_id: string;
  bpm: number;
  offset_ms: number;
  duration_ms: number;
  audio: string | null;
}

export interface Snapshot {
  session_id: string;
  phase: "editing" | "ai_turn" | "finished";
  strategy: string;
  song: SongMeta;
  notes: WireNote[];
  retrain_count: number;
  buffer_size: number;
  frame_count: number;
}

export interface EditAck {
  accepted: boolean;
  reason: string | null;
  snapped_ms: number | null;
  frame: number | null;
  removed: WireNote | null;
}

export interface FillResult {
  start_ms: number;
  end_ms: number;
  cleared: WireNote[];
  placed: WireNote[];
}

export interface SessionReport {
  session_id: string;
  song_id: string;
  strategy: string;
  time_spent_mins: number;
  end_turn_count: number;
  human_notes_placed: number;
  human_notes_kept_pct: number | null;
  ai_notes_placed: number;
  ai_notes_kept_pct: number | null;
  retrain_count: number;
  overall_pattern_score: number | null;
}

export interface LogEvent {
  seq: number;
  ts_ms: number;
  kind: string;
  payload: Record<string, unknown>;
}

interface WireMessage {
  v: number;
  type: string;
  session_id: string | null;
  payload: Record<string, unknown>;
}

export class ProtocolError extends Error {}

export class EditorClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async send<T>(
    type: string,
    sessionId: string | null,
    payload: Record<string, unknown>,
  ): Promise<T> {
    const body: WireMessage = {
      v: PROTOCOL_VERSION,
      type,
      session_id: sessionId,
      payload,
    };
    const response = await this.fetchFn(`${this.baseUrl}/api/message`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ProtocolError(`transport failure: HTTP ${response.status}`);
    }
    const doc = (await response.json()) as WireMessage;
    if (doc.type === "error") {
      throw new ProtocolError(String((doc.payload as { message?: string }).message ?? "unknown"));
    }
    return doc.payload as T;
  }

  async createSession(options: {
    studyId?: number;
    leg?: "first" | "second";
    strategy?: string;
    songId?: string;
  }): Promise<Snapshot> {
    const payload: Record<string, unknown> = {};
    if (options.studyId !== undefined) payload.study_id = options.studyId;
    if (options.leg) payload.leg = options.leg;
    if (options.strategy) payload.strategy = options.strategy;
    if (options.songId) payload.song_id = options.songId;
    const out = await this.send<{ snapshot: Snapshot }>("create_session", null, payload);
    return out.snapshot;
  }

  async place(
    sessionId: string,
    timeMs: number,
    kind: NoteKindName,
  ): Promise<{ ack: EditAck; snapshot: Snapshot }> {
    return this.send("place", sessionId, { time_ms: timeMs, kind });
  }

  async delete(sessionId: string, timeMs: number): Promise<{ ack: EditAck; snapshot: Snapshot }> {
    return this.send("delete", sessionId, { time_ms: timeMs });
  }

  async passToAi(
    sessionId: string,
    startMs: number,
    endMs: number,
  ): Promise<{ fill: FillResult; snapshot: Snapshot }> {
    return this.send("pass_to_ai", sessionId, { start_ms: startMs, end_ms: endMs });
  }

  async snapshot(sessionId: string): Promise<Snapshot> {
    const out = await this.send<{ snapshot: Snapshot }>("snapshot", sessionId, {});
    return out.snapshot;
  }

  async finish(sessionId: string): Promise<{ report: SessionReport; snapshot: Snapshot }> {
    return this.send("finish", sessionId, {});
  }

  async listSongs(): Promise<SongMeta[]> {
    const out = await this.send<{ songs: SongMeta[] }>("list_songs", null, {});
    return out.songs;
  }

  async fetchLog(sessionId: string): Promise<LogEvent[]> {
    const response = await this.fetchFn(`${this.baseUrl}/api/log/${sessionId}`);
    if (!response.ok) {
      throw new ProtocolError(`transport failure: HTTP ${response.status}`);
    }
    const doc = (await response.json()) as { events: LogEvent[] };
    return doc.events;
  }
}

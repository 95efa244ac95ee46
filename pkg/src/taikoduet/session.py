"""Interactive co-editing sessions.

The server is authoritative for all state: the UI only sends edits and
turn-passes and renders snapshots. Every session owns a private model
replica, an adaptation state, and an append-only event log from which
the study statistics (time spent, end-turn count, notes kept) and a
byte-exact replay of the whole co-creative loop can be derived.

Log file: one JSON document per line, schema
    {"v": 1, "seq": n, "ts_ms": t, "kind": k, "payload": {...}}
with kind one of session_created, place, delete, pass_to_ai, retrain,
retrain_failure, ai_fill, finish.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .adaptation import AdaptationState, RetrainError, StrategyKind, add_instances
from .chart import (
    Chart,
    Note,
    NoteKind,
    TimingGrid,
    chart_to_frame_sequence,
    quantize_to_frame,
    snap_to_tick,
)
from .chartio import serialize_chart
from .features import FeatureMatrix, load_features
from .model import ModelParams, TrainConfig, load_model
from .patterns import PATTERN_FRAMES, overall_pattern_score
from .regions import make_training_instances, predict_region

LOG_VERSION = 1

EVENT_KINDS = (
    "session_created",
    "place",
    "delete",
    "pass_to_ai",
    "retrain",
    "retrain_failure",
    "ai_fill",
    "finish",
)

PHASE_EDITING = "editing"
PHASE_AI_TURN = "ai_turn"
PHASE_FINISHED = "finished"


class SessionError(RuntimeError):
    """Protocol misuse: wrong phase, unknown song, bad region."""


class SessionLogError(ValueError):
    """Malformed event stream; carries the offending event index."""

    def __init__(self, index: int, message: str):
        super().__init__(f"event {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class LogEvent:
    seq: int
    ts_ms: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"v": LOG_VERSION, "seq": self.seq, "ts_ms": self.ts_ms,
             "kind": self.kind, "payload": self.payload},
            sort_keys=True,
        )


class SessionLog:
    """Append-only event list, optionally mirrored to a .jsonl file."""

    def __init__(self, sink_path: Path | None = None):
        self.events: list[LogEvent] = []
        self.sink_path = sink_path

    def append(self, kind: str, payload: dict, ts_ms: int) -> LogEvent:
        if kind not in EVENT_KINDS:
            raise SessionLogError(len(self.events), f"unknown event kind {kind!r}")
        event = LogEvent(seq=len(self.events), ts_ms=ts_ms, kind=kind, payload=payload)
        self.events.append(event)
        if self.sink_path is not None:
            with open(self.sink_path, "a", encoding="utf-8") as fh:
                fh.write(event.to_json() + "\n")
        return event

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    @staticmethod
    def parse_jsonl(text: str) -> list[LogEvent]:
        events = []
        for i, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SessionLogError(i, f"not valid JSON: {exc}") from exc
            if doc.get("v") != LOG_VERSION:
                raise SessionLogError(i, "missing or unsupported log version")
            events.append(
                LogEvent(seq=doc["seq"], ts_ms=doc["ts_ms"], kind=doc["kind"],
                         payload=doc["payload"])
            )
        return events


@dataclass(frozen=True)
class StudyConfig:
    """Counterbalanced condition assignment for the two-leg study.

    study_id % 4 selects one of the four (song order x strategy order)
    combinations, so any 4 consecutive ids cover all four exactly once.
    """

    songs: tuple[str, str]
    strategies: tuple[StrategyKind, StrategyKind]
    delta: int
    train_cfg: TrainConfig

    def condition(self, study_id: int, leg: str) -> tuple[str, StrategyKind]:
        if study_id < 0:
            raise SessionError(f"study_id must be non-negative, got {study_id}")
        if leg not in ("first", "second"):
            raise SessionError(f"leg must be 'first' or 'second', got {leg!r}")
        combo = study_id % 4
        song_flip = combo & 1
        strategy_flip = (combo >> 1) & 1
        idx = 0 if leg == "first" else 1
        song = self.songs[idx ^ song_flip]
        strategy = self.strategies[idx ^ strategy_flip]
        return song, strategy

    @staticmethod
    def from_file(path) -> "StudyConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        train = doc.get("train", {})
        return StudyConfig(
            songs=tuple(doc["songs"]),
            strategies=tuple(StrategyKind(s) for s in doc["strategies"]),
            delta=int(doc.get("delta", 1024)),
            train_cfg=TrainConfig(
                learning_rate=float(train.get("learning_rate", 1e-3)),
                max_epochs=int(train.get("max_epochs", 5)),
                batch_size=int(train.get("batch_size", 4)),
                seed=int(train.get("seed", 0)),
            ),
        )


@dataclass(frozen=True)
class SongInfo:
    song_id: str
    bpm: float
    offset_ms: int
    duration_ms: int
    features: FeatureMatrix
    audio_file: str | None = None

    @staticmethod
    def from_manifest(path) -> "SongInfo":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        features = load_features(path.parent / doc["features"])
        return SongInfo(
            song_id=doc["song_id"],
            bpm=float(doc["bpm"]),
            offset_ms=int(doc["offset_ms"]),
            duration_ms=int(doc["duration_ms"]),
            features=features,
            audio_file=doc.get("audio"),
        )


@dataclass(frozen=True)
class EditAck:
    accepted: bool
    reason: str | None = None
    snapped_ms: int | None = None
    frame: int | None = None
    removed: dict | None = None


@dataclass
class Session:
    session_id: str
    study_id: int | None
    leg: str | None
    song: SongInfo
    strategy: StrategyKind
    chart: Chart
    model: ModelParams
    adaptation: AdaptationState
    log: SessionLog
    phase: str = PHASE_EDITING
    edited_frames: set[int] = field(default_factory=set)

    @property
    def grid(self) -> TimingGrid:
        return self.chart.grid

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "phase": self.phase,
            "strategy": self.strategy.value,
            "song": {
                "song_id": self.song.song_id,
                "bpm": self.song.bpm,
                "offset_ms": self.song.offset_ms,
                "duration_ms": self.song.duration_ms,
                "audio": self.song.audio_file,
            },
            "notes": [_note_dict(n) for n in self.chart.notes],
            "retrain_count": self.adaptation.retrain_count,
            "buffer_size": len(self.adaptation.buffer),
            "frame_count": self.chart.frame_count,
        }


def _note_dict(note: Note) -> dict:
    return {"time_ms": note.time_ms, "kind": note.kind.value, "provenance": note.provenance}


class SessionManager:
    """Owns the live sessions and everything they need.

    All per-session mutations go through one manager call at a time; the
    server layer serializes calls per session.
    """

    def __init__(
        self,
        base_model_path,
        songs: dict[str, SongInfo],
        study: StudyConfig,
        out_dir=None,
        clock=None,
    ):
        self.base_model_path = Path(base_model_path)
        self.songs = songs
        self.study = study
        self.out_dir = Path(out_dir) if out_dir else None
        self.clock = clock or (lambda: int(time.time() * 1000))
        self.sessions: dict[str, Session] = {}
        self.songs_dir: Path | None = None
        # fail fast on a missing or corrupt base model
        load_model(self.base_model_path)

    @staticmethod
    def from_dirs(base_model_path, songs_dir, study_config_path, out_dir=None, clock=None):
        songs = {}
        for manifest in sorted(Path(songs_dir).glob("*.song.json")):
            info = SongInfo.from_manifest(manifest)
            songs[info.song_id] = info
        if not songs:
            raise SessionError(f"no *.song.json manifests found in {songs_dir}")
        study = StudyConfig.from_file(study_config_path)
        manager = SessionManager(base_model_path, songs, study, out_dir=out_dir, clock=clock)
        manager.songs_dir = Path(songs_dir)
        return manager

    # -- lifecycle ---------------------------------------------------

    def create_session(
        self,
        study_id: int | None = None,
        leg: str = "first",
        strategy: StrategyKind | None = None,
        song_id: str | None = None,
        session_id: str | None = None,
        persist: bool = True,
    ) -> Session:
        """Start a session, assigning the condition from the study id.

        Passing strategy and song_id explicitly bypasses study
        assignment (free mode, used outside study runs).
        """
        if strategy is None or song_id is None:
            if study_id is None:
                raise SessionError("need either a study_id or explicit strategy and song_id")
            song_id, strategy = self.study.condition(study_id, leg)
        if song_id not in self.songs:
            raise SessionError(f"unknown song {song_id!r}")
        song = self.songs[song_id]
        session_id = session_id or uuid.uuid4().hex[:12]

        model = load_model(self.base_model_path)  # private replica
        chart = Chart(
            song_id=song.song_id,
            bpm=song.bpm,
            offset_ms=song.offset_ms,
            duration_ms=song.duration_ms,
        )
        sink = None
        if self.out_dir is not None and persist:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            sink = self.out_dir / f"{session_id}.log.jsonl"
        log = SessionLog(sink_path=sink)
        session = Session(
            session_id=session_id,
            study_id=study_id,
            leg=leg if study_id is not None else None,
            song=song,
            strategy=strategy,
            chart=chart,
            model=model,
            adaptation=AdaptationState(
                strategy=strategy, delta=self.study.delta, train_cfg=self.study.train_cfg
            ),
            log=log,
        )
        log.append(
            "session_created",
            {
                "session_id": session_id,
                "study_id": study_id,
                "leg": session.leg,
                "song_id": song.song_id,
                "strategy": strategy.value,
                "delta": self.study.delta,
                "train": {
                    "learning_rate": self.study.train_cfg.learning_rate,
                    "max_epochs": self.study.train_cfg.max_epochs,
                    "batch_size": self.study.train_cfg.batch_size,
                    "seed": self.study.train_cfg.seed,
                },
            },
            self.clock(),
        )
        self.sessions[session_id] = session
        return session

    # -- editing -----------------------------------------------------

    def apply_edit(
        self, session: Session, op: str, time_ms: int, kind: NoteKind | None = None
    ) -> EditAck:
        """Dispatch a place/delete edit; the wire protocol's edit entry point."""
        if op == "place":
            if kind is None:
                raise SessionError("place needs a note kind")
            return self.place(session, time_ms, kind)
        if op == "delete":
            return self.delete(session, time_ms)
        raise SessionError(f"unknown edit op {op!r}")

    def place(self, session: Session, time_ms: int, kind: NoteKind) -> EditAck:
        self._require_phase(session, PHASE_EDITING)
        if time_ms < 0 or time_ms > session.chart.duration_ms:
            raise SessionError(f"time {time_ms} outside chart duration")
        snapped = snap_to_tick(time_ms, session.grid)
        frame = quantize_to_frame(max(snapped, 0)) if snapped >= 0 else -1
        ack: EditAck
        if snapped < 0 or snapped > session.chart.duration_ms or frame >= session.chart.frame_count:
            ack = EditAck(accepted=False, reason="snapped outside chart", snapped_ms=snapped)
        elif session.chart.note_at_frame(frame) is not None:
            ack = EditAck(accepted=False, reason=f"frame {frame} occupied",
                          snapped_ms=snapped, frame=frame)
        else:
            note = Note(time_ms=snapped, kind=kind, provenance="human")
            session.chart = session.chart.with_note(note)
            session.edited_frames.add(frame)
            ack = EditAck(accepted=True, snapped_ms=snapped, frame=frame)
        session.log.append(
            "place",
            {
                "requested_ms": time_ms,
                "kind": kind.value,
                "snapped_ms": snapped,
                "frame": ack.frame,
                "accepted": ack.accepted,
                "reason": ack.reason,
            },
            self.clock(),
        )
        return ack

    def delete(self, session: Session, time_ms: int) -> EditAck:
        self._require_phase(session, PHASE_EDITING)
        if time_ms < 0 or time_ms > session.chart.duration_ms:
            raise SessionError(f"time {time_ms} outside chart duration")
        frame = quantize_to_frame(time_ms)
        existing = session.chart.note_at_frame(frame)
        if existing is None:
            ack = EditAck(accepted=False, reason="no note in frame", frame=frame)
        else:
            session.chart = session.chart.without_frame(frame)
            session.edited_frames.add(frame)
            ack = EditAck(accepted=True, frame=frame, removed=_note_dict(existing))
        session.log.append(
            "delete",
            {"requested_ms": time_ms, "frame": frame, "accepted": ack.accepted,
             "removed": ack.removed},
            self.clock(),
        )
        return ack

    # -- the AI turn -------------------------------------------------

    def pass_to_ai(self, session: Session, start_ms: int, end_ms: int) -> dict:
        """End the human's turn: learn from their edits, then fill the region."""
        self._require_phase(session, PHASE_EDITING)
        if start_ms < 0 or end_ms > session.chart.duration_ms or start_ms >= end_ms:
            raise SessionError(f"invalid region [{start_ms}, {end_ms}]")
        session.phase = PHASE_AI_TURN

        # every frame of the minimal span covering the human's edits
        # since the last pass becomes a training instance, rests included
        span = None
        instances = []
        if session.edited_frames:
            lo, hi = min(session.edited_frames), max(session.edited_frames)
            span = [lo, hi]
            designer = str(session.study_id) if session.study_id is not None else session.session_id
            instances = make_training_instances(
                session.chart, session.song.features, range(lo, hi + 1),
                designer, session.model.config,
            )
        session.log.append(
            "pass_to_ai",
            {"start_ms": start_ms, "end_ms": end_ms, "span": span,
             "instance_count": len(instances)},
            self.clock(),
        )

        try:
            state, model, events = add_instances(session.adaptation, instances, session.model)
        except RetrainError as exc:
            for event in exc.events:
                self._log_retrain(session, event)
            session.log.append("retrain_failure", {"error": str(exc.cause)}, self.clock())
            # buffer rolled back; keep the edit markers so the next pass
            # re-attributes the same span and the trigger can re-fire
        else:
            session.adaptation = state
            session.model = model
            session.edited_frames.clear()
            for event in events:
                self._log_retrain(session, event)

        start_frame = quantize_to_frame(start_ms)
        end_frame = min(quantize_to_frame(end_ms), session.chart.frame_count - 1)
        cleared = []
        work = session.chart
        for f in range(start_frame, end_frame + 1):
            note = work.note_at_frame(f)
            if note is not None:
                cleared.append(_note_dict(note))
                work = work.without_frame(f)

        placed = predict_region(
            session.model, session.song.features, work, (start_ms, end_ms), session.grid
        )
        for note in placed:
            work = work.with_note(note)
        session.chart = work

        fill = {
            "start_ms": start_ms,
            "end_ms": end_ms,
            "cleared": cleared,
            "placed": [_note_dict(n) for n in placed],
        }
        session.log.append("ai_fill", fill, self.clock())
        session.phase = PHASE_EDITING
        return fill

    def _log_retrain(self, session: Session, event) -> None:
        session.log.append(
            "retrain",
            {
                "retrain_count_after": event.retrain_count_after,
                "buffer_size_at_trigger": event.buffer_size_at_trigger,
                "epoch_losses": list(event.epoch_losses),
                "wall_time_ms": event.wall_time_ms,
            },
            self.clock(),
        )

    # -- wrap-up -----------------------------------------------------

    def finalize_session(self, session: Session) -> dict:
        """Close the session, persist its artifacts, and report metrics."""
        if session.phase != PHASE_FINISHED:
            session.log.append("finish", {}, self.clock())
            session.phase = PHASE_FINISHED
        stats = compute_log_statistics(session.log.events)
        report = {
            "session_id": session.session_id,
            "song_id": session.song.song_id,
            "strategy": session.strategy.value,
            "time_spent_mins": stats.time_spent_mins,
            "end_turn_count": stats.end_turn_count,
            "human_notes_placed": stats.human_notes_placed,
            "human_notes_kept_pct": stats.human_notes_kept_pct,
            "ai_notes_placed": stats.ai_notes_placed,
            "ai_notes_kept_pct": stats.ai_notes_kept_pct,
            "retrain_count": session.adaptation.retrain_count,
            "overall_pattern_score": (
                overall_pattern_score(chart_to_frame_sequence(session.chart))
                if session.chart.frame_count >= PATTERN_FRAMES
                else None
            ),
        }
        if self.out_dir is not None and session.log.sink_path is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            chart_path = self.out_dir / f"{session.session_id}.chart.json"
            chart_path.write_text(serialize_chart(session.chart), encoding="utf-8")
            report_path = self.out_dir / f"{session.session_id}.report.json"
            report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")
        return report

    def _require_phase(self, session: Session, phase: str) -> None:
        if session.phase != phase:
            raise SessionError(f"operation requires phase {phase!r}, session is {session.phase!r}")

    # -- replay ------------------------------------------------------

    def replay(self, events: list[LogEvent]) -> Session:
        """Re-run a persisted event log through a fresh session.

        Only input events (place / delete / pass_to_ai / finish) are
        applied; derived events (retrain, ai_fill) are regenerated and
        must match if the loop is deterministic.
        """
        if not events or events[0].kind != "session_created":
            raise SessionLogError(0, "log must start with session_created")
        header = events[0].payload
        session = self.create_session(
            study_id=header.get("study_id"),
            leg=header.get("leg") or "first",
            strategy=StrategyKind(header["strategy"]),
            song_id=header["song_id"],
            session_id=header["session_id"] + ".replay",
            persist=False,
        )
        for event in events[1:]:
            if event.kind == "place":
                self.place(session, event.payload["requested_ms"],
                           NoteKind(event.payload["kind"]))
            elif event.kind == "delete":
                self.delete(session, event.payload["requested_ms"])
            elif event.kind == "pass_to_ai":
                self.pass_to_ai(session, event.payload["start_ms"], event.payload["end_ms"])
            elif event.kind == "finish":
                self.finalize_session(session)
        return session


@dataclass(frozen=True)
class SessionStats:
    time_spent_ms: int
    end_turn_count: int
    human_notes_placed: int
    human_notes_deleted: int
    ai_notes_placed: int
    ai_notes_deleted: int

    @property
    def time_spent_mins(self) -> float:
        return self.time_spent_ms / 60000.0

    @property
    def human_notes_kept_pct(self) -> float | None:
        return self._kept(self.human_notes_placed, self.human_notes_deleted)

    @property
    def ai_notes_kept_pct(self) -> float | None:
        return self._kept(self.ai_notes_placed, self.ai_notes_deleted)

    @staticmethod
    def _kept(placed: int, deleted: int) -> float | None:
        if placed == 0:
            return None
        return (placed - deleted) / placed * 100.0


def compute_log_statistics(events: list[LogEvent]) -> SessionStats:
    """Derive the study statistics from an event stream.

    A note counts as deleted if a later delete removed it or a later AI
    fill cleared it; each (re)placement counts separately. Deletions are
    attributed to the agent that placed the removed note.
    """
    placed = {"human": 0, "ai": 0}
    deleted = {"human": 0, "ai": 0}
    end_turns = 0
    for i, event in enumerate(events):
        if event.kind not in EVENT_KINDS:
            raise SessionLogError(i, f"unknown event kind {event.kind!r}")
        payload = event.payload
        try:
            if event.kind == "place":
                if payload["accepted"]:
                    placed["human"] += 1
            elif event.kind == "delete":
                removed = payload.get("removed")
                if removed is not None:
                    deleted[removed["provenance"]] += 1
            elif event.kind == "pass_to_ai":
                end_turns += 1
            elif event.kind == "ai_fill":
                for note in payload["cleared"]:
                    deleted[note["provenance"]] += 1
                placed["ai"] += len(payload["placed"])
        except (KeyError, TypeError) as exc:
            raise SessionLogError(i, f"malformed {event.kind} payload: {exc}") from exc
    if events:
        time_spent = events[-1].ts_ms - events[0].ts_ms
    else:
        time_spent = 0
    return SessionStats(
        time_spent_ms=time_spent,
        end_turn_count=end_turns,
        human_notes_placed=placed["human"],
        human_notes_deleted=deleted["human"],
        ai_notes_placed=placed["ai"],
        ai_notes_deleted=deleted["ai"],
    )

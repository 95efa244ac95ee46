"""Chart domain model: notes, the tick grid, and 23ms frame quantization.

A chart is the collaborative artifact: an ordered series of timed drum
notes over a song with a single constant BPM. All types here are
immutable values and all operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

#: Width of one model frame in milliseconds.
FRAME_MS = 23

#: Frame label classes: 0 is rest, 1..4 are the four note kinds.
REST_CLASS = 0
CLASS_COUNT = 5

#: Ticks per beat on the editor grid (1/16th-beat snapping).
TICKS_PER_BEAT = 16

PROVENANCE_VALUES = ("human", "ai")


class ChartError(ValueError):
    """Violation of a chart domain invariant."""


class FrameCollisionError(ChartError):
    """Two notes quantize to the same 23ms frame."""

    def __init__(self, frame: int):
        super().__init__(f"two notes quantize to frame {frame}")
        self.frame = frame


class NoteKind(Enum):
    DON = "don"
    KAT = "kat"
    BIG_DON = "big_don"
    BIG_KAT = "big_kat"

    @property
    def class_index(self) -> int:
        """Frame label class for this kind (1..4; 0 is rest)."""
        return _KIND_TO_CLASS[self]

    @classmethod
    def from_class(cls, index: int) -> "NoteKind":
        if index not in _CLASS_TO_KIND:
            raise ChartError(f"class index {index} is not a note kind")
        return _CLASS_TO_KIND[index]


_KIND_TO_CLASS = {
    NoteKind.DON: 1,
    NoteKind.KAT: 2,
    NoteKind.BIG_DON: 3,
    NoteKind.BIG_KAT: 4,
}
_CLASS_TO_KIND = {v: k for k, v in _KIND_TO_CLASS.items()}


@dataclass(frozen=True)
class Note:
    """One timed drum hit.

    time_ms: integer milliseconds from song start.
    provenance: which agent placed the note ("human" or "ai"); used for
    notes-kept accounting, never for gameplay semantics.
    """

    time_ms: int
    kind: NoteKind
    provenance: str = "human"

    def __post_init__(self):
        if not isinstance(self.time_ms, int) or self.time_ms < 0:
            raise ChartError(f"note time must be a non-negative integer, got {self.time_ms!r}")
        if not isinstance(self.kind, NoteKind):
            raise ChartError(f"unknown note kind {self.kind!r}")
        if self.provenance not in PROVENANCE_VALUES:
            raise ChartError(f"unknown provenance {self.provenance!r}")


@dataclass(frozen=True)
class TimingGrid:
    """The editor's snapping grid: 16 ticks per beat from bpm and offset."""

    bpm: float
    offset_ms: int
    tick_division: int = TICKS_PER_BEAT

    def __post_init__(self):
        if not self.bpm > 0:
            raise ChartError(f"bpm must be positive, got {self.bpm}")
        if self.tick_division <= 0:
            raise ChartError("tick_division must be positive")

    @property
    def tick_interval_ms(self) -> float:
        return 60000.0 / (self.bpm * self.tick_division)


def quantize_to_frame(time_ms: int | float) -> int:
    """Map a timestamp onto the 23ms frame grid (nearest frame, ties up)."""
    if time_ms < 0:
        raise ChartError(f"cannot quantize negative time {time_ms}")
    if isinstance(time_ms, int):
        # exact integer round-half-up
        return (2 * time_ms + FRAME_MS) // (2 * FRAME_MS)
    return math.floor(time_ms / FRAME_MS + 0.5)


def frame_count_for(duration_ms: int) -> int:
    """Number of frames covering a duration; the final partial frame counts."""
    if duration_ms <= 0:
        raise ChartError(f"duration must be positive, got {duration_ms}")
    return -(-duration_ms // FRAME_MS)


def snap_to_tick(time_ms: int | float, grid: TimingGrid) -> int:
    """Snap a timestamp to the nearest tick; exact midpoints go to the earlier tick.

    Tick times are offset_ms + n * tick_interval_ms. Returns integer
    milliseconds (half-up rounding of the tick time).
    """
    interval = grid.tick_interval_ms
    rel = (time_ms - grid.offset_ms) / interval
    lo = math.floor(rel)
    t_lo = grid.offset_ms + lo * interval
    t_hi = grid.offset_ms + (lo + 1) * interval
    tick = t_lo if (time_ms - t_lo) <= (t_hi - time_ms) else t_hi
    return math.floor(tick + 0.5)


@dataclass(frozen=True)
class Chart:
    """A full chart: song timing metadata plus the ordered note list.

    Invariants enforced at construction: notes sorted ascending by time,
    at most one note per 23ms frame, and every note's frame inside the
    chart's frame grid.
    """

    song_id: str
    bpm: float
    offset_ms: int
    duration_ms: int
    notes: tuple[Note, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.bpm > 0:
            raise ChartError(f"bpm must be positive, got {self.bpm}")
        if self.duration_ms <= 0:
            raise ChartError(f"duration must be positive, got {self.duration_ms}")
        object.__setattr__(self, "notes", tuple(self.notes))
        n_frames = self.frame_count
        seen: set[int] = set()
        prev = -1
        for note in self.notes:
            if note.time_ms < prev:
                raise ChartError("notes must be sorted ascending by time_ms")
            prev = note.time_ms
            if note.time_ms > self.duration_ms:
                raise ChartError(
                    f"note at {note.time_ms}ms is past the chart duration {self.duration_ms}ms"
                )
            frame = quantize_to_frame(note.time_ms)
            if frame >= n_frames:
                raise ChartError(
                    f"note at {note.time_ms}ms quantizes to frame {frame}, "
                    f"past the last frame {n_frames - 1}"
                )
            if frame in seen:
                raise FrameCollisionError(frame)
            seen.add(frame)

    @property
    def frame_count(self) -> int:
        return frame_count_for(self.duration_ms)

    @property
    def grid(self) -> TimingGrid:
        return TimingGrid(bpm=self.bpm, offset_ms=self.offset_ms)

    def note_at_frame(self, frame: int) -> Note | None:
        for note in self.notes:
            if quantize_to_frame(note.time_ms) == frame:
                return note
        return None

    def with_note(self, note: Note) -> "Chart":
        """New chart with one more note; collision raises FrameCollisionError."""
        notes = sorted(self.notes + (note,), key=lambda n: n.time_ms)
        return Chart(self.song_id, self.bpm, self.offset_ms, self.duration_ms, tuple(notes))

    def without_frame(self, frame: int) -> "Chart":
        """New chart with the note in the given frame removed (no-op if empty)."""
        notes = tuple(n for n in self.notes if quantize_to_frame(n.time_ms) != frame)
        return Chart(self.song_id, self.bpm, self.offset_ms, self.duration_ms, notes)


class FrameSequence:
    """The chart quantized onto the 23ms frame grid as per-frame classes.

    labels[f] is 0 for rest or the class index of the note in frame f.
    """

    frame_ms = FRAME_MS

    def __init__(self, labels):
        arr = np.asarray(labels, dtype=np.uint8)
        if arr.ndim != 1:
            raise ChartError("frame labels must be one-dimensional")
        if arr.size and arr.max() >= CLASS_COUNT:
            raise ChartError("frame labels must be in 0..4")
        arr.setflags(write=False)
        self.labels = arr

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, FrameSequence) and np.array_equal(self.labels, other.labels)

    def __repr__(self) -> str:
        return f"FrameSequence(len={len(self)})"


def chart_to_frame_sequence(chart: Chart) -> FrameSequence:
    """Quantize a chart to per-frame class labels (0 = rest)."""
    labels = np.zeros(chart.frame_count, dtype=np.uint8)
    for note in chart.notes:
        frame = quantize_to_frame(note.time_ms)
        if labels[frame] != REST_CLASS:
            raise FrameCollisionError(frame)
        labels[frame] = note.kind.class_index
    return FrameSequence(labels)


def chart_from_frame_sequence(
    seq: FrameSequence,
    song_id: str,
    bpm: float,
    offset_ms: int,
    duration_ms: int,
    provenance: str = "human",
) -> Chart:
    """Reconstruct a chart placing each non-rest frame's note at frame * 23ms."""
    notes = tuple(
        Note(time_ms=f * FRAME_MS, kind=NoteKind.from_class(int(c)), provenance=provenance)
        for f, c in enumerate(seq.labels)
        if c != REST_CLASS
    )
    return Chart(song_id, bpm, offset_ms, duration_ms, notes)

"""Parser for the community .osu text format (Taiko subset).

Only what the corpus pipeline needs is read: the first uninherited
timing point (bpm / offset), basic metadata, and circle hit objects.
Sliders and spinners are skipped with a warning count; unknown sections
are ignored. Hitsound flags map to note kinds the way Taiko plays them:
whistle (2) or clap (8) make a kat, the finish flag (4) promotes to the
big variant, anything else is a don.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .chart import Chart, Note, NoteKind, quantize_to_frame

MODE_TAIKO = 1

# hitsound bit flags
_WHISTLE = 2
_FINISH = 4
_CLAP = 8

# hit object type bit flags
_TYPE_CIRCLE = 1
_TYPE_SLIDER = 2
_TYPE_SPINNER = 8

#: Padding appended after the last note when deriving chart duration,
#: since .osu files do not carry the song length.
DURATION_PAD_MS = 1000


class OsuParseError(ValueError):
    """Malformed .osu document; carries the offending line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class OsuTaikoBeatmap:
    """Parsed subset of a Taiko-mode .osu file.

    circles holds (time_ms, hitsound_flags, line_number) for retained
    circle objects only; skipped object and frame-collision counts are
    recorded rather than raising.
    """

    title: str = ""
    beatmap_id: str = ""
    mode: int = 0
    bpm: float = 0.0
    offset_ms: int = 0
    circles: list[tuple[int, int, int]] = field(default_factory=list)
    skipped_sliders: int = 0
    skipped_spinners: int = 0
    dropped_collisions: int = 0

    @property
    def song_id(self) -> str:
        if self.beatmap_id:
            return self.beatmap_id
        slug = re.sub(r"[^A-Za-z0-9]+", "_", self.title).strip("_").lower()
        return slug or "unknown"

    def to_chart(self) -> Chart:
        notes = []
        seen_frames: set[int] = set()
        for time_ms, hitsound, _line in sorted(self.circles):
            frame = quantize_to_frame(time_ms)
            if frame in seen_frames:
                continue
            seen_frames.add(frame)
            notes.append(Note(time_ms=time_ms, kind=_kind_from_hitsound(hitsound)))
        duration = (notes[-1].time_ms if notes else 0) + DURATION_PAD_MS
        return Chart(
            song_id=self.song_id,
            bpm=self.bpm,
            offset_ms=self.offset_ms,
            duration_ms=duration,
            notes=tuple(notes),
        )


def _kind_from_hitsound(hitsound: int) -> NoteKind:
    kat = bool(hitsound & (_WHISTLE | _CLAP))
    big = bool(hitsound & _FINISH)
    if kat:
        return NoteKind.BIG_KAT if big else NoteKind.KAT
    return NoteKind.BIG_DON if big else NoteKind.DON


def _int_field(parts: list[str], index: int, line_no: int, name: str) -> int:
    try:
        return int(float(parts[index]))
    except (IndexError, ValueError):
        raise OsuParseError(line_no, f"cannot read {name}") from None


def parse_osu_beatmap(document: str) -> OsuTaikoBeatmap:
    """Parse a .osu document into the retained Taiko subset."""
    bm = OsuTaikoBeatmap()
    section = None
    saw_sections: set[str] = set()
    timing_found = False
    seen_frames: set[int] = set()

    for line_no, raw in enumerate(document.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            saw_sections.add(section)
            continue

        if section == "General":
            key, _, value = line.partition(":")
            if key.strip() == "Mode":
                try:
                    bm.mode = int(value.strip())
                except ValueError:
                    raise OsuParseError(line_no, f"unparsable Mode value {value.strip()!r}")
        elif section == "Metadata":
            key, _, value = line.partition(":")
            key = key.strip()
            if key == "Title":
                bm.title = value.strip()
            elif key == "BeatmapID":
                bm.beatmap_id = value.strip()
        elif section == "TimingPoints":
            parts = line.split(",")
            if len(parts) < 2:
                raise OsuParseError(line_no, "timing point needs at least time,beatLength")
            try:
                time = int(float(parts[0]))
                beat_length = float(parts[1])
            except ValueError:
                raise OsuParseError(line_no, f"unparsable timing point {line!r}") from None
            # inherited points have negative beatLength; the first
            # uninherited one fixes bpm and offset for the whole chart
            if beat_length > 0 and not timing_found:
                bm.bpm = 60000.0 / beat_length
                bm.offset_ms = time
                timing_found = True
        elif section == "HitObjects":
            parts = line.split(",")
            if len(parts) < 5:
                raise OsuParseError(line_no, "hit object needs at least x,y,time,type,hitSound")
            time = _int_field(parts, 2, line_no, "hit object time")
            type_flags = _int_field(parts, 3, line_no, "hit object type")
            hitsound = _int_field(parts, 4, line_no, "hit object hitSound")
            if type_flags & _TYPE_SLIDER:
                bm.skipped_sliders += 1
                continue
            if type_flags & _TYPE_SPINNER:
                bm.skipped_spinners += 1
                continue
            if not type_flags & _TYPE_CIRCLE:
                bm.skipped_sliders += 1
                continue
            if time < 0:
                raise OsuParseError(line_no, f"hit object time {time} is negative")
            frame = quantize_to_frame(time)
            if frame in seen_frames:
                bm.dropped_collisions += 1
                continue
            seen_frames.add(frame)
            bm.circles.append((time, hitsound, line_no))

    for required in ("General", "TimingPoints", "HitObjects"):
        if required not in saw_sections:
            raise OsuParseError(0, f"missing required section [{required}]")
    if bm.mode != MODE_TAIKO:
        raise OsuParseError(0, f"not a Taiko beatmap (Mode {bm.mode})")
    if not timing_found:
        raise OsuParseError(0, "no uninherited timing point found")
    return bm


def parse_osu(document: str) -> Chart:
    """Parse a Taiko .osu document straight to a Chart."""
    return parse_osu_beatmap(document).to_chart()

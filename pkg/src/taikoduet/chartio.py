"""Native chart file format.

A chart is stored as a UTF-8 JSON document:

    {
      "format": "taikoduet-chart",
      "version": 1,
      "song_id": "...",
      "bpm": 160.0,
      "offset_ms": 0,
      "duration_ms": 120000,
      "notes": [{"time_ms": 1000, "kind": "don", "provenance": "human"}, ...]
    }

parse_chart(serialize_chart(c)) == c for every valid chart.
"""

from __future__ import annotations

import json

from .chart import Chart, Note, NoteKind, PROVENANCE_VALUES

FORMAT_NAME = "taikoduet-chart"
FORMAT_VERSION = 1


class ChartParseError(ValueError):
    """Native chart document violates the schema; message names the field."""


def serialize_chart(chart: Chart) -> str:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "song_id": chart.song_id,
        "bpm": chart.bpm,
        "offset_ms": chart.offset_ms,
        "duration_ms": chart.duration_ms,
        "notes": [
            {"time_ms": n.time_ms, "kind": n.kind.value, "provenance": n.provenance}
            for n in chart.notes
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _require(doc: dict, key: str, types) -> object:
    if key not in doc:
        raise ChartParseError(f"missing field {key!r}")
    value = doc[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ChartParseError(f"field {key!r} has wrong type {type(value).__name__}")
    return value


def parse_chart(text: str) -> Chart:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChartParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ChartParseError("document root must be an object")
    if doc.get("format") != FORMAT_NAME:
        raise ChartParseError(f"field 'format' must be {FORMAT_NAME!r}")
    if doc.get("version") != FORMAT_VERSION:
        raise ChartParseError(f"field 'version' must be {FORMAT_VERSION}")

    song_id = _require(doc, "song_id", str)
    bpm = float(_require(doc, "bpm", (int, float)))
    offset_ms = _require(doc, "offset_ms", int)
    duration_ms = _require(doc, "duration_ms", int)
    raw_notes = _require(doc, "notes", list)

    notes = []
    for i, item in enumerate(raw_notes):
        if not isinstance(item, dict):
            raise ChartParseError(f"field 'notes[{i}]' must be an object")
        time_ms = item.get("time_ms")
        if not isinstance(time_ms, int) or isinstance(time_ms, bool):
            raise ChartParseError(f"field 'notes[{i}].time_ms' must be an integer")
        kind_name = item.get("kind")
        try:
            kind = NoteKind(kind_name)
        except ValueError:
            raise ChartParseError(f"field 'notes[{i}].kind' has unknown kind {kind_name!r}")
        provenance = item.get("provenance", "human")
        if provenance not in PROVENANCE_VALUES:
            raise ChartParseError(
                f"field 'notes[{i}].provenance' has unknown value {provenance!r}"
            )
        notes.append(Note(time_ms=time_ms, kind=kind, provenance=provenance))

    try:
        return Chart(
            song_id=song_id,
            bpm=bpm,
            offset_ms=offset_ms,
            duration_ms=duration_ms,
            notes=tuple(notes),
        )
    except ValueError as exc:
        raise ChartParseError(str(exc)) from exc


def save_chart(chart: Chart, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_chart(chart))


def load_chart(path) -> Chart:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_chart(fh.read())

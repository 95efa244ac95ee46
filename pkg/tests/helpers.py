"""Synthetic fixtures shared across the test modules.

Charts are generated with notes on the tick grid (as the editor would
place them) and bpm below 163 so a note decoded at its frame center
always snaps back to its own tick.
"""

from __future__ import annotations

import numpy as np

from taikoduet import (
    Chart,
    FeatureMatrix,
    ModelConfig,
    Note,
    NoteKind,
    TimingGrid,
    TrainConfig,
    snap_to_tick,
)
from taikoduet.features import BAND_COUNT

SMALL_MODEL = ModelConfig(hidden_size=16, audio_context=2, history_len=4, seed=11)
FAST_TRAIN = TrainConfig(learning_rate=0.05, max_epochs=3, batch_size=8, seed=5)


def synth_features(n_frames: int, seed: int = 0) -> FeatureMatrix:
    """Random but distinctive per-frame feature rows."""
    rng = np.random.default_rng(seed)
    data = rng.uniform(0.0, 2.0, size=(n_frames, BAND_COUNT)).astype(np.float32)
    return FeatureMatrix(data=data, sample_rate_hz=8000)


def onset_features(chart: Chart, seed: int = 0) -> FeatureMatrix:
    """Features with energy bumps at note frames, like audible beats."""
    from taikoduet import chart_to_frame_sequence

    rng = np.random.default_rng(seed)
    labels = chart_to_frame_sequence(chart).labels
    data = rng.uniform(0.0, 0.3, size=(chart.frame_count, BAND_COUNT))
    data[labels != 0, :20] += 2.0
    return FeatureMatrix(data=data.astype(np.float32), sample_rate_hz=8000)


def styled_chart(song_id: str, duration_ms: int, style, bpm: float = 120.0) -> Chart:
    """A note on every tick, the kind chosen by style(tick_index)."""
    grid = TimingGrid(bpm=bpm, offset_ms=0)
    chart = Chart(song_id=song_id, bpm=bpm, offset_ms=0, duration_ms=duration_ms)
    interval = grid.tick_interval_ms
    for tick in range(int(duration_ms // interval)):
        time_ms = snap_to_tick(tick * interval, grid)
        try:
            chart = chart.with_note(Note(time_ms=time_ms, kind=style(tick)))
        except ValueError:
            continue
    return chart


def dense_chart(song_id: str, duration_ms: int, seed: int, kat_prob: float,
                bpm: float = 120.0) -> Chart:
    """A note on every tick with a seeded don/kat mix."""
    rng = np.random.default_rng(seed)
    return styled_chart(
        song_id, duration_ms,
        lambda t: NoteKind.KAT if rng.random() < kat_prob else NoteKind.DON,
        bpm=bpm,
    )


def synth_chart(
    song_id: str,
    duration_ms: int,
    seed: int = 0,
    bpm: float = 120.0,
    density: float = 0.5,
    kind_weights: dict[NoteKind, float] | None = None,
) -> Chart:
    """Chart with seeded notes on ticks, one frame apart at least."""
    rng = np.random.default_rng(seed)
    grid = TimingGrid(bpm=bpm, offset_ms=0)
    kinds = list(kind_weights or {NoteKind.DON: 0.5, NoteKind.KAT: 0.5})
    weights = np.array([(kind_weights or {NoteKind.DON: 0.5, NoteKind.KAT: 0.5})[k] for k in kinds])
    weights = weights / weights.sum()
    chart = Chart(song_id=song_id, bpm=bpm, offset_ms=0, duration_ms=duration_ms)
    interval = grid.tick_interval_ms
    for tick in range(0, int(duration_ms // interval), 2):
        if rng.random() > density:
            continue
        time_ms = snap_to_tick(tick * interval, grid)
        kind = kinds[rng.choice(len(kinds), p=weights)]
        try:
            chart = chart.with_note(Note(time_ms=time_ms, kind=kind))
        except ValueError:
            continue
    return chart

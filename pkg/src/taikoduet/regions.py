"""Training instances from charts and autoregressive region filling.

The model's unit of work is one frame: its input is the audio window
around that frame plus the one-hot history of the preceding note
classes, its output the frame's class. Region fill decodes frames left
to right, feeding each decision back into the next frame's history, and
finally snaps the emitted notes onto the editor's tick grid.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .chart import (
    Chart,
    ChartError,
    FRAME_MS,
    Note,
    NoteKind,
    REST_CLASS,
    TimingGrid,
    chart_to_frame_sequence,
    quantize_to_frame,
    snap_to_tick,
)
from .features import FeatureMatrix
from .model import ModelConfig, ModelParams, TrainingInstance, forward


class AlignmentError(ValueError):
    """Feature matrix rows do not line up with the chart's frames."""


def _check_alignment(chart: Chart, features: FeatureMatrix) -> None:
    if features.frame_count != chart.frame_count:
        raise AlignmentError(
            f"features have {features.frame_count} rows but chart "
            f"{chart.song_id!r} has {chart.frame_count} frames"
        )


def _audio_window(config: ModelConfig, data: np.ndarray, frame: int) -> np.ndarray:
    """Feature rows around a frame, zero-padded past either boundary."""
    t = config.window_frames
    window = np.zeros((t, data.shape[1]))
    lo = frame - config.audio_context
    for j in range(t):
        f = lo + j
        if 0 <= f < data.shape[0]:
            window[j] = data[f]
    return window


def _history(config: ModelConfig, labels: np.ndarray, frame: int) -> np.ndarray:
    """One-hot rows for the history_len labels before a frame.

    Row j covers frame (frame - history_len + j); rows for frames before
    the song start stay all-zero, distinct from a one-hot rest.
    """
    hist = np.zeros((config.history_len, config.class_count))
    lo = frame - config.history_len
    for j in range(config.history_len):
        f = lo + j
        if f >= 0:
            hist[j, int(labels[f])] = 1.0
    return hist


def make_training_instances(
    chart: Chart,
    features: FeatureMatrix,
    frames: range,
    designer_id: str,
    config: ModelConfig | None = None,
) -> list[TrainingInstance]:
    """One instance per frame in the range, labelled from the chart itself."""
    config = config or ModelConfig()
    _check_alignment(chart, features)
    labels = chart_to_frame_sequence(chart).labels
    if len(frames) and (frames[0] < 0 or frames[-1] >= len(labels)):
        raise ChartError(
            f"frame range {frames[0]}..{frames[-1]} outside sequence of {len(labels)}"
        )
    data = features.data.astype(np.float64)
    return [
        TrainingInstance(
            window=_audio_window(config, data, f),
            history=_history(config, labels, f),
            target=int(labels[f]),
            designer_id=designer_id,
        )
        for f in frames
    ]


def argmax_class(probs: np.ndarray) -> int:
    """Highest-probability class; any tie falls back to rest."""
    top = probs.max()
    if int(np.sum(probs == top)) > 1:
        return REST_CLASS
    return int(np.argmax(probs))


def decode_frames(
    predict: Callable[[np.ndarray, np.ndarray], np.ndarray],
    features: FeatureMatrix,
    initial_labels: np.ndarray,
    start_frame: int,
    end_frame: int,
    config: ModelConfig,
) -> np.ndarray:
    """Greedy left-to-right decode of frames start..end inclusive.

    History before the region comes from initial_labels; inside it, from
    the decoder's own previous choices. Returns the full label array
    with the region overwritten.
    """
    work = np.array(initial_labels, dtype=np.uint8)
    work[start_frame : end_frame + 1] = REST_CLASS
    data = features.data.astype(np.float64)
    for f in range(start_frame, end_frame + 1):
        probs = predict(_audio_window(config, data, f), _history(config, work, f))
        work[f] = argmax_class(probs)
    return work


def predict_region(
    params: ModelParams,
    features: FeatureMatrix,
    chart: Chart,
    region: tuple[int, int],
    grid: TimingGrid,
) -> list[Note]:
    """Fill a [start_ms, end_ms] region with AI notes.

    Decoded notes are snapped to the nearest 1/16 tick; when two land on
    the same tick or in the same frame only the earlier survives, and
    anything snapped outside the region is dropped. Every returned note
    carries provenance "ai".
    """
    start_ms, end_ms = region
    if start_ms < 0 or end_ms > chart.duration_ms or start_ms >= end_ms:
        raise ChartError(f"invalid region [{start_ms}, {end_ms}]")
    _check_alignment(chart, features)

    start_frame = quantize_to_frame(start_ms)
    end_frame = min(quantize_to_frame(end_ms), chart.frame_count - 1)
    if start_frame > end_frame:
        raise ChartError(f"region [{start_ms}, {end_ms}] is empty after quantization")

    labels = chart_to_frame_sequence(chart).labels
    decoded = decode_frames(
        lambda window, history: forward(params, window, history),
        features,
        labels,
        start_frame,
        end_frame,
        params.config,
    )

    notes: list[Note] = []
    used_ticks: set[int] = set()
    used_frames: set[int] = set()
    for f in range(start_frame, end_frame + 1):
        cls = int(decoded[f])
        if cls == REST_CLASS:
            continue
        snapped = snap_to_tick(f * FRAME_MS, grid)
        if snapped < start_ms or snapped > end_ms:
            continue
        frame = quantize_to_frame(snapped)
        if snapped in used_ticks or frame in used_frames:
            continue
        used_ticks.add(snapped)
        used_frames.add(frame)
        notes.append(Note(time_ms=snapped, kind=NoteKind.from_class(cls), provenance="ai"))
    return notes

"""Self-contained demo data: songs, a pretrained base model, study config.

Builds everything `taikoduet serve` needs into one directory so the
editor can be tried without any real audio or community charts. The
songs are synthesized click tracks; the base model is pretrained on
seeded synthetic charts whose notes sit on the tick grid.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .chart import Chart, FRAME_MS, Note, NoteKind, TimingGrid, snap_to_tick
from .features import extract_features, save_features, write_wav_mono
from .model import ModelConfig, TrainConfig
from .calibration import pretrain

DEMO_SONGS = (
    ("demo_a", 120.0, 24000),
    ("demo_b", 150.0, 24000),
)
DEMO_SAMPLE_RATE = 8000
DEMO_DELTA = 64


def synth_click_track(duration_ms: int, bpm: float, sample_rate: int, seed: int) -> np.ndarray:
    """Percussive pulse on every beat over soft noise; enough for features."""
    rng = np.random.default_rng(seed)
    n = duration_ms * sample_rate // 1000
    samples = rng.normal(0.0, 0.01, size=n)
    beat_samples = 60.0 / bpm * sample_rate
    t = np.arange(int(0.03 * sample_rate))
    click = np.sin(2 * np.pi * 880.0 * t / sample_rate) * np.exp(-t / (0.005 * sample_rate))
    pos = 0.0
    while int(pos) + click.size < n:
        samples[int(pos) : int(pos) + click.size] += 0.6 * click
        pos += beat_samples
    return np.clip(samples, -1.0, 1.0)


def synth_chart(
    song_id: str,
    bpm: float,
    duration_ms: int,
    seed: int,
    kat_bias: float = 0.4,
    density: float = 0.9,
) -> Chart:
    """Seeded chart with notes on ticks, at most one per frame."""
    rng = np.random.default_rng(seed)
    grid = TimingGrid(bpm=bpm, offset_ms=0)
    chart = Chart(song_id=song_id, bpm=bpm, offset_ms=0, duration_ms=duration_ms)
    interval = grid.tick_interval_ms
    n_ticks = int(duration_ms // interval)
    for tick in range(n_ticks):
        if rng.random() > density:
            continue
        time_ms = snap_to_tick(tick * interval, grid)
        kind = NoteKind.KAT if rng.random() < kat_bias else NoteKind.DON
        try:
            chart = chart.with_note(Note(time_ms=time_ms, kind=kind))
        except ValueError:
            continue
    return chart


def build_demo(out_dir, seed: int = 7) -> Path:
    """Write songs, base model, and study config; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    songs_dir = out / "songs"
    songs_dir.mkdir(exist_ok=True)

    corpus = []
    for i, (song_id, bpm, duration_ms) in enumerate(DEMO_SONGS):
        audio = synth_click_track(duration_ms, bpm, DEMO_SAMPLE_RATE, seed + i)
        features = extract_features(audio, DEMO_SAMPLE_RATE)
        save_features(features, songs_dir / f"{song_id}.features")
        write_wav_mono(songs_dir / f"{song_id}.wav", audio, DEMO_SAMPLE_RATE)
        manifest = {
            "song_id": song_id,
            "bpm": bpm,
            "offset_ms": 0,
            "duration_ms": duration_ms,
            "features": f"{song_id}.features",
            "audio": f"{song_id}.wav",
        }
        (songs_dir / f"{song_id}.song.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        corpus.append(
            (synth_chart(song_id, bpm, duration_ms, seed=seed + 10 + i), features)
        )

    model_cfg = ModelConfig(hidden_size=32, audio_context=4, history_len=8, seed=seed)
    train_cfg = TrainConfig(learning_rate=0.05, max_epochs=8, batch_size=8, seed=seed)
    pretrain(corpus, train_cfg, model_cfg, out_path=out / "base_model.tdml")

    study = {
        "songs": [s[0] for s in DEMO_SONGS],
        "strategies": ["naive", "threshold"],
        "delta": DEMO_DELTA,
        "train": {"learning_rate": 1e-3, "max_epochs": 5, "batch_size": 4, "seed": seed},
    }
    (out / "study.json").write_text(json.dumps(study, indent=2, sort_keys=True) + "\n",
                                    encoding="utf-8")
    return out

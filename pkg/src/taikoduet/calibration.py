"""Offline determination of the retraining threshold and train settings.

The co-creative loop is simulated against finished charts: the base
model is retrained on a chart's first delta instances (what a designer
"would have" contributed), then asked to complete the rest of the chart
autoregressively. Each candidate hyperparameter combination is scored
by how closely the completion matches what the human actually wrote
(note accuracy) and how its pattern variety compares to the human's
(pattern score gap). The grid winner maximizes mean accuracy, breaking
ties toward the smaller pattern gap and then the smaller delta.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import product

from .chart import (
    Chart,
    ChartError,
    FRAME_MS,
    FrameSequence,
    chart_to_frame_sequence,
    quantize_to_frame,
)
from .features import FeatureMatrix
from .model import ModelConfig, ModelParams, TrainConfig, init_model, save_model, train
from .patterns import note_accuracy, overall_pattern_score
from .regions import make_training_instances, predict_region


@dataclass(frozen=True)
class GridSpec:
    """Candidate values swept by the grid search; all combinations run."""

    delta_choices: tuple[int, ...] = (512, 1024, 2048, 4096)
    alpha_choices: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    epoch_choices: tuple[int, ...] = (5, 10)
    batch_choices: tuple[int, ...] = (4, 16)

    def __post_init__(self):
        for name in ("delta_choices", "alpha_choices", "epoch_choices", "batch_choices"):
            values = getattr(self, name)
            if not values:
                raise ValueError(f"{name} must be non-empty")
            if any(v <= 0 for v in values):
                raise ValueError(f"{name} entries must be positive")

    def combinations(self) -> list["Combo"]:
        return [
            Combo(delta=d, alpha=a, epochs=e, batch=b)
            for d, a, e, b in product(
                self.delta_choices, self.alpha_choices, self.epoch_choices, self.batch_choices
            )
        ]


@dataclass(frozen=True)
class Combo:
    delta: int
    alpha: float
    epochs: int
    batch: int

    def train_cfg(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.alpha, max_epochs=self.epochs, batch_size=self.batch, seed=seed
        )


@dataclass(frozen=True)
class SimulationScore:
    note_accuracy: float
    pattern_score: float
    pattern_score_gap: float


@dataclass(frozen=True)
class ResultRow:
    chart_id: str
    combo: Combo
    score: SimulationScore


@dataclass(frozen=True)
class CalibrationResult:
    rows: tuple[ResultRow, ...]
    winner: Combo


def pretrain(
    corpus: list[tuple[Chart, FeatureMatrix]],
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    out_path=None,
) -> ModelParams:
    """Train the multi-designer base model on every frame of the corpus."""
    if not corpus:
        raise ChartError("pretraining corpus is empty")
    instances = []
    for chart, features in corpus:
        try:
            instances.extend(
                make_training_instances(
                    chart, features, range(chart.frame_count), chart.song_id, model_cfg
                )
            )
        except ValueError as exc:
            raise ChartError(f"chart {chart.song_id!r}: {exc}") from exc
    params = init_model(model_cfg)
    params, _ = train(params, instances, cfg)
    if out_path is not None:
        save_model(params, out_path)
    return params


def simulate_designer(
    base: ModelParams,
    chart: Chart,
    features: FeatureMatrix,
    delta: int,
    cfg: TrainConfig,
) -> SimulationScore:
    """Score one chart under one hyperparameter combination.

    Retrains the base model on the chart's first delta instances, has it
    complete frames delta..end, and compares that completion to the
    human's actual remainder.
    """
    total = chart.frame_count
    if delta >= total:
        raise ChartError(f"delta {delta} must be below the chart's {total} frames")
    human_seq = chart_to_frame_sequence(chart)

    prefix = make_training_instances(chart, features, range(delta), chart.song_id, base.config)
    adapted, _ = train(base, prefix, cfg)

    prefix_chart = Chart(
        song_id=chart.song_id,
        bpm=chart.bpm,
        offset_ms=chart.offset_ms,
        duration_ms=chart.duration_ms,
        notes=tuple(n for n in chart.notes if quantize_to_frame(n.time_ms) < delta),
    )
    # region opens at frame delta's left edge so a note that snaps just
    # before delta * 23ms still lands inside it
    region = (delta * FRAME_MS - FRAME_MS // 2, chart.duration_ms)
    ai_notes = predict_region(adapted, features, prefix_chart, region, chart.grid)
    completed = prefix_chart
    for note in ai_notes:
        completed = completed.with_note(note)
    completed_seq = chart_to_frame_sequence(completed)

    accuracy = note_accuracy(
        FrameSequence(completed_seq.labels[delta:]), FrameSequence(human_seq.labels[delta:])
    )
    model_score = overall_pattern_score(completed_seq)
    human_score = overall_pattern_score(human_seq)
    return SimulationScore(
        note_accuracy=accuracy,
        pattern_score=model_score,
        pattern_score_gap=abs(model_score - human_score),
    )


def select_winner(rows: list[ResultRow]) -> Combo:
    """Pick the combination with the best mean accuracy across charts.

    Pure function of the result table: ties break to the smallest mean
    pattern gap, then to the smallest delta.
    """
    by_combo: dict[Combo, list[SimulationScore]] = {}
    for row in rows:
        by_combo.setdefault(row.combo, []).append(row.score)

    def key(combo: Combo):
        scores = by_combo[combo]
        mean_acc = sum(s.note_accuracy for s in scores) / len(scores)
        mean_gap = sum(s.pattern_score_gap for s in scores) / len(scores)
        return (-mean_acc, mean_gap, combo.delta, combo.alpha, combo.epochs, combo.batch)

    return min(by_combo, key=key)


def grid_search(
    base: ModelParams,
    corpus: list[tuple[Chart, FeatureMatrix]],
    grid: GridSpec,
) -> CalibrationResult:
    """Run every (chart x combination) simulation and pick the winner."""
    if not corpus:
        raise ChartError("grid search needs at least one chart")
    combos = grid.combinations()
    max_delta = max(grid.delta_choices)
    for chart, _ in corpus:
        if chart.frame_count <= max_delta:
            raise ChartError(
                f"chart {chart.song_id!r} has {chart.frame_count} frames, "
                f"not more than the largest delta {max_delta}"
            )
    rows = []
    for chart, features in corpus:
        for combo in combos:
            try:
                score = simulate_designer(base, chart, features, combo.delta, combo.train_cfg())
            except Exception as exc:
                raise RuntimeError(
                    f"simulation failed for chart {chart.song_id!r}, combo {combo}: {exc}"
                ) from exc
            rows.append(ResultRow(chart_id=chart.song_id, combo=combo, score=score))
    return CalibrationResult(rows=tuple(rows), winner=select_winner(rows))


_TABLE_FIELDS = [
    "chart_id", "delta", "alpha", "epochs", "batch",
    "note_accuracy", "pattern_score", "pattern_score_gap",
]


def write_table(result: CalibrationResult, path) -> None:
    """Emit the result table as CSV with a winner footer comment."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TABLE_FIELDS)
        for row in result.rows:
            writer.writerow(
                [
                    row.chart_id,
                    row.combo.delta,
                    row.combo.alpha,
                    row.combo.epochs,
                    row.combo.batch,
                    f"{row.score.note_accuracy:.6f}",
                    f"{row.score.pattern_score:.6f}",
                    f"{row.score.pattern_score_gap:.6f}",
                ]
            )
        w = result.winner
        fh.write(f"# winner: delta={w.delta} alpha={w.alpha} epochs={w.epochs} batch={w.batch}\n")


def read_table(path) -> list[ResultRow]:
    """Parse a result table back into rows (the winner footer is ignored)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        content = [line for line in fh if not line.startswith("#")]
    reader = csv.DictReader(io.StringIO("".join(content)))
    for rec in reader:
        rows.append(
            ResultRow(
                chart_id=rec["chart_id"],
                combo=Combo(
                    delta=int(rec["delta"]),
                    alpha=float(rec["alpha"]),
                    epochs=int(rec["epochs"]),
                    batch=int(rec["batch"]),
                ),
                score=SimulationScore(
                    note_accuracy=float(rec["note_accuracy"]),
                    pattern_score=float(rec["pattern_score"]),
                    pattern_score_gap=float(rec["pattern_score_gap"]),
                ),
            )
        )
    return rows

"""Retraining strategies for adapting the session model to one designer.

Three strategies govern when the model retrains on the designer's
accumulated instances:

* threshold: retrain once the buffer reaches delta * (k + 1) instances,
  where k counts retrains so far; a single large batch of new instances
  can cross several thresholds and fires one retrain per crossing.
* naive: retrain every time the buffer grows at all (prior-work
  baseline).
* static: never retrain (control).

Every retrain trains on the FULL buffer, in insertion order, from the
current weights. add_instances is transactional: if training fails the
whole call rolls back and the same instances can be re-added later.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .model import ModelParams, TrainConfig, TrainingInstance, load_model, train


class StrategyKind(Enum):
    THRESHOLD = "threshold"
    NAIVE = "naive"
    STATIC = "static"


#: The calibrated retraining threshold for full-length charts.
DEFAULT_DELTA = 1024


@dataclass(frozen=True)
class AdaptationState:
    """Per-session retraining state.

    buffer holds every designer-attributed instance this session, in
    insertion order; retrain_count is how many times the model has been
    retrained; last_retrain_size is the buffer size at the most recent
    retrain (what the naive strategy compares against).
    """

    strategy: StrategyKind
    delta: int = DEFAULT_DELTA
    buffer: tuple[TrainingInstance, ...] = field(default_factory=tuple)
    retrain_count: int = 0
    last_retrain_size: int = 0
    train_cfg: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be at least 1")
        if self.retrain_count < 0:
            raise ValueError("retrain_count cannot be negative")


@dataclass(frozen=True)
class RetrainEvent:
    retrain_count_after: int
    buffer_size_at_trigger: int
    epoch_losses: tuple[float, ...]
    wall_time_ms: int


class RetrainError(RuntimeError):
    """A retrain failed; state was rolled back to before the add call."""

    def __init__(self, cause: Exception, events: list[RetrainEvent]):
        super().__init__(f"retraining failed: {cause}")
        self.cause = cause
        self.events = events


Trainer = Callable[[ModelParams, list[TrainingInstance], TrainConfig], tuple[ModelParams, list[float]]]


def should_retrain(state: AdaptationState) -> bool:
    """Evaluate the strategy's trigger against the current buffer."""
    if state.strategy is StrategyKind.STATIC:
        return False
    if state.strategy is StrategyKind.NAIVE:
        return len(state.buffer) > state.last_retrain_size
    return len(state.buffer) >= state.delta * (state.retrain_count + 1)


def add_instances(
    state: AdaptationState,
    new: list[TrainingInstance],
    model: ModelParams,
    trainer: Trainer = train,
) -> tuple[AdaptationState, ModelParams, list[RetrainEvent]]:
    """Append instances to the buffer and fire every due retrain.

    Returns the new state, the (possibly retrained) model, and one event
    per retrain. On a training failure everything rolls back to the
    pre-call state and RetrainError is raised with the events that had
    already fired.
    """
    if not new:
        return state, model, []
    current = replace(state, buffer=state.buffer + tuple(new))
    events: list[RetrainEvent] = []
    try:
        while should_retrain(current):
            started = time.perf_counter()
            model, losses = trainer(model, list(current.buffer), current.train_cfg)
            elapsed_ms = int((time.perf_counter() - started) * 1000)
            current = replace(
                current,
                retrain_count=current.retrain_count + 1,
                last_retrain_size=len(current.buffer),
            )
            events.append(
                RetrainEvent(
                    retrain_count_after=current.retrain_count,
                    buffer_size_at_trigger=len(current.buffer),
                    epoch_losses=tuple(losses),
                    wall_time_ms=elapsed_ms,
                )
            )
    except RetrainError:
        raise
    except Exception as exc:
        raise RetrainError(exc, events) from exc
    return current, model, events


def reset(
    state: AdaptationState,
    base_model_path,
    strategy: StrategyKind | None = None,
) -> tuple[AdaptationState, ModelParams]:
    """Empty the buffer, zero the counters, and reload the base model.

    The strategy may be switched atomically in the same call. If the
    base model cannot be loaded the original state is left untouched.
    """
    model = load_model(base_model_path)
    fresh = AdaptationState(
        strategy=strategy or state.strategy,
        delta=state.delta,
        train_cfg=state.train_cfg,
    )
    return fresh, model

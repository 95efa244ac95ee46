import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from taikoduet import (
    AdaptationState,
    ModelConfig,
    RetrainError,
    StrategyKind,
    TrainConfig,
    TrainingInstance,
    add_instances,
    init_model,
    load_model,
    reset,
    save_model,
    should_retrain,
    train,
)
from taikoduet.model import params_equal

TINY = ModelConfig(hidden_size=4, audio_context=1, history_len=2, seed=0)


def make_instance(target=1):
    return TrainingInstance(
        window=np.zeros((TINY.window_frames, 40)),
        history=np.zeros((TINY.history_len, 5)),
        target=target,
    )


def noop_trainer(model, data, cfg):
    return model, [0.0]


def counting_trainer(calls):
    def trainer(model, data, cfg):
        calls.append(len(data))
        return model, [0.0]

    return trainer


def brute_force_retrain_points(delta: int, batch_sizes: list[int]) -> list[int]:
    """Evaluate the trigger inequality after every single instance."""
    points = []
    size = 0
    k = 0
    for batch in batch_sizes:
        for _ in range(batch):
            size += 1
            if size >= delta * (k + 1):
                k += 1
                points.append(size)
    return points


class TestShouldRetrain:
    def test_threshold_at_exact_boundary(self):
        state = AdaptationState(
            strategy=StrategyKind.THRESHOLD, delta=1024,
            buffer=tuple(make_instance() for _ in range(1024)),
        )
        assert should_retrain(state) is True

    def test_threshold_below_boundary(self):
        state = AdaptationState(
            strategy=StrategyKind.THRESHOLD, delta=4, retrain_count=1,
            buffer=tuple(make_instance() for _ in range(7)),
        )
        assert should_retrain(state) is False  # 7 < 4 * 2

    def test_static_never(self):
        state = AdaptationState(
            strategy=StrategyKind.STATIC, delta=1,
            buffer=tuple(make_instance() for _ in range(100)),
        )
        assert should_retrain(state) is False

    def test_naive_only_when_buffer_grew(self):
        grown = AdaptationState(
            strategy=StrategyKind.NAIVE, buffer=(make_instance(),), last_retrain_size=0
        )
        assert should_retrain(grown) is True
        settled = AdaptationState(
            strategy=StrategyKind.NAIVE, buffer=(make_instance(),), last_retrain_size=1
        )
        assert should_retrain(settled) is False


class TestAddInstances:
    def test_one_at_a_time_fires_at_multiples_of_delta(self):
        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.THRESHOLD, delta=4)
        fired_at = []
        for _ in range(13):
            state, model, events = add_instances(state, [make_instance()], model,
                                                 trainer=noop_trainer)
            fired_at.extend(e.buffer_size_at_trigger for e in events)
        assert fired_at == [4, 8, 12]
        assert state.retrain_count == 3

    def test_large_batch_fires_multiple_retrains(self):
        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.THRESHOLD, delta=4)
        state, model, events = add_instances(
            state, [make_instance() for _ in range(9)], model, trainer=noop_trainer
        )
        assert [e.buffer_size_at_trigger for e in events] == [9, 9]
        assert [e.retrain_count_after for e in events] == [1, 2]
        assert state.retrain_count == 2

    def test_naive_retrains_once_per_call_on_full_buffer(self):
        calls = []
        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.NAIVE)
        for i in range(3):
            state, model, events = add_instances(state, [make_instance()], model,
                                                 trainer=counting_trainer(calls))
            assert len(events) == 1
        assert calls == [1, 2, 3]

    def test_static_never_retrains_and_model_untouched(self):
        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.STATIC, delta=1)
        state, after, events = add_instances(
            state, [make_instance() for _ in range(50)], model, trainer=noop_trainer
        )
        assert events == []
        assert after is model

    def test_empty_add_is_a_no_op(self):
        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.NAIVE)
        state2, model2, events = add_instances(state, [], model, trainer=noop_trainer)
        assert state2 is state and model2 is model and events == []

    def test_buffer_keeps_insertion_order(self):
        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.STATIC)
        batch_a = [make_instance(1), make_instance(2)]
        batch_b = [make_instance(3)]
        state, _, _ = add_instances(state, batch_a, model, trainer=noop_trainer)
        state, _, _ = add_instances(state, batch_b, model, trainer=noop_trainer)
        assert [i.target for i in state.buffer] == [1, 2, 3]

    def test_trainer_sees_full_buffer_only(self):
        seen = []

        def spy(model, data, cfg):
            seen.append([i.target for i in data])
            return model, [0.0]

        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.NAIVE)
        state, _, _ = add_instances(state, [make_instance(1)], model, trainer=spy)
        state, _, _ = add_instances(state, [make_instance(2)], model, trainer=spy)
        assert seen == [[1], [1, 2]]

    def test_failure_rolls_back_buffer_and_raises(self):
        def broken(model, data, cfg):
            raise RuntimeError("boom")

        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.NAIVE)
        with pytest.raises(RetrainError):
            add_instances(state, [make_instance()], model, trainer=broken)
        assert len(state.buffer) == 0
        assert state.retrain_count == 0

    def test_failure_can_refire_after_cause_fixed(self):
        attempts = []

        def flaky(model, data, cfg):
            attempts.append(len(data))
            if len(attempts) == 1:
                raise RuntimeError("boom")
            return model, [0.0]

        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.THRESHOLD, delta=2)
        with pytest.raises(RetrainError):
            add_instances(state, [make_instance(), make_instance()], model, trainer=flaky)
        # same instances re-added after the cause is fixed
        state, model, events = add_instances(
            state, [make_instance(), make_instance()], model, trainer=flaky
        )
        assert len(events) == 1
        assert attempts == [2, 2]


class TestTriggerProperty:
    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(min_value=1, max_value=40),
        st.lists(st.integers(min_value=0, max_value=30), min_size=1, max_size=30),
    )
    def test_matches_brute_force_simulator(self, delta, batch_sizes):
        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.THRESHOLD, delta=delta)
        fired = []
        for size in batch_sizes:
            state, model, events = add_instances(
                state, [make_instance() for _ in range(size)], model, trainer=noop_trainer
            )
            fired.extend(events)
        total = sum(batch_sizes)
        assert state.retrain_count == total // delta
        # batched adds evaluate the trigger after the whole batch, so the
        # firing buffer sizes are >= the per-instance simulator's points
        # and there are exactly as many of them
        points = brute_force_retrain_points(delta, batch_sizes)
        assert len(fired) == len(points)
        for event in fired:
            assert event.buffer_size_at_trigger >= delta * event.retrain_count_after
        # after processing, no retrain is still due
        assert len(state.buffer) < delta * (state.retrain_count + 1)


class TestReset:
    def test_reset_clears_and_reloads(self, tmp_path):
        base = init_model(TINY)
        base_path = tmp_path / "base.tdml"
        save_model(base, base_path)

        model = init_model(TINY)
        state = AdaptationState(strategy=StrategyKind.NAIVE, delta=8)
        data = [make_instance(1) for _ in range(5)]
        real_cfg = TrainConfig(learning_rate=0.05, max_epochs=1, batch_size=4, seed=0)
        state = AdaptationState(strategy=StrategyKind.NAIVE, delta=8, train_cfg=real_cfg)
        state, model, _ = add_instances(state, data, model)
        assert state.retrain_count == 1 and not params_equal(model, base)

        state, model = reset(state, base_path)
        assert state.retrain_count == 0
        assert state.buffer == ()
        assert params_equal(model, base)

    def test_reset_can_switch_strategy(self, tmp_path):
        base_path = tmp_path / "base.tdml"
        save_model(init_model(TINY), base_path)
        state = AdaptationState(strategy=StrategyKind.NAIVE)
        state, _ = reset(state, base_path, strategy=StrategyKind.THRESHOLD)
        assert state.strategy is StrategyKind.THRESHOLD

    def test_reset_missing_file_leaves_state(self, tmp_path):
        state = AdaptationState(
            strategy=StrategyKind.NAIVE, buffer=(make_instance(),), retrain_count=0,
            last_retrain_size=1,
        )
        with pytest.raises(OSError):
            reset(state, tmp_path / "missing.tdml")
        assert len(state.buffer) == 1

    def test_reset_then_add_equals_fresh_session(self, tmp_path):
        base = init_model(TINY)
        base_path = tmp_path / "base.tdml"
        save_model(base, base_path)
        cfg = TrainConfig(learning_rate=0.05, max_epochs=2, batch_size=2, seed=4)
        data = [make_instance(i % 5) for i in range(6)]

        dirty = AdaptationState(strategy=StrategyKind.THRESHOLD, delta=3, train_cfg=cfg)
        dirty, dirty_model, _ = add_instances(dirty, data, base)
        state, model = reset(dirty, base_path)
        replayed_state, replayed_model, _ = add_instances(state, data, model)

        fresh = AdaptationState(strategy=StrategyKind.THRESHOLD, delta=3, train_cfg=cfg)
        fresh_state, fresh_model, _ = add_instances(fresh, data, base)

        assert params_equal(replayed_model, fresh_model)
        assert replayed_state.retrain_count == fresh_state.retrain_count

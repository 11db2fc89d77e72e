import itertools

import pytest
from hypothesis import given, settings, strategies as st

from magus.governor import (Cause, ConfigError, GovernorConfig, GovernorState, MagusGovernor,
                            NotReadyError, Trend, TuneEventLog, decide, detect_high_freq,
                            new_governor, predict_trend, record_tune_event, target_frequency)
from magus.telemetry import HistoryWindow, Observation, OrderingError, ThroughputSample

import oracles

G = 1e9
CFG = GovernorConfig()
# one-second derivative window sampled every half second
SLOW = GovernorConfig(direv_length=1.0, sample_period=0.5, history_capacity=3)


def hist(values, period=0.5, capacity=None):
    return HistoryWindow(capacity or len(values),
                         [ThroughputSample(period * i, v) for i, v in enumerate(values)])


class TestPredictTrend:
    def test_constant_history_holds(self):
        assert predict_trend(SLOW, hist([5e9, 5e9, 5e9])) is Trend.HOLD

    def test_rise_over_one_second(self):
        # (2e10 - 1e9) / 1.0 = 1.9e10 > 1e9
        assert predict_trend(SLOW, hist([1e9, 7e9, 2e10])) is Trend.INCREASE

    def test_fall_over_one_second(self):
        assert predict_trend(SLOW, hist([2e10, 7e9, 1e9])) is Trend.DECREASE

    def test_uses_only_the_window_endpoints(self):
        # middle sample is ignored by the difference quotient
        assert predict_trend(SLOW, hist([5e9, 9e10, 5e9])) is Trend.HOLD

    @pytest.mark.parametrize("delta,expected", [
        (1e9, Trend.HOLD), (1e9 + 1024, Trend.INCREASE),
        (-1e9, Trend.HOLD), (-1e9 - 1024, Trend.DECREASE),
    ])
    def test_strict_boundaries(self, delta, expected):
        assert predict_trend(SLOW, hist([4e9, 0.0, 4e9 + delta])) is expected

    def test_not_ready(self):
        with pytest.raises(NotReadyError):
            predict_trend(CFG, hist([1e9], period=0.1))
        # two samples only half a window apart
        with pytest.raises(NotReadyError):
            predict_trend(SLOW, hist([1e9, 2e9]))

    def test_anchor_is_one_sample_back_at_default_settings(self):
        h = HistoryWindow(10, [ThroughputSample(round(0.1 * i, 10), 1e9 * (i == 4))
                               for i in range(5)])
        assert predict_trend(CFG, h) is Trend.INCREASE

    def test_irregular_spacing_reaches_past_short_gaps(self):
        # newest gap is 0.05 s, so the derivative is taken against t=0.1
        h = HistoryWindow(10, [ThroughputSample(0.1, 0.0), ThroughputSample(0.2, 5e9),
                               ThroughputSample(0.25, 0.0)])
        assert predict_trend(CFG, h) is Trend.HOLD


class TestTuneLog:
    def test_record_increase(self):
        assert record_tune_event(TuneEventLog(10), Trend.INCREASE).flags == (1,)

    def test_record_hold(self):
        assert record_tune_event(TuneEventLog(10), Trend.HOLD).flags == (0,)

    def test_record_evicts_oldest(self):
        log = TuneEventLog(10, [1] + [0] * 9)
        record_tune_event(log, Trend.DECREASE)
        assert log.flags == tuple([0] * 9 + [1])
        assert log.ones == 1

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            TuneEventLog(3).append(2)


class TestDetectHighFreq:
    def test_boundary_is_inclusive(self):
        assert detect_high_freq(CFG, TuneEventLog(10, [1] * 6 + [0] * 4))

    def test_all_zero(self):
        assert not detect_high_freq(CFG, TuneEventLog(10, [0] * 10))

    def test_one_in_ten(self):
        assert not detect_high_freq(CFG, TuneEventLog(10, [1] + [0] * 9))

    def test_empty_log_not_ready(self):
        with pytest.raises(NotReadyError):
            detect_high_freq(CFG, TuneEventLog(10))

    @pytest.mark.parametrize("capacity", [1, 3, 7])
    def test_matches_mean_for_other_capacities(self, capacity):
        for flags in itertools.product((0, 1), repeat=capacity):
            log = TuneEventLog(capacity, flags)
            assert detect_high_freq(CFG, log) == (sum(flags) / capacity >= 0.6)


class TestTargetFrequency:
    def test_decrease_goes_to_floor(self):
        assert target_frequency(Trend.DECREASE, CFG, 2.2 * G) == 0.8 * G

    def test_hold_keeps_current(self):
        assert target_frequency(Trend.HOLD, CFG, 2.2 * G) == 2.2 * G

    def test_increase_goes_to_ceiling(self):
        assert target_frequency(Trend.INCREASE, CFG, 0.8 * G) == 2.2 * G


class TestNewGovernor:
    def test_starts_at_floor(self):
        st_ = new_governor(CFG)
        assert st_.current_target == CFG.f_min
        assert len(st_.history) == 0 and len(st_.tune_log) == 0
        assert not st_.in_high_freq

    def test_rejects_inverted_bounds(self):
        with pytest.raises(ConfigError, match="f_min"):
            new_governor(GovernorConfig(f_min=2.2 * G, f_max=0.8 * G))

    def test_rejects_non_negative_dec_threshold(self):
        with pytest.raises(ConfigError, match="dec_threshold"):
            new_governor(GovernorConfig(dec_threshold=0.0))

    def test_rejects_window_longer_than_history(self):
        with pytest.raises(ConfigError, match="direv_length"):
            new_governor(GovernorConfig(direv_length=1.0))

    def test_lists_every_problem(self):
        with pytest.raises(ConfigError) as err:
            new_governor(GovernorConfig(inc_threshold=-1, high_freq_threshold=0))
        assert len(err.value.problems) == 2


class TestConfigFile:
    def test_round_trip(self):
        assert GovernorConfig.from_mapping(CFG.to_mapping()) == CFG

    def test_units(self):
        cfg = GovernorConfig.from_mapping({"f_max_ghz": 2.5, "inc_threshold_gbps_per_s": 3})
        assert cfg.f_max == 2.5e9 and cfg.inc_threshold == 3e9

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            GovernorConfig.from_mapping({"bogus": 1})

    def test_integer_keys(self):
        with pytest.raises(ConfigError, match="history_capacity"):
            GovernorConfig.from_mapping({"history_capacity": 2.5})


def _state_with_log(flags):
    state = new_governor(CFG)
    state.tune_log = TuneEventLog(CFG.tune_log_capacity, flags)
    return state


class TestDecide:
    def test_steady_low_throughput_is_a_no_op(self):
        state = new_governor(CFG)
        cmds = [decide(state, ThroughputSample(0.1 * (i + 1), 1e8))[1] for i in range(5)]
        assert all(c == cmds[0] for c in cmds)
        assert cmds[-1].target == CFG.f_min and cmds[-1].cause is Cause.HOLD

    def test_lock_overrides_decrease(self):
        state = _state_with_log([0] + [1] * 6 + [0] * 3)
        state.history.push(ThroughputSample(0.1, 2e10))
        _, cmd = decide(state, ThroughputSample(0.2, 1e9))
        assert state.last_signal is Trend.DECREASE
        assert state.tune_log.ones == 7
        assert cmd.target == CFG.f_max and cmd.cause is Cause.HIGH_FREQ_LOCK
        assert state.in_high_freq and state.current_target == CFG.f_max

    def test_increase_with_quiet_log(self):
        state = _state_with_log([0, 1] + [0] * 8)
        state.history.push(ThroughputSample(0.1, 1e9))
        _, cmd = decide(state, ThroughputSample(0.2, 2e10))
        assert state.tune_log.ones == 2
        assert cmd.target == CFG.f_max and cmd.cause is Cause.TREND_INCREASE
        assert not state.in_high_freq

    def test_warm_up_records_no_event(self):
        state = new_governor(CFG)
        decide(state, ThroughputSample(0.1, 5e9))
        assert len(state.tune_log) == 0

    def test_ordering_error_propagates(self):
        state = new_governor(CFG)
        decide(state, ThroughputSample(0.1, 0.0))
        with pytest.raises(OrderingError):
            decide(state, ThroughputSample(0.1, 0.0))

    def test_lock_releases_without_hysteresis(self):
        state = _state_with_log([1] * 10)
        state.history.push(ThroughputSample(0.1, 1e9))
        t = 0.1
        causes = []
        for _ in range(6):
            t += 0.1
            causes.append(decide(state, ThroughputSample(t, 1e9))[1].cause)
        # mean after k holds is (10-k)/10; lock while >= 0.6
        assert causes == [Cause.HIGH_FREQ_LOCK] * 4 + [Cause.HOLD] * 2
        assert state.current_target == CFG.f_max


values = st.floats(0, 5e10, allow_nan=False)
sample_lists = st.lists(values, min_size=1, max_size=80)


def _run(cfg, vals):
    state = new_governor(cfg)
    out = []
    for i, v in enumerate(vals):
        _, cmd = decide(state, ThroughputSample(0.1 * (i + 1), v))
        out.append((cmd, state.in_high_freq, state.last_signal, len(state.tune_log),
                    state.tune_log.flags))
    return out


@given(sample_lists)
def test_targets_stay_at_bounds(vals):
    for cmd, *_ in _run(CFG, vals):
        assert cmd.target in (CFG.f_min, CFG.f_max)


@given(sample_lists)
def test_high_freq_flag_matches_log_mean(vals):
    for cmd, high, _, n, flags in _run(CFG, vals):
        if n == CFG.tune_log_capacity:
            assert high == (sum(flags) / n >= CFG.high_freq_threshold)
        else:
            assert not high
        if high:
            assert cmd.target == CFG.f_max and cmd.cause is Cause.HIGH_FREQ_LOCK


@given(sample_lists)
def test_events_keep_being_logged_while_locked(vals):
    state = new_governor(CFG)
    predicted = 0
    for i, v in enumerate(vals):
        decide(state, ThroughputSample(0.1 * (i + 1), v))
        if state.last_signal is not None:
            predicted += 1
        assert len(state.tune_log) == min(predicted, CFG.tune_log_capacity)


@given(sample_lists)
def test_decide_is_deterministic(vals):
    assert _run(CFG, vals) == _run(CFG, vals)


@given(sample_lists, st.integers(-20, 20))
def test_scale_equivariance(vals, power):
    c = 2.0 ** power
    scaled_cfg = GovernorConfig(inc_threshold=CFG.inc_threshold * c,
                                dec_threshold=CFG.dec_threshold * c)
    a = [r[2] for r in _run(CFG, vals)]
    b = [r[2] for r in _run(scaled_cfg, [v * c for v in vals])]
    assert a == b


@settings(max_examples=50)
@given(st.lists(values, min_size=1, max_size=300))
def test_streaming_matches_brute_force(vals):
    samples = [(0.1 * (i + 1), v) for i, v in enumerate(vals)]
    state = new_governor(CFG)
    got = [decide(state, ThroughputSample(t, v))[1] for t, v in samples]
    want = oracles.brute_force_commands(CFG, samples)
    assert [(c.target, c.cause.value) for c in got] == want


def test_magus_governor_adapter():
    gov = MagusGovernor()
    assert gov.initial_target == gov.f_min
    cmd = gov.observe(Observation(0.1, 1e9))
    assert cmd.cause is Cause.HOLD
    assert isinstance(gov.state, GovernorState)

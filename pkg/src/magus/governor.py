"""MAGUS uncore-frequency governor.

Every round the governor pushes one throughput sample, predicts the trend
from the derivative of memory throughput, logs whether that prediction asks
for a frequency change, and checks how often such changes were asked for
recently. If they come too often the tentative trend decision is discarded
and the uncore is held at its maximum frequency.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Mapping

from magus.telemetry import GB, HistoryWindow, ThroughputSample

GHZ = 1e9


class ConfigError(ValueError):
    """Configuration violates one or more invariants."""

    def __init__(self, problems: list[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class NotReadyError(RuntimeError):
    """Not enough data yet to evaluate a predicate."""


class Trend(enum.IntEnum):
    DECREASE = -1
    HOLD = 0
    INCREASE = 1


class Cause(str, enum.Enum):
    TREND_INCREASE = "TrendIncrease"
    TREND_DECREASE = "TrendDecrease"
    HOLD = "Hold"
    HIGH_FREQ_LOCK = "HighFreqLock"
    # baseline governors
    STATIC = "Static"
    TDP_HEADROOM = "TdpHeadroom"
    TDP_LIMIT = "TdpLimit"
    UPS_STEP_DOWN = "UpsStepDown"
    UPS_STEP_UP = "UpsStepUp"
    UPS_PHASE_RESET = "UpsPhaseReset"

    def __str__(self) -> str:
        return self.value


_TREND_CAUSE = {
    Trend.INCREASE: Cause.TREND_INCREASE,
    Trend.DECREASE: Cause.TREND_DECREASE,
    Trend.HOLD: Cause.HOLD,
}


@dataclass(frozen=True)
class FrequencyCommand:
    target: float  # Hz
    cause: Cause


@dataclass(frozen=True)
class GovernorConfig:
    """Governor tuning knobs, SI units throughout.

    The threshold, window and log-length defaults are tuning choices rather
    than published constants. ``sample_period`` 0.1 s with a 10-entry tune log
    makes the 0.6 threshold mean "six or more frequency changes requested in
    the last second".
    """

    inc_threshold: float = 1.0 * GB  # bytes/s per second
    dec_threshold: float = -1.0 * GB
    direv_length: float = 0.1  # seconds
    history_capacity: int = 10
    high_freq_threshold: float = 0.6
    tune_log_capacity: int = 10
    f_min: float = 0.8 * GHZ
    f_max: float = 2.2 * GHZ
    sample_period: float = 0.1

    # config-file key -> (field, scale to SI)
    FILE_KEYS = {
        "inc_threshold_gbps_per_s": ("inc_threshold", GB),
        "dec_threshold_gbps_per_s": ("dec_threshold", GB),
        "direv_length_s": ("direv_length", 1.0),
        "history_capacity": ("history_capacity", None),
        "high_freq_threshold": ("high_freq_threshold", 1.0),
        "tune_log_capacity": ("tune_log_capacity", None),
        "f_min_ghz": ("f_min", GHZ),
        "f_max_ghz": ("f_max", GHZ),
        "sample_period_s": ("sample_period", 1.0),
    }

    def problems(self) -> list[str]:
        """Every violated invariant, as ``key: message`` strings (empty if valid)."""
        out = []
        if not self.inc_threshold > 0:
            out.append(f"inc_threshold_gbps_per_s: must be > 0, got {self.inc_threshold / GB:g}")
        if not self.dec_threshold < 0:
            out.append(f"dec_threshold_gbps_per_s: must be < 0, got {self.dec_threshold / GB:g}")
        if not (self.f_min > 0 and self.f_max > 0):
            out.append("f_min_ghz/f_max_ghz: frequencies must be positive")
        if not self.f_min < self.f_max:
            out.append(f"f_min_ghz: must be below f_max_ghz "
                       f"({self.f_min / GHZ:g} >= {self.f_max / GHZ:g})")
        if not self.sample_period > 0:
            out.append(f"sample_period_s: must be > 0, got {self.sample_period:g}")
        if not (isinstance(self.history_capacity, int) and self.history_capacity >= 2):
            out.append(f"history_capacity: must be an integer >= 2, got {self.history_capacity}")
        if not (isinstance(self.tune_log_capacity, int) and self.tune_log_capacity >= 1):
            out.append(f"tune_log_capacity: must be an integer >= 1, got {self.tune_log_capacity}")
        if not 0 < self.high_freq_threshold <= 1:
            out.append(f"high_freq_threshold: must lie in (0, 1], got {self.high_freq_threshold}")
        if not self.direv_length > 0:
            out.append(f"direv_length_s: must be > 0, got {self.direv_length:g}")
        elif (isinstance(self.history_capacity, int) and self.history_capacity >= 2
              and self.sample_period > 0):
            # a full window of n samples spans n-1 periods
            span = (self.history_capacity - 1) * self.sample_period
            if self.direv_length > span * (1 + 1e-9):
                out.append(f"direv_length_s: {self.direv_length:g} s exceeds the "
                           f"{span:g} s spanned by history_capacity samples")
        return out

    def validate(self) -> GovernorConfig:
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> GovernorConfig:
        """Build from config-file keys (GB/s, GHz, seconds). Unknown keys are errors."""
        unknown = sorted(set(data) - set(cls.FILE_KEYS))
        if unknown:
            raise ConfigError([f"{k}: unknown governor key (valid: {', '.join(cls.FILE_KEYS)})"
                               for k in unknown])
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            name, scale = cls.FILE_KEYS[key]
            if scale is None:
                if isinstance(value, bool) or not isinstance(value, int):
                    raise ConfigError(f"{key}: expected an integer, got {value!r}")
                kwargs[name] = value
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{key}: expected a number, got {value!r}")
                kwargs[name] = float(value) * scale
        return cls(**kwargs)

    def to_mapping(self) -> dict[str, Any]:
        out = {}
        for key, (name, scale) in self.FILE_KEYS.items():
            value = getattr(self, name)
            out[key] = value if scale is None else value / scale
        return out


class TuneEventLog:
    """FIFO of 0/1 flags: did the round's trend prediction ask for a change?"""

    def __init__(self, capacity: int, flags=()):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._flags: deque[int] = deque(maxlen=capacity)
        self._ones = 0
        for f in flags:
            self.append(f)

    def append(self, flag: int) -> None:
        if flag not in (0, 1):
            raise ValueError(f"tune flag must be 0 or 1, got {flag!r}")
        if len(self._flags) == self.capacity:
            self._ones -= self._flags[0]
        self._flags.append(flag)
        self._ones += flag

    @property
    def flags(self) -> tuple[int, ...]:
        return tuple(self._flags)

    @property
    def full(self) -> bool:
        return len(self._flags) == self.capacity

    @property
    def ones(self) -> int:
        return self._ones

    def __len__(self) -> int:
        return len(self._flags)

    def __repr__(self) -> str:
        return f"TuneEventLog(capacity={self.capacity}, flags={list(self._flags)})"


def _anchor_index(history: HistoryWindow, direv_length: float) -> int | None:
    """Index of the sample the derivative is taken against.

    That is the newest sample lying at least ``direv_length`` seconds before
    the newest one, so the difference always spans the full window. With a
    uniform sample period equal to ``direv_length`` this is simply the
    previous sample.
    """
    n = len(history)
    if n < 2:
        return None
    cutoff = history[-1].timestamp - direv_length * (1 - 1e-9)
    for i in range(n - 2, -1, -1):
        if history[i].timestamp <= cutoff:
            return i
    return None


def predict_trend(config: GovernorConfig, history: HistoryWindow) -> Trend:
    """Classify the throughput derivative over the last ``direv_length`` seconds.

    Raises NotReadyError if the history does not yet span the window.
    """
    i = _anchor_index(history, config.direv_length)
    if i is None:
        raise NotReadyError(
            f"history of {len(history)} samples does not span {config.direv_length} s")
    derivative = (history[-1].throughput - history[i].throughput) / config.direv_length
    if derivative > config.inc_threshold:
        return Trend.INCREASE
    if derivative < config.dec_threshold:
        return Trend.DECREASE
    return Trend.HOLD


def record_tune_event(log: TuneEventLog, signal: Trend) -> TuneEventLog:
    log.append(0 if signal == Trend.HOLD else 1)
    return log


def detect_high_freq(config: GovernorConfig, log: TuneEventLog) -> bool:
    if len(log) == 0:
        raise NotReadyError("tune-event log is empty")
    return log.ones / len(log) >= config.high_freq_threshold


def target_frequency(signal: Trend, config: GovernorConfig, current: float) -> float:
    """Jump straight to a bound: Increase -> f_max, Decrease -> f_min."""
    if signal == Trend.INCREASE:
        return config.f_max
    if signal == Trend.DECREASE:
        return config.f_min
    return current


@dataclass
class GovernorState:
    config: GovernorConfig
    history: HistoryWindow
    tune_log: TuneEventLog
    current_target: float
    in_high_freq: bool = False
    last_signal: Trend | None = field(default=None)


def new_governor(config: GovernorConfig) -> GovernorState:
    """Fresh state at f_min: idle nodes park the uncore at its lowest frequency."""
    config.validate()
    return GovernorState(
        config=config,
        history=HistoryWindow(config.history_capacity),
        tune_log=TuneEventLog(config.tune_log_capacity),
        current_target=config.f_min,
    )


def decide(state: GovernorState, sample: ThroughputSample) -> tuple[GovernorState, FrequencyCommand]:
    """Run one decision round. ``state`` is updated in place and returned."""
    cfg = state.config
    state.history.push(sample)
    try:
        signal = predict_trend(cfg, state.history)
    except NotReadyError:
        signal = None
    else:
        record_tune_event(state.tune_log, signal)
    state.last_signal = signal

    log = state.tune_log
    # a partially filled log never counts as high-frequency
    high = log.full and detect_high_freq(cfg, log)
    state.in_high_freq = high
    if high:
        cmd = FrequencyCommand(cfg.f_max, Cause.HIGH_FREQ_LOCK)
    elif signal is None:
        cmd = FrequencyCommand(state.current_target, Cause.HOLD)
    else:
        cmd = FrequencyCommand(target_frequency(signal, cfg, state.current_target),
                               _TREND_CAUSE[signal])
    state.current_target = cmd.target
    return state, cmd


class MagusGovernor:
    """MAGUS behind the common governor interface used by the simulator and hw loop."""

    name = "magus"

    def __init__(self, config: GovernorConfig | None = None):
        self.config = config or GovernorConfig()
        self.state = new_governor(self.config)

    @property
    def f_min(self) -> float:
        return self.config.f_min

    @property
    def f_max(self) -> float:
        return self.config.f_max

    @property
    def initial_target(self) -> float:
        return self.state.current_target

    def observe(self, obs) -> FrequencyCommand:
        sample = ThroughputSample(obs.timestamp, obs.throughput)
        _, cmd = decide(self.state, sample)
        return cmd


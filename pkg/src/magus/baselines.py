"""Comparison governors: fixed frequency, TDP-triggered default, UPS-style.

All three expose the same surface as :class:`magus.governor.MagusGovernor`
(``name``, ``f_min``, ``f_max``, ``initial_target``, ``observe``).

The UPS governor is an approximation built from a one-paragraph description
of the method (phase changes detected from DRAM power, frequency walked down
step by step while IPC holds up). Its parameters are not published values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from magus.governor import GHZ, Cause, ConfigError, FrequencyCommand
from magus.telemetry import Observation

DEFAULT_F_MIN = 0.8 * GHZ
DEFAULT_F_MAX = 2.2 * GHZ


class StaleDataError(RuntimeError):
    """A round arrived without the telemetry this governor needs.

    ``held`` is the command the governor keeps in force.
    """

    def __init__(self, message: str, held: FrequencyCommand):
        super().__init__(message)
        self.held = held


@dataclass(frozen=True)
class PowerSample:
    timestamp: float
    package_power: float  # W
    dram_power: float  # W

    def __post_init__(self):
        if self.package_power < 0 or self.dram_power < 0:
            raise ValueError("power readings must be >= 0")


@dataclass(frozen=True)
class IpcSample:
    timestamp: float
    ipc: float

    def __post_init__(self):
        if self.ipc < 0:
            raise ValueError("ipc must be >= 0")


def _check_bounds(f_min: float, f_max: float):
    if not 0 < f_min < f_max:
        raise ConfigError(f"need 0 < f_min < f_max, got {f_min}, {f_max}")


class StaticGovernor:
    def __init__(self, freq: float, f_min: float = DEFAULT_F_MIN, f_max: float = DEFAULT_F_MAX,
                 name: str | None = None):
        _check_bounds(f_min, f_max)
        if not f_min <= freq <= f_max:
            raise ConfigError(f"static frequency {freq / GHZ:g} GHz outside "
                              f"[{f_min / GHZ:g}, {f_max / GHZ:g}] GHz")
        self.freq = freq
        self.f_min = f_min
        self.f_max = f_max
        self.name = name or f"static_{freq / GHZ:g}ghz"
        self._cmd = FrequencyCommand(freq, Cause.STATIC)

    @property
    def initial_target(self) -> float:
        return self.freq

    def observe(self, obs: Observation) -> FrequencyCommand:
        return self._cmd


def static_governor(freq: float, f_min: float = DEFAULT_F_MIN,
                    f_max: float = DEFAULT_F_MAX) -> StaticGovernor:
    return StaticGovernor(freq, f_min, f_max)


class TdpDefaultGovernor:
    """Runs at f_max until package+DRAM power nears TDP, then drops to f_min.

    The decision depends only on the current power reading.
    """

    name = "tdp_default"

    def __init__(self, tdp: float, margin: float = 0.05, f_min: float = DEFAULT_F_MIN,
                 f_max: float = DEFAULT_F_MAX):
        _check_bounds(f_min, f_max)
        if not tdp > 0:
            raise ConfigError(f"tdp must be > 0, got {tdp}")
        if not 0 < margin < 1:
            raise ConfigError(f"margin must lie in (0, 1), got {margin}")
        self.tdp = tdp
        self.margin = margin
        self.f_min = f_min
        self.f_max = f_max
        self.bound = (1 - margin) * tdp
        self._last = FrequencyCommand(f_max, Cause.TDP_HEADROOM)

    @property
    def initial_target(self) -> float:
        return self.f_max

    def decide_power(self, package_power: float, dram_power: float) -> FrequencyCommand:
        if package_power + dram_power < self.bound:
            return FrequencyCommand(self.f_max, Cause.TDP_HEADROOM)
        return FrequencyCommand(self.f_min, Cause.TDP_LIMIT)

    def observe(self, obs: Observation) -> FrequencyCommand:
        if obs.package_power is None or obs.dram_power is None:
            raise StaleDataError(f"no power reading at t={obs.timestamp}", self._last)
        self._last = self.decide_power(obs.package_power, obs.dram_power)
        return self._last


def tdp_default_governor(tdp: float, margin: float = 0.05, f_min: float = DEFAULT_F_MIN,
                         f_max: float = DEFAULT_F_MAX) -> TdpDefaultGovernor:
    return TdpDefaultGovernor(tdp, margin, f_min, f_max)


@dataclass(frozen=True)
class UpsConfig:
    step: float = 0.1 * GHZ
    ipc_tolerance: float = 0.02
    dram_delta_threshold: float = 0.2
    f_min: float = DEFAULT_F_MIN
    f_max: float = DEFAULT_F_MAX
    dram_floor: float = 1e-6  # W, guards the relative change against a zero reference

    def validate(self) -> UpsConfig:
        _check_bounds(self.f_min, self.f_max)
        problems = []
        if not self.step > 0:
            problems.append(f"step must be > 0, got {self.step}")
        if not 0 < self.ipc_tolerance < 1:
            problems.append(f"ipc_tolerance must lie in (0, 1), got {self.ipc_tolerance}")
        if not 0 < self.dram_delta_threshold < 1:
            problems.append(f"dram_delta_threshold must lie in (0, 1), "
                            f"got {self.dram_delta_threshold}")
        if problems:
            raise ConfigError(problems)
        return self


class UpsGovernor:
    """Gradual UPS-style governor.

    Each round: a relative DRAM-power change above ``dram_delta_threshold``
    marks a new phase, so the frequency resets to f_max and the IPC and DRAM
    references are re-taken. Otherwise the frequency moves down one step
    while IPC stays within ``ipc_tolerance`` of the phase reference, and up
    one step when it does not.
    """

    name = "ups"

    def __init__(self, config: UpsConfig | None = None):
        self.config = (config or UpsConfig()).validate()
        self.current_freq = self.config.f_max
        self.ref_ipc: float | None = None
        self.ref_dram_power: float | None = None
        self._last = FrequencyCommand(self.current_freq, Cause.UPS_PHASE_RESET)

    @property
    def f_min(self) -> float:
        return self.config.f_min

    @property
    def f_max(self) -> float:
        return self.config.f_max

    @property
    def initial_target(self) -> float:
        return self.config.f_max

    def decide_sample(self, ipc: float, dram_power: float) -> FrequencyCommand:
        cfg = self.config
        if self.ref_ipc is None or self.ref_dram_power is None:
            changed = True
        else:
            rel = abs(dram_power - self.ref_dram_power) / max(self.ref_dram_power, cfg.dram_floor)
            changed = rel > cfg.dram_delta_threshold
        if changed:
            self.current_freq = cfg.f_max
            self.ref_ipc = ipc
            self.ref_dram_power = dram_power
            cause = Cause.UPS_PHASE_RESET
        elif ipc >= (1 - cfg.ipc_tolerance) * self.ref_ipc:
            self.current_freq = max(cfg.f_min, self.current_freq - cfg.step)
            cause = Cause.UPS_STEP_DOWN
        else:
            self.current_freq = min(cfg.f_max, self.current_freq + cfg.step)
            cause = Cause.UPS_STEP_UP
        self._last = FrequencyCommand(self.current_freq, cause)
        return self._last

    def observe(self, obs: Observation) -> FrequencyCommand:
        if obs.ipc is None or obs.dram_power is None:
            raise StaleDataError(f"missing IPC or DRAM power at t={obs.timestamp}", self._last)
        if not (math.isfinite(obs.ipc) and obs.ipc >= 0):
            raise ValueError(f"bad ipc reading {obs.ipc}")
        return self.decide_sample(obs.ipc, obs.dram_power)


def ups_governor(config: UpsConfig | None = None) -> UpsGovernor:
    return UpsGovernor(config)


GOVERNOR_NAMES = ("magus", "static_min", "static_max", "tdp_default", "ups")

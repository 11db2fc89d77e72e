"""Discrete-time closed-loop power/performance simulator.

Time advances in ticks of one sample period. A tick works on a single trace
entry and ends early when that entry completes, so entry boundaries always
coincide with tick boundaries. After each tick the governor sees the
throughput actually achieved (not the demand), together with the tick's
power readings and an IPC proxy, and picks the frequency for the next tick.

Per entry of period ``P`` with demand ``d`` and compute weight ``w`` at a
frequency whose bandwidth is ``b``::

    nominal time   = P
    time at f      = P * (w + (1 - w) * d / min(d, b))
    memory traffic = d * P * (1 - w) bytes

so only the memory-bound share stretches when bandwidth falls short.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Protocol

from magus.baselines import StaleDataError
from magus.governor import GHZ, ConfigError, FrequencyCommand
from magus.telemetry import GB, Observation, WorkloadTrace


class RangeError(ValueError):
    """Frequency outside the modelled [f_min, f_max] range."""


class DivergenceError(RuntimeError):
    """The run did not finish within the step cap."""


class Governor(Protocol):
    name: str

    @property
    def f_min(self) -> float: ...

    @property
    def f_max(self) -> float: ...

    @property
    def initial_target(self) -> float: ...

    def observe(self, obs: Observation) -> FrequencyCommand: ...


class BandwidthShape(str, enum.Enum):
    LINEAR = "linear"
    SATURATING = "saturating"


@dataclass(frozen=True)
class BandwidthModel:
    bw_max: float = 20.0 * GB  # bytes/s at f_max
    shape: BandwidthShape = BandwidthShape.LINEAR
    knee: float = 1.0  # fraction of f_max where the saturating curve flattens

    def __post_init__(self):
        try:
            object.__setattr__(self, "shape", BandwidthShape(self.shape))
        except ValueError:
            valid = ", ".join(s.value for s in BandwidthShape)
            raise ConfigError(f"shape: unknown bandwidth shape {self.shape!r} "
                              f"(valid: {valid})") from None
        if not self.bw_max > 0:
            raise ConfigError(f"bw_max must be > 0, got {self.bw_max}")
        if not 0 < self.knee <= 1:
            raise ConfigError(f"knee must lie in (0, 1], got {self.knee}")


@dataclass(frozen=True)
class PowerModel:
    p_uncore_min: float = 20.0  # W at f_min
    p_uncore_max: float = 60.0  # W at f_max
    exponent: float = 1.0
    p_core_active: float = 60.0
    p_pkg_idle: float = 50.0
    p_gpu_active: float = 250.0
    p_gpu_idle: float = 50.0
    p_dram_idle: float = 5.0
    dram_w_per_gbps: float = 0.5  # DRAM power per GB/s of achieved traffic

    def __post_init__(self):
        problems = []
        if not self.p_uncore_max >= self.p_uncore_min >= 0:
            problems.append("need p_uncore_max >= p_uncore_min >= 0")
        if not self.exponent >= 1:
            problems.append(f"exponent must be >= 1, got {self.exponent}")
        for name in ("p_core_active", "p_pkg_idle", "p_gpu_active", "p_gpu_idle",
                     "p_dram_idle", "dram_w_per_gbps"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class SimModels:
    bandwidth: BandwidthModel = field(default_factory=BandwidthModel)
    power: PowerModel = field(default_factory=PowerModel)
    f_min: float = 0.8 * GHZ
    f_max: float = 2.2 * GHZ
    ipc_peak: float = 1.0  # IPC reported when no step is slowed down
    max_steps: int | None = None  # default: 1000 ticks per trace entry

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ConfigError(f"f_min_ghz: must be positive and below f_max_ghz "
                              f"({self.f_min / GHZ:g} vs {self.f_max / GHZ:g})")


def _check_range(freq: float, f_min: float, f_max: float):
    if not f_min <= freq <= f_max:
        raise RangeError(f"frequency {freq / GHZ:g} GHz outside "
                         f"[{f_min / GHZ:g}, {f_max / GHZ:g}] GHz")


def bandwidth_at(freq: float, model: BandwidthModel, f_min: float, f_max: float) -> float:
    _check_range(freq, f_min, f_max)
    if freq == f_max:
        return model.bw_max
    ratio = freq / f_max
    if model.shape is BandwidthShape.LINEAR:
        return model.bw_max * ratio
    return model.bw_max * min(1.0, ratio / model.knee)


def uncore_power_at(freq: float, model: PowerModel, f_min: float, f_max: float) -> float:
    _check_range(freq, f_min, f_max)
    x = (freq - f_min) / (f_max - f_min)
    return model.p_uncore_min + (model.p_uncore_max - model.p_uncore_min) * x ** model.exponent


@dataclass(frozen=True)
class StepOutcome:
    duration: float  # s
    remaining_after: float  # fraction of the entry still to do
    achieved: float  # bytes/s averaged over the tick
    cap: float  # min(demand, bandwidth) for this tick
    package_power: float
    gpu_power: float
    dram_power: float
    ipc: float

    @property
    def finished(self) -> bool:
        return self.remaining_after == 0.0


def entry_time(demand: float, compute_weight: float, bandwidth: float, period: float) -> float:
    """Wall time one whole entry takes at the given bandwidth."""
    if demand <= bandwidth:
        return period
    if compute_weight == 1.0:
        return period
    if bandwidth <= 0.0:
        return math.inf
    return period * (compute_weight + (1.0 - compute_weight) * demand / bandwidth)


def step(demand: float, compute_weight: float, remaining: float, freq: float,
         models: SimModels, dt: float) -> StepOutcome:
    """Advance one tick on a single entry with ``remaining`` (0, 1] of its work left."""
    bw = bandwidth_at(freq, models.bandwidth, models.f_min, models.f_max)
    total = entry_time(demand, compute_weight, bw, dt)
    needed = remaining * total
    if needed <= dt * (1 + 1e-12):
        duration = min(needed, dt)
        after = 0.0
    else:
        duration = dt
        after = remaining - dt / total
        if after <= 0.0:  # rounding guard, cannot normally trigger
            after = 0.0
    traffic = demand * dt * (1.0 - compute_weight) * (remaining - after)
    achieved = traffic / duration if duration > 0 else 0.0
    cap = min(demand, bw)
    pm = models.power
    pkg = pm.p_pkg_idle + pm.p_core_active + uncore_power_at(
        freq, pm, models.f_min, models.f_max)
    dram = pm.p_dram_idle + pm.dram_w_per_gbps * achieved / GB
    speed = (remaining - after) * dt / duration if duration > 0 else 1.0
    return StepOutcome(duration, after, achieved, cap, pkg, pm.p_gpu_active, dram,
                       models.ipc_peak * speed)


@dataclass(frozen=True)
class TickRecord:
    t_start: float
    duration: float
    entry: int
    remaining_before: float
    remaining_after: float
    freq: float
    demand: float
    achieved: float
    cap: float
    package_power: float
    gpu_power: float
    dram_power: float
    ipc: float

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass
class SimResult:
    governor: str
    trace: str
    exec_time: float
    pkg_energy: float
    gpu_energy: float
    dram_energy: float
    command_log: list[tuple[float, FrequencyCommand]]
    throughput_log: list[tuple[float, float]]
    ticks: list[TickRecord]
    idle_power: float = 0.0  # package idle + GPU idle, for active-saving metrics

    @property
    def total_energy(self) -> float:
        return self.pkg_energy + self.gpu_energy

    @property
    def mean_pkg_power(self) -> float:
        return self.pkg_energy / self.exec_time

    @property
    def mean_total_power(self) -> float:
        return self.total_energy / self.exec_time

    @property
    def edp(self) -> float:
        return self.total_energy * self.exec_time

    def summary(self) -> dict:
        return {
            "governor": self.governor,
            "trace": self.trace,
            "exec_time_s": self.exec_time,
            "pkg_energy_j": self.pkg_energy,
            "gpu_energy_j": self.gpu_energy,
            "dram_energy_j": self.dram_energy,
            "total_energy_j": self.total_energy,
            "mean_pkg_power_w": self.mean_pkg_power,
            "edp_js": self.edp,
            "ticks": len(self.ticks),
        }


class _Sum:
    """Neumaier compensated running sum."""

    __slots__ = ("s", "c")

    def __init__(self):
        self.s = 0.0
        self.c = 0.0

    def add(self, x: float) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


def run(trace: WorkloadTrace, governor: Governor, models: SimModels | None = None) -> SimResult:
    """Drive ``governor`` over ``trace`` until every entry's work is done."""
    models = models or SimModels()
    if governor.f_min < models.f_min or governor.f_max > models.f_max:
        raise ConfigError(
            f"governor range [{governor.f_min / GHZ:g}, {governor.f_max / GHZ:g}] GHz exceeds "
            f"modelled range [{models.f_min / GHZ:g}, {models.f_max / GHZ:g}] GHz")
    dt = trace.period
    max_steps = models.max_steps or 1000 * len(trace.entries)

    clock, pkg_e, gpu_e, dram_e = _Sum(), _Sum(), _Sum(), _Sum()
    freq = governor.initial_target
    ticks: list[TickRecord] = []
    commands: list[tuple[float, FrequencyCommand]] = []
    throughput: list[tuple[float, float]] = []
    entries = trace.entries
    i, remaining = 0, 1.0
    while i < len(entries):
        if len(ticks) >= max_steps:
            raise DivergenceError(
                f"{trace.name}: not finished after {max_steps} ticks (entry {i}, "
                f"{remaining:.3g} of it left at {freq / GHZ:g} GHz)")
        e = entries[i]
        out = step(e.demand, e.compute_weight, remaining, freq, models, dt)
        t_start = clock.value
        ticks.append(TickRecord(t_start, out.duration, i, remaining, out.remaining_after, freq,
                                e.demand, out.achieved, out.cap, out.package_power,
                                out.gpu_power, out.dram_power, out.ipc))
        clock.add(out.duration)
        pkg_e.add(out.package_power * out.duration)
        gpu_e.add(out.gpu_power * out.duration)
        dram_e.add(out.dram_power * out.duration)
        if out.finished:
            i, remaining = i + 1, 1.0
        else:
            remaining = out.remaining_after
        now = clock.value
        throughput.append((now, out.achieved))
        if i == len(entries):
            break
        obs = Observation(now, out.achieved, out.package_power, out.dram_power, out.ipc)
        try:
            cmd = governor.observe(obs)
        except StaleDataError as err:
            cmd = err.held
        _check_range(cmd.target, models.f_min, models.f_max)
        commands.append((now, cmd))
        freq = cmd.target

    pm = models.power
    return SimResult(
        governor=governor.name,
        trace=trace.name,
        exec_time=clock.value,
        pkg_energy=pkg_e.value,
        gpu_energy=gpu_e.value,
        dram_energy=dram_e.value,
        command_log=commands,
        throughput_log=throughput,
        ticks=ticks,
        idle_power=pm.p_pkg_idle + pm.p_gpu_idle,
    )

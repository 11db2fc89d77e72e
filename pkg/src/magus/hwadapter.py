"""Linux ``intel_uncore_frequency`` sysfs actuation and counter-file telemetry.

Each uncore domain lives in ``<base>/package_XX_die_YY/`` with
``min_freq_khz`` and ``max_freq_khz`` (plus read-only
``initial_min_freq_khz``/``initial_max_freq_khz`` holding the hardware
limits). A command pins the domain by writing the same kHz value to both.
Setting ``UFS_SYSFS_BASE`` points everything at a fake tree for testing.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from magus.governor import Cause, FrequencyCommand
from magus.telemetry import Observation, ThroughputSample

_LOG = logging.getLogger(__name__)

DEFAULT_SYSFS_BASE = "/sys/devices/system/cpu/intel_uncore_frequency"
SYSFS_ENV = "UFS_SYSFS_BASE"


class ActuationError(RuntimeError):
    """Could not write the uncore frequency files."""


class HardwareRejectError(RuntimeError):
    """The domain did not accept the requested frequency."""


class SourceError(RuntimeError):
    """The throughput counter could not be read."""


class CounterResetError(RuntimeError):
    """The cumulative byte counter went backwards (wrap or reset).

    ``reading`` is the fresh reading to re-arm from.
    """

    def __init__(self, message: str, reading: CounterReading):
        super().__init__(message)
        self.reading = reading


def sysfs_base() -> Path:
    return Path(os.environ.get(SYSFS_ENV, DEFAULT_SYSFS_BASE))


def list_domains(base: Path | None = None) -> list[UncoreDomainPath]:
    base = base or sysfs_base()
    return [UncoreDomainPath(p) for p in sorted(base.glob("package_*_die_*")) if p.is_dir()]


def hz_to_khz(hz: float) -> int:
    return int(round(hz / 1000.0))


@dataclass(frozen=True)
class UncoreDomainPath:
    sysfs_dir: Path

    def __post_init__(self):
        object.__setattr__(self, "sysfs_dir", Path(self.sysfs_dir))

    @classmethod
    def resolve(cls, name: str, base: Path | None = None) -> UncoreDomainPath:
        return cls((base or sysfs_base()) / name)

    @property
    def min_file(self) -> Path:
        return self.sysfs_dir / "min_freq_khz"

    @property
    def max_file(self) -> Path:
        return self.sysfs_dir / "max_freq_khz"

    def _read_khz(self, path: Path) -> int:
        try:
            return int(path.read_text().strip())
        except OSError as err:
            raise ActuationError(f"cannot read {path}: {err}") from err
        except ValueError as err:
            raise HardwareRejectError(f"{path} does not hold a kHz value") from err

    def _write_khz(self, path: Path, khz: int) -> None:
        try:
            with open(path, "w") as f:
                f.write(f"{khz}\n")
        except PermissionError as err:
            raise ActuationError(
                f"permission denied writing {path}; run as root or grant write access to "
                f"the intel_uncore_frequency sysfs files") from err
        except OSError as err:
            # the kernel answers out-of-range writes with EINVAL
            raise HardwareRejectError(f"{path} rejected {khz} kHz: {err}") from err

    def limits_khz(self) -> tuple[int, int] | None:
        lo, hi = self.sysfs_dir / "initial_min_freq_khz", self.sysfs_dir / "initial_max_freq_khz"
        if lo.exists() and hi.exists():
            return self._read_khz(lo), self._read_khz(hi)
        return None

    def current_khz(self) -> tuple[int, int]:
        return self._read_khz(self.min_file), self._read_khz(self.max_file)

    def writable(self) -> bool:
        return all(os.access(p, os.W_OK) for p in (self.min_file, self.max_file))


def apply_command(domain: UncoreDomainPath, cmd: FrequencyCommand) -> int:
    """Pin ``domain`` to ``cmd.target`` and return the confirmed kHz value."""
    khz = hz_to_khz(cmd.target)
    limits = domain.limits_khz()
    if limits is not None and not limits[0] <= khz <= limits[1]:
        raise HardwareRejectError(
            f"{khz} kHz outside hardware range [{limits[0]}, {limits[1]}] kHz "
            f"for {domain.sysfs_dir.name}")
    cur_min, cur_max = domain.current_khz()
    if (cur_min, cur_max) != (khz, khz):
        # keep min <= max at every intermediate point
        if khz >= cur_max:
            order = (domain.max_file, domain.min_file)
        else:
            order = (domain.min_file, domain.max_file)
        for path in order:
            if domain._read_khz(path) != khz:
                domain._write_khz(path, khz)
    got = domain.current_khz()
    if got != (khz, khz):
        raise HardwareRejectError(
            f"{domain.sysfs_dir.name}: wrote {khz} kHz, read back min={got[0]} max={got[1]}")
    return khz


def _read_counter(path: Path) -> int:
    try:
        return int(Path(path).read_text().strip())
    except (OSError, ValueError) as err:
        raise SourceError(f"cannot read byte counter {path}: {err}") from err


@dataclass(frozen=True)
class CounterReading:
    timestamp: float
    count: int


def read_throughput(path: Path | str, prev: CounterReading, now: float
                    ) -> tuple[ThroughputSample, CounterReading]:
    """Difference quotient of a cumulative byte counter since ``prev``.

    Returns the sample and the new reading to pass next time. A counter that
    went backwards raises CounterResetError carrying the new reading in
    ``err.reading`` so the caller can re-arm.
    """
    count = _read_counter(Path(path))
    reading = CounterReading(now, count)
    if count < prev.count:
        raise CounterResetError(f"counter went from {prev.count} to {count}", reading)
    if not now > prev.timestamp:
        raise SourceError(f"clock did not advance ({prev.timestamp} -> {now})")
    return ThroughputSample(now, (count - prev.count) / (now - prev.timestamp)), reading


class CounterFileSource:
    """Stateful wrapper around :func:`read_throughput`."""

    def __init__(self, path: Path | str, t0: float = 0.0):
        self.path = Path(path)
        self.t0 = t0
        self._prev: CounterReading | None = None

    def arm(self, now: float) -> None:
        self._prev = CounterReading(now - self.t0, _read_counter(self.path))

    def sample(self, now: float) -> ThroughputSample | None:
        """Next sample, or None when this read only (re-)armed the baseline."""
        if self._prev is None:
            self.arm(now)
            return None
        try:
            sample, self._prev = read_throughput(self.path, self._prev, now - self.t0)
        except CounterResetError as err:
            _LOG.warning("%s; discarding sample and re-arming", err)
            self._prev = err.reading
            return None
        return sample


def run_loop(domain: UncoreDomainPath, source: CounterFileSource, governor, rounds: int,
             period: float, clock: Callable[[], float] = time.monotonic,
             sleep: Callable[[float], None] = time.sleep) -> list[tuple[float, FrequencyCommand]]:
    """Sample, decide and actuate ``rounds`` times, one actuation per period at most.

    The domain starts at the governor's initial target. Files are only
    rewritten when the target changes.
    """
    start = clock()
    source.t0 = start
    applied = apply_command(domain, FrequencyCommand(governor.initial_target, Cause.HOLD))
    source.arm(start)
    log: list[tuple[float, FrequencyCommand]] = []
    deadline = start
    for _ in range(rounds):
        deadline += period
        delay = deadline - clock()
        if delay > 0:
            sleep(delay)
        now = clock()
        sample = source.sample(now)
        if sample is None:
            continue
        cmd = governor.observe(Observation(sample.timestamp, sample.throughput))
        if hz_to_khz(cmd.target) != applied:
            applied = apply_command(domain, cmd)
        log.append((sample.timestamp, cmd))
    return log


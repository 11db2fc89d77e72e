"""Memory-throughput samples, history buffers and workload traces.

Throughput is carried in bytes/second everywhere inside the package. The
trace CSV format stores GB/s (1 GB/s = 1e9 bytes/s) for readability; the
conversion goes through :mod:`decimal` so a write/read round trip is exact.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import IO, Iterable, Iterator, Sequence

GB = 1e9
TRACE_HEADER = ("step", "demand_gbps", "compute_weight")
DEFAULT_PERIOD = 0.1


class OrderingError(ValueError):
    """A sample did not strictly follow the newest timestamp in a stream."""


class TraceParseError(ValueError):
    """Malformed trace file. ``row`` is the 1-based line number, if known."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ParameterError(ValueError):
    """Invalid parameters passed to a trace generator."""


@dataclass(frozen=True)
class ThroughputSample:
    timestamp: float
    throughput: float

    def __post_init__(self):
        if not (self.timestamp >= 0 and math.isfinite(self.timestamp)):
            raise ValueError(f"timestamp must be finite and >= 0, got {self.timestamp}")
        if not (self.throughput >= 0 and math.isfinite(self.throughput)):
            raise ValueError(f"throughput must be finite and >= 0, got {self.throughput}")


class HistoryWindow:
    """Fixed-capacity FIFO of throughput samples, oldest evicted first."""

    def __init__(self, capacity: int, samples: Iterable[ThroughputSample] = ()):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._samples: deque[ThroughputSample] = deque(maxlen=capacity)
        for s in samples:
            self.push(s)

    def push(self, sample: ThroughputSample) -> None:
        if self._samples and sample.timestamp <= self._samples[-1].timestamp:
            raise OrderingError(
                f"sample at t={sample.timestamp} does not follow newest t={self._samples[-1].timestamp}"
            )
        self._samples.append(sample)

    @property
    def samples(self) -> tuple[ThroughputSample, ...]:
        return tuple(self._samples)

    @property
    def newest(self) -> ThroughputSample:
        return self._samples[-1]

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self) -> Iterator[ThroughputSample]:
        return iter(self._samples)

    def __getitem__(self, i: int) -> ThroughputSample:
        return self._samples[i]

    def __repr__(self) -> str:
        return f"HistoryWindow(capacity={self.capacity}, samples={list(self._samples)!r})"


def push_sample(window: HistoryWindow, sample: ThroughputSample) -> HistoryWindow:
    window.push(sample)
    return window


@dataclass(frozen=True)
class TraceEntry:
    demand: float  # bytes/s requested by the memory-bound share of the step
    compute_weight: float = 0.0  # frequency-insensitive share of the step

    def __post_init__(self):
        if not (self.demand >= 0 and math.isfinite(self.demand)):
            raise ValueError(f"demand must be finite and >= 0, got {self.demand}")
        if not 0.0 <= self.compute_weight <= 1.0:
            raise ValueError(f"compute_weight must lie in [0, 1], got {self.compute_weight}")


@dataclass(frozen=True)
class WorkloadTrace:
    name: str
    period: float
    entries: tuple[TraceEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive, got {self.period}")
        if not self.entries:
            raise ValueError("trace has no entries")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def duration(self) -> float:
        """Run length when no step is slowed down."""
        return len(self.entries) * self.period

    @property
    def demands(self) -> list[float]:
        return [e.demand for e in self.entries]


# ---------------------------------------------------------------------------
# CSV trace format


def _gbps_to_bytes(text: str) -> float:
    return float(Decimal(text).scaleb(9))


def _bytes_to_gbps(value: float) -> str:
    d = Decimal(repr(float(value))).scaleb(-9).normalize()
    return format(d, "f")


def write_trace(trace: WorkloadTrace, sink: IO[str]) -> None:
    sink.write(f"# name={trace.name}\n")
    sink.write(f"# period={trace.period!r}\n")
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for i, e in enumerate(trace.entries):
        writer.writerow([i, _bytes_to_gbps(e.demand), repr(float(e.compute_weight))])


def trace_to_csv(trace: WorkloadTrace) -> str:
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()


def read_trace(source: IO[str] | IO[bytes] | str, name: str | None = None,
               period: float | None = None) -> WorkloadTrace:
    """Parse the trace CSV format.

    ``source`` may be a text or binary stream, or the CSV text itself.
    Metadata comes from ``# key=value`` comment lines; explicit ``name`` and
    ``period`` arguments take precedence over them.
    """
    if isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    meta: dict[str, str] = {}
    header_seen = False
    entries: list[TraceEntry] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        cells = [c.strip() for c in next(csv.reader([stripped]))]
        if not header_seen:
            if tuple(cells) != TRACE_HEADER:
                raise TraceParseError(
                    f"missing header {','.join(TRACE_HEADER)!r}, got {stripped!r}", lineno)
            header_seen = True
            continue
        if len(cells) != 3:
            raise TraceParseError(f"expected 3 columns, got {len(cells)}", lineno)
        try:
            step = int(cells[0])
            demand = _gbps_to_bytes(cells[1])
            weight = float(cells[2])
        except (ValueError, InvalidOperation):
            raise TraceParseError(f"non-numeric field in {stripped!r}", lineno) from None
        if step != len(entries):
            raise TraceParseError(f"expected step {len(entries)}, got {step}", lineno)
        if not (demand >= 0 and math.isfinite(demand)):
            raise TraceParseError(f"negative or non-finite demand {cells[1]}", lineno)
        if not 0.0 <= weight <= 1.0:
            raise TraceParseError(f"compute_weight {cells[2]} outside [0, 1]", lineno)
        entries.append(TraceEntry(demand, weight))

    if not entries:
        raise TraceParseError("no entries")
    if period is None:
        try:
            period = float(meta.get("period", DEFAULT_PERIOD))
        except ValueError:
            raise TraceParseError(f"bad period metadata {meta['period']!r}") from None
        if not (period > 0 and math.isfinite(period)):
            raise TraceParseError(f"period must be positive, got {period}")
    return WorkloadTrace(name or meta.get("name", "trace"), period, tuple(entries))


# ---------------------------------------------------------------------------
# synthetic generators


def _check_common(low: float, high: float, total: int, period: float, compute_weight: float):
    if low < 0 or high < 0:
        raise ParameterError("demands must be >= 0")
    if low > high:
        raise ParameterError(f"low ({low}) must not exceed high ({high})")
    if total < 1:
        raise ParameterError(f"total must be >= 1, got {total}")
    if not period > 0:
        raise ParameterError(f"period must be positive, got {period}")
    if not 0.0 <= compute_weight <= 1.0:
        raise ParameterError(f"compute_weight must lie in [0, 1], got {compute_weight}")


def _block_trace(name, low, high, block, total, period, compute_weight):
    entries = tuple(
        TraceEntry(high if (i // block) % 2 else low, compute_weight) for i in range(total)
    )
    return WorkloadTrace(name, period, entries)


def synth_phase_alternating(low: float, high: float, phase_len: int, total: int,
                            period: float = DEFAULT_PERIOD, compute_weight: float = 0.0,
                            name: str = "phase-alternating") -> WorkloadTrace:
    """Blocks of ``phase_len`` steps at ``low`` then ``high`` demand, repeated."""
    if phase_len < 1:
        raise ParameterError(f"phase_len must be >= 1, got {phase_len}")
    _check_common(low, high, total, period, compute_weight)
    return _block_trace(name, low, high, phase_len, total, period, compute_weight)


def synth_oscillating(low: float, high: float, toggle_every: int, total: int,
                      period: float = DEFAULT_PERIOD, compute_weight: float = 0.0,
                      name: str = "oscillating") -> WorkloadTrace:
    """Demand flips between ``low`` and ``high`` every ``toggle_every`` steps.

    With period 0.1 s and toggle_every=1 the demand changes ten times per
    second.
    """
    if toggle_every < 1:
        raise ParameterError(f"toggle_every must be >= 1, got {toggle_every}")
    _check_common(low, high, total, period, compute_weight)
    return _block_trace(name, low, high, toggle_every, total, period, compute_weight)


def synth_training_spikes(base: float, spike: float, spike_len: int, cycle_len: int,
                          cycles: int, period: float = DEFAULT_PERIOD,
                          compute_weight: float = 0.0,
                          name: str = "training-spikes") -> WorkloadTrace:
    """Periodic spikes: each cycle opens with ``spike_len`` steps at ``spike``."""
    if spike_len < 0 or spike_len >= cycle_len:
        raise ParameterError(f"need 0 <= spike_len < cycle_len, got {spike_len}, {cycle_len}")
    if cycles < 1:
        raise ParameterError("cycles must be >= 1 (empty trace)")
    if base < 0 or spike < 0:
        raise ParameterError("demands must be >= 0")
    _check_common(0.0, 0.0, cycles * cycle_len, period, compute_weight)
    entries = tuple(
        TraceEntry(spike if i % cycle_len < spike_len else base, compute_weight)
        for i in range(cycles * cycle_len)
    )
    return WorkloadTrace(name, period, entries)


def concat_traces(name: str, traces: Sequence[WorkloadTrace]) -> WorkloadTrace:
    if not traces:
        raise ParameterError("nothing to concatenate")
    period = traces[0].period
    for t in traces[1:]:
        if t.period != period:
            raise ParameterError(f"period mismatch: {t.period} vs {period}")
    return WorkloadTrace(name, period, tuple(e for t in traces for e in t.entries))


@dataclass(frozen=True)
class Observation:
    """Everything a governor may look at in one round.

    MAGUS reads only ``throughput``. The power and IPC fields feed the
    baseline governors and are ``None`` when the source does not provide them.
    """

    timestamp: float
    throughput: float
    package_power: float | None = None  # W
    dram_power: float | None = None  # W
    ipc: float | None = None

"""Governor sweeps over one scenario, with JSON reports and plot-ready CSVs.

Output layout in the chosen directory::

    report.json                 summary + comparison per governor
    commands_<governor>.csv     t,freq_ghz,cause
    timeline_<governor>.csv     t,achieved_gbps,dt_s,freq_ghz,pkg_power_w,gpu_power_w
    throughput_aligned.csv      t,<gov>,... achieved GB/s on a common time grid
    frequency_aligned.csv       t,<gov>,... uncore GHz on the same grid
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from magus.baselines import GOVERNOR_NAMES
from magus.governor import GHZ, ConfigError
from magus.metrics import ComparisonReport, compare
from magus.scenario import Scenario
from magus.simsys import SimResult, run
from magus.telemetry import GB


@dataclass
class ExperimentPlan:
    scenario: Scenario
    governors: list[str]
    baseline: int = 0  # index into governors
    repeats: int = 1
    output_dir: Path | None = None

    def problems(self) -> list[str]:
        out = []
        if not self.governors:
            out.append("governors: empty list")
        for g in self.governors:
            if g not in GOVERNOR_NAMES:
                out.append(f"governors: unknown governor {g!r} (valid: {', '.join(GOVERNOR_NAMES)})")
        if len(set(self.governors)) != len(self.governors):
            out.append("governors: governor listed more than once")
        if not 0 <= self.baseline < len(self.governors):
            out.append(f"baseline: index {self.baseline} out of range")
        if self.repeats < 1:
            out.append(f"repeats: must be >= 1, got {self.repeats}")
        return out


@dataclass
class RunAggregate:
    """Per-governor outcome; values are trimmed means over repeats."""

    governor: str
    exec_time: float
    pkg_energy: float
    gpu_energy: float
    dram_energy: float
    idle_power: float
    result: SimResult  # the first repeat, for logs
    repeats: int = 1

    @property
    def total_energy(self) -> float:
        return self.pkg_energy + self.gpu_energy


@dataclass
class ExperimentOutcome:
    plan: ExperimentPlan
    runs: dict[str, RunAggregate] = field(default_factory=dict)
    reports: dict[str, ComparisonReport] = field(default_factory=dict)

    @property
    def baseline_name(self) -> str:
        return self.plan.governors[self.plan.baseline]


def trimmed_mean(values: list[float]) -> float:
    """Mean after dropping one minimum and one maximum (when at least 3 values)."""
    vals = sorted(values)
    if len(vals) >= 3:
        vals = vals[1:-1]
    return math.fsum(vals) / len(vals)


def _run_one(scenario: Scenario, name: str, repeats: int) -> RunAggregate:
    results = [run(scenario.trace, scenario.make_governor(name), scenario.models)
               for _ in range(repeats)]
    first = results[0]
    return RunAggregate(
        governor=name,
        exec_time=trimmed_mean([r.exec_time for r in results]),
        pkg_energy=trimmed_mean([r.pkg_energy for r in results]),
        gpu_energy=trimmed_mean([r.gpu_energy for r in results]),
        dram_energy=trimmed_mean([r.dram_energy for r in results]),
        idle_power=first.idle_power,
        result=first,
        repeats=repeats,
    )


def run_experiment(plan: ExperimentPlan) -> ExperimentOutcome:
    problems = plan.problems()
    if problems:
        raise ConfigError(problems)
    outcome = ExperimentOutcome(plan)
    for name in plan.governors:
        outcome.runs[name] = _run_one(plan.scenario, name, plan.repeats)
    base = outcome.runs[outcome.baseline_name]
    for name, agg in outcome.runs.items():
        outcome.reports[name] = compare(agg.exec_time, agg.pkg_energy, agg.total_energy,
                                        base.exec_time, base.pkg_energy, base.total_energy,
                                        base.idle_power)
    if plan.output_dir is not None:
        write_outputs(outcome, plan.output_dir)
    return outcome


def report_dict(outcome: ExperimentOutcome) -> dict:
    runs = {}
    for name, agg in outcome.runs.items():
        runs[name] = {
            "exec_time_s": agg.exec_time,
            "pkg_energy_j": agg.pkg_energy,
            "gpu_energy_j": agg.gpu_energy,
            "dram_energy_j": agg.dram_energy,
            "total_energy_j": agg.total_energy,
            "mean_pkg_power_w": agg.pkg_energy / agg.exec_time,
            "edp_js": agg.total_energy * agg.exec_time,
            "idle_power_w": agg.idle_power,
            "ticks": len(agg.result.ticks),
            "comparison": outcome.reports[name].to_dict(),
        }
    sc = outcome.plan.scenario
    return {
        "scenario": sc.name,
        "trace": sc.trace.name,
        "trace_entries": len(sc.trace),
        "baseline": outcome.baseline_name,
        "repeats": outcome.plan.repeats,
        "governors": list(outcome.plan.governors),
        "runs": runs,
    }


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_timeline(results: dict[str, SimResult], out_dir: Path, period: float) -> list[Path]:
    """Per-governor logs plus throughput/frequency CSVs on one shared time axis."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, res in results.items():
        path = out_dir / f"commands_{name}.csv"
        rows = [["0.0", _fmt(res.ticks[0].freq / GHZ), "Initial"]]
        rows += [[_fmt(t), _fmt(c.target / GHZ), c.cause.value] for t, c in res.command_log]
        _write_csv(path, ["t", "freq_ghz", "cause"], rows)
        written.append(path)

        path = out_dir / f"timeline_{name}.csv"
        _write_csv(path, ["t", "achieved_gbps", "dt_s", "freq_ghz", "pkg_power_w", "gpu_power_w"],
                   ([_fmt(t), _fmt(k.achieved / GB), _fmt(k.duration),
                     _fmt(k.freq / GHZ), _fmt(k.package_power), _fmt(k.gpu_power)]
                    for k, (t, _) in zip(res.ticks, res.throughput_log)))
        written.append(path)

    horizon = max(r.exec_time for r in results.values())
    n = int(math.ceil(horizon / period - 1e-9))
    grid = [k * period for k in range(n)]
    names = list(results)
    columns = {name: _resample(results[name], grid) for name in names}
    for fname, idx, scale in (("throughput_aligned.csv", 0, GB), ("frequency_aligned.csv", 1, GHZ)):
        path = out_dir / fname
        rows = []
        for k, t in enumerate(grid):
            row = [_fmt(t)]
            for name in names:
                v = columns[name][k]
                row.append("" if v is None else _fmt(v[idx] / scale))
            rows.append(row)
        _write_csv(path, ["t", *names], rows)
        written.append(path)
    return written


def _resample(res: SimResult, grid: list[float]) -> list[tuple[float, float] | None]:
    """(achieved, freq) of the tick running at each grid time; None once finished."""
    out = []
    ticks = res.ticks
    j = 0
    for t in grid:
        while j < len(ticks) and ticks[j].t_start + ticks[j].duration <= t:
            j += 1
        out.append(None if j >= len(ticks) else (ticks[j].achieved, ticks[j].freq))
    return out


def write_outputs(outcome: ExperimentOutcome, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as f:
        json.dump(report_dict(outcome), f, indent=2, sort_keys=True)
        f.write("\n")
    emit_timeline({n: a.result for n, a in outcome.runs.items()}, out_dir,
                  outcome.plan.scenario.trace.period)


def format_table(outcome: ExperimentOutcome) -> str:
    cols = ["governor", "time_s", "energy_J", "perf_loss%", "pkg_pwr_save%", "energy_save%",
            "edp_save%"]
    lines = ["  ".join(f"{c:>13}" for c in cols)]
    for name, agg in outcome.runs.items():
        r = outcome.reports[name]
        vals = [name, f"{agg.exec_time:.3f}", f"{agg.total_energy:.1f}",
                f"{r.perf_loss_pct:.2f}", f"{r.pkg_power_saving_pct:.2f}",
                f"{r.energy_saving_pct:.2f}", f"{r.edp_saving_pct:.2f}"]
        lines.append("  ".join(f"{v:>13}" for v in vals))
    return "\n".join(lines)

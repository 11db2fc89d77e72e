"""Evaluation metrics relative to a baseline run.

Savings are reported as percentages and are never clamped: a governor that
does worse than the baseline shows a negative saving.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass


class MetricError(ValueError):
    pass


def _positive_base(value: float, what: str):
    if not value > 0:
        raise MetricError(f"{what} must be > 0, got {value}")


def perf_loss(t: float, t_base: float) -> float:
    """Percent increase in execution time. A speedup comes out negative."""
    _positive_base(t_base, "baseline execution time")
    return 100.0 * (t - t_base) / t_base


def power_saving(p: float, p_base: float) -> float:
    _positive_base(p_base, "baseline power")
    return 100.0 * (p_base - p) / p_base


def energy_saving(e: float, e_base: float) -> float:
    _positive_base(e_base, "baseline energy")
    return 100.0 * (e_base - e) / e_base


def edp(e: float, t: float) -> float:
    if e < 0 or t < 0:
        raise MetricError("energy and time must be >= 0")
    return e * t


def edp_saving(edp_value: float, edp_base: float) -> float:
    _positive_base(edp_base, "baseline EDP")
    return 100.0 * (edp_base - edp_value) / edp_base


def active_saving(p: float, p_base: float, p_idle: float) -> float:
    """Saving on the share of power above the idle floor.

    Works the same for energies when ``p_idle`` is the idle energy over the
    matching run length.
    """
    if p_idle < 0:
        raise MetricError(f"idle power must be >= 0, got {p_idle}")
    if not p_base > p_idle:
        raise MetricError("no active power in baseline (baseline <= idle)")
    if p < p_idle:
        raise MetricError(f"value {p} is below idle power {p_idle}")
    return 100.0 * ((p_base - p_idle) - (p - p_idle)) / (p_base - p_idle)


@dataclass(frozen=True)
class ComparisonReport:
    perf_loss_pct: float
    pkg_power_saving_pct: float
    energy_saving_pct: float
    edp_saving_pct: float
    active_power_saving_pct: float | None = None
    active_energy_saving_pct: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value_pct"])
        for k, v in self.to_dict().items():
            w.writerow([k.removesuffix("_pct"), "" if v is None else repr(v)])
        return buf.getvalue()


def compare(exec_time: float, pkg_energy: float, total_energy: float,
            base_exec_time: float, base_pkg_energy: float, base_total_energy: float,
            idle_power: float | None = None) -> ComparisonReport:
    """All metrics for one run against a baseline run.

    Package power is time-weighted (energy / time). ``idle_power`` is the
    whole-system idle floor; with it the active savings are filled in.
    """
    _positive_base(base_exec_time, "baseline execution time")
    _positive_base(exec_time, "execution time")
    p = pkg_energy / exec_time
    p_base = base_pkg_energy / base_exec_time
    e_edp = edp(total_energy, exec_time)
    base_edp = edp(base_total_energy, base_exec_time)
    active_p = active_e = None
    if idle_power is not None:
        total_p = total_energy / exec_time
        base_total_p = base_total_energy / base_exec_time
        try:
            active_p = active_saving(total_p, base_total_p, idle_power)
            active_e = active_saving(total_energy - idle_power * exec_time,
                                     base_total_energy - idle_power * base_exec_time, 0.0)
        except MetricError:
            active_p = active_e = None
    return ComparisonReport(
        perf_loss_pct=perf_loss(exec_time, base_exec_time),
        pkg_power_saving_pct=power_saving(p, p_base),
        energy_saving_pct=energy_saving(total_energy, base_total_energy),
        edp_saving_pct=edp_saving(e_edp, base_edp),
        active_power_saving_pct=active_p,
        active_energy_saving_pct=active_e,
    )


def compare_results(result, baseline, with_active: bool = True) -> ComparisonReport:
    """``compare`` for two :class:`magus.simsys.SimResult` objects."""
    idle = baseline.idle_power if with_active else None
    return compare(result.exec_time, result.pkg_energy, result.total_energy,
                   baseline.exec_time, baseline.pkg_energy, baseline.total_energy, idle)

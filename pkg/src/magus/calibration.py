"""Closed-form fit of simulator parameters to a static min-vs-max case study.

Given a measured package-power reduction, slowdown and total-energy saving
between pinning the uncore at f_min and at f_max, solve for the power model
and the trace's compute weight so the simulator reproduces those three
numbers on a training-spikes trace. Spike demand sits above the f_min
bandwidth and base demand below it, so only spike steps slow down.

This is a fit. Matching the case study afterwards checks the fitting
pipeline, not the model's ability to predict anything.
"""

from __future__ import annotations

from dataclasses import dataclass

from magus.governor import GHZ
from magus.simsys import BandwidthModel, BandwidthShape, bandwidth_at
from magus.telemetry import GB

# UNet training, Xeon 8380 + A100, uncore pinned at 0.8 vs 2.2 GHz
UNET_PKG_POWER_SAVING = 0.42
UNET_SLOWDOWN = 0.23
UNET_ENERGY_SAVING = 0.13


@dataclass(frozen=True)
class CaseStudyFit:
    compute_weight: float
    p_uncore_min: float
    p_uncore_max: float
    p_core_active: float
    p_pkg_idle: float
    p_gpu_active: float
    p_gpu_idle: float
    base: float  # bytes/s
    spike: float
    spike_len: int
    cycle_len: int
    cycles: int
    bw_max: float
    f_min: float
    f_max: float


def fit_case_study(pkg_power_saving: float = UNET_PKG_POWER_SAVING,
                   slowdown: float = UNET_SLOWDOWN,
                   energy_saving: float = UNET_ENERGY_SAVING, *,
                   p_pkg_max: float = 200.0, p_uncore_min: float = 15.0,
                   idle_share: float = 0.6, p_gpu_idle: float = 30.0,
                   bw_max: float = 20.0 * GB, f_min: float = 0.8 * GHZ,
                   f_max: float = 2.2 * GHZ, base: float = 2.0 * GB,
                   spike: float = 20.0 * GB, spike_len: int = 2, cycle_len: int = 10,
                   cycles: int = 20) -> CaseStudyFit:
    """Solve for the parameters that reproduce the three case-study ratios.

    With package power ``P`` and GPU power ``G`` constant per frequency::

        E_max = (P + G) T
        E_min = ((1 - s_p) P + G) (1 + a) T = (1 - s_e) (P + G) T

    gives ``G / P``. The uncore swing is ``s_p * P``. The slowdown fixes how
    much each spike step stretches at f_min and therefore the compute weight.
    """
    bw_min = bandwidth_at(f_min, BandwidthModel(bw_max, BandwidthShape.LINEAR), f_min, f_max)
    if not base <= bw_min < spike:
        raise ValueError("need base <= bandwidth(f_min) < spike for the closed form")
    a, s_p, s_e = slowdown, pkg_power_saving, energy_saving
    gpu_ratio = ((1 - s_e) - (1 - s_p) * (1 + a)) / ((1 + a) - (1 - s_e))
    if gpu_ratio < 0:
        raise ValueError("case-study ratios imply negative GPU power")
    p_gpu_active = gpu_ratio * p_pkg_max
    swing = s_p * p_pkg_max
    p_uncore_max = p_uncore_min + swing
    rest = p_pkg_max - p_uncore_max
    if rest < 0:
        raise ValueError("p_pkg_max too small for the required uncore swing")

    # per spike step at f_min: w + (1 - w) * spike / bw_min = 1 + a * cycle_len / spike_len
    stretch = 1 + a * cycle_len / spike_len
    mem_share = (stretch - 1) / (spike / bw_min - 1)
    if not 0 <= mem_share <= 1:
        raise ValueError("slowdown not reachable with this spike shape")
    return CaseStudyFit(
        compute_weight=1 - mem_share,
        p_uncore_min=p_uncore_min,
        p_uncore_max=p_uncore_max,
        p_core_active=rest * (1 - idle_share),
        p_pkg_idle=rest * idle_share,
        p_gpu_active=p_gpu_active,
        p_gpu_idle=p_gpu_idle,
        base=base, spike=spike, spike_len=spike_len, cycle_len=cycle_len, cycles=cycles,
        bw_max=bw_max, f_min=f_min, f_max=f_max,
    )


def scenario_toml(fit: CaseStudyFit, name: str = "unet-calibration") -> str:
    """Render a fit as a scenario file."""
    return f"""\
# Fitted so that static_min vs static_max reproduces the UNet case study:
# package power -42 %, execution time +23 %, total energy -13 %.
# Regenerate with scripts/calibrate_unet.py.
name = "{name}"
governors = ["static_max", "static_min", "magus"]
baseline = "static_max"

[trace]
name = "{name}"
period_s = 0.1

[[trace.segments]]
generator = "training_spikes"
base_gbps = {fit.base / GB!r}
spike_gbps = {fit.spike / GB!r}
spike_len = {fit.spike_len}
cycle_len = {fit.cycle_len}
cycles = {fit.cycles}
compute_weight = {fit.compute_weight!r}

[platform]
f_min_ghz = {fit.f_min / GHZ!r}
f_max_ghz = {fit.f_max / GHZ!r}

[bandwidth]
shape = "linear"
bw_max_gbps = {fit.bw_max / GB!r}

[power]
p_uncore_min_w = {fit.p_uncore_min!r}
p_uncore_max_w = {fit.p_uncore_max!r}
exponent = 1.0
p_core_active_w = {fit.p_core_active!r}
p_pkg_idle_w = {fit.p_pkg_idle!r}
p_gpu_active_w = {fit.p_gpu_active!r}
p_gpu_idle_w = {fit.p_gpu_idle!r}
"""

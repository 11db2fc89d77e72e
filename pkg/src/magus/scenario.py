"""Scenario files: a trace, platform models and governor settings in one TOML file.

Example::

    name = "phase-alternating"

    [trace]
    period_s = 0.1
    [[trace.segments]]
    generator = "phase_alternating"   # or: file = "trace.csv"
    low_gbps = 2.0
    high_gbps = 18.0
    phase_len = 40
    total = 400
    compute_weight = 0.5

    [platform]          # f_min_ghz, f_max_ghz, ipc_peak, max_steps
    [bandwidth]         # shape, bw_max_gbps, knee
    [power]             # p_uncore_min_w, p_uncore_max_w, exponent, ...
    [governor.magus]    # GovernorConfig file keys
    [governor.tdp_default]  # tdp_w, margin
    [governor.ups]      # step_ghz, ipc_tolerance, dram_delta_threshold

Bundled scenarios can be referred to by bare name (``unet-calibration``).
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from magus import telemetry
from magus.baselines import (GOVERNOR_NAMES, StaticGovernor, TdpDefaultGovernor, UpsConfig,
                             UpsGovernor)
from magus.governor import GHZ, ConfigError, GovernorConfig, MagusGovernor
from magus.simsys import BandwidthModel, PowerModel, SimModels
from magus.telemetry import GB, WorkloadTrace


class ScenarioError(ConfigError):
    """Scenario could not be loaded; ``problems`` lists every diagnostic."""


@dataclass(frozen=True)
class TdpSettings:
    tdp: float = 500.0  # W
    margin: float = 0.05


@dataclass(frozen=True)
class Scenario:
    name: str
    trace: WorkloadTrace
    models: SimModels
    magus: GovernorConfig
    tdp: TdpSettings = field(default_factory=TdpSettings)
    ups: UpsConfig = field(default_factory=UpsConfig)
    output_dir: Path | None = None
    source: Path | None = None
    governors: tuple[str, ...] = ("static_max", "magus")
    baseline: str = "static_max"
    repeats: int = 1

    def make_governor(self, name: str):
        if name == "magus":
            return MagusGovernor(self.magus)
        if name == "static_min":
            return StaticGovernor(self.models.f_min, self.models.f_min, self.models.f_max,
                                  name="static_min")
        if name == "static_max":
            return StaticGovernor(self.models.f_max, self.models.f_min, self.models.f_max,
                                  name="static_max")
        if name == "tdp_default":
            return TdpDefaultGovernor(self.tdp.tdp, self.tdp.margin, self.models.f_min,
                                      self.models.f_max)
        if name == "ups":
            return UpsGovernor(self.ups)
        raise ConfigError(f"unknown governor {name!r} (valid: {', '.join(GOVERNOR_NAMES)})")


BUNDLED = "scenarios"


def bundled_names() -> list[str]:
    root = resources.files("magus") / BUNDLED
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve_path(ref: str | Path) -> Path:
    """A path on disk, or the bundled scenario of that name."""
    p = Path(ref)
    if p.exists() or p.suffix or "/" in str(ref):
        return p
    candidate = resources.files("magus") / BUNDLED / f"{ref}.toml"
    if candidate.is_file():
        return Path(str(candidate))
    return p


# ---------------------------------------------------------------------------
# parsing with diagnostics


class _Diag:
    def __init__(self):
        self.problems: list[str] = []

    def add(self, where: str, msg: str):
        self.problems.append(f"{where}: {msg}")


def _take(section: dict, where: str, spec: dict[str, tuple[str, Any, float | None]],
          diag: _Diag) -> dict[str, Any]:
    """Map file keys to constructor kwargs.

    ``spec`` maps file key -> (kwarg name, expected type, SI scale or None).
    """
    out: dict[str, Any] = {}
    for key, value in section.items():
        if key not in spec:
            diag.add(f"{where}.{key}", f"unknown key (valid: {', '.join(spec)})")
            continue
        name, typ, scale = spec[key]
        if typ is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                diag.add(f"{where}.{key}", f"expected a number, got {value!r}")
                continue
            out[name] = float(value) * (scale or 1.0)
        elif typ is int:
            if isinstance(value, bool) or not isinstance(value, int):
                diag.add(f"{where}.{key}", f"expected an integer, got {value!r}")
                continue
            out[name] = value
        else:
            if not isinstance(value, typ):
                diag.add(f"{where}.{key}", f"expected {typ.__name__}, got {value!r}")
                continue
            out[name] = value
    return out


_PLATFORM = {
    "f_min_ghz": ("f_min", float, GHZ),
    "f_max_ghz": ("f_max", float, GHZ),
    "ipc_peak": ("ipc_peak", float, None),
    "max_steps": ("max_steps", int, None),
}
_BANDWIDTH = {
    "shape": ("shape", str, None),
    "bw_max_gbps": ("bw_max", float, GB),
    "knee": ("knee", float, None),
}
_POWER = {
    "p_uncore_min_w": ("p_uncore_min", float, None),
    "p_uncore_max_w": ("p_uncore_max", float, None),
    "exponent": ("exponent", float, None),
    "p_core_active_w": ("p_core_active", float, None),
    "p_pkg_idle_w": ("p_pkg_idle", float, None),
    "p_gpu_active_w": ("p_gpu_active", float, None),
    "p_gpu_idle_w": ("p_gpu_idle", float, None),
    "p_dram_idle_w": ("p_dram_idle", float, None),
    "dram_w_per_gbps": ("dram_w_per_gbps", float, None),
}
_TDP = {"tdp_w": ("tdp", float, None), "margin": ("margin", float, None)}
_UPS = {
    "step_ghz": ("step", float, GHZ),
    "ipc_tolerance": ("ipc_tolerance", float, None),
    "dram_delta_threshold": ("dram_delta_threshold", float, None),
}
_MAGUS = {k: (name, int if scale is None else float, scale)
          for k, (name, scale) in GovernorConfig.FILE_KEYS.items()}

_COMMON_GEN = {
    "period_s": ("period", float, None),
    "compute_weight": ("compute_weight", float, None),
    "name": ("name", str, None),
}
GENERATORS: dict[str, tuple[Callable[..., WorkloadTrace], dict]] = {
    "phase_alternating": (telemetry.synth_phase_alternating, {
        "low_gbps": ("low", float, GB), "high_gbps": ("high", float, GB),
        "phase_len": ("phase_len", int, None), "total": ("total", int, None), **_COMMON_GEN}),
    "oscillating": (telemetry.synth_oscillating, {
        "low_gbps": ("low", float, GB), "high_gbps": ("high", float, GB),
        "toggle_every": ("toggle_every", int, None), "total": ("total", int, None),
        **_COMMON_GEN}),
    "training_spikes": (telemetry.synth_training_spikes, {
        "base_gbps": ("base", float, GB), "spike_gbps": ("spike", float, GB),
        "spike_len": ("spike_len", int, None), "cycle_len": ("cycle_len", int, None),
        "cycles": ("cycles", int, None), **_COMMON_GEN}),
}


def _build(where: str, factory: Callable, kwargs: dict, diag: _Diag):
    try:
        return factory(**kwargs)
    except (ValueError, TypeError) as err:
        problems = getattr(err, "problems", None) or [str(err)]
        for p in problems:
            diag.add(where, p)
        return None


def _parse_trace(section: Any, base_dir: Path, diag: _Diag) -> WorkloadTrace | None:
    if not isinstance(section, dict):
        diag.add("trace", "missing [trace] section")
        return None
    period = section.get("period_s", telemetry.DEFAULT_PERIOD)
    name = section.get("name", "trace")
    segments = section.get("segments")
    extra = set(section) - {"period_s", "name", "segments"}
    for k in sorted(extra):
        diag.add(f"trace.{k}", "unknown key (valid: period_s, name, segments)")
    if not isinstance(segments, list) or not segments:
        diag.add("trace.segments", "need at least one segment")
        return None
    parts = []
    for n, seg in enumerate(segments):
        where = f"trace.segments[{n}]"
        seg = dict(seg)
        if "file" in seg:
            path = Path(seg.pop("file"))
            if not path.is_absolute():
                path = base_dir / path
            for k in sorted(seg):
                diag.add(f"{where}.{k}", "unknown key next to 'file'")
            try:
                with open(path, encoding="utf-8") as f:
                    parts.append(telemetry.read_trace(f, period=period))
            except FileNotFoundError:
                diag.add(f"{where}.file", f"trace file not found: {path}")
            except telemetry.TraceParseError as err:
                diag.add(f"{where}.file", f"{path}: {err}")
            continue
        gen = seg.pop("generator", None)
        if gen not in GENERATORS:
            diag.add(f"{where}.generator",
                     f"unknown generator {gen!r} (valid: {', '.join(GENERATORS)}, or file=...)")
            continue
        factory, spec = GENERATORS[gen]
        kwargs = {"period": period, **_take(seg, where, spec, diag)}
        trace = _build(where, factory, kwargs, diag)
        if trace is not None:
            parts.append(trace)
    if len(parts) != len(segments):
        return None
    return _build("trace", telemetry.concat_traces, {"name": name, "traces": parts}, diag)


def parse_scenario(data: dict, base_dir: Path = Path("."), source: Path | None = None
                   ) -> tuple[Scenario | None, list[str]]:
    diag = _Diag()
    known = {"name", "trace", "platform", "bandwidth", "power", "governor", "output",
             "governors", "baseline", "repeats"}
    for k in sorted(set(data) - known):
        diag.add(k, f"unknown section (valid: {', '.join(sorted(known))})")

    plan = {}
    names = data.get("governors", list(Scenario.governors))
    if not isinstance(names, list) or not names:
        diag.add("governors", "expected a non-empty list of governor names")
    else:
        for n in names:
            if n not in GOVERNOR_NAMES:
                diag.add("governors", f"unknown governor {n!r} (valid: {', '.join(GOVERNOR_NAMES)})")
        if len(set(names)) != len(names):
            diag.add("governors", "governor listed more than once")
        plan["governors"] = tuple(names)
    baseline = data.get("baseline", Scenario.baseline)
    if baseline not in GOVERNOR_NAMES:
        diag.add("baseline", f"unknown governor {baseline!r} (valid: {', '.join(GOVERNOR_NAMES)})")
    plan["baseline"] = baseline
    repeats = data.get("repeats", 1)
    if isinstance(repeats, bool) or not isinstance(repeats, int) or repeats < 1:
        diag.add("repeats", f"must be an integer >= 1, got {repeats!r}")
    plan["repeats"] = repeats

    trace = _parse_trace(data.get("trace"), base_dir, diag)

    def section(key):
        value = data.get(key, {})
        if not isinstance(value, dict):
            diag.add(key, "expected a table")
            return {}
        return value

    bw = _build("bandwidth", BandwidthModel, _take(section("bandwidth"), "bandwidth",
                                                   _BANDWIDTH, diag), diag)
    pm = _build("power", PowerModel, _take(section("power"), "power", _POWER, diag), diag)
    plat_kwargs = _take(section("platform"), "platform", _PLATFORM, diag)
    models = None
    if bw is not None and pm is not None:
        models = _build("platform", SimModels, {"bandwidth": bw, "power": pm, **plat_kwargs},
                        diag)

    gov = section("governor")
    for k in sorted(set(gov) - {"magus", "tdp_default", "ups"}):
        diag.add(f"governor.{k}",
                 f"no settings for governor {k!r} (valid names: {', '.join(GOVERNOR_NAMES)}; "
                 f"configurable: magus, tdp_default, ups)")
    f_bounds = {}
    if models is not None:
        f_bounds = {"f_min": models.f_min, "f_max": models.f_max}

    magus_kwargs = {**f_bounds, **_take(gov.get("magus", {}), "governor.magus", _MAGUS, diag)}
    magus = _build("governor.magus", GovernorConfig, magus_kwargs, diag)
    if magus is not None:
        for p in magus.problems():
            diag.add("governor.magus", p)
        if models is not None and (magus.f_min < models.f_min or magus.f_max > models.f_max):
            diag.add("governor.magus", "f_min_ghz/f_max_ghz outside the platform range")
    tdp = _build("governor.tdp_default", TdpSettings,
                 _take(gov.get("tdp_default", {}), "governor.tdp_default", _TDP, diag), diag)
    if tdp is not None:
        if not tdp.tdp > 0:
            diag.add("governor.tdp_default.tdp_w", "must be > 0")
        if not 0 < tdp.margin < 1:
            diag.add("governor.tdp_default.margin", "must lie in (0, 1)")
    ups = _build("governor.ups", UpsConfig,
                 {**f_bounds, **_take(gov.get("ups", {}), "governor.ups", _UPS, diag)}, diag)
    if ups is not None:
        try:
            ups.validate()
        except ConfigError as err:
            for p in err.problems:
                diag.add("governor.ups", p)

    if trace is not None and magus is not None and not magus.problems():
        if abs(trace.period - magus.sample_period) > 1e-12 * trace.period:
            diag.add("governor.magus.sample_period_s",
                     f"{magus.sample_period:g} s differs from trace period {trace.period:g} s")

    out_dir = None
    output = section("output")
    for k in sorted(set(output) - {"dir"}):
        diag.add(f"output.{k}", "unknown key (valid: dir)")
    if "dir" in output:
        out_dir = Path(output["dir"])
        if not out_dir.is_absolute():
            out_dir = base_dir / out_dir

    name = data.get("name", source.stem if source else "scenario")
    if diag.problems:
        return None, diag.problems
    return Scenario(name, trace, models, magus, tdp, ups, out_dir, source, **plan), []


def load_scenario(ref: str | Path) -> Scenario:
    path = resolve_path(ref)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ScenarioError(f"{path}: {err}") from None
    scenario, problems = parse_scenario(data, path.parent, path)
    if problems:
        raise ScenarioError([f"{path}: {p}" for p in problems])
    return scenario


def validate_file(ref: str | Path) -> list[str]:
    """Every problem in a scenario file (empty list when it is clean)."""
    try:
        load_scenario(ref)
    except ScenarioError as err:
        return err.problems
    return []


def with_models(scenario: Scenario, **changes) -> Scenario:
    return dataclasses.replace(scenario, models=dataclasses.replace(scenario.models, **changes))

"""Command-line entry point: ``magus-ufs {run,trace gen,validate,hw run}``.

Exit codes: 0 success, 1 validation found problems, 2 configuration error,
3 simulation divergence, 4 hardware access error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from magus import hwadapter, telemetry
from magus.baselines import GOVERNOR_NAMES
from magus.experiment import ExperimentPlan, format_table, run_experiment
from magus.governor import ConfigError, GovernorConfig, MagusGovernor
from magus.scenario import GENERATORS, ScenarioError, bundled_names, load_scenario, validate_file
from magus.simsys import DivergenceError

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_DIVERGED, EXIT_HW = 0, 1, 2, 3, 4

_LOG = logging.getLogger("magus")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as err:
        for p in err.problems:
            _err(p)
        return EXIT_CONFIG
    governors = args.governor.split(",") if args.governor else list(scenario.governors)
    baseline = args.baseline or scenario.baseline
    if baseline not in governors:
        governors.insert(0, baseline)
    out = args.out or scenario.output_dir
    plan = ExperimentPlan(scenario, governors, governors.index(baseline),
                          args.repeats or scenario.repeats, Path(out) if out else None)
    try:
        outcome = run_experiment(plan)
    except ConfigError as err:
        for p in err.problems:
            _err(p)
        return EXIT_CONFIG
    except DivergenceError as err:
        _err(str(err))
        return EXIT_DIVERGED
    print(f"scenario {scenario.name}, baseline {baseline}")
    print(format_table(outcome))
    if plan.output_dir is not None:
        print(f"wrote {plan.output_dir}/report.json")
    return EXIT_OK


def cmd_trace_gen(args) -> int:
    factory, spec = GENERATORS[args.generator]
    kwargs = {}
    for key, (name, typ, scale) in spec.items():
        value = getattr(args, key, None)
        if value is None:
            continue
        kwargs[name] = value * scale if scale else value
    try:
        trace = factory(**kwargs)
    except (telemetry.ParameterError, TypeError) as err:
        _err(str(err))
        return EXIT_CONFIG
    if args.out in (None, "-"):
        telemetry.write_trace(trace, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as f:
            telemetry.write_trace(trace, f)
        print(f"wrote {len(trace)} steps to {args.out}")
    return EXIT_OK


def _load_governor_config(path: str | None) -> GovernorConfig:
    if path is None:
        return GovernorConfig()
    with open(path, "rb") as f:
        data = tomllib.load(f)
    if "governor" in data:  # scenario-style file
        data = data["governor"].get("magus", {})
    return GovernorConfig.from_mapping(data)


def cmd_validate(args) -> int:
    problems = []
    if args.scenario:
        problems += validate_file(args.scenario)
    if args.governor_config:
        try:
            problems += [f"{args.governor_config}: {p}"
                         for p in _load_governor_config(args.governor_config).problems()]
        except FileNotFoundError:
            problems.append(f"{args.governor_config}: file not found")
        except (ConfigError, tomllib.TOMLDecodeError) as err:
            probs = getattr(err, "problems", [str(err)])
            problems += [f"{args.governor_config}: {p}" for p in probs]
    if not args.scenario and not args.governor_config:
        _err("nothing to validate (give a scenario and/or --governor-config)")
        return EXIT_CONFIG
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return EXIT_INVALID if problems else EXIT_OK


def cmd_hw_run(args) -> int:
    if not args.hw:
        _err("hardware mode writes uncore frequency limits; pass --hw to confirm")
        return EXIT_CONFIG
    try:
        config = _load_governor_config(args.governor_config).validate()
    except (ConfigError, FileNotFoundError) as err:
        _err(str(err))
        return EXIT_CONFIG
    domain = hwadapter.UncoreDomainPath.resolve(args.domain)
    if not (domain.min_file.exists() and domain.max_file.exists()):
        _err(f"no uncore domain at {domain.sysfs_dir} (set {hwadapter.SYSFS_ENV} or --domain)")
        return EXIT_HW
    if not domain.writable():
        _err(f"no write access to {domain.sysfs_dir}; run as root")
        return EXIT_HW
    source = hwadapter.CounterFileSource(args.counter_file)
    governor = MagusGovernor(config)
    try:
        log = hwadapter.run_loop(domain, source, governor, args.rounds, config.sample_period)
    except (hwadapter.ActuationError, hwadapter.HardwareRejectError,
            hwadapter.SourceError) as err:
        _err(str(err))
        return EXIT_HW
    for t, cmd in log:
        print(f"{t:.3f}\t{cmd.target / 1e9:g}\t{cmd.cause.value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magus-ufs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate governors on a scenario and compare them")
    p.add_argument("--scenario", required=True,
                   help=f"scenario file or bundled name ({', '.join(bundled_names())})")
    p.add_argument("--governor", help=f"comma-separated subset of {','.join(GOVERNOR_NAMES)}")
    p.add_argument("--baseline", help="governor the others are compared against")
    p.add_argument("--out", help="output directory for report.json and CSV logs")
    p.add_argument("--repeats", type=int, help="runs per governor (trimmed mean)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trace", help="trace utilities")
    tsub = p.add_subparsers(dest="trace_command", required=True)
    g = tsub.add_parser("gen", help="write a synthetic trace CSV")
    gsub = g.add_subparsers(dest="generator", required=True)
    for name, (_, spec) in GENERATORS.items():
        gp = gsub.add_parser(name)
        for key, (_, typ, _) in spec.items():
            required = key not in ("period_s", "compute_weight", "name")
            gp.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ, required=required)
        gp.add_argument("--out", help="output path (default stdout)")
        gp.set_defaults(func=cmd_trace_gen)

    p = sub.add_parser("validate", help="check scenario / governor config files")
    p.add_argument("scenario", nargs="?")
    p.add_argument("--governor-config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("hw", help="drive real uncore frequency controls")
    hsub = p.add_subparsers(dest="hw_command", required=True)
    h = hsub.add_parser("run", help="run the MAGUS loop on one uncore domain")
    h.add_argument("--hw", action="store_true", help="confirm hardware actuation")
    h.add_argument("--domain", default="package_00_die_00")
    h.add_argument("--counter-file", required=True,
                   help="file holding a cumulative memory byte count")
    h.add_argument("--governor-config")
    h.add_argument("--rounds", type=int, default=100)
    h.set_defaults(func=cmd_hw_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

import csv
import json
import math

import pytest

from magus.cli import main
from magus.metrics import energy_saving, perf_loss


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["run", "--scenario", "phase-alternating",
                 "--governor", "static_max,magus,ups", "--out", str(out)])
    assert code == 0
    return out


def test_run_writes_report(run_dir, capsys):
    report = json.loads((run_dir / "report.json").read_text())
    assert report["baseline"] == "static_max"
    assert set(report["runs"]) == {"static_max", "magus", "ups"}
    assert report["runs"]["static_max"]["comparison"]["perf_loss_pct"] == 0.0


def test_report_matches_logs(run_dir):
    report = json.loads((run_dir / "report.json").read_text())
    runs = report["runs"]
    for name, r in runs.items():
        rows = read_csv(run_dir / f"timeline_{name}.csv")
        t = math.fsum(float(x["dt_s"]) for x in rows)
        pkg = math.fsum(float(x["dt_s"]) * float(x["pkg_power_w"]) for x in rows)
        gpu = math.fsum(float(x["dt_s"]) * float(x["gpu_power_w"]) for x in rows)
        assert t == pytest.approx(r["exec_time_s"], rel=1e-12)
        assert pkg == pytest.approx(r["pkg_energy_j"], rel=1e-9)
        assert pkg + gpu == pytest.approx(r["total_energy_j"], rel=1e-9)
        base = runs["static_max"]
        cmp_ = r["comparison"]
        assert cmp_["perf_loss_pct"] == pytest.approx(
            perf_loss(r["exec_time_s"], base["exec_time_s"]), rel=1e-12, abs=1e-12)
        assert cmp_["energy_saving_pct"] == pytest.approx(
            energy_saving(r["total_energy_j"], base["total_energy_j"]), rel=1e-12, abs=1e-12)


def test_command_log_shape(run_dir):
    rows = read_csv(run_dir / "commands_magus.csv")
    assert rows[0]["cause"] == "Initial" and float(rows[0]["t"]) == 0.0
    times = [float(r["t"]) for r in rows]
    assert times == sorted(times)
    assert {r["freq_ghz"] for r in rows} == {"0.8", "2.2"}


def test_aligned_axes(run_dir):
    thr = read_csv(run_dir / "throughput_aligned.csv")
    frq = read_csv(run_dir / "frequency_aligned.csv")
    assert [r["t"] for r in thr] == [r["t"] for r in frq]
    assert list(thr[0]) == ["t", "static_max", "magus", "ups"]
    steps = [float(b["t"]) - float(a["t"]) for a, b in zip(thr, thr[1:])]
    assert all(s == pytest.approx(0.1) for s in steps)
    # static_max finishes first, so its column ends blank
    assert thr[-1]["static_max"] == ""


def test_run_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--scenario", "oscillating", "--out", str(tmp_path / d)]) == 0
    for f in ("report.json", "commands_magus.csv", "frequency_aligned.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_run_missing_trace_file(tmp_path, capsys):
    sc = tmp_path / "s.toml"
    sc.write_text('[trace]\n[[trace.segments]]\nfile = "missing.csv"\n')
    assert main(["run", "--scenario", str(sc)]) == 2
    assert "trace file not found" in capsys.readouterr().err


def test_run_unknown_governor(capsys):
    assert main(["run", "--scenario", "oscillating", "--governor", "turbo"]) == 2
    assert "turbo" in capsys.readouterr().err


def test_run_divergence(tmp_path, capsys):
    sc = tmp_path / "s.toml"
    sc.write_text('governors = ["static_min"]\nbaseline = "static_min"\n'
                  '[trace]\n[[trace.segments]]\ngenerator = "oscillating"\n'
                  'low_gbps = 20\nhigh_gbps = 20\ntoggle_every = 1\ntotal = 10\n'
                  '[platform]\nmax_steps = 3\n')
    assert main(["run", "--scenario", str(sc)]) == 3


def test_trace_gen(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["trace", "gen", "oscillating", "--low-gbps", "1", "--high-gbps", "2",
                 "--toggle-every", "2", "--total", "6", "--out", str(out)]) == 0
    from magus.telemetry import read_trace
    assert read_trace(out.read_text()).demands == [1e9, 1e9, 2e9, 2e9, 1e9, 1e9]


def test_trace_gen_bad_parameters(capsys):
    assert main(["trace", "gen", "phase_alternating", "--low-gbps", "3", "--high-gbps", "2",
                 "--phase-len", "1", "--total", "4"]) == 2


def test_validate(tmp_path, capsys):
    assert main(["validate", "unet-calibration"]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    bad = tmp_path / "g.toml"
    bad.write_text("history_capacity = 0\ntune_threshold = 2\n")
    assert main(["validate", "--governor-config", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "tune_threshold" in out


def test_validate_lists_each_problem(tmp_path, capsys):
    bad = tmp_path / "g.toml"
    bad.write_text("high_freq_threshold = 2.0\ninc_threshold_gbps_per_s = -1\n")
    assert main(["validate", "--governor-config", str(bad)]) == 1
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2


def test_hw_requires_confirmation(fake_sysfs, tmp_path, capsys):
    counter = tmp_path / "bytes"
    counter.write_text("0\n")
    assert main(["hw", "run", "--counter-file", str(counter)]) == 2


def test_hw_missing_domain(fake_sysfs, tmp_path):
    counter = tmp_path / "bytes"
    counter.write_text("0\n")
    assert main(["hw", "run", "--hw", "--domain", "package_07_die_00",
                 "--counter-file", str(counter)]) == 4


def test_hw_run_on_fake_tree(fake_sysfs, tmp_path, capsys):
    counter = tmp_path / "bytes"
    counter.write_text("0\n")
    assert main(["hw", "run", "--hw", "--counter-file", str(counter), "--rounds", "3"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 3  # counter is armed before the first round
    d = fake_sysfs / "package_00_die_00"
    assert (d / "min_freq_khz").read_text() == (d / "max_freq_khz").read_text() == "800000\n"

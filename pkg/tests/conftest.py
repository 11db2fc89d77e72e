import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None)
settings.load_profile("default")


import pytest  # noqa: E402


def make_domain(base: Path, name="package_00_die_00", lo=800_000, hi=2_200_000, cur=None):
    d = base / name
    d.mkdir(parents=True)
    cur = cur or (lo, hi)
    for fname, v in (("initial_min_freq_khz", lo), ("initial_max_freq_khz", hi),
                     ("min_freq_khz", cur[0]), ("max_freq_khz", cur[1])):
        (d / fname).write_text(f"{v}\n")
    return d


@pytest.fixture
def fake_sysfs(tmp_path, monkeypatch):
    base = tmp_path / "intel_uncore_frequency"
    make_domain(base)
    make_domain(base, "package_01_die_00")
    monkeypatch.setenv("UFS_SYSFS_BASE", str(base))
    return base


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    results = item.config._criteria
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    prev = results.get(n, (title, True))
    results[n] = (title, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")

import math

import pytest

from magus.baselines import StaticGovernor
from magus.calibration import fit_case_study, scenario_toml
from magus.metrics import compare_results
from magus.scenario import load_scenario, parse_scenario

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

G = 1e9


def test_bundled_file_matches_fit():
    text = (load_scenario("unet-calibration").source).read_text()
    assert text == scenario_toml(fit_case_study())


def test_fit_hand_values():
    fit = fit_case_study()
    # G/P = (0.87 - 0.58*1.23) / (1.23 - 0.87) = 0.1566 / 0.36
    assert fit.p_gpu_active == pytest.approx(200 * 0.1566 / 0.36)
    assert fit.p_uncore_max - fit.p_uncore_min == pytest.approx(84.0)
    # stretch 1 + 0.23*10/2 = 2.15 over spike/bw_min - 1 = 2.75 - 1
    assert fit.compute_weight == pytest.approx(1 - 1.15 / 1.75)
    assert fit.p_core_active + fit.p_pkg_idle + fit.p_uncore_max == pytest.approx(200.0)


def test_fitted_scenario_reproduces_ratios():
    sc = load_scenario("unet-calibration")
    lo = StaticGovernor(sc.models.f_min, sc.models.f_min, sc.models.f_max)
    hi = StaticGovernor(sc.models.f_max, sc.models.f_min, sc.models.f_max)
    from magus.simsys import run
    r = compare_results(run(sc.trace, lo, sc.models), run(sc.trace, hi, sc.models))
    assert r.pkg_power_saving_pct == pytest.approx(42.0, abs=1e-6)
    assert r.perf_loss_pct == pytest.approx(23.0, abs=1e-6)
    assert r.energy_saving_pct == pytest.approx(13.0, abs=1e-6)


@pytest.mark.parametrize("kw", [dict(slowdown=5.0), dict(p_pkg_max=20.0),
                                dict(base=10 * G)])
def test_unreachable_fits(kw):
    with pytest.raises(ValueError):
        fit_case_study(**kw)


def test_alternative_fit_round_trips_through_toml():
    fit = fit_case_study(p_pkg_max=250.0, cycles=5)
    sc, problems = parse_scenario(tomllib.loads(scenario_toml(fit, "alt")))
    assert problems == [] and sc.name == "alt"
    assert sc.models.power.p_gpu_active == fit.p_gpu_active
    assert len(sc.trace) == 50
    assert math.isclose(sc.trace.entries[0].compute_weight, fit.compute_weight)

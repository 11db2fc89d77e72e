import csv
import io
import json

import pytest
from hypothesis import given, strategies as st

from magus.metrics import (ComparisonReport, MetricError, active_saving, compare, edp,
                           edp_saving, energy_saving, perf_loss, power_saving)

REL = 1e-12


@pytest.mark.parametrize("base", [1.0, 37.5, 1234.0])
def test_anchor_values(base):
    assert perf_loss(1.23 * base, base) == pytest.approx(23.0, rel=REL)
    assert power_saving(0.58 * base, base) == pytest.approx(42.0, rel=REL)
    assert energy_saving(0.87 * base, base) == pytest.approx(13.0, rel=REL)


def test_active_saving_example():
    assert active_saving(150, 200, 100) == pytest.approx(50.0, rel=REL)


def test_speedup_is_negative_loss():
    assert perf_loss(0.9, 1.0) == pytest.approx(-10.0)


def test_worse_than_baseline_is_negative_saving():
    assert energy_saving(110, 100) == pytest.approx(-10.0)


@pytest.mark.parametrize("fn", [perf_loss, power_saving, energy_saving, edp_saving])
def test_zero_baseline_rejected(fn):
    with pytest.raises(MetricError):
        fn(1.0, 0.0)


def test_active_saving_errors():
    with pytest.raises(MetricError):
        active_saving(150, 100, 100)
    with pytest.raises(MetricError):
        active_saving(90, 200, 100)
    with pytest.raises(MetricError):
        active_saving(150, 200, -1)


def test_edp():
    assert edp(10.0, 2.0) == 20.0
    with pytest.raises(MetricError):
        edp(-1.0, 2.0)


pos = st.floats(1e-3, 1e6)


@given(pos)
def test_identity_is_zero(x):
    assert perf_loss(x, x) == 0 and power_saving(x, x) == 0 and energy_saving(x, x) == 0


@given(pos, pos, st.floats(0.1, 10), st.floats(0.1, 10))
def test_edp_saving_consistent_with_parts(eb, tb, fe, ft):
    e, t = eb * fe, tb * ft
    s = edp_saving(edp(e, t), edp(eb, tb))
    # EDP ratio is the product of the energy and time ratios
    ratio = (1 - energy_saving(e, eb) / 100) * (1 + perf_loss(t, tb) / 100)
    assert s == pytest.approx(100 * (1 - ratio), rel=1e-9, abs=1e-9)


@given(st.floats(0, 100), st.floats(1, 100), st.floats(0, 100))
def test_active_saving_at_least_total_saving_when_positive(idle, active_base, active):
    base = idle + active_base
    p = idle + active
    total = power_saving(p, base)
    act = active_saving(p, base, idle)
    if total >= 0:
        assert act >= total - 1e-9


def test_compare_and_serialisation():
    r = compare(12.3, 580.0, 1000.0, 10.0, 1000.0, 1100.0, idle_power=20.0)
    assert r.perf_loss_pct == pytest.approx(23.0)
    # 580/12.3 W vs 100 W
    assert r.pkg_power_saving_pct == pytest.approx(100 * (100 - 580 / 12.3) / 100)
    assert r.active_power_saving_pct is not None
    d = json.loads(r.to_json())
    assert d == r.to_dict()
    rows = list(csv.reader(io.StringIO(r.to_csv())))
    assert rows[0] == ["metric", "value_pct"]
    assert {k for k, _ in rows[1:]} == {k.removesuffix("_pct") for k in d}


def test_compare_without_idle():
    r = compare(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    assert r == ComparisonReport(0.0, 0.0, 0.0, 0.0)

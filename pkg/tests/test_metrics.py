import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from semf.errors import ContractError, ShapeError
from semf.metrics import MetricsReport, comparison_table, is_undefined, mape, r2, rmae, rmse


def test_hand_case_one():
    y, p = [100.0, 110.0], [102.0, 104.0]
    assert abs(rmse(y, p) - math.sqrt(20)) < 1e-12
    assert abs(rmae(y, p) - 4 / 105) < 1e-12
    assert abs(mape(y, p) - (2 / 100 + 6 / 110) / 2) < 1e-12
    assert abs(mape(y, p) - 0.037273) < 1e-6
    assert abs(mape(y, p, percent=True) - 3.7273) < 1e-4
    assert abs(r2(y, p) - 0.2) < 1e-12


def test_hand_case_two():
    y, p = [2.0, 4.0], [3.0, 3.0]
    assert rmse(y, p) == 1.0
    assert abs(rmae(y, p) - 1 / 3) < 1e-12
    assert abs(mape(y, p) - 0.375) < 1e-12
    assert abs(r2(y, p)) < 1e-12


def test_perfect_forecast():
    y = [1.0, 2.0, 3.0]
    assert rmse(y, y) == rmae(y, y) == mape(y, y) == 0.0
    assert r2(y, y) == 1.0


def test_constant_target_r2_undefined():
    y = [5.0, 5.0, 5.0]
    assert rmse(y, y) == 0.0
    assert is_undefined(r2(y, y))


def test_errors():
    with pytest.raises(ShapeError):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(ContractError):
        rmse([], [])
    with pytest.raises(ContractError):
        r2([1.0], [1.0])


def loop_rmse(y, p):
    total = 0.0
    for a, b in zip(y, p):
        total += (a - b) ** 2
    return math.sqrt(total / len(y))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.integers(2, 30), elements=st.floats(1, 1e3)), st.integers(0, 1000))
def test_rmse_matches_loop(y, seed):
    p = y + np.random.default_rng(seed).standard_normal(y.size)
    assert abs(rmse(y, p) - loop_rmse(y, p)) < 1e-9
    assert rmse(y, p) >= 0


def test_report_average_is_mean_of_horizons():
    rng = np.random.default_rng(0)
    y = 100 + rng.standard_normal((40, 6))
    p = y + rng.standard_normal((40, 6))
    rep = MetricsReport.from_predictions(y, p)
    for m in ("rmse", "rmae", "mape", "r2"):
        assert abs(rep.averaged[m] - np.mean([row[m] for row in rep.per_horizon])) < 1e-12
    assert rep.n_samples == 40 and rep.units == "price"
    assert all(row["r2"] <= 1 for row in rep.per_horizon)


def test_mean_predictor_r2_zero():
    y = np.random.default_rng(1).standard_normal((30, 6)) + 50
    rep = MetricsReport.from_predictions(y, np.tile(y.mean(axis=0), (30, 1)))
    for row in rep.per_horizon:
        assert abs(row["r2"]) < 1e-9


def test_csv_round_trip_exact():
    rng = np.random.default_rng(2)
    y = 10 + rng.standard_normal((12, 6))
    rep = MetricsReport.from_predictions(y, y + 0.1 * rng.standard_normal((12, 6)))
    text = rep.to_csv()
    assert text.splitlines()[0] == "horizon,rmse,rmae,mape,r2"
    assert text.splitlines()[-1].startswith("avg,")
    back = MetricsReport.from_csv(text)
    assert back.same_values(rep) and back.horizons == rep.horizons


def test_tables_render():
    y = np.arange(12.0).reshape(2, 6) + 1
    rep = MetricsReport.from_predictions(y, y + 1)
    assert rep.to_table().splitlines()[-1].split()[0] == "avg"
    table = comparison_table([(("morlet",), rep), (("line",), rep)], ("Image",))
    assert table.splitlines()[2].split()[0] == "morlet"

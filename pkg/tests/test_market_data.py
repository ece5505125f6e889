import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ginn.market_data import (DataError, PriceSeries, ReturnSeries, SplitSpec, load_csv, log_returns,
                              read_series_csv, split, windows, write_prices_csv, write_series_csv)


def write(tmp_path, text, name="prices.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_rows(tmp_path):
    ps = load_csv(write(tmp_path, "date,close\n2020-01-02,100.0\n2020-01-03,101.0\n"))
    assert len(ps) == 2
    assert ps.close.tolist() == [100.0, 101.0]
    assert str(ps.dates[0]) == "2020-01-02"


def test_load_yahoo_style_header(tmp_path):
    text = "Date,Open,High,Low,Close,Volume\n2020-01-02,1,2,0.5,1.5,10\n2020-01-03,1,2,0.5,1.6,10\n"
    assert load_csv(write(tmp_path, text)).close.tolist() == [1.5, 1.6]


def test_negative_price_reports_line(tmp_path):
    with pytest.raises(DataError, match="non-positive price at line 3"):
        load_csv(write(tmp_path, "date,close\n2020-01-02,100\n2020-01-03,-5\n"))


def test_unsorted_rows_give_sorted_series(tmp_path):
    a = load_csv(write(tmp_path, "date,close\n2020-01-02,1\n2020-01-03,2\n2020-01-06,3\n", "a.csv"))
    b = load_csv(write(tmp_path, "date,close\n2020-01-06,3\n2020-01-02,1\n2020-01-03,2\n", "b.csv"))
    assert a == b


@pytest.mark.parametrize("body, message", [
    ("2020-01-02,100\n2020-01-02,101\n", "duplicate date"),
    ("2020-01-02,100\n2020-01-03,\n", "line 3"),
    ("2020-01-02,100\n2020-01-03,nan\n", "line 3"),
    ("2020-01-02,100\n2020-13-03,1\n", "malformed date"),
    ("2020-01-02,100\n2020-01-03\n", "malformed row at line 3"),
    ("2020-01-02,abc\n", "line 2"),
])
def test_bad_rows(tmp_path, body, message):
    with pytest.raises(DataError, match=message):
        load_csv(write(tmp_path, "date,close\n" + body))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_missing_columns(tmp_path):
    with pytest.raises(DataError, match="header"):
        load_csv(write(tmp_path, "day,price\n2020-01-02,1\n"))


def test_alternative_date_format(tmp_path):
    ps = load_csv(write(tmp_path, "date,close\n06/01/1992,10\n06/02/1992,11\n"), date_format="%m/%d/%Y")
    assert str(ps.dates[0]) == "1992-06-01"


def test_price_series_invariants():
    with pytest.raises(DataError):
        PriceSeries(["2020-01-03", "2020-01-02"], [1.0, 2.0])
    with pytest.raises(DataError):
        PriceSeries(["2020-01-02"], [0.0])


def test_series_are_read_only():
    ps = PriceSeries(["2020-01-02", "2020-01-03"], [1.0, 2.0])
    with pytest.raises(ValueError):
        ps.values[0] = 3.0


def test_csv_round_trip(tmp_path, rng):
    dates = np.datetime64("2001-01-01") + np.cumsum(rng.integers(1, 4, size=200))
    ps = PriceSeries(dates, np.exp(rng.normal(size=200)) * 123.456)
    write_prices_csv(ps, tmp_path / "p.csv")
    assert load_csv(tmp_path / "p.csv") == ps


def test_returns_csv_round_trip(tmp_path, rng):
    rs = ReturnSeries(np.datetime64("2001-01-01") + np.arange(50), rng.normal(size=50) * 0.01)
    write_series_csv(rs, tmp_path / "r.csv", "log_return")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "date,log_return"
    assert read_series_csv(tmp_path / "r.csv", ReturnSeries) == rs


def prices(values):
    return PriceSeries(np.datetime64("2020-01-01") + np.arange(len(values)), values)


def test_log_returns_constant():
    assert log_returns(prices([100, 100, 100])).values.tolist() == [0.0, 0.0]


def test_log_returns_e():
    assert log_returns(prices([1.0, math.e])).values[0] == pytest.approx(1.0, abs=1e-15)


def test_log_returns_high_precision_oracle():
    # frozen from mpmath at 40 digits: ln(105/100), ln(102/105)
    expected = [0.048790164169432003065, -0.028987536873252290039]
    r = log_returns(prices([100.0, 105.0, 102.0]))
    np.testing.assert_allclose(r.values, expected, rtol=1e-15)
    assert str(r.dates[0]) == "2020-01-02"


def test_log_returns_too_short():
    with pytest.raises(DataError):
        log_returns(prices([100.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=60), st.floats(1e-3, 1e3))
def test_log_returns_scale_invariant(vals, c):
    a = log_returns(prices(vals)).values
    b = log_returns(prices([v * c for v in vals])).values
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 1e4), min_size=2, max_size=200))
def test_log_returns_telescoping_sum(vals):
    r = log_returns(prices(vals)).values
    total = math.log(vals[-1] / vals[0])
    assert abs(r.sum() - total) <= 1e-12 * max(1.0, abs(total)) + len(r) * 1e-15


def returns(n):
    return ReturnSeries(np.datetime64("2020-01-01") + np.arange(n), np.arange(n, dtype=float))


def test_split_counts():
    rs = returns(10)
    train, test = split(rs, SplitSpec(rs.dates[7]))
    assert (len(train), len(test)) == (7, 3)


def test_split_boundary_outside():
    rs = returns(10)
    with pytest.raises(DataError):
        split(rs, SplitSpec(np.datetime64("2019-01-01")))
    with pytest.raises(DataError):
        split(rs, SplitSpec(rs.dates[0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 80), st.data())
def test_split_concatenation_is_identity(n, data):
    rs = returns(n)
    k = data.draw(st.integers(1, n - 1))
    train, test = split(rs, SplitSpec(rs.dates[k]))
    assert np.array_equal(np.concatenate([train.values, test.values]), rs.values)
    assert np.array_equal(np.concatenate([train.dates, test.dates]), rs.dates)
    assert train.dates[-1] < test.dates[0]


def test_paper_split_fraction():
    # ~7,500 trading days over 1992-06-01 .. 2022-05-31, boundary 2013-06-01
    days = np.arange(np.datetime64("1992-06-01"), np.datetime64("2022-06-01"))
    weekdays = days[np.is_busday(days)]
    train, test = split(ReturnSeries(weekdays, np.zeros(weekdays.size)), SplitSpec("2013-06-01"))
    assert len(train) / len(weekdays) == pytest.approx(0.70, abs=0.01)


@pytest.mark.parametrize("n, expected", [(91, 1), (100, 10)])
def test_window_counts(n, expected):
    X, targets = windows(returns(n), 90)
    assert X.shape == (expected, 90)
    assert len(targets) == expected


def test_window_contents():
    rs = ReturnSeries(np.datetime64("1992-06-01") + np.arange(100), np.arange(100, dtype=float))
    X, targets = windows(rs, 90)
    assert targets[0] == rs.dates[90]  # the 91st observation
    assert X[0].tolist() == list(range(90))
    assert X[3].tolist() == list(range(3, 93))


def test_window_too_short():
    with pytest.raises(DataError):
        windows(returns(90), 90)

import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varpol.errors import (
    DuplicateDate,
    InsufficientData,
    MalformedRow,
    MissingFile,
    NonPositivePrice,
    TooShort,
)
from varpol.marketdata import (
    PriceSeries,
    ReturnSeries,
    WindowSpec,
    compute_returns,
    load_prices,
    split_windows,
)


def _series(closes):
    start = dt.date(2020, 1, 1)
    return PriceSeries(tuple(start + dt.timedelta(days=i) for i in range(len(closes))), closes)


def _returns(values):
    start = dt.date(2020, 1, 1)
    return ReturnSeries(tuple(start + dt.timedelta(days=i) for i in range(len(values))), values)


def test_load_two_rows(write_csv):
    p = load_prices(write_csv("date,close\n2020-01-01,100\n2020-01-02,110\n"))
    assert len(p) == 2
    assert list(p.closes) == [100.0, 110.0]


def test_load_sorts_rows(write_csv):
    p = load_prices(write_csv("date,close\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n"))
    assert p.dates == (dt.date(2020, 1, 1), dt.date(2020, 1, 2), dt.date(2020, 1, 3))
    assert list(p.closes) == [1.0, 2.0, 3.0]


def test_duplicate_date(write_csv):
    with pytest.raises(DuplicateDate):
        load_prices(write_csv("date,close\n2020-01-01,100\n2020-01-01,101\n"))


def test_non_positive_price_reports_line(write_csv):
    with pytest.raises(NonPositivePrice) as info:
        load_prices(write_csv("date,close\n2020-01-01,100\n2020-01-02,-5\n"))
    assert info.value.line == 3


@pytest.mark.parametrize(
    "text",
    ["day,price\n2020-01-01,1\n2020-01-02,2\n", "date,close\n2020-01-01,1,2\n", "date,close\nyesterday,1\n", "date,close\n2020-01-01,abc\n", "date,close\n2020-01-01,nan\n"],
)
def test_malformed(write_csv, text):
    with pytest.raises(MalformedRow):
        load_prices(write_csv(text))


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_prices(tmp_path / "absent.csv")


def test_single_row_too_short(write_csv):
    with pytest.raises(TooShort):
        load_prices(write_csv("date,close\n2020-01-01,1\n"))


def test_blank_lines_skipped(write_csv):
    assert len(load_prices(write_csv("date,close\n2020-01-01,1\n\n2020-01-02,2\n"))) == 2


def test_returns_basic():
    assert compute_returns(_series([100, 110])).values.tolist() == pytest.approx([0.10])
    assert compute_returns(_series([50, 50, 50])).values.tolist() == [0.0, 0.0]
    r = compute_returns(_series([100, 110, 99]))
    assert r.values == pytest.approx([0.10, -0.10], rel=1e-14)
    assert r.dates == _series([100, 110, 99]).dates[1:]


def test_price_series_needs_two():
    with pytest.raises(TooShort):
        _series([100.0])


def test_series_are_read_only():
    p = _series([1.0, 2.0])
    with pytest.raises(ValueError):
        p.closes[0] = 5.0


def test_windows_default_protocol():
    w = split_windows(_returns(np.zeros(800)))
    assert (len(w.fit), len(w.holdout), len(w.terminal)) == (700, 50, 26)
    assert not w.terminal_overlaps_holdout


def test_windows_insufficient():
    with pytest.raises(InsufficientData):
        split_windows(_returns(np.zeros(10)))


def test_windows_overlap_boundary():
    w = split_windows(_returns([0.1, 0.2, 0.3]), WindowSpec(2, 1, 1))
    assert w.fit.values.tolist() == [0.1, 0.2]
    assert w.holdout.values.tolist() == [0.3]
    assert w.terminal.values.tolist() == [0.3]
    assert w.terminal_overlaps_holdout


def test_windows_offset():
    w = split_windows(_returns(np.arange(10) / 100), WindowSpec(3, 2, 4), offset=2)
    assert w.fit.values.tolist() == pytest.approx([0.02, 0.03, 0.04])
    assert w.holdout.values.tolist() == pytest.approx([0.05, 0.06])
    with pytest.raises(InsufficientData):
        split_windows(_returns(np.arange(10) / 100), WindowSpec(3, 2, 4), offset=6)


def test_window_spec_positive():
    with pytest.raises(ValueError):
        WindowSpec(0, 1, 1)


@given(
    st.floats(1.0, 1e4),
    st.lists(st.floats(-0.5, 0.5, allow_subnormal=False), min_size=1, max_size=60),
)
def test_returns_round_trip(p0, rets):
    closes = p0 * np.cumprod(np.concatenate([[1.0], 1.0 + np.asarray(rets)]))
    back = compute_returns(_series(closes)).values
    assert np.allclose(back, rets, rtol=1e-12, atol=1e-12)


@given(
    st.integers(1, 40), st.integers(1, 40), st.integers(1, 40), st.integers(0, 10), st.integers(2, 120)
)
def test_window_sizes_exact_or_error(fit_len, hold_len, term_len, offset, n):
    r = _returns(np.zeros(n))
    spec = WindowSpec(fit_len, hold_len, term_len)
    try:
        w = split_windows(r, spec, offset)
    except InsufficientData:
        assert offset + fit_len + hold_len > n or term_len > n
        return
    assert (len(w.fit), len(w.holdout), len(w.terminal)) == (fit_len, hold_len, term_len)

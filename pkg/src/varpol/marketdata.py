"""Price ingestion, simple returns and the fit / holdout / terminal windows."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateDate,
    InsufficientData,
    MalformedRow,
    MissingFile,
    NonPositivePrice,
    TooShort,
)

HEADER = ("date", "close")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriceSeries:
    dates: tuple[dt.date, ...]
    closes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "closes", _frozen(self.closes))
        if len(self.dates) != len(self.closes):
            raise ValueError("dates and closes differ in length")
        if len(self.dates) < 2:
            raise TooShort(f"need at least 2 prices, got {len(self.dates)}")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if not np.all(self.closes > 0):
            raise ValueError("closes must be positive")

    def __len__(self):
        return len(self.dates)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if len(self.dates) != len(self.values):
            raise ValueError("dates and values differ in length")
        if np.any(self.values <= -1.0):
            raise ValueError("simple returns must exceed -1")

    def __len__(self):
        return len(self.values)

    def window(self, start: int, stop: int) -> ReturnSeries:
        return ReturnSeries(self.dates[start:stop], self.values[start:stop])


@dataclass(frozen=True)
class WindowSpec:
    fit_len: int = 700
    holdout_len: int = 50
    terminal_len: int = 26

    def __post_init__(self):
        for name in ("fit_len", "holdout_len", "terminal_len"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Windows:
    fit: ReturnSeries
    holdout: ReturnSeries
    terminal: ReturnSeries
    terminal_overlaps_holdout: bool
    offset: int = 0

    def __iter__(self):
        return iter((self.fit, self.holdout, self.terminal))


def load_prices(path) -> PriceSeries:
    """Read a ``date,close`` CSV with ISO-8601 dates.

    Rows may appear in any order; the result is sorted by date.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"no such file: {path}")
    rows: list[tuple[dt.date, float]] = []
    seen: dict[dt.date, int] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != HEADER:
            raise MalformedRow(1, "expected header 'date,close'")
        for record in reader:
            line = reader.line_num
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != 2:
                raise MalformedRow(line, f"expected 2 fields, got {len(record)}")
            try:
                date = dt.date.fromisoformat(record[0].strip())
                close = float(record[1])
            except ValueError as exc:
                raise MalformedRow(line, str(exc)) from None
            if not math.isfinite(close):
                raise MalformedRow(line, "close is not finite")
            if close <= 0:
                raise NonPositivePrice(line)
            if date in seen:
                raise DuplicateDate(date.isoformat())
            seen[date] = line
            rows.append((date, close))
    rows.sort(key=lambda r: r[0])
    if len(rows) < 2:
        raise TooShort(f"{path} holds {len(rows)} price rows; need at least 2")
    return PriceSeries(tuple(d for d, _ in rows), [c for _, c in rows])


def compute_returns(prices: PriceSeries) -> ReturnSeries:
    closes = prices.closes
    if len(closes) < 2:
        raise TooShort("need at least 2 prices")
    values = (closes[1:] - closes[:-1]) / closes[:-1]
    return ReturnSeries(prices.dates[1:], values)


def split_windows(returns: ReturnSeries, spec: WindowSpec = WindowSpec(), offset: int = 0) -> Windows:
    """Carve the estimation, out-of-sample and backtest windows.

    ``fit`` starts at ``offset``, ``holdout`` follows it directly, and
    ``terminal`` is always the last ``terminal_len`` observations of the
    series, so it overlaps the holdout when the series is short.
    """
    n = len(returns)
    if offset < 0:
        raise InsufficientData("offset must be non-negative")
    need = offset + spec.fit_len + spec.holdout_len
    if need > n:
        raise InsufficientData(f"fit+holdout windows need {need} returns, series has {n}")
    if spec.terminal_len > n:
        raise InsufficientData(f"terminal window needs {spec.terminal_len} returns, series has {n}")
    fit_stop = offset + spec.fit_len
    hold_stop = fit_stop + spec.holdout_len
    term_start = n - spec.terminal_len
    return Windows(
        fit=returns.window(offset, fit_stop),
        holdout=returns.window(fit_stop, hold_stop),
        terminal=returns.window(term_start, n),
        terminal_overlaps_holdout=term_start < hold_stop,
        offset=offset,
    )

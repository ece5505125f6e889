"""Price ingestion, log returns, date splits and rolling windows.

Dates are stored as ``numpy.datetime64[D]`` arrays and values as float64
arrays. Both are made read-only on construction so a series can be shared
freely.

Input CSV: header row with (case-insensitive) ``date`` and ``close``
columns, comma separated, UTF-8. Dates are ISO-8601 unless a
``date_format`` (``datetime.strptime`` syntax) is passed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterator

import numpy as np


class DataError(ValueError):
    """Raised for malformed or invariant-violating input data."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def as_dates(values) -> np.ndarray:
    return np.asarray(values, dtype="datetime64[D]")


@dataclass(frozen=True, eq=False)
class DatedSeries:
    """Strictly increasing dates paired with float values."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = as_dates(self.dates)
        values = np.asarray(self.values, dtype=np.float64)
        if dates.ndim != 1 or values.shape != dates.shape:
            raise DataError(f"dates and values must be 1-D and equal length, got {dates.shape} and {values.shape}")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise DataError("dates must be strictly increasing")
        object.__setattr__(self, "dates", _frozen(dates))
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return int(self.values.size)

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(self.dates, other.dates) and np.array_equal(self.values, other.values)

    def __iter__(self) -> Iterator[tuple[np.datetime64, float]]:
        return zip(self.dates, self.values.tolist())

    def slice(self, start: int | None = None, stop: int | None = None):
        return type(self)(self.dates[start:stop], self.values[start:stop])

    def select(self, mask: np.ndarray):
        return type(self)(self.dates[mask], self.values[mask])

    def between(self, start=None, end=None):
        """Entries with ``start <= date < end`` (either bound optional)."""
        mask = np.ones(len(self), dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates < np.datetime64(end, "D")
        return self.select(mask)


class PriceSeries(DatedSeries):
    def __post_init__(self):
        super().__post_init__()
        bad = ~(self.values > 0)
        if bad.any():
            i = int(np.argmax(bad))
            raise DataError(f"non-positive price {self.values[i]!r} on {self.dates[i]}")

    @property
    def close(self) -> np.ndarray:
        return self.values


class ReturnSeries(DatedSeries):
    pass


@dataclass(frozen=True)
class SplitSpec:
    boundary_date: np.datetime64
    train_fraction: float | None = None  # informational only

    def __post_init__(self):
        object.__setattr__(self, "boundary_date", np.datetime64(self.boundary_date, "D"))


def _parse_date(text: str, date_format: str | None) -> np.datetime64:
    if date_format is None:
        return np.datetime64(datetime.strptime(text, "%Y-%m-%d").date(), "D")
    return np.datetime64(datetime.strptime(text, date_format).date(), "D")


def load_csv(path, date_format: str | None = None, date_column: str = "date",
             close_column: str = "close") -> PriceSeries:
    """Read a price CSV, sort rows by date and validate them.

    Raises ``FileNotFoundError`` for a missing file and ``DataError`` (with
    the 1-based file line number) for malformed rows, empty or non-positive
    closes and duplicate dates.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"price file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        names = [h.strip().lower() for h in header]
        try:
            di = names.index(date_column.lower())
            ci = names.index(close_column.lower())
        except ValueError:
            raise DataError(f"{path}: header must contain '{date_column}' and '{close_column}' columns, got {header}") from None

        rows: list[tuple[np.datetime64, float, int]] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(f"malformed row at line {line}: expected {len(header)} fields, got {len(row)}")
            try:
                day = _parse_date(row[di].strip(), date_format)
            except ValueError:
                raise DataError(f"malformed date {row[di]!r} at line {line}") from None
            text = row[ci].strip()
            try:
                close = float(text)
            except ValueError:
                raise DataError(f"malformed close {text!r} at line {line}") from None
            if not math.isfinite(close):
                raise DataError(f"missing or non-finite close at line {line}")
            if close <= 0:
                raise DataError(f"non-positive price at line {line}")
            rows.append((day, close, line))

    if not rows:
        raise DataError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if prev[0] == cur[0]:
            raise DataError(f"duplicate date {cur[0]} at line {max(prev[2], cur[2])}")
    return PriceSeries([r[0] for r in rows], [r[1] for r in rows])


def format_value(x: float) -> str:
    # shortest repr round-trips exactly
    return repr(float(x))


def write_series_csv(series: DatedSeries, path, value_name: str) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(f"date,{value_name}\n")
        for d, v in zip(series.dates, series.values.tolist()):
            f.write(f"{d},{format_value(v)}\n")


def write_prices_csv(prices: PriceSeries, path) -> None:
    write_series_csv(prices, path, "close")


def read_series_csv(path, cls=DatedSeries, value_name: str | None = None):
    """Read a two-column ``date,<value>`` file written by ``write_series_csv``."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"series file not found: {path}")
    dates, values = [], []
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise DataError(f"{path}: expected a 'date,<value>' header")
        col = 1
        if value_name is not None:
            names = [h.strip() for h in header]
            if value_name not in names:
                raise DataError(f"{path}: missing column {value_name!r}")
            col = names.index(value_name)
        for row in reader:
            if not row:
                continue
            try:
                dates.append(_parse_date(row[0].strip(), None))
                values.append(float(row[col]))
            except (ValueError, IndexError):
                raise DataError(f"malformed row at line {reader.line_num} of {path}") from None
    return cls(dates, values)


def log_returns(prices: PriceSeries) -> ReturnSeries:
    """r_t = ln(P_t / P_{t-1}), dated by the later day of each pair."""
    if len(prices) < 2:
        raise DataError("need at least 2 prices to compute returns")
    p = prices.values
    return ReturnSeries(prices.dates[1:], np.log(p[1:] / p[:-1]))


def split(series: DatedSeries, spec: SplitSpec):
    """Train is strictly before the boundary, test is on/after it."""
    b = spec.boundary_date
    if len(series) == 0 or not (series.dates[0] < b <= series.dates[-1]):
        raise DataError(f"split boundary {b} outside series range")
    k = int(np.searchsorted(series.dates, b, side="left"))
    return series.slice(None, k), series.slice(k, None)


def windows(series: DatedSeries, window_len: int = 90):
    """Rolling windows of ``window_len`` values and the day each one forecasts.

    Returns ``(X, target_dates)`` where ``X[i]`` holds the values for days
    ``t-window_len .. t-1`` and ``target_dates[i]`` is day ``t``.
    """
    if window_len < 1:
        raise ValueError("window_len must be positive")
    n = len(series)
    if n <= window_len:
        raise DataError(f"series of length {n} too short for window {window_len}")
    x = np.lib.stride_tricks.sliding_window_view(series.values, window_len)[: n - window_len]
    return np.array(x), series.dates[window_len:]

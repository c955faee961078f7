"""CSV price ingestion, pipeline configuration, and series validation."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigError, FormatError, OrderError, ParseError
from .surface import (
    DEFAULT_TERM_SETS,
    FIT_METHODS,
    SERIES_NAMES,
    FeatureSpec,
    TermSet,
)

MISSING_MARKERS = ("", "null", "NaN")


@dataclass(frozen=True)
class PriceSeries:
    """Dated price observations; missing values are carried as NaN.

    Dates are kept for validation and reporting only; downstream math runs
    on the integer trading-day index 1..T.
    """

    dates: tuple[dt.date, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if len(self.dates) != self.values.size or self.values.ndim != 1:
            raise ValueError("dates and values must be equally long 1-d sequences")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise OrderError(f"dates must be strictly increasing, got {prev} then {cur}")
        finite_or_nan = np.isfinite(self.values) | np.isnan(self.values)
        if not np.all(finite_or_nan):
            raise ValueError("prices must be finite numbers or missing")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)


@dataclass(frozen=True)
class ValidationReport:
    """Data-quality findings for one price series; report-only."""

    missing_count: int
    nonpositive_count: int
    gaps: tuple[tuple[dt.date, dt.date], ...]
    fatal: bool

    @property
    def is_clean(self) -> bool:
        return not (self.missing_count or self.nonpositive_count or self.gaps)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the pipeline needs beyond the price file itself."""

    price_column: str | None = None
    kz_trend: tuple[int, int] = (365, 3)
    kz_seasonal: tuple[int, int] = (15, 5)
    n_train: int = 2000
    feature_spec: FeatureSpec = FeatureSpec()
    term_sets: Mapping[str, TermSet] = field(
        default_factory=lambda: dict(DEFAULT_TERM_SETS)
    )
    fit_method: str = "lar"
    outlier_threshold: float = 3.0
    confidence_level: float = 0.95

    def __post_init__(self):
        for window, iters in (self.kz_trend, self.kz_seasonal):
            if window < 3 or window % 2 == 0:
                raise ConfigError(f"window must be odd and >= 3, got {window}")
            if iters < 1:
                raise ConfigError(f"iterations must be >= 1, got {iters}")
        if self.n_train <= 0:
            raise ConfigError(f"n_train must be positive, got {self.n_train}")
        if self.fit_method not in FIT_METHODS:
            raise ConfigError(f"fit_method must be one of {FIT_METHODS}")
        if not 0.0 < self.confidence_level < 1.0:
            raise ConfigError("confidence_level must lie in (0, 1)")
        if self.outlier_threshold <= 0:
            raise ConfigError("outlier_threshold must be > 0")
        for name, terms in self.term_sets.items():
            if name not in SERIES_NAMES:
                raise ConfigError(f"unknown series {name!r} in term sets")
            if self.n_train < len(terms):
                raise ConfigError(
                    f"n_train={self.n_train} is below the {len(terms)} terms "
                    f"configured for {name}"
                )


_INT_KEYS = {
    "kz_trend_window", "kz_trend_iters",
    "kz_seasonal_window", "kz_seasonal_iters",
    "n_train", "lag",
}
_FLOAT_KEYS = {"outlier_threshold", "confidence_level"}
_TERM_KEYS = {f"terms_{name}": name for name in SERIES_NAMES}
_STRING_KEYS = {"price_column", "fit_method"}
CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _STRING_KEYS | set(_TERM_KEYS)


def load_config(raw_text: str) -> PipelineConfig:
    """Parse a flat ``key = value`` document into a PipelineConfig.

    Unset keys fall back to the documented defaults: KZ windows (365, 3)
    and (15, 5), n_train 2000, fit_method lar, outlier_threshold 3.0,
    confidence_level 0.95, lag 1.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(raw_text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = key.strip(), value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    def take_int(key: str, default: int) -> int:
        if key not in raw:
            return default
        try:
            return int(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {raw[key]!r}") from exc

    def take_float(key: str, default: float) -> float:
        if key not in raw:
            return default
        try:
            return float(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {raw[key]!r}") from exc

    term_sets = dict(DEFAULT_TERM_SETS)
    for key, series in _TERM_KEYS.items():
        if key in raw:
            try:
                term_sets[series] = TermSet.parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from exc

    lag = take_int("lag", 1)
    if lag < 1:
        raise ConfigError(f"lag must be >= 1, got {lag}")

    return PipelineConfig(
        price_column=raw.get("price_column") or None,
        kz_trend=(take_int("kz_trend_window", 365), take_int("kz_trend_iters", 3)),
        kz_seasonal=(
            take_int("kz_seasonal_window", 15),
            take_int("kz_seasonal_iters", 5),
        ),
        n_train=take_int("n_train", 2000),
        feature_spec=FeatureSpec(lag=lag),
        term_sets=term_sets,
        fit_method=raw.get("fit_method", "lar"),
        outlier_threshold=take_float("outlier_threshold", 3.0),
        confidence_level=take_float("confidence_level", 0.95),
    )


def _pick_price_column(header: list[str], config: PipelineConfig) -> str:
    if config.price_column is not None:
        if config.price_column not in header:
            raise FormatError(
                f"price column {config.price_column!r} not found in header {header}"
            )
        return config.price_column
    # adjusted close is the standard analysis column when the export has one
    if "Adj Close" in header:
        return "Adj Close"
    if "Close" in header:
        return "Close"
    raise FormatError(f"no Close or Adj Close column in header {header}")


def parse_price_csv(raw_text: str, config: PipelineConfig | None = None) -> PriceSeries:
    """Parse an OHLC-style CSV export into a price series.

    The first row must be a header containing at least Date plus the
    configured price column; cells equal to "null", "NaN", or empty are
    recorded as missing.
    """
    config = config or PipelineConfig()
    rows = [row for row in csv.reader(io.StringIO(raw_text))]
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise FormatError("price file is empty")
    header = [cell.strip().lstrip("﻿") for cell in rows[0]]
    if len(rows) == 1:
        raise FormatError("price file has a header but no data rows")
    if "Date" not in header:
        raise FormatError(f"no Date column in header {header}")
    date_idx = header.index("Date")
    price_idx = header.index(_pick_price_column(header, config))

    dates: list[dt.date] = []
    values: list[float] = []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) <= max(date_idx, price_idx):
            raise ParseError(f"row {rownum} has too few cells", row=rownum)
        try:
            date = dt.date.fromisoformat(row[date_idx].strip())
        except ValueError as exc:
            raise ParseError(
                f"row {rownum}: bad date {row[date_idx]!r}: {exc}", row=rownum
            ) from exc
        if dates and date <= dates[-1]:
            raise OrderError(
                f"row {rownum}: date {date} does not increase past {dates[-1]}"
            )
        cell = row[price_idx].strip()
        if cell in MISSING_MARKERS:
            value = float("nan")
        else:
            try:
                value = float(cell)
            except ValueError as exc:
                raise ParseError(
                    f"row {rownum}: cannot parse price {cell!r}", row=rownum
                ) from exc
            if not np.isfinite(value):
                raise ParseError(
                    f"row {rownum}: price {cell!r} is not finite", row=rownum
                )
        dates.append(date)
        values.append(value)
    return PriceSeries(tuple(dates), np.array(values))


def price_series_to_csv(series: PriceSeries, price_column: str = "Close") -> str:
    """Serialize a series back to CSV; re-parsing yields an identical series."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Date", price_column])
    for date, value in zip(series.dates, series.values):
        cell = "null" if np.isnan(value) else repr(float(value))
        writer.writerow([date.isoformat(), cell])
    return buf.getvalue()


def validate_series(series: PriceSeries, max_gap_days: int = 7) -> ValidationReport:
    """Data-quality report: missing entries, non-positive prices, date gaps.

    A non-positive non-missing price is fatal because downstream returns
    take logarithms.
    """
    missing = series.missing
    nonpositive = int(np.count_nonzero(~missing & (series.values <= 0)))
    gaps = tuple(
        (prev, cur)
        for prev, cur in zip(series.dates, series.dates[1:])
        if (cur - prev).days > max_gap_days
    )
    return ValidationReport(
        missing_count=int(np.count_nonzero(missing)),
        nonpositive_count=nonpositive,
        gaps=gaps,
        fatal=nonpositive > 0,
    )

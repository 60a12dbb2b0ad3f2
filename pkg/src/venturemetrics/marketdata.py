"""Benchmark index and risk-free rate series on a calendar quarter grid.

The quarterly log market return for quarter q is

    ln R_m(q) = ln(level at end of q / level at end of q-1)

with the quarter-end level taken as the last observation dated on or before
the quarter's final day. Risk-free rates are annualized percent (discount
basis, FRED TB3MS shape) sampled at the start of each quarter and converted
to a quarterly log return, ln(1 + r/100) / 4 by default.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


class MarketDataError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Quarter:
    year: int
    q: int  # 1..4

    def __post_init__(self):
        if not 1 <= self.q <= 4:
            raise ValueError(f"quarter index {self.q} outside 1..4")

    @staticmethod
    def of(date: dt.date) -> "Quarter":
        return Quarter(date.year, (date.month - 1) // 3 + 1)

    @property
    def start(self) -> dt.date:
        return dt.date(self.year, 3 * self.q - 2, 1)

    @property
    def end(self) -> dt.date:
        if self.q == 4:
            return dt.date(self.year, 12, 31)
        return dt.date(self.year, 3 * self.q + 1, 1) - dt.timedelta(days=1)

    def prev(self) -> "Quarter":
        return Quarter(self.year - 1, 4) if self.q == 1 else Quarter(self.year, self.q - 1)

    def next(self) -> "Quarter":
        return Quarter(self.year + 1, 1) if self.q == 4 else Quarter(self.year, self.q + 1)

    def __str__(self) -> str:
        return f"{self.year}Q{self.q}"

    @staticmethod
    def parse(text: str) -> "Quarter":
        year, q = text.split("Q")
        return Quarter(int(year), int(q))


class QuarterGrid:
    """Contiguous calendar quarters covering a sample window."""

    def __init__(self, start: dt.date, end: dt.date):
        if end < start:
            raise ValueError("window end precedes start")
        self.start = start
        self.end = end
        quarters = []
        q = Quarter.of(start)
        last = Quarter.of(end)
        while q <= last:
            quarters.append(q)
            q = q.next()
        self.quarters: tuple[Quarter, ...] = tuple(quarters)
        self._index = {q: i for i, q in enumerate(self.quarters)}

    def __len__(self) -> int:
        return len(self.quarters)

    def __iter__(self):
        return iter(self.quarters)

    def __contains__(self, q: Quarter) -> bool:
        return q in self._index

    def quarter_of(self, date: dt.date) -> Optional[Quarter]:
        q = Quarter.of(date)
        return q if q in self._index else None


def _validated_series(observations: Iterable[tuple[dt.date, float]], name: str,
                      positive: bool) -> tuple[tuple[dt.date, float], ...]:
    obs = tuple(observations)
    for i, (date, value) in enumerate(obs):
        if not math.isfinite(value):
            raise MarketDataError(f"{name}: non-finite value at {date}")
        if positive and value <= 0:
            raise MarketDataError(f"{name}: non-positive value {value} at {date}")
        if i and obs[i - 1][0] >= date:
            raise MarketDataError(f"{name}: dates not strictly increasing at {date}")
    return obs


@dataclass(frozen=True)
class PriceSeries:
    observations: tuple[tuple[dt.date, float], ...]

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[dt.date, float]]) -> "PriceSeries":
        return PriceSeries(_validated_series(pairs, "price series", positive=True))

    def last_on_or_before(self, date: dt.date) -> Optional[tuple[dt.date, float]]:
        last = None
        for d, v in self.observations:
            if d > date:
                break
            last = (d, v)
        return last


@dataclass(frozen=True)
class RateSeries:
    observations: tuple[tuple[dt.date, float], ...]

    @staticmethod
    def from_pairs(pairs: Iterable[tuple[dt.date, float]]) -> "RateSeries":
        return RateSeries(_validated_series(pairs, "rate series", positive=False))

    def rate_on_or_before(self, date: dt.date) -> Optional[float]:
        rate = None
        for d, v in self.observations:
            if d > date:
                break
            rate = v
        return rate


@dataclass(frozen=True)
class MarketMoments:
    mu_ln_rf: float
    mu_ln_rm: float
    var_ln_rm: float


def fetch_csv(url: str, timeout: float = 30.0) -> str:
    """Fetch a CSV body over HTTP(S).

    Strictly opt-in: nothing in the pipeline touches the network unless the
    user explicitly asks for a fetch.
    """
    from urllib.request import urlopen

    if not url.startswith(("http://", "https://")):
        raise MarketDataError(f"not an http(s) url: {url!r}")
    with urlopen(url, timeout=timeout) as resp:
        return resp.read().decode("utf-8")


def read_price_csv(text: str) -> PriceSeries:
    """`date,level` rows, ISO dates."""
    return PriceSeries.from_pairs(_read_two_column(text, "level"))


def read_rate_csv(text: str) -> RateSeries:
    """`date,rate_percent` rows, ISO dates, annualized percent."""
    return RateSeries.from_pairs(_read_two_column(text, "rate_percent"))


def _read_two_column(text: str, value_col: str) -> list[tuple[dt.date, float]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MarketDataError("empty market data file")
    if len(header) != 2 or header[0] != "date" or header[1] != value_col:
        raise MarketDataError(f"expected header ['date', {value_col!r}], got {header!r}")
    pairs = []
    for row in reader:
        if not row:
            continue
        pairs.append((dt.date.fromisoformat(row[0].strip()), float(row[1])))
    return pairs


def quarterly_log_market_returns(series: PriceSeries, grid: QuarterGrid) -> dict[Quarter, float]:
    """Per-quarter ln of the ratio of consecutive quarter-end levels."""
    before = series.last_on_or_before(grid.quarters[0].prev().end)
    if before is None:
        raise MarketDataError(f"no index level on or before {grid.quarters[0].prev()}")
    prev_level = before[1]
    out: dict[Quarter, float] = {}
    for q in grid:
        obs = series.last_on_or_before(q.end)
        if obs is None or obs[0] < q.start:
            raise MarketDataError(f"no index level within quarter {q}")
        out[q] = math.log(obs[1] / prev_level)
        prev_level = obs[1]
    return out


def quarterly_log_riskfree(series: RateSeries, grid: QuarterGrid,
                           simple: bool = False) -> dict[Quarter, float]:
    """Quarterly log risk-free return from the rate observed at quarter start.

    Default conversion is ln(1 + r/100)/4; `simple` switches to (r/100)/4.
    """
    out: dict[Quarter, float] = {}
    for q in grid:
        rate = series.rate_on_or_before(q.start)
        if rate is None:
            raise MarketDataError(f"no risk-free observation on or before start of {q}")
        frac = rate / 100.0
        out[q] = frac / 4.0 if simple else math.log1p(frac) / 4.0
    return out


def market_moments(ln_rm: Sequence[float], ln_rf: Sequence[float]) -> MarketMoments:
    """Sample means and unbiased variance over aligned estimation quarters."""
    if len(ln_rm) != len(ln_rf):
        raise MarketDataError("market and risk-free series are not aligned")
    n = len(ln_rm)
    if n < 2:
        raise MarketDataError(f"need at least 2 quarters to form moments, got {n}")
    mu_m = sum(ln_rm) / n
    mu_f = sum(ln_rf) / n
    var_m = sum((x - mu_m) ** 2 for x in ln_rm) / (n - 1)
    return MarketMoments(mu_ln_rf=mu_f, mu_ln_rm=mu_m, var_ln_rm=var_m)

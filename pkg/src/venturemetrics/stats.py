"""Descriptive and inferential sector statistics.

Welch's unequal-variance t statistic, Welch-Satterthwaite degrees of
freedom, and a two-sided p-value from a Student-t CDF evaluated through a
continued-fraction regularized incomplete beta (no external stats
dependency). Also: per-sector summaries, pairwise t matrices, quarterly
percent-change trends, time-to-IPO summaries and geography funding shares.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .marketdata import Quarter, QuarterGrid
from .model import Dataset, ExitKind

_BETACF_MAX_ITER = 300
_BETACF_EPS = 1e-15
_TINY = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Lentz continued fraction for the incomplete beta function."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), accurate to better than 1e-10 on the t-test domain."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """P(|T_df| >= |t|)."""
    if df <= 0:
        raise ValueError(f"degrees of freedom {df} not positive")
    if t == 0.0:
        return 1.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def sample_variance(values: Sequence[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    m = _mean(values)
    return sum((v - m) ** 2 for v in values) / (n - 1)


def median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return 0.5 * (ordered[mid - 1] + ordered[mid])


@dataclass(frozen=True)
class SummaryRow:
    sector: str
    n: int
    mean: float
    median: float
    total: float
    sd: float  # sample sd; 0 by convention when n == 1
    degenerate: bool = False  # flags the n == 1 convention


def summarize(values: Sequence[float], sector: str) -> Optional[SummaryRow]:
    """Mean/median/total/sample-sd of USD mln values; None when empty."""
    if not values:
        return None
    n = len(values)
    return SummaryRow(
        sector=sector,
        n=n,
        mean=_mean(values),
        median=median(values),
        total=math.fsum(values),
        sd=math.sqrt(sample_variance(values)),
        degenerate=(n == 1),
    )


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float


def welch_t(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-sample unequal-variance t-test.

    t = (mean_a - mean_b) / sqrt(s_a^2/n_a + s_b^2/n_b), df by
    Welch-Satterthwaite. Two zero-variance samples with equal means give
    t = 0 by convention; with unequal means the test is degenerate.
    """
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise ValueError("both samples need at least 2 observations")
    m1, m2 = _mean(a), _mean(b)
    v1, v2 = sample_variance(a), sample_variance(b)
    if v1 == 0.0 and v2 == 0.0:
        if m1 == m2:
            return WelchResult(t=0.0, df=float(n1 + n2 - 2), p=1.0)
        raise ValueError("degenerate samples")
    se2 = v1 / n1 + v2 / n2
    t = (m1 - m2) / math.sqrt(se2)
    df = se2**2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    return WelchResult(t=t, df=df, p=student_t_two_sided_p(t, df))


def pairwise_matrix(sector_samples: Mapping[str, Sequence[float]],
                    order: Optional[Sequence[str]] = None) -> tuple[list[str], list[list[Optional[float]]]]:
    """Antisymmetric matrix of Welch t statistics, row vs column.

    Diagonal entries are None; sectors with fewer than 2 observations get a
    row and column of None.
    """
    names = list(order) if order is not None else list(sector_samples)
    usable = {s for s in names if len(sector_samples.get(s, ())) >= 2}
    if len(usable) < 2:
        raise ValueError("need at least 2 sectors with n >= 2")
    matrix: list[list[Optional[float]]] = []
    for r in names:
        row: list[Optional[float]] = []
        for c in names:
            if r == c or r not in usable or c not in usable:
                row.append(None)
            else:
                row.append(welch_t(sector_samples[r], sector_samples[c]).t)
        matrix.append(row)
    return names, matrix


@dataclass(frozen=True)
class TrendRow:
    sector: str
    annualized_mean_pct: float
    annualized_sd_pct: float
    n_changes: int
    missing_quarters: int
    skipped_zero_base: int


def percent_changes(quarterly_means: Mapping[Quarter, float], grid: QuarterGrid,
                    sector: str, max_missing: int = 20) -> Optional[TrendRow]:
    """Annualized quarterly percent changes of a per-quarter mean series.

    Changes run over consecutive available quarters; the mean annualizes by
    x4 and the standard deviation by x2 (sqrt of four). Sectors with more
    missing quarters than max_missing are discarded (None).
    """
    available = [q for q in grid if q in quarterly_means]
    missing = len(grid) - len(available)
    if missing > max_missing:
        return None
    if len(available) < 2:
        return None
    changes = []
    skipped = 0
    for prev, cur in zip(available, available[1:]):
        base = quarterly_means[prev]
        if base == 0:
            skipped += 1
            continue
        changes.append((quarterly_means[cur] - base) / base)
    if not changes:
        return None
    return TrendRow(
        sector=sector,
        annualized_mean_pct=_mean(changes) * 4.0 * 100.0,
        annualized_sd_pct=math.sqrt(sample_variance(changes)) * 2.0 * 100.0,
        n_changes=len(changes),
        missing_quarters=missing,
        skipped_zero_base=skipped,
    )


@dataclass(frozen=True)
class TimeToExitRow:
    sector: str
    n: int
    mean_days: Optional[float]
    sd_days: Optional[float]
    max_days: Optional[int]
    min_days: Optional[int]


def time_to_exit_stats(dataset: Dataset, min_obs: int = 10) -> tuple[list[TimeToExitRow], list[tuple[str, str, int]]]:
    """Days from an organization's first recorded round to its IPO.

    Sector rows with fewer than min_obs IPOs report NA statistics; the
    second return value lists every (sector, org_id, days) detail.
    """
    first_round: dict[str, dt.date] = {}
    for r in dataset.rounds:
        prev = first_round.get(r.org_id)
        if prev is None or r.date < prev:
            first_round[r.org_id] = r.date
    org_sectors = {o.org_id: sorted(o.sectors) for o in dataset.organizations}
    per_sector: dict[str, list[int]] = {}
    details: list[tuple[str, str, int]] = []
    for e in sorted(dataset.exits, key=lambda e: e.org_id):
        if e.kind is not ExitKind.IPO or e.org_id not in first_round:
            continue
        days = (e.date - first_round[e.org_id]).days
        for sector in org_sectors.get(e.org_id, []):
            per_sector.setdefault(sector, []).append(days)
            details.append((sector, e.org_id, days))
    rows = []
    for sector in sorted(per_sector):
        days = per_sector[sector]
        if len(days) < min_obs:
            rows.append(TimeToExitRow(sector, len(days), None, None, None, None))
        else:
            rows.append(
                TimeToExitRow(
                    sector=sector,
                    n=len(days),
                    mean_days=_mean([float(d) for d in days]),
                    sd_days=math.sqrt(sample_variance([float(d) for d in days])),
                    max_days=max(days),
                    min_days=min(days),
                )
            )
    return rows, details


@dataclass(frozen=True)
class GeographyShare:
    sector: str
    shares: tuple[tuple[str, float], ...]  # (country, share), top-k then "Other"


def geography_shares(dataset: Dataset, sector: str, k: int = 4) -> Optional[GeographyShare]:
    """Country shares of a sector's funding, top-k plus an Other bucket.

    Ranking is by funding amount with ties broken by country code; shares
    sum to one.
    """
    org_country = {o.org_id: o.country for o in dataset.organizations if sector in o.sectors}
    totals: dict[str, float] = {}
    for r in dataset.rounds:
        country = org_country.get(r.org_id)
        if country is None:
            continue
        totals[country] = totals.get(country, 0.0) + r.amount_musd
    grand = sum(totals.values())
    if grand <= 0:
        return None
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    top = ranked[:k]
    other = sum(v for _, v in ranked[k:])
    shares = [(country, amount / grand) for country, amount in top]
    if other > 0 or len(ranked) > k:
        shares.append(("Other", other / grand))
    return GeographyShare(sector=sector, shares=tuple(shares))

"""Dilution-adjusted returns from funding rounds to exit.

An investor entering at round i with money m_i at post-money valuation v_i
holds, after later rounds k = i+1..n dilute them,

    standard:    x_i = (m_i / v_i) * prod_k (v_k - m_k) / v_k
    as_printed:  x_i = (m_i / v_i) * prod_k (v_{k-1} - m_k) / v_k

The standard numerator is the pre-money value of old equity at round k
(post-money minus new money); the as_printed variant evaluates the product
with the numerator lagging one round, which can go negative. The gross return
to an exit valued E is R_i = (E * x_i - m_i) / m_i, scaled to an implicit
daily rate r_d = (1 + R_i)^(1/days) - 1 and a quarterly rate
r_q = (1 + r_d)^days_per_quarter - 1.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .marketdata import Quarter, QuarterGrid
from .model import Dataset, FundingRound

DAYS_PER_QUARTER = 365.25 / 4.0


class DilutionMode(str, Enum):
    STANDARD = "standard"
    AS_PRINTED = "as_printed"


class DilutionError(ValueError):
    pass


def dilution_stake(rounds: Sequence[tuple[float, float]],
                   mode: DilutionMode = DilutionMode.STANDARD) -> float:
    """Equity fraction held at exit by investors of the first listed round.

    `rounds` holds (money raised, post-money valuation) pairs ordered in
    time, starting at the entry round. A single round means no dilution.
    """
    if not rounds:
        raise DilutionError("no rounds")
    m_i, v_i = rounds[0]
    for m, v in rounds:
        if v <= 0:
            raise DilutionError(f"non-positive valuation {v}")
    if m_i > v_i:
        raise DilutionError("stake exceeds 100%")
    stake = m_i / v_i
    for k in range(1, len(rounds)):
        m_k, v_k = rounds[k]
        if mode is DilutionMode.STANDARD:
            if m_k > v_k:
                raise DilutionError("stake exceeds 100%")
            stake *= (v_k - m_k) / v_k
        else:
            v_prev = rounds[k - 1][1]
            stake *= (v_prev - m_k) / v_k
    return stake


def share_count_stake(rounds: Sequence[tuple[float, float]]) -> float:
    """Independent oracle: issue new shares at the implied per-share price.

    Starts from one normalized share outstanding; at each later round the
    company issues m_k / price new shares where price values pre-money
    equity (v_k - m_k) over the current share count.
    """
    m_i, v_i = rounds[0]
    total = 1.0
    investor = m_i / v_i  # entry-round shares out of 1.0 post-money
    for m_k, v_k in rounds[1:]:
        pre_money = v_k - m_k
        if pre_money <= 0:
            raise DilutionError("pre-money value not positive")
        price = pre_money / total
        total += m_k / price
    return investor / total


def return_to_exit(stake: float, exit_value: float, m_i: float) -> float:
    """Gross arithmetic return (E * x - m) / m; may be negative."""
    if m_i <= 0:
        raise DilutionError(f"non-positive investment {m_i}")
    if exit_value <= 0:
        raise DilutionError(f"non-positive exit value {exit_value}")
    return (exit_value * stake - m_i) / m_i


def to_daily(gross_return: float, holding_days: float) -> float:
    """Implicit daily rate over the holding period."""
    if holding_days < 1:
        raise ValueError(f"holding period {holding_days} shorter than a day")
    if gross_return <= -1:
        raise ValueError("total loss has no geometric daily rate; handled by policy")
    return (1.0 + gross_return) ** (1.0 / holding_days) - 1.0


def to_quarterly(daily_rate: float, days_per_quarter: float = DAYS_PER_QUARTER) -> float:
    if daily_rate <= -1:
        raise ValueError("daily rate at or below -100%")
    return (1.0 + daily_rate) ** days_per_quarter - 1.0


@dataclass(frozen=True)
class RoundReturn:
    org_id: str
    round_id: str
    entry_date: dt.date
    exit_date: dt.date
    holding_days: int
    gross_return: float
    daily_rate: float
    quarterly_rate: float
    mode: DilutionMode


@dataclass(frozen=True)
class QuarterlySectorSeries:
    sector: str
    mean_rq: Mapping[Quarter, float]
    count: Mapping[Quarter, int]


@dataclass
class ReturnsCoverage:
    """Why rounds did or did not yield a usable return."""
    computed: int = 0
    no_exit: int = 0
    missing_pmv: int = 0
    missing_exit_value: int = 0
    zero_holding: int = 0
    total_loss: int = 0
    stake_errors: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(vars(self))


def compute_round_returns(
    dataset: Dataset,
    mode: DilutionMode = DilutionMode.STANDARD,
    days_per_quarter: float = DAYS_PER_QUARTER,
    first_round_only: bool = False,
) -> tuple[list[RoundReturn], ReturnsCoverage]:
    """One return per (entry round -> exit) for every exited organization.

    Rounds without a PMV after imputation are excluded and counted; a round
    held to a total loss gets the sentinel r_d = r_q = -1 without geometric
    scaling. Output order is stable by (org_id, round_id).
    """
    coverage = ReturnsCoverage()
    exits = dataset.exit_by_org()
    results: list[RoundReturn] = []
    for org_id, rounds in sorted(dataset.rounds_by_org().items()):
        exit_event = exits.get(org_id)
        if exit_event is None:
            coverage.no_exit += len(rounds)
            continue
        if exit_event.exit_value_musd is None:
            coverage.missing_exit_value += len(rounds)
            continue
        priced: list[FundingRound] = []
        for r in rounds:
            if r.pmv_musd is None:
                coverage.missing_pmv += 1
            else:
                priced.append(r)
        entries = priced[:1] if first_round_only else priced
        for idx, entry in enumerate(entries):
            cascade = [(r.amount_musd, r.pmv_musd) for r in priced[idx:]]
            try:
                stake = dilution_stake(cascade, mode)
                gross = return_to_exit(stake, exit_event.exit_value_musd, entry.amount_musd)
            except DilutionError:
                coverage.stake_errors += 1
                continue
            holding_days = (exit_event.date - entry.date).days
            if holding_days < 1:
                coverage.zero_holding += 1
                continue
            if gross <= -1.0:
                coverage.total_loss += 1
                daily = quarterly = -1.0
            else:
                daily = to_daily(gross, holding_days)
                quarterly = to_quarterly(daily, days_per_quarter)
            coverage.computed += 1
            results.append(
                RoundReturn(
                    org_id=org_id,
                    round_id=entry.round_id,
                    entry_date=entry.date,
                    exit_date=exit_event.date,
                    holding_days=holding_days,
                    gross_return=gross,
                    daily_rate=daily,
                    quarterly_rate=quarterly,
                    mode=mode,
                )
            )
    results.sort(key=lambda rr: (rr.org_id, rr.round_id))
    return results, coverage


def sector_series(
    round_returns: Sequence[RoundReturn],
    grid: QuarterGrid,
    sectors_by_org: Mapping[str, Iterable[str]],
) -> dict[str, QuarterlySectorSeries]:
    """Arithmetic mean of quarterly rates per (sector, exit quarter).

    A firm tagged in several sectors contributes its returns to each of
    them; quarters with no exits are absent rather than zero-filled.
    """
    sums: dict[str, dict[Quarter, float]] = {}
    counts: dict[str, dict[Quarter, int]] = {}
    for rr in sorted(round_returns, key=lambda r: (r.org_id, r.round_id)):
        quarter = grid.quarter_of(rr.exit_date)
        if quarter is None:
            continue
        for sector in sorted(sectors_by_org.get(rr.org_id, ())):
            sums.setdefault(sector, {})
            counts.setdefault(sector, {})
            sums[sector][quarter] = sums[sector].get(quarter, 0.0) + rr.quarterly_rate
            counts[sector][quarter] = counts[sector].get(quarter, 0) + 1
    out: dict[str, QuarterlySectorSeries] = {}
    for sector in sums:
        mean = {q: sums[sector][q] / counts[sector][q] for q in sums[sector]}
        out[sector] = QuarterlySectorSeries(sector=sector, mean_rq=mean, count=dict(counts[sector]))
    return out


def pooled_series(round_returns: Sequence[RoundReturn], grid: QuarterGrid,
                  label: str = "All sectors") -> QuarterlySectorSeries:
    """Single series over all round returns, each counted once."""
    by_org = {rr.org_id: (label,) for rr in round_returns}
    series = sector_series(round_returns, grid, by_org)
    return series.get(label, QuarterlySectorSeries(label, {}, {}))

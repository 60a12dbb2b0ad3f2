"""Report artifacts: delimited tables, Markdown renderings and figures.

Table CSVs use 2-decimal display precision;
estimation outputs (fits.csv, implied.csv, round_returns.csv,
sector_quarterly.csv) keep full precision for downstream use. Figures are
rendered with the Agg backend and pinned metadata so repeated runs are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .econometrics import (ImpliedPerformance, LogModelFit, annualize,
                           significance_stars)
from .marketdata import Quarter
from .model import Dataset
from .returns import QuarterlySectorSeries, RoundReturn
from .stats import GeographyShare, SummaryRow, TimeToExitRow, TrendRow

_PNG_METADATA = {"Software": "venturemetrics"}


def _fmt2(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.2f}"


def _csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


# --- stats tables ------------------------------------------------------------

def summary_table_csv(funding: Sequence[SummaryRow], pmv: Sequence[SummaryRow]) -> str:
    rows = [["sector", "metric", "n", "mean", "median", "total", "sd"]]
    for metric, table in (("funding", funding), ("pmv", pmv)):
        for r in table:
            rows.append([r.sector, metric, r.n, _fmt2(r.mean), _fmt2(r.median),
                         _fmt2(r.total), _fmt2(r.sd)])
    return _csv_text(rows)


def summary_table_md(funding: Sequence[SummaryRow], pmv: Sequence[SummaryRow]) -> str:
    pmv_by_sector = {r.sector: r for r in pmv}
    header = ["Sector", "#Rounds", "Avg.", "Median", "Total", "SD",
              "PMV Avg.", "PMV Median", "PMV Total", "PMV SD"]
    rows = []
    for f in funding:
        p = pmv_by_sector.get(f.sector)
        rows.append([
            f.sector, str(f.n), _fmt2(f.mean), _fmt2(f.median), _fmt2(f.total), _fmt2(f.sd),
            _fmt2(p.mean) if p else "", _fmt2(p.median) if p else "",
            _fmt2(p.total) if p else "", _fmt2(p.sd) if p else "",
        ])
    return "# Funding and valuation summary (USD mln)\n\n" + _md_table(header, rows)


def ttest_matrix_csv(names: Sequence[str], matrix: Sequence[Sequence[Optional[float]]]) -> str:
    rows = [["sector"] + list(names)]
    for name, row in zip(names, matrix):
        rows.append([name] + [_fmt2(v) for v in row])
    return _csv_text(rows)


def ttest_matrix_md(title: str, names: Sequence[str],
                    matrix: Sequence[Sequence[Optional[float]]]) -> str:
    rows = [[name] + [_fmt2(v) for v in row] for name, row in zip(names, matrix)]
    return f"# {title}\n\n" + _md_table(["Sector"] + list(names), rows)


def trends_csv(funding: Mapping[str, TrendRow], pmv: Mapping[str, TrendRow]) -> str:
    rows = [["sector", "funding_mean_pct", "funding_sd_pct", "pmv_mean_pct", "pmv_sd_pct"]]
    for sector in sorted(set(funding) | set(pmv)):
        f, p = funding.get(sector), pmv.get(sector)
        rows.append([
            sector,
            _fmt2(f.annualized_mean_pct) if f else "",
            _fmt2(f.annualized_sd_pct) if f else "",
            _fmt2(p.annualized_mean_pct) if p else "",
            _fmt2(p.annualized_sd_pct) if p else "",
        ])
    return _csv_text(rows)


def time_to_ipo_csv(rows: Sequence[TimeToExitRow]) -> str:
    out = [["sector", "n", "mean_days", "sd_days", "max_days", "min_days"]]
    for r in rows:
        out.append([
            r.sector, r.n,
            _fmt2(r.mean_days) if r.mean_days is not None else "NA",
            _fmt2(r.sd_days) if r.sd_days is not None else "NA",
            r.max_days if r.max_days is not None else "NA",
            r.min_days if r.min_days is not None else "NA",
        ])
    return _csv_text(out)


def time_to_ipo_detail_csv(details: Sequence[tuple[str, str, int]]) -> str:
    rows = [["sector", "org_id", "days"]]
    rows.extend(details)
    return _csv_text(rows)


def geo_shares_csv(shares: Sequence[GeographyShare]) -> str:
    rows = [["sector", "country", "share_pct"]]
    for gs in shares:
        for country, share in gs.shares:
            rows.append([gs.sector, country, _fmt2(share * 100.0)])
    return _csv_text(rows)


def trends_md(funding: Mapping[str, TrendRow], pmv: Mapping[str, TrendRow]) -> str:
    header = ["Sector", "Funding avg. change (%)", "SD", "PMV avg. change (%)", "SD"]
    rows = []
    for sector in sorted(set(funding) | set(pmv)):
        f, p = funding.get(sector), pmv.get(sector)
        rows.append([
            sector,
            _fmt2(f.annualized_mean_pct) if f else "",
            _fmt2(f.annualized_sd_pct) if f else "",
            _fmt2(p.annualized_mean_pct) if p else "",
            _fmt2(p.annualized_sd_pct) if p else "",
        ])
    return "# Annualized quarterly percent changes\n\n" + _md_table(header, rows)


def time_to_ipo_md(rows: Sequence[TimeToExitRow]) -> str:
    header = ["Sector", "n", "Avg. days", "SD", "Max", "Min"]
    body = [[
        r.sector, str(r.n),
        _fmt2(r.mean_days) if r.mean_days is not None else "NA",
        _fmt2(r.sd_days) if r.sd_days is not None else "NA",
        str(r.max_days) if r.max_days is not None else "NA",
        str(r.min_days) if r.min_days is not None else "NA",
    ] for r in rows]
    return "# Time from first round to IPO\n\n" + _md_table(header, body)


def geo_shares_md(shares: Sequence[GeographyShare]) -> str:
    header = ["Sector", "Country", "Share (%)"]
    body = []
    for gs in shares:
        for country, share in gs.shares:
            body.append([gs.sector, country, _fmt2(share * 100.0)])
    return "# Funding share by country\n\n" + _md_table(header, body)


# --- estimation tables --------------------------------------------------------

def fits_csv(fits: Sequence[LogModelFit], implied: Mapping[str, ImpliedPerformance]) -> str:
    rows = [["sector", "gamma", "se_gamma", "delta", "se_delta", "sigma_pct",
             "alpha_gross", "beta", "n_obs"]]
    for fit in fits:
        imp = implied[fit.sector]
        rows.append([
            fit.sector, repr(fit.gamma), repr(fit.se_gamma), repr(fit.delta),
            repr(fit.se_delta), repr(fit.sigma * 100.0), repr(imp.alpha_gross),
            repr(imp.beta), fit.n_obs,
        ])
    return _csv_text(rows)


def fits_md(fits: Sequence[LogModelFit], implied: Mapping[str, ImpliedPerformance]) -> str:
    header = ["Sector", "gamma", "se(gamma)", "delta", "se(delta)",
              "sigma (%)", "alpha", "beta"]
    rows = []
    for fit in fits:
        imp = implied[fit.sector]
        rows.append([
            fit.sector,
            _fmt2(fit.gamma) + significance_stars(fit.p_gamma),
            _fmt2(fit.se_gamma),
            _fmt2(fit.delta) + significance_stars(fit.p_delta),
            _fmt2(fit.se_delta),
            _fmt2(fit.sigma * 100.0),
            _fmt2(imp.alpha_gross),
            _fmt2(imp.beta),
        ])
    note = ("\n*, **, *** mark two-sided significance at the 10%, 5% and 1% levels"
            " (t tests on the regression coefficients).\n")
    return "# Quarterly log-model estimates\n\n" + _md_table(header, rows) + note


def implied_csv(implied: Mapping[str, ImpliedPerformance], order: Sequence[str]) -> str:
    rows = [["sector", "e_ln_r_ann_pct", "se", "e_R_ann_pct", "se"]]
    for sector in order:
        imp = implied[sector]
        rows.append([
            sector, repr(imp.e_ln_r_annual_pct), repr(imp.se_e_ln_r_annual_pct),
            repr(imp.e_R_annual_pct), repr(imp.se_e_R_annual_pct),
        ])
    return _csv_text(rows)


def implied_md(implied: Mapping[str, ImpliedPerformance], order: Sequence[str]) -> str:
    header = ["Sector", "E[ln R]", "se(E[ln R])", "E[R]", "se(E[R])"]
    rows = []
    for sector in order:
        imp = implied[sector]
        rows.append([sector, _fmt2(imp.e_ln_r_annual_pct), _fmt2(imp.se_e_ln_r_annual_pct),
                     _fmt2(imp.e_R_annual_pct), _fmt2(imp.se_e_R_annual_pct)])
    return ("# Implied annualized expected returns (percent)\n\n"
            + _md_table(header, rows))


def round_returns_csv(rows: Sequence[RoundReturn]) -> str:
    out = [["org_id", "round_id", "entry_date", "exit_date", "holding_days",
            "R", "r_d", "r_q", "mode"]]
    for r in rows:
        out.append([
            r.org_id, r.round_id, r.entry_date.isoformat(), r.exit_date.isoformat(),
            r.holding_days, repr(r.gross_return), repr(r.daily_rate),
            repr(r.quarterly_rate), r.mode.value,
        ])
    return _csv_text(out)


def sector_quarterly_csv(series: Mapping[str, QuarterlySectorSeries]) -> str:
    rows = [["sector", "quarter", "mean_rq", "count"]]
    for sector in sorted(series):
        s = series[sector]
        for q in sorted(s.mean_rq):
            rows.append([sector, str(q), repr(s.mean_rq[q]), s.count[q]])
    return _csv_text(rows)


# --- figures -------------------------------------------------------------------

def save_geo_shares_figure(shares: Sequence[GeographyShare], path: Path):
    """Stacked horizontal bars of funding share per country, one bar per sector."""
    fig, ax = plt.subplots(figsize=(9, max(2.5, 0.45 * len(shares) + 1.5)))
    sectors = [gs.sector for gs in shares]
    countries = []
    for gs in shares:
        for country, _ in gs.shares:
            if country not in countries:
                countries.append(country)
    left = np.zeros(len(shares))
    for country in countries:
        widths = np.array([dict(gs.shares).get(country, 0.0) * 100.0 for gs in shares])
        ax.barh(sectors, widths, left=left, label=country)
        left += widths
    ax.set_xlabel("share of funding (%)")
    ax.set_xlim(0, 100)
    ax.invert_yaxis()
    ax.legend(fontsize=8, ncol=min(len(countries), 6), loc="lower right")
    ax.set_title("Funding share by country")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)


def save_trends_figure(funding: Mapping[str, TrendRow], pmv: Mapping[str, TrendRow], path: Path):
    sectors = sorted(set(funding) | set(pmv))
    idx = np.arange(len(sectors))
    f_vals = [funding[s].annualized_mean_pct if s in funding else 0.0 for s in sectors]
    p_vals = [pmv[s].annualized_mean_pct if s in pmv else 0.0 for s in sectors]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.bar(idx - 0.2, f_vals, width=0.4, label="funding")
    ax.bar(idx + 0.2, p_vals, width=0.4, label="valuations")
    ax.set_xticks(idx)
    ax.set_xticklabels(sectors, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("annualized mean quarterly change (%)")
    ax.set_title("Quarterly percent-change trends")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)


def save_pmv_histogram(dataset: Dataset, path: Path):
    values = [math.log(r.pmv_musd * 1e6) for r in dataset.rounds if r.pmv_musd]
    fig, ax = plt.subplots(figsize=(7, 4))
    if values:
        ax.hist(values, bins=40, color="#4878d0", edgecolor="white")
    ax.set_xlabel("ln(post-money valuation, USD)")
    ax.set_ylabel("rounds")
    ax.set_title("Distribution of log post-money valuations")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)

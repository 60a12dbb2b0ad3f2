"""Synthetic market and firm-path generator for pipeline validation.

Quarterly log dynamics: the market increment is mu_m + sigma_m * z, the
firm increment rf + gamma + delta * (market - rf) + sigma * e, with z and e
independent. All randomness comes from counter-based Philox streams keyed
by (seed, stream id): stream 0 is the market, firm f draws its path from
stream 1 + 2f and its round/exit policy from stream 2 + 2f, so per-firm
output is reproducible bit-for-bit and independent of evaluation order.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .marketdata import Quarter
from .model import SECTORS

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, stream_id & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RoundPolicy:
    rounds_per_firm: int = 3
    mean_spacing_quarters: float = 4.0
    raise_fraction: float = 0.2


@dataclass(frozen=True)
class ExitPolicy:
    mean_quarters_after_last_round: float = 4.0
    ipo_probability: float = 0.5


@dataclass(frozen=True)
class SimSpec:
    mu_m: float = 0.02
    sigma_m: float = 0.08
    gamma: float = 0.07
    delta: float = 0.48
    sigma: float = 0.1418
    rf: float = 0.005
    n_firms: int = 100
    quarters: int = 48
    round_policy: RoundPolicy = field(default_factory=RoundPolicy)
    exit_policy: ExitPolicy = field(default_factory=ExitPolicy)
    missingness: float = 0.0
    initial_value_musd: float = 20.0
    start: dt.date = dt.date(2010, 1, 1)
    sectors: tuple[str, ...] = SECTORS[:3]
    countries: tuple[str, ...] = ("US", "IL", "GB", "CN", "DE")
    seed: int = 20100101

    def __post_init__(self):
        if self.sigma_m < 0 or self.sigma < 0:
            raise ValueError("volatilities must be non-negative")
        if not 0.0 <= self.missingness <= 1.0:
            raise ValueError("missingness outside [0, 1]")
        if not 0.0 <= self.exit_policy.ipo_probability <= 1.0:
            raise ValueError("ipo_probability outside [0, 1]")
        if self.quarters < 1:
            raise ValueError("need at least one quarter")

    @staticmethod
    def from_toml(path: str | Path) -> "SimSpec":
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
        round_policy = RoundPolicy(**doc.pop("round_policy", {}))
        exit_policy = ExitPolicy(**doc.pop("exit_policy", {}))
        if "start" in doc and isinstance(doc["start"], str):
            doc["start"] = dt.date.fromisoformat(doc["start"])
        if "sectors" in doc:
            doc["sectors"] = tuple(doc["sectors"])
        if "countries" in doc:
            doc["countries"] = tuple(doc["countries"])
        return SimSpec(round_policy=round_policy, exit_policy=exit_policy, **doc)

    def with_seed(self, seed: int) -> "SimSpec":
        from dataclasses import replace
        return replace(self, seed=seed)

    def ground_truth(self) -> dict:
        doc = asdict(self)
        doc["start"] = self.start.isoformat()
        doc["sectors"] = list(self.sectors)
        doc["countries"] = list(self.countries)
        return doc


def simulate_market(spec: SimSpec) -> np.ndarray:
    """Quarterly market log increments, one per sim quarter."""
    g = stream(spec.seed, 0)
    z = g.standard_normal(spec.quarters)
    return spec.mu_m + spec.sigma_m * z


def simulate_firm_path(spec: SimSpec, market: np.ndarray, firm: int) -> np.ndarray:
    """Quarterly log increments for one firm given the market path."""
    g = stream(spec.seed, 1 + 2 * firm)
    e = g.standard_normal(spec.quarters)
    return spec.rf + spec.gamma + spec.delta * (market - spec.rf) + spec.sigma * e


def simulate_firm_increments(spec: SimSpec, market: np.ndarray) -> np.ndarray:
    """(n_firms, quarters) matrix of firm log increments."""
    return np.vstack([simulate_firm_path(spec, market, f) for f in range(spec.n_firms)])


def _quarter_sequence(spec: SimSpec) -> list[Quarter]:
    q = Quarter.of(spec.start)
    out = []
    for _ in range(spec.quarters):
        out.append(q)
        q = q.next()
    return out


@dataclass(frozen=True)
class SyntheticDataset:
    organizations_csv: str
    funding_rounds_csv: str
    exits_csv: str
    index_csv: str
    tbill_csv: str
    ground_truth: dict

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in [
            ("organizations.csv", self.organizations_csv),
            ("funding_rounds.csv", self.funding_rounds_csv),
            ("exits.csv", self.exits_csv),
            ("index.csv", self.index_csv),
            ("tbill.csv", self.tbill_csv),
        ]:
            path = out / name
            path.write_text(text, encoding="utf-8")
            written.append(path)
        gt = out / "ground_truth.json"
        gt.write_text(json.dumps(self.ground_truth, sort_keys=True, indent=2) + "\n",
                      encoding="utf-8")
        written.append(gt)
        return written


def emit_dataset(spec: SimSpec) -> SyntheticDataset:
    """Render simulated paths as ingest-ready CSVs plus market series.

    Each firm raises at policy-spaced quarters (value at the quarter end is
    the round's PMV, the raise a fixed fraction of it) and exits after its
    last round. PMVs are blanked at the configured missingness rate so the
    imputation path gets exercised.
    """
    from .ingest import (serialize_exits, serialize_funding_rounds,
                         serialize_organizations)
    from .model import ExitEvent, ExitKind, FundingRound, Organization, Provenance, RoundType

    market = simulate_market(spec)
    quarters = _quarter_sequence(spec)
    round_types = [RoundType.SEED, RoundType.SERIES_A, RoundType.SERIES_B,
                   RoundType.SERIES_C_PLUS]

    orgs: list[Organization] = []
    rounds: list[FundingRound] = []
    exits: list[ExitEvent] = []
    clamped = 0
    for f in range(spec.n_firms):
        incs = simulate_firm_path(spec, market, f)
        levels = spec.initial_value_musd * np.exp(np.cumsum(incs))
        g = stream(spec.seed, 2 + 2 * f)

        org_id = f"org{f:05d}"
        sector = spec.sectors[int(g.integers(0, len(spec.sectors)))]
        country = spec.countries[int(g.integers(0, len(spec.countries)))]
        orgs.append(Organization(
            org_id=org_id,
            name=f"Synthetic Firm {f}",
            country=country,
            tags=frozenset({sector.lower()}),
        ))

        spacing_p = 1.0 / max(spec.round_policy.mean_spacing_quarters, 1.0)
        q_idx = int(g.geometric(spacing_p)) - 1
        round_quarters: list[int] = []
        while len(round_quarters) < spec.round_policy.rounds_per_firm and q_idx <= spec.quarters - 2:
            round_quarters.append(q_idx)
            q_idx += int(g.geometric(spacing_p))
        if not round_quarters:
            round_quarters = [0]

        for j, rq in enumerate(round_quarters):
            value = float(levels[rq])
            raised = spec.round_policy.raise_fraction * value
            if raised > value:
                raised = 0.99 * value
                clamped += 1
            pmv: Optional[float] = value
            if spec.missingness > 0.0 and g.random() < spec.missingness:
                pmv = None
            rounds.append(FundingRound(
                round_id=f"{org_id}r{j}",
                org_id=org_id,
                date=quarters[rq].end,
                amount_musd=raised,
                pmv_musd=pmv,
                pmv_provenance=Provenance.OBSERVED if pmv is not None else Provenance.MISSING,
                investor_count=int(g.poisson(3.0)) + 1,
                lead_investor_rank=int(g.integers(1, 6)) if g.random() < 0.7 else None,
                round_type=round_types[min(j, len(round_types) - 1)],
            ))

        exit_p = 1.0 / max(spec.exit_policy.mean_quarters_after_last_round, 1.0)
        exit_q = min(round_quarters[-1] + int(g.geometric(exit_p)), spec.quarters - 1)
        kind = ExitKind.IPO if g.random() < spec.exit_policy.ipo_probability else ExitKind.ACQUISITION
        exits.append(ExitEvent(
            org_id=org_id,
            date=quarters[exit_q].end,
            kind=kind,
            exit_value_musd=float(levels[exit_q]),
            value_provenance=Provenance.OBSERVED,
        ))

    index_rows = ["date,level"]
    prev_end = quarters[0].prev().end
    index_rows.append(f"{prev_end.isoformat()},100.0")
    level = 100.0
    for q, inc in zip(quarters, market):
        level *= math.exp(float(inc))
        index_rows.append(f"{q.end.isoformat()},{level!r}")
    tbill_rate = 100.0 * math.expm1(4.0 * spec.rf)
    tbill_rows = ["date,rate_percent",
                  f"{(spec.start - dt.timedelta(days=7)).isoformat()},{tbill_rate!r}"]

    truth = spec.ground_truth()
    truth["clamped_raises"] = clamped
    truth["n_rounds"] = len(rounds)
    truth["n_exits"] = len(exits)

    return SyntheticDataset(
        organizations_csv=serialize_organizations(orgs),
        funding_rounds_csv=serialize_funding_rounds(rounds),
        exits_csv=serialize_exits(exits),
        index_csv="\n".join(index_rows) + "\n",
        tbill_csv="\n".join(tbill_rows) + "\n",
        ground_truth=truth,
    )


def parameter_recovery_trial(spec: SimSpec, seed: int):
    """Simulate one replication and fit the quarterly log model.

    The sector series aggregates firms by the cross-section mean of their
    quarterly log increments (the location parameter of the lognormal
    cross-section), which is the aggregation under which the regression is
    exactly specified; the fit should then recover (gamma, delta) with
    nominal 2-standard-error coverage.
    """
    from .econometrics import fit_log_model
    from .returns import QuarterlySectorSeries

    run_spec = spec.with_seed(seed)
    market = simulate_market(run_spec)
    incs = simulate_firm_increments(run_spec, market)
    sector_log = incs.mean(axis=0)
    quarters = _quarter_sequence(run_spec)
    series = QuarterlySectorSeries(
        sector="simulated",
        mean_rq={q: float(np.expm1(v)) for q, v in zip(quarters, sector_log)},
        count={q: run_spec.n_firms for q in quarters},
    )
    ln_rm = {q: float(v) for q, v in zip(quarters, market)}
    ln_rf = {q: run_spec.rf for q in quarters}
    fit, mm, report = fit_log_model(series, ln_rm, ln_rf)
    if fit is None:
        raise RuntimeError(f"recovery fit skipped: {report}")
    return fit

import datetime as dt

import numpy as np

from venturemetrics.impute import PmvFeatureVector
from venturemetrics.model import (Dataset, ExitEvent, ExitKind, FundingRound,
                                  Organization, Provenance, RoundType,
                                  assign_sectors)


def make_org(org_id="o1", country="US", tags=("cyber security",), name="Acme"):
    tagset = frozenset(tags)
    return Organization(org_id=org_id, name=name, country=country, tags=tagset,
                        sectors=assign_sectors(tagset))


def make_round(round_id="r1", org_id="o1", date=dt.date(2015, 1, 1), amount=10.0,
               pmv=40.0, investor_count=3, rank=1, round_type=RoundType.SEED):
    return FundingRound(
        round_id=round_id,
        org_id=org_id,
        date=date,
        amount_musd=amount,
        pmv_musd=pmv,
        pmv_provenance=Provenance.OBSERVED if pmv is not None else Provenance.MISSING,
        investor_count=investor_count,
        lead_investor_rank=rank,
        round_type=round_type,
    )


def make_exit(org_id="o1", date=dt.date(2018, 1, 1), kind=ExitKind.IPO, value=100.0):
    return ExitEvent(
        org_id=org_id,
        date=date,
        kind=kind,
        exit_value_musd=value,
        value_provenance=Provenance.OBSERVED if value is not None else Provenance.IMPUTED,
    )


def make_dataset(orgs, rounds, exits):
    return Dataset.freeze(orgs, rounds, exits)


def linear_pmv_rows(n=400, seed=11, slope=2.0, intercept=None, noise_sd=0.0,
                    center_usd=8e6, half_width=0.1, vary_junk=True):
    """Labeled rows whose log target is slope*ln(M) + c (+ noise).

    M stays within exp(+/- half_width) of center_usd so the log relation is
    locally linear in the raw M feature and a linear model can recover it.
    With vary_junk=False every non-M feature is constant, which makes the
    fixture recoverable by distance-based regressors too.
    """
    rng = np.random.default_rng(seed)
    if intercept is None:
        intercept = np.log(4.0) - (slope - 1.0) * np.log(center_usd)
    sectors = ["Cyber Security", "Privacy", "Blockchain", "other"]
    countries = ["US", "IL", "GB", "CN"]
    rows = []
    for i in range(n):
        m_usd = center_usd * np.exp(rng.uniform(-half_width, half_width))
        ln_pmv = slope * np.log(m_usd) + intercept + rng.normal(0.0, noise_sd)
        if vary_junk:
            vec = PmvFeatureVector(
                days_since_epoch=float(rng.integers(30000, 35000)),
                days_since_prev=float(rng.integers(0, 1000)),
                money_raised_usd=float(m_usd),
                money_raised_delta_usd=float(rng.normal(0.0, 1e6)),
                investor_count=float(rng.integers(1, 8)),
                lead_investor_rank=float(rng.integers(0, 5)),
                sector=sectors[int(rng.integers(0, len(sectors)))],
                country=countries[int(rng.integers(0, len(countries)))],
            )
        else:
            vec = PmvFeatureVector(
                days_since_epoch=32000.0,
                days_since_prev=200.0,
                money_raised_usd=float(m_usd),
                money_raised_delta_usd=0.0,
                investor_count=3.0,
                lead_investor_rank=1.0,
                sector="Cyber Security",
                country="US",
            )
        rows.append((vec, float(np.exp(ln_pmv))))
    return rows

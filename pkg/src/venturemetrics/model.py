"""Domain model: organizations, funding rounds, exits and the sector taxonomy.

All monetary fields are USD millions. A dataset is immutable once frozen;
downstream stages only read it.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional

# The 19 canonical sector names. Tags match a sector after normalization
# (lowercase, hyphens/whitespace runs collapsed to single spaces).
SECTORS: tuple[str, ...] = (
    "Artificial Intelligence",
    "Biometrics",
    "Blockchain",
    "Cloud Security",
    "Cyber Security",
    "E-Signature",
    "Facial Recognition",
    "Fraud Detection",
    "Internet of Things",
    "Intrusion Detection",
    "Machine Learning",
    "Network Security",
    "Penetration Testing",
    "Privacy",
    "Private Cloud",
    "QR Codes",
    "Quantum Computing",
    "Security",
    "Spam Filtering",
)

_SEP_RE = re.compile(r"[-\s]+")

MIN_EVENT_DATE = dt.date(1926, 1, 1)


def normalize_tag(tag: str) -> str:
    """Canonical tag form: lowercase, trimmed, separator runs collapsed."""
    return _SEP_RE.sub(" ", tag.strip().lower())


_SECTOR_BY_KEY: dict[str, str] = {normalize_tag(name): name for name in SECTORS}
SECTOR_SET = frozenset(SECTORS)


def sector_for_tag(tag: str) -> Optional[str]:
    """Canonical sector name for a tag, or None if outside the taxonomy."""
    return _SECTOR_BY_KEY.get(normalize_tag(tag))


def assign_sectors(tags: Iterable[str], taxonomy: Optional[Iterable[str]] = None) -> frozenset[str]:
    """Intersect a tag set with the taxonomy (the full 19 sectors by default).

    Idempotent and order-independent; an organization may land in several
    sectors (primary and secondary activities both count).
    """
    allowed = SECTOR_SET if taxonomy is None else frozenset(taxonomy)
    out = set()
    for tag in tags:
        sector = sector_for_tag(tag)
        if sector is not None and sector in allowed:
            out.add(sector)
    return frozenset(out)


class RoundType(str, Enum):
    SEED = "seed"
    SERIES_A = "series_a"
    SERIES_B = "series_b"
    SERIES_C_PLUS = "series_c_plus"
    DEBT = "debt"
    OTHER = "other"


_ROUND_TYPE_ALIASES = {
    "seed": RoundType.SEED,
    "pre seed": RoundType.SEED,
    "angel": RoundType.SEED,
    "series a": RoundType.SERIES_A,
    "a": RoundType.SERIES_A,
    "series b": RoundType.SERIES_B,
    "b": RoundType.SERIES_B,
    "debt": RoundType.DEBT,
    "debt financing": RoundType.DEBT,
}


def parse_round_type(text: str) -> RoundType:
    key = normalize_tag(text)
    try:
        return RoundType(key.replace(" ", "_"))
    except ValueError:
        pass
    if key in _ROUND_TYPE_ALIASES:
        return _ROUND_TYPE_ALIASES[key]
    if key.startswith("series "):
        # series C and anything later collapse into one bucket
        return RoundType.SERIES_C_PLUS
    return RoundType.OTHER


class Provenance(str, Enum):
    OBSERVED = "observed"
    IMPUTED = "imputed"
    MISSING = "missing"


class ExitKind(str, Enum):
    IPO = "IPO"
    ACQUISITION = "acquisition"


@dataclass(frozen=True)
class Organization:
    org_id: str
    name: str
    country: str  # ISO-3166 alpha-2
    tags: frozenset[str]
    sectors: frozenset[str] = field(default_factory=frozenset)


@dataclass(frozen=True)
class FundingRound:
    round_id: str
    org_id: str
    date: dt.date
    amount_musd: float
    pmv_musd: Optional[float]
    pmv_provenance: Provenance
    investor_count: int
    lead_investor_rank: Optional[int]
    round_type: RoundType

    def with_pmv(self, pmv_musd: float, provenance: Provenance) -> "FundingRound":
        return replace(self, pmv_musd=pmv_musd, pmv_provenance=provenance)


@dataclass(frozen=True)
class ExitEvent:
    org_id: str
    date: dt.date
    kind: ExitKind
    exit_value_musd: Optional[float]
    value_provenance: Provenance

    def with_value(self, value_musd: float, provenance: Provenance) -> "ExitEvent":
        return replace(self, exit_value_musd=value_musd, value_provenance=provenance)


def _round_sort_key(r: FundingRound) -> tuple:
    return (r.date, r.round_id)


@dataclass(frozen=True)
class Dataset:
    """Frozen view of accepted organizations, rounds and exits.

    Rounds are stored sorted by (date, round_id) within each organization.
    """

    organizations: tuple[Organization, ...]
    rounds: tuple[FundingRound, ...]
    exits: tuple[ExitEvent, ...]

    @staticmethod
    def freeze(
        organizations: Iterable[Organization],
        rounds: Iterable[FundingRound],
        exits: Iterable[ExitEvent],
    ) -> "Dataset":
        orgs = tuple(sorted(organizations, key=lambda o: o.org_id))
        rnds = tuple(sorted(rounds, key=lambda r: (r.org_id, r.date, r.round_id)))
        exs = tuple(sorted(exits, key=lambda e: e.org_id))
        return Dataset(orgs, rnds, exs)

    def org_by_id(self) -> Mapping[str, Organization]:
        return {o.org_id: o for o in self.organizations}

    def rounds_by_org(self) -> Mapping[str, tuple[FundingRound, ...]]:
        out: dict[str, list[FundingRound]] = {}
        for r in self.rounds:
            out.setdefault(r.org_id, []).append(r)
        return {k: tuple(sorted(v, key=_round_sort_key)) for k, v in out.items()}

    def exit_by_org(self) -> Mapping[str, ExitEvent]:
        return {e.org_id: e for e in self.exits}

    def with_window(self, start: dt.date, end: dt.date) -> "Dataset":
        """Restrict rounds and exits to events dated within [start, end]."""
        rounds = tuple(r for r in self.rounds if start <= r.date <= end)
        exits = tuple(e for e in self.exits if start <= e.date <= end)
        return Dataset(self.organizations, rounds, exits)

    def counts(self) -> dict[str, int]:
        return {
            "organizations": len(self.organizations),
            "rounds": len(self.rounds),
            "exits": len(self.exits),
        }

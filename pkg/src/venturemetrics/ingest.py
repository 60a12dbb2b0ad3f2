"""CSV ingestion with row-level rejection tracking.

Input schemas (UTF-8, comma separated, quoted fields):

    organizations.csv   org_id,name,country_code,tags          (tags ;-separated)
    funding_rounds.csv  round_id,org_id,date,amount_musd,pmv_musd,investor_count,
                        lead_investor_rank,round_type
    exits.csv           org_id,date,kind,exit_value_musd

Every input row either becomes a domain object or lands in the rejection
list with its line number and a reason; accepted + rejected always equals
the number of data rows. The funding-round and exit parsers also accept a
trailing provenance column so imputed datasets round-trip.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .model import (
    MIN_EVENT_DATE,
    Dataset,
    ExitEvent,
    ExitKind,
    FundingRound,
    Organization,
    Provenance,
    assign_sectors,
    normalize_tag,
    parse_round_type,
)

ORG_HEADER = ["org_id", "name", "country_code", "tags"]
ROUND_HEADER = [
    "round_id",
    "org_id",
    "date",
    "amount_musd",
    "pmv_musd",
    "investor_count",
    "lead_investor_rank",
    "round_type",
]
EXIT_HEADER = ["org_id", "date", "kind", "exit_value_musd"]

DEFAULT_WINDOW = (dt.date(2010, 1, 1), dt.date(2022, 5, 31))


class ParseError(ValueError):
    """Structurally unreadable CSV (bad header, malformed row)."""


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str


def _read_rows(stream: str | io.TextIOBase, expected: list[str], optional_tail: Sequence[str] = ()):
    """Yield (line_number, row) after validating the header.

    Raises ParseError when the header does not match the documented schema
    or a row has the wrong field count.
    """
    fh = io.StringIO(stream) if isinstance(stream, str) else stream
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: missing header row")
    header = [h.strip() for h in header]
    n_cols = len(header)
    if header == expected:
        pass
    elif optional_tail and header == expected + list(optional_tail):
        pass
    else:
        raise ParseError(f"unexpected header {header!r}; expected {expected!r}")
    rows = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != n_cols:
            raise ParseError(f"line {line}: expected {n_cols} fields, got {len(row)}")
        rows.append((line, row))
    return rows


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def _parse_money(text: str) -> Optional[float]:
    text = text.strip()
    if not text:
        return None
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def parse_organizations(stream: str | io.TextIOBase) -> tuple[list[Organization], list[Rejection]]:
    orgs: list[Organization] = []
    rejects: list[Rejection] = []
    seen: set[str] = set()
    for line, row in _read_rows(stream, ORG_HEADER):
        org_id, name, country, tags_field = (cell.strip() for cell in row)
        if not org_id:
            rejects.append(Rejection(line, "missing org_id"))
            continue
        if org_id in seen:
            rejects.append(Rejection(line, f"duplicate org_id {org_id!r}"))
            continue
        country = country.upper()
        if country and (len(country) != 2 or not country.isalpha()):
            rejects.append(Rejection(line, f"country_code {country!r} is not ISO-3166 alpha-2"))
            continue
        tags = frozenset(
            normalize_tag(t) for t in tags_field.split(";") if t.strip()
        )
        seen.add(org_id)
        orgs.append(
            Organization(
                org_id=org_id,
                name=name,
                country=country,
                tags=tags,
                sectors=assign_sectors(tags),
            )
        )
    return orgs, rejects


def parse_funding_rounds(
    stream: str | io.TextIOBase,
    known_org_ids: Optional[set[str]] = None,
    today: Optional[dt.date] = None,
) -> tuple[list[FundingRound], list[Rejection]]:
    """Parse rounds; referential checks run only when known_org_ids is given.

    Output is sorted by (org_id, date, round_id).
    """
    today = today or dt.date.today()
    rounds: list[FundingRound] = []
    rejects: list[Rejection] = []
    seen: set[str] = set()
    for line, row in _read_rows(stream, ROUND_HEADER, optional_tail=["pmv_provenance"]):
        cells = [c.strip() for c in row]
        round_id, org_id, date_s, amount_s, pmv_s, n_s, rank_s, type_s = cells[:8]
        if not round_id:
            rejects.append(Rejection(line, "missing round_id"))
            continue
        if round_id in seen:
            rejects.append(Rejection(line, f"duplicate round_id {round_id!r}"))
            continue
        if known_org_ids is not None and org_id not in known_org_ids:
            rejects.append(Rejection(line, f"unknown org_id {org_id!r}"))
            continue
        try:
            date = _parse_date(date_s)
        except ValueError:
            rejects.append(Rejection(line, f"bad date {date_s!r}"))
            continue
        if not (MIN_EVENT_DATE <= date <= today):
            rejects.append(Rejection(line, f"date {date} outside [{MIN_EVENT_DATE}, today]"))
            continue
        try:
            amount = _parse_money(amount_s)
        except ValueError:
            rejects.append(Rejection(line, f"bad amount {amount_s!r}"))
            continue
        if amount is None:
            rejects.append(Rejection(line, "missing amount"))
            continue
        if amount < 0:
            rejects.append(Rejection(line, f"negative amount {amount}"))
            continue
        try:
            pmv = _parse_money(pmv_s)
        except ValueError:
            rejects.append(Rejection(line, f"bad pmv {pmv_s!r}"))
            continue
        if pmv is not None and pmv <= 0:
            rejects.append(Rejection(line, f"non-positive pmv {pmv}"))
            continue
        try:
            investor_count = int(n_s) if n_s else 0
        except ValueError:
            rejects.append(Rejection(line, f"bad investor_count {n_s!r}"))
            continue
        if investor_count < 0:
            rejects.append(Rejection(line, f"negative investor_count {investor_count}"))
            continue
        try:
            rank = int(rank_s) if rank_s else 0
        except ValueError:
            rejects.append(Rejection(line, f"bad lead_investor_rank {rank_s!r}"))
            continue
        if rank < 0:
            rejects.append(Rejection(line, f"negative lead_investor_rank {rank}"))
            continue
        # provenance column, when present, only distinguishes imputed PMVs
        provenance = Provenance.OBSERVED if pmv is not None else Provenance.MISSING
        if len(cells) > 8 and cells[8] == Provenance.IMPUTED.value and pmv is not None:
            provenance = Provenance.IMPUTED
        seen.add(round_id)
        rounds.append(
            FundingRound(
                round_id=round_id,
                org_id=org_id,
                date=date,
                amount_musd=amount,
                pmv_musd=pmv,
                pmv_provenance=provenance,
                investor_count=investor_count,
                lead_investor_rank=rank if rank >= 1 else None,
                round_type=parse_round_type(type_s),
            )
        )
    rounds.sort(key=lambda r: (r.org_id, r.date, r.round_id))
    return rounds, rejects


def parse_exits(
    stream: str | io.TextIOBase,
    rounds: Optional[Sequence[FundingRound]] = None,
    known_org_ids: Optional[set[str]] = None,
    today: Optional[dt.date] = None,
) -> tuple[list[ExitEvent], list[Rejection]]:
    """Parse exits, keeping at most one (the earliest) per organization.

    When rounds are supplied, an exit dated before the organization's last
    round is rejected ("exit precedes financing history"), as is an exit for
    an organization with no financing history.
    """
    today = today or dt.date.today()
    last_round: dict[str, dt.date] = {}
    if rounds is not None:
        for r in rounds:
            prev = last_round.get(r.org_id)
            if prev is None or r.date > prev:
                last_round[r.org_id] = r.date

    candidates: list[tuple[int, ExitEvent]] = []
    rejects: list[Rejection] = []
    for line, row in _read_rows(stream, EXIT_HEADER, optional_tail=["value_provenance"]):
        cells = [c.strip() for c in row]
        org_id, date_s, kind_s, value_s = cells[:4]
        if known_org_ids is not None and org_id not in known_org_ids:
            rejects.append(Rejection(line, f"unknown org_id {org_id!r}"))
            continue
        try:
            date = _parse_date(date_s)
        except ValueError:
            rejects.append(Rejection(line, f"bad date {date_s!r}"))
            continue
        if not (MIN_EVENT_DATE <= date <= today):
            rejects.append(Rejection(line, f"date {date} outside [{MIN_EVENT_DATE}, today]"))
            continue
        kind_key = kind_s.strip().lower()
        if kind_key == "ipo":
            kind = ExitKind.IPO
        elif kind_key == "acquisition":
            kind = ExitKind.ACQUISITION
        else:
            rejects.append(Rejection(line, f"unknown exit kind {kind_s!r}"))
            continue
        try:
            value = _parse_money(value_s)
        except ValueError:
            rejects.append(Rejection(line, f"bad exit value {value_s!r}"))
            continue
        if value is not None and value <= 0:
            rejects.append(Rejection(line, f"non-positive exit value {value}"))
            continue
        if rounds is not None:
            last = last_round.get(org_id)
            if last is None:
                rejects.append(Rejection(line, f"no financing history for org_id {org_id!r}"))
                continue
            if date < last:
                rejects.append(Rejection(line, "exit precedes financing history"))
                continue
        # empty value is a placeholder the imputation stage fills in
        provenance = Provenance.OBSERVED if value is not None else Provenance.IMPUTED
        candidates.append(
            (line, ExitEvent(org_id=org_id, date=date, kind=kind,
                             exit_value_musd=value, value_provenance=provenance))
        )

    # earliest exit per org wins; later ones are reported, not dropped silently
    kept: dict[str, tuple[int, ExitEvent]] = {}
    for line, ev in candidates:
        cur = kept.get(ev.org_id)
        if cur is None or (ev.date, line) < (cur[1].date, cur[0]):
            kept[ev.org_id] = (line, ev)
    kept_lines = {line for line, _ in kept.values()}
    for line, ev in candidates:
        if line not in kept_lines:
            rejects.append(Rejection(line, f"duplicate exit for org_id {ev.org_id!r} (earliest kept)"))
    rejects.sort(key=lambda r: r.line)
    return [ev for _, ev in sorted(kept.values(), key=lambda t: t[1].org_id)], rejects


def load_dataset(
    organizations_csv: str,
    funding_rounds_csv: str,
    exits_csv: str,
    window: Optional[tuple[dt.date, dt.date]] = DEFAULT_WINDOW,
    strict: bool = True,
    today: Optional[dt.date] = None,
) -> tuple[Dataset, dict[str, list[Rejection]]]:
    """Parse the three inputs, apply the sample window, freeze the dataset."""
    orgs, org_rej = parse_organizations(organizations_csv)
    ids = {o.org_id for o in orgs} if strict else None
    rounds, round_rej = parse_funding_rounds(funding_rounds_csv, known_org_ids=ids, today=today)
    exits, exit_rej = parse_exits(exits_csv, rounds=rounds, known_org_ids=ids, today=today)
    dataset = Dataset.freeze(orgs, rounds, exits)
    if window is not None:
        dataset = dataset.with_window(*window)
    rejections = {
        "organizations": org_rej,
        "funding_rounds": round_rej,
        "exits": exit_rej,
    }
    return dataset, rejections


# --- serialization (inverse of the parsers) ---------------------------------

def _fmt_money(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def serialize_organizations(orgs: Iterable[Organization]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ORG_HEADER)
    for o in orgs:
        w.writerow([o.org_id, o.name, o.country, ";".join(sorted(o.tags))])
    return buf.getvalue()


def serialize_funding_rounds(rounds: Iterable[FundingRound], with_provenance: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROUND_HEADER + (["pmv_provenance"] if with_provenance else []))
    for r in rounds:
        row = [
            r.round_id,
            r.org_id,
            r.date.isoformat(),
            _fmt_money(r.amount_musd),
            _fmt_money(r.pmv_musd),
            str(r.investor_count),
            "" if r.lead_investor_rank is None else str(r.lead_investor_rank),
            r.round_type.value,
        ]
        if with_provenance:
            row.append(r.pmv_provenance.value)
        w.writerow(row)
    return buf.getvalue()


def serialize_exits(exits: Iterable[ExitEvent], with_provenance: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXIT_HEADER + (["value_provenance"] if with_provenance else []))
    for e in exits:
        row = [e.org_id, e.date.isoformat(), e.kind.value, _fmt_money(e.exit_value_musd)]
        if with_provenance:
            row.append(e.value_provenance.value)
        w.writerow(row)
    return buf.getvalue()


def rejections_csv(rejects: Sequence[Rejection]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["line", "reason"])
    for r in rejects:
        w.writerow([r.line, r.reason])
    return buf.getvalue()

"""Parsing and normalization of raw result and sanction files.

Input files are comma-delimited UTF-8 text with a header row; the exact
column layout is documented in docs/data-format.md. Parsing never aborts
on a bad data row: rows that cannot be normalized are skipped and counted,
and the caller gets the tallies back alongside the accepted records.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, TextIO

MIN_RECORD_DATE = date(1990, 1, 1)

# Tailwind above +2.0 m/s invalidates a sprint mark; exactly +2.0 is legal.
WIND_LEGAL_LIMIT_MPS = 2.0

RESULT_COLUMNS = (
    "athlete_id",
    "athlete_name",
    "mark",
    "date",
    "wind",
    "reaction_time",
    "round",
    "rank",
    "competition_id",
    "event_code",
    "country",
    "venue",
)

SANCTION_COLUMNS = ("athlete_id", "start", "end", "note")

# IOC/World-Athletics style 3-letter country codes. Unknown codes are kept
# as-is but counted as warnings so data problems stay visible.
KNOWN_COUNTRY_CODES = frozenset(
    """
    AFG ALB ALG AND ANG ANT ARG ARM ARU ASA AUS AUT AZE BAH BAN BAR BDI BEL
    BEN BER BHU BIH BIZ BLR BOL BOT BRA BRN BRU BUL BUR CAF CAM CAN CAY CGO
    CHA CHI CHN CIV CMR COD COK COL COM CPV CRC CRO CUB CYP CZE DEN DJI DMA
    DOM ECU EGY ERI ESA ESP EST ETH FIJ FIN FRA FSM GAB GAM GBR GBS GEO GEQ
    GER GHA GRE GRN GUA GUI GUM GUY HAI HKG HON HUN INA IND IRI IRL IRQ ISL
    ISR ISV ITA IVB JAM JOR JPN KAZ KEN KGZ KIR KOR KOS KSA KUW LAO LAT LBN
    LBR LCA LES LIB LIE LTU LUX MAD MAR MAS MAW MDA MDV MEX MGL MHL MKD MLI
    MLT MNE MON MOZ MRI MTN MYA NAM NCA NED NEP NGR NIG NOR NRU NZL OMA PAK
    PAN PAR PER PHI PLE PLW PNG POL POR PRK PUR QAT ROU RSA RUS RWA SAM SEN
    SEY SGP SKN SLE SLO SMR SOL SOM SRB SRI SSD STP SUD SUI SUR SVK SWE SWZ
    SYR TAN TGA THA TJK TKM TLS TOG TPE TTO TUN TUR TUV UAE UGA UKR URU USA
    UZB VAN VEN VIE VIN YEM ZAM ZIM ANA AIN EOR
    """.split()
)


class IngestError(Exception):
    """Base class for ingest failures."""


class MarkUnparseable(IngestError):
    pass


class DateUnparseable(IngestError):
    pass


class WindUnparseable(IngestError):
    pass


class MissingColumns(IngestError):
    def __init__(self, missing: Iterable[str]):
        self.missing = tuple(missing)
        super().__init__(f"missing required columns: {', '.join(self.missing)}")


class Round(str, Enum):
    HEAT = "heat"
    SEMIFINAL = "semifinal"
    FINAL = "final"
    UNKNOWN = "unknown"

    @classmethod
    def from_raw(cls, raw: str | None) -> "Round":
        text = (raw or "").strip().lower()
        aliases = {
            "heat": cls.HEAT,
            "h": cls.HEAT,
            "semifinal": cls.SEMIFINAL,
            "semi-final": cls.SEMIFINAL,
            "semi": cls.SEMIFINAL,
            "sf": cls.SEMIFINAL,
            "final": cls.FINAL,
            "f": cls.FINAL,
        }
        return aliases.get(text, cls.UNKNOWN)


ROUND_ORDINAL = {Round.HEAT: 0, Round.SEMIFINAL: 1, Round.FINAL: 2, Round.UNKNOWN: 0}


@dataclass(slots=True)
class RawResultRow:
    athlete_id: str
    athlete_name: str
    mark: str
    date: str
    wind: str | None
    reaction_time: str | None
    round: str
    rank: str | None
    competition_id: str
    event_code: str
    country: str
    venue: str

    def key_fields_present(self) -> bool:
        return bool(self.athlete_id.strip() and self.competition_id.strip() and self.event_code.strip())


@dataclass(frozen=True, slots=True)
class PerformanceRecord:
    """One normalized competition result.

    Times are stored as integer centiseconds so equal marks compare equal
    regardless of how they were formatted; `time_seconds` exposes the
    usual float view.
    """

    athlete_id: str
    competition_id: str
    event_code: str
    time_cs: int
    date: date
    wind_mps: float | None
    reaction_time_s: float | None
    round: Round
    rank: int | None
    wind_legal: bool

    @property
    def time_seconds(self) -> float:
        return self.time_cs / 100.0

    def key(self) -> tuple:
        """Dedup identity: one athlete can run several rounds per day."""
        return (self.athlete_id, self.competition_id, self.event_code, self.round.value, self.time_cs)


def performance_sort_key(record: PerformanceRecord) -> tuple:
    """Canonical in-history ordering: date, then time, then stable tiebreaks."""
    return (record.date.toordinal(), record.time_cs, record.competition_id, record.round.value)


@dataclass(frozen=True, slots=True)
class SanctionRecord:
    athlete_id: str
    sanction_start: date
    sanction_end: date | None
    source_note: str = ""

    def interval_days(self) -> float:
        if self.sanction_end is None:
            return math.inf
        return (self.sanction_end - self.sanction_start).days


@dataclass(slots=True)
class CompetitionRecord:
    competition_id: str
    name: str
    date: date
    country: str
    venue: str
    event_codes: set[str] = field(default_factory=set)


@dataclass(slots=True)
class AthleteInfo:
    athlete_id: str
    name: str
    country: str
    country_known: bool


@dataclass
class IngestStats:
    """Row accounting for one parse pass; skipped + accepted = total."""

    rows_total: int = 0
    rows_accepted: int = 0
    skipped: Counter = field(default_factory=Counter)
    warnings: Counter = field(default_factory=Counter)

    @property
    def rows_skipped(self) -> int:
        return sum(self.skipped.values())

    def skip(self, reason: str) -> None:
        self.skipped[reason] += 1

    def warn(self, reason: str) -> None:
        self.warnings[reason] += 1

    def merge(self, other: "IngestStats") -> None:
        self.rows_total += other.rows_total
        self.rows_accepted += other.rows_accepted
        self.skipped.update(other.skipped)
        self.warnings.update(other.warnings)


@dataclass
class IngestResult:
    records: list[PerformanceRecord]
    competitions: dict[str, CompetitionRecord]
    athletes: dict[str, AthleteInfo]
    stats: IngestStats


_MARK_SENTINELS = {"DNF", "DNS", "DQ", "NM", "DSQ"}
_MARK_SECONDS = re.compile(r"^(\d+)(?:\.(\d{1,2}))?$")
_MARK_MIN_SEC = re.compile(r"^(\d+):([0-5]\d)(?:\.(\d{1,2}))?$")
_MARK_HMS = re.compile(r"^(\d+):([0-5]\d):([0-5]\d)(?:\.(\d{1,2}))?$")


def mark_to_centiseconds(mark: str) -> int:
    """Parse a performance string ("9.58", "1:45.23", "2:05:41.00") to centiseconds."""
    text = (mark or "").strip()
    if not text or text.upper() in _MARK_SENTINELS:
        raise MarkUnparseable(f"non-result mark: {mark!r}")
    if m := _MARK_SECONDS.match(text):
        hours, minutes, seconds, frac = 0, 0, int(m.group(1)), m.group(2)
    elif m := _MARK_MIN_SEC.match(text):
        hours, minutes, seconds, frac = 0, int(m.group(1)), int(m.group(2)), m.group(3)
    elif m := _MARK_HMS.match(text):
        hours, minutes, seconds, frac = int(m.group(1)), int(m.group(2)), int(m.group(3)), m.group(4)
    else:
        raise MarkUnparseable(f"malformed mark: {mark!r}")
    centis = int((frac or "0").ljust(2, "0"))
    total = ((hours * 60 + minutes) * 60 + seconds) * 100 + centis
    if total <= 0:
        raise MarkUnparseable(f"non-positive mark: {mark!r}")
    return total


def parse_mark(mark: str) -> float:
    """Total seconds for a performance string, centisecond precision preserved."""
    return mark_to_centiseconds(mark) / 100.0


def format_mark(time_cs: int) -> str:
    """Inverse of mark_to_centiseconds, shortest conventional form."""
    centis = time_cs % 100
    total_s = time_cs // 100
    hours, rem = divmod(total_s, 3600)
    minutes, seconds = divmod(rem, 60)
    if hours:
        return f"{hours}:{minutes:02d}:{seconds:02d}.{centis:02d}"
    if minutes:
        return f"{minutes}:{seconds:02d}.{centis:02d}"
    return f"{seconds}.{centis:02d}"


def parse_date_iso(raw: str, *, today: date | None = None) -> date:
    text = (raw or "").strip()
    try:
        value = date.fromisoformat(text)
    except ValueError as exc:
        raise DateUnparseable(f"bad date {raw!r}") from exc
    upper = today or date.today()
    if not (MIN_RECORD_DATE <= value <= upper):
        raise DateUnparseable(f"date {value.isoformat()} outside [{MIN_RECORD_DATE}, {upper}]")
    return value


def parse_wind(raw: str | None) -> float | None:
    text = (raw or "").strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError as exc:
        raise WindUnparseable(f"bad wind {raw!r}") from exc
    if not math.isfinite(value):
        raise WindUnparseable(f"non-finite wind {raw!r}")
    return value


def wind_is_legal(wind_mps: float | None) -> bool:
    """Missing wind counts as legal; only tailwind above the limit invalidates."""
    return wind_mps is None or wind_mps <= WIND_LEGAL_LIMIT_MPS


def normalize_country(raw: str) -> tuple[str, bool]:
    code = (raw or "").strip().upper()
    return code, code in KNOWN_COUNTRY_CODES


def normalize_row(
    row: RawResultRow,
    stats: IngestStats | None = None,
    *,
    today: date | None = None,
) -> PerformanceRecord:
    """Turn a raw row into a PerformanceRecord.

    Raises MarkUnparseable / DateUnparseable for fatal per-row problems
    (callers skip the row). Wind, reaction time and rank degrade softly:
    unparseable values are dropped and counted, the row survives.
    """
    stats = stats if stats is not None else IngestStats()
    time_cs = mark_to_centiseconds(row.mark)
    when = parse_date_iso(row.date, today=today)

    try:
        wind = parse_wind(row.wind)
    except WindUnparseable:
        stats.warn("wind_unparseable")
        wind = None

    reaction: float | None = None
    raw_reaction = (row.reaction_time or "").strip()
    if raw_reaction:
        try:
            value = float(raw_reaction)
            if math.isfinite(value) and value > 0:
                reaction = value
            else:
                stats.warn("reaction_time_invalid")
        except ValueError:
            stats.warn("reaction_time_invalid")

    rank: int | None = None
    raw_rank = (row.rank or "").strip()
    if raw_rank:
        try:
            value = int(raw_rank)
            if value > 0:
                rank = value
            else:
                stats.warn("rank_invalid")
        except ValueError:
            stats.warn("rank_invalid")

    _, country_known = normalize_country(row.country)
    if not country_known:
        stats.warn("unknown_country")

    return PerformanceRecord(
        athlete_id=row.athlete_id.strip(),
        competition_id=row.competition_id.strip(),
        event_code=row.event_code.strip(),
        time_cs=time_cs,
        date=when,
        wind_mps=wind,
        reaction_time_s=reaction,
        round=Round.from_raw(row.round),
        rank=rank,
        wind_legal=wind_is_legal(wind),
    )


def record_to_row(record: PerformanceRecord, *, athlete_name: str = "", country: str = "", venue: str = "") -> RawResultRow:
    """Serialize back to the raw-row shape; normalize_row() round-trips it."""
    return RawResultRow(
        athlete_id=record.athlete_id,
        athlete_name=athlete_name,
        mark=format_mark(record.time_cs),
        date=record.date.isoformat(),
        wind=None if record.wind_mps is None else f"{record.wind_mps:+g}",
        reaction_time=None if record.reaction_time_s is None else f"{record.reaction_time_s:g}",
        round=record.round.value,
        rank=None if record.rank is None else str(record.rank),
        competition_id=record.competition_id,
        event_code=record.event_code,
        country=country,
        venue=venue,
    )


def _check_header(fieldnames: Iterable[str] | None, required: Iterable[str]) -> None:
    have = set(fieldnames or ())
    missing = [c for c in required if c not in have]
    if missing:
        raise MissingColumns(missing)


def iter_result_rows(handle: TextIO) -> tuple[Iterable[RawResultRow], csv.DictReader]:
    reader = csv.DictReader(handle)
    _check_header(reader.fieldnames, RESULT_COLUMNS)

    def rows() -> Iterable[RawResultRow]:
        for raw in reader:
            yield RawResultRow(
                athlete_id=raw.get("athlete_id") or "",
                athlete_name=raw.get("athlete_name") or "",
                mark=raw.get("mark") or "",
                date=raw.get("date") or "",
                wind=raw.get("wind"),
                reaction_time=raw.get("reaction_time"),
                round=raw.get("round") or "",
                rank=raw.get("rank"),
                competition_id=raw.get("competition_id") or "",
                event_code=raw.get("event_code") or "",
                country=raw.get("country") or "",
                venue=raw.get("venue") or "",
            )

    return rows(), reader


def load_results(path: str | Path, *, today: date | None = None) -> IngestResult:
    """Parse one results file; never aborts on a bad row."""
    stats = IngestStats()
    records: list[PerformanceRecord] = []
    competitions: dict[str, CompetitionRecord] = {}
    athletes: dict[str, AthleteInfo] = {}

    with open(path, newline="", encoding="utf-8") as handle:
        rows, _ = iter_result_rows(handle)
        for row in rows:
            stats.rows_total += 1
            if not row.key_fields_present():
                stats.skip("missing_key_fields")
                continue
            try:
                record = normalize_row(row, stats, today=today)
            except MarkUnparseable:
                stats.skip("mark_unparseable")
                continue
            except DateUnparseable:
                stats.skip("date_unparseable")
                continue
            stats.rows_accepted += 1
            records.append(record)

            comp = competitions.get(record.competition_id)
            if comp is None:
                competitions[record.competition_id] = CompetitionRecord(
                    competition_id=record.competition_id,
                    name=row.venue.strip() or record.competition_id,
                    date=record.date,
                    country="",
                    venue=row.venue.strip(),
                    event_codes={record.event_code},
                )
            else:
                comp.event_codes.add(record.event_code)
                comp.date = min(comp.date, record.date)

            country, known = normalize_country(row.country)
            athletes[record.athlete_id] = AthleteInfo(
                athlete_id=record.athlete_id,
                name=row.athlete_name.strip(),
                country=country,
                country_known=known,
            )

    return IngestResult(records=records, competitions=competitions, athletes=athletes, stats=stats)


def load_sanctions(path: str | Path, *, today: date | None = None) -> tuple[list[SanctionRecord], IngestStats]:
    """Parse the sanction file; duplicates on (athlete_id, start) keep the longer interval."""
    stats = IngestStats()
    by_key: dict[tuple[str, date], SanctionRecord] = {}

    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        _check_header(reader.fieldnames, ("athlete_id", "start", "end"))
        for raw in reader:
            stats.rows_total += 1
            athlete_id = (raw.get("athlete_id") or "").strip()
            if not athlete_id:
                stats.skip("missing_athlete_id")
                continue
            try:
                start = parse_date_iso(raw.get("start") or "", today=today)
            except DateUnparseable:
                stats.skip("start_unparseable")
                continue
            end_text = (raw.get("end") or "").strip()
            end: date | None = None
            if end_text:
                try:
                    end = parse_date_iso(end_text, today=today)
                except DateUnparseable:
                    stats.skip("end_unparseable")
                    continue
                if end < start:
                    stats.skip("end_before_start")
                    continue
            record = SanctionRecord(
                athlete_id=athlete_id,
                sanction_start=start,
                sanction_end=end,
                source_note=(raw.get("note") or "").strip(),
            )
            stats.rows_accepted += 1
            key = (athlete_id, start)
            existing = by_key.get(key)
            if existing is None or record.interval_days() > existing.interval_days():
                by_key[key] = record

    ordered = sorted(by_key.values(), key=lambda s: (s.athlete_id, s.sanction_start))
    return ordered, stats

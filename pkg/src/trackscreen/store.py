"""Embedded relational storage and analytical queries.

A single SQLite database replaces the transactional/analytical/cache triad
of a larger deployment while keeping the same contracts: idempotent row
upserts keyed by (athlete, competition, event, round, time); slice queries
that read a consistent snapshot even while ingest is running (WAL mode,
one writer, per-thread reader connections); and an in-process LRU cache
with version-stamped keys so warm screening pages come back without
touching the database.
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
from collections import OrderedDict
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .detectors.base import AthleteHistory, DetectionResult
from .records import (
    AthleteInfo,
    CompetitionRecord,
    PerformanceRecord,
    Round,
    SanctionRecord,
    wind_is_legal,
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS performances (
    athlete_id     TEXT NOT NULL,
    competition_id TEXT NOT NULL,
    event_code     TEXT NOT NULL,
    round          TEXT NOT NULL,
    time_cs        INTEGER NOT NULL,
    date           TEXT NOT NULL,
    wind_mps       REAL,
    reaction_time_s REAL,
    rank           INTEGER,
    wind_legal     INTEGER NOT NULL,
    PRIMARY KEY (athlete_id, competition_id, event_code, round, time_cs)
);
CREATE INDEX IF NOT EXISTS idx_perf_event_date ON performances (event_code, date);
CREATE INDEX IF NOT EXISTS idx_perf_athlete ON performances (athlete_id);

CREATE TABLE IF NOT EXISTS competitions (
    competition_id TEXT PRIMARY KEY,
    name           TEXT NOT NULL,
    date           TEXT NOT NULL,
    country        TEXT NOT NULL,
    venue          TEXT NOT NULL,
    event_codes    TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS athletes (
    athlete_id    TEXT PRIMARY KEY,
    name          TEXT NOT NULL,
    country       TEXT NOT NULL,
    country_known INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS sanctions (
    athlete_id  TEXT NOT NULL,
    start       TEXT NOT NULL,
    end         TEXT,
    note        TEXT NOT NULL DEFAULT '',
    PRIMARY KEY (athlete_id, start)
);
"""


@dataclass(frozen=True)
class EventSlice:
    """One event/gender window; the unit every query and detector run works on."""

    event_code: str
    gender: str = "men"
    date_from: date = date(1990, 1, 1)
    date_to: date = date(2100, 1, 1)
    wind_legal_only: bool = True

    def __post_init__(self) -> None:
        if self.date_from > self.date_to:
            raise ValueError("date_from must not exceed date_to")

    def key(self) -> str:
        payload = json.dumps({
            "event_code": self.event_code,
            "gender": self.gender,
            "date_from": self.date_from.isoformat(),
            "date_to": self.date_to.isoformat(),
            "wind_legal_only": self.wind_legal_only,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def describe(self) -> dict:
        return {
            "event_code": self.event_code,
            "gender": self.gender,
            "date_from": self.date_from.isoformat(),
            "date_to": self.date_to.isoformat(),
            "wind_legal_only": self.wind_legal_only,
        }


class LruCache:
    """Small thread-safe LRU; eviction only costs recomputation."""

    def __init__(self, maxsize: int = 128):
        self.maxsize = maxsize
        self._data: OrderedDict[str, object] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: str):
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.hits += 1
                return self._data[key]
            self.misses += 1
            return None

    def put(self, key: str, value) -> None:
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()


class Store:
    """SQLite-backed store: one writer, many snapshot readers."""

    def __init__(self, path: str | Path = ":memory:", cache_size: int = 128):
        self.path = str(path)
        self._memory = self.path == ":memory:"
        self._write_lock = threading.RLock()
        self._local = threading.local()
        self._writer = self._connect()
        self._writer.executescript(_SCHEMA)
        self._writer.commit()
        self.page_cache = LruCache(cache_size)
        self._results: dict[tuple[str, str, str], DetectionResult] = {}
        self._results_lock = threading.Lock()

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, check_same_thread=False)
        if not self._memory:
            conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA synchronous=NORMAL")
        return conn

    def _reader(self) -> sqlite3.Connection:
        if self._memory:
            # memory databases are per-connection; share the writer, serialized
            return self._writer
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = self._connect()
            self._local.conn = conn
        return conn

    def close(self) -> None:
        self._writer.close()

    # ------------------------------------------------------------------
    # writes
    # ------------------------------------------------------------------

    def upsert_performances(self, records: Iterable[PerformanceRecord]) -> int:
        """Insert records idempotently; returns the number of new rows."""
        rows = [
            (
                r.athlete_id, r.competition_id, r.event_code, r.round.value, r.time_cs,
                r.date.isoformat(), r.wind_mps, r.reaction_time_s, r.rank, int(r.wind_legal),
            )
            for r in records
        ]
        with self._write_lock:
            before = self._writer.execute("SELECT COUNT(*) FROM performances").fetchone()[0]
            self._writer.executemany(
                "INSERT OR IGNORE INTO performances VALUES (?,?,?,?,?,?,?,?,?,?)", rows
            )
            self._writer.commit()
            after = self._writer.execute("SELECT COUNT(*) FROM performances").fetchone()[0]
        return after - before

    def upsert_competitions(self, competitions: Iterable[CompetitionRecord]) -> None:
        rows = [
            (c.competition_id, c.name, c.date.isoformat(), c.country, c.venue,
             ";".join(sorted(c.event_codes)))
            for c in competitions
        ]
        with self._write_lock:
            self._writer.executemany(
                """INSERT INTO competitions VALUES (?,?,?,?,?,?)
                   ON CONFLICT(competition_id) DO UPDATE SET
                     name=excluded.name, date=MIN(date, excluded.date),
                     country=excluded.country, venue=excluded.venue,
                     event_codes=excluded.event_codes""",
                rows,
            )
            self._writer.commit()

    def upsert_athletes(self, athletes: Iterable[AthleteInfo]) -> None:
        rows = [(a.athlete_id, a.name, a.country, int(a.country_known)) for a in athletes]
        with self._write_lock:
            self._writer.executemany(
                "INSERT OR REPLACE INTO athletes VALUES (?,?,?,?)", rows
            )
            self._writer.commit()

    def upsert_sanctions(self, sanctions: Iterable[SanctionRecord]) -> int:
        """Keep the longer interval when (athlete_id, start) collides."""
        count = 0
        with self._write_lock:
            for s in sanctions:
                existing = self._writer.execute(
                    "SELECT end FROM sanctions WHERE athlete_id=? AND start=?",
                    (s.athlete_id, s.sanction_start.isoformat()),
                ).fetchone()
                end = None if s.sanction_end is None else s.sanction_end.isoformat()
                if existing is None:
                    self._writer.execute(
                        "INSERT INTO sanctions VALUES (?,?,?,?)",
                        (s.athlete_id, s.sanction_start.isoformat(), end, s.source_note),
                    )
                    count += 1
                else:
                    old_end = existing[0]
                    keep_new = old_end is not None and (end is None or end > old_end)
                    if keep_new:
                        self._writer.execute(
                            "UPDATE sanctions SET end=?, note=? WHERE athlete_id=? AND start=?",
                            (end, s.source_note, s.athlete_id, s.sanction_start.isoformat()),
                        )
            self._writer.commit()
        return count

    # ------------------------------------------------------------------
    # reads
    # ------------------------------------------------------------------

    def count_performances(self) -> int:
        return self._reader().execute("SELECT COUNT(*) FROM performances").fetchone()[0]

    def query_slice(self, slice_: EventSlice) -> list[AthleteHistory]:
        """Per-athlete histories in the slice, date-then-time ordered.

        Wind-illegal rows are excluded when the slice says so; athletes with
        no remaining rows are omitted. Unknown event codes yield an empty
        list rather than an error.
        """
        sql = (
            "SELECT athlete_id, competition_id, event_code, round, time_cs, date,"
            " wind_mps, reaction_time_s, rank, wind_legal FROM performances"
            " WHERE event_code=? AND date>=? AND date<=?"
        )
        params: list = [slice_.event_code, slice_.date_from.isoformat(), slice_.date_to.isoformat()]
        if slice_.wind_legal_only:
            sql += " AND wind_legal=1"
        sql += " ORDER BY athlete_id, date, time_cs, competition_id, round"
        cursor = self._reader().execute(sql, params)

        histories: list[AthleteHistory] = []
        current_id: str | None = None
        bucket: list[PerformanceRecord] = []

        def flush() -> None:
            if bucket:
                histories.append(AthleteHistory(bucket[0].athlete_id, bucket[0].event_code, tuple(bucket)))

        for row in cursor:
            record = PerformanceRecord(
                athlete_id=row[0],
                competition_id=row[1],
                event_code=row[2],
                round=Round(row[3]),
                time_cs=row[4],
                date=date.fromisoformat(row[5]),
                wind_mps=row[6],
                reaction_time_s=row[7],
                rank=row[8],
                wind_legal=bool(row[9]),
            )
            if record.athlete_id != current_id:
                flush()
                bucket = []
                current_id = record.athlete_id
            bucket.append(record)
        flush()
        return histories

    def list_slices(self) -> list[dict]:
        rows = self._reader().execute(
            "SELECT event_code, MIN(date), MAX(date), COUNT(DISTINCT athlete_id), COUNT(*)"
            " FROM performances GROUP BY event_code ORDER BY event_code"
        ).fetchall()
        return [
            {
                "event_code": r[0],
                "date_from": r[1],
                "date_to": r[2],
                "athletes": r[3],
                "performances": r[4],
            }
            for r in rows
        ]

    def get_sanctions(self) -> list[SanctionRecord]:
        rows = self._reader().execute(
            "SELECT athlete_id, start, end, note FROM sanctions ORDER BY athlete_id, start"
        ).fetchall()
        return [
            SanctionRecord(
                athlete_id=r[0],
                sanction_start=date.fromisoformat(r[1]),
                sanction_end=None if r[2] is None else date.fromisoformat(r[2]),
                source_note=r[3],
            )
            for r in rows
        ]

    def sanctioned_athlete_ids(self) -> set[str]:
        rows = self._reader().execute("SELECT DISTINCT athlete_id FROM sanctions").fetchall()
        return {r[0] for r in rows}

    def athlete_name(self, athlete_id: str) -> str:
        row = self._reader().execute(
            "SELECT name FROM athletes WHERE athlete_id=?", (athlete_id,)
        ).fetchone()
        return row[0] if row else ""

    def competition(self, competition_id: str) -> CompetitionRecord | None:
        row = self._reader().execute(
            "SELECT competition_id, name, date, country, venue, event_codes FROM competitions"
            " WHERE competition_id=?",
            (competition_id,),
        ).fetchone()
        if row is None:
            return None
        return CompetitionRecord(
            competition_id=row[0], name=row[1], date=date.fromisoformat(row[2]),
            country=row[3], venue=row[4],
            event_codes=set(row[5].split(";")) if row[5] else set(),
        )

    # ------------------------------------------------------------------
    # detection materialization + screening cache
    # ------------------------------------------------------------------

    def put_result(self, slice_: EventSlice, config_hash: str, result: DetectionResult) -> None:
        with self._results_lock:
            self._results[(slice_.key(), result.method_id, config_hash)] = result

    def get_result(self, slice_: EventSlice, method_id: str, config_hash: str) -> DetectionResult | None:
        with self._results_lock:
            return self._results.get((slice_.key(), method_id, config_hash))

    def results_for_slice(self, slice_: EventSlice, config_hash: str) -> dict[str, DetectionResult]:
        key = slice_.key()
        with self._results_lock:
            return {
                method_id: result
                for (slice_key, method_id, cfg), result in self._results.items()
                if slice_key == key and cfg == config_hash
            }

    @staticmethod
    def screen_cache_key(slice_: EventSlice, method_id: str, config_hash: str, cursor: str | None) -> str:
        payload = json.dumps(
            {"slice": slice_.describe(), "method": method_id, "config": config_hash, "cursor": cursor or ""},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def cached_screen(
        self,
        slice_: EventSlice,
        method_id: str,
        config_hash: str,
        builder: Callable[[], bytes],
        cursor: str | None = None,
    ) -> bytes:
        """Serve a screening page from cache, building and storing it on a miss.

        The cache key covers the slice, method, detector-config version and
        cursor, so a config bump recomputes instead of serving stale pages.
        The cached value is the serialized payload: repeat calls are
        byte-identical.
        """
        key = self.screen_cache_key(slice_, method_id, config_hash, cursor)
        hit = self.page_cache.get(key)
        if hit is not None:
            return hit  # type: ignore[return-value]
        payload = builder()
        self.page_cache.put(key, payload)
        return payload


def ingest_dataset(
    store: Store,
    records: Sequence[PerformanceRecord],
    competitions: Iterable[CompetitionRecord] = (),
    athletes: Iterable[AthleteInfo] = (),
    sanctions: Iterable[SanctionRecord] = (),
) -> int:
    """Convenience: load one parsed dataset into the store."""
    inserted = store.upsert_performances(records)
    store.upsert_competitions(competitions)
    store.upsert_athletes(athletes)
    store.upsert_sanctions(sanctions)
    return inserted

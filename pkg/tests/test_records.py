from __future__ import annotations

from datetime import date
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from trackscreen import records
from trackscreen.records import (
    IngestStats,
    MarkUnparseable,
    MissingColumns,
    RawResultRow,
    Round,
    load_results,
    load_sanctions,
    mark_to_centiseconds,
    normalize_row,
    parse_mark,
    record_to_row,
)


def raw_row(**overrides) -> RawResultRow:
    base = dict(
        athlete_id="A1", athlete_name="Test Runner", mark="10.12", date="2020-06-01",
        wind="+1.0", reaction_time="0.150", round="final", rank="1",
        competition_id="C1", event_code="100m-men", country="USA", venue="Letzigrund",
    )
    base.update(overrides)
    return RawResultRow(**base)


class TestParseMark:
    def test_plain_seconds(self):
        assert parse_mark("9.58") == 9.58

    def test_minutes_seconds(self):
        assert parse_mark("1:45.23") == 105.23

    def test_hours(self):
        assert parse_mark("2:05:41.00") == 2 * 3600 + 5 * 60 + 41.0

    def test_missing_decimals_allowed(self):
        assert parse_mark("45") == 45.0

    @pytest.mark.parametrize("bad", ["DNF", "DQ", "DNS", "", "  ", "abc", "1:75.00", "-9.58", "9.5.8"])
    def test_unparseable(self, bad):
        with pytest.raises(MarkUnparseable):
            parse_mark(bad)

    def test_centisecond_precision(self):
        assert mark_to_centiseconds("10.1") == 1010
        assert mark_to_centiseconds("10.01") == 1001

    @given(
        m=st.integers(min_value=0, max_value=59),
        s=st.integers(min_value=0, max_value=59),
        cs=st.integers(min_value=0, max_value=99),
        m2=st.integers(min_value=0, max_value=59),
        s2=st.integers(min_value=0, max_value=59),
        cs2=st.integers(min_value=0, max_value=99),
    )
    def test_monotone_on_same_format(self, m, s, cs, m2, s2, cs2):
        if (m, s, cs) == (m2, s2, cs2) or (0, 0, 0) in ((m, s, cs), (m2, s2, cs2)):
            return
        a = f"{m}:{s:02d}.{cs:02d}"
        b = f"{m2}:{s2:02d}.{cs2:02d}"
        lexical = (len(a), a) < (len(b), b)  # same format: shorter minute field sorts first
        numeric = parse_mark(a) < parse_mark(b)
        if m > 0 and m2 > 0:
            assert lexical == numeric


class TestNormalizeRow:
    def test_illegal_tailwind(self):
        rec = normalize_row(raw_row(wind="+2.1"))
        assert rec.wind_mps == 2.1
        assert rec.wind_legal is False

    def test_boundary_wind_is_legal(self):
        rec = normalize_row(raw_row(wind="+2.0"))
        assert rec.wind_mps == 2.0
        assert rec.wind_legal is True

    def test_missing_wind_is_legal(self):
        rec = normalize_row(raw_row(wind=""))
        assert rec.wind_mps is None
        assert rec.wind_legal is True

    def test_unparseable_wind_kept_absent(self):
        stats = IngestStats()
        rec = normalize_row(raw_row(wind="gale"), stats)
        assert rec.wind_mps is None
        assert stats.warnings["wind_unparseable"] == 1

    def test_unknown_country_warns(self):
        stats = IngestStats()
        normalize_row(raw_row(country="XXX"), stats)
        assert stats.warnings["unknown_country"] == 1

    def test_bad_reaction_dropped(self):
        stats = IngestStats()
        rec = normalize_row(raw_row(reaction_time="-0.1"), stats)
        assert rec.reaction_time_s is None
        assert stats.warnings["reaction_time_invalid"] == 1

    def test_date_bounds(self):
        with pytest.raises(records.DateUnparseable):
            normalize_row(raw_row(date="1989-12-31"))
        with pytest.raises(records.DateUnparseable):
            normalize_row(raw_row(date="2150-01-01"))

    @pytest.mark.parametrize("raw,expected", [
        ("heat", Round.HEAT), ("SEMIFINAL", Round.SEMIFINAL), ("f", Round.FINAL),
        ("quarterfinal", Round.UNKNOWN), ("", Round.UNKNOWN),
    ])
    def test_round_mapping(self, raw, expected):
        assert normalize_row(raw_row(round=raw)).round is expected

    def test_round_trip(self):
        rec = normalize_row(raw_row())
        again = normalize_row(record_to_row(rec))
        assert again == rec

    @given(
        cs=st.integers(min_value=900, max_value=20000),
        wind=st.one_of(st.none(), st.integers(min_value=-30, max_value=40).map(lambda w: w / 10.0)),
        day=st.integers(min_value=0, max_value=10000),
    )
    def test_round_trip_property(self, cs, wind, day):
        base = normalize_row(raw_row(
            mark=records.format_mark(cs),
            wind="" if wind is None else f"{wind:+.1f}",
            date=(date(1995, 1, 1) + __import__("datetime").timedelta(days=day)).isoformat(),
        ))
        assert normalize_row(record_to_row(base)) == base


class TestLoadResults:
    def test_bad_rows_skipped_not_fatal(self, tmp_path: Path):
        csv_path = tmp_path / "results.csv"
        csv_path.write_text(
            "athlete_id,athlete_name,mark,date,wind,reaction_time,round,rank,competition_id,event_code,country,venue\n"
            "A1,One,10.12,2020-06-01,+1.0,0.150,final,1,C1,100m-men,USA,Stadium\n"
            "A2,Two,DNF,2020-06-01,,,heat,,C1,100m-men,JAM,Stadium\n"
            "A3,Three,10.30,bad-date,,,final,2,C1,100m-men,GBR,Stadium\n"
            ",NoId,10.40,2020-06-01,,,final,3,C1,100m-men,GBR,Stadium\n"
            "A4,Four,10.55,2020-07-01,-0.4,0.161,semifinal,4,C2,100m-men,KEN,Track\n"
        )
        result = load_results(csv_path)
        stats = result.stats
        assert stats.rows_total == 5
        assert stats.rows_accepted == 2
        assert stats.rows_accepted + stats.rows_skipped == stats.rows_total
        assert stats.skipped["mark_unparseable"] == 1
        assert stats.skipped["date_unparseable"] == 1
        assert stats.skipped["missing_key_fields"] == 1
        assert {r.athlete_id for r in result.records} == {"A1", "A4"}
        assert set(result.competitions) == {"C1", "C2"}

    def test_missing_columns_fatal(self, tmp_path: Path):
        bad = tmp_path / "bad.csv"
        bad.write_text("athlete_id,mark\nA1,10.0\n")
        with pytest.raises(MissingColumns):
            load_results(bad)


class TestLoadSanctions:
    HEADER = "athlete_id,start,end,note\n"

    def test_basic_load(self, tmp_path: Path):
        f = tmp_path / "s.csv"
        rows = [f"A{i},2018-01-01,2022-01-01,case {i}" for i in range(60)]
        f.write_text(self.HEADER + "\n".join(rows) + "\n")
        sanctions, stats = load_sanctions(f)
        assert len(sanctions) == 60
        assert stats.rows_accepted == 60

    def test_empty_file_with_header(self, tmp_path: Path):
        f = tmp_path / "s.csv"
        f.write_text(self.HEADER)
        sanctions, stats = load_sanctions(f)
        assert sanctions == []
        assert stats.rows_total == 0

    def test_end_before_start_skipped(self, tmp_path: Path):
        f = tmp_path / "s.csv"
        f.write_text(self.HEADER + "A1,2020-01-01,2019-01-01,backwards\n")
        sanctions, stats = load_sanctions(f)
        assert sanctions == []
        assert stats.skipped["end_before_start"] == 1

    def test_duplicate_keeps_longer_interval(self, tmp_path: Path):
        f = tmp_path / "s.csv"
        f.write_text(
            self.HEADER
            + "A1,2020-01-01,2021-01-01,short\n"
            + "A1,2020-01-01,2024-01-01,long\n"
            + "A2,2020-01-01,2022-01-01,closed\n"
            + "A2,2020-01-01,,open-ended\n"
        )
        sanctions, _ = load_sanctions(f)
        by_id = {s.athlete_id: s for s in sanctions}
        assert by_id["A1"].sanction_end == date(2024, 1, 1)
        assert by_id["A2"].sanction_end is None

    def test_missing_columns_fatal(self, tmp_path: Path):
        f = tmp_path / "s.csv"
        f.write_text("athlete_id,start\nA1,2020-01-01\n")
        with pytest.raises(MissingColumns):
            load_sanctions(f)

"""Brute-force reference implementations of the statistical rules.

Deliberately independent of the detector code: plain Python floats and the
stdlib statistics module, no numpy, written as a direct transcription of
the rule definitions. Tests compare detector flag sets against these on
small data. Keep this module free of imports from trackscreen.detectors.
"""

from __future__ import annotations

import statistics
from typing import Iterable, Sequence

from .records import PerformanceRecord

ORACLE_RULES = ("zscore", "mad", "iqr", "excess")


def _tukey_hinges(sorted_values: Sequence[float]) -> tuple[float, float]:
    n = len(sorted_values)
    half = n // 2
    lower = sorted_values[:half]
    upper = sorted_values[n - half:]
    return statistics.median(lower), statistics.median(upper)


def oracle_zscore(values: Sequence[float], threshold: float = 3.0) -> list[bool]:
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    if sd == 0.0:
        return [False] * len(values)
    return [abs((x - mean) / sd) > threshold for x in values]


def oracle_mad(values: Sequence[float], threshold: float = 3.5, scale: float = 0.6745) -> list[bool]:
    med = statistics.median(values)
    mad = statistics.median([abs(x - med) for x in values])
    if mad == 0.0:
        return [False] * len(values)
    return [abs(scale * (x - med) / mad) > threshold for x in values]


def oracle_iqr(values: Sequence[float], multiplier: float = 1.5) -> list[bool]:
    q1, q3 = _tukey_hinges(sorted(values))
    iqr = q3 - q1
    low = q1 - multiplier * iqr
    high = q3 + multiplier * iqr
    return [x < low or x > high for x in values]


def oracle_excess(values: Sequence[float], threshold: float = -2.5) -> list[bool]:
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    if sd == 0.0:
        return [False] * len(values)
    return [(x - mean) / sd < threshold for x in values]


def oracle_excess_scores(values: Sequence[float]) -> list[float]:
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    if sd == 0.0:
        return [0.0] * len(values)
    return [(x - mean) / sd for x in values]


_RULE_FNS = {
    "zscore": oracle_zscore,
    "mad": oracle_mad,
    "iqr": oracle_iqr,
    "excess": oracle_excess,
}


def oracle_flags(
    records: Iterable[PerformanceRecord],
    rule: str,
    *,
    min_history: int = 3,
    threshold: float | None = None,
) -> set[tuple[str, int]]:
    """Flag set {(athlete_id, index in that athlete's date-ordered history)}.

    Groups records per athlete, orders them by (date, time, competition,
    round) exactly as histories are built, skips athletes with fewer than
    min_history performances, and applies the rule literally.
    """
    if rule not in _RULE_FNS:
        raise ValueError(f"unknown oracle rule {rule!r}")
    fn = _RULE_FNS[rule]

    by_athlete: dict[str, list[PerformanceRecord]] = {}
    for record in records:
        by_athlete.setdefault(record.athlete_id, []).append(record)

    flagged: set[tuple[str, int]] = set()
    for athlete_id, rows in by_athlete.items():
        rows.sort(key=lambda r: (r.date.toordinal(), r.time_cs, r.competition_id, r.round.value))
        if len(rows) < min_history:
            continue
        values = [r.time_cs / 100.0 for r in rows]
        verdicts = fn(values) if threshold is None else fn(values, threshold)
        for idx, hit in enumerate(verdicts):
            if hit:
                flagged.add((athlete_id, idx))
    return flagged

"""Athlete-level benchmarking, consensus ranking and screening views.

An athlete counts as a true positive when they hold any sanction record and
at least one of their performances was flagged; dates are ignored by
default (sanctions lag performances by years), with an optional
date-window matching mode. Precision is TP / flagged athletes, recall is
TP / sanctioned athletes, both with 0/0 -> 0.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detectors.base import AthleteHistory, DetectionResult
from .detectors.statistical import tukey_hinges
from .records import SanctionRecord

DEFAULT_PRECISION_KS = (10, 50, 100, 200)
PAGE_SIZE = 100


class StaleCursor(Exception):
    pass


def _rank_value(score: float, transform: str) -> float:
    if transform == "abs":
        return abs(score)
    if transform == "negate":
        return -score
    return score


def athlete_rank_scores(result: DetectionResult) -> dict[str, float]:
    """Per-athlete anomaly ranking value: max transformed score over scored entries."""
    out: dict[str, float] = {}
    for entry in result.entries:
        if entry.score is None:
            continue
        value = _rank_value(entry.score, result.rank_transform)
        if entry.athlete_id not in out or value > out[entry.athlete_id]:
            out[entry.athlete_id] = value
    return out


def ranked_flagged_athletes(result: DetectionResult) -> list[str]:
    """Flagged athletes, most anomalous first, athlete_id breaking ties."""
    scores = athlete_rank_scores(result)
    flagged = sorted(result.athletes_flagged)
    return sorted(flagged, key=lambda a: (-scores.get(a, -math.inf), a))


def sanctioned_athletes(
    sanctions: Iterable[SanctionRecord],
    histories: Sequence[AthleteHistory] | None = None,
    match_dates: bool = False,
) -> set[str]:
    """Athletes counted as positives.

    By default any sanction marks the athlete. With match_dates=True a
    sanction only counts if the athlete has an in-slice performance inside
    the sanction window (open-ended windows extend forever).
    """
    if not match_dates:
        return {s.athlete_id for s in sanctions}
    if histories is None:
        raise ValueError("match_dates=True requires histories")
    dates_by_athlete = {h.athlete_id: [p.date for p in h.performances] for h in histories}
    positives: set[str] = set()
    for s in sanctions:
        dates = dates_by_athlete.get(s.athlete_id)
        if not dates:
            continue
        end = s.sanction_end
        if any(d >= s.sanction_start and (end is None or d <= end) for d in dates):
            positives.add(s.athlete_id)
    return positives


@dataclass
class MethodMetrics:
    method_id: str
    true_positives: int
    false_positives: int
    flagged_athletes: int
    precision: float
    recall: float
    f1: float
    precision_at_k: dict[int, float] = field(default_factory=dict)
    wall_time_ms: float = 0.0

    @classmethod
    def from_counts(cls, method_id: str, tp: int, fp: int, sanctioned_count: int) -> "MethodMetrics":
        flagged = tp + fp
        precision = tp / flagged if flagged else 0.0
        recall = tp / sanctioned_count if sanctioned_count else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
        return cls(method_id, tp, fp, flagged, precision, recall, f1)

    def to_payload(self) -> dict:
        return {
            "method_id": self.method_id,
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "flagged_athletes": self.flagged_athletes,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "precision_at_k": {str(k): v for k, v in sorted(self.precision_at_k.items())},
            "wall_time_ms": self.wall_time_ms,
        }


@dataclass
class EvaluationReport:
    slice_description: dict
    sanctioned_count: int
    per_method: dict[str, MethodMetrics]

    def to_payload(self) -> dict:
        return {
            "slice": self.slice_description,
            "sanctioned_count": self.sanctioned_count,
            "methods": {mid: m.to_payload() for mid, m in sorted(self.per_method.items())},
        }


def precision_at_k(result: DetectionResult, sanctioned: set[str], k: int) -> float:
    """Fraction of the top-k ranked flagged athletes who are sanctioned.

    Ranking runs over flagged athletes only; when fewer than k exist the
    denominator stays k, so missing depth costs precision.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    ranked = ranked_flagged_athletes(result)
    top = ranked[:k]
    return sum(1 for a in top if a in sanctioned) / k


def evaluate_methods(
    results: Sequence[DetectionResult],
    sanctions: Iterable[SanctionRecord],
    slice_description: dict | None = None,
    *,
    histories: Sequence[AthleteHistory] | None = None,
    match_dates: bool = False,
    ks: Sequence[int] = DEFAULT_PRECISION_KS,
) -> EvaluationReport:
    positives = sanctioned_athletes(list(sanctions), histories, match_dates)
    per_method: dict[str, MethodMetrics] = {}
    for result in results:
        tp = len(result.athletes_flagged & positives)
        fp = len(result.athletes_flagged) - tp
        metrics = MethodMetrics.from_counts(result.method_id, tp, fp, len(positives))
        metrics.wall_time_ms = result.wall_time_ms
        metrics.precision_at_k = {k: precision_at_k(result, positives, k) for k in ks}
        per_method[result.method_id] = metrics
    return EvaluationReport(
        slice_description=slice_description or {},
        sanctioned_count=len(positives),
        per_method=per_method,
    )


@dataclass
class ConsensusEntry:
    athlete_id: str
    methods_flagging: tuple[str, ...]
    method_count: int
    is_sanctioned: bool
    best_normalized_rank: float
    top_scores: dict[str, float]

    def to_payload(self) -> dict:
        return {
            "athlete_id": self.athlete_id,
            "methods_flagging": list(self.methods_flagging),
            "method_count": self.method_count,
            "is_sanctioned": self.is_sanctioned,
            "best_normalized_rank": self.best_normalized_rank,
            "top_scores": self.top_scores,
        }


def consensus(
    results: Sequence[DetectionResult],
    sanctioned: set[str],
    min_methods: int = 2,
) -> list[ConsensusEntry]:
    """Athletes flagged by at least min_methods methods, strongest agreement first.

    Order is (method count desc, best normalized rank asc, athlete_id): the
    normalized rank is the athlete's position within a method's own flagged
    ranking divided by that method's flagged count, and the best (smallest)
    across flagging methods breaks count ties. A function of flag sets and
    scores only, so result order never depends on method order.
    """
    if len(results) < 2:
        raise ValueError("consensus needs at least two method results")
    if min_methods < 1:
        raise ValueError("min_methods must be positive")

    flagging: dict[str, set[str]] = {}
    norm_rank: dict[str, float] = {}
    best_scores: dict[str, dict[str, float]] = {}
    for result in sorted(results, key=lambda r: r.method_id):
        ranked = ranked_flagged_athletes(result)
        total = len(ranked)
        raw_scores = athlete_rank_scores(result)
        for position, athlete_id in enumerate(ranked):
            flagging.setdefault(athlete_id, set()).add(result.method_id)
            rank = (position + 1) / total
            if athlete_id not in norm_rank or rank < norm_rank[athlete_id]:
                norm_rank[athlete_id] = rank
            if athlete_id in raw_scores:
                best_scores.setdefault(athlete_id, {})[result.method_id] = raw_scores[athlete_id]

    entries = [
        ConsensusEntry(
            athlete_id=athlete_id,
            methods_flagging=tuple(sorted(methods)),
            method_count=len(methods),
            is_sanctioned=athlete_id in sanctioned,
            best_normalized_rank=norm_rank[athlete_id],
            top_scores=best_scores.get(athlete_id, {}),
        )
        for athlete_id, methods in flagging.items()
        if len(methods) >= min_methods
    ]
    entries.sort(key=lambda e: (-e.method_count, e.best_normalized_rank, e.athlete_id))
    return entries


@dataclass
class ScreeningPage:
    slice_description: dict
    method_id: str
    rows: list[dict]
    next_cursor: str | None
    total_flagged: int

    def to_payload(self) -> dict:
        return {
            "slice": self.slice_description,
            "method_id": self.method_id,
            "rows": self.rows,
            "next_cursor": self.next_cursor,
            "total_flagged": self.total_flagged,
        }


def _encode_cursor(page_key: str, offset: int) -> str:
    raw = json.dumps({"k": page_key, "o": offset}).encode()
    return base64.urlsafe_b64encode(raw).decode()


def _decode_cursor(cursor: str, page_key: str) -> int:
    try:
        data = json.loads(base64.urlsafe_b64decode(cursor.encode()))
        if data["k"] != page_key:
            raise StaleCursor("cursor refers to a different materialization")
        return int(data["o"])
    except StaleCursor:
        raise
    except (ValueError, KeyError, binascii.Error) as exc:
        raise StaleCursor(f"malformed cursor: {exc}") from exc


def build_screening_page(
    results_by_method: Mapping[str, DetectionResult],
    method_id: str,
    slice_description: dict,
    cursor: str | None = None,
    page_size: int = PAGE_SIZE,
    materialization_key: str = "",
) -> ScreeningPage:
    """One page of flagged athletes with agreement badges.

    Sorted by the method's anomaly ranking (stable athlete_id ties); the
    badge counts how many materialized methods flag the athlete, matching
    the consensus method_count.
    """
    result = results_by_method[method_id]
    ranked = ranked_flagged_athletes(result)
    page_key = f"{materialization_key}:{method_id}:{len(ranked)}"
    offset = _decode_cursor(cursor, page_key) if cursor else 0

    flag_counts: dict[str, int] = {}
    first_note: dict[str, str] = {}
    for entry in result.entries:
        if entry.flagged:
            flag_counts[entry.athlete_id] = flag_counts.get(entry.athlete_id, 0) + 1
            first_note.setdefault(entry.athlete_id, entry.explanation)

    scores = athlete_rank_scores(result)
    raw_best: dict[str, float] = {}
    best_transformed: dict[str, float] = {}
    for entry in result.entries:
        if entry.score is None or entry.athlete_id not in result.athletes_flagged:
            continue
        value = _rank_value(entry.score, result.rank_transform)
        if entry.athlete_id not in best_transformed or value > best_transformed[entry.athlete_id]:
            best_transformed[entry.athlete_id] = value
            raw_best[entry.athlete_id] = entry.score

    window = ranked[offset:offset + page_size]
    rows = []
    for athlete_id in window:
        agreement = sum(1 for r in results_by_method.values() if athlete_id in r.athletes_flagged)
        rows.append({
            "athlete_id": athlete_id,
            "best_score": raw_best.get(athlete_id),
            "rank_value": scores.get(athlete_id),
            "flag_count": flag_counts.get(athlete_id, 0),
            "explanation": first_note.get(athlete_id, ""),
            "agreement": agreement,
        })
    next_offset = offset + page_size
    next_cursor = _encode_cursor(page_key, next_offset) if next_offset < len(ranked) else None
    return ScreeningPage(
        slice_description=slice_description,
        method_id=method_id,
        rows=rows,
        next_cursor=next_cursor,
        total_flagged=len(ranked),
    )


def five_number_summary(values: np.ndarray) -> dict:
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    q1, q3 = tukey_hinges(ordered)
    return {
        "min": float(ordered[0]),
        "q1": q1,
        "median": float(np.median(ordered)),
        "q3": q3,
        "max": float(ordered[-1]),
    }


def histogram_summary(values: np.ndarray, bins: int = 12) -> dict:
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins)
    return {"counts": counts.tolist(), "edges": [float(e) for e in edges]}


def build_case_review(
    history: AthleteHistory,
    results_by_method: Mapping[str, DetectionResult],
) -> dict:
    """Trajectory + distribution + explanations for one athlete."""
    per_method_entries: dict[str, list] = {}
    for method_id, result in sorted(results_by_method.items()):
        per_method_entries[method_id] = [
            e for e in result.entries if e.athlete_id == history.athlete_id
        ]

    trajectory = []
    explanations = []
    for idx, perf in enumerate(history.performances):
        methods = {}
        for method_id, entries in per_method_entries.items():
            if idx < len(entries):
                entry = entries[idx]
                methods[method_id] = {"flagged": entry.flagged, "score": entry.score}
                if entry.flagged:
                    explanations.append({
                        "method_id": method_id,
                        "date": perf.date.isoformat(),
                        "time_seconds": perf.time_seconds,
                        "explanation": entry.explanation,
                    })
        trajectory.append({
            "date": perf.date.isoformat(),
            "time_seconds": perf.time_seconds,
            "wind_mps": perf.wind_mps,
            "round": perf.round.value,
            "competition_id": perf.competition_id,
            "methods": methods,
        })

    times = history.times()
    return {
        "athlete_id": history.athlete_id,
        "event_code": history.event_code,
        "trajectory": trajectory,
        "distribution": {
            "five_number": five_number_summary(times),
            "histogram": histogram_summary(times),
        },
        "explanations": explanations,
        "competition_ids": sorted({p.competition_id for p in history.performances}),
    }

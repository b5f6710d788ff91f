"""Shared detector contract: every method takes the same athlete histories
and detector configuration and returns a DetectionResult with the same
shape, so methods can be compared on identical inputs.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Sequence

import numpy as np

from ..records import PerformanceRecord, performance_sort_key

SKIP_INSUFFICIENT_HISTORY = "insufficient_history"
SKIP_MISSING_FEATURES = "missing_features"


class UnknownMethod(Exception):
    pass


@dataclass(frozen=True, slots=True)
class AthleteHistory:
    """All of one athlete's performances within an event slice, date-ascending."""

    athlete_id: str
    event_code: str
    performances: tuple[PerformanceRecord, ...]

    def __post_init__(self) -> None:
        if not self.performances:
            raise ValueError("history must contain at least one performance")
        for perf in self.performances:
            if perf.athlete_id != self.athlete_id or perf.event_code != self.event_code:
                raise ValueError("history mixes athletes or events")
        dates = [p.date for p in self.performances]
        if any(b < a for a, b in zip(dates, dates[1:])):
            raise ValueError("history dates must be non-decreasing")

    def times(self) -> np.ndarray:
        return np.array([p.time_cs for p in self.performances], dtype=np.float64) / 100.0

    def __len__(self) -> int:
        return len(self.performances)


@dataclass(frozen=True)
class DetectorConfig:
    """Tuning knobs for all eight methods; defaults match the documented setup."""

    z_threshold: float = 3.0
    mad_threshold: float = 3.5
    mad_scale: float = 0.6745
    iqr_multiplier: float = 1.5
    excess_threshold: float = -2.5
    min_history: int = 3
    iforest_trees: int = 100
    iforest_contamination: float = 0.1
    gbt_trees: int = 100
    gbt_depth: int = 3
    gbt_learning_rate: float = 0.1
    gbt_residual_quantile: float = 0.95
    mcmc_draws: int = 500
    mcmc_warmup: int = 200
    mcmc_chains: int = 4
    bayes_p_threshold: float = 0.05
    bayes_one_sided: bool = False
    copula_density_quantile: float = 0.05
    seed: int = 42

    def validate(self) -> None:
        for name in ("z_threshold", "mad_threshold", "mad_scale", "iqr_multiplier", "excess_threshold"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("iforest_contamination", "gbt_residual_quantile", "bayes_p_threshold", "copula_density_quantile"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        for name in ("min_history", "iforest_trees", "gbt_trees", "gbt_depth", "mcmc_draws", "mcmc_warmup", "mcmc_chains"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.gbt_learning_rate <= 1.0:
            raise ValueError("gbt_learning_rate must lie in (0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def with_overrides(self, overrides: dict) -> "DetectorConfig":
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown config fields: {', '.join(sorted(bad))}")
        updated = replace(self, **overrides)
        updated.validate()
        return updated

    def config_hash(self) -> str:
        payload = json.dumps({f.name: getattr(self, f.name) for f in fields(self)}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def rng_for(self, method_id: str) -> np.random.Generator:
        """Per-method generator derived from the shared seed; stable across runs."""
        digest = hashlib.sha256(f"{self.seed}:{method_id}".encode()).digest()
        return np.random.default_rng(int.from_bytes(digest[:8], "big"))


@dataclass(slots=True)
class FlagEntry:
    """Per-performance verdict from one method."""

    athlete_id: str
    performance: PerformanceRecord
    flagged: bool
    score: float | None
    explanation: str = ""

    def to_payload(self) -> dict:
        perf = self.performance
        return {
            "athlete_id": self.athlete_id,
            "competition_id": perf.competition_id,
            "event_code": perf.event_code,
            "round": perf.round.value,
            "date": perf.date.isoformat(),
            "time_seconds": perf.time_seconds,
            "flagged": self.flagged,
            "score": self.score,
            "explanation": self.explanation,
        }


@dataclass
class DetectionResult:
    """Uniform output of every detection method."""

    method_id: str
    entries: list[FlagEntry]
    athletes_flagged: frozenset[str]
    skipped_athletes: dict[str, str]
    wall_time_ms: float
    score_doc: str
    higher_is_more_anomalous: bool
    warnings: tuple[str, ...] = ()
    rank_transform: str = "identity"

    def flags(self) -> set[tuple[str, int]]:
        """Flagged performances as (athlete_id, index within that athlete's history)."""
        out: set[tuple[str, int]] = set()
        position: dict[str, int] = {}
        for entry in self.entries:
            idx = position.get(entry.athlete_id, 0)
            position[entry.athlete_id] = idx + 1
            if entry.flagged:
                out.add((entry.athlete_id, idx))
        return out

    def to_payload(self, *, include_entries: bool = True) -> dict:
        payload = {
            "method_id": self.method_id,
            "athletes_flagged": sorted(self.athletes_flagged),
            "skipped_athletes": dict(sorted(self.skipped_athletes.items())),
            "wall_time_ms": self.wall_time_ms,
            "score_doc": self.score_doc,
            "higher_is_more_anomalous": self.higher_is_more_anomalous,
            "warnings": list(self.warnings),
        }
        if include_entries:
            payload["entries"] = [e.to_payload() for e in self.entries]
        return payload

    def to_canonical_bytes(self) -> bytes:
        """Stable byte serialization; identical runs produce identical bytes.

        Wall time is execution noise, not detector output, so it is
        excluded from the canonical form.
        """
        payload = self.to_payload()
        payload["wall_time_ms"] = None
        return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()


# A detector callable consumes the eligible histories plus the full slice and
# produces flag entries for every performance it scored or declined to score.
DetectorFn = Callable[[list[AthleteHistory], DetectorConfig, np.random.Generator], tuple[list[FlagEntry], list[str]]]


@dataclass(frozen=True)
class MethodInfo:
    method_id: str
    category: str
    complexity_note: str
    score_doc: str
    higher_is_more_anomalous: bool
    per_athlete: bool
    fn: DetectorFn
    # maps the raw score to a value where higher always means more anomalous
    rank_transform: str = "identity"  # identity | abs | negate


_REGISTRY: dict[str, MethodInfo] = {}
_ORDER: list[str] = []


def register_method(info: MethodInfo) -> None:
    if info.method_id in _REGISTRY:
        raise ValueError(f"duplicate method id {info.method_id}")
    _REGISTRY[info.method_id] = info
    _ORDER.append(info.method_id)


def method_info(method_id: str) -> MethodInfo:
    try:
        return _REGISTRY[method_id]
    except KeyError:
        raise UnknownMethod(method_id) from None


def list_methods() -> list[dict]:
    return [
        {
            "method_id": m.method_id,
            "category": m.category,
            "complexity_note": m.complexity_note,
        }
        for m in (_REGISTRY[mid] for mid in _ORDER)
    ]


def method_ids() -> list[str]:
    return list(_ORDER)


def run_detector(
    method_id: str,
    histories: Sequence[AthleteHistory],
    config: DetectorConfig | None = None,
) -> DetectionResult:
    """Dispatch one method over a slice of athlete histories.

    Athletes are processed in athlete_id order regardless of input order, so
    seeded methods see a canonical ordering. Per-athlete methods skip (and
    never flag) athletes with fewer than min_history performances; their
    performances still appear in the result, unscored.
    """
    config = config or DetectorConfig()
    config.validate()
    info = method_info(method_id)

    started = time.perf_counter()
    ordered = sorted(histories, key=lambda h: h.athlete_id)
    entries: list[FlagEntry] = []
    skipped: dict[str, str] = {}
    warnings: list[str] = []

    if ordered:
        eligible = ordered
        if info.per_athlete:
            eligible = []
            for history in ordered:
                if len(history) < config.min_history:
                    skipped[history.athlete_id] = SKIP_INSUFFICIENT_HISTORY
                    for perf in history.performances:
                        entries.append(FlagEntry(history.athlete_id, perf, False, None, SKIP_INSUFFICIENT_HISTORY))
                else:
                    eligible.append(history)
        method_entries, method_warnings = info.fn(eligible, config, config.rng_for(method_id))
        entries.extend(method_entries)
        warnings.extend(method_warnings)
        entries.sort(key=lambda e: (e.athlete_id, *performance_sort_key(e.performance)))

    expected = sum(len(h) for h in ordered)
    if len(entries) != expected:
        raise RuntimeError(f"{method_id} produced {len(entries)} entries for {expected} performances")

    flagged = frozenset(e.athlete_id for e in entries if e.flagged)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return DetectionResult(
        method_id=method_id,
        entries=entries,
        athletes_flagged=flagged,
        skipped_athletes=skipped,
        wall_time_ms=max(elapsed_ms, 1e-6),
        score_doc=info.score_doc,
        higher_is_more_anomalous=info.higher_is_more_anomalous,
        warnings=tuple(warnings),
        rank_transform=info.rank_transform,
    )


def histories_from_records(records: Sequence[PerformanceRecord]) -> list[AthleteHistory]:
    """Group records into per-athlete histories in canonical order."""
    by_athlete: dict[str, list[PerformanceRecord]] = {}
    for record in records:
        by_athlete.setdefault(record.athlete_id, []).append(record)
    histories = []
    for athlete_id in sorted(by_athlete):
        rows = sorted(by_athlete[athlete_id], key=performance_sort_key)
        histories.append(AthleteHistory(athlete_id, rows[0].event_code, tuple(rows)))
    return histories


def run_methods(
    method_ids_: Sequence[str],
    histories: Sequence[AthleteHistory],
    config: DetectorConfig | None = None,
) -> dict[str, DetectionResult]:
    return {mid: run_detector(mid, histories, config) for mid in method_ids_}

"""Per-athlete statistical outlier rules.

All four methods compare each performance against the athlete's own career
distribution:

  z-score        z = (x - mean) / sd,                  flag |z| > 3.0
  robust z (MAD) z* = 0.6745 (x - median) / MAD,       flag |z*| > 3.5
  IQR            flag outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR]
  excess         EP = (x - mean) / sd,                 flag EP < -2.5

Conventions pinned here and relied on by the tests: sample (n-1) standard
deviation; Tukey hinges for Q1/Q3 (median of the lower/upper half, the
middle value excluded when n is odd); degenerate spread (sd or MAD or IQR
of zero) never flags. The excess rule is one-sided: lower seconds are
faster, so only unusually fast times flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import DetectorConfig, FlagEntry, MethodInfo


@dataclass(frozen=True, slots=True)
class AthleteBaseline:
    """Career summary statistics for one athlete within a slice."""

    mean: float
    std: float
    median: float
    mad: float
    q1: float
    q3: float
    n: int

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def tukey_hinges(sorted_values: np.ndarray) -> tuple[float, float]:
    """Q1/Q3 as medians of the lower and upper halves (median excluded at odd n)."""
    n = sorted_values.size
    half = n // 2
    lower = sorted_values[:half]
    upper = sorted_values[n - half:]
    return float(np.median(lower)), float(np.median(upper))


def compute_baseline(values: np.ndarray) -> AthleteBaseline:
    ordered = np.sort(values)
    n = int(ordered.size)
    mean = float(np.mean(ordered))
    std = float(np.std(ordered, ddof=1)) if n > 1 else 0.0
    median = float(np.median(ordered))
    mad = float(np.median(np.abs(ordered - median)))
    q1, q3 = tukey_hinges(ordered)
    return AthleteBaseline(mean=mean, std=std, median=median, mad=mad, q1=q1, q3=q3, n=n)


def zscore_scores(values: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray, AthleteBaseline]:
    """z-scores against the athlete's career mean/sd; sd of zero means z = 0 everywhere."""
    baseline = compute_baseline(values)
    if baseline.std == 0.0:
        z = np.zeros_like(values)
    else:
        z = (values - baseline.mean) / baseline.std
    return z, np.abs(z) > threshold, baseline


def mad_scores(values: np.ndarray, threshold: float, scale: float) -> tuple[np.ndarray, np.ndarray, AthleteBaseline]:
    """Robust z-scores; a MAD of zero is degenerate and flags nothing."""
    baseline = compute_baseline(values)
    if baseline.mad == 0.0:
        z = np.zeros_like(values)
        flags = np.zeros(values.size, dtype=bool)
    else:
        z = scale * (values - baseline.median) / baseline.mad
        flags = np.abs(z) > threshold
    return z, flags, baseline


def iqr_exceedance(values: np.ndarray, multiplier: float) -> tuple[np.ndarray, np.ndarray, AthleteBaseline]:
    """Distance beyond the Tukey fences (0 inside); flag any exceedance."""
    baseline = compute_baseline(values)
    low = baseline.q1 - multiplier * baseline.iqr
    high = baseline.q3 + multiplier * baseline.iqr
    exceed = np.maximum(low - values, values - high)
    exceed = np.maximum(exceed, 0.0)
    return exceed, exceed > 0.0, baseline


def excess_scores(values: np.ndarray, threshold: float) -> tuple[np.ndarray, np.ndarray, AthleteBaseline]:
    """Career-standardized deviation; only strongly negative (fast) values flag."""
    baseline = compute_baseline(values)
    if baseline.std == 0.0:
        ep = np.zeros_like(values)
        flags = np.zeros(values.size, dtype=bool)
    else:
        ep = (values - baseline.mean) / baseline.std
        flags = ep < threshold
    return ep, flags, baseline


def _per_athlete_entries(histories, score_fn, explain_fn) -> list[FlagEntry]:
    entries: list[FlagEntry] = []
    for history in histories:
        values = history.times()
        scores, flags, baseline = score_fn(values)
        for perf, score, flagged in zip(history.performances, scores, flags):
            note = explain_fn(float(score), baseline) if flagged else ""
            entries.append(FlagEntry(history.athlete_id, perf, bool(flagged), float(score), note))
    return entries


def _zscore_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    def explain(score: float, b: AthleteBaseline) -> str:
        return f"z={score:+.2f} vs career {b.mean:.2f}s ±{b.std:.3f}s (n={b.n})"

    return _per_athlete_entries(
        histories, lambda v: zscore_scores(v, config.z_threshold), explain
    ), []


def _mad_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    def explain(score: float, b: AthleteBaseline) -> str:
        return f"robust z={score:+.2f} vs median {b.median:.2f}s, MAD {b.mad:.3f}s (n={b.n})"

    entries: list[FlagEntry] = []
    for history in histories:
        values = history.times()
        scores, flags, baseline = mad_scores(values, config.mad_threshold, config.mad_scale)
        degenerate = baseline.mad == 0.0
        for perf, score, flagged in zip(history.performances, scores, flags):
            note = explain(float(score), baseline) if flagged else ("degenerate_mad" if degenerate else "")
            entries.append(FlagEntry(history.athlete_id, perf, bool(flagged), float(score), note))
    return entries, []


def _iqr_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    def explain(score: float, b: AthleteBaseline) -> str:
        return f"{score:.3f}s beyond fence [Q1 {b.q1:.2f}s, Q3 {b.q3:.2f}s, IQR {b.iqr:.3f}s]"

    return _per_athlete_entries(
        histories, lambda v: iqr_exceedance(v, config.iqr_multiplier), explain
    ), []


def _excess_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    def explain(score: float, b: AthleteBaseline) -> str:
        return f"EP={score:+.2f}: unusually fast vs career {b.mean:.2f}s ±{b.std:.3f}s (n={b.n})"

    return _per_athlete_entries(
        histories, lambda v: excess_scores(v, config.excess_threshold), explain
    ), []


ZSCORE = MethodInfo(
    method_id="zscore",
    category="ST",
    complexity_note="O(n) per athlete; career mean/sd threshold",
    score_doc="signed z-score against the athlete's career mean; ranked by |z|",
    higher_is_more_anomalous=True,
    per_athlete=True,
    fn=_zscore_detect,
    rank_transform="abs",
)

MAD = MethodInfo(
    method_id="mad",
    category="ST",
    complexity_note="O(n log n) per athlete; median/MAD threshold",
    score_doc="robust z-score against the athlete's career median; ranked by |z*|",
    higher_is_more_anomalous=True,
    per_athlete=True,
    fn=_mad_detect,
    rank_transform="abs",
)

IQR = MethodInfo(
    method_id="iqr",
    category="ST",
    complexity_note="O(n log n) per athlete; Tukey fences",
    score_doc="seconds beyond the nearer Tukey fence (0 inside the fences)",
    higher_is_more_anomalous=True,
    per_athlete=True,
    fn=_iqr_detect,
    rank_transform="identity",
)

EXCESS = MethodInfo(
    method_id="excess_performance",
    category="TM",
    complexity_note="O(n) per athlete; career trajectory deviation, fast side only",
    score_doc="career-standardized deviation EP; more negative is more anomalous",
    higher_is_more_anomalous=False,
    per_athlete=True,
    fn=_excess_detect,
    rank_transform="negate",
)

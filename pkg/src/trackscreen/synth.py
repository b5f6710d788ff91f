"""Synthetic dataset generator with controllable ground truth.

Builds event slices that look like real sprint data: per-athlete base
ability around 11 s, a small linear career drift, tailwind making times
faster, heats slightly slower than finals, and sparse careers (geometric
counts, median 6-8 performances). A chosen subset of athletes gets a
step-change improvement after an onset date ("injected" athletes); only a
fraction of those receive sanction records, modeling incomplete labels.

Every run is fully determined by the seed, down to the emitted CSV bytes.
The manifest carries the true labels so tests can score detectors against
what was actually injected rather than against the sanction subset.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .records import (
    CompetitionRecord,
    PerformanceRecord,
    Round,
    SanctionRecord,
    format_mark,
    wind_is_legal,
)

_VENUES = (
    "Letzigrund", "Hayward Field", "Stade Louis II", "Olympiastadion",
    "Bislett", "Alexander Stadium", "Stade Charlety", "Kip Keino Stadium",
    "National Stadium", "Estadio de Vallehermoso",
)
_COUNTRIES = ("USA", "JAM", "GBR", "KEN", "RSA", "JPN", "GER", "FRA", "ITA", "BRA", "NGR", "CHN")
_ROUNDS = (Round.HEAT, Round.SEMIFINAL, Round.FINAL)
_ROUND_PROBS = (0.5, 0.25, 0.25)


@dataclass(frozen=True)
class CountSpec:
    """Distribution of performances per athlete (always at least 1)."""

    kind: str = "geometric"  # geometric | fixed | uniform
    value: float = 0.105     # geometric p (median 7), fixed n, or uniform low
    high: float = 0.0        # uniform high, inclusive

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "geometric":
            return rng.geometric(self.value, size=n)
        if self.kind == "fixed":
            return np.full(n, int(self.value), dtype=np.int64)
        if self.kind == "uniform":
            return rng.integers(int(self.value), int(self.high) + 1, size=n)
        raise ValueError(f"unknown count spec kind {self.kind!r}")


@dataclass(frozen=True)
class GeneratorSpec:
    n_athletes: int = 1000
    seed: int = 42
    event_code: str = "100m-men"
    gender: str = "men"
    performances_per_athlete: CountSpec = field(default_factory=CountSpec)
    total_performances: int | None = None
    base_time_mean: float = 11.0
    base_time_sd: float = 0.4
    career_slope_sd: float = 0.05      # s/year, mean 0
    career_curvature_sd: float = 0.0   # s/year^2; bends affected careers off a line
    career_curvature_rate: float = 0.0  # fraction of athletes with curved careers
    within_athlete_sd: float = 0.12
    wind_sd: float = 1.0
    wind_low: float = -3.0
    wind_high: float = 4.0
    wind_missing_rate: float = 0.02
    wind_effect_per_mps: float = 0.05  # tailwind makes times faster
    heat_penalty_s: float = 0.05
    reaction_mean: float = 0.16
    reaction_sd: float = 0.02          # within-athlete spread
    reaction_athlete_sd: float = 0.0   # athlete-to-athlete spread of mean reaction
    reaction_missing_rate: float = 0.05
    fast_fluke_rate: float = 0.0       # legitimate one-off fast marks (gusts, timing)
    fast_fluke_seconds: float = 0.55
    fraction_doped: float = 0.0
    n_doped: int | None = None
    effect_seconds: float = 0.4        # applied as a time reduction
    reaction_effect_seconds: float = 0.0  # post-onset reaction-time reduction
    onset_fraction: float = 0.5        # career fraction where the effect starts
    sanction_fraction: float = 0.4
    n_sanctioned: int | None = None
    ban_years: float = 4.0
    start_year: int = 2010
    end_year: int = 2025

    def validate(self) -> None:
        if self.n_athletes < 1:
            raise ValueError("n_athletes must be positive")
        for name in ("wind_missing_rate", "reaction_missing_rate", "fast_fluke_rate",
                     "fraction_doped", "onset_fraction", "sanction_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.effect_seconds < 0:
            raise ValueError("effect_seconds must be non-negative")
        if self.total_performances is not None and self.total_performances < self.n_athletes:
            raise ValueError("total_performances must allow at least one performance per athlete")

    def doped_count(self) -> int:
        if self.n_doped is not None:
            return min(self.n_doped, self.n_athletes)
        return int(round(self.fraction_doped * self.n_athletes))

    def sanctioned_count(self, doped: int) -> int:
        if self.n_sanctioned is not None:
            return min(self.n_sanctioned, doped)
        return int(round(self.sanction_fraction * doped))


@dataclass
class SyntheticDataset:
    records: list[PerformanceRecord]
    competitions: dict[str, CompetitionRecord]
    sanctions: list[SanctionRecord]
    manifest: dict
    athlete_names: dict[str, str]
    athlete_countries: dict[str, str]


def _adjust_counts(counts: np.ndarray, target: int) -> np.ndarray:
    counts = counts.copy()
    n = counts.size
    diff = target - int(counts.sum())
    if diff > 0:
        add_all, remainder = divmod(diff, n)
        counts += add_all
        counts[:remainder] += 1
    while diff < 0:
        reducible = np.nonzero(counts > 1)[0]
        if reducible.size == 0:
            raise ValueError("cannot reach total_performances with one row per athlete")
        take = min(-diff, reducible.size)
        counts[reducible[:take]] -= 1
        diff += take
    return counts


def _truncated_normal(rng: np.random.Generator, sd: float, low: float, high: float, size: int) -> np.ndarray:
    out = rng.normal(0.0, sd, size=size)
    bad = (out < low) | (out > high)
    while bad.any():
        out[bad] = rng.normal(0.0, sd, size=int(bad.sum()))
        bad = (out < low) | (out > high)
    return out


def generate(spec: GeneratorSpec) -> SyntheticDataset:
    """Build one synthetic event slice; deterministic given spec.seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_ath = spec.n_athletes

    counts = spec.performances_per_athlete.sample(rng, n_ath).astype(np.int64)
    counts = np.maximum(counts, 1)
    if spec.total_performances is not None:
        counts = _adjust_counts(counts, spec.total_performances)
    total = int(counts.sum())
    offsets = np.concatenate(([0], np.cumsum(counts)))
    group = np.repeat(np.arange(n_ath), counts)
    seq = np.arange(total) - offsets[group]  # position within each athlete's career

    window_start = date(spec.start_year, 1, 1).toordinal()
    window_end = date(spec.end_year, 12, 31).toordinal()
    span_days = rng.integers(365, 365 * 8 + 1, size=n_ath)
    span_days = np.minimum(span_days, window_end - window_start - counts - 1)
    career_start = window_start + rng.integers(0, np.maximum(window_end - window_start - span_days - counts, 1))

    raw_day = np.floor(rng.random(total) * span_days[group]).astype(np.int64)
    order = np.lexsort((raw_day, group))
    raw_day = raw_day[order]
    day_in_career = raw_day + seq  # sorted within athlete, strictly increasing
    ordinals = career_start[group] + day_in_career

    base = rng.normal(spec.base_time_mean, spec.base_time_sd, size=n_ath)
    slope = rng.normal(0.0, spec.career_slope_sd, size=n_ath)
    curvature = np.zeros(n_ath)
    if spec.career_curvature_sd > 0 and spec.career_curvature_rate > 0:
        curved = rng.random(n_ath) < spec.career_curvature_rate
        curvature[curved] = rng.normal(0.0, spec.career_curvature_sd, size=int(curved.sum()))
    wind = _truncated_normal(rng, spec.wind_sd, spec.wind_low, spec.wind_high, total)
    wind_missing = rng.random(total) < spec.wind_missing_rate
    reaction_base = rng.normal(spec.reaction_mean, spec.reaction_athlete_sd, size=n_ath) \
        if spec.reaction_athlete_sd > 0 else np.full(n_ath, spec.reaction_mean)
    reaction = rng.normal(reaction_base[group], spec.reaction_sd)
    reaction = np.maximum(reaction, 0.100)
    reaction_missing = rng.random(total) < spec.reaction_missing_rate
    round_idx = rng.choice(len(_ROUNDS), size=total, p=_ROUND_PROBS)
    ranks = rng.integers(1, 9, size=total)
    noise = rng.normal(0.0, spec.within_athlete_sd, size=total)
    fluke = rng.random(total) < spec.fast_fluke_rate

    doped_n = spec.doped_count()
    doped_athletes = np.sort(rng.permutation(n_ath)[:doped_n])
    doped_mask_ath = np.zeros(n_ath, dtype=bool)
    doped_mask_ath[doped_athletes] = True
    onset_idx = np.clip(np.floor(spec.onset_fraction * counts).astype(np.int64), 0, counts - 1)
    doped_perf = doped_mask_ath[group] & (seq >= onset_idx[group])

    reaction = reaction - np.where(doped_perf, spec.reaction_effect_seconds, 0.0)
    reaction = np.maximum(reaction, 0.100)

    t_years = day_in_career / 365.25
    times = (
        base[group]
        + slope[group] * t_years
        + curvature[group] * t_years**2
        + noise
        - spec.wind_effect_per_mps * wind
        + np.where(round_idx == 0, spec.heat_penalty_s, 0.0)
        - np.where(fluke, spec.fast_fluke_seconds, 0.0)
        - np.where(doped_perf, spec.effect_seconds, 0.0)
    )
    time_cs = np.maximum(np.rint(times * 100.0).astype(np.int64), 1)

    athlete_ids = [f"ATH{i:06d}" for i in range(n_ath)]
    names = {aid: f"Synthetic Athlete {i}" for i, aid in enumerate(athlete_ids)}
    countries = {aid: _COUNTRIES[i % len(_COUNTRIES)] for i, aid in enumerate(athlete_ids)}

    records: list[PerformanceRecord] = []
    competitions: dict[str, CompetitionRecord] = {}
    for k in range(total):
        a = int(group[k])
        day = int(ordinals[k])
        comp_id = f"C{day}"
        when = date.fromordinal(day)
        if comp_id not in competitions:
            venue = _VENUES[day % len(_VENUES)]
            competitions[comp_id] = CompetitionRecord(
                competition_id=comp_id,
                name=f"{venue} Meeting {when.year}",
                date=when,
                country=_COUNTRIES[day % len(_COUNTRIES)],
                venue=venue,
                event_codes={spec.event_code},
            )
        w = None if wind_missing[k] else float(f"{wind[k]:.1f}")
        r = None if reaction_missing[k] else float(f"{reaction[k]:.3f}")
        records.append(PerformanceRecord(
            athlete_id=athlete_ids[a],
            competition_id=comp_id,
            event_code=spec.event_code,
            time_cs=int(time_cs[k]),
            date=when,
            wind_mps=w,
            reaction_time_s=r,
            round=_ROUNDS[int(round_idx[k])],
            rank=int(ranks[k]),
            wind_legal=wind_is_legal(w),
        ))

    # True labels: onset date is the first affected performance's date.
    injected: dict[str, dict] = {}
    for a in doped_athletes:
        lo, hi = offsets[a], offsets[a + 1]
        idxs = [int(i - lo) for i in range(lo, hi) if doped_perf[i]]
        onset_date = records[int(lo + idxs[0])].date if idxs else None
        injected[athlete_ids[a]] = {
            "onset_date": onset_date.isoformat() if onset_date else None,
            "effect_seconds": spec.effect_seconds,
            "doped_indices": idxs,
        }

    sanction_n = spec.sanctioned_count(doped_n)
    sanction_pick = rng.permutation(doped_n)[:sanction_n]
    sanctioned_ids = sorted(athlete_ids[int(doped_athletes[j])] for j in sanction_pick)
    cap = date(spec.end_year, 12, 31)
    sanctions: list[SanctionRecord] = []
    for aid in sanctioned_ids:
        onset = injected[aid]["onset_date"]
        start = date.fromisoformat(onset) if onset else date(spec.start_year, 1, 1)
        end = min(start + timedelta(days=int(spec.ban_years * 365.25)), cap)
        sanctions.append(SanctionRecord(aid, start, end, "synthetic ineligibility"))

    manifest = {
        "spec": _spec_to_jsonable(spec),
        "n_athletes": n_ath,
        "total_performances": total,
        "injected_athletes": injected,
        "sanctioned_athletes": sanctioned_ids,
        "event_code": spec.event_code,
    }
    return SyntheticDataset(
        records=records,
        competitions=competitions,
        sanctions=sanctions,
        manifest=manifest,
        athlete_names=names,
        athlete_countries=countries,
    )


def _spec_to_jsonable(spec: GeneratorSpec) -> dict:
    data = asdict(spec)
    data["performances_per_athlete"] = asdict(spec.performances_per_athlete)
    return data


def write_dataset(dataset: SyntheticDataset, out_dir: str | Path) -> dict[str, Path]:
    """Emit results.csv / sanctions.csv / competitions.csv / manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.csv",
        "sanctions": out / "sanctions.csv",
        "competitions": out / "competitions.csv",
        "manifest": out / "manifest.json",
    }

    with open(paths["results"], "w", encoding="utf-8", newline="") as handle:
        handle.write("athlete_id,athlete_name,mark,date,wind,reaction_time,round,rank,competition_id,event_code,country,venue\n")
        rows = []
        for rec in dataset.records:
            comp = dataset.competitions[rec.competition_id]
            wind = "" if rec.wind_mps is None else f"{rec.wind_mps:+.1f}"
            reaction = "" if rec.reaction_time_s is None else f"{rec.reaction_time_s:.3f}"
            rank = "" if rec.rank is None else str(rec.rank)
            rows.append(
                f"{rec.athlete_id},{dataset.athlete_names[rec.athlete_id]},{format_mark(rec.time_cs)},"
                f"{rec.date.isoformat()},{wind},{reaction},{rec.round.value},{rank},"
                f"{rec.competition_id},{rec.event_code},{dataset.athlete_countries[rec.athlete_id]},{comp.venue}"
            )
        handle.write("\n".join(rows) + ("\n" if rows else ""))

    with open(paths["sanctions"], "w", encoding="utf-8", newline="") as handle:
        handle.write("athlete_id,start,end,note\n")
        for s in dataset.sanctions:
            end = "" if s.sanction_end is None else s.sanction_end.isoformat()
            handle.write(f"{s.athlete_id},{s.sanction_start.isoformat()},{end},{s.source_note}\n")

    with open(paths["competitions"], "w", encoding="utf-8", newline="") as handle:
        handle.write("competition_id,name,date,country,venue,event_codes\n")
        for comp in sorted(dataset.competitions.values(), key=lambda c: c.competition_id):
            handle.write(
                f"{comp.competition_id},{comp.name},{comp.date.isoformat()},{comp.country},"
                f"{comp.venue},{';'.join(sorted(comp.event_codes))}\n"
            )

    with open(paths["manifest"], "w", encoding="utf-8") as handle:
        json.dump(dataset.manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return paths

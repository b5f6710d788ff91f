from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from trackscreen.detectors.base import AthleteHistory, DetectorConfig
from trackscreen.records import PerformanceRecord, Round


def make_history(athlete_id: str, times: list[float], *, event: str = "100m-men",
                 winds: list[float | None] | None = None,
                 reactions: list[float | None] | None = None,
                 start: date = date(2018, 5, 1), spacing_days: int = 30) -> AthleteHistory:
    perfs = []
    for i, t in enumerate(times):
        wind = winds[i] if winds else None
        reaction = reactions[i] if reactions else None
        perfs.append(PerformanceRecord(
            athlete_id=athlete_id,
            competition_id=f"C{i:04d}",
            event_code=event,
            time_cs=int(round(t * 100)),
            date=start + timedelta(days=i * spacing_days),
            wind_mps=wind,
            reaction_time_s=reaction,
            round=Round.FINAL,
            rank=None,
            wind_legal=wind is None or wind <= 2.0,
        ))
    return AthleteHistory(athlete_id, event, tuple(perfs))


def gaussian_histories(n_athletes: int, n_per: int, seed: int, *,
                       mean: float = 11.0, athlete_sd: float = 0.4,
                       within_sd: float = 0.12, complete_features: bool = False) -> list[AthleteHistory]:
    rng = np.random.default_rng(seed)
    histories = []
    for i in range(n_athletes):
        base = rng.normal(mean, athlete_sd)
        times = rng.normal(base, within_sd, size=n_per)
        winds = rng.uniform(-2.0, 2.0, size=n_per).round(1).tolist() if complete_features else None
        reactions = rng.normal(0.16, 0.02, size=n_per).round(3).tolist() if complete_features else None
        histories.append(make_history(f"A{i:05d}", [max(t, 0.5) for t in times],
                                      winds=winds, reactions=reactions))
    return histories


@pytest.fixture
def config() -> DetectorConfig:
    return DetectorConfig(seed=1234)


@pytest.fixture
def small_histories() -> list[AthleteHistory]:
    return gaussian_histories(30, 8, seed=77)


@pytest.fixture
def feature_histories() -> list[AthleteHistory]:
    return gaussian_histories(40, 10, seed=78, complete_features=True)

"""Joint-dependence anomaly detection over (time, wind, reaction time).

A Gaussian copula separates what each feature does on its own (the
marginals) from how the features move together (the dependence). Marginals
are rank-based empirical CDFs with plotting position rank/(n+1); the
normal scores z_i = Phi^-1(u_i) get a sample correlation matrix R, and the
copula log-density at a point is

    log c(u) = -0.5 log|R| - 0.5 z' (R^-1 - I) z

which is identically zero when R = I. Rows in the bottom tail of the
training log-density are flagged: their feature COMBINATION is unusual
even when each coordinate looks ordinary. Only rows with all three
features present participate; imputing an execution feature would
manufacture dependence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .base import AthleteHistory, DetectorConfig, FlagEntry, MethodInfo

MIN_COMPLETE_ROWS = 50
COPULA_FEATURES = ("time_seconds", "wind_mps", "reaction_time_s")

_PD_FLOOR = 1e-8


@dataclass
class CopulaModel:
    sorted_marginals: list[np.ndarray]  # one sorted training column per feature
    correlation: np.ndarray             # 3x3, unit diagonal, positive definite
    degenerate_features: tuple[int, ...]
    density_cutoff: float | None = None

    def marginal_u(self, X: np.ndarray) -> np.ndarray:
        """Empirical CDF values with plotting position rank/(n+1), ties take the max rank."""
        u = np.empty_like(X)
        for j, col in enumerate(self.sorted_marginals):
            n = col.size
            ranks = np.searchsorted(col, X[:, j], side="right")
            ranks = np.clip(ranks, 1, n)
            u[:, j] = ranks / (n + 1.0)
        return u

    def log_density(self, X: np.ndarray) -> np.ndarray:
        u = self.marginal_u(X)
        z = norm.ppf(u)
        z[:, list(self.degenerate_features)] = 0.0
        R = self.correlation
        if np.array_equal(R, np.eye(R.shape[0])):
            return np.zeros(X.shape[0])
        sign, logdet = np.linalg.slogdet(R)
        inv_quad = np.einsum("ij,ij->i", z, np.linalg.solve(R, z.T).T)
        plain_quad = np.einsum("ij,ij->i", z, z)
        return -0.5 * logdet - 0.5 * (inv_quad - plain_quad)


class DegenerateFeature(Exception):
    pass


def _regularize_to_pd(R: np.ndarray) -> np.ndarray:
    """Shrink toward identity by the minimal amount restoring positive-definiteness."""
    eigvals = np.linalg.eigvalsh(R)
    smallest = float(eigvals.min())
    if smallest >= _PD_FLOOR:
        return R
    lam = (_PD_FLOOR - smallest) / (1.0 - smallest)
    out = (1.0 - lam) * R + lam * np.eye(R.shape[0])
    np.fill_diagonal(out, 1.0)
    return out


def copula_fit(X: np.ndarray) -> CopulaModel:
    """Fit marginals and normal-score correlation on complete rows.

    Constant columns carry no dependence information: they are recorded as
    degenerate and their correlation row/column drops to the identity.
    """
    if X.shape[0] < MIN_COMPLETE_ROWS:
        raise ValueError(f"need at least {MIN_COMPLETE_ROWS} complete rows, got {X.shape[0]}")
    d = X.shape[1]
    sorted_cols = [np.sort(X[:, j]) for j in range(d)]
    degenerate = tuple(j for j in range(d) if sorted_cols[j][0] == sorted_cols[j][-1])

    model = CopulaModel(sorted_marginals=sorted_cols, correlation=np.eye(d), degenerate_features=degenerate)
    u = model.marginal_u(X)
    z = norm.ppf(u)
    live = [j for j in range(d) if j not in degenerate]
    R = np.eye(d)
    if len(live) >= 2:
        sub = np.corrcoef(z[:, live], rowvar=False)
        for a, ja in enumerate(live):
            for b, jb in enumerate(live):
                R[ja, jb] = sub[a, b]
        R = _regularize_to_pd(R)
    model.correlation = R
    return model


def fit_and_cut(X: np.ndarray, quantile: float) -> tuple[CopulaModel, np.ndarray, np.ndarray]:
    """Fit, score the training rows, and flag strictly below the quantile cutoff.

    The cutoff is the `higher`-interpolated empirical quantile, so with
    continuous scores the flagged count is the quantile fraction of rows to
    within one; when every score ties (independence) nothing flags.
    """
    model = copula_fit(X)
    scores = model.log_density(X)
    cutoff = float(np.quantile(scores, quantile, method="higher"))
    model.density_cutoff = cutoff
    return model, scores, scores < cutoff


def _complete_mask(history: AthleteHistory) -> list[bool]:
    return [p.wind_mps is not None and p.reaction_time_s is not None for p in history.performances]


def _copula_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    rows = []
    where: list[tuple[int, int]] = []
    for h_idx, history in enumerate(histories):
        for p_idx, (perf, complete) in enumerate(zip(history.performances, _complete_mask(history))):
            if complete:
                rows.append([perf.time_seconds, perf.wind_mps, perf.reaction_time_s])
                where.append((h_idx, p_idx))

    entries: list[FlagEntry] = []
    warnings: list[str] = []
    scored: dict[tuple[int, int], tuple[float, bool]] = {}

    if len(rows) < MIN_COMPLETE_ROWS:
        warnings.append(f"skipped: {len(rows)} complete rows < {MIN_COMPLETE_ROWS}")
    else:
        X = np.asarray(rows, dtype=np.float64)
        model, scores, flags = fit_and_cut(X, config.copula_density_quantile)
        if model.degenerate_features:
            names = ", ".join(COPULA_FEATURES[j] for j in model.degenerate_features)
            warnings.append(f"degenerate features dropped from dependence: {names}")
        for key, score, flagged in zip(where, scores, flags):
            scored[key] = (float(score), bool(flagged))

    for h_idx, history in enumerate(histories):
        for p_idx, perf in enumerate(history.performances):
            hit = scored.get((h_idx, p_idx))
            if hit is None:
                note = "missing_features" if (perf.wind_mps is None or perf.reaction_time_s is None) else "not_scored"
                entries.append(FlagEntry(history.athlete_id, perf, False, None, note))
            else:
                score, flagged = hit
                note = f"joint (time, wind, reaction) combination in bottom tail; log-density {score:.3f}" if flagged else ""
                entries.append(FlagEntry(history.athlete_id, perf, flagged, score, note))
    return entries, warnings


COPULA = MethodInfo(
    method_id="copula",
    category="MV",
    complexity_note="O(n^2) worst case; rank marginals + normal-score correlation",
    score_doc="copula log-density; lower is more jointly unusual",
    higher_is_more_anomalous=False,
    per_athlete=False,
    fn=_copula_detect,
    rank_transform="negate",
)

"""Hierarchical linear trajectory model with MCMC inference.

Each athlete's times follow a personal line over career time (years since
their first performance in the slice):

    y_ij ~ Normal(alpha_i + beta_i * t_ij, sigma^2)
    alpha_i ~ Normal(mu_alpha, tau_alpha^2)
    beta_i  ~ Normal(mu_beta,  tau_beta^2)

with weakly informative priors centered on typical sprint times:
mu_alpha ~ Normal(11, 1), mu_beta ~ Normal(0, 0.1), and HalfNormal(1) on
the three scale parameters (scale arguments are standard deviations).

Inference is Gibbs sampling: the linear parameters have exact conjugate
normal updates, and the scales are updated by univariate slice sampling,
which is tuning-free and exact. Any exact sampler is acceptable here; the
calibration tests check the posterior, not the algorithm. Chains use
independent seeded generators, so the fit is reproducible and chains may
run in any order.

A performance is flagged when its posterior predictive tail probability is
extreme. We compute p = P(replicate <= observed) averaged over posterior
draws, which is the exact expectation of the draw-replicates-and-count
estimator, then flag two-sided 2*min(p, 1-p) < 0.05 by default (a
fast-side-only variant is available via config).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .base import AthleteHistory, DetectorConfig, FlagEntry, MethodInfo

DAYS_PER_YEAR = 365.25

SCALAR_PARAMS = ("mu_alpha", "mu_beta", "tau_alpha", "tau_beta", "sigma")


@dataclass(frozen=True)
class HierPriors:
    """Prior hyperparameters; scales are standard deviations."""

    mu_alpha_loc: float = 11.0
    mu_alpha_scale: float = 1.0
    mu_beta_loc: float = 0.0
    mu_beta_scale: float = 0.1
    tau_alpha_scale: float = 1.0
    tau_beta_scale: float = 1.0
    sigma_scale: float = 1.0

    def validate(self) -> None:
        for name in ("mu_alpha_scale", "mu_beta_scale", "tau_alpha_scale", "tau_beta_scale", "sigma_scale"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class HierData:
    """Design arrays for the sampler, one row per performance."""

    athlete_ids: list[str]
    group: np.ndarray   # athlete index per observation
    t: np.ndarray       # years since the athlete's first in-slice performance
    y: np.ndarray       # seconds
    n_per: np.ndarray
    sum_t: np.ndarray
    sum_tt: np.ndarray
    sum_y: np.ndarray
    sum_ty: np.ndarray

    @property
    def n_athletes(self) -> int:
        return len(self.athlete_ids)

    @property
    def n_obs(self) -> int:
        return self.y.size


def build_design(histories: list[AthleteHistory]) -> HierData:
    athlete_ids = [h.athlete_id for h in histories]
    group_list, t_list, y_list = [], [], []
    for idx, history in enumerate(histories):
        origin = history.performances[0].date.toordinal()
        for perf in history.performances:
            group_list.append(idx)
            t_list.append((perf.date.toordinal() - origin) / DAYS_PER_YEAR)
            y_list.append(perf.time_seconds)
    group = np.asarray(group_list, dtype=np.int64)
    t = np.asarray(t_list, dtype=np.float64)
    y = np.asarray(y_list, dtype=np.float64)
    n_ath = len(athlete_ids)
    return HierData(
        athlete_ids=athlete_ids,
        group=group,
        t=t,
        y=y,
        n_per=np.bincount(group, minlength=n_ath).astype(np.float64),
        sum_t=np.bincount(group, weights=t, minlength=n_ath),
        sum_tt=np.bincount(group, weights=t * t, minlength=n_ath),
        sum_y=np.bincount(group, weights=y, minlength=n_ath),
        sum_ty=np.bincount(group, weights=t * y, minlength=n_ath),
    )


def slice_sample_positive(x0: float, log_density, rng: np.random.Generator, width: float = 0.5, max_steps: int = 50) -> float:
    """One slice-sampling update for a positive scalar (stepping out + shrinkage)."""
    log_y = log_density(x0) - rng.exponential()
    offset = rng.uniform(0.0, width)
    lower = x0 - offset
    upper = lower + width
    j = int(math.floor(rng.uniform() * max_steps))
    k = max_steps - 1 - j
    while j > 0 and lower > 0.0 and log_density(lower) > log_y:
        lower -= width
        j -= 1
    while k > 0 and log_density(upper) > log_y:
        upper += width
        k -= 1
    lower = max(lower, 1e-12)
    while True:
        candidate = rng.uniform(lower, upper)
        if log_density(candidate) >= log_y:
            return candidate
        if candidate < x0:
            lower = candidate
        else:
            upper = candidate


@dataclass
class PosteriorSample:
    """Post-warmup draws, indexed (chain, draw) and (chain, draw, athlete)."""

    athlete_ids: list[str]
    mu_alpha: np.ndarray
    mu_beta: np.ndarray
    tau_alpha: np.ndarray
    tau_beta: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    healthy: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return self.mu_alpha.shape[0]

    @property
    def n_draws(self) -> int:
        return self.mu_alpha.shape[1]

    def scalar_draws(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def flat(self, name: str) -> np.ndarray:
        return getattr(self, name).reshape(-1)

    def export_columnar(self, path) -> None:
        """Write hyperparameter draws as delimited text for offline inspection."""
        header = "chain,draw," + ",".join(SCALAR_PARAMS)
        rows = []
        for c in range(self.n_chains):
            for d in range(self.n_draws):
                values = ",".join(repr(float(getattr(self, p)[c, d])) for p in SCALAR_PARAMS)
                rows.append(f"{c},{d},{values}")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(header + "\n")
            handle.write("\n".join(rows) + "\n")


class SamplerDiverged(Exception):
    pass


def _run_chain(
    data: HierData,
    priors: HierPriors,
    draws: int,
    warmup: int,
    rng: np.random.Generator,
) -> dict[str, np.ndarray]:
    n_ath = data.n_athletes
    n_obs = data.n_obs

    # data-driven start, jittered per chain so chains are overdispersed
    alpha = data.sum_y / np.maximum(data.n_per, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = data.sum_tt - data.sum_t**2 / np.maximum(data.n_per, 1.0)
        numer = data.sum_ty - data.sum_t * data.sum_y / np.maximum(data.n_per, 1.0)
        beta = np.where(denom > 1e-12, numer / np.maximum(denom, 1e-12), 0.0)
    alpha = alpha + rng.normal(0.0, 0.05, size=n_ath)
    beta = beta + rng.normal(0.0, 0.01, size=n_ath)
    mu_a = float(np.mean(alpha)) + rng.normal(0.0, 0.1)
    mu_b = float(np.mean(beta)) + rng.normal(0.0, 0.02)
    tau_a = max(float(np.std(alpha)), 0.05) * math.exp(rng.uniform(-0.3, 0.3))
    tau_b = max(float(np.std(beta)), 0.01) * math.exp(rng.uniform(-0.3, 0.3))
    resid = data.y - alpha[data.group] - beta[data.group] * data.t
    sigma = max(float(np.std(resid)), 0.02) * math.exp(rng.uniform(-0.3, 0.3))

    prior_mu_a_prec = 1.0 / priors.mu_alpha_scale**2
    prior_mu_b_prec = 1.0 / priors.mu_beta_scale**2

    out = {
        "mu_alpha": np.empty(draws),
        "mu_beta": np.empty(draws),
        "tau_alpha": np.empty(draws),
        "tau_beta": np.empty(draws),
        "sigma": np.empty(draws),
        "alpha": np.empty((draws, n_ath)),
        "beta": np.empty((draws, n_ath)),
    }

    for it in range(warmup + draws):
        sigma2 = sigma * sigma

        # athlete intercepts: conjugate normal given everything else
        prec = data.n_per / sigma2 + 1.0 / tau_a**2
        mean = ((data.sum_y - beta * data.sum_t) / sigma2 + mu_a / tau_a**2) / prec
        alpha = mean + rng.standard_normal(n_ath) / np.sqrt(prec)

        # athlete slopes
        prec = data.sum_tt / sigma2 + 1.0 / tau_b**2
        mean = ((data.sum_ty - alpha * data.sum_t) / sigma2 + mu_b / tau_b**2) / prec
        beta = mean + rng.standard_normal(n_ath) / np.sqrt(prec)

        # population means
        prec_mu = n_ath / tau_a**2 + prior_mu_a_prec
        mean_mu = (alpha.sum() / tau_a**2 + priors.mu_alpha_loc * prior_mu_a_prec) / prec_mu
        mu_a = mean_mu + rng.standard_normal() / math.sqrt(prec_mu)

        prec_mu = n_ath / tau_b**2 + prior_mu_b_prec
        mean_mu = (beta.sum() / tau_b**2 + priors.mu_beta_loc * prior_mu_b_prec) / prec_mu
        mu_b = mean_mu + rng.standard_normal() / math.sqrt(prec_mu)

        # scales: half-normal priors, slice updates on the scale itself
        ss_alpha = float(np.sum((alpha - mu_a) ** 2))
        tau_a = slice_sample_positive(
            tau_a,
            lambda x: -n_ath * math.log(x) - ss_alpha / (2 * x * x) - x * x / (2 * priors.tau_alpha_scale**2)
            if x > 0 else -math.inf,
            rng,
        )
        ss_beta = float(np.sum((beta - mu_b) ** 2))
        tau_b = slice_sample_positive(
            tau_b,
            lambda x: -n_ath * math.log(x) - ss_beta / (2 * x * x) - x * x / (2 * priors.tau_beta_scale**2)
            if x > 0 else -math.inf,
            rng,
        )
        resid = data.y - alpha[data.group] - beta[data.group] * data.t
        sse = float(resid @ resid)
        sigma = slice_sample_positive(
            sigma,
            lambda x: -n_obs * math.log(x) - sse / (2 * x * x) - x * x / (2 * priors.sigma_scale**2)
            if x > 0 else -math.inf,
            rng,
        )

        if it >= warmup:
            d = it - warmup
            out["mu_alpha"][d] = mu_a
            out["mu_beta"][d] = mu_b
            out["tau_alpha"][d] = tau_a
            out["tau_beta"][d] = tau_b
            out["sigma"][d] = sigma
            out["alpha"][d] = alpha
            out["beta"][d] = beta
    return out


def fit_hier(
    histories: list[AthleteHistory],
    config: DetectorConfig | None = None,
    priors: HierPriors | None = None,
    rng: np.random.Generator | None = None,
) -> PosteriorSample:
    """Fit the hierarchical trajectory model by MCMC.

    Requires at least two athletes (each history already satisfies the
    min-history rule upstream). Returns draws even when convergence
    diagnostics fail; the sample is then marked unhealthy.
    """
    config = config or DetectorConfig()
    priors = priors or HierPriors()
    priors.validate()
    if len(histories) < 2:
        raise ValueError("hierarchical fit needs at least 2 athletes")

    data = build_design(histories)
    base_rng = rng or config.rng_for("bayes_hier")
    chain_seeds = base_rng.integers(0, 2**63 - 1, size=config.mcmc_chains)
    chains = [
        _run_chain(data, priors, config.mcmc_draws, config.mcmc_warmup, np.random.default_rng(int(seed)))
        for seed in chain_seeds
    ]

    sample = PosteriorSample(
        athlete_ids=data.athlete_ids,
        mu_alpha=np.stack([c["mu_alpha"] for c in chains]),
        mu_beta=np.stack([c["mu_beta"] for c in chains]),
        tau_alpha=np.stack([c["tau_alpha"] for c in chains]),
        tau_beta=np.stack([c["tau_beta"] for c in chains]),
        sigma=np.stack([c["sigma"] for c in chains]),
        alpha=np.stack([c["alpha"] for c in chains]),
        beta=np.stack([c["beta"] for c in chains]),
    )
    sample.diagnostics = mcmc_diagnostics(sample)
    sample.healthy = bool(sample.diagnostics["healthy"])
    return sample


def split_rhat(draws: np.ndarray) -> np.ndarray:
    """Split-chain potential scale reduction; draws shaped (chains, draws[, k])."""
    c, d = draws.shape[0], draws.shape[1]
    half = d // 2
    if half < 2:
        return np.full(draws.shape[2:] or (), np.nan)
    seqs = np.concatenate([draws[:, :half], draws[:, half:2 * half]], axis=0)  # (2c, half, ...)
    mean_per = seqs.mean(axis=1)
    var_per = seqs.var(axis=1, ddof=1)
    w = var_per.mean(axis=0)
    b = half * mean_per.var(axis=0, ddof=1)
    var_plus = (half - 1) / half * w + b / half
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(var_plus / w)
    return np.where(w > 0, out, 1.0)


def effective_sample_size(draws: np.ndarray) -> float:
    """Bulk ESS via FFT autocorrelation with Geyer initial-positive truncation."""
    c, d = draws.shape
    if d < 4:
        return float(c * d)
    centered = draws - draws.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * d)))
    fft = np.fft.rfft(centered, n=size, axis=1)
    acov = np.fft.irfft(fft * np.conj(fft), n=size, axis=1)[:, :d].real / d
    var0 = acov[:, 0].mean()
    if var0 <= 0:
        return float(c * d)
    rho = acov.mean(axis=0) / var0
    total = 0.0
    for k in range(1, d - 1, 2):
        pair = rho[k] + rho[k + 1] if k + 1 < d else rho[k]
        if pair < 0:
            break
        total += pair
    ess = c * d / (1.0 + 2.0 * total)
    return float(min(ess, c * d))


def mcmc_diagnostics(sample: PosteriorSample) -> dict:
    """Split-R-hat per parameter plus ESS for the hyperparameters."""
    rhat: dict[str, float] = {}
    ess: dict[str, float] = {}
    for name in SCALAR_PARAMS:
        draws = sample.scalar_draws(name)
        rhat[name] = float(split_rhat(draws))
        ess[name] = effective_sample_size(draws)
    alpha_rhat = split_rhat(sample.alpha)
    beta_rhat = split_rhat(sample.beta)
    rhat["alpha_max"] = float(np.nanmax(alpha_rhat)) if alpha_rhat.size else 1.0
    rhat["beta_max"] = float(np.nanmax(beta_rhat)) if beta_rhat.size else 1.0
    max_rhat = max(v for v in rhat.values() if not math.isnan(v))
    return {
        "rhat": rhat,
        "ess": ess,
        "max_rhat": float(max_rhat),
        "healthy": bool(max_rhat < 1.05),
    }


def predictive_tail_probability(
    sample: PosteriorSample,
    data: HierData,
    chunk_obs: int = 4000,
) -> np.ndarray:
    """P(replicate <= observed) under the posterior predictive, per performance.

    Exact expectation over posterior draws of the indicator used by the
    draw-and-count estimator, so it agrees with replicate counting up to
    Monte-Carlo noise while being deterministic given the sample.
    """
    alpha_flat = sample.alpha.reshape(-1, sample.alpha.shape[2])
    beta_flat = sample.beta.reshape(-1, sample.beta.shape[2])
    sigma_flat = sample.sigma.reshape(-1)
    n_draws = sigma_flat.size
    p = np.empty(data.n_obs)
    for start in range(0, data.n_obs, chunk_obs):
        stop = min(start + chunk_obs, data.n_obs)
        g = data.group[start:stop]
        mu = alpha_flat[:, g] + beta_flat[:, g] * data.t[start:stop]
        z = (data.y[start:stop] - mu) / sigma_flat[:, None]
        p[start:stop] = ndtr(z).sum(axis=0) / n_draws
    return p


def draw_replicates(
    sample: PosteriorSample,
    data: HierData,
    rng: np.random.Generator,
) -> np.ndarray:
    """One predictive replicate per posterior draw per observation (draws, n_obs)."""
    alpha_flat = sample.alpha.reshape(-1, sample.alpha.shape[2])
    beta_flat = sample.beta.reshape(-1, sample.beta.shape[2])
    sigma_flat = sample.sigma.reshape(-1)
    mu = alpha_flat[:, data.group] + beta_flat[:, data.group] * data.t
    return mu + sigma_flat[:, None] * rng.standard_normal(mu.shape)


def ppc_flag(
    sample: PosteriorSample,
    histories: list[AthleteHistory],
    config: DetectorConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, HierData]:
    """Posterior predictive p-values and flags for every performance."""
    config = config or DetectorConfig()
    data = build_design(histories)
    if data.athlete_ids != sample.athlete_ids:
        raise ValueError("histories do not match the fitted sample")
    tail = predictive_tail_probability(sample, data)
    if config.bayes_one_sided:
        p_value = tail  # small tail = unusually fast
    else:
        p_value = 2.0 * np.minimum(tail, 1.0 - tail)
    return p_value, p_value < config.bayes_p_threshold, data


def prior_predictive_times(rng: np.random.Generator, n: int, priors: HierPriors | None = None) -> np.ndarray:
    """Times implied by the priors alone at career start (sanity check)."""
    priors = priors or HierPriors()
    mu_a = rng.normal(priors.mu_alpha_loc, priors.mu_alpha_scale, size=n)
    tau_a = np.abs(rng.normal(0.0, priors.tau_alpha_scale, size=n))
    alpha = rng.normal(mu_a, tau_a)
    sigma = np.abs(rng.normal(0.0, priors.sigma_scale, size=n))
    return rng.normal(alpha, sigma)


def _bayes_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    if len(histories) < 2:
        entries = [
            FlagEntry(h.athlete_id, perf, False, None, "insufficient_athletes")
            for h in histories
            for perf in h.performances
        ]
        return entries, ["skipped: hierarchical model needs at least 2 eligible athletes"]

    warnings: list[str] = []
    sample = fit_hier(histories, config, rng=rng)
    if not sample.healthy:
        warnings.append(f"sampler diagnostics unhealthy: max split-rhat {sample.diagnostics['max_rhat']:.3f}")
    p_values, flags, data = ppc_flag(sample, histories, config)

    entries: list[FlagEntry] = []
    cursor = 0
    for history in histories:
        for perf in history.performances:
            p = float(p_values[cursor])
            flagged = bool(flags[cursor])
            note = f"posterior predictive p={p:.4f} under career trajectory model" if flagged else ""
            entries.append(FlagEntry(history.athlete_id, perf, flagged, p, note))
            cursor += 1
    return entries, warnings


BAYES_HIER = MethodInfo(
    method_id="bayes_hier",
    category="BS",
    complexity_note="O(n * MCMC); hierarchical random intercepts and slopes",
    score_doc="posterior predictive p-value; lower is more anomalous",
    higher_is_more_anomalous=False,
    per_athlete=True,
    fn=_bayes_detect,
    rank_transform="negate",
)

"""Population-level learned detectors, trained per event slice.

Isolation forest: an ensemble of random binary partition trees built on
subsamples of size psi = min(256, N) with height cap ceil(log2 psi).
Anomalies sit in sparse regions and take fewer splits to isolate; the
anomaly score is

    s(x) = 2 ** (-E[h(x)] / c(psi))

where h(x) is the path length (truncated paths are extended by c(leaf size),
the expected remaining depth) and c(n) normalizes by the average path length
of an unsuccessful BST search. Scores near 1 are anomalous; the top
`contamination` fraction of rows is flagged, stable input order breaking ties.

Boosted residual screening: squared-error gradient boosting of shallow
regression trees predicts performance time from contextual features only
(wind, round, competition level). Rows whose absolute residual exceeds the
95th-percentile training residual are flagged: the context cannot explain
the time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import AthleteHistory, DetectorConfig, FlagEntry, MethodInfo
from ..records import ROUND_ORDINAL

EULER_GAMMA = 0.5772156649015329

FEATURE_NAMES = ("time_seconds", "wind_mps", "competition_level", "recent_form", "round_ordinal")
CONTEXT_FEATURES = ("wind_mps", "competition_level", "round_ordinal")
RECENT_FORM_WINDOW = 5

IFOREST_FORMAT = "trackscreen-iforest/1"
GBT_FORMAT = "trackscreen-gbt/1"


@dataclass
class FeatureMatrix:
    """Row-per-performance feature table plus provenance back to histories."""

    X: np.ndarray  # (n, 5) float64, columns as FEATURE_NAMES
    provenance: list[tuple[int, int]]  # (history index, performance index)

    def context_columns(self) -> np.ndarray:
        cols = [FEATURE_NAMES.index(name) for name in CONTEXT_FEATURES]
        return self.X[:, cols]

    def times(self) -> np.ndarray:
        return self.X[:, 0]


def build_features(
    histories: list[AthleteHistory],
    competition_levels: dict[str, int] | None = None,
) -> FeatureMatrix:
    """Assemble per-performance features.

    recent_form is the mean of up to the five most recent strictly earlier
    performances; an athlete's first performance falls back to their slice
    mean. Missing wind is imputed as 0.0 (neutral conditions).
    """
    rows: list[list[float]] = []
    provenance: list[tuple[int, int]] = []
    levels = competition_levels or {}
    for h_idx, history in enumerate(histories):
        times = history.times()
        slice_mean = float(np.mean(times))
        for p_idx, perf in enumerate(history.performances):
            window = times[max(0, p_idx - RECENT_FORM_WINDOW):p_idx]
            recent = float(np.mean(window)) if window.size else slice_mean
            rows.append([
                times[p_idx],
                perf.wind_mps if perf.wind_mps is not None else 0.0,
                float(levels.get(perf.competition_id, 0)),
                recent,
                float(ROUND_ORDINAL[perf.round]),
            ])
            provenance.append((h_idx, p_idx))
    X = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(FEATURE_NAMES)))
    return FeatureMatrix(X=X, provenance=provenance)


def average_path_length(n: int | np.ndarray) -> np.ndarray | float:
    """c(n): expected path length of an unsuccessful BST search over n points."""
    n_arr = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n_arr)
    out = np.where(n_arr == 2, 1.0, out)
    big = n_arr > 2
    with np.errstate(divide="ignore", invalid="ignore"):
        harm = np.log(np.maximum(n_arr - 1, 1)) + EULER_GAMMA
        out = np.where(big, 2.0 * harm - 2.0 * (n_arr - 1) / n_arr, out)
    if np.isscalar(n):
        return float(out)
    return out


@dataclass
class _IsoTree:
    feature: np.ndarray    # int32, -1 for leaves
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32 child ids
    right: np.ndarray
    size: np.ndarray       # node sizes, for truncated-path extension

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "size": self.size.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "_IsoTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int32),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int32),
            right=np.asarray(data["right"], dtype=np.int32),
            size=np.asarray(data["size"], dtype=np.int32),
        )


def _grow_iso_tree(X: np.ndarray, rng: np.random.Generator, height_limit: int) -> _IsoTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    size: list[int] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(0)
        return len(feature) - 1

    def build(idx: np.ndarray, depth: int) -> int:
        node = new_node()
        size[node] = int(idx.size)
        if depth >= height_limit or idx.size <= 1:
            return node
        sub = X[idx]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        usable = np.nonzero(hi > lo)[0]
        if usable.size == 0:
            return node
        q = int(usable[rng.integers(usable.size)])
        split = float(rng.uniform(lo[q], hi[q]))
        mask = sub[:, q] < split
        if not mask.any() or mask.all():
            return node  # degenerate draw at the boundary; isolate as leaf
        feature[node] = q
        threshold[node] = split
        left[node] = build(idx[mask], depth + 1)
        right[node] = build(idx[~mask], depth + 1)
        return node

    build(np.arange(X.shape[0]), 0)
    return _IsoTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        size=np.asarray(size, dtype=np.int32),
    )


@dataclass
class IsolationForestModel:
    trees: list[_IsoTree]
    subsample_size: int
    c_norm: float
    height_limit: int

    @classmethod
    def fit(cls, X: np.ndarray, n_trees: int, rng: np.random.Generator) -> "IsolationForestModel":
        n = X.shape[0]
        if n < 2:
            raise ValueError("isolation forest needs at least 2 rows")
        psi = min(256, n)
        height_limit = max(1, math.ceil(math.log2(psi)))
        trees = []
        for _ in range(n_trees):
            idx = rng.permutation(n)[:psi]
            trees.append(_grow_iso_tree(X[idx], rng, height_limit))
        return cls(trees=trees, subsample_size=psi, c_norm=float(average_path_length(psi)), height_limit=height_limit)

    def mean_path_length(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            leaf_extend = average_path_length(tree.size)
            node = np.zeros(X.shape[0], dtype=np.int32)
            depth = np.zeros(X.shape[0], dtype=np.float64)
            path = np.zeros(X.shape[0], dtype=np.float64)
            active = np.ones(X.shape[0], dtype=bool)
            for _ in range(self.height_limit + 1):
                feat = tree.feature[node]
                at_leaf = active & (feat < 0)
                if at_leaf.any():
                    path[at_leaf] = depth[at_leaf] + leaf_extend[node[at_leaf]]
                    active = active & ~at_leaf
                if not active.any():
                    break
                rows = np.nonzero(active)[0]
                f = tree.feature[node[rows]]
                goes_left = X[rows, f] < tree.threshold[node[rows]]
                node[rows] = np.where(goes_left, tree.left[node[rows]], tree.right[node[rows]])
                depth[rows] += 1.0
            if active.any():  # ran out of levels exactly at the cap
                path[active] = depth[active] + leaf_extend[node[active]]
            total += path
        return total / len(self.trees)

    def score(self, X: np.ndarray, chunk: int = 100_000) -> np.ndarray:
        scores = np.empty(X.shape[0], dtype=np.float64)
        for start in range(0, X.shape[0], chunk):
            block = X[start:start + chunk]
            scores[start:start + chunk] = score_from_mean_path(self.mean_path_length(block), self.c_norm)
        return scores

    def to_dict(self) -> dict:
        return {
            "format": IFOREST_FORMAT,
            "subsample_size": self.subsample_size,
            "c_norm": self.c_norm,
            "height_limit": self.height_limit,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IsolationForestModel":
        if data.get("format") != IFOREST_FORMAT:
            raise ValueError(f"unsupported model format: {data.get('format')!r}")
        return cls(
            trees=[_IsoTree.from_dict(t) for t in data["trees"]],
            subsample_size=int(data["subsample_size"]),
            c_norm=float(data["c_norm"]),
            height_limit=int(data["height_limit"]),
        )


def score_from_mean_path(mean_path: np.ndarray | float, c_norm: float) -> np.ndarray | float:
    """The isolation score law: mean path equal to c_norm gives exactly 0.5."""
    return 2.0 ** (-np.asarray(mean_path, dtype=np.float64) / c_norm)


def contamination_cut(scores: np.ndarray, contamination: float) -> np.ndarray:
    """Flag the top contamination fraction by score, stable input order on ties."""
    n = scores.size
    k = int(math.floor(contamination * n + 1e-9))
    flags = np.zeros(n, dtype=bool)
    if k > 0:
        order = np.argsort(-scores, kind="stable")
        flags[order[:k]] = True
    return flags


# ---------------------------------------------------------------------------
# Gradient-boosted residual screening
# ---------------------------------------------------------------------------

MAX_BINS = 256


@dataclass
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0  # raw-value threshold: x <= threshold goes left
    bin_cut: int = 0
    left: int = -1
    right: int = -1
    value: float = 0.0


@dataclass
class _RegressionTree:
    nodes: list[_TreeNode] = field(default_factory=list)

    def predict_binned(self, B: np.ndarray) -> np.ndarray:
        out = np.zeros(B.shape[0], dtype=np.float64)
        stack = [(0, np.arange(B.shape[0]))]
        while stack:
            node_id, idx = stack.pop()
            node = self.nodes[node_id]
            if node.feature < 0:
                out[idx] = node.value
                continue
            goes_left = B[idx, node.feature] <= node.bin_cut
            stack.append((node.left, idx[goes_left]))
            stack.append((node.right, idx[~goes_left]))
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(X.shape[0], dtype=np.float64)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node_id, idx = stack.pop()
            node = self.nodes[node_id]
            if node.feature < 0:
                out[idx] = node.value
                continue
            goes_left = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[goes_left]))
            stack.append((node.right, idx[~goes_left]))
        return out

    def to_dict(self) -> dict:
        return {
            "nodes": [
                [n.feature, n.threshold, n.bin_cut, n.left, n.right, n.value]
                for n in self.nodes
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "_RegressionTree":
        return cls(nodes=[_TreeNode(*row) for row in data["nodes"]])


def _bin_features(X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Quantile-bin each column to at most MAX_BINS levels for split search."""
    n, d = X.shape
    binned = np.zeros((n, d), dtype=np.int32)
    bin_upper: list[np.ndarray] = []
    for j in range(d):
        col = X[:, j]
        levels = np.unique(col)
        if levels.size > MAX_BINS:
            qs = np.linspace(0.0, 1.0, MAX_BINS + 1)[1:-1]
            levels = np.unique(np.quantile(col, qs, method="higher"))
            levels = np.append(levels, col.max())
        binned[:, j] = np.searchsorted(levels, col, side="left")
        bin_upper.append(levels.astype(np.float64))
    return binned, bin_upper


def _fit_tree(
    B: np.ndarray,
    bin_upper: list[np.ndarray],
    residuals: np.ndarray,
    max_depth: int,
    min_leaf: int = 1,
) -> _RegressionTree:
    tree = _RegressionTree()

    def best_split(idx: np.ndarray) -> tuple[int, int, float] | None:
        r = residuals[idx]
        total_sum = r.sum()
        total_n = idx.size
        base = (total_sum * total_sum) / total_n
        best = None
        best_gain = 1e-12
        for j in range(B.shape[1]):
            nbins = bin_upper[j].size
            if nbins < 2:
                continue
            bins = B[idx, j]
            counts = np.bincount(bins, minlength=nbins).astype(np.float64)
            sums = np.bincount(bins, weights=r, minlength=nbins)
            c_left = np.cumsum(counts)[:-1]
            s_left = np.cumsum(sums)[:-1]
            c_right = total_n - c_left
            s_right = total_sum - s_left
            valid = (c_left >= min_leaf) & (c_right >= min_leaf)
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(valid, s_left**2 / c_left + s_right**2 / c_right - base, -np.inf)
            b = int(np.argmax(gain))
            if gain[b] > best_gain:
                best_gain = float(gain[b])
                best = (j, b, best_gain)
        return best

    def build(idx: np.ndarray, depth: int) -> int:
        node = _TreeNode(value=float(residuals[idx].mean()))
        tree.nodes.append(node)
        node_id = len(tree.nodes) - 1
        if depth >= max_depth or idx.size < 2 * min_leaf:
            return node_id
        found = best_split(idx)
        if found is None:
            return node_id
        j, b, _ = found
        node.feature = j
        node.bin_cut = b
        node.threshold = float(bin_upper[j][b])
        goes_left = B[idx, j] <= b
        node.left = build(idx[goes_left], depth + 1)
        node.right = build(idx[~goes_left], depth + 1)
        return node_id

    build(np.arange(B.shape[0]), 0)
    return tree


class DegenerateTarget(Exception):
    pass


@dataclass
class BoostedResidualModel:
    stages: list[_RegressionTree]
    learning_rate: float
    base_prediction: float
    residual_cutoff: float
    train_loss: list[float]

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, config: DetectorConfig) -> "BoostedResidualModel":
        if np.ptp(y) == 0.0:
            raise DegenerateTarget("all target values equal")
        B, bin_upper = _bin_features(X)
        base = float(y.mean())
        pred = np.full(y.shape, base)
        stages: list[_RegressionTree] = []
        losses = [float(np.sum((y - pred) ** 2))]
        for _ in range(config.gbt_trees):
            tree = _fit_tree(B, bin_upper, y - pred, config.gbt_depth)
            pred = pred + config.gbt_learning_rate * tree.predict_binned(B)
            loss = float(np.sum((y - pred) ** 2))
            # squared-error boosting with shrinkage in (0, 1] cannot raise train loss
            assert loss <= losses[-1] * (1 + 1e-12) + 1e-9, "train loss increased during boosting"
            losses.append(loss)
            stages.append(tree)
        residuals = np.abs(y - pred)
        cutoff = float(np.quantile(residuals, config.gbt_residual_quantile, method="higher"))
        return cls(
            stages=stages,
            learning_rate=config.gbt_learning_rate,
            base_prediction=base,
            residual_cutoff=cutoff,
            train_loss=losses,
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        pred = np.full(X.shape[0], self.base_prediction)
        for tree in self.stages:
            pred = pred + self.learning_rate * tree.predict(X)
        return pred

    def to_dict(self) -> dict:
        return {
            "format": GBT_FORMAT,
            "learning_rate": self.learning_rate,
            "base_prediction": self.base_prediction,
            "residual_cutoff": self.residual_cutoff,
            "stages": [t.to_dict() for t in self.stages],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BoostedResidualModel":
        if data.get("format") != GBT_FORMAT:
            raise ValueError(f"unsupported model format: {data.get('format')!r}")
        return cls(
            stages=[_RegressionTree.from_dict(t) for t in data["stages"]],
            learning_rate=float(data["learning_rate"]),
            base_prediction=float(data["base_prediction"]),
            residual_cutoff=float(data["residual_cutoff"]),
            train_loss=[],
        )


GBT_MIN_ROWS = 20


def _unscored_entries(histories: list[AthleteHistory], note: str) -> list[FlagEntry]:
    return [
        FlagEntry(h.athlete_id, perf, False, None, note)
        for h in histories
        for perf in h.performances
    ]


def _iforest_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    matrix = build_features(histories)
    n = matrix.X.shape[0]
    if n < 2:
        return _unscored_entries(histories, "insufficient_rows"), ["insufficient_rows_for_iforest"]
    model = IsolationForestModel.fit(matrix.X, config.iforest_trees, rng)
    scores = model.score(matrix.X)
    flags = contamination_cut(scores, config.iforest_contamination)
    entries = []
    for (h_idx, p_idx), score, flagged in zip(matrix.provenance, scores, flags):
        history = histories[h_idx]
        note = f"isolation score {score:.3f}; sparse region of (time, wind, form) space" if flagged else ""
        entries.append(FlagEntry(history.athlete_id, history.performances[p_idx], bool(flagged), float(score), note))
    return entries, []


def _gbt_detect(histories, config: DetectorConfig, rng) -> tuple[list[FlagEntry], list[str]]:
    matrix = build_features(histories)
    n = matrix.X.shape[0]
    if n < GBT_MIN_ROWS:
        return _unscored_entries(histories, "insufficient_rows"), ["insufficient_rows_for_gbt"]
    X_ctx = matrix.context_columns()
    y = matrix.times()
    try:
        model = BoostedResidualModel.fit(X_ctx, y, config)
    except DegenerateTarget:
        return _unscored_entries(histories, "degenerate_target"), ["degenerate_target"]
    pred = model.predict(X_ctx)
    residuals = np.abs(y - pred)
    flags = residuals > model.residual_cutoff
    entries = []
    for (h_idx, p_idx), r, p_hat, flagged in zip(matrix.provenance, residuals, pred, flags):
        history = histories[h_idx]
        note = (
            f"residual {r:.3f}s vs context-model prediction {p_hat:.2f}s (cutoff {model.residual_cutoff:.3f}s)"
            if flagged else ""
        )
        entries.append(FlagEntry(history.athlete_id, history.performances[p_idx], bool(flagged), float(r), note))
    return entries, []


IFOREST = MethodInfo(
    method_id="iforest",
    category="ML",
    complexity_note="O(n log n); ensemble of random isolation trees",
    score_doc="isolation score in (0, 1]; closer to 1 is more anomalous",
    higher_is_more_anomalous=True,
    per_athlete=False,
    fn=_iforest_detect,
    rank_transform="identity",
)

GBT_RESIDUAL = MethodInfo(
    method_id="gbt_residual",
    category="ML",
    complexity_note="O(n log n); boosted shallow trees on contextual features",
    score_doc="absolute residual (seconds) of a context-only time model",
    higher_is_more_anomalous=True,
    per_athlete=False,
    fn=_gbt_detect,
    rank_transform="identity",
)

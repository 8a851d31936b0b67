"""Random Survival Forest with log-rank splitting and Nelson-Aalen leaves.

Each tree is grown on a bootstrap resample. At every node ``mtry`` features
are drawn without replacement and every midpoint between consecutive
distinct values is scored with the log-rank statistic; the best cut wins.
Nodes with fewer than ``2 * min_leaf_size`` samples, no events, or no cut
leaving ``min_leaf_size`` on both sides become leaves.

Ensemble survival averages per-tree ``exp(-H)`` on the grid of distinct
training event times. Risk is the sum over that grid of the ensemble
cumulative hazard.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from ..errors import InsufficientEvents, SchemaHashMismatch, SchemaMismatch, VersionMismatch
from .estimators import SurvivalFunction

FORMAT = "chemoutcome-rsf"
FORMAT_VERSION = 1


@dataclass
class ForestParams:
    n_trees: int = 300
    mtry: Optional[int] = None
    min_leaf_size: int = 15
    seed: int = 0
    n_jobs: int = 1

    def resolved_mtry(self, p: int) -> int:
        return min(p, self.mtry if self.mtry else math.ceil(math.sqrt(p)))


def schema_hash(feature_names: Sequence[str]) -> str:
    return hashlib.sha256(json.dumps(list(feature_names)).encode("utf-8")).hexdigest()


@dataclass
class SurvivalTree:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray  # leaf slot per node, -1 for internal nodes
    leaf_times: list[np.ndarray]
    leaf_chf: list[np.ndarray]
    leaf_n: np.ndarray

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_times)

    @property
    def root_feature(self) -> int:
        return int(self.feature[0])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf slot for every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.nonzero(active)[0]
            nd = node[rows]
            go_left = X[rows, self.feature[nd]] <= self.threshold[nd]
            node[rows] = np.where(go_left, self.left[nd], self.right[nd])
            active[rows] = self.feature[node[rows]] >= 0
        return self.leaf[node]

    def leaf_chf_on(self, grid: np.ndarray) -> np.ndarray:
        """(n_leaves, len(grid)) cumulative hazard evaluated on ``grid``."""
        out = np.zeros((self.n_leaves, len(grid)))
        for i, (t, h) in enumerate(zip(self.leaf_times, self.leaf_chf)):
            if len(t):
                idx = np.searchsorted(t, grid, side="right")
                out[i] = np.concatenate([[0.0], h])[idx]
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf": self.leaf.tolist(),
            "leaf_times": [t.tolist() for t in self.leaf_times],
            "leaf_chf": [h.tolist() for h in self.leaf_chf],
            "leaf_n": self.leaf_n.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurvivalTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["leaf"], dtype=np.int64),
            [np.asarray(t, dtype=float) for t in d["leaf_times"]],
            [np.asarray(h, dtype=float) for h in d["leaf_chf"]],
            np.asarray(d["leaf_n"], dtype=np.int64),
        )


def _nelson_aalen_arrays(time: np.ndarray, event: np.ndarray):
    ut = np.unique(time[event])
    if not len(ut):
        return ut, ut.copy()
    at_risk = len(time) - np.searchsorted(np.sort(time), ut, side="left")
    deaths = np.bincount(np.searchsorted(ut, time[event]), minlength=len(ut))
    return ut, np.cumsum(deaths / at_risk)


def best_split(X: np.ndarray, time: np.ndarray, event: np.ndarray, features, min_leaf: int):
    """Best (feature, threshold, statistic) over ``features`` or None.

    Scores every admissible cut of every candidate feature in one pass using
    cumulative at-risk and event counts per distinct event time.
    """
    m = len(time)
    if m < 2 * min_leaf or not event.any():
        return None
    ut = np.unique(time[event])
    # at_risk[i, k] = sample i still at risk at event time k
    at_risk = time[:, None] >= ut[None, :]
    dead = np.zeros((m, len(ut)), dtype=bool)
    ev_rows = np.nonzero(event)[0]
    dead[ev_rows, np.searchsorted(ut, time[ev_rows])] = True
    y = at_risk.sum(axis=0).astype(float)
    d = dead.sum(axis=0).astype(float)
    scale = np.where(y > 1, (y - d) / np.maximum(y - 1, 1) * d, 0.0)

    best = None
    lo, hi = min_leaf - 1, m - min_leaf - 1  # left = first j+1 sorted samples
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cand = np.arange(lo, hi + 1)
        cand = cand[xs[cand] < xs[cand + 1]]
        if not len(cand):
            continue
        yl = np.cumsum(at_risk[order], axis=0)[cand].astype(float)
        dl = np.cumsum(dead[order], axis=0)[cand].astype(float)
        frac = yl / y
        num = (dl - frac * d).sum(axis=1)
        var = (frac * (1 - frac) * scale).sum(axis=1)
        stat = np.where(var > 0, num * num / np.where(var > 0, var, 1.0), 0.0)
        j = int(np.argmax(stat))
        if stat[j] > 0 and (best is None or stat[j] > best[2]):
            c = cand[j]
            best = (int(f), float((xs[c] + xs[c + 1]) / 2.0), float(stat[j]))
    return best


def grow_tree(X, time, event, params: ForestParams, seed_seq, bootstrap: bool = True) -> SurvivalTree:
    rng = np.random.default_rng(seed_seq)
    n, p = X.shape
    idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
    Xb, tb, eb = X[idx], time[idx], event[idx]
    mtry = params.resolved_mtry(p)

    feature, threshold, left, right, leaf = [], [], [], [], []
    leaf_times, leaf_chf, leaf_n = [], [], []

    def new_node():
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (leaf, -1)):
            arr.append(v)
        return len(feature) - 1

    stack = [(new_node(), np.arange(n))]
    while stack:
        node, rows = stack.pop()
        feats = rng.choice(p, size=mtry, replace=False)
        split = best_split(Xb[rows], tb[rows], eb[rows], feats, params.min_leaf_size)
        if split is None:
            ut, chf = _nelson_aalen_arrays(tb[rows], eb[rows])
            leaf[node] = len(leaf_times)
            leaf_times.append(ut)
            leaf_chf.append(chf)
            leaf_n.append(len(rows))
            continue
        f, thr, _ = split
        mask = Xb[rows, f] <= thr
        feature[node], threshold[node] = f, thr
        l_id, r_id = new_node(), new_node()
        left[node], right[node] = l_id, r_id
        # push right first so the left subtree is numbered first
        stack.append((r_id, rows[~mask]))
        stack.append((l_id, rows[mask]))

    return SurvivalTree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(leaf, dtype=np.int64),
        leaf_times,
        leaf_chf,
        np.asarray(leaf_n, dtype=np.int64),
    )


@dataclass
class SurvivalForestModel:
    trees: list[SurvivalTree]
    params: ForestParams
    feature_names: list[str]
    time_grid: np.ndarray
    schema_hash: str = ""
    _leaf_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.schema_hash:
            self.schema_hash = schema_hash(self.feature_names)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise SchemaMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def check_columns(self, names: Sequence[str]) -> None:
        if schema_hash(names) != self.schema_hash:
            raise SchemaMismatch("feature columns do not match the model's feature schema")

    def _leaf_tables(self, i: int):
        if i not in self._leaf_cache:
            chf = self.trees[i].leaf_chf_on(self.time_grid)
            self._leaf_cache[i] = (chf, np.exp(-chf), chf.sum(axis=1))
        return self._leaf_cache[i]

    def predict_survival_matrix(self, X) -> np.ndarray:
        """(n_rows, len(time_grid)) ensemble survival."""
        X = self._check(X)
        acc = np.zeros((len(X), len(self.time_grid)))
        for i, tree in enumerate(self.trees):
            _, surv, _ = self._leaf_tables(i)
            acc += surv[tree.apply(X)]
        return acc / len(self.trees)

    def predict_cumulative_hazard_matrix(self, X) -> np.ndarray:
        X = self._check(X)
        acc = np.zeros((len(X), len(self.time_grid)))
        for i, tree in enumerate(self.trees):
            chf, _, _ = self._leaf_tables(i)
            acc += chf[tree.apply(X)]
        return acc / len(self.trees)

    def predict_survival(self, row) -> SurvivalFunction:
        return SurvivalFunction(self.time_grid, self.predict_survival_matrix(row)[0])

    def predict_survival_at(self, X, t: float) -> np.ndarray:
        S = self.predict_survival_matrix(X)
        idx = np.searchsorted(self.time_grid, t, side="right")
        return np.ones(len(S)) if idx == 0 else S[:, idx - 1]

    def predict_risk(self, X) -> np.ndarray:
        """Ensemble mortality: cumulative hazard summed over the time grid."""
        X = self._check(X)
        acc = np.zeros(len(X))
        for i, tree in enumerate(self.trees):
            _, _, total = self._leaf_tables(i)
            acc += total[tree.apply(X)]
        return acc / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "schema_hash": self.schema_hash,
            "feature_names": list(self.feature_names),
            # n_jobs is a runtime choice and does not affect the fitted trees
            "params": {k: v for k, v in asdict(self.params).items() if k != "n_jobs"},
            "time_grid": self.time_grid.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }


def fit_forest(X, time, event, params: ForestParams = ForestParams(), feature_names=None) -> SurvivalForestModel:
    X = np.asarray(X, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event, dtype=bool)
    if X.ndim != 2 or len(X) != len(time) or len(time) != len(event):
        raise ValueError("X, time and event must align")
    if np.isnan(X).any():
        raise ValueError("X contains NaN; encode missing values first")
    grid = np.unique(time[event])
    if len(grid) < 2:
        raise InsufficientEvents(f"need >= 2 distinct event times, got {len(grid)}")
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    if params.n_jobs == 1:
        trees = [grow_tree(X, time, event, params, s) for s in seeds]
    else:
        trees = Parallel(n_jobs=params.n_jobs)(delayed(grow_tree)(X, time, event, params, s) for s in seeds)
    return SurvivalForestModel(trees, params, names, grid)


def serialize_model(model: SurvivalForestModel) -> bytes:
    raw = json.dumps(model.to_dict(), separators=(",", ":")).encode("utf-8")
    return gzip.compress(raw, mtime=0)


def deserialize_model(data: bytes, expected_features: Sequence[str] | None = None) -> SurvivalForestModel:
    try:
        d = json.loads(gzip.decompress(data))
    except (OSError, ValueError) as exc:
        raise VersionMismatch(f"not a model file: {exc}") from None
    if d.get("format") != FORMAT:
        raise VersionMismatch(f"unknown model format {d.get('format')!r}")
    if d.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"model version {d.get('version')} != supported {FORMAT_VERSION}")
    if schema_hash(d["feature_names"]) != d["schema_hash"]:
        raise SchemaHashMismatch("stored schema hash does not match stored feature names")
    if expected_features is not None and schema_hash(expected_features) != d["schema_hash"]:
        raise SchemaHashMismatch("model was trained on a different feature schema")
    return SurvivalForestModel(
        [SurvivalTree.from_dict(t) for t in d["trees"]],
        ForestParams(**d["params"]),
        d["feature_names"],
        np.asarray(d["time_grid"], dtype=float),
        d["schema_hash"],
    )

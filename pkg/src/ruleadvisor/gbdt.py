"""Small gradient-boosted tree classifier (logistic loss, second-order leaf values).

Features are quantile-binned once (at most ``max_bins`` bins per column) so
split search is a histogram scan. Trees are depth-limited and stored as flat
node lists, which keeps JSON serialisation trivial and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _bin_edges(X: np.ndarray, max_bins: int) -> list[np.ndarray]:
    edges = []
    for j in range(X.shape[1]):
        uniq = np.unique(X[:, j])
        if len(uniq) <= max_bins:
            cuts = (uniq[:-1] + uniq[1:]) / 2.0
        else:
            qs = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1])
            cuts = np.unique(qs)
        edges.append(cuts)
    return edges


def _apply_bins(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    out = np.empty(X.shape, dtype=np.int32)
    for j, cuts in enumerate(edges):
        # bin b holds values in (cuts[b-1], cuts[b]]
        out[:, j] = np.searchsorted(cuts, X[:, j], side="left")
    return out


@dataclass
class Tree:
    # parallel arrays; feature == -1 marks a leaf
    feature: list
    threshold: list
    left: list
    right: list
    value: list

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        node = np.zeros(len(X), dtype=int)
        active = np.ones(len(X), dtype=bool)
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold, dtype=float)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        val = np.asarray(self.value, dtype=float)
        while active.any():
            idx = np.flatnonzero(active)
            f = feat[node[idx]]
            leaf = f < 0
            out[idx[leaf]] = val[node[idx[leaf]]]
            active[idx[leaf]] = False
            go = idx[~leaf]
            if len(go) == 0:
                break
            n_go = node[go]
            x = X[go, feat[n_go]]
            node[go] = np.where(x <= thr[n_go], left[n_go], right[n_go])
        return out

    def to_dict(self):
        return {"feature": list(map(int, self.feature)), "threshold": list(map(float, self.threshold)),
                "left": list(map(int, self.left)), "right": list(map(int, self.right)),
                "value": list(map(float, self.value))}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["feature"], doc["threshold"], doc["left"], doc["right"], doc["value"])


def _grow(Xb, edges, g, h, depth, reg_lambda, min_child_weight, gamma):
    tree = Tree([], [], [], [], [])

    def new_node():
        tree.feature.append(-1)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.threshold.append(0.0)
        tree.value.append(0.0)
        return len(tree.feature) - 1

    def build(idx, d):
        node = new_node()
        G, H = g[idx].sum(), h[idx].sum()
        tree.value[node] = float(-G / (H + reg_lambda))
        if d >= depth or len(idx) < 2:
            return node
        parent = G * G / (H + reg_lambda)
        best = (-np.inf, -1, -1)
        for j, cuts in enumerate(edges):
            if len(cuts) == 0:
                continue
            nb = len(cuts) + 1
            gh = np.bincount(Xb[idx, j], weights=g[idx], minlength=nb)
            hh = np.bincount(Xb[idx, j], weights=h[idx], minlength=nb)
            gl, hl = np.cumsum(gh)[:-1], np.cumsum(hh)[:-1]
            gr, hr = G - gl, H - hl
            ok = (hl >= min_child_weight) & (hr >= min_child_weight)
            if not ok.any():
                continue
            gain = gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent
            gain = np.where(ok, gain, -np.inf)
            b = int(np.argmax(gain))
            # strict improvement keeps the first (lowest) feature on ties
            if gain[b] > best[0] + 1e-12:
                best = (float(gain[b]), j, b)
        gain, j, b = best
        # zero-gain splits are allowed so that symmetric problems (XOR) can be learned
        if j < 0 or gain < 2.0 * gamma - 1e-9:
            return node
        go_left = Xb[idx, j] <= b
        tree.feature[node] = j
        tree.threshold[node] = float(edges[j][b])
        tree.left[node] = build(idx[go_left], d + 1)
        tree.right[node] = build(idx[~go_left], d + 1)
        return node

    build(np.arange(len(g)), 0)
    return tree


class BoostedTrees:
    """Binary classifier: additive depth-limited regression trees on the logit scale."""

    def __init__(self, n_estimators=200, max_depth=3, learning_rate=0.1, reg_lambda=1.0,
                 min_child_weight=1.0, gamma=0.0, max_bins=64, early_stopping_rounds=20,
                 validation_fraction=0.2, seed=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.gamma = gamma
        self.max_bins = max_bins
        self.early_stopping_rounds = early_stopping_rounds
        self.validation_fraction = validation_fraction
        self.seed = seed
        self.trees: list[Tree] = []
        self.base_score = 0.0
        self.best_iteration = None

    def get_params(self):
        return {k: getattr(self, k) for k in (
            "n_estimators", "max_depth", "learning_rate", "reg_lambda", "min_child_weight",
            "gamma", "max_bins", "early_stopping_rounds", "validation_fraction", "seed")}

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(y)
        use_es = self.early_stopping_rounds and self.validation_fraction > 0 and n >= 20
        if use_es:
            perm = np.random.default_rng(self.seed).permutation(n)
            n_val = max(1, int(round(self.validation_fraction * n)))
            val, tr = np.sort(perm[:n_val]), np.sort(perm[n_val:])
            if len(np.unique(y[tr])) < 2:
                use_es = False
        if not use_es:
            tr, val = np.arange(n), None
        Xt, yt = X[tr], y[tr]
        edges = _bin_edges(Xt, self.max_bins)
        Xb = _apply_bins(Xt, edges)
        prior = np.clip(yt.mean(), 1e-6, 1 - 1e-6)
        self.base_score = float(np.log(prior / (1 - prior)))
        raw = np.full(len(yt), self.base_score)
        raw_val = np.full(len(val), self.base_score) if val is not None else None
        self.trees = []
        best_loss, best_iter, since = np.inf, 0, 0
        for it in range(self.n_estimators):
            p = _sigmoid(raw)
            g, h = p - yt, np.maximum(p * (1 - p), 1e-16)
            tree = _grow(Xb, edges, g, h, self.max_depth, self.reg_lambda,
                         self.min_child_weight, self.gamma)
            tree.value = [v * self.learning_rate for v in tree.value]
            self.trees.append(tree)
            raw += tree.predict(Xt)
            if val is not None:
                raw_val += tree.predict(X[val])
                loss = _log_loss(y[val], _sigmoid(raw_val))
                if loss < best_loss - 1e-12:
                    best_loss, best_iter, since = loss, it + 1, 0
                else:
                    since += 1
                    if since >= self.early_stopping_rounds:
                        break
        if val is not None:
            self.trees = self.trees[:max(best_iter, 1)]
        self.best_iteration = len(self.trees)
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        raw = np.full(len(X), self.base_score)
        for t in self.trees:
            raw += t.predict(X)
        return raw

    def predict_proba(self, X):
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def to_dict(self):
        return {"params": self.get_params(), "base_score": self.base_score,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, doc):
        m = cls(**doc["params"])
        m.base_score = doc["base_score"]
        m.trees = [Tree.from_dict(t) for t in doc["trees"]]
        m.best_iteration = len(m.trees)
        return m


def _log_loss(y, p):
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))

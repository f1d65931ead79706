"""From-scratch tree ensembles: random forest and softmax gradient boosting.

Both expose the sklearn estimator API (fit / predict / get_params) so they
compose with the wider ecosystem, but the tree logic is implemented here.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

__all__ = [
    "RandomForest",
    "GradientBoosting",
    "Metrics",
    "evaluate",
    "save_model",
    "load_model",
    "train_validate",
]

MODEL_FORMAT_VERSION = 1


def _check_X(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    return X


def _check_X_y(X, y):
    X = _check_X(X)
    y = np.asarray(y, dtype=object).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y length mismatch")
    return X, y


# ---------------------------------------------------------------------------
# trees


def _best_split(X, target, candidates, min_leaf):
    """Best (feature, threshold) by summed per-child SSE of `target` columns.

    With one-hot targets this is an affine transform of weighted Gini, so
    the same search serves classification and regression trees. Returns
    (feature, threshold, score) or None. Ties keep the first candidate
    feature and the lowest threshold.
    """
    n = X.shape[0]
    best = None
    for f in candidates:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ts = target[order]
        csum = np.cumsum(ts, axis=0)
        total = csum[-1]
        # split after position i (left size i+1); valid where value changes
        left_n = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        valid &= (left_n >= min_leaf) & (n - left_n >= min_leaf)
        if not valid.any():
            continue
        left_sum = csum[:-1]
        right_sum = total - left_sum
        left_sse = -np.sum(left_sum**2, axis=1) / left_n
        right_sse = -np.sum(right_sum**2, axis=1) / (n - left_n)
        score = left_sse + right_sse
        score[~valid] = np.inf
        i = int(np.argmin(score))
        if best is None or score[i] < best[2] - 1e-12:
            thr = (xs[i] + xs[i + 1]) / 2.0
            best = (f, float(thr), float(score[i]))
    return best


def _grow(X, target, depth, max_depth, min_leaf, n_candidates, rng, leaf_value):
    node_value = leaf_value(target)
    if depth >= max_depth or X.shape[0] < 2 * min_leaf or np.all(target == target[0]):
        return {"value": node_value}
    n_features = X.shape[1]
    if n_candidates is None or n_candidates >= n_features:
        candidates = range(n_features)
    else:
        candidates = sorted(rng.choice(n_features, size=n_candidates, replace=False).tolist())
    split = _best_split(X, target, candidates, min_leaf)
    if split is None:
        return {"value": node_value}
    f, thr, _ = split
    mask = X[:, f] <= thr
    if not mask.any() or mask.all():
        return {"value": node_value}
    return {
        "feature": int(f),
        "threshold": thr,
        "left": _grow(X[mask], target[mask], depth + 1, max_depth, min_leaf, n_candidates, rng, leaf_value),
        "right": _grow(X[~mask], target[~mask], depth + 1, max_depth, min_leaf, n_candidates, rng, leaf_value),
    }


def _tree_apply(node, x):
    while "feature" in node:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


def _tree_predict(node, X):
    return np.array([_tree_apply(node, x) for x in X])


# ---------------------------------------------------------------------------
# estimators


class RandomForest(BaseEstimator, ClassifierMixin):
    """Bootstrap-sampled Gini-split forest with majority-vote prediction.

    Vote ties break toward the earlier class in `classes_` order.
    """

    def __init__(self, n_trees=100, max_depth=8, n_feature_candidates=None,
                 min_samples_leaf=1, random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.n_feature_candidates = n_feature_candidates
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, X, y):
        X, y = _check_X_y(X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        codes = np.searchsorted(self.classes_, y.astype(str))
        onehot = np.eye(len(self.classes_))[codes]
        n_cand = self.n_feature_candidates
        if n_cand is None:
            n_cand = max(1, math.ceil(math.sqrt(X.shape[1])))
        rng = np.random.default_rng(self.random_state)
        self.trees_ = []
        for _ in range(self.n_trees):
            idx = rng.integers(X.shape[0], size=X.shape[0])
            leaf = lambda t: t.sum(axis=0) / t.shape[0]
            self.trees_.append(
                _grow(X[idx], onehot[idx], 0, self.max_depth, self.min_samples_leaf,
                      n_cand, rng, leaf)
            )
        return self

    def _votes(self, X):
        X = _check_X(X)
        votes = np.zeros((X.shape[0], len(self.classes_)))
        for tree in self.trees_:
            probs = _tree_predict(tree, X)
            votes[np.arange(X.shape[0]), probs.argmax(axis=1)] += 1
        return votes

    def predict(self, X):
        return self.classes_[self._votes(X).argmax(axis=1)]


class GradientBoosting(BaseEstimator, ClassifierMixin):
    """Softmax log-loss boosting: one squared-error gradient tree per class per round."""

    def __init__(self, n_rounds=100, learning_rate=0.1, max_depth=3,
                 min_samples_leaf=1, random_state=0):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def fit(self, X, y):
        X, y = _check_X_y(X, y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least 2 classes")
        codes = np.searchsorted(self.classes_, y.astype(str))
        k = len(self.classes_)
        onehot = np.eye(k)[codes]
        priors = onehot.mean(axis=0)
        self.base_scores_ = np.log(np.maximum(priors, 1e-12))
        scores = np.tile(self.base_scores_, (X.shape[0], 1))
        rng = np.random.default_rng(self.random_state)
        self.trees_ = []  # rounds x classes
        leaf = lambda t: t.mean(axis=0)
        for _ in range(self.n_rounds):
            e = np.exp(scores - scores.max(axis=1, keepdims=True))
            p = e / e.sum(axis=1, keepdims=True)
            round_trees = []
            for c in range(k):
                residual = (onehot[:, c] - p[:, c]).reshape(-1, 1)
                tree = _grow(X, residual, 0, self.max_depth, self.min_samples_leaf,
                             None, rng, leaf)
                round_trees.append(tree)
                scores[:, c] += self.learning_rate * _tree_predict(tree, X)[:, 0]
            self.trees_.append(round_trees)
        return self

    def decision_scores(self, X):
        X = _check_X(X)
        scores = np.tile(self.base_scores_, (X.shape[0], 1))
        for round_trees in self.trees_:
            for c, tree in enumerate(round_trees):
                scores[:, c] += self.learning_rate * _tree_predict(tree, X)[:, 0]
        return scores

    def predict(self, X):
        return self.classes_[self.decision_scores(X).argmax(axis=1)]


# ---------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: dict  # (true, predicted) -> count

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.macro_precision,
            "recall": self.macro_recall,
            "f1": self.macro_f1,
            "confusion": {f"{t}->{p}": c for (t, p), c in self.confusion.items()},
        }


def evaluate(y_true, y_pred, classes=None):
    """Accuracy plus macro precision/recall/F1; zero divisions score 0."""
    y_true = np.asarray(y_true, dtype=object).ravel()
    y_pred = np.asarray(y_pred, dtype=object).ravel()
    if y_true.shape != y_pred.shape or y_true.size == 0:
        raise ValueError("need equal-length, nonempty label arrays")
    if classes is None:
        classes = sorted(set(y_true) | set(y_pred))
    confusion = {}
    for t, p in zip(y_true, y_pred):
        confusion[(t, p)] = confusion.get((t, p), 0) + 1
    precisions, recalls, f1s = [], [], []
    for c in classes:
        tp = confusion.get((c, c), 0)
        fp = sum(v for (t, p), v in confusion.items() if p == c and t != c)
        fn = sum(v for (t, p), v in confusion.items() if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    accuracy = float((y_true == y_pred).mean())
    n = len(classes)
    return Metrics(accuracy, sum(precisions) / n, sum(recalls) / n, sum(f1s) / n, confusion)


def train_validate(model, X, y, val_fraction=0.2, seed=0):
    """Fit on a seeded (1 - val_fraction) part, return accuracy on the rest."""
    X, y = _check_X_y(X, y)
    rng = np.random.default_rng(seed)
    order = rng.permutation(X.shape[0])
    n_val = max(1, int(round(val_fraction * X.shape[0])))
    val_idx = order[:n_val]
    fit_idx = order[n_val:]
    if len(set(y[fit_idx])) < 2:
        fit_idx = order  # tiny or skewed split: fall back to fitting on everything
    model.fit(X[fit_idx], y[fit_idx])
    accuracy = float((model.predict(X[val_idx]) == y[val_idx]).mean())
    return model, accuracy


# ---------------------------------------------------------------------------
# serialization (versioned JSON layout)


def _jsonify(node):
    if "feature" in node:
        return {
            "feature": node["feature"],
            "threshold": node["threshold"],
            "left": _jsonify(node["left"]),
            "right": _jsonify(node["right"]),
        }
    return {"value": np.asarray(node["value"]).tolist()}


def _unjsonify(node):
    if "feature" in node:
        return {
            "feature": node["feature"],
            "threshold": node["threshold"],
            "left": _unjsonify(node["left"]),
            "right": _unjsonify(node["right"]),
        }
    return {"value": np.asarray(node["value"], dtype=np.float64)}


def save_model(model, path, validation_accuracy=None):
    if isinstance(model, RandomForest):
        doc = {
            "version": MODEL_FORMAT_VERSION,
            "kind": "random_forest",
            "params": model.get_params(),
            "classes": model.classes_.tolist(),
            "trees": [_jsonify(t) for t in model.trees_],
        }
    elif isinstance(model, GradientBoosting):
        doc = {
            "version": MODEL_FORMAT_VERSION,
            "kind": "gradient_boost",
            "params": model.get_params(),
            "classes": model.classes_.tolist(),
            "base_scores": model.base_scores_.tolist(),
            "trees": [[_jsonify(t) for t in row] for row in model.trees_],
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if validation_accuracy is not None:
        doc["validation_accuracy"] = validation_accuracy
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('version')}")
    if doc["kind"] == "random_forest":
        model = RandomForest(**doc["params"])
        model.classes_ = np.array(doc["classes"], dtype=object)
        model.trees_ = [_unjsonify(t) for t in doc["trees"]]
    elif doc["kind"] == "gradient_boost":
        model = GradientBoosting(**doc["params"])
        model.classes_ = np.array(doc["classes"], dtype=object)
        model.base_scores_ = np.array(doc["base_scores"], dtype=np.float64)
        model.trees_ = [[_unjsonify(t) for t in row] for row in doc["trees"]]
    else:
        raise ValueError(f"unknown model kind {doc['kind']!r}")
    return model, doc.get("validation_accuracy")

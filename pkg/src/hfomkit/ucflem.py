"""Dual-phase, dual-layer agreement-cascade classifier (UC-FLEM).

Each phase trains a random forest and a gradient booster, routes the test
samples through the better model per layer, resolves the samples both
layers agree on, and forwards disagreements to the next phase. Samples
still unresolved after phase 2 fall to the model with the best average
layer accuracy.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .balance import balance_dataset
from .dataset import Dataset
from .learners import GradientBoosting, Metrics, RandomForest, evaluate, train_validate

__all__ = [
    "UcflemConfig",
    "PhaseResult",
    "assign_layer_models",
    "split_agreement",
    "run_phase",
    "defuzzify",
    "UcflemClassifier",
    "classify_dataset",
]

VALIDATION_FRACTION = 0.2


@dataclass
class UcflemConfig:
    split_ratio: float = 0.7
    seed: int = 0
    balance: bool = True
    rf_params: dict = field(default_factory=dict)
    gb_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError(f"split ratio must be in (0, 1), got {self.split_ratio}")


@dataclass
class PhaseResult:
    """Per-phase outcome over the phase's test-sample indices."""

    resolved: dict          # sample index -> agreed label
    tau: list               # unresolved sample indices
    a1: float               # validation accuracy of psi1 (random forest)
    a2: float               # validation accuracy of psi2 (gradient boost)
    layer1_kind: str
    layer2_kind: str


def assign_layer_models(a1, a2, psi1, psi2):
    """Layer-1 gets the more accurate model; ties send psi2 to both layers."""
    lam1 = psi1 if a1 > a2 else psi2
    lam2 = psi1 if a1 < a2 else psi2
    return lam1, lam2


def split_agreement(l1, l2):
    """Partition samples into agreed (index -> label) and disagreeing indices."""
    l1 = np.asarray(l1, dtype=object)
    l2 = np.asarray(l2, dtype=object)
    if l1.shape != l2.shape:
        raise ValueError("layer predictions cover different sample sets")
    resolved = {i: l1[i] for i in range(len(l1)) if l1[i] == l2[i]}
    tau = [i for i in range(len(l1)) if l1[i] != l2[i]]
    return resolved, tau


def run_phase(train, test_X, cfg, seed):
    """Train both learners, layer the predictions, and split by agreement.

    `train` is a Dataset (already balanced when requested); `test_X` is the
    phase's test feature matrix. Models are fitted on 80% of the training
    data and validated on the held-out 20%.
    """
    psi1, a1 = train_validate(
        RandomForest(random_state=seed, **cfg.rf_params),
        train.X, train.y, VALIDATION_FRACTION, seed,
    )
    psi2, a2 = train_validate(
        GradientBoosting(random_state=seed, **cfg.gb_params),
        train.X, train.y, VALIDATION_FRACTION, seed,
    )
    lam1, lam2 = assign_layer_models(a1, a2, psi1, psi2)
    test_X = np.asarray(test_X, dtype=np.float64).reshape(-1, train.X.shape[1])
    if test_X.shape[0] == 0:
        return PhaseResult({}, [], a1, a2, _kind(lam1), _kind(lam2)), psi1, psi2
    l1 = lam1.predict(test_X)
    # layer 2 re-predicts the three label fragments from layer 1
    l2 = np.empty(test_X.shape[0], dtype=object)
    for label in np.unique(l1):
        mask = l1 == label
        l2[mask] = lam2.predict(test_X[mask])
    resolved, tau = split_agreement(l1, l2)
    return PhaseResult(resolved, tau, a1, a2, _kind(lam1), _kind(lam2)), psi1, psi2


def _kind(model):
    return "random_forest" if isinstance(model, RandomForest) else "gradient_boost"


def defuzzify(phase1, phase2, accuracy_table, psi1, psi2, tau2_X):
    """Label still-unresolved samples with the best average-accuracy model.

    `accuracy_table` maps model name to its per-phase accuracies; ties pick
    psi2 (the gradient booster), mirroring the layer-assignment asymmetry.
    Returns (final labels for tau2 samples, winning model name).
    """
    mean1 = float(np.mean(accuracy_table["psi1"]))
    mean2 = float(np.mean(accuracy_table["psi2"]))
    winner = psi1 if mean1 > mean2 else psi2
    name = "psi1" if mean1 > mean2 else "psi2"
    tau2_X = np.asarray(tau2_X, dtype=np.float64)
    labels = winner.predict(tau2_X) if tau2_X.size else np.array([], dtype=object)
    return labels, name


class UcflemClassifier(BaseEstimator, ClassifierMixin):
    """Estimator wrapper over the dual-phase cascade.

    fit() optionally balances the training data once (both phases share
    it) and trains the phase-2 learners with a derived seed so the phases
    are not identical copies.
    """

    def __init__(self, balance=True, seed=0, rf_params=None, gb_params=None):
        self.balance = balance
        self.seed = seed
        self.rf_params = rf_params
        self.gb_params = gb_params

    def _cfg(self):
        return UcflemConfig(
            seed=self.seed,
            balance=self.balance,
            rf_params=self.rf_params or {},
            gb_params=self.gb_params or {},
        )

    def fit(self, X, y):
        train = Dataset(np.asarray(X, dtype=np.float64), np.asarray(y, dtype=object))
        self.balance_report_ = None
        if self.balance:
            train, self.balance_report_ = balance_dataset(train, seed=self.seed)
        self.train_ = train
        self.classes_ = np.array(train.classes(), dtype=object)
        return self

    def predict(self, X):
        labels, _, _ = self.predict_detail(X)
        return labels

    def predict_detail(self, X):
        """Full cascade: returns (labels, (phase1, phase2), defuzzifier name)."""
        cfg = self._cfg()
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.train_.X.shape[1])
        phase1, p1_psi1, p1_psi2 = run_phase(self.train_, X, cfg, cfg.seed)
        tau1_X = X[phase1.tau]
        phase2, p2_psi1, p2_psi2 = run_phase(self.train_, tau1_X, cfg, cfg.seed + 1)
        final = np.empty(X.shape[0], dtype=object)
        for i, label in phase1.resolved.items():
            final[i] = label
        for j, label in phase2.resolved.items():
            final[phase1.tau[j]] = label
        tau2_global = [phase1.tau[j] for j in phase2.tau]
        table = {"psi1": (phase1.a1, phase2.a1), "psi2": (phase1.a2, phase2.a2)}
        # the winning kind's concrete instance comes from phase 2 (most recent fit)
        fallback, name = defuzzify(phase1, phase2, table, p2_psi1, p2_psi2, X[tau2_global])
        for idx, label in zip(tau2_global, fallback):
            final[idx] = label
        self.last_phases_ = (phase1, phase2)
        self.last_defuzzifier_ = name
        return final, (phase1, phase2), name


def classify_dataset(data, cfg):
    """Seeded 70:30 split, dual-phase classification, and evaluation.

    Returns (final labels over the test split, Metrics, (phase1, phase2),
    test indices into `data`).
    """
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(data))
    n_train = int(round(cfg.split_ratio * len(data)))
    train_idx, test_idx = order[:n_train], order[n_train:]
    train = data.subset(train_idx)
    test = data.subset(test_idx)
    clf = UcflemClassifier(
        balance=cfg.balance, seed=cfg.seed,
        rf_params=cfg.rf_params, gb_params=cfg.gb_params,
    ).fit(train.X, train.y)
    labels, phases, _ = clf.predict_detail(test.X)
    metrics = evaluate(test.y, labels, classes=data.classes())
    return labels, metrics, phases, test_idx

"""Eigenvector-space oversampling with a KL-divergence acceptance guard.

Synthetic minority samples are generated along the dominant eigendirection
of the class medoid's neighbourhood and kept only when they preserve the
identity of the maximally divergent class and duplicate no existing row.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .features import FEATURE_NAMES

__all__ = [
    "DegenerateClassError",
    "class_medoid",
    "build_neighbor_matrix",
    "dominant_eigendirection",
    "generate_candidate",
    "histogram_distribution",
    "kl_divergence",
    "kl_argmax_class",
    "kl_guard",
    "balance_dataset",
    "smote_baseline",
]

N_BINS = 16
SMOOTHING = 1e-6
NEIGHBORHOOD = 5  # closest points joining the medoid in the 6x6 matrix
# indices of feature fields clamped at zero in generated candidates
# (all but theta_avg, which is signed)
_NONNEG = tuple(range(len(FEATURE_NAMES) - 1))


class DegenerateClassError(ValueError):
    """All neighbourhood rows identical: no eigendirection to sample along."""


def class_medoid(class_X):
    """Member minimizing the sum of Euclidean distances to all others.

    Ties break toward the lowest index. Returns (index, row).
    """
    class_X = np.asarray(class_X, dtype=np.float64)
    if class_X.shape[0] == 0:
        raise ValueError("empty class")
    d = np.linalg.norm(class_X[:, None, :] - class_X[None, :, :], axis=2)
    idx = int(np.argmin(d.sum(axis=1)))
    return idx, class_X[idx].copy()


def build_neighbor_matrix(class_X, medoid_idx):
    """6x6 matrix: the medoid's five closest class members, then the medoid.

    Distance ties break toward the lowest index; classes smaller than six
    pad the missing rows with medoid repeats.
    """
    class_X = np.asarray(class_X, dtype=np.float64)
    medoid = class_X[medoid_idx]
    others = [i for i in range(class_X.shape[0]) if i != medoid_idx]
    dist = np.linalg.norm(class_X[others] - medoid, axis=1)
    order = np.argsort(dist, kind="stable")
    chosen = [others[i] for i in order[:NEIGHBORHOOD]]
    rows = [class_X[i] for i in chosen]
    while len(rows) < NEIGHBORHOOD:
        rows.append(medoid)
    rows.append(medoid)
    return np.array(rows, dtype=np.float64)


def dominant_eigendirection(matrix):
    """Unit eigenvector and eigenvalue of the rows' largest covariance mode.

    The sign is fixed so the first nonzero entry is positive.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    cov = np.cov(matrix, rowvar=False, ddof=1)
    if not np.any(np.abs(cov) > 1e-24):
        raise DegenerateClassError("all neighbourhood rows identical")
    vals, vecs = np.linalg.eigh(cov)
    direction = vecs[:, -1]
    nz = np.nonzero(np.abs(direction) > 1e-12)[0]
    if nz.size and direction[nz[0]] < 0:
        direction = -direction
    return direction, float(max(vals[-1], 0.0))


def generate_candidate(matrix, step=1.0):
    """Medoid displaced by step * sqrt(eigenvalue) along the dominant direction."""
    direction, magnitude = dominant_eigendirection(matrix)
    candidate = matrix[-1] + step * np.sqrt(magnitude) * direction
    for i in _NONNEG:
        candidate[i] = max(candidate[i], 0.0)
    return candidate


def _bin_edges(X):
    X = np.asarray(X, dtype=np.float64)
    edges = []
    for f in range(X.shape[1]):
        lo = X[:, f].min()
        hi = X[:, f].max()
        if hi <= lo:
            hi = lo + 1.0
        edges.append(np.linspace(lo, hi, N_BINS + 1))
    return edges


def histogram_distribution(X, edges):
    """Concatenation of the per-feature 16-bin normalized histograms."""
    X = np.asarray(X, dtype=np.float64)
    parts = []
    for f, e in enumerate(edges):
        counts = np.histogram(X[:, f], bins=e)[0].astype(np.float64) + SMOOTHING
        parts.append(counts / counts.sum())
    return np.concatenate(parts)


def kl_divergence(p, q):
    """Sum over bins of p * ln(p / q); requires identical binning."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError("mismatched binning")
    return float(np.sum(p * np.log(p / q)))


def kl_argmax_class(dataset):
    """Label of the class most divergent from the whole-dataset distribution.

    Binning spans the dataset's own per-feature range; ties break toward
    the earlier label in canonical order.
    """
    edges = _bin_edges(dataset.X)
    q = histogram_distribution(dataset.X, edges)
    best_label, best_kl = None, -np.inf
    for label in dataset.classes():
        p = histogram_distribution(dataset.X[dataset.y == label], edges)
        kl = kl_divergence(p, q)
        if kl > best_kl:
            best_label, best_kl = label, kl
    return best_label


def kl_guard(candidate_x, candidate_label, original, current):
    """Accept a candidate iff it is no duplicate and keeps the argmax class.

    `original` is the unbalanced dataset (fixes the reference argmax);
    `current` is the dataset built so far. Returns (accepted, reason) with
    reason in {None, "duplicate", "argmax-shift"}.
    """
    candidate_x = np.asarray(candidate_x, dtype=np.float64)
    if np.any(np.all(current.X == candidate_x, axis=1)):
        return False, "duplicate"
    kappa = kl_argmax_class(original)
    kappa_o = kl_argmax_class(current.with_row(candidate_x, candidate_label, "_probe"))
    if kappa_o != kappa:
        return False, "argmax-shift"
    return True, None


@dataclass
class BalanceReport:
    log: list  # rows of (attempt, class, step, decision, reason)
    warnings: list

    def write_log(self, path):
        with open(path, "w") as fh:
            fh.write("attempt,class,step,decision,reason\n")
            for attempt, label, step, decision, reason in self.log:
                fh.write(f"{attempt},{label},{step!r},{decision},{reason or ''}\n")


def balance_dataset(dataset, seed=0, max_attempts=50):
    """Oversample every minority class up to the majority count.

    One synthetic sample per minority class per sweep; the medoid
    neighbourhood is rebuilt from originals plus accepted synthetics each
    time. Rejections retry with a seeded step jitter, up to `max_attempts`
    per needed sample. Returns (balanced Dataset, BalanceReport).
    """
    counts = dataset.class_counts()
    if len(counts) < 2:
        raise ValueError("balancing needs at least 2 classes")
    rng = np.random.default_rng(seed)
    majority = max(counts.values())
    out = dataset.copy()
    log = []
    warnings = []
    small = [label for label, c in counts.items() if c < 6]
    if small:
        warnings.append(
            f"classes below 6 members pad the neighbourhood with medoid repeats: {small}"
        )
    stuck = set()
    synth_serial = 0

    def class_scale(label):
        # dominant eigenvalue of the original class neighbourhood
        class_X = dataset.X[dataset.y == label]
        matrix = build_neighbor_matrix(class_X, class_medoid(class_X)[0])
        try:
            return dominant_eigendirection(matrix)[1]
        except DegenerateClassError:
            return 0.0

    scales = {label: class_scale(label) for label in dataset.classes()}

    def make_candidate(label, class_X, step):
        matrix = build_neighbor_matrix(class_X, class_medoid(class_X)[0])
        try:
            magnitude = dominant_eigendirection(matrix)[1]
        except DegenerateClassError:
            magnitude = 0.0
        if magnitude < 1e-10 * scales[label]:
            # synthetic points collapsed the neighbourhood; fall back to the
            # original class members for a usable spread
            orig_X = dataset.X[dataset.y == label]
            matrix = build_neighbor_matrix(orig_X, class_medoid(orig_X)[0])
        return generate_candidate(matrix, step=step)

    while True:
        counts = out.class_counts()
        pending = [
            label
            for label in dataset.classes()
            if counts[label] < majority and label not in stuck
        ]
        if not pending:
            break
        for label in pending:
            class_X = out.X[out.y == label]
            accepted = False
            step = 1.0
            for attempt in range(1, max_attempts + 1):
                try:
                    candidate = make_candidate(label, class_X, step)
                except DegenerateClassError:
                    log.append((attempt, label, step, "reject", "degenerate"))
                    step = float(rng.uniform(0.25, 1.75))
                    continue
                ok, reason = kl_guard(candidate, label, dataset, out)
                if ok:
                    log.append((attempt, label, step, "accept", None))
                    out = out.with_row(candidate, label, f"synth-{label}-{synth_serial}")
                    synth_serial += 1
                    accepted = True
                    break
                log.append((attempt, label, step, "reject", reason))
                step = float(rng.uniform(0.25, 1.75))
            if not accepted:
                stuck.add(label)
                warnings.append(
                    f"class {label!r}: {max_attempts} attempts exhausted; partial balance"
                )
    return out, BalanceReport(log, warnings)


def smote_baseline(dataset, k=5, seed=0):
    """Classic SMOTE oversampling to the majority count (comparison baseline)."""
    counts = dataset.class_counts()
    majority = max(counts.values())
    rng = np.random.default_rng(seed)
    out = dataset.copy()
    serial = 0
    for label in dataset.classes():
        class_X = dataset.X[dataset.y == label]
        need = majority - counts[label]
        if need == 0:
            continue
        if class_X.shape[0] < k + 1:
            raise ValueError(f"class {label!r} needs at least {k + 1} members for k={k}")
        d = np.linalg.norm(class_X[:, None, :] - class_X[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        neighbors = np.argsort(d, axis=1, kind="stable")[:, :k]
        for _ in range(need):
            i = int(rng.integers(class_X.shape[0]))
            j = int(neighbors[i][rng.integers(k)])
            gap = rng.uniform()
            new = class_X[i] + gap * (class_X[j] - class_X[i])
            out = out.with_row(new, label, f"smote-{label}-{serial}")
            serial += 1
    return out

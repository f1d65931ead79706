"""Labeled feature datasets and their CSV representation."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .features import FEATURE_NAMES, LABELS, FeatureVector, LabeledSample

__all__ = ["Dataset", "read_feature_csv", "write_feature_csv"]

CSV_HEADER = ("source_id",) + FEATURE_NAMES + ("label",)


@dataclass
class Dataset:
    """Ordered collection of labeled samples.

    X holds one row of 6 features per sample; y holds the class labels;
    ids holds opaque per-sample identifiers.
    """

    X: np.ndarray
    y: np.ndarray
    ids: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
        self.y = np.asarray(self.y, dtype=object)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y length mismatch")
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.y))]
        if len(self.ids) != len(self.y):
            raise ValueError("ids and y length mismatch")
        unknown = set(self.y) - set(LABELS)
        if unknown:
            raise ValueError(f"unknown labels: {sorted(unknown)}")

    def __len__(self):
        return self.X.shape[0]

    @classmethod
    def from_samples(cls, samples):
        X = np.array([s.features.as_array() for s in samples], dtype=np.float64)
        y = np.array([s.label for s in samples], dtype=object)
        return cls(X, y, [s.source_id for s in samples])

    def samples(self):
        return [
            LabeledSample(FeatureVector.from_array(self.X[i]), self.y[i], self.ids[i])
            for i in range(len(self))
        ]

    def class_counts(self):
        return {label: int((self.y == label).sum()) for label in LABELS if label in self.y}

    def classes(self):
        """Labels present, in canonical (dry, standard, wet) order."""
        return [label for label in LABELS if label in self.y]

    def subset(self, indices):
        indices = np.asarray(indices)
        return Dataset(self.X[indices], self.y[indices], [self.ids[i] for i in indices])

    def with_row(self, x, label, source_id):
        X = np.vstack([self.X, np.asarray(x, dtype=np.float64)])
        y = np.append(self.y, label)
        return Dataset(X, y, self.ids + [source_id])

    def copy(self):
        return Dataset(self.X.copy(), self.y.copy(), list(self.ids))


def write_feature_csv(dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i in range(len(dataset)):
            writer.writerow(
                [dataset.ids[i]] + [repr(float(v)) for v in dataset.X[i]] + [dataset.y[i]]
            )


def read_feature_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_HEADER:
            raise ValueError(f"bad feature CSV header {header}; expected {CSV_HEADER}")
        ids, rows, labels = [], [], []
        for row in reader:
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"bad feature CSV row: {row}")
            ids.append(row[0])
            rows.append([float(v) for v in row[1 : 1 + len(FEATURE_NAMES)]])
            labels.append(row[-1])
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=object), ids)

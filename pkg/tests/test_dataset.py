import numpy as np
import pytest

from hfomkit.dataset import CSV_HEADER, Dataset, read_feature_csv, write_feature_csv
from hfomkit.features import FeatureVector, LabeledSample


def small_dataset():
    X = np.array(
        [
            [1.0, 2.0, 3.0, 4.0, 5.0, -0.5],
            [6.0, 7.0, 8.0, 9.0, 10.0, 0.25],
            [0.1, 0.2, 0.3, 0.4, 0.5, 0.0],
        ]
    )
    y = np.array(["dry", "wet", "dry"], dtype=object)
    return Dataset(X, y, ["a", "b", "c"])


class TestDataset:
    def test_lengths(self):
        data = small_dataset()
        assert len(data) == 3
        assert data.class_counts() == {"dry": 2, "wet": 1}
        assert data.classes() == ["dry", "wet"]

    def test_default_ids(self):
        data = Dataset(np.zeros((2, 6)), np.array(["dry", "wet"], dtype=object))
        assert data.ids == ["0", "1"]

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError, match="unknown labels"):
            Dataset(np.zeros((1, 6)), np.array(["moist"], dtype=object))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 6)), np.array(["dry"], dtype=object))

    def test_subset_and_with_row(self):
        data = small_dataset()
        sub = data.subset([2, 0])
        assert sub.ids == ["c", "a"] and sub.y.tolist() == ["dry", "dry"]
        grown = data.with_row(np.ones(6), "standard", "d")
        assert len(grown) == 4 and grown.ids[-1] == "d"
        assert len(data) == 3  # original untouched

    def test_copy_independent(self):
        data = small_dataset()
        dup = data.copy()
        dup.X[0, 0] = 99.0
        assert data.X[0, 0] == 1.0

    def test_sample_roundtrip(self):
        data = small_dataset()
        again = Dataset.from_samples(data.samples())
        assert np.array_equal(again.X, data.X)
        assert again.y.tolist() == data.y.tolist()
        assert again.ids == data.ids

    def test_from_samples(self):
        s = LabeledSample(FeatureVector(*range(6)), "wet", "img7")
        data = Dataset.from_samples([s])
        assert data.X[0].tolist() == [0, 1, 2, 3, 4, 5]
        assert data.ids == ["img7"]


class TestCsv:
    def test_roundtrip_exact(self, tmp_path):
        data = small_dataset()
        path = tmp_path / "features.csv"
        write_feature_csv(data, path)
        again = read_feature_csv(path)
        assert np.array_equal(again.X, data.X)  # repr() keeps full precision
        assert again.y.tolist() == data.y.tolist()
        assert again.ids == data.ids

    def test_header_written(self, tmp_path):
        path = tmp_path / "features.csv"
        write_feature_csv(small_dataset(), path)
        first = path.read_text().splitlines()[0]
        assert tuple(first.split(",")) == CSV_HEADER

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope,nope\n")
        with pytest.raises(ValueError, match="header"):
            read_feature_csv(path)

    def test_bad_row_width(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(",".join(CSV_HEADER) + "\nx,1,2\n")
        with pytest.raises(ValueError, match="row"):
            read_feature_csv(path)

import numpy as np
import pytest

from ntklab.data import DataError, Dataset, load_csv, normalize_rows, save_csv, synthetic


class TestNormalizeRows:
    def test_three_four_five(self):
        out = normalize_rows(np.array([[3.0, 4.0]]))
        assert np.allclose(out, [[0.6, 0.8]])

    def test_already_unit(self):
        X = np.array([[1.0, 0.0], [0.0, -1.0]])
        assert np.array_equal(normalize_rows(X), X)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((20, 5)) * 10
        once = normalize_rows(X)
        assert np.allclose(normalize_rows(once), once, atol=1e-15)
        assert np.allclose(np.linalg.norm(once, axis=1), 1.0)

    def test_zero_row_rejected(self):
        with pytest.raises(DataError, match="zero norm"):
            normalize_rows(np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestDataset:
    def test_rejects_non_unit_rows(self):
        with pytest.raises(DataError, match="unit-norm"):
            Dataset(np.array([[3.0, 4.0]]), np.array([1.0]))

    def test_rejects_duplicates(self):
        X = np.array([[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(DataError, match="duplicate"):
            Dataset(X, np.array([1.0, -1.0]))

    def test_rejects_label_mismatch(self):
        with pytest.raises(DataError, match="labels"):
            Dataset(np.eye(3), np.array([1.0, -1.0]))

    def test_immutable(self):
        ds = synthetic(5, 3, 0)
        with pytest.raises(ValueError):
            ds.X[0, 0] = 99.0
        with pytest.raises(ValueError):
            ds.y[0] = 99.0

    def test_shape_properties(self):
        ds = synthetic(7, 4, 0)
        assert (ds.n, ds.d) == (7, 4)


class TestSynthetic:
    def test_deterministic(self):
        a, b = synthetic(10, 5, 3), synthetic(10, 5, 3)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_seed_changes_draw(self):
        a, b = synthetic(10, 5, 3), synthetic(10, 5, 4)
        assert not np.array_equal(a.X, b.X)

    def test_unit_norm_and_labels(self):
        ds = synthetic(40, 6, 1)
        assert np.allclose(np.linalg.norm(ds.X, axis=1), 1.0)
        assert set(np.unique(ds.y)) <= {-1.0, 1.0}

    def test_bad_sizes(self):
        with pytest.raises(DataError):
            synthetic(0, 5, 0)
        with pytest.raises(DataError):
            synthetic(5, 1, 0)


class TestCsvRoundTrip:
    def test_save_load_identity(self, tmp_path):
        ds = synthetic(15, 4, 7)
        p = tmp_path / "ds.csv"
        save_csv(ds, p)
        back = load_csv(p)
        # features are re-normalized on load; norms are already 1 up to
        # the last ulp, so the round trip is exact to float precision
        assert np.allclose(back.X, ds.X, atol=1e-15, rtol=0.0)
        assert np.array_equal(back.y, ds.y)

    def test_header_detection(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("f1,f2,label\n1,0,1\n0,1,-1\n")
        ds = load_csv(p)
        assert ds.n == 2 and np.array_equal(ds.y, [1.0, -1.0])

    def test_no_header(self, tmp_path):
        p = tmp_path / "nh.csv"
        p.write_text("1,0,1\n0,1,-1\n")
        ds = load_csv(p)
        assert ds.n == 2

    def test_classification_mapping(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("1,0,cat\n0,1,dog\n0.6,0.8,cat\n")
        ds = load_csv(p, positive_class="cat")
        assert np.array_equal(ds.y, [1.0, -1.0, 1.0])

    def test_label_column_index(self, tmp_path):
        p = tmp_path / "lc.csv"
        p.write_text("7,1,0\n-3,0,1\n")
        ds = load_csv(p, label_column=0)
        assert np.array_equal(ds.y, [7.0, -3.0])
        assert np.array_equal(ds.X, np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_regression_standardization(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1,0,10\n0,1,20\n-1,0,30\n")
        ds = load_csv(p, regression=True)
        assert abs(ds.y.mean()) < 1e-12
        assert abs(ds.y.std() - 1.0) < 1e-12

    def test_features_get_normalized(self, tmp_path):
        p = tmp_path / "n.csv"
        p.write_text("3,4,1\n5,0,-1\n")
        ds = load_csv(p)
        assert np.allclose(ds.X[0], [0.6, 0.8])
        assert np.allclose(ds.X[1], [1.0, 0.0])

    def test_ragged_row_reports_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("1,0,1\n0,1\n")
        with pytest.raises(DataError, match=":2:"):
            load_csv(p)

    def test_unparseable_feature_reports_line(self, tmp_path):
        p = tmp_path / "bad2.csv"
        p.write_text("1,0,1\nx,1,-1\n")
        with pytest.raises(DataError, match=":2:"):
            load_csv(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(DataError, match="empty"):
            load_csv(p)

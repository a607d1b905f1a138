import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conle.baselines import baseline_lp, baseline_softmax, knn_affinity
from conle.dataset import make_dataset, synth_generate


def logical_only(L, X=None):
    L = np.asarray(L, dtype=float)
    X = np.arange(L.shape[0], dtype=float)[:, None] if X is None else X
    return make_dataset("t", X, L)


class TestSoftmaxBaseline:
    def test_one_of_three(self):
        e = math.e
        out = baseline_softmax(logical_only([[1, 0, 0]]))
        np.testing.assert_allclose(out[0], [e / (e + 2), 1 / (e + 2), 1 / (e + 2)], atol=1e-12)
        np.testing.assert_allclose(out[0], [0.57612, 0.21194, 0.21194], atol=1e-5)

    def test_two_of_four(self):
        out = baseline_softmax(logical_only([[1, 1, 0, 0]]))
        np.testing.assert_allclose(out[0], [0.36552, 0.36552, 0.13448, 0.13448], atol=1e-5)

    def test_stochastic(self):
        out = baseline_softmax(synth_generate(50, 3, 6, seed=2))
        np.testing.assert_allclose(out.sum(axis=1), 1, atol=1e-12)


class TestLabelPropagation:
    def setup_method(self):
        self.ds = synth_generate(60, 4, 4, seed=3)

    def normalized_logical(self):
        L = np.asarray(self.ds.logical)
        return L / L.sum(axis=1, keepdims=True)

    def test_alpha_zero(self):
        np.testing.assert_allclose(baseline_lp(self.ds, alpha=0.0), self.normalized_logical())

    def test_tiny_alpha_approaches_logical(self):
        np.testing.assert_allclose(baseline_lp(self.ds, alpha=1e-9), self.normalized_logical(), atol=1e-8)

    def test_zero_iterations(self):
        np.testing.assert_array_equal(baseline_lp(self.ds, iterations=0), self.normalized_logical())

    def test_duplicate_samples_share_output(self):
        X = np.asarray(self.ds.features).copy()
        L = np.asarray(self.ds.logical).copy()
        X[7], L[7] = X[3], L[3]
        out = baseline_lp(make_dataset("dup", X, L), k_neighbors=5)
        np.testing.assert_allclose(out[3], out[7], atol=1e-12)

    def test_rows_stochastic(self):
        out = baseline_lp(self.ds)
        np.testing.assert_allclose(out.sum(axis=1), 1, atol=1e-12)
        assert np.all(out >= 0)

    @pytest.mark.parametrize("kwargs", [{"k_neighbors": 60}, {"k_neighbors": 0}, {"alpha": 1.0},
                                        {"alpha": -0.1}, {"iterations": -1}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            baseline_lp(self.ds, **kwargs)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(1, 8))
    def test_affinity_row_stochastic_without_self(self, seed, k):
        X = np.random.default_rng(seed).normal(size=(12, 3))
        P = knn_affinity(X, k)
        np.testing.assert_allclose(P.sum(axis=1), 1, atol=1e-12)
        assert np.all(np.diag(P) == 0)
        assert np.all((P > 0).sum(axis=1) <= k)

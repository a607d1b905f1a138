import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_contrastive

from conle.diffnet import compare_gradients, init_mlp
from conle.objective import (
    ConleConfig,
    cosine_sim,
    contrastive_loss,
    contrastive_loss_grad,
    distance_loss,
    distance_target,
    embed,
    gradients_as_list,
    init_model,
    loss_gradients,
    recover,
    threshold_loss,
    total_loss,
    weighted_total,
)


def random_batch(seed, n=4, dim1=3, c=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim1))
    L = np.zeros((n, c))
    for i in range(n):
        k = rng.integers(1, c)
        L[i, rng.choice(c, size=k, replace=False)] = 1
    return X, L


class TestCosine:
    @pytest.mark.parametrize("u, v, expected", [
        ((1, 0), (1, 0), 1.0), ((1, 0), (0, 1), 0.0), ((1, 1), (1, 0), 0.70711)])
    def test_values(self, u, v, expected):
        assert cosine_sim(u, v) == pytest.approx(expected, abs=1e-5)

    def test_zero_vector(self):
        assert cosine_sim((0, 0), (1, 2)) == 0.0


class TestContrastive:
    def test_orthogonal_two_sample_case(self):
        Z = np.eye(2)
        loss = contrastive_loss(Z, Z.copy(), 0.5)
        # positive sim 1, negatives 0 and 0 -> each view: -log(e^2 / 2)
        assert loss == pytest.approx(brute_contrastive(Z, Z, 0.5), abs=1e-10)
        assert loss == pytest.approx(2 * (math.log(2) - 2), abs=1e-10)

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_enumeration(self, n, seed):
        rng = np.random.default_rng(seed)
        Z, Q = rng.normal(size=(n, 3)), rng.normal(size=(n, 3))
        for tau in (0.1, 0.5, 2.0):
            assert contrastive_loss(Z, Q, tau) == pytest.approx(brute_contrastive(Z, Q, tau), abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1), st.integers(2, 80), st.integers(1, 16))
    def test_permutation_invariant_exactly(self, seed, n, d):
        rng = np.random.default_rng(seed)
        Z, Q = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        p = rng.permutation(n)
        assert contrastive_loss(Z[p], Q[p], 0.5) == contrastive_loss(Z, Q, 0.5)

    def test_scale_invariant(self):
        rng = np.random.default_rng(2)
        Z, Q = rng.normal(size=(6, 4)), rng.normal(size=(6, 4))
        base = contrastive_loss(Z, Q, 0.5)
        assert abs(contrastive_loss(3 * Z, Q, 0.5) - base) <= 1e-10
        scales = rng.uniform(0.1, 10, size=(6, 1))
        assert abs(contrastive_loss(Z * scales, Q / scales, 0.5) - base) <= 1e-10

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            contrastive_loss(np.ones((1, 3)), np.ones((1, 3)), 0.5)

    def test_positive_in_denominator_switch(self):
        rng = np.random.default_rng(3)
        Z, Q = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        a = contrastive_loss(Z, Q, 0.5)
        b = contrastive_loss(Z, Q, 0.5, include_positive=True)
        assert b > a  # extra positive term in every denominator

    def test_raising_positive_similarity_lowers_anchor_loss(self):
        # Z_0 rotates toward Q_0 inside a plane orthogonal to every other vector
        rng = np.random.default_rng(4)
        others_z = np.hstack([np.zeros((3, 2)), rng.normal(size=(3, 3))])
        others_q = np.hstack([np.zeros((3, 2)), rng.normal(size=(3, 3))])
        q0 = np.array([1.0, 0, 0, 0, 0])
        prev = None
        for angle in np.linspace(np.pi / 2, 0, 6):
            z0 = np.array([np.cos(angle), np.sin(angle), 0, 0, 0])
            Z, Q = np.vstack([z0, others_z]), np.vstack([q0, others_q])
            # only l_Z0's numerator moves: every other similarity involving z0 is 0 or fixed
            n = 4
            tau = 0.5
            S = lambda u, v: cosine_sim(u, v) / tau
            den = sum(math.exp(S(Z[0], Z[s])) + math.exp(S(Z[0], Q[s])) for s in range(1, n))
            l_z0 = -S(Z[0], Q[0]) + math.log(den)
            if prev is not None:
                assert l_z0 < prev
            prev = l_z0

    @pytest.mark.parametrize("include_positive", [False, True])
    def test_gradient(self, include_positive):
        rng = np.random.default_rng(5)
        Z, Q = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        _, dZ, dQ = contrastive_loss_grad(Z, Q, 0.5, include_positive)
        err = compare_gradients([Z, Q], lambda: contrastive_loss(Z, Q, 0.5, include_positive), [dZ, dQ])
        assert err < 1e-6


class TestEmbedRecover:
    def test_zero_nets(self):
        f1 = init_mlp([3, 4, 2], seed=0).zero_()
        f2 = init_mlp([5, 4, 2], seed=0).zero_()
        e = embed(f1, f2, np.ones((3, 3)), np.ones((3, 5)))
        assert e.H.shape == (3, 4) and np.all(e.H == 0)

    def test_concatenation_and_single_row(self):
        f1 = init_mlp([3, 4, 2], seed=1)
        f2 = init_mlp([5, 4, 2], seed=2)
        X, L = random_batch(0, n=1, dim1=3, c=5)
        e = embed(f1, f2, X, L)
        assert e.H.shape == (1, 4)
        np.testing.assert_array_equal(e.H, np.hstack([e.Z, e.Q]))

    def test_identical_rows(self):
        f1 = init_mlp([3, 4, 2], seed=1)
        f2 = init_mlp([4, 4, 2], seed=2)
        X, L = random_batch(1, n=3, dim1=3, c=4)
        X[2], L[2] = X[0], L[0]
        e = embed(f1, f2, X, L)
        np.testing.assert_array_equal(e.H[0], e.H[2])

    def test_recover_zero_uniform(self):
        f3 = init_mlp([4, 6, 3], output_head="softmax", seed=0).zero_()
        np.testing.assert_allclose(recover(f3, np.ones((2, 4))), 1 / 3)

    def test_recover_empty(self):
        f3 = init_mlp([4, 3], output_head="softmax", seed=0)
        assert recover(f3, np.zeros((0, 4))).shape == (0, 3)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_recover_rows_are_distributions(self, seed):
        f3 = init_mlp([4, 6, 3], output_head="softmax", seed=seed)
        D = recover(f3, np.random.default_rng(seed).normal(size=(8, 4)) * 20)
        assert np.all(D > 0)
        np.testing.assert_allclose(D.sum(axis=1), 1, atol=1e-6)


class TestLabelTerms:
    def test_distance_zero(self):
        L = np.array([[1.0, 0, 1]])
        assert distance_loss(L, L) == 0

    def test_distance_value(self):
        assert distance_loss([[0.8, 0.2]], [[1, 0]]) == pytest.approx(0.08)

    def test_softmax_target(self):
        # softmax of (1, 0): (e, 1) / (e + 1)
        np.testing.assert_allclose(distance_target([[1, 0]], "softmax_logical"), [[0.73106, 0.26894]], atol=1e-5)
        np.testing.assert_array_equal(distance_target([[1, 0]]), [[1, 0]])

    def test_distance_sums(self):
        D, L = np.array([[0.8, 0.2], [0.3, 0.7]]), np.array([[1, 0], [1, 0]])
        assert distance_loss(np.vstack([D, D]), np.vstack([L, L])) == pytest.approx(2 * distance_loss(D, L))

    @pytest.mark.parametrize("d, form, expected", [
        ((0.6, 0.3, 0.1), "extreme_pair", 0.0),
        ((0.3, 0.4, 0.3), "extreme_pair", 0.15),
        ((0.3, 0.4, 0.3), "all_pairs", 0.20),
    ])
    def test_threshold_values(self, d, form, expected):
        assert threshold_loss([d], [[1, 0, 0]], 0.05, form) == pytest.approx(expected, abs=1e-12)

    def test_threshold_skips_degenerate_rows(self):
        D = np.array([[0.3, 0.4, 0.3], [0.2, 0.3, 0.5]])
        L = np.array([[1, 0, 0], [1, 1, 1]])
        assert threshold_loss(D, L, 0.05) == pytest.approx(0.15 / 2)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_threshold_zero_iff_margin_holds(self, seed):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(2, 7))
        D = rng.dirichlet(np.ones(c), size=5)
        _, L = random_batch(seed, n=5, c=c)
        eps = float(rng.choice([0.0, 0.01, 0.1]))
        holds = all(D[m][L[m] == 1].min() >= D[m][L[m] == 0].max() + eps for m in range(5))
        for form in ("extreme_pair", "all_pairs"):
            assert (threshold_loss(D, L, eps, form) == 0) == holds

    def test_threshold_ties_pick_lowest_index(self):
        from conle.objective import threshold_loss_grad
        D = np.array([[0.25, 0.25, 0.25, 0.25]])
        L = np.array([[1, 1, 0, 0]])
        _, g, _ = threshold_loss_grad(D, L, 0.1)
        np.testing.assert_allclose(g, [[-1, 0, 1, 0]])


class TestTotal:
    def test_full(self):
        p = total_loss(0.2, 0.4, 0.1, ConleConfig(lambda1=0.5, lambda2=1.0))
        assert p.total == pytest.approx(0.5)
        assert p.l_att == pytest.approx(0.5 * 0.4 + 0.1)

    def test_ablation_h(self):
        p = total_loss(0.2, 0.4, 0.1, ConleConfig(variant="ablation_h"))
        assert p.total == pytest.approx(0.3) and p.l_con == 0

    def test_ablation_l(self):
        p = total_loss(0.2, 0.4, 0.1, ConleConfig(variant="ablation_l"))
        assert p.total == pytest.approx(0.4) and p.l_thr == 0

    @pytest.mark.parametrize("variant", ["full", "ablation_h", "ablation_l"])
    def test_zero(self, variant):
        assert total_loss(0, 0, 0, ConleConfig(variant=variant)).total == 0

    def test_breakdown_identity_on_batches(self):
        cfg = ConleConfig(dim2=3, hidden=5, lambda1=0.7, lambda2=2.0)
        X, L = random_batch(4, n=6)
        model = init_model(3, 4, cfg, 0)
        p, _ = loss_gradients(model, X, L, cfg)
        assert p.l_att == cfg.lambda1 * p.l_dis + cfg.lambda2 * p.l_thr
        assert p.total == p.l_con + p.l_att


def tiny(seed, cfg, n=4):
    X, L = random_batch(seed, n=n, dim1=3, c=4)
    return init_model(3, 4, cfg, seed), X, L


class TestJointGradients:
    @pytest.mark.parametrize("variant", ["full", "ablation_h", "ablation_l"])
    @pytest.mark.parametrize("form", ["extreme_pair", "all_pairs"])
    def test_grad_check(self, variant, form):
        # large epsilon keeps the hinge active so its gradient is exercised
        cfg = ConleConfig(dim2=3, hidden=5, epsilon=0.5, variant=variant, threshold_form=form, slope=0.1)
        model, X, L = tiny(7, cfg)
        w = (1.0 if cfg.uses_contrastive else 0.0, cfg.lambda1, cfg.lambda2 if cfg.uses_threshold else 0.0)
        _, grads = loss_gradients(model, X, L, cfg)
        params = [p for net in (model.f1, model.f2, model.f3) for p in net.parameters()]
        err = compare_gradients(params, lambda: weighted_total(model, X, L, cfg, w), gradients_as_list(grads))
        assert err < 1e-4

    def test_grad_check_softmax_target(self):
        cfg = ConleConfig(dim2=3, hidden=5, epsilon=0.5, slope=0.1, distance_target="softmax_logical")
        model, X, L = tiny(8, cfg)
        _, grads = loss_gradients(model, X, L, cfg)
        params = [p for net in (model.f1, model.f2, model.f3) for p in net.parameters()]
        err = compare_gradients(params, lambda: weighted_total(model, X, L, cfg, (1.0, 0.5, 1.0)),
                                gradients_as_list(grads))
        assert err < 1e-4

    def test_no_label_terms_leaves_f3_untouched(self):
        cfg = ConleConfig(dim2=3, hidden=5, lambda1=0.0, lambda2=0.0)
        model, X, L = tiny(1, cfg)
        _, (g1, g2, g3) = loss_gradients(model, X, L, cfg)
        assert all(np.all(p == 0) for p in g3.parameters())
        assert any(np.any(p != 0) for p in g1.parameters())

    def test_inactive_hinge_has_zero_gradient(self):
        cfg = ConleConfig(dim2=3, hidden=5, epsilon=0.0, variant="ablation_h", lambda1=0.0)
        model, X, L = tiny(2, cfg)
        # zero the label network output and bias F3 strongly toward each row's relevant labels
        model.f3.weights[-1][:] = 0.0
        model.f3.biases[-1][:] = 0.0
        L[:] = np.array([1, 1, 0, 0])
        model.f3.biases[-1][:] = [5.0, 5.0, -5.0, -5.0]
        parts, grads = loss_gradients(model, X, L, cfg)
        assert parts.l_thr == 0
        assert all(np.all(p == 0) for g in grads for p in g.parameters())

"""Scorer, corrected loss, analytic gradient, and checkpoint round-trips."""

import math

import numpy as np
import pytest

from complab import model as md
from complab import transition as tr
from complab.errors import ParseError, ShapeError, ValidationError


def manual_3x3():
    return tr.TransitionMatrix(np.array([
        [0.0, 0.2, 0.8],
        [0.5, 0.0, 0.5],
        [0.5, 0.5, 0.0],
    ]))


def random_regime_matrix(rng):
    c = int(rng.integers(3, 7))
    kind = rng.choice(["uniform", "without0", "with0"])
    seed = int(rng.integers(0, 2**31))
    if kind == "uniform":
        return tr.make_uniform(c)
    if kind == "without0":
        return tr.make_without_zero(c, seed)
    k = int(rng.integers(1, c))
    return tr.make_with_zero(c, k, seed)


class TestScores:
    def test_zero_weights_give_bias(self):
        m = md.SoftmaxModel.linear(4, 3, seed=0)
        m.params["W"][:] = 0.0
        m.params["b"][:] = [0.3, -0.1, 2.0]
        np.testing.assert_allclose(m.scores(np.ones(4)), [0.3, -0.1, 2.0])

    def test_identity_weights(self):
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        m.params["W"] = np.eye(3)
        m.params["b"][:] = 0.0
        x = np.zeros(3)
        x[1] = 1.0
        np.testing.assert_allclose(m.scores(x), x)

    def test_dimension_mismatch(self):
        m = md.SoftmaxModel.linear(4, 3, seed=0)
        with pytest.raises(ShapeError):
            m.scores(np.ones(5))
        with pytest.raises(ShapeError):
            m.scores_batch(np.ones((2, 5)))

    def test_perturbation_bounded_by_weight_norm(self):
        # |h(x+delta) - h(x)| <= ||W||_2 ||delta|| for the linear scorer
        rng = np.random.default_rng(1)
        m = md.SoftmaxModel.linear(5, 4, seed=1)
        x = rng.normal(size=5)
        delta = 1e-3 * rng.normal(size=5)
        diff = np.linalg.norm(m.scores(x + delta) - m.scores(x))
        bound = np.linalg.norm(m.params["W"], 2) * np.linalg.norm(delta)
        assert diff <= bound * (1 + 1e-12)


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(md.softmax(np.zeros(3)), np.full(3, 1 / 3))

    def test_max_shift_prevents_overflow(self):
        g = md.softmax(np.array([1000.0, 0.0, 0.0]))
        assert np.all(np.isfinite(g))
        np.testing.assert_allclose(g, [1.0, 0.0, 0.0], atol=1e-300)

    def test_rank_preservation(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            h = rng.normal(scale=rng.uniform(0.1, 50), size=rng.integers(3, 8))
            assert np.argmax(md.softmax(h)) == np.argmax(h)

    def test_batch_rows_on_simplex(self):
        rng = np.random.default_rng(3)
        G = md.softmax(rng.normal(size=(40, 5)))
        np.testing.assert_allclose(G.sum(axis=1), np.ones(40), atol=1e-12)
        assert G.min() >= 0.0


class TestCorrectedOutput:
    def test_one_hot_pushforward(self):
        q = manual_3x3()
        g = np.zeros(3)
        g[1] = 1.0
        np.testing.assert_allclose(md.corrected_output(q, g), q.entries[1])

    def test_uniform_closed_form(self):
        rng = np.random.default_rng(4)
        for c in (3, 5, 10):
            q = tr.make_uniform(c)
            g = rng.dirichlet(np.ones(c))
            np.testing.assert_allclose(md.corrected_output(q, g),
                                       (1.0 - g) / (c - 1), atol=1e-12)

    def test_stochasticity(self):
        rng = np.random.default_rng(5)
        q = tr.make_with_zero(6, k=3, seed=8)
        for _ in range(20):
            out = md.corrected_output(q, rng.dirichlet(np.ones(6)))
            assert abs(out.sum() - 1.0) <= 1e-9


class TestModifiedLoss:
    def test_symmetric_case(self):
        q = tr.make_uniform(3)
        for ybar in (1, 2, 3):
            assert md.modified_loss(q, np.zeros(3), ybar) == pytest.approx(math.log(3))

    def test_hand_evaluated_case(self):
        # g = e_1 via saturated scores; q[3] = Q[1,3] = 0.8
        q = manual_3x3()
        h = np.array([1000.0, 0.0, 0.0])
        assert md.modified_loss(q, h, 3) == pytest.approx(-math.log(0.8))

    def test_clamp_keeps_loss_finite(self):
        # ybar = 1 while g = e_1 and Q[1,1] = 0 forces the clamp
        q = manual_3x3()
        h = np.array([1000.0, 0.0, 0.0])
        assert md.modified_loss(q, h, 1) == pytest.approx(-math.log(md.EPS))

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(6)
        for _ in range(200):
            q = random_regime_matrix(rng)
            h = rng.normal(scale=5, size=q.c)
            ybar = int(rng.integers(1, q.c + 1))
            assert md.modified_loss(q, h, ybar) >= 0.0

    def test_bad_label(self):
        with pytest.raises(ValidationError):
            md.modified_loss(manual_3x3(), np.zeros(3), 4)


class TestLossGradH:
    def test_symmetric_case_value(self):
        q = tr.make_uniform(3)
        grad = md.loss_grad_h(q, np.zeros(3), 1)
        np.testing.assert_allclose(grad, [1 / 3, -1 / 6, -1 / 6], atol=1e-15)

    def test_zero_sum_and_bounds(self):
        rng = np.random.default_rng(7)
        for _ in range(2000):
            q = random_regime_matrix(rng)
            h = rng.normal(scale=rng.uniform(0.5, 100), size=q.c)
            ybar = int(rng.integers(1, q.c + 1))
            grad = md.loss_grad_h(q, h, ybar)
            assert abs(grad.sum()) <= 1e-9
            assert np.all(np.abs(grad) <= 1.0 + 1e-12)

    def test_extreme_scores_stay_finite(self):
        q = manual_3x3()
        grad = md.loss_grad_h(q, np.array([800.0, -800.0, 0.0]), 2)
        assert np.all(np.isfinite(grad))
        assert np.all(np.abs(grad) <= 1.0 + 1e-12)

    def test_clamped_case_returns_softmax(self):
        q = manual_3x3()
        h = np.array([1000.0, 0.0, 0.0])
        np.testing.assert_allclose(md.loss_grad_h(q, h, 1), md.softmax(h))

    def test_plain_ce_reduces_to_softmax_minus_onehot(self):
        rng = np.random.default_rng(8)
        H = rng.normal(size=(10, 4))
        y = rng.integers(1, 5, size=10)
        out = md._batch_loss_grad_h(None, H, y)[1]
        expected = md.softmax(H) - np.eye(4)[y - 1]
        np.testing.assert_allclose(out, expected, atol=1e-12)


class TestPredict:
    def test_basic(self):
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        m.params["W"] = np.eye(3)
        m.params["b"][:] = 0.0
        assert md.predict(m, np.array([0.2, 0.9, 0.1])) == 2

    def test_tie_breaks_to_lowest_index(self):
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        m.params["W"] = np.eye(3)
        m.params["b"][:] = 0.0
        assert md.predict(m, np.array([0.5, 0.5, 0.1])) == 1

    def test_shift_invariance(self):
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        m.params["W"] = np.eye(3)
        x = np.array([0.3, -0.2, 0.9])
        before = md.predict(m, x)
        m.params["b"][:] = 7.5
        assert md.predict(m, x) == before


class TestGradCheck:
    def test_random_linear(self):
        rng = np.random.default_rng(9)
        m = md.SoftmaxModel.linear(5, 4, seed=9)
        q = tr.make_with_zero(4, k=2, seed=3)
        X = rng.normal(size=(20, 5))
        ybar = rng.integers(1, 5, size=20)
        assert md.grad_check(m, q, X, ybar) <= 1e-4

    def test_zero_weight_start(self):
        rng = np.random.default_rng(10)
        m = md.SoftmaxModel.linear(5, 4, seed=0)
        for p in m.params.values():
            p[:] = 0.0
        q = tr.make_uniform(4)
        X = rng.normal(size=(20, 5))
        ybar = rng.integers(1, 5, size=20)
        assert md.grad_check(m, q, X, ybar) <= 1e-4

    def test_one_hidden(self):
        rng = np.random.default_rng(11)
        m = md.SoftmaxModel.one_hidden(5, 4, seed=11)
        q = tr.make_without_zero(4, seed=1)
        X = rng.normal(size=(20, 5))
        ybar = rng.integers(1, 5, size=20)
        assert md.grad_check(m, q, X, ybar) <= 1e-4

    def test_plain_ce_paths(self):
        rng = np.random.default_rng(12)
        X = rng.normal(size=(15, 4))
        y = rng.integers(1, 4, size=15)
        linear = md.SoftmaxModel.linear(4, 3, seed=12)
        assert md.grad_check(linear, None, X, y) <= 1e-4
        hidden = md.SoftmaxModel.one_hidden(4, 3, seed=13)
        assert md.grad_check(hidden, None, X, y) <= 1e-4


class TestBatchLossAndGrads:
    def test_matches_pointwise(self):
        rng = np.random.default_rng(13)
        q = tr.make_with_zero(5, k=2, seed=2)
        m = md.SoftmaxModel.linear(3, 5, seed=5)
        X = rng.normal(size=(8, 3))
        ybar = rng.integers(1, 6, size=8)
        out = md.batch_loss_and_grads(m, q, X, ybar)
        H = m.scores_batch(X)
        point_losses = [md.modified_loss(q, H[i], int(ybar[i])) for i in range(8)]
        assert out.loss == pytest.approx(np.mean(point_losses))
        for i in range(8):
            np.testing.assert_allclose(out.grad_h[i],
                                       md.loss_grad_h(q, H[i], int(ybar[i])))

    def test_one_step_descent(self):
        # a small enough full-batch step never increases the batch loss
        rng = np.random.default_rng(14)
        q = tr.make_without_zero(4, seed=4)
        m = md.SoftmaxModel.one_hidden(6, 4, seed=6)
        X = rng.normal(size=(64, 6))
        ybar = rng.integers(1, 5, size=64)
        before = md.batch_loss(m, q, X, ybar)
        grads = md.batch_loss_and_grads(m, q, X, ybar).param_grads
        for name in m.params:
            m.params[name] -= 1e-3 * grads[name]
        after = md.batch_loss(m, q, X, ybar)
        assert after <= before

    def test_empty_batch_rejected(self):
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        with pytest.raises(ShapeError):
            md.batch_loss_and_grads(m, None, np.zeros((0, 3)), np.zeros(0, dtype=int))


class TestInitialization:
    def test_bounds_and_zero_biases(self):
        m = md.SoftmaxModel.one_hidden(20, 7, hidden=5, seed=21)
        a1 = math.sqrt(6 / (20 + 5))
        a2 = math.sqrt(6 / (5 + 7))
        assert np.all(np.abs(m.params["W1"]) <= a1)
        assert np.all(np.abs(m.params["W2"]) <= a2)
        np.testing.assert_array_equal(m.params["b1"], np.zeros(5))
        np.testing.assert_array_equal(m.params["b2"], np.zeros(7))

    def test_seeded_init_reproducible(self):
        a = md.SoftmaxModel.linear(6, 4, seed=33)
        b = md.SoftmaxModel.linear(6, 4, seed=33)
        np.testing.assert_array_equal(a.params["W"], b.params["W"])


class TestCheckpoint:
    @pytest.mark.parametrize("factory", [
        lambda: md.SoftmaxModel.linear(5, 4, seed=17),
        lambda: md.SoftmaxModel.one_hidden(5, 4, hidden=3, seed=18),
    ])
    def test_round_trip_bit_exact(self, factory, tmp_path):
        m = factory()
        path = tmp_path / "model.ckpt"
        md.save_checkpoint(m, path)
        back = md.load_checkpoint(path)
        assert (back.arch, back.d, back.c, back.hidden) == (m.arch, m.d, m.c, m.hidden)
        for name in m.params:
            np.testing.assert_array_equal(back.params[name], m.params[name])

    def test_bad_header(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_text("something else\n")
        with pytest.raises(ParseError):
            md.load_checkpoint(path)

    def test_truncated_parameter(self, tmp_path):
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        path = tmp_path / "model.ckpt"
        md.save_checkpoint(m, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ParseError):
            md.load_checkpoint(path)

    def test_shape_mismatch(self, tmp_path):
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        path = tmp_path / "model.ckpt"
        md.save_checkpoint(m, path)
        text = path.read_text().replace("d=3", "d=4")
        path.write_text(text)
        with pytest.raises(ParseError):
            md.load_checkpoint(path)

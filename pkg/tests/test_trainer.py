"""Training loop: update rule, determinism, early stopping, reports."""

import json

import numpy as np
import pytest

from complab import datakit as dk
from complab import model as md
from complab import trainer as trn
from complab import transition as tr
from complab.errors import DivergenceError, ValidationError


def blob_comp_task(c=3, d=2, n_per_class=200, sigma=0.3, q=None, seed=0):
    q = q or tr.make_uniform(c)
    clean = dk.make_blobs(c, d, n_per_class, sigma=sigma, seed=seed)
    return dk.corrupt(clean, q, seed=seed + 1), clean, q


class TestTrainConfig:
    def test_defaults(self):
        cfg = trn.TrainConfig()
        assert cfg.lr == 1e-4
        assert cfg.momentum == 0.9
        assert cfg.weight_decay == 1e-4
        assert cfg.batch_size == 128
        assert cfg.val_fraction == 0.1

    def test_rejects_bad_ranges(self):
        with pytest.raises(ValidationError):
            trn.TrainConfig(lr=0.0)
        with pytest.raises(ValidationError):
            trn.TrainConfig(momentum=1.0)
        with pytest.raises(ValidationError):
            trn.TrainConfig(weight_decay=-1e-4)
        with pytest.raises(ValidationError):
            trn.TrainConfig(val_fraction=1.0)

    def test_lr_drops_must_increase(self):
        with pytest.raises(ValidationError):
            trn.TrainConfig(lr_drops=((40, 10), (40, 10)))
        with pytest.raises(ValidationError):
            trn.TrainConfig(lr_drops=((80, 10), (40, 10)))

    def test_schedule_divides_after_epoch(self):
        cfg = trn.TrainConfig(lr=0.01, lr_drops=((40, 10), (80, 10)))
        assert cfg.lr_at(40) == pytest.approx(0.01)
        assert cfg.lr_at(41) == pytest.approx(0.001)
        assert cfg.lr_at(81) == pytest.approx(0.0001)


class TestSgdStep:
    def test_vanilla_reduction(self):
        # momentum 0 and decay 0 give theta <- theta - lr * grad exactly
        params = {"w": np.array([1.0, -2.0])}
        velocity = {"w": np.zeros(2)}
        grads = {"w": np.array([0.5, 0.25])}
        trn.sgd_step(params, velocity, grads, lr=0.1, momentum=0.0, weight_decay=0.0)
        np.testing.assert_allclose(params["w"], [1.0 - 0.05, -2.0 - 0.025])

    def test_two_hand_stepped_updates(self):
        # velocity: v <- m*v - lr*(g + wd*theta); theta <- theta + v
        params = {"w": np.array([1.0, -1.0])}
        velocity = {"w": np.zeros(2)}
        g1 = np.array([0.2, -0.4])
        trn.sgd_step(params, velocity, {"w": g1}, lr=0.1, momentum=0.9, weight_decay=0.01)
        v1 = -0.1 * (g1 + 0.01 * np.array([1.0, -1.0]))
        t1 = np.array([1.0, -1.0]) + v1
        np.testing.assert_allclose(params["w"], t1)
        g2 = np.array([-0.1, 0.3])
        trn.sgd_step(params, velocity, {"w": g2}, lr=0.1, momentum=0.9, weight_decay=0.01)
        v2 = 0.9 * v1 - 0.1 * (g2 + 0.01 * t1)
        np.testing.assert_allclose(params["w"], t1 + v2)
        np.testing.assert_allclose(velocity["w"], v2)


class TestSplitValidation:
    def test_sizes(self):
        data = dk.make_blobs(3, 2, 334, sigma=0.5, seed=0)
        train, val = trn.split_validation(data.take(np.arange(1000)), 0.1, seed=1)
        assert (train.n, val.n) == (900, 100)

    def test_disjoint_union(self):
        data = dk.make_blobs(3, 2, 40, sigma=0.5, seed=0)
        train, val = trn.split_validation(data, 0.25, seed=2)
        merged = np.sort(np.concatenate([train.X[:, 0], val.X[:, 0]]))
        np.testing.assert_array_equal(merged, np.sort(data.X[:, 0]))
        assert train.n + val.n == data.n

    def test_seeded_determinism(self):
        data = dk.make_blobs(3, 2, 40, sigma=0.5, seed=0)
        a_train, _ = trn.split_validation(data, 0.1, seed=3)
        b_train, _ = trn.split_validation(data, 0.1, seed=3)
        np.testing.assert_array_equal(a_train.X, b_train.X)

    def test_fraction_out_of_range(self):
        data = dk.make_blobs(3, 2, 10, sigma=0.5, seed=0)
        with pytest.raises(ValidationError):
            trn.split_validation(data, 0.0, seed=0)


class TestEvaluate:
    def test_constant_predictor_on_balanced_set(self):
        data = dk.make_blobs(10, 10, 30, sigma=0.5, seed=1)
        m = md.SoftmaxModel.linear(10, 10, seed=0)
        m.params["W"][:] = 0.0
        m.params["b"][:] = 0.0
        m.params["b"][4] = 5.0  # always predicts class 5
        assert trn.evaluate(m, data) == pytest.approx(0.10)

    def test_perfect_model(self):
        data = dk.make_blobs(3, 3, 50, sigma=1e-4, seed=2)
        m = md.SoftmaxModel.linear(3, 3, seed=0)
        m.params["W"] = np.eye(3) * 50.0
        m.params["b"][:] = 0.0
        assert trn.evaluate(m, data) == 1.0


class TestTrain:
    def test_loss_decreases_on_separable_blobs(self):
        comp, _, q = blob_comp_task(sigma=0.15, n_per_class=400)
        m = md.SoftmaxModel.linear(2, 3, seed=4)
        cfg = trn.TrainConfig(lr=0.05, max_epochs=5, batch_size=64, seed=4)
        _, report = trn.train(m, q, comp, cfg)
        losses = [e.train_loss for e in report.epochs]
        assert len(losses) == 5
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_deterministic_given_seed(self):
        comp, _, q = blob_comp_task()
        cfg = trn.TrainConfig(lr=0.02, max_epochs=4, seed=7)
        m1, r1 = trn.train(md.SoftmaxModel.linear(2, 3, seed=7), q, comp, cfg)
        m2, r2 = trn.train(md.SoftmaxModel.linear(2, 3, seed=7), q, comp, cfg)
        assert [e.train_loss for e in r1.epochs] == [e.train_loss for e in r2.epochs]
        assert [e.val_acc for e in r1.epochs] == [e.val_acc for e in r2.epochs]
        np.testing.assert_array_equal(m1.params["W"], m2.params["W"])

    def test_returned_model_is_best_epoch_snapshot(self):
        comp, _, q = blob_comp_task(n_per_class=150)
        cfg = trn.TrainConfig(lr=0.05, max_epochs=12, seed=5)
        best, report = trn.train(md.SoftmaxModel.linear(2, 3, seed=5), q, comp, cfg)
        assert report.best_epoch == int(np.argmax([e.val_acc for e in report.epochs])) + 1
        _, val_split = trn.split_validation(comp, cfg.val_fraction, cfg.seed)
        got = trn._supervised_accuracy(best, q, val_split.X, val_split.ybar)
        assert got == pytest.approx(report.best_val_acc)

    def test_early_stopping_restores_best(self):
        comp, _, q = blob_comp_task(n_per_class=150)
        cfg = trn.TrainConfig(lr=0.05, max_epochs=200, early_stop_patience=5, seed=6)
        _, report = trn.train(md.SoftmaxModel.linear(2, 3, seed=6), q, comp, cfg)
        last = report.epochs[-1].epoch
        assert last < 200
        assert last - report.best_epoch == 5

    def test_plain_ce_on_true_labels(self):
        _, clean, _ = blob_comp_task(sigma=0.3, n_per_class=300)
        cfg = trn.TrainConfig(lr=0.05, max_epochs=15, seed=8)
        m, report = trn.train(md.SoftmaxModel.linear(2, 3, seed=8), None, clean, cfg,
                              test_set=clean)
        assert report.test_acc is not None
        assert report.test_acc >= 0.95

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_raises_with_partial_report(self):
        comp, _, q = blob_comp_task(n_per_class=100)
        cfg = trn.TrainConfig(lr=1e9, max_epochs=50, seed=9)
        with pytest.raises(DivergenceError) as excinfo:
            trn.train(md.SoftmaxModel.one_hidden(2, 3, seed=9), q, comp, cfg)
        assert hasattr(excinfo.value, "report")

    def test_corrected_training_rejects_true_labels(self):
        _, clean, q = blob_comp_task()
        with pytest.raises(ValidationError):
            trn.train(md.SoftmaxModel.linear(2, 3, seed=0), q, clean, trn.TrainConfig())

    def test_max_iterations_caps_steps(self):
        comp, _, q = blob_comp_task(n_per_class=100)  # 270 train rows after split
        cfg = trn.TrainConfig(lr=0.01, max_epochs=50, batch_size=64,
                              max_iterations=3, seed=10)
        _, report = trn.train(md.SoftmaxModel.linear(2, 3, seed=10), q, comp, cfg)
        assert len(report.epochs) == 1

    def test_report_serializes_to_json(self):
        comp, clean, q = blob_comp_task(n_per_class=60)
        cfg = trn.TrainConfig(lr=0.02, max_epochs=3, lr_drops=((2, 10),), seed=11)
        _, report = trn.train(md.SoftmaxModel.linear(2, 3, seed=11), q, comp, cfg,
                              test_set=clean)
        blob = json.loads(json.dumps(report.to_json_dict()))
        assert blob["best_epoch"] == report.best_epoch
        assert blob["config"]["lr_drops"] == [[2, 10]]
        assert {"epoch", "train_loss", "val_acc"} <= set(blob["epochs"][0])
        assert blob["test_acc"] == report.test_acc
        assert blob["seconds"] >= 0.0

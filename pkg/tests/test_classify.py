import numpy as np
import pytest

from lorarffi.classify import (
    DEFAULT_LAMBDA_HZ,
    CfoDatabase,
    TrainConfig,
    learning_rate_at,
    predict_cnn,
    predict_hybrid,
    train,
)
from lorarffi.cnn import Cnn, Dense, Flatten
from lorarffi.errors import DatabaseIntegrityError, DatasetError


def toy_dataset(n_per_class=40, seed=0):
    """Two trivially separable classes of 16x16 'images'."""
    rng = np.random.default_rng(seed)
    X, labels, cfos = [], [], []
    for cls, (mean, cfo) in enumerate([(-1.0, -400.0), (1.0, 300.0)]):
        for _ in range(n_per_class):
            X.append(rng.normal(loc=mean, scale=0.3, size=(16, 16)))
            labels.append(cls + 3)  # raw device ids 3 and 4
            cfos.append(cfo + rng.normal(scale=5.0))
    return np.array(X, dtype=np.float32), np.array(labels), np.array(cfos)


def fixed_prob_model(probs, class_ids):
    """A model whose softmax output is constant regardless of input."""
    logits = np.log(np.asarray(probs, dtype=np.float64))
    model = Cnn("iq", (1, 1, 2), len(probs), [Flatten(), Dense(2, len(probs))])
    dense = model.layers[-1]
    dense.params["w"][:] = 0.0
    dense.params["b"][:] = logits.astype(dense.params["b"].dtype)
    model.class_ids = list(class_ids)
    return model


class TestLearningRate:
    def test_schedule_values(self):
        cfg = TrainConfig()
        assert learning_rate_at(cfg, 1) == pytest.approx(3e-4)
        assert learning_rate_at(cfg, 10) == pytest.approx(3e-4)
        assert learning_rate_at(cfg, 11) == pytest.approx(9e-5)
        assert learning_rate_at(cfg, 21) == pytest.approx(2.7e-5)

    def test_monotone_nonincreasing(self):
        cfg = TrainConfig()
        rates = [learning_rate_at(cfg, e) for e in range(1, 40)]
        assert all(b <= a for a, b in zip(rates, rates[1:]))


class TestTrain:
    def test_separable_classes_reach_high_val_accuracy(self):
        X, labels, cfos = toy_dataset()
        cfg = TrainConfig(epochs=6, seed=1)
        result = train(X, labels, cfos, "spectrogram", cfg)
        assert max(result.val_accuracy_curve) >= 0.9
        assert result.class_ids == [3, 4]

    def test_loss_decreases(self):
        X, labels, cfos = toy_dataset(seed=2)
        cfg = TrainConfig(epochs=4, seed=2)
        result = train(X, labels, cfos, "spectrogram", cfg)
        assert result.loss_curve[-1] < result.loss_curve[0]

    def test_cfo_database_means(self):
        X, labels, cfos = toy_dataset(seed=3)
        cfg = TrainConfig(epochs=1, seed=3)
        result = train(X, labels, cfos, "spectrogram", cfg)
        db = result.cfo_database
        assert db.references[3] == pytest.approx(cfos[labels == 3].mean())
        assert db.references[4] == pytest.approx(cfos[labels == 4].mean())
        assert db.threshold == DEFAULT_LAMBDA_HZ

    def test_deterministic_given_seed(self):
        X, labels, cfos = toy_dataset(seed=4)
        curves = []
        for _ in range(2):
            cfg = TrainConfig(epochs=3, seed=9)
            curves.append(train(X, labels, cfos, "spectrogram", cfg).loss_curve)
        assert curves[0] == curves[1]

    def test_single_class_rejected(self):
        X = np.zeros((8, 4, 4), dtype=np.float32)
        with pytest.raises(DatasetError):
            train(X, np.ones(8), np.zeros(8), "spectrogram", TrainConfig(epochs=1))

    def test_length_mismatch_rejected(self):
        X = np.zeros((8, 4, 4), dtype=np.float32)
        with pytest.raises(DatasetError):
            train(X, np.arange(8) % 2, np.zeros(7), "spectrogram", TrainConfig(epochs=1))


class TestPredictCnn:
    def test_returns_class_id_not_index(self):
        model = fixed_prob_model([0.2, 0.7, 0.1], class_ids=[10, 20, 30])
        label, probs = predict_cnn(model, np.zeros((1, 2), dtype=np.float32))
        assert label == 20
        np.testing.assert_allclose(probs, [0.2, 0.7, 0.1], atol=1e-6)

    def test_tie_breaks_to_lowest_id(self):
        model = fixed_prob_model([0.5, 0.5], class_ids=[7, 9])
        label, _ = predict_cnn(model, np.zeros((1, 2), dtype=np.float32))
        assert label == 7


class TestPredictHybrid:
    def test_gate_flips_decision(self):
        # CNN narrowly prefers device 1, but its reference CFO is far away
        model = fixed_prob_model([0.51, 0.49], class_ids=[1, 2])
        db = CfoDatabase(references={1: 5000.0, 2: 100.0}, threshold=200.0)
        pred = predict_hybrid(model, np.zeros((1, 2), dtype=np.float32), dut_cfo=120.0, db=db)
        assert pred.label == 2
        assert not pred.out_of_database
        assert pred.probs[0] == 0.0

    def test_wide_threshold_matches_cnn(self):
        model = fixed_prob_model([0.3, 0.45, 0.25], class_ids=[1, 2, 3])
        db = CfoDatabase(references={1: -900.0, 2: 0.0, 3: 800.0}, threshold=np.inf)
        x = np.zeros((1, 2), dtype=np.float32)
        pred = predict_hybrid(model, x, dut_cfo=123.0, db=db)
        assert pred.label == predict_cnn(model, x)[0]

    def test_all_gated_falls_back_flagged(self):
        model = fixed_prob_model([0.6, 0.4], class_ids=[1, 2])
        db = CfoDatabase(references={1: 4000.0, 2: -4000.0}, threshold=50.0)
        pred = predict_hybrid(model, np.zeros((1, 2), dtype=np.float32), dut_cfo=0.0, db=db)
        assert pred.out_of_database
        assert pred.label == 1  # ungated argmax

    def test_missing_reference_rejected(self):
        model = fixed_prob_model([0.6, 0.4], class_ids=[1, 2])
        db = CfoDatabase(references={1: 0.0}, threshold=200.0)
        with pytest.raises(DatabaseIntegrityError):
            predict_hybrid(model, np.zeros((1, 2), dtype=np.float32), dut_cfo=0.0, db=db)

    def test_boundary_is_inclusive(self):
        # exactly at the threshold the class survives the gate
        model = fixed_prob_model([0.9, 0.1], class_ids=[1, 2])
        db = CfoDatabase(references={1: 200.0, 2: 0.0}, threshold=200.0)
        pred = predict_hybrid(model, np.zeros((1, 2), dtype=np.float32), dut_cfo=0.0, db=db)
        assert pred.label == 1

    def test_infinite_threshold_equivalence_property(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            probs = rng.dirichlet(np.ones(4))
            model = fixed_prob_model(probs, class_ids=[1, 2, 3, 4])
            refs = {c: float(rng.uniform(-8000, 8000)) for c in [1, 2, 3, 4]}
            db = CfoDatabase(references=refs, threshold=np.inf)
            x = np.zeros((1, 2), dtype=np.float32)
            dut = float(rng.uniform(-8000, 8000))
            assert predict_hybrid(model, x, dut, db).label == predict_cnn(model, x)[0]


class TestCfoDatabase:
    def test_threshold_positive(self):
        with pytest.raises(DatasetError):
            CfoDatabase(references={1: 0.0}, threshold=0.0)

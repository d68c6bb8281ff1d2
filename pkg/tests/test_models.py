import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.special import expit
from sklearn.base import clone

from conftest import make_corpus
from fairpoison import (
    AdvDebiasConfig,
    AdversarialDebiasingClassifier,
    LinearModel,
    LinearSVMClassifier,
    LogisticSGDClassifier,
    TrainConfig,
    fit_featurizer,
    load_model,
    predict_label,
    predict_label_batch,
    predict_proba,
    save_model,
    stack_features,
    train_adv_debias,
    train_linear_svm,
    train_logistic,
    transform,
    transform_corpus,
)
from fairpoison.features import FeatureVector
from fairpoison.models import (
    adv_composite_objective,
    adversary_objective,
    logistic_objective,
    squared_hinge_objective,
)


def single_feature(x: float) -> FeatureVector:
    return FeatureVector(indices=np.array([0]), values=np.array([x]), dim=1)


def tiny_matrix(rows):
    return sp.csr_matrix(np.array(rows, dtype=np.float64))


# ---------------------------------------------------------------- configs

def test_train_config_defaults():
    config = TrainConfig()
    assert (config.epochs, config.learning_rate, config.l2_penalty) == (30, 0.1, 1e-4)
    assert (config.batch_size, config.decision_threshold) == (32, 0.5)


def test_train_config_validation():
    for kwargs in (
        {"epochs": 0},
        {"learning_rate": 0.0},
        {"l2_penalty": -1e-3},
        {"batch_size": 0},
        {"decision_threshold": 0.0},
        {"decision_threshold": 1.0},
    ):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


def test_train_config_digest_tracks_content():
    assert TrainConfig().digest() == TrainConfig().digest()
    assert TrainConfig().digest() != TrainConfig(epochs=31).digest()


def test_adv_config_defaults_and_validation():
    config = AdvDebiasConfig(base=TrainConfig())
    assert config.adversary_weight == 1.0
    with pytest.raises(ValueError):
        AdvDebiasConfig(base=TrainConfig(), adversary_weight=-0.5)


# --------------------------------------------------------------- training

def test_logistic_descends_on_separable_pair():
    X = tiny_matrix([[1.0], [-1.0]])
    y = np.array([1.0, 0.0])
    model = train_logistic(X, y, TrainConfig(epochs=1, batch_size=2))
    after, _, _ = logistic_objective(model.weights, model.bias, X.toarray(), y, 1e-4)
    assert after < math.log(2.0)  # loss at the zero init


def test_logistic_weight_sign_forced():
    X = tiny_matrix([[1.0], [-1.0]])
    y = np.array([1.0, 0.0])
    model = train_logistic(X, y, TrainConfig(epochs=20, l2_penalty=0.0, batch_size=2))
    assert model.weights[0] > 0


def test_logistic_rejects_single_class():
    X = tiny_matrix([[1.0], [2.0]])
    with pytest.raises(ValueError, match="single class"):
        train_logistic(X, np.array([1.0, 1.0]), TrainConfig())


def test_logistic_length_mismatch():
    X = tiny_matrix([[1.0], [2.0]])
    with pytest.raises(ValueError):
        train_logistic(X, np.array([1.0, 0.0, 1.0]), TrainConfig())


def test_divergence_reported_with_remedy():
    X = tiny_matrix([[1.0], [-1.0]])
    y = np.array([1.0, 0.0])
    # overflow is the expected detection mechanism here
    with np.errstate(over="ignore"), pytest.raises(ValueError, match="learning_rate"):
        train_logistic(X, y, TrainConfig(epochs=3, learning_rate=1e80, batch_size=2))


def test_training_bit_deterministic():
    rng = np.random.default_rng(0)
    X = sp.csr_matrix(rng.standard_normal((40, 8)))
    y = (rng.random(40) > 0.5).astype(float)
    y[0], y[1] = 0.0, 1.0
    config = TrainConfig(epochs=5, seed=123)
    a = train_logistic(X, y, config)
    b = train_logistic(X, y, config)
    assert np.array_equal(a.weights, b.weights)
    assert a.bias == b.bias
    assert a.epoch_losses == b.epoch_losses


def test_svm_separable_margins():
    X = tiny_matrix([[1.0, 0.2], [0.9, -0.1], [-1.0, 0.1], [-0.8, -0.2]])
    y = np.array([1.0, 1.0, 0.0, 0.0])
    model = train_linear_svm(X, y, TrainConfig(epochs=200, learning_rate=0.5, batch_size=4))
    margins = X @ model.weights + model.bias
    signs = 2.0 * y - 1.0
    assert np.all(signs * margins > 0)


def test_svm_heavy_l2_shrinks_weights():
    X = tiny_matrix([[1.0], [-1.0]])
    y = np.array([1.0, 0.0])
    # keep lr * l2 < 2 so the penalty contracts instead of oscillating
    config = TrainConfig(epochs=200, learning_rate=1e-4, l2_penalty=1e4, batch_size=2)
    model = train_linear_svm(X, y, config)
    assert np.linalg.norm(model.weights) < 1e-3


def test_adv_debias_lambda_zero_is_logistic_bitwise():
    rng = np.random.default_rng(7)
    X = sp.csr_matrix(rng.standard_normal((60, 12)))
    y = (rng.random(60) > 0.5).astype(float)
    y[:2] = [0.0, 1.0]
    groups = (rng.random(60) > 0.5).astype(float)
    config = TrainConfig(epochs=8, seed=99)
    plain = train_logistic(X, y, config)
    debiased = train_adv_debias(X, y, groups, AdvDebiasConfig(base=config, adversary_weight=0.0))
    assert np.array_equal(plain.weights, debiased.weights)
    assert plain.bias == debiased.bias
    assert debiased.kind == "debiased"


def test_adv_debias_adversary_near_chance_when_group_independent():
    # labels follow the feature, groups alternate independently of both
    rng = np.random.default_rng(3)
    n = 200
    x = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) + 0.01 * rng.standard_normal(n)
    X = sp.csr_matrix(x.reshape(-1, 1))
    y = (x > 0).astype(float)
    groups = (np.arange(n) % 4 < 2).astype(float)  # balanced, label-independent
    model = train_adv_debias(
        X, y, groups, AdvDebiasConfig(base=TrainConfig(epochs=40, seed=1), adversary_weight=1.0)
    )
    u, c = model.adversary
    margins = X @ model.weights + model.bias
    adversary_pred = (expit(u * margins + c) >= 0.5).astype(float)
    assert abs(float(np.mean(adversary_pred == groups)) - 0.5) <= 0.05


def test_adv_debias_requires_both_groups():
    X = tiny_matrix([[1.0], [-1.0]])
    y = np.array([1.0, 0.0])
    with pytest.raises(ValueError, match="groups"):
        train_adv_debias(X, y, np.array([1.0, 1.0]), AdvDebiasConfig(base=TrainConfig()))


def test_descent_invariant_under_default_config():
    rows = [(f"good clean w{i}", 0, i % 2) for i in range(30)]
    rows += [(f"vile nasty w{i}", 1, i % 2) for i in range(30)]
    corpus = make_corpus(rows)
    featurizer = fit_featurizer(corpus, num_buckets=2**10)
    X = stack_features(transform_corpus(featurizer, corpus))
    y = np.array([float(ex.label) for ex in corpus])
    groups = np.array([float(ex.group) for ex in corpus])
    for model in (
        train_logistic(X, y, TrainConfig()),
        train_linear_svm(X, y, TrainConfig()),
        train_adv_debias(X, y, groups, AdvDebiasConfig(base=TrainConfig())),
    ):
        assert model.epoch_losses[-1] <= model.epoch_losses[0]


# --------------------------------------------------- gradient correctness

def finite_difference(f, params: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    grad = np.zeros_like(params)
    for i in range(len(params)):
        bump = np.zeros_like(params)
        bump[i] = eps
        grad[i] = (f(params + bump) - f(params - bump)) / (2 * eps)
    return grad


def relative_error(got: np.ndarray, want: np.ndarray) -> float:
    denom = max(np.linalg.norm(want), 1e-12)
    return float(np.linalg.norm(got - want) / denom)


def random_batch(rng, n=12, d=5):
    X = rng.standard_normal((n, d))
    y = (rng.random(n) > 0.5).astype(float)
    w = rng.standard_normal(d) * 0.5
    b = float(rng.standard_normal())
    return X, y, w, b


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(10)
    for _ in range(5):
        X, y, w, b = random_batch(rng)

        def loss_at(params):
            return logistic_objective(params[:-1], params[-1], X, y, 0.01)[0]

        _, grad_w, grad_b = logistic_objective(w, b, X, y, 0.01)
        packed = np.concatenate([w, [b]])
        numeric = finite_difference(loss_at, packed)
        analytic = np.concatenate([grad_w, [grad_b]])
        assert relative_error(analytic, numeric) < 1e-5


def test_hinge_gradient_matches_finite_differences_off_kink():
    rng = np.random.default_rng(20)
    found = 0
    while found < 5:
        X, y, w, b = random_batch(rng)
        s = 2.0 * y - 1.0
        # stay away from the hinge kink |1 - s*m| = 0
        if np.min(np.abs(1.0 - s * (X @ w + b))) < 1e-3:
            continue
        found += 1

        def loss_at(params):
            return squared_hinge_objective(params[:-1], params[-1], X, y, 0.01)[0]

        _, grad_w, grad_b = squared_hinge_objective(w, b, X, y, 0.01)
        packed = np.concatenate([w, [b]])
        numeric = finite_difference(loss_at, packed)
        analytic = np.concatenate([grad_w, [grad_b]])
        assert relative_error(analytic, numeric) < 1e-5


def test_composite_gradient_matches_finite_differences():
    rng = np.random.default_rng(30)
    for _ in range(5):
        X, y, w, b = random_batch(rng)
        groups = (rng.random(len(y)) > 0.5).astype(float)
        u, c = 0.7, -0.2

        def loss_at(params):
            return adv_composite_objective(
                params[:-1], params[-1], u, c, X, y, groups, 0.01, 1.5
            )[0]

        _, grad_w, grad_b = adv_composite_objective(w, b, u, c, X, y, groups, 0.01, 1.5)
        packed = np.concatenate([w, [b]])
        numeric = finite_difference(loss_at, packed)
        analytic = np.concatenate([grad_w, [grad_b]])
        assert relative_error(analytic, numeric) < 1e-5


def test_adversary_gradient_matches_finite_differences():
    rng = np.random.default_rng(40)
    margins = rng.standard_normal(20)
    groups = (rng.random(20) > 0.5).astype(float)

    def loss_at(params):
        return adversary_objective(params[0], params[1], margins, groups)[0]

    _, grad_u, grad_c = adversary_objective(0.4, 0.1, margins, groups)
    numeric = finite_difference(loss_at, np.array([0.4, 0.1]))
    assert relative_error(np.array([grad_u, grad_c]), numeric) < 1e-5


# -------------------------------------------------------------- prediction

def zero_model(kind="logistic") -> LinearModel:
    return LinearModel(weights=np.zeros(1), bias=0.0, kind=kind)


def test_predict_proba_at_origin():
    assert predict_proba(zero_model(), single_feature(1.0)) == pytest.approx(0.5)


def test_predict_proba_saturates():
    model = LinearModel(weights=np.array([100.0]), bias=0.0, kind="logistic")
    assert predict_proba(model, single_feature(1.0)) == pytest.approx(1.0, abs=1e-9)


def test_predict_proba_monotone_in_margin():
    model = LinearModel(weights=np.array([1.0]), bias=0.0, kind="hinge")
    probs = [predict_proba(model, single_feature(x)) for x in (-2.0, -0.5, 0.0, 0.5, 2.0)]
    assert probs == sorted(probs)


def test_predict_proba_dimension_mismatch():
    model = LinearModel(weights=np.zeros(4), bias=0.0, kind="logistic")
    with pytest.raises(ValueError):
        predict_proba(model, single_feature(1.0))


def test_predict_label_tie_goes_to_one():
    assert predict_label(zero_model(), single_feature(1.0), threshold=0.5) == 1


def test_predict_label_below_threshold():
    model = LinearModel(weights=np.array([-1.0]), bias=0.0, kind="logistic")
    assert predict_label(model, single_feature(0.1), threshold=0.5) == 0


def test_predict_label_zero_threshold_always_one():
    model = LinearModel(weights=np.array([-100.0]), bias=-5.0, kind="logistic")
    assert predict_label(model, single_feature(1.0), threshold=0.0) == 1


def test_model_rejects_non_finite_parameters():
    with pytest.raises(ValueError):
        LinearModel(weights=np.array([np.inf]), bias=0.0, kind="logistic")
    with pytest.raises(ValueError):
        LinearModel(weights=np.zeros(1), bias=float("nan"), kind="logistic")


def test_model_rejects_unknown_kind():
    with pytest.raises(ValueError):
        LinearModel(weights=np.zeros(1), bias=0.0, kind="forest")


# ------------------------------------------------------------- persistence

def test_model_round_trip_sparse(tmp_path):
    weights = np.zeros(64)
    weights[3], weights[17] = 1.5, -0.25
    model = LinearModel(weights=weights, bias=0.75, kind="hinge", train_config_digest="abc")
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.weights, model.weights)
    assert back.bias == model.bias
    assert back.kind == "hinge"
    assert back.train_config_digest == "abc"


def test_model_round_trip_dense_with_adversary(tmp_path):
    model = LinearModel(
        weights=np.array([0.1, -0.2, 0.3]),
        bias=-1.0,
        kind="debiased",
        adversary=(0.5, -0.125),
    )
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert np.array_equal(back.weights, model.weights)
    assert back.adversary == (0.5, -0.125)


def test_load_model_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"weights": 3}')
    with pytest.raises(ValueError, match="not a saved model"):
        load_model(path)


# --------------------------------------------------------------- estimators

def estimator_data():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((80, 6))
    w_true = np.array([2.0, -1.0, 0.0, 0.5, 0.0, 1.0])
    y = (X @ w_true > 0).astype(int)
    groups = (rng.random(80) > 0.5).astype(int)
    return sp.csr_matrix(X), y, groups


def test_logistic_estimator_fit_predict():
    X, y, _ = estimator_data()
    clf = LogisticSGDClassifier(epochs=40, learning_rate=0.5).fit(X, y)
    assert (clf.predict(X) == y).mean() > 0.9
    proba = clf.predict_proba(X)
    assert proba.shape == (80, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)


def test_svm_estimator_fit_predict():
    X, y, _ = estimator_data()
    clf = LinearSVMClassifier(epochs=60, learning_rate=0.2).fit(X, y)
    assert (clf.predict(X) == y).mean() > 0.9


def test_debias_estimator_requires_groups():
    X, y, groups = estimator_data()
    with pytest.raises(ValueError, match="groups"):
        AdversarialDebiasingClassifier().fit(X, y)
    clf = AdversarialDebiasingClassifier(epochs=20).fit(X, y, groups=groups)
    assert clf.model_.kind == "debiased"


def test_estimator_params_round_trip():
    clf = LogisticSGDClassifier(epochs=7, learning_rate=0.3)
    params = clf.get_params()
    assert params["epochs"] == 7 and params["learning_rate"] == 0.3
    cloned = clone(clf)
    assert cloned.get_params() == params


def test_estimator_unfitted_raises():
    X, _, _ = estimator_data()
    with pytest.raises(ValueError, match="not fitted"):
        LogisticSGDClassifier().predict(X)


def test_estimator_matches_functional_trainer():
    X, y, _ = estimator_data()
    clf = LogisticSGDClassifier(epochs=10, seed=42).fit(X, y)
    functional = train_logistic(X, y.astype(float), TrainConfig(epochs=10, seed=42))
    assert np.array_equal(clf.model_.weights, functional.weights)
    assert np.array_equal(clf.predict(X), predict_label_batch(functional, X))

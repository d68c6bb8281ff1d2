"""Linear surrogate classifiers trained by seeded mini-batch SGD.

Three trainers share one loop: logistic regression, a squared-hinge
linear SVM, and an adversarially-debiased logistic model whose
adversary tries to recover the group attribute from the main logit
while the main parameters are pushed the other way (gradient reversal).

The per-batch objective and gradient functions are public so tests can
check them against central finite differences. Determinism contract:
identical (data, config) gives bit-identical models; the only consumer
of randomness is the per-epoch shuffle.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin

from .features import FeatureVector, stack_features

__all__ = [
    "LinearModel",
    "TrainConfig",
    "AdvDebiasConfig",
    "logistic_objective",
    "squared_hinge_objective",
    "adv_composite_objective",
    "adversary_objective",
    "train_logistic",
    "train_linear_svm",
    "train_adv_debias",
    "predict_margin",
    "predict_proba",
    "predict_label",
    "predict_margin_batch",
    "predict_proba_batch",
    "predict_label_batch",
    "save_model",
    "load_model",
    "LogisticSGDClassifier",
    "LinearSVMClassifier",
    "AdversarialDebiasingClassifier",
]

MODEL_KINDS = ("logistic", "hinge", "debiased")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer hyperparameters; every field lands in the run reports."""

    epochs: int = 30
    learning_rate: float = 0.1
    l2_penalty: float = 1e-4
    batch_size: int = 32
    seed: int = 0
    decision_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.l2_penalty < 0:
            raise ValueError(f"l2_penalty must be non-negative, got {self.l2_penalty}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError(f"decision_threshold must be in (0, 1), got {self.decision_threshold}")

    def digest(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AdvDebiasConfig:
    """Adversarial-debiasing hyperparameters on top of a TrainConfig.

    adversary_weight 0 degenerates to plain logistic training; the
    adversary is a one-parameter logistic head on the main logit,
    initialized at the given weight/bias.
    """

    base: TrainConfig = TrainConfig()
    adversary_weight: float = 1.0
    adversary_init_weight: float = 0.0
    adversary_init_bias: float = 0.0

    def __post_init__(self) -> None:
        if self.adversary_weight < 0:
            raise ValueError(f"adversary_weight must be non-negative, got {self.adversary_weight}")

    def digest(self) -> str:
        payload = json.dumps(
            {
                "base": dataclasses.asdict(self.base),
                "adversary_weight": self.adversary_weight,
                "adversary_init_weight": self.adversary_init_weight,
                "adversary_init_bias": self.adversary_init_bias,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class LinearModel:
    """A trained linear head; immutable and safely shareable."""

    weights: np.ndarray
    bias: float
    kind: str
    train_config_digest: str = ""
    epoch_losses: tuple[float, ...] = ()
    # (weight, bias) of the trained adversary head; debiased models only.
    adversary: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not np.all(np.isfinite(self.weights)) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])


def _as_matrix(features) -> sp.csr_matrix | np.ndarray:
    """Coerce trainer input to an (n, dim) matrix."""
    if sp.issparse(features):
        return features.tocsr()
    if isinstance(features, np.ndarray):
        if features.ndim != 2:
            raise ValueError(f"feature array must be 2-dimensional, got shape {features.shape}")
        return features.astype(np.float64, copy=False)
    if isinstance(features, Sequence) and features and isinstance(features[0], FeatureVector):
        return stack_features(features)
    raise ValueError("features must be FeatureVectors, a sparse matrix, or a 2-D array")


def _check_training_inputs(X, y: np.ndarray, what: str = "labels") -> None:
    if X.shape[0] != len(y):
        raise ValueError(f"{X.shape[0]} feature rows but {len(y)} {what}")
    if len(y) < 2:
        raise ValueError("need at least 2 training examples")
    values = set(np.unique(y).tolist())
    if not values <= {0, 1}:
        raise ValueError(f"{what} must be 0/1, got values {sorted(values)}")
    if len(values) < 2:
        raise ValueError(f"training {what} contain a single class; need both 0 and 1")


def logistic_objective(
    w: np.ndarray, b: float, X, y: np.ndarray, l2_penalty: float
) -> tuple[float, np.ndarray, float]:
    """Mean binary cross-entropy + (l2/2)||w||^2 and its gradients."""
    m = X @ w + b
    # softplus(m) - y*m is the numerically stable BCE on logits.
    bce = float(np.mean(np.logaddexp(0.0, m) - y * m))
    loss = bce + 0.5 * l2_penalty * float(w @ w)
    resid = (expit(m) - y) / len(y)
    grad_w = X.T @ resid + l2_penalty * w
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


def squared_hinge_objective(
    w: np.ndarray, b: float, X, y: np.ndarray, l2_penalty: float
) -> tuple[float, np.ndarray, float]:
    """Mean squared hinge on the +/-1 mapping of y, plus L2 penalty."""
    s = 2.0 * y - 1.0
    m = X @ w + b
    slack = np.maximum(1.0 - s * m, 0.0)
    loss = float(np.mean(slack**2)) + 0.5 * l2_penalty * float(w @ w)
    dm = (-2.0 * s * slack) / len(y)
    grad_w = X.T @ dm + l2_penalty * w
    grad_b = float(np.sum(dm))
    return loss, grad_w, grad_b


def adversary_objective(
    adv_weight: float, adv_bias: float, margins: np.ndarray, groups: np.ndarray
) -> tuple[float, float, float]:
    """Adversary BCE for predicting the group from the main logit."""
    t = adv_weight * margins + adv_bias
    loss = float(np.mean(np.logaddexp(0.0, t) - groups * t))
    resid = (expit(t) - groups) / len(groups)
    grad_weight = float(np.sum(resid * margins))
    grad_bias = float(np.sum(resid))
    return loss, grad_weight, grad_bias


def adv_composite_objective(
    w: np.ndarray,
    b: float,
    adv_weight: float,
    adv_bias: float,
    X,
    y: np.ndarray,
    groups: np.ndarray,
    l2_penalty: float,
    adversary_weight: float,
) -> tuple[float, np.ndarray, float]:
    """Objective the MAIN parameters descend, with the adversary frozen.

    L = BCE(y) + (l2/2)||w||^2 - lambda * BCE_adv(groups), so the main
    model is rewarded for making the group unrecoverable from its logit
    (gradient reversal through the adversary path).
    """
    m = X @ w + b
    bce = float(np.mean(np.logaddexp(0.0, m) - y * m))
    t = adv_weight * m + adv_bias
    adv_bce = float(np.mean(np.logaddexp(0.0, t) - groups * t))
    loss = bce + 0.5 * l2_penalty * float(w @ w) - adversary_weight * adv_bce
    resid = (expit(m) - y) / len(y)
    adv_resid = (expit(t) - groups) / len(groups)
    coeff = resid - (adversary_weight * adv_weight) * adv_resid
    grad_w = X.T @ coeff + l2_penalty * w
    grad_b = float(np.sum(coeff))
    return loss, grad_w, grad_b


def _sgd_loop(X, y: np.ndarray, config: TrainConfig, objective, kind: str) -> LinearModel:
    n, dim = X.shape
    w = np.zeros(dim, dtype=np.float64)
    b = 0.0
    rng = np.random.default_rng(config.seed)
    epoch_losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grad_w, grad_b = objective(w, b, X[idx], y[idx], config.l2_penalty)
            if not math.isfinite(loss):
                raise ValueError("training diverged (non-finite loss); try a lower learning_rate")
            w = w - config.learning_rate * grad_w
            b = b - config.learning_rate * grad_b
            loss_sum += loss
            n_batches += 1
        epoch_losses.append(loss_sum / n_batches)
    if not np.all(np.isfinite(w)) or not math.isfinite(b):
        raise ValueError("training diverged (non-finite parameters); try a lower learning_rate")
    return LinearModel(
        weights=w,
        bias=b,
        kind=kind,
        train_config_digest=config.digest(),
        epoch_losses=tuple(epoch_losses),
    )


def train_logistic(features, labels, config: TrainConfig) -> LinearModel:
    """Fit logistic regression by seeded mini-batch gradient descent."""
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    _check_training_inputs(X, y)
    return _sgd_loop(X, y, config, logistic_objective, "logistic")


def train_linear_svm(features, labels, config: TrainConfig) -> LinearModel:
    """Fit a linear SVM (squared hinge) by seeded mini-batch descent."""
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    _check_training_inputs(X, y)
    return _sgd_loop(X, y, config, squared_hinge_objective, "hinge")


def train_adv_debias(features, labels, groups, config: AdvDebiasConfig) -> LinearModel:
    """Fit the adversarially-debiased classifier.

    Each batch does one forward pass, then updates the main parameters
    on the reversed composite objective and the adversary on its own
    BCE, both from that same forward pass. The shuffle stream matches
    the plain logistic trainer exactly, so adversary_weight=0 returns
    the identical main head.
    """
    X = _as_matrix(features)
    y = np.asarray(labels, dtype=np.float64)
    a = np.asarray(groups, dtype=np.float64)
    _check_training_inputs(X, y)
    _check_training_inputs(X, a, what="groups")
    base = config.base
    n, dim = X.shape
    w = np.zeros(dim, dtype=np.float64)
    b = 0.0
    u = config.adversary_init_weight
    c = config.adversary_init_bias
    rng = np.random.default_rng(base.seed)
    epoch_losses = []
    for _ in range(base.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        n_batches = 0
        for start in range(0, n, base.batch_size):
            idx = order[start : start + base.batch_size]
            Xb, yb, ab = X[idx], y[idx], a[idx]
            _, grad_w, grad_b = adv_composite_objective(
                w, b, u, c, Xb, yb, ab, base.l2_penalty, config.adversary_weight
            )
            # Track the plain classification loss; the composite is not
            # comparable across batches as the adversary moves.
            main_loss, _, _ = logistic_objective(w, b, Xb, yb, base.l2_penalty)
            margins = Xb @ w + b
            _, grad_u, grad_c = adversary_objective(u, c, margins, ab)
            if not math.isfinite(main_loss):
                raise ValueError("training diverged (non-finite loss); try a lower learning_rate")
            w = w - base.learning_rate * grad_w
            b = b - base.learning_rate * grad_b
            u = u - base.learning_rate * grad_u
            c = c - base.learning_rate * grad_c
            loss_sum += main_loss
            n_batches += 1
        epoch_losses.append(loss_sum / n_batches)
    if not np.all(np.isfinite(w)) or not math.isfinite(b) or not math.isfinite(u):
        raise ValueError("training diverged (non-finite parameters); try a lower learning_rate")
    return LinearModel(
        weights=w,
        bias=b,
        kind="debiased",
        train_config_digest=config.digest(),
        epoch_losses=tuple(epoch_losses),
        adversary=(u, c),
    )


def predict_margin(model: LinearModel, feature: FeatureVector) -> float:
    if feature.dim != model.dim:
        raise ValueError(
            f"feature dimension {feature.dim} does not match model dimension {model.dim}"
        )
    if feature.dense is not None:
        return float(np.asarray(feature.dense, dtype=np.float64) @ model.weights + model.bias)
    return float(model.weights[feature.indices] @ feature.values + model.bias)


def predict_proba(model: LinearModel, feature: FeatureVector) -> float:
    """P(label=1): sigmoid of the margin for every model kind.

    For the hinge model this is a fixed slope-1 calibration; it is
    monotone in the margin, which is all the thresholded metrics need.
    """
    return float(expit(predict_margin(model, feature)))


def predict_label(model: LinearModel, feature: FeatureVector, threshold: float = 0.5) -> int:
    """1 iff predict_proba >= threshold (ties classify as 1)."""
    return int(predict_proba(model, feature) >= threshold)


def predict_margin_batch(model: LinearModel, X) -> np.ndarray:
    X = _as_matrix(X)
    if X.shape[1] != model.dim:
        raise ValueError(f"feature dimension {X.shape[1]} does not match model dimension {model.dim}")
    return np.asarray(X @ model.weights + model.bias, dtype=np.float64)


def predict_proba_batch(model: LinearModel, X) -> np.ndarray:
    return expit(predict_margin_batch(model, X))


def predict_label_batch(model: LinearModel, X, threshold: float = 0.5) -> np.ndarray:
    return (predict_proba_batch(model, X) >= threshold).astype(np.int64)


def save_model(model: LinearModel, path: str | Path) -> None:
    """Persist a model as JSON, sparse or dense by weight occupancy."""
    nonzero = np.flatnonzero(model.weights)
    payload: dict = {
        "kind": model.kind,
        "bias": model.bias,
        "dim": model.dim,
        "train_config_digest": model.train_config_digest,
    }
    if model.adversary is not None:
        payload["adversary"] = list(model.adversary)
    if len(nonzero) * 3 < model.dim:
        payload["weights"] = {
            "sparse": {
                "indices": nonzero.tolist(),
                "values": model.weights[nonzero].tolist(),
            }
        }
    else:
        payload["weights"] = {"dense": model.weights.tolist()}
    Path(path).write_text(json.dumps(payload) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> LinearModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        weights = np.zeros(payload["dim"], dtype=np.float64)
        spec = payload["weights"]
        if "dense" in spec:
            weights[:] = spec["dense"]
        else:
            weights[spec["sparse"]["indices"]] = spec["sparse"]["values"]
        adversary = payload.get("adversary")
        return LinearModel(
            weights=weights,
            bias=float(payload["bias"]),
            kind=payload["kind"],
            train_config_digest=payload.get("train_config_digest", ""),
            adversary=None if adversary is None else (float(adversary[0]), float(adversary[1])),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"{path}: not a saved model: {exc}") from exc


class _LinearClassifierBase(ClassifierMixin, BaseEstimator):
    """Shared estimator plumbing over the trainer functions."""

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            l2_penalty=self.l2_penalty,
            batch_size=self.batch_size,
            seed=self.seed,
            decision_threshold=self.decision_threshold,
        )

    def decision_function(self, X) -> np.ndarray:
        self._require_fitted()
        return predict_margin_batch(self.model_, X)

    def predict_proba(self, X) -> np.ndarray:
        self._require_fitted()
        p = predict_proba_batch(self.model_, X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        return predict_label_batch(self.model_, X, threshold=self.decision_threshold)

    def _require_fitted(self) -> None:
        if not hasattr(self, "model_"):
            raise ValueError(f"{type(self).__name__} is not fitted; call fit first")


class LogisticSGDClassifier(_LinearClassifierBase):
    def __init__(
        self,
        epochs: int = 30,
        learning_rate: float = 0.1,
        l2_penalty: float = 1e-4,
        batch_size: int = 32,
        seed: int = 0,
        decision_threshold: float = 0.5,
    ):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2_penalty = l2_penalty
        self.batch_size = batch_size
        self.seed = seed
        self.decision_threshold = decision_threshold

    def fit(self, X, y):
        self.model_ = train_logistic(X, y, self._train_config())
        self.classes_ = np.array([0, 1])
        return self


class LinearSVMClassifier(_LinearClassifierBase):
    def __init__(
        self,
        epochs: int = 30,
        learning_rate: float = 0.1,
        l2_penalty: float = 1e-4,
        batch_size: int = 32,
        seed: int = 0,
        decision_threshold: float = 0.5,
    ):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2_penalty = l2_penalty
        self.batch_size = batch_size
        self.seed = seed
        self.decision_threshold = decision_threshold

    def fit(self, X, y):
        self.model_ = train_linear_svm(X, y, self._train_config())
        self.classes_ = np.array([0, 1])
        return self


class AdversarialDebiasingClassifier(_LinearClassifierBase):
    """Logistic head trained against a group-recovery adversary.

    fit requires the per-example group attribute alongside the labels.
    """

    def __init__(
        self,
        epochs: int = 30,
        learning_rate: float = 0.1,
        l2_penalty: float = 1e-4,
        batch_size: int = 32,
        seed: int = 0,
        decision_threshold: float = 0.5,
        adversary_weight: float = 1.0,
    ):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.l2_penalty = l2_penalty
        self.batch_size = batch_size
        self.seed = seed
        self.decision_threshold = decision_threshold
        self.adversary_weight = adversary_weight

    def fit(self, X, y, groups=None):
        if groups is None:
            raise ValueError("AdversarialDebiasingClassifier.fit requires groups")
        config = AdvDebiasConfig(base=self._train_config(), adversary_weight=self.adversary_weight)
        self.model_ = train_adv_debias(X, y, groups, config)
        self.classes_ = np.array([0, 1])
        return self

"""From-scratch binary classifiers over feature vectors.

Three trainers: full-batch gradient descent for L2-regularized logistic
regression, closed-form Gaussian naive Bayes, and an SVM (Pegasos
subgradient descent for the linear kernel, simplified SMO on the dual for
rbf).  Logistic regression and SVM inputs are z-score standardized; naive
Bayes sees raw features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import DataError

MODEL_FORMAT = "humorkit-model"
MODEL_VERSION = 1

ModelKind = Literal["logreg", "gnb", "svm"]


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError("row count of X must equal length of y")
        if len(self.feature_names) != self.X.shape[1]:
            raise DataError("feature_names length must equal column count")
        if not np.all(np.isfinite(self.X)):
            raise DataError("feature matrix contains NaN or Inf")
        if not np.all(np.isin(self.y, (0, 1))):
            raise DataError("labels must be binary 0/1")


@dataclass
class TrainConfig:
    seed: int = 0
    epochs: int = 300
    learning_rate: float = 0.1
    regularization: float = 1e-3
    gamma: float | None = None  # None = 1 / (n_features * feature variance)
    kernel: Literal["linear", "rbf"] = "rbf"


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)  # constant columns pass through
        return cls(mean=mean, std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


@dataclass
class Model:
    kind: ModelKind
    parameters: dict
    feature_names: list[str]
    standardizer: Standardizer | None = None
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logreg_loss_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, reg: float
) -> tuple[float, np.ndarray, float]:
    """Mean L2-regularized log loss and its analytic gradient.

    loss = mean_i log(1 + exp(-y'_i (w.x_i + b))) + reg/2 ||w||^2
    with y' in {-1, +1}; the bias is unregularized.
    """
    n = X.shape[0]
    z = X @ w + b
    sign = 2.0 * y - 1.0
    loss = float(np.mean(np.logaddexp(0.0, -sign * z)) + 0.5 * reg * float(w @ w))
    p = _sigmoid(z)
    residual = p - y
    grad_w = X.T @ residual / n + reg * w
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def _train_logreg(data: Dataset, cfg: TrainConfig) -> Model:
    std = Standardizer.fit(data.X)
    X = std.transform(data.X)
    y = data.y.astype(np.float64)
    w = np.zeros(X.shape[1])
    b = 0.0
    history: list[float] = []
    for epoch in range(cfg.epochs):
        loss, grad_w, grad_b = logreg_loss_grad(w, b, X, y, cfg.regularization)
        if not np.isfinite(loss):
            raise DataError(f"non-finite training loss at epoch {epoch}")
        history.append(loss)
        w -= cfg.learning_rate * grad_w
        b -= cfg.learning_rate * grad_b
    return Model(
        kind="logreg",
        parameters={"weights": w, "bias": b},
        feature_names=list(data.feature_names),
        standardizer=std,
        train_loss=history,
    )


def gnb_fit(X: np.ndarray, y: np.ndarray) -> dict:
    """Closed-form Gaussian naive Bayes fit with variance smoothing.

    Smoothing adds eps = 1e-9 * max feature variance (over the whole data)
    to every class-conditional variance.
    """
    eps = 1e-9 * float(np.max(X.var(axis=0)))
    params: dict = {"classes": [0, 1], "priors": [], "means": [], "variances": []}
    for cls in (0, 1):
        rows = X[y == cls]
        params["priors"].append(rows.shape[0] / X.shape[0])
        params["means"].append(rows.mean(axis=0))
        params["variances"].append(rows.var(axis=0) + eps)
    return params


def _train_gnb(data: Dataset, cfg: TrainConfig) -> Model:
    params = gnb_fit(data.X, data.y)
    return Model(
        kind="gnb",
        parameters=params,
        feature_names=list(data.feature_names),
        standardizer=None,
    )


def _rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _default_gamma(X: np.ndarray) -> float:
    var = float(X.var())
    if var <= 0:
        var = 1.0
    return 1.0 / (X.shape[1] * var)


def _train_svm_linear(data: Dataset, cfg: TrainConfig) -> Model:
    # Pegasos on the augmented primal; the constant column folds the bias in.
    std = Standardizer.fit(data.X)
    X = np.hstack([std.transform(data.X), np.ones((data.X.shape[0], 1))])
    y = 2.0 * data.y.astype(np.float64) - 1.0
    lam = cfg.regularization
    rng = np.random.default_rng(cfg.seed)
    n = X.shape[0]
    w = np.zeros(X.shape[1])
    t = 0
    for _ in range(cfg.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y[i] * float(X[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * y[i] * X[i]
    if not np.all(np.isfinite(w)):
        raise DataError("non-finite SVM weights after training")
    return Model(
        kind="svm",
        parameters={"kernel": "linear", "weights": w[:-1], "bias": float(w[-1])},
        feature_names=list(data.feature_names),
        standardizer=std,
    )


def _train_svm_rbf(data: Dataset, cfg: TrainConfig) -> Model:
    std = Standardizer.fit(data.X)
    X = std.transform(data.X)
    y = 2.0 * data.y.astype(np.float64) - 1.0
    n = X.shape[0]
    gamma = cfg.gamma if cfg.gamma is not None else _default_gamma(X)
    C = 1.0 / max(cfg.regularization, 1e-12)
    K = _rbf_kernel(X, X, gamma)
    rng = np.random.default_rng(cfg.seed)

    alphas = np.zeros(n)
    b = 0.0
    tol = 1e-3
    passes = 0
    max_passes = 3
    iterations = 0

    def decision(idx: int) -> float:
        return float((alphas * y) @ K[:, idx] + b)

    while passes < max_passes and iterations < cfg.epochs:
        iterations += 1
        num_changed = 0
        for i in range(n):
            e_i = decision(i) - y[i]
            if (y[i] * e_i < -tol and alphas[i] < C) or (y[i] * e_i > tol and alphas[i] > 0):
                j = int(rng.integers(n - 1))
                if j >= i:
                    j += 1
                e_j = decision(j) - y[j]
                a_i_old, a_j_old = alphas[i], alphas[j]
                if y[i] != y[j]:
                    lo = max(0.0, a_j_old - a_i_old)
                    hi = min(C, C + a_j_old - a_i_old)
                else:
                    lo = max(0.0, a_i_old + a_j_old - C)
                    hi = min(C, a_i_old + a_j_old)
                if lo == hi:
                    continue
                eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
                if eta >= 0:
                    continue
                a_j = a_j_old - y[j] * (e_i - e_j) / eta
                a_j = min(hi, max(lo, a_j))
                if abs(a_j - a_j_old) < 1e-7:
                    continue
                a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
                alphas[i], alphas[j] = a_i, a_j
                b1 = b - e_i - y[i] * (a_i - a_i_old) * K[i, i] - y[j] * (a_j - a_j_old) * K[i, j]
                b2 = b - e_j - y[i] * (a_i - a_i_old) * K[i, j] - y[j] * (a_j - a_j_old) * K[j, j]
                if 0 < a_i < C:
                    b = b1
                elif 0 < a_j < C:
                    b = b2
                else:
                    b = (b1 + b2) / 2.0
                num_changed += 1
        passes = passes + 1 if num_changed == 0 else 0

    support = alphas > 1e-8
    return Model(
        kind="svm",
        parameters={
            "kernel": "rbf",
            "gamma": gamma,
            "support_vectors": X[support],
            "coef": (alphas * y)[support],
            "bias": b,
        },
        feature_names=list(data.feature_names),
        standardizer=std,
    )


def train(kind: ModelKind, data: Dataset, cfg: TrainConfig | None = None) -> Model:
    """Train a classifier of the given kind; deterministic per cfg.seed."""
    cfg = cfg or TrainConfig()
    if data.X.shape[0] < 2 or len(np.unique(data.y)) < 2:
        raise DataError("training requires at least 2 examples with both classes present")
    if kind == "logreg":
        return _train_logreg(data, cfg)
    if kind == "gnb":
        return _train_gnb(data, cfg)
    if kind == "svm":
        if cfg.kernel == "linear":
            return _train_svm_linear(data, cfg)
        return _train_svm_rbf(data, cfg)
    raise ValueError(f"unknown model kind: {kind!r}")


def _decision_scores(model: Model, X: np.ndarray) -> np.ndarray:
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"expected {model.n_features} features, got shape {X.shape}"
        )
    if model.kind == "logreg":
        Xs = model.standardizer.transform(X)
        return _sigmoid(Xs @ model.parameters["weights"] + model.parameters["bias"])
    if model.kind == "gnb":
        p = model.parameters
        log_joint = np.empty((X.shape[0], 2))
        for c in (0, 1):
            mean = np.asarray(p["means"][c])
            var = np.asarray(p["variances"][c])
            ll = -0.5 * (np.log(2.0 * np.pi * var) + (X - mean) ** 2 / var).sum(axis=1)
            log_joint[:, c] = np.log(p["priors"][c]) + ll
        shifted = log_joint - log_joint.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        return probs[:, 1]
    if model.kind == "svm":
        Xs = model.standardizer.transform(X)
        p = model.parameters
        if p["kernel"] == "linear":
            return Xs @ p["weights"] + p["bias"]
        K = _rbf_kernel(np.asarray(p["support_vectors"]), Xs, p["gamma"])
        return np.asarray(p["coef"]) @ K + p["bias"]
    raise ValueError(f"unknown model kind: {model.kind!r}")


def predict(model: Model, x: np.ndarray) -> tuple[int, float]:
    """Label and score for one feature vector.

    The score is a class-1 probability for logreg/gnb and a signed margin
    for the SVM; the decision thresholds are 0.5 and 0 respectively.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("predict expects a single 1-D feature vector")
    score = float(_decision_scores(model, x[None, :])[0])
    threshold = 0.0 if model.kind == "svm" else 0.5
    return int(score >= threshold), score


def predict_batch(model: Model, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = _decision_scores(model, np.asarray(X, dtype=np.float64))
    threshold = 0.0 if model.kind == "svm" else 0.5
    return (scores >= threshold).astype(np.int64), scores


def evaluate(model: Model, data: Dataset) -> dict[str, float]:
    """Accuracy, precision, recall, F1 with class 1 (humor) as positive."""
    if data.X.shape[0] == 0:
        raise DataError("cannot evaluate on empty data")
    pred, _ = predict_batch(model, data.X)
    return metrics_from_predictions(data.y, pred)


def metrics_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> dict[str, float]:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    fp = int(np.sum((y_pred == 1) & (y_true == 0)))
    fn = int(np.sum((y_pred == 0) & (y_true == 1)))
    correct = int(np.sum(y_pred == y_true))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "accuracy": correct / y_true.shape[0],
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def stratified_split(
    data: Dataset, test_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """One seeded stratified train/test split preserving class balance."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    train_idx: list[int] = []
    for cls in (0, 1):
        idx = np.flatnonzero(data.y == cls)
        idx = idx[rng.permutation(idx.shape[0])]
        n_test = int(round(idx.shape[0] * test_fraction))
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    train_idx.sort()
    test_idx.sort()
    return (
        Dataset(data.X[train_idx], data.y[train_idx], data.feature_names),
        Dataset(data.X[test_idx], data.y[test_idx], data.feature_names),
    )


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_to_jsonable(v) for v in obj]
    return obj


def save_model(model: Model, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "feature_names": model.feature_names,
        "standardizer": None
        if model.standardizer is None
        else {
            "mean": model.standardizer.mean.tolist(),
            "std": model.standardizer.std.tolist(),
        },
        "parameters": _to_jsonable(model.parameters),
        "train_loss": model.train_loss,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path, expected_feature_names: list[str] | None = None) -> Model:
    """Load a model file, refusing on version or feature-name mismatch."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {path} is not valid JSON: {exc.msg}") from exc
    if payload.get("format") != MODEL_FORMAT or payload.get("version") != MODEL_VERSION:
        raise DataError(
            f"unsupported model file (format={payload.get('format')!r}, "
            f"version={payload.get('version')!r})"
        )
    names = payload["feature_names"]
    if expected_feature_names is not None and names != expected_feature_names:
        raise DataError("model feature names do not match the supplied data")
    std = None
    if payload["standardizer"] is not None:
        std = Standardizer(
            mean=np.asarray(payload["standardizer"]["mean"], dtype=np.float64),
            std=np.asarray(payload["standardizer"]["std"], dtype=np.float64),
        )
    params = payload["parameters"]
    for key in ("weights", "support_vectors", "coef"):
        if key in params:
            params[key] = np.asarray(params[key], dtype=np.float64)
    if params.get("means") is not None:
        params["means"] = [np.asarray(m, dtype=np.float64) for m in params["means"]]
        params["variances"] = [np.asarray(v, dtype=np.float64) for v in params["variances"]]
    return Model(
        kind=payload["kind"],
        parameters=params,
        feature_names=names,
        standardizer=std,
        train_loss=payload.get("train_loss", []),
    )

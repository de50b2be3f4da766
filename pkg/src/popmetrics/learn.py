"""Binary classifiers and evaluation.

The main classifier is a soft-margin RBF-kernel SVM trained by sequential
minimal optimization on the dual problem; a gradient-ascent logistic
regression serves as the baseline. Performance is measured with balanced
accuracy so unequal class sizes do not distort the score, and significance
against random chance comes from a seeded bootstrap over the test set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

SMO_TOL = 1e-3
SMO_MAX_UPDATES = 10_000
LOGISTIC_GRAD_TOL = 1e-6
LOGISTIC_MAX_ITER = 20_000


@dataclass
class LabeledDataset:
    features: np.ndarray   # (n, d)
    labels: np.ndarray     # (n,) in {-1, +1}
    song_ids: list[str]
    feature_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n, d = self.features.shape
        if self.labels.shape != (n,) or len(self.song_ids) != n or len(self.feature_names) != d:
            raise ValueError("inconsistent dataset dimensions")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise ValueError("labels must be -1 or +1")

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass
class Standardization:
    mean: np.ndarray
    std: np.ndarray  # zeros mark constant columns, mapped to 0


def standardize_fit(train_features: np.ndarray) -> Standardization:
    """Per-column mean/std from training rows; constant columns keep std 0."""
    x = np.asarray(train_features, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 training rows to standardize")
    return Standardization(mean=x.mean(axis=0), std=x.std(axis=0))


def standardize_apply(stats: Standardization, features: np.ndarray) -> np.ndarray:
    """Z-score columns with the training statistics; constant columns become 0."""
    x = np.asarray(features, dtype=np.float64)
    safe = np.where(stats.std > 0, stats.std, 1.0)
    z = (x - stats.mean) / safe
    return np.where(stats.std > 0, z, 0.0)


def median_split_labels(values, threshold: float) -> np.ndarray:
    """+1 above the threshold, -1 at or below it (ties go to the lower class)."""
    v = np.asarray(values, dtype=np.float64)
    if not np.isfinite(threshold):
        raise ValueError(f"threshold must be finite, got {threshold}")
    return np.where(v > threshold, 1, -1).astype(np.int64)


@dataclass
class TrainedModel:
    kind: str  # svm_rbf | logistic
    standardization: Standardization | None = None
    # svm_rbf
    support_vectors: np.ndarray | None = None
    support_indices: np.ndarray | None = None
    dual_coef: np.ndarray | None = None  # alpha_i * y_i for support vectors
    bias: float = 0.0
    C: float | None = None
    gamma: float | None = None
    # logistic
    weights: np.ndarray | None = None

    def decision_values(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if self.standardization is not None:
            x = standardize_apply(self.standardization, x)
        if self.kind == "svm_rbf":
            k = rbf_kernel(x, self.support_vectors, self.gamma)
            return k @ self.dual_coef + self.bias
        if self.kind == "logistic":
            return x @ self.weights + self.bias
        raise ValueError(f"unknown model kind {self.kind!r}")

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.where(self.decision_values(features) > 0, 1, -1).astype(np.int64)

    def to_json(self) -> str:
        d = {"kind": self.kind, "bias": self.bias}
        if self.standardization is not None:
            d["standardization"] = {
                "mean": self.standardization.mean.tolist(),
                "std": self.standardization.std.tolist(),
            }
        if self.kind == "svm_rbf":
            d.update(
                C=self.C,
                gamma=self.gamma,
                support_vectors=self.support_vectors.tolist(),
                support_indices=self.support_indices.tolist(),
                dual_coef=self.dual_coef.tolist(),
            )
        else:
            d["weights"] = self.weights.tolist()
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        d = json.loads(text)
        stats = None
        if "standardization" in d:
            stats = Standardization(
                mean=np.array(d["standardization"]["mean"]),
                std=np.array(d["standardization"]["std"]),
            )
        if d["kind"] == "svm_rbf":
            return cls(
                kind="svm_rbf",
                standardization=stats,
                support_vectors=np.array(d["support_vectors"]),
                support_indices=np.array(d["support_indices"], dtype=np.int64),
                dual_coef=np.array(d["dual_coef"]),
                bias=float(d["bias"]),
                C=float(d["C"]),
                gamma=float(d["gamma"]),
            )
        return cls(
            kind="logistic",
            standardization=stats,
            weights=np.array(d["weights"]),
            bias=float(d["bias"]),
        )


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a_i - b_j||^2) for all row pairs."""
    sq = (
        np.sum(a**2, axis=1)[:, None]
        - 2.0 * a @ b.T
        + np.sum(b**2, axis=1)[None, :]
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo_solve(
    kernel: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = SMO_TOL,
    max_updates: int = SMO_MAX_UPDATES,
) -> tuple[np.ndarray, float, int]:
    """Solve the soft-margin SVM dual by sequential minimal optimization.

    Works on the precomputed kernel matrix. Each step picks the maximally
    KKT-violating pair, solves the two-variable subproblem in closed form,
    and updates the gradient incrementally. Stops when the maximal violation
    drops below `tol` or after `max_updates` pair updates.

    Returns (alpha, bias, n_updates).
    """
    n = y.size
    yf = y.astype(np.float64)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 1/2 a'Qa - sum(a) at a = 0

    n_updates = 0
    while n_updates < max_updates:
        u = -yf * grad  # per-point optimality score
        in_up = ((yf > 0) & (alpha < C)) | ((yf < 0) & (alpha > 0))
        in_low = ((yf < 0) & (alpha < C)) | ((yf > 0) & (alpha > 0))
        if not in_up.any() or not in_low.any():
            break
        i = int(np.flatnonzero(in_up)[np.argmax(u[in_up])])
        j = int(np.flatnonzero(in_low)[np.argmin(u[in_low])])
        violation = u[i] - u[j]
        if violation < tol:
            break

        eta = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        step = violation / max(eta, 1e-12)
        # keep both multipliers inside [0, C]
        room_i = (C - alpha[i]) if yf[i] > 0 else alpha[i]
        room_j = alpha[j] if yf[j] > 0 else (C - alpha[j])
        step = min(step, room_i, room_j)

        alpha[i] += yf[i] * step
        alpha[j] -= yf[j] * step
        # land exactly on the box when the step was clipped there
        alpha[i] = min(max(alpha[i], 0.0), C)
        alpha[j] = min(max(alpha[j], 0.0), C)
        grad += step * yf * (kernel[:, i] - kernel[:, j])
        n_updates += 1
    else:
        logger.debug("SMO stopped at the %d-update cap (C=%g)", max_updates, C)

    u = -yf * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(u[free].mean())
    else:
        in_up = ((yf > 0) & (alpha < C)) | ((yf < 0) & (alpha > 0))
        in_low = ((yf < 0) & (alpha < C)) | ((yf > 0) & (alpha > 0))
        hi = u[in_up].max() if in_up.any() else 0.0
        lo = u[in_low].min() if in_low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, n_updates


def train_svm_rbf(data: LabeledDataset, C: float, gamma: float) -> TrainedModel:
    """Fit an RBF-kernel SVM on (already standardized) features."""
    if C <= 0 or gamma <= 0:
        raise ValueError(f"C and gamma must be positive, got C={C}, gamma={gamma}")
    _require_both_classes(data.labels)
    kernel = rbf_kernel(data.features, data.features, gamma)
    alpha, bias, _ = smo_solve(kernel, data.labels, C)
    support = np.flatnonzero(alpha > 0)
    return TrainedModel(
        kind="svm_rbf",
        support_vectors=data.features[support],
        support_indices=support,
        dual_coef=alpha[support] * data.labels[support],
        bias=bias,
        C=C,
        gamma=gamma,
    )


def _require_both_classes(labels: np.ndarray) -> None:
    if not ((labels == 1).any() and (labels == -1).any()):
        raise ValueError("need both classes present")


def logistic_objective(weights, bias, features, labels, l2: float) -> float:
    """L2-penalized log-likelihood (bias unpenalized)."""
    z = labels * (features @ weights + bias)
    return float(-np.logaddexp(0.0, -z).sum() - 0.5 * l2 * np.dot(weights, weights))


def logistic_gradient(weights, bias, features, labels, l2: float):
    """(d objective / d weights, d objective / d bias)."""
    z = labels * (features @ weights + bias)
    r = labels / (1.0 + np.exp(z))  # y * sigma(-y z)
    return features.T @ r - l2 * weights, float(r.sum())


def train_logistic(data: LabeledDataset, l2: float = 1.0) -> TrainedModel:
    """Maximize the penalized log-likelihood by gradient ascent with
    backtracking (Armijo) line search; stops when the gradient norm is below
    1e-6 or after a generous iteration cap."""
    if l2 < 0:
        raise ValueError(f"l2 must be >= 0, got {l2}")
    _require_both_classes(data.labels)
    x = data.features
    y = data.labels.astype(np.float64)
    w = np.zeros(x.shape[1])
    b = 0.0

    obj = logistic_objective(w, b, x, y, l2)
    for _ in range(LOGISTIC_MAX_ITER):
        gw, gb = logistic_gradient(w, b, x, y, l2)
        grad_norm = np.sqrt(np.dot(gw, gw) + gb * gb)
        if grad_norm < LOGISTIC_GRAD_TOL:
            break
        step = 1.0
        improved = False
        while step > 1e-16:
            cand_w = w + step * gw
            cand_b = b + step * gb
            cand_obj = logistic_objective(cand_w, cand_b, x, y, l2)
            if cand_obj >= obj + 1e-4 * step * grad_norm**2:
                improved = True
                break
            step *= 0.5
        if not improved:  # no ascent direction progress left at float precision
            break
        w, b, obj = cand_w, cand_b, cand_obj
    else:
        logger.debug("logistic ascent stopped at the iteration cap")
    return TrainedModel(kind="logistic", weights=w, bias=float(b))


@dataclass
class EvalReport:
    tp: int
    tn: int
    fp: int
    fn: int
    balanced_accuracy: float
    p_value: float | None = None
    significant: bool | None = None

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
            "balanced_accuracy": self.balanced_accuracy,
            "p_value": self.p_value,
            "significant": self.significant,
        }


def balanced_accuracy(predictions, labels) -> EvalReport:
    """Mean of the true-positive and true-negative rates, with counts."""
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.size == 0:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    _require_both_classes(labs)
    tp = int(np.sum((preds == 1) & (labs == 1)))
    tn = int(np.sum((preds == -1) & (labs == -1)))
    fp = int(np.sum((preds == 1) & (labs == -1)))
    fn = int(np.sum((preds == -1) & (labs == 1)))
    ba = 0.5 * (tp / (tp + fn) + tn / (tn + fp))
    return EvalReport(tp=tp, tn=tn, fp=fp, fn=fn, balanced_accuracy=ba)


def bootstrap_significance(predictions, labels, n_resamples: int = 1000, seed: int = 0) -> float:
    """One-sided bootstrap p-value of balanced accuracy against chance (0.5).

    Test indices are resampled with replacement; the p-value is the fraction
    of resamples whose balanced accuracy is <= 0.5. Resamples that lose one of
    the classes entirely are skipped.
    """
    preds = np.asarray(predictions, dtype=np.int64)
    labs = np.asarray(labels, dtype=np.int64)
    if preds.shape != labs.shape or preds.size == 0:
        raise ValueError("predictions and labels must be equal-length and non-empty")
    _require_both_classes(labs)
    n = labs.size
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_resamples, n))
    p = preds[idx]
    t = labs[idx]
    tp = np.sum((p == 1) & (t == 1), axis=1)
    tn = np.sum((p == -1) & (t == -1), axis=1)
    pos = np.sum(t == 1, axis=1)
    neg = n - pos
    valid = (pos > 0) & (neg > 0)
    if not valid.any():
        raise ValueError("no bootstrap resample contained both classes")
    ba = 0.5 * (tp[valid] / pos[valid] + tn[valid] / neg[valid])
    return float(np.mean(ba <= 0.5))


def evaluate_model(model: TrainedModel, data: LabeledDataset, n_resamples: int = 1000, seed: int = 0) -> EvalReport:
    """Predict, score, and attach bootstrap significance."""
    predictions = model.predict(data.features)
    report = balanced_accuracy(predictions, data.labels)
    report.p_value = bootstrap_significance(
        predictions, data.labels, n_resamples=n_resamples, seed=seed
    )
    report.significant = report.p_value < 0.05
    return report


DEFAULT_C_GRID = [2.0**e for e in range(-5, 16, 2)]
DEFAULT_GAMMA_GRID = [2.0**e for e in range(-15, 4, 2)]
DEFAULT_L2_GRID = [0.01, 0.1, 1.0, 10.0, 100.0]


def grid_search(
    train: LabeledDataset,
    validation: LabeledDataset,
    c_grid=None,
    gamma_grid=None,
) -> tuple[float, float]:
    """Exhaustive (C, gamma) search maximizing validation balanced accuracy.

    Ties are broken toward smaller C, then smaller gamma. Features must
    already be standardized.
    """
    c_grid = sorted(c_grid if c_grid is not None else DEFAULT_C_GRID)
    gamma_grid = sorted(gamma_grid if gamma_grid is not None else DEFAULT_GAMMA_GRID)
    if not c_grid or not gamma_grid:
        raise ValueError("grids must be non-empty")
    _require_both_classes(train.labels)

    # the kernel depends only on gamma, so hoist it out of the C loop
    results = []
    for gamma in gamma_grid:
        k_train = rbf_kernel(train.features, train.features, gamma)
        k_val = rbf_kernel(validation.features, train.features, gamma)
        for c in c_grid:
            alpha, bias, _ = smo_solve(k_train, train.labels, c)
            decisions = k_val @ (alpha * train.labels) + bias
            predictions = np.where(decisions > 0, 1, -1)
            ba = balanced_accuracy(predictions, validation.labels).balanced_accuracy
            results.append((ba, c, gamma))
    best = min(results, key=lambda r: (-r[0], r[1], r[2]))
    return best[1], best[2]

"""From-scratch feed-forward binary classifier.

Rectified-linear hidden layers, a single sigmoid output read as the
probability of Wigner negativity, mean-squared-error loss, hand-rolled
backpropagation, and the Adam update with bias correction. Training is
single-threaded and bitwise deterministic for a fixed seed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .features import Dataset, LabeledExample, dataset_arrays

__all__ = [
    "MlpModel",
    "AdamState",
    "TrainConfig",
    "EvalMetrics",
    "RocCurve",
    "PrecisionRecallCurve",
    "init_model",
    "forward",
    "predict_proba",
    "loss_and_gradient",
    "init_adam",
    "adam_step",
    "train",
    "classify",
    "evaluate",
    "confusion_metrics",
    "roc_curve",
    "precision_recall_curve",
    "grid_search",
    "save_model",
    "load_model",
    "save_history",
    "load_history",
]

# sigmoid stays strictly inside (0, 1) in double precision for |z| <= 36;
# larger pre-activations are clamped and counted on the model.
_SIGMOID_CLIP = 36.0

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "train_acc", "val_acc")


@dataclass
class MlpModel:
    """Weights and biases of the feed-forward network.

    ``weights[i]`` has shape (fan_in, fan_out); hidden activations are
    rectified linear and the single output unit is a sigmoid.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    saturation_events: int = 0

    @property
    def parameter_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def copy_weights(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]


def init_model(layer_sizes: list[int], seed: int) -> MlpModel:
    """Fan-balanced uniform initialization: |w| <= sqrt(6 / (fan_in + fan_out))."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=list(layer_sizes), weights=weights, biases=biases)


def _sigmoid(model: MlpModel, z: np.ndarray) -> np.ndarray:
    clipped = np.clip(z, -_SIGMOID_CLIP, _SIGMOID_CLIP)
    n_clipped = int(np.count_nonzero(clipped != z))
    if n_clipped:
        model.saturation_events += n_clipped
    return 1.0 / (1.0 + np.exp(-clipped))


def _forward_pass(model: MlpModel, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Return (pre-activations, activations); activations[0] is the input."""
    activations = [x]
    pre_activations = []
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre_activations.append(z)
        a = _sigmoid(model, z) if i == last else np.maximum(z, 0.0)
        activations.append(a)
    return pre_activations, activations


def predict_proba(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Negativity probabilities for a feature matrix of shape (n, n_in)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"expected {model.layer_sizes[0]} features, got {x.shape[1]}")
    _, activations = _forward_pass(model, x)
    return activations[-1][:, 0]


def forward(model: MlpModel, features: np.ndarray) -> float:
    """Probability that a single feature vector comes from a negative state."""
    return float(predict_proba(model, np.asarray(features, dtype=float)[None, :])[0])


def loss_and_gradient(
    model: MlpModel, x: np.ndarray, y: np.ndarray
) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]]]:
    """Mean-squared-error loss and its gradients on a mini-batch.

    Gradients are accumulated in reverse mode; the rectifier subgradient at
    exactly zero is taken to be zero.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] == 0:
        raise ValueError("mini-batch must be nonempty")
    batch = x.shape[0]
    pre_activations, activations = _forward_pass(model, x)
    output = activations[-1][:, 0]
    residual = output - y
    loss = float(np.mean(residual**2))
    grad_w = [np.empty_like(w) for w in model.weights]
    grad_b = [np.empty_like(b) for b in model.biases]
    # d loss / d output, then through the sigmoid
    delta = (2.0 / batch) * residual * output * (1.0 - output)
    delta = delta[:, None]
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre_activations[i - 1] > 0.0)
    return loss, (grad_w, grad_b)


@dataclass
class AdamState:
    """First/second-moment accumulators and step counter of the Adam update."""

    learning_rate: float
    epsilon: float
    beta1: float
    beta2: float
    step: int
    moment1_w: list[np.ndarray]
    moment2_w: list[np.ndarray]
    moment1_b: list[np.ndarray]
    moment2_b: list[np.ndarray]


def init_adam(
    model: MlpModel,
    learning_rate: float = 1e-3,
    epsilon: float = 1e-8,
    beta1: float = 0.9,
    beta2: float = 0.999,
) -> AdamState:
    return AdamState(
        learning_rate=learning_rate,
        epsilon=epsilon,
        beta1=beta1,
        beta2=beta2,
        step=0,
        moment1_w=[np.zeros_like(w) for w in model.weights],
        moment2_w=[np.zeros_like(w) for w in model.weights],
        moment1_b=[np.zeros_like(b) for b in model.biases],
        moment2_b=[np.zeros_like(b) for b in model.biases],
    )


def adam_step(
    state: AdamState, model: MlpModel, gradients: tuple[list[np.ndarray], list[np.ndarray]]
) -> tuple[MlpModel, AdamState]:
    """One Adam update, in place: exponential moment averages, bias
    correction, then theta -= lr * m_hat / (sqrt(v_hat) + eps)."""
    grad_w, grad_b = gradients
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for params, grads, m1, m2 in (
        (model.weights, grad_w, state.moment1_w, state.moment2_w),
        (model.biases, grad_b, state.moment1_b, state.moment2_b),
    ):
        for p, g, m, v in zip(params, grads, m1, m2):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    return model, state


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0
    threshold: float = 0.5
    hidden_sizes: tuple[int, ...] = (30, 20, 10)
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ValueError("batch_size/max_epochs must be >= 1 and patience >= 0")

    def to_json_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "threshold": self.threshold,
            "hidden_sizes": list(self.hidden_sizes),
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_json_dict(cls, record: dict) -> TrainConfig:
        record = dict(record)
        if "hidden_sizes" in record:
            record["hidden_sizes"] = tuple(record["hidden_sizes"])
        return cls(**record)


def _loss_and_accuracy(model: MlpModel, x: np.ndarray, y: np.ndarray, threshold: float) -> tuple[float, float]:
    probs = predict_proba(model, x)
    loss = float(np.mean((probs - y) ** 2))
    accuracy = float(np.mean((probs > threshold) == (y > 0.5)))
    return loss, accuracy


def train(dataset: Dataset, config: TrainConfig) -> tuple[MlpModel, list[dict]]:
    """Train with shuffled mini-batches, Adam, and early stopping.

    Stops once the validation loss has failed to improve for more than
    ``patience`` consecutive epochs (patience 0 stops at the first
    non-improving epoch) and restores the best-validation-epoch weights.
    Returns the model and a per-epoch history of losses and accuracies.
    """
    x_train, y_train = dataset_arrays(dataset, "train")
    x_val, y_val = dataset_arrays(dataset, "val")
    rng = np.random.default_rng(config.seed)
    layer_sizes = [x_train.shape[1], *config.hidden_sizes, 1]
    model = init_model(layer_sizes, seed=config.seed)
    state = init_adam(model, learning_rate=config.learning_rate, epsilon=config.epsilon)
    history: list[dict] = []
    best_val = np.inf
    best_weights = model.copy_weights()
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(x_train.shape[0])
        for start in range(0, order.size, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = loss_and_gradient(model, x_train[idx], y_train[idx])
            adam_step(state, model, grads)
        train_loss, train_acc = _loss_and_accuracy(model, x_train, y_train, config.threshold)
        val_loss, val_acc = _loss_and_accuracy(model, x_val, y_val, config.threshold)
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "train_acc": train_acc,
                "val_acc": val_acc,
            }
        )
        if val_loss < best_val:
            best_val = val_loss
            best_weights = model.copy_weights()
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    model.weights, model.biases = best_weights
    return model, history


def classify(model: MlpModel, features: np.ndarray, threshold: float = 0.5) -> int:
    """1 when the output probability strictly exceeds the threshold."""
    return int(forward(model, features) > threshold)


@dataclass(frozen=True)
class EvalMetrics:
    """Confusion counts and the derived rates; NaN marks 0/0 ratios."""

    accuracy: float
    mse: float
    true_positives: int
    true_negatives: int
    false_positives: int
    false_negatives: int
    recall: float
    specificity: float
    precision: float


def confusion_metrics(scores: np.ndarray, labels: np.ndarray, threshold: float) -> EvalMetrics:
    """Metrics of thresholded scores against binary labels."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(int)
    if scores.size == 0:
        raise ValueError("cannot evaluate an empty example set")
    predicted = scores > threshold
    actual = labels == 1
    tp = int(np.sum(predicted & actual))
    tn = int(np.sum(~predicted & ~actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))

    def ratio(num: int, den: int) -> float:
        return num / den if den else float("nan")

    return EvalMetrics(
        accuracy=(tp + tn) / scores.size,
        mse=float(np.mean((scores - labels) ** 2)),
        true_positives=tp,
        true_negatives=tn,
        false_positives=fp,
        false_negatives=fn,
        recall=ratio(tp, tp + fn),
        specificity=ratio(tn, tn + fp),
        precision=ratio(tp, tp + fp),
    )


def _example_scores(model: MlpModel, examples: list[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([ex.features for ex in examples])
    y = np.array([ex.label for ex in examples])
    return predict_proba(model, x), y


def evaluate(model: MlpModel, examples: list[LabeledExample], threshold: float = 0.5) -> EvalMetrics:
    scores, labels = _example_scores(model, examples)
    return confusion_metrics(scores, labels, threshold)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray
    false_positive_rate: np.ndarray
    true_positive_rate: np.ndarray

    @property
    def auc(self) -> float:
        # lexicographic order keeps vertical curve segments zero-width
        order = np.lexsort((self.true_positive_rate, self.false_positive_rate))
        return float(np.trapezoid(self.true_positive_rate[order], self.false_positive_rate[order]))


@dataclass(frozen=True)
class PrecisionRecallCurve:
    thresholds: np.ndarray
    recall: np.ndarray
    precision: np.ndarray


def roc_curve(model: MlpModel, examples: list[LabeledExample], thresholds: np.ndarray) -> RocCurve:
    """Sweep thresholds: the curve runs from (1, 1) at 0 down to (0, 0) at 1."""
    thresholds = np.asarray(thresholds, dtype=float)
    scores, labels = _example_scores(model, examples)
    fpr = np.empty(thresholds.size)
    tpr = np.empty(thresholds.size)
    for i, th in enumerate(thresholds):
        metrics = confusion_metrics(scores, labels, th)
        fpr[i] = 1.0 - metrics.specificity
        tpr[i] = metrics.recall
    return RocCurve(thresholds=thresholds, false_positive_rate=fpr, true_positive_rate=tpr)


def precision_recall_curve(
    model: MlpModel, examples: list[LabeledExample], thresholds: np.ndarray
) -> PrecisionRecallCurve:
    """Precision against recall over a threshold sweep; precision is NaN
    wherever nothing is classified positive."""
    thresholds = np.asarray(thresholds, dtype=float)
    scores, labels = _example_scores(model, examples)
    recall = np.empty(thresholds.size)
    precision = np.empty(thresholds.size)
    for i, th in enumerate(thresholds):
        metrics = confusion_metrics(scores, labels, th)
        recall[i] = metrics.recall
        precision[i] = metrics.precision
    return PrecisionRecallCurve(thresholds=thresholds, recall=recall, precision=precision)


def grid_search(dataset: Dataset, grid: list[TrainConfig]) -> TrainConfig:
    """Train one model per configuration and keep the best validation loss.

    Ties are broken toward fewer parameters, then a lower learning rate.
    """
    if not grid:
        raise ValueError("hyperparameter grid is empty")
    results = []
    for config in grid:
        model, history = train(dataset, config)
        x_val, y_val = dataset_arrays(dataset, "val")
        val_loss, _ = _loss_and_accuracy(model, x_val, y_val, config.threshold)
        results.append((val_loss, model.parameter_count, config.learning_rate, config))
    results.sort(key=lambda item: (item[0], item[1], item[2]))
    return results[0][3]


def save_model(model: MlpModel, path, train_config: TrainConfig | None = None, dataset_header: dict | None = None) -> None:
    """Serialize layer sizes, row-major weights, biases and provenance."""
    record = {
        "layer_sizes": model.layer_sizes,
        "weights": [w.ravel().tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "activations": ["relu"] * (len(model.weights) - 1) + ["sigmoid"],
        "train_config": None if train_config is None else train_config.to_json_dict(),
        "dataset_header": dataset_header,
    }
    with open(path, "w") as handle:
        json.dump(record, handle)


def load_model(path) -> MlpModel:
    with open(path) as handle:
        record = json.load(handle)
    sizes = record["layer_sizes"]
    weights = [
        np.array(flat, dtype=float).reshape(fan_in, fan_out)
        for flat, fan_in, fan_out in zip(record["weights"], sizes[:-1], sizes[1:])
    ]
    biases = [np.array(b, dtype=float) for b in record["biases"]]
    return MlpModel(layer_sizes=list(sizes), weights=weights, biases=biases)


def save_history(history: list[dict], path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow(
                [row["epoch"]] + [repr(float(row[c])) for c in HISTORY_COLUMNS[1:]]
            )


def load_history(path) -> list[dict]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != HISTORY_COLUMNS:
            raise ValueError(f"{path}: unexpected history columns {header}")
        history = []
        for row in reader:
            history.append(
                {
                    "epoch": int(row[0]),
                    "train_loss": float(row[1]),
                    "val_loss": float(row[2]),
                    "train_acc": float(row[3]),
                    "val_acc": float(row[4]),
                }
            )
    return history

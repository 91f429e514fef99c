"""MLP regressor mapping a design vector to its scalar performance summary.

Plain numpy implementation: mini-batch Adam on mean-squared error, inverted
dropout during training only, early stopping on a held-out validation split
with best-weight restoration, and k-fold cross-validated RMSE to measure the
model error that drives the gating threshold.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Array, rng_from
from .dataset import Dataset

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class MlpConfig:
    """Network and trainer settings."""

    hidden: tuple[int, ...]
    activation: str = "relu"  # relu | leaky_relu | linear
    dropout: tuple[float, ...] = ()
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    val_fraction: float = 0.3
    patience: int = 20

    def __post_init__(self):
        if any(w < 1 for w in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if self.activation not in ("relu", "leaky_relu", "linear"):
            raise ValueError(f"unknown activation {self.activation!r}")
        drop = tuple(self.dropout) if self.dropout else (0.0,) * len(self.hidden)
        if len(drop) != len(self.hidden):
            raise ValueError("need one dropout rate per hidden layer")
        if any(not (0.0 <= p < 1.0) for p in drop):
            raise ValueError("dropout rates must be in [0, 1)")
        object.__setattr__(self, "dropout", drop)

    @classmethod
    def sfr_default(cls) -> "MlpConfig":
        return cls(
            hidden=(388, 322),
            activation="relu",
            dropout=(0.1, 0.0),
            epochs=500,
            batch_size=64,
            learning_rate=6e-4,
        )

    @classmethod
    def aid_default(cls) -> "MlpConfig":
        return cls(
            hidden=(92, 116, 34),
            activation="leaky_relu",
            dropout=(0.1, 0.1, 0.0),
            epochs=100,
            batch_size=128,
            learning_rate=8.3e-4,
        )


def _activate(z: Array, kind: str) -> Array:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "leaky_relu":
        return np.where(z > 0.0, z, LEAKY_SLOPE * z)
    return z


def _activate_grad(z: Array, kind: str) -> Array:
    if kind == "relu":
        return (z > 0.0).astype(float)
    if kind == "leaky_relu":
        return np.where(z > 0.0, 1.0, LEAKY_SLOPE)
    return np.ones_like(z)


def _init_params(dims: list[int], rng: np.random.Generator):
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        limit = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
        biases.append(rng.uniform(-limit, limit, size=n_out))
    return weights, biases


def _forward(x, weights, biases, activation, dropout=None, rng=None):
    """Returns (prediction, per-layer pre-activations, per-layer inputs, masks)."""
    pre, inputs, masks = [], [], []
    h = x
    n_hidden = len(weights) - 1
    for layer in range(n_hidden):
        inputs.append(h)
        z = h @ weights[layer] + biases[layer]
        pre.append(z)
        h = _activate(z, activation)
        if dropout is not None and dropout[layer] > 0.0:
            keep = 1.0 - dropout[layer]
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
            masks.append(mask)
        else:
            masks.append(None)
    inputs.append(h)
    out = h @ weights[-1] + biases[-1]
    return out[:, 0], pre, inputs, masks


def _backward(x, y, weights, biases, activation, dropout=None, rng=None):
    """Mean-squared-error loss and its gradients for one batch."""
    pred, pre, inputs, masks = _forward(x, weights, biases, activation, dropout, rng)
    n = x.shape[0]
    resid = pred - y
    loss = float(np.mean(resid**2))

    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    delta = (2.0 / n) * resid[:, None]  # d loss / d output
    grad_w[-1] = inputs[-1].T @ delta
    grad_b[-1] = delta.sum(axis=0)
    back = delta @ weights[-1].T
    for layer in range(len(weights) - 2, -1, -1):
        if masks[layer] is not None:
            back = back * masks[layer]
        back = back * _activate_grad(pre[layer], activation)
        grad_w[layer] = inputs[layer].T @ back
        grad_b[layer] = back.sum(axis=0)
        if layer > 0:
            back = back @ weights[layer].T
    return loss, grad_w, grad_b


@dataclass
class SurrogateModel:
    """Trained network plus the standardization stats needed for inference."""

    weights: list
    biases: list
    activation: str
    x_mean: Array
    x_std: Array
    y_mean: float
    y_std: float
    cv_rmse: float = float("nan")
    history: dict = field(default_factory=dict, repr=False)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def standardize(self, x: Array) -> Array:
        return (np.asarray(x, dtype=float) - self.x_mean) / self.x_std

    def predict(self, x) -> float | Array:
        """Deterministic forward pass; dropout is never applied at inference."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        batch = np.atleast_2d(arr)
        if batch.shape[1] != self.input_dim:
            raise ValueError(
                f"model expects {self.input_dim} inputs, got {batch.shape[1]}"
            )
        z = self.standardize(batch)
        out, _, _, _ = _forward(z, self.weights, self.biases, self.activation)
        out = out * self.y_std + self.y_mean
        return float(out[0]) if single else out

    def save(self, path) -> None:
        """Versioned JSON weight file; round-trips bit-exactly."""
        def pack(a: Array) -> dict:
            arr = np.ascontiguousarray(a, dtype="<f8")
            return {
                "shape": list(arr.shape),
                "data": base64.b64encode(arr.tobytes()).decode("ascii"),
            }

        doc = {
            "format_version": 1,
            "activation": self.activation,
            "weights": [pack(w) for w in self.weights],
            "biases": [pack(b) for b in self.biases],
            "x_mean": pack(self.x_mean),
            "x_std": pack(self.x_std),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "cv_rmse": self.cv_rmse,
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SurrogateModel":
        doc = json.loads(Path(path).read_text())
        if doc.get("format_version") != 1:
            raise ValueError("unsupported model file version")

        def unpack(entry: dict) -> Array:
            arr = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8")
            return arr.reshape(entry["shape"]).copy()

        return cls(
            weights=[unpack(w) for w in doc["weights"]],
            biases=[unpack(b) for b in doc["biases"]],
            activation=doc["activation"],
            x_mean=unpack(doc["x_mean"]),
            x_std=unpack(doc["x_std"]),
            y_mean=float(doc["y_mean"]),
            y_std=float(doc["y_std"]),
            cv_rmse=float(doc["cv_rmse"]),
        )


def train(data: Dataset, cfg: MlpConfig, seed: int) -> SurrogateModel:
    """Fit the network; early-stops on validation loss and restores the best
    weights seen. Raises on divergence."""
    if data.n < 10:
        raise ValueError("need at least 10 samples to train")
    rng = rng_from(seed, "mlp-train")

    x_all = data.inputs
    y_all = data.labels
    perm = rng.permutation(data.n)
    n_val = max(1, int(round(cfg.val_fraction * data.n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        raise ValueError("validation fraction leaves no training data")

    x_mean = x_all[train_idx].mean(axis=0)
    x_std = x_all[train_idx].std(axis=0)
    x_std = np.where(x_std < 1e-12, 1.0, x_std)
    y_mean = float(y_all[train_idx].mean())
    y_std = float(y_all[train_idx].std())
    if y_std < 1e-12:
        y_std = 1.0

    xt = (x_all[train_idx] - x_mean) / x_std
    yt = (y_all[train_idx] - y_mean) / y_std
    xv = (x_all[val_idx] - x_mean) / x_std
    yv = (y_all[val_idx] - y_mean) / y_std

    dims = [data.dim, *cfg.hidden, 1]
    weights, biases = _init_params(dims, rng)

    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0

    def adam_update(grad_w, grad_b):
        nonlocal step
        step += 1
        corr1 = 1.0 - ADAM_BETA1**step
        corr2 = 1.0 - ADAM_BETA2**step
        for i in range(len(weights)):
            for g, p, m, v in (
                (grad_w[i], weights[i], m_w[i], v_w[i]),
                (grad_b[i], biases[i], m_b[i], v_b[i]),
            ):
                m *= ADAM_BETA1
                m += (1 - ADAM_BETA1) * g
                v *= ADAM_BETA2
                v += (1 - ADAM_BETA2) * g**2
                p -= cfg.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + ADAM_EPS)

    def split_loss(x, y):
        pred, _, _, _ = _forward(x, weights, biases, cfg.activation)
        return float(np.mean((pred - y) ** 2))

    best_val = split_loss(xv, yv)
    best_weights = [w.copy() for w in weights]
    best_biases = [b.copy() for b in biases]
    since_best = 0
    train_hist, val_hist = [], []

    for epoch in range(cfg.epochs):
        order = rng.permutation(train_idx.size)
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grad_w, grad_b = _backward(
                xt[batch], yt[batch], weights, biases, cfg.activation,
                dropout=cfg.dropout, rng=rng,
            )
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch} (non-finite loss)"
                )
            adam_update(grad_w, grad_b)

        train_hist.append(split_loss(xt, yt))
        val_loss = split_loss(xv, yv)
        val_hist.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_weights = [w.copy() for w in weights]
            best_biases = [b.copy() for b in biases]
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    return SurrogateModel(
        weights=best_weights,
        biases=best_biases,
        activation=cfg.activation,
        x_mean=x_mean,
        x_std=x_std,
        y_mean=y_mean,
        y_std=y_std,
        history={
            "train_loss": train_hist,
            "val_loss": val_hist,
            "epochs_run": len(train_hist),
        },
    )


def predict(model: SurrogateModel, x) -> float | Array:
    return model.predict(x)


def kfold_rmse(
    data: Dataset, cfg: MlpConfig, k: int = 5, seed: int = 0
) -> tuple[float, float]:
    """Mean and spread of the held-out RMSE over k shuffled folds."""
    if data.n < k:
        raise ValueError(f"need at least k={k} samples")
    rng = rng_from(seed, "kfold")
    folds = np.array_split(rng.permutation(data.n), k)
    scores = []
    for i, held in enumerate(folds):
        train_rows = np.setdiff1d(np.arange(data.n), held)
        sub = Dataset(data.inputs[train_rows], data.labels[train_rows])
        model = train(sub, cfg, seed=int(rng_from(seed, "kfold-fold", i).integers(2**31)))
        pred = model.predict(data.inputs[held])
        scores.append(float(np.sqrt(np.mean((pred - data.labels[held]) ** 2))))
    return float(np.mean(scores)), float(np.std(scores))


def fit_with_cv(
    data: Dataset, cfg: MlpConfig, k: int = 5, seed: int = 0
) -> SurrogateModel:
    """K-fold RMSE first, then a final fit on all rows with cv_rmse attached."""
    mean_rmse, std_rmse = kfold_rmse(data, cfg, k=k, seed=seed)
    model = train(data, cfg, seed=seed)
    model.cv_rmse = mean_rmse
    model.history["cv_rmse_std"] = std_rmse
    return model


def _flatten_params(weights, biases) -> Array:
    return np.concatenate([a.ravel() for a in (*weights, *biases)])


def _unflatten_params(theta: Array, weights, biases):
    out_w, out_b, k = [], [], 0
    for w in weights:
        out_w.append(theta[k : k + w.size].reshape(w.shape))
        k += w.size
    for b in biases:
        out_b.append(theta[k : k + b.size].reshape(b.shape))
        k += b.size
    return out_w, out_b


def gradient_check(
    model: SurrogateModel, x: Array, direction: Array, y: float = 0.0, h: float = 1e-5
) -> float:
    """Relative error between the analytic directional loss gradient and a
    central finite difference along `direction` in parameter space."""
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    yb = np.full(xb.shape[0], float(y))
    theta = _flatten_params(model.weights, model.biases)
    d = np.asarray(direction, dtype=float)
    if d.size != theta.size:
        raise ValueError(f"direction needs {theta.size} entries, got {d.size}")

    _, grad_w, grad_b = _backward(xb, yb, model.weights, model.biases, model.activation)
    analytic = float(_flatten_params(grad_w, grad_b) @ d)

    def loss_at(t: Array) -> float:
        w, b = _unflatten_params(t, model.weights, model.biases)
        pred, _, _, _ = _forward(xb, w, b, model.activation)
        return float(np.mean((pred - yb) ** 2))

    fd = (loss_at(theta + h * d) - loss_at(theta - h * d)) / (2.0 * h)
    scale = max(abs(analytic), abs(fd))
    if scale == 0.0:
        return 0.0
    return abs(analytic - fd) / scale

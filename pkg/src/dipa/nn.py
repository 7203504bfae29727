"""Minimal fully-connected network with hand-written backpropagation.

The policy networks are small (two 64-unit hidden layers), so plain numpy
with an adaptive-moment optimizer is all that's needed.  Everything is
float64 and single-threaded, which keeps training bit-reproducible under a
fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingError(RuntimeError):
    pass


@dataclass
class MlpParams:
    """Affine-rectifier stack: ReLU on hidden layers, identity output."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, layer_sizes, rng: np.random.Generator) -> "MlpParams":
        """Scaled-uniform fan-in initialization: U(-1/sqrt(n_in), 1/sqrt(n_in))."""
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(n_in)
            weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
            biases.append(rng.uniform(-bound, bound, size=n_out))
        return cls(sizes, weights, biases)

    @classmethod
    def zeros(cls, layer_sizes) -> "MlpParams":
        sizes = tuple(int(s) for s in layer_sizes)
        return cls(
            sizes,
            [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
            [np.zeros(b) for b in sizes[1:]],
        )

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass(frozen=True)
class TrainSpec:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 300
    patience: int = 20
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass(frozen=True)
class TrainReport:
    epochs_run: int
    best_epoch: int
    best_val_loss: float
    final_train_loss: float
    train_losses: tuple[float, ...] = field(repr=False, default=())
    val_losses: tuple[float, ...] = field(repr=False, default=())

    def to_dict(self):
        return {
            "epochs_run": self.epochs_run,
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "final_train_loss": self.final_train_loss,
        }


def forward(params: MlpParams, x) -> np.ndarray:
    """Evaluate the network on a single input vector or a batch (rows)."""
    h = np.asarray(x, dtype=float)
    single = h.ndim == 1
    if single:
        h = h[None, :]
    if h.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"input width {h.shape[1]} != expected {params.layer_sizes[0]}")
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def mse_loss(params: MlpParams, inputs, targets) -> float:
    pred = forward(params, inputs)
    return float(np.mean((pred - np.asarray(targets, dtype=float)) ** 2))


def _forward_backward(params: MlpParams, inputs, targets):
    """Loss and gradients of mean squared error over the batch."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    if x.shape[1] != params.layer_sizes[0]:
        raise ValueError(f"input width {x.shape[1]} != expected {params.layer_sizes[0]}")

    activations = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.maximum(h, 0.0)
        activations.append(h)

    out = activations[-1]
    loss = float(np.mean((out - y) ** 2))
    # d(mean((out - y)^2)) / d(out); the mean runs over batch and output dims.
    delta = 2.0 * (out - y) / out.size

    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    for i in range(last, -1, -1):
        grads_w[i] = activations[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (activations[i] > 0.0)
    return loss, MlpGrads(grads_w, grads_b)


def backward(params: MlpParams, inputs, targets) -> MlpGrads:
    """Gradient of the batch mean-squared-error w.r.t. every parameter."""
    _, grads = _forward_backward(params, inputs, targets)
    return grads


def fit(params: MlpParams, inputs, targets, spec: TrainSpec) -> tuple[MlpParams, TrainReport]:
    """Mini-batch adaptive-moment training with early stopping.

    The dataset is split into train/validation by ``spec.seed``; training
    stops once the validation loss has not improved for ``patience``
    consecutive epochs (or at ``max_epochs``), and the parameters from the
    best validation epoch are returned.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    n = x.shape[0]
    if n < 10:
        raise ValueError(f"dataset too small to fit ({n} rows, need >= 10)")
    if y.shape[0] != n:
        raise ValueError("inputs and targets row counts differ")

    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(spec.validation_fraction * n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    xt, yt = x[train_idx], y[train_idx]
    xv, yv = x[val_idx], y[val_idx]

    work = params.copy()
    m_w = [np.zeros_like(w) for w in work.weights]
    v_w = [np.zeros_like(w) for w in work.weights]
    m_b = [np.zeros_like(b) for b in work.biases]
    v_b = [np.zeros_like(b) for b in work.biases]

    best = work.copy()
    best_val = float("inf")
    best_epoch = 0
    stall = 0
    step = 0
    train_losses: list[float] = []
    val_losses: list[float] = []

    for epoch in range(1, spec.max_epochs + 1):
        order = rng.permutation(len(xt))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(xt), spec.batch_size):
            idx = order[start : start + spec.batch_size]
            loss, grads = _forward_backward(work, xt[idx], yt[idx])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite training loss {loss!r} at epoch {epoch}, step {step} "
                    f"(lr={spec.learning_rate}, batch={spec.batch_size})"
                )
            epoch_loss += loss
            n_batches += 1
            step += 1
            bc1 = 1.0 - ADAM_BETA1**step
            bc2 = 1.0 - ADAM_BETA2**step
            for tensors, grad_list, m_list, v_list in (
                (work.weights, grads.weights, m_w, v_w),
                (work.biases, grads.biases, m_b, v_b),
            ):
                for p, g, m, v in zip(tensors, grad_list, m_list, v_list):
                    m *= ADAM_BETA1
                    m += (1 - ADAM_BETA1) * g
                    v *= ADAM_BETA2
                    v += (1 - ADAM_BETA2) * g * g
                    p -= spec.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)

        train_losses.append(epoch_loss / max(n_batches, 1))
        val_loss = mse_loss(work, xv, yv)
        if not np.isfinite(val_loss):
            raise TrainingError(f"non-finite validation loss at epoch {epoch}")
        val_losses.append(val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best = work.copy()
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
        if stall >= spec.patience:
            break

    return best, TrainReport(
        epochs_run=len(train_losses),
        best_epoch=best_epoch,
        best_val_loss=best_val,
        final_train_loss=train_losses[-1],
        train_losses=tuple(train_losses),
        val_losses=tuple(val_losses),
    )


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension standardization fitted on the training inputs."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    @classmethod
    def fit(cls, inputs) -> "Normalizer":
        x = np.atleast_2d(np.asarray(inputs, dtype=float))
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        # Constant features pass through unscaled instead of exploding.
        std = np.where(std < 1e-8, 1.0, std)
        return cls(tuple(float(v) for v in mean), tuple(float(v) for v in std))

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls((0.0,) * dim, (1.0,) * dim)

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.array(self.mean)) / np.array(self.std)


def save_mlp(path, params: MlpParams, normalizer: Normalizer, metadata=None) -> None:
    """Checkpoint one network; floats round-trip exactly via repr encoding."""
    obj = {
        "layer_sizes": list(params.layer_sizes),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "normalizer": {"mean": list(normalizer.mean), "std": list(normalizer.std)},
        "metadata": metadata or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj), encoding="utf-8")


def load_mlp(path) -> tuple[MlpParams, Normalizer, dict]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    params = MlpParams(
        tuple(obj["layer_sizes"]),
        [np.array(w, dtype=float) for w in obj["weights"]],
        [np.array(b, dtype=float) for b in obj["biases"]],
    )
    norm = Normalizer(tuple(obj["normalizer"]["mean"]), tuple(obj["normalizer"]["std"]))
    return params, norm, obj.get("metadata", {})

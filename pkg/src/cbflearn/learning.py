"""Barrier-derivative labels, residual regressors and their training.

The learned derivative estimate is

    S_dot(x, u) = drift(x) + act(x) * u + a_hat(x) * u + b_hat(x)

where ``drift + act * u`` comes from the nominal model and ``a_hat``/``b_hat``
are small tanh networks fit by minibatch SGD on mean absolute error.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .barrier import BarrierFunction, HdotAffine, hdot_nominal_affine
from .dynamics import STATE_DIM, Trajectory

logger = logging.getLogger(__name__)

FORMAT_TAG = "cbflearn-estimator"
FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    pass


def differentiate_history(h_vals, dt: float) -> np.ndarray:
    """Second-order finite-difference derivative, same length as the input."""
    h_vals = np.asarray(h_vals, dtype=float)
    if h_vals.ndim != 1 or len(h_vals) < 3:
        raise ValueError("need a 1-D history with at least 3 samples")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    return np.gradient(h_vals, dt, edge_order=2)


@dataclass
class Dataset:
    states: np.ndarray
    inputs: np.ndarray
    labels: np.ndarray
    episodes: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float).reshape(-1, STATE_DIM)
        self.inputs = np.asarray(self.inputs, dtype=float).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        self.episodes = np.asarray(self.episodes, dtype=int).reshape(-1)
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        n = len(self.states)
        if not all(len(a) == n for a in (self.inputs, self.labels, self.episodes, self.times)):
            raise ValueError("dataset columns have mismatched lengths")
        if not np.all(np.isfinite(self.labels)):
            raise ValueError("dataset labels must be finite")

    @classmethod
    def empty(cls) -> "Dataset":
        return cls(np.zeros((0, STATE_DIM)), [], [], [], [])

    def __len__(self):
        return len(self.states)

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(
            np.vstack([self.states, other.states]),
            np.concatenate([self.inputs, other.inputs]),
            np.concatenate([self.labels, other.labels]),
            np.concatenate([self.episodes, other.episodes]),
            np.concatenate([self.times, other.times]),
        )

    def episode_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.episodes, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts)}


def build_dataset(traj: Trajectory, bf: BarrierFunction, episode: int = 0) -> Dataset:
    """One record per control interval: (state_i, input_i, dh/dt at t_i)."""
    n = len(traj.states)
    if n < 2:
        return Dataset.empty()
    h = bf.value(traj.states)
    if n == 2:
        hdot = np.full(2, (h[1] - h[0]) / traj.dt)
    else:
        hdot = differentiate_history(h, traj.dt)
    m = n - 1
    return Dataset(traj.states[:m], traj.inputs, hdot[:m], np.full(m, episode), traj.times[:m])


class MLPRegressor:
    """Feed-forward net with tanh hidden layers and a linear output layer.

    Weights are stored as (fan_in, fan_out) so a batch is ``X @ W + b``.
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need matching, nonempty weight and bias lists")
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError("inconsistent layer shapes")
        for w_prev, w in zip(self.weights, self.weights[1:]):
            if w_prev.shape[1] != w.shape[0]:
                raise ValueError("consecutive layers do not chain")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @classmethod
    def initialize(cls, sizes: Sequence[int], rng: np.random.Generator) -> "MLPRegressor":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            lim = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "MLPRegressor":
        return cls([np.zeros((i, o)) for i, o in zip(sizes[:-1], sizes[1:])],
                   [np.zeros(o) for o in sizes[1:]])

    def copy(self) -> "MLPRegressor":
        return MLPRegressor([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x):
        z = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = z @ w + b
            if i < last:
                z = np.tanh(z)
        return z

    __call__ = forward

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def with_flat(self, vec) -> "MLPRegressor":
        vec = np.asarray(vec, dtype=float)
        weights, biases, k = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vec[k:k + w.size].reshape(w.shape))
            k += w.size
            biases.append(vec[k:k + b.size].copy())
            k += b.size
        if k != len(vec):
            raise ValueError("flat vector length does not match the network")
        return MLPRegressor(weights, biases)

    def equals(self, other: "MLPRegressor") -> bool:
        return self.sizes == other.sizes and all(
            np.array_equal(a, b) for a, b in zip(self.flat_arrays(), other.flat_arrays())
        )

    def flat_arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b


def mlp_forward(net: MLPRegressor, x_norm):
    return net.forward(x_norm)


def mlp_gradient(net: MLPRegressor, x_norm, upstream) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backpropagate ``upstream`` (dL/d output) to every weight and bias.

    ``x_norm`` is (batch, fan_in) or a single vector; ``upstream`` matches the
    output shape. Gradients are summed over the batch.
    """
    x = np.atleast_2d(np.asarray(x_norm, dtype=float))
    delta = np.asarray(upstream, dtype=float).reshape(len(x), -1)
    acts = [x]
    z = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = z @ w + b
        if i < last:
            z = np.tanh(z)
            acts.append(z)
    grad_w = [None] * len(net.weights)
    grad_b = [None] * len(net.weights)
    for i in range(last, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (1.0 - acts[i] ** 2)
    return grad_w, grad_b


def mae_subgradient(err) -> np.ndarray:
    """d|e|/de with the convention 0 at e == 0."""
    return np.sign(err)


@dataclass
class ResidualEstimator:
    """Learned pair (a_hat, b_hat) with frozen feature and output scaling.

    a_hat(x) = a_scale * a_net(xn) and b_hat(x) = b_scale * b_net(xn), where
    ``xn = (x - feature_mean) / feature_scale``.
    """

    a_net: MLPRegressor
    b_net: MLPRegressor
    feature_mean: np.ndarray = field(default_factory=lambda: np.zeros(STATE_DIM))
    feature_scale: np.ndarray = field(default_factory=lambda: np.ones(STATE_DIM))
    a_scale: float = 1.0
    b_scale: float = 1.0
    trained_on: int = 0
    episodes: tuple = ()

    @classmethod
    def zero(cls, hidden: Sequence[int] = (200,)) -> "ResidualEstimator":
        sizes = (STATE_DIM, *hidden, 1)
        return cls(MLPRegressor.zeros(sizes), MLPRegressor.zeros(sizes))

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.feature_mean) / self.feature_scale

    def denormalize(self, xn):
        return np.asarray(xn, dtype=float) * self.feature_scale + self.feature_mean

    def corrections(self, x) -> tuple[float, float]:
        xn = self.normalize(x)
        return (self.a_scale * float(self.a_net.forward(xn)[0]),
                self.b_scale * float(self.b_net.forward(xn)[0]))

    def corrections_batch(self, states) -> tuple[np.ndarray, np.ndarray]:
        xn = self.normalize(states)
        return self.a_scale * self.a_net.forward(xn)[:, 0], self.b_scale * self.b_net.forward(xn)[:, 0]

    def equals(self, other: "ResidualEstimator") -> bool:
        return (
            self.a_net.equals(other.a_net)
            and self.b_net.equals(other.b_net)
            and np.array_equal(self.feature_mean, other.feature_mean)
            and np.array_equal(self.feature_scale, other.feature_scale)
            and self.a_scale == other.a_scale
            and self.b_scale == other.b_scale
        )


def estimator_eval(est: ResidualEstimator, hdot_nom: HdotAffine, x, u: float) -> float:
    a, b = est.corrections(x)
    return hdot_nom.drift + hdot_nom.act * u + a * u + b


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.0
    lr_decay: float = 0.0  # step size lr / (1 + lr_decay * epoch)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.lr_decay < 0:
            raise ValueError("lr_decay must be nonnegative")


@dataclass
class TrainHistory:
    """MAE in label units; index 0 is before the first epoch."""

    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)


def nominal_hdot(data: Dataset, bf: BarrierFunction, nom_p) -> np.ndarray:
    """Nominal-model dh/dt at each record's (x, u)."""
    out = np.empty(len(data))
    for i, (x, u) in enumerate(zip(data.states, data.inputs)):
        out[i] = hdot_nominal_affine(bf, nom_p, x)(u)
    return out


def _scale(v) -> float:
    s = float(np.mean(np.abs(v))) if len(v) else 0.0
    return s if s > 1e-12 else 1.0


def erm_train(
    data: Dataset,
    bf: BarrierFunction,
    nom_p,
    cfg: TrainConfig = TrainConfig(),
    hidden: Sequence[int] = (200,),
) -> tuple[ResidualEstimator, TrainHistory]:
    """Fit a_hat and b_hat jointly by minibatch SGD on mean absolute error."""
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    n = len(data)
    order = rng.permutation(n)
    n_val = int(round(cfg.validation_fraction * n))
    if n_val >= n:
        n_val = n - 1
    train_idx, val_idx = order[n_val:], order[:n_val]

    x_train = data.states[train_idx]
    mean = x_train.mean(axis=0)
    scale = x_train.std(axis=0)
    scale[scale < 1e-8] = 1.0

    target = data.labels - nominal_hdot(data, bf, nom_p)
    u_scale = _scale(data.inputs[train_idx])
    r_scale = _scale(target[train_idx])

    xn = (data.states - mean) / scale
    un = data.inputs / u_scale
    rn = target / r_scale

    sizes = (STATE_DIM, *hidden, 1)
    a_net = MLPRegressor.initialize(sizes, rng)
    b_net = MLPRegressor.initialize(sizes, rng)

    def mae(idx):
        if len(idx) == 0:
            return float("nan")
        e = a_net.forward(xn[idx])[:, 0] * un[idx] + b_net.forward(xn[idx])[:, 0] - rn[idx]
        return float(np.mean(np.abs(e))) * r_scale

    history = TrainHistory([mae(train_idx)], [mae(val_idx)] if n_val else [])
    bs = cfg.batch_size
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch)
        perm = train_idx[rng.permutation(len(train_idx))]
        for start in range(0, len(perm), bs):
            idx = perm[start:start + bs]
            xb, ub = xn[idx], un[idx]
            err = a_net.forward(xb)[:, 0] * ub + b_net.forward(xb)[:, 0] - rn[idx]
            sg = mae_subgradient(err) / len(idx)
            gw_a, gb_a = mlp_gradient(a_net, xb, (sg * ub)[:, None])
            gw_b, gb_b = mlp_gradient(b_net, xb, sg[:, None])
            for net, gw, gb in ((a_net, gw_a, gb_a), (b_net, gw_b, gb_b)):
                for w, b, dw, db in zip(net.weights, net.biases, gw, gb):
                    w -= lr * dw
                    b -= lr * db
        loss = mae(train_idx)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite training loss at epoch {epoch + 1}")
        history.train_loss.append(loss)
        if n_val:
            history.val_loss.append(mae(val_idx))
    logger.debug("erm_train: N=%d, loss %.4g -> %.4g", n, history.train_loss[0], history.train_loss[-1])

    est = ResidualEstimator(
        a_net, b_net, mean, scale,
        a_scale=r_scale / u_scale, b_scale=r_scale,
        trained_on=n, episodes=tuple(sorted(set(data.episodes.tolist()))),
    )
    return est, history


# snapshot format ---------------------------------------------------------------


def _hex_line(tag, arr) -> str:
    arr = np.asarray(arr, dtype=float).ravel()
    return " ".join([tag] + [float(v).hex() for v in arr])


def save_estimator(path, est: ResidualEstimator) -> None:
    lines = [
        f"{FORMAT_TAG} {FORMAT_VERSION}",
        "a_sizes " + " ".join(map(str, est.a_net.sizes)),
        "b_sizes " + " ".join(map(str, est.b_net.sizes)),
        f"trained_on {est.trained_on}",
        "episodes " + " ".join(map(str, est.episodes)),
        _hex_line("feature_mean", est.feature_mean),
        _hex_line("feature_scale", est.feature_scale),
        _hex_line("output_scale", [est.a_scale, est.b_scale]),
    ]
    for name, net in (("a", est.a_net), ("b", est.b_net)):
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            lines.append(_hex_line(f"{name}.W{i}", w))
            lines.append(_hex_line(f"{name}.b{i}", b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_estimator(path) -> ResidualEstimator:
    rows = {}
    text = Path(path).read_text().splitlines()
    if not text or text[0].split()[:1] != [FORMAT_TAG]:
        raise ValueError(f"{path}: not an estimator snapshot")
    version = int(text[0].split()[1])
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    for line in text[1:]:
        parts = line.split()
        if parts:
            rows[parts[0]] = parts[1:]

    def floats(key):
        return np.array([float.fromhex(v) for v in rows[key]])

    def net(name):
        sizes = [int(s) for s in rows[f"{name}_sizes"]]
        weights, biases = [], []
        for i, (fi, fo) in enumerate(zip(sizes[:-1], sizes[1:])):
            weights.append(floats(f"{name}.W{i}").reshape(fi, fo))
            biases.append(floats(f"{name}.b{i}"))
        return MLPRegressor(weights, biases)

    a_scale, b_scale = floats("output_scale")
    return ResidualEstimator(
        net("a"), net("b"), floats("feature_mean"), floats("feature_scale"),
        a_scale=float(a_scale), b_scale=float(b_scale),
        trained_on=int(rows["trained_on"][0]),
        episodes=tuple(int(e) for e in rows.get("episodes", [])),
    )

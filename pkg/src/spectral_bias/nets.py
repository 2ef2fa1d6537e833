"""Hand-written ReLU networks trained by full-batch gradient descent.

The two-layer model is

    f(x) = (1/sqrt(m)) sum_r a_r relu(w_r . x)

with a_r in {-1, +1} frozen.  With bias, the same model is applied to the
homogeneous lift (x, 1)/sqrt(2), i.e. the pre-activation is
(w_r . x + b_r)/sqrt(2) and b starts at zero.  This keeps the infinite-width
Gram matrix equal to the with-bias kernel rather than twice it.

Both model classes expose ``outputs``, ``parameters`` and ``gradients`` so a
single training loop serves them.
"""

from __future__ import annotations

import copy
import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .harmonics import SpherePoints, make_rng

SQRT2 = math.sqrt(2.0)


class Loss(enum.Enum):
    SQUARED = "squared"
    CROSS_ENTROPY = "cross-entropy"

    @classmethod
    def parse(cls, value) -> "Loss":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        if key in ("squared", "squared-error", "mse", "l2"):
            return cls.SQUARED
        if key in ("cross-entropy", "crossentropy", "ce", "logistic"):
            return cls.CROSS_ENTROPY
        raise ValueError(f"unknown loss {value!r}")


class Init(enum.Enum):
    GAUSSIAN = "gaussian"
    HE = "he"


class Verdict(enum.Enum):
    CONVERGED = "converged"
    DID_NOT_CONVERGE = "did-not-converge"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class TrainConfig:
    eta: float
    max_epochs: int
    stop_fraction: float = 0.05
    loss: Loss = Loss.SQUARED
    seed: int = 0
    divergence_factor: float = 1e3

    def __post_init__(self):
        object.__setattr__(self, "loss", Loss.parse(self.loss))
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not 0 < self.stop_fraction < 1:
            raise ValueError("stop_fraction must lie in (0, 1)")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")

    def digest(self) -> str:
        payload = asdict(self)
        payload["loss"] = self.loss.value
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TrainRun:
    residual_trace: np.ndarray
    epochs_to_stop: int | None
    verdict: Verdict
    final_params: object = field(repr=False, default=None)
    config: TrainConfig | None = None

    @property
    def converged(self) -> bool:
        return self.verdict is Verdict.CONVERGED

    def summary(self) -> dict:
        return {
            "config_hash": self.config.digest() if self.config else None,
            "epochs_to_stop": self.epochs_to_stop,
            "verdict": self.verdict.value,
            "epochs_run": int(self.residual_trace.shape[0] - 1),
            "initial_residual": float(self.residual_trace[0]),
            "final_residual": float(self.residual_trace[-1]),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("epoch,residual\n")
            for i, r in enumerate(self.residual_trace):
                fh.write(f"{i},{float(r)!r}\n")

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


# ---------------------------------------------------------------------------
# two-layer model
# ---------------------------------------------------------------------------


@dataclass
class TwoLayerNet:
    W: np.ndarray
    a: np.ndarray
    b: np.ndarray | None = None
    kappa: float = 1.0

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def with_bias(self) -> bool:
        return self.b is not None

    def _inputs(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.W.shape[1]:
            raise ValueError(f"input dimension {x.shape[1]} does not match weights ({self.W.shape[1]})")
        if self.b is None:
            return x
        return np.hstack([x, np.ones((x.shape[0], 1))]) / SQRT2

    def _weights(self) -> np.ndarray:
        return self.W if self.b is None else np.hstack([self.W, self.b[:, None]])

    def preactivations(self, x) -> np.ndarray:
        return self._inputs(x) @ self._weights().T

    def outputs(self, x) -> np.ndarray:
        z = self.preactivations(x)
        return np.maximum(z, 0.0) @ self.a / math.sqrt(self.m)

    def parameters(self) -> list[np.ndarray]:
        return [self.W] if self.b is None else [self.W, self.b]

    def gradients(self, x, dloss_du: np.ndarray) -> list[np.ndarray]:
        """Gradients of a loss with respect to W (and b) given dL/du at every input."""
        xin = self._inputs(x)
        act = (xin @ self._weights().T >= 0.0)
        # dL/dw_r = (1/sqrt m) a_r sum_i dL/du_i 1[z_ri >= 0] x_i
        coeff = (act * dloss_du[:, None]) * (self.a / math.sqrt(self.m))[None, :]
        g = coeff.T @ xin
        if self.b is None:
            return [g]
        return [g[:, :-1], g[:, -1].copy()]

    def feature_matrix(self, x) -> np.ndarray:
        """relu(z)/sqrt(m), the (n, m) random features seen by the second layer."""
        return np.maximum(self.preactivations(x), 0.0) / math.sqrt(self.m)

    def copy(self) -> "TwoLayerNet":
        return copy.deepcopy(self)


def init_two_layer(
    m: int, d: int, kappa: float, with_bias: bool, seed: int, input_dim: int | None = None
) -> TwoLayerNet:
    """W ~ N(0, kappa^2), a ~ Uniform{-1, +1}, b = 0.  ``input_dim`` defaults to d + 1."""
    if m < 1:
        raise ValueError("m must be >= 1")
    dim = d + 1 if input_dim is None else input_dim
    rng = make_rng(seed)
    W = kappa * rng.standard_normal((m, dim))
    a = 2.0 * rng.integers(0, 2, size=m) - 1.0
    b = np.zeros(m) if with_bias else None
    return TwoLayerNet(W, a, b, kappa)


def forward(net, x) -> float:
    """Network output at a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward takes a single point; use net.outputs for batches")
    return float(net.outputs(x[None, :])[0])


def fit_readout(net: TwoLayerNet, x, labels, rcond: float | None = None) -> np.ndarray:
    """Minimum-norm least-squares second layer with the first layer frozen."""
    feats = net.feature_matrix(x)
    coef, *_ = np.linalg.lstsq(feats, np.asarray(labels, dtype=np.float64), rcond=rcond)
    return coef


def readout_outputs(net: TwoLayerNet, x, readout: np.ndarray) -> np.ndarray:
    return net.feature_matrix(x) @ readout


# ---------------------------------------------------------------------------
# deep model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeepNetSpec:
    hidden_layers: int
    width: int
    skip_connections: bool = False
    bias: bool = True
    init: Init = Init.HE
    kappa: float = 1.0

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        object.__setattr__(self, "init", Init(self.init) if not isinstance(self.init, Init) else self.init)


@dataclass
class DeepNet:
    """Fully connected ReLU stack with a linear read-out.

    Hidden layer l maps h_{l-1} to relu(W_l h_{l-1} + b_l); with skip
    connections every hidden layer after the first adds h_{l-1} to that.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray] | None
    out_weight: np.ndarray
    out_bias: np.ndarray | None
    skip_connections: bool = False

    @property
    def depth(self) -> int:
        return len(self.weights)

    def _forward_cache(self, x):
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if h.shape[1] != self.weights[0].shape[1]:
            raise ValueError("input dimension does not match the first layer")
        hs, zs = [h], []
        for l, W in enumerate(self.weights):
            z = h @ W.T
            if self.biases is not None:
                z = z + self.biases[l]
            nxt = np.maximum(z, 0.0)
            if self.skip_connections and l > 0:
                nxt = nxt + h
            zs.append(z)
            hs.append(nxt)
            h = nxt
        u = h @ self.out_weight
        if self.out_bias is not None:
            u = u + self.out_bias[0]
        return u, hs, zs

    def outputs(self, x) -> np.ndarray:
        return self._forward_cache(x)[0]

    def preactivations(self, x) -> list[np.ndarray]:
        return self._forward_cache(x)[2]

    def parameters(self) -> list[np.ndarray]:
        params = list(self.weights)
        if self.biases is not None:
            params += list(self.biases)
        params.append(self.out_weight)
        if self.out_bias is not None:
            params.append(self.out_bias)
        return params

    def gradients(self, x, dloss_du: np.ndarray) -> list[np.ndarray]:
        _, hs, zs = self._forward_cache(x)
        g_out = hs[-1].T @ dloss_du
        g_out_b = np.array([dloss_du.sum()])
        delta = dloss_du[:, None] * self.out_weight[None, :]
        gW = [None] * self.depth
        gb = [None] * self.depth
        for l in range(self.depth - 1, -1, -1):
            dz = delta * (zs[l] >= 0.0)
            gW[l] = dz.T @ hs[l]
            gb[l] = dz.sum(axis=0)
            back = dz @ self.weights[l]
            if self.skip_connections and l > 0:
                back = back + delta
            delta = back
        grads = list(gW)
        if self.biases is not None:
            grads += gb
        grads.append(g_out)
        if self.out_bias is not None:
            grads.append(g_out_b)
        return grads

    def copy(self) -> "DeepNet":
        return copy.deepcopy(self)


def init_deep(spec: DeepNetSpec, d: int, seed: int, input_dim: int | None = None) -> DeepNet:
    """He-style: weights N(0, 2/fan_in), biases U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
    read-out N(0, 1/fan_in).  Gaussian(kappa): weights N(0, kappa^2/fan_in), biases 0.
    """
    dim = d + 1 if input_dim is None else input_dim
    rng = make_rng(seed)
    fans = [dim] + [spec.width] * spec.hidden_layers
    weights, biases = [], []
    for l in range(spec.hidden_layers):
        fan_in = fans[l]
        if spec.init is Init.HE:
            W = rng.standard_normal((spec.width, fan_in)) * math.sqrt(2.0 / fan_in)
            b = rng.uniform(-1.0, 1.0, spec.width) / math.sqrt(fan_in)
        else:
            W = rng.standard_normal((spec.width, fan_in)) * spec.kappa / math.sqrt(fan_in)
            b = np.zeros(spec.width)
        weights.append(W)
        biases.append(b)
    fan_in = spec.width
    if spec.init is Init.HE:
        v = rng.standard_normal(fan_in) / math.sqrt(fan_in)
        c = rng.uniform(-1.0, 1.0, 1) / math.sqrt(fan_in)
    else:
        v = rng.standard_normal(fan_in) * spec.kappa / math.sqrt(fan_in)
        c = np.zeros(1)
    if not spec.bias:
        return DeepNet(weights, None, v, None, spec.skip_connections)
    return DeepNet(weights, biases, v, c, spec.skip_connections)


# ---------------------------------------------------------------------------
# losses and training
# ---------------------------------------------------------------------------


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def loss_value(loss: Loss, y: np.ndarray, u: np.ndarray) -> float:
    if loss is Loss.SQUARED:
        return 0.5 * float(np.sum((y - u) ** 2))
    return float(np.mean(_softplus(-y * u)))


def loss_grad(loss: Loss, y: np.ndarray, u: np.ndarray) -> np.ndarray:
    if loss is Loss.SQUARED:
        return u - y
    return -y * _sigmoid(-y * u) / y.shape[0]


def error_measure(loss: Loss, y: np.ndarray, u: np.ndarray) -> float:
    """The quantity the stopping rule watches: ||y - u|| or the mean cross-entropy."""
    if loss is Loss.SQUARED:
        return float(np.linalg.norm(y - u))
    return loss_value(loss, y, u)


def _as_array(points) -> np.ndarray:
    return points.coords if isinstance(points, SpherePoints) else np.atleast_2d(np.asarray(points, dtype=np.float64))


def _train(net, points, labels, config: TrainConfig, callback=None) -> TrainRun:
    x = _as_array(points)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ValueError(f"{y.shape[0]} labels for {x.shape[0]} points")
    if not np.all(np.isfinite(y)):
        raise ValueError("labels must be finite")
    net = net.copy()
    params = net.parameters()
    trace = []
    u = net.outputs(x)
    err0 = error_measure(config.loss, y, u)
    trace.append(err0)
    if callback is not None:
        callback(0, u)
    epochs_to_stop = 0 if err0 <= 0.0 else None
    verdict = Verdict.CONVERGED if epochs_to_stop == 0 else Verdict.DID_NOT_CONVERGE
    epoch = 0
    while epochs_to_stop is None and epoch < config.max_epochs:
        grads = net.gradients(x, loss_grad(config.loss, y, u))
        for p, g in zip(params, grads):
            p -= config.eta * g
        epoch += 1
        u = net.outputs(x)
        err = error_measure(config.loss, y, u)
        trace.append(err)
        if callback is not None:
            callback(epoch, u)
        if not math.isfinite(err) or err > config.divergence_factor * err0:
            verdict = Verdict.DIVERGED
            break
        if err <= config.stop_fraction * err0:
            epochs_to_stop = epoch
            verdict = Verdict.CONVERGED
    return TrainRun(np.asarray(trace), epochs_to_stop, verdict, net, config)


def train_full_batch(net: TwoLayerNet, points, labels, config: TrainConfig, callback=None) -> TrainRun:
    """Full-batch gradient descent on W (and b); ``a`` stays fixed.

    ``callback(epoch, outputs)`` is invoked after every evaluation,
    including epoch 0.
    """
    return _train(net, points, labels, config, callback)


def train_deep(net: DeepNet, points, labels, config: TrainConfig, callback=None) -> TrainRun:
    """Full-batch gradient descent on every layer of a deep network."""
    return _train(net, points, labels, config, callback)


# ---------------------------------------------------------------------------
# classification labels
# ---------------------------------------------------------------------------


def threshold_class_labels(points: SpherePoints, k: int, cutoff: float = 2.0 / 3.0):
    """Keep points with |cos(k theta)| > cutoff and label them by the sign of cos(k theta)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c = np.cos(k * points.angles)
    keep = np.abs(c) > cutoff
    if not np.any(keep):
        raise ValueError(f"no points survive cutoff {cutoff}")
    kept = SpherePoints(points.coords[keep], points.sphere_dim, intrinsic=points.intrinsic[keep])
    return kept, np.where(c[keep] > 0, 1.0, -1.0)


def relative_weight_change(before, after) -> float:
    """||theta(T) - theta(0)||_F / ||theta(0)||_F over the first-layer weights."""
    w0 = before.W if isinstance(before, TwoLayerNet) else before.weights[0]
    w1 = after.W if isinstance(after, TwoLayerNet) else after.weights[0]
    return float(np.linalg.norm(w1 - w0) / np.linalg.norm(w0))

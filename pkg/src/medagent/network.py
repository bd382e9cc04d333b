"""Deep feedforward binary classifiers trained by minibatch backpropagation.

Everything here is written against plain float64 numpy arrays and the
package's own seeded PRNG, so that a (matrix, config) pair always produces
bit-identical weights.  BLAS is pinned to a single thread for the life of
the process (see ``_BLAS_PIN``): multi-threaded GEMM can change summation
order with the calling context, which would break bit-reproducibility and
the scheduling-independence guarantee of the grid search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import AgentError
from .metrics import roc_curve
from .rng import SplitMix64, mix, random_floats, random_uniform

_BLAS_PIN = threadpool_limits(limits=1, user_api="blas")

ACTIVATIONS = ("relu", "tanh", "sigmoid")
OPTIMIZERS = ("sgd", "sgd_momentum", "adam")
WEIGHT_INITS = ("xavier_uniform", "he_uniform")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PROB_EPS = 1e-12

# purpose tags for deriving per-use streams from a training seed
_INIT_TAG = 0x1417
_SHUFFLE_TAG = 0x5FF1
_DROPOUT_TAG = 0xD209


class TrainingError(AgentError):
    code = "training_error"


class DimensionMismatch(TrainingError):
    code = "dimension_mismatch"

    def __init__(self, expected: int, found: int):
        super().__init__(f"input width {found} does not match network input width {expected}")


class InvalidSetting(TrainingError):
    code = "invalid_setting"

    def __init__(self, field: str, value, reason: str):
        self.field = field
        self.value = value
        super().__init__(f"hyperparameter {field}={value!r}: {reason}")


class NonFiniteLoss(TrainingError):
    code = "non_finite_loss"

    def __init__(self, epoch: int, batch: int):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"loss became non-finite at epoch {epoch}, batch {batch}")


@dataclass(frozen=True)
class HyperparameterSetting:
    """One complete assignment of the 13 tunable knobs of a DFNN."""

    hidden_layer_count: int
    hidden_units: int
    hidden_activation: str
    learning_rate: float
    lr_decay: float
    epochs: int
    batch_size: int
    optimizer: str
    momentum: float
    dropout_rate: float
    l2_lambda: float
    weight_init: str
    early_stop_patience: int

    def __post_init__(self):
        validate_hyperparameter("hidden_layer_count", self.hidden_layer_count)
        validate_hyperparameter("hidden_units", self.hidden_units)
        validate_hyperparameter("hidden_activation", self.hidden_activation)
        validate_hyperparameter("learning_rate", self.learning_rate)
        validate_hyperparameter("lr_decay", self.lr_decay)
        validate_hyperparameter("epochs", self.epochs)
        validate_hyperparameter("batch_size", self.batch_size)
        validate_hyperparameter("optimizer", self.optimizer)
        validate_hyperparameter("momentum", self.momentum)
        validate_hyperparameter("dropout_rate", self.dropout_rate)
        validate_hyperparameter("l2_lambda", self.l2_lambda)
        validate_hyperparameter("weight_init", self.weight_init)
        validate_hyperparameter("early_stop_patience", self.early_stop_patience)

    def to_dict(self) -> dict:
        return {
            "hidden_layer_count": self.hidden_layer_count,
            "hidden_units": self.hidden_units,
            "hidden_activation": self.hidden_activation,
            "learning_rate": self.learning_rate,
            "lr_decay": self.lr_decay,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "optimizer": self.optimizer,
            "momentum": self.momentum,
            "dropout_rate": self.dropout_rate,
            "l2_lambda": self.l2_lambda,
            "weight_init": self.weight_init,
            "early_stop_patience": self.early_stop_patience,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperparameterSetting":
        return cls(**d)


def validate_hyperparameter(field: str, value) -> None:
    """Range-check one hyperparameter value; raises InvalidSetting.

    learning_rate of exactly 0 is accepted (a legal if useless setting:
    every update is a no-op), all other numeric bounds are strict.
    """

    def fail(reason):
        raise InvalidSetting(field, value, reason)

    if field in ("hidden_layer_count", "hidden_units", "epochs", "batch_size"):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            fail("must be a positive integer")
    elif field in ("learning_rate", "lr_decay", "l2_lambda"):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            fail("must be a number")
        if not math.isfinite(value) or value < 0:
            fail("must be finite and >= 0")
    elif field in ("momentum", "dropout_rate"):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            fail("must be a number")
        if not (0.0 <= value < 1.0):
            fail("must lie in [0, 1)")
    elif field == "hidden_activation":
        if value not in ACTIVATIONS:
            fail(f"must be one of {ACTIVATIONS}")
    elif field == "optimizer":
        if value not in OPTIMIZERS:
            fail(f"must be one of {OPTIMIZERS}")
    elif field == "weight_init":
        if value not in WEIGHT_INITS:
            fail(f"must be one of {WEIGHT_INITS}")
    elif field == "early_stop_patience":
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            fail("must be a nonnegative integer")
    else:
        raise KeyError(f"unknown hyperparameter {field!r}")


HYPERPARAMETER_FIELDS = tuple(HyperparameterSetting.__dataclass_fields__)


@dataclass(frozen=True)
class NetworkWeights:
    """Per-layer (weight matrix, bias vector) pairs; final layer width 1.

    Arrays are write-protected; treat values as immutable once created.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def input_width(self) -> int:
        return self.layers[0][0].shape[0]

    def layer_dims(self) -> list[int]:
        return [self.input_width] + [w.shape[1] for w, _ in self.layers]

    def all_finite(self) -> bool:
        return all(np.isfinite(w).all() and np.isfinite(b).all() for w, b in self.layers)


def _freeze(arrays: list[tuple[np.ndarray, np.ndarray]]) -> NetworkWeights:
    for w, b in arrays:
        w.setflags(write=False)
        b.setflags(write=False)
    return NetworkWeights(layers=tuple((w, b) for w, b in arrays))


@dataclass(frozen=True)
class TrainConfig:
    setting: HyperparameterSetting
    seed: int
    input_width: int


def init_weights(cfg: TrainConfig) -> NetworkWeights:
    """Seeded uniform initialization per the configured scheme; biases zero."""
    s = cfg.setting
    dims = [cfg.input_width] + [s.hidden_units] * s.hidden_layer_count + [1]
    layers = []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        if s.weight_init == "xavier_uniform":
            bound = math.sqrt(6.0 / (fan_in + fan_out))
        else:
            bound = math.sqrt(6.0 / fan_in)
        w = random_uniform(mix(cfg.seed, _INIT_TAG, l), fan_in * fan_out, -bound, bound)
        layers.append((w.reshape(fan_in, fan_out), np.zeros(fan_out, dtype=np.float64)))
    return _freeze(layers)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return _sigmoid(z)


def _activation_grad(name: str, z: np.ndarray, h: np.ndarray) -> np.ndarray:
    # h is the pre-dropout activation value for z
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - h * h
    return h * (1.0 - h)


def _forward_cached(weights: NetworkWeights, setting: HyperparameterSetting,
                    x: np.ndarray, masks):
    """Batch forward pass keeping the caches backprop needs."""
    if x.shape[1] != weights.input_width:
        raise DimensionMismatch(weights.input_width, x.shape[1])
    hidden = len(weights.layers) - 1
    a = x
    caches = []
    for l in range(hidden):
        w, b = weights.layers[l]
        z = a @ w + b
        h = _activate(setting.hidden_activation, z)
        dropped = h if masks is None else h * masks[l]
        caches.append((a, z, h))
        a = dropped
    w, b = weights.layers[hidden]
    logits = (a @ w + b)[:, 0]
    return caches, a, _sigmoid(logits)


def predict_batch(weights: NetworkWeights, setting: HyperparameterSetting,
                  x: np.ndarray) -> np.ndarray:
    """Inference probabilities for a batch of feature rows (no dropout)."""
    _, _, p = _forward_cached(weights, setting, np.asarray(x, dtype=np.float64), None)
    return p


def forward(weights: NetworkWeights, setting: HyperparameterSetting, x,
            training: bool = False, rng: SplitMix64 | None = None) -> float:
    """Probability for a single feature vector.

    Dropout is applied only when ``training`` is set and the setting has a
    nonzero rate, in which case a PRNG must be supplied for the masks.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    masks = None
    if training and setting.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")
        keep = 1.0 - setting.dropout_rate
        masks = []
        for _ in range(setting.hidden_layer_count):
            u = np.array([rng.next_float() for _ in range(setting.hidden_units)])
            masks.append((u >= setting.dropout_rate).astype(np.float64) / keep)
    _, _, p = _forward_cached(weights, setting, x, masks)
    return float(p[0])


def loss(p: float, y: int, weights: NetworkWeights, l2_lambda: float) -> float:
    """Binary cross-entropy plus L2 penalty on weights (biases excluded)."""
    p = min(max(p, PROB_EPS), 1.0 - PROB_EPS)
    bce = -(y * math.log(p) + (1 - y) * math.log(1.0 - p))
    penalty = 0.0
    if l2_lambda > 0.0:
        penalty = 0.5 * l2_lambda * sum(float(np.sum(w * w)) for w, _ in weights.layers)
    return bce + penalty


def _loss_and_gradients(weights: NetworkWeights, setting: HyperparameterSetting,
                        x: np.ndarray, y: np.ndarray, masks=None):
    """Mean batch loss (BCE + L2) and its exact gradients.

    The probability clamp is a numerical guard for the log only; gradients
    use the standard sigmoid/cross-entropy form (p - y) / B.
    """
    caches, a_last, p = _forward_cached(weights, setting, x, masks)
    n = x.shape[0]
    lam = setting.l2_lambda
    hidden = len(weights.layers) - 1

    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    total = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    if lam > 0.0:
        # divergence shows up as inf here and is caught by the caller's
        # finiteness check, so the overflow itself is not warning-worthy
        with np.errstate(over="ignore"):
            total += 0.5 * lam * sum(float(np.sum(w * w)) for w, _ in weights.layers)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(weights.layers)
    delta = ((p - y) / n)[:, None]
    w_out, _ = weights.layers[hidden]
    dw = a_last.T @ delta
    if lam > 0.0:
        dw += lam * w_out
    grads[hidden] = (dw, delta.sum(axis=0))

    g = delta @ w_out.T
    for l in range(hidden - 1, -1, -1):
        a_prev, z, h = caches[l]
        if masks is not None:
            g = g * masks[l]
        g = g * _activation_grad(setting.hidden_activation, z, h)
        w_l, _ = weights.layers[l]
        dw = a_prev.T @ g
        if lam > 0.0:
            dw += lam * w_l
        grads[l] = (dw, g.sum(axis=0))
        if l > 0:
            g = g @ w_l.T

    return float(total), grads


def backprop_gradients(weights: NetworkWeights, setting: HyperparameterSetting,
                       x, y) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Analytic gradients of the mean batch loss (no dropout)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _, grads = _loss_and_gradients(weights, setting, x, y)
    return tuple(grads)


class _Optimizer:
    """Parameter updates shared by train(); state per (layer, kind)."""

    def __init__(self, setting: HyperparameterSetting, shapes):
        self.setting = setting
        self.step = 0
        if setting.optimizer == "sgd_momentum":
            self.buf = [(np.zeros(sw), np.zeros(sb)) for sw, sb in shapes]
        elif setting.optimizer == "adam":
            self.m = [(np.zeros(sw), np.zeros(sb)) for sw, sb in shapes]
            self.v = [(np.zeros(sw), np.zeros(sb)) for sw, sb in shapes]

    def apply(self, params, grads, lr: float):
        s = self.setting
        self.step += 1
        if s.optimizer == "sgd":
            for (w, b), (dw, db) in zip(params, grads):
                w -= lr * dw
                b -= lr * db
        elif s.optimizer == "sgd_momentum":
            for (w, b), (dw, db), (vw, vb) in zip(params, grads, self.buf):
                vw *= s.momentum
                vw += dw
                vb *= s.momentum
                vb += db
                w -= lr * vw
                b -= lr * vb
        else:
            c1 = 1.0 - ADAM_BETA1 ** self.step
            c2 = 1.0 - ADAM_BETA2 ** self.step
            for (w, b), (dw, db), (mw, mb), (vw, vb) in zip(params, grads, self.m, self.v):
                for param, g, m, v in ((w, dw, mw, vw), (b, db, mb, vb)):
                    m *= ADAM_BETA1
                    m += (1.0 - ADAM_BETA1) * g
                    v *= ADAM_BETA2
                    v += (1.0 - ADAM_BETA2) * (g * g)
                    param -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


def train(m, cfg: TrainConfig, holdout=None) -> NetworkWeights:
    """Minibatch gradient descent over ``cfg.setting.epochs`` epochs.

    Epoch shuffles, dropout masks, and initialization all derive from
    cfg.seed, so the result is a pure function of (m, cfg, holdout).  With
    early stopping enabled, holdout AUC is evaluated after every epoch and
    the best-AUC weights are restored once patience is exhausted.
    """
    s = cfg.setting
    if m.n_rows == 0:
        raise TrainingError("training matrix is empty")
    if m.features.shape[1] != cfg.input_width:
        raise DimensionMismatch(cfg.input_width, m.features.shape[1])
    if s.early_stop_patience > 0 and holdout is None:
        raise TrainingError("early stopping requires a holdout matrix")

    init = init_weights(cfg)
    params = [(w.copy(), b.copy()) for w, b in init.layers]
    optimizer = _Optimizer(s, [(w.shape, b.shape) for w, b in params])

    features = m.features
    labels = m.labels
    n = m.n_rows
    keep = 1.0 - s.dropout_rate
    dropout_seed = mix(cfg.seed, _DROPOUT_TAG)
    mask_counter = 0

    best_auc = -1.0
    best_params = None
    bad_epochs = 0

    for epoch in range(s.epochs):
        lr = s.learning_rate / (1.0 + s.lr_decay * epoch)
        order = list(range(n))
        SplitMix64(mix(cfg.seed, _SHUFFLE_TAG, epoch)).shuffle(order)

        for batch_no, start in enumerate(range(0, n, s.batch_size)):
            idx = np.asarray(order[start:start + s.batch_size], dtype=np.intp)
            xb = features[idx]
            yb = labels[idx]

            masks = None
            if s.dropout_rate > 0.0:
                masks = []
                for _ in range(s.hidden_layer_count):
                    u = random_floats(mix(dropout_seed, mask_counter),
                                      len(idx) * s.hidden_units)
                    mask_counter += 1
                    mask = (u >= s.dropout_rate).astype(np.float64) / keep
                    masks.append(mask.reshape(len(idx), s.hidden_units))

            snapshot = NetworkWeights(layers=tuple((w, b) for w, b in params))
            batch_loss, grads = _loss_and_gradients(snapshot, s, xb, yb, masks)
            if not math.isfinite(batch_loss):
                raise NonFiniteLoss(epoch, batch_no)
            optimizer.apply(params, grads, lr)
            assert all(np.isfinite(w).all() and np.isfinite(b).all() for w, b in params)

        if s.early_stop_patience > 0:
            current = NetworkWeights(layers=tuple((w, b) for w, b in params))
            scores = predict_batch(current, s, holdout.features)
            auc = roc_curve(scores, holdout.labels.astype(int)).auc
            if auc > best_auc:
                best_auc = auc
                best_params = [(w.copy(), b.copy()) for w, b in params]
                bad_epochs = 0
            else:
                bad_epochs += 1
                if bad_epochs >= s.early_stop_patience:
                    params = best_params
                    break

    result = _freeze([(w.copy(), b.copy()) for w, b in params])
    if not result.all_finite():
        raise NonFiniteLoss(s.epochs - 1, -1)
    return result

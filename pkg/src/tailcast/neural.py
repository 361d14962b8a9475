"""Hybrid forecaster: learnable linear AR head plus a dense nonlinear
network over the multivariate window with Time2Vec temporal features.

The model emits all horizon steps in one pass (MIMO) and trains by
mini-batch Adam under either squared error or the bounded correntropy
loss beta^2 (1 - exp(-e^2/beta^2)), whose gradient shrinks for errors
far beyond beta; that is what keeps heavy-tailed outliers from
dominating training. All gradients are analytic and verified against
central finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .base import Forecaster
from .errors import (
    DivergedLoss,
    EmptyDataset,
    LengthMismatch,
    NonPositiveBeta,
    ShapeMismatch,
)

DAY_HOURS = 24.0
WEEK_HOURS = 168.0
YEAR_HOURS = 8766.0


@dataclass(frozen=True)
class WindowSpec:
    """Sliding-window geometry: T input hours, h output hours, n channels."""

    input_length: int
    horizon: int
    n_channels: int
    target_channel: str = ""

    def __post_init__(self):
        if not self.input_length >= self.horizon >= 1:
            raise ValueError("need input_length >= horizon >= 1")
        if self.n_channels < 1:
            raise ValueError("need at least one channel")


@dataclass
class Time2VecLayer:
    """Learnable time encoding: element 0 is linear in tau, elements 1..k
    pass through the sine activation."""

    omega: np.ndarray
    phi: np.ndarray

    @property
    def k(self) -> int:
        return self.omega.size - 1


@dataclass
class LossSpec:
    """Training objective: plain squared error or bounded correntropy."""

    kind: str = "mccr"
    beta: float = 4.10

    def __post_init__(self):
        if self.kind not in ("mse", "mccr"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.kind == "mccr" and self.beta <= 0:
            raise NonPositiveBeta("beta must be positive")


@dataclass
class HybridModel:
    """Parameters of the two-headed predictor (prediction = sum of heads)."""

    spec: WindowSpec
    target_index: int
    ar_w: np.ndarray                 # (horizon, input_length)
    ar_b: np.ndarray                 # (horizon,)
    layers: list                     # [(W, b), ...] dense stack ending at horizon
    t2v: Time2VecLayer
    leaky_slope: float = 0.01

    def n_params(self) -> int:
        return flatten_params(self).size


def build_hybrid_model(spec: WindowSpec, target_index: int = 0,
                       hidden: tuple = (64, 64), t2v_k: int = 8,
                       leaky_slope: float = 0.01, seed: int = 0) -> HybridModel:
    """Initialize weights Glorot-uniform and seed the Time2Vec frequencies
    with daily/weekly harmonics (element 0 gets a slow yearly clock)."""
    rng = np.random.default_rng(seed)
    T, h, n = spec.input_length, spec.horizon, spec.n_channels
    if not 0 <= target_index < n:
        raise ValueError("target_index out of range")

    ar_w = _glorot(rng, h, T)
    ar_b = np.zeros(h)

    d_in = T * n + T * (t2v_k + 1)
    sizes = [d_in, *hidden, h]
    layers = [(_glorot(rng, sizes[i], sizes[i + 1]), np.zeros(sizes[i + 1]))
              for i in range(len(sizes) - 1)]

    omega = np.empty(t2v_k + 1)
    omega[0] = 2.0 * np.pi / YEAR_HOURS
    for i in range(1, t2v_k + 1):
        period = DAY_HOURS if i % 2 == 1 else WEEK_HOURS
        omega[i] = ((i + 1) // 2) * 2.0 * np.pi / period
    phi = np.zeros(t2v_k + 1)

    return HybridModel(
        spec=spec,
        target_index=target_index,
        ar_w=ar_w,
        ar_b=ar_b,
        layers=layers,
        t2v=Time2VecLayer(omega=omega, phi=phi),
        leaky_slope=leaky_slope,
    )


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


# --- losses ------------------------------------------------------------------

def mse_loss(actual, predicted) -> float:
    """Mean squared error over all elements."""
    a, p = _check_pair(actual, predicted)
    e = a - p
    return float(np.mean(e * e))


def mse_gradient(actual, predicted) -> np.ndarray:
    """d MSE / d predicted."""
    a, p = _check_pair(actual, predicted)
    e = a - p
    return -2.0 * e / e.size


def mccr_loss(actual, predicted, beta: float) -> float:
    """Correntropy-induced loss: mean of beta^2 (1 - exp(-e^2/beta^2)).

    Bounded in [0, beta^2); reduces to MSE as beta -> inf with gap at
    most e^4/(2 beta^2) per element.
    """
    a, p = _check_pair(actual, predicted)
    _check_beta(beta)
    e = a - p
    return float(np.mean(beta ** 2 * (1.0 - np.exp(-(e * e) / beta ** 2))))


def mccr_gradient(actual, predicted, beta: float) -> np.ndarray:
    """d MCCR / d predicted: -(2/N) e exp(-e^2/beta^2).

    The magnitude peaks at |e| = beta/sqrt(2) and decays beyond it, which
    is what bounds an outlier's pull on the parameters.
    """
    a, p = _check_pair(actual, predicted)
    _check_beta(beta)
    e = a - p
    return -2.0 / e.size * e * np.exp(-(e * e) / beta ** 2)


def loss_value(actual, predicted, loss: LossSpec) -> float:
    if loss.kind == "mse":
        return mse_loss(actual, predicted)
    return mccr_loss(actual, predicted, loss.beta)


def loss_gradient(actual, predicted, loss: LossSpec) -> np.ndarray:
    if loss.kind == "mse":
        return mse_gradient(actual, predicted)
    return mccr_gradient(actual, predicted, loss.beta)


def _check_pair(actual, predicted):
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise LengthMismatch(f"shapes {a.shape} and {p.shape} differ")
    return a, p


def _check_beta(beta):
    if beta <= 0:
        raise NonPositiveBeta("beta must be positive")


# --- forward / backward -------------------------------------------------------

def time2vec_forward(tau, layer: Time2VecLayer) -> np.ndarray:
    """Time2Vec features of tau: [omega_0 tau + phi_0, sin(omega_i tau + phi_i)...].

    Scalar tau gives a (k+1,) vector; an array gives (..., k+1).
    """
    tau = np.asarray(tau, dtype=float)
    arg = np.multiply.outer(tau, layer.omega) + layer.phi
    out = np.sin(arg)
    out[..., 0] = arg[..., 0]
    return out


def predict_windows(model: HybridModel, dataset: "WindowDataset") -> np.ndarray:
    """Batched predictions for a whole window dataset, shape (B, horizon)."""
    pred, _ = _forward_batch(model, dataset.X, dataset.taus)
    return pred


def forward(model: HybridModel, window, tau=None) -> np.ndarray:
    """Predictions for one (input_length, n_channels) window.

    tau holds the time index of each window row (defaults to 0..T-1);
    training supplies absolute hour indices so the sine features carry
    the daily/weekly phase.
    """
    w = np.asarray(window, dtype=float)
    T, n = model.spec.input_length, model.spec.n_channels
    if w.shape != (T, n):
        raise ShapeMismatch(f"window shape {w.shape}, expected {(T, n)}")
    taus = np.arange(T, dtype=float) if tau is None else np.asarray(tau, dtype=float)
    pred, _ = _forward_batch(model, w[None], taus[None])
    return pred[0]


def _forward_batch(model: HybridModel, X, taus):
    """Batched forward pass; returns predictions and the cache for backprop."""
    B, T, n = X.shape
    feats = time2vec_forward(taus, model.t2v)            # (B, T, k+1)
    z = np.concatenate([X.reshape(B, T * n), feats.reshape(B, -1)], axis=1)

    activations = [z]
    pre = []
    a = z
    for i, (W, b) in enumerate(model.layers):
        s = a @ W + b
        pre.append(s)
        a = s if i == len(model.layers) - 1 else _leaky(s, model.leaky_slope)
        activations.append(a)

    x_target = X[:, :, model.target_index]
    pred = a + x_target @ model.ar_w.T + model.ar_b
    cache = (X, taus, feats, activations, pre, x_target)
    return pred, cache


def _leaky(s, slope):
    return np.where(s > 0, s, slope * s)


def loss_and_gradients(model: HybridModel, X, taus, Y, loss: LossSpec,
                       l2: float = 0.0):
    """Objective (data loss + l2 * sum of squared weights) and its analytic
    gradients with respect to every parameter group.

    Returns (objective, data_loss, grads) where grads mirrors the model's
    parameter layout. Bias vectors and the Time2Vec parameters carry no
    weight penalty.
    """
    pred, cache = _forward_batch(model, X, taus)
    X, taus, feats, activations, pre, x_target = cache
    B, T, n = X.shape
    k = model.t2v.k

    data_loss = loss_value(Y, pred, loss)
    G = loss_gradient(Y, pred, loss)                     # (B, h)

    g_ar_w = G.T @ x_target
    g_ar_b = G.sum(axis=0)

    g_layers = []
    delta = G
    for i in reversed(range(len(model.layers))):
        W, _ = model.layers[i]
        gW = activations[i].T @ delta
        gb = delta.sum(axis=0)
        g_layers.append((gW, gb))
        if i > 0:
            delta = (delta @ W.T) * np.where(pre[i - 1] > 0, 1.0, model.leaky_slope)
        else:
            delta = delta @ W.T
    g_layers.reverse()

    d_feats = delta[:, T * n:].reshape(B, T, k + 1)
    arg = np.multiply.outer(taus, model.t2v.omega) + model.t2v.phi
    d_arg = np.cos(arg)
    d_arg[..., 0] = 1.0
    g_phi = np.einsum("bti,bti->i", d_feats, d_arg)
    g_omega = np.einsum("bti,bti,bt->i", d_feats, d_arg, taus)

    objective = data_loss
    if l2 > 0.0:
        objective += l2 * (np.sum(model.ar_w ** 2)
                           + sum(np.sum(W ** 2) for W, _ in model.layers))
        g_ar_w = g_ar_w + 2.0 * l2 * model.ar_w
        g_layers = [(gW + 2.0 * l2 * W, gb)
                    for (gW, gb), (W, _) in zip(g_layers, model.layers)]

    grads = {
        "ar_w": g_ar_w,
        "ar_b": g_ar_b,
        "layers": g_layers,
        "omega": g_omega,
        "phi": g_phi,
    }
    return objective, data_loss, grads


# --- parameter flattening (checkpoint order) ----------------------------------

def _param_arrays(model: HybridModel):
    """Declared checkpoint ordering: ar head row-major, dense layers in
    order (W then b each), then Time2Vec omega then phi."""
    arrays = [model.ar_w, model.ar_b]
    for W, b in model.layers:
        arrays.extend([W, b])
    arrays.extend([model.t2v.omega, model.t2v.phi])
    return arrays


def flatten_params(model: HybridModel) -> np.ndarray:
    return np.concatenate([a.ravel() for a in _param_arrays(model)])


def set_flat_params(model: HybridModel, flat: np.ndarray) -> None:
    arrays = _param_arrays(model)
    total = sum(a.size for a in arrays)
    if flat.size != total:
        raise ShapeMismatch(f"{flat.size} values for {total} parameters")
    pos = 0
    for a in arrays:
        a[...] = flat[pos:pos + a.size].reshape(a.shape)
        pos += a.size


def _grad_arrays(grads):
    arrays = [grads["ar_w"], grads["ar_b"]]
    for gW, gb in grads["layers"]:
        arrays.extend([gW, gb])
    arrays.extend([grads["omega"], grads["phi"]])
    return arrays


# --- training ------------------------------------------------------------------

@dataclass
class WindowDataset:
    """Precomputed supervised windows: X (B,T,n), taus (B,T), Y (B,horizon)."""

    X: np.ndarray
    Y: np.ndarray
    taus: np.ndarray | None = None

    def __post_init__(self):
        if self.taus is None:
            B, T, _ = self.X.shape
            self.taus = np.broadcast_to(np.arange(T, dtype=float), (B, T)).copy()

    def __len__(self) -> int:
        return self.X.shape[0]


@dataclass
class TrainConfig:
    """Adam + ridge optimizer settings."""

    lr: float = 1e-4
    l2: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainResult:
    model: HybridModel
    train_loss: np.ndarray
    val_loss: np.ndarray | None
    best_epoch: int


def build_windows(matrix, target_col: int, input_length: int, horizon: int,
                  starts=None, offset: int = 0) -> WindowDataset:
    """Slide (input, horizon) windows over an (N, n_channels) matrix.

    starts are window origins (defaults to every valid position); offset
    shifts the absolute tau index when the matrix is itself a block of a
    longer series.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    N = M.shape[0]
    if starts is None:
        starts = np.arange(N - input_length - horizon + 1)
    starts = np.asarray(starts, dtype=int)
    if starts.size == 0:
        raise EmptyDataset("no valid window positions")
    X = np.stack([M[s:s + input_length] for s in starts])
    Y = np.stack([M[s + input_length:s + input_length + horizon, target_col]
                  for s in starts])
    taus = (starts[:, None] + offset + np.arange(input_length)).astype(float)
    return WindowDataset(X=X, Y=Y, taus=taus)


def train(model: HybridModel, dataset: WindowDataset, loss: LossSpec,
          cfg: TrainConfig = TrainConfig(), seed: int = 0,
          val_dataset: WindowDataset | None = None) -> TrainResult:
    """Mini-batch Adam with fixed shuffling from the seed.

    Early stopping watches the validation loss with the configured
    patience and restores the best parameters. Raises DivergedLoss on a
    non-finite objective and EmptyDataset on an empty training set.
    """
    if len(dataset) == 0:
        raise EmptyDataset("training dataset is empty")
    rng = np.random.default_rng(seed)
    params = _param_arrays(model)
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    step = 0

    train_trace = []
    val_trace = [] if val_dataset is not None else None
    best_val = np.inf
    best_flat = flatten_params(model)
    best_epoch = 0
    stale = 0

    n = len(dataset)
    for epoch in range(cfg.max_epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo:lo + cfg.batch_size]
            objective, data_loss, grads = loss_and_gradients(
                model, dataset.X[idx], dataset.taus[idx], dataset.Y[idx],
                loss, cfg.l2,
            )
            if not np.isfinite(objective):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            epoch_loss += data_loss * idx.size
            step += 1
            for p, g, m, v in zip(params, _grad_arrays(grads), m_state, v_state):
                m *= cfg.beta1
                m += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                m_hat = m / (1.0 - cfg.beta1 ** step)
                v_hat = v / (1.0 - cfg.beta2 ** step)
                p -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        train_trace.append(epoch_loss / n)

        if val_dataset is not None:
            pred, _ = _forward_batch(model, val_dataset.X, val_dataset.taus)
            v_loss = loss_value(val_dataset.Y, pred, loss)
            val_trace.append(v_loss)
            if v_loss < best_val:
                best_val = v_loss
                best_flat = flatten_params(model)
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale > cfg.patience:
                    break

    if val_dataset is not None:
        set_flat_params(model, best_flat)
    else:
        best_epoch = len(train_trace) - 1
    return TrainResult(
        model=model,
        train_loss=np.asarray(train_trace),
        val_loss=None if val_trace is None else np.asarray(val_trace),
        best_epoch=best_epoch,
    )


# --- checkpoints -----------------------------------------------------------------

def save_checkpoint(model: HybridModel, loss: LossSpec, json_path) -> None:
    """JSON manifest + flat little-endian float64 parameter file.

    The parameter file sits next to the manifest with a .bin suffix;
    ordering is the declared flatten order (AR head, dense layers, omega,
    phi).
    """
    json_path = str(json_path)
    bin_path = json_path[:-5] + ".bin" if json_path.endswith(".json") else json_path + ".bin"
    flat = flatten_params(model).astype("<f8")
    flat.tofile(bin_path)
    manifest = {
        "kind": "hybrid",
        "input_length": model.spec.input_length,
        "horizon": model.spec.horizon,
        "n_channels": model.spec.n_channels,
        "target_channel": model.spec.target_channel,
        "target_index": model.target_index,
        "hidden": [b.size for _, b in model.layers[:-1]],
        "t2v_k": model.t2v.k,
        "leaky_slope": model.leaky_slope,
        "loss": {"kind": loss.kind, "beta": loss.beta},
        "param_count": int(flat.size),
        "param_dtype": "<f8",
        "param_file": bin_path.rsplit("/", 1)[-1],
        "param_order": "ar_w,ar_b," + ",".join(
            f"W{i},b{i}" for i in range(len(model.layers))) + ",omega,phi",
    }
    with open(json_path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(json_path) -> tuple[HybridModel, LossSpec]:
    json_path = str(json_path)
    with open(json_path) as fh:
        manifest = json.load(fh)
    spec = WindowSpec(
        input_length=manifest["input_length"],
        horizon=manifest["horizon"],
        n_channels=manifest["n_channels"],
        target_channel=manifest.get("target_channel", ""),
    )
    model = build_hybrid_model(
        spec,
        target_index=manifest["target_index"],
        hidden=tuple(manifest["hidden"]),
        t2v_k=manifest["t2v_k"],
        leaky_slope=manifest["leaky_slope"],
    )
    directory = json_path.rsplit("/", 1)[0] if "/" in json_path else "."
    flat = np.fromfile(f"{directory}/{manifest['param_file']}", dtype="<f8")
    set_flat_params(model, flat)
    loss = LossSpec(kind=manifest["loss"]["kind"], beta=manifest["loss"]["beta"])
    return model, loss


# --- estimator wrapper --------------------------------------------------------------

class HybridForecaster(Forecaster):
    """Windowed hybrid model with the common fit/predict contract.

    fit slides windows over an (N, n_channels) matrix, holds out the last
    val_fraction of window positions (temporal order) for early stopping,
    and trains under the configured loss.
    """

    multivariate = True

    def __init__(self, input_length: int = 48, horizon: int = 24,
                 hidden: tuple = (64, 64), t2v_k: int = 8,
                 leaky_slope: float = 0.01, loss: str = "mccr",
                 beta: float = 4.10, lr: float = 1e-4, l2: float = 1e-4,
                 batch_size: int = 64, epochs: int = 500, patience: int = 20,
                 val_fraction: float = 0.2, target_col: int = 0, seed: int = 0):
        self.input_length = input_length
        self.horizon = horizon
        self.hidden = hidden
        self.t2v_k = t2v_k
        self.leaky_slope = leaky_slope
        self.loss = loss
        self.beta = beta
        self.lr = lr
        self.l2 = l2
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.target_col = target_col
        self.seed = seed

    def _loss_spec(self) -> LossSpec:
        return LossSpec(kind=self.loss, beta=self.beta)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lr=self.lr, l2=self.l2, batch_size=self.batch_size,
                           max_epochs=self.epochs, patience=self.patience)

    def fit(self, X, y=None):
        M = np.asarray(X, dtype=float)
        if M.ndim == 1:
            M = M[:, None]
        name = f"col{self.target_col}"
        spec = WindowSpec(self.input_length, self.horizon, M.shape[1], name)
        data = build_windows(M, self.target_col, self.input_length, self.horizon)
        n_val = int(len(data) * self.val_fraction)
        train_set, val_set = _temporal_split(data, n_val)
        return self.fit_dataset(spec, train_set, val_set, tau_end=M.shape[0])

    def fit_dataset(self, spec: WindowSpec, train_set: WindowDataset,
                    val_set: WindowDataset | None = None, tau_end: int = 0):
        """Fit from prebuilt window datasets (used by the block-split pipeline)."""
        self.model_ = build_hybrid_model(
            spec, target_index=self.target_col if spec.n_channels > 1 else 0,
            hidden=self.hidden, t2v_k=self.t2v_k,
            leaky_slope=self.leaky_slope, seed=self.seed,
        )
        self.result_ = train(self.model_, train_set, self._loss_spec(),
                             self._train_config(), seed=self.seed,
                             val_dataset=val_set)
        self.tau_end_ = tau_end
        return self

    def predict(self, horizon: int | None = None, history=None,
                tau_start: int | None = None) -> np.ndarray:
        """MIMO forecast; horizon may be any value up to the model's.

        history is the trailing (input_length, n_channels) window; when
        tau_start is not given the window is assumed to end where the fit
        data ended.
        """
        h = self.model_.spec.horizon if horizon is None else horizon
        if h > self.model_.spec.horizon:
            raise ValueError(f"horizon {h} exceeds model horizon")
        if history is None:
            raise ValueError("hybrid prediction needs an explicit history window")
        w = np.asarray(history, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        T = self.model_.spec.input_length
        w = w[-T:]
        start = (self.tau_end_ - T) if tau_start is None else tau_start
        taus = start + np.arange(T, dtype=float)
        return forward(self.model_, w, taus)[:h]

    def context_length(self) -> int:
        return self.input_length

    @property
    def loss_label(self) -> str:
        return self.loss


def _temporal_split(data: WindowDataset, n_val: int):
    if n_val <= 0:
        return data, None
    cut = len(data) - n_val
    train_set = WindowDataset(X=data.X[:cut], Y=data.Y[:cut], taus=data.taus[:cut])
    val_set = WindowDataset(X=data.X[cut:], Y=data.Y[cut:], taus=data.taus[cut:])
    return train_set, val_set

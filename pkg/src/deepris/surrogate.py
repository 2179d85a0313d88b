"""Multilayer perceptron surrogate: RIS bits -> per-bin second-order moments.

Plain numpy: forward pass, backpropagation of the squared-error loss with an
l2 penalty on the weights, Adam, and early stopping on validation MSE.

Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
shape ``(C, N)`` maps through ``X @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import DomainError, NumericalError, ValidationError, seeded_rng
from .dataset import Dataset, DatasetSplit

SCHEMA_VERSION = 1
ACTIVATIONS = ("relu", "linear")


class TrainingError(NumericalError):
    pass


class ModelFormatError(ValidationError):
    pass


@dataclass(frozen=True)
class MlpParameters:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]
    target_scale: float = 1.0

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)) or not self.weights:
            raise DomainError("weights, biases and activations must align")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DomainError(f"layer {i}: bias does not match weight shape {w.shape}")
            if i and w.shape[0] != self.weights[i - 1].shape[1]:
                raise DomainError(f"layer {i}: input dim {w.shape[0]} != previous output dim")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise DomainError(f"unknown activation {a!r}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_out(self) -> int:
        return self.weights[-1].shape[1]

    def weight_norm2(self) -> float:
        return float(sum(np.sum(w * w) for w in self.weights))

    def map(self, fn, other=None) -> "MlpParameters":
        """Apply ``fn`` leaf-wise (pairing with ``other`` when given)."""
        if other is None:
            ws = tuple(fn(w) for w in self.weights)
            bs = tuple(fn(b) for b in self.biases)
        else:
            ws = tuple(fn(w, o) for w, o in zip(self.weights, other.weights))
            bs = tuple(fn(b, o) for b, o in zip(self.biases, other.biases))
        return replace(self, weights=ws, biases=bs)


def init_parameters(n: int, hidden=(64, 64), b: int = 30, seed: int = 0) -> MlpParameters:
    """He-uniform weights (limit ``sqrt(6 / fan_in)``), zero biases."""
    dims = (n, *hidden, b)
    if min(dims) <= 0:
        raise DomainError(f"layer dims must be positive: {dims}")
    rng = seeded_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        ws.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    acts = ("relu",) * len(hidden) + ("linear",)
    return MlpParameters(tuple(ws), tuple(bs), acts)


def _as_input(params: MlpParameters, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.n_in:
        raise DomainError(f"input has {x.shape[-1]} features, network expects {params.n_in}")
    return x


def _forward_cache(params, x):
    acts = [x]
    pre = []
    h = x
    for w, b, a in zip(params.weights, params.biases, params.activations):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if a == "relu" else z
        acts.append(h)
    return pre, acts


def forward(params: MlpParameters, x) -> np.ndarray:
    """Network output in normalized target units; ``(B,)`` or ``(C, B)``."""
    x = _as_input(params, x)
    h = x
    for w, b, a in zip(params.weights, params.biases, params.activations):
        h = h @ w + b
        if a == "relu":
            h = np.maximum(h, 0.0)
    return h


def predict_moments(params: MlpParameters, x) -> np.ndarray:
    """Predicted moments in physical units (may contain small negatives)."""
    return forward(params, x) * params.target_scale


def loss(params: MlpParameters, x, y, l2_lambda: float = 0.0) -> float:
    """Sum over records of squared error plus ``l2_lambda * sum(W**2)`` (biases excluded)."""
    x = np.atleast_2d(_as_input(params, x))
    if x.shape[0] == 0:
        raise DomainError("loss needs a non-empty batch")
    err = forward(params, x) - np.atleast_2d(y)
    return float(np.sum(err * err) + l2_lambda * params.weight_norm2())


def gradients(params: MlpParameters, x, y, l2_lambda: float = 0.0) -> MlpParameters:
    """Exact gradient of :func:`loss`, returned in parameter shape."""
    x = np.atleast_2d(_as_input(params, x))
    if x.shape[0] == 0:
        raise DomainError("gradients need a non-empty batch")
    pre, acts = _forward_cache(params, x)
    delta = 2.0 * (acts[-1] - np.atleast_2d(y))
    gw, gb = [], []
    for i in range(len(params.weights) - 1, -1, -1):
        if params.activations[i] == "relu":
            delta = delta * (pre[i] > 0)
        gw.append(acts[i].T @ delta + 2.0 * l2_lambda * params.weights[i])
        gb.append(delta.sum(axis=0))
        if i:
            delta = delta @ params.weights[i].T
    return replace(params, weights=tuple(reversed(gw)), biases=tuple(reversed(gb)))


def evaluate_mse(params: MlpParameters, x, y) -> float:
    """Mean over records and bins of the squared error, no penalty term."""
    x = np.atleast_2d(_as_input(params, x))
    if x.shape[0] == 0:
        raise DomainError("evaluate_mse needs a non-empty batch")
    err = forward(params, x) - np.atleast_2d(y)
    return float(np.mean(err * err))


@dataclass(frozen=True)
class AdamState:
    m: MlpParameters
    v: MlpParameters
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: MlpParameters, **kw) -> "AdamState":
        z = params.map(np.zeros_like)
        return cls(z, z, **kw)


def adam_step(params: MlpParameters, grads: MlpParameters, state: AdamState, t: int,
              lr: float) -> tuple[MlpParameters, AdamState]:
    if t < 1:
        raise DomainError("Adam step index starts at 1")
    b1, b2, eps = state.beta1, state.beta2, state.eps
    m = state.m.map(lambda a, g: b1 * a + (1 - b1) * g, grads)
    v = state.v.map(lambda a, g: b2 * a + (1 - b2) * g * g, grads)
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    step = m.map(lambda mm, vv: lr * (mm / c1) / (np.sqrt(vv / c2) + eps), v)
    new = params.map(lambda p, s: p - s, step)
    return new, replace(state, m=m, v=v)


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    l2_lambda: float = 2.5e-5
    max_epochs: int = 5000
    patience: int = 100
    batch_size: int | None = None  # None: full batch
    hidden: tuple[int, ...] = (64, 64)
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.l2_lambda < 0:
            raise DomainError("learning rate must be positive and lambda non-negative")
        if self.max_epochs < 1 or self.patience < 1:
            raise DomainError("max_epochs and patience must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise DomainError("batch_size must be positive")


@dataclass
class TrainingReport:
    epochs_run: int
    best_epoch: int
    test_mse: float
    target_scale: float
    train_loss_history: list[float] = field(default_factory=list)
    validation_mse_history: list[float] = field(default_factory=list)

    @property
    def best_validation_mse(self) -> float:
        return self.validation_mse_history[self.best_epoch - 1]

    def to_text(self) -> str:
        return "\n".join([
            f"epochs_run = {self.epochs_run}",
            f"best_epoch = {self.best_epoch}",
            f"best_validation_mse = {self.best_validation_mse!r}",
            f"test_mse = {self.test_mse!r}",
            f"final_train_loss = {self.train_loss_history[-1]!r}",
            f"target_scale = {self.target_scale!r}",
        ]) + "\n"


def train(split: DatasetSplit, cfg: TrainingConfig = TrainingConfig()) -> tuple[MlpParameters, TrainingReport]:
    """Adam on the l2-penalized squared error with early stopping.

    Targets are divided by the training-set mean of all entries before
    fitting; that constant is stored on the returned parameters and all MSE
    figures in the report are in these normalized units.
    """
    tr, va, te = split.train, split.validation, split.test
    scale = float(np.mean(tr.targets))
    if not scale > 0:
        raise TrainingError("training targets have zero mean; cannot normalize")
    xtr, ytr = tr.configs.astype(float), tr.targets / scale
    xva, yva = va.configs.astype(float), va.targets / scale
    params = replace(init_parameters(tr.n, cfg.hidden, tr.b, cfg.seed), target_scale=scale)
    state = AdamState.zeros_like(params)
    rng = seeded_rng(cfg.seed + 1)
    bs = cfg.batch_size or len(tr)
    best, best_val, best_epoch, t = params, np.inf, 0, 0
    train_hist, val_hist = [], []
    for epoch in range(1, cfg.max_epochs + 1):
        order = np.arange(len(tr)) if bs >= len(tr) else rng.permutation(len(tr))
        for start in range(0, len(tr), bs):
            sel = order[start:start + bs]
            g = gradients(params, xtr[sel], ytr[sel], cfg.l2_lambda)
            t += 1
            params, state = adam_step(params, g, state, t, cfg.learning_rate)
        with np.errstate(over="ignore", invalid="ignore"):
            tl = loss(params, xtr, ytr, cfg.l2_lambda)
            vm = evaluate_mse(params, xva, yva)
        if not (np.isfinite(tl) and np.isfinite(vm)):
            raise TrainingError(f"training diverged at epoch {epoch}")
        train_hist.append(tl)
        val_hist.append(vm)
        if vm < best_val:
            best, best_val, best_epoch = params, vm, epoch
        elif epoch - best_epoch >= cfg.patience:
            break
    test_mse = evaluate_mse(best, te.configs.astype(float), te.targets / scale)
    report = TrainingReport(len(val_hist), best_epoch, test_mse, scale, train_hist, val_hist)
    return best, report


def grid_search_training(split: DatasetSplit, grid, base: TrainingConfig = TrainingConfig()):
    """Train one model per ``(learning_rate, hidden, l2_lambda)`` combination.

    Returns ``(best_cfg, rows)`` where rows hold each combination's best
    validation MSE; the winner minimizes it (first in grid order on ties).
    """
    rows = []
    best_cfg, best_val = None, np.inf
    for lr, hidden, lam in grid:
        cfg = replace(base, learning_rate=lr, hidden=tuple(hidden), l2_lambda=lam)
        _, rep = train(split, cfg)
        rows.append((lr, tuple(hidden), lam, rep.best_validation_mse))
        if rep.best_validation_mse < best_val:
            best_cfg, best_val = cfg, rep.best_validation_mse
    return best_cfg, rows


def save_model(params: MlpParameters, path) -> None:
    lines = [
        f"# deepris-mlp schema={SCHEMA_VERSION}",
        f"target_scale {params.target_scale!r}",
        f"layers {len(params.weights)}",
    ]
    for i, (w, b, a) in enumerate(zip(params.weights, params.biases, params.activations)):
        lines.append(f"layer {i} in={w.shape[0]} out={w.shape[1]} activation={a}")
        lines.append("W " + " ".join(repr(float(v)) for v in w.ravel()))
        lines.append("b " + " ".join(repr(float(v)) for v in b))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path, *, n: int | None = None, b: int | None = None) -> MlpParameters:
    lines = Path(path).read_text().splitlines()

    def line(i, prefix):
        if i >= len(lines) or not lines[i].startswith(prefix):
            raise ModelFormatError(f"line {i + 1}: expected {prefix!r} (file truncated or malformed)")
        return lines[i][len(prefix):]

    head = line(0, "# deepris-mlp ")
    if head.strip() != f"schema={SCHEMA_VERSION}":
        raise ModelFormatError(f"line 1: unsupported model version {head.strip()!r}")
    try:
        scale = float(line(1, "target_scale "))
        n_layers = int(line(2, "layers "))
        ws, bs, acts = [], [], []
        pos = 3
        for i in range(n_layers):
            fields = dict(f.split("=") for f in line(pos, f"layer {i} ").split())
            fi, fo, act = int(fields["in"]), int(fields["out"]), fields["activation"]
            wv = np.array([float(v) for v in line(pos + 1, "W ").split()])
            bv = np.array([float(v) for v in line(pos + 2, "b ").split()])
            if wv.size != fi * fo or bv.size != fo:
                raise ModelFormatError(f"line {pos + 2}: layer {i} has the wrong number of values")
            ws.append(wv.reshape(fi, fo))
            bs.append(bv)
            acts.append(act)
            pos += 3
        line(pos, "end")
    except (ValueError, KeyError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    try:
        params = MlpParameters(tuple(ws), tuple(bs), tuple(acts), scale)
    except DomainError as exc:
        raise ModelFormatError(str(exc)) from exc
    if n is not None and params.n_in != n:
        raise ModelFormatError(f"model expects N={params.n_in}, scenario has N={n}")
    if b is not None and params.n_out != b:
        raise ModelFormatError(f"model predicts B={params.n_out} bins, scenario has B={b}")
    return params


def dataset_mse(params: MlpParameters, ds: Dataset) -> float:
    """Normalized-unit MSE of ``params`` on ``ds``."""
    return evaluate_mse(params, ds.configs.astype(float), ds.targets / params.target_scale)

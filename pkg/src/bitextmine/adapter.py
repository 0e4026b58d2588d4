"""Bottleneck adapter: a d -> h -> d network trained to pull source
embeddings toward their parallel targets under a 1 - cosine loss.

Only the source side is transformed; target embeddings are never modified.
Parameters live in float64 during training and are stored as float32 in the
ADP1 checkpoint format:

    magic "ADP1" | u32 LE d | u32 LE h | u8 activation code
    | w1 (h x d) | b1 (h) | w2 (d x h) | b2 (d)   as float32 LE, row-major
"""

from __future__ import annotations

import logging
import struct
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DivergenceError, FormatError, ValidationError, ZeroNormError

log = logging.getLogger(__name__)

ADP1_MAGIC = b"ADP1"
_ADP1_HEADER = struct.Struct("<4sIIB")
_ACTIVATION_CODES = {"relu": 0, "identity": 1}
_CODE_ACTIVATIONS = {v: k for k, v in _ACTIVATION_CODES.items()}

# Mean pairwise cosine of transformed rows above this triggers a collapse
# warning: the loss only attracts pairs, so with frozen targets a degenerate
# all-outputs-equal state is possible in principle.
COLLAPSE_COSINE = 0.99


@dataclass
class AdapterModel:
    """Weights of the bottleneck network. w1/b1 feed the hidden layer,
    w2/b2 the output layer; output dimensionality equals the input's."""

    w1: np.ndarray  # (h, d)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (d, h)
    b2: np.ndarray  # (d,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in _ACTIVATION_CODES:
            raise ValidationError(f"unknown activation {self.activation!r}")
        h, d = self.w1.shape
        if self.w2.shape != (d, h) or self.b1.shape != (h,) or self.b2.shape != (d,):
            raise ValidationError(
                f"inconsistent parameter shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}"
            )

    @property
    def d(self) -> int:
        return self.w1.shape[1]

    @property
    def h(self) -> int:
        return self.w1.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def copy(self) -> "AdapterModel":
        return AdapterModel(
            self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(), self.activation
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())


@dataclass(frozen=True)
class Gradients:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]


@dataclass(frozen=True)
class TrainConfig:
    """Fully determines the training trajectory for fixed data: identical
    (data, config) runs give bit-identical parameters in single-threaded
    mode."""

    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"  # "adam" or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("epochs and batch_size must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class TrainHistory:
    epoch_losses: list[float]
    final_loss: float
    wall_time: float


def init_adapter(d: int, h: int, activation: str = "relu", seed: int = 0) -> AdapterModel:
    """Glorot-uniform weights (scale sqrt(6 / (fan_in + fan_out)) per layer)
    and zero biases, deterministic in the seed."""
    if d < 1 or h < 1:
        raise ValidationError(f"d and h must be positive, got d={d}, h={h}")
    rng = np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (d + h))  # both layers have fan pair (d, h)
    return AdapterModel(
        w1=rng.uniform(-limit, limit, size=(h, d)),
        b1=np.zeros(h),
        w2=rng.uniform(-limit, limit, size=(d, h)),
        b2=np.zeros(d),
        activation=activation,
    )


def _activate(model: AdapterModel, z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) if model.activation == "relu" else z


def _activate_prime(model: AdapterModel, z: np.ndarray) -> np.ndarray:
    # ReLU subgradient at exactly zero is taken as 0.
    return (z > 0.0).astype(np.float64) if model.activation == "relu" else np.ones_like(z)


def _forward_batch(model: AdapterModel, x: np.ndarray):
    z1 = x @ model.w1.T + model.b1
    a = _activate(model, z1)
    out = a @ model.w2.T + model.b2
    return z1, a, out


def forward(model: AdapterModel, x) -> np.ndarray:
    """Run one d-vector through the network: w2 . act(w1 . x + b1) + b2."""
    x64 = np.asarray(x, dtype=np.float64)
    if x64.ndim != 1 or x64.shape[0] != model.d:
        raise ValidationError(f"input must be a {model.d}-vector, got shape {x64.shape}")
    _, _, out = _forward_batch(model, x64.reshape(1, -1))
    return out[0]


def _batch_loss_and_grads(model: AdapterModel, x: np.ndarray, y: np.ndarray, strict: bool = True):
    """Mean 1 - cosine loss over a batch and its exact analytic gradients.

    For one pair, with o = forward(x), unit vectors ô = o/|o| and ŷ = y/|y|,
    and c = ô.ŷ, the loss is 1 - c and d(loss)/do = (c ô - ŷ) / |o|, which is
    orthogonal to o (the cosine is invariant to the norm of o). The rest is
    plain backprop through the two affine layers.

    An exactly-zero forward output has no cosine direction. In strict mode
    that is an error; otherwise such rows are dropped from the batch (this
    happens when ReLU kills every hidden unit of a row while the output bias
    is still zero, i.e. essentially only before the first optimizer step).
    Returns (mean loss, gradients, rows used); (0.0, None, 0) if nothing
    survived.
    """
    z1, a, out = _forward_batch(model, x)

    out_norm = np.sqrt(np.einsum("nd,nd->n", out, out))
    y_norm = np.sqrt(np.einsum("nd,nd->n", y, y))
    if (zero := np.flatnonzero(y_norm == 0.0)).size:
        raise ZeroNormError(f"target row {zero[0]} has zero norm")
    if (zero := np.flatnonzero(out_norm == 0.0)).size:
        if strict:
            raise ZeroNormError(
                f"forward output for row {zero[0]} has zero norm (degenerate model state)"
            )
        keep = out_norm != 0.0
        if not keep.any():
            return 0.0, None, 0
        x, y, z1, a = x[keep], y[keep], z1[keep], a[keep]
        out, out_norm, y_norm = out[keep], out_norm[keep], y_norm[keep]

    n = x.shape[0]
    o_hat = out / out_norm[:, None]
    y_hat = y / y_norm[:, None]
    cos = np.einsum("nd,nd->n", o_hat, y_hat)
    loss = float(np.mean(1.0 - np.clip(cos, -1.0, 1.0)))

    g_out = (cos[:, None] * o_hat - y_hat) / out_norm[:, None] / n
    delta = (g_out @ model.w2) * _activate_prime(model, z1)
    grads = Gradients(
        w1=delta.T @ x,
        b1=delta.sum(axis=0),
        w2=g_out.T @ a,
        b2=g_out.sum(axis=0),
    )
    return loss, grads, n


def pair_loss(model: AdapterModel, x, y) -> float:
    """1 - cosine_similarity(forward(x), y); always in [0, 2]."""
    x64 = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y64 = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if x64.shape[1] != model.d or y64.shape[1] != model.d:
        raise ValidationError("pair dimensions must match the model")
    loss, _, _ = _batch_loss_and_grads(model, x64, y64)
    return loss


def gradient(model: AdapterModel, x, y) -> Gradients:
    """Exact analytic gradient of pair_loss with respect to all parameters."""
    x64 = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y64 = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if x64.shape[1] != model.d or y64.shape[1] != model.d:
        raise ValidationError("pair dimensions must match the model")
    _, grads, _ = _batch_loss_and_grads(model, x64, y64)
    return grads


class _Sgd:
    def __init__(self, cfg: TrainConfig):
        self.lr = cfg.learning_rate

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Adam:
    def __init__(self, cfg: TrainConfig, params: list[np.ndarray]):
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def train(
    model: AdapterModel,
    source: np.ndarray,
    target: np.ndarray,
    config: TrainConfig | None = None,
) -> tuple[AdapterModel, TrainHistory]:
    """Mini-batch training of the mean pair loss on parallel rows.

    The input model is left untouched; a trained copy is returned together
    with per-epoch mean losses. Raises DivergenceError (with epoch and batch
    location) if any parameter goes non-finite.
    """
    cfg = config or TrainConfig()
    x = np.asarray(source, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape != y.shape:
        raise ValidationError(f"source/target shapes differ: {x.shape} vs {y.shape}")
    if x.shape[0] < 1:
        raise ValidationError("training needs at least one pair")
    if x.shape[1] != model.d:
        raise ValidationError(f"model expects dim {model.d}, data has dim {x.shape[1]}")

    work = model.copy()
    params = work.params()
    opt = _Adam(cfg, params) if cfg.optimizer == "adam" else _Sgd(cfg)
    rng = np.random.default_rng(cfg.seed)
    n = x.shape[0]

    t0 = time.perf_counter()
    epoch_losses = []
    dropped_rows = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle_each_epoch else np.arange(n)
        total = 0.0
        used = 0
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            loss, grads, n_used = _batch_loss_and_grads(work, x[batch], y[batch], strict=False)
            dropped_rows += batch.size - n_used
            if grads is None:
                continue
            opt.step(params, grads.params())
            if not work.all_finite():
                raise DivergenceError(epoch, batch_index)
            total += loss * n_used
            used += n_used
        if used == 0:
            raise ZeroNormError(
                f"every forward output in epoch {epoch} had zero norm (degenerate model state)"
            )
        epoch_losses.append(total / used)

    if dropped_rows:
        log.warning(
            "training dropped %d row(s) whose forward output had exactly zero norm",
            dropped_rows,
        )
    _warn_on_collapse(work, x)
    history = TrainHistory(
        epoch_losses=epoch_losses,
        final_loss=epoch_losses[-1],
        wall_time=time.perf_counter() - t0,
    )
    return work, history


def _warn_on_collapse(model: AdapterModel, x: np.ndarray, sample: int = 64) -> None:
    rows = x[: min(sample, x.shape[0])]
    if rows.shape[0] < 2:
        return
    _, _, out = _forward_batch(model, rows)
    norms = np.sqrt(np.einsum("nd,nd->n", out, out))
    if (norms == 0.0).any():
        log.warning("collapse diagnostic: zero-norm transformed rows")
        return
    unit = out / norms[:, None]
    cos = unit @ unit.T
    mean_off_diagonal = (cos.sum() - rows.shape[0]) / (rows.shape[0] * (rows.shape[0] - 1))
    if mean_off_diagonal > COLLAPSE_COSINE:
        log.warning(
            "collapse diagnostic: mean pairwise cosine of transformed rows is %.4f",
            mean_off_diagonal,
        )


def apply(model: AdapterModel, matrix, block_rows: int = 4096) -> np.ndarray:
    """Transform every row of an embedding matrix; returns float32."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValidationError(f"embedding matrix must be 2-D, got shape {m.shape}")
    if m.shape[1] != model.d:
        raise ValidationError(f"model expects dim {model.d}, matrix has dim {m.shape[1]}")
    out = np.empty(m.shape, dtype=np.float32)
    for start in range(0, m.shape[0], block_rows):
        stop = min(start + block_rows, m.shape[0])
        _, _, block = _forward_batch(model, m[start:stop].astype(np.float64))
        out[start:stop] = block.astype(np.float32)
    return out


def save_adapter(model: AdapterModel, path: str | Path) -> None:
    """Write an ADP1 checkpoint; round-trips bit-exactly through load_adapter."""
    if not model.all_finite():
        raise ValidationError("refusing to save a model with non-finite parameters")
    with open(path, "wb") as fh:
        fh.write(
            _ADP1_HEADER.pack(ADP1_MAGIC, model.d, model.h, _ACTIVATION_CODES[model.activation])
        )
        for p in model.params():
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_adapter(path: str | Path) -> AdapterModel:
    """Read an ADP1 checkpoint; parameters are promoted to float64."""
    raw = Path(path).read_bytes()
    if len(raw) < _ADP1_HEADER.size:
        raise FormatError(f"{path}: file shorter than the ADP1 header")
    magic, d, h, act_code = _ADP1_HEADER.unpack_from(raw)
    if magic != ADP1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {ADP1_MAGIC!r}")
    if act_code not in _CODE_ACTIVATIONS:
        raise FormatError(f"{path}: unknown activation code {act_code}")
    sizes = [h * d, h, d * h, d]
    expected = _ADP1_HEADER.size + 4 * sum(sizes)
    if len(raw) != expected:
        raise FormatError(f"{path}: file is {len(raw)} bytes, expected {expected}")
    flat = np.frombuffer(raw, dtype="<f4", offset=_ADP1_HEADER.size).astype(np.float64)
    offsets = np.cumsum([0] + sizes)
    w1, b1, w2, b2 = (flat[offsets[i] : offsets[i + 1]] for i in range(4))
    model = AdapterModel(
        w1=w1.reshape(h, d),
        b1=b1,
        w2=w2.reshape(d, h),
        b2=b2,
        activation=_CODE_ACTIVATIONS[act_code],
    )
    if not model.all_finite():
        raise FormatError(f"{path}: checkpoint contains non-finite parameters")
    return model

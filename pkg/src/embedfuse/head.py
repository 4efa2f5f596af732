"""Projection head that maps image embeddings into text-embedding space.

Architecture (single record, all math in float64):

    a0 = Aw @ x + ab          optional input adapter (identity-initialized)
    z1 = W1 @ a0 + b1         first fully connected layer
    n1 = LN(z1; g1, c1)       layer norm over features
    z2 = W2 @ n1 + b2         second fully connected layer
    n2 = LN(z2; g2, c2)
    p  = P @ n1               bridge projection (identity / absent when the
                              hidden width equals the text dimension)
    y  = alpha * p + (1 - alpha) * n2,   alpha = sigmoid(fusion logit)

The fusion weight is learned through its logit so alpha stays in (0, 1).
Training minimizes ``1 - cosine(y, target)`` with Adam, using two learning
rates: ``lr_fc`` for the head itself and a (typically much smaller)
``lr_vision`` for the adapter standing in for backbone fine-tuning.

Gradients are hand-derived (see ``head_backward``); the layer-norm backward
is the standard closed form

    dx = inv_std/D * (D*dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))

and the cosine-loss gradient is

    dL/dy = cos * y / |y|^2 - t / (|y| |t|).

Parameter file format ("HEAD", version 1, little-endian, no padding):

    magic   4 bytes  0x48 0x45 0x41 0x44
    version u16      1
    dim_img u32
    hidden  u32
    dim_txt u32
    flags   u8       bit0 = adapter present, bit1 = projection present
    eps_ln  f64
    fusion  f64      alpha logit
    arrays  f64, C row-major, in order: adapter_weight?, adapter_bias?,
            fc1_weight, fc1_bias, norm1_gain, norm1_bias, fc2_weight,
            fc2_bias, norm2_gain, norm2_bias, projection?
"""

from __future__ import annotations

import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from embedfuse.data import PairedDataset
from embedfuse.errors import ConfigError, DataError, FormatError
from embedfuse.metrics import avg_cos_sim
from embedfuse.vectors import as_vector, cosine_similarity

__all__ = [
    "LayerNormCache",
    "layer_norm",
    "layer_norm_backward",
    "HeadParams",
    "ForwardTrace",
    "HeadGrads",
    "TrainConfig",
    "EpochStats",
    "init_head_params",
    "head_forward",
    "head_backward",
    "cosine_loss",
    "train",
    "head_predict",
    "save_head_params",
    "load_head_params",
]

_HEAD_MAGIC = b"HEAD"
_HEAD_VERSION = 1
_HEAD_HEADER = struct.Struct("<4sHIIIBdd")

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


# ---------------------------------------------------------------------------
# layer norm
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LayerNormCache:
    """Intermediate values needed by the backward pass."""

    normalized: np.ndarray  # xhat
    inv_std: float


def layer_norm(x, gain, bias, eps: float) -> tuple[np.ndarray, LayerNormCache]:
    """Normalize a vector to zero mean / unit variance, then scale and shift."""
    xv = as_vector(x, "layer norm input")
    g = as_vector(gain, "gain")
    b = as_vector(bias, "bias")
    if not (xv.shape == g.shape == b.shape):
        raise DataError("layer norm input, gain, and bias must share a shape")
    mu = xv.mean()
    var = ((xv - mu) ** 2).mean()
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (xv - mu) * inv_std
    return g * xhat + b, LayerNormCache(normalized=xhat, inv_std=float(inv_std))


def layer_norm_backward(
    d_out: np.ndarray, gain: np.ndarray, cache: LayerNormCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (dx, dgain, dbias) for the matching layer_norm call."""
    xhat = cache.normalized
    dim = xhat.shape[0]
    dgain = d_out * xhat
    dbias = d_out.copy()
    dxhat = d_out * gain
    dx = (cache.inv_std / dim) * (
        dim * dxhat - dxhat.sum() - xhat * (dxhat * xhat).sum()
    )
    return dx, dgain, dbias


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _array(value, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.ascontiguousarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ConfigError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


@dataclass
class HeadParams:
    """Every learnable (or frozen) tensor of the projection head."""

    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    norm1_gain: np.ndarray
    norm1_bias: np.ndarray
    fc2_weight: np.ndarray
    fc2_bias: np.ndarray
    norm2_gain: np.ndarray
    norm2_bias: np.ndarray
    alpha_fusion_logit: float = 0.0
    adapter_weight: np.ndarray | None = None
    adapter_bias: np.ndarray | None = None
    proj: np.ndarray | None = None
    eps_ln: float = 1e-5

    def __post_init__(self):
        w1 = np.ascontiguousarray(self.fc1_weight, dtype=np.float64)
        if w1.ndim != 2:
            raise ConfigError("fc1_weight must be a matrix")
        hidden, dim_img = w1.shape
        w2 = np.ascontiguousarray(self.fc2_weight, dtype=np.float64)
        if w2.ndim != 2 or w2.shape[1] != hidden:
            raise ConfigError(
                f"fc2_weight must have shape (dim_txt, {hidden}), got {w2.shape}"
            )
        dim_txt = w2.shape[0]
        self.fc1_weight = _array(w1, (hidden, dim_img), "fc1_weight")
        self.fc1_bias = _array(self.fc1_bias, (hidden,), "fc1_bias")
        self.norm1_gain = _array(self.norm1_gain, (hidden,), "norm1_gain")
        self.norm1_bias = _array(self.norm1_bias, (hidden,), "norm1_bias")
        self.fc2_weight = _array(w2, (dim_txt, hidden), "fc2_weight")
        self.fc2_bias = _array(self.fc2_bias, (dim_txt,), "fc2_bias")
        self.norm2_gain = _array(self.norm2_gain, (dim_txt,), "norm2_gain")
        self.norm2_bias = _array(self.norm2_bias, (dim_txt,), "norm2_bias")
        if (self.adapter_weight is None) != (self.adapter_bias is None):
            raise ConfigError("adapter weight and bias must be set together")
        if self.adapter_weight is not None:
            self.adapter_weight = _array(
                self.adapter_weight, (dim_img, dim_img), "adapter_weight"
            )
            self.adapter_bias = _array(self.adapter_bias, (dim_img,), "adapter_bias")
        if self.proj is not None:
            self.proj = _array(self.proj, (dim_txt, hidden), "proj")
        elif hidden != dim_txt:
            raise ConfigError(
                "proj is required when the hidden width differs from dim_txt "
                f"(hidden={hidden}, dim_txt={dim_txt})"
            )
        self.alpha_fusion_logit = float(self.alpha_fusion_logit)
        if not np.isfinite(self.alpha_fusion_logit):
            raise DataError("alpha_fusion_logit must be finite")
        self.eps_ln = float(self.eps_ln)
        if self.eps_ln <= 0:
            raise ConfigError(f"eps_ln must be > 0, got {self.eps_ln}")

    @property
    def dim_img(self) -> int:
        return int(self.fc1_weight.shape[1])

    @property
    def hidden_dim(self) -> int:
        return int(self.fc1_weight.shape[0])

    @property
    def dim_txt(self) -> int:
        return int(self.fc2_weight.shape[0])

    @property
    def alpha(self) -> float:
        return float(1.0 / (1.0 + np.exp(-self.alpha_fusion_logit)))

    @property
    def has_adapter(self) -> bool:
        return self.adapter_weight is not None

    @property
    def has_proj(self) -> bool:
        return self.proj is not None

    def copy(self) -> "HeadParams":
        return replace(
            self,
            fc1_weight=self.fc1_weight.copy(),
            fc1_bias=self.fc1_bias.copy(),
            norm1_gain=self.norm1_gain.copy(),
            norm1_bias=self.norm1_bias.copy(),
            fc2_weight=self.fc2_weight.copy(),
            fc2_bias=self.fc2_bias.copy(),
            norm2_gain=self.norm2_gain.copy(),
            norm2_bias=self.norm2_bias.copy(),
            adapter_weight=None if self.adapter_weight is None else self.adapter_weight.copy(),
            adapter_bias=None if self.adapter_bias is None else self.adapter_bias.copy(),
            proj=None if self.proj is None else self.proj.copy(),
        )


def init_head_params(
    dim_img: int,
    dim_txt: int,
    *,
    hidden_dim: int | None = None,
    seed: int = 0,
    include_adapter: bool = False,
) -> HeadParams:
    """Fresh parameters: FC weights uniform in +-1/sqrt(fan_in), biases zero,
    norm gains one, adapter (when present) exactly identity.

    When hidden_dim differs from dim_txt a bridge projection is drawn uniform
    in +-1/sqrt(hidden_dim); otherwise the branch is the identity and no
    projection tensor exists. Draw order is fixed (fc1, fc2, projection) so a
    seed pins every tensor.
    """
    if dim_img < 1 or dim_txt < 1:
        raise ConfigError("dim_img and dim_txt must be >= 1")
    h = dim_txt if hidden_dim is None else int(hidden_dim)
    if h < 1:
        raise ConfigError(f"hidden_dim must be >= 1, got {h}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    bound1 = 1.0 / np.sqrt(dim_img)
    w1 = rng.uniform(-bound1, bound1, size=(h, dim_img))
    bound2 = 1.0 / np.sqrt(h)
    w2 = rng.uniform(-bound2, bound2, size=(dim_txt, h))
    proj = None
    if h != dim_txt:
        proj = rng.uniform(-bound2, bound2, size=(dim_txt, h))
    adapter_w = np.eye(dim_img) if include_adapter else None
    adapter_b = np.zeros(dim_img) if include_adapter else None
    return HeadParams(
        fc1_weight=w1,
        fc1_bias=np.zeros(h),
        norm1_gain=np.ones(h),
        norm1_bias=np.zeros(h),
        fc2_weight=w2,
        fc2_bias=np.zeros(dim_txt),
        norm2_gain=np.ones(dim_txt),
        norm2_bias=np.zeros(dim_txt),
        alpha_fusion_logit=0.0,
        adapter_weight=adapter_w,
        adapter_bias=adapter_b,
        proj=proj,
    )


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ForwardTrace:
    """Every intermediate of one forward pass, kept for the backward pass."""

    input: np.ndarray
    adapter_out: np.ndarray
    fc1_out: np.ndarray
    norm1_out: np.ndarray
    fc2_out: np.ndarray
    norm2_out: np.ndarray
    branch1: np.ndarray
    final_text_emb: np.ndarray
    ln1_cache: LayerNormCache
    ln2_cache: LayerNormCache


@dataclass(frozen=True)
class HeadGrads:
    """Gradients matching HeadParams field for field."""

    fc1_weight: np.ndarray
    fc1_bias: np.ndarray
    norm1_gain: np.ndarray
    norm1_bias: np.ndarray
    fc2_weight: np.ndarray
    fc2_bias: np.ndarray
    norm2_gain: np.ndarray
    norm2_bias: np.ndarray
    alpha_fusion_logit: float
    adapter_weight: np.ndarray | None = None
    adapter_bias: np.ndarray | None = None
    proj: np.ndarray | None = None


def head_forward(params: HeadParams, image_emb) -> ForwardTrace:
    """Run the head on one image embedding; returns the full trace."""
    x = as_vector(image_emb, "image embedding")
    if x.shape[0] != params.dim_img:
        raise DataError(
            f"image embedding dim {x.shape[0]} does not match head dim_img "
            f"{params.dim_img}"
        )
    if params.has_adapter:
        a0 = params.adapter_weight @ x + params.adapter_bias
    else:
        a0 = x
    z1 = params.fc1_weight @ a0 + params.fc1_bias
    n1, ln1 = layer_norm(z1, params.norm1_gain, params.norm1_bias, params.eps_ln)
    z2 = params.fc2_weight @ n1 + params.fc2_bias
    n2, ln2 = layer_norm(z2, params.norm2_gain, params.norm2_bias, params.eps_ln)
    branch1 = params.proj @ n1 if params.has_proj else n1
    alpha = params.alpha
    y = alpha * branch1 + (1.0 - alpha) * n2
    return ForwardTrace(
        input=x,
        adapter_out=a0,
        fc1_out=z1,
        norm1_out=n1,
        fc2_out=z2,
        norm2_out=n2,
        branch1=branch1,
        final_text_emb=y,
        ln1_cache=ln1,
        ln2_cache=ln2,
    )


def cosine_loss(pred, target) -> float:
    """1 - cosine similarity; 0 when aligned, 2 when opposite."""
    return 1.0 - cosine_similarity(pred, target)


def _cosine_loss_grad(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    norm_p = np.linalg.norm(pred)
    norm_t = np.linalg.norm(target)
    if norm_p == 0.0 or norm_t == 0.0:
        raise DataError("cosine loss is undefined for zero-norm vectors")
    cos = float(np.dot(pred, target) / (norm_p * norm_t))
    grad = cos * pred / (norm_p * norm_p) - target / (norm_p * norm_t)
    return 1.0 - cos, grad


def head_backward(
    params: HeadParams, trace: ForwardTrace, text_target
) -> tuple[float, HeadGrads]:
    """Loss and exact gradients for one (image, text) pair.

    Mirrors head_forward step by step in reverse; the fusion logit gradient
    is dot(dy, branch1 - n2) * alpha * (1 - alpha).
    """
    t = as_vector(text_target, "text embedding")
    if t.shape[0] != params.dim_txt:
        raise DataError(
            f"text embedding dim {t.shape[0]} does not match head dim_txt "
            f"{params.dim_txt}"
        )
    loss, dy = _cosine_loss_grad(trace.final_text_emb, t)
    alpha = params.alpha
    dlogit = float(np.dot(dy, trace.branch1 - trace.norm2_out)) * alpha * (1.0 - alpha)
    dbranch1 = alpha * dy
    dn2 = (1.0 - alpha) * dy
    if params.has_proj:
        dproj = np.outer(dbranch1, trace.norm1_out)
        dn1_branch = params.proj.T @ dbranch1
    else:
        dproj = None
        dn1_branch = dbranch1
    dz2, dg2, dc2 = layer_norm_backward(dn2, params.norm2_gain, trace.ln2_cache)
    dw2 = np.outer(dz2, trace.norm1_out)
    db2 = dz2
    dn1 = dn1_branch + params.fc2_weight.T @ dz2
    dz1, dg1, dc1 = layer_norm_backward(dn1, params.norm1_gain, trace.ln1_cache)
    dw1 = np.outer(dz1, trace.adapter_out)
    db1 = dz1
    if params.has_adapter:
        da0 = params.fc1_weight.T @ dz1
        daw = np.outer(da0, trace.input)
        dab = da0
    else:
        daw = None
        dab = None
    grads = HeadGrads(
        fc1_weight=dw1,
        fc1_bias=db1,
        norm1_gain=dg1,
        norm1_bias=dc1,
        fc2_weight=dw2,
        fc2_bias=db2,
        norm2_gain=dg2,
        norm2_bias=dc2,
        alpha_fusion_logit=dlogit,
        adapter_weight=daw,
        adapter_bias=dab,
        proj=dproj,
    )
    return loss, grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings for head training."""

    epochs: int = 50
    batch_size: int = 32
    lr_fc: float = 1e-3
    lr_vision: float = 1e-5
    seed: int = 0
    hidden_dim: int | None = None
    train_adapter: bool = False
    train_proj: bool = False
    freeze_alpha: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_fc < 0 or self.lr_vision < 0:
            raise ConfigError("learning rates must be >= 0")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ConfigError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.lr_vision > self.lr_fc:
            warnings.warn(
                "lr_vision exceeds lr_fc; the adapter is meant to move much "
                "more slowly than the head",
                stacklevel=2,
            )


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_avg_cossim: float


class _AdamSlot:
    """Adam state for one tensor (scalars are handled as 0-d arrays)."""

    def __init__(self, shape, lr: float):
        self.lr = lr
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, value: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = _ADAM_BETA1 * self.m + (1.0 - _ADAM_BETA1) * grad
        self.v = _ADAM_BETA2 * self.v + (1.0 - _ADAM_BETA2) * grad * grad
        m_hat = self.m / (1.0 - _ADAM_BETA1**self.t)
        v_hat = self.v / (1.0 - _ADAM_BETA2**self.t)
        return value - self.lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)


def _trainable_fields(params: HeadParams, config: TrainConfig) -> list[tuple[str, float]]:
    fields = [
        ("fc1_weight", config.lr_fc),
        ("fc1_bias", config.lr_fc),
        ("norm1_gain", config.lr_fc),
        ("norm1_bias", config.lr_fc),
        ("fc2_weight", config.lr_fc),
        ("fc2_bias", config.lr_fc),
        ("norm2_gain", config.lr_fc),
        ("norm2_bias", config.lr_fc),
    ]
    if not config.freeze_alpha:
        fields.append(("alpha_fusion_logit", config.lr_fc))
    if config.train_adapter and params.has_adapter:
        fields.append(("adapter_weight", config.lr_vision))
        fields.append(("adapter_bias", config.lr_vision))
    if config.train_proj and params.has_proj:
        fields.append(("proj", config.lr_fc))
    return fields


def train(
    config: TrainConfig,
    train_set: PairedDataset,
    val_set: PairedDataset,
    *,
    initial: HeadParams | None = None,
) -> tuple[HeadParams, list[EpochStats]]:
    """Adam training loop; returns the best-validation parameters.

    Deterministic for a fixed config: initialization and the per-epoch
    shuffle both derive from config.seed. Per-batch gradients are the mean
    of per-record gradients. The returned parameters are a copy taken after
    the first epoch achieving the highest validation average cosine.
    """
    if train_set.count == 0:
        raise DataError("training set is empty")
    if val_set.count == 0:
        raise DataError("validation set is empty")
    if train_set.dim_txt != val_set.dim_txt or train_set.dim_img != val_set.dim_img:
        raise DataError("train and validation sets must share both dims")
    if initial is None:
        params = init_head_params(
            train_set.dim_img,
            train_set.dim_txt,
            hidden_dim=config.hidden_dim,
            seed=config.seed,
            include_adapter=config.train_adapter,
        )
    else:
        params = initial.copy()
        if params.dim_img != train_set.dim_img or params.dim_txt != train_set.dim_txt:
            raise ConfigError("initial parameters do not match the dataset dims")

    rng = np.random.Generator(np.random.Philox(key=config.seed))
    images = train_set.images.astype(np.float64)
    texts = train_set.texts.astype(np.float64)
    n = train_set.count

    slots: dict[str, _AdamSlot] = {}
    for name, lr in _trainable_fields(params, config):
        current = getattr(params, name)
        shape = () if np.isscalar(current) else np.shape(current)
        slots[name] = _AdamSlot(shape, lr)

    history: list[EpochStats] = []
    best_params = params.copy()
    best_val = -np.inf
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            sums: dict[str, np.ndarray | float] = {name: 0.0 for name in slots}
            for row in batch:
                trace = head_forward(params, images[row])
                loss, grads = head_backward(params, trace, texts[row])
                loss_sum += loss
                for name in slots:
                    sums[name] = sums[name] + getattr(grads, name)
            scale = 1.0 / batch.shape[0]
            updates = {}
            for name, slot in slots.items():
                grad = np.asarray(sums[name]) * scale
                new_value = slot.step(np.asarray(getattr(params, name)), grad)
                updates[name] = float(new_value) if new_value.ndim == 0 else new_value
            params = replace(params, **updates)
        train_loss = loss_sum / n
        if not np.isfinite(train_loss):
            raise DataError(f"non-finite training loss at epoch {epoch}")
        val_preds = head_predict(params, val_set)
        val_report = avg_cos_sim(val_preds, val_set.texts)
        val_score = val_report.avg_cossim
        history.append(EpochStats(epoch, float(train_loss), float(val_score)))
        if val_score > best_val:
            best_val = val_score
            best_params = params.copy()
    return best_params, history


def head_predict(
    params: HeadParams, dataset: PairedDataset, threads: int = 1
) -> np.ndarray:
    """Predicted text embeddings for every record, in dataset order.

    Rows are independent, so a thread pool over rows (threads > 1) gives a
    bit-identical result to the serial loop.
    """
    images = dataset.images.astype(np.float64)
    if dataset.count == 0:
        return np.zeros((0, params.dim_txt))
    if dataset.dim_img != params.dim_img:
        raise DataError(
            f"dataset dim_img {dataset.dim_img} does not match head dim_img "
            f"{params.dim_img}"
        )

    def row(x: np.ndarray) -> np.ndarray:
        return head_forward(params, x).final_text_emb

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, images))
    else:
        rows = [row(x) for x in images]
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_head_params(params: HeadParams, destination) -> int:
    """Write the HEAD binary format; returns the byte count written."""
    flags = (1 if params.has_adapter else 0) | (2 if params.has_proj else 0)
    header = _HEAD_HEADER.pack(
        _HEAD_MAGIC,
        _HEAD_VERSION,
        params.dim_img,
        params.hidden_dim,
        params.dim_txt,
        flags,
        params.eps_ln,
        params.alpha_fusion_logit,
    )
    chunks = [header]
    for arr in _array_sequence(params):
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    blob = b"".join(chunks)
    path = Path(destination)
    path.write_bytes(blob)
    return len(blob)


def _array_sequence(params: HeadParams) -> list[np.ndarray]:
    arrays = []
    if params.has_adapter:
        arrays += [params.adapter_weight, params.adapter_bias]
    arrays += [
        params.fc1_weight,
        params.fc1_bias,
        params.norm1_gain,
        params.norm1_bias,
        params.fc2_weight,
        params.fc2_bias,
        params.norm2_gain,
        params.norm2_bias,
    ]
    if params.has_proj:
        arrays.append(params.proj)
    return arrays


def load_head_params(source) -> HeadParams:
    """Read a file written by save_head_params; bit-exact round trip."""
    blob = Path(source).read_bytes()
    if len(blob) < _HEAD_HEADER.size:
        raise FormatError("head parameter file is truncated")
    magic, version, dim_img, hidden, dim_txt, flags, eps_ln, logit = (
        _HEAD_HEADER.unpack_from(blob)
    )
    if magic != _HEAD_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {_HEAD_MAGIC!r}")
    if version != _HEAD_VERSION:
        raise FormatError(f"unsupported head format version {version}")
    has_adapter = bool(flags & 1)
    has_proj = bool(flags & 2)
    shapes: list[tuple[str, tuple[int, ...]]] = []
    if has_adapter:
        shapes += [
            ("adapter_weight", (dim_img, dim_img)),
            ("adapter_bias", (dim_img,)),
        ]
    shapes += [
        ("fc1_weight", (hidden, dim_img)),
        ("fc1_bias", (hidden,)),
        ("norm1_gain", (hidden,)),
        ("norm1_bias", (hidden,)),
        ("fc2_weight", (dim_txt, hidden)),
        ("fc2_bias", (dim_txt,)),
        ("norm2_gain", (dim_txt,)),
        ("norm2_bias", (dim_txt,)),
    ]
    if has_proj:
        shapes.append(("proj", (dim_txt, hidden)))
    expected = _HEAD_HEADER.size + sum(
        8 * int(np.prod(shape)) for _, shape in shapes
    )
    if len(blob) != expected:
        raise FormatError(
            f"head parameter file has {len(blob)} bytes, expected {expected}"
        )
    offset = _HEAD_HEADER.size
    fields: dict[str, np.ndarray] = {}
    for name, shape in shapes:
        size = 8 * int(np.prod(shape))
        fields[name] = np.frombuffer(
            blob, dtype="<f8", count=int(np.prod(shape)), offset=offset
        ).reshape(shape).copy()
        offset += size
    try:
        return HeadParams(
            alpha_fusion_logit=logit,
            eps_ln=eps_ln,
            **fields,
        )
    except (ConfigError, DataError) as exc:
        raise FormatError(f"head parameter file is inconsistent: {exc}") from exc

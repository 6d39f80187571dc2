"""Shared convolutional encoder with a pipe classifier head and a depth regressor head.

Input is one log-mel patch (bands x frames). Two valid convolutions with
ReLU, global max pooling to a feature vector, then

    pipe head:  FC -> ReLU -> FC(2) -> softmax
    depth head: FC -> ReLU -> FC -> ReLU -> FC(1)

Forward and backward are written out by hand. Global max pooling routes
each channel's gradient through a single position, so the backward pass
only touches the receptive fields of the pooled winners.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .._validation import InvalidShapeError
from ..signal.types import MEL_BANDS, MEL_FRAMES

LOG_FLOOR = 1e-15


@dataclass(frozen=True)
class ModelConfig:
    channels: tuple = (128, 128)
    kernels: tuple = (5, 3)
    pipe_hidden: tuple = (128,)
    depth_hidden: tuple = (256, 128)
    input_shape: tuple = (MEL_BANDS, MEL_FRAMES)

    def __post_init__(self):
        for name in ("channels", "kernels", "pipe_hidden", "depth_hidden", "input_shape"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        if len(self.channels) != 2 or len(self.kernels) != 2:
            raise ValueError("the encoder has exactly two convolutional layers")
        if min(self.channels + self.kernels + self.pipe_hidden + self.depth_hidden) < 1:
            raise ValueError("layer sizes must be positive")
        h, w = self.input_shape
        k = sum(self.kernels) - 2
        if h <= k or w <= k:
            raise ValueError(f"input {self.input_shape} is too small for kernels {self.kernels}")

    def param_shapes(self) -> dict:
        c1, c2 = self.channels
        k1, k2 = self.kernels
        shapes = {"conv1_w": (c1, 1, k1, k1), "conv1_b": (c1,), "conv2_w": (c2, c1, k2, k2), "conv2_b": (c2,)}
        prev = c2
        for i, n in enumerate(self.pipe_hidden + (2,), 1):
            shapes[f"pipe_w{i}"], shapes[f"pipe_b{i}"] = (prev, n), (n,)
            prev = n
        prev = c2
        for i, n in enumerate(self.depth_hidden + (1,), 1):
            shapes[f"depth_w{i}"], shapes[f"depth_b{i}"] = (prev, n), (n,)
            prev = n
        return shapes

    def n_params(self) -> int:
        return int(sum(np.prod(s) for s in self.param_shapes().values()))


SMALL_CONFIG = ModelConfig(channels=(5, 5), kernels=(3, 3), pipe_hidden=(8,), depth_hidden=(8, 8))


@dataclass
class JointModel:
    config: ModelConfig
    params: dict = field(repr=False)
    seed: int | None = None

    def copy(self) -> JointModel:
        return JointModel(self.config, {k: v.copy() for k, v in self.params.items()}, self.seed)

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in self.config.param_shapes()])


def glorot_limit(shape) -> float:
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    else:
        fan_in, fan_out = shape
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_model(config: ModelConfig | None = None, seed: int = 0) -> JointModel:
    """Glorot-uniform weights and zero biases, drawn in a fixed parameter order."""
    config = config or ModelConfig()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in config.param_shapes().items():
        if "_w" in name:
            s = glorot_limit(shape)
            params[name] = rng.uniform(-s, s, shape)
        else:
            params[name] = np.zeros(shape)
    return JointModel(config, params, seed)


def _as_batch(x, config: ModelConfig) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != config.input_shape:
        raise InvalidShapeError(f"expected input of shape (n, {config.input_shape[0]}, {config.input_shape[1]}), got {x.shape}")
    return x


def conv_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid, stride-1 cross-correlation with one bias per output channel.

    ``x`` is ``(C_in, H, W)`` or ``(B, C_in, H, W)``; ``weights`` is
    ``(C_out, C_in, kh, kw)``.
    """
    single = x.ndim == 3
    if single:
        x = x[None]
    out = _conv_nhwc(np.moveaxis(x, 1, -1), weights, bias)
    out = np.moveaxis(out, -1, 1)
    return out[0] if single else out


def _conv_nhwc(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Channels-last convolution, ``(B, H, W, C_in)`` -> ``(B, Ho, Wo, C_out)``.

    Few input channels go through im2col. Many input channels use one GEMM
    against all kernel taps at once followed by a shifted sum, which avoids
    materialising the large column matrix.
    """
    b, h, w, c_in = x.shape
    c_out, wc, kh, kw = weights.shape
    if wc != c_in:
        raise InvalidShapeError(f"input has {c_in} channels, kernel expects {wc}")
    if h < kh or w < kw:
        raise InvalidShapeError(f"input {h}x{w} is smaller than the {kh}x{kw} kernel")
    ho, wo = h - kh + 1, w - kw + 1
    if c_in * kh * kw <= 64:
        cols = _im2col(x, kh, kw)
        out = cols.reshape(-1, cols.shape[-1]) @ weights.reshape(c_out, -1).T
        return out.reshape(b, ho, wo, c_out) + bias
    taps = weights.transpose(1, 2, 3, 0).reshape(c_in, kh * kw * c_out)
    z = (x.reshape(-1, c_in) @ taps).reshape(b, h, w, kh * kw, c_out)
    out = np.zeros((b, ho, wo, c_out), dtype=z.dtype)
    for di in range(kh):
        for dj in range(kw):
            out += z[:, di : di + ho, dj : dj + wo, di * kw + dj]
    return out + bias


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """``(B, H, W, C)`` -> ``(B, Ho*Wo, C*kh*kw)`` with columns ordered (channel, row, col)."""
    b, h, w, c = x.shape
    win = sliding_window_view(x, (kh, kw), axis=(1, 2))  # (B, Ho, Wo, C, kh, kw)
    ho, wo = h - kh + 1, w - kw + 1
    return np.ascontiguousarray(win).reshape(b, ho * wo, c * kh * kw)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2_pooled: np.ndarray
    pool_index: np.ndarray
    features: np.ndarray
    pipe_acts: list
    depth_acts: list
    logits: np.ndarray
    probs: np.ndarray
    depth: np.ndarray


def _mlp_forward(f, params, prefix, n_layers, dtype):
    """Returns the pre-activations of every layer; ReLU on all but the last."""
    acts = [f]
    h = f
    for i in range(1, n_layers + 1):
        z = h @ params[f"{prefix}_w{i}"].astype(dtype, copy=False) + params[f"{prefix}_b{i}"].astype(dtype, copy=False)
        acts.append(z)
        h = np.maximum(z, 0) if i < n_layers else z
    return acts


def forward_batch(model: JointModel, x, dtype=np.float64) -> ForwardCache:
    cfg = model.config
    p = model.params
    x = _as_batch(x, cfg).astype(dtype, copy=False)
    B = x.shape[0]
    z1 = _conv_nhwc(x[..., None], p["conv1_w"].astype(dtype, copy=False), p["conv1_b"].astype(dtype, copy=False))
    a1 = np.maximum(z1, 0)
    z2 = _conv_nhwc(a1, p["conv2_w"].astype(dtype, copy=False), p["conv2_b"].astype(dtype, copy=False))
    c2 = z2.shape[-1]
    flat = z2.reshape(B, -1, c2)
    idx = np.argmax(flat, axis=1)  # (B, C2) winning position per channel
    pooled_z = np.take_along_axis(flat, idx[:, None, :], axis=1)[:, 0]
    # relu is monotone, so max(relu(z)) = relu(max(z)) and the winner is the same position
    features = np.maximum(pooled_z, 0)
    pipe_acts = _mlp_forward(features, p, "pipe", len(cfg.pipe_hidden) + 1, dtype)
    depth_acts = _mlp_forward(features, p, "depth", len(cfg.depth_hidden) + 1, dtype)
    logits = pipe_acts[-1]
    probs = softmax(logits.astype(np.float64))
    depth = depth_acts[-1][:, 0].astype(np.float64)
    return ForwardCache(x, z1, a1, pooled_z, idx, features, pipe_acts, depth_acts, logits, probs, depth)


def forward(model: JointModel, segment) -> tuple[np.ndarray, float]:
    """``(pipe_probs, depth)`` for a single 2-D segment (or MelSegment)."""
    values = getattr(segment, "values", segment)
    values = np.asarray(values, dtype=float)
    if values.shape != model.config.input_shape:
        raise InvalidShapeError(f"segment must be {model.config.input_shape}, got {values.shape}")
    cache = forward_batch(model, values[None])
    return cache.probs[0], float(cache.depth[0])


# losses ------------------------------------------------------------------

def loss_pipe(pipe_probs, label: int) -> float:
    """Negative log-likelihood of the true class with a floor inside the log."""
    p = float(np.asarray(pipe_probs, dtype=float)[int(label)])
    return float(-np.log(max(p, LOG_FLOOR)))


def loss_depth(predicted: float, label: float) -> float:
    return float((label - predicted) ** 2)


def loss_joint(loss_depth_val: float, loss_pipe_val: float, w0: float = 1.0, w1: float = 1.0,
               has_depth: bool = True) -> float:
    if w0 < 0 or w1 < 0:
        raise ValueError("loss weights must be non-negative")
    return (w0 * loss_depth_val if has_depth else 0.0) + w1 * loss_pipe_val


def batch_losses(cache: ForwardCache, labels, depths, mask, w0=1.0, w1=1.0) -> np.ndarray:
    """Per-sample joint loss; ``mask`` marks samples whose depth is supervised."""
    labels = np.asarray(labels, dtype=int)
    p_true = cache.probs[np.arange(labels.size), labels]
    lp = -np.log(np.maximum(p_true, LOG_FLOOR))
    ld = np.where(mask, (np.nan_to_num(np.asarray(depths, dtype=float)) - cache.depth) ** 2, 0.0)
    return w0 * ld + w1 * lp


# backward ----------------------------------------------------------------

def _mlp_backward(grad_out, acts, params, prefix, grads):
    """Back through an MLP whose cached pre-activations are ``acts``; returns d/d(input)."""
    n_layers = len(acts) - 1
    g = grad_out
    for i in range(n_layers, 0, -1):
        h_in = acts[i - 1] if i == 1 else np.maximum(acts[i - 1], 0)
        grads[f"{prefix}_w{i}"] = h_in.T.astype(np.float64) @ g.astype(np.float64)
        grads[f"{prefix}_b{i}"] = g.sum(axis=0).astype(np.float64)
        g = g @ params[f"{prefix}_w{i}"].T.astype(g.dtype, copy=False)
        if i > 1:
            g = g * (acts[i - 1] > 0)
    return g


def backward(model: JointModel, cache: ForwardCache, labels, depths=None, mask=None,
             w0: float = 1.0, w1: float = 1.0) -> dict:
    """Exact gradient of the summed joint loss over the batch for every parameter."""
    cfg, p = model.config, model.params
    dtype = cache.x.dtype
    B = cache.x.shape[0]
    labels = np.asarray(labels, dtype=int).reshape(B)
    mask = np.zeros(B, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).reshape(B)
    depths = np.zeros(B) if depths is None else np.nan_to_num(np.asarray(depths, dtype=float).reshape(B))
    grads: dict = {}

    # pipe head: d(-log p_y)/d logits = p - onehot, zero where the log floor is active
    onehot = np.eye(2)[labels]
    p_true = cache.probs[np.arange(B), labels]
    g_logits = w1 * (cache.probs - onehot) * (p_true > LOG_FLOOR)[:, None]
    g_feat = _mlp_backward(g_logits.astype(dtype), cache.pipe_acts, p, "pipe", grads)

    g_depth = (2.0 * w0 * (cache.depth - depths) * mask)[:, None]
    g_feat = g_feat + _mlp_backward(g_depth.astype(dtype), cache.depth_acts, p, "depth", grads)

    # global max pool + relu: only the winning position of each channel gets gradient
    g_z2 = g_feat * (cache.z2_pooled > 0)  # (B, C2)
    c2, c1, k2, _ = p["conv2_w"].shape
    _, h1, w1_, _ = cache.a1.shape
    wo2 = w1_ - k2 + 1
    rows, cols = np.divmod(cache.pool_index, wo2)  # (B, C2)
    # receptive windows of the winners in a1, as (B, C2, k2, k2, C1)
    off = np.arange(k2)
    bi = np.arange(B)[:, None, None, None, None]
    ri = rows[:, :, None, None, None] + off[None, None, :, None, None]
    cj = cols[:, :, None, None, None] + off[None, None, None, :, None]
    ci = np.arange(c1)[None, None, None, None, :]
    windows = cache.a1[bi, ri, cj, ci]
    gw = np.einsum("bc,bcklm->cmkl", g_z2.astype(np.float64), windows.astype(np.float64))
    grads["conv2_w"] = gw
    grads["conv2_b"] = g_z2.sum(axis=0).astype(np.float64)

    # scatter the winners' kernels back into a1, then through relu
    contrib = g_z2[:, :, None, None, None] * p["conv2_w"].transpose(0, 2, 3, 1).astype(dtype, copy=False)[None]
    flat_idx = ((bi * h1 + ri) * w1_ + cj) * c1 + ci
    g_a1 = np.bincount(np.broadcast_to(flat_idx, contrib.shape).ravel(), weights=contrib.ravel(),
                       minlength=cache.a1.size).reshape(cache.a1.shape)
    g_z1 = (g_a1 * (cache.z1 > 0)).reshape(B, -1, cache.z1.shape[-1])

    k1 = p["conv1_w"].shape[2]
    cols1 = _im2col(cache.x[..., None], k1, k1)  # (B, P1, k1*k1)
    gw1 = cols1.reshape(-1, k1 * k1).astype(np.float64).T @ g_z1.reshape(-1, g_z1.shape[-1])
    grads["conv1_w"] = gw1.T.reshape(p["conv1_w"].shape)
    grads["conv1_b"] = g_z1.sum(axis=(0, 1))
    return {k: grads[k] for k in cfg.param_shapes()}


def loss_and_grad(model: JointModel, x, labels, depths=None, mask=None, w0=1.0, w1=1.0, dtype=np.float64):
    cache = forward_batch(model, x, dtype)
    B = cache.x.shape[0]
    mask = np.zeros(B, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    depths = np.zeros(B) if depths is None else depths
    losses = batch_losses(cache, labels, depths, mask, w0, w1)
    return float(losses.sum()), backward(model, cache, labels, depths, mask, w0, w1)

"""Differentiable primitives: convolution, pooling, activations, LRN,
linear, dropout, and the softmax cross-entropy head.

All functions are pure. Forward passes return fresh tensors; backward
passes compute gradients of a scalar loss under the exact forward
definition. Convolution is cross-correlation (no kernel flip). Every
primitive preserves the dtype of its inputs so the whole stack can run
in float64 for gradient checking.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .tensor import Tensor

# Largest im2col scratch buffer, in elements; batches are chunked above this.
_COLS_BUDGET = 1 << 26


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ContractViolation(msg)


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


@dataclass(frozen=True)
class ConvParams:
    kernel_height: int
    kernel_width: int
    stride: int
    padding: int
    input_channels: int
    output_channels: int
    groups: int = 1

    def __post_init__(self):
        for field in ("kernel_height", "kernel_width", "stride",
                      "input_channels", "output_channels", "groups"):
            _require(getattr(self, field) >= 1, f"ConvParams.{field} must be >= 1")
        _require(self.padding >= 0, "ConvParams.padding must be >= 0")
        _require(self.input_channels % self.groups == 0,
                 f"input_channels {self.input_channels} not divisible by groups {self.groups}")
        _require(self.output_channels % self.groups == 0,
                 f"output_channels {self.output_channels} not divisible by groups {self.groups}")

    def output_hw(self, height: int, width: int) -> tuple[int, int]:
        oh = conv_output_size(height, self.kernel_height, self.stride, self.padding)
        ow = conv_output_size(width, self.kernel_width, self.stride, self.padding)
        _require(oh >= 1 and ow >= 1,
                 f"conv output size {oh}x{ow} from input {height}x{width} must be >= 1")
        return oh, ow


@dataclass(frozen=True)
class LrnParams:
    depth: int = 5
    bias: float = 2.0
    alpha: float = 1e-4
    beta: float = 0.75

    def __post_init__(self):
        _require(self.depth >= 1, "LrnParams.depth must be >= 1")
        _require(self.bias > 0, "LrnParams.bias must be > 0")


def _check_conv_shapes(x: np.ndarray, w: np.ndarray, b: np.ndarray, p: ConvParams):
    _require(x.ndim == 4, f"conv input must be rank 4, got rank {x.ndim}")
    _require(w.ndim == 4, f"conv weights must be rank 4, got rank {w.ndim}")
    n, c, h, wd = x.shape
    k, cg, kh, kw = w.shape
    _require(c == p.input_channels,
             f"input channel dim {c} != ConvParams.input_channels {p.input_channels}")
    _require(k == p.output_channels,
             f"weight output dim {k} != ConvParams.output_channels {p.output_channels}")
    _require(cg == p.input_channels // p.groups,
             f"weight channel dim {cg} != input_channels/groups "
             f"{p.input_channels // p.groups}")
    _require((kh, kw) == (p.kernel_height, p.kernel_width),
             f"weight kernel dims {(kh, kw)} != ConvParams kernel "
             f"{(p.kernel_height, p.kernel_width)}")
    _require(b.shape == (k,), f"bias shape {b.shape} != ({k},)")
    return p.output_hw(h, wd)


def _pad_input(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Patches of a padded input: (N, C, OH, OW, kh, kw), strided view."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def _conv_chunk(n: int, per_sample: int) -> int:
    return max(1, min(n, _COLS_BUDGET // max(1, per_sample)))


def conv2d_forward(inp: Tensor, weights: Tensor, bias: Tensor, p: ConvParams) -> Tensor:
    """Grouped 2D cross-correlation plus per-channel bias."""
    x, w, b = inp.data, weights.data, bias.data
    oh, ow = _check_conv_shapes(x, w, b, p)
    n, _, _, _ = x.shape
    g = p.groups
    kg = p.output_channels // g
    cg = p.input_channels // g
    kh, kw = p.kernel_height, p.kernel_width

    xp = _pad_input(x, p.padding)
    out = np.empty((n, p.output_channels, oh, ow), dtype=x.dtype)
    chunk = _conv_chunk(n, oh * ow * cg * kh * kw)
    for n0 in range(0, n, chunk):
        n1 = min(n, n0 + chunk)
        win = _im2col(xp[n0:n1], kh, kw, p.stride)
        for gi in range(g):
            xg = win[:, gi * cg:(gi + 1) * cg]
            cols = np.ascontiguousarray(xg.transpose(0, 2, 3, 1, 4, 5))
            cols = cols.reshape((n1 - n0) * oh * ow, cg * kh * kw)
            wg = w[gi * kg:(gi + 1) * kg].reshape(kg, cg * kh * kw)
            og = cols @ wg.T
            out[n0:n1, gi * kg:(gi + 1) * kg] = (
                og.reshape(n1 - n0, oh, ow, kg).transpose(0, 3, 1, 2))
    out += b[None, :, None, None]
    return Tensor._wrap(out)


def conv2d_backward(grad_out: Tensor, inp: Tensor, weights: Tensor,
                    p: ConvParams) -> tuple[Tensor, Tensor, Tensor]:
    """Gradients w.r.t. (input, weights, bias) of :func:`conv2d_forward`."""
    x, w, go = inp.data, weights.data, grad_out.data
    oh, ow = _check_conv_shapes(x, w, np.zeros(p.output_channels, x.dtype), p)
    n, c, h, wd = x.shape
    _require(go.shape == (n, p.output_channels, oh, ow),
             f"grad_out shape {go.shape} != forward output shape "
             f"{(n, p.output_channels, oh, ow)}")
    g = p.groups
    kg = p.output_channels // g
    cg = p.input_channels // g
    kh, kw = p.kernel_height, p.kernel_width
    s = p.stride

    grad_bias = go.sum(axis=(0, 2, 3))
    grad_w = np.zeros_like(w)
    xp = _pad_input(x, p.padding)
    grad_xp = np.zeros_like(xp)

    chunk = _conv_chunk(n, oh * ow * cg * kh * kw)
    for n0 in range(0, n, chunk):
        n1 = min(n, n0 + chunk)
        nn = n1 - n0
        win = _im2col(xp[n0:n1], kh, kw, s)
        for gi in range(g):
            cs, ce = gi * cg, (gi + 1) * cg
            ks, ke = gi * kg, (gi + 1) * kg
            cols = np.ascontiguousarray(win[:, cs:ce].transpose(0, 2, 3, 1, 4, 5))
            cols = cols.reshape(nn * oh * ow, cg * kh * kw)
            go2 = np.ascontiguousarray(go[n0:n1, ks:ke].transpose(0, 2, 3, 1))
            go2 = go2.reshape(nn * oh * ow, kg)
            grad_w[ks:ke] += (go2.T @ cols).reshape(kg, cg, kh, kw)
            gcols = (go2 @ w[ks:ke].reshape(kg, cg * kh * kw))
            gcols = gcols.reshape(nn, oh, ow, cg, kh, kw).transpose(0, 3, 4, 5, 1, 2)
            for i in range(kh):
                for j in range(kw):
                    grad_xp[n0:n1, cs:ce, i:i + s * oh:s, j:j + s * ow:s] += \
                        gcols[:, :, i, j]
    pd = p.padding
    grad_x = grad_xp[:, :, pd:pd + h, pd:pd + wd] if pd else grad_xp
    return (Tensor._wrap(np.ascontiguousarray(grad_x)),
            Tensor._wrap(grad_w), Tensor._wrap(grad_bias))


def maxpool_forward(inp: Tensor, window: int, stride: int) -> tuple[Tensor, np.ndarray]:
    """Max pooling (no padding). Returns (output, argmax flat indices).

    Ties go to the first element of the window in row-major scan order.
    The index array addresses the flattened input and drives the
    backward routing.
    """
    x = inp.data
    _require(x.ndim == 4, f"maxpool input must be rank 4, got rank {x.ndim}")
    _require(window >= 1 and stride >= 1, "window and stride must be >= 1")
    n, c, h, w = x.shape
    _require(window <= h and window <= w,
             f"pool window {window} larger than input {h}x{w}")
    oh = (h - window) // stride + 1
    ow = (w - window) // stride + 1

    win = _im2col(x, window, window, stride)           # (N,C,OH,OW,win,win)
    flat = win.reshape(n, c, oh, ow, window * window)
    amax = flat.argmax(axis=4)                          # first max wins
    out = np.take_along_axis(flat, amax[..., None], axis=4)[..., 0]

    rows = (np.arange(oh) * stride)[None, None, :, None] + amax // window
    cols = (np.arange(ow) * stride)[None, None, None, :] + amax % window
    base = (np.arange(n)[:, None, None, None] * c +
            np.arange(c)[None, :, None, None]) * (h * w)
    indices = base + rows * w + cols
    return Tensor._wrap(np.ascontiguousarray(out)), indices


def maxpool_backward(grad_out: Tensor, argmax_indices: np.ndarray,
                     input_shape: tuple[int, ...]) -> Tensor:
    """Route upstream gradients to their argmax positions (accumulating)."""
    go = grad_out.data
    total = int(np.prod(input_shape))
    _require(go.shape == argmax_indices.shape,
             f"grad_out shape {go.shape} != argmax index shape {argmax_indices.shape}")
    idx = argmax_indices.ravel()
    _require(idx.size == 0 or (idx.min() >= 0 and idx.max() < total),
             f"argmax index out of range for input shape {tuple(input_shape)}")
    grad = np.zeros(total, dtype=go.dtype)
    np.add.at(grad, idx, go.ravel())
    return Tensor._wrap(grad.reshape(input_shape))


def relu_forward(inp: Tensor) -> Tensor:
    return Tensor._wrap(np.maximum(inp.data, 0))


def relu_backward(grad_out: Tensor, inp: Tensor) -> Tensor:
    """Subgradient at 0 is defined as 0."""
    _require(grad_out.shape == inp.shape,
             f"grad_out shape {grad_out.shape} != input shape {inp.shape}")
    return Tensor._wrap(np.where(inp.data > 0, grad_out.data, 0))


def _lrn_window_sum(sq: np.ndarray, half: int) -> np.ndarray:
    """Sliding sum over the channel axis, window clipped at the edges."""
    c = sq.shape[1]
    cs = np.cumsum(sq, axis=1, dtype=sq.dtype)
    cs = np.concatenate([np.zeros_like(cs[:, :1]), cs], axis=1)
    hi = np.minimum(np.arange(c) + half + 1, c)
    lo = np.maximum(np.arange(c) - half, 0)
    return cs[:, hi] - cs[:, lo]


def lrn_forward(inp: Tensor, p: LrnParams) -> Tensor:
    """Cross-channel response normalization.

    b[c] = a[c] / (k + (alpha/n) * sum_{|c'-c| <= n//2} a[c']^2)^beta,
    with the channel window clipped at the tensor edges.
    """
    a = inp.data
    _require(a.ndim == 4, f"lrn input must be rank 4, got rank {a.ndim}")
    d = p.bias + (p.alpha / p.depth) * _lrn_window_sum(a * a, p.depth // 2)
    return Tensor._wrap(a * d ** (-p.beta))


def lrn_backward(grad_out: Tensor, inp: Tensor, p: LrnParams) -> Tensor:
    a, g = inp.data, grad_out.data
    _require(g.shape == a.shape,
             f"grad_out shape {g.shape} != input shape {a.shape}")
    half = p.depth // 2
    scale = p.alpha / p.depth
    d = p.bias + scale * _lrn_window_sum(a * a, half)
    # dL/da_m = g_m * d_m^-beta - 2*beta*scale * a_m * sum_{c in win(m)} g_c a_c d_c^(-beta-1)
    t = g * a * d ** (-p.beta - 1)
    grad = g * d ** (-p.beta) - 2 * p.beta * scale * a * _lrn_window_sum(t, half)
    return Tensor._wrap(grad)


def linear_forward(inp: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    x, w, b = inp.data, weights.data, bias.data
    _require(x.ndim == 2, f"linear input must be rank 2, got rank {x.ndim}")
    _require(w.ndim == 2, f"linear weights must be rank 2, got rank {w.ndim}")
    _require(x.shape[1] == w.shape[0],
             f"linear inner dims disagree: input {x.shape[1]} vs weights {w.shape[0]}")
    _require(b.shape == (w.shape[1],),
             f"bias shape {b.shape} != ({w.shape[1]},)")
    return Tensor._wrap(x @ w + b)


def linear_backward(grad_out: Tensor, inp: Tensor,
                    weights: Tensor) -> tuple[Tensor, Tensor, Tensor]:
    x, w, go = inp.data, weights.data, grad_out.data
    _require(go.shape == (x.shape[0], w.shape[1]),
             f"grad_out shape {go.shape} != output shape {(x.shape[0], w.shape[1])}")
    return (Tensor._wrap(go @ w.T),
            Tensor._wrap(x.T @ go),
            Tensor._wrap(go.sum(axis=0)))


def dropout_forward(inp: Tensor, rate: float, rng: np.random.Generator,
                    training: bool) -> tuple[Tensor, Tensor]:
    """Inverted dropout: survivors are scaled by 1/(1-rate) in training mode.

    The mask is drawn from `rng`, so identical generator states reproduce
    identical masks. Inference mode is the identity with an all-ones mask.
    """
    _require(0.0 <= rate < 1.0, f"dropout rate {rate} must be in [0, 1)")
    x = inp.data
    if not training or rate == 0.0:
        return Tensor._wrap(x.copy()), Tensor.full(x.shape, 1, dtype=x.dtype)
    keep = (rng.random(x.shape) >= rate).astype(x.dtype)
    mask = keep / x.dtype.type(1.0 - rate)
    return Tensor._wrap(x * mask), Tensor._wrap(mask)


def dropout_backward(grad_out: Tensor, mask: Tensor) -> Tensor:
    _require(grad_out.shape == mask.shape,
             f"grad_out shape {grad_out.shape} != mask shape {mask.shape}")
    return Tensor._wrap(grad_out.data * mask.data)


def softmax_cross_entropy(logits: Tensor, labels) -> tuple[float, Tensor, Tensor]:
    """Mean cross-entropy over a batch of logit rows.

    Returns (loss, probabilities, grad_logits) where grad_logits is the
    gradient of the mean loss, i.e. (probabilities - one_hot) / N.
    """
    z = logits.data
    _require(z.ndim == 2, f"logits must be rank 2, got rank {z.ndim}")
    y = np.asarray(labels, dtype=np.int64)
    n, c = z.shape
    _require(y.shape == (n,), f"labels shape {y.shape} != ({n},)")
    _require(y.size == 0 or (y.min() >= 0 and y.max() < c),
             f"labels must lie in [0, {c})")

    shifted = z - z.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    denom = expz.sum(axis=1, keepdims=True)
    probs = expz / denom
    log_probs = shifted - np.log(denom)
    loss = float(-log_probs[np.arange(n), y].mean())

    grad = probs.copy()
    grad[np.arange(n), y] -= 1
    grad /= z.dtype.type(n)
    return loss, Tensor._wrap(probs), Tensor._wrap(grad)

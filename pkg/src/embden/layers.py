"""Neural building blocks on top of the autodiff tape.

Linear, layer normalization, multi-head self-attention, pre-norm
transformer blocks, LSTM stacks, and 1-D (depthwise) convolutions.
Weights initialize uniform(+-sqrt(6/(fan_in+fan_out))); LSTM forget
gates start with bias 1.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

DTYPE = np.float32


class Module:
    """Parameter container with recursive name-based discovery."""

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self.__dict__.setdefault("_params", {})[name] = value
        elif isinstance(value, Module):
            self.__dict__.setdefault("_children", {})[name] = value
        elif isinstance(value, (list, tuple)) and value and all(
            isinstance(v, Module) for v in value
        ):
            for i, v in enumerate(value):
                self.__dict__.setdefault("_children", {})[f"{name}.{i}"] = v
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix="") -> dict[str, Tensor]:
        out = {}
        for name, p in self.__dict__.get("_params", {}).items():
            out[prefix + name] = p
        for name, child in self.__dict__.get("_children", {}).items():
            out.update(child.named_parameters(prefix + name + "."))
        return out

    def param_count(self) -> int:
        return sum(int(p.value.size) for p in self.named_parameters().values())

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.zero_grad()

    def load_state(self, tensors: dict[str, np.ndarray]):
        """Assign named arrays to parameters, validating every shape."""
        params = self.named_parameters()
        missing = sorted(set(params) - set(tensors))
        extra = sorted(set(tensors) - set(params))
        if missing or extra:
            raise ValueError(
                f"checkpoint/architecture mismatch: missing {missing[:4]}, unexpected {extra[:4]}"
            )
        for name, p in params.items():
            arr = np.asarray(tensors[name])
            if tuple(arr.shape) != tuple(p.value.shape):
                raise ValueError(
                    f"checkpoint tensor {name!r} has shape {arr.shape}, "
                    f"architecture expects {p.value.shape}"
                )
            p.value = arr.astype(p.value.dtype)

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self.named_parameters().items()}


def glorot_uniform(rng: np.random.Generator, shape, fan_in, fan_out) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng, bias=True):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = ad.parameter(glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim))
        self.bias = ad.parameter(np.zeros(out_dim, dtype=DTYPE)) if bias else None

    def __call__(self, x):
        out = ad.matmul(x, self.weight)
        if self.bias is not None:
            out = ad.add(out, self.bias)
        return out


class LayerNorm(Module):
    """Last-axis layer normalization; affine=False is parameter-free."""

    def __init__(self, dim, affine=True, eps=1e-5):
        self.dim = dim
        self.eps = eps
        if affine:
            self.gain = ad.parameter(np.ones(dim, dtype=DTYPE))
            self.bias = ad.parameter(np.zeros(dim, dtype=DTYPE))
        else:
            self.gain = None
            self.bias = None

    def __call__(self, x):
        return ad.layer_norm(x, self.gain, self.bias, eps=self.eps)


class MultiHeadSelfAttention(Module):
    def __init__(self, dim, heads, rng):
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.wq = Linear(dim, dim, rng)
        self.wk = Linear(dim, dim, rng)
        self.wv = Linear(dim, dim, rng)
        self.wo = Linear(dim, dim, rng)

    def __call__(self, x):
        b, t, _ = x.shape

        def split(h):
            return ad.transpose(ad.reshape(h, (b, t, self.heads, self.head_dim)),
                                (0, 2, 1, 3))

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = ad.mul(ad.matmul(q, ad.swap_last2(k)), 1.0 / math.sqrt(self.head_dim))
        attn = ad.softmax(scores)
        mixed = ad.matmul(attn, v)
        merged = ad.reshape(ad.transpose(mixed, (0, 2, 1, 3)), (b, t, self.dim))
        return self.wo(merged)

    def attention_weights(self, x) -> np.ndarray:
        """Post-softmax attention matrix (diagnostics only)."""
        b, t, _ = x.shape
        with ad.no_grad():
            def split(h):
                return ad.transpose(ad.reshape(h, (b, t, self.heads, self.head_dim)),
                                    (0, 2, 1, 3))
            q, k = split(self.wq(x)), split(self.wk(x))
            scores = ad.mul(ad.matmul(q, ad.swap_last2(k)), 1.0 / math.sqrt(self.head_dim))
            return ad.softmax(scores).value


class TransformerBlock(Module):
    """Pre-norm encoder block with GeLU feed-forward."""

    def __init__(self, dim, heads, mlp_ratio, rng):
        inner = int(dim * mlp_ratio)
        self.norm1 = LayerNorm(dim)
        self.attn = MultiHeadSelfAttention(dim, heads, rng)
        self.norm2 = LayerNorm(dim)
        self.fc1 = Linear(dim, inner, rng)
        self.fc2 = Linear(inner, dim, rng)

    def __call__(self, x):
        x = ad.add(x, self.attn(self.norm1(x)))
        return ad.add(x, self.fc2(ad.gelu(self.fc1(self.norm2(x)))))


class LstmLayer(Module):
    """One LSTM direction over (B, T, D) input, PyTorch-style double bias."""

    def __init__(self, in_dim, hidden, rng, reverse=False):
        self.in_dim = in_dim
        self.hidden = hidden
        self.reverse = reverse
        self.w_ih = ad.parameter(glorot_uniform(rng, (in_dim, 4 * hidden), in_dim, 4 * hidden))
        self.w_hh = ad.parameter(glorot_uniform(rng, (hidden, 4 * hidden), hidden, 4 * hidden))
        b = np.zeros(4 * hidden, dtype=DTYPE)
        b[hidden : 2 * hidden] = 1.0  # forget gate starts open
        self.b_ih = ad.parameter(b)
        self.b_hh = ad.parameter(np.zeros(4 * hidden, dtype=DTYPE))

    def __call__(self, x):
        tm = ad.transpose(x, (1, 0, 2))  # (T, B, D)
        out = ad.lstm_layer(tm, self.w_ih, self.w_hh, self.b_ih, self.b_hh,
                            reverse=self.reverse)
        return ad.transpose(out, (1, 0, 2))


class BiLstmLayer(Module):
    """Forward and backward LSTM, hidden states concatenated."""

    def __init__(self, in_dim, hidden, rng):
        self.fwd = LstmLayer(in_dim, hidden, rng)
        self.bwd = LstmLayer(in_dim, hidden, rng, reverse=True)

    def __call__(self, x):
        return ad.concat_last([self.fwd(x), self.bwd(x)])


def _conv_pad(kernel, padding):
    if padding == "same":
        left = (kernel - 1) // 2
        return left, kernel - 1 - left
    return padding, padding


class Conv1d(Module):
    """Cross-channel 1-D convolution on (B, C, T) input."""

    def __init__(self, in_ch, out_ch, kernel, rng, stride=1, padding="same", bias=True):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.kernel = kernel
        self.stride = stride
        self.pad = _conv_pad(kernel, padding)
        fan_in = in_ch * kernel
        self.weight = ad.parameter(glorot_uniform(rng, (in_ch * kernel, out_ch), fan_in, out_ch))
        self.bias = ad.parameter(np.zeros(out_ch, dtype=DTYPE)) if bias else None

    def _im2col_index(self, t_pad):
        t_out = (t_pad - self.kernel) // self.stride + 1
        t_idx = np.arange(t_out)[:, None] * self.stride + np.arange(self.kernel)[None, :]
        c_off = np.arange(self.in_ch)[None, :, None] * t_pad
        # (t_out, C, K) flat indices into a (C*t_pad) row
        return (c_off + t_idx[:, None, :]).reshape(t_out, self.in_ch * self.kernel)

    def __call__(self, x):
        b, c, t = x.shape
        if c != self.in_ch:
            raise ad.ShapeError(f"conv1d: input has {c} channels, layer expects {self.in_ch}")
        h = ad.pad_last(x, *self.pad)
        t_pad = t + sum(self.pad)
        cols = ad.take_last(ad.reshape(h, (b, c * t_pad)), self._im2col_index(t_pad))
        out = ad.matmul(cols, self.weight)
        if self.bias is not None:
            out = ad.add(out, self.bias)
        return ad.transpose(out, (0, 2, 1))  # (B, out_ch, T_out)


class DepthwiseConv1d(Module):
    """Per-channel 1-D convolution on (B, C, T) input."""

    def __init__(self, channels, kernel, rng, padding="same", bias=True):
        self.channels = channels
        self.kernel = kernel
        self.pad = _conv_pad(kernel, padding)
        self.weight = ad.parameter(glorot_uniform(rng, (channels, 1, kernel), kernel, 1))
        self.bias = ad.parameter(np.zeros((channels, 1), dtype=DTYPE)) if bias else None

    def __call__(self, x):
        b, c, t = x.shape
        if c != self.channels:
            raise ad.ShapeError(
                f"depthwise_conv1d: input has {c} channels, layer expects {self.channels}"
            )
        h = ad.pad_last(x, *self.pad)
        t_pad = t + sum(self.pad)
        t_idx = np.arange(t_pad - self.kernel + 1)[:, None] + np.arange(self.kernel)[None, :]
        windows = ad.take_last(h, t_idx)          # (B, C, T_out, K)
        out = ad.sum_(ad.mul(windows, self.weight), axis=-1)
        if self.bias is not None:
            out = ad.add(out, self.bias)
        return out

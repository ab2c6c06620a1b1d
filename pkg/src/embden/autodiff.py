"""Reverse-mode automatic differentiation over a fixed primitive set.

A tape of numpy-backed tensors built for the small static model zoo in
this package: element-wise arithmetic, matmul, reductions, indexing
(gather/scatter), normalization, activations, softmax, and real-FFT
pairs so STFT/ISTFT can sit inside the differentiated graph. Gradients
accumulate additively into leaf tensors until zeroed.

Dtype follows the inputs: float32 models train in single precision,
gradient checks run the same primitives in double precision.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor", "parameter", "constant", "backward", "grad_check",
    "directional_grad_check", "no_grad", "set_nan_checks", "AdamW",
    "clip_global_norm", "ShapeError", "NumericError", "GraphError",
]


class ShapeError(ValueError):
    """Operand shapes incompatible for a primitive."""


class NumericError(FloatingPointError):
    """Non-finite values produced by a primitive or fed to the optimizer."""


class GraphError(RuntimeError):
    """Backward invoked without a recorded forward graph."""


_grad_enabled = True
_nan_checks = True


@contextmanager
def no_grad():
    """Disable graph recording (inference / data preparation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def set_nan_checks(enabled: bool) -> None:
    """Toggle per-primitive finiteness checking."""
    global _nan_checks
    _nan_checks = enabled


class Tensor:
    """Differentiable value: shape-carrying buffer plus gradient slot."""

    __slots__ = ("value", "grad", "requires_grad", "name", "_parents")

    def __init__(self, value, requires_grad=False, name=None, _parents=()):
        self.value = np.asarray(value)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = _parents

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.value.shape}, dtype={self.value.dtype}{tag})"

    def detach(self) -> "Tensor":
        return Tensor(self.value, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, seed=None) -> None:
        backward(self, seed)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def parameter(value, name=None) -> Tensor:
    return Tensor(np.asarray(value), requires_grad=True, name=name)


def constant(value, name=None) -> Tensor:
    return Tensor(np.asarray(value), requires_grad=False, name=name)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _tracked(*tensors) -> bool:
    return _grad_enabled and any(t.requires_grad or t._parents for t in tensors)


def _make(op_name, value, parents):
    if _nan_checks and not np.all(np.isfinite(value)):
        raise NumericError(f"{op_name}: produced non-finite values")
    return Tensor(value, _parents=tuple(parents))


def _unbroadcast(grad, shape):
    """Reduce grad back to the shape it was broadcast from."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: operands {a.shape} vs {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# element-wise arithmetic


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("add", a.value, b.value)
    out = a.value + b.value
    if not _tracked(a, b):
        return _make("add", out, ())
    return _make("add", out, [
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(g, b.value.shape)),
    ])


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("sub", a.value, b.value)
    out = a.value - b.value
    if not _tracked(a, b):
        return _make("sub", out, ())
    return _make("sub", out, [
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(-g, b.value.shape)),
    ])


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("mul", a.value, b.value)
    out = a.value * b.value
    if not _tracked(a, b):
        return _make("mul", out, ())
    return _make("mul", out, [
        (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
    ])


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("div", a.value, b.value)
    out = a.value / b.value
    if not _tracked(a, b):
        return _make("div", out, ())
    return _make("div", out, [
        (a, lambda g: _unbroadcast(g / b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)),
    ])


def neg(a):
    a = _wrap(a)
    if not _tracked(a):
        return _make("neg", -a.value, ())
    return _make("neg", -a.value, [(a, lambda g: -g)])


# ---------------------------------------------------------------------------
# matmul / reductions / shape ops


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise ShapeError(f"matmul: operands must be >= 2-D, got {a.value.shape} and {b.value.shape}")
    if a.value.shape[-1] != b.value.shape[-2]:
        raise ShapeError(f"matmul: inner dims differ, {a.value.shape} vs {b.value.shape}")
    out = a.value @ b.value
    if not _tracked(a, b):
        return _make("matmul", out, ())

    def grad_a(g):
        return _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.value.shape)

    def grad_b(g):
        return _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.value.shape)

    return _make("matmul", out, [(a, grad_a), (b, grad_b)])


def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % len(shape) for a in axes)
    if not keepdims:
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def sum_(a, axis=None, keepdims=False):
    a = _wrap(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)
    if not _tracked(a):
        return _make("sum", out, ())
    shape = a.value.shape
    return _make("sum", out, [(a, lambda g: _expand_reduced(g, shape, axis, keepdims))])


def mean(a, axis=None, keepdims=False):
    a = _wrap(a)
    out = a.value.mean(axis=axis, keepdims=keepdims)
    if not _tracked(a):
        return _make("mean", out, ())
    shape = a.value.shape
    count = a.value.size / out.size
    return _make("mean", out, [
        (a, lambda g: _expand_reduced(g, shape, axis, keepdims) / count)
    ])


def reshape(a, shape):
    a = _wrap(a)
    out = a.value.reshape(shape)
    if not _tracked(a):
        return _make("reshape", out, ())
    orig = a.value.shape
    return _make("reshape", out, [(a, lambda g: g.reshape(orig))])


def transpose(a, axes):
    a = _wrap(a)
    out = np.transpose(a.value, axes)
    if not _tracked(a):
        return _make("transpose", out, ())
    inverse = np.argsort(axes)
    return _make("transpose", out, [(a, lambda g: np.transpose(g, inverse))])


def swap_last2(a):
    nd = _wrap(a).value.ndim
    axes = list(range(nd))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


# ---------------------------------------------------------------------------
# indexing


def take_last(a, idx):
    """Gather along the last axis: out[..., j] = a[..., idx[j]]."""
    a = _wrap(a)
    idx = np.asarray(idx)
    out = np.take(a.value, idx, axis=-1)
    if not _tracked(a):
        return _make("take_last", out, ())
    in_last = a.value.shape[-1]
    lead_shape = a.value.shape[:-1]

    def grad_fn(g):
        lead = int(np.prod(lead_shape)) if lead_shape else 1
        g2 = g.reshape(lead, idx.size)
        offsets = np.arange(lead)[:, None] * in_last
        flat_idx = (offsets + idx.ravel()[None, :]).ravel()
        acc = np.bincount(flat_idx, weights=g2.ravel().astype(np.float64),
                          minlength=lead * in_last)
        return acc.reshape(*lead_shape, in_last).astype(g.dtype)

    return _make("take_last", out, [(a, grad_fn)])


def scatter_add_last(a, idx, size):
    """Adjoint of take_last: out[..., m] = sum over j with idx[j]==m of a[..., j]."""
    a = _wrap(a)
    idx = np.asarray(idx).ravel()
    if idx.size != a.value.shape[-1]:
        raise ShapeError(
            f"scatter_add_last: index length {idx.size} vs input last dim {a.value.shape[-1]}"
        )
    lead_shape = a.value.shape[:-1]
    lead = int(np.prod(lead_shape)) if lead_shape else 1
    flat = a.value.reshape(lead, idx.size)
    offsets = np.arange(lead)[:, None] * size
    flat_idx = (offsets + idx[None, :]).ravel()
    acc = np.bincount(flat_idx, weights=flat.ravel().astype(np.float64),
                      minlength=lead * size)
    out = acc.reshape(*lead_shape, size).astype(a.value.dtype)
    if not _tracked(a):
        return _make("scatter_add_last", out, ())
    return _make("scatter_add_last", out, [(a, lambda g: np.take(g, idx, axis=-1))])


def narrow_last(a, start, size):
    a = _wrap(a)
    if start < 0 or start + size > a.value.shape[-1]:
        raise ShapeError(
            f"narrow_last: window [{start}, {start + size}) outside last dim {a.value.shape[-1]}"
        )
    out = a.value[..., start : start + size]
    if not _tracked(a):
        return _make("narrow_last", out, ())
    total = a.value.shape[-1]

    def grad_fn(g):
        full = np.zeros(g.shape[:-1] + (total,), dtype=g.dtype)
        full[..., start : start + size] = g
        return full

    return _make("narrow_last", out, [(a, grad_fn)])


def pad_last(a, before, after):
    a = _wrap(a)
    pads = [(0, 0)] * (a.value.ndim - 1) + [(before, after)]
    out = np.pad(a.value, pads)
    if not _tracked(a):
        return _make("pad_last", out, ())
    size = a.value.shape[-1]
    return _make("pad_last", out, [(a, lambda g: g[..., before : before + size])])


def concat_last(tensors):
    tensors = [_wrap(t) for t in tensors]
    out = np.concatenate([t.value for t in tensors], axis=-1)
    if not _tracked(*tensors):
        return _make("concat_last", out, ())
    parents = []
    start = 0
    for t in tensors:
        size = t.value.shape[-1]
        parents.append((t, (lambda s, n: lambda g: g[..., s : s + n])(start, size)))
        start += size
    return _make("concat_last", out, parents)


def stack0(tensors):
    tensors = [_wrap(t) for t in tensors]
    out = np.stack([t.value for t in tensors], axis=0)
    if not _tracked(*tensors):
        return _make("stack0", out, ())
    parents = [(t, (lambda i: lambda g: g[i])(i)) for i, t in enumerate(tensors)]
    return _make("stack0", out, parents)


def flip0(a):
    a = _wrap(a)
    out = a.value[::-1].copy()
    if not _tracked(a):
        return _make("flip0", out, ())
    return _make("flip0", out, [(a, lambda g: g[::-1])])


# ---------------------------------------------------------------------------
# activations & nonlinear maps


def exp(a):
    a = _wrap(a)
    out = np.exp(a.value)
    if not _tracked(a):
        return _make("exp", out, ())
    return _make("exp", out, [(a, lambda g: g * out)])


def log(a):
    a = _wrap(a)
    out = np.log(a.value)
    if not _tracked(a):
        return _make("log", out, ())
    return _make("log", out, [(a, lambda g: g / a.value)])


def sqrt(a):
    a = _wrap(a)
    out = np.sqrt(a.value)
    if not _tracked(a):
        return _make("sqrt", out, ())
    return _make("sqrt", out, [(a, lambda g: g * (0.5 / out))])


def square(a):
    a = _wrap(a)
    out = a.value * a.value
    if not _tracked(a):
        return _make("square", out, ())
    return _make("square", out, [(a, lambda g: g * (2.0 * a.value))])


def abs_(a):
    a = _wrap(a)
    out = np.abs(a.value)
    if not _tracked(a):
        return _make("abs", out, ())
    return _make("abs", out, [(a, lambda g: g * np.sign(a.value))])


def tanh(a):
    a = _wrap(a)
    out = np.tanh(a.value)
    if not _tracked(a):
        return _make("tanh", out, ())
    return _make("tanh", out, [(a, lambda g: g * (1.0 - out * out))])


def sigmoid(a):
    a = _wrap(a)
    out = 1.0 / (1.0 + np.exp(-a.value))
    if not _tracked(a):
        return _make("sigmoid", out, ())
    return _make("sigmoid", out, [(a, lambda g: g * out * (1.0 - out))])


def relu(a):
    a = _wrap(a)
    out = np.maximum(a.value, 0.0)
    if not _tracked(a):
        return _make("relu", out, ())
    return _make("relu", out, [(a, lambda g: g * (a.value > 0))])


def leaky_relu(a, slope=0.1):
    a = _wrap(a)
    out = np.where(a.value > 0, a.value, slope * a.value)
    if not _tracked(a):
        return _make("leaky_relu", out, ())
    return _make("leaky_relu", out, [
        (a, lambda g: g * np.where(a.value > 0, 1.0, slope))
    ])


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(a):
    """Exact (erf-based) Gaussian error linear unit."""
    a = _wrap(a)
    cdf = 0.5 * (1.0 + erf(a.value * _INV_SQRT2))
    out = a.value * cdf
    if not _tracked(a):
        return _make("gelu", out, ())

    def grad_fn(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.value * a.value)
        return g * (cdf + a.value * pdf)

    return _make("gelu", out, [(a, grad_fn)])


def cos(a):
    a = _wrap(a)
    out = np.cos(a.value)
    if not _tracked(a):
        return _make("cos", out, ())
    return _make("cos", out, [(a, lambda g: -g * np.sin(a.value))])


def sin(a):
    a = _wrap(a)
    out = np.sin(a.value)
    if not _tracked(a):
        return _make("sin", out, ())
    return _make("sin", out, [(a, lambda g: g * np.cos(a.value))])


def maximum_const(a, c):
    a = _wrap(a)
    out = np.maximum(a.value, c)
    if not _tracked(a):
        return _make("maximum_const", out, ())
    return _make("maximum_const", out, [(a, lambda g: g * (a.value > c))])


def minimum_const(a, c):
    a = _wrap(a)
    out = np.minimum(a.value, c)
    if not _tracked(a):
        return _make("minimum_const", out, ())
    return _make("minimum_const", out, [(a, lambda g: g * (a.value < c))])


def softmax(a, axis=-1):
    a = _wrap(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    if not _tracked(a):
        return _make("softmax", out, ())

    def grad_fn(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - inner)

    return _make("softmax", out, [(a, grad_fn)])


def layer_norm(x, gain=None, bias=None, eps=1e-5):
    """Normalize over the last axis, optional affine parameters."""
    x = _wrap(x)
    mu = x.value.mean(axis=-1, keepdims=True)
    centered = x.value - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_sigma = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_sigma
    out = xhat
    if gain is not None:
        out = out * gain.value
    if bias is not None:
        out = out + bias.value

    tracked = [t for t in (x, gain, bias) if t is not None]
    if not _tracked(*tracked):
        return _make("layer_norm", out, ())

    parents = []
    gain_value = gain.value if gain is not None else None

    def grad_x(g):
        gh = g * gain_value if gain_value is not None else g
        m1 = gh.mean(axis=-1, keepdims=True)
        m2 = (gh * xhat).mean(axis=-1, keepdims=True)
        return inv_sigma * (gh - m1 - xhat * m2)

    parents.append((x, grad_x))
    if gain is not None:
        parents.append((gain, lambda g: _unbroadcast(g * xhat, gain.value.shape)))
    if bias is not None:
        parents.append((bias, lambda g: _unbroadcast(g, bias.value.shape)))
    return _make("layer_norm", out, parents)


# ---------------------------------------------------------------------------
# real FFT pair (last axis)


def rfft_pair(a):
    """Real FFT along the last axis, returned as (real, imag) tensors."""
    a = _wrap(a)
    n = a.value.shape[-1]
    spec = np.fft.rfft(a.value, axis=-1)
    re_v, im_v = np.ascontiguousarray(spec.real), np.ascontiguousarray(spec.imag)
    if not _tracked(a):
        return _make("rfft_re", re_v, ()), _make("rfft_im", im_v, ())

    def grad_from(g, imag_path):
        full = np.zeros(g.shape[:-1] + (n,), dtype=complex)
        full[..., : g.shape[-1]] = 1j * g if imag_path else g
        return (np.fft.ifft(full, axis=-1).real * n).astype(g.dtype)

    re = _make("rfft_re", re_v, [(a, lambda g: grad_from(g, False))])
    im = _make("rfft_im", im_v, [(a, lambda g: grad_from(g, True))])
    return re, im


def irfft_pair(re, im, n):
    """Inverse real FFT of half-spectrum (re, im) to n real samples."""
    re, im = _wrap(re), _wrap(im)
    if re.value.shape != im.value.shape:
        raise ShapeError(f"irfft_pair: real {re.value.shape} vs imag {im.value.shape}")
    k = n // 2 + 1
    if re.value.shape[-1] != k:
        raise ShapeError(f"irfft_pair: expected {k} bins for n={n}, got {re.value.shape[-1]}")
    out = np.fft.irfft(re.value + 1j * im.value, n=n, axis=-1)
    if not _tracked(re, im):
        return _make("irfft_pair", out, ())

    def grad_re(g):
        spec = np.fft.rfft(g, axis=-1)
        coeff = np.full(k, 2.0 / n)
        coeff[0] = 1.0 / n
        if n % 2 == 0:
            coeff[-1] = 1.0 / n
        return (spec.real * coeff).astype(g.dtype)

    def grad_im(g):
        spec = np.fft.rfft(g, axis=-1)
        coeff = np.full(k, 2.0 / n)
        coeff[0] = 0.0
        if n % 2 == 0:
            coeff[-1] = 0.0
        return (spec.imag * coeff).astype(g.dtype)

    return _make("irfft_pair", out, [(re, grad_re), (im, grad_im)])


# ---------------------------------------------------------------------------
# fused LSTM layer (manual backprop through time; a per-step composition
# would make backward memory quadratic in sequence length)


def lstm_layer(x, w_ih, w_hh, b_ih, b_hh, reverse=False):
    """Run one LSTM direction over a (T, B, D) sequence, returning (T, B, H).

    Gate layout along the 4H axis is (input, forget, cell, output). Initial
    hidden and cell states are zero. With reverse=True the sequence is
    processed back-to-front and outputs are returned in original order.
    """
    x, w_ih, w_hh = _wrap(x), _wrap(w_ih), _wrap(w_hh)
    b_ih, b_hh = _wrap(b_ih), _wrap(b_hh)
    if x.value.ndim != 3:
        raise ShapeError(f"lstm_layer: expected (T, B, D) input, got {x.value.shape}")
    t_len, batch, in_dim = x.value.shape
    hidden = w_hh.value.shape[0]
    if w_ih.value.shape != (in_dim, 4 * hidden):
        raise ShapeError(
            f"lstm_layer: w_ih {w_ih.value.shape} vs expected {(in_dim, 4 * hidden)}"
        )
    if w_hh.value.shape != (hidden, 4 * hidden):
        raise ShapeError(
            f"lstm_layer: w_hh {w_hh.value.shape} vs expected {(hidden, 4 * hidden)}"
        )

    xs = x.value[::-1] if reverse else x.value
    bias = b_ih.value + b_hh.value
    i_a = np.empty((t_len, batch, hidden), dtype=x.value.dtype)
    f_a = np.empty_like(i_a)
    g_a = np.empty_like(i_a)
    o_a = np.empty_like(i_a)
    c_a = np.empty_like(i_a)
    h_a = np.empty_like(i_a)
    h = np.zeros((batch, hidden), dtype=x.value.dtype)
    c = np.zeros((batch, hidden), dtype=x.value.dtype)
    x_proj = xs @ w_ih.value + bias
    for t in range(t_len):
        z = x_proj[t] + h @ w_hh.value
        i = 1.0 / (1.0 + np.exp(-z[:, :hidden]))
        f = 1.0 / (1.0 + np.exp(-z[:, hidden : 2 * hidden]))
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = 1.0 / (1.0 + np.exp(-z[:, 3 * hidden :]))
        c = f * c + i * g
        h = o * np.tanh(c)
        i_a[t], f_a[t], g_a[t], o_a[t], c_a[t], h_a[t] = i, f, g, o, c, h
    out = h_a[::-1].copy() if reverse else h_a

    if not _tracked(x, w_ih, w_hh, b_ih, b_hh):
        return _make("lstm_layer", out, ())

    # the five parent vjps share one BPTT sweep; holding a reference to the
    # seen cotangent keeps `is` identity valid across the calls
    cache: list = []

    def full_backward(g_out):
        if cache and cache[0] is g_out:
            return cache[1]
        gs = g_out[::-1] if reverse else g_out
        tanh_c = np.tanh(c_a)
        d_wih = np.zeros_like(w_ih.value)
        d_whh = np.zeros_like(w_hh.value)
        d_b = np.zeros_like(bias)
        dx = np.empty_like(xs)
        dh_next = np.zeros((batch, hidden), dtype=g_out.dtype)
        dc_next = np.zeros((batch, hidden), dtype=g_out.dtype)
        for t in range(t_len - 1, -1, -1):
            dh = gs[t] + dh_next
            tc = tanh_c[t]
            do = dh * tc
            dc = dc_next + dh * o_a[t] * (1.0 - tc * tc)
            di = dc * g_a[t]
            dg = dc * i_a[t]
            c_prev = c_a[t - 1] if t > 0 else np.zeros_like(dc)
            df = dc * c_prev
            dc_next = dc * f_a[t]
            dz = np.concatenate(
                [
                    di * i_a[t] * (1.0 - i_a[t]),
                    df * f_a[t] * (1.0 - f_a[t]),
                    dg * (1.0 - g_a[t] * g_a[t]),
                    do * o_a[t] * (1.0 - o_a[t]),
                ],
                axis=1,
            )
            h_prev = h_a[t - 1] if t > 0 else np.zeros((batch, hidden), dtype=g_out.dtype)
            d_wih += xs[t].T @ dz
            d_whh += h_prev.T @ dz
            d_b += dz.sum(axis=0)
            dx[t] = dz @ w_ih.value.T
            dh_next = dz @ w_hh.value.T
        if reverse:
            dx = dx[::-1].copy()
        result = (dx, d_wih, d_whh, d_b)
        cache[:] = [g_out, result]
        return result

    return _make("lstm_layer", out, [
        (x, lambda g: full_backward(g)[0]),
        (w_ih, lambda g: full_backward(g)[1]),
        (w_hh, lambda g: full_backward(g)[2]),
        (b_ih, lambda g: full_backward(g)[3]),
        (b_hh, lambda g: full_backward(g)[3]),
    ])


# ---------------------------------------------------------------------------
# backward pass


def backward(out: Tensor, seed=None) -> None:
    """Reverse accumulation from `out`; grads add into requires_grad leaves."""
    if not out._parents and not out.requires_grad:
        raise GraphError("backward: tensor has no recorded graph (run a forward pass first)")
    if seed is None:
        if out.value.size != 1:
            raise GraphError(
                f"backward: non-scalar output of shape {out.value.shape} needs an explicit seed"
            )
        seed = np.ones_like(out.value)
    seed = np.asarray(seed, dtype=out.value.dtype)
    if seed.shape != out.value.shape:
        raise ShapeError(f"backward: seed shape {seed.shape} vs output {out.value.shape}")

    # iterative topological order over the reachable graph
    order = []
    visited = set()
    stack = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(out): seed}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            if node.grad is None:
                node.grad = np.zeros_like(node.value)
            node.grad = node.grad + g
        for parent, vjp in node._parents:
            contribution = vjp(g)
            if contribution.shape != parent.value.shape:
                raise ShapeError(
                    f"backward: gradient shape {contribution.shape} vs value {parent.value.shape}"
                )
            existing = grads.get(id(parent))
            grads[id(parent)] = contribution if existing is None else existing + contribution


# ---------------------------------------------------------------------------
# verification


def grad_check(fn, inputs, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    fn maps a list of Tensors to a scalar Tensor. Every coordinate of every
    input is perturbed. Inputs should be float64 for meaningful bounds.
    """
    inputs = [t if isinstance(t, Tensor) else parameter(np.asarray(t, dtype=np.float64))
              for t in inputs]
    for t in inputs:
        t.requires_grad = True
        t.zero_grad()
    out = fn(inputs)
    backward(out)
    worst = 0.0
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.value)
        flat = t.value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(fn(inputs).value)
            flat[i] = orig - eps
            lo = float(fn(inputs).value)
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = float(analytic.reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


def directional_grad_check(fn, inputs, n_dirs=3, eps=1e-5, rng=None, sparsity=16):
    """Directional-derivative check for tensors too large to sweep.

    Compares <grad, u> against central differences along n_dirs random
    sparse unit directions per input (at most `sparsity` nonzero entries,
    so the directional signal is not diluted by the tensor size); returns
    the worst relative error.
    """
    rng = rng or np.random.default_rng(0)
    inputs = [t if isinstance(t, Tensor) else parameter(np.asarray(t, dtype=np.float64))
              for t in inputs]
    for t in inputs:
        t.requires_grad = True
        t.zero_grad()
    backward(fn(inputs))
    worst = 0.0
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.value)
        for _ in range(n_dirs):
            u = np.zeros(t.value.size)
            support = rng.choice(t.value.size, size=min(sparsity, t.value.size),
                                 replace=False)
            u[support] = rng.standard_normal(support.size)
            u = u.reshape(t.value.shape)
            u /= np.linalg.norm(u) + 1e-30
            orig = t.value.copy()
            t.value = orig + eps * u
            hi = float(fn(inputs).value)
            t.value = orig - eps * u
            lo = float(fn(inputs).value)
            t.value = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = float((analytic * u).sum())
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# optimization


class AdamW:
    """Adam with decoupled weight decay over a named parameter dict."""

    def __init__(self, params, lr=1e-4, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        if isinstance(params, dict):
            self.params = dict(params)
        else:
            self.params = {t.name or f"param{i}": t for i, t in enumerate(params)}
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m = {k: np.zeros_like(t.value) for k, t in self.params.items()}
        self._v = {k: np.zeros_like(t.value) for k, t in self.params.items()}

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def step(self):
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, t in self.params.items():
            grad = t.grad
            if grad is None:
                grad = np.zeros_like(t.value)
            elif not np.all(np.isfinite(grad)):
                raise NumericError(f"adamw_step: non-finite gradient for parameter {name!r}")
            m = self._m[name]
            v = self._v[name]
            m += (1.0 - self.beta1) * (grad - m)
            v += (1.0 - self.beta2) * (grad * grad - v)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                t.value = t.value - self.lr * self.weight_decay * t.value
            t.value = t.value - self.lr * update


def clip_global_norm(params, max_norm) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    tensors = params.values() if isinstance(params, dict) else params
    grads = [t.grad for t in tensors if t.grad is not None]
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total

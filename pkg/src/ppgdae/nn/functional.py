"""Differentiable ops used by the autoencoder.

Arrays are laid out ``(batch, channels, length)``. Convolutions are split into
stride phases and computed as a few matrix products per pass so the work lands
in BLAS.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, make_op, needs_grad


def conv1d_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def conv_transpose1d_output_length(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length - 1) * stride - 2 * padding + kernel


class _ConvGeometry:
    """Polyphase bookkeeping for a strided 1-d convolution.

    The padded input is split into ``stride`` phases stacked as channels, which
    turns the strided convolution into a stride-1 one with ``taps`` taps. The
    phase matrix has rows ordered (phase, channel) and columns (batch,
    position); tap ``q`` reads the column window starting at ``q``, so each
    pass is a sum of ``taps`` matrix products over shifted views and the
    im2col matrix is never materialized. Each window is ``cols_width`` wide,
    which leaves ``taps - 1`` unused positions per batch item.
    """

    def __init__(self, n, c, length, kernel, stride, padding):
        self.n, self.c, self.length = n, c, length
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self.n_out = conv1d_output_length(length, kernel, stride, padding)
        self.taps = -(-kernel // stride)
        self.m = self.n_out + self.taps - 1
        self.padded = stride * self.m
        self.cols_width = n * self.m - (self.taps - 1)

    def phases(self, x: np.ndarray) -> np.ndarray:
        n, c, s, p = self.n, self.c, self.stride, self.padding
        xp = np.zeros((n, c, self.padded), dtype=x.dtype)
        keep = min(self.length, self.padded - p)
        xp[:, :, p : p + keep] = x[:, :, :keep]
        return np.ascontiguousarray(xp.reshape(n, c, self.m, s).transpose(3, 1, 0, 2)).reshape(s * c, n * self.m)

    def window(self, ph: np.ndarray, q: int) -> np.ndarray:
        return ph[:, q : q + self.cols_width]

    def unphase(self, ph: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`phases`: interleave back to (N, C, L)."""
        n, c, s, p = self.n, self.c, self.stride, self.padding
        ph = ph.reshape(s, c, n, self.m)
        # de-interleave one phase at a time; a single 4-d transpose is much slower
        xp = np.empty((n, c, self.m, s), dtype=ph.dtype)
        for r in range(s):
            xp[:, :, :, r] = ph[r].transpose(1, 0, 2)
        xp = xp.reshape(n, c, self.padded)
        keep = min(self.length, self.padded - p)
        if keep == self.length:
            return xp[:, :, p : p + keep]
        out = np.zeros((n, c, self.length), dtype=ph.dtype)
        out[:, :, :keep] = xp[:, :, p : p + keep]
        return out

    def weight_taps(self, w: np.ndarray) -> np.ndarray:
        """(C_out, C, K) -> (taps, C_out, stride * C) matching the phase rows."""
        o, c, k = w.shape
        wp = np.zeros((o, c, self.taps * self.stride), dtype=w.dtype)
        wp[:, :, :k] = w
        return np.ascontiguousarray(wp.reshape(o, c, self.taps, self.stride).transpose(2, 0, 3, 1)).reshape(
            self.taps, o, -1
        )

    def weight_from_taps(self, wt: np.ndarray) -> np.ndarray:
        o = wt.shape[1]
        w = wt.reshape(self.taps, o, self.stride, self.c).transpose(1, 3, 0, 2).reshape(o, self.c, -1)
        return np.ascontiguousarray(w[:, :, : self.kernel])

    def out_to_matrix(self, y: np.ndarray) -> np.ndarray:
        n, o = y.shape[0], y.shape[1]
        yp = np.zeros((o, n, self.m), dtype=y.dtype)
        yp[:, :, : self.n_out] = y.transpose(1, 0, 2)
        return yp.reshape(o, n * self.m)[:, : self.cols_width]

    def matrix_to_out(self, y2: np.ndarray) -> np.ndarray:
        o = y2.shape[0]
        full = np.zeros((o, self.n * self.m), dtype=y2.dtype)
        full[:, : self.cols_width] = y2
        return np.ascontiguousarray(full.reshape(o, self.n, self.m)[:, :, : self.n_out].transpose(1, 0, 2))


def _conv_forward(x, w, geo: _ConvGeometry):
    ph = geo.phases(x)
    wt = geo.weight_taps(w)
    y2 = wt[0] @ geo.window(ph, 0)
    for q in range(1, geo.taps):
        y2 += wt[q] @ geo.window(ph, q)
    return geo.matrix_to_out(y2), ph


def _conv_grad_input(gy, w, geo: _ConvGeometry):
    g2 = geo.out_to_matrix(gy)
    wt = geo.weight_taps(w)
    taps, o, rows = wt.shape
    if taps * o <= 2 * rows:
        # few output channels (the head): one product against tap-shifted copies
        # of the gradient beats many thin outer products
        shifted = np.zeros((taps, o, geo.n * geo.m), dtype=g2.dtype)
        for q in range(taps):
            geo.window(shifted[q], q)[...] = g2
        ph = wt.transpose(2, 0, 1).reshape(rows, taps * o) @ shifted.reshape(taps * o, -1)
    else:
        ph = np.zeros((rows, geo.n * geo.m), dtype=g2.dtype)
        for q in range(taps):
            geo.window(ph, q)[...] += wt[q].T @ g2
    return geo.unphase(ph)


def _conv_grad_weight(ph, gy, geo: _ConvGeometry):
    g2 = geo.out_to_matrix(gy)
    return geo.weight_from_taps(np.stack([g2 @ geo.window(ph, q).T for q in range(geo.taps)]))


def conv1d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of ``x`` (N, C_in, L) with ``weight`` (C_out, C_in, K)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.data.ndim != 3 or weight.data.ndim != 3:
        raise ValueError("conv1d expects 3-d input and weight")
    n, c_in, length = x.shape
    c_out, w_in, k = weight.shape
    if c_in != w_in:
        raise ValueError(f"conv1d channel mismatch: input has {c_in}, weight expects {w_in}")
    if conv1d_output_length(length, k, stride, padding) < 1:
        raise ValueError("conv1d output length < 1")

    geo = _ConvGeometry(n, c_in, length, k, stride, padding)
    y, cols = _conv_forward(x.data, weight.data, geo)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        y += bias.data[None, :, None]
        parents.append(bias)
    want_x = needs_grad([x])
    w = weight.data

    def backward(g):
        grads = [_conv_grad_input(g, w, geo) if want_x else None, _conv_grad_weight(cols, g, geo)]
        if len(parents) == 3:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return make_op(y, parents, backward)


def conv_transpose1d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed convolution of ``x`` (N, C_in, L) with ``weight`` (C_in, C_out, K).

    This is the adjoint of :func:`conv1d` with the same stride and padding, so
    forward and backward reuse the convolution kernels with roles swapped.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.data.ndim != 3 or weight.data.ndim != 3:
        raise ValueError("conv_transpose1d expects 3-d input and weight")
    n, c_in, length = x.shape
    w_in, c_out, k = weight.shape
    if c_in != w_in:
        raise ValueError(f"conv_transpose1d channel mismatch: input has {c_in}, weight expects {w_in}")
    n_out = conv_transpose1d_output_length(length, k, stride, padding)
    if n_out < 1:
        raise ValueError("conv_transpose1d output length < 1")

    # the adjoint convolution maps (N, C_out, n_out) -> (N, C_in, length)
    geo = _ConvGeometry(n, c_out, n_out, k, stride, padding)
    w = weight.data
    y = _conv_grad_input(x.data, w, geo)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        y += bias.data[None, :, None]
        parents.append(bias)
    want_x = needs_grad([x])
    xd = x.data

    def backward(g):
        dx, cols = _conv_forward(g, w, geo)
        grads = [dx if want_x else None, _conv_grad_weight(cols, xd, geo)]
        if len(parents) == 3:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return make_op(y, parents, backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    return make_op(np.maximum(x.data, 0, dtype=x.dtype), [x], lambda g: [g * positive])


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign so exp never overflows
    z = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype, copy=False)
    return make_op(s, [x], lambda g: [g * s * (1.0 - s)])


def _channel_sum(a: np.ndarray) -> np.ndarray:
    return np.einsum("ncl->c", a)


def batch_norm(
    x,
    gamma,
    beta,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel batch normalization over the (batch, length) axes.

    In training mode the batch statistics normalize the input and the running
    buffers are updated in place (unbiased variance, as the eval path expects).
    In eval mode only the running buffers are used.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    xd = x.data
    g_ = gamma.data[None, :, None]
    if training:
        count = xd.shape[0] * xd.shape[2]
        if count < 2:
            raise ValueError("batch_norm in training mode needs more than one value per channel")
        mean = _channel_sum(xd) / count
        centered = xd - mean[None, :, None]
        var = np.einsum("ncl,ncl->c", centered, centered) / count
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = centered * inv_std[None, :, None]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var * count / (count - 1)

        def backward(gy):
            dgamma = np.einsum("ncl,ncl->c", gy, xhat)
            dbeta = _channel_sum(gy)
            dx = None
            if needs_x:
                # d(xhat) = gamma * gy, folded into the per-channel scale
                scale = (gamma.data * inv_std)[None, :, None]
                dx = scale * (gy - (dbeta / count)[None, :, None] - xhat * (dgamma / count)[None, :, None])
            return [dx, dgamma, dbeta]

    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        xhat = (xd - running_mean[None, :, None]) * inv_std[None, :, None]

        def backward(gy):
            dx = gy * (g_ * inv_std[None, :, None]) if needs_x else None
            return [dx, np.einsum("ncl,ncl->c", gy, xhat), _channel_sum(gy)]

    needs_x = needs_grad([x])
    y = (xhat * g_ + beta.data[None, :, None]).astype(xd.dtype, copy=False)
    return make_op(y, [x, gamma, beta], backward)


def rmse_loss(pred, target) -> Tensor:
    """sqrt(mean((pred - target)**2)) over every element."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ValueError(f"rmse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    value = np.sqrt(np.mean(diff * diff))

    def backward(g):
        if value == 0:
            d = np.zeros_like(diff)
        else:
            d = g * diff / (diff.size * value)
        return [d, -d]

    return make_op(np.asarray(value, dtype=diff.dtype), [pred, target], backward)


def tsum(x) -> Tensor:
    x = as_tensor(x)
    return make_op(np.asarray(x.data.sum(), dtype=x.dtype), [x], lambda g: [np.broadcast_to(g, x.shape).copy()])


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.data * b.data, [a, b], lambda g: [g * b.data, g * a.data])


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(a.data + b.data, [a, b], lambda g: [g, g])

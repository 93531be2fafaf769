"""Differentiable operations: layers, activations and losses.

Every op accepts either a single example or a batch with one extra leading
axis (e.g. conv1d takes ``[L, C]`` or ``[N, L, C]``) and returns the matching
rank. Losses return a scalar for single inputs and a length-N vector for
batches; batch reduction is the caller's choice.

All ops validate shapes eagerly and raise ShapeError / DomainError with both
offending shapes in the message.
"""

from __future__ import annotations

import numpy as np

from ..errors import DomainError, NumericError, ShapeError
from .tensor import Parameter, Tensor, as_tensor, grad_enabled, _unbroadcast

VALID = "VALID"
SAME = "SAME"

_LOG_EPS = 1e-12  # clamp inside log so a collapsed posterior cannot yield -inf


def _node(values: np.ndarray, parents: tuple, vjp) -> Tensor:
    """Create a result node, recording the tape only when it can matter."""
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(values, parents, vjp, requires_grad=True)
    return Tensor(values)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.values + b.values

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.values - b.values

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.values * b.values

    def vjp(g):
        return (
            _unbroadcast(g * b.values, a.shape),
            _unbroadcast(g * a.values, b.shape),
        )

    return _node(out, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.values / b.values

    def vjp(g):
        return (
            _unbroadcast(g / b.values, a.shape),
            _unbroadcast(-g * a.values / (b.values * b.values), b.shape),
        )

    return _node(out, (a, b), vjp)


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.values)
    return _node(out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return _node(np.log(x.values), (x,), lambda g: (g / x.values,))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out = np.sqrt(x.values)
    return _node(out, (x,), lambda g: (g * 0.5 / out,))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.values)
    return _node(out, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    v = x.values
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return _node(out, (x,), lambda g: (g * out * (1.0 - out),))


def tsum(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.values.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(out, (x,), vjp)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = x.size if axis is None else x.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def take(x, index) -> Tensor:
    """Basic (non-repeating) indexing; slices and integers only."""
    x = as_tensor(x)
    out = x.values[index]

    def vjp(g):
        gx = np.zeros_like(x.values)
        gx[index] = g
        return (gx,)

    return _node(out, (x,), vjp)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _node(
        x.values.reshape(shape), (x,), lambda g: (g.reshape(x.shape),)
    )


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def lrelu(x, alpha: float = 0.3) -> Tensor:
    """Leaky ReLU: identity for x >= 0, ``alpha * x`` otherwise."""
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"lrelu alpha must be in [0, 1), got {alpha}")
    x = as_tensor(x)
    factor = np.where(x.values < 0, x.values.dtype.type(alpha), x.values.dtype.type(1.0))
    out = x.values * factor

    def vjp(g):
        return (g * factor,)

    return _node(out, (x,), vjp)


def conv1d(x, w, b, stride: int = 1, padding: str = VALID) -> Tensor:
    """1-D convolution (cross-correlation) over the time axis.

    x: ``[L, C_in]`` or ``[N, L, C_in]``; w: ``[K, C_in, C_out]``; b: ``[C_out]``.
    VALID: ``L_out = floor((L - K) / stride) + 1``. SAME (stride 1 only):
    ``L_out = L`` with ``floor((K-1)/2)`` zeros left, ``ceil((K-1)/2)`` right.
    """
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if w.ndim != 3:
        raise ShapeError(f"conv1d kernel must be [K, C_in, C_out], got {w.shape}")
    k, c_in, c_out = w.shape
    if b.shape != (c_out,):
        raise ShapeError(f"conv1d bias shape {b.shape} != ({c_out},) from kernel {w.shape}")
    batched = x.ndim == 3
    if x.ndim not in (2, 3):
        raise ShapeError(f"conv1d input must be [L, C_in] or [N, L, C_in], got {x.shape}")
    xv = x.values if batched else x.values[None]
    n, length, cx = xv.shape
    if cx != c_in:
        raise ShapeError(f"conv1d input channels {xv.shape} vs kernel {w.shape}")
    if stride < 1:
        raise DomainError(f"conv1d stride must be >= 1, got {stride}")

    if padding == VALID:
        if length < k:
            raise ShapeError(f"conv1d VALID needs L >= K: input {x.shape}, kernel {w.shape}")
        pad_left = 0
        l_out = (length - k) // stride + 1
        xp = xv
    elif padding == SAME:
        if stride != 1:
            raise DomainError(f"conv1d SAME requires stride 1, got {stride}")
        pad_left = (k - 1) // 2
        l_out = length
        if k == 1:
            xp = xv
        else:
            xp = np.zeros((n, length + k - 1, c_in), dtype=xv.dtype)
            xp[:, pad_left : pad_left + length, :] = xv
    else:
        raise DomainError(f"conv1d padding must be VALID or SAME, got {padding!r}")

    if k == 1 and stride == 1:
        # pointwise conv: a plain channel mix, no patch gather needed
        w2d = w.values.reshape(c_in, c_out)
        out = xp @ w2d + b.values
        patches = None
    else:
        patches = np.empty((n, l_out, k, c_in), dtype=xv.dtype)
        for j in range(k):
            patches[:, :, j, :] = xp[:, j : j + (l_out - 1) * stride + 1 : stride, :]
        w2d = w.values.reshape(k * c_in, c_out)
        out = patches.reshape(n, l_out, k * c_in) @ w2d + b.values
    if not batched:
        out = out[0]

    def vjp(g):
        gv = g if batched else g[None]
        db = gv.sum(axis=(0, 1))
        flat_g = gv.reshape(n * l_out, c_out)
        if patches is None:
            dw = (xp.reshape(n * l_out, c_in).T @ flat_g).reshape(k, c_in, c_out)
            dx = gv @ w2d.T
            if not batched:
                dx = dx[0]
            return dx, dw, db
        flat_p = patches.reshape(n * l_out, k * c_in)
        dw = (flat_p.T @ flat_g).reshape(k, c_in, c_out)
        dpatch = (flat_g @ w2d.T).reshape(n, l_out, k, c_in)
        dxp = np.zeros_like(xp)
        for j in range(k):
            dxp[:, j : j + (l_out - 1) * stride + 1 : stride, :] += dpatch[:, :, j, :]
        dx = dxp if pad_left == 0 and dxp.shape[1] == length else dxp[:, pad_left : pad_left + length, :]
        if not batched:
            dx = dx[0]
        return dx, dw, db

    return _node(out, (x, w, b), vjp)


def maxpool1d(x, pool: int, stride: int) -> Tensor:
    """Max over sliding windows per channel; ties route to the lowest index.

    x: ``[L, C]`` or ``[N, L, C]``; ``L_out = floor((L - pool) / stride) + 1``.
    """
    x = as_tensor(x)
    batched = x.ndim == 3
    if x.ndim not in (2, 3):
        raise ShapeError(f"maxpool1d input must be [L, C] or [N, L, C], got {x.shape}")
    xv = x.values if batched else x.values[None]
    n, length, c = xv.shape
    if pool < 1 or stride < 1:
        raise DomainError(f"maxpool1d pool/stride must be >= 1, got {pool}/{stride}")
    if pool > length:
        raise ShapeError(f"maxpool1d pool {pool} exceeds input length {length} (shape {x.shape})")
    l_out = (length - pool) // stride + 1
    disjoint = stride >= pool  # windows never overlap: scatter needs no adds

    if disjoint and stride == pool:
        windows = xv[:, : l_out * pool, :].reshape(n, l_out, pool, c)
    else:
        windows = np.empty((n, l_out, pool, c), dtype=xv.dtype)
        for p in range(pool):
            windows[:, :, p, :] = xv[:, p : p + (l_out - 1) * stride + 1 : stride, :]
    arg = windows.argmax(axis=2)  # first max wins: lowest in-window index
    out = np.take_along_axis(windows, arg[:, :, None, :], axis=2)[:, :, 0, :]
    if not batched:
        out = out[0]

    def vjp(g):
        gv = g if batched else g[None]
        dx = np.zeros_like(xv)
        if disjoint and stride == pool:
            dwin = dx[:, : l_out * pool, :].reshape(n, l_out, pool, c)
            np.put_along_axis(dwin, arg[:, :, None, :], gv[:, :, None, :], axis=2)
        else:
            for p in range(pool):
                contrib = np.where(arg == p, gv, 0.0)
                dx[:, p : p + (l_out - 1) * stride + 1 : stride, :] += contrib
        return (dx if batched else dx[0],)

    return _node(out, (x,), vjp)


def matmul(x, w) -> Tensor:
    """``[D] @ [D, H] -> [H]`` or ``[N, D] @ [D, H] -> [N, H]``."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"matmul shapes incompatible: {x.shape} @ {w.shape}")
    out = x.values @ w.values

    def vjp(g):
        if x.ndim == 1:
            return g @ w.values.T, np.outer(x.values, g)
        return g @ w.values.T, x.values.T @ g

    return _node(out, (x, w), vjp)


def dense(x, w, b) -> Tensor:
    """Affine layer ``y = x @ w + b``; x: ``[D_in]`` or ``[N, D_in]``."""
    b = as_tensor(b)
    w = as_tensor(w)
    if b.shape != (w.shape[-1],):
        raise ShapeError(f"dense bias shape {b.shape} vs weight {w.shape}")
    return add(matmul(x, w), b)


def gru_step(x_t, h_prev, params) -> Tensor:
    """One GRU update.

    ``z = sig(Wz x + Uz h + bz)``, ``r = sig(Wr x + Ur h + br)``,
    ``h~ = tanh(Wh x + Uh (r*h) + bh)``, ``h' = (1-z)*h + z*h~``.
    ``params`` maps the keys w_z/u_z/b_z, w_r/u_r/b_r, w_h/u_h/b_h.
    """
    z = sigmoid(add(add(matmul(x_t, params["w_z"]), matmul(h_prev, params["u_z"])), params["b_z"]))
    r = sigmoid(add(add(matmul(x_t, params["w_r"]), matmul(h_prev, params["u_r"])), params["b_r"]))
    h_cand = tanh(add(add(matmul(x_t, params["w_h"]), matmul(mul(r, h_prev), params["u_h"])), params["b_h"]))
    return add(mul(sub(1.0, z), h_prev), mul(z, h_cand))


def gru_sequence(x, params, h0=None) -> Tensor:
    """Fold gru_step over time and return the last hidden state only.

    x: ``[T, D]`` or ``[N, T, D]``; h0 defaults to zeros of width H.
    """
    x = as_tensor(x)
    if x.ndim not in (2, 3):
        raise ShapeError(f"gru_sequence input must be [T, D] or [N, T, D], got {x.shape}")
    batched = x.ndim == 3
    t_len = x.shape[1] if batched else x.shape[0]
    if t_len == 0:
        raise DomainError("gru_sequence needs at least one timestep")
    hidden = as_tensor(params["u_z"]).shape[0]
    if h0 is None:
        shape = (x.shape[0], hidden) if batched else (hidden,)
        h = Tensor(np.zeros(shape, dtype=x.dtype))
    else:
        h = as_tensor(h0)
    for t in range(t_len):
        x_t = take(x, (slice(None), t)) if batched else take(x, t)
        h = gru_step(x_t, h, params)
    return h


def softmax(logits) -> Tensor:
    """Row-wise softmax over the last axis with max-shift stabilization."""
    x = as_tensor(logits)
    if not np.all(np.isfinite(x.values)):
        raise NumericError("softmax received non-finite logits")
    shifted = x.values - x.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        inner = (g * out).sum(axis=-1, keepdims=True)
        return (out * (g - inner),)

    return _node(out, (x,), vjp)


# ---------------------------------------------------------------------------
# losses / distances
# ---------------------------------------------------------------------------


def _check_distribution(p: np.ndarray, who: str) -> None:
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-6):
        raise DomainError(f"{who} is not a probability distribution (min {p.min()}, sum {p.sum(axis=-1)})")


def soft_cross_entropy(p_teacher, p_student) -> Tensor:
    """Soft-label cross entropy ``-sum_i p_t[i] * log(p_s[i] + 1e-12)``.

    Both inputs must be probability vectors over the same classes. For
    ``[N, I]`` inputs the per-row values are returned as ``[N]``.
    Lower bound is the teacher entropy, attained when the distributions match.
    """
    p_t, p_s = as_tensor(p_teacher), as_tensor(p_student)
    if p_t.shape != p_s.shape:
        raise ShapeError(f"soft_cross_entropy shapes differ: {p_t.shape} vs {p_s.shape}")
    _check_distribution(p_t.values, "teacher posterior")
    _check_distribution(p_s.values, "student posterior")
    logged = log(add(p_s, _LOG_EPS))
    return mul(tsum(mul(p_t, logged), axis=-1), -1.0)


def entropy(p: np.ndarray) -> float | np.ndarray:
    """Shannon entropy in nats with the same epsilon clamp as the loss."""
    p = np.asarray(p, dtype=np.float64)
    return -(p * np.log(p + _LOG_EPS)).sum(axis=-1)


def cosine_distance(a, b) -> Tensor:
    """``1 - a.b / (|a||b|)``, in [0, 2]. Row-wise for ``[N, D]`` inputs."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"cosine_distance shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a.values, axis=-1)
    nb = np.linalg.norm(b.values, axis=-1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise DomainError("cosine_distance received a zero-norm vector")
    dot = tsum(mul(a, b), axis=-1)
    denom = mul(sqrt(tsum(mul(a, a), axis=-1)), sqrt(tsum(mul(b, b), axis=-1)))
    return sub(1.0, div(dot, denom))


def mse(a, b) -> Tensor:
    """Mean squared error over the last axis. Row-wise for batches."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse shapes differ: {a.shape} vs {b.shape}")
    d = sub(a, b)
    return mean(mul(d, d), axis=-1)


def onehot_cross_entropy(posterior, labels: np.ndarray) -> Tensor:
    """``-log p[label]`` per row; the classifier training loss."""
    p = as_tensor(posterior)
    labels = np.asarray(labels)
    if p.ndim == 1:
        picked = take(p, int(labels))
    else:
        picked = take(p, (np.arange(p.shape[0]), labels))
    return mul(log(add(picked, _LOG_EPS)), -1.0)

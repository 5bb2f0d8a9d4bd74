"""Dense float tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a contiguous numpy buffer (float64 by default, float32
optional for speed runs). Operations record a tape node (operands plus a
backward closure) whenever gradients are enabled and an operand requires
them; :func:`backward` then walks the tape in reverse topological order and
accumulates adjoints into ``.grad``.

The op set is exactly what the model needs: matmul, (broadcast) add, scale,
elementwise mul, activations, row softmax, row layer norm, 1-d convolution
with same-length zero padding, embedding lookup, global max pooling,
dropout, masked fill, reshape/transpose and scalar reductions. No general
broadcasting. Every op traps non-finite outputs.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from .rng import Rng


class NumericsError(ValueError):
    """Invalid use of the tensor layer (bad shapes, missing tape, ...)."""


class ShapeError(NumericsError):
    pass


class NonFiniteError(NumericsError):
    pass


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / oracles)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if dtype is None:
            arr = np.asarray(data)
            if arr.dtype not in (np.float32, np.float64):
                arr = arr.astype(np.float64)
        else:
            arr = np.asarray(data, dtype=dtype)
        # keep 0-d scalars 0-d (ascontiguousarray would promote them to 1-d)
        self.data = np.ascontiguousarray(arr) if arr.ndim else arr.copy()
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = "leaf"
        self._parents = ()
        self._backward = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values produced by op {op!r}")


def _result(data: np.ndarray, op: str, parents: tuple, backward) -> Tensor:
    _check_finite(data, op)
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.op = op
        out._parents = parents
        out._backward = backward
    else:
        out.op = op
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g over the leading axes that were broadcast to reach its shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Tensor:
    """Elementwise add; b may also be a scalar or a trailing-axes bias."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape and b.size != 1 and b.shape != a.shape[-b.ndim:]:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape).reshape(b.shape))

    return _result(data, "add", (a, b), backward)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(c * g)

    return _result(a.data * c, "scale", (a,), backward)


def mul(a, b) -> Tensor:
    """Elementwise multiply of same-shape tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.data)
        if b.requires_grad:
            b.accumulate_grad(g * a.data)

    return _result(a.data * b.data, "mul", (a, b), backward)


def matmul(a, b) -> Tensor:
    """a @ b for 2-d x 2-d, 3-d x 2-d (contract last axis) or 3-d x 3-d."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-d, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            ga = g @ b.data.swapaxes(-1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = a.data.swapaxes(-1, -2) @ g
            b.accumulate_grad(_unbroadcast(gb, b.shape))

    return _result(data, "matmul", (a, b), backward)


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected a 2-d tensor, got {a.shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.T)

    return _result(a.data.T.copy(), "transpose", (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    shape = tuple(shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(a.shape))

    return _result(a.data.reshape(shape), "reshape", (a,), backward)


# ---------------------------------------------------------------------------
# activations


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * (1.0 - data * data))

    return _result(data, "tanh", (a,), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * (a.data > 0.0))

    return _result(data, "relu", (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # split by sign to avoid overflow in exp
    data = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                    np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * data * (1.0 - data))

    return _result(data, "sigmoid", (a,), backward)


def softmax(a) -> Tensor:
    """Row softmax over the last axis, shift-stable."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * data).sum(axis=-1, keepdims=True)
            a.accumulate_grad(data * (g - dot))

    return _result(data, "softmax", (a,), backward)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize each row (last axis) to zero mean / unit variance, then affine."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    d = a.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain/bias must have shape ({d},), got {gain.shape} and {bias.shape}")
    mean = a.data.mean(axis=-1, keepdims=True)
    var = ((a.data - mean) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mean) * inv_std
    data = xhat * gain.data + bias.data

    def backward(g):
        if gain.requires_grad:
            gain.accumulate_grad(_unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            bias.accumulate_grad(_unbroadcast(g, bias.shape))
        if a.requires_grad:
            dxhat = g * gain.data
            term = dxhat - dxhat.mean(axis=-1, keepdims=True) \
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            a.accumulate_grad(inv_std * term)

    return _result(data, "layer_norm", (a, gain, bias), backward)


# ---------------------------------------------------------------------------
# structured ops


def embedding_lookup(table, ids) -> Tensor:
    """Gather rows of a V x d table; ids is an integer array of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    if table.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-d, got {table.shape}")
    if not np.issubdtype(ids.dtype, np.integer):
        raise NumericsError("embedding_lookup: ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise NumericsError(
            f"embedding_lookup: id out of range for table with {table.shape[0]} rows"
        )
    data = table.data[ids]

    def backward(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
            table.accumulate_grad(gt)

    return _result(data, "embedding_lookup", (table,), backward)


def conv1d(x, kernel, bias=None) -> Tensor:
    """1-d convolution over the length axis with same-length zero padding.

    x: (L, d_in) or (B, L, d_in); kernel: (k, d_in, d_out); bias: (d_out,).
    Output position i sees input positions i - (k-1)//2 ... i + k//2.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if kernel.ndim != 3:
        raise ShapeError(f"conv1d: kernel must be (k, d_in, d_out), got {kernel.shape}")
    if x.ndim not in (2, 3) or x.shape[-1] != kernel.shape[1]:
        raise ShapeError(f"conv1d: incompatible shapes {x.shape} and {kernel.shape}")
    k, d_in, d_out = kernel.shape
    length = x.shape[-2]
    pad_left = (k - 1) // 2
    pad_right = k - 1 - pad_left
    pad_spec = [(0, 0)] * (x.ndim - 2) + [(pad_left, pad_right), (0, 0)]
    xp = np.pad(x.data, pad_spec)
    # cols[..., i, j*d_in:(j+1)*d_in] = padded input at position i + j
    cols = np.concatenate([xp[..., j:j + length, :] for j in range(k)], axis=-1)
    w_flat = kernel.data.reshape(k * d_in, d_out)
    data = cols @ w_flat
    parents = [x, kernel]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (d_out,):
            raise ShapeError(f"conv1d: bias must have shape ({d_out},), got {bias.shape}")
        data = data + bias.data
        parents.append(bias)

    def backward(g):
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.reshape(-1, d_out).sum(axis=0))
        if kernel.requires_grad:
            gw = cols.reshape(-1, k * d_in).T @ g.reshape(-1, d_out)
            kernel.accumulate_grad(gw.reshape(k, d_in, d_out))
        if x.requires_grad:
            gcols = g @ w_flat.T
            gxp = np.zeros_like(xp)
            for j in range(k):
                gxp[..., j:j + length, :] += gcols[..., j * d_in:(j + 1) * d_in]
            if pad_right:
                gx = gxp[..., pad_left:-pad_right, :]
            else:
                gx = gxp[..., pad_left:, :]
            x.accumulate_grad(gx)

    return _result(data, "conv1d", tuple(parents), backward)


def global_max_pool(x) -> Tensor:
    """Max over the length axis: (..., L, d) -> (..., d); ties take the first index."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError(f"global_max_pool: expected at least 2-d input, got {x.shape}")
    arg = x.data.argmax(axis=-2)
    data = np.take_along_axis(x.data, arg[..., None, :], axis=-2).squeeze(-2)

    def backward(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, arg[..., None, :], g[..., None, :], axis=-2)
            x.accumulate_grad(gx)

    return _result(data, "global_max_pool", (x,), backward)


def dropout(x, rate: float, rng: Rng | None = None, train: bool = False) -> Tensor:
    """Zero entries with probability ``rate`` and rescale survivors (train only).

    In eval mode (or rate 0) this is the identity and records nothing.
    """
    x = as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise NumericsError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise NumericsError("dropout in train mode needs an rng")
    keep = (rng.uniform(size=x.shape) >= rate) / (1.0 - rate)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g * keep)

    return _result(x.data * keep, "dropout", (x,), backward)


def masked_fill(x, mask, value: float) -> Tensor:
    """Replace entries where mask is true by a constant; their gradient is 0."""
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError(f"masked_fill: mask shape {mask.shape} != tensor shape {x.shape}")
    data = np.where(mask, float(value), x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.where(mask, 0.0, g))

    return _result(data, "masked_fill", (x,), backward)


# ---------------------------------------------------------------------------
# reductions


def tensor_sum(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.full_like(a.data, float(g)))

    return _result(np.asarray(a.data.sum()), "sum", (a,), backward)


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.size

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.full_like(a.data, float(g) / n))

    return _result(np.asarray(a.data.mean()), "mean", (a,), backward)


def bce_with_logits(logits, targets) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against {0,1} targets.

    Evaluated in log-space from the logits, so it is stable for any
    magnitude: max(z,0) - z*t + log(1 + exp(-|z|)), averaged over entries.
    """
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != logits.shape:
        raise ShapeError(f"bce_with_logits: targets shape {t.shape} != logits shape {logits.shape}")
    z = logits.data
    per_elem = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    n = logits.size

    def backward(g):
        if logits.requires_grad:
            p = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                         np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
            logits.accumulate_grad(float(g) * (p - t) / n)

    return _result(np.asarray(per_elem.mean()), "bce_with_logits", (logits,), backward)


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into .grad for every tensor on the tape."""
    if not isinstance(loss, Tensor):
        raise NumericsError("backward expects a Tensor")
    if loss.size != 1:
        raise NumericsError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise NumericsError("backward called on a tensor that is not on the tape")

    # iterative topological order (graphs can be deeper than the recursion limit)
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


def zero_grads(params) -> None:
    """Clear gradients on an iterable (or dict) of tensors."""
    values = params.values() if isinstance(params, dict) else params
    for p in values:
        p.zero_grad()


def sqrt_dim(d: int) -> float:
    return math.sqrt(float(d))

"""Minimal reverse-mode tensor graph and the layers the wind models need.

Everything is float64. A forward pass records a dynamic graph of ``Tensor``
nodes; ``Tensor.backward()`` walks it in reverse topological order and
deposits gradients into the ``Param`` leaves. Only the operations actually
used by the models are implemented: broadcast add/sub/mul, (stacked) matmul,
tanh, softmax over the last axis, reshape/swapaxes, full mean, batch
normalization and mean-squared-error loss.
"""

from __future__ import annotations

import numpy as np

from .errors import BatchTooSmall, GraphNotRecorded, OddWidth, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad", "_param")

    def __init__(self, data, parents=(), requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 0 and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.grad = None
        self._parents = tuple(parents)
        self._backward = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._param = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded graph."""
        if self.data.size != 1:
            raise GraphNotRecorded("backward() must start from a scalar")
        if not self._parents:
            raise GraphNotRecorded("tensor has no recorded graph below it")
        topo: list[Tensor] = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        for node in topo:
            node.grad = None  # clear residue so graphs can share leaf tensors
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward()
        for node in topo:
            if node._param is not None and node.grad is not None:
                node._param.grad += node.grad


class Param:
    """Named learnable array plus its accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def tensor(self) -> Tensor:
        t = Tensor(self.value, requires_grad=True)
        t._param = self
        return t

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def _accum(node: Tensor, g: np.ndarray, own: bool = False) -> None:
    # ``own=True`` promises g is a fresh array no other node references, so
    # it can be adopted without copying; borrowed arrays (views of a live
    # downstream .grad) are copied on first store. Accumulating += is safe
    # in both cases because an adopted buffer is private.
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = g if own else np.array(g, dtype=np.float64)
    else:
        node.grad += g


def _unbroadcast(g: np.ndarray, shape):
    """Collapse gradient of a broadcast operand back to its own shape.

    Returns (array, owned): owned is True when a reduction made the result
    private to the caller."""
    owned = False
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
        owned = True
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
        owned = True
    if g.shape != tuple(shape):
        g = g.reshape(shape)
    return g, owned


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data, parents=(a, b))

    def _bw():
        ga, own_a = _unbroadcast(out.grad, a.shape)
        _accum(a, ga, own_a)
        gb, own_b = _unbroadcast(out.grad, b.shape)
        _accum(b, gb, own_b)

    out._backward = _bw
    return out


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data, parents=(a, b))

    def _bw():
        ga, own_a = _unbroadcast(out.grad, a.shape)
        _accum(a, ga, own_a)
        gb, _ = _unbroadcast(-out.grad, b.shape)
        _accum(b, gb, True)

    out._backward = _bw
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data, parents=(a, b))

    def _bw():
        ga, _ = _unbroadcast(out.grad * b.data, a.shape)
        _accum(a, ga, True)
        gb, _ = _unbroadcast(out.grad * a.data, b.shape)
        _accum(b, gb, True)

    out._backward = _bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, parents=(a,))

    def _bw():
        _accum(a, out.grad * c, True)

    out._backward = _bw
    return out


def matmul(a, b) -> Tensor:
    """Matrix product; operands must be at least 2-D, leading axes broadcast."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch("matmul operands must be at least 2-D")
    if b.ndim == 2 and a.ndim > 2:
        # stacked-by-plain case runs as one flat product, not a GEMM per slab
        n_in, n_out = b.shape
        a2 = a.data.reshape(-1, n_in)
        out = Tensor(np.matmul(a2, b.data).reshape(a.shape[:-1] + (n_out,)),
                     parents=(a, b))

        def _bw_flat():
            g2 = out.grad.reshape(-1, n_out)
            if a.requires_grad:
                ga = np.matmul(g2, b.data.T)
                ga.shape = a.shape  # in-place reshape keeps ownership
                _accum(a, ga, True)
            if b.requires_grad:
                _accum(b, np.matmul(a2.T, g2), True)

        out._backward = _bw_flat
        return out
    out = Tensor(np.matmul(a.data, b.data), parents=(a, b))

    def _bw():
        g = out.grad
        if a.requires_grad:
            ga, _ = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
            _accum(a, ga, True)
        if b.requires_grad:
            gb, _ = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
            _accum(b, gb, True)

    out._backward = _bw
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, parents=(a,))

    def _bw():
        _accum(a, out.grad * (1.0 - y * y), True)

    out._backward = _bw
    return out


def softmax_last(a: Tensor) -> Tensor:
    """Softmax over the last axis, numerically stabilized by max-shift."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, parents=(a,))

    def _bw():
        g = out.grad
        _accum(a, y * (g - (g * y).sum(axis=-1, keepdims=True)), True)

    out._backward = _bw
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), parents=(a,))

    def _bw():
        _accum(a, out.grad.reshape(a.shape))

    out._backward = _bw
    return out


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    out = Tensor(np.swapaxes(a.data, ax1, ax2), parents=(a,))

    def _bw():
        _accum(a, np.swapaxes(out.grad, ax1, ax2))

    out._backward = _bw
    return out


def mean_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.mean(), parents=(a,))

    def _bw():
        _accum(a, np.full(a.shape, float(out.grad) / a.data.size), True)

    out._backward = _bw
    return out


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean squared error over all elements; gradient is 2*(pred-target)/n."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred.data - target
    out = Tensor(np.mean(diff * diff), parents=(pred,))

    def _bw():
        _accum(pred, out.grad * 2.0 * diff / diff.size, True)

    out._backward = _bw
    return out


def positional_encoding(n_positions: int, width: int) -> np.ndarray:
    """Sinusoidal position codes, shape (n_positions, width); width must be even.

    Column 2i holds sin(pos / 10000^(2i/width)), column 2i+1 the matching cos.
    """
    if width % 2 != 0:
        raise OddWidth(f"positional width must be even, got {width}")
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    i2 = np.arange(0, width, 2, dtype=np.float64)
    angles = pos / np.power(10000.0, i2 / width)
    pe = np.empty((n_positions, width))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles)
    return pe


def glorot_uniform(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


class Dense:
    """Affine layer y = x @ w + b with optional tanh."""

    def __init__(self, name: str, n_in: int, n_out: int, rng: np.random.Generator, activation=None):
        self.w = Param(f"{name}.w", glorot_uniform(rng, n_in, n_out))
        self.b = Param(f"{name}.b", np.zeros(n_out))
        if activation not in (None, "tanh"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.activation = activation

    def params(self):
        return [self.w, self.b]

    def forward(self, x: Tensor) -> Tensor:
        y = add(matmul(x, self.w.tensor()), self.b.tensor())
        return tanh(y) if self.activation == "tanh" else y


class MultiHeadAttention:
    """Scaled dot-product self-attention over (batch, tokens, width) inputs.

    Full-width query/key/value projections are split into ``heads`` slices of
    width/heads each; per head, softmax(q kT / sqrt(width/heads)) v; the
    concatenated heads pass through an output projection with bias.
    """

    def __init__(self, name: str, width: int, heads: int, rng: np.random.Generator):
        if width % heads != 0:
            raise ShapeMismatch(f"width {width} not divisible by heads {heads}")
        self.width = width
        self.heads = heads
        self.wq = Param(f"{name}.wq", glorot_uniform(rng, width, width))
        self.wk = Param(f"{name}.wk", glorot_uniform(rng, width, width))
        self.wv = Param(f"{name}.wv", glorot_uniform(rng, width, width))
        self.wo = Param(f"{name}.wo", glorot_uniform(rng, width, width))
        self.bo = Param(f"{name}.bo", np.zeros(width))

    def params(self):
        return [self.wq, self.wk, self.wv, self.wo, self.bo]

    def attention_weights(self, x) -> np.ndarray:
        """Softmax attention matrices for inspection, shape (batch, heads, t, t)."""
        out = self._scores(Tensor(np.asarray(x)))
        return softmax_last(out).data

    def _split_heads(self, t: Tensor, b: int, n: int) -> Tensor:
        t = reshape(t, (b, n, self.heads, self.width // self.heads))
        return swapaxes(t, 1, 2)

    def _scores(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        q = self._split_heads(matmul(x, self.wq.tensor()), b, n)
        k = self._split_heads(matmul(x, self.wk.tensor()), b, n)
        return scale(matmul(q, swapaxes(k, -1, -2)), 1.0 / np.sqrt(self.width / self.heads))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.width:
            raise ShapeMismatch(f"expected (batch, tokens, {self.width}), got {x.shape}")
        b, n, _ = x.shape
        v = self._split_heads(matmul(x, self.wv.tensor()), b, n)
        attn = softmax_last(self._scores(x))
        ctx = swapaxes(matmul(attn, v), 1, 2)
        ctx = reshape(ctx, (b, n, self.width))
        return add(matmul(ctx, self.wo.tensor()), self.bo.tensor())


class BatchNorm:
    """Per-feature batch normalization over (batch, features) inputs.

    Training mode normalizes by batch statistics (population variance) and
    updates exponential running statistics with momentum 0.9; inference mode
    normalizes by the running statistics. eps = 1e-5 floors the variance.
    """

    MOMENTUM = 0.9
    EPS = 1e-5

    def __init__(self, name: str, width: int):
        self.name = name
        self.gamma = Param(f"{name}.gamma", np.ones(width))
        self.beta = Param(f"{name}.beta", np.zeros(width))
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self) -> dict:
        return {f"{self.name}.running_mean": self.running_mean,
                f"{self.name}.running_var": self.running_var}

    def load_buffers(self, arrays: dict) -> None:
        self.running_mean = np.array(arrays[f"{self.name}.running_mean"], dtype=np.float64)
        self.running_var = np.array(arrays[f"{self.name}.running_var"], dtype=np.float64)

    def forward(self, x: Tensor, training: bool) -> Tensor:
        if x.ndim != 2:
            raise ShapeMismatch(f"batch norm expects (batch, features), got {x.shape}")
        if not training:
            inv = 1.0 / np.sqrt(self.running_var + self.EPS)
            x_hat = mul(sub(x, Tensor(self.running_mean)), Tensor(inv))
            return add(mul(x_hat, self.gamma.tensor()), self.beta.tensor())
        m = x.shape[0]
        if m < 2:
            raise BatchTooSmall("batch statistics need at least 2 rows")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        self.running_mean = self.MOMENTUM * self.running_mean + (1.0 - self.MOMENTUM) * mu
        self.running_var = self.MOMENTUM * self.running_var + (1.0 - self.MOMENTUM) * var
        inv = 1.0 / np.sqrt(var + self.EPS)
        x_hat = (x.data - mu) * inv
        gamma_t, beta_t = self.gamma.tensor(), self.beta.tensor()
        out = Tensor(self.gamma.value * x_hat + self.beta.value,
                     parents=(x, gamma_t, beta_t))

        def _bw():
            g = out.grad
            _accum(gamma_t, (g * x_hat).sum(axis=0), True)
            _accum(beta_t, g.sum(axis=0), True)
            if x.requires_grad:
                gx = (self.gamma.value * inv / m) * (
                    m * g - g.sum(axis=0) - x_hat * (g * x_hat).sum(axis=0)
                )
                _accum(x, gx, True)

        out._backward = _bw
        return out

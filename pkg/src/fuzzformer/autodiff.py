"""Reverse-mode automatic differentiation over dense float64 arrays.

Every operation evaluates eagerly and, when gradients are enabled and at
least one input requires them, records a closure that propagates the
adjoint back to its inputs.  ``backward`` on a scalar root then runs the
closures in reverse topological order.  Fan-out accumulates additively.

Shape mismatches raise :class:`ShapeError` naming the offending
operation; NaN/Inf in any intermediate raises :class:`NonFiniteError`
(disable with ``set_finite_checks`` for micro-benchmarks).
"""

from __future__ import annotations

import contextlib

import numpy as np

from .exceptions import NonFiniteError, PositiveDefinitenessError, ShapeError

_GRAD_ENABLED = True
_FINITE_CHECKS = True


def grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def set_finite_checks(enabled: bool) -> None:
    global _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)


def _all_finite(x) -> bool:
    # summing is a no-false-negative probe: any NaN/Inf entry makes the
    # sum non-finite, and no allocation of a bool array is needed
    with np.errstate(over="ignore", invalid="ignore"):
        return bool(np.isfinite(np.sum(x)))


class Tensor:
    """A node of the computation graph: values, gradient, and provenance."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def gradient(self) -> np.ndarray:
        """Gradient array; zeros when the node was not touched by backward."""
        if self.grad is None:
            return np.zeros_like(self.data)
        return self.grad

    def item(self) -> float:
        return float(self.data)

    def _accum(self, g) -> None:
        if _FINITE_CHECKS and not _all_finite(g):
            raise NonFiniteError(f"{self._op}: non-finite gradient")
        if self.grad is None:
            # copy: g may be a (read-only) view of another node's buffer
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        return f"Tensor(op={self._op!r}, shape={self.data.shape}, requires_grad={self.requires_grad})"

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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def astensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    """Leaf tensor holding trainable weights."""
    t = Tensor(np.array(data, dtype=np.float64), requires_grad=True)
    return t


def forward_eval(root: Tensor) -> np.ndarray:
    """Values at the graph root (evaluation is eager, so this is a read)."""
    if _FINITE_CHECKS and not _all_finite(root.data):
        raise NonFiniteError(f"{root._op}: non-finite values at graph root")
    return root.data


def _node(data, parents, op, backward_fn) -> Tensor:
    """Create an op output, recording the closure only on an active tape."""
    if _FINITE_CHECKS and not _all_finite(data):
        raise NonFiniteError(f"{op}: non-finite values in forward pass")
    out = Tensor(data)
    out._op = op
    if _GRAD_ENABLED:
        tracked = tuple(p for p in parents if p.requires_grad)
        if tracked:
            out.requires_grad = True
            out._parents = tracked
            out._backward = backward_fn
    return out


def custom_op(op: str, data, inputs, vjp) -> Tensor:
    """Wrap externally computed values as a graph node.

    ``vjp(g)`` must return one gradient array (or None) per input, in
    order.  Used for fused kernels whose backward pass is hand-written.
    """
    inputs = tuple(inputs)
    out = _node(data, inputs, op, None)

    def _bw():
        grads = vjp(out.grad)
        for inp, g in zip(inputs, grads):
            if inp.requires_grad and g is not None:
                inp._accum(g)

    out._backward = _bw if out._parents else None
    return out


def backward(root: Tensor) -> None:
    """Populate ``grad`` of every tensor the scalar root depends on."""
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.data.shape}")
    # Iterative post-order: graphs unrolled over long horizons get deep.
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    root._accum(np.ones_like(root.data))
    # silence numpy warnings here: _accum turns non-finite adjoints into
    # NonFiniteError, which is the designed failure surface
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum an upstream gradient down to the shape it was broadcast from."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(op, a, b, fwd, da, db) -> Tensor:
    a, b = astensor(a), astensor(b)
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            data = fwd(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"{op}: incompatible shapes {a.data.shape} and {b.data.shape}") from exc

    def _bw():
        g = out.grad
        if a.requires_grad:
            a._accum(_unbroadcast(da(g, a.data, b.data), a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(db(g, a.data, b.data), b.data.shape))

    out = _node(data, (a, b), op, None)
    out._backward = _bw if out._parents else None
    return out


def add(a, b):
    return _binary("add", a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary("sub", a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary("mul", a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b):
    return _binary(
        "div",
        a,
        b,
        lambda x, y: x / y,
        lambda g, x, y: g / y,
        lambda g, x, y: -g * x / (y * y),
    )


def neg(a):
    a = astensor(a)

    def _bw():
        a._accum(-out.grad)

    out = _node(-a.data, (a,), "neg", None)
    out._backward = _bw if out._parents else None
    return out


def matmul(a, b):
    a, b = astensor(a), astensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(
            f"matmul: operands must have ndim >= 2, got {a.data.shape} and {b.data.shape}"
        )
    try:
        data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}") from exc

    def _bw():
        g = out.grad
        if a.requires_grad:
            a._accum(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape))

    out = _node(data, (a, b), "matmul", None)
    out._backward = _bw if out._parents else None
    return out


def swapaxes(a, axis1, axis2):
    a = astensor(a)

    def _bw():
        a._accum(np.swapaxes(out.grad, axis1, axis2))

    out = _node(np.swapaxes(a.data, axis1, axis2), (a,), "swapaxes", None)
    out._backward = _bw if out._parents else None
    return out


def reshape(a, shape):
    a = astensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {a.data.shape} as {shape}") from exc

    def _bw():
        a._accum(out.grad.reshape(a.data.shape))

    out = _node(data, (a,), "reshape", None)
    out._backward = _bw if out._parents else None
    return out


def getitem(a, key):
    """Basic and integer-array indexing; backward scatter-adds."""
    a = astensor(a)
    try:
        data = a.data[key]
    except IndexError as exc:
        raise ShapeError(f"getitem: invalid index for shape {a.data.shape}") from exc

    def _bw():
        full = np.zeros_like(a.data)
        np.add.at(full, key, out.grad)
        a._accum(full)

    out = _node(np.array(data, dtype=np.float64), (a,), "getitem", None)
    out._backward = _bw if out._parents else None
    return out


def concat(tensors, axis=0):
    tensors = [astensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError("concat: inconsistent shapes") from exc
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bw():
        g = out.grad
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accum(g[tuple(idx)])

    out = _node(data, tensors, "concat", None)
    out._backward = _bw if out._parents else None
    return out


def stack(tensors, axis=0):
    tensors = [astensor(t) for t in tensors]
    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError("stack: inconsistent shapes") from exc

    def _bw():
        g = out.grad
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accum(np.take(g, i, axis=axis))

    out = _node(data, tensors, "stack", None)
    out._backward = _bw if out._parents else None
    return out


def _restore_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        axes = axis if isinstance(axis, tuple) else (axis,)
        axes = tuple(a % len(shape) for a in axes)
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def tsum(a, axis=None, keepdims=False):
    a = astensor(a)

    def _bw():
        a._accum(_restore_reduced(out.grad, a.data.shape, axis, keepdims))

    out = _node(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), "sum", None)
    out._backward = _bw if out._parents else None
    return out


def tmean(a, axis=None, keepdims=False):
    a = astensor(a)
    data = np.mean(a.data, axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[ax % a.data.ndim] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def _bw():
        a._accum(_restore_reduced(out.grad, a.data.shape, axis, keepdims) / count)

    out = _node(data, (a,), "mean", None)
    out._backward = _bw if out._parents else None
    return out


def exp(a):
    a = astensor(a)
    with np.errstate(over="ignore"):
        data = np.exp(a.data)

    def _bw():
        a._accum(out.grad * out.data)

    out = _node(data, (a,), "exp", None)
    out._backward = _bw if out._parents else None
    return out


def log(a):
    a = astensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)

    def _bw():
        a._accum(out.grad / a.data)

    out = _node(data, (a,), "log", None)
    out._backward = _bw if out._parents else None
    return out


def tanh(a):
    a = astensor(a)
    data = np.tanh(a.data)

    def _bw():
        a._accum(out.grad * (1.0 - out.data * out.data))

    out = _node(data, (a,), "tanh", None)
    out._backward = _bw if out._parents else None
    return out


def sigmoid(a):
    a = astensor(a)
    with np.errstate(over="ignore"):
        data = 1.0 / (1.0 + np.exp(-a.data))

    def _bw():
        a._accum(out.grad * out.data * (1.0 - out.data))

    out = _node(data, (a,), "sigmoid", None)
    out._backward = _bw if out._parents else None
    return out


def softmax(a, axis=-1):
    """Numerically stabilized softmax along ``axis``."""
    a = astensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / np.sum(e, axis=axis, keepdims=True)

    def _bw():
        g = out.grad
        s = out.data
        a._accum(s * (g - np.sum(g * s, axis=axis, keepdims=True)))

    out = _node(data, (a,), "softmax", None)
    out._backward = _bw if out._parents else None
    return out


def clip_min(a, floor: float):
    """max(a, floor) elementwise; gradient passes only where a > floor."""
    a = astensor(a)
    data = np.maximum(a.data, floor)

    def _bw():
        a._accum(out.grad * (a.data > floor))

    out = _node(data, (a,), "clip_min", None)
    out._backward = _bw if out._parents else None
    return out


def solve_vec(a, b):
    """Batched linear solve ``a^-1 b`` with b a (broadcastable) stack of vectors.

    ``a`` has shape (..., D, D) and ``b`` shape (..., D); batch dimensions
    broadcast against each other per numpy rules.
    """
    a, b = astensor(a), astensor(b)
    A, B = a.data, b.data
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ShapeError(f"solve_vec: matrix operand must be square, got {A.shape}")
    if B.ndim < 1 or B.shape[-1] != A.shape[-1]:
        raise ShapeError(f"solve_vec: incompatible shapes {A.shape} and {B.shape}")
    try:
        Ym = np.linalg.solve(A, B[..., None])
    except np.linalg.LinAlgError as exc:
        raise PositiveDefinitenessError(f"solve_vec: singular matrix ({exc})") from exc

    def _bw():
        Gm = out.grad[..., None]
        Gb = np.linalg.solve(np.swapaxes(A, -1, -2), Gm)
        if b.requires_grad:
            b._accum(_unbroadcast(Gb[..., 0], B.shape))
        if a.requires_grad:
            Ga = -np.matmul(Gb, np.swapaxes(Ym, -1, -2))
            a._accum(_unbroadcast(Ga, A.shape))

    out = _node(Ym[..., 0], (a, b), "solve_vec", None)
    out._backward = _bw if out._parents else None
    return out


def logdet(a):
    """log det of a (batch of) positive-definite matrices."""
    a = astensor(a)
    sign, ld = np.linalg.slogdet(a.data)
    if np.any(sign <= 0):
        raise PositiveDefinitenessError("logdet: matrix is not positive definite")

    def _bw():
        g = out.grad
        inv = np.linalg.inv(a.data)
        a._accum(np.asarray(g)[..., None, None] * np.swapaxes(inv, -1, -2))

    out = _node(ld, (a,), "logdet", None)
    out._backward = _bw if out._parents else None
    return out


def dropout(a, rate: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout: identity in eval mode, zero output at rate >= 1."""
    a = astensor(a)
    if not training or rate <= 0.0:
        return a
    if rate >= 1.0:
        return mul(a, np.zeros_like(a.data))
    mask = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return mul(a, mask)


class Adam:
    """Adam with bias correction; ``step`` consumes and clears gradients."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.epsilon = float(epsilon)
        self.step_count = 0
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.first_moment[i]
            v = self.second_moment[i]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1**t)
            v_hat = v / (1.0 - b2**t)
            p.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
        self.zero_grad()

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)

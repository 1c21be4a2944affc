"""Dense-tensor math with reverse-mode automatic differentiation.

The graph is a define-by-run tape: every operation records its parents and
a closure that maps the upstream gradient to per-parent gradients.
``Tensor.backward()`` walks the tape once in reverse topological order,
keeping intermediate gradients in a transient map and accumulating into
``.grad`` only on leaves, so repeated backward calls add up linearly.

Two precision modes are supported end to end: float32 for training and
float64 for gradient checking.  Operands of one operation must share a
dtype; there is no implicit promotion.

Supported primitives: matmul (with optional right-transpose), add
(same-shape or row-vector bias), sub, mul, scalar scale, relu, exp, log,
row_sum / row_mean, sum_all / mean_all, dot, l2_normalize.  Broadcasting
beyond bias-add is deliberately not supported.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    ContractError,
    DegenerateInputError,
    DtypeError,
    NumericError,
    ShapeError,
    StateError,
)

TRAIN_DTYPE = np.float32
CHECK_DTYPE = np.float64

# Overflow checks run when Python runs in debug mode (the default); with
# `python -O` the losses' own stability measures are trusted instead.
_CHECK_FINITE = __debug__


class Precision(Enum):
    """Numeric width of one computation, fixed end to end."""

    TRAIN32 = "train32"
    CHECK64 = "check64"

    @property
    def dtype(self):
        return TRAIN_DTYPE if self is Precision.TRAIN32 else CHECK_DTYPE


class Tensor:
    """N-d array node on the autodiff tape.

    Leaves are tensors created directly (parameters, inputs, constants);
    everything else records the operation that produced it.  ``grad`` is
    populated only on leaves with ``requires_grad=True``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(TRAIN_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents: tuple = ()
        self._backward = None
        self._op = "leaf"

    # -- introspection ----------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def __repr__(self):
        req = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, op={self._op}{req})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on non-scalar tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    # -- autodiff ---------------------------------------------------------
    def backward(self) -> None:
        """Reverse pass from this scalar output.

        Each call replays the tape once; leaf gradients accumulate, so two
        calls yield exactly twice the single-pass gradient.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar output, got shape {self.shape}"
            )
        if self.is_leaf and not self.requires_grad:
            raise StateError("backward() on a constant with no recorded graph")

        topo = _toposort(self)
        gmap = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = gmap.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                if node.requires_grad:
                    node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None:
                    continue
                prev = gmap.get(id(parent))
                gmap[id(parent)] = pg if prev is None else prev + pg

    def zero_grad(self) -> None:
        self.grad = None


def _toposort(root: Tensor) -> list:
    """Post-order DFS (iterative: loss graphs can be deep)."""
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _make(data: np.ndarray, parents: tuple, backward, op: str) -> Tensor:
    if _CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by op '{op}'")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    out._op = op
    if out.requires_grad:
        out._parents = parents
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _check_dtypes(op: str, *tensors: Tensor) -> None:
    dtypes = {t.dtype for t in tensors}
    if len(dtypes) > 1:
        raise DtypeError(f"op '{op}' mixes dtypes {sorted(map(str, dtypes))}")


# -- primitives -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """``a @ b`` (or ``a @ b.T``) for 2-d operands."""
    _check_dtypes("matmul", a, b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.shape} and {b.shape}")
    rhs = b.data.T if transpose_b else b.data
    if a.shape[1] != rhs.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} x {rhs.shape}")
    with np.errstate(all="ignore"):
        out = a.data @ rhs

    def backward(g):
        if transpose_b:
            ga = g @ b.data if a.requires_grad else None
            gb = g.T @ a.data if b.requires_grad else None
        else:
            ga = g @ b.data.T if a.requires_grad else None
            gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), backward, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; also accepts a (d,) bias added to each row of (n, d)."""
    _check_dtypes("add", a, b)
    if a.shape == b.shape:
        bias = False
    elif a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        bias = True
    else:
        raise ShapeError(f"add supports equal shapes or (n,d)+(d,), got {a.shape}+{b.shape}")
    out = a.data + b.data

    def backward(g):
        ga = g if a.requires_grad else None
        if not b.requires_grad:
            gb = None
        else:
            gb = g.sum(axis=0) if bias else g
        return ga, gb

    return _make(out, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_dtypes("sub", a, b)
    if a.shape != b.shape:
        raise ShapeError(f"sub requires equal shapes, got {a.shape} and {b.shape}")
    out = a.data - b.data

    def backward(g):
        return (g if a.requires_grad else None), (-g if b.requires_grad else None)

    return _make(out, (a, b), backward, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of equal-shape tensors."""
    _check_dtypes("mul", a, b)
    if a.shape != b.shape:
        raise ShapeError(f"mul requires equal shapes, got {a.shape} and {b.shape}")
    out = a.data * b.data

    def backward(g):
        ga = g * b.data if a.requires_grad else None
        gb = g * a.data if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), backward, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a Python scalar constant."""
    c = float(c)
    out = a.data * np.asarray(c, dtype=a.dtype)

    def backward(g):
        return (g * np.asarray(c, dtype=a.dtype),)

    return _make(out, (a,), backward, "scale")


def relu(a: Tensor) -> Tensor:
    """max(x, 0); subgradient at 0 is 0."""
    out = np.maximum(a.data, 0)

    def backward(g):
        return (g * (a.data > 0),)

    return _make(out, (a,), backward, "relu")


def exp(a: Tensor) -> Tensor:
    with np.errstate(all="ignore"):
        out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return _make(out, (a,), backward, "exp")


def log(a: Tensor) -> Tensor:
    with np.errstate(all="ignore"):
        out = np.log(a.data)

    def backward(g):
        return (g / a.data,)

    return _make(out, (a,), backward, "log")


def row_sum(a: Tensor) -> Tensor:
    """Sum over the last axis of a 2-d tensor: (n, d) -> (n,)."""
    if a.data.ndim != 2:
        raise ShapeError(f"row_sum expects a 2-d tensor, got {a.shape}")
    out = a.data.sum(axis=1)

    def backward(g):
        return (np.broadcast_to(g[:, None], a.shape).astype(a.dtype, copy=False),)

    return _make(out, (a,), backward, "row_sum")


def row_mean(a: Tensor) -> Tensor:
    """Mean over the last axis of a 2-d tensor: (n, d) -> (n,)."""
    if a.data.ndim != 2:
        raise ShapeError(f"row_mean expects a 2-d tensor, got {a.shape}")
    d = a.shape[1]
    out = a.data.mean(axis=1)

    def backward(g):
        full = np.broadcast_to(g[:, None], a.shape).astype(a.dtype, copy=False)
        return (full / d,)

    return _make(out, (a,), backward, "row_mean")


def sum_all(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum(), dtype=a.dtype)

    def backward(g):
        return (np.full_like(a.data, g),)

    return _make(out, (a,), backward, "sum_all")


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = np.asarray(a.data.mean(), dtype=a.dtype)

    def backward(g):
        return (np.full_like(a.data, g / n),)

    return _make(out, (a,), backward, "mean_all")


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product of two 1-d tensors."""
    _check_dtypes("dot", a, b)
    if a.data.ndim != 1 or b.data.ndim != 1 or a.shape != b.shape:
        raise ShapeError(f"dot expects equal-length 1-d tensors, got {a.shape}, {b.shape}")
    out = np.asarray(a.data @ b.data, dtype=a.dtype)

    def backward(g):
        ga = g * b.data if a.requires_grad else None
        gb = g * a.data if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), backward, "dot")


NORM_EPS = 1e-12


def l2_normalize(a: Tensor) -> Tensor:
    """Scale each row (last axis) to unit Euclidean norm.

    Backward applies the projected Jacobian (I - y y^T) / ||x|| row-wise.
    Rows with norm <= 1e-12 are rejected.
    """
    norms = np.linalg.norm(a.data, axis=-1, keepdims=True)
    if np.any(norms <= NORM_EPS):
        raise DegenerateInputError("l2_normalize: row norm below 1e-12")
    out = a.data / norms

    def backward(g):
        inner = np.sum(g * out, axis=-1, keepdims=True)
        return ((g - inner * out) / norms,)

    return _make(out, (a,), backward, "l2_normalize")


def row_max_detached(a: Tensor) -> np.ndarray:
    """Per-row maximum as a raw array, outside the tape (stability shifts)."""
    if a.data.ndim != 2:
        raise ShapeError(f"row_max_detached expects a 2-d tensor, got {a.shape}")
    return a.data.max(axis=1)


# -- optimization and verification ----------------------------------------


def sgd_step(params: list, lr: float) -> None:
    """In-place ``p -= lr * p.grad`` for every parameter, then clear grads."""
    for p in params:
        if p.grad is None:
            raise StateError("sgd_step: parameter has no gradient (backward not run?)")
    for p in params:
        p.data -= np.asarray(lr, dtype=p.dtype) * p.grad
        p.grad = None


@dataclass
class GradCheckReport:
    """Outcome of one analytic-vs-numeric gradient comparison."""

    max_rel_error: float
    tolerance: float
    per_input: list = field(default_factory=list)
    min_magnitude: float = float("inf")

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def grad_check(fn, inputs: list, tolerance: float = 1e-5, h: float = 1e-4) -> GradCheckReport:
    """Compare backward() gradients against central finite differences.

    ``fn(*inputs)`` must rebuild the graph on every call and return a scalar
    tensor.  All inputs must be float64 leaves with ``requires_grad=True``
    (gradient checking runs wide end to end).  The relative error for one
    entry is |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).

    ``min_magnitude`` is the smallest nonzero max(|g_a|, |g_n|) over all
    entries (inf when every entry is exactly zero).  Central differences
    carry a truncation error growing with h^2 times the local third
    derivative plus a roundoff term shrinking with 1/h, so entries whose
    magnitude sits near those floors cannot be certified at a tight relative
    tolerance no matter how accurate the analytic gradient is; callers can
    screen on this value.  Entries that are exactly zero on both sides are
    exempt: they agree identically and carry no such hazard.
    """
    for t in inputs:
        if t.dtype != CHECK_DTYPE:
            raise StateError("grad_check requires float64 (check64) inputs")
        if not t.requires_grad or not t.is_leaf:
            raise StateError("grad_check inputs must be requires_grad leaves")

    for t in inputs:
        t.grad = None
    out = fn(*inputs)
    if out.data.size != 1:
        raise ContractError("grad_check requires a scalar-output graph")
    if out.requires_grad:
        out.backward()
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs
    ]
    for t in inputs:
        t.grad = None

    max_err = 0.0
    min_mag = float("inf")
    per_input = []
    for t, ga in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        gn = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(fn(*inputs).data)
            flat[i] = orig - h
            f_minus = float(fn(*inputs).data)
            flat[i] = orig
            gn[i] = (f_plus - f_minus) / (2.0 * h)
        ga_flat = ga.reshape(-1)
        mag = np.maximum(np.abs(ga_flat), np.abs(gn))
        err = float(np.max(np.abs(ga_flat - gn) / np.maximum(mag, 1e-8))) if flat.size else 0.0
        nonzero = mag[mag > 0.0]
        if nonzero.size:
            min_mag = min(min_mag, float(nonzero.min()))
        per_input.append(err)
        max_err = max(max_err, err)
    return GradCheckReport(
        max_rel_error=max_err,
        tolerance=tolerance,
        per_input=per_input,
        min_magnitude=min_mag,
    )

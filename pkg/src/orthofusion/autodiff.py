"""Reverse-mode differentiable tensor kernel.

Double precision throughout. The computation graph is implicit: every
Tensor holds links to its parents and a closure that routes its output
gradient to them; ``backward`` materializes the reverse topological order
and accumulates gradients, visiting each node exactly once. Every forward
op verifies its output is finite.
"""

from __future__ import annotations

import numpy as np

from .linalg import jacobi_svd
from .validation import ConfigError, NumericError

SELU_ALPHA = 1.6732632423543772
SELU_SCALE = 1.0507009873554805

# Singular triplets with sigma <= RANK_EPS * sigma_max are excluded from the
# nuclear-norm subgradient U V^T.
RANK_EPS = 1e-9


class Tensor:
    """Node in the computation graph: a float64 array plus backward plumbing."""

    __slots__ = ("value", "grad", "parents", "name", "_backward")

    def __init__(self, value, parents=(), name=None, backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = tuple(parents)
        self.name = name
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise ConfigError(f"item() on non-scalar tensor of shape {self.value.shape}")
        return float(self.value.reshape(()))

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.value.shape}{tag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return elementwise_mul(self, other)

    def __neg__(self):
        return mul_const(self, -1.0)


def constant(value) -> Tensor:
    """Leaf tensor that participates in the graph but is not a parameter."""
    return Tensor(value)


def param(value, name: str) -> Tensor:
    """Named leaf tensor; optimizers update these in place."""
    return Tensor(value, name=name)


def _accumulate(node: Tensor, g: np.ndarray) -> None:
    if node.grad is None:
        node.grad = g.copy()
    else:
        node.grad += g


def _result(value, parents, name, backward) -> Tensor:
    value = np.asarray(value, dtype=np.float64)
    if not np.isfinite(value).all():
        raise NumericError(f"non-finite values produced by op '{name}'")
    return Tensor(value, parents=parents, name=name, backward=backward)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Seed d(loss)/d(loss) = 1 and sweep the graph in reverse topological order.

    Gradients of every node reachable from ``loss`` are reset first, so
    parameter tensors reused across steps never accumulate stale gradients.
    """
    if loss.value.size != 1:
        raise ConfigError(f"backward requires a scalar loss, got shape {loss.value.shape}")
    order = _toposort(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# ops


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = W x + b with x of shape (in, N); b broadcasts over columns."""
    if x.value.ndim != 2 or w.value.ndim != 2:
        raise ConfigError("linear expects 2-d x and W")
    out_dim, in_dim = w.value.shape
    if x.value.shape[0] != in_dim:
        raise ConfigError(
            f"linear shape mismatch: W is {w.value.shape}, x has {x.value.shape[0]} rows"
        )
    b_col = b.value.reshape(-1, 1)
    if b_col.shape[0] != out_dim:
        raise ConfigError(f"bias length {b_col.shape[0]} does not match W rows {out_dim}")
    value = w.value @ x.value + b_col

    def _back(g):
        _accumulate(w, g @ x.value.T)
        _accumulate(x, w.value.T @ g)
        _accumulate(b, g.sum(axis=1).reshape(b.value.shape))

    return _result(value, (x, w, b), "linear", _back)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ConfigError(f"matmul shape mismatch: {a.value.shape} @ {b.value.shape}")
    value = a.value @ b.value

    def _back(g):
        _accumulate(a, g @ b.value.T)
        _accumulate(b, a.value.T @ g)

    return _result(value, (a, b), "matmul", _back)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ConfigError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")

    def _back(g):
        _accumulate(a, g)
        _accumulate(b, g)

    return _result(a.value + b.value, (a, b), "add", _back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ConfigError(f"sub shape mismatch: {a.value.shape} vs {b.value.shape}")

    def _back(g):
        _accumulate(a, g)
        _accumulate(b, -g)

    return _result(a.value - b.value, (a, b), "sub", _back)


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product; backward da = g*b, db = g*a."""
    if a.value.shape != b.value.shape:
        raise ConfigError(f"elementwise_mul shape mismatch: {a.value.shape} vs {b.value.shape}")

    def _back(g):
        _accumulate(a, g * b.value)
        _accumulate(b, g * a.value)

    return _result(a.value * b.value, (a, b), "elementwise_mul", _back)


def add_const(x: Tensor, c) -> Tensor:
    """x + c for a constant (scalar or array broadcastable within x's shape)."""
    value = x.value + c
    if value.shape != x.value.shape:
        raise ConfigError("add_const constant may not broadcast beyond x's shape")

    def _back(g):
        _accumulate(x, g)

    return _result(value, (x,), "add_const", _back)


def mul_const(x: Tensor, c) -> Tensor:
    value = x.value * c
    if value.shape != x.value.shape:
        raise ConfigError("mul_const constant may not broadcast beyond x's shape")

    def _back(g):
        _accumulate(x, g * c)

    return _result(value, (x,), "mul_const", _back)


def maximum_const(x: Tensor, c: float) -> Tensor:
    """Elementwise max(x, c); gradient passes where x >= c, vanishes below."""
    mask = x.value >= c

    def _back(g):
        _accumulate(x, g * mask)

    return _result(np.maximum(x.value, c), (x,), "maximum_const", _back)


def pow_const(x: Tensor, p: float) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        value = x.value**p

    def _back(g):
        _accumulate(x, g * p * x.value ** (p - 1.0))

    return _result(value, (x,), "pow_const", _back)


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        value = np.exp(x.value)

    def _back(g):
        _accumulate(x, g * value)

    return _result(value, (x,), "exp", _back)


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log(x.value)

    def _back(g):
        _accumulate(x, g / x.value)

    return _result(value, (x,), "log", _back)


def sigmoid(x: Tensor) -> Tensor:
    v = x.value
    value = np.empty_like(v)
    pos = v >= 0
    value[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ez = np.exp(v[~pos])
    value[~pos] = ez / (1.0 + ez)

    def _back(g):
        _accumulate(x, g * value * (1.0 - value))

    return _result(value, (x,), "sigmoid", _back)


def relu(x: Tensor) -> Tensor:
    mask = x.value > 0

    def _back(g):
        _accumulate(x, g * mask)

    return _result(np.maximum(x.value, 0.0), (x,), "relu", _back)


def selu(x: Tensor) -> Tensor:
    """Scaled exponential linear unit with the standard self-normalizing constants."""
    v = x.value
    neg = SELU_ALPHA * np.expm1(np.minimum(v, 0.0))
    value = SELU_SCALE * np.where(v > 0, v, neg)

    def _back(g):
        slope = np.where(v > 0, SELU_SCALE, SELU_SCALE * (neg + SELU_ALPHA))
        _accumulate(x, g * slope)

    return _result(value, (x,), "selu", _back)


def activation(x: Tensor, kind: str) -> Tensor:
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "relu":
        return relu(x)
    if kind == "selu":
        return selu(x)
    raise ConfigError(f"unknown activation kind {kind!r}")


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Horizontal concatenation of equal-row tensors; backward splits the gradient."""
    if len(parts) == 0:
        raise ConfigError("concat_cols requires at least one tensor")
    if len(parts) == 1:
        return parts[0]
    rows = parts[0].value.shape[0]
    for t in parts:
        if t.value.ndim != 2 or t.value.shape[0] != rows:
            raise ConfigError("concat_cols requires 2-d tensors with equal row counts")
    widths = [t.value.shape[1] for t in parts]
    offsets = np.cumsum([0] + widths)

    def _back(g):
        for t, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(t, g[:, lo:hi])

    value = np.concatenate([t.value for t in parts], axis=1)
    return _result(value, tuple(parts), "concat_cols", _back)


def concat_rows(parts: list[Tensor]) -> Tensor:
    """Vertical concatenation of equal-column tensors."""
    if len(parts) == 0:
        raise ConfigError("concat_rows requires at least one tensor")
    if len(parts) == 1:
        return parts[0]
    cols = parts[0].value.shape[1]
    for t in parts:
        if t.value.ndim != 2 or t.value.shape[1] != cols:
            raise ConfigError("concat_rows requires 2-d tensors with equal column counts")
    heights = [t.value.shape[0] for t in parts]
    offsets = np.cumsum([0] + heights)

    def _back(g):
        for t, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _accumulate(t, g[lo:hi, :])

    value = np.concatenate([t.value for t in parts], axis=0)
    return _result(value, tuple(parts), "concat_rows", _back)


def kron_cols(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise Kronecker product: out[i*q + j, n] = a[i, n] * b[j, n].

    The first factor's index varies slowest, so folding left to right over a
    modality list keeps modality 1 slowest in the flattened fusion tensor.
    """
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[1]:
        raise ConfigError(f"kron_cols shape mismatch: {a.value.shape} vs {b.value.shape}")
    p, n = a.value.shape
    q = b.value.shape[0]
    value = np.einsum("in,jn->ijn", a.value, b.value).reshape(p * q, n)

    def _back(g):
        g3 = g.reshape(p, q, n)
        _accumulate(a, np.einsum("ijn,jn->in", g3, b.value))
        _accumulate(b, np.einsum("ijn,in->jn", g3, a.value))

    return _result(value, (a, b), "kron_cols", _back)


def bilinear_forms(h: Tensor, weights: Tensor, ctx: Tensor) -> Tensor:
    """Batched bilinear forms: out[k, n] = h[:, n]^T @ weights[:, k, :] @ ctx[:, n].

    h is (l1, N), weights is (l1, K, J), ctx is (J, N); output is (K, N).
    """
    if h.value.ndim != 2 or ctx.value.ndim != 2 or weights.value.ndim != 3:
        raise ConfigError("bilinear_forms expects h (2-d), weights (3-d), ctx (2-d)")
    l1, n = h.value.shape
    wl1, k, j = weights.value.shape
    if wl1 != l1 or ctx.value.shape != (j, n):
        raise ConfigError(
            f"bilinear_forms shape mismatch: h {h.value.shape}, weights {weights.value.shape}, "
            f"ctx {ctx.value.shape}"
        )
    # (l1, K, J) x (J, N) -> (l1, K, N), then contract l1 against h
    wc = np.tensordot(weights.value, ctx.value, axes=([2], [0]))
    value = np.einsum("in,ikn->kn", h.value, wc)

    def _back(g):
        _accumulate(h, np.einsum("kn,ikn->in", g, wc))
        hg = np.einsum("in,kn->ikn", h.value, g)
        _accumulate(weights, np.tensordot(hg, ctx.value, axes=([2], [1])))
        _accumulate(ctx, np.tensordot(weights.value, hg, axes=([0, 1], [0, 1])))

    return _result(value, (h, weights, ctx), "bilinear_forms", _back)


def nuclear_norm(a: Tensor, tol: float = 1e-14, max_sweeps: int = 60) -> Tensor:
    """Sum of singular values as a (1, 1) tensor.

    The Jacobi SVD factors are cached at forward time; backward applies the
    subgradient U_r V_r^T over triplets with sigma > RANK_EPS * sigma_max
    (a subgradient choice at repeated or vanishing singular values).
    """
    if a.value.ndim != 2:
        raise ConfigError("nuclear_norm expects a 2-d tensor")
    u, s, v = jacobi_svd(a.value, tol=tol, max_sweeps=max_sweeps)
    keep = s > RANK_EPS * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    value = np.array([[s.sum()]])

    def _back(g):
        _accumulate(a, g[0, 0] * (u[:, keep] @ v[:, keep].T))

    return _result(value, (a,), "nuclear_norm", _back)


def sum_all(x: Tensor) -> Tensor:
    """Sum of all entries as a (1, 1) tensor."""
    value = np.array([[x.value.sum()]])

    def _back(g):
        _accumulate(x, np.full_like(x.value, g[0, 0]))

    return _result(value, (x,), "sum_all", _back)


# ---------------------------------------------------------------------------
# parameters and optimization


def uniform_fan_in(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """Uniform fan-in initialization: U(-1/sqrt(in), 1/sqrt(in))."""
    bound = 1.0 / np.sqrt(in_dim)
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


class Adam:
    """Adaptive-moment optimizer over a dict of named parameter tensors.

    Keeps a per-parameter step counter so a caller can update a subset
    (parameter freezing) while bias correction stays consistent for each
    parameter.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not params:
            raise ConfigError("Adam requires at least one parameter")
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.state = {
            name: {"m": np.zeros_like(p.value), "v": np.zeros_like(p.value), "t": 0}
            for name, p in self.params.items()
        }

    def step(self, lr: float | None = None, names=None) -> None:
        """Apply one update to the named parameters (all by default).

        Parameters with no gradient (never touched by backward) are treated
        as having zero gradient.
        """
        lr = self.lr if lr is None else float(lr)
        for name in self.params if names is None else names:
            p = self.params[name]
            g = p.grad if p.grad is not None else np.zeros_like(p.value)
            if not np.isfinite(g).all():
                raise NumericError(f"non-finite gradient for parameter '{name}'")
            st = self.state[name]
            st["t"] += 1
            st["m"] = self.beta1 * st["m"] + (1.0 - self.beta1) * g
            st["v"] = self.beta2 * st["v"] + (1.0 - self.beta2) * g * g
            m_hat = st["m"] / (1.0 - self.beta1 ** st["t"])
            v_hat = st["v"] / (1.0 - self.beta2 ** st["t"])
            p.value = p.value - lr * m_hat / (np.sqrt(v_hat) + self.eps)

"""Forward-mode derivative jets, truncated at order 3, batched over sample points.

A `Jet` holds the value and the first three derivative tensors of a scalar
function evaluated at a batch of m points in n coordinates:

    value (m,)   grad (m,n)   hess (m,n,n)   third (m,n,n,n)

Arithmetic implements the truncated Taylor (Leibniz / Faa di Bruno) rules
exactly, so derivatives of parsed expressions are exact to roundoff rather
than finite-difference approximations.  Tensors above the requested order
are simply absent (None).
"""

from __future__ import annotations

import numpy as np

from . import expr as ex
from .expr import DomainError, Expression

Array = np.ndarray

MAX_ORDER = 3


class Jet:
    __slots__ = ("order", "m", "n", "value", "grad", "hess", "third")

    def __init__(self, order: int, value: Array, grad=None, hess=None, third=None):
        self.order = order
        self.value = value
        self.m = value.shape[0]
        self.n = grad.shape[1] if grad is not None else 0
        self.grad = grad
        self.hess = hess
        self.third = third

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(c, m: int, n: int, order: int) -> "Jet":
        value = np.full(m, float(c))
        g = np.zeros((m, n)) if order >= 1 else None
        h = np.zeros((m, n, n)) if order >= 2 else None
        t = np.zeros((m, n, n, n)) if order >= 3 else None
        return Jet(order, value, g, h, t)

    @staticmethod
    def coordinate(index: int, pts: Array, order: int) -> "Jet":
        m, n = pts.shape
        value = pts[:, index].astype(float).copy()
        g = h = t = None
        if order >= 1:
            g = np.zeros((m, n))
            g[:, index] = 1.0
        if order >= 2:
            h = np.zeros((m, n, n))
        if order >= 3:
            t = np.zeros((m, n, n, n))
        return Jet(order, value, g, h, t)

    @staticmethod
    def from_parts(order: int, value: Array, grad=None, hess=None, third=None) -> "Jet":
        return Jet(order, np.asarray(value, float), grad, hess, third)

    # -- ring operations ----------------------------------------------------

    def __neg__(self) -> "Jet":
        o = self.order
        return Jet(
            o,
            -self.value,
            -self.grad if o >= 1 else None,
            -self.hess if o >= 2 else None,
            -self.third if o >= 3 else None,
        )

    def __add__(self, other: "Jet") -> "Jet":
        o = self.order
        return Jet(
            o,
            self.value + other.value,
            self.grad + other.grad if o >= 1 else None,
            self.hess + other.hess if o >= 2 else None,
            self.third + other.third if o >= 3 else None,
        )

    def __sub__(self, other: "Jet") -> "Jet":
        o = self.order
        return Jet(
            o,
            self.value - other.value,
            self.grad - other.grad if o >= 1 else None,
            self.hess - other.hess if o >= 2 else None,
            self.third - other.third if o >= 3 else None,
        )

    def __mul__(self, other: "Jet") -> "Jet":
        o = self.order
        a, b = self, other
        value = a.value * b.value
        g = h = t = None
        if o >= 1:
            g = a.grad * b.value[:, None] + b.grad * a.value[:, None]
        if o >= 2:
            cross = np.einsum("mi,mj->mij", a.grad, b.grad)
            h = (
                a.hess * b.value[:, None, None]
                + b.hess * a.value[:, None, None]
                + cross
                + cross.transpose(0, 2, 1)
            )
        if o >= 3:
            t = a.third * b.value[:, None, None, None] + b.third * a.value[:, None, None, None]
            hb = np.einsum("mij,mk->mijk", a.hess, b.grad)
            t = t + hb + hb.transpose(0, 1, 3, 2) + hb.transpose(0, 3, 1, 2)
            ha = np.einsum("mij,mk->mijk", b.hess, a.grad)
            t = t + ha + ha.transpose(0, 1, 3, 2) + ha.transpose(0, 3, 1, 2)
        return Jet(o, value, g, h, t)

    def __truediv__(self, other: "Jet") -> "Jet":
        return self * other.reciprocal()

    # -- univariate composition (Faa di Bruno through order 3) ---------------

    def compose(self, f0: Array, f1=None, f2=None, f3=None) -> "Jet":
        o = self.order
        g = h = t = None
        if o >= 1:
            g = f1[:, None] * self.grad
        if o >= 2:
            gg = np.einsum("mi,mj->mij", self.grad, self.grad)
            h = f2[:, None, None] * gg + f1[:, None, None] * self.hess
        if o >= 3:
            ggg = np.einsum("mi,mj,mk->mijk", self.grad, self.grad, self.grad)
            hg = np.einsum("mij,mk->mijk", self.hess, self.grad)
            sym3 = hg + hg.transpose(0, 1, 3, 2) + hg.transpose(0, 3, 1, 2)
            t = (
                f3[:, None, None, None] * ggg
                + f2[:, None, None, None] * sym3
                + f1[:, None, None, None] * self.third
            )
        return Jet(o, f0, g, h, t)

    def reciprocal(self) -> "Jet":
        v = self.value
        if np.any(v == 0.0):
            raise DomainError("division by zero")
        inv = 1.0 / v
        return self.compose(inv, -(inv**2), 2.0 * inv**3, -6.0 * inv**4)

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.compose(e, e, e, e)

    def log(self) -> "Jet":
        v = self.value
        if np.any(v <= 0.0):
            raise DomainError(f"log of non-positive value (min {v.min():g})")
        inv = 1.0 / v
        return self.compose(np.log(v), inv, -(inv**2), 2.0 * inv**3)

    def sqrt(self) -> "Jet":
        v = self.value
        if np.any(v <= 0.0):
            raise DomainError(f"sqrt of non-positive value (min {v.min():g})")
        r = np.sqrt(v)
        return self.compose(r, 0.5 / r, -0.25 / (r * v), 0.375 / (r * v * v))

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        return self.compose(s, c, -s, -c)

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        return self.compose(c, -s, -c, s)

    def powi(self, k: int) -> "Jet":
        if k < 0:
            return self.powi(-k).reciprocal()
        out = Jet.constant(1.0, self.m, self.n, self.order)
        for _ in range(k):
            out = out * self
        return out

    def powf(self, r: float) -> "Jet":
        v = self.value
        if np.any(v <= 0.0):
            raise DomainError(f"power {r:g} of non-positive base (min {v.min():g})")
        f0 = v**r
        f1 = r * v ** (r - 1)
        f2 = r * (r - 1) * v ** (r - 2)
        f3 = r * (r - 1) * (r - 2) * v ** (r - 3)
        return self.compose(f0, f1, f2, f3)


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

def evaluate(tree: Expression, pts: Array, order: int) -> Jet:
    """Evaluate an expression tree at a batch of points, with derivatives."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be between 0 and {MAX_ORDER}, got {order}")
    pts = np.asarray(pts, float)
    if pts.ndim != 2:
        raise ValueError("pts must have shape (m, n)")
    return _eval(tree, pts, order)


def _eval(tree: Expression, pts: Array, order: int) -> Jet:
    m, n = pts.shape
    if isinstance(tree, ex.Num):
        return Jet.constant(tree.value, m, n, order)
    if isinstance(tree, ex.Var):
        if tree.index >= n:
            raise VariableDimensionError(tree.index, n)
        return Jet.coordinate(tree.index, pts, order)
    if isinstance(tree, ex.Neg):
        return -_eval(tree.arg, pts, order)
    if isinstance(tree, ex.Add):
        return _eval(tree.left, pts, order) + _eval(tree.right, pts, order)
    if isinstance(tree, ex.Sub):
        return _eval(tree.left, pts, order) - _eval(tree.right, pts, order)
    if isinstance(tree, ex.Mul):
        return _eval(tree.left, pts, order) * _eval(tree.right, pts, order)
    if isinstance(tree, ex.Div):
        return _eval(tree.left, pts, order) / _eval(tree.right, pts, order)
    if isinstance(tree, ex.Pow):
        k = ex.constant_value(tree.exponent)
        base = _eval(tree.base, pts, order)
        if k is not None:
            if k == round(k):
                return base.powi(int(round(k)))
            return base.powf(k)
        exponent = _eval(tree.exponent, pts, order)
        return (exponent * base.log()).exp()
    if isinstance(tree, ex.Call):
        u = _eval(tree.arg, pts, order)
        return getattr(u, tree.func)()
    raise TypeError(f"not an expression node: {tree!r}")


class VariableDimensionError(ex.ExprError):
    def __init__(self, index: int, n: int):
        super().__init__(f"expression references x{index} but points have dimension {n}")


# ---------------------------------------------------------------------------
# Single-point convenience wrapper
# ---------------------------------------------------------------------------

class Jet3:
    """Order-3 jet at a single point: value, grad (n,), hess (n,n), third (n,n,n)."""

    __slots__ = ("value", "grad", "hess", "third")

    def __init__(self, value: float, grad=None, hess=None, third=None):
        self.value = value
        self.grad = grad
        self.hess = hess
        self.third = third

    def __repr__(self):
        return f"Jet3(value={self.value!r})"


def eval_jet(tree: Expression, p, order: int = 3) -> Jet3:
    """Evaluate at a single point p, returning a Jet3 truncated to ``order``."""
    p = np.asarray(p, float).reshape(1, -1)
    jet = evaluate(tree, p, order)
    return Jet3(
        float(jet.value[0]),
        None if jet.grad is None else jet.grad[0].copy(),
        None if jet.hess is None else jet.hess[0].copy(),
        None if jet.third is None else jet.third[0].copy(),
    )

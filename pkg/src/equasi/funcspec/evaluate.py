"""Vectorised evaluation of expression trees: plain values and forward-mode duals.

Both compilers turn a tree into a closure over an ``(N, n_inputs)`` array so that
a whole sample sweep is evaluated in one pass.  The dual compiler carries a
gradient block of shape ``(N, n_inputs)`` and a boolean kink mask; a point is
marked as a kink when ``abs``, ``min`` or ``max`` sit on a tie there, or when a
derivative rule is singular (``sqrt`` at 0, fractional powers at 0).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from equasi.funcspec.expr import BinOp, Call, ExpressionTree, Neg, Node, Num, Var

TIE_TOL = 1e-12

ValueFn = Callable[[np.ndarray], np.ndarray]
DualFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]

_UNARY = {
    "abs": np.abs,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
}


def _is_constant(node: Node) -> bool:
    if isinstance(node, Num):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, Neg):
        return _is_constant(node.arg)
    if isinstance(node, BinOp):
        return _is_constant(node.left) and _is_constant(node.right)
    return all(_is_constant(a) for a in node.args)


def _compile(node: Node) -> ValueFn:
    if isinstance(node, Num):
        v = node.value
        return lambda X: np.full(X.shape[0], v)
    if isinstance(node, Var):
        k = node.index
        return lambda X: X[:, k]
    if isinstance(node, Neg):
        a = _compile(node.arg)
        return lambda X: -a(X)
    if isinstance(node, BinOp):
        a, b = _compile(node.left), _compile(node.right)
        op = node.op
        if op == "+":
            return lambda X: a(X) + b(X)
        if op == "-":
            return lambda X: a(X) - b(X)
        if op == "*":
            return lambda X: a(X) * b(X)
        if op == "/":
            return lambda X: a(X) / b(X)
        return lambda X: np.power(a(X), b(X))
    args = [_compile(arg) for arg in node.args]
    if node.name == "min":
        return lambda X: np.minimum.reduce([f(X) for f in args])
    if node.name == "max":
        return lambda X: np.maximum.reduce([f(X) for f in args])
    fn = _UNARY[node.name]
    a = args[0]
    return lambda X: fn(a(X))


def compile_values(tree: ExpressionTree) -> ValueFn:
    inner = _compile(tree.root)

    def run(X: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            return np.asarray(inner(X), dtype=float)

    return run


def _compile_dual(node: Node, n: int) -> DualFn:
    if isinstance(node, Num):
        v = node.value

        def num(X):
            N = X.shape[0]
            return np.full(N, v), np.zeros((N, n)), np.zeros(N, dtype=bool)

        return num
    if isinstance(node, Var):
        k = node.index

        def var(X):
            N = X.shape[0]
            g = np.zeros((N, n))
            g[:, k] = 1.0
            return X[:, k].astype(float), g, np.zeros(N, dtype=bool)

        return var
    if isinstance(node, Neg):
        a = _compile_dual(node.arg, n)

        def neg(X):
            v, g, k = a(X)
            return -v, -g, k

        return neg
    if isinstance(node, BinOp):
        return _dual_binop(node, n)
    return _dual_call(node, n)


def _dual_binop(node: BinOp, n: int) -> DualFn:
    a, b = _compile_dual(node.left, n), _compile_dual(node.right, n)
    op = node.op
    const_exponent = op == "^" and _is_constant(node.right)

    def binop(X):
        va, ga, ka = a(X)
        vb, gb, kb = b(X)
        kink = ka | kb
        if op == "+":
            return va + vb, ga + gb, kink
        if op == "-":
            return va - vb, ga - gb, kink
        if op == "*":
            return va * vb, ga * vb[:, None] + gb * va[:, None], kink
        if op == "/":
            v = va / vb
            return v, (ga - gb * v[:, None]) / vb[:, None], kink
        v = np.power(va, vb)
        if const_exponent:
            d = vb * np.power(va, vb - 1.0)
            singular = ~np.isfinite(d) & np.isfinite(v)
            d = np.where(singular, 0.0, d)
            return v, ga * d[:, None], kink | singular
        safe = va > 0
        loga = np.log(np.where(safe, va, 1.0))
        g = v[:, None] * (gb * loga[:, None] + ga * (vb / np.where(safe, va, 1.0))[:, None])
        return v, np.where(safe[:, None], g, 0.0), kink | ~safe

    return binop


def _dual_call(node: Call, n: int) -> DualFn:
    args = [_compile_dual(arg, n) for arg in node.args]
    name = node.name

    if name in ("min", "max"):
        pick = np.less if name == "min" else np.greater

        def minmax(X):
            v, g, k = args[0](X)
            for f in args[1:]:
                vb, gb, kb = f(X)
                tie = np.abs(v - vb) <= TIE_TOL * (1.0 + np.abs(v) + np.abs(vb))
                tie &= np.any(np.abs(g - gb) > TIE_TOL, axis=1)
                take_b = pick(vb, v)
                k = np.where(take_b, kb, k) | tie
                v = np.where(take_b, vb, v)
                g = np.where(take_b[:, None], gb, g)
            return v, g, k

        return minmax

    a = args[0]

    def unary(X):
        va, ga, ka = a(X)
        if name == "abs":
            s = np.sign(va)
            tie = (np.abs(va) <= TIE_TOL) & np.any(ga != 0.0, axis=1)
            return np.abs(va), ga * s[:, None], ka | tie
        if name == "sqrt":
            v = np.sqrt(va)
            singular = (va == 0.0) & np.any(ga != 0.0, axis=1)
            d = np.where(va > 0, 0.5 / np.where(va > 0, v, 1.0), 0.0)
            return v, ga * d[:, None], ka | singular
        if name == "sin":
            return np.sin(va), ga * np.cos(va)[:, None], ka
        if name == "cos":
            return np.cos(va), -ga * np.sin(va)[:, None], ka
        if name == "exp":
            v = np.exp(va)
            return v, ga * v[:, None], ka
        return np.log(va), ga / va[:, None], ka

    return unary


def compile_dual(tree: ExpressionTree) -> DualFn:
    inner = _compile_dual(tree.root, tree.n_inputs)

    def run(X: np.ndarray):
        with np.errstate(all="ignore"):
            return inner(np.asarray(X, dtype=float))

    return run

"""Independent brute-force oracles: plain numpy grids, no toolkit code beyond evaluation."""

from __future__ import annotations

import numpy as np

T_GRID = np.linspace(1e-6, 1 - 1e-6, 100001)


def brute_quotient_sup(f, x: float, y: float, quasi: bool, ts: np.ndarray = T_GRID) -> float:
    """``max{0, max_t quotient}`` on a dense t-grid for 1D ``f``."""
    z = ts * x + (1 - ts) * y
    fz = f.values(z[:, None])
    fx, fy = f([x]), f([y])
    base = max(fx, fy) if quasi else ts * fx + (1 - ts) * fy
    return float(max(0.0, np.max((fz - base) / (ts * (1 - ts)))))


def brute_triple_violation(f, e, lo: float, hi: float, n: int = 201, quasi: bool = True):
    """Worst excess of the (quasi)convexity-with-error inequality over a uniform pair/t grid."""
    xs = np.linspace(lo, hi, n)
    ts = np.linspace(0.01, 0.99, 99)
    X, Y, T = np.meshgrid(xs, xs, ts, indexing="ij")
    X, Y, T = X.ravel(), Y.ravel(), T.ravel()
    fx, fy = f.values(X[:, None]), f.values(Y[:, None])
    fz = f.values((T * X + (1 - T) * Y)[:, None])
    base = np.maximum(fx, fy) if quasi else T * fx + (1 - T) * fy
    excess = fz - base - T * (1 - T) * e.values(X[:, None], Y[:, None])
    k = int(np.argmax(excess))
    return float(excess[k]), (float(X[k]), float(Y[k]), float(T[k]))


def brute_min_1d(f, lo: float, hi: float, n: int = 200001, mask=None):
    xs = np.linspace(lo, hi, n)
    v = f.values(xs[:, None])
    if mask is not None:
        v = np.where(mask(xs), v, np.inf)
    k = int(np.argmin(v))
    return float(xs[k]), float(v[k])


def brute_f_q_inf_1d(f, u: float, lo: float = -20.0, hi: float = 20.0, nx: int = 4001, nt: int = 400) -> float:
    """``sup_x sup_t [f(x + t u) - f(x)] / t`` over an x-grid and a geometric t-grid."""
    xs = np.linspace(lo, hi, nx)
    ts = np.geomspace(1e-6, 1e3, nt)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    q = (f.values((X + T * u).ravel()[:, None]) - f.values(X.ravel()[:, None])) / T.ravel()
    return float(np.max(q[np.isfinite(q)]))


def brute_f_inf_1d(f, u: float, t: float = 1e11) -> float:
    """``f(t u) / t`` at a single large ``t``: the recession slope for functions that are eventually affine."""
    return float(f([t * u]) / t)

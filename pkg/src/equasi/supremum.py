"""Shared supremum estimator: coarse grid, golden-section refinement, edge probing.

A difference quotient that blows up at an end of its parameter interval is
invisible to a finite grid, so after refining the best grid cell both ends are
probed at geometrically shrinking distances.  Three consecutive probe levels that
each grow by ``cfg.growth`` (or any value above ``cfg.cap``) count as divergence.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from equasi.certificate import SupConfig, SupEstimate

Quotient = Callable[[np.ndarray], np.ndarray]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _clean(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.where(np.isnan(v), -math.inf, v)


def golden_max(fun: Callable[[float], float], a: float, b: float, iters: int) -> tuple[float, float]:
    """Maximise a scalar function on ``[a, b]`` by golden-section search."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def grows(seq: list[float], growth: float, levels: int) -> bool:
    """True when ``levels`` consecutive entries each exceed ``growth`` times the previous one."""
    run = 0
    for prev, cur in zip(seq, seq[1:]):
        if prev > 0 and cur >= growth * prev:
            run += 1
            if run >= levels:
                return True
        else:
            run = 0
    return False


def _probe(q: Quotient, start: float, cfg: SupConfig, outward: bool = False) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(cfg.edge_levels + 1, dtype=float)
    factor = (1.0 / cfg.edge_shrink) if outward else cfg.edge_shrink
    params = start * factor**k
    return params, _clean(q(params))


def estimate_sup(q: Quotient, cfg: SupConfig | None = None, q_flip: Quotient | None = None) -> SupEstimate:
    """Lower estimate of ``sup_{t in (0,1)} q(t)``.

    ``q_flip(s)`` must equal ``q(1 - s)``; supplying it lets the upper end be
    probed without the cancellation in ``1 - s``.
    """
    cfg = cfg or SupConfig()
    if q_flip is None:
        q_flip = lambda s: q(1.0 - s)  # noqa: E731
    grid = np.linspace(cfg.t_min, 1.0 - cfg.t_min, cfg.grid)
    vals = _clean(q(grid))
    i = int(np.argmax(vals))
    best, arg = float(vals[i]), float(grid[i])
    trace = [(0, best)]

    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    tg, vg = golden_max(lambda t: float(_clean(q(np.array([t])))[0]), a, b, cfg.golden_iters)
    if vg > best:
        best, arg = vg, tg
    trace.append((1, best))

    diverged = False
    edges = {}
    for side, fn in (("lower", q), ("upper", q_flip)):
        params, pv = _probe(fn, cfg.t_min, cfg)
        edges[side] = pv.tolist()
        j = int(np.argmax(pv))
        if pv[j] > best:
            best = float(pv[j])
            arg = float(params[j]) if side == "lower" else float(1.0 - params[j])
        if grows(pv.tolist(), cfg.growth, cfg.growth_levels) or np.any(pv > cfg.cap):
            diverged = True
            arg = float(params[-1]) if side == "lower" else float(1.0 - params[-1])
        trace.append((len(trace), best))
    if best > cfg.cap:
        diverged = True
    return SupEstimate(best, arg, diverged, trace, {"edges": edges})


def estimate_sup_halfline(
    q: Quotient, t_lo: float, t_hi: float, cfg: SupConfig | None = None, grid: int | None = None
) -> SupEstimate:
    """Lower estimate of ``sup_{t in (0, t_hi]} q(t)`` on a log-uniform grid from ``t_lo``.

    Only the ``t -> 0`` end is probed for divergence; the caller bounds ``t_hi``.
    """
    cfg = cfg or SupConfig()
    n = grid or cfg.grid
    s = np.linspace(math.log(t_lo), math.log(t_hi), n)
    ts = np.exp(s)
    vals = _clean(q(ts))
    i = int(np.argmax(vals))
    best, arg = float(vals[i]), float(ts[i])
    trace = [(0, best)]
    if math.isinf(best) and best > 0:
        return SupEstimate(best, arg, True, trace)

    a, b = s[max(i - 1, 0)], s[min(i + 1, n - 1)]
    sg, vg = golden_max(lambda v: float(_clean(q(np.array([math.exp(v)])))[0]), a, b, cfg.golden_iters)
    if vg > best:
        best, arg = vg, math.exp(sg)
    trace.append((1, best))

    params, pv = _probe(q, t_lo, cfg)
    j = int(np.argmax(pv))
    if pv[j] > best:
        best, arg = float(pv[j]), float(params[j])
    trace.append((2, best))
    diverged = bool(grows(pv.tolist(), cfg.growth, cfg.growth_levels) or best > cfg.cap)
    return SupEstimate(best, arg, diverged, trace)

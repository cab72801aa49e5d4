"""Deterministic point sets: scrambled Sobol samples, lattices and sphere directions."""

from __future__ import annotations

import os
import warnings

import numpy as np
from scipy.stats import qmc
from scipy.special import ndtri


def worker_count() -> int:
    """Worker cap from ``EQUASI_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("EQUASI_THREADS", "1")))
    except ValueError:
        return 1


def sobol(n: int, dim: int, seed: int) -> np.ndarray:
    """``n`` scrambled Sobol points in ``[0, 1)^dim``."""
    engine = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(n)


def in_bounds(U: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return lo + U * (hi - lo)


def lattice_size(dim: int) -> int:
    return {1: 65, 2: 9, 3: 5}.get(dim, 3)


def lattice(lo: np.ndarray, hi: np.ndarray, per_dim: int | None = None) -> np.ndarray:
    """Tensor grid including the box corners and (for odd sizes) its centre."""
    dim = len(lo)
    m = per_dim or lattice_size(dim)
    axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in mesh])


def all_pairs(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i, j = np.triu_indices(len(P), k=1)
    return P[i], P[j]


def sphere_directions(dim: int, seed: int = 0, n2d: int = 256, nnd: int = 1024) -> np.ndarray:
    """Unit directions: ``±1`` in 1D, equi-angular in 2D, Sobol-mapped Gaussians beyond."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        th = 2 * np.pi * np.arange(n2d) / n2d
        return np.column_stack([np.cos(th), np.sin(th)])
    U = sobol(nnd, dim, seed)
    Z = ndtri(np.clip(U, 1e-12, 1 - 1e-12))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("direction must be nonzero")
    return v / nrm

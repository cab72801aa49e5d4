"""Scalar and vector functions over boxes, with effective-domain semantics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from equasi.errors import DomainError, NotDifferentiable
from equasi.funcspec.evaluate import compile_dual, compile_values
from equasi.funcspec.expr import ExpressionTree, parse_expression, serialize

HUGE = 1e12
PLUS_INFINITY = math.inf

# Gradient routes must agree to this relative tolerance.
GRAD_RTOL = 1e-5


def ext_real(value: float) -> float:
    """Validate an extended-real value: finite or ``+inf``; ``-inf`` and NaN are rejected."""
    v = float(value)
    if math.isnan(v) or v == -math.inf:
        raise ValueError(f"{v} is not a proper extended-real value")
    return v


def _clip_bound(v: float) -> float:
    return float(min(max(v, -HUGE), HUGE))


@dataclass(frozen=True)
class Box:
    """Per-coordinate closed (optionally open) intervals; infinite edges clip to ``±HUGE``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    open_lower: tuple[bool, ...] = ()
    open_upper: tuple[bool, ...] = ()

    def __post_init__(self):
        lo = tuple(_clip_bound(v) for v in self.lower)
        hi = tuple(_clip_bound(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("box bounds must be nonempty and of equal length")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lower {lo} exceeds upper {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        for name in ("open_lower", "open_upper"):
            flags = getattr(self, name)
            if not flags:
                flags = (False,) * len(lo)
            object.__setattr__(self, name, tuple(bool(f) for f in flags))

    @classmethod
    def real(cls, n: int) -> "Box":
        return cls((-math.inf,) * n, (math.inf,) * n)

    @classmethod
    def cube(cls, n: int, radius: float, open: bool = False) -> "Box":
        return cls((-radius,) * n, (radius,) * n, (open,) * n, (open,) * n)

    @classmethod
    def interval(cls, lo: float, hi: float, open: bool = False) -> "Box":
        return cls((lo,), (hi,), (open,), (open,))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.upper)

    @property
    def unbounded_below(self) -> np.ndarray:
        return self.lo <= -HUGE

    @property
    def unbounded_above(self) -> np.ndarray:
        return self.hi >= HUGE

    @property
    def is_bounded(self) -> bool:
        return not (self.unbounded_below.any() or self.unbounded_above.any())

    @property
    def is_open(self) -> bool:
        return any(self.open_lower) or any(self.open_upper)

    def anchor(self) -> np.ndarray:
        """Midpoint per coordinate; the finite edge for half-lines; 0 for full lines."""
        lo, hi = self.lo, self.hi
        out = np.where(self.unbounded_below, hi, lo)
        both = ~self.unbounded_below & ~self.unbounded_above
        out = np.where(both, 0.5 * (lo + hi), out)
        return np.where(self.unbounded_below & self.unbounded_above, 0.0, out)

    def contains(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        lo, hi = self.lo, self.hi
        ok_lo = np.where(self.open_lower, X > lo, X >= lo)
        ok_hi = np.where(self.open_upper, X < hi, X <= hi)
        return np.all(ok_lo & ok_hi, axis=1)

    def intersect(self, other: "Box") -> "Box":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        ol = tuple(
            (a if x > y else b) if x != y else (a or b)
            for x, y, a, b in zip(self.lo, other.lo, self.open_lower, other.open_lower)
        )
        ou = tuple(
            (a if x < y else b) if x != y else (a or b)
            for x, y, a, b in zip(self.hi, other.hi, self.open_upper, other.open_upper)
        )
        return Box(tuple(lo), tuple(hi), ol, ou)

    def truncate(self, radius: float, center: np.ndarray | None = None) -> "Box":
        """Intersect with the cube of the given radius about ``center`` (default: anchor)."""
        c = self.anchor() if center is None else np.asarray(center, dtype=float)
        cube = Box(tuple(c - radius), tuple(c + radius))
        return self.intersect(cube)

    def sampling_bounds(self, shrink: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
        """Finite bounds for sampling; open edges are pulled inward by a relative ``shrink``."""
        lo, hi = self.lo.copy(), self.hi.copy()
        width = hi - lo
        lo = np.where(self.open_lower, lo + shrink * width, lo)
        hi = np.where(self.open_upper, hi - shrink * width, hi)
        return lo, hi

    def to_dict(self) -> dict:
        def enc(v):
            return "inf" if v >= HUGE else "-inf" if v <= -HUGE else v

        out = {"lower": [enc(v) for v in self.lower], "upper": [enc(v) for v in self.upper]}
        if self.is_open:
            out["open_lower"] = list(self.open_lower)
            out["open_upper"] = list(self.open_upper)
        return out


@dataclass(frozen=True, eq=False)
class ScalarFunc:
    """A named expression restricted to a box; ``+inf`` outside the box."""

    expr: ExpressionTree
    domain: Box
    name: str = "f"

    def __post_init__(self):
        if self.domain.dim != self.expr.arity:
            raise ValueError(
                f"{self.name}: domain dimension {self.domain.dim} != arity {self.expr.arity}"
            )

    @classmethod
    def from_source(
        cls, source: str, arity: int = 1, domain: Box | None = None, name: str = "f"
    ) -> "ScalarFunc":
        return cls(parse_expression(source, arity), domain or Box.real(arity), name)

    @property
    def arity(self) -> int:
        return self.expr.arity

    @property
    def source(self) -> str:
        return serialize(self.expr)

    @cached_property
    def _values(self):
        return compile_values(self.expr)

    @cached_property
    def _dual(self):
        return compile_dual(self.expr)

    def with_domain(self, domain: Box, name: str | None = None) -> "ScalarFunc":
        return ScalarFunc(self.expr, domain, name or self.name)

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.arity)
        if X.shape[1] != self.arity:
            raise ValueError(f"{self.name}: expected points of dimension {self.arity}, got {X.shape[1]}")
        return X

    def values(self, X) -> np.ndarray:
        """Evaluate at each row of ``X``; rows outside the domain map to ``+inf``.

        Overflow to ``+inf`` is a proper extended-real value; NaN and ``-inf`` are not.
        """
        X = self._points(X)
        inside = self.domain.contains(X)
        out = np.full(X.shape[0], PLUS_INFINITY)
        if inside.any():
            v = self._values(X[inside])
            bad = np.isnan(v) | (v == -np.inf)
            if bad.any():
                where = X[inside][np.argmax(bad)]
                raise DomainError(
                    f"{self.name} = {self.source} is undefined at {where.tolist()} inside its domain"
                )
            out[inside] = v
        return out

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(1, self.arity)
        return float(self.values(x)[0])

    def dual(self, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values, gradients and kink mask at rows of ``X`` (all rows must lie in the domain)."""
        X = self._points(X)
        if not self.domain.contains(X).all():
            raise DomainError(f"{self.name}: gradient requested outside the domain")
        v, g, kink = self._dual(X)
        bad = ~np.isfinite(v)
        if bad.any():
            raise DomainError(f"{self.name} is undefined at {X[np.argmax(bad)].tolist()}")
        return v, g, kink


@dataclass(frozen=True, eq=False)
class VectorFunc:
    components: tuple[ScalarFunc, ...] = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if comps:
            a, d = comps[0].arity, comps[0].domain
            for c in comps[1:]:
                if c.arity != a or c.domain != d:
                    raise ValueError("vector components must share arity and domain")

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i) -> ScalarFunc:
        return self.components[i]

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.components:
            return np.zeros((X.shape[0], 0))
        return np.column_stack([c.values(X) for c in self.components])


# ------------------------------------------------------------------ operations


def evaluate(f: ScalarFunc, x: Sequence[float]) -> float:
    return f(x)


def _central_difference(f: ScalarFunc, x: np.ndarray) -> tuple[np.ndarray, bool]:
    n = x.size
    h = np.cbrt(np.finfo(float).eps) * (1.0 + np.abs(x))
    E = np.diag(h)
    plus = f.values(x + E)
    minus = f.values(x - E)
    if not (np.isfinite(plus).all() and np.isfinite(minus).all()):
        raise NotDifferentiable(f"{f.name}: central-difference stencil leaves the domain at {x.tolist()}")
    fx = f(x)
    grad = (plus - minus) / (2 * h)
    fwd, bwd = (plus - fx) / h, (fx - minus) / h
    # one-sided quotients splitting apart signal a kink inside the stencil
    kink = bool(np.any(np.abs(fwd - bwd) > 1e-3 * (1.0 + np.abs(grad)) + 1e2 * h))
    return grad.reshape(n), kink


def gradient(
    f: ScalarFunc, x: Sequence[float], method: str = "forward-dual", cross_check: bool = True
) -> np.ndarray:
    """Gradient at an interior point by forward-mode duals or central differences.

    With ``cross_check`` the other route is computed as well and a disagreement
    beyond ``GRAD_RTOL`` raises :class:`NotDifferentiable`.
    """
    x = np.asarray(x, dtype=float).reshape(f.arity)
    if method not in ("forward-dual", "central-difference"):
        raise ValueError(f"unknown gradient method {method!r}")
    _, g, kink = f.dual(x[None, :])
    if kink[0]:
        raise NotDifferentiable(f"{f.name} has a kink at {x.tolist()}")
    dual = g[0]
    if method == "forward-dual" and not cross_check:
        return dual
    cd, cd_kink = _central_difference(f, x)
    if cd_kink:
        raise NotDifferentiable(f"{f.name}: one-sided difference quotients disagree at {x.tolist()}")
    if np.any(np.abs(dual - cd) > GRAD_RTOL * (1.0 + np.abs(dual))):
        raise NotDifferentiable(f"{f.name}: dual {dual.tolist()} vs central difference {cd.tolist()}")
    return dual if method == "forward-dual" else cd


def _richardson(q: np.ndarray) -> float:
    # first-order one-sided quotients: error expansion in powers of t, halving steps
    table = [np.asarray(q, dtype=float)]
    best, best_err = q[-1], abs(q[-1] - q[-2]) if len(q) > 1 else 0.0
    for j in range(1, len(q)):
        prev = table[-1]
        col = (2**j * prev[1:] - prev[:-1]) / (2**j - 1)
        table.append(col)
        if len(col) > 1:
            errs = np.abs(np.diff(col))
            k = int(np.argmin(errs))
            if errs[k] < best_err:
                best, best_err = col[k + 1], errs[k]
    return float(best)


def directional_derivative(
    f: ScalarFunc, x: Sequence[float], w: Sequence[float], halvings: int = 8
) -> float:
    """One-sided derivative along ``w`` with Richardson extrapolation.

    Returns ``±inf`` when the difference quotients diverge: either they grow by a
    factor of at least 4 over three consecutive halvings, or their increments stop
    shrinking (same sign, non-decreasing magnitude) over three consecutive halvings.
    """
    x = np.asarray(x, dtype=float).reshape(f.arity)
    w = np.asarray(w, dtype=float).reshape(f.arity)
    if not np.any(w):
        raise ValueError("direction must be nonzero")
    fx = f(x)
    if not math.isfinite(fx):
        raise DomainError(f"{f.name}: base point {x.tolist()} outside the domain")
    t0 = 1e-2 * (1.0 + np.linalg.norm(x))
    ts = t0 / 2.0 ** np.arange(halvings + 1)
    vals = f.values(x[None, :] + ts[:, None] * w[None, :])
    if not math.isfinite(vals[-1]):
        return PLUS_INFINITY
    finite = np.isfinite(vals)
    first = int(np.argmax(finite)) if not finite.all() else 0
    ts, vals = ts[first:], vals[first:]
    q = (vals - fx) / ts
    if len(q) < 3:
        return float(q[-1])

    growth = 0
    stalled = 0
    d = np.diff(q)
    for k in range(1, len(q) - 1):
        if q[k] != 0 and q[k + 1] / q[k] >= 4.0 and np.sign(q[k + 1]) == np.sign(q[k]):
            growth += 1
        else:
            growth = 0
        big = abs(d[k]) > 1e-8 * (1.0 + abs(q[k + 1]))
        if big and np.sign(d[k]) == np.sign(d[k - 1]) and abs(d[k]) >= 0.95 * abs(d[k - 1]):
            stalled += 1
        else:
            stalled = 0
        if growth >= 3 or stalled >= 3:
            return math.copysign(math.inf, q[-1] if growth >= 3 else d[k])
    return _richardson(q)

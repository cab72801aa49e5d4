"""Error bifunctions e(x, y) and sampled checks of their axioms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from equasi.certificate import Certificate, Status, jsonable
from equasi.errors import DomainError
from equasi.funcspec.evaluate import compile_values
from equasi.funcspec.expr import BinOp, ExpressionTree, Num, parse_expression, reparent, serialize
from equasi.funcspec.func import PLUS_INFINITY, Box
from equasi.sampling import in_bounds, sobol

KINDS = ("zero", "scaled_distance", "scaled_square", "custom")

# homogeneity scales tried before the seeded random ones
FIXED_LAMBDAS = (2.0, 0.5, 10.0)
RANDOM_LAMBDAS = 10
AXIOM_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class ErrorBifunction:
    """``e(x, y)``: zero, ``c‖x−y‖``, ``c‖x−y‖²`` or a custom expression in ``x1.., y1..``."""

    kind: str
    c: float = 0.0
    arity: int = 1
    expr: ExpressionTree | None = None
    domain: Box | None = None
    symmetrize: bool = False
    name: str = "e"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown bifunction kind {self.kind!r}")
        if self.c < 0 or not math.isfinite(self.c):
            raise ValueError("coefficient must be finite and nonnegative")
        if self.kind == "custom":
            if self.expr is None:
                raise ValueError("custom bifunction needs an expression")
            object.__setattr__(self, "arity", self.expr.arity)
        if self.domain is None:
            object.__setattr__(self, "domain", Box.real(self.arity))
        if self.domain.dim != self.arity:
            raise ValueError("bifunction domain dimension does not match arity")

    # ------------------------------------------------------------ constructors
    @classmethod
    def zero(cls, arity: int = 1) -> "ErrorBifunction":
        return cls("zero", 0.0, arity)

    @classmethod
    def scaled_distance(cls, c: float, arity: int = 1) -> "ErrorBifunction":
        return cls("scaled_distance", float(c), arity)

    @classmethod
    def scaled_square(cls, c: float, arity: int = 1) -> "ErrorBifunction":
        return cls("scaled_square", float(c), arity)

    @classmethod
    def custom(
        cls, source: str, arity: int = 1, domain: Box | None = None, symmetrize: bool = False, name: str = "e"
    ) -> "ErrorBifunction":
        tree = parse_expression(source, arity, blocks=("x", "y"))
        return cls("custom", 0.0, arity, tree, domain, symmetrize, name)

    @classmethod
    def from_dict(cls, data: dict, arity: int = 1, name: str = "e") -> "ErrorBifunction":
        kind = data.get("kind", "zero")
        if kind == "custom":
            return cls.custom(data["expr"], arity, symmetrize=bool(data.get("symmetrize", False)), name=name)
        if kind == "zero":
            return cls("zero", 0.0, arity, name=name)
        return cls(kind, float(data.get("c", 1.0)), arity, name=name)

    def to_dict(self) -> dict:
        if self.kind == "custom":
            out = {"kind": "custom", "expr": serialize(self.expr)}
            if self.symmetrize:
                out["symmetrize"] = True
            return out
        if self.kind == "zero":
            return {"kind": "zero"}
        return {"kind": self.kind, "c": self.c}

    @property
    def is_builtin(self) -> bool:
        return self.kind != "custom"

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind != "custom" and self.c == 0.0)

    def __str__(self) -> str:
        if self.kind == "zero":
            return "0"
        if self.kind == "scaled_distance":
            return f"{self.c:g}*|x-y|"
        if self.kind == "scaled_square":
            return f"{self.c:g}*|x-y|^2"
        return serialize(self.expr)

    def scale(self, k: float) -> "ErrorBifunction":
        """The bifunction ``k·e`` (``k >= 0``)."""
        if k < 0:
            raise ValueError("scale must be nonnegative")
        if self.kind == "zero":
            return self
        if self.kind == "custom":
            tree = reparent(self.expr, BinOp("*", Num(float(k)), self.expr.root))
            return ErrorBifunction("custom", 0.0, self.arity, tree, self.domain, self.symmetrize, self.name)
        return ErrorBifunction(self.kind, self.c * k, self.arity, None, self.domain, False, self.name)

    # -------------------------------------------------------------- evaluation
    @cached_property
    def _compiled(self):
        return compile_values(self.expr)

    def _raw(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(X.shape[0])
        if self.kind == "scaled_distance":
            return self.c * np.linalg.norm(X - Y, axis=1)
        if self.kind == "scaled_square":
            return self.c * np.sum((X - Y) ** 2, axis=1)
        v = self._compiled(np.hstack([X, Y]))
        if self.symmetrize:
            v = np.minimum(v, self._compiled(np.hstack([Y, X])))
        return v

    def values(self, X, Y) -> np.ndarray:
        """Vectorised ``e`` on paired rows; ``+inf`` outside ``dom e``."""
        X = np.asarray(X, dtype=float).reshape(-1, self.arity)
        Y = np.asarray(Y, dtype=float).reshape(-1, self.arity)
        inside = self.domain.contains(X) & self.domain.contains(Y)
        out = np.full(X.shape[0], PLUS_INFINITY)
        if inside.any():
            v = self._raw(X[inside], Y[inside])
            if not np.all(np.isfinite(v)):
                raise DomainError(f"bifunction {self} is undefined inside its domain")
            out[inside] = v
        return out

    def __call__(self, x, y) -> float:
        return float(self.values(x, y)[0])


def evaluate_e(e: ErrorBifunction, x, y) -> float:
    return e(x, y)


def e_at_direction(e: ErrorBifunction, u) -> float:
    """``e(u, 0)``, the error allowance along direction ``u``."""
    u = np.asarray(u, dtype=float).reshape(e.arity)
    if not np.any(u):
        raise ValueError("direction must be nonzero")
    return e(u, np.zeros_like(u))


@dataclass
class AxiomReport:
    nonnegative: Certificate
    symmetric: Certificate
    vanishing_diagonal: Certificate
    positively_homogeneous: Certificate
    usc: str = "continuous (builtin)"
    details: dict = field(default_factory=dict)

    @property
    def error_bifunction(self) -> bool:
        """Nonnegative, symmetric and zero on the diagonal (homogeneity is separate)."""
        return all(c.certified for c in (self.nonnegative, self.symmetric, self.vanishing_diagonal))

    @property
    def all_certified(self) -> bool:
        return self.error_bifunction and self.positively_homogeneous.certified

    def to_dict(self) -> dict:
        return jsonable(
            {
                "nonnegative": self.nonnegative,
                "symmetric": self.symmetric,
                "vanishing_diagonal": self.vanishing_diagonal,
                "positively_homogeneous": self.positively_homogeneous,
                "usc": self.usc,
            }
        )


def _equality_cert(name: str, lhs, rhs, rows: list[dict], samples: int, seed: int) -> Certificate:
    dev = np.abs(lhs - rhs)
    tol = AXIOM_RTOL * (1.0 + np.abs(lhs) + np.abs(rhs))
    bad = np.flatnonzero(dev > tol)
    if bad.size:
        k = int(bad[0])
        w = dict(rows[k], lhs=float(lhs[k]), rhs=float(rhs[k]))
        return Certificate(Status.REFUTED, name, witness=w, samples_used=samples, seed=seed)
    worst = float(dev.max()) if dev.size else 0.0
    return Certificate(Status.CERTIFIED, name, margin=worst, samples_used=samples, seed=seed,
                       details={"margin_meaning": "largest deviation"})


def check_axioms(
    e: ErrorBifunction, samples: int = 256, seed: int = 0, box: Box | None = None, radius: float = 10.0
) -> AxiomReport:
    """Sampled checks of nonnegativity, symmetry, ``e(x,x) = 0`` and positive homogeneity."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = e.arity
    box = box or e.domain
    if not box.is_bounded:
        box = box.truncate(radius)
    lo, hi = box.sampling_bounds()
    U = sobol(samples, 2 * n, seed)
    X, Y = in_bounds(U[:, :n], lo, hi), in_bounds(U[:, n:], lo, hi)
    rows = [{"x": X[i].tolist(), "y": Y[i].tolist()} for i in range(samples)]

    exy, eyx = e.values(X, Y), e.values(Y, X)
    neg = np.flatnonzero(exy < 0)
    if neg.size:
        k = int(neg[0])
        nonneg = Certificate(Status.REFUTED, "nonnegative", witness=dict(rows[k], value=float(exy[k])),
                             samples_used=samples, seed=seed)
    else:
        nonneg = Certificate(Status.CERTIFIED, "nonnegative", margin=float(exy.min()),
                             samples_used=samples, seed=seed)
    sym = _equality_cert("symmetric", exy, eyx, rows, samples, seed)
    diag = _equality_cert("vanishing_diagonal", e.values(X, X), np.zeros(samples),
                          [{"x": r["x"], "y": r["x"]} for r in rows], samples, seed)

    rng = np.random.default_rng(seed)
    lams = list(FIXED_LAMBDAS) + list(rng.uniform(0.0, 100.0, RANDOM_LAMBDAS))
    lhs_all, rhs_all, hrows = [], [], []
    for lam in lams:
        keep = e.domain.contains(lam * X) & e.domain.contains(lam * Y)
        lhs_all.append(e.values(lam * X[keep], lam * Y[keep]))
        rhs_all.append(lam * exy[keep])
        hrows.extend(dict(rows[i], lam=float(lam)) for i in np.flatnonzero(keep))
    homog = _equality_cert(
        "positively_homogeneous", np.concatenate(lhs_all), np.concatenate(rhs_all), hrows,
        samples * len(lams), seed,
    )
    homog.details["lambdas"] = [float(v) for v in lams]
    usc = "continuous (builtin)" if e.is_builtin else "assumed: user-asserted"
    return AxiomReport(nonneg, sym, diag, homog, usc)

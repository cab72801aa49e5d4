"""Sufficient KKT conditions with e-quasiconvex constraints, cone-quasiconvexity, multiplier search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from equasi.bifunc import ErrorBifunction
from equasi.cert import EPS, _Sweep, check_e_quasiconvex, check_pseudoconvex
from equasi.certificate import Certificate, Config, SampleConfig, Status, jsonable
from equasi.errors import (
    GradientUnavailable,
    HypothesisFailed,
    InfeasibleCandidate,
    NotDifferentiable,
    PreconditionFailed,
)
from equasi.existence import oracle_minimize
from equasi.funcspec.func import Box, ScalarFunc, VectorFunc, gradient
from equasi.sampling import in_bounds, sobol, sphere_directions

TOL = 1e-9
ORACLE_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class MathProgram:
    """``min f`` over ``C' = {x in K : g(x) <= 0, h(x) = 0}`` with one bifunction per ``g_i``."""

    f: ScalarFunc
    g: VectorFunc = field(default_factory=VectorFunc)
    h: VectorFunc = field(default_factory=VectorFunc)
    K: Box | None = None
    e: tuple[ErrorBifunction, ...] = ()

    def __post_init__(self):
        n = self.f.arity
        K = self.K or self.f.domain
        object.__setattr__(self, "K", K)
        for comp in list(self.g) + list(self.h):
            if comp.arity != n:
                raise ValueError("all program functions must share the arity of f")
        e = tuple(self.e) or tuple(ErrorBifunction.zero(n) for _ in range(self.m))
        if len(e) != self.m:
            raise ValueError(f"expected {self.m} bifunctions, got {len(e)}")
        object.__setattr__(self, "e", e)

    @property
    def n(self) -> int:
        return self.f.arity

    @property
    def m(self) -> int:
        return len(self.g)

    @property
    def k(self) -> int:
        return len(self.h)

    def g_values(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.g.values(X) if self.m else np.zeros((len(X), 0))

    def h_values(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return self.h.values(X) if self.k else np.zeros((len(X), 0))

    def feasible(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ok = self.K.contains(X)
        if self.m:
            ok &= np.all(self.g_values(X) <= TOL, axis=1)
        if self.k:
            ok &= np.all(np.abs(self.h_values(X)) <= TOL, axis=1)
        return ok

    def bounding_box(self) -> Box:
        return self.K

    def indicator(self, X) -> np.ndarray:
        return np.where(self.feasible(X), 0.0, math.inf)


@dataclass
class KKTCandidate:
    xbar: np.ndarray
    ubar: np.ndarray = field(default_factory=lambda: np.zeros(0))
    vbar: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.xbar = np.atleast_1d(np.asarray(self.xbar, dtype=float))
        self.ubar = np.atleast_1d(np.asarray(self.ubar, dtype=float)).reshape(-1)
        self.vbar = np.atleast_1d(np.asarray(self.vbar, dtype=float)).reshape(-1)

    def to_dict(self) -> dict:
        return jsonable({"x": self.xbar, "u": self.ubar, "v": self.vbar})


@dataclass(frozen=True)
class ActiveSet:
    """Zero-based indices of the constraints binding at the candidate."""

    indices: tuple[int, ...]

    @property
    def labels(self) -> tuple[int, ...]:
        """One-based labels, as in ``g_1 .. g_m``."""
        return tuple(i + 1 for i in self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class ConeSpec:
    """``(R_- minus {0}) x (-R_+^m + L(gbar)) x {0_k}`` with membership up to ``tol``."""

    gbar: tuple[float, ...]
    k: int = 0
    tol: float = TOL

    @property
    def m(self) -> int:
        return len(self.gbar)

    def middle(self, y: np.ndarray) -> tuple[bool, float | None, np.ndarray | None]:
        """Is ``y = -p + alpha gbar`` with ``p >= 0``?  Returns ``(ok, alpha, p)``.

        The feasible ``alpha`` form an interval (one linear inequality per
        component); the value closest to 0 is chosen.
        """
        g = np.asarray(self.gbar, dtype=float)
        y = np.asarray(y, dtype=float)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(g))):
            return False, None, None
        for slack in (0.0, self.tol):  # exact fit first, so the residual is 0 when possible
            lo, hi = -math.inf, math.inf
            with np.errstate(over="ignore"):  # tiny components give infinite, still correct, bounds
                for gi, yi in zip(g, y):
                    if gi > 0:
                        lo = max(lo, (yi - slack) / gi)
                    elif gi < 0:
                        hi = min(hi, (yi - slack) / gi)
                    elif yi > slack:
                        lo, hi = math.inf, -math.inf
            if lo <= hi:
                break
        if lo > hi:
            return False, None, None
        alpha = min(max(0.0, lo), hi)
        p = np.maximum(alpha * g - y, 0.0)
        return True, float(alpha), p

    def contains(self, vec) -> bool:
        vec = np.asarray(vec, dtype=float)
        head, mid, tail = vec[0], vec[1:1 + self.m], vec[1 + self.m:]
        if not head < -self.tol:
            return False
        if tail.size and np.any(np.abs(tail) > self.tol):
            return False
        return self.middle(mid)[0]

    def decompose(self, vec) -> dict | None:
        """Reconstruction ``(negative, -p + alpha gbar, 0)`` of a member, with its residual."""
        vec = np.asarray(vec, dtype=float)
        if not self.contains(vec):
            return None
        mid = vec[1:1 + self.m]
        _, alpha, p = self.middle(mid)
        recon = -p + alpha * np.asarray(self.gbar)
        return {"head": float(vec[0]), "alpha": alpha, "p": p.tolist(),
                "residual": float(np.max(np.abs(recon - mid))) if mid.size else 0.0}


# ------------------------------------------------------------------ basics


def active_set(P: MathProgram, xbar) -> ActiveSet:
    xbar = np.asarray(xbar, dtype=float).reshape(P.n)
    if not P.feasible(xbar)[0]:
        raise InfeasibleCandidate(f"{xbar.tolist()} is not feasible")
    gv = P.g_values(xbar)[0]
    return ActiveSet(tuple(int(i) for i in np.flatnonzero(np.abs(gv) <= TOL)))


def _grads(P: MathProgram, xbar: np.ndarray):
    try:
        gf = gradient(P.f, xbar)
        gg = np.array([gradient(c, xbar) for c in P.g]).reshape(P.m, P.n)
        gh = np.array([gradient(c, xbar) for c in P.h]).reshape(P.k, P.n)
    except NotDifferentiable as exc:
        raise GradientUnavailable(str(exc)) from exc
    return gf, gg, gh


def _project_equalities(P: MathProgram, X: np.ndarray, steps: int = 8) -> np.ndarray:
    """Gauss-Newton steps pulling samples onto ``h = 0``."""
    for _ in range(steps):
        H = P.h_values(X)
        keep = np.isfinite(H).all(axis=1) & P.K.contains(X)
        if not keep.any():
            break
        J = np.stack([c.dual(X[keep])[1] for c in P.h], axis=1)  # (N, k, n)
        JJt = J @ np.transpose(J, (0, 2, 1)) + 1e-15 * np.eye(P.k)
        step = np.einsum("nki,nk->ni", J, np.linalg.solve(JJt, H[keep][..., None])[..., 0])
        X = X.copy()
        X[keep] -= step
    return X


def _sample_box(K: Box, radius: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    box = K if K.is_bounded else K.truncate(radius)
    return box.sampling_bounds()


def sample_points(P: MathProgram, xbar: np.ndarray, cfg: Config, where: str = "C") -> tuple[np.ndarray, np.ndarray]:
    """Low-discrepancy points of ``K`` plus ray points through ``xbar``; returns ``(X, generic)``.

    ``where`` selects ``"K"``, the feasible set ``"C"`` or ``"Ctilde"``.
    """
    lo, hi = _sample_box(P.K)
    n = P.n
    G = in_bounds(sobol(cfg.kkt.points, n, cfg.seed), lo, hi)
    dirs = sphere_directions(n, cfg.seed, 16, 64)
    scale = float(np.max(hi - lo))
    radii = scale * 2.0 ** -np.arange(1, cfg.kkt.ray_levels + 1)
    R = (xbar[None, None, :] + radii[:, None, None] * dirs[None, :, :]).reshape(-1, n)
    X = np.vstack([G, R])
    generic = np.concatenate([np.ones(len(G), bool), np.zeros(len(R), bool)])
    if where != "K" and P.k:
        X = _project_equalities(P, X)
    inside = P.K.contains(X)
    if where == "C":
        inside &= P.feasible(X)
    elif where == "Ctilde":
        inside &= c_tilde_contains(P, xbar, X)
    keep = inside & (np.linalg.norm(X - xbar, axis=1) > 0)
    return X[keep], generic[keep]


def c_tilde_contains(P: MathProgram, xbar: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Membership in ``{x in K : g(x) in -R_+^m + L(g(xbar)), h(x) = 0}``."""
    X = np.atleast_2d(X)
    cone = ConeSpec(tuple(P.g_values(xbar)[0]), P.k)
    ok = P.K.contains(X)
    if P.m:
        GX = P.g_values(X)
        ok &= np.array([cone.middle(row)[0] for row in GX])
    if P.k:
        ok &= np.all(np.abs(P.h_values(X)) <= TOL, axis=1)
    return ok


@dataclass(frozen=True)
class _PredicateSet:
    """Duck-typed feasible set for the oracle."""

    box: Box
    pred: object

    def bounding_box(self) -> Box:
        return self.box

    def indicator(self, X) -> np.ndarray:
        return np.where(self.pred(np.atleast_2d(X)), 0.0, math.inf)


# ------------------------------------------------------------ KKT system


def _lagrangian_terms(P: MathProgram, cand: KKTCandidate, X: np.ndarray, grads):
    gf, gg, gh = grads
    D = X - cand.xbar[None, :]
    lin = D @ (gf + cand.ubar @ gg + (cand.vbar @ gh if P.k else 0.0))
    err = np.zeros(len(X))
    for ui, ei in zip(cand.ubar, P.e):
        if ui != 0.0:
            err = err + ui * ei.values(X, np.broadcast_to(cand.xbar, X.shape))
    return lin, err, np.linalg.norm(D, axis=1)


def _validate(P: MathProgram, cand: KKTCandidate):
    if cand.xbar.size != P.n or cand.ubar.size != P.m or cand.vbar.size != P.k:
        raise ValueError("candidate dimensions do not match the program")


def check_kkt_system(P: MathProgram, cand: KKTCandidate, cfg: Config | None = None) -> Certificate:
    """Sampled check of the e-KKT system at ``cand``.

    (i) ``<grad f + sum u_i grad g_i, x - xbar> >= sum u_i e_i(x, xbar)`` on sampled
    feasible ``x`` (slack divided by ``|x - xbar|``); (ii) complementarity; (iii)
    feasibility of ``xbar``; (iv) ``u >= 0``.
    """
    cfg = cfg or Config()
    _validate(P, cand)
    x = cand.xbar
    if not P.feasible(x)[0]:
        raise InfeasibleCandidate(f"{x.tolist()} violates the constraints or lies outside K")
    scfg = SampleConfig(seed=cfg.seed)
    gx = P.g_values(x)[0]
    conditions = {"iii": "holds"}
    if np.any(cand.ubar < 0):
        i = int(np.argmin(cand.ubar))
        return Certificate(Status.REFUTED, "kkt_system", witness={"condition": "iv", "index": i,
                                                                  "u": float(cand.ubar[i])},
                           seed=cfg.seed, details={"conditions": dict(conditions, iv="fails")})
    conditions["iv"] = "holds"
    comp = float(cand.ubar @ gx) if P.m else 0.0
    if abs(comp) > TOL:
        return Certificate(Status.REFUTED, "kkt_system", witness={"condition": "ii", "sum_u_g": comp},
                           seed=cfg.seed, details={"conditions": dict(conditions, ii="fails")})
    conditions["ii"] = "holds"
    grads = _grads(P, x)
    X, generic = sample_points(P, x, cfg, "C")
    lin, err, dist = _lagrangian_terms(P, cand, X, grads)
    s = (lin - err) / dist
    band = 64 * EPS * (np.abs(lin) + np.abs(err)) / dist
    sweep = _Sweep(cfg.kkt.tol)

    def describe(k: int) -> dict:
        return {"condition": "i", "x": X[k].tolist(), "lhs": float(lin[k]), "rhs": float(err[k])}

    sweep.add(s, band, generic, describe)
    cert = sweep.certificate("kkt_system", scfg, {"conditions": conditions, "points": int(len(X))})
    cert.details["conditions"]["i"] = "fails" if cert.refuted else "holds"
    return cert


def kkt_witness_reverifies(P: MathProgram, cand: KKTCandidate, witness: dict) -> bool:
    """Recompute condition (i) at a witness point and confirm the violation."""
    X = np.asarray(witness["x"], dtype=float)[None, :]
    lin, err, _ = _lagrangian_terms(P, cand, X, _grads(P, cand.xbar))
    return bool(lin[0] < err[0])


# ------------------------------------------------------- global sufficiency


def _segments_feasible(P: MathProgram, cfg: Config) -> Certificate:
    lo, hi = _sample_box(P.K)
    U = sobol(2048, 2 * P.n, cfg.seed + 7)
    A, B = in_bounds(U[:, :P.n], lo, hi), in_bounds(U[:, P.n:], lo, hi)
    ok = P.feasible(A) & P.feasible(B)
    A, B = A[ok], B[ok]
    ts = np.linspace(0.0, 1.0, 33)[1:-1]
    for t in ts:
        Z = t * A + (1 - t) * B
        bad = ~P.feasible(Z)
        if bad.any():
            k = int(np.argmax(bad))
            return Certificate(Status.REFUTED, "C_convex", seed=cfg.seed, samples_used=int(len(A)),
                               witness={"x": A[k].tolist(), "y": B[k].tolist(), "t": float(t)})
    return Certificate(Status.CERTIFIED, "C_convex", margin=0.0, seed=cfg.seed, samples_used=int(len(A) * len(ts)),
                       details={"margin_meaning": "segment feasibility (no slack)"})


def certify_global_theo_suff(P: MathProgram, cand: KKTCandidate, cfg: Config | None = None) -> Certificate:
    """Global optimality from the e-KKT system, pseudoconvex ``f`` and e_i-quasiconvex ``g_i`` on convex ``C``.

    Hypotheses that are refuted raise :class:`PreconditionFailed`; the verdict is
    cross-checked against the oracle minimum over the feasible set.
    """
    cfg = cfg or Config()
    _validate(P, cand)
    if P.k:
        raise PreconditionFailed("no equality constraints", "the sufficient theorem covers h absent only")
    hyp = {}
    conv = _segments_feasible(P, cfg)
    hyp["C_convex"] = conv
    if conv.refuted:
        raise PreconditionFailed("C is convex", "a segment between feasible points leaves C", report=hyp)
    lo, hi = _sample_box(P.K)
    box = Box(tuple(lo), tuple(hi))
    pc = check_pseudoconvex(P.f, box, cfg.sample)
    hyp["f_pseudoconvex"] = pc
    if pc.refuted:
        raise PreconditionFailed("f is pseudoconvex", "sampled pseudoconvexity implication fails", report=hyp)
    for i, (gi, ei) in enumerate(zip(P.g, P.e)):
        c = check_e_quasiconvex(gi, ei, box, cfg.sample)
        hyp[f"g{i + 1}_e_quasiconvex"] = c
        if c.refuted:
            raise PreconditionFailed(f"g{i + 1} is e{i + 1}-quasiconvex on K",
                                     f"{gi.source} violates the inequality with e = {ei}", report=hyp)
    kkt = check_kkt_system(P, cand, cfg)
    hyp["kkt_system"] = kkt
    oracle = oracle_minimize(P.f, P, cfg)
    fx = P.f(cand.xbar)
    confirms = bool(oracle.minimizers) and fx <= oracle.min_value + ORACLE_TOL
    details = {"hypotheses": {k: v.to_dict() for k, v in hyp.items()}, "oracle": oracle.to_dict(),
               "oracle_confirms": confirms, "f_xbar": fx}
    if kkt.refuted:
        return Certificate(Status.REFUTED, "global_theo_suff", witness=kkt.witness, seed=cfg.seed,
                           samples_used=kkt.samples_used, details=details)
    if all(c.certified for c in hyp.values()):
        if not confirms:
            details["note"] = "oracle finds a lower feasible value"
            return Certificate(Status.INCONCLUSIVE, "global_theo_suff", seed=cfg.seed, details=details)
        return Certificate(Status.CERTIFIED, "global_theo_suff", margin=kkt.margin, seed=cfg.seed,
                           samples_used=kkt.samples_used, details=details)
    return Certificate(Status.INCONCLUSIVE, "global_theo_suff", seed=cfg.seed, details=details)


# ------------------------------------------------------ cone-e-quasiconvexity


def _as_vector(v) -> VectorFunc:
    if v is None:
        return VectorFunc(())
    if isinstance(v, VectorFunc):
        return v
    return VectorFunc(tuple(v))


def check_vector_Cq(f: ScalarFunc, g, h, xbar, chat: ConeSpec | None = None,
                    e: Sequence[ErrorBifunction] = (), K: Box | None = None,
                    cfg: Config | None = None) -> Certificate:
    """Sampled check that ``phi = (f, g, h)`` is Chat-ehat-quasiconvex at ``xbar``, ``ehat = (0, e, 0)``.

    For each sampled ``x`` in ``K``: ``phi(x) - phi(xbar)`` in Chat must imply
    ``phi'(xbar)(x - xbar) - ehat(x, xbar)`` in Chat.  Directional derivatives
    are taken as ``<grad, x - xbar>``.  Premises whose head lies within ``tol``
    of 0 are vacuous and counted.  The margin is the smallest ``-head`` of the
    conclusion over generic samples with a true premise.
    """
    cfg = cfg or Config()
    g, h = _as_vector(g), _as_vector(h)
    P = MathProgram(f, g, h, K or f.domain, tuple(e))
    x0 = np.asarray(xbar, dtype=float).reshape(P.n)
    if not P.K.contains(x0)[0]:
        raise InfeasibleCandidate("xbar must lie in K")
    chat = chat or ConeSpec(tuple(P.g_values(x0)[0]), P.k)
    gf, gg, gh = _grads(P, x0)
    X, generic = sample_points(P, x0, cfg, "K")
    D = X - x0
    phi0 = np.concatenate([[P.f(x0)], P.g_values(x0)[0], P.h_values(x0)[0]])
    Phi = np.column_stack([P.f.values(X), P.g_values(X), P.h_values(X)])
    diffs = Phi - phi0
    err = np.column_stack([ei.values(X, np.broadcast_to(x0, X.shape)) for ei in P.e]) if P.m else np.zeros((len(X), 0))
    deriv = np.column_stack([D @ gf, D @ gg.T - err, D @ gh.T if P.k else np.zeros((len(X), 0))])
    vacuous = int(np.count_nonzero(np.abs(diffs[:, 0]) <= chat.tol))
    premise = np.array([chat.contains(r) for r in diffs])
    margin, margin_at, witness = math.inf, None, None
    for i in np.flatnonzero(premise):
        if not chat.contains(deriv[i]):
            witness = {"x": X[i].tolist(), "premise": diffs[i].tolist(), "conclusion": deriv[i].tolist(),
                       "premise_decomposition": chat.decompose(diffs[i])}
            break
        if generic[i] and -deriv[i, 0] < margin:
            margin, margin_at = float(-deriv[i, 0]), X[i].tolist()
    details = {"premises": int(premise.sum()), "vacuous": vacuous, "points": int(len(X)), "gbar": list(chat.gbar)}
    if witness is not None:
        return Certificate(Status.REFUTED, "vector_Cq", witness=witness, samples_used=len(X), seed=cfg.seed,
                           details=details)
    if premise.sum() == 0:
        details["note"] = "no sampled premise holds; the implication is vacuous"
        return Certificate(Status.CERTIFIED, "vector_Cq", margin=math.inf, samples_used=len(X), seed=cfg.seed,
                           details=details)
    details["margin_at"] = margin_at
    status = Status.CERTIFIED if margin >= TOL else Status.INCONCLUSIVE
    return Certificate(status, "vector_Cq", margin=margin, samples_used=len(X), seed=cfg.seed, details=details)


def claim01(P: MathProgram, cand: KKTCandidate, X: np.ndarray) -> np.ndarray:
    """Per point: the derivative triple ``(f', g' - e, h')`` at ``x - xbar`` lies outside Chat."""
    x0 = cand.xbar
    gf, gg, gh = _grads(P, x0)
    chat = ConeSpec(tuple(P.g_values(x0)[0]), P.k)
    D = X - x0
    err = np.column_stack([ei.values(X, np.broadcast_to(x0, X.shape)) for ei in P.e]) if P.m else np.zeros((len(X), 0))
    deriv = np.column_stack([D @ gf, D @ gg.T - err, D @ gh.T if P.k else np.zeros((len(X), 0))])
    return np.array([not chat.contains(r) for r in deriv])


@dataclass
class MainTheoremResult:
    forward: Certificate
    backward: Certificate
    hypothesis: Certificate
    vector_cq: Certificate
    oracle: dict

    def to_dict(self) -> dict:
        return jsonable({"forward": self.forward, "backward": self.backward, "hypothesis": self.hypothesis,
                         "vector_Cq": self.vector_cq, "oracle": self.oracle})


def certify_main_theo2(P: MathProgram, cand: KKTCandidate, cfg: Config | None = None,
                       enforce_hypothesis: bool = True) -> MainTheoremResult:
    """Both directions of: xbar minimizes f on Ctilde  iff  (f, g, h) is Chat-ehat-quasiconvex at xbar.

    The hypothesis inequality is sampled on Ctilde, which is where the proof uses
    it.  ``forward``: cone-quasiconvexity (sampled) implies minimality (oracle
    and samples).  ``backward`` certifies minimality and then requires
    cone-quasiconvexity; a point of Ctilde with a lower value is its witness.
    """
    cfg = cfg or Config()
    _validate(P, cand)
    x0 = cand.xbar
    if not P.K.contains(x0)[0]:
        raise InfeasibleCandidate("xbar must lie in K")
    grads = _grads(P, x0)
    X, generic = sample_points(P, x0, cfg, "Ctilde")
    lin, err, dist = _lagrangian_terms(P, cand, X, grads)
    s = (lin - err) / dist
    sweep = _Sweep(cfg.kkt.tol)
    sweep.add(s, 64 * EPS * (np.abs(lin) + np.abs(err)) / dist, generic,
              lambda k: {"x": X[k].tolist(), "lhs": float(lin[k]), "rhs": float(err[k])})
    hyp = sweep.certificate("hypothesis_for_contra", SampleConfig(seed=cfg.seed), {"points": int(len(X))})
    comp = float(cand.ubar @ P.g_values(x0)[0]) if P.m else 0.0
    hyp.details["complementarity"] = comp
    nonzero = bool(np.any(cand.ubar != 0) or np.any(cand.vbar != 0))
    hyp.details["multipliers_nonzero"] = nonzero
    failure = None
    if not nonzero:
        failure = "(u, v) = (0, 0)"
    elif np.any(cand.ubar < 0):
        failure = "u has a negative entry"
    elif abs(comp) > TOL:
        failure = f"sum u_i g_i(xbar) = {comp}"
    elif hyp.refuted:
        failure = "hypothesis inequality fails"
    if failure is not None:
        hyp.status = Status.REFUTED
        hyp.details["failure"] = failure
        if enforce_hypothesis:
            raise HypothesisFailed(failure, witness=hyp.witness)
    hyp.details["claim01_holds"] = bool(np.all(claim01(P, cand, X))) if len(X) else True

    vq = check_vector_Cq(P.f, P.g, P.h, x0, None, P.e, P.K, cfg)
    pred = lambda Z: c_tilde_contains(P, x0, Z)  # noqa: E731
    oracle = oracle_minimize(P.f, _PredicateSet(P.K, pred), cfg)
    fx = P.f(x0)
    lower = None
    fX = P.f.values(X)
    if len(X) and np.min(fX) < fx - ORACLE_TOL:
        k = int(np.argmin(fX))
        lower = X[k]
    if lower is None and oracle.minimizers and oracle.min_value < fx - ORACLE_TOL:
        lower = np.asarray(oracle.minimizers[0])
    minimal = lower is None
    odict = oracle.to_dict()
    odict["f_xbar"] = fx
    if minimal:
        backward = Certificate(Status.CERTIFIED if vq.certified else Status.REFUTED, "main_theo2_backward",
                               margin=vq.margin if vq.certified else None,
                               witness=None if vq.certified else vq.witness, seed=cfg.seed,
                               details={"minimal_on_Ctilde": True})
    else:
        diff = np.concatenate([[P.f(lower) - fx], P.g_values(lower)[0] - P.g_values(x0)[0],
                               P.h_values(lower)[0] - P.h_values(x0)[0]])
        chat = ConeSpec(tuple(P.g_values(x0)[0]), P.k)
        backward = Certificate(Status.REFUTED, "main_theo2_backward", seed=cfg.seed,
                               witness={"x": lower.tolist(), "f_x": float(P.f(lower)), "f_xbar": fx,
                                        "difference": diff.tolist(), "in_Chat": chat.contains(diff),
                                        "decomposition": chat.decompose(diff)},
                               details={"minimal_on_Ctilde": False})
    if vq.certified:
        forward = Certificate(Status.CERTIFIED if minimal else Status.REFUTED, "main_theo2_forward",
                              margin=vq.margin if minimal else None,
                              witness=None if minimal else backward.witness, seed=cfg.seed,
                              details={"vector_Cq": "CERTIFIED"})
    else:
        forward = Certificate(Status.INCONCLUSIVE, "main_theo2_forward", seed=cfg.seed,
                              details={"vector_Cq": vq.status.value, "note": "premise of the implication not certified"})
    return MainTheoremResult(forward, backward, hyp, vq, odict)


# -------------------------------------------------------- multiplier search


@dataclass
class MultiplierSearch:
    candidates: list[KKTCandidate]
    active: ActiveSet
    bounds: list[tuple[float, float]] | None
    feasible: bool

    def to_dict(self) -> dict:
        return jsonable({"candidates": self.candidates, "active": list(self.active.labels),
                         "bounds": self.bounds, "feasible": self.feasible})


def _equality_multipliers(P: MathProgram, grads) -> np.ndarray:
    gf, _, gh = grads
    if not P.k:
        return np.zeros(0)
    v, *_ = np.linalg.lstsq(gh.T, -gf, rcond=None)
    return v


def multiplier_search(P: MathProgram, xbar, cfg: Config | None = None) -> list[KKTCandidate]:
    """Extreme points of the sampled multiplier region for condition (i) of the e-KKT system."""
    return search_multipliers(P, xbar, cfg).candidates


def search_multipliers(P: MathProgram, xbar, cfg: Config | None = None) -> MultiplierSearch:
    """Grid plus bisection over ``u in [0, U]^|active|``; inactive constraints get ``u_i = 0``.

    Condition (i) is affine in ``u`` at each sample, so feasibility of a grid
    cell is a vectorised minimum; boundaries are refined by bisection.
    """
    cfg = cfg or Config()
    x0 = np.asarray(xbar, dtype=float).reshape(P.n)
    act = active_set(P, x0)
    grads = _grads(P, x0)
    gf, gg, gh = grads
    v = _equality_multipliers(P, grads)
    X, _ = sample_points(P, x0, cfg, "C")
    D = X - x0
    dist = np.linalg.norm(D, axis=1)
    a = D @ (gf + (v @ gh if P.k else 0.0))
    idx = list(act.indices)
    B = np.column_stack([D @ gg[i] - P.e[i].values(X, np.broadcast_to(x0, X.shape)) for i in idx]) \
        if idx else np.zeros((len(X), 0))
    a, B = a / dist, B / dist[:, None]
    tol = cfg.kkt.tol

    def feasible(U: np.ndarray) -> np.ndarray:
        U = np.atleast_2d(U)
        out = np.empty(len(U), dtype=bool)
        for s in range(0, len(U), 256):
            out[s:s + 256] = np.all(a[:, None] + B @ U[s:s + 256].T >= -tol, axis=0)
        return out

    def full(u_act: np.ndarray) -> KKTCandidate:
        u = np.zeros(P.m)
        u[idx] = u_act
        return KKTCandidate(x0, u, v)

    if not idx:
        ok = bool(feasible(np.zeros((1, 0)))[0])
        return MultiplierSearch([full(np.zeros(0))] if ok else [], act, [] if ok else None, ok)

    m = len(idx)
    Umax = cfg.kkt.u_max
    per = max(3, int(round((1e5) ** (1 / m)))) if m > 1 else int(round(Umax / cfg.kkt.u_resolution)) + 1
    axes = [np.linspace(0.0, Umax, per)] * m
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    ok = feasible(grid)
    if not ok.any():
        return MultiplierSearch([], act, None, False)
    pts = grid[ok]
    step = Umax / (per - 1)
    cands, bounds = [], []
    for j in range(m):
        for pick, sign in ((np.argmin, -1.0), (np.argmax, 1.0)):
            p = pts[pick(pts[:, j])].copy()
            lo_in = p[j]
            # bisect between the feasible extreme and the next (infeasible) grid value
            out_v = lo_in + sign * step
            if 0.0 <= out_v <= Umax:
                inside, outside = lo_in, out_v
                while abs(outside - inside) > 1e-7:
                    mid = 0.5 * (inside + outside)
                    q = p.copy()
                    q[j] = mid
                    if feasible(q)[0]:
                        inside = mid
                    else:
                        outside = mid
                p[j] = inside
            cands.append(p)
        bounds.append((float(cands[-2][j]), float(cands[-1][j])))
    uniq = []
    for c in cands:
        if not any(np.allclose(c, d, atol=1e-12) for d in uniq):
            uniq.append(c)
    return MultiplierSearch([full(c) for c in uniq], act, bounds, True)

"""Existence of minimizers from the q-asymptotic sufficient condition, plus a brute-force oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from equasi.asympt import KQ_TOL, DirectionRow, FeasibleSet, asymptotic_cone_membership, estimate_f_q_inf, sphere
from equasi.bifunc import AxiomReport, ErrorBifunction, check_axioms, e_at_direction
from equasi.cert import check_e_quasiconvex
from equasi.certificate import Certificate, Config, Status, jsonable
from equasi.errors import PreconditionFailed
from equasi.funcspec.func import Box, ScalarFunc
from equasi.sampling import in_bounds, sobol, sphere_directions

STRICT_LOCAL = "STRICT_LOCAL"
LOCAL = "LOCAL"
NOT_LOCAL = "NOT_LOCAL"


@dataclass
class OracleResult:
    minimizers: list
    min_value: float
    bounded: bool
    grid: dict
    local_minima: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return jsonable({"minimizers": self.minimizers, "value": self.min_value, "bounded": self.bounded,
                         "grid": self.grid, "local_minima": self.local_minima})


@dataclass
class ExistenceReport:
    certificate: Certificate
    worst_direction: list | None
    margin: float | None
    preconditions: dict
    oracle: OracleResult | None
    sweep: list = field(default_factory=list)

    @property
    def status(self) -> Status:
        return self.certificate.status

    def to_dict(self) -> dict:
        return jsonable({
            "status": self.certificate.status,
            "margin": self.margin,
            "worst_direction": self.worst_direction,
            "preconditions": self.preconditions,
            "oracle": self.oracle,
            "certificate": self.certificate,
            "sweep": self.sweep,
        })


# -------------------------------------------------------------------- oracle


def _region(f: ScalarFunc, S: FeasibleSet | None, radius: float) -> tuple[Box, np.ndarray]:
    """Search box and a mask of coordinates where it was cut by the truncation cube."""
    box = f.domain if S is None else f.domain.intersect(S.bounding_box())
    cube = Box.cube(f.arity, radius)
    cut_lo = box.lo < -radius
    cut_hi = box.hi > radius
    return box.intersect(cube), np.vstack([cut_lo, cut_hi])


def _objective(f: ScalarFunc, S: FeasibleSet | None):
    def F(X):
        v = f.values(X)
        if S is not None:
            v = v + S.indicator(X)
        return v

    return F


def _cluster(points: np.ndarray, radius: float) -> list[np.ndarray]:
    reps: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - r) > radius for r in reps):
            reps.append(p)
    return reps


def _refine(F, x: np.ndarray, box: Box, h: np.ndarray) -> tuple[np.ndarray, float]:
    lo, hi = box.sampling_bounds()

    def G(Z):  # finite stand-in for +inf so the local solvers never see inf - inf
        return min(float(F(Z)[0]), 1e300)

    if x.size == 1:
        a, b = max(x[0] - h[0], lo[0]), min(x[0] + h[0], hi[0])
        if b > a:
            r = minimize_scalar(lambda s: G(np.array([[s]])), bounds=(a, b), method="bounded",
                                options={"xatol": 1e-12})
            cand = np.array([r.x])
            vc = float(F(cand[None, :])[0])
            v0 = float(F(x[None, :])[0])
            return (cand, vc) if vc < v0 else (x, v0)
        return x, float(F(x[None, :])[0])
    r = minimize(lambda z: G(np.clip(z, lo, hi)[None, :]), x, method="Nelder-Mead",
                 options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000, "initial_simplex":
                          np.vstack([x, x + np.diag(h)])})
    cand = np.clip(r.x, lo, hi)
    vc, v0 = float(F(cand[None, :])[0]), float(F(x[None, :])[0])
    return (cand, vc) if vc < v0 else (x, v0)


def _grid(box: Box, cfg: Config) -> tuple[np.ndarray, np.ndarray, dict, tuple]:
    lo, hi = box.sampling_bounds()
    n = box.dim
    oc = cfg.oracle
    if n == 1:
        P = np.linspace(lo[0], hi[0], oc.grid_1d)[:, None]
        return P, (hi - lo) / (oc.grid_1d - 1), {"kind": "uniform", "points": oc.grid_1d}, (oc.grid_1d,)
    if n == 2:
        m = oc.grid_2d
        axes = [np.linspace(lo[i], hi[i], m) for i in range(2)]
        A, B = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([A.ravel(), B.ravel()]), (hi - lo) / (m - 1), \
            {"kind": "uniform", "points": m * m, "shape": [m, m]}, (m, m)
    P = in_bounds(sobol(oc.grid_nd, n, cfg.seed), lo, hi)
    return P, (hi - lo) / oc.grid_nd ** (1 / n), {"kind": "sobol", "points": oc.grid_nd}, (oc.grid_nd,)


def _discrete_local_minima(V: np.ndarray, shape: tuple) -> np.ndarray:
    if len(shape) == 1:
        left = np.concatenate([[np.inf], V[:-1]])
        right = np.concatenate([V[1:], [np.inf]])
        mask = (V <= left) & (V <= right) & np.isfinite(V)
        # keep one representative per flat run
        mask &= ~np.concatenate([[False], mask[:-1] & (V[1:] == V[:-1])])
        return np.flatnonzero(mask)
    if len(shape) == 2:
        G = V.reshape(shape)
        P = np.pad(G, 1, constant_values=np.inf)
        c = P[1:-1, 1:-1]
        mask = (c <= P[:-2, 1:-1]) & (c <= P[2:, 1:-1]) & (c <= P[1:-1, :-2]) & (c <= P[1:-1, 2:]) & np.isfinite(c)
        return np.flatnonzero(mask.ravel())
    return np.argsort(V, kind="stable")[:64]


def oracle_minimize(f: ScalarFunc, S: FeasibleSet | None = None, cfg: Config | None = None,
                    local: bool = False, radius: float | None = None) -> OracleResult:
    """Grid search plus local refinement over ``dom f`` (∩ ``S``) within the truncation cube.

    ``bounded`` is False when the best value near the truncation shell comes
    within ``shell_tol`` of the overall minimum.  With ``local`` every basin found
    on the grid is refined and reported.
    """
    cfg = cfg or Config()
    oc = cfg.oracle
    radius = oc.radius if radius is None else radius
    F = _objective(f, S)
    box, cut = _region(f, S, radius)
    P, h, desc, shape = _grid(box, cfg)
    V = F(P)
    desc["box"] = box.to_dict()
    if not np.isfinite(V).any():
        return OracleResult([], math.inf, False, desc)
    cand = _discrete_local_minima(V, shape)
    m0 = float(np.min(V[np.isfinite(V)]))
    # the starts that can matter for the global minimum, plus (local mode) every basin
    if not local:
        close = cand[V[cand] <= m0 + max(1e-3, 1e-6 * abs(m0))]
        cand = close if close.size else cand[np.argsort(V[cand], kind="stable")[:1]]
    cand = cand[np.argsort(V[cand], kind="stable")][: max(oc.starts, 256 if local else oc.starts)]
    refined = [_refine(F, P[i].copy(), box, 2 * h) for i in cand]
    vals = np.array([v for _, v in refined])
    pts = np.array([p for p, _ in refined])
    order = np.argsort(vals, kind="stable")
    pts, vals = pts[order], vals[order]
    mval = float(min(vals[0], m0))
    glob = pts[vals <= mval + oc.value_tol]
    minimizers = [p.tolist() for p in _cluster(glob, oc.cluster_radius)]
    local_minima = []
    if local:
        reps = _cluster(pts, oc.cluster_radius)
        for r in reps:
            local_minima.append({"x": r.tolist(), "value": float(F(r[None, :])[0])})
    lo, hi = box.lo, box.hi
    width = hi - lo
    near = np.zeros(len(P), dtype=bool)
    near |= np.any(cut[0] & (P <= lo + oc.shell_fraction * width), axis=1)
    near |= np.any(cut[1] & (P >= hi - oc.shell_fraction * width), axis=1)
    bounded = True
    if near.any():
        shell_min = float(np.min(V[near]))
        bounded = not shell_min <= mval + oc.shell_tol
        desc["shell_min"] = shell_min
    return OracleResult(minimizers, mval, bounded, desc, local_minima)


def local_min_probe(f: ScalarFunc, x, delta: float, tol: float | None = None) -> str:
    """Classify ``x`` as strict local, local or not a local minimizer from shellwise samples of ``B(x, delta)``."""
    x = np.asarray(x, dtype=float).reshape(f.arity)
    if delta <= 0:
        raise ValueError("delta must be positive")
    f0 = f(x)
    if not math.isfinite(f0):
        raise ValueError("x must lie in dom f")
    tol = 1e-14 * (1 + abs(f0)) if tol is None else tol
    dirs = sphere_directions(f.arity, 0, 64, 256)
    octaves = 30
    # per octave, 8 radii between delta 2^-(j+1) and delta 2^-j
    inner = []
    for j in range(octaves):
        rs = delta * 2.0 ** (-(j + np.linspace(0, 1, 8, endpoint=False)))
        Pts = (x[None, None, :] + rs[:, None, None] * dirs[None, :, :]).reshape(-1, f.arity)
        inner.append(f.values(Pts) - f0)
    viol = [bool(np.any(d < -tol)) for d in inner]
    if viol[-1]:
        return NOT_LOCAL
    j0 = len(viol)
    while j0 > 0 and not viol[j0 - 1]:
        j0 -= 1
    strict = all(np.all(d > 0.0) for d in inner[j0:])
    return STRICT_LOCAL if strict else LOCAL


# -------------------------------------------------------------- certificates


def _preconditions(f: ScalarFunc, e: ErrorBifunction, cfg: Config, S: FeasibleSet | None):
    axioms: AxiomReport = check_axioms(e, samples=256, seed=cfg.seed)
    pre = {"e_axioms": axioms, "homogeneity": axioms.positively_homogeneous, "lsc": "assumed", "usc": axioms.usc}
    if not axioms.error_bifunction:
        failing = next(c for c in (axioms.nonnegative, axioms.symmetric, axioms.vanishing_diagonal) if not c.certified)
        raise PreconditionFailed(f"error bifunction axiom: {failing.check}", "e is not an error bifunction",
                                 report=pre)
    if axioms.positively_homogeneous.refuted:
        raise PreconditionFailed("positive homogeneity of e", "e(lam x, lam y) != lam e(x, y)", report=pre)
    box, _ = _region(f, S, cfg.oracle.radius)
    qcx = check_e_quasiconvex(f, e, box, cfg.sample)
    pre["e_qcx"] = qcx
    if qcx.refuted:
        raise PreconditionFailed("f is e-quasiconvex", "sampled e-quasiconvexity inequality fails", report=pre)
    return pre


def _sweep(f: ScalarFunc, e: ErrorBifunction, cfg: Config, S: FeasibleSet | None) -> list[DirectionRow]:
    rows = []
    dirs = list(sphere(f.arity, cfg))

    def row(u):
        in_cone = True if S is None else asymptotic_cone_membership(S, u)
        if not in_cone:
            return DirectionRow(u.tolist(), math.nan, math.nan, e_at_direction(e, u), False, False)
        fq = estimate_f_q_inf(f, u, cfg)
        e0 = e_at_direction(e, u)
        return DirectionRow(u.tolist(), math.nan, fq.value, e0, bool(fq.value - e0 <= KQ_TOL), True,
                            bool(fq.details.get("sensitive", False)))

    rows = [row(u) for u in dirs]
    if f.arity >= 3:
        live = [r for r in rows if r.in_cone]
        if live:
            worst = min(live, key=lambda r: r.f_q_inf - r.e_u0)
            rng = np.random.default_rng(cfg.seed)
            for _ in range(cfg.asympt.sphere_refine):
                v = np.asarray(worst.u) + 0.05 * rng.standard_normal(f.arity)
                rows.append(row(v / np.linalg.norm(v)))
    return rows


def _certify(f: ScalarFunc, e: ErrorBifunction, cfg: Config | None, S: FeasibleSet | None,
             with_oracle: bool) -> ExistenceReport:
    cfg = cfg or Config()
    if e.arity != f.arity:
        raise ValueError("f and e must share their dimension")
    pre = _preconditions(f, e, cfg, S)
    rows = _sweep(f, e, cfg, S)
    oracle = oracle_minimize(f, S, cfg) if with_oracle else None
    live = [r for r in rows if r.in_cone]
    check = "existence" if S is None else "existence_constrained"
    details = {"directions": len(rows), "in_cone": len(live)}
    if not live:
        cert = Certificate(Status.CERTIFIED, check, margin=math.inf, samples_used=len(rows), seed=cfg.seed,
                           details=dict(details, note="asymptotic cone of the feasible set is {0}"))
        return ExistenceReport(cert, None, math.inf, pre, oracle, [r.to_dict() for r in rows])
    margins = np.array([r.f_q_inf - r.e_u0 for r in live])
    k = int(np.argmin(margins))
    margin, worst = float(margins[k]), live[k]
    qcx_ok = pre["e_qcx"].certified
    if margin <= KQ_TOL and not worst.sensitive:
        status = Status.REFUTED
    elif margin >= cfg.margin_tol and qcx_ok:
        status = Status.CERTIFIED
    else:
        status = Status.INCONCLUSIVE
        if not qcx_ok:
            details["note"] = "e-quasiconvexity of f is not certified"
        elif worst.sensitive:
            details["note"] = "truncation-sensitive estimate in the worst direction"
    details["sensitive_directions"] = int(sum(r.sensitive for r in live))
    witness = {"u": worst.u, "f_q_inf": worst.f_q_inf, "e_u0": worst.e_u0} if status is Status.REFUTED else None
    cert = Certificate(status, check, margin=margin if status is not Status.REFUTED else None, witness=witness,
                       samples_used=len(rows), seed=cfg.seed, details=details)
    return ExistenceReport(cert, worst.u, margin, pre, oracle, [r.to_dict() for r in rows])


def certify_unconstrained(f: ScalarFunc, e: ErrorBifunction, cfg: Config | None = None,
                          with_oracle: bool = True) -> ExistenceReport:
    """Nonempty compact argmin from ``f_q^inf(u) - e(u, 0) > 0`` on every sampled unit ``u``.

    Preconditions on ``e`` (axioms, positive homogeneity) and e-quasiconvexity of
    ``f`` are checked first and raise :class:`PreconditionFailed` when refuted.
    A REFUTED outcome only says the sufficient condition fails; emptiness of the
    argmin is judged by the oracle alone.
    """
    return _certify(f, e, cfg, None, with_oracle)


def certify_constrained(f: ScalarFunc, e: ErrorBifunction, Omega: FeasibleSet, cfg: Config | None = None,
                        with_oracle: bool = True) -> ExistenceReport:
    """Constrained variant: no direction of the asymptotic cone of ``Omega`` may lie in ``K_q(f, e)``."""
    return _certify(f, e, cfg, Omega, with_oracle)

"""Asymptotic objects: recession and q-asymptotic functions, asymptotic cones, K_q."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from equasi.bifunc import ErrorBifunction, e_at_direction
from equasi.certificate import Certificate, Config, Status, SupEstimate, jsonable
from equasi.cert import EPS, _noise
from equasi.funcspec.func import HUGE, Box, ScalarFunc, VectorFunc
from equasi.sampling import in_bounds, lattice, sobol, sphere_directions, unit
from equasi.supremum import estimate_sup_halfline, golden_max

FEAS_TOL = 1e-9
KQ_TOL = 1e-6
# rays are never pushed beyond this radius, well inside the HUGE sentinel
RAY_LIMIT = HUGE / 10


@dataclass(frozen=True)
class Direction:
    """A unit vector."""

    u: tuple[float, ...]

    def __post_init__(self):
        v = np.asarray(self.u, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"direction {v.tolist()} is not a unit vector")
        object.__setattr__(self, "u", tuple(float(c) for c in v))

    @classmethod
    def of(cls, v) -> "Direction":
        return cls(tuple(unit(np.atleast_1d(v))))

    @property
    def vec(self) -> np.ndarray:
        return np.array(self.u)

    @property
    def dim(self) -> int:
        return len(self.u)


def _as_vec(u) -> np.ndarray:
    return u.vec if isinstance(u, Direction) else unit(np.atleast_1d(u))


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """A closed set given as a box, polyhedron ``Ax <= b``, ball or constraint system."""

    kind: str
    dim: int
    box: Box | None = None
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    center: np.ndarray | None = None
    radius: float = 0.0
    g: VectorFunc | None = None
    h: VectorFunc | None = None
    K: Box | None = None

    @classmethod
    def from_box(cls, box: Box) -> "FeasibleSet":
        return cls("box", box.dim, box=box)

    @classmethod
    def whole(cls, n: int) -> "FeasibleSet":
        return cls.from_box(Box.real(n))

    @classmethod
    def polyhedron(cls, A, b) -> "FeasibleSet":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.shape[0] != b.size:
            raise ValueError("A and b have inconsistent shapes")
        return cls("polyhedron", A.shape[1], A=A, b=b)

    @classmethod
    def ball(cls, center, radius: float) -> "FeasibleSet":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        return cls("ball", c.size, center=c, radius=float(radius))

    @classmethod
    def system(cls, g: VectorFunc | None, h: VectorFunc | None, K: Box) -> "FeasibleSet":
        return cls("system", K.dim, g=g or VectorFunc(()), h=h or VectorFunc(()), K=K)

    def contains(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "box":
            return self.box.contains(X)
        if self.kind == "polyhedron":
            return np.all(X @ self.A.T <= self.b + FEAS_TOL, axis=1)
        if self.kind == "ball":
            return np.linalg.norm(X - self.center, axis=1) <= self.radius + FEAS_TOL
        ok = self.K.contains(X)
        if len(self.g):
            ok &= np.all(self.g.values(X) <= FEAS_TOL, axis=1)
        if len(self.h):
            ok &= np.all(np.abs(self.h.values(X)) <= FEAS_TOL, axis=1)
        return ok

    def indicator(self, X) -> np.ndarray:
        return np.where(self.contains(X), 0.0, math.inf)

    def bounding_box(self) -> Box:
        if self.kind == "box":
            return self.box
        if self.kind == "ball":
            return Box(tuple(self.center - self.radius), tuple(self.center + self.radius))
        if self.kind == "system":
            return self.K
        lo = np.full(self.dim, -math.inf)
        hi = np.full(self.dim, math.inf)
        # single-variable rows give explicit bounds
        for a, beta in zip(self.A, self.b):
            nz = np.flatnonzero(a)
            if nz.size == 1:
                i = nz[0]
                if a[i] > 0:
                    hi[i] = min(hi[i], beta / a[i])
                else:
                    lo[i] = max(lo[i], beta / a[i])
        return Box(tuple(lo), tuple(hi))

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", **self.box.to_dict()}
        if self.kind == "polyhedron":
            return {"kind": "polyhedron", "A": self.A.tolist(), "b": self.b.tolist()}
        if self.kind == "ball":
            return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}
        return {"kind": "system", "g": [c.source for c in self.g], "h": [c.source for c in self.h],
                "K": self.K.to_dict()}


# ------------------------------------------------------------ recession function


def _aitken(m: np.ndarray) -> float:
    """Aitken delta-squared limit of the last three terms, or the last term."""
    if len(m) < 3:
        return float(m[-1])
    a, b, c = m[-3:]
    den = (c - b) - (b - a)
    if den == 0 or not np.isfinite(den):
        return float(c)
    r = (c - b) / (b - a) if b != a else 0.0
    if not 0.0 <= r < 1.0:
        return float(c)
    return float(c - (c - b) ** 2 / den)


def _cone(u: np.ndarray, eps: float, seed: int) -> np.ndarray:
    """Directions within a cone of half-width ``eps`` about ``u`` (``u`` itself first)."""
    n = u.size
    if n == 1:
        return np.array([u, u * (1 + eps), u * (1 - eps)])
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((8, n))
    P -= np.outer(P @ u, u)
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    return np.vstack([u, u + eps * P])


def estimate_f_inf(f: ScalarFunc, u, cfg: Config | None = None) -> SupEstimate:
    """``f^inf(u)``: per geometric level ``t``, the minimum of ``f(t u')/t`` over a shrinking cone
    of ``u'`` about ``u``; the level sequence is extrapolated (Aitken) or flagged divergent.

    ``-inf`` is a legitimate outcome (e.g. ``-x^2``) and is reported as the value with
    ``details['limit'] = '-inf'``.
    """
    cfg = cfg or Config()
    u = _as_vec(u)
    t0 = 1.0
    levels = []
    for k in range(cfg.asympt.t_levels + 1):
        t = t0 * 2.0**k
        if t > RAY_LIMIT:
            break
        eps = 0.1 * 2.0 ** (-k / 2)
        U = _cone(u, eps, cfg.seed + k)
        vals = f.values(t * U) / t
        levels.append((k, t, float(np.min(vals))))
    m = np.array([v for *_, v in levels])
    trace = [(k, v) for k, _, v in levels]
    last_t = levels[-1][1]
    cap = cfg.sup.cap
    if np.isinf(m[-1]) and m[-1] > 0 or m[-1] > cap:
        return SupEstimate(math.inf, {"t": last_t}, True, trace)
    if m[-1] < -cap:
        return SupEstimate(-math.inf, {"t": last_t}, False, trace, {"limit": "-inf"})
    tail = m[-6:]
    if np.all(np.diff(tail) >= 0.4 * np.abs(tail[:-1])) and tail[-1] > 0:
        return SupEstimate(math.inf, {"t": last_t}, True, trace)
    return SupEstimate(_aitken(m), {"t": last_t}, False, trace)


def estimate_f_inf_convex(f: ScalarFunc, u, x0=None, cfg: Config | None = None) -> SupEstimate:
    """``sup_t [f(x0 + t u) - f(x0)]/t`` for convex ``f`` (the caller vouches for convexity).

    Two further base points test the independence of ``x0``; their spread is reported.
    """
    cfg = cfg or Config()
    u = _as_vec(u)
    x0 = f.domain.anchor() if x0 is None else np.asarray(x0, dtype=float).reshape(f.arity)
    ts = 2.0 ** np.arange(-20, cfg.asympt.t_levels + 1)
    ts = ts[ts * (1 + np.linalg.norm(x0)) <= RAY_LIMIT]

    def sup_at(base):
        fb = f(base)
        Z = base[None, :] + ts[:, None] * u[None, :]
        q = (f.values(Z) - fb) / ts
        j = int(np.argmax(q))
        return float(q[j]), float(ts[j]), q

    value, targ, q = sup_at(x0)
    others = []
    for shift in (1.0, -1.0):
        base = x0 + shift * np.ones(f.arity)
        if math.isfinite(f(base)):
            others.append(sup_at(base)[0])
    trace = [(k, float(v)) for k, v in enumerate(np.maximum.accumulate(q))]
    diverged = bool(value > cfg.sup.cap or not math.isfinite(value))
    finite = [v for v in [value] + others if math.isfinite(v) and v <= cfg.sup.cap]
    spread = float(max(finite) - min(finite)) if len(finite) > 1 else 0.0
    details = {"assumes": "convex f", "base_points": 1 + len(others), "base_point_spread": spread}
    return SupEstimate(value, {"x0": x0.tolist(), "t": targ}, diverged, trace, details)


# ----------------------------------------------------------- q-asymptotic function


def _t_limit(f: ScalarFunc, x: np.ndarray, u: np.ndarray, radius: float) -> float:
    """Largest useful step: the truncation diameter, or past the domain edge when it is finite."""
    return 2.0 * radius * math.sqrt(f.arity) + 1.0


def _q_rows(f: ScalarFunc, X: np.ndarray, u: np.ndarray, ts: np.ndarray) -> np.ndarray:
    fx = f.values(X)
    Z = (X[:, None, :] + ts[None, :, None] * u[None, None, :]).reshape(-1, f.arity)
    fz = f.values(Z).reshape(len(X), len(ts))
    finite = np.isfinite(fz)
    noise = np.zeros_like(fz)
    if finite.any():
        Zf = Z[finite.ravel()]
        fzf = fz[finite]
        scale = np.abs(fzf) + np.abs(np.broadcast_to(fx[:, None], fz.shape)[finite])
        noise[finite] = _noise(f, Zf, fzf, scale)
    return (fz - fx[:, None] - noise) / ts[None, :]


def _q_point(f: ScalarFunc, x: np.ndarray, u: np.ndarray):
    fx = f(x)

    def q(t: np.ndarray) -> np.ndarray:
        Z = x[None, :] + t[:, None] * u[None, :]
        fz = f.values(Z)
        noise = np.zeros_like(fz)
        ok = np.isfinite(fz)
        if ok.any():
            noise[ok] = _noise(f, Z[ok], fz[ok], np.abs(fz[ok]) + abs(fx))
        return (fz - fx - noise) / t

    return q


def _f_q_round(f: ScalarFunc, u: np.ndarray, radius: float, cfg: Config) -> SupEstimate:
    n = f.arity
    box = f.domain.truncate(radius)
    lo, hi = box.sampling_bounds()
    count = cfg.asympt.x_samples if n == 1 else max(64, cfg.asympt.x_samples // 4)
    X = np.vstack([in_bounds(sobol(count, n, cfg.seed), lo, hi), lattice(lo, hi), box.anchor()[None, :]])
    X = X[np.isfinite(f.values(X))]
    t_lo, t_hi = 1e-6, _t_limit(f, X[0], u, radius)
    ts = np.exp(np.linspace(math.log(t_lo), math.log(t_hi), 97))
    Q = _q_rows(f, X, u, ts)
    if np.any(np.isposinf(Q)):
        i, j = np.unravel_index(int(np.argmax(np.isposinf(Q))), Q.shape)
        return SupEstimate(math.inf, {"x": X[i].tolist(), "t": float(ts[j]), "reason": "leaves dom f"}, True,
                           [(0, math.inf)])
    row_best = np.nanmax(np.where(np.isnan(Q), -np.inf, Q), axis=1)
    order = np.argsort(-row_best, kind="stable")[:8]
    best = SupEstimate(float(row_best[order[0]]), {"x": X[order[0]].tolist()}, False, [(0, float(row_best[order[0]]))])
    for i in order:
        est = estimate_sup_halfline(_q_point(f, X[i], u), t_lo, t_hi, cfg.sup, grid=129)
        if est.diverged:
            return SupEstimate(math.inf, {"x": X[i].tolist(), "t": est.witness}, True, best.trace + [(1, math.inf)])
        if est.value > best.value:
            best.value, best.witness = est.value, {"x": X[i].tolist(), "t": est.witness}
    best.trace.append((1, best.value))
    # compass refinement of the base point around the best sample
    x = np.asarray(best.witness["x"])
    if "t" in best.witness:
        step = (hi - lo) / max(count, 64)
        for _ in range(40):
            improved = False
            for d in np.vstack([np.eye(n), -np.eye(n)]):
                xc = x + step * d
                if not box.contains(xc)[0] or not math.isfinite(f(xc)):
                    continue
                q = _q_point(f, xc, u)
                t_star, v = golden_max(lambda s: float(q(np.array([math.exp(s)]))[0]),
                                       math.log(t_lo), math.log(t_hi), cfg.sup.golden_iters)
                if v > best.value:
                    best.value, best.witness = v, {"x": xc.tolist(), "t": math.exp(t_star)}
                    x, improved = xc, True
                    break
            if not improved:
                step = step / 2
        best.trace.append((2, best.value))
    if best.value > cfg.sup.cap:
        best.diverged = True
        best.value = math.inf
    return best


def estimate_f_q_inf(f: ScalarFunc, u, cfg: Config | None = None) -> SupEstimate:
    """``f_q^inf(u) = sup_x sup_{t>0} [f(x + t u) - f(x)]/t`` by nested sampling.

    The outer supremum runs over a truncation cube grown by ``radius_growth`` for
    ``rounds`` rounds; if the estimate still grows by ``sensitivity`` (relative)
    in the last round, ``details['sensitive']`` is set.
    """
    cfg = cfg or Config()
    u = _as_vec(u)
    ac = cfg.asympt
    radius = ac.radius_factor * (1.0 + float(np.linalg.norm(f.domain.anchor())))
    rounds = []
    best: SupEstimate | None = None
    for r in range(ac.rounds):
        est = _f_q_round(f, u, radius * ac.radius_growth**r, cfg)
        rounds.append(est.value)
        if best is None or est.value > best.value:
            best = est
        if est.diverged:
            break
    trace = [(k, float(v)) for k, v in enumerate(np.maximum.accumulate(rounds))]
    sensitive = False
    if len(rounds) >= 2 and not best.diverged:
        prev, last = trace[-2][1], trace[-1][1]
        sensitive = bool(last - prev > ac.sensitivity * max(abs(prev), 1e-12))
    return SupEstimate(best.value, best.witness, best.diverged, trace,
                       {"rounds": rounds, "sensitive": sensitive, "radius": radius})


# ------------------------------------------------------------------ coercivity


def _sublevel_unbounded(f: ScalarFunc, dirs: np.ndarray, height: float, center: np.ndarray):
    radii = 2.0 ** np.arange(0, 31)
    radii = radii[radii * (1 + np.linalg.norm(center)) <= RAY_LIMIT]
    far = radii[-3:]
    for u in dirs:
        vals = f.values(center[None, :] + far[:, None] * u[None, :])
        if np.all(vals <= height):
            return u
    return None


def sphere(n: int, cfg: Config) -> np.ndarray:
    return sphere_directions(n, cfg.seed, cfg.asympt.sphere_2d, cfg.asympt.sphere_nd)


def coercivity_check(f: ScalarFunc, cfg: Config | None = None) -> Certificate:
    """``f^inf(u) > 0`` on a sphere sample, cross-checked by probing sublevel sets at three heights."""
    cfg = cfg or Config()
    dirs = sphere(f.arity, cfg)
    vals = [estimate_f_inf(f, u, cfg).value for u in dirs]
    k = int(np.argmin(vals))
    margin = float(vals[k])
    center = f.domain.anchor()
    f0 = f(center)
    probe = {}
    unbounded_at = None
    for dh in (1.0, 10.0, 100.0):
        w = _sublevel_unbounded(f, dirs, f0 + dh, center)
        probe[str(dh)] = "unbounded" if w is not None else "bounded"
        if w is not None and unbounded_at is None:
            unbounded_at = (f0 + dh, w)
    details = {"f_inf_min": margin, "worst_direction": dirs[k].tolist(), "sublevel_probe": probe}
    n_used = len(dirs)
    if margin < -cfg.asympt.tol or unbounded_at is not None:
        w = {"u": dirs[k].tolist(), "f_inf": margin}
        if unbounded_at is not None:
            w.update(height=unbounded_at[0], ray=unbounded_at[1].tolist())
        return Certificate(Status.REFUTED, "coercive", witness=w, samples_used=n_used, seed=cfg.seed,
                           details=details)
    if margin >= cfg.asympt.tol:
        return Certificate(Status.CERTIFIED, "coercive", margin=margin, samples_used=n_used, seed=cfg.seed,
                           details=details)
    details["note"] = "coercive but not via f^inf" if all(v == "bounded" for v in probe.values()) else \
        "no positive margin"
    return Certificate(Status.INCONCLUSIVE, "coercive", margin=margin, samples_used=n_used, seed=cfg.seed,
                       details=details)


# ------------------------------------------------------------- asymptotic cones


def _feasible_point(S: FeasibleSet, seed: int = 0) -> np.ndarray | None:
    box = S.bounding_box()
    if not box.is_bounded:
        box = box.truncate(10.0)
    lo, hi = box.sampling_bounds()
    cands = np.vstack([box.anchor()[None, :], lattice(lo, hi), in_bounds(sobol(4096, S.dim, seed), lo, hi)])
    ok = S.contains(cands)
    return cands[int(np.argmax(ok))] if ok.any() else None


def asymptotic_cone_membership(S: FeasibleSet, u) -> bool:
    """Whether ``u`` lies in the asymptotic cone of ``S``."""
    u = _as_vec(u)
    if S.kind == "box":
        box = S.box
        up = (u > 1e-12) & ~box.unbounded_above
        down = (u < -1e-12) & ~box.unbounded_below
        return not (up.any() or down.any())
    if S.kind == "polyhedron":
        return bool(np.all(S.A @ u <= FEAS_TOL))
    if S.kind == "ball":
        return False
    x0 = _feasible_point(S)
    if x0 is None:
        return False
    ts = 2.0 ** np.arange(0, 41)
    ts = ts[ts * (1 + np.linalg.norm(x0)) <= RAY_LIMIT]
    return bool(np.all(S.contains(x0[None, :] + ts[:, None] * u[None, :])))


@dataclass
class KqResult:
    inside: bool
    margin: float
    f_q: SupEstimate
    e_u0: float

    def __bool__(self) -> bool:
        return self.inside

    def to_dict(self) -> dict:
        return jsonable({"inside": self.inside, "margin": self.margin, "f_q_inf": self.f_q.value,
                         "e_u0": self.e_u0, "sensitive": self.f_q.details.get("sensitive", False)})


def kq_membership(f: ScalarFunc, e: ErrorBifunction, u, cfg: Config | None = None,
                  f_q: SupEstimate | None = None) -> KqResult:
    """``u`` in ``K_q(f, e)`` iff ``f_q^inf(u) <= e(u, 0) + tol``; margin is ``f_q^inf(u) - e(u, 0)``."""
    cfg = cfg or Config()
    u = _as_vec(u)
    est = f_q or estimate_f_q_inf(f, u, cfg)
    e0 = e_at_direction(e, u)
    margin = est.value - e0
    return KqResult(bool(margin <= KQ_TOL), float(margin), est, e0)


@dataclass
class DirectionRow:
    u: list
    f_inf: float
    f_q_inf: float
    e_u0: float
    in_kq: bool
    in_cone: bool = True
    sensitive: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable(self.__dict__)


def direction_sweep(f: ScalarFunc, e: ErrorBifunction, cfg: Config | None = None,
                    S: FeasibleSet | None = None, with_f_inf: bool = True) -> list[DirectionRow]:
    """Per-direction table of ``f^inf``, ``f_q^inf``, ``e(u,0)`` and K_q membership."""
    cfg = cfg or Config()
    rows = []
    for u in sphere(f.arity, cfg):
        in_cone = True if S is None else asymptotic_cone_membership(S, u)
        fq = estimate_f_q_inf(f, u, cfg)
        kq = kq_membership(f, e, u, cfg, f_q=fq)
        finf = estimate_f_inf(f, u, cfg).value if with_f_inf else math.nan
        rows.append(DirectionRow(u.tolist(), finf, fq.value, kq.e_u0, kq.inside, in_cone,
                                 bool(fq.details.get("sensitive", False))))
    return rows

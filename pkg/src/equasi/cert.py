"""Minimal error bifunctions and sampled certificates of generalized convexity.

Every value-based check works on triples ``(x, y, t)`` and the slack

    s = e(x, y) - [f(z) - rhs] / (t(1-t)),   z = t x + (1-t) y,

where ``rhs`` is ``max{f(x), f(y)}`` (quasiconvex family) or the convex
combination (convex family).  Slacks below ``-(tol + band)``, with ``band`` a
rounding-error bar for the quotient, refute; the minimum over generic
low-discrepancy samples is the margin.  Lattice and caller-supplied triples only
ever refute, since lattices deliberately hit the symmetric configurations where
the textbook bifunctions are tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from equasi.bifunc import ErrorBifunction
from equasi.certificate import Certificate, SampleConfig, Status, SupConfig, SupEstimate, jsonable
from equasi.errors import RootsNotVerified, TooManyKinks
from equasi.funcspec.expr import BinOp, Call, linear_form, reparent
from equasi.funcspec.func import Box, ScalarFunc
from equasi.sampling import all_pairs, in_bounds, lattice, sobol
from equasi.supremum import estimate_sup

EPS = np.finfo(float).eps
ROOT_TOL = 1e-9

# ------------------------------------------------------------------ helpers


def sampling_box(f: ScalarFunc, box: Box | None, radius: float) -> Box:
    box = f.domain if box is None else box
    if not box.is_bounded:
        box = box.truncate(radius)
    return box


def _noise(f: ScalarFunc, Z: np.ndarray, fz: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Rounding bar for ``f(z) - ...``: value cancellation plus one-ulp sensitivity in ``z``."""
    step = EPS * np.maximum(np.abs(Z), 1e-300)
    jitter = np.zeros_like(fz)
    for sign in (1.0, -1.0):
        fp = f.values(Z + sign * step)
        d = np.where(np.isfinite(fp), np.abs(fp - fz), 0.0)
        jitter = np.maximum(jitter, d)
    return 64 * EPS * scale + 4 * jitter


def _pairs(box: Box, cfg: SampleConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generic Sobol pairs followed by all lattice pairs; returns ``(X, Y, generic_mask)``."""
    n = box.dim
    lo, hi = box.sampling_bounds()
    U = sobol(cfg.pairs, 2 * n, cfg.seed)
    X, Y = in_bounds(U[:, :n], lo, hi), in_bounds(U[:, n:], lo, hi)
    generic = np.ones(len(X), dtype=bool)
    if cfg.lattice:
        LX, LY = all_pairs(lattice(lo, hi))
        X, Y = np.vstack([X, LX]), np.vstack([Y, LY])
        generic = np.concatenate([generic, np.zeros(len(LX), dtype=bool)])
    keep = np.linalg.norm(X - Y, axis=1) > 1e-12 * (1 + np.linalg.norm(X, axis=1) + np.linalg.norm(Y, axis=1))
    return X[keep], Y[keep], generic[keep]


def t_grid(cfg: SampleConfig) -> np.ndarray:
    return np.linspace(cfg.t_min, 1.0 - cfg.t_min, cfg.t_count)


@dataclass
class _Sweep:
    """Running merge of per-sample slacks: minimum generic slack, worst violation, ties."""

    tol: float
    margin: float = math.inf
    margin_at: dict | None = None
    worst: float = 0.0
    witness: dict | None = None
    ties: int = 0
    total: int = 0
    skipped: int = 0

    def add(self, s: np.ndarray, band: np.ndarray, generic: np.ndarray, describe: Callable[[int], dict]):
        self.total += s.size
        viol = s < -(self.tol + band)
        if viol.any():
            excess = np.where(viol, -s, -np.inf)
            k = int(np.argmax(excess))
            if excess[k] > self.worst:
                self.worst = float(excess[k])
                self.witness = describe(k)
        tie = np.abs(s) <= band + self.tol
        exact_tie = s == 0.0
        self.ties += int(np.count_nonzero(exact_tie))
        cand = generic & ~exact_tie & ~viol
        cand &= ~(tie & (s < 0))
        if cand.any():
            m = np.where(cand, s, np.inf)
            k = int(np.argmin(m))
            if m[k] < self.margin:
                self.margin = float(m[k])
                self.margin_at = describe(k)

    def certificate(self, check: str, cfg: SampleConfig, details: dict | None = None) -> Certificate:
        details = dict(details or {})
        details.update(ties=self.ties, skipped=self.skipped)
        if self.witness is not None:
            return Certificate(Status.REFUTED, check, witness=self.witness, samples_used=self.total,
                               seed=cfg.seed, details=details)
        if self.margin == math.inf:
            if self.ties:
                details["note"] = "every sampled slack is an exact tie"
                return Certificate(Status.CERTIFIED, check, margin=0.0, samples_used=self.total,
                                   seed=cfg.seed, details=details)
            details["note"] = "no applicable samples"
            return Certificate(Status.INCONCLUSIVE, check, samples_used=self.total, seed=cfg.seed,
                               details=details)
        details["margin_at"] = self.margin_at
        status = Status.CERTIFIED if self.margin >= cfg.margin_tol else Status.INCONCLUSIVE
        return Certificate(status, check, margin=self.margin, samples_used=self.total, seed=cfg.seed,
                           details=details)


# --------------------------------------------------------- minimal bifunctions


def _quotient(f: ScalarFunc, x: np.ndarray, y: np.ndarray, quasi: bool) -> Callable[[np.ndarray], np.ndarray]:
    fx, fy = f(x), f(y)

    def q(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        Z = t[:, None] * x[None, :] + (1.0 - t)[:, None] * y[None, :]
        fz = f.values(Z)
        base = np.full_like(t, max(fx, fy)) if quasi else t * fx + (1.0 - t) * fy
        num = fz - base
        noise = _noise(f, Z, fz, np.abs(fz) + abs(fx) + abs(fy))
        # conservative: report the quotient minus its rounding bar
        return (num - noise) / (t * (1.0 - t))

    return q


def _estimate(f: ScalarFunc, x, y, cfg: SupConfig | None, quasi: bool) -> SupEstimate:
    x = np.asarray(x, dtype=float).reshape(f.arity)
    y = np.asarray(y, dtype=float).reshape(f.arity)
    if not (math.isfinite(f(x)) and math.isfinite(f(y))):
        raise ValueError("both points must lie in dom f")
    if np.array_equal(x, y):
        return SupEstimate(0.0, None, False, [(0, 0.0)])
    est = estimate_sup(_quotient(f, x, y, quasi), cfg, q_flip=_quotient(f, y, x, quasi))
    if not est.diverged and est.value < 0.0:
        est.value = 0.0
    return est


def estimate_e_f(f: ScalarFunc, x, y, cfg: SupConfig | None = None) -> SupEstimate:
    """Minimal e making ``f`` e-convex on the segment ``[x, y]``: ``max{0, sup_t quotient}``."""
    return _estimate(f, x, y, cfg, quasi=False)


def estimate_tilde_e_f(f: ScalarFunc, x, y, cfg: SupConfig | None = None) -> SupEstimate:
    """Minimal e making ``f`` e-quasiconvex on ``[x, y]`` (max in place of the convex combination)."""
    return _estimate(f, x, y, cfg, quasi=True)


# ------------------------------------------------------ value-based certificates


def _triple_check(
    check: str,
    f: ScalarFunc,
    e: ErrorBifunction,
    box: Box | None,
    cfg: SampleConfig | None,
    quasi: bool,
    extra: Sequence[tuple] | None = None,
) -> Certificate:
    cfg = cfg or SampleConfig()
    box = sampling_box(f, box, cfg.default_radius)
    X, Y, generic = _pairs(box, cfg)
    T = t_grid(cfg)
    sweep = _Sweep(cfg.violation_tol)

    def run(Xc, Yc, Tc, gen_c, source):
        fx, fy = f.values(Xc), f.values(Yc)
        exy = e.values(Xc, Yc)
        ok = np.isfinite(fx) & np.isfinite(fy) & np.isfinite(exy)
        sweep.skipped += int(np.count_nonzero(~ok))
        if not ok.any():
            return
        Xc, Yc, fx, fy, exy, Tc, gen_c = Xc[ok], Yc[ok], fx[ok], fy[ok], exy[ok], Tc[ok], gen_c[ok]
        Z = Tc[:, None] * Xc + (1.0 - Tc)[:, None] * Yc
        fz = f.values(Z)
        base = np.maximum(fx, fy) if quasi else Tc * fx + (1.0 - Tc) * fy
        w = Tc * (1.0 - Tc)
        s = exy - (fz - base) / w
        band = _noise(f, Z, fz, np.abs(fz) + np.abs(fx) + np.abs(fy)) / w + 64 * EPS * exy

        def describe(k: int) -> dict:
            rhs = base[k] + w[k] * exy[k]
            return {
                "x": Xc[k].tolist(), "y": Yc[k].tolist(), "t": float(Tc[k]), "z": Z[k].tolist(),
                "lhs": float(fz[k]), "rhs": float(rhs), "excess": float(fz[k] - rhs),
                "source": source or ("generic" if gen_c[k] else "lattice"),
            }

        sweep.add(s, band, gen_c, describe)

    chunk = max(1, 131072 // len(T))
    for start in range(0, len(X), chunk):
        Xc, Yc = X[start:start + chunk], Y[start:start + chunk]
        P = len(Xc)
        run(
            np.repeat(Xc, len(T), axis=0), np.repeat(Yc, len(T), axis=0), np.tile(T, P),
            np.repeat(generic[start:start + chunk], len(T)), None,
        )
    if extra:
        E = [(np.asarray(a, float).reshape(f.arity), np.asarray(b, float).reshape(f.arity), float(t))
             for a, b, t in extra]
        run(np.array([a for a, _, _ in E]), np.array([b for _, b, _ in E]), np.array([t for *_, t in E]),
            np.zeros(len(E), dtype=bool), "extra")
    details = {"kind": "quasiconvex" if quasi else "convex", "e": str(e), "box": box.to_dict()}
    return sweep.certificate(check, cfg, details)


def check_e_quasiconvex(f: ScalarFunc, e: ErrorBifunction, box: Box | None = None,
                        cfg: SampleConfig | None = None, extra=None) -> Certificate:
    """Sampled check of ``f(z) <= max{f(x), f(y)} + t(1-t) e(x, y)``."""
    return _triple_check("e_quasiconvex", f, e, box, cfg, quasi=True, extra=extra)


def check_e_convex(f: ScalarFunc, e: ErrorBifunction, box: Box | None = None,
                   cfg: SampleConfig | None = None, extra=None) -> Certificate:
    """Sampled check of ``f(z) <= t f(x) + (1-t) f(y) + t(1-t) e(x, y)``."""
    return _triple_check("e_convex", f, e, box, cfg, quasi=False, extra=extra)


def check_quasiconvex(f: ScalarFunc, box: Box | None = None, cfg: SampleConfig | None = None) -> Certificate:
    cert = check_e_quasiconvex(f, ErrorBifunction.zero(f.arity), box, cfg)
    cert.check = "quasiconvex"
    return cert


def check_convex(f: ScalarFunc, box: Box | None = None, cfg: SampleConfig | None = None) -> Certificate:
    cert = check_e_convex(f, ErrorBifunction.zero(f.arity), box, cfg)
    cert.check = "convex"
    return cert


def witness_reverifies(f: ScalarFunc, e: ErrorBifunction, witness: dict, quasi: bool) -> bool:
    """Recompute a triple witness from ``x, y, t`` and confirm ``lhs > rhs``."""
    x, y, t = np.asarray(witness["x"]), np.asarray(witness["y"]), witness["t"]
    z = t * x + (1.0 - t) * y
    fx, fy, fz = f(x), f(y), f(z)
    base = max(fx, fy) if quasi else t * fx + (1.0 - t) * fy
    return fz > base + t * (1.0 - t) * e(x, y)


# ------------------------------------------------------------- divergence test


@dataclass
class DivergenceResult:
    """Outcome of the two-root test: ``NO_E_EXISTS``, ``LOWER_BOUND`` (with value) or ``INCONCLUSIVE``."""

    kind: str
    value: float | None = None
    witness: dict | None = None
    trace: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return jsonable({"kind": self.kind, "value": self.value, "witness": self.witness, "trace": self.trace})


def _root_quotients(f: ScalarFunc, a: np.ndarray, b: np.ndarray, levels: int):
    """Trusted ``(t, lower quotient)`` pairs of ``[f(t a + (1-t) b) - max] / t`` for ``t = 2^-k``."""
    m = max(f(a), f(b))
    ts = 2.0 ** -np.arange(1, levels + 1)
    Z = ts[:, None] * a[None, :] + (1.0 - ts)[:, None] * b[None, :]
    fz = f.values(Z)
    noise = _noise(f, Z, fz, np.abs(fz) + abs(m) + 1.0)
    q = (fz - m) / ts
    err = noise / ts
    trusted = err <= 1e-6 * (1.0 + np.abs(q))
    return ts[trusted], q[trusted], (q - err)[trusted]


def _tail_kind(ts, q, qlow):
    """Classify a shrinking-t quotient sequence as diverging, converging or neither."""
    if len(q) < 6:
        return "INCONCLUSIVE", None
    tail_low = qlow[-8:]
    ratios = tail_low[1:] / np.where(tail_low[:-1] > 0, tail_low[:-1], np.nan)
    if tail_low[0] > 0 and np.all(ratios >= 1.07):
        return "NO_E_EXISTS", None
    d = np.abs(np.diff(q[-8:]))
    if np.all(d <= 1e-9 * (1 + np.abs(q[-1]))):
        return "LOWER_BOUND", float(q[-1])
    shrink = d[1:] <= 0.75 * d[:-1] + 1e-12 * (1 + np.abs(q[-1]))
    if np.count_nonzero(shrink) >= len(shrink) - 2:
        # first-order error in t: Richardson on the halving sequence, median of the tail
        r = 2.0 * q[1:] - q[:-1]
        r2 = (4.0 * r[1:] - r[:-1]) / 3.0
        return "LOWER_BOUND", float(np.median(r2[-4:]))
    return "INCONCLUSIVE", None


def divergence_test(f: ScalarFunc, x1, x2, levels: int = 60) -> DivergenceResult:
    """Two distinct roots of ``f``: a diverging ``f(t x1 + (1-t) x2)/t`` rules out every e.

    Both orderings of the roots are examined; a finite limit bounds ``e(x1, x2)`` from below.
    """
    a = np.asarray(x1, dtype=float).reshape(f.arity)
    b = np.asarray(x2, dtype=float).reshape(f.arity)
    if np.array_equal(a, b):
        raise ValueError("roots must be distinct")
    for p in (a, b):
        v = f(p)
        if not abs(v) <= ROOT_TOL:
            raise RootsNotVerified(f"f({p.tolist()}) = {v} is not a root within {ROOT_TOL}")
    results = []
    for first, second in ((a, b), (b, a)):
        ts, q, qlow = _root_quotients(f, first, second, levels)
        kind, value = _tail_kind(ts, q, qlow)
        witness = None
        if len(ts):
            witness = {"x": first.tolist(), "y": second.tolist(), "t": float(ts[-1]), "quotient": float(q[-1])}
        results.append((kind, value, witness, {"t": ts.tolist(), "q": q.tolist()}))
    trace = {"forward": results[0][3], "backward": results[1][3]}
    for kind, value, witness, _ in results:
        if kind == "NO_E_EXISTS":
            return DivergenceResult(kind, None, witness, trace)
    bounds = [(v, w) for k, v, w, _ in results if k == "LOWER_BOUND"]
    if bounds:
        v, w = max(bounds, key=lambda p: p[0])
        return DivergenceResult("LOWER_BOUND", v, w, trace)
    return DivergenceResult("INCONCLUSIVE", None, None, trace)


# ----------------------------------------------------- gradient-based certificates


def _gradients(f: ScalarFunc, X: np.ndarray):
    _, G, kink = f.dual(X)
    kink = kink | ~np.all(np.isfinite(G), axis=1)
    return G, kink


def _ordered_pairs(box: Box, cfg: SampleConfig):
    X, Y, generic = _pairs(box, cfg)
    return np.vstack([X, Y]), np.vstack([Y, X]), np.concatenate([generic, generic])


def _midpoint_convexity(e: ErrorBifunction, box: Box, cfg: SampleConfig) -> Certificate:
    """Sampled midpoint convexity of ``e(., y)``, an assumption of the first-order test."""
    n = box.dim
    lo, hi = box.sampling_bounds()
    U = sobol(256, 3 * n, cfg.seed + 1)
    A, B, Yp = (in_bounds(U[:, k * n:(k + 1) * n], lo, hi) for k in range(3))
    lhs = e.values(0.5 * (A + B), Yp)
    rhs = 0.5 * (e.values(A, Yp) + e.values(B, Yp))
    s = rhs - lhs
    tol = 1e-12 * (1 + np.abs(rhs))
    if np.any(s < -tol):
        k = int(np.argmin(s))
        return Certificate(Status.REFUTED, "e_convex_in_first_argument", seed=cfg.seed, samples_used=256,
                           witness={"x1": A[k].tolist(), "x2": B[k].tolist(), "y": Yp[k].tolist()})
    return Certificate(Status.CERTIFIED, "e_convex_in_first_argument", margin=float(s.min()),
                       samples_used=256, seed=cfg.seed)


def first_order_check(f: ScalarFunc, e: ErrorBifunction, box: Box | None = None,
                      cfg: SampleConfig | None = None, cross_check: bool = True) -> Certificate:
    """Sampled check of ``f(y) <= f(x)  =>  <grad f(x), y - x> <= e(x, y)``.

    Kinks are skipped and counted; more than ``cfg.max_kink_fraction`` of them
    raises :class:`TooManyKinks`.  A CERTIFIED outcome is cross-checked against
    2e-quasiconvexity, which the implication entails.
    """
    cfg = cfg or SampleConfig()
    box = sampling_box(f, box, cfg.default_radius)
    X, Y, generic = _ordered_pairs(box, cfg)
    fx, fy = f.values(X), f.values(Y)
    G, kink = _gradients(f, X)
    frac = float(np.mean(kink)) if kink.size else 0.0
    if frac > cfg.max_kink_fraction:
        raise TooManyKinks(f"{frac:.1%} of sampled points sit on kinks of {f.name}")
    exy = e.values(X, Y)
    premise = (fy <= fx) & ~kink & np.isfinite(exy)
    D = Y - X
    inner = np.einsum("ij,ij->i", G, D)
    s = exy - inner
    band = 64 * EPS * (np.abs(G) @ np.ones(f.arity) * np.linalg.norm(D, axis=1) + np.abs(exy))
    sweep = _Sweep(cfg.violation_tol)
    sweep.skipped = int(np.count_nonzero(kink))
    idx = np.flatnonzero(premise)

    def describe(k: int) -> dict:
        i = idx[k]
        return {"x": X[i].tolist(), "y": Y[i].tolist(), "f_x": float(fx[i]), "f_y": float(fy[i]),
                "lhs": float(inner[i]), "rhs": float(exy[i])}

    sweep.add(s[idx], band[idx], generic[idx], describe)
    details = {"kinks": int(np.count_nonzero(kink)), "premise_count": int(idx.size)}
    details["e_vanishing_diagonal"] = bool(np.all(e.values(X, X) == 0.0))
    details["e_convex_in_first_argument"] = _midpoint_convexity(e, box, cfg).status.value
    cert = sweep.certificate("first_order", cfg, details)
    if cross_check and cert.certified:
        twice = check_e_quasiconvex(f, e.scale(2.0), box, cfg)
        cert.details["cross_check_2e_quasiconvex"] = twice.status.value
        if twice.refuted:
            cert.status = Status.INCONCLUSIVE
            cert.details["note"] = "first-order test passed but 2e-quasiconvexity is refuted"
    return cert


def check_pseudoconvex(f: ScalarFunc, box: Box | None = None, cfg: SampleConfig | None = None) -> Certificate:
    """Sampled check of ``<grad f(x), y - x> >= 0  =>  f(y) >= f(x)``."""
    cfg = cfg or SampleConfig()
    box = sampling_box(f, box, cfg.default_radius)
    X, Y, generic = _ordered_pairs(box, cfg)
    fx, fy = f.values(X), f.values(Y)
    G, kink = _gradients(f, X)
    frac = float(np.mean(kink)) if kink.size else 0.0
    if frac > cfg.max_kink_fraction:
        raise TooManyKinks(f"{frac:.1%} of sampled points sit on kinks of {f.name}")
    inner = np.einsum("ij,ij->i", G, Y - X)
    idx = np.flatnonzero((inner >= 0) & ~kink)
    s = fy - fx
    band = 64 * EPS * (np.abs(fx) + np.abs(fy))
    sweep = _Sweep(cfg.violation_tol)
    sweep.skipped = int(np.count_nonzero(kink))

    def describe(k: int) -> dict:
        i = idx[k]
        return {"x": X[i].tolist(), "y": Y[i].tolist(), "inner": float(inner[i]),
                "f_x": float(fx[i]), "f_y": float(fy[i])}

    sweep.add(s[idx], band[idx], generic[idx], describe)
    return sweep.certificate("pseudoconvex", cfg, {"kinks": int(np.count_nonzero(kink)),
                                                   "premise_count": int(idx.size)})


# --------------------------------------------------------------- structural


def shifted(f: ScalarFunc, slope) -> ScalarFunc:
    """``f + <slope, .>`` as a new expression-backed function."""
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    if slope.size != f.arity:
        raise ValueError("slope dimension must match the arity")
    if not np.any(slope):
        return f
    root = BinOp("+", f.expr.root, linear_form(slope))
    return ScalarFunc(reparent(f.expr, root), f.domain, f"{f.name}+<{slope.tolist()},x>")


def linear_shift_check(f: ScalarFunc, e: ErrorBifunction, slopes, box: Box | None = None,
                       cfg: SampleConfig | None = None) -> Certificate:
    """Run the e-quasiconvexity check on ``f + <s, .>`` for every slope ``s``.

    All shifts passing is evidence for e-convexity of ``f``; one refuted shift
    shows that ``f`` is not e-convex.
    """
    cfg = cfg or SampleConfig()
    slopes = [np.atleast_1d(np.asarray(s, dtype=float)) for s in slopes]
    if not slopes:
        raise ValueError("slopes must be nonempty")
    per_slope = []
    margins = []
    used = 0
    for s in slopes:
        c = check_e_quasiconvex(shifted(f, s), e, box, cfg)
        used += c.samples_used
        per_slope.append({"slope": s.tolist(), "status": c.status.value, "margin": c.margin})
        if c.refuted:
            w = dict(c.witness, slope=s.tolist())
            return Certificate(Status.REFUTED, "linear_shift", witness=w, samples_used=used,
                               seed=cfg.seed, details={"per_slope": per_slope})
        margins.append(c.margin if c.certified else None)
    if all(m is not None for m in margins):
        return Certificate(Status.CERTIFIED, "linear_shift", margin=min(margins), samples_used=used,
                           seed=cfg.seed, details={"per_slope": per_slope})
    return Certificate(Status.INCONCLUSIVE, "linear_shift", samples_used=used, seed=cfg.seed,
                       details={"per_slope": per_slope})


def _shared_domain(fs: Sequence[ScalarFunc]) -> Box:
    dom = fs[0].domain
    for g in fs[1:]:
        if g.arity != fs[0].arity:
            raise ValueError("functions must share their arity")
        if g.domain != dom:
            raise ValueError("functions must share their domain")
    return dom


def combine_sup(fs: Sequence[ScalarFunc], name: str | None = None) -> ScalarFunc:
    """Pointwise supremum ``max_i f_i``."""
    fs = list(fs)
    if not fs:
        raise ValueError("need at least one function")
    dom = _shared_domain(fs)
    if len(fs) == 1:
        return fs[0]
    root = Call("max", tuple(g.expr.root for g in fs))
    return ScalarFunc(reparent(fs[0].expr, root), dom, name or "sup(" + ",".join(g.name for g in fs) + ")")


def combine_sum(f: ScalarFunc, g: ScalarFunc, comonotone_check: bool = False, box: Box | None = None,
                cfg: SampleConfig | None = None, name: str | None = None) -> tuple[ScalarFunc, Certificate | None]:
    """Pointwise sum; optionally verify ``(f(x)-f(y))(g(x)-g(y)) >= 0`` on sampled pairs."""
    dom = _shared_domain([f, g])
    h = ScalarFunc(reparent(f.expr, BinOp("+", f.expr.root, g.expr.root)), dom, name or f"{f.name}+{g.name}")
    if not comonotone_check:
        return h, None
    cfg = cfg or SampleConfig()
    box = sampling_box(f, box, cfg.default_radius)
    X, Y, generic = _pairs(box, cfg)
    prod = (f.values(X) - f.values(Y)) * (g.values(X) - g.values(Y))
    sweep = _Sweep(cfg.violation_tol)

    def describe(k: int) -> dict:
        return {"x": X[k].tolist(), "y": Y[k].tolist(), "product": float(prod[k])}

    band = 64 * EPS * (np.abs(prod) + 1e-300)
    sweep.add(prod, band, generic, describe)
    cert = sweep.certificate("comonotone", cfg)
    if cert.status is Status.INCONCLUSIVE and cert.margin is not None and cert.margin >= 0:
        # zero products (equal values) are allowed: comonotonicity is a >= 0 test
        cert.status = Status.CERTIFIED
    return h, cert

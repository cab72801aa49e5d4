"""Execute the requests of a problem specification and assemble a ``report_v1`` document."""

from __future__ import annotations

import json
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np

from equasi import __version__
from equasi.asympt import (
    coercivity_check,
    direction_sweep,
    estimate_f_inf,
    estimate_f_q_inf,
    kq_membership,
    asymptotic_cone_membership,
)
from equasi.bifunc import ErrorBifunction, check_axioms
from equasi.cert import (
    check_convex,
    check_e_convex,
    check_e_quasiconvex,
    check_pseudoconvex,
    check_quasiconvex,
    divergence_test,
    estimate_e_f,
    estimate_tilde_e_f,
    first_order_check,
    linear_shift_check,
)
from equasi.certificate import jsonable
from equasi.cli.spec import ProblemSpec, _make_box, candidate_of
from equasi.errors import EquasiError, HypothesisFailed, PreconditionFailed, TooManyKinks
from equasi.existence import certify_constrained, certify_unconstrained, local_min_probe, oracle_minimize
from equasi.kkt import (
    active_set,
    certify_global_theo_suff,
    certify_main_theo2,
    check_kkt_system,
    search_multipliers,
)

SCHEMA = "report_v1"


def _failure(exc: EquasiError) -> dict:
    """Refuted hypotheses are outcomes, not errors: report them as such."""
    if isinstance(exc, PreconditionFailed):
        out = {"status": "PRECONDITION_FAILED", "assumption": exc.assumption, "detail": exc.detail}
        if exc.report is not None:
            out["report"] = exc.report
        return out
    return {"status": "HYPOTHESIS_FAILED", "detail": exc.detail, "witness": exc.witness}


# -------------------------------------------------------------------- blocks


def _classify(spec: ProblemSpec, req: dict) -> dict:
    f = spec.functions[req["f"]]
    e = spec.bifunctions.get(req.get("e"))
    box = _make_box(req["box"]) if "box" in req else None
    cfg = spec.config
    runs: dict[str, Callable] = {
        "quasiconvex": lambda: check_quasiconvex(f, box, cfg.sample),
        "convex": lambda: check_convex(f, box, cfg.sample),
        "e_quasiconvex": lambda: check_e_quasiconvex(f, e, box, cfg.sample),
        "e_convex": lambda: check_e_convex(f, e, box, cfg.sample),
        "first_order": lambda: first_order_check(f, e, box, cfg.sample),
        "pseudoconvex": lambda: check_pseudoconvex(f, box, cfg.sample),
        "coercive": lambda: coercivity_check(f, cfg),
    }
    out = {}
    for name in req["checks"]:
        try:
            out[name] = runs[name]().to_dict()
        except TooManyKinks as exc:
            out[name] = {"status": "SKIPPED", "reason": str(exc)}
    if "shift_slopes" in req:
        out["linear_shift"] = linear_shift_check(f, e, np.array(req["shift_slopes"]), box, cfg.sample).to_dict()
    return {"checks": out}


def _ebif(spec: ProblemSpec, req: dict) -> dict:
    f = spec.functions[req["f"]]
    cfg = spec.config
    out: dict = {}
    if req["pairs"]:
        rows = []
        for x, y in req["pairs"]:
            ef, tef = estimate_e_f(f, x, y, cfg.sup), estimate_tilde_e_f(f, x, y, cfg.sup)
            rows.append({"x": x, "y": y, "e_f": ef.value, "e_f_diverged": ef.diverged,
                         "tilde_e_f": tef.value, "tilde_e_f_diverged": tef.diverged,
                         "e_f_witness_t": ef.witness, "tilde_e_f_witness_t": tef.witness})
        out["pairs"] = rows
    if req["roots"]:
        out["divergence"] = [dict(divergence_test(f, a, b).to_dict(), roots=[a, b]) for a, b in req["roots"]]
    if "e" in req:
        out["axioms"] = check_axioms(spec.bifunctions[req["e"]], seed=cfg.seed).to_dict()
    return out


def _asympt(spec: ProblemSpec, req: dict) -> dict:
    f = spec.functions[req["f"]]
    e = spec.bifunctions.get(req.get("e")) or ErrorBifunction.zero(f.arity)
    S = spec.sets.get(req.get("set"))
    cfg = spec.config
    out: dict = {"e": str(e)}
    if "directions" in req:
        rows = []
        for u in req["directions"]:
            fq = estimate_f_q_inf(f, u, cfg)
            kq = kq_membership(f, e, u, cfg, f_q=fq)
            row = {"u": u, "f_q_inf": fq.value, "e_u0": kq.e_u0, "in_kq": kq.inside,
                   "sensitive": bool(fq.details.get("sensitive", False))}
            if req["f_inf"]:
                row["f_inf"] = estimate_f_inf(f, u, cfg).value
            if S is not None:
                row["in_cone"] = asymptotic_cone_membership(S, u)
            rows.append(row)
        out["sweep"] = rows
    else:
        out["sweep"] = [r.to_dict() for r in direction_sweep(f, e, cfg, S, req["f_inf"])]
    if req["coercivity"]:
        out["coercivity"] = coercivity_check(f, cfg).to_dict()
    return out


def _exist(spec: ProblemSpec, req: dict) -> dict:
    f = spec.functions[req["f"]]
    e = spec.bifunctions[req["e"]]
    S = spec.sets.get(req.get("set"))
    try:
        if S is None:
            rep = certify_unconstrained(f, e, spec.config, with_oracle=req["oracle"])
        else:
            rep = certify_constrained(f, e, S, spec.config, with_oracle=req["oracle"])
    except (PreconditionFailed, HypothesisFailed) as exc:
        return _failure(exc)
    return rep.to_dict()


def _kkt(spec: ProblemSpec, req: dict) -> dict:
    P = spec.programs[req["program"]]
    cfg = spec.config
    out: dict = {}
    if "candidate" not in req:
        return out
    cand = candidate_of(req)
    out["active_set"] = list(active_set(P, cand.xbar).labels)
    for mode in req["modes"]:
        try:
            if mode == "system":
                out["system"] = check_kkt_system(P, cand, cfg).to_dict()
            elif mode == "suff":
                out["suff"] = certify_global_theo_suff(P, cand, cfg).to_dict()
            else:
                out["main"] = certify_main_theo2(P, cand, cfg, req["enforce_hypothesis"]).to_dict()
        except (PreconditionFailed, HypothesisFailed) as exc:
            out[mode] = _failure(exc)
    if req["search_multipliers"]:
        out["multipliers"] = search_multipliers(P, cand.xbar, cfg).to_dict()
    return out


def _minimize(spec: ProblemSpec, req: dict) -> dict:
    f = spec.functions[req["f"]]
    S = spec.sets.get(req.get("set"))
    res = oracle_minimize(f, S, spec.config, local=req["local"], radius=req.get("radius"))
    out = res.to_dict()
    if "probe" in req:
        p = req["probe"]
        out["probe"] = {"x": p["x"], "delta": p["delta"], "verdict": local_min_probe(f, p["x"], p["delta"])}
    return out


BLOCKS = {"classify": _classify, "ebif": _ebif, "asympt": _asympt, "exist": _exist, "kkt": _kkt,
          "minimize": _minimize}


# -------------------------------------------------------------------- report


def run(spec: ProblemSpec, kinds: tuple[str, ...] | None = None, ids: tuple[str, ...] | None = None) -> tuple[dict, dict]:
    """Run requests in declaration order; returns ``(report, timings)``.

    The report is a pure function of the specification and seed.  Wall times
    and the timestamp live in the separate timings document.
    """
    blocks, times = [], {}
    start = time.perf_counter()
    for req in spec.requests:
        if kinds and req["kind"] not in kinds or ids and req["id"] not in ids:
            continue
        t0 = time.perf_counter()
        block = {"id": req["id"], "kind": req["kind"], "request": req}
        try:
            block["result"] = jsonable(BLOCKS[req["kind"]](spec, req))
            block["ok"] = True
        except Exception as exc:  # embedded per block; the run continues
            block["ok"] = False
            block["error"] = {"type": type(exc).__name__, "message": str(exc)}
        blocks.append(block)
        times[req["id"]] = round(time.perf_counter() - t0, 6)
    report = {
        "schema": SCHEMA,
        "toolkit": {"name": "equasi", "version": __version__},
        "spec": spec.to_dict(),
        "config": spec.config.to_dict(),
        "blocks": blocks,
        "errors": sum(not b["ok"] for b in blocks),
    }
    timings = {
        "schema": SCHEMA,
        "spec": spec.name,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "blocks": times,
        "total": round(time.perf_counter() - start, 6),
    }
    return report, timings


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def write_report(report: dict, timings: dict, path) -> Path:
    """Write ``path`` and the timings sidecar ``<stem>.timings.json`` next to it."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps_report(report), encoding="utf-8")
    p.with_name(p.stem + ".timings.json").write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
    return p


def block_status(block: dict) -> str:
    """One-word summary of a block for terminal output."""
    if not block["ok"]:
        return "ERROR"
    r = block["result"]
    if "status" in r:
        return str(r["status"])
    statuses = []
    for v in r.values():
        if isinstance(v, dict) and "status" in v:
            statuses.append(str(v["status"]))
        elif isinstance(v, dict):
            statuses.extend(str(w["status"]) for w in v.values() if isinstance(w, dict) and "status" in w)
    if "divergence" in r:
        statuses.extend(d["kind"] for d in r["divergence"])
    return ",".join(statuses) if statuses else "DONE"

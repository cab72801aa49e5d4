"""Problem specifications: TOML or JSON files naming functions, bifunctions, sets, programs and requests."""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

from equasi.asympt import FeasibleSet
from equasi.bifunc import KINDS, ErrorBifunction
from equasi.certificate import Config, jsonable
from equasi.errors import DimensionMismatch, ExpressionSyntaxError, ParseError, UnknownIdentifier, UnresolvedReference
from equasi.funcspec.expr import BinOp, Call, Neg, Var, parse_expression
from equasi.funcspec.func import Box, ScalarFunc, VectorFunc
from equasi.kkt import KKTCandidate, MathProgram

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

REQUEST_KINDS = ("classify", "ebif", "asympt", "exist", "kkt", "minimize")
TOP_KEYS = {"name", "description", "seed", "config", "functions", "bifunctions", "sets", "programs", "requests"}
CLASSIFY_CHECKS = ("quasiconvex", "convex", "e_quasiconvex", "e_convex", "first_order", "pseudoconvex", "coercive")
KKT_MODES = ("system", "suff", "main")


# ------------------------------------------------------------------ helpers


def _has_var(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Neg):
        return _has_var(node.arg)
    if isinstance(node, BinOp):
        return _has_var(node.left) or _has_var(node.right)
    if isinstance(node, Call):
        return any(_has_var(a) for a in node.args)
    return False


def _number(v: Any, where: str) -> float:
    """A float from a number or a constant expression such as ``"-pi"`` or ``"inf"``."""
    if isinstance(v, bool):
        raise ParseError("expected a number", where)
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        s = v.strip()
        if s in ("inf", "+inf", "-inf"):
            return -math.inf if s.startswith("-") else math.inf
        try:
            tree = parse_expression(s, 1)
        except (ExpressionSyntaxError, UnknownIdentifier) as exc:
            raise ParseError(str(exc), where) from exc
        if _has_var(tree.root):
            raise ParseError(f"{s!r} is not a constant", where)
        return float(ScalarFunc(tree, Box.real(1))([0.0]))
    raise ParseError(f"expected a number, got {type(v).__name__}", where)


def _vector(v: Any, where: str) -> list[float]:
    if isinstance(v, (int, float, str)) and not isinstance(v, bool):
        return [_number(v, where)]
    if not isinstance(v, list) or not v:
        raise ParseError("expected a nonempty list of numbers", where)
    return [_number(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _table(v: Any, where: str) -> dict:
    if not isinstance(v, dict):
        raise ParseError("expected a table", where)
    return v


def _check_keys(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ParseError(f"unknown key(s) {sorted(extra)}", where)


def _box(d: dict, where: str, dim: int | None = None) -> dict:
    _check_keys(d, {"lower", "upper", "open"}, where)
    if "lower" not in d or "upper" not in d:
        raise ParseError("box needs 'lower' and 'upper'", where)
    lo, hi = _vector(d["lower"], f"{where}.lower"), _vector(d["upper"], f"{where}.upper")
    if len(lo) != len(hi):
        raise DimensionMismatch("lower and upper differ in length", where)
    if dim is not None and len(lo) != dim:
        raise DimensionMismatch(f"box has dimension {len(lo)}, expected {dim}", where)
    return {"lower": lo, "upper": hi, "open": bool(d.get("open", False))}


def _make_box(b: dict) -> Box:
    n = len(b["lower"])
    flags = (b["open"],) * n
    return Box(tuple(b["lower"]), tuple(b["upper"]), flags, flags)


def _ref(d: dict, key: str, pool: dict, where: str, required: bool = True) -> str | None:
    name = d.get(key)
    if name is None:
        if required:
            raise ParseError(f"missing {key!r}", where)
        return None
    if not isinstance(name, str):
        raise ParseError(f"{key!r} must be a name", where)
    if name not in pool:
        raise UnresolvedReference(name, f"{where}.{key}")
    return name


# -------------------------------------------------------------------- schema


@dataclass
class ProblemSpec:
    """Normalised specification plus the objects it names."""

    data: dict
    functions: dict[str, ScalarFunc] = field(default_factory=dict)
    bifunctions: dict[str, ErrorBifunction] = field(default_factory=dict)
    sets: dict[str, FeasibleSet] = field(default_factory=dict)
    programs: dict[str, MathProgram] = field(default_factory=dict)
    config: Config = field(default_factory=Config)
    path: str | None = None

    @property
    def name(self) -> str:
        return self.data.get("name", "")

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    @property
    def requests(self) -> list[dict]:
        return self.data.get("requests", [])

    def to_dict(self) -> dict:
        return json.loads(json.dumps(jsonable(self.data)))

    def with_overrides(self, seed: int | None = None, config: dict | None = None) -> "ProblemSpec":
        """A copy with a different seed and/or merged config overrides."""
        data = json.loads(json.dumps(jsonable(self.data)))
        if seed is not None:
            data["seed"] = int(seed)
        for section, values in (config or {}).items():
            if isinstance(values, dict):
                data.setdefault("config", {}).setdefault(section, {}).update(values)
            else:
                data.setdefault("config", {})[section] = values
        return build_spec(_decode(data), self.path)


def _decode(obj):
    """Undo the ``"inf"`` string encoding used in JSON."""
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    if obj in ("inf", "-inf"):
        return math.inf if obj == "inf" else -math.inf
    return obj


def _function(name: str, d: dict, where: str) -> tuple[dict, ScalarFunc]:
    _check_keys(d, {"expr", "arity", "domain"}, where)
    if "expr" not in d or not isinstance(d["expr"], str):
        raise ParseError("function needs a string 'expr'", where)
    arity = d.get("arity", 1)
    if not isinstance(arity, int) or arity < 1:
        raise ParseError("arity must be a positive integer", f"{where}.arity")
    norm: dict[str, Any] = {"expr": d["expr"], "arity": arity}
    domain = None
    if "domain" in d:
        norm["domain"] = _box(_table(d["domain"], f"{where}.domain"), f"{where}.domain", arity)
        domain = _make_box(norm["domain"])
    try:
        f = ScalarFunc.from_source(d["expr"], arity, domain, name)
    except (ExpressionSyntaxError, UnknownIdentifier) as exc:
        raise ParseError(str(exc), f"{where}.expr") from exc
    return norm, f


def _bifunction(name: str, d: dict, where: str) -> tuple[dict, ErrorBifunction]:
    _check_keys(d, {"kind", "c", "expr", "arity", "symmetrize"}, where)
    kind = d.get("kind", "custom" if "expr" in d else "zero")
    if kind not in KINDS:
        raise ParseError(f"unknown bifunction kind {kind!r}", f"{where}.kind")
    arity = d.get("arity", 1)
    norm: dict[str, Any] = {"kind": kind, "arity": arity}
    try:
        if kind == "custom":
            if not isinstance(d.get("expr"), str):
                raise ParseError("custom bifunction needs 'expr'", where)
            norm["expr"] = d["expr"]
            norm["symmetrize"] = bool(d.get("symmetrize", False))
            e = ErrorBifunction.custom(d["expr"], arity, symmetrize=norm["symmetrize"], name=name)
        elif kind == "zero":
            e = ErrorBifunction("zero", 0.0, arity, name=name)
        else:
            norm["c"] = _number(d.get("c", 1.0), f"{where}.c")
            e = ErrorBifunction(kind, norm["c"], arity, name=name)
    except (ExpressionSyntaxError, UnknownIdentifier, ValueError) as exc:
        raise ParseError(str(exc), where) from exc
    return norm, e


def _set(name: str, d: dict, where: str, functions: dict) -> tuple[dict, FeasibleSet]:
    kind = d.get("kind", "box")
    if kind == "box":
        _check_keys(d, {"kind", "lower", "upper", "open"}, where)
        b = _box({k: v for k, v in d.items() if k != "kind"}, where)
        return {"kind": "box", **b}, FeasibleSet.from_box(_make_box(b))
    if kind == "polyhedron":
        _check_keys(d, {"kind", "A", "b"}, where)
        A = d.get("A")
        if not isinstance(A, list) or not A:
            raise ParseError("polyhedron needs a nonempty 'A'", where)
        rows = [_vector(r, f"{where}.A[{i}]") for i, r in enumerate(A)]
        if len({len(r) for r in rows}) != 1:
            raise DimensionMismatch("rows of A differ in length", f"{where}.A")
        b = _vector(d.get("b", []), f"{where}.b")
        if len(b) != len(rows):
            raise DimensionMismatch("A and b have inconsistent shapes", where)
        return {"kind": kind, "A": rows, "b": b}, FeasibleSet.polyhedron(rows, b)
    if kind == "ball":
        _check_keys(d, {"kind", "center", "radius"}, where)
        c = _vector(d.get("center"), f"{where}.center")
        r = _number(d.get("radius", 1.0), f"{where}.radius")
        if r < 0:
            raise ParseError("radius must be nonnegative", f"{where}.radius")
        return {"kind": kind, "center": c, "radius": r}, FeasibleSet.ball(c, r)
    if kind == "system":
        _check_keys(d, {"kind", "g", "h", "K"}, where)
        K = _box(_table(d.get("K"), f"{where}.K"), f"{where}.K")
        kbox = _make_box(K)
        comps = {}
        for key in ("g", "h"):
            names = d.get(key, [])
            if not isinstance(names, list):
                raise ParseError(f"{key!r} must be a list of names", where)
            for n in names:
                _ref({"x": n}, "x", functions, f"{where}.{key}")
                if functions[n].arity != kbox.dim:
                    raise DimensionMismatch(f"{n} has arity {functions[n].arity}, K has {kbox.dim}", where)
            comps[key] = VectorFunc(tuple(functions[n].with_domain(kbox, n) for n in names))
        return ({"kind": kind, "g": list(d.get("g", [])), "h": list(d.get("h", [])), "K": K},
                FeasibleSet.system(comps["g"], comps["h"], kbox))
    raise ParseError(f"unknown set kind {kind!r}", f"{where}.kind")


def _program(name: str, d: dict, where: str, functions: dict, bifs: dict) -> tuple[dict, MathProgram]:
    _check_keys(d, {"f", "g", "h", "K", "e"}, where)
    fname = _ref(d, "f", functions, where)
    f = functions[fname]
    n = f.arity
    K = _box(_table(d["K"], f"{where}.K"), f"{where}.K", n) if "K" in d else None
    kbox = _make_box(K) if K else f.domain
    lists = {}
    for key, pool in (("g", functions), ("h", functions), ("e", bifs)):
        names = d.get(key, [])
        if not isinstance(names, list):
            raise ParseError(f"{key!r} must be a list of names", where)
        for i, nm in enumerate(names):
            if not isinstance(nm, str):
                raise ParseError("expected a name", f"{where}.{key}[{i}]")
            if nm not in pool:
                raise UnresolvedReference(nm, f"{where}.{key}[{i}]")
            if pool[nm].arity != n:
                raise DimensionMismatch(f"{nm} has arity {pool[nm].arity}, {fname} has {n}", f"{where}.{key}[{i}]")
        lists[key] = names
    if lists["e"] and len(lists["e"]) != len(lists["g"]):
        raise DimensionMismatch(f"{len(lists['g'])} constraints but {len(lists['e'])} bifunctions", f"{where}.e")
    P = MathProgram(
        f.with_domain(kbox, fname),
        VectorFunc(tuple(functions[g].with_domain(kbox, g) for g in lists["g"])),
        VectorFunc(tuple(functions[h].with_domain(kbox, h) for h in lists["h"])),
        kbox,
        tuple(bifs[e] for e in lists["e"]),
    )
    norm = {"f": fname, "g": lists["g"], "h": lists["h"], "e": lists["e"]}
    if K:
        norm["K"] = K
    return norm, P


def _points(v, where: str, n: int, per: int | None = None) -> list:
    """A list of points (or of point tuples of length ``per``), each of dimension ``n``."""
    if not isinstance(v, list):
        raise ParseError("expected a list", where)
    out = []
    for i, item in enumerate(v):
        loc = f"{where}[{i}]"
        if per is None:
            p = _vector(item, loc)
            if len(p) != n:
                raise DimensionMismatch(f"point has dimension {len(p)}, expected {n}", loc)
            out.append(p)
        else:
            if not isinstance(item, list) or len(item) != per:
                raise ParseError(f"expected {per} points", loc)
            out.append(_points(item, loc, n))
    return out


def _request(i: int, d: dict, spec: ProblemSpec) -> dict:
    where = f"requests[{i}]"
    kind = d.get("kind")
    if kind not in REQUEST_KINDS:
        raise ParseError(f"unknown request kind {kind!r}; expected one of {REQUEST_KINDS}", f"{where}.kind")
    norm: dict[str, Any] = {"kind": kind, "id": str(d.get("id", f"{kind}-{i + 1}"))}
    common = {"kind", "id"}
    F, E, S = spec.functions, spec.bifunctions, spec.sets
    if kind == "kkt":
        _check_keys(d, common | {"program", "candidate", "modes", "search_multipliers", "enforce_hypothesis"}, where)
        pname = _ref(d, "program", spec.programs, where)
        P = spec.programs[pname]
        norm["program"] = pname
        if "candidate" in d:
            c = _table(d["candidate"], f"{where}.candidate")
            _check_keys(c, {"x", "u", "v"}, f"{where}.candidate")
            cand = {"x": _vector(c.get("x"), f"{where}.candidate.x"),
                    "u": _vector(c["u"], f"{where}.candidate.u") if c.get("u") else [],
                    "v": _vector(c["v"], f"{where}.candidate.v") if c.get("v") else []}
            for key, want in (("x", P.n), ("u", P.m), ("v", P.k)):
                if len(cand[key]) != want:
                    raise DimensionMismatch(f"candidate.{key} has length {len(cand[key])}, expected {want}",
                                            f"{where}.candidate.{key}")
            norm["candidate"] = cand
        modes = d.get("modes", ["system"] if "candidate" in d else [])
        if not isinstance(modes, list) or any(m not in KKT_MODES for m in modes):
            raise ParseError(f"modes must be a list drawn from {KKT_MODES}", f"{where}.modes")
        if modes and "candidate" not in d:
            raise ParseError("modes need a candidate", where)
        norm["modes"] = modes
        norm["search_multipliers"] = bool(d.get("search_multipliers", False))
        if norm["search_multipliers"] and "candidate" not in d:
            raise ParseError("search_multipliers needs candidate.x", where)
        norm["enforce_hypothesis"] = bool(d.get("enforce_hypothesis", True))
        return norm

    fname = _ref(d, "f", F, where)
    n = F[fname].arity
    norm["f"] = fname

    def opt_e(required=False):
        ename = _ref(d, "e", E, where, required)
        if ename is not None:
            if E[ename].arity != n:
                raise DimensionMismatch(f"{ename} has arity {E[ename].arity}, {fname} has {n}", f"{where}.e")
            norm["e"] = ename

    def opt_set():
        sname = _ref(d, "set", S, where, False)
        if sname is not None:
            if S[sname].dim != n:
                raise DimensionMismatch(f"set {sname} has dimension {S[sname].dim}, {fname} has {n}", f"{where}.set")
            norm["set"] = sname

    def opt_box():
        if "box" in d:
            norm["box"] = _box(_table(d["box"], f"{where}.box"), f"{where}.box", n)

    if kind == "classify":
        _check_keys(d, common | {"f", "e", "box", "checks", "shift_slopes"}, where)
        opt_e()
        opt_box()
        checks = d.get("checks", [c for c in CLASSIFY_CHECKS if "e" in norm or not c.startswith("e_")])
        if not isinstance(checks, list) or any(c not in CLASSIFY_CHECKS for c in checks):
            raise ParseError(f"checks must be drawn from {CLASSIFY_CHECKS}", f"{where}.checks")
        if "e" not in norm and any(c in ("e_quasiconvex", "e_convex", "first_order") for c in checks):
            raise ParseError("e-checks need 'e'", where)
        norm["checks"] = checks
        if "shift_slopes" in d:
            if "e" not in norm:
                raise ParseError("shift_slopes needs 'e'", where)
            norm["shift_slopes"] = _points(d["shift_slopes"], f"{where}.shift_slopes", n)
    elif kind == "ebif":
        _check_keys(d, common | {"f", "e", "pairs", "roots"}, where)
        opt_e()
        norm["pairs"] = _points(d.get("pairs", []), f"{where}.pairs", n, per=2)
        norm["roots"] = _points(d.get("roots", []), f"{where}.roots", n, per=2)
        if not (norm["pairs"] or norm["roots"] or "e" in norm):
            raise ParseError("ebif needs pairs, roots or e", where)
    elif kind == "asympt":
        _check_keys(d, common | {"f", "e", "set", "directions", "coercivity", "f_inf"}, where)
        opt_e()
        opt_set()
        if "directions" in d:
            norm["directions"] = _points(d["directions"], f"{where}.directions", n)
            if any(not any(u) for u in norm["directions"]):
                raise ParseError("directions must be nonzero", f"{where}.directions")
        norm["coercivity"] = bool(d.get("coercivity", False))
        norm["f_inf"] = bool(d.get("f_inf", True))
    elif kind == "exist":
        _check_keys(d, common | {"f", "e", "set", "oracle"}, where)
        opt_e(required=True)
        opt_set()
        norm["oracle"] = bool(d.get("oracle", True))
    elif kind == "minimize":
        _check_keys(d, common | {"f", "set", "local", "radius", "probe"}, where)
        opt_set()
        norm["local"] = bool(d.get("local", False))
        if "radius" in d:
            norm["radius"] = _number(d["radius"], f"{where}.radius")
        if "probe" in d:
            p = _table(d["probe"], f"{where}.probe")
            _check_keys(p, {"x", "delta"}, f"{where}.probe")
            pts = _points([p.get("x")], f"{where}.probe.x", n)
            norm["probe"] = {"x": pts[0], "delta": _number(p.get("delta", 0.5), f"{where}.probe.delta")}
    return norm


def build_spec(raw: dict, path: str | None = None) -> ProblemSpec:
    """Validate a decoded document and resolve every name it references."""
    if not isinstance(raw, dict) or not raw:
        raise ParseError("empty specification")
    _check_keys(raw, TOP_KEYS, "")
    data: dict[str, Any] = {}
    for key in ("name", "description"):
        if key in raw:
            data[key] = str(raw[key])
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ParseError("seed must be a nonnegative integer", "seed")
    data["seed"] = seed
    spec = ProblemSpec(data, path=path)
    cfg_raw = _table(raw.get("config", {}), "config")
    try:
        spec.config = Config.from_dict(dict(cfg_raw, seed=seed))
    except (KeyError, TypeError) as exc:
        raise ParseError(str(exc), "config") from exc
    data["config"] = cfg_raw

    data["functions"] = {}
    for name, d in _table(raw.get("functions", {}), "functions").items():
        data["functions"][name], spec.functions[name] = _function(name, _table(d, f"functions.{name}"),
                                                                  f"functions.{name}")
    data["bifunctions"] = {}
    for name, d in _table(raw.get("bifunctions", {}), "bifunctions").items():
        data["bifunctions"][name], spec.bifunctions[name] = _bifunction(name, _table(d, f"bifunctions.{name}"),
                                                                        f"bifunctions.{name}")
    data["sets"] = {}
    for name, d in _table(raw.get("sets", {}), "sets").items():
        data["sets"][name], spec.sets[name] = _set(name, _table(d, f"sets.{name}"), f"sets.{name}",
                                                   spec.functions)
    data["programs"] = {}
    for name, d in _table(raw.get("programs", {}), "programs").items():
        data["programs"][name], spec.programs[name] = _program(name, _table(d, f"programs.{name}"),
                                                               f"programs.{name}", spec.functions,
                                                               spec.bifunctions)
    reqs = raw.get("requests", [])
    if not isinstance(reqs, list) or not reqs:
        raise ParseError("at least one request is required", "requests")
    data["requests"] = [_request(i, _table(r, f"requests[{i}]"), spec) for i, r in enumerate(reqs)]
    ids = [r["id"] for r in data["requests"]]
    if len(set(ids)) != len(ids):
        raise ParseError("request ids must be unique", "requests")
    return spec


def loads_spec(text: str, fmt: str, path: str | None = None) -> ProblemSpec:
    if not text.strip():
        raise ParseError("empty specification", path or "")
    try:
        raw = json.loads(text) if fmt == "json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ParseError(str(exc), path or "") from exc
    return build_spec(_decode(raw), path)


def load_spec(path) -> ProblemSpec:
    """Load a ``.toml`` or ``.json`` specification."""
    p = Path(path)
    fmt = p.suffix.lower().lstrip(".")
    if fmt not in ("toml", "json"):
        raise ParseError(f"unsupported extension {p.suffix!r} (use .toml or .json)", str(p))
    return loads_spec(p.read_text(encoding="utf-8"), fmt, str(p))


def dumps_spec(spec: ProblemSpec, fmt: str = "toml") -> str:
    data = spec.to_dict()
    if fmt == "json":
        return json.dumps(data, indent=2, sort_keys=True) + "\n"
    return tomli_w.dumps(_decode(_drop_empty(data)))


def _drop_empty(d):
    if isinstance(d, dict):
        return {k: _drop_empty(v) for k, v in d.items() if v != {}}
    if isinstance(d, list):
        return [_drop_empty(v) for v in d]
    return d


def save_spec(spec: ProblemSpec, path) -> None:
    p = Path(path)
    p.write_text(dumps_spec(spec, p.suffix.lower().lstrip(".")), encoding="utf-8")


def candidate_of(req: dict) -> KKTCandidate:
    c = req["candidate"]
    return KKTCandidate(np.array(c["x"]), np.array(c["u"]), np.array(c["v"]))

"""Command-line entry point ``equasi``."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from equasi.cli.plots import emit_plot_data
from equasi.cli.runner import block_status, dumps_report, run, write_report
from equasi.cli.spec import REQUEST_KINDS, ProblemSpec, build_spec, load_spec
from equasi.errors import SpecError
from equasi.sampling import worker_count

EXIT_OK, EXIT_BLOCK_ERROR, EXIT_SPEC_ERROR = 0, 1, 2


def corpus_dir() -> Path:
    return Path(str(resources.files("equasi.cli") / "corpus"))


def corpus_files() -> list[Path]:
    return sorted(corpus_dir().glob("*.toml"))


# ------------------------------------------------------------ inline specs


def _ebif_entry(text: str) -> dict:
    """``zero``, ``dist:C``, ``square:C`` or a custom expression in ``x``/``y``."""
    t = text.strip()
    if t == "zero":
        return {"kind": "zero"}
    for prefix, kind in (("dist:", "scaled_distance"), ("square:", "scaled_square")):
        if t.startswith(prefix):
            return {"kind": kind, "c": float(t[len(prefix):])}
    return {"kind": "custom", "expr": t}


def _point(text: str) -> list:
    return [v.strip() for v in text.split(",")]


def _pair(text: str) -> list:
    parts = text.split(";")
    if len(parts) != 2:
        raise SpecError(f"expected 'x;y', got {text!r}")
    return [_point(p) for p in parts]


def _inline_spec(args, kind: str) -> dict:
    arity = args.arity
    raw: dict = {"name": f"inline_{kind}", "functions": {"f": {"expr": args.f, "arity": arity}}, "bifunctions": {}}
    req: dict = {"kind": kind, "id": kind}
    if kind == "kkt":
        names = []
        for i, g in enumerate(args.g or []):
            raw["functions"][f"g{i + 1}"] = {"expr": g, "arity": arity}
            names.append(f"g{i + 1}")
        hs = []
        for j, h in enumerate(args.h or []):
            raw["functions"][f"h{j + 1}"] = {"expr": h, "arity": arity}
            hs.append(f"h{j + 1}")
        es = []
        for i, e in enumerate(args.e or []):
            raw["bifunctions"][f"e{i + 1}"] = dict(_ebif_entry(e), arity=arity)
            es.append(f"e{i + 1}")
        prog = {"f": "f", "g": names, "h": hs, "e": es}
        if args.K:
            lo, hi = args.K.split(";")
            prog["K"] = {"lower": _point(lo), "upper": _point(hi), "open": True}
        raw["programs"] = {"P": prog}
        req["program"] = "P"
    else:
        req["f"] = "f"
        if args.e:
            raw["bifunctions"]["e"] = dict(_ebif_entry(args.e[0]), arity=arity)
            req["e"] = "e"
    if kind == "classify" and args.checks:
        req["checks"] = args.checks.split(",")
    if kind == "ebif":
        req["pairs"] = [_pair(p) for p in args.pair or []]
        req["roots"] = [_pair(p) for p in args.roots or []]
    if kind == "asympt":
        if args.direction:
            req["directions"] = [_point(d) for d in args.direction]
        req["coercivity"] = args.coercivity
    if kind == "minimize":
        req["local"] = args.local
        if args.probe:
            x, delta = args.probe.split(";")
            req["probe"] = {"x": _point(x), "delta": delta}
    raw["requests"] = [req]
    return raw


def _candidate(text: str) -> dict:
    """``x=0,u=0.3,v=`` with ``|`` separating vector entries, e.g. ``x=1|2,u=0.5``."""
    out: dict = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, _, val = part.partition("=")
        key = key.strip()
        if key not in ("x", "u", "v"):
            raise SpecError(f"unknown candidate field {key!r}")
        out[key] = [v for v in val.split("|") if v.strip()]
    if "x" not in out:
        raise SpecError("candidate needs x")
    return out


# -------------------------------------------------------------------- commands


def _overrides(args) -> dict:
    cfg: dict = {}
    if getattr(args, "samples", None) is not None:
        cfg["sample"] = {"pairs": args.samples}
    if getattr(args, "grid", None) is not None:
        cfg.setdefault("sup", {})["grid"] = args.grid
    if getattr(args, "cap", None) is not None:
        cfg.setdefault("sup", {})["cap"] = args.cap
    if getattr(args, "tol", None) is not None:
        cfg["margin_tol"] = args.tol
    return cfg


def _prepare(spec: ProblemSpec, args) -> ProblemSpec:
    return spec.with_overrides(args.seed, _overrides(args))


def _emit(report: dict, timings: dict, out: str | None) -> int:
    for b in report["blocks"]:
        print(f"{b['id']:<28} {b['kind']:<9} {block_status(b)}", file=sys.stderr)
    if out:
        write_report(report, timings, out)
    else:
        sys.stdout.write(dumps_report(report))
    return EXIT_OK if report["errors"] == 0 else EXIT_BLOCK_ERROR


def cmd_run(args) -> int:
    spec = _prepare(load_spec(args.spec), args)
    report, timings = run(spec, kinds=tuple(args.only.split(",")) if args.only else None)
    return _emit(report, timings, args.out)


def cmd_analysis(args) -> int:
    kind = args.command
    if args.spec:
        spec = load_spec(args.spec)
        if kind == "kkt" and (args.candidate or args.search_multipliers):
            raw = spec.to_dict()
            prog = args.program or next(iter(raw.get("programs", {})), None)
            req = {"kind": "kkt", "id": "kkt-cli", "program": prog, "modes": args.mode.split(",") if args.mode else []}
            if args.candidate:
                req["candidate"] = _candidate(args.candidate)
                req["modes"] = req["modes"] or ["system"]
            req["search_multipliers"] = args.search_multipliers
            req["enforce_hypothesis"] = not args.no_enforce
            raw["requests"] = [req]
            spec = build_spec(raw, args.spec)
            kinds = None
        else:
            kinds = (kind,)
    else:
        if not args.f:
            raise SpecError("give a specification file or --f")
        raw = _inline_spec(args, kind)
        if kind == "kkt":
            if not args.candidate:
                raise SpecError("kkt needs --candidate")
            raw["requests"][0]["candidate"] = _candidate(args.candidate)
            raw["requests"][0]["modes"] = args.mode.split(",") if args.mode else ["system"]
            raw["requests"][0]["search_multipliers"] = args.search_multipliers
            raw["requests"][0]["enforce_hypothesis"] = not args.no_enforce
        spec = build_spec(raw)
        kinds = None
    spec = _prepare(spec, args)
    report, timings = run(spec, kinds=kinds)
    return _emit(report, timings, args.out)


def cmd_plotdata(args) -> int:
    report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    for p in emit_plot_data(report, args.out or "."):
        print(p)
    return EXIT_OK


def run_corpus(out_dir, seed: int | None = None, overrides: dict | None = None) -> list[tuple[str, dict, dict]]:
    """Run every corpus specification; files run concurrently up to ``EQUASI_THREADS``."""

    def one(path: Path):
        spec = load_spec(path).with_overrides(seed, overrides)
        report, timings = run(spec)
        if out_dir is not None:
            write_report(report, timings, Path(out_dir) / f"{path.stem}.json")
        return path.stem, report, timings

    files = corpus_files()
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        return list(pool.map(one, files))


def cmd_corpus(args) -> int:
    if args.action == "list":
        for p in corpus_files():
            print(p.stem)
        return EXIT_OK
    results = run_corpus(args.out, args.seed, _overrides(args))
    errors = 0
    for name, report, timings in results:
        errors += report["errors"]
        for b in report["blocks"]:
            print(f"{name:<18} {b['id']:<24} {block_status(b):<24} {timings['blocks'][b['id']]:.2f}s")
    return EXIT_OK if errors == 0 else EXIT_BLOCK_ERROR


# ------------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="override the specification seed")
    p.add_argument("--samples", type=int, default=None, help="sampled pairs per certificate")
    p.add_argument("--grid", type=int, default=None, help="coarse grid size of the sup estimator")
    p.add_argument("--cap", type=float, default=None, help="divergence cap of the sup estimator")
    p.add_argument("--tol", type=float, default=None, help="margin tolerance for CERTIFIED verdicts")
    p.add_argument("--out", default=None, help="output file (reports) or directory (plot data, corpus)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equasi", description="Numerical certificates for e-quasiconvex analysis.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every request of a specification")
    p.add_argument("spec")
    p.add_argument("--only", default=None, help="comma-separated request kinds to run")
    _common(p)
    p.set_defaults(func=cmd_run)

    for kind in REQUEST_KINDS:
        p = sub.add_parser(kind, help=f"run {kind} requests of a specification, or one inline request")
        p.add_argument("spec", nargs="?", default=None)
        p.add_argument("--f", default=None, help="inline objective expression")
        p.add_argument("--arity", type=int, default=1)
        p.add_argument("--e", action="append", help="bifunction: zero, dist:C, square:C or an expression")
        _common(p)
        if kind == "classify":
            p.add_argument("--checks", default=None)
        if kind == "ebif":
            p.add_argument("--pair", action="append", help="'x;y' with comma-separated coordinates")
            p.add_argument("--roots", action="append", help="'x1;x2' roots for the divergence test")
        if kind == "asympt":
            p.add_argument("--direction", action="append")
            p.add_argument("--coercivity", action="store_true")
        if kind == "minimize":
            p.add_argument("--local", action="store_true")
            p.add_argument("--probe", default=None, help="'x;delta' local-minimum probe")
        if kind == "kkt":
            p.add_argument("--g", action="append", help="inequality constraint g_i <= 0")
            p.add_argument("--h", action="append", help="equality constraint h_j = 0")
            p.add_argument("--K", default=None, help="open box 'lower;upper'")
            p.add_argument("--program", default=None)
            p.add_argument("--candidate", default=None, help="x=...,u=...,v=... ('|' separates entries)")
            p.add_argument("--mode", default=None, help="comma-separated: system, suff, main")
            p.add_argument("--search-multipliers", action="store_true")
            p.add_argument("--no-enforce", action="store_true", help="report instead of raising on a failed hypothesis")
        p.set_defaults(func=cmd_analysis)

    p = sub.add_parser("plotdata", help="CSV plot data from a report")
    p.add_argument("report")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser("corpus", help="the bundled example corpus")
    p.add_argument("action", choices=("run", "list"))
    _common(p)
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

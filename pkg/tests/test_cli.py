from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from equasi.cli import dumps_spec, emit_plot_data, load_spec, loads_spec, run, save_spec
from equasi.cli.main import corpus_dir, corpus_files, main
from equasi.cli.runner import dumps_report
from equasi.errors import DimensionMismatch, ParseError, UnresolvedReference

CORPUS = ["example_3_2_i", "example_3_2_ii", "example_4_2", "kkt_sin", "remark_3_3", "sin_sqrt",
          "strict_local_min"]

SMALL = """
name = "tiny"
seed = 3
[functions.f]
expr = "x^2"
[bifunctions.e]
kind = "zero"
[[requests]]
kind = "ebif"
id = "pairs"
f = "f"
pairs = [[[1.0], [-1.0]]]
[[requests]]
kind = "minimize"
id = "min"
f = "f"
"""


def _blocks(report):
    return {b["id"]: b for b in report["blocks"]}


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ------------------------------------------------------------------ loading


def test_corpus_is_complete():
    assert [p.stem for p in corpus_files()] == CORPUS


def test_load_corpus_example():
    spec = load_spec(corpus_dir() / "example_4_2.toml")
    assert "f" in spec.functions
    e = spec.data["bifunctions"]["e"]
    assert e["kind"] == "scaled_distance" and e["c"] == 2.0
    assert any(r["kind"] == "exist" for r in spec.requests)


def test_empty_file_is_parse_error(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    with pytest.raises(ParseError):
        load_spec(p)


def test_unresolved_bifunction(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text('[functions.f]\nexpr = "x^2"\n[[requests]]\nkind = "exist"\nf = "f"\ne = "e9"\n')
    with pytest.raises(UnresolvedReference) as info:
        load_spec(p)
    assert info.value.name == "e9"


def test_dimension_mismatch():
    text = '[functions.f]\nexpr = "x1 + x2"\narity = 2\n[bifunctions.e]\nkind = "zero"\narity = 1\n' \
           '[[requests]]\nkind = "exist"\nf = "f"\ne = "e"\n'
    with pytest.raises(DimensionMismatch):
        loads_spec(text, "toml")


def test_unknown_key_is_parse_error():
    with pytest.raises(ParseError):
        loads_spec('bogus = 1\n[functions.f]\nexpr = "x"\n', "toml")


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("fmt", ["toml", "json"])
def test_round_trip(tmp_path, name, fmt):
    spec = load_spec(corpus_dir() / f"{name}.toml")
    path = tmp_path / f"{name}.{fmt}"
    save_spec(spec, path)
    again = load_spec(path)
    assert again.to_dict() == spec.to_dict()
    assert dumps_spec(again, fmt) == dumps_spec(spec, fmt)


def test_constant_expressions_in_numbers():
    spec = load_spec(corpus_dir() / "sin_sqrt.toml")
    roots = next(r for r in spec.requests if r["kind"] == "ebif")["roots"]
    assert roots[0][1][0] == pytest.approx(math.pi**2)


# ------------------------------------------------------------------ running


def test_run_corpus_examples(corpus_run):
    runs, _ = corpus_run
    exist = _blocks(runs["example_4_2"][0])["existence"]["result"]
    assert exist["status"] == "CERTIFIED" and exist["margin"] >= 3.8 - 1e-4
    div = next(b for b in runs["sin_sqrt"][0]["blocks"] if b["kind"] == "ebif")["result"]["divergence"]
    assert div[0]["kind"] == "NO_E_EXISTS"
    kkt = _blocks(runs["kkt_sin"][0])["candidate-0"]["result"]
    assert kkt["system"]["status"] == "CERTIFIED" and kkt["suff"]["status"] == "CERTIFIED"


def test_corpus_has_no_block_errors_and_is_fast(corpus_run):
    runs, wall = corpus_run
    assert all(rep["errors"] == 0 for rep, _ in runs.values())
    assert wall < 60.0


def test_preconditions_are_outcomes_not_errors(corpus_run):
    runs, _ = corpus_run
    b = _blocks(runs["example_3_2_ii"][0])["homogeneity-required"]
    assert b["ok"] and b["result"]["status"] == "PRECONDITION_FAILED"


def test_report_schema_and_timings(corpus_run):
    rep, tim = corpus_run[0]["example_4_2"]
    assert rep["schema"] == "report_v1" and rep["toolkit"]["name"] == "equasi"
    assert "timestamp" not in json.dumps(rep)
    assert set(tim["blocks"]) == {b["id"] for b in rep["blocks"]}


def test_run_is_deterministic():
    spec = loads_spec(SMALL, "toml")
    a, _ = run(spec)
    b, _ = run(spec)
    assert dumps_report(a) == dumps_report(b)
    assert _blocks(a)["pairs"]["result"]["pairs"][0]["e_f"] == 0.0


def test_block_errors_are_embedded():
    spec = loads_spec(SMALL.replace('pairs = [[[1.0], [-1.0]]]', 'roots = [[[1.0], [-1.0]]]'), "toml")
    rep, _ = run(spec)
    b = _blocks(rep)["pairs"]
    assert not b["ok"] and b["error"]["type"] == "RootsNotVerified" and rep["errors"] == 1


# ------------------------------------------------------------------ plot data


def test_plot_data_example_4_2(tmp_path, corpus_run):
    rep = corpus_run[0]["example_4_2"][0]
    files = {p.name: p for p in emit_plot_data(rep, tmp_path)}
    header, rows = _read_csv(files["example_4_2_f.csv"])
    assert header == ["x", "f"] and len(rows) == 2001
    xs, fs = np.array(rows, dtype=float).T
    assert fs.min() == pytest.approx(0.0, abs=1e-12)
    assert sorted(xs[fs <= 1e-12]) == pytest.approx([-1.0, 1.0])
    assert np.all(fs[np.abs(xs) >= 3] == 6.0)
    header, rows = _read_csv(files["example_4_2_directions_directions.csv"])
    assert header == ["u", "f_q_inf", "e_u0", "f_inf"]
    table = {float(r[0]): (float(r[1]), float(r[2])) for r in rows}
    assert sorted(table) == [-1.0, 1.0]
    assert all(fq >= 5.8 and e0 == 2.0 for fq, e0 in table.values())


def test_plot_data_parabola(tmp_path):
    rep, _ = run(loads_spec(SMALL, "toml"))
    (path,) = emit_plot_data(rep, tmp_path)
    _, rows = _read_csv(path)
    xs, fs = np.array(rows, dtype=float).T
    k = int(np.argmin(fs))
    assert (xs[k], fs[k]) == (0.0, 0.0)
    assert np.allclose(fs, xs**2)


def test_plot_data_two_dimensional(tmp_path):
    text = 'name = "bowl"\n[functions.f]\nexpr = "x1^2 + x2^2"\narity = 2\n' \
           '[[requests]]\nkind = "minimize"\nid = "min"\nf = "f"\n'
    rep, _ = run(loads_spec(text, "toml"))
    (path,) = emit_plot_data(rep, tmp_path)
    header, rows = _read_csv(path)
    assert header == ["x1", "x2", "f"] and len(rows) == 201**2


# ------------------------------------------------------------------ command line


def test_cli_run_writes_report_and_sidecar(tmp_path, capsys):
    spec = tmp_path / "tiny.toml"
    spec.write_text(SMALL)
    out = tmp_path / "out" / "tiny.json"
    assert main(["run", str(spec), "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["spec"]["seed"] == 3
    assert (tmp_path / "out" / "tiny.timings.json").exists()


def test_cli_seed_override(tmp_path, capsys):
    spec = tmp_path / "tiny.toml"
    spec.write_text(SMALL)
    assert main(["run", str(spec), "--seed", "11"]) == 0
    assert json.loads(capsys.readouterr().out)["spec"]["seed"] == 11


def test_cli_exit_codes(tmp_path, capsys):
    missing = tmp_path / "nope.toml"
    assert main(["run", str(missing)]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.replace('pairs = [[[1.0], [-1.0]]]', 'roots = [[[1.0], [-1.0]]]'))
    assert main(["run", str(bad)]) == 1
    empty = tmp_path / "empty.toml"
    empty.write_text("")
    assert main(["run", str(empty)]) == 2


def test_cli_refuted_is_exit_zero(capsys):
    assert main(["classify", "--f=-x^2", "--e", "zero", "--checks", "e_quasiconvex", "--samples", "256"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["blocks"][0]["result"]["checks"]["e_quasiconvex"]["status"] == "REFUTED"


def test_cli_inline_kkt(capsys):
    args = ["kkt", "--f=-x", "--g", "sin(x)", "--e", "dist:2", "--K=-pi;pi", "--candidate", "x=0,u=0.5"]
    assert main(args) == 0
    res = json.loads(capsys.readouterr().out)["blocks"][0]["result"]
    assert res["system"]["status"] == "REFUTED" and res["active_set"] == [1]


def test_cli_inline_ebif_divergence(capsys):
    assert main(["ebif", "--f", "sin(sqrt(abs(x)))", "--roots", "0;pi^2"]) == 0
    res = json.loads(capsys.readouterr().out)["blocks"][0]["result"]
    assert res["divergence"][0]["kind"] == "NO_E_EXISTS"


def test_cli_plotdata(tmp_path, capsys):
    spec = tmp_path / "tiny.toml"
    spec.write_text(SMALL)
    out = tmp_path / "tiny.json"
    main(["run", str(spec), "--out", str(out)])
    capsys.readouterr()
    assert main(["plotdata", str(out), "--out", str(tmp_path / "plots")]) == 0
    assert (tmp_path / "plots" / "tiny_f.csv").exists()


def test_cli_corpus_list(capsys):
    assert main(["corpus", "list"]) == 0
    assert capsys.readouterr().out.split() == CORPUS

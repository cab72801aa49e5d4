"""CSV plot data: function graphs and direction sweeps, rebuilt from a report alone."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from equasi.cli.spec import _decode, build_spec

GRID_1D = 2001
GRID_2D = 201
HALF_WIDTH = 5.0


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def function_grid(f, half_width: float = HALF_WIDTH, n1: int = GRID_1D, n2: int = GRID_2D):
    """Grid points and values over ``dom f`` clipped to the cube of the given half-width."""
    box = f.domain.truncate(half_width)
    lo, hi = box.sampling_bounds()
    if f.arity == 1:
        X = np.linspace(lo[0], hi[0], n1)[:, None]
    else:
        axes = [np.linspace(a, b, n2) for a, b in zip(lo, hi)]
        X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    return X, f.values(X)


def _write(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def emit_plot_data(report: dict, out_dir, half_width: float = HALF_WIDTH) -> list[Path]:
    """One CSV per 1D/2D function of the report's specification and one per direction sweep."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = build_spec(_decode(report["spec"]))
    files = []
    prefix = spec.name or "spec"
    for name, f in spec.functions.items():
        if f.arity > 2:
            continue
        X, V = function_grid(f, half_width)
        header = ["x", "f"] if f.arity == 1 else ["x1", "x2", "f"]
        files.append(_write(out / f"{prefix}_{name}.csv", header, (list(x) + [v] for x, v in zip(X, V))))
    for block in report["blocks"]:
        sweep = block.get("result", {}).get("sweep") if block.get("ok") else None
        if not sweep:
            continue
        n = len(sweep[0]["u"])
        ucols = ["u"] if n == 1 else [f"u{i + 1}" for i in range(n)]
        rows = ([*r["u"], r["f_q_inf"], r["e_u0"], r.get("f_inf", "nan")] for r in sweep)
        files.append(_write(out / f"{prefix}_{block['id']}_directions.csv", ucols + ["f_q_inf", "e_u0", "f_inf"], rows))
    return files

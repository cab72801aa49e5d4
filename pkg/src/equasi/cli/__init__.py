"""Batch front end: specifications, reports, plot data and the bundled corpus."""

from equasi.cli.plots import emit_plot_data
from equasi.cli.runner import run
from equasi.cli.spec import ProblemSpec, dumps_spec, load_spec, loads_spec, save_spec

__all__ = ["ProblemSpec", "dumps_spec", "emit_plot_data", "load_spec", "loads_spec", "run", "save_spec"]

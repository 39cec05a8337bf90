"""Simulator and complexity analyzer for synchronous and asynchronous SGD."""

import json

from ._core import *  # noqa: F401,F403
from ._core import (
    __version__,
    analyze_json,
    complexity_report_json,
    load_spec_json,
    run_gap_json,
    run_sweep as _run_sweep,
)


def complexity_report(taus, consts):
    """Closed-form complexities for fixed times as a dict."""
    return json.loads(complexity_report_json(list(taus), consts))


def load_spec(path):
    """Parsed and validated experiment spec as a dict."""
    return json.loads(load_spec_json(str(path)))


def run_sweep(spec_path, out_dir=""):
    """Run a sweep, write its report and return the summary dict."""
    return json.loads(_run_sweep(str(spec_path), str(out_dir)))


def run_gap(spec_path):
    """Lower/upper recursion gap study as a dict."""
    return json.loads(run_gap_json(str(spec_path)))


def analyze(spec_path):
    """Complexity report for a spec as a dict."""
    return json.loads(analyze_json(str(spec_path)))

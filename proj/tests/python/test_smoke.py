import json
import math
import os
from pathlib import Path

import pytest

import ssgd

SPECS = Path(os.environ.get("SSGD_SPECS_DIR", Path(__file__).resolve().parents[2] / "specs"))


def test_version():
    assert ssgd.__version__.count(".") == 2


def test_problem_oracle_is_unbiased():
    prob = ssgd.QuadraticProblem(30, 0.25)
    x = [0.3 * (i % 7) for i in range(12)] + [0.0] * 18
    heads = prob.stochastic_gradient(x, True)
    tails = prob.stochastic_gradient(x, False)
    exact = prob.gradient(x)
    for h, t, g in zip(heads, tails, exact):
        assert abs(0.25 * h + 0.75 * t - g) < 1e-12
    assert prob.objective(prob.minimizer()) == pytest.approx(prob.optimal_value)
    assert ssgd.prog(x) == 12


def test_simulate_wall_clock():
    sync = ssgd.simulate("sync", 0.1, taus=[1, 2, 5], max_iterations=3, dim=20)
    assert sync["time"][-1] == 15.0
    m_sync = ssgd.simulate("m_sync", 0.1, taus=[1, 2, 5], m=2, max_iterations=2, dim=20)
    assert m_sync["time"][-1] == 4.0
    assert m_sync["iterations"] == 2


def test_simulate_with_delays_and_profiles():
    delays = [ssgd.DelayDistribution.uniform(0.5, 1.5)] * 4
    a = ssgd.simulate("rennala", 0.5, delays=delays, batch=2, time_budget=50, dim=20, seed=3)
    b = ssgd.simulate("rennala", 0.5, delays=delays, batch=2, time_budget=50, dim=20, seed=3)
    assert a["f"] == b["f"]
    assert max(a["time"]) <= 50
    profiles = ssgd.chaotic_profiles(4, 0.1, 100.0, 1)
    c = ssgd.simulate("async", 0.05, profiles=profiles, time_budget=40, dim=20)
    assert c["gradients_discarded"] == 0
    with pytest.raises(ValueError):
        ssgd.simulate("sync", 0.1, taus=[1], delays=delays, max_iterations=1)
    with pytest.raises(ValueError):
        ssgd.simulate("m_sync", 0.1, taus=[1, 2], m=5, max_iterations=1)


def test_stall_raises():
    dead = ssgd.PowerProfile(1.0, [1.0, 1.0, 0.0])
    with pytest.raises(ssgd.StalledError):
        ssgd.simulate("async", 0.1, profiles=[dead], max_iterations=10, dim=5)


def test_power_profile():
    p = ssgd.constant_profile(4.0)
    assert p.time_to_complete(0.0, 2.0) == 0.5
    assert ssgd.PowerProfile(2.0, [0.0, 2.0]).integrate(0.0, 2.0) == pytest.approx(2.0)
    profiles = ssgd.periodic_profiles(3, 0.1, 5.0, 2)
    back = ssgd.profiles_from_csv(ssgd.profiles_to_csv(profiles))
    assert [q.values for q in back] == [q.values for q in profiles]


def test_estimate_r():
    assert ssgd.estimate_R([0.0, 2.0]) == pytest.approx(1 / math.log(2))
    samples = ssgd.DelayDistribution.exponential(1.0).sample(100000, seed=0)
    assert 0.3 <= ssgd.estimate_R(samples) <= 3.0
    with pytest.raises(ValueError):
        ssgd.estimate_R([5.0, 5.0, 5.0])


def test_analyzer():
    c = ssgd.RateConstants(sigma2=4.0)
    assert ssgd.iteration_count(c, 1) == 64
    assert ssgd.t_sync([1, 2, 3, 4], c) == (64.0, 1)
    assert ssgd.random_noise_term(0.6, 10**6) == pytest.approx(8.29, abs=0.01)
    report = ssgd.complexity_report([1, 4, 9], c)
    assert len(report["rows"]) == 3
    profiles = [ssgd.constant_profile(v) for v in (4.0, 2.0, 1.0)]
    upper = ssgd.upper_bound_sequence(profiles, ssgd.RateConstants(delta=1 / 16), 2)
    assert upper == [0.0, 1.0]
    assert ssgd.gap_ratio(profiles, ssgd.RateConstants(sigma2=3.0), 3) >= 1.0
    with pytest.raises(ssgd.OutOfRegimeError):
        ssgd.partial_participation_bound(1.0, 0.45, 100, c)
    with pytest.raises(ValueError):
        ssgd.RateConstants(eps=0.0)


def test_spec_driven(tmp_path):
    spec = ssgd.load_spec(SPECS / "desk_all_algorithms.yaml")
    assert spec["time_model"]["n"] == 20
    small = tmp_path / "small.yaml"
    small.write_text(
        "scenario: py\nproblem: {d: 10, horizon: 20}\n"
        "time_model: {kind: fixed, n: 3, taus: sqrt}\n"
        "algorithms:\n  - {name: m_sync, stepsizes: [0.5], m: [2]}\n"
    )
    summary = ssgd.run_sweep(small, tmp_path / "out")
    assert summary["runs"] == 1
    assert (tmp_path / "out" / "py__m_sync__g0.5__m2__s0.csv").exists()
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert {f["name"] for f in manifest["files"]} >= {"grid.csv", "summary.json"}
    gap = ssgd.run_gap(SPECS / "speedup_switch.yaml")
    assert gap["summary"][0]["min_ratio"] >= 1.0
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: x\nproblem: {horizon: -1}\n")
    with pytest.raises(ssgd.ValidationError):
        ssgd.load_spec(bad)

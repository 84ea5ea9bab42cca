"""Acceptance criteria 1-9, each with pinned tolerances and a one-line verdict."""

import json
import math
import time

import numpy as np
import pytest

from auction_dynamics import (BidGrid, DiscreteDistribution, ICStatus, is_regular, make_spa,
                              make_staircase, mix, myerson_reserve, verify_ic)
from auction_dynamics import files
from auction_dynamics.cli import main
from auction_dynamics.presets import run_preset

SEED = 0


def _checks(report):
    return {c.name: c for c in report.checks}


@pytest.fixture(scope="module")
def det_report():
    return run_preset("det-nonconvergence", seed=SEED)


@pytest.fixture(scope="module")
def rate_report(det_report):
    return run_preset("rate-phase-transition", seed=SEED,
                      baseline=det_report.data["runner_up_truthful_prob"])


@pytest.fixture(scope="module")
def strict_reports():
    return [run_preset("strict-ic-convergence", seed=SEED, values=v) for v in [(3, 6), (10, 1)]]


@pytest.fixture(scope="module")
def regret_report():
    return run_preset("regret-constant-vs-twophase", seed=SEED)


def test_criterion_1_exact_gamma(criterion):
    start = time.perf_counter()
    parts, ok = [], True
    for delta in (4, 10, 50):
        r = verify_ic(make_staircase(BidGrid(delta)))
        good = r.status is ICStatus.IC_STRICT and abs(r.gamma - 1 / (4 * delta ** 2)) <= 1e-12
        ok &= good
        parts.append(f"staircase D={delta} gamma={r.gamma:.12g}")
    g = BidGrid(10)
    spa = verify_ic(make_spa(g))
    ok &= spa.status is ICStatus.IC_WEAK and spa.gamma == 0.0
    parts.append(f"SPA {spa.status.name} gamma={spa.gamma}")
    for q in (0.1, 0.5, 0.9):
        r = verify_ic(mix(q, make_spa(g), make_staircase(g)))
        ok &= r.gamma >= (1 - q) / 400 - 1e-12
        parts.append(f"mix q={q} gamma={r.gamma:.6g}>={(1 - q) / 400:.6g}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10
    assert criterion(1, ok, "; ".join(parts) + f"; {elapsed:.2f} s (<10 s)")


def test_criterion_2_trajectory_oracle(criterion, strict_reports):
    ok, parts = True, []
    for rep in strict_reports:
        err = rep.data["max_snapshot_error"]
        tv = rep.data["tv"]
        ok &= err <= 1e-9 and max(tv) <= 0.1 and rep.seconds < 30
        parts.append(f"values={rep.data['params']['values']} max|snap-softmax|={err:.2e} (<=1e-9) "
                     f"TV={[round(x, 4) for x in tv]} (<=0.1) {rep.seconds:.1f} s (<30 s)")
    assert criterion(2, ok, "; ".join(parts))


def test_criterion_3_deterministic_nonconvergence(criterion, det_report):
    d = det_report.data
    ok = (d["fraction_shaped"] >= 0.9 and d["margin"] >= 0.1 and d["winner_mass_min"] >= 0.95
          and det_report.seconds < 300)
    # the winner check is stated per trial; the preset reports the trial mean, so check the minimum here
    assert criterion(3, ok, f"monotone-with-Pr0>0 fraction={d['fraction_shaped']:.2f} (>=0.9); "
                            f"mean runner-up bid={d['mean_runner_up_bid']:.4f}, margin below 0.3={d['margin']:.4f} "
                            f"(>=0.1); min winner mass on bids>=0.3={d['winner_mass_min']:.4f} (>=0.95); "
                            f"{det_report.seconds:.1f} s (<300 s)")


def test_criterion_4_phase_transition(criterion, rate_report):
    d = rate_report.data
    ok = d["truthful_prob"] >= 0.9 and d["truthful_prob"] > d["baseline"]
    assert criterion(4, ok, f"runner-up Pr[truthful]={d['truthful_prob']:.4f} (>=0.9, > baseline "
                            f"{d['baseline']:.4f}); ties to the higher-value bidder; uniform-split ties "
                            f"give {d['truthful_prob_uniform_split']:.4f} (reported only)")


def test_criterion_5_regret_separation(criterion, regret_report):
    fits = regret_report.data["exponent_fits"]
    c, t = fits["constant_mixture"], fits["two_phase"]
    ok = (c is not None and t is not None and t <= c - 0.1 and 0.6 <= c <= 0.9 and 0.4 <= t <= 0.65
          and regret_report.seconds < 1800)
    meta = {(r["schedule"], r["T"]): r["metadata"] for r in regret_report.data["rows"]}
    p_T = meta[("constant_mixture", 10 ** 6)]["p_T_raw"]
    T0 = meta[("two_phase", 10 ** 6)]["T0_raw"]
    assert criterion(5, ok, f"exponents constant={c:.4f} (required in [0.6,0.9]) two-phase={t:.4f} (required "
                            f"in [0.4,0.65] and <= constant-0.1); at T=1e6 raw p_T={p_T:.3f} (clamped below 1), T0={T0}")


def test_criterion_6_myerson_reserve(criterion):
    bad = [d for d in range(2, 101)
           if myerson_reserve(DiscreteDistribution.uniform(BidGrid(d))) != math.ceil(d / 2)
           or not is_regular(DiscreteDistribution.uniform(BidGrid(d)))]
    assert criterion(6, not bad, f"uniform reserve == ceil(D/2) and regular for D=2..100; mismatches={bad}")


def test_criterion_7_mean_based(criterion, strict_reports, det_report, rate_report, regret_report):
    reports = [*strict_reports, det_report, rate_report, regret_report]
    results = []
    for rep in reports:
        c = next(c for c in rep.checks if "mean-based" in c.name)
        results.append((rep.preset, c.passed, c.value))
    ok = all(p for _, p, _ in results)
    assert criterion(7, ok, "; ".join(f"{name}: {'ok' if p else 'violation'} ({v} traces)" if p
                                      else f"{name}: violation {v}" for name, p, v in results))


def test_criterion_8_reserve_revenue_gap(criterion):
    rep = run_preset("spa-reserve-suboptimal", seed=SEED)
    d = rep.data
    ok = d["reserve"] == 5 and d["margin"] > 0
    assert criterion(8, ok, f"reserve={d['reserve']}; learned revenue={d['simulated_revenue']:.4f} < "
                            f"benchmark={d['benchmark_sampled']:.4f} (exact {d['benchmark_exact']:.4f}); "
                            f"margin={d['margin']:.4f} (>0)")


def test_criterion_9_determinism_and_formats(criterion, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "delta": 10, "horizon": 5000, "trace_stride": 50,
        "bidders": [{"value": 3}, {"value": 6, "learner": {"kind": "eps_greedy"}}],
        "schedule": {"segments": [{"start": 1, "mechanism": {"kind": "staircase"}},
                                  {"start": 2001, "mechanism": {"kind": "spa", "reserve": 2}}]}}))
    codes = []
    for k in (1, 2):
        codes.append(main(["simulate", "--config", cfg, "--out", tmp_path / f"sim{k}", "--seed", "12345",
                           "--trials", "3", "--jobs", str(k)]))
        codes.append(main(["sweep", cfg, "--T-list", "3000,5000,8000", "--trials", "2", "--seed", "7",
                           "--out", tmp_path / f"sweep{k}"]))
        codes.append(main(["reproduce", "strict-ic-convergence", "--seed", "3",
                           "--out", tmp_path / f"rep{k}"]))
    differing, checked = [], 0
    for kind in ("sim", "sweep", "rep"):
        for p in sorted((tmp_path / f"{kind}1").iterdir()):
            if p.read_bytes() != (tmp_path / f"{kind}2" / p.name).read_bytes():
                differing.append(f"{kind}/{p.name}")
            checked += 1
    sim = tmp_path / "sim1"
    files.validate(json.loads((sim / "summary.json").read_text()), "summary.schema.json")
    files.validate(json.loads((tmp_path / "sweep1" / "summary.json").read_text()), "sweep_summary.schema.json")
    files.validate_csv(sim / "revenue.csv", "revenue.csv")
    files.validate_csv(sim / "snapshots.csv", "snapshots.csv")
    for i in (0, 1):
        files.validate_csv(sim / f"trace_bidder{i}.csv", "trace.csv")
    files.validate_csv(tmp_path / "sweep1" / "sweep.csv", "sweep.csv")
    ok = not differing and codes == [0] * 6
    assert criterion(9, ok, f"{checked} output files compared across repeated seeded runs (jobs 1 vs 2), "
                            f"differing={differing}; summaries and CSVs validate against shipped schemas; "
                            f"exit codes {codes}")

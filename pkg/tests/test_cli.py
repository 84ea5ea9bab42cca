import json

import pytest

from auction_dynamics.cli import main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


@pytest.fixture
def minimal_config(tmp_path):
    return write(tmp_path / "cfg.json", {
        "delta": 4, "horizon": 100, "master_seed": 5,
        "bidders": [{"value": 2}, {"value": 3}],
        "schedule": {"mechanism": {"kind": "spa"}}})


def test_verify_staircase(tmp_path, capsys):
    code = main(["verify", str(write(tmp_path / "m.json", {"kind": "staircase", "delta": 10}))])
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out["status"] == "IC_STRICT"
    assert out["gamma"] == pytest.approx(0.0025, abs=1e-12)


def test_verify_spa(tmp_path, capsys):
    code = main(["verify", str(write(tmp_path / "m.json", {"kind": "spa", "delta": 10}))])
    out = json.loads(capsys.readouterr().out)
    assert code == 0 and out["status"] == "IC_WEAK" and out["gamma"] == 0.0


def test_verify_decreasing_allocation(tmp_path, capsys):
    alloc = [[[0.5, 0.5], [0.0, 0.0]], [[0.5, 0.0], [0.5, 0.0]]]
    spec = {"kind": "table", "delta": 1, "alloc": alloc, "pay": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]}
    code = main(["verify", str(write(tmp_path / "m.json", spec))])
    out = json.loads(capsys.readouterr().out)
    assert code == 1 and out["status"] == "NOT_IC" and out["witness"] is not None


def test_verify_parse_and_budget_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["verify", str(bad)]) == 2
    assert main(["verify", str(write(tmp_path / "k.json", {"kind": "nope", "delta": 3}))]) == 2
    assert main(["verify", str(tmp_path / "missing.json")]) == 2
    assert main(["verify", str(write(tmp_path / "m.json", {"kind": "staircase", "delta": 10})), "--budget", "5"]) == 3


def test_simulate_minimal(tmp_path, minimal_config, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(minimal_config), "--out", str(out)]) == 0
    assert {"revenue.csv", "snapshots.csv", "summary.json"} <= {p.name for p in out.iterdir()}
    assert len((out / "revenue.csv").read_bytes().split(b"\r\n")) == 102  # header + 100 rows + trailing


def test_simulate_byte_identical_with_seed(tmp_path, minimal_config):
    for k in (1, 2):
        assert main(["simulate", "--config", str(minimal_config), "--out", str(tmp_path / f"o{k}"),
                     "--seed", "99", "--trials", "3"]) == 0
    for p in (tmp_path / "o1").iterdir():
        assert p.read_bytes() == (tmp_path / "o2" / p.name).read_bytes()
    summary = json.loads((tmp_path / "o1" / "summary.json").read_text())
    assert summary["master_seed"] == 99 and summary["n_trials"] == 3


@pytest.mark.filterwarnings("ignore:learning rate")
def test_simulate_first_snapshot_uniform(tmp_path):
    cfg = write(tmp_path / "c.json", {"delta": 4, "horizon": 20, "snapshot_rounds": [1],
                                      "bidders": [{"value": 1}, {"value": 4}],
                                      "schedule": {"mechanism": {"kind": "staircase"}}})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "snapshots.csv").read_text().splitlines()[1:]
    probs = {(int(r.split(",")[1]), int(r.split(",")[2])): float(r.split(",")[3]) for r in rows}
    assert probs == {(0, 0): 0.5, (0, 1): 0.5, **{(1, b): 0.2 for b in range(5)}}


def test_simulate_invalid_config(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"delta": 4, "horizon": -3, "bidders": [], "schedule": {}})
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "$.horizon" in err and "$.bidders" in err


def test_sweep_needs_two_horizons(tmp_path, minimal_config, capsys):
    assert main(["sweep", str(minimal_config), "--T-list", "100", "--out", str(tmp_path / "s")]) == 2
    assert "need ≥ 2 horizons" in capsys.readouterr().err


def test_sweep_zero_regret_fit_excluded(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {
        "delta": 4, "horizon": 10,
        "bidders": [{"value": 2, "learner": {"kind": "fixed", "fixed_bid": 2}},
                    {"value": 3, "learner": {"kind": "fixed", "fixed_bid": 3}}],
        "schedule": {"mechanism": {"kind": "spa"}}})
    assert main(["sweep", str(cfg), "--T-list", "10,100,1000", "--trials", "2", "--out", str(tmp_path / "s")]) == 0
    err = capsys.readouterr().err
    assert "excluded" in err
    summary = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert summary["exponent_fits"] == {"config": None}
    assert (tmp_path / "s" / "sweep.csv").read_bytes().startswith(b"schedule,T,mean_regret,std\r\n")


def test_sweep_preset_reports_two_fits(tmp_path, capsys):
    assert main(["sweep", "regret-constant-vs-twophase", "--T-list", "1000,2000,4000", "--trials", "2",
                 "--out", str(tmp_path / "s")]) == 0
    summary = json.loads((tmp_path / "s" / "summary.json").read_text())
    assert set(summary["exponent_fits"]) == {"constant_mixture", "two_phase"}
    assert len(summary["rows"]) == 6


def test_reproduce_unknown_preset(capsys):
    assert main(["reproduce", "no-such-preset"]) == 2


def test_reproduce_small_preset(tmp_path, capsys):
    assert main(["reproduce", "strict-ic-convergence", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out
    assert json.loads((tmp_path / "strict-ic-convergence.json").read_text())["passed"]


def test_reproduce_metagame_is_soft(capsys):
    code = main(["reproduce", "metagame", "--T-list", "20000", "--trials", "3"])
    assert code == 0


def test_jobs_env_fallback(tmp_path, minimal_config, monkeypatch):
    monkeypatch.setenv("AUCTION_DYNAMICS_JOBS", "bogus")
    assert main(["simulate", "--config", str(minimal_config), "--out", str(tmp_path / "o"), "--trials", "2"]) == 2
    monkeypatch.setenv("AUCTION_DYNAMICS_JOBS", "2")
    assert main(["simulate", "--config", str(minimal_config), "--out", str(tmp_path / "o"), "--trials", "2"]) == 0


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["simulate"]) == 2
    assert main(["--help"]) == 0

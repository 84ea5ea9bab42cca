import csv
import json

import numpy as np
import pytest

from auction_dynamics import BidGrid, ConfigError, make_staircase, run
from auction_dynamics import files


def minimal(**extra):
    cfg = {"delta": 4, "horizon": 100, "master_seed": 3,
           "bidders": [{"value": 2}, {"value": 3}],
           "schedule": {"mechanism": {"kind": "spa"}}}
    cfg.update(extra)
    return cfg


def test_schemas_ship_with_package():
    for name in ("mechanism.schema.json", "simconfig.schema.json", "summary.schema.json",
                 "sweep_summary.schema.json", "csv_tables.json"):
        assert isinstance(files.load_schema(name), dict)


def test_config_parsing_variants():
    cfg = files.config_from_dict(minimal())
    assert cfg.horizon == 100 and cfg.grid == BidGrid(4) and cfg.master_seed == 3
    seg = files.config_from_dict(minimal(schedule={"segments": [
        {"start": 1, "mechanism": {"kind": "staircase"}},
        {"start": 51, "mechanism": {"kind": "spa", "reserve": 2, "tie": "favor_higher_index"}}]}))
    assert seg.schedule.mechanism_at(51).name.startswith("spa(reserve=2")
    with pytest.warns(UserWarning):
        built = files.config_from_dict(minimal(schedule={"builder": "two_phase", "strict": {"kind": "staircase"}}))
    assert built.schedule.metadata["builder"] == "two_phase"
    eps = files.config_from_dict(minimal(bidders=[{"value": 2, "learner": {"kind": "eps_greedy"}},
                                                  {"value": 3, "reported_value": 4}]))
    assert eps.bidders[1].cap == 4


@pytest.mark.parametrize("bad,where", [
    ({"horizon": 0}, "$.horizon"),
    ({"bidders": [{"value": 2}]}, "$.bidders"),
    ({"schedule": {"mechanism": {"kind": "dutch"}}}, "$.schedule"),
    ({"bidders": [{"value": 2, "learner": {"eta": -1}}, {"value": 3}]}, "$.bidders[0].learner.eta"),
    ({"extra": 1}, "$"),
])
def test_invalid_configs_name_the_location(bad, where):
    with pytest.raises(ConfigError) as info:
        files.config_from_dict(minimal(**bad))
    assert where in str(info.value)


def test_json_syntax_errors_give_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "delta": 4,\n  "horizon": 100\n  "x": 1\n}')
    with pytest.raises(ConfigError, match="line 4"):
        files.read_json(p)


def test_csv_is_rfc4180_with_repr_floats(tmp_path):
    p = tmp_path / "t.csv"
    files.write_csv(p, ["schedule", "T", "mean_regret", "std"], [("a,b", 10, 0.1 + 0.2, 0.0)])
    raw = p.read_bytes()
    assert raw == b'schedule,T,mean_regret,std\r\n"a,b",10,0.30000000000000004,0.0\r\n'
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    assert float(rows[1][2]) == 0.1 + 0.2


def test_simulation_outputs_validate_and_repeat(tmp_path):
    cfg = files.config_from_dict(minimal(trace_stride=7, snapshot_rounds=[1, 50, 100]))
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        summary = files.write_simulation(d, cfg, run(cfg, warn=False))
        outs.append(d)
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == ["revenue.csv", "snapshots.csv", "summary.json", "trace_bidder0.csv", "trace_bidder1.csv"]
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
    files.validate_csv(outs[0] / "revenue.csv", "revenue.csv")
    files.validate_csv(outs[0] / "snapshots.csv", "snapshots.csv")
    files.validate_csv(outs[0] / "trace_bidder0.csv", "trace.csv")
    files.validate(json.loads((outs[0] / "summary.json").read_text()), "summary.schema.json")
    with open(outs[0] / "revenue.csv", newline="") as fh:
        assert len(list(csv.reader(fh))) == 101
    assert summary["mean_based"]["traces"] == 2


def test_validate_csv_rejects_bad_files(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("round,mean_revenue,std\n1,0.1,0.0\n")
    with pytest.raises(ConfigError, match="CRLF"):
        files.validate_csv(p, "revenue.csv")
    p.write_bytes(b"round,mean,std\r\n1,0.1,0.0\r\n")
    with pytest.raises(ConfigError, match="header"):
        files.validate_csv(p, "revenue.csv")
    p.write_bytes(b"round,mean_revenue,std\r\nx,0.1,0.0\r\n")
    with pytest.raises(ConfigError, match="not int"):
        files.validate_csv(p, "revenue.csv")


def test_mechanism_table_round_trip_through_json(g4):
    spec = json.loads(json.dumps(make_staircase(g4).to_spec()))
    m = files.mechanism_from_json(spec)
    assert np.array_equal(m.pay, make_staircase(g4).pay)

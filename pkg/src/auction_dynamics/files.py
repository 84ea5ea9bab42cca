"""JSON configuration parsing and CSV/JSON result files."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from referencing import Registry, Resource

from .engine import (BidderSpec, Schedule, SimConfig, build_constant_mixture_schedule,
                     build_two_phase_schedule, constant_schedule)
from .errors import ConfigError
from .grid import BidGrid
from .learners import LearnerConfig, check_mean_based
from .mechanisms import mechanism_from_spec
from .metrics import auctioneer_regret, convergence

CRLF = "\r\n"


def load_schema(name: str) -> dict:
    return json.loads(resources.files(__package__).joinpath("schemas", name).read_text())


def _registry() -> Registry:
    resources_ = [Resource.from_contents(load_schema(n))
                  for n in ("mechanism.schema.json", "simconfig.schema.json",
                            "summary.schema.json", "sweep_summary.schema.json")]
    return Registry().with_resources((r.contents["$id"], r) for r in resources_)


def validate(instance, schema_name: str) -> None:
    """Raise ConfigError listing every schema violation with its JSON path."""
    validator = jsonschema.Draft202012Validator(load_schema(schema_name), registry=_registry())
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  at {e.json_path}: {e.message}" for e in errors]
        raise ConfigError(f"{schema_name} validation failed:\n" + "\n".join(lines))


def read_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None


def mechanism_from_json(spec: dict):
    validate(spec, "mechanism.schema.json")
    return mechanism_from_spec(spec)


def schedule_from_spec(spec: dict, grid: BidGrid, horizon: int, n: int) -> Schedule:
    if "mechanism" in spec:
        return constant_schedule(mechanism_from_spec(spec["mechanism"], grid.delta, n), horizon)
    if "segments" in spec:
        segs = [(s["start"], mechanism_from_spec(s["mechanism"], grid.delta, n)) for s in spec["segments"]]
        return Schedule(tuple(segs), horizon)
    strict = mechanism_from_spec(spec["strict"], grid.delta, n)
    build = build_constant_mixture_schedule if spec["builder"] == "constant_mixture" else build_two_phase_schedule
    return build(strict, grid, horizon, spec.get("delta_T"))


def config_from_dict(data: dict, seed=None, horizon=None) -> SimConfig:
    validate(data, "simconfig.schema.json")
    grid = BidGrid(data["delta"])
    T = horizon or data["horizon"]
    bidders = []
    for b in data["bidders"]:
        learner = LearnerConfig(**b.get("learner", {}))
        bidders.append(BidderSpec(b["value"], learner, b.get("reported_value")))
    schedule = schedule_from_spec(data["schedule"], grid, T, len(bidders))
    snaps = data.get("snapshot_rounds")
    if horizon is not None and snaps is not None:
        snaps = [r for r in snaps if r <= T]
    return SimConfig(grid, T, tuple(bidders), schedule, snaps,
                     data.get("master_seed", 0) if seed is None else seed,
                     data.get("trace_stride", 0))


def load_config(path, seed=None) -> tuple[SimConfig, dict]:
    data = read_json(path)
    return config_from_dict(data, seed), data


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator=CRLF)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_json(path, data) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def validate_csv(path, table: str) -> None:
    """Check header and cell types of a result CSV against the shipped table layout."""
    layout = load_schema("csv_tables.json")[table]
    casts = {"int": int, "float": float, "str": str}
    with open(path, newline="") as fh:
        raw = fh.read()
    if raw and not raw.endswith(CRLF):
        raise ConfigError(f"{path}: records must end with CRLF")
    reader = csv.reader(raw.splitlines())
    header = next(reader, None)
    if header != layout["columns"]:
        raise ConfigError(f"{path}: header {header} != {layout['columns']}")
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise ConfigError(f"{path}: line {lineno} has {len(row)} fields, expected {len(header)}")
        for cell, kind in zip(row, layout["types"]):
            try:
                casts[kind](cell)
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: {cell!r} is not {kind}") from None


def summarize(config: SimConfig, result, mean_based_delta: float = 0.05) -> dict:
    """summary.json content for a single or multi-trial simulation."""
    regret = auctioneer_regret(result).to_dict()
    if hasattr(result, "trial_revenue"):
        bench = regret["benchmark_total"]
        per_trial = bench - np.asarray(result.trial_revenue)
        regret["regret_std"] = float(per_trial.std(ddof=1)) if len(per_trial) > 1 else 0.0
        seeds = list(result.seeds)
        n_trials = result.n_trials
        traces = [tr for trial in (result.traces or []) for tr in trial]
    else:
        seeds = [config.master_seed]
        n_trials = 1
        traces = result.traces or []
    summary = {
        "delta": config.grid.delta,
        "horizon": config.horizon,
        "n_trials": n_trials,
        "master_seed": config.master_seed,
        "seeds": seeds,
        "values": list(result.values),
        "caps": list(result.caps),
        "etas": list(result.etas),
        "schedule": {
            "segments": [{"start": s, "end": e, "mechanism": name} for s, e, name in result.segments],
            "metadata": dict(config.schedule.metadata),
        },
        "regret": regret,
        "convergence": convergence(result).to_dict(),
        "final_distributions": np.asarray(result.final).tolist(),
    }
    if traces:
        checks = [check_mean_based(tr, mean_based_delta) for tr in traces]
        summary["mean_based"] = {"delta": mean_based_delta, "traces": len(checks),
                                 "passed": all(checks),
                                 "first_violation": next((c.violation for c in checks if not c), None)}
    return summary


def write_simulation(out_dir, config: SimConfig, result, summary=None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if hasattr(result, "revenue_mean"):
        mean, std, snaps = result.revenue_mean, result.revenue_std, result.snapshot_mean
    else:
        mean, std, snaps = result.revenue, np.zeros_like(result.revenue), result.snapshots
    write_csv(out / "revenue.csv", ["round", "mean_revenue", "std"],
              ((t + 1, m, s) for t, (m, s) in enumerate(zip(mean, std))))
    rows = []
    for k, rnd in enumerate(result.snapshot_rounds):
        for i, cap in enumerate(result.caps):
            rows.extend((rnd, i, b, snaps[k, i, b]) for b in range(cap + 1))
    write_csv(out / "snapshots.csv", ["round", "bidder", "action_index", "probability"], rows)
    traces = result.traces[0] if hasattr(result, "revenue_mean") and result.traces else result.traces
    for i, tr in enumerate(traces or []):
        tr.write_csv(out / f"trace_bidder{i}.csv", config.grid.delta)
    summary = summary or summarize(config, result)
    validate(_jsonable(summary), "summary.schema.json")
    write_json(out / "summary.json", summary)
    return summary

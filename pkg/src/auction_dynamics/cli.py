"""auction-dynamics command line.

Exit codes: 0 ok, 1 assertion failure, 2 usage or parse error, 3 resource limit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

from . import files
from .engine import run, run_trials
from .errors import BudgetExceeded, ConfigError, MonotonicityError, PreconditionError
from .mechanisms import DEFAULT_BUDGET, ICStatus, characterize_deterministic, verify_ic
from .metrics import auctioneer_regret
from .presets import PRESETS, fit_exponents, regret_sweep, run_preset

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _jobs(value):
    if value is not None:
        return value
    env = os.environ.get("AUCTION_DYNAMICS_JOBS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"AUCTION_DYNAMICS_JOBS must be an integer, got {env!r}") from None
    return None


def _t_list(text):
    try:
        values = [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad horizon list {text!r}") from None
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("horizons must be positive")
    return values


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def cmd_verify(args) -> int:
    spec = files.read_json(args.mechanism)
    m = files.mechanism_from_json(spec)
    report = verify_ic(m, budget=args.budget)
    out = report.to_dict()
    out["mechanism"] = m.name
    if m.deterministic:
        ch = characterize_deterministic(m)
        out["characterization"] = {"passed": ch.passed, "violation": ch.violation}
    print(json.dumps(files._jsonable(out), indent=2, sort_keys=True))
    ok = report.status != ICStatus.NOT_IC and report.ir_ok
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(args) -> int:
    config, _ = files.load_config(args.config, args.seed)
    trials = args.trials or 1
    if trials > 1:
        result = run_trials(config, trials, _jobs(args.jobs))
    else:
        result = run(config)
    summary = files.write_simulation(args.out, config, result)
    print(f"wrote {args.out}: total regret {summary['regret']['regret']:.6g} over T={config.horizon}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    horizons = args.T_list
    if horizons is None or len(horizons) < 2:
        raise UsageError("need ≥ 2 horizons")
    trials = args.trials or 20
    jobs = _jobs(args.jobs)
    seed = 0 if args.seed is None else args.seed
    target = args.preset_or_config
    if target in PRESETS:
        if target != "regret-constant-vs-twophase":
            raise UsageError(f"preset {target!r} has no horizon sweep; use regret-constant-vs-twophase or a config")
        preset = PRESETS[target].params
        delta, values = preset["delta"], list(preset["values"])
        rows, fits, _, notes = regret_sweep(delta, tuple(values), tuple(horizons), trials, seed, jobs,
                                            keep_traces=False)
    else:
        data = files.read_json(target)
        files.validate(data, "simconfig.schema.json")
        delta, values = data["delta"], [b["value"] for b in data["bidders"]]
        rows, notes = [], []
        for T in horizons:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                config = files.config_from_dict(data, seed, T)
            notes.extend(f"T={T}: {w.message}" for w in caught)
            res = run_trials(config, trials, jobs, keep_traces=False)
            per_trial = auctioneer_regret(res).benchmark_total - res.trial_revenue
            rows.append({"schedule": "config", "T": T, "mean_regret": float(per_trial.mean()),
                         "std": float(per_trial.std(ddof=1)) if trials > 1 else 0.0,
                         "metadata": dict(config.schedule.metadata)})
        fits = fit_exponents(rows, ["config"], notes)
    for note in notes:
        print(f"warning: {note}", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files.write_csv(out / "sweep.csv", ["schedule", "T", "mean_regret", "std"],
                    ((r["schedule"], r["T"], r["mean_regret"], r["std"]) for r in rows))
    summary = {"target": target, "delta": delta, "values": values, "horizons": horizons,
               "n_trials": trials, "master_seed": seed, "schedules": list(fits), "rows": rows,
               "exponent_fits": fits, "warnings": notes}
    files.validate(files._jsonable(summary), "sweep_summary.schema.json")
    files.write_json(out / "summary.json", summary)
    for name, slope in fits.items():
        print(f"{name}: exponent {'n/a' if slope is None else f'{slope:.4f}'}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.preset not in PRESETS:
        raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(PRESETS)}")
    overrides = {"seed": args.seed, "jobs": _jobs(args.jobs)}
    if args.trials is not None:
        key = "pairs" if args.preset == "spa-reserve-suboptimal" else "trials"
        if key in PRESETS[args.preset].params:
            overrides[key] = args.trials
    if args.T_list is not None:
        if "horizons" in PRESETS[args.preset].params:
            overrides["horizons"] = tuple(args.T_list)
        else:
            overrides["T"] = args.T_list[0]
    report = run_preset(args.preset, **overrides)
    print(f"{report.preset} ({report.seconds:.1f} s)")
    for c in report.checks:
        print("  " + c.line())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files.write_json(out / f"{report.preset}.json", report.to_dict())
    return EXIT_OK if report.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="auction-dynamics", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="exact incentive-compatibility check of a mechanism JSON file")
    v.add_argument("mechanism", help="mechanism spec (JSON)")
    v.add_argument("--budget", type=float, default=DEFAULT_BUDGET, help="max table entries to inspect")
    v.set_defaults(func=cmd_verify)

    def common(sp, out_required):
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--seed", type=_seed, default=None, help="master seed (overrides the config)")
        sp.add_argument("--trials", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (env AUCTION_DYNAMICS_JOBS)")

    s = sub.add_parser("simulate", help="run a configured simulation and write CSV/JSON results")
    s.add_argument("--config", required=True)
    common(s, True)
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="auctioneer regret across horizons")
    w.add_argument("preset_or_config", help="preset id or config JSON path")
    w.add_argument("--T-list", dest="T_list", type=_t_list, default=None, help="comma-separated horizons")
    common(w, True)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("reproduce", help="run a reproduction preset and print its checks")
    r.add_argument("preset", help=", ".join(PRESETS))
    r.add_argument("--T-list", dest="T_list", type=_t_list, default=None)
    common(r, False)
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else [str(a) for a in argv])
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        if getattr(args, "trials", None) is not None and args.trials < 1:
            raise UsageError("--trials must be >= 1")
        if getattr(args, "jobs", None) is not None and args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return args.func(args)
    except BudgetExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, ConfigError, PreconditionError, MonotonicityError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

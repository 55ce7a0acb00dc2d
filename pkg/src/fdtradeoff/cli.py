"""Experiment runner: seeded batch execution and artifact emission.

Subcommands:
  sweep         frontier CSVs for the selected modes and objectives
  single        one (weight, seed) run with the full iteration trace
  utopia        per-objective optima for each seed and mode
  oracle-check  small-instance comparison against the brute-force solver
  gen-channels  materialize channel realization files

Everything is deterministic for a fixed (config, seeds); sweeps re-run with
the same inputs produce byte-identical CSVs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import mm, oracle, pareto
from .channel import make_realization, save_realization
from .config import ConfigError, load_config
from .model import default_params
from .scalarize import compute_utopia
from .scenario import build_scenario, scenario_powers, scenario_rates
from .subproblem import InfeasibleError

MOOP_NAMES = {"rate": "rate", "power": "power"}


def _fail(message: str, code: int = 2) -> int:
    sys.stderr.write(json.dumps({"error": message}) + "\n")
    return code


def _add_common(sub):
    sub.add_argument("--config", required=True, help="YAML config path")
    sub.add_argument("--out-dir", default=".", help="output directory")
    sub.add_argument("--seeds", default=None,
                     help="comma-separated seeds, or an integer N for 0..N-1")
    sub.add_argument("--nu-step", type=float, default=None)
    sub.add_argument("--mode", choices=["fdfd", "fdhd", "hd", "all"], default=None)
    sub.add_argument("--moop", choices=["rate", "power"], default=None)
    sub.add_argument("--workers", type=int, default=None)
    sub.add_argument("--verify", action="store_true",
                     help="re-derive emitted numbers from the emitted allocations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdtradeoff",
        description="Uplink/downlink trade-off experiments for full-duplex OFDMA")
    subs = parser.add_subparsers(dest="command", required=True)

    sweep = subs.add_parser("sweep", help="run weight sweeps and emit frontier CSVs")
    _add_common(sweep)

    single = subs.add_parser("single", help="one (weight, seed) run with trace")
    _add_common(single)
    single.add_argument("--nu", type=float, required=True, help="downlink weight")
    single.add_argument("--seed", type=int, required=True)

    utopia = subs.add_parser("utopia", help="print per-objective optima")
    _add_common(utopia)

    oracle_check = subs.add_parser("oracle-check",
                                   help="compare against the brute-force solver")
    _add_common(oracle_check)
    oracle_check.add_argument("--levels", type=int, default=8)

    gen = subs.add_parser("gen-channels", help="write channel realization files")
    _add_common(gen)
    return parser


def _parse_seeds(arg, default):
    if arg is None:
        return list(default)
    arg = str(arg)
    if "," in arg:
        return [int(s) for s in arg.split(",") if s.strip() != ""]
    return list(range(int(arg)))


def _load(args):
    exp = load_config(args.config)
    seeds = _parse_seeds(args.seeds, exp.run.seeds)
    nu_step = args.nu_step if args.nu_step is not None else exp.run.nu_step
    modes = exp.run.modes if args.mode in (None, "all") else [args.mode]
    if args.mode == "all":
        modes = ["fdfd", "fdhd", "hd"]
    moops = exp.run.moops if args.moop is None else [args.moop]
    workers = args.workers if args.workers is not None else exp.run.workers
    return exp, seeds, nu_step, modes, moops, workers


def _channels(exp, seeds):
    return [make_realization(exp.params, exp.channel, seed) for seed in seeds]


def _verify_points(frontier, exp) -> list:
    """Recompute each emitted objective pair from its stored allocation."""
    bad = []
    for p in frontier.points:
        if p.status != "ok" or p.allocation is None:
            continue
        chan = make_realization(exp.params, exp.channel, p.seed)
        scn = build_scenario(p.mode, chan, exp.params)
        if p.moop == "rate":
            rates = scenario_rates(scn, p.allocation, exp.params)
            redone = (rates.sum_dl, rates.sum_ul)
        else:
            powers = scenario_powers(scn, p.allocation, exp.params)
            redone = (powers.total_dl, powers.total_ul)
        if not np.allclose(redone, p.objectives, rtol=1e-9, atol=1e-12):
            bad.append((p.mode, p.moop, p.nu, p.seed, p.objectives, redone))
    return bad


def cmd_sweep(args) -> int:
    exp, seeds, nu_step, modes, moops, workers = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chans = _channels(exp, seeds)
    failures = 0
    for moop in moops:
        for mode in modes:
            frontier = pareto.sweep(moop, mode, chans, exp.params, exp.solver,
                                    nu_step=nu_step, workers=workers)
            (out / f"frontier_{mode}_{moop}.csv").write_text(
                pareto.frontier_csv(frontier), encoding="utf-8")
            (out / f"points_{mode}_{moop}.csv").write_text(
                pareto.points_csv(frontier), encoding="utf-8")
            failures += sum(1 for p in frontier.points if p.status != "ok")
            if args.verify:
                bad = _verify_points(frontier, exp)
                if bad:
                    return _fail(f"verification mismatch on {len(bad)} point(s): {bad[:3]}", 4)
            for warn in frontier.utopia_warnings:
                sys.stderr.write(f"utopia-exceeded {mode}/{moop}: {warn}\n")
    if failures:
        sys.stderr.write(json.dumps({"partial_failures": failures}) + "\n")
    return 0


def cmd_single(args) -> int:
    exp, seeds, _nu_step, modes, moops, _workers = _load(args)
    mode, moop = modes[0], moops[0]
    chan = make_realization(exp.params, exp.channel, args.seed)
    scn = build_scenario(mode, chan, exp.params)
    ids = (1, 2) if moop == "rate" else (3, 4)
    targets = tuple(compute_utopia(i, scn, chan, exp.params, exp.solver).value
                    for i in ids)
    nu = (args.nu, 1.0 - args.nu)
    try:
        relaxed, trace = mm.run_mm(moop, nu, targets, scn, chan, exp.params, exp.solver)
        final = mm.round_and_repair(relaxed, moop, nu, targets, scn, chan,
                                    exp.params, exp.solver)
    except (InfeasibleError, mm.StalledError, mm.QoSLostInRoundingError) as exc:
        return _fail(f"single run failed: {exc}", 3)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace.export_jsonl(out / f"trace_{mode}_{moop}_nu{args.nu:g}_seed{args.seed}.jsonl")
    if moop == "rate":
        rates = scenario_rates(scn, final, exp.params)
        objectives = (rates.sum_dl, rates.sum_ul)
    else:
        powers = scenario_powers(scn, final, exp.params)
        objectives = (powers.total_dl, powers.total_ul)
    if args.verify:
        point = pareto.ParetoPoint(nu=args.nu, objectives=objectives, mode=mode,
                                   moop=moop, seed=args.seed, status="ok",
                                   allocation=final)
        frontier = pareto.Frontier(mode=mode, moop=moop, points=[point])
        bad = _verify_points(frontier, exp)
        if bad:
            return _fail(f"verification mismatch: {bad}", 4)
    print(json.dumps({
        "mode": mode, "moop": moop, "nu": args.nu, "seed": args.seed,
        "objectives": list(objectives), "targets": list(targets),
        "iterations": len(trace.records), "converged": trace.converged,
    }))
    return 0


def cmd_utopia(args) -> int:
    exp, seeds, _nu_step, modes, moops, _workers = _load(args)
    rows = []
    for seed in seeds:
        chan = make_realization(exp.params, exp.channel, seed)
        for mode in modes:
            scn = build_scenario(mode, chan, exp.params)
            for moop in moops:
                ids = (1, 2) if moop == "rate" else (3, 4)
                for i in ids:
                    try:
                        up = compute_utopia(i, scn, chan, exp.params, exp.solver)
                        rows.append({"seed": seed, "mode": mode, "objective": i,
                                     "value": up.value})
                    except (InfeasibleError, mm.StalledError,
                            mm.QoSLostInRoundingError) as exc:
                        rows.append({"seed": seed, "mode": mode, "objective": i,
                                     "error": str(exc)})
    print(json.dumps(rows, indent=2))
    return 0


def cmd_oracle_check(args) -> int:
    exp, seeds, _nu_step, _modes, moops, _workers = _load(args)
    params = exp.params
    if params.num_users > 3 or params.num_subcarriers > 3:
        params = default_params(
            num_users=2, num_subcarriers=2,
            r_min_dl=min(params.r_min_dl, 2.5), r_min_ul=min(params.r_min_ul, 1.25))
    results = []
    worst = 0.0
    for seed in seeds:
        chan = make_realization(params, exp.channel, seed)
        scn = build_scenario("fdfd", chan, params)
        for moop in moops:
            ref = oracle.brute_force(moop, (0.5, 0.5), chan, params, args.levels)
            if ref.feasible_count == 0:
                results.append({"seed": seed, "moop": moop, "status": "oracle-infeasible"})
                continue
            try:
                ids = (1, 2) if moop == "rate" else (3, 4)
                targets = tuple(compute_utopia(i, scn, chan, params, exp.solver).value
                                for i in ids)
                relaxed, _ = mm.run_mm(moop, (0.5, 0.5), targets, scn, chan,
                                       params, exp.solver)
                final = mm.round_and_repair(relaxed, moop, (0.5, 0.5), targets,
                                            scn, chan, params, exp.solver)
            except (InfeasibleError, mm.StalledError, mm.QoSLostInRoundingError) as exc:
                results.append({"seed": seed, "moop": moop, "status": f"mm-failed: {exc}"})
                continue
            if moop == "rate":
                rates = scenario_rates(scn, final, params)
                values = (rates.sum_dl, rates.sum_ul)
                gap = max(0.5 * (ref.u_star[0] - values[0]),
                          0.5 * (ref.u_star[1] - values[1]))
            else:
                powers = scenario_powers(scn, final, params)
                values = (powers.total_dl, powers.total_ul)
                gap = max(0.5 * (values[0] - ref.u_star[0]),
                          0.5 * (values[1] - ref.u_star[1]))
            rel = (gap - ref.tcheby) / max(abs(ref.tcheby), 1e-9)
            worst = max(worst, rel)
            results.append({"seed": seed, "moop": moop, "status": "ok",
                            "oracle": ref.tcheby, "mm": gap, "excess": rel})
    print(json.dumps({"results": results, "worst_excess": worst}, indent=2))
    return 0 if worst <= 0.10 else 5


def cmd_gen_channels(args) -> int:
    exp, seeds, _nu_step, _modes, _moops, _workers = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for seed in seeds:
        chan = make_realization(exp.params, exp.channel, seed)
        save_realization(chan, exp.channel, out / f"channels_seed{seed}.json")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "sweep": cmd_sweep,
        "single": cmd_single,
        "utopia": cmd_utopia,
        "oracle-check": cmd_oracle_check,
        "gen-channels": cmd_gen_channels,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        return _fail(str(exc), 2)
    except OSError as exc:
        return _fail(f"I/O error: {exc}", 2)


if __name__ == "__main__":
    sys.exit(main())

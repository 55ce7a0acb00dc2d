"""Weight sweeps, frontier assembly, dominance filtering, and baselines.

A sweep runs one MM solve per (weight, channel realization), averages the
post-rounding objectives over realizations at matched weights, and filters
the averaged points down to the non-dominated set.  Per-point failures are
recorded as rows with a status, never raised out of the sweep.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mm
from .model import SolverConfig, SystemParams
from .scalarize import compute_utopia
from .scenario import MODES, build_scenario, scenario_powers, scenario_rates
from .subproblem import InfeasibleError

CSV_FLOAT = "{:.12g}"
FRONTIER_COLUMNS = ("mode", "moop", "nu", "obj1", "obj2", "seed_count", "failures")
POINT_COLUMNS = ("mode", "moop", "nu", "seed", "status", "obj1", "obj2", "iterations")


@dataclass(frozen=True)
class ParetoPoint:
    """One frontier sample: weight, post-rounding objectives, provenance."""

    nu: float                 # weight on the downlink objective
    objectives: tuple         # (dl, ul): bits/s/Hz for rate, watts for power
    mode: str
    moop: str
    seed: int
    status: str               # "ok" | "infeasible" | "stalled" | "qos-lost"
    iterations: int = 0
    allocation: object = None


@dataclass
class Frontier:
    mode: str
    moop: str
    points: list = field(default_factory=list)       # per (nu, seed)
    averaged: list = field(default_factory=list)     # per nu over seeds
    filtered: list = field(default_factory=list)     # non-dominated averaged
    utopia_warnings: list = field(default_factory=list)

    @property
    def completeness(self) -> float:
        if not self.points:
            return 0.0
        ok = sum(1 for p in self.points if p.status == "ok")
        return ok / len(self.points)


def nu_grid(nu_step: float) -> list:
    steps = 1.0 / nu_step
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError("nu_step must divide 1")
    n = int(round(steps))
    return [i / n for i in range(n + 1)]


def dominates(u, v, sense: str) -> bool:
    """Weak dominance: at least as good in both coordinates, not identical."""
    if sense == "max":
        return u[0] >= v[0] and u[1] >= v[1] and (u[0] > v[0] or u[1] > v[1])
    return u[0] <= v[0] and u[1] <= v[1] and (u[0] < v[0] or u[1] < v[1])


def dominance_filter(points, sense: str):
    """Non-dominated subset, stable order by nu; duplicates keep the first."""
    kept = []
    seen = set()
    for cand in points:
        if any(not np.isfinite(v) for v in cand.objectives):
            continue
        if cand.objectives in seen:
            continue
        if any(dominates(other.objectives, cand.objectives, sense)
               for other in points
               if np.all(np.isfinite(other.objectives))):
            continue
        seen.add(cand.objectives)
        kept.append(cand)
    return sorted(kept, key=lambda p: p.nu)


def _run_point(task):
    """One (nu, seed) solve; returns a ParetoPoint whatever happens."""
    moop, mode, nu1, chan, params, cfg, targets, ul_users = task
    scn = build_scenario(mode, chan, params, ul_users=ul_users)
    nu = (nu1, 1.0 - nu1)
    try:
        relaxed, trace = mm.run_mm(moop, nu, targets, scn, chan, params, cfg)
        final = mm.round_and_repair(relaxed, moop, nu, targets, scn, chan, params, cfg)
    except InfeasibleError:
        return ParetoPoint(nu=nu1, objectives=(np.nan, np.nan), mode=mode, moop=moop,
                           seed=chan.seed, status="infeasible")
    except mm.StalledError:
        return ParetoPoint(nu=nu1, objectives=(np.nan, np.nan), mode=mode, moop=moop,
                           seed=chan.seed, status="stalled")
    except mm.QoSLostInRoundingError:
        return ParetoPoint(nu=nu1, objectives=(np.nan, np.nan), mode=mode, moop=moop,
                           seed=chan.seed, status="qos-lost")
    if moop == "rate":
        rates = scenario_rates(scn, final, params)
        objectives = (rates.sum_dl, rates.sum_ul)
    else:
        powers = scenario_powers(scn, final, params)
        objectives = (powers.total_dl, powers.total_ul)
    return ParetoPoint(nu=nu1, objectives=objectives, mode=mode, moop=moop,
                       seed=chan.seed, status="ok", iterations=len(trace.records),
                       allocation=final)


def sweep(moop: str, mode: str, chans, params: SystemParams, cfg: SolverConfig,
          nu_step: float = 0.05, workers: int = 1, ul_users=None) -> Frontier:
    """Full weight sweep over the given channel realizations.

    The per-objective optima are computed once per realization and shared by
    every weight.  Results merge in (nu, seed) order regardless of worker
    completion order, so outputs are identical for any worker count.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode '{mode}'")
    grid = nu_grid(nu_step)
    frontier = Frontier(mode=mode, moop=moop)

    targets_by_seed = {}
    for chan in chans:
        scn = build_scenario(mode, chan, params, ul_users=ul_users)
        ids = (1, 2) if moop == "rate" else (3, 4)
        try:
            targets = tuple(compute_utopia(i, scn, chan, params, cfg).value for i in ids)
        except (InfeasibleError, mm.StalledError, mm.QoSLostInRoundingError):
            targets = None
        targets_by_seed[chan.seed] = targets

    tasks = []
    for nu1 in grid:
        for chan in chans:
            targets = targets_by_seed[chan.seed]
            if targets is None:
                frontier.points.append(ParetoPoint(
                    nu=nu1, objectives=(np.nan, np.nan), mode=mode, moop=moop,
                    seed=chan.seed, status="infeasible"))
                continue
            tasks.append((moop, mode, nu1, chan, params, cfg, targets, ul_users))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, tasks, chunksize=1))
    else:
        results = [_run_point(t) for t in tasks]
    frontier.points.extend(results)
    frontier.points.sort(key=lambda p: (p.nu, p.seed))

    for nu1 in grid:
        at_nu = [p for p in frontier.points if p.nu == nu1]
        ok = [p for p in at_nu if p.status == "ok"]
        if ok:
            obj = tuple(float(np.mean([p.objectives[i] for p in ok])) for i in range(2))
        else:
            obj = (np.nan, np.nan)
        frontier.averaged.append(ParetoPoint(
            nu=nu1, objectives=obj, mode=mode, moop=moop, seed=-1,
            status="ok" if ok else "empty", iterations=len(ok)))

    sense = "max" if moop == "rate" else "min"
    frontier.filtered = dominance_filter(
        [p for p in frontier.averaged if p.status == "ok"], sense)

    # Opportunistic utopia cross-check: a later feasible point should never
    # beat the single-objective optimum of its own realization.
    for p in frontier.points:
        if p.status != "ok":
            continue
        targets = targets_by_seed.get(p.seed)
        if not targets:
            continue
        tol = 1e-6
        if moop == "rate":
            if p.objectives[0] > targets[0] * (1 + tol) + tol:
                frontier.utopia_warnings.append((p.nu, p.seed, 1, p.objectives[0], targets[0]))
            if p.objectives[1] > targets[1] * (1 + tol) + tol:
                frontier.utopia_warnings.append((p.nu, p.seed, 2, p.objectives[1], targets[1]))
        else:
            if p.objectives[0] < targets[0] * (1 - tol) - tol:
                frontier.utopia_warnings.append((p.nu, p.seed, 3, p.objectives[0], targets[0]))
            if p.objectives[1] < targets[1] * (1 - tol) - tol:
                frontier.utopia_warnings.append((p.nu, p.seed, 4, p.objectives[1], targets[1]))
    return frontier


def solve_hd_baseline(moop: str, chans, params: SystemParams, cfg: SolverConfig,
                      nu_step: float = 0.05, workers: int = 1) -> Frontier:
    """Half-duplex baseline: orthogonal band halves, no self-interference."""
    return sweep(moop, "hd", chans, params, cfg, nu_step=nu_step, workers=workers)


def solve_fdhd_baseline(moop: str, chans, params: SystemParams, cfg: SolverConfig,
                        nu_step: float = 0.05, workers: int = 1, ul_users=None) -> Frontier:
    """Hybrid baseline: full-duplex BS, half-duplex users split per direction."""
    return sweep(moop, "fdhd", chans, params, cfg, nu_step=nu_step, workers=workers,
                 ul_users=ul_users)


def _fmt(value) -> str:
    if isinstance(value, float):
        if np.isnan(value):
            return "nan"
        return CSV_FLOAT.format(value)
    return str(value)


def frontier_csv(frontier: Frontier) -> str:
    """Averaged per-weight rows in the stable frontier schema."""
    failures_by_nu = {}
    for p in frontier.points:
        if p.status != "ok":
            failures_by_nu[p.nu] = failures_by_nu.get(p.nu, 0) + 1
    lines = [",".join(FRONTIER_COLUMNS)]
    for p in frontier.averaged:
        lines.append(",".join([
            frontier.mode, frontier.moop, _fmt(p.nu),
            _fmt(p.objectives[0]), _fmt(p.objectives[1]),
            str(p.iterations), str(failures_by_nu.get(p.nu, 0)),
        ]))
    return "\n".join(lines) + "\n"


def points_csv(frontier: Frontier) -> str:
    """Per-(nu, seed) rows including failed points with their status."""
    lines = [",".join(POINT_COLUMNS)]
    for p in frontier.points:
        lines.append(",".join([
            frontier.mode, frontier.moop, _fmt(p.nu), str(p.seed), p.status,
            _fmt(p.objectives[0]), _fmt(p.objectives[1]), str(p.iterations),
        ]))
    return "\n".join(lines) + "\n"

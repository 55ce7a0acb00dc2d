"""Majorization-minimization outer loop and integral recovery.

Each iteration linearizes the convex pieces (the self-interference logs and
the squared assignment penalty) at the current iterate, solves the convex
instance, and feeds the solution back as the next expansion point.  The
surrogate upper-bounds the true penalized objective and touches it at the
expansion point, so accepted iterates never increase the true objective.

When the penalty weight is large enough that the relaxed assignment optimum
is binary beyond double precision (see SolverConfig.penalty_saturation), the
assignment block is pinned to its rounded pattern and only the powers remain
in the subproblem; this is the exact limit of the relaxed solve, not an
approximation of it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .model import (Allocation, SolverConfig, SystemParams, validate_allocation,
                    validate_realization)
from .objective import penalty_d, penalty_e
from .scalarize import build_instance, tcheby_gap, validate_weights
from .scenario import (Scenario, assignment_matrix, coupled_powers,
                       greedy_assignment, unweighted_user_rates)
from . import subproblem
from .subproblem import InfeasibleError

RAMP_BASE = 4.0
RAMP_STEPS = 5


class StalledError(RuntimeError):
    """The inner solver failed on two consecutive iterations."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class QoSLostInRoundingError(RuntimeError):
    """Rounding the assignment left some rate floors unsatisfiable."""

    def __init__(self, users):
        super().__init__(f"rate floors lost in rounding for users {sorted(users)}")
        self.users = sorted(users)


@dataclass(frozen=True)
class MMRecord:
    iteration: int
    objective: float
    binary_violation: float
    tangency_error: float
    majorization_slack: float
    inner_status: str
    kkt_residual: float
    newton_steps: int
    wall_time: float


@dataclass
class MMTrace:
    records: list = field(default_factory=list)
    converged: bool = False
    message: str = ""

    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    def export_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.records:
                fh.write(json.dumps({
                    "iteration": r.iteration,
                    "objective": r.objective,
                    "binary_violation": r.binary_violation,
                    "tangency_error": r.tangency_error,
                    "majorization_slack": r.majorization_slack,
                    "inner_status": r.inner_status,
                    "kkt_residual": r.kkt_residual,
                    "newton_steps": r.newton_steps,
                    "wall_time": r.wall_time,
                }) + "\n")


def effective_lambda(params: SystemParams, cfg: SolverConfig, t: int) -> float:
    """Penalty weight at iteration t; a geometric ramp-in when enabled."""
    if cfg.lambda_ramp:
        return params.penalty_lambda * min(1.0, RAMP_BASE ** t / RAMP_BASE ** RAMP_STEPS)
    return params.penalty_lambda


def extract_a_vars(scn: Scenario, alloc: Allocation) -> np.ndarray:
    return np.array([alloc.a[pair] for pair in scn.a_owner])


def true_objective(moop: str, nu, targets, scn: Scenario, alloc: Allocation,
                   params: SystemParams, lam: float) -> float:
    """Penalized scalarized objective in its coupling-consistent form.

    Rates and powers are evaluated without assignment weights; under the
    power-coupling constraints these agree with the weighted values at every
    binary point.
    """
    if moop == "rate":
        dl, ul = unweighted_user_rates(scn, alloc, params)
        values = (float(dl.sum()), float(ul.sum()))
    else:
        powers = coupled_powers(scn, alloc, params)
        values = (powers.total_dl, powers.total_ul)
    a_vars = extract_a_vars(scn, alloc)
    return tcheby_gap(nu, targets, values, moop) + lam * (penalty_e(a_vars) - penalty_d(a_vars))


def _surrogate_objective(prob, layout, alloc: Allocation) -> float:
    """Value of the surrogate (instance) objective at a feasible allocation.

    The auxiliary variable is set to its smallest feasible value, i.e. the
    largest residual among the scalarization rows.
    """
    x = layout.pack(alloc, 0.0)
    aux = 0.0
    for lc in prob.logcons:
        if not lc.label.startswith("tcheby"):
            continue
        # row: value(x) + aux * lin[aux] >= 0 with lin[aux] = 1
        aux = max(aux, -lc.value(x))
    for row, b, label in zip(prob.A, prob.b, prob.row_labels):
        if not label.startswith("tcheby"):
            continue
        # scaled affine row: row @ x - coef_aux * aux <= b with coef_aux > 0
        coef = -row[layout.aux]
        base = float(row @ x - row[layout.aux] * 0.0)
        aux = max(aux, (base - b) / coef)
    x[layout.aux] = aux
    return prob.objective(x)


def initialize(moop: str, nu, targets, scn: Scenario, chan, params: SystemParams,
               cfg: SolverConfig):
    """Deterministic strictly feasible start.

    Greedy round-robin assignment (relaxed into the box interior unless the
    penalty is saturated), equal power split at 80% of the budgets, then a
    phase-I pass on the first surrogate instance to honor the rate floors.
    Raises InfeasibleError with the phase-I certificate when the floors are
    unreachable.
    """
    eps = 0.05
    a_bin = greedy_assignment(scn, chan)
    lam0 = effective_lambda(params, cfg, 0)
    saturated = lam0 >= cfg.penalty_saturation
    if saturated:
        a_vars = a_bin
    else:
        a_vars = np.empty_like(a_bin)
        for grp in scn.c7_groups:
            for i in grp:
                a_vars[i] = (1.0 - eps) if a_bin[i] > 0.5 else eps / len(grp)

    M, K = scn.num_subcarriers, scn.num_users
    a = assignment_matrix(scn, a_vars)
    p = np.zeros((M, K))
    q = np.zeros((M, K))
    if params.p_bs_max > 0:
        n_dl = max(1, int(round(sum(a_bin[scn.a_of_dl[i]] for i in range(len(scn.dl_pairs))))))
        for i, pair in enumerate(scn.dl_pairs):
            q[pair] = min(0.8 / n_dl, 0.5 * a[pair]) * params.p_bs_max
    if params.p_user_max > 0:
        for k, idxs in scn.user_ul_pairs.items():
            n_k = max(1, int(round(sum(a_bin[scn.a_of_ul[i]] for i in idxs))))
            for i in idxs:
                pair = scn.ul_pairs[i]
                p[pair] = min(0.8 / n_k, 0.5 * a[pair]) * params.p_user_max
    state = Allocation(a=a, p=p, q=q)

    fixed = a_bin if saturated else None
    prob, layout = build_instance(moop, nu, targets, state, scn, params, lam0,
                                  fixed_a=fixed, name=f"init:{scn.mode}")
    start = layout.pack(state, _aux_start(moop, nu, targets, scn, state, params))
    feas = subproblem.phase1_feasible(prob, hint=start, cfg=cfg)
    if feas.status != "feasible":
        raise InfeasibleError(
            f"rate floors unreachable (phase-I max violation {feas.max_violation:.3e})",
            max_violation=feas.max_violation)
    adjusted, _aux = layout.unpack(feas.x)
    return adjusted


def _aux_start(moop, nu, targets, scn, alloc, params) -> float:
    if moop == "rate":
        dl, ul = unweighted_user_rates(scn, alloc, params)
        values = (float(dl.sum()), float(ul.sum()))
    else:
        powers = coupled_powers(scn, alloc, params)
        values = (powers.total_dl, powers.total_ul)
    gap = tcheby_gap(nu, targets, values, moop)
    return gap + 1.0 + 0.01 * abs(gap)


def run_mm(moop: str, nu, targets, scn: Scenario, chan, params: SystemParams,
           cfg: SolverConfig):
    """Iterate surrogate solves to convergence of the true penalized objective.

    Returns the relaxed converged allocation and the per-iteration trace;
    call :func:`round_and_repair` afterwards for the integral solution.
    """
    nu = validate_weights(nu)
    validate_realization(chan, params)
    state = initialize(moop, nu, targets, scn, chan, params, cfg)
    trace = MMTrace()
    lam0 = effective_lambda(params, cfg, 0)
    j_prev = true_objective(moop, nu, targets, scn, state, params, lam0)
    consecutive_failures = 0

    for t in range(cfg.t_max):
        lam_t = effective_lambda(params, cfg, t)
        fixed = None
        if lam_t >= cfg.penalty_saturation:
            fixed = (extract_a_vars(scn, state) > 0.5).astype(float)
        prob, layout = build_instance(moop, nu, targets, state, scn, params,
                                      lam_t, fixed_a=fixed,
                                      name=f"{moop}:{scn.mode}:t{t}")
        start = layout.pack(state, _aux_start(moop, nu, targets, scn, state, params))
        t0 = time.perf_counter()
        sol = subproblem.solve(prob, start, cfg)
        wall = time.perf_counter() - t0

        if sol.status == "infeasible":
            if t == 0:
                raise InfeasibleError("first surrogate instance infeasible",
                                      max_violation=sol.certificate)
            consecutive_failures += 1
            if consecutive_failures >= 2:
                raise StalledError("inner solver failed twice consecutively", trace)
            continue

        new_state, _aux = layout.unpack(sol.x)
        j_new = true_objective(moop, nu, targets, scn, new_state, params, lam_t)
        j_exp = true_objective(moop, nu, targets, scn, state, params, lam_t)
        tangency = abs(_surrogate_objective(prob, layout, state) - j_exp)
        major_slack = _surrogate_objective(prob, layout, new_state) - j_new
        a_vars = extract_a_vars(scn, new_state)
        violation = float(np.minimum(a_vars, 1.0 - a_vars).max(initial=0.0))
        trace.records.append(MMRecord(
            iteration=t, objective=j_new, binary_violation=violation,
            tangency_error=tangency, majorization_slack=major_slack,
            inner_status=sol.status, kkt_residual=sol.kkt_residual,
            newton_steps=sol.newton_steps, wall_time=wall))

        if sol.status != "optimal":
            consecutive_failures += 1
            if consecutive_failures >= 2:
                raise StalledError("inner solver failed twice consecutively", trace)
        else:
            consecutive_failures = 0

        delta = abs(j_new - j_prev)
        state, j_prev = new_state, j_new
        if delta <= cfg.mm_rel_tol * max(abs(j_prev), 1e-9) or delta <= 1e-12:
            trace.converged = True
            break

    if not trace.converged:
        trace.message = "iteration budget exhausted"
    return state, trace


def round_and_repair(alloc: Allocation, moop: str, nu, targets, scn: Scenario,
                     chan, params: SystemParams, cfg: SolverConfig) -> Allocation:
    """Threshold the assignment, repair sharing conflicts, re-solve the powers.

    Thresholds at 0.5, keeps the largest relaxed entry per sharing group
    (ties to the lowest index), then runs one convex solve over the powers
    with the assignment frozen.  Raises QoSLostInRoundingError when the
    rounded assignment cannot carry the rate floors.
    """
    nu = validate_weights(nu)
    a_rel = extract_a_vars(scn, alloc)
    a_bin = (a_rel > 0.5).astype(float)
    for grp in scn.c7_groups:
        chosen = [i for i in grp if a_bin[i] > 0.5]
        if len(chosen) > 1:
            keep = max(chosen, key=lambda i: (a_rel[i], -i))
            for i in chosen:
                if i != keep:
                    a_bin[i] = 0.0

    starved = set()
    if params.r_min_dl > 0:
        for k in scn.dl_users:
            if not any(a_bin[scn.a_of_dl[i]] > 0.5 for i in scn.user_dl_pairs[k]):
                starved.add(k)
    if params.r_min_ul > 0:
        for k in scn.ul_users:
            if not any(a_bin[scn.a_of_ul[i]] > 0.5 for i in scn.user_ul_pairs[k]):
                starved.add(k)
    if starved:
        raise QoSLostInRoundingError(starved)

    prob, layout = build_instance(moop, nu, targets, alloc, scn, params,
                                  lam=params.penalty_lambda, fixed_a=a_bin,
                                  name=f"repair:{scn.mode}")
    start = layout.pack(alloc, _aux_start(moop, nu, targets, scn, alloc, params))
    sol = subproblem.solve(prob, start, cfg)
    if sol.status == "infeasible":
        cert, _ = layout.unpack(sol.x) if sol.x is not None else (alloc, 0.0)
        dl, ul = unweighted_user_rates(scn, cert, params)
        bad = {k for k in scn.dl_users if params.r_min_dl > 0 and dl[k] < params.r_min_dl}
        bad |= {k for k in scn.ul_users if params.r_min_ul > 0 and ul[k] < params.r_min_ul}
        raise QoSLostInRoundingError(bad or set(range(scn.num_users)))

    final, _aux = layout.unpack(sol.x)
    validate_allocation(final, params, c7_groups=scn.c7_groups_mk, tol=1e-6, binary=True)
    dl, ul = unweighted_user_rates(scn, final, params)
    errs = []
    if params.r_min_dl > 0:
        for k in scn.dl_users:
            if dl[k] < params.r_min_dl - 1e-6:
                errs.append(k)
    if params.r_min_ul > 0:
        for k in scn.ul_users:
            if ul[k] < params.r_min_ul - 1e-6:
                errs.append(k)
    if errs:
        raise QoSLostInRoundingError(set(errs))
    return final

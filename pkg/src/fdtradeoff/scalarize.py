"""Tchebycheff scalarization: utopia points and convex-instance assembly.

For a weight pair nu the rate problem minimizes the auxiliary variable psi
subject to nu_n * (U*_n - U_n) <= psi plus the resource constraints; the
power problem does the same with chi and nu_n * (P_n - P_n_min) <= chi.
Rates appear through their concave log-sum form with the convex pieces
replaced by tangent surrogates at the expansion point, which yields exactly
the constraint classes :mod:`fdtradeoff.subproblem` solves.

Variables are scaled to their budgets and every affine row is normalized to
unit infinity-norm before it reaches the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import LN2, Allocation, ParamValidationError, SystemParams
from .scenario import Scenario, assignment_matrix
from .subproblem import InfeasibleError, LogConstraint, SurrogateProblem

MOOPS = ("rate", "power")


def validate_weights(nu) -> tuple:
    nu = tuple(float(v) for v in nu)
    if len(nu) != 2:
        raise ParamValidationError("weight vector must have two entries")
    if any(v < 0 for v in nu):
        raise ParamValidationError("weights must be nonnegative")
    if abs(sum(nu) - 1.0) > 1e-12:
        raise ParamValidationError("weights must sum to one")
    return nu


def tcheby_gap(nu, targets, values, moop: str) -> float:
    """Smallest feasible auxiliary value at the given objective values."""
    gaps = []
    for n in range(2):
        if nu[n] <= 0:
            continue
        if moop == "rate":
            gaps.append(nu[n] * (targets[n] - values[n]))
        else:
            gaps.append(nu[n] * (values[n] - targets[n]))
    return max(gaps) if gaps else 0.0


@dataclass(frozen=True)
class UtopiaPoint:
    """One per-objective optimum with solve diagnostics."""

    objective_id: int          # 1 dl rate, 2 ul rate, 3 dl power, 4 ul power
    value: float
    provenance: dict


@dataclass
class Layout:
    """Variable packing of one instance: [a vars | p vars | q vars | aux].

    With fixed_a set, assignment variables are pinned to the given binary
    pattern and only the powers of assigned pairs remain as variables.
    """

    scenario: Scenario
    fixed_a: np.ndarray | None
    active_dl: list            # indices into scenario.dl_pairs that own a q var
    active_ul: list
    na: int
    n: int
    p_scale: float
    q_scale: float
    dl_pos: dict = field(default_factory=dict)   # dl pair index -> var position
    ul_pos: dict = field(default_factory=dict)

    @property
    def aux(self) -> int:
        return self.n - 1

    def pack(self, alloc: Allocation, aux_value: float) -> np.ndarray:
        x = np.zeros(self.n)
        scn = self.scenario
        if self.fixed_a is None:
            for i, pair in enumerate(scn.a_owner):
                x[i] = alloc.a[pair]
        for i in self.active_ul:
            x[self.ul_pos[i]] = alloc.p[scn.ul_pairs[i]] / self.p_scale
        for i in self.active_dl:
            x[self.dl_pos[i]] = alloc.q[scn.dl_pairs[i]] / self.q_scale
        x[self.aux] = aux_value
        return x

    def unpack(self, x: np.ndarray):
        scn = self.scenario
        if self.fixed_a is None:
            a = assignment_matrix(scn, np.clip(x[: self.na], 0.0, 1.0))
        else:
            a = assignment_matrix(scn, self.fixed_a)
        p = np.zeros((scn.num_subcarriers, scn.num_users))
        q = np.zeros_like(p)
        for i in self.active_ul:
            p[scn.ul_pairs[i]] = max(x[self.ul_pos[i]], 0.0) * self.p_scale
        for i in self.active_dl:
            q[scn.dl_pairs[i]] = max(x[self.dl_pos[i]], 0.0) * self.q_scale
        return Allocation(a=a, p=p, q=q), float(x[self.aux])

    def interior_point(self) -> np.ndarray:
        """Strictly assignment/box/budget-interior point with positive log args."""
        scn = self.scenario
        x = np.zeros(self.n)
        group_of = {}
        for grp in scn.c7_groups:
            for i in grp:
                group_of[i] = len(grp)
        if self.fixed_a is None:
            for i in range(self.na):
                x[i] = 1.0 / (2.0 * group_of.get(i, 1))
        n_per_user = {k: max(1, sum(1 for i in idxs if i in self.ul_pos))
                      for k, idxs in scn.user_ul_pairs.items()}
        for i in self.active_ul:
            m, k = scn.ul_pairs[i]
            a_cap = 0.5 if self.fixed_a is not None else 0.5 * x[scn.a_of_ul[i]]
            x[self.ul_pos[i]] = min(a_cap, 0.4 / n_per_user[k])
        n_dl = max(1, len(self.active_dl))
        for i in self.active_dl:
            a_cap = 0.5 if self.fixed_a is not None else 0.5 * x[scn.a_of_dl[i]]
            x[self.dl_pos[i]] = min(a_cap, 0.4 / n_dl)
        return x


def make_layout(scn: Scenario, params: SystemParams, fixed_a=None) -> Layout:
    p_scale = params.p_user_max if params.p_user_max > 0 else 1.0
    q_scale = params.p_bs_max if params.p_bs_max > 0 else 1.0
    if fixed_a is None:
        active_dl = list(range(len(scn.dl_pairs))) if params.p_bs_max > 0 else []
        active_ul = list(range(len(scn.ul_pairs))) if params.p_user_max > 0 else []
        na = len(scn.a_owner)
    else:
        fixed_a = np.asarray(fixed_a, dtype=float)
        active_dl = [i for i in range(len(scn.dl_pairs))
                     if params.p_bs_max > 0 and fixed_a[scn.a_of_dl[i]] > 0.5]
        active_ul = [i for i in range(len(scn.ul_pairs))
                     if params.p_user_max > 0 and fixed_a[scn.a_of_ul[i]] > 0.5]
        na = 0
    layout = Layout(scenario=scn, fixed_a=fixed_a, active_dl=active_dl,
                    active_ul=active_ul, na=na,
                    n=na + len(active_ul) + len(active_dl) + 1,
                    p_scale=p_scale, q_scale=q_scale)
    for pos, i in enumerate(active_ul):
        layout.ul_pos[i] = na + pos
    for pos, i in enumerate(active_dl):
        layout.dl_pos[i] = na + len(active_ul) + pos
    return layout


def _dl_arg(layout: Layout, i: int, params: SystemParams):
    """Argument row of the downlink log term for dl pair i: own + noise + interference."""
    scn = layout.scenario
    row = np.zeros(layout.n)
    row[layout.dl_pos[i]] = layout.q_scale * scn.dl_gain[i]
    for j, coef in scn.dl_interf[i]:
        if j in layout.ul_pos:
            row[layout.ul_pos[j]] += layout.p_scale * coef
    return row, params.noise_power


def _ul_arg(layout: Layout, i: int, params: SystemParams):
    scn = layout.scenario
    row = np.zeros(layout.n)
    row[layout.ul_pos[i]] = layout.p_scale * scn.ul_gain[i]
    for j, coef in scn.ul_interf[i]:
        if j in layout.dl_pos:
            row[layout.dl_pos[j]] += layout.q_scale * coef
    return row, params.noise_power


def _interference_linearization(layout: Layout, pair_indices, direction: str,
                                params: SystemParams, x_t: np.ndarray):
    """Tangent model of sum log2(noise + interference) over the given pairs.

    Returns (value_at_x_t, gradient over x).  The interference is affine in
    the opposite direction's powers, so the gradient has entries only there.
    """
    scn = layout.scenario
    val = 0.0
    grad = np.zeros(layout.n)
    for i in pair_indices:
        row = np.zeros(layout.n)
        if direction == "dl":
            for j, coef in scn.dl_interf[i]:
                if j in layout.ul_pos:
                    row[layout.ul_pos[j]] += layout.p_scale * coef
        else:
            for j, coef in scn.ul_interf[i]:
                if j in layout.dl_pos:
                    row[layout.dl_pos[j]] += layout.q_scale * coef
        arg0 = params.noise_power + float(row @ x_t)
        val += np.log2(arg0)
        grad += row / (arg0 * LN2)
    return val, grad


def _rate_terms(layout: Layout, pair_indices, direction: str, params, weight: float):
    """coef/rows/offsets of the concave rate part for the given pairs."""
    coefs, rows, offs = [], [], []
    for i in pair_indices:
        row, off = (_dl_arg if direction == "dl" else _ul_arg)(layout, i, params)
        coefs.append(weight / LN2)
        rows.append(row)
        offs.append(off)
    return coefs, rows, offs


def _active_user_pairs(layout: Layout, direction: str):
    scn = layout.scenario
    pos = layout.dl_pos if direction == "dl" else layout.ul_pos
    source = scn.user_dl_pairs if direction == "dl" else scn.user_ul_pairs
    return {k: [i for i in idxs if i in pos] for k, idxs in source.items()}


def build_instance(moop: str, nu, targets, state: Allocation, scn: Scenario,
                   params: SystemParams, lam: float, fixed_a=None,
                   name: str = "") -> tuple[SurrogateProblem, Layout]:
    """Assemble one convex instance around the expansion point `state`.

    targets are the utopia values (rate) or the per-direction power minima
    (power).  lam weighs the binarity penalty; it is ignored when fixed_a
    pins the assignment (the penalty is identically zero there).
    """
    if moop not in MOOPS:
        raise ParamValidationError(f"unknown moop '{moop}'")
    nu = validate_weights(nu)
    layout = make_layout(scn, params, fixed_a)
    x_t = layout.pack(state, 0.0)
    n = layout.n

    rows, rhs, labels = [], [], []

    def add_row(row, b, label):
        scale = np.max(np.abs(row))
        if scale <= 0:
            return
        rows.append(row / scale)
        rhs.append(b / scale)
        labels.append(label)

    if layout.fixed_a is None:
        for i in layout.active_dl:
            row = np.zeros(n)
            row[layout.dl_pos[i]] = 1.0
            row[scn.a_of_dl[i]] = -1.0
            add_row(row, 0.0, f"couple_q[{i}]")
        for i in layout.active_ul:
            row = np.zeros(n)
            row[layout.ul_pos[i]] = 1.0
            row[scn.a_of_ul[i]] = -1.0
            add_row(row, 0.0, f"couple_p[{i}]")
    else:
        for i in layout.active_dl:
            row = np.zeros(n)
            row[layout.dl_pos[i]] = 1.0
            add_row(row, 1.0, f"cap_q[{i}]")
        for i in layout.active_ul:
            row = np.zeros(n)
            row[layout.ul_pos[i]] = 1.0
            add_row(row, 1.0, f"cap_p[{i}]")

    if layout.active_dl:
        row = np.zeros(n)
        for i in layout.active_dl:
            row[layout.dl_pos[i]] = 1.0
        add_row(row, 1.0, "bs_budget")
    user_ul = _active_user_pairs(layout, "ul")
    for k in sorted(user_ul):
        idxs = user_ul[k]
        if not idxs:
            continue
        row = np.zeros(n)
        for i in idxs:
            row[layout.ul_pos[i]] = 1.0
        add_row(row, 1.0, f"user_budget[{k}]")

    for i in layout.active_ul:
        row = np.zeros(n)
        row[layout.ul_pos[i]] = -1.0
        add_row(row, 0.0, f"p_nonneg[{i}]")
    for i in layout.active_dl:
        row = np.zeros(n)
        row[layout.dl_pos[i]] = -1.0
        add_row(row, 0.0, f"q_nonneg[{i}]")

    if layout.fixed_a is None:
        for gi, grp in enumerate(scn.c7_groups):
            row = np.zeros(n)
            for i in grp:
                row[i] = 1.0
            add_row(row, 1.0, f"c7[{gi}]")
        for i in range(layout.na):
            row = np.zeros(n)
            row[i] = 1.0
            add_row(row, 1.0, f"a_ub[{i}]")
            row = np.zeros(n)
            row[i] = -1.0
            add_row(row, 0.0, f"a_lb[{i}]")

    logcons = []
    user_dl = _active_user_pairs(layout, "dl")

    def dl_surrogate(pairs):
        return _interference_linearization(layout, pairs, "dl", params, x_t)

    def ul_surrogate(pairs):
        return _interference_linearization(layout, pairs, "ul", params, x_t)

    if moop == "rate":
        for nidx, (direction, surrogate, users) in enumerate(
                (("dl", dl_surrogate, user_dl), ("ul", ul_surrogate, user_ul))):
            w = nu[nidx]
            if w <= 0:
                continue
            coefs, arows, aoffs = [], [], []
            lin = np.zeros(n)
            const = -w * targets[nidx]
            for k in sorted(users):
                pairs = users[k]
                if not pairs:
                    continue
                c_, r_, o_ = _rate_terms(layout, pairs, direction, params, w)
                coefs += c_
                arows += r_
                aoffs += o_
                g0, grad = surrogate(pairs)
                lin -= w * grad
                const -= w * (g0 - float(grad @ x_t))
            lin[layout.aux] += 1.0
            logcons.append(LogConstraint(
                coef=np.array(coefs), arg_rows=np.array(arows) if arows else np.zeros((0, n)),
                arg_off=np.array(aoffs), lin=lin, const=const,
                label=f"tcheby_{direction}"))
    else:
        if nu[0] > 0:
            row = np.zeros(n)
            for i in layout.active_dl:
                row[layout.dl_pos[i]] = nu[0] * layout.q_scale / params.kappa
            row[layout.aux] = -1.0
            add_row(row, nu[0] * (targets[0] - params.pc_bs), "tcheby_pd")
        if nu[1] > 0:
            row = np.zeros(n)
            for i in layout.active_ul:
                row[layout.ul_pos[i]] = nu[1] * layout.p_scale / params.theta
            row[layout.aux] = -1.0
            add_row(row, nu[1] * (targets[1] - params.num_users * params.pc_ue),
                    "tcheby_pu")

    for direction, surrogate, users, rmin, qos_users in (
            ("dl", dl_surrogate, user_dl, params.r_min_dl, scn.dl_users),
            ("ul", ul_surrogate, user_ul, params.r_min_ul, scn.ul_users)):
        if rmin <= 0:
            continue
        for k in sorted(qos_users):
            pairs = users.get(k, [])
            if not pairs:
                raise InfeasibleError(
                    f"user {k} has no {direction} subcarriers but a positive rate floor",
                    max_violation=rmin)
            c_, r_, o_ = _rate_terms(layout, pairs, direction, params, 1.0)
            g0, grad = surrogate(pairs)
            lin = -grad
            const = -(g0 - float(grad @ x_t)) - rmin
            logcons.append(LogConstraint(
                coef=np.array(c_), arg_rows=np.array(r_), arg_off=np.array(o_),
                lin=lin, const=const, label=f"qos_{direction}[{k}]"))

    c = np.zeros(n)
    c[layout.aux] = 1.0
    obj_const = 0.0
    if layout.fixed_a is None:
        a_t = x_t[: layout.na]
        c[: layout.na] = lam * (1.0 - 2.0 * a_t)
        obj_const = lam * float(np.sum(a_t * a_t))

    prob = SurrogateProblem(
        n=n, c=c, obj_const=obj_const,
        A=np.array(rows) if rows else np.zeros((0, n)),
        b=np.array(rhs), logcons=logcons, row_labels=labels,
        interior_hint=layout.interior_point(),
        layout=layout, name=name or f"{moop}:{scn.mode}",
        aux_col=layout.aux)
    return prob, layout


def build_throughput_instance(nu, u_star, state: Allocation, scn: Scenario,
                              params: SystemParams, lam: float, fixed_a=None):
    return build_instance("rate", nu, u_star, state, scn, params, lam, fixed_a)


def build_power_instance(nu, p_min, state: Allocation, scn: Scenario,
                         params: SystemParams, lam: float, fixed_a=None):
    return build_instance("power", nu, p_min, state, scn, params, lam, fixed_a)


DEGENERATE_NU = {1: (1.0, 0.0), 2: (0.0, 1.0), 3: (1.0, 0.0), 4: (0.0, 1.0)}


def compute_utopia(objective_id: int, scn: Scenario, chan, params: SystemParams,
                   cfg) -> UtopiaPoint:
    """Optimize a single objective with the full machinery.

    objective_id: 1 = downlink rate, 2 = uplink rate (maximized);
    3 = downlink power, 4 = uplink power (minimized).  Returns the achieved
    value of the true objective at the rounded, re-validated allocation.
    """
    from . import mm  # deferred: mm builds instances through this module
    from .scenario import scenario_powers, scenario_rates

    if objective_id not in DEGENERATE_NU:
        raise ParamValidationError("objective_id must be in {1,2,3,4}")
    moop = "rate" if objective_id <= 2 else "power"
    if moop == "rate":
        budget = params.p_bs_max if objective_id == 1 else params.p_user_max
        if budget <= 0:
            return UtopiaPoint(objective_id, 0.0,
                               {"seed": chan.seed, "degenerate": "zero budget"})
    nu = DEGENERATE_NU[objective_id]
    alloc, trace = mm.run_mm(moop, nu, (0.0, 0.0), scn, chan, params, cfg)
    final = mm.round_and_repair(alloc, moop, nu, (0.0, 0.0), scn, chan, params, cfg)
    if moop == "rate":
        rates = scenario_rates(scn, final, params)
        value = rates.sum_dl if objective_id == 1 else rates.sum_ul
    else:
        powers = scenario_powers(scn, final, params)
        value = powers.total_dl if objective_id == 3 else powers.total_ul
    return UtopiaPoint(objective_id, float(value), {
        "seed": chan.seed,
        "iterations": len(trace.records),
        "converged": trace.converged,
    })

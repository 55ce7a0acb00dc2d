"""Brute-force reference solver for tiny full-duplex instances.

Enumerates every feasible binary assignment and grids the powers of the
active links geometrically (40 dB below the budget up to the budget, plus
exact zero).  Exact within grid resolution; used to pin expected values in
tests and to sanity-check the iterative pipeline.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import Allocation, ChannelRealization, SystemParams

MAX_COMBOS = 5_000_000


class TooLargeError(ValueError):
    """Instance exceeds the documented enumeration bounds."""


@dataclass(frozen=True)
class OracleResult:
    moop: str
    nu: tuple
    tcheby: float
    objectives: tuple            # (dl, ul) of the winning point
    allocation: Allocation
    u_star: tuple                # per-objective optimum over the same grid
    feasible_count: int
    grid_levels: int


def power_grid(p_max: float, levels: int) -> np.ndarray:
    """levels values: exact zero plus levels-1 geometric points over 40 dB."""
    if p_max <= 0:
        return np.array([0.0])
    if levels < 2:
        return np.array([0.0, p_max])[: max(levels, 1)]
    geo = p_max * np.geomspace(1e-4, 1.0, levels - 1)
    return np.concatenate([[0.0], geo])


def _assignments(M: int, K: int):
    """All subcarrier-to-user maps; value K leaves the subcarrier idle."""
    return itertools.product(range(K + 1), repeat=M)


def brute_force(moop: str, nu, chan: ChannelRealization, params: SystemParams,
                grid_levels: int = 8) -> OracleResult:
    """Enumerate assignments and power grids; return the scalarization winner.

    Feasibility (budgets and rate floors) is checked exactly at every grid
    point.  Raises TooLargeError outside K <= 3, M <= 3, levels <= 16.
    """
    M, K = params.num_subcarriers, params.num_users
    if K > 3 or M > 3 or grid_levels > 16:
        raise TooLargeError(f"oracle bounds exceeded: K={K}, M={M}, levels={grid_levels}")
    if moop not in ("rate", "power"):
        raise ValueError(f"unknown moop '{moop}'")
    nu = tuple(float(v) for v in nu)

    qgrid = power_grid(params.p_bs_max, grid_levels)
    pgrid = power_grid(params.p_user_max, grid_levels)
    sig = params.noise_power

    per_assignment = []
    feasible_total = 0
    for assign in _assignments(M, K):
        active = [(m, assign[m]) for m in range(M) if assign[m] < K]
        users_active = {k for (_m, k) in active}
        # A user with a positive floor but no subcarrier can never be served.
        if params.r_min_dl > 0 or params.r_min_ul > 0:
            if any(k not in users_active for k in range(K)):
                continue
        n_act = len(active)
        n_combo = (len(qgrid) * len(pgrid)) ** n_act if n_act else 1
        if n_combo > MAX_COMBOS:
            raise TooLargeError(f"power grid too large ({n_combo} combinations)")

        if n_act == 0:
            P = np.zeros((1, 0))
            Q = np.zeros((1, 0))
        else:
            axes = [qgrid] * n_act + [pgrid] * n_act
            mesh = np.meshgrid(*axes, indexing="ij")
            flat = [ax.reshape(-1) for ax in mesh]
            Q = np.stack(flat[:n_act], axis=1)
            P = np.stack(flat[n_act:], axis=1)

        feas = np.ones(len(Q), dtype=bool)
        feas &= Q.sum(axis=1) <= params.p_bs_max + 1e-15
        for k in users_active:
            cols = [i for i, (_m, kk) in enumerate(active) if kk == k]
            feas &= P[:, cols].sum(axis=1) <= params.p_user_max + 1e-15

        r_dl = np.zeros_like(Q)
        r_ul = np.zeros_like(P)
        for i, (m, k) in enumerate(active):
            r_dl[:, i] = np.log2(1.0 + Q[:, i] * chan.h[m, k]
                                 / (sig + P[:, i] * params.delta_ue))
            r_ul[:, i] = np.log2(1.0 + P[:, i] * chan.g[m, k]
                                 / (sig + Q[:, i] * params.delta_bs))
        for k in users_active:
            cols = [i for i, (_m, kk) in enumerate(active) if kk == k]
            if params.r_min_dl > 0:
                feas &= r_dl[:, cols].sum(axis=1) >= params.r_min_dl - 1e-12
            if params.r_min_ul > 0:
                feas &= r_ul[:, cols].sum(axis=1) >= params.r_min_ul - 1e-12
        if not feas.any():
            continue

        u1 = r_dl[feas].sum(axis=1)
        u2 = r_ul[feas].sum(axis=1)
        pd = Q[feas].sum(axis=1) / params.kappa + params.pc_bs
        pu = P[feas].sum(axis=1) / params.theta + K * params.pc_ue
        feasible_total += int(feas.sum())
        per_assignment.append((assign, active, Q[feas], P[feas], u1, u2, pd, pu))

    if not per_assignment:
        return OracleResult(moop=moop, nu=nu, tcheby=np.nan, objectives=(np.nan, np.nan),
                            allocation=Allocation(a=np.zeros((M, K)), p=np.zeros((M, K)),
                                                  q=np.zeros((M, K))),
                            u_star=(np.nan, np.nan), feasible_count=0,
                            grid_levels=grid_levels)

    if moop == "rate":
        obj1 = np.concatenate([rec[4] for rec in per_assignment])
        obj2 = np.concatenate([rec[5] for rec in per_assignment])
        u_star = (float(obj1.max()), float(obj2.max()))
    else:
        obj1 = np.concatenate([rec[6] for rec in per_assignment])
        obj2 = np.concatenate([rec[7] for rec in per_assignment])
        u_star = (float(obj1.min()), float(obj2.min()))

    best = None
    for assign, active, Q, P, u1, u2, pd, pu in per_assignment:
        if moop == "rate":
            vals1, vals2 = u1, u2
            gaps = np.full(len(vals1), -np.inf)
            if nu[0] > 0:
                gaps = np.maximum(gaps, nu[0] * (u_star[0] - vals1))
            if nu[1] > 0:
                gaps = np.maximum(gaps, nu[1] * (u_star[1] - vals2))
        else:
            vals1, vals2 = pd, pu
            gaps = np.full(len(vals1), -np.inf)
            if nu[0] > 0:
                gaps = np.maximum(gaps, nu[0] * (vals1 - u_star[0]))
            if nu[1] > 0:
                gaps = np.maximum(gaps, nu[1] * (vals2 - u_star[1]))
        i = int(np.argmin(gaps))
        cand = (float(gaps[i]), assign, active, Q[i], P[i],
                float(vals1[i]), float(vals2[i]))
        if best is None or cand[0] < best[0]:
            best = cand

    gap, assign, active, qrow, prow, v1, v2 = best
    a = np.zeros((M, K))
    p = np.zeros((M, K))
    q = np.zeros((M, K))
    for i, (m, k) in enumerate(active):
        a[m, k] = 1.0
        q[m, k] = qrow[i]
        p[m, k] = prow[i]
    return OracleResult(moop=moop, nu=nu, tcheby=gap, objectives=(v1, v2),
                        allocation=Allocation(a=a, p=p, q=q), u_star=u_star,
                        feasible_count=feasible_total, grid_levels=grid_levels)

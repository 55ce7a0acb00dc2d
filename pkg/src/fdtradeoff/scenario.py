"""Duplexing scenarios: full-duplex, hybrid, and half-duplex baselines.

A Scenario flattens one duplexing mode into link lists that the rest of the
pipeline consumes uniformly:

* ``fdfd``  - BS and users both full-duplex; every subcarrier carries one
  user in both directions and the only interference is residual
  self-interference (delta terms).
* ``fdhd``  - full-duplex BS, half-duplex users; users are split into
  uplink-only and downlink-only halves, a subcarrier may carry one user per
  direction, downlink reception suffers co-channel interference from the
  uplink user (f gains), uplink reception suffers BS self-interference.
* ``hd``    - orthogonal halves of the band per direction and no
  interference at all.

Each directed (subcarrier, user) pair owns one power variable; assignment
variables may be shared between directions (fdfd) or split (fdhd, hd).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Allocation, ChannelRealization, ParamValidationError, SystemParams
from .objective import Powers, Rates

MODES = ("fdfd", "fdhd", "hd")


@dataclass
class Scenario:
    mode: str
    num_users: int
    num_subcarriers: int
    dl_pairs: list           # [(m, k)] pairs owning a downlink power q
    ul_pairs: list           # [(m, k)] pairs owning an uplink power p
    a_owner: list            # [(m, k)] pair per assignment variable
    a_of_dl: np.ndarray      # assignment-variable index per dl pair
    a_of_ul: np.ndarray
    c7_groups: list          # lists of assignment-variable indices, sum <= 1
    dl_gain: np.ndarray      # h per dl pair
    ul_gain: np.ndarray      # g per ul pair
    dl_interf: list          # per dl pair: [(ul_pair_index, gain)] into p
    ul_interf: list          # per ul pair: [(dl_pair_index, gain)] into q
    dl_users: list           # users eligible for downlink service
    ul_users: list
    user_dl_pairs: dict      # user -> [dl pair indices]
    user_ul_pairs: dict
    shared_assignment: bool

    @property
    def c7_groups_mk(self):
        return [[self.a_owner[i] for i in grp] for grp in self.c7_groups]


def build_scenario(mode: str, chan: ChannelRealization, params: SystemParams,
                   ul_users=None) -> Scenario:
    """Assemble the link structure of one duplexing mode.

    For fdhd the uplink half defaults to the K/2 users nearest the base
    station (ties broken by user index); pass ul_users to override.
    """
    M, K = params.num_subcarriers, params.num_users
    if mode == "fdfd":
        return _build_fdfd(chan, params)
    if mode == "fdhd":
        if K % 2:
            raise ParamValidationError("fdhd requires an even number of users")
        if ul_users is None:
            dist = np.linalg.norm(chan.user_positions, axis=1)
            order = np.argsort(dist, kind="stable")
            ul_users = sorted(int(u) for u in order[: K // 2])
        else:
            ul_users = sorted(int(u) for u in ul_users)
            if len(ul_users) != K // 2:
                raise ParamValidationError("fdhd uplink user set must have K/2 users")
        return _build_fdhd(chan, params, ul_users)
    if mode == "hd":
        if M % 2:
            raise ParamValidationError("hd requires an even number of subcarriers")
        return _build_hd(chan, params)
    raise ParamValidationError(f"unknown mode '{mode}'; expected one of {MODES}")


def _build_fdfd(chan, params) -> Scenario:
    M, K = params.num_subcarriers, params.num_users
    pairs = [(m, k) for m in range(M) for k in range(K)]
    idx = {pair: i for i, pair in enumerate(pairs)}
    a_of = np.arange(len(pairs))
    c7 = [[idx[(m, k)] for k in range(K)] for m in range(M)]
    dl_interf = [[(i, params.delta_ue)] if params.delta_ue > 0 else [] for i in range(len(pairs))]
    ul_interf = [[(i, params.delta_bs)] if params.delta_bs > 0 else [] for i in range(len(pairs))]
    gains_h = np.array([chan.h[m, k] for (m, k) in pairs])
    gains_g = np.array([chan.g[m, k] for (m, k) in pairs])
    users = list(range(K))
    user_pairs = {k: [idx[(m, k)] for m in range(M)] for k in range(K)}
    return Scenario(
        mode="fdfd", num_users=K, num_subcarriers=M,
        dl_pairs=pairs, ul_pairs=pairs, a_owner=pairs,
        a_of_dl=a_of, a_of_ul=a_of.copy(), c7_groups=c7,
        dl_gain=gains_h, ul_gain=gains_g,
        dl_interf=dl_interf, ul_interf=ul_interf,
        dl_users=users, ul_users=list(users),
        user_dl_pairs=user_pairs, user_ul_pairs={k: list(v) for k, v in user_pairs.items()},
        shared_assignment=True)


def _build_fdhd(chan, params, ul_users) -> Scenario:
    M, K = params.num_subcarriers, params.num_users
    dl_users = [k for k in range(K) if k not in set(ul_users)]
    dl_pairs = [(m, k) for m in range(M) for k in dl_users]
    ul_pairs = [(m, j) for m in range(M) for j in ul_users]
    dl_idx = {pair: i for i, pair in enumerate(dl_pairs)}
    ul_idx = {pair: i for i, pair in enumerate(ul_pairs)}

    a_owner = list(dl_pairs) + list(ul_pairs)
    a_of_dl = np.arange(len(dl_pairs))
    a_of_ul = np.arange(len(ul_pairs)) + len(dl_pairs)
    c7 = []
    for m in range(M):
        c7.append([dl_idx[(m, k)] for k in dl_users])
        c7.append([len(dl_pairs) + ul_idx[(m, j)] for j in ul_users])

    # Downlink user k hears the co-channel uplink users; the BS hears its own
    # downlink transmissions through the residual self-interference path.
    dl_interf = [[(ul_idx[(m, j)], chan.f[m, j, k]) for j in ul_users]
                 for (m, k) in dl_pairs]
    ul_interf = [[(dl_idx[(m, k)], params.delta_bs) for k in dl_users]
                 if params.delta_bs > 0 else []
                 for (m, _j) in ul_pairs]

    return Scenario(
        mode="fdhd", num_users=K, num_subcarriers=M,
        dl_pairs=dl_pairs, ul_pairs=ul_pairs, a_owner=a_owner,
        a_of_dl=a_of_dl, a_of_ul=a_of_ul, c7_groups=c7,
        dl_gain=np.array([chan.h[m, k] for (m, k) in dl_pairs]),
        ul_gain=np.array([chan.g[m, j] for (m, j) in ul_pairs]),
        dl_interf=dl_interf, ul_interf=ul_interf,
        dl_users=dl_users, ul_users=list(ul_users),
        user_dl_pairs={k: [dl_idx[(m, k)] for m in range(M)] for k in dl_users},
        user_ul_pairs={j: [ul_idx[(m, j)] for m in range(M)] for j in ul_users},
        shared_assignment=False)


def _build_hd(chan, params) -> Scenario:
    M, K = params.num_subcarriers, params.num_users
    half = M // 2
    dl_carriers = range(half)
    ul_carriers = range(half, M)
    dl_pairs = [(m, k) for m in dl_carriers for k in range(K)]
    ul_pairs = [(m, k) for m in ul_carriers for k in range(K)]
    dl_idx = {pair: i for i, pair in enumerate(dl_pairs)}
    ul_idx = {pair: i for i, pair in enumerate(ul_pairs)}
    a_owner = list(dl_pairs) + list(ul_pairs)
    c7 = []
    for m in dl_carriers:
        c7.append([dl_idx[(m, k)] for k in range(K)])
    for m in ul_carriers:
        c7.append([len(dl_pairs) + ul_idx[(m, k)] for k in range(K)])
    users = list(range(K))
    return Scenario(
        mode="hd", num_users=K, num_subcarriers=M,
        dl_pairs=dl_pairs, ul_pairs=ul_pairs, a_owner=a_owner,
        a_of_dl=np.arange(len(dl_pairs)),
        a_of_ul=np.arange(len(ul_pairs)) + len(dl_pairs),
        c7_groups=c7,
        dl_gain=np.array([chan.h[m, k] for (m, k) in dl_pairs]),
        ul_gain=np.array([chan.g[m, k] for (m, k) in ul_pairs]),
        dl_interf=[[] for _ in dl_pairs], ul_interf=[[] for _ in ul_pairs],
        dl_users=users, ul_users=list(users),
        user_dl_pairs={k: [dl_idx[(m, k)] for m in dl_carriers] for k in users},
        user_ul_pairs={k: [ul_idx[(m, k)] for m in ul_carriers] for k in users},
        shared_assignment=False)


def link_rates(scn: Scenario, alloc: Allocation, params: SystemParams):
    """Unweighted per-pair spectral efficiencies (dl array, ul array)."""
    sig = params.noise_power
    rdl = np.empty(len(scn.dl_pairs))
    for i, (m, k) in enumerate(scn.dl_pairs):
        interf = sum(coef * alloc.p[scn.ul_pairs[j]] for j, coef in scn.dl_interf[i])
        rdl[i] = np.log2(1.0 + alloc.q[m, k] * scn.dl_gain[i] / (sig + interf))
    rul = np.empty(len(scn.ul_pairs))
    for i, (m, k) in enumerate(scn.ul_pairs):
        interf = sum(coef * alloc.q[scn.dl_pairs[j]] for j, coef in scn.ul_interf[i])
        rul[i] = np.log2(1.0 + alloc.p[m, k] * scn.ul_gain[i] / (sig + interf))
    return rdl, rul


def scenario_rates(scn: Scenario, alloc: Allocation, params: SystemParams) -> Rates:
    """Assignment-weighted rates in the shape of :class:`objective.Rates`."""
    rdl, rul = link_rates(scn, alloc, params)
    per_link_dl = np.zeros((scn.num_subcarriers, scn.num_users))
    per_link_ul = np.zeros_like(per_link_dl)
    per_user_dl = np.zeros(scn.num_users)
    per_user_ul = np.zeros(scn.num_users)
    for i, (m, k) in enumerate(scn.dl_pairs):
        per_link_dl[m, k] = rdl[i]
        per_user_dl[k] += alloc.a[m, k] * rdl[i]
    for i, (m, k) in enumerate(scn.ul_pairs):
        per_link_ul[m, k] = rul[i]
        per_user_ul[k] += alloc.a[m, k] * rul[i]
    return Rates(per_link_dl=per_link_dl, per_link_ul=per_link_ul,
                 per_user_dl=per_user_dl, per_user_ul=per_user_ul,
                 sum_dl=float(per_user_dl.sum()), sum_ul=float(per_user_ul.sum()))


def unweighted_user_rates(scn: Scenario, alloc: Allocation, params: SystemParams):
    """Per-user rate sums without assignment weights (the QoS-facing form).

    With the power-coupling constraints in force, unassigned pairs carry
    zero power and contribute exactly zero, so this equals the weighted sum
    at any binary-feasible point.
    """
    rdl, rul = link_rates(scn, alloc, params)
    dl = np.zeros(scn.num_users)
    ul = np.zeros(scn.num_users)
    for k, idxs in scn.user_dl_pairs.items():
        dl[k] = sum(rdl[i] for i in idxs)
    for k, idxs in scn.user_ul_pairs.items():
        ul[k] = sum(rul[i] for i in idxs)
    return dl, ul


def scenario_powers(scn: Scenario, alloc: Allocation, params: SystemParams) -> Powers:
    dl = sum(alloc.a[m, k] * alloc.q[m, k] for (m, k) in scn.dl_pairs)
    ul = sum(alloc.a[m, k] * alloc.p[m, k] for (m, k) in scn.ul_pairs)
    return Powers(total_dl=float(dl / params.kappa + params.pc_bs),
                  total_ul=float(ul / params.theta + params.num_users * params.pc_ue))


def coupled_powers(scn: Scenario, alloc: Allocation, params: SystemParams) -> Powers:
    """Power totals without assignment weights (the optimizer-facing form)."""
    dl = sum(alloc.q[m, k] for (m, k) in scn.dl_pairs)
    ul = sum(alloc.p[m, k] for (m, k) in scn.ul_pairs)
    return Powers(total_dl=float(dl / params.kappa + params.pc_bs),
                  total_ul=float(ul / params.theta + params.num_users * params.pc_ue))


def greedy_assignment(scn: Scenario, chan: ChannelRealization) -> np.ndarray:
    """Round-robin best-gain assignment, binary over the assignment variables.

    Users take turns (by index) claiming their best-scoring unclaimed
    subcarrier until every subcarrier of the block is taken.  The score is
    h*g where one assignment serves both directions, else the direction's
    own gain.
    """
    a = np.zeros(len(scn.a_owner))
    if scn.shared_assignment:
        blocks = [(sorted({m for (m, _k) in scn.dl_pairs}), sorted(scn.dl_users),
                   chan.h * chan.g, {pair: i for i, pair in enumerate(scn.a_owner)})]
    else:
        ndl = len(scn.dl_pairs)
        dl_map = {pair: i for i, pair in enumerate(scn.dl_pairs)}
        ul_map = {pair: ndl + i for i, pair in enumerate(scn.ul_pairs)}
        blocks = [
            (sorted({m for (m, _k) in scn.dl_pairs}), sorted(scn.dl_users), chan.h, dl_map),
            (sorted({m for (m, _k) in scn.ul_pairs}), sorted(scn.ul_users), chan.g, ul_map),
        ]
    for carriers, users, score, var_map in blocks:
        unclaimed = list(carriers)
        turn = 0
        while unclaimed:
            k = users[turn % len(users)]
            best = max(unclaimed, key=lambda m: (score[m, k], -m))
            unclaimed.remove(best)
            a[var_map[(best, k)]] = 1.0
            turn += 1
    return a


def assignment_matrix(scn: Scenario, a_vars: np.ndarray) -> np.ndarray:
    """Expand an assignment-variable vector into the full (M, K) matrix."""
    a = np.zeros((scn.num_subcarriers, scn.num_users))
    for i, (m, k) in enumerate(scn.a_owner):
        a[m, k] += a_vars[i]
    return a

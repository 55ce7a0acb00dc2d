"""Exact evaluators for rates, powers, penalty terms, and their surrogates.

These are the full-duplex (both BS and users) formulas; the baselines in
:mod:`fdtradeoff.scenario` generalize the interference terms.  Everything
here is pure and vectorized over (M, K) arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LN2, Allocation, ChannelRealization, SystemParams


@dataclass(frozen=True)
class Rates:
    """Per-link spectral efficiencies and their assignment-weighted sums."""

    per_link_dl: np.ndarray  # (M, K) bits/s/Hz, unweighted link rates
    per_link_ul: np.ndarray
    per_user_dl: np.ndarray  # (K,) a-weighted
    per_user_ul: np.ndarray
    sum_dl: float
    sum_ul: float


@dataclass(frozen=True)
class Powers:
    """Aggregate radiated-plus-circuit power per direction, watts."""

    total_dl: float
    total_ul: float


def rate_dl_link(q, p, h, params: SystemParams):
    """log2(1 + q h / (noise + p * delta_ue)); elementwise on arrays."""
    return np.log2(1.0 + q * h / (params.noise_power + p * params.delta_ue))


def rate_ul_link(p, q, g, params: SystemParams):
    """log2(1 + p g / (noise + q * delta_bs)); elementwise on arrays."""
    return np.log2(1.0 + p * g / (params.noise_power + q * params.delta_bs))


def sum_rates(alloc: Allocation, chan: ChannelRealization, params: SystemParams) -> Rates:
    rdl = rate_dl_link(alloc.q, alloc.p, chan.h, params)
    rul = rate_ul_link(alloc.p, alloc.q, chan.g, params)
    per_user_dl = (alloc.a * rdl).sum(axis=0)
    per_user_ul = (alloc.a * rul).sum(axis=0)
    return Rates(
        per_link_dl=rdl,
        per_link_ul=rul,
        per_user_dl=per_user_dl,
        per_user_ul=per_user_ul,
        sum_dl=float(per_user_dl.sum()),
        sum_ul=float(per_user_ul.sum()),
    )


def total_powers(alloc: Allocation, params: SystemParams) -> Powers:
    dl = float((alloc.a * alloc.q).sum() / params.kappa + params.pc_bs)
    ul = float((alloc.a * alloc.p).sum() / params.theta
               + params.num_users * params.pc_ue)
    return Powers(total_dl=dl, total_ul=ul)


# Concave/convex split of the per-user rate sums.  For user k,
#   F_dl - G_dl = sum_m log2(1 + q h / (noise + p delta_ue)),
# i.e. the unweighted downlink rate of user k over all subcarriers.

def f_dl(p_col, q_col, h_col, params: SystemParams) -> float:
    return float(np.log2(q_col * h_col + params.noise_power + p_col * params.delta_ue).sum())


def g_dl(p_col, params: SystemParams, num_terms=None) -> float:
    args = params.noise_power + np.asarray(p_col, dtype=float) * params.delta_ue
    if num_terms is not None:
        args = args[:num_terms]
    return float(np.log2(args).sum())


def f_ul(p_col, q_col, g_col, params: SystemParams) -> float:
    return float(np.log2(p_col * g_col + params.noise_power + q_col * params.delta_bs).sum())


def g_ul(q_col, params: SystemParams) -> float:
    return float(np.log2(params.noise_power + np.asarray(q_col, dtype=float) * params.delta_bs).sum())


def g_dl_gradient(p_t_col, params: SystemParams) -> np.ndarray:
    """d g_dl / d p at the expansion point, per subcarrier (1/(W) units)."""
    return params.delta_ue / ((params.noise_power + np.asarray(p_t_col, dtype=float)
                               * params.delta_ue) * LN2)


def g_ul_gradient(q_t_col, params: SystemParams) -> np.ndarray:
    return params.delta_bs / ((params.noise_power + np.asarray(q_t_col, dtype=float)
                               * params.delta_bs) * LN2)


def g_dl_surrogate(p_col, p_t_col, params: SystemParams) -> float:
    """Tangent over-estimator of g_dl at p_t (g_dl is concave in p)."""
    p = np.asarray(p_col, dtype=float)
    p_t = np.asarray(p_t_col, dtype=float)
    return g_dl(p_t, params) + float(g_dl_gradient(p_t, params) @ (p - p_t))


def g_ul_surrogate(q_col, q_t_col, params: SystemParams) -> float:
    q = np.asarray(q_col, dtype=float)
    q_t = np.asarray(q_t_col, dtype=float)
    return g_ul(q_t, params) + float(g_ul_gradient(q_t, params) @ (q - q_t))


# Binarity penalty: E - D >= 0 on [0,1] entries, zero exactly on binaries.

def penalty_e(a) -> float:
    return float(np.sum(a))


def penalty_d(a) -> float:
    return float(np.sum(np.square(a)))


def penalty_d_surrogate(a, a_t) -> float:
    """Tangent under-estimator of the convex D at a_t."""
    a = np.asarray(a, dtype=float)
    a_t = np.asarray(a_t, dtype=float)
    return penalty_d(a_t) + float((2.0 * a_t * (a - a_t)).sum())

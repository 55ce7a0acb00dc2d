"""Core domain types, unit conversions, and validation.

All internal arithmetic is carried out in linear units (watts, linear power
ratios, bits/s/Hz).  dB and dBm only appear at configuration boundaries; see
:mod:`fdtradeoff.config`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

LN2 = math.log(2.0)


class ParamValidationError(ValueError):
    """A system or solver parameter violates its documented bounds."""


class AllocationValidationError(ValueError):
    """An allocation violates the resource-allocation constraint set."""


def dbm_to_watts(x_dbm: float) -> float:
    """Convert dBm to watts: 23 dBm -> ~0.1995 W."""
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    if w <= 0:
        raise ValueError("watts must be positive for dBm conversion")
    return 10.0 * math.log10(w) + 30.0


def db_to_linear(x_db: float) -> float:
    """Convert a dB power ratio to a linear ratio: -90 dB -> 1e-9."""
    return 10.0 ** (x_db / 10.0)


def linear_to_db(r: float) -> float:
    if r <= 0:
        raise ValueError("ratio must be positive for dB conversion")
    return 10.0 * math.log10(r)


@dataclass(frozen=True)
class SystemParams:
    """Scalar constants of the system model, all in linear units.

    Attributes
    ----------
    num_users : int
        Number of users K served by the base station.
    num_subcarriers : int
        Number of orthogonal subcarriers M.
    delta_bs, delta_ue : float
        Residual self-interference coefficients (linear power ratios) at the
        base station and at each user terminal.
    noise_power : float
        Receiver noise power per subcarrier, watts.
    p_bs_max, p_user_max : float
        Transmit power budgets, watts.  A zero budget disables that
        direction entirely.
    kappa, theta : float
        Power-amplifier efficiencies (base station / user), in (0, 1).
    pc_bs, pc_ue : float
        Circuit power of the base station and of each user, watts.
    r_min_dl, r_min_ul : float
        Per-user rate floors, bits/s/Hz.
    subcarrier_bandwidth : float
        Hz; used only to convert spectral efficiency into throughput when
        reporting.
    penalty_lambda : float
        Weight of the binarity penalty on the relaxed assignment variables.
    cell_radius : float
        Meters.
    """

    num_users: int
    num_subcarriers: int
    delta_bs: float
    delta_ue: float
    noise_power: float
    p_bs_max: float
    p_user_max: float
    kappa: float
    theta: float
    pc_bs: float
    pc_ue: float
    r_min_dl: float
    r_min_ul: float
    subcarrier_bandwidth: float
    penalty_lambda: float
    cell_radius: float

    def replace(self, **kwargs) -> "SystemParams":
        return replace(self, **kwargs)


def default_params(**overrides) -> SystemParams:
    """Baseline parameter set for a 100 m cell.

    delta defaults to -90 dB, noise to -120 dBm, budgets to 42/23 dBm,
    amplifier efficiencies to 0.38/0.20 and the QoS floors to 10 and
    5 bits/s/Hz.  The penalty weight defaults to p_bs_max / noise_power.
    Any field can be overridden by keyword.
    """
    values = dict(
        num_users=10,
        num_subcarriers=32,
        delta_bs=db_to_linear(-90.0),
        delta_ue=db_to_linear(-90.0),
        noise_power=dbm_to_watts(-120.0),
        p_bs_max=dbm_to_watts(42.0),
        p_user_max=dbm_to_watts(23.0),
        kappa=0.38,
        theta=0.20,
        pc_bs=1.0,
        pc_ue=0.1,
        r_min_dl=10.0,
        r_min_ul=5.0,
        subcarrier_bandwidth=180e3,
        penalty_lambda=None,
        cell_radius=100.0,
    )
    values.update(overrides)
    if values["penalty_lambda"] is None:
        values["penalty_lambda"] = values["p_bs_max"] / values["noise_power"]
    return validate_params(SystemParams(**values))


def validate_params(params: SystemParams) -> SystemParams:
    """Check every invariant of SystemParams; raise with a field-by-field report."""
    errs = []

    def chk(cond, msg):
        if not cond:
            errs.append(msg)

    chk(isinstance(params.num_users, (int, np.integer)) and params.num_users >= 1,
        "num_users must be a positive integer")
    chk(isinstance(params.num_subcarriers, (int, np.integer)) and params.num_subcarriers >= 1,
        "num_subcarriers must be a positive integer")
    if not errs:
        chk(params.num_users <= params.num_subcarriers,
            "num_users exceeds num_subcarriers (K exceeds M): each user needs "
            "at least one subcarrier")
    for name in ("delta_bs", "delta_ue", "noise_power", "p_bs_max", "p_user_max",
                 "kappa", "theta", "pc_bs", "pc_ue", "r_min_dl", "r_min_ul",
                 "subcarrier_bandwidth", "penalty_lambda", "cell_radius"):
        v = getattr(params, name)
        chk(v is not None and math.isfinite(v), f"{name} must be finite")
    if errs:
        raise ParamValidationError("; ".join(errs))

    chk(params.noise_power > 0, "noise_power must be > 0 W")
    # Zero budgets are allowed: they disable a transmit direction.
    chk(params.p_bs_max >= 0, "p_bs_max must be >= 0 W")
    chk(params.p_user_max >= 0, "p_user_max must be >= 0 W")
    chk(0 < params.kappa < 1, "kappa must be in (0,1)")
    chk(0 < params.theta < 1, "theta must be in (0,1)")
    chk(params.pc_bs > 0, "pc_bs must be > 0 W")
    chk(params.pc_ue > 0, "pc_ue must be > 0 W")
    chk(params.delta_bs >= 0, "delta_bs must be >= 0")
    chk(params.delta_ue >= 0, "delta_ue must be >= 0")
    chk(params.r_min_dl >= 0, "r_min_dl must be >= 0")
    chk(params.r_min_ul >= 0, "r_min_ul must be >= 0")
    chk(params.subcarrier_bandwidth > 0, "subcarrier_bandwidth must be > 0 Hz")
    chk(params.penalty_lambda >= 1, "penalty_lambda must be >= 1")
    chk(params.cell_radius > 0, "cell_radius must be > 0 m")
    if errs:
        raise ParamValidationError("; ".join(errs))
    return params


@dataclass(frozen=True)
class ChannelRealization:
    """One fading draw: linear power gains plus the user placement.

    h[m, k]: BS -> user k on subcarrier m (downlink).
    g[m, k]: user k -> BS on subcarrier m (uplink).
    f[m, j, k]: uplink user j -> downlink user k on subcarrier m; only the
    hybrid baseline reads it.
    """

    h: np.ndarray
    g: np.ndarray
    f: np.ndarray
    user_positions: np.ndarray
    seed: int

    @property
    def num_subcarriers(self) -> int:
        return self.h.shape[0]

    @property
    def num_users(self) -> int:
        return self.h.shape[1]


def validate_realization(chan: ChannelRealization, params: SystemParams) -> ChannelRealization:
    M, K = params.num_subcarriers, params.num_users
    if chan.h.shape != (M, K) or chan.g.shape != (M, K) or chan.f.shape != (M, K, K):
        raise ParamValidationError(
            f"channel dimensions {chan.h.shape} do not match (M={M}, K={K})")
    for name, arr in (("h", chan.h), ("g", chan.g), ("f", chan.f)):
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ParamValidationError(f"channel gains {name} must be finite and nonnegative")
    if chan.user_positions.shape != (K, 2):
        raise ParamValidationError("user_positions must have shape (K, 2)")
    return chan


@dataclass(frozen=True)
class Allocation:
    """The decision triple: assignment a[m,k] and powers p[m,k], q[m,k] (watts).

    p is the uplink transmit power of user k on subcarrier m, q the downlink
    power radiated toward user k.
    """

    a: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @property
    def shape(self):
        return self.a.shape


def validate_allocation(alloc: Allocation, params: SystemParams,
                        c7_groups=None, tol: float = 1e-6,
                        binary: bool = False) -> Allocation:
    """Re-check every allocation invariant independently of how it was built.

    c7_groups optionally overrides the single-user-per-subcarrier rule with
    mode-specific groups (each group is a list of (m, k) index pairs whose
    assignment entries must sum to at most one).
    """
    M, K = params.num_subcarriers, params.num_users
    errs = []
    for name, arr in (("a", alloc.a), ("p", alloc.p), ("q", alloc.q)):
        if arr.shape != (M, K):
            raise AllocationValidationError(f"{name} has shape {arr.shape}, expected {(M, K)}")
        if not np.all(np.isfinite(arr)):
            errs.append(f"{name} contains non-finite entries")
    if np.any(alloc.p < -tol) or np.any(alloc.q < -tol):
        errs.append("powers must be nonnegative")
    if np.any(alloc.a < -tol) or np.any(alloc.a > 1 + tol):
        errs.append("assignment entries must lie in [0, 1]")
    if binary:
        dist = np.minimum(np.abs(alloc.a), np.abs(alloc.a - 1.0))
        if np.any(dist > tol):
            errs.append(f"assignment not binary (max deviation {dist.max():.3e})")

    if c7_groups is None:
        row_sums = alloc.a.sum(axis=1)
        if np.any(row_sums > 1 + tol):
            errs.append(f"subcarrier sharing violated (max sum {row_sums.max():.6f})")
    else:
        for grp in c7_groups:
            s = sum(alloc.a[m, k] for (m, k) in grp)
            if s > 1 + tol:
                errs.append(f"subcarrier sharing violated on group {grp} (sum {s:.6f})")

    scale_q = max(params.p_bs_max, 1.0)
    scale_p = max(params.p_user_max, 1.0)
    if np.any(alloc.q - alloc.a * params.p_bs_max > tol * scale_q):
        errs.append("coupling violated: q exceeds a * p_bs_max")
    if np.any(alloc.p - alloc.a * params.p_user_max > tol * scale_p):
        errs.append("coupling violated: p exceeds a * p_user_max")
    if errs:
        raise AllocationValidationError("; ".join(errs))
    return alloc


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop and inner-solver controls.

    penalty_saturation: when the (possibly ramped) penalty weight exceeds
    this threshold, the relaxed assignment variables are pinned to their
    rounded pattern inside each convex subproblem.  Above the threshold the
    relaxed optimum is binary beyond double precision, so the pinned problem
    is the same problem with the unrepresentable slack directions removed.
    """

    t_max: int = 30
    mm_rel_tol: float = 1e-4
    kkt_tol: float = 1e-8
    barrier_mu0: float = 1.0
    barrier_growth: float = 10.0
    binary_tol: float = 1e-3
    rng_seed: int = 0
    lambda_ramp: bool = False
    penalty_saturation: float = 1e5

    def replace(self, **kwargs) -> "SolverConfig":
        return replace(self, **kwargs)


def validate_solver_config(cfg: SolverConfig) -> SolverConfig:
    errs = []
    if cfg.t_max < 1:
        errs.append("t_max must be >= 1")
    for name in ("mm_rel_tol", "kkt_tol", "barrier_mu0", "binary_tol", "penalty_saturation"):
        if getattr(cfg, name) <= 0:
            errs.append(f"{name} must be > 0")
    if cfg.barrier_growth <= 1:
        errs.append("barrier_growth must be > 1")
    if errs:
        raise ParamValidationError("; ".join(errs))
    return cfg

"""Seeded channel generation: user placement, pathloss, Rayleigh fading.

A realization is fully determined by (seed, model config, system params), so
batches can be regenerated instead of shipped around.  Realizations can also
be persisted to a versioned JSON file with full double precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .model import ChannelRealization, ParamValidationError, SystemParams

SCHEMA_VERSION = 1


class ChannelFileError(ValueError):
    """A realization file is missing, truncated, or structurally wrong."""


@dataclass(frozen=True)
class ChannelModelConfig:
    """Distance-based pathloss plus i.i.d. Rayleigh (exponential power) fading.

    pathloss_ref_db is the loss at 1 m; the loss in dB grows with
    10 * pathloss_exponent * log10(d / 1 m).  Defaults correspond to the
    common cellular fit 128.1 + 37.6 log10(d_km).
    """

    pathloss_ref_db: float = 15.3
    pathloss_exponent: float = 3.76
    min_user_distance: float = 5.0
    fading: str = "rayleigh"  # "rayleigh" or "none" (unit gains, tests only)


def validate_channel_config(cfg: ChannelModelConfig, params: SystemParams) -> ChannelModelConfig:
    errs = []
    if cfg.pathloss_exponent <= 0:
        errs.append("pathloss_exponent must be > 0")
    if not (0 < cfg.min_user_distance < params.cell_radius):
        errs.append("min_user_distance must lie in (0, cell_radius)")
    if cfg.fading not in ("rayleigh", "none"):
        errs.append(f"unknown fading model '{cfg.fading}'")
    if errs:
        raise ParamValidationError("; ".join(errs))
    return cfg


def pathloss_gain(distance_m, cfg: ChannelModelConfig):
    """Linear power gain at the given distance(s) in meters."""
    d = np.maximum(np.asarray(distance_m, dtype=float), 1e-3)
    loss_db = cfg.pathloss_ref_db + 10.0 * cfg.pathloss_exponent * np.log10(d)
    return 10.0 ** (-loss_db / 10.0)


def place_users(params: SystemParams, cfg: ChannelModelConfig, seed: int) -> np.ndarray:
    """Drop K users uniformly in the cell disk, at least min_user_distance out.

    Points closer than min_user_distance to the base station are resampled.
    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    pos = np.empty((params.num_users, 2))
    for k in range(params.num_users):
        while True:
            r = params.cell_radius * math.sqrt(rng.uniform())
            if r >= cfg.min_user_distance:
                break
        phi = rng.uniform(0.0, 2.0 * math.pi)
        pos[k] = (r * math.cos(phi), r * math.sin(phi))
    return pos


def draw_channels(params: SystemParams, cfg: ChannelModelConfig,
                  positions: np.ndarray, seed: int) -> ChannelRealization:
    """Draw one fading realization on top of the deterministic pathloss.

    h[m,k] = PL(d_k) * X with X ~ Exp(1) i.i.d. per (m, k); g is drawn
    independently the same way.  f[m,j,k] applies the same law to the
    distance between uplink user j and downlink user k (floored at 1 m to
    keep the pathloss finite for co-located users).
    """
    M, K = params.num_subcarriers, params.num_users
    child_h, child_g, child_f = np.random.SeedSequence(seed).spawn(3)

    d_bs = np.linalg.norm(positions, axis=1)
    pl_bs = pathloss_gain(d_bs, cfg)

    diff = positions[:, None, :] - positions[None, :, :]
    d_uu = np.maximum(np.linalg.norm(diff, axis=2), 1.0)
    pl_uu = pathloss_gain(d_uu, cfg)

    if cfg.fading == "rayleigh":
        xh = np.random.default_rng(child_h).exponential(1.0, (M, K))
        xg = np.random.default_rng(child_g).exponential(1.0, (M, K))
        xf = np.random.default_rng(child_f).exponential(1.0, (M, K, K))
    else:
        xh = np.ones((M, K))
        xg = np.ones((M, K))
        xf = np.ones((M, K, K))

    h = pl_bs[None, :] * xh
    g = pl_bs[None, :] * xg
    f = pl_uu[None, :, :] * xf
    return ChannelRealization(h=h, g=g, f=f, user_positions=positions, seed=int(seed))


def make_realization(params: SystemParams, cfg: ChannelModelConfig, seed: int) -> ChannelRealization:
    """Placement plus fading from a single seed."""
    positions = place_users(params, cfg, seed)
    return draw_channels(params, cfg, positions, seed)


def save_realization(chan: ChannelRealization, cfg: ChannelModelConfig, path) -> None:
    """Write a realization as versioned JSON, round-tripping every double exactly."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "num_users": chan.num_users,
        "num_subcarriers": chan.num_subcarriers,
        "seed": chan.seed,
        "model": asdict(cfg),
        "user_positions": chan.user_positions.tolist(),
        "h": chan.h.tolist(),
        "g": chan.g.tolist(),
        "f": chan.f.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_realization(path) -> ChannelRealization:
    """Load a realization file; raises ChannelFileError on any structural problem."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ChannelFileError(f"cannot read realization file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ChannelFileError(f"realization file is not valid JSON: {exc}") from exc

    if not isinstance(payload, dict) or payload.get("schema_version") != SCHEMA_VERSION:
        raise ChannelFileError(
            f"unsupported realization schema {payload.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}")
    try:
        M = int(payload["num_subcarriers"])
        K = int(payload["num_users"])
        chan = ChannelRealization(
            h=np.asarray(payload["h"], dtype=float),
            g=np.asarray(payload["g"], dtype=float),
            f=np.asarray(payload["f"], dtype=float),
            user_positions=np.asarray(payload["user_positions"], dtype=float),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ChannelFileError(f"realization file is missing or corrupts a field: {exc}") from exc
    if chan.h.shape != (M, K) or chan.g.shape != (M, K) or chan.f.shape != (M, K, K):
        raise ChannelFileError("array shapes disagree with the file header")
    return chan

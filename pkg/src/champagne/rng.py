"""Counter-based random streams and isotropic stable increment sampling.

Every random number is a pure function of (seed, trajectory, step, slot), so
trajectories are reproducible independently of batching, thread count, or
evaluation order.  The generator is the SplitMix64 finalizer applied to a
Weyl sequence, one independent key per trajectory.

Isotropic alpha-stable vectors are sampled by Gaussian subordination: a
positive (alpha/2)-stable variable S (Kanter's method) times independent
normals, giving the characteristic function exp(-|u|^alpha).  Increments over
time h are then h^(1/alpha) times a standardized increment, which makes the
self-similar scaling law exact by construction.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "mix64",
    "stream_keys",
    "uniform01",
    "positive_stable",
    "standard_normals",
    "stable_vectors",
    "slots_per_step",
]

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0xA0761D6478BD642F)


def mix64(x) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64 arrays."""
    x = np.asarray(x, dtype=np.uint64).copy()
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def stream_keys(seed: int, traj_ids) -> np.ndarray:
    """Independent 64-bit keys for the given trajectory indices."""
    traj = np.asarray(traj_ids, dtype=np.uint64)
    base = mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _SEED_SALT)
    return mix64(base + traj * _GOLD)


def uniform01(keys, counters) -> np.ndarray:
    """Uniforms on the open interval (0, 1): one per (key, counter) pair."""
    keys = np.asarray(keys, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    raw = mix64(keys + counters * _GOLD)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def slots_per_step(d: int) -> int:
    """Draws consumed per step: 2 for the subordinator, 2 per normal pair."""
    return 2 + 2 * ((d + 1) // 2)


def positive_stable(rho: float, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Kanter sampler for the positive rho-stable law, rho in (0, 1).

    With u ~ U(0,1) and w ~ Exp(1) the output S satisfies
    E[exp(-lam*S)] = exp(-lam**rho).
    """
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    theta = np.pi * u
    a = (
        np.sin(rho * theta) ** (rho / (1.0 - rho))
        * np.sin((1.0 - rho) * theta)
        / np.sin(theta) ** (1.0 / (1.0 - rho))
    )
    return (a / w) ** ((1.0 - rho) / rho)


def standard_normals(keys: np.ndarray, base_counter, d: int) -> np.ndarray:
    """(n, d) standard normals via Box-Muller on counter slots."""
    n = keys.shape[0]
    pairs = (d + 1) // 2
    out = np.empty((n, 2 * pairs))
    for p in range(pairs):
        u1 = uniform01(keys, base_counter + np.uint64(2 * p))
        u2 = uniform01(keys, base_counter + np.uint64(2 * p + 1))
        r = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * np.pi * u2
        out[:, 2 * p] = r * np.cos(ang)
        out[:, 2 * p + 1] = r * np.sin(ang)
    return out[:, :d]


def stable_vectors(alpha: float, d: int, keys: np.ndarray, step: int) -> np.ndarray:
    """Standardized isotropic alpha-stable increments for one step.

    Characteristic function exp(-|u|^alpha); the time-h increment is
    h**(1/alpha) times this.
    """
    if not (1.0 < alpha < 2.0):
        raise ValueError("alpha must lie in (1, 2)")
    nslots = np.uint64(slots_per_step(d))
    base = np.uint64(step) * nslots
    u = uniform01(keys, base)
    w = -np.log(uniform01(keys, base + np.uint64(1)))
    s = positive_stable(alpha / 2.0, u, w)
    z = standard_normals(keys, base + np.uint64(2), d)
    return np.sqrt(2.0 * s)[:, None] * z

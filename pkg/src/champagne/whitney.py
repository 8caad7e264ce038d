"""Dyadic Whitney decomposition of a ball domain.

Cubes are half-open dyadic boxes prod_i [k_i*s, (k_i+1)*s) with s = 2**-level.
A cube is emitted iff it satisfies diam(Q) <= dist(Q, boundary) while its
dyadic parent does not, which makes the emitted family the unique maximal one;
the classical upper bound dist <= 4*diam then holds and is asserted rather
than assumed.  dist(Q, boundary) is computed in closed form for balls.

Refinement stops at ``max_level``; the uncovered boundary collar
{delta_D < 5*sqrt(d)*2**-max_level} is explicit, and criteria built on top
must treat it via tail estimates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BallDomain

__all__ = [
    "WhitneyCube",
    "WhitneyDecomposition",
    "decompose",
    "doubled_cube",
    "intersecting_cubes",
    "coverage_threshold",
    "max_cubes_per_ball",
    "bubble_cube_ratio_bound",
]

# enumeration guard for degenerate queries
_MAX_CANDIDATES_PER_LEVEL = 4_000_000


@dataclass(frozen=True)
class WhitneyCube:
    """One dyadic cube: level, integer multi-index, side 2**-level."""

    level: int
    index: tuple
    side: float
    center: np.ndarray
    dist_boundary: float

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(self.dimension)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.index, dtype=float) * self.side
        return lo, lo + self.side


def coverage_threshold(dimension: int, max_level: int) -> float:
    """Depth of the uncovered boundary collar: 5*sqrt(d)*2**-max_level."""
    return 5.0 * math.sqrt(dimension) * 2.0 ** (-max_level)


class WhitneyDecomposition:
    """Immutable result of :func:`decompose`.

    Cubes are stored per level as integer index arrays in canonical
    (level, lexicographic index) order; ``WhitneyCube`` views are built on
    demand.  Safe to share across threads.
    """

    def __init__(self, domain: BallDomain, max_level: int, level_idx: dict, level_dist: dict):
        self.domain = domain
        self.max_level = int(max_level)
        self._idx = level_idx          # level -> (n_l, d) int64, lexsorted
        self._dist = level_dist        # level -> (n_l,) float64
        self.levels = sorted(level_idx)
        self._start = {}
        n = 0
        for lev in self.levels:
            self._start[lev] = n
            n += self._idx[lev].shape[0]
        self._n = n
        self._lookup = {}              # level -> (mins, dims, sorted packed keys)

    def __len__(self) -> int:
        return self._n

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def coverage_threshold(self) -> float:
        return coverage_threshold(self.dimension, self.max_level)

    def level_indices(self, level: int) -> np.ndarray:
        return self._idx[level]

    def level_dists(self, level: int) -> np.ndarray:
        return self._dist[level]

    def level_centers(self, level: int) -> np.ndarray:
        side = 2.0 ** (-level)
        return (self._idx[level] + 0.5) * side

    def _locate_global(self, level: int, rows: np.ndarray) -> np.ndarray:
        return self._start[level] + rows

    def _level_of_global(self, i: int) -> tuple[int, int]:
        for lev in reversed(self.levels):
            if i >= self._start[lev]:
                return lev, i - self._start[lev]
        raise IndexError(i)

    def cube(self, i: int) -> WhitneyCube:
        """Cube view for a global cube id (canonical order)."""
        if not 0 <= i < self._n:
            raise IndexError(f"cube id {i} out of range")
        lev, row = self._level_of_global(i)
        side = 2.0 ** (-lev)
        idx = self._idx[lev][row]
        return WhitneyCube(
            level=lev,
            index=tuple(int(k) for k in idx),
            side=side,
            center=(idx + 0.5) * side,
            dist_boundary=float(self._dist[lev][row]),
        )

    def __iter__(self):
        return (self.cube(i) for i in range(self._n))

    # -- packed-key lookup ---------------------------------------------------

    def _keys(self, level: int):
        cached = self._lookup.get(level)
        if cached is None:
            idx = self._idx[level]
            if idx.shape[0] == 0:
                cached = (None, None, None)
            else:
                mins = idx.min(axis=0)
                dims = idx.max(axis=0) - mins + 1
                keys = np.ravel_multi_index((idx - mins).T, dims)
                # idx is lexsorted, so keys are already ascending
                cached = (mins, dims, keys)
            self._lookup[level] = cached
        return cached

    def _find_rows(self, level: int, query_idx: np.ndarray) -> np.ndarray:
        """Rows of query_idx present at the level; -1 where absent."""
        mins, dims, keys = self._keys(level)
        out = np.full(query_idx.shape[0], -1, dtype=np.int64)
        if keys is None:
            return out
        shifted = query_idx - mins
        ok = np.all((shifted >= 0) & (shifted < dims), axis=1)
        if not ok.any():
            return out
        qk = np.ravel_multi_index(shifted[ok].T, dims)
        pos = np.searchsorted(keys, qk)
        pos = np.minimum(pos, keys.shape[0] - 1)
        hit = keys[pos] == qk
        rows = np.where(ok)[0][hit]
        out[rows] = pos[hit]
        return out

    # -- queries ---------------------------------------------------------------

    def locate(self, x) -> int | None:
        """Global id of the cube whose half-open box contains x, else None.

        None means x lies in the uncovered boundary collar.  Raises if x is
        outside the domain.
        """
        x = np.asarray(x, dtype=float)
        got = self.locate_batch(x[None, :])
        val = int(got[0])
        return None if val < 0 else val

    def locate_batch(self, x: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`locate`; returns -1 where not covered."""
        x = np.asarray(x, dtype=float)
        if not bool(np.all(self.domain.contains(x))):
            raise ValueError("point outside the domain")
        out = np.full(x.shape[0], -1, dtype=np.int64)
        pending = np.arange(x.shape[0])
        for lev in self.levels:
            if pending.size == 0:
                break
            side = 2.0 ** (-lev)
            k = np.floor(x[pending] / side).astype(np.int64)
            rows = self._find_rows(lev, k)
            hit = rows >= 0
            out[pending[hit]] = self._locate_global(lev, rows[hit])
            pending = pending[~hit]
        return out

    def to_csv(self, path) -> None:
        """Export as CSV: level, index components, center coords, side, dist_boundary."""
        d = self.dimension
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(
                ["level"]
                + [f"i_{j}" for j in range(d)]
                + [f"c_{j}" for j in range(d)]
                + ["side", "dist_boundary"]
            )
            for lev in self.levels:
                side = 2.0 ** (-lev)
                centers = self.level_centers(lev)
                for idx, ctr, dist in zip(self._idx[lev], centers, self._dist[lev]):
                    w.writerow(
                        [lev]
                        + [int(k) for k in idx]
                        + [repr(float(c)) for c in ctr]
                        + [repr(side), repr(float(dist))]
                    )


def _box_dists_to_center(idx: np.ndarray, side: float, center: np.ndarray):
    """Max and min of |y - center| over each closed box idx*side + [0, side]^d."""
    lo = idx * side
    hi = lo + side
    far = np.maximum(hi - center, center - lo)
    maxd = np.sqrt((far * far).sum(axis=1))
    near = np.maximum(np.maximum(lo - center, center - hi), 0.0)
    mind = np.sqrt((near * near).sum(axis=1))
    return maxd, mind


def decompose(domain: BallDomain, max_level: int) -> WhitneyDecomposition:
    """Whitney decomposition down to dyadic level ``max_level``.

    Every emitted cube satisfies diam <= dist(Q, boundary) <= 4*diam and is
    maximal (its parent fails the lower bound).  Raises if no cube fits.
    """
    if max_level < 2:
        raise ValueError("max_level must be >= 2")
    d = domain.dimension
    sqd = math.sqrt(d)
    c = domain.center
    R = domain.radius

    offsets = np.stack(
        np.meshgrid(*([np.arange(2)] * d), indexing="ij"), axis=-1
    ).reshape(-1, d)

    lo0 = np.floor(c - R).astype(np.int64)
    hi0 = np.floor(c + R).astype(np.int64)
    cand = np.stack(
        np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(lo0, hi0)], indexing="ij"),
        axis=-1,
    ).reshape(-1, d)

    level_idx, level_dist = {}, {}
    for level in range(max_level + 1):
        if cand.shape[0] == 0:
            break
        side = 2.0 ** (-level)
        maxd, mind = _box_dists_to_center(cand, side, c)
        inside = maxd < R
        dist = R - maxd
        ok = inside & (side * sqd <= dist)
        if ok.any():
            emitted = cand[ok]
            order = np.lexsort(emitted.T[::-1])
            level_idx[level] = emitted[order]
            level_dist[level] = dist[ok][order]
            # classical upper bound, guaranteed by maximality
            if not np.all(level_dist[level] <= 4.0 * side * sqd):
                raise RuntimeError("Whitney upper bound dist <= 4*diam violated")
        if level == max_level:
            break
        refine = (~ok) & (mind < R)
        children = cand[refine]
        cand = (children[:, None, :] * 2 + offsets[None, :, :]).reshape(-1, d)

    if not level_idx:
        raise ValueError(
            f"max_level={max_level} too small: no dyadic cube fits inside the domain"
        )
    return WhitneyDecomposition(domain, max_level, level_idx, level_dist)


def doubled_cube(domain: BallDomain, cube: WhitneyCube) -> tuple[np.ndarray, np.ndarray]:
    """Concentric box of twice the side (lo, hi).  Asserted to stay inside D."""
    lo, hi = cube.bounds()
    half = cube.side / 2.0
    lo2, hi2 = lo - half, hi + half
    far = np.maximum(hi2 - domain.center, domain.center - lo2)
    if not np.sqrt((far * far).sum()) < domain.radius:
        raise RuntimeError("doubled cube escapes the domain; not a Whitney cube?")
    return lo2, hi2


def _candidate_levels(dec: WhitneyDecomposition, delta: float, r: float):
    # any cube meeting the ball has side in [(delta-r)/(5 sqrt d), (delta+r)/sqrt d];
    # widen by 2x each way for safety
    sqd = math.sqrt(dec.dimension)
    lo_side = (delta - r) / (10.0 * sqd)
    hi_side = 2.0 * (delta + r) / sqd
    for lev in dec.levels:
        side = 2.0 ** (-lev)
        if lo_side <= side <= hi_side:
            yield lev, side


def intersecting_cubes(dec: WhitneyDecomposition, center, radius: float) -> np.ndarray:
    """Global ids of cubes whose closed box meets the closed ball, ascending.

    Requires the ball to sit well inside the domain: radius < delta_D(center)/2.
    """
    x = np.asarray(center, dtype=float)
    dec.domain._check_dim(x)
    delta = dec.domain.radius - float(np.sqrt(((x - dec.domain.center) ** 2).sum()))
    if not radius > 0:
        raise ValueError("ball radius must be > 0")
    if not radius < delta / 2:
        raise ValueError("ball not inside D: require radius < dist_to_boundary(center)/2")

    found = []
    for lev, side in _candidate_levels(dec, delta, radius):
        kmin = np.floor((x - radius) / side).astype(np.int64)
        kmax = np.floor((x + radius) / side).astype(np.int64)
        count = int(np.prod(kmax - kmin + 1))
        if count > _MAX_CANDIDATES_PER_LEVEL:
            raise RuntimeError("candidate enumeration unexpectedly large")
        grid = np.stack(
            np.meshgrid(*[np.arange(a, b + 1) for a, b in zip(kmin, kmax)], indexing="ij"),
            axis=-1,
        ).reshape(-1, dec.dimension)
        rows = dec._find_rows(lev, grid)
        hit = rows >= 0
        if not hit.any():
            continue
        boxes = grid[hit]
        lo = boxes * side
        near = np.maximum(np.maximum(lo - x, x - (lo + side)), 0.0)
        meets = (near * near).sum(axis=1) <= radius * radius
        if meets.any():
            found.append(dec._locate_global(lev, rows[hit][meets]))
    if not found:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(found))


def max_cubes_per_ball(dec: WhitneyDecomposition, config) -> int:
    """Empirical bound on how many cubes one bubble can meet (c2 report)."""
    best = 0
    for center, radius in zip(config.centers, config.radii):
        best = max(best, int(intersecting_cubes(dec, center, float(radius)).size))
    return best


def bubble_cube_ratio_bound(dec: WhitneyDecomposition, config, boundary_points) -> float:
    """Empirical two-sided comparison constant for bubble/cube geometry.

    For every bubble meeting a cube, measures dist(Q, boundary)/delta_D(x_k)
    and, over the given boundary points z, dist(z, Q)/|x_k - z|; returns the
    smallest C >= 1 with all ratios in [1/C, C].
    """
    z = np.asarray(boundary_points, dtype=float)
    dom = dec.domain
    worst = 1.0
    for center, radius in zip(config.centers, config.radii):
        ids = intersecting_cubes(dec, center, float(radius))
        if ids.size == 0:
            continue
        delta = dom.radius - float(np.sqrt(((center - dom.center) ** 2).sum()))
        dist_z_center = np.sqrt(((z - center) ** 2).sum(axis=1))
        for i in ids:
            q = dec.cube(int(i))
            r1 = q.dist_boundary / delta
            worst = max(worst, r1, 1.0 / r1)
            lo, hi = q.bounds()
            nearest = np.clip(z, lo, hi)
            dist_z_cube = np.sqrt(((z - nearest) ** 2).sum(axis=1))
            r2 = dist_z_cube / dist_z_center
            worst = max(worst, float(r2.max()), float(1.0 / r2.min()))
    return worst

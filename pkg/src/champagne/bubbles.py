"""Bubble configurations: champagne families of disjoint closed balls
accumulating at the boundary, their generators and separation predicates.

Radial profiles and weight functions are closed-form enumerations rather than
arbitrary callables: divergence of an improper integral cannot be decided
from finitely many samples of a black box, so the criteria module needs the
analytic form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BallDomain, dist_to_boundary
from .kernels import Constants, small_radius_threshold, unit_ball_volume

__all__ = [
    "Bubble",
    "BubbleConfig",
    "ConstantProfile",
    "PowerProfile",
    "LogProfile",
    "RadialProfile",
    "OneWeight",
    "PowerWeight",
    "LogWeight",
    "WeightFunction",
    "profile_from_json",
    "weight_from_json",
    "generate_shell_config",
    "shell_radii",
    "count_nearby_centers",
    "separation_infimum",
    "profile_separation_infimum",
    "check_doubling",
    "capacity_separation_report",
]

DISJOINTNESS_SLACK = 1e-12


# ---------------------------------------------------------------------------
# radial profiles phi: decreasing (0,1) -> (0,1), closed form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantProfile:
    """phi(t) = c with c in (0, 1)."""

    c: float

    def __post_init__(self):
        if not 0.0 < self.c < 1.0:
            raise ValueError("constant profile value must lie in (0, 1)")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.c)
        return out if out.ndim else float(out)

    def to_json(self):
        return {"kind": "constant", "c": self.c}


@dataclass(frozen=True)
class PowerProfile:
    """phi(t) = (1-t)**beta with beta > 0."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("power profile exponent must be > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = (1.0 - t) ** self.beta
        return out if out.ndim else float(out)

    def to_json(self):
        return {"kind": "power", "beta": self.beta}


@dataclass(frozen=True)
class LogProfile:
    """phi(t) = log(e/(1-t))**(-p) with p > 0."""

    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("log profile exponent must be > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = (1.0 - np.log(1.0 - t)) ** (-self.p)
        return out if out.ndim else float(out)

    def to_json(self):
        return {"kind": "log", "p": self.p}


RadialProfile = Union[ConstantProfile, PowerProfile, LogProfile]


def profile_from_json(obj: dict) -> RadialProfile:
    kind = obj.get("kind")
    if kind == "constant":
        return ConstantProfile(float(obj["c"]))
    if kind == "power":
        return PowerProfile(float(obj["beta"]))
    if kind == "log":
        return LogProfile(float(obj["p"]))
    raise ValueError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# weight functions M: increasing [0,1) -> [1,inf) with the halving-doubling
# property M(1 - t/2) <= c * M(1 - t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OneWeight:
    """M == 1; doubling constant 1."""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        return out if out.ndim else float(out)

    @property
    def doubling_constant(self) -> float:
        return 1.0

    def to_json(self):
        return {"kind": "one"}


@dataclass(frozen=True)
class PowerWeight:
    """M(t) = (1-t)**(-gamma), gamma > 0; doubling constant 2**gamma."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("power weight exponent must be > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = (1.0 - t) ** (-self.gamma)
        return out if out.ndim else float(out)

    @property
    def doubling_constant(self) -> float:
        return 2.0**self.gamma

    def to_json(self):
        return {"kind": "power", "gamma": self.gamma}


@dataclass(frozen=True)
class LogWeight:
    """M(t) = log(e/(1-t))**p, p > 0; doubling constant (1+log 2)**p."""

    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError("log weight exponent must be > 0")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = (1.0 - np.log(1.0 - t)) ** self.p
        return out if out.ndim else float(out)

    @property
    def doubling_constant(self) -> float:
        return (1.0 + math.log(2.0)) ** self.p

    def to_json(self):
        return {"kind": "log", "p": self.p}


WeightFunction = Union[OneWeight, PowerWeight, LogWeight]


def weight_from_json(obj: dict) -> WeightFunction:
    kind = obj.get("kind")
    if kind == "one":
        return OneWeight()
    if kind == "power":
        return PowerWeight(float(obj["gamma"]))
    if kind == "log":
        return LogWeight(float(obj["p"]))
    raise ValueError(f"unknown weight kind {kind!r}")


def check_doubling(M: WeightFunction, c: float, grid: int = 20):
    """Verify M(1 - t/2) <= c*M(1 - t) on the geometric grid t = 2**-k.

    Returns (ok, worst_ratio, t_at_worst).
    """
    if grid < 10:
        raise ValueError("grid must be >= 10")
    if c < 1.0:
        raise ValueError("doubling constant must be >= 1")
    t = 2.0 ** (-np.arange(1, grid + 1, dtype=float))
    ratio = M(1.0 - t / 2.0) / M(1.0 - t)
    k = int(np.argmax(ratio))
    worst = float(ratio[k])
    return worst <= c, worst, float(t[k])


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bubble:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("bubble radius must be > 0")


class BubbleConfig:
    """Finite family of pairwise disjoint closed balls strictly inside D,
    with sup_k r_k/delta_D(x_k) < 1/2.

    Centers and radii are stored as arrays; ``meta`` carries generation
    parameters (profile, a, shells, seed) when built by the generator, and
    ``shell_ids`` group labels enable grouped summation.
    """

    def __init__(
        self,
        domain: BallDomain,
        centers,
        radii,
        shell_ids=None,
        meta: dict | None = None,
        validate: bool = True,
    ):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if centers.shape[0] != radii.shape[0]:
            raise ValueError("centers and radii length mismatch")
        if centers.shape[0] and centers.shape[1] != domain.dimension:
            raise ValueError("bubble centers have wrong dimension")
        self.domain = domain
        self.centers = centers
        self.radii = radii
        self.shell_ids = None if shell_ids is None else np.asarray(shell_ids, dtype=np.int64)
        self.meta = dict(meta) if meta else {}
        self._tree = None

        if self.n:
            if not np.all(radii > 0):
                raise ValueError("bubble radii must be > 0")
            delta = dist_to_boundary(domain, centers)
            if not np.all(delta > radii):
                k = int(np.argmin(delta - radii))
                raise ValueError(f"bubble {k} is not strictly inside the domain")
            self.deltas = delta
            self.ratio_sup = float((radii / delta).max())
            if not self.ratio_sup < 0.5:
                k = int(np.argmax(radii / delta))
                raise ValueError(
                    f"ratio_sup violated: bubble {k} has r/delta = {radii[k] / delta[k]:.6g} >= 1/2"
                )
        else:
            self.deltas = np.empty(0)
            self.ratio_sup = 0.0

        if validate and self.n > 1:
            report = self.disjointness_report()
            if report["violations"]:
                j, k = report["violations"][0]
                raise ValueError(
                    f"bubbles {j} and {k} are not disjoint "
                    f"(gap {report['min_margin']:.3e} <= slack {DISJOINTNESS_SLACK:g})"
                )

    @property
    def n(self) -> int:
        return int(self.centers.shape[0])

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def bubble(self, k: int) -> Bubble:
        return Bubble(self.centers[k].copy(), float(self.radii[k]))

    def __iter__(self):
        return (self.bubble(k) for k in range(self.n))

    @property
    def centers_tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.centers)
        return self._tree

    # -- disjointness ---------------------------------------------------------

    def disjointness_report(self, slack: float = DISJOINTNESS_SLACK) -> dict:
        """Exact pairwise disjointness via squared-distance comparisons.

        Balls are bucketed by radius scale; only radially overlapping buckets
        are cross-checked, so shell configurations validate in near-linear
        time.  Returns violations list, the minimum gap found among candidate
        pairs, and the slack used.
        """
        violations: list[tuple[int, int]] = []
        min_margin = math.inf
        if self.n < 2:
            return {"violations": violations, "min_margin": min_margin, "slack": slack}

        _, exponents = np.frexp(self.radii)
        norms = np.sqrt(((self.centers - self.domain.center) ** 2).sum(axis=1))
        buckets = []
        for e in np.unique(exponents):
            ids = np.where(exponents == e)[0]
            r_max = float(self.radii[ids].max())
            buckets.append(
                {
                    "ids": ids,
                    "tree": cKDTree(self.centers[ids]),
                    "r_max": r_max,
                    "lo": float(norms[ids].min()) - 2.0 * r_max,
                    "hi": float(norms[ids].max()) + 2.0 * r_max,
                }
            )

        def check_pairs(pairs_global):
            nonlocal min_margin
            for j, k in pairs_global:
                dsq = float(((self.centers[j] - self.centers[k]) ** 2).sum())
                lim = float(self.radii[j] + self.radii[k] + slack)
                margin = math.sqrt(dsq) - (float(self.radii[j] + self.radii[k]))
                min_margin = min(min_margin, margin)
                if dsq <= lim * lim:
                    violations.append((min(j, k), max(j, k)))

        for bi, b in enumerate(buckets):
            pairs = b["tree"].query_pairs(2.0 * b["r_max"] + slack, output_type="ndarray")
            if pairs.size:
                check_pairs(zip(b["ids"][pairs[:, 0]], b["ids"][pairs[:, 1]]))
            for b2 in buckets[bi + 1 :]:
                if b["hi"] < b2["lo"] or b2["hi"] < b["lo"]:
                    continue
                reach = b["r_max"] + b2["r_max"] + slack
                near = b2["tree"].query_ball_point(self.centers[b["ids"]], reach)
                for row, cands in enumerate(near):
                    j = int(b["ids"][row])
                    check_pairs((j, int(b2["ids"][cand])) for cand in cands)

        violations.sort()
        return {"violations": violations, "min_margin": min_margin, "slack": slack}

    # -- serialization ----------------------------------------------------------

    def to_csv(self, path) -> None:
        """One bubble per row: k, x_1..x_d, r."""
        d = self.dimension
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["k"] + [f"x_{j + 1}" for j in range(d)] + ["r"])
            for k in range(self.n):
                w.writerow(
                    [k]
                    + [repr(float(c)) for c in self.centers[k]]
                    + [repr(float(self.radii[k]))]
                )

    @classmethod
    def from_csv(cls, path, domain: BallDomain, **kw) -> "BubbleConfig":
        centers, radii = [], []
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            d = len(header) - 2
            for row in reader:
                centers.append([float(v) for v in row[1 : 1 + d]])
                radii.append(float(row[1 + d]))
        if not centers:
            return cls(domain, np.empty((0, domain.dimension)), np.empty(0), **kw)
        return cls(domain, np.asarray(centers), np.asarray(radii), **kw)

    def to_json(self) -> dict:
        out = {
            "domain": self.domain.to_json(),
            "bubbles": [
                {"center": [float(c) for c in self.centers[k]], "r": float(self.radii[k])}
                for k in range(self.n)
            ],
        }
        if self.meta:
            out["meta"] = {
                k: (v.to_json() if hasattr(v, "to_json") else v) for k, v in self.meta.items()
            }
        return out


# ---------------------------------------------------------------------------
# shell generator
# ---------------------------------------------------------------------------

def shell_radii(a: float, shells: int) -> np.ndarray:
    """Shell radii t_i = 1 - (1/2)*((1-a)/(1+a))**i, i = 1..shells."""
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    if shells < 1:
        raise ValueError("shells must be >= 1")
    q = (1.0 - a) / (1.0 + a)
    i = np.arange(1, shells + 1, dtype=float)
    return 1.0 - 0.5 * q**i


def _fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * k + 1.0) / n
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    phi = 2.0 * math.pi * k / golden
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    m = rng.standard_normal((d, d))
    q, r = np.linalg.qr(m)
    return q * np.sign(np.diag(r))


# lattice factors relative to the mean spacing: the Fibonacci lattice has
# min-NN distance 0.872x and covering radius <= 0.77x the mean (measured,
# stable in N); d=2 chords are enforced exactly instead
_MIN_NN_FACTOR = {2: 0.99, 3: 0.85}
_COVER_FACTOR = {3: 0.80}


def generate_shell_config(
    domain: BallDomain,
    phi: RadialProfile,
    a: float,
    shells: int,
    seed: int = 0,
    jitter: bool = True,
    spacing_factor: float = 1.0,
) -> BubbleConfig:
    """Bubbles on concentric shells accumulating at the unit sphere.

    Centers sit on spheres of radius t_i = 1 - (1/2)*((1-a)/(1+a))**i with
    radii r = (1-|x|)*phi(|x|).  The angular lattice (equal angles for d=2,
    Fibonacci lattice for d=3) is spaced by
    max(a*(1-t_i)/2, disjointness spacing), so the family is always pairwise
    disjoint; a seeded rotation decorrelates shells.  ``spacing_factor`` > 1
    thins every shell by that factor for deliberately sparse families (the
    coverage certificate below then typically fails and is reported as such).

    Exact-parameter coverage N_a >= 1 cannot hold at the critical radii
    between consecutive shells (the radial reach intervals only touch), so
    the generator records ``coverage_a`` in ``meta``: a widened parameter for
    which N_coverage_a(x) >= 1 holds on t_1 <= |x| <= t_shells, provided it
    came out below 1; values >= 1 mean no coverage certificate.
    """
    if domain.dimension not in (2, 3):
        raise ValueError("shell generator supports d in {2, 3}")
    if float(domain.radius) != 1.0 or not np.all(domain.center == 0.0):
        raise ValueError("shell generator requires the unit ball at the origin")
    if not spacing_factor >= 1.0:
        raise ValueError("spacing_factor must be >= 1")
    d = domain.dimension
    t = shell_radii(a, shells)
    u = 1.0 - t
    phi_vals = np.asarray(phi(t), dtype=float)
    bad = np.where(phi_vals >= 0.5)[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"shell {i + 1}: phi(t)={phi_vals[i]:.6g} >= 1/2 violates the ratio constraint"
        )
    r = u * phi_vals

    rng = np.random.default_rng(seed)
    centers, radii, sids = [], [], []
    spacing = np.empty(shells)
    counts = np.empty(shells, dtype=np.int64)
    for i in range(shells):
        # lattice spacing: N_a coverage wants a*u/2, disjointness wants the
        # minimum pairwise chord to clear 2r
        s_cov = a * u[i] / 2.0
        s_dis = 2.0 * r[i] * 1.05 / _MIN_NN_FACTOR[d]
        s = max(s_cov, s_dis) * spacing_factor
        spacing[i] = s
        if d == 2:
            n_i = max(3, int(math.ceil(2.0 * math.pi * t[i] / s)))
            # exact chord check: adjacent centers must clear the two radii
            while n_i > 1 and 2.0 * t[i] * math.sin(math.pi / n_i) <= 2.0 * r[i] * 1.02:
                n_i -= 1
            offset = rng.uniform(0.0, 2.0 * math.pi) if jitter else 0.0
            ang = offset + 2.0 * math.pi * np.arange(n_i) / n_i
            pts = t[i] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        else:
            n_i = max(4, int(math.ceil(4.0 * math.pi * t[i] ** 2 / (s * s))))
            pts = _fibonacci_sphere(n_i)
            if jitter:
                pts = pts @ _random_rotation(rng, 3).T
            pts = t[i] * pts
        counts[i] = n_i
        centers.append(pts)
        radii.append(np.full(n_i, r[i]))
        sids.append(np.full(n_i, i, dtype=np.int64))

    coverage_a = _coverage_parameter(a, t, spacing, counts, d)
    meta = {
        "phi": phi,
        "a": a,
        "shells": shells,
        "seed": seed,
        "jitter": jitter,
        "spacing_factor": spacing_factor,
        "t": [float(x) for x in t],
        "coverage_a": coverage_a,
    }
    return BubbleConfig(
        domain,
        np.concatenate(centers),
        np.concatenate(radii),
        shell_ids=np.concatenate(sids),
        meta=meta,
    )


def _coverage_parameter(a, t, spacing, counts, d) -> float:
    """Smallest a' (plus margin) with N_a'(x) >= 1 for t_1 <= |x| <= t_shells.

    Bounds the distance from any point at radius s to the nearest center on an
    adjacent shell by sqrt((s - t_j)^2 + cover_j^2) with cover_j the lattice
    covering chord, then maximizes the ratio to (1 - s) over the gaps.
    """
    cover = np.empty(len(t))
    for j in range(len(t)):
        if d == 2:
            cover[j] = 2.0 * t[j] * math.sin(math.pi / counts[j])  # full spacing chord
            cover[j] /= 2.0  # worst point sits half a spacing away
        else:
            cover[j] = _COVER_FACTOR[3] * math.sqrt(4.0 * math.pi * t[j] ** 2 / counts[j])
    worst = a
    for j in range(len(t)):
        lo = t[j - 1] if j else t[j]
        hi = t[j + 1] if j + 1 < len(t) else t[j]
        for s in np.linspace(lo, hi, 257):
            best = math.inf
            for jj in (j - 1, j, j + 1):
                if 0 <= jj < len(t):
                    best = min(best, math.hypot(s - t[jj], cover[jj]))
            worst = max(worst, best / (1.0 - s))
    return worst * 1.02  # >= 1 means the lattice does not certify coverage


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------

def count_nearby_centers(config: BubbleConfig, x, a: float, method: str = "indexed") -> int:
    """N_a(x): number of bubble centers within distance a*(1-|x|) of x.

    Strict inequality; defined on the unit ball.
    """
    x = np.asarray(x, dtype=float)
    nx = float(np.sqrt((x * x).sum()))
    if nx >= 1.0:
        raise ValueError("x must lie inside the unit ball")
    if not 0.0 < a < 1.0:
        raise ValueError("a must lie in (0, 1)")
    if config.n == 0:
        return 0
    reach = a * (1.0 - nx)
    if method == "bruteforce":
        dsq = ((config.centers - x) ** 2).sum(axis=1)
        return int((dsq < reach * reach).sum())
    if method == "indexed":
        idx = config.centers_tree.query_ball_point(x, reach)
        dsq = ((config.centers[idx] - x) ** 2).sum(axis=1)
        return int((dsq < reach * reach).sum())
    raise ValueError(f"unknown method {method!r}")


def _nearest_neighbor_distances(config: BubbleConfig) -> np.ndarray:
    dist, _ = config.centers_tree.query(config.centers, k=2)
    return dist[:, 1]


def separation_infimum(config: BubbleConfig, alpha: float) -> float:
    """inf over j != k of |x_j - x_k| / (r_k^(1-alpha/d) * delta(x_k)^(alpha/d)).

    +inf for a single bubble.  The denominator depends on k only, so the
    infimum reduces to nearest-neighbor distances.
    """
    if config.n == 0:
        raise ValueError("need at least one bubble")
    if config.n == 1:
        return math.inf
    d = config.dimension
    nn = _nearest_neighbor_distances(config)
    denom = config.radii ** (1.0 - alpha / d) * config.deltas ** (alpha / d)
    return float((nn / denom).min())


def profile_separation_infimum(config: BubbleConfig, phi: RadialProfile, alpha: float) -> float:
    """inf over m != n of |x_m - x_n| / (phi(|x_n|)^(1-alpha/d) * (1-|x_n|)).

    Requires the unit ball and radii consistent with r = (1-|x|)*phi(|x|).
    """
    if config.n == 0:
        raise ValueError("need at least one bubble")
    if float(config.domain.radius) != 1.0 or not np.all(config.domain.center == 0.0):
        raise ValueError("profile separation is defined on the unit ball")
    norms = np.sqrt((config.centers**2).sum(axis=1))
    expected = (1.0 - norms) * phi(norms)
    err = np.abs(expected - config.radii)
    if config.n and float(err.max()) > 1e-9 * max(1.0, float(config.radii.max())):
        k = int(np.argmax(err))
        raise ValueError(
            f"radii inconsistent with profile: bubble {k} has r={config.radii[k]!r}, "
            f"profile gives {expected[k]!r}"
        )
    if config.n == 1:
        return math.inf
    d = config.dimension
    nn = _nearest_neighbor_distances(config)
    denom = phi(norms) ** (1.0 - alpha / d) * (1.0 - norms)
    return float((nn / denom).min())


@dataclass(frozen=True)
class CapacitySeparationReport:
    """Checkable hypotheses under which disjoint-family capacity sums are
    comparable to the capacity of the union."""

    small_radius_ok: bool
    eta_separation_ok: bool
    strong_separation_ok: bool
    margins: dict = field(default_factory=dict)


def capacity_separation_report(config: BubbleConfig, consts: Constants) -> CapacitySeparationReport:
    """Evaluate the small-radius and separation hypotheses exactly.

    (i)   r_k <= (16^d * C * sigma_d)^(-1/alpha) for all k;
    (ii)  |x_j - x_k| / r_k^(1-alpha/d) >= 2 * C^(1/d) * sigma_d^(-1/d);
    plus the stronger delta-weighted threshold 32 * C^(2/d) * C_1^(2*alpha/d).
    """
    d = config.dimension
    alpha = consts.alpha
    sigma_d = unit_ball_volume(d)
    r_thresh = small_radius_threshold(consts, d)
    eta_thresh = 2.0 * consts.C ** (1.0 / d) * sigma_d ** (-1.0 / d)
    strong_thresh = 32.0 * consts.C ** (2.0 / d) * consts.C_1 ** (2.0 * alpha / d)

    if config.n == 0:
        return CapacitySeparationReport(True, True, True, {"r_max": 0.0})
    r_max = float(config.radii.max())
    if config.n == 1:
        eta_min = strong_min = math.inf
    else:
        nn = _nearest_neighbor_distances(config)
        eta_min = float((nn / config.radii ** (1.0 - alpha / d)).min())
        strong_min = float(
            (nn / (config.radii ** (1.0 - alpha / d) * config.deltas ** (alpha / d))).min()
        )
    return CapacitySeparationReport(
        small_radius_ok=r_max <= r_thresh,
        eta_separation_ok=eta_min >= eta_thresh,
        strong_separation_ok=strong_min >= strong_thresh,
        margins={
            "r_max": r_max,
            "r_threshold": r_thresh,
            "eta_ratio_min": eta_min,
            "eta_threshold": eta_thresh,
            "strong_ratio_min": strong_min,
            "strong_threshold": strong_thresh,
        },
    )

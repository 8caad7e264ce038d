import math

import numpy as np
import pytest

from champagne.bubbles import (
    BubbleConfig,
    ConstantProfile,
    LogProfile,
    LogWeight,
    OneWeight,
    PowerProfile,
    PowerWeight,
    generate_shell_config,
)
from champagne.criteria import (
    TailModel,
    Verdict,
    aikawa_sum,
    avoidability_series,
    classify_avoidability,
    classify_radial_integral,
    classify_shell_series,
    grouped_series_total,
    quasi_additivity_interval,
    uniform_boundary_grid,
    wiener_dyadic_sum,
)
from champagne.geometry import BallDomain
from champagne.kernels import Constants
from champagne.whitney import decompose


@pytest.fixture(scope="module")
def disk():
    return BallDomain(np.zeros(2), 1.0)


@pytest.fixture(scope="module")
def c15():
    return Constants(alpha=1.5)


@pytest.fixture(scope="module")
def dec7(disk):
    return decompose(disk, 7)


# -- boundary grids --------------------------------------------------------------

def test_boundary_grid_weights_sum_to_surface_measure():
    g2 = uniform_boundary_grid(BallDomain(np.zeros(2), 1.0), 64)
    assert float(g2.weights.sum()) == pytest.approx(2 * math.pi, rel=1e-6)
    g3 = uniform_boundary_grid(BallDomain(np.zeros(3), 1.0), 128)
    assert float(g3.weights.sum()) == pytest.approx(4 * math.pi, rel=1e-6)
    norms = np.sqrt((g3.points**2).sum(axis=1))
    assert np.allclose(norms, 1.0, atol=1e-12)


# -- series ---------------------------------------------------------------------

def test_series_single_bubble_hand_value(disk):
    cfg = BubbleConfig(disk, [[0.9, 0.0]], [0.01])
    ev = avoidability_series(cfg, [1.0, 0.0], 1.5)
    # 0.1^1 * 0.01^0.5 / 0.1^1.5
    assert ev.terms[0] == pytest.approx(0.31622776601683794, rel=1e-12)
    assert ev.total == pytest.approx(ev.terms[0])


def test_series_empty_config(disk):
    cfg = BubbleConfig(disk, np.empty((0, 2)), np.empty(0))
    ev = avoidability_series(cfg, [1.0, 0.0], 1.5)
    assert ev.total == 0.0
    assert grouped_series_total(cfg, [1.0, 0.0], 1.5) == 0.0


def test_series_partial_sums_monotone(disk):
    cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 4, seed=0)
    ev = avoidability_series(cfg, [0.0, 1.0], 1.5)
    assert np.all(np.diff(ev.partial_sums) >= 0)


def test_grouped_matches_naive_direct_sum(disk):
    # oracle: plain python accumulation in config order
    cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 6, seed=3)
    assert cfg.n > 10_000
    z = np.array([math.cos(0.3), math.sin(0.3)])
    alpha = 1.5
    naive = 0.0
    for k in range(cfg.n):
        delta = cfg.deltas[k]
        dist = math.sqrt(((cfg.centers[k] - z) ** 2).sum())
        naive += delta * cfg.radii[k] ** 0.5 / dist**1.5
    got = grouped_series_total(cfg, z, alpha)
    assert got == pytest.approx(naive, rel=1e-9)


# -- analytic classification --------------------------------------------------------

@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.8])
def test_canonical_profiles_classified(d, alpha):
    one = OneWeight()
    v = classify_radial_integral(ConstantProfile(0.35), one, d, alpha)
    assert v.tag == Verdict.DIVERGENT
    v = classify_radial_integral(PowerProfile(0.8), one, d, alpha)
    assert v.tag == Verdict.CONVERGENT
    v = classify_radial_integral(LogProfile(1.0 / (d - alpha)), one, d, alpha)
    assert v.tag == Verdict.DIVERGENT


def test_quadrature_trace_monotone_and_loglog_growth():
    d, alpha = 2, 1.5
    v = classify_radial_integral(LogProfile(1.0 / (d - alpha)), OneWeight(), d, alpha)
    trace = v.evidence["quadrature"]
    vals = [t[1] for t in trace]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    # integrand reduces to 1/(1+u): partial integral log(1+U) - log(1+u0)
    u0 = -math.log(1.0 - v.evidence["t0"])
    for (eps, val) in trace:
        want = math.log(1.0 - math.log(eps)) - math.log(1.0 + u0)
        assert val == pytest.approx(want, rel=1e-6)


def test_convergent_quadrature_plateaus():
    v = classify_radial_integral(PowerProfile(1.0), OneWeight(), 2, 1.5)
    vals = [t[1] for t in v.evidence["quadrature"]]
    assert vals[-1] - vals[-2] < 1e-4 * vals[-1]


def test_weight_shifts_the_verdict():
    # (1-t)^0.8 alone converges; a strong power weight restores divergence
    d, alpha = 2, 1.5
    assert (
        classify_radial_integral(PowerProfile(0.8), OneWeight(), d, alpha).tag
        == Verdict.CONVERGENT
    )
    assert (
        classify_radial_integral(PowerProfile(0.8), PowerWeight(1.0), d, alpha).tag
        == Verdict.DIVERGENT
    )
    # borderline log cases decided by the log-power rule:
    # (1+u)^-1 still diverges, (1+u)^-2 converges
    assert (
        classify_radial_integral(LogProfile(4.0), LogWeight(1.0), d, alpha).tag
        == Verdict.DIVERGENT
    )
    assert (
        classify_radial_integral(LogProfile(6.0), LogWeight(1.0), d, alpha).tag
        == Verdict.CONVERGENT
    )


PAIRS = [
    (ConstantProfile(0.2), OneWeight()),
    (ConstantProfile(0.4), OneWeight()),
    (ConstantProfile(0.3), PowerWeight(0.5)),
    (ConstantProfile(0.3), LogWeight(1.0)),
    (PowerProfile(0.5), OneWeight()),
    (PowerProfile(1.0), OneWeight()),
    (PowerProfile(1.0), PowerWeight(0.25)),
    (PowerProfile(1.0), PowerWeight(2.0)),
    (PowerProfile(2.0), LogWeight(2.0)),
    (LogProfile(1.0), OneWeight()),
    (LogProfile(2.0), OneWeight()),
    (LogProfile(2.0), LogWeight(1.0)),
    (LogProfile(4.0), OneWeight()),
]


@pytest.mark.parametrize("phi,weight", PAIRS)
def test_shell_series_agrees_with_integral(phi, weight):
    for d, alpha in ((2, 1.5), (3, 1.3)):
        for a in (0.3, 0.5, 0.7):
            s = classify_shell_series(phi, weight, d, alpha, a)
            i = classify_radial_integral(phi, weight, d, alpha)
            assert s.tag == i.tag


# -- whitney sums ---------------------------------------------------------------------

def test_aikawa_empty_config(disk, dec7, c15):
    cfg = BubbleConfig(disk, np.empty((0, 2)), np.empty(0))
    trace = aikawa_sum(dec7, cfg, [1.0, 0.0], c15)
    assert trace.total.lower == trace.total.upper == 0.0
    assert trace.uncovered_bubbles.size == 0


def test_aikawa_single_bubble_hand_bound(disk, dec7, c15):
    from champagne.whitney import bubble_cube_ratio_bound, intersecting_cubes

    # center the bubble inside a cube so the lower envelope is positive
    center = dec7.cube(dec7.locate([0.53, 0.01])).center
    cfg = BubbleConfig(disk, [center], [0.01])
    z = np.array([-1.0, 0.0])
    trace = aikawa_sum(dec7, cfg, z, c15)
    assert trace.total.lower > 0.0
    c2 = intersecting_cubes(dec7, cfg.centers[0], 0.01).size
    C1 = bubble_cube_ratio_bound(dec7, cfg, z[None, :])
    alpha, d = 1.5, 2
    delta = float(cfg.deltas[0])
    dist = float(np.sqrt(((center - z) ** 2).sum()))
    hand = (
        c2
        * c15.C
        * 0.01 ** (d - alpha)
        * C1 ** ((2 * alpha - 2) + (d + alpha - 2))
        * delta ** (2 * alpha - 2)
        / dist ** (d + alpha - 2)
    )
    assert trace.total.upper <= hand * (1 + 1e-9)


def test_aikawa_subconfig_ordering(disk, dec7, c15):
    cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 3, seed=4)
    half = BubbleConfig(
        disk, cfg.centers[::2], cfg.radii[::2], validate=False
    )
    z = np.array([0.0, -1.0])
    full = aikawa_sum(dec7, cfg, z, c15)
    sub = aikawa_sum(dec7, half, z, c15)
    assert sub.total.upper <= full.total.upper * (1 + 1e-12)


def test_aikawa_warns_below_collar(disk, c15):
    dec4 = decompose(disk, 4)  # coarse: collar depth ~0.44
    cfg = BubbleConfig(disk, [[0.9, 0.0]], [0.001])
    trace = aikawa_sum(dec4, cfg, [1.0, 0.0], c15)
    assert trace.uncovered_bubbles.tolist() == [0]
    assert any("collar" in w for w in trace.warnings)


def test_aikawa_rejects_interior_z(disk, dec7, c15):
    with pytest.raises(ValueError, match="boundary"):
        aikawa_sum(dec7, BubbleConfig(disk, [[0.5, 0.0]], [0.01]), [0.5, 0.5], c15)


def test_wiener_single_bubble_shell_membership(disk, dec7, c15):
    # distance 0.3 from z: shell n = 1 (0.25 <= 0.3 < 0.5)
    cfg = BubbleConfig(disk, [[0.7, 0.0]], [0.01])
    trace = wiener_dyadic_sum(dec7, cfg, [1.0, 0.0], c15, n_max=10)
    assert trace.shells.tolist() == [1]
    assert trace.skipped_far == 0
    assert trace.total.upper > 0.0


def test_wiener_empty_and_far(disk, dec7, c15):
    empty = BubbleConfig(disk, np.empty((0, 2)), np.empty(0))
    trace = wiener_dyadic_sum(dec7, empty, [1.0, 0.0], c15)
    assert trace.total.upper == 0.0
    far = BubbleConfig(disk, [[-0.5, 0.0]], [0.01])
    trace = wiener_dyadic_sum(dec7, far, [1.0, 0.0], c15)
    assert trace.skipped_far == 1
    assert trace.shells.size == 0


def test_wiener_matches_aikawa_within_constant(disk, dec7, c15):
    ratios = []
    for seed in range(10):
        cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 3, seed=seed)
        z = np.array([1.0, 0.0])
        a = aikawa_sum(dec7, cfg, z, c15)
        w = wiener_dyadic_sum(dec7, cfg, z, c15)
        ratios.append(w.total.upper / a.total.upper)
    ratios = np.asarray(ratios)
    assert ratios.max() / ratios.min() < 10.0


def test_quasi_additivity_interval_finite_and_ordered(disk, dec7, c15):
    cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 3, seed=1)
    lo, hi = quasi_additivity_interval(dec7, cfg, c15)
    assert 0.0 < lo <= hi < math.inf


# -- aggregate classification ------------------------------------------------------

def test_classify_dense_shell_config_unavoidable(disk, c15):
    cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 4, seed=0)
    grid = uniform_boundary_grid(disk, 16)
    report = classify_avoidability(cfg, c15, grid, TailModel(ConstantProfile(0.3)))
    assert report.aggregate == "unavoidable"
    assert all(v.tag == Verdict.DIVERGENT for v in report.per_z)
    assert report.separation > 0.0


def test_classify_thin_profile_avoidable_candidate(disk, c15):
    phi = PowerProfile(0.5)
    cfg = generate_shell_config(disk, phi, 0.5, 4, seed=0)
    grid = uniform_boundary_grid(disk, 16)
    report = classify_avoidability(cfg, c15, grid, TailModel(phi))
    assert report.aggregate == "avoidable-candidate"
    assert all(v.tag == Verdict.CONVERGENT for v in report.per_z)


def test_classify_empty_config(disk, c15):
    cfg = BubbleConfig(disk, np.empty((0, 2)), np.empty(0))
    grid = uniform_boundary_grid(disk, 8)
    report = classify_avoidability(cfg, c15, grid, None)
    assert report.aggregate == "avoidable-candidate"


def test_classify_without_tail_model_is_inconclusive(disk, c15):
    cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 3, seed=0)
    grid = uniform_boundary_grid(disk, 8)
    report = classify_avoidability(cfg, c15, grid, None)
    assert report.aggregate == "inconclusive"
    assert all(v.tag == Verdict.INCONCLUSIVE for v in report.per_z)
    assert np.all(report.per_z_totals > 0)


def test_classify_rotation_symmetric_verdicts(disk, c15):
    cfg = generate_shell_config(disk, ConstantProfile(0.3), 0.5, 4, seed=0, jitter=False)
    grid = uniform_boundary_grid(disk, 32)
    report = classify_avoidability(cfg, c15, grid, TailModel(ConstantProfile(0.3)))
    tags = {v.tag for v in report.per_z}
    assert len(tags) == 1

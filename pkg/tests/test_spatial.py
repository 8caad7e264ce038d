import numpy as np
import pytest

from champagne.bubbles import ConstantProfile, generate_shell_config
from champagne.geometry import BallDomain
from champagne.spatial import BallIndex


def _brute_owner(centers, radii, x):
    if centers.shape[0] == 0:
        return -1
    dist = np.sqrt(((centers - x) ** 2).sum(axis=1))
    inside = np.where(dist <= radii)[0]
    return int(inside[0]) if inside.size else -1


def test_empty_index():
    idx = BallIndex(np.empty((0, 2)), np.empty(0))
    hit, owner = idx.contains_batch(np.zeros((5, 2)))
    assert not hit.any() and np.all(owner == -1)


def test_index_matches_bruteforce_random_configs():
    rng = np.random.default_rng(0)
    # disjoint balls with radii spanning several scales
    centers, radii = [], []
    while len(centers) < 300:
        c = rng.uniform(-1, 1, 2)
        r = 10.0 ** rng.uniform(-4, -1)
        ok = all(
            np.sqrt(((c - c2) ** 2).sum()) > r + r2 + 1e-9
            for c2, r2 in zip(centers, radii)
        )
        if ok:
            centers.append(c)
            radii.append(r)
    centers = np.asarray(centers)
    radii = np.asarray(radii)
    idx = BallIndex(centers, radii)
    queries = rng.uniform(-1.1, 1.1, (5000, 2))
    # bias half the queries to ball surfaces where resolution matters
    k = rng.integers(0, 300, 2500)
    u = rng.standard_normal((2500, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    queries[:2500] = centers[k] + radii[k, None] * u * rng.uniform(0.8, 1.2, (2500, 1))
    hit, owner = idx.contains_batch(queries)
    for i, x in enumerate(queries):
        want = _brute_owner(centers, radii, x)
        assert (owner[i] if hit[i] else -1) == want


def test_index_on_shell_config():
    dom = BallDomain(np.zeros(2), 1.0)
    cfg = generate_shell_config(dom, ConstantProfile(0.4), 0.5, 4, seed=1)
    idx = BallIndex(cfg.centers, cfg.radii, origin=dom.center)
    rng = np.random.default_rng(1)
    queries = rng.uniform(-1, 1, (3000, 2))
    hit, owner = idx.contains_batch(queries)
    dist = np.sqrt(((queries[:, None, :] - cfg.centers[None, :5000, :]) ** 2).sum(-1))
    # spot-check positives exactly
    for i in np.where(hit)[0][:200]:
        k = int(owner[i])
        assert np.sqrt(((queries[i] - cfg.centers[k]) ** 2).sum()) <= cfg.radii[k]


def test_single_point_lookup():
    idx = BallIndex(np.array([[0.5, 0.0]]), np.array([0.1]))
    assert idx.contains([0.55, 0.0]) == 0
    assert idx.contains([0.7, 0.0]) is None

import numpy as np
import pytest

from brainenc.io import Atlas, NETWORKS
from brainenc.maps import (CATEGORIES, MapsError, map_convergence, network_profile,
                           overlap_categories, preferred_layer, spearman)


def brute_force_overlap(m1, m2, m3):
    counts = {c: 0 for c in CATEGORIES}
    for a, b, c in zip(m1, m2, m3):
        if a and b and c:
            counts["shared-all"] += 1
        elif a and b:
            counts["pair-l1l2"] += 1
        elif a and c:
            counts["pair-l1l3"] += 1
        elif b and c:
            counts["pair-l2l3"] += 1
        elif a:
            counts["only-l1"] += 1
        elif b:
            counts["only-l2"] += 1
        elif c:
            counts["only-l3"] += 1
        else:
            counts["none"] += 1
    return counts


def test_overlap_all_true():
    m = np.ones(10, dtype=bool)
    om = overlap_categories(m, m, m)
    assert om.categories == ["shared-all"] * 10
    assert om.paper_categories == ["shared-all"] * 10


def test_overlap_disjoint_masks():
    m1 = np.array([1, 0, 0, 0], dtype=bool)
    m2 = np.array([0, 1, 0, 0], dtype=bool)
    m3 = np.array([0, 0, 1, 0], dtype=bool)
    om = overlap_categories(m1, m2, m3)
    assert om.categories == ["only-l1", "only-l2", "only-l3", "none"]


def test_overlap_matches_brute_force():
    rng = np.random.default_rng(0)
    m1, m2, m3 = (rng.uniform(size=500) < 0.4 for _ in range(3))
    om = overlap_categories(m1, m2, m3)
    assert om.counts() == brute_force_overlap(m1, m2, m3)


def test_overlap_counts_sum_to_roi_count():
    rng = np.random.default_rng(1)
    m1, m2, m3 = (rng.uniform(size=123) < 0.5 for _ in range(3))
    om = overlap_categories(m1, m2, m3)
    assert sum(om.counts().values()) == 123


def test_overlap_shared_at_most_min_language_count():
    rng = np.random.default_rng(2)
    m1, m2, m3 = (rng.uniform(size=200) < 0.6 for _ in range(3))
    om = overlap_categories(m1, m2, m3)
    assert om.counts()["shared-all"] <= min(m1.sum(), m2.sum(), m3.sum())


def test_overlap_pairs_collapse_to_partial():
    om = overlap_categories([True], [True], [False])
    assert om.categories == ["pair-l1l2"]
    assert om.paper_categories == ["partial"]


def test_overlap_rejects_length_mismatch():
    with pytest.raises(MapsError):
        overlap_categories([True], [True, False], [False, False])


def test_preferred_layer_ties_break_low():
    g = np.ones((4, 6))
    pl = preferred_layer(g)
    np.testing.assert_array_equal(pl.best_layer, np.ones(6))


def test_preferred_layer_single_layer():
    g = np.random.default_rng(3).standard_normal((1, 5))
    pl = preferred_layer(g, layers=[7])
    np.testing.assert_array_equal(pl.best_layer, np.full(5, 7))
    np.testing.assert_array_equal(pl.best_score, g[0])


def test_preferred_layer_boosted_set_recovered():
    rng = np.random.default_rng(4)
    g = rng.standard_normal((5, 40)) * 0.01
    g[2] -= 1.0  # keep layer 3 from winning anywhere by chance
    boosted = [3, 7, 19, 33]
    g[2, boosted] += 10.0
    pl = preferred_layer(g)
    assert set(np.nonzero(pl.best_layer == 3)[0].tolist()) == set(boosted)
    np.testing.assert_array_equal(pl.best_score, g.max(axis=0))


def test_preferred_layer_invariant_to_constant_shift_at_roi():
    rng = np.random.default_rng(5)
    g = rng.standard_normal((6, 10))
    pl1 = preferred_layer(g)
    g2 = g.copy()
    g2[:, 4] += 100.0
    pl2 = preferred_layer(g2)
    np.testing.assert_array_equal(pl1.best_layer, pl2.best_layer)


def _atlas(n_rois):
    return Atlas(roi_ids=np.arange(n_rois), names=[f"r{i}" for i in range(n_rois)],
                 networks=[NETWORKS[i % len(NETWORKS)] for i in range(n_rois)],
                 hemispheres=["L"] * n_rois)


def test_network_profile_uniform_scores():
    atlas = _atlas(16)
    g = np.full((3, 16), 0.37)
    profile = network_profile(g, atlas)
    np.testing.assert_allclose(profile.means, 0.37)
    assert sorted(profile.networks) == sorted(set(atlas.networks))


def test_network_profile_matches_flat_oracle():
    rng = np.random.default_rng(6)
    atlas = _atlas(40)
    g = rng.standard_normal((5, 40))
    profile = network_profile(g, atlas)
    for ni, net in enumerate(profile.networks):
        members = [i for i in range(40) if atlas.networks[i] == net]
        for li in range(5):
            expected = np.mean([g[li, m] for m in members])
            assert profile.means[ni, li] == pytest.approx(expected, rel=1e-12)


def test_network_profile_invariant_to_roi_relabeling():
    rng = np.random.default_rng(7)
    atlas = _atlas(24)
    g = rng.standard_normal((2, 24))
    perm = rng.permutation(24)
    atlas_p = Atlas(roi_ids=np.arange(24), names=[atlas.names[i] for i in perm],
                    networks=[atlas.networks[i] for i in perm],
                    hemispheres=["L"] * 24)
    p1 = network_profile(g, atlas)
    p2 = network_profile(g[:, perm], atlas_p)
    assert p1.networks == p2.networks
    np.testing.assert_allclose(p1.means, p2.means, atol=1e-12)


def test_spearman_monotone_transform():
    rng = np.random.default_rng(8)
    x = rng.standard_normal(30)
    assert spearman(x, np.exp(x)) == pytest.approx(1.0)
    assert spearman(x, -x ** 3) == pytest.approx(-1.0)


def test_spearman_hand_value():
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_spearman_ties_match_rank_pearson_oracle():
    from brainenc.encoding import pearson
    a = [1.0, 1.0, 2.0]
    b = [3.0, 5.0, 4.0]
    # hand ranks: (1.5, 1.5, 3) vs (1, 3, 2)
    assert spearman(a, b) == pytest.approx(pearson([1.5, 1.5, 3.0], [1.0, 3.0, 2.0]))


def test_spearman_constant_is_nan():
    assert np.isnan(spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]))


def _masked(base, mask_frac, rng):
    m = base.copy()
    m[rng.uniform(size=m.shape) < mask_frac] = np.nan
    return m


def test_map_convergence_identical_maps():
    rng = np.random.default_rng(9)
    base = rng.standard_normal((4, 30))
    maps = {"l1": base, "l2": base.copy(), "l3": base.copy()}
    res = map_convergence(maps)
    np.testing.assert_allclose(res.summary, 1.0)


def test_map_convergence_one_language_masked():
    rng = np.random.default_rng(10)
    a = rng.standard_normal((2, 20))
    b = rng.standard_normal((2, 20))
    dead = np.full((2, 20), np.nan)
    res = map_convergence({"l1": a, "l2": b, "l3": dead})
    assert np.all(np.isnan(res.pair_rho[:, 1]))  # l1-l3
    assert np.all(np.isnan(res.pair_rho[:, 2]))  # l2-l3
    for li in range(2):
        assert res.summary[li] == pytest.approx(abs(res.pair_rho[li, 0]))


def test_map_convergence_uses_joint_finite_rois():
    rng = np.random.default_rng(11)
    base = rng.standard_normal((1, 50))
    m1 = _masked(base, 0.3, rng)
    m2 = _masked(base * 2 + 1, 0.3, rng)
    m3 = _masked(base - 0.5, 0.3, rng)
    res = map_convergence({"l1": m1, "l2": m2, "l3": m3})
    ok = np.isfinite(m1[0]) & np.isfinite(m2[0])
    expected = spearman(m1[0][ok], m2[0][ok])
    assert res.pair_rho[0, 0] == pytest.approx(expected)


def test_map_convergence_monotone_transform_invariance():
    rng = np.random.default_rng(12)
    base = rng.standard_normal((3, 25))
    maps1 = {"l1": base, "l2": base + rng.standard_normal((3, 25)),
             "l3": base + rng.standard_normal((3, 25))}
    maps2 = dict(maps1)
    maps2["l1"] = np.exp(maps1["l1"])  # strictly monotone
    r1 = map_convergence(maps1)
    r2 = map_convergence(maps2)
    np.testing.assert_allclose(r1.summary, r2.summary, atol=1e-12)


def test_map_convergence_needs_three_languages():
    with pytest.raises(MapsError):
        map_convergence({"l1": np.ones((2, 4)), "l2": np.ones((2, 4))})

import math

import numpy as np
import pytest

from brainenc.design import (DesignError, apply_zscore, build_design, fit_apply_zscore,
                             fit_zscore, hrf_kernel)
from brainenc.io import WordRecord


def reference_double_gamma(t):
    # independent re-derivation of the canonical shape for oracle checks
    resp = t ** 5 * math.exp(-t) / math.gamma(6)
    under = t ** 15 * math.exp(-t) / math.gamma(16)
    return resp - under / 6.0


def test_hrf_zero_at_origin():
    k = hrf_kernel(0.02)
    assert k.samples[0] == 0.0


def test_hrf_peak_location_matches_dense_maximization():
    dt = 0.02
    k = hrf_kernel(dt)
    # oracle: dense scan of the closed-form expression
    ts = np.arange(0, 32, 1e-4)
    dense = np.array([reference_double_gamma(t) for t in ts])
    t_star = ts[np.argmax(dense)]
    t_kernel = np.argmax(k.samples) * dt
    assert abs(t_kernel - t_star) <= dt
    assert abs(t_kernel - 5.0) <= dt


def test_hrf_single_sign_change_after_peak():
    k = hrf_kernel(0.05)
    tail = k.samples[np.argmax(k.samples):]
    signs = np.sign(tail[tail != 0])
    changes = int((np.diff(signs) != 0).sum())
    assert changes == 1


def test_hrf_single_global_maximum():
    k = hrf_kernel(0.02)
    assert (k.samples == k.samples.max()).sum() == 1
    assert np.all(np.isfinite(k.samples))


def test_hrf_rejects_bad_parameters():
    with pytest.raises(DesignError):
        hrf_kernel(0.0)
    with pytest.raises(DesignError):
        hrf_kernel(0.2)
    with pytest.raises(DesignError):
        hrf_kernel(0.02, support=10.0)


def _words(onsets, run="run-1"):
    return [WordRecord(f"w{i}", float(t), run, i) for i, t in enumerate(onsets)]


def test_zero_features_give_zero_design():
    dm = build_design(np.zeros((3, 4)), _words([1.0, 5.0, 9.0]), tr=2.0, n_tr=10)
    assert dm.values.shape == (10, 4)
    assert np.all(dm.values == 0)


def test_single_impulse_matches_kernel_at_tr_grid():
    tr, n_tr = 2.0, 16
    dm = build_design(np.ones((1, 1)), _words([0.0]), tr=tr, n_tr=n_tr)
    k = hrf_kernel(1.0 / 50.0)
    expected = k.samples[np.arange(n_tr) * 100]
    np.testing.assert_allclose(dm.values[:, 0], expected, atol=1e-12)


def test_superposition():
    rng = np.random.default_rng(3)
    onsets = [1.3, 11.7]
    f = rng.standard_normal((2, 5))
    both = build_design(f, _words(onsets), tr=2.0, n_tr=12).values
    one = build_design(np.vstack([f[0], np.zeros(5)]), _words(onsets), tr=2.0, n_tr=12).values
    two = build_design(np.vstack([np.zeros(5), f[1]]), _words(onsets), tr=2.0, n_tr=12).values
    assert np.abs(both - (one + two)).max() < 1e-10


def test_linearity():
    rng = np.random.default_rng(4)
    words = _words(rng.uniform(0, 39.9, size=8).tolist())
    f1 = rng.standard_normal((8, 3))
    f2 = rng.standard_normal((8, 3))
    a, b = 0.7, -1.9
    lhs = build_design(a * f1 + b * f2, words, 2.0, 20).values
    rhs = (a * build_design(f1, words, 2.0, 20).values
           + b * build_design(f2, words, 2.0, 20).values)
    assert np.abs(lhs - rhs).max() < 1e-10


def test_one_tr_onset_shift_shifts_rows():
    rng = np.random.default_rng(5)
    f = rng.standard_normal((4, 2))
    base = build_design(f, _words([4.0, 10.0, 16.0, 22.0]), tr=2.0, n_tr=30).values
    shifted = build_design(f, _words([6.0, 12.0, 18.0, 24.0]), tr=2.0, n_tr=30).values
    np.testing.assert_allclose(shifted[1:], base[:-1], atol=1e-10)


def test_onset_outside_run_rejected():
    with pytest.raises(DesignError, match="outside run"):
        build_design(np.ones((1, 1)), _words([20.0]), tr=2.0, n_tr=10)


def test_feature_row_mismatch_rejected():
    with pytest.raises(DesignError, match="one row per word"):
        build_design(np.ones((2, 1)), _words([1.0]), tr=2.0, n_tr=10)


def test_zscore_constant_column_zeroed():
    train = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    tn, an, mean, sd = fit_apply_zscore(train, train)
    assert np.all(tn[:, 1] == 0)
    assert np.all(an[:, 1] == 0)
    assert sd[1] == 0.0


def test_zscore_closed_form():
    train = np.array([[1.0], [2.0], [3.0]])
    tn, _, _, _ = fit_apply_zscore(train, train)
    np.testing.assert_allclose(tn[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)


def test_zscore_train_mean_zero():
    rng = np.random.default_rng(6)
    train = rng.standard_normal((40, 7)) * 3 + 1
    tn, _, _, _ = fit_apply_zscore(train, train)
    assert np.abs(tn.mean(axis=0)).max() < 1e-12


def test_zscore_stats_ignore_test_rows():
    rng = np.random.default_rng(7)
    train = rng.standard_normal((20, 3))
    test = rng.standard_normal((10, 3))
    mean1, sd1 = fit_zscore(train)
    _, _, mean2, sd2 = fit_apply_zscore(train, test * 100 + 5)
    np.testing.assert_array_equal(mean1, mean2)
    np.testing.assert_array_equal(sd1, sd2)


def test_zscore_rejects_single_row():
    with pytest.raises(DesignError):
        fit_zscore(np.ones((1, 2)))


def test_apply_zscore_uses_train_statistics():
    train = np.array([[0.0], [2.0]])
    mean, sd = fit_zscore(train)
    out = apply_zscore(np.array([[4.0]]), mean, sd)
    assert out[0, 0] == pytest.approx((4.0 - 1.0) / 1.0)

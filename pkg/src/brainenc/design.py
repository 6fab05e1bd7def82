"""Word-level features to TR-aligned design matrices.

Words are modeled as unit impulses at their onsets on a 50 Hz grid, convolved
with the canonical double-gamma haemodynamic response, and sampled at the
acquisition times of the run. Normalization is a plain per-column z-score
fitted on training rows only, so cross-validation splits never leak.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma as _gamma_fn

import numpy as np
from scipy.signal import fftconvolve

OVERSAMPLE_HZ = 50.0
DEFAULT_SUPPORT_SEC = 32.0


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class HrfKernel:
    sample_period: float
    samples: np.ndarray
    support: float


def _double_gamma(t: np.ndarray) -> np.ndarray:
    # g(t; a, b=1) = t^(a-1) e^(-t) / Gamma(a), response a=6, undershoot a=16
    g6 = np.power(t, 5) * np.exp(-t) / _gamma_fn(6)
    g16 = np.power(t, 15) * np.exp(-t) / _gamma_fn(16)
    return g6 - g16 / 6.0


def hrf_kernel(sample_period: float, support: float = DEFAULT_SUPPORT_SEC) -> HrfKernel:
    """Canonical double-gamma HRF sampled on [0, support], peak-normalized to 1.

    Parameters
    ----------
    sample_period : float
        Sampling step in seconds, in (0, 0.1].
    support : float
        Kernel length in seconds, at least 24.
    """
    if not (0 < sample_period <= 0.1):
        raise DesignError(f"sample_period must be in (0, 0.1], got {sample_period}")
    if support < 24:
        raise DesignError(f"support must be >= 24 s, got {support}")
    t = np.arange(0.0, support + sample_period / 2, sample_period)
    h = _double_gamma(t)
    h = h / h.max()
    return HrfKernel(sample_period=sample_period, samples=h, support=support)


@dataclass
class DesignMatrix:
    values: np.ndarray  # n_tr x n_features
    run_id: str
    layer: int
    col_mean: np.ndarray | None = None
    col_sd: np.ndarray | None = None


def build_design(features: np.ndarray, words, tr: float, n_tr: int,
                 run_id: str = "", layer: int = 0) -> DesignMatrix:
    """Convolve word impulses carrying feature vectors with the canonical HRF.

    Parameters
    ----------
    features : (n_words, n_dims) array
        One feature row per word record, in word order.
    words : sequence of WordRecord
        Word records for a single run; onsets must fall in [0, n_tr * tr).
    tr : float
        Repetition time in seconds.
    n_tr : int
        Number of acquisition samples for the run.

    Returns
    -------
    DesignMatrix with shape (n_tr, n_dims); linear in `features`.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != len(words):
        raise DesignError(
            f"features must be (n_words, n_dims) with one row per word; "
            f"got {features.shape} for {len(words)} words")
    duration = n_tr * tr
    dt = 1.0 / OVERSAMPLE_HZ
    n_grid = int(np.ceil(duration / dt))
    grid = np.zeros((n_grid, features.shape[1]))
    for row, rec in enumerate(words):
        if not (0 <= rec.onset_sec < duration):
            raise DesignError(
                f"word {rec.word_index} onset {rec.onset_sec} outside run [0, {duration})")
        idx = min(int(round(rec.onset_sec / dt)), n_grid - 1)
        grid[idx] += features[row]

    kernel = hrf_kernel(dt).samples
    out = fftconvolve(grid, kernel[:, None], axes=0)[:n_grid]

    tr_idx = np.minimum(np.round(np.arange(n_tr) * tr / dt).astype(int), n_grid - 1)
    values = out[tr_idx]
    if not np.all(np.isfinite(values)):
        raise DesignError("design matrix contains non-finite entries")
    return DesignMatrix(values=values, run_id=run_id, layer=layer)


def fit_zscore(train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column mean and population sd of the training rows.

    Columns with sd below 1e-12 get sd = 0 as a degenerate-column marker.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] < 2:
        raise DesignError("z-score fit needs at least 2 training rows")
    mean = train.mean(axis=0)
    sd = train.std(axis=0)
    sd = np.where(sd < 1e-12, 0.0, sd)
    return mean, sd


def apply_zscore(rows: np.ndarray, mean: np.ndarray, sd: np.ndarray) -> np.ndarray:
    """Normalize rows with previously fitted statistics; degenerate columns zero out."""
    rows = np.asarray(rows, dtype=np.float64)
    out = np.zeros_like(rows)
    ok = sd > 0
    out[:, ok] = (rows[:, ok] - mean[ok]) / sd[ok]
    return out


def fit_apply_zscore(train: np.ndarray, apply_to: np.ndarray):
    """Fit column statistics on `train` and normalize both splits.

    Returns (train_normalized, apply_normalized, mean, sd). Constant columns
    (sd < 1e-12) become all-zero in both splits.
    """
    mean, sd = fit_zscore(train)
    return apply_zscore(train, mean, sd), apply_zscore(apply_to, mean, sd), mean, sd

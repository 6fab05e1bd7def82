"""Ridge and banded-ridge encoding models with leave-one-run-out CV.

The solver decomposes X once and reuses the SVD across the whole alpha grid,
so nested cross-validation costs one decomposition per training split. Brain
scores are per-ROI Pearson correlations between predicted and observed
responses on the held-out run, averaged over folds.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .design import fit_zscore, apply_zscore

DEFAULT_ALPHA_GRID = tuple(10.0 ** np.arange(-2, 7))  # 1e-2 .. 1e6, 9 points


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class RidgeConfig:
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    bands: tuple | None = None          # ((start, stop), ...) column ranges
    band_grid: tuple = (0.1, 1.0, 10.0)
    inner_cv: str = "loro"

    def __post_init__(self):
        grid = tuple(float(a) for a in self.alpha_grid)
        if not grid or any(a <= 0 for a in grid) or list(grid) != sorted(set(grid)):
            raise EncodingError("alpha grid must be non-empty, positive, strictly increasing")
        object.__setattr__(self, "alpha_grid", grid)
        if self.bands is not None:
            check_bands(self.bands, n_cols=None)


def check_bands(bands, n_cols) -> None:
    """Bands must be disjoint; when n_cols is given they must cover all columns."""
    if len(bands) > 3:
        raise EncodingError("at most 3 bands supported")
    spans = sorted((int(a), int(b)) for a, b in bands)
    for (a0, b0), (a1, b1) in itertools.pairwise(spans):
        if a1 < b0:
            raise EncodingError(f"bands overlap: ({a0},{b0}) and ({a1},{b1})")
    if n_cols is not None:
        covered = sorted(i for a, b in spans for i in range(a, b))
        if covered != list(range(n_cols)):
            raise EncodingError("bands must cover all feature columns exactly once")


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Sample Pearson correlation; NaN when either vector has zero variance."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise EncodingError(f"pearson needs equal-length vectors, got {a.shape} vs {b.shape}")
    if a.size < 2:
        raise EncodingError("pearson needs length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    denom = np.sqrt((da @ da) * (db @ db))
    if denom == 0:
        return float("nan")
    return float((da @ db) / denom)


def pearson_columns(pred: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Column-wise Pearson correlations of two (n, v) matrices."""
    dp = pred - pred.mean(axis=0)
    do = obs - obs.mean(axis=0)
    num = np.einsum("ij,ij->j", dp, do)
    denom = np.sqrt(np.einsum("ij,ij->j", dp, dp) * np.einsum("ij,ij->j", do, do))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / denom
    r[denom == 0] = np.nan
    return r


class _RidgeSolver:
    """SVD of X computed once; weights for any alpha are a diagonal reweighting."""

    def __init__(self, X: np.ndarray, Y: np.ndarray):
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise EncodingError("non-finite values in regression inputs")
        if X.shape[0] != Y.shape[0]:
            raise EncodingError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if X.shape[0] < 2:
            raise EncodingError("need at least 2 samples")
        self.U, self.s, self.Vt = np.linalg.svd(X, full_matrices=False)
        self.UtY = self.U.T @ Y

    def weights(self, alpha: float) -> np.ndarray:
        if alpha < 0:
            raise EncodingError(f"alpha must be >= 0, got {alpha}")
        s = self.s
        if alpha == 0:
            # pseudoinverse fallback for oracle tests
            cutoff = 1e-13 * (s[0] if s.size else 0.0)
            shrink = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
        else:
            shrink = s / (s * s + alpha)
        return self.Vt.T @ (shrink[:, None] * self.UtY)


def ridge_fit(X: np.ndarray, Y: np.ndarray, alpha: float) -> np.ndarray:
    """Solve min ||Y - XW||^2 + alpha ||W||^2 via SVD.

    alpha = 0 is permitted for oracle comparisons and falls back to the
    pseudoinverse solution.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    squeeze = Y.ndim == 1
    if squeeze:
        Y = Y[:, None]
    W = _RidgeSolver(X, Y).weights(float(alpha))
    return W[:, 0] if squeeze else W


def banded_ridge_fit(X: np.ndarray, Y: np.ndarray, bands, alphas) -> np.ndarray:
    """Ridge with a block-diagonal penalty diag(a_1 I, ..., a_k I).

    Reduces to standard ridge at alpha = 1 by rescaling the columns of band b
    by 1/sqrt(a_b) and mapping the weights back.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    check_bands(bands, X.shape[1])
    alphas = [float(a) for a in alphas]
    if len(alphas) != len(bands):
        raise EncodingError("need one penalty scale per band")
    if any(a <= 0 for a in alphas):
        raise EncodingError("band penalties must be > 0")
    scale = np.empty(X.shape[1])
    for (a, b), al in zip(bands, alphas):
        scale[a:b] = 1.0 / np.sqrt(al)
    W = ridge_fit(X * scale, Y, 1.0)
    return W * (scale[:, None] if W.ndim == 2 else scale)


def banded_ridge_search(X_runs, Y_runs, bands, band_grid) -> tuple[tuple, np.ndarray]:
    """Exhaustive per-band scale search by leave-one-run-out within the given runs.

    Returns (best alphas, weights refit on all runs). The criterion is the
    mean Pearson correlation across ROIs and held-out runs.
    """
    if len(X_runs) < 2:
        raise EncodingError("banded search needs at least 2 runs")
    combos = list(itertools.product(*[tuple(band_grid)] * len(bands)))
    crit = np.full(len(combos), -np.inf)
    for ci, alphas in enumerate(combos):
        rs = []
        for h in range(len(X_runs)):
            Xtr = np.vstack([X for i, X in enumerate(X_runs) if i != h])
            Ytr = np.vstack([Y for i, Y in enumerate(Y_runs) if i != h])
            W = banded_ridge_fit(Xtr, Ytr, bands, alphas)
            r = pearson_columns(X_runs[h] @ W, Y_runs[h])
            if not np.all(np.isnan(r)):
                rs.append(np.nanmean(r))
        if rs:
            crit[ci] = np.mean(rs)
    best = combos[int(np.argmax(crit))]
    W = banded_ridge_fit(np.vstack(X_runs), np.vstack(Y_runs), bands, best)
    return best, W


@dataclass
class FoldDetail:
    test_run: str
    alpha: float
    roi_r: np.ndarray           # per-ROI r on the held-out run, NaN for zero-variance ROIs


@dataclass
class LoroResult:
    scores: np.ndarray          # per-ROI fold-mean r
    folds: list[FoldDetail]


def _fit_fold(X_runs, Y_runs, test_idx: int, alpha_grid) -> tuple[float, np.ndarray, tuple]:
    """Choose alpha by nested LORO on the training runs, then refit on all of them.

    Returns (alpha, weights, (x_mean, x_sd, y_mean, y_sd)) where the statistics
    are fitted on the concatenated training runs only.
    """
    train_ids = [i for i in range(len(X_runs)) if i != test_idx]
    crit = np.zeros(len(alpha_grid))
    counts = np.zeros(len(alpha_grid))
    for h in train_ids:
        inner_ids = [i for i in train_ids if i != h]
        Xtr = np.vstack([X_runs[i] for i in inner_ids])
        Ytr = np.vstack([Y_runs[i] for i in inner_ids])
        xm, xs = fit_zscore(Xtr)
        ym, ys = fit_zscore(Ytr)
        solver = _RidgeSolver(apply_zscore(Xtr, xm, xs), apply_zscore(Ytr, ym, ys))
        Xh = apply_zscore(X_runs[h], xm, xs)
        Yh = apply_zscore(Y_runs[h], ym, ys)
        for ai, alpha in enumerate(alpha_grid):
            r = pearson_columns(Xh @ solver.weights(alpha), Yh)
            if not np.all(np.isnan(r)):
                crit[ai] += np.nanmean(r)
                counts[ai] += 1
    with np.errstate(invalid="ignore"):
        mean_crit = np.where(counts > 0, crit / np.maximum(counts, 1), -np.inf)
    alpha = alpha_grid[int(np.argmax(mean_crit))]

    Xtr = np.vstack([X_runs[i] for i in train_ids])
    Ytr = np.vstack([Y_runs[i] for i in train_ids])
    xm, xs = fit_zscore(Xtr)
    ym, ys = fit_zscore(Ytr)
    W = _RidgeSolver(apply_zscore(Xtr, xm, xs), apply_zscore(Ytr, ym, ys)).weights(alpha)
    return alpha, W, (xm, xs, ym, ys)


def loro_cv(X_runs, Y_runs, config: RidgeConfig = RidgeConfig(),
            run_ids: list[str] | None = None) -> LoroResult:
    """Leave-one-run-out cross-validation over temporally ordered runs.

    Each run serves as the test set exactly once; within each fold the
    regularization strength is chosen by a nested leave-one-run-out over the
    training runs (criterion: mean Pearson r across ROIs), the model is refit
    on all training runs, and per-ROI correlations on the held-out run become
    that fold's scores. Normalization statistics come from training runs only.

    ROIs with zero variance in a test run get NaN for that fold and are
    excluded from the fold mean (kept in the fold detail).
    """
    if len(X_runs) != len(Y_runs):
        raise EncodingError("need matching X and Y run lists")
    if len(X_runs) < 3:
        raise EncodingError(f"leave-one-run-out needs >= 3 runs, got {len(X_runs)}")
    X_runs = [np.asarray(X, dtype=np.float64) for X in X_runs]
    Y_runs = [np.asarray(Y, dtype=np.float64) for Y in Y_runs]
    if run_ids is None:
        run_ids = [f"run-{i + 1}" for i in range(len(X_runs))]

    folds = []
    for t in range(len(X_runs)):
        alpha, W, (xm, xs, _, _) = _fit_fold(X_runs, Y_runs, t, config.alpha_grid)
        pred = apply_zscore(X_runs[t], xm, xs) @ W
        r = pearson_columns(pred, Y_runs[t])
        folds.append(FoldDetail(test_run=run_ids[t], alpha=alpha, roi_r=r))

    stacked = np.vstack([f.roi_r for f in folds])
    all_nan = np.all(np.isnan(stacked), axis=0)
    scores = np.full(stacked.shape[1], np.nan)
    if not all_nan.all():
        scores[~all_nan] = np.nanmean(stacked[:, ~all_nan], axis=0)
    return LoroResult(scores=scores, folds=folds)


@dataclass
class ScoreTensor:
    """Brain scores indexed subject x layer x ROI, with per-fold detail."""

    scores: np.ndarray                  # (S, L, R)
    fold_scores: np.ndarray             # (S, L, R, F), NaN for excluded folds
    subjects: list[str]
    layers: list[int]
    roi_ids: list[int]
    fold_run_ids: list[str] = field(default_factory=list)

    def validate(self) -> None:
        finite = self.scores[np.isfinite(self.scores)]
        if finite.size and (finite.min() < -1 - 1e-12 or finite.max() > 1 + 1e-12):
            raise EncodingError("scores outside [-1, 1]")
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fold_mean = np.nanmean(self.fold_scores, axis=3)
        both = np.isfinite(fold_mean) & np.isfinite(self.scores)
        if not np.allclose(fold_mean[both], self.scores[both], atol=1e-12, rtol=0):
            raise EncodingError("fold means disagree with stored scores")
        mismatch = np.isfinite(fold_mean) != np.isfinite(self.scores)
        if mismatch.any():
            raise EncodingError("NaN pattern disagrees between folds and scores")

    def group_mean(self) -> np.ndarray:
        """Mean over subjects -> (L, R)."""
        return self.scores.mean(axis=0)

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        io.write_matrix(self.scores, directory / "scores.enc")
        io.write_matrix(self.fold_scores, directory / "fold_scores.enc")
        index = {
            "subjects": self.subjects,
            "layers": self.layers,
            "roi_ids": self.roi_ids,
            "fold_run_ids": self.fold_run_ids,
        }
        with open(directory / "index.json", "w", encoding="utf-8") as f:
            json.dump(index, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, directory) -> "ScoreTensor":
        directory = Path(directory)
        with open(directory / "index.json", encoding="utf-8") as f:
            index = json.load(f)
        return cls(
            scores=io.read_matrix(directory / "scores.enc"),
            fold_scores=io.read_matrix(directory / "fold_scores.enc"),
            subjects=[str(s) for s in index["subjects"]],
            layers=[int(x) for x in index["layers"]],
            roi_ids=[int(x) for x in index["roi_ids"]],
            fold_run_ids=[str(x) for x in index["fold_run_ids"]],
        )


def encode_dataset(manifest, config: RidgeConfig = RidgeConfig(), threads: int = 1) -> ScoreTensor:
    """Run the full encoding pipeline for one dataset manifest.

    Builds HRF design matrices per (layer, run) once, then runs loro_cv per
    (subject, layer). Tasks write disjoint slices, so results are identical
    for any thread count.
    """
    from concurrent.futures import ThreadPoolExecutor
    from .design import build_design

    words = manifest.load_words()
    words_by_run = {r.run_id: [w for w in words if w.run_id == r.run_id] for r in manifest.runs}
    designs: dict[int, list[np.ndarray]] = {}
    for layer in manifest.layers:
        feats = manifest.load_features(layer)
        per_run = []
        for run in manifest.runs:
            wr = words_by_run[run.run_id]
            rows = np.asarray([w.word_index for w in wr], dtype=int)
            per_run.append(build_design(feats[rows], wr, run.tr_seconds, run.n_tr,
                                        run_id=run.run_id, layer=layer).values)
        designs[layer] = per_run

    run_ids = [r.run_id for r in manifest.runs]
    subjects = manifest.subjects
    layers = manifest.layers
    bold = {s: [manifest.load_bold(s, r) for r in manifest.runs] for s in subjects}
    atlas = manifest.load_atlas()

    n_runs = len(run_ids)
    scores = np.full((len(subjects), len(layers), atlas.n_rois), np.nan)
    fold_scores = np.full((len(subjects), len(layers), atlas.n_rois, n_runs), np.nan)

    def task(si_li):
        si, li = si_li
        res = loro_cv(designs[layers[li]], bold[subjects[si]], config, run_ids=run_ids)
        return si, li, res

    jobs = [(si, li) for si in range(len(subjects)) for li in range(len(layers))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, jobs))
    else:
        results = [task(j) for j in jobs]
    for si, li, res in results:
        scores[si, li] = res.scores
        for fi, fold in enumerate(res.folds):
            fold_scores[si, li, :, fi] = fold.roi_r

    tensor = ScoreTensor(scores=scores, fold_scores=fold_scores, subjects=list(subjects),
                         layers=list(layers), roi_ids=[int(i) for i in atlas.roi_ids],
                         fold_run_ids=run_ids)
    tensor.validate()
    return tensor

"""Group-level inference on brain scores.

One-sided t-tests with Benjamini-Hochberg FDR control, paired sign-flip
permutation tests (exact enumeration up to 2^20 patterns, Monte Carlo with
counter-based streams beyond), and a crossed random-intercepts mixed model
fitted by EM-REML.

Sign patterns are shared across ROIs within one comparison: a single flip
applies to a subject's whole difference map, preserving spatial dependence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .rng import signflip_signs

EXACT_LIMIT = 2 ** 20
DEFAULT_N_PERM = 10_000
_CHUNK = 16_384


class StatsError(ValueError):
    pass


@dataclass
class StatMap:
    roi_ids: np.ndarray
    stat: np.ndarray
    p: np.ndarray
    q: np.ndarray
    significant: np.ndarray
    descriptor: dict = field(default_factory=dict)
    group_mean: np.ndarray | None = None   # masked mean scores (NaN off-mask)

    def rows(self):
        for i in range(len(self.roi_ids)):
            row = [int(self.roi_ids[i]), float(self.stat[i]), float(self.p[i]),
                   float(self.q[i]), int(self.significant[i])]
            if self.group_mean is not None:
                row.append(float(self.group_mean[i]))
            yield row


def one_sample_t_one_sided(scores) -> tuple[float, float]:
    """One-sample t against zero, upper tail.

    t = mean / (sd / sqrt(n)) with the population sd, p from Student t with
    n-1 degrees of freedom via the regularized incomplete beta. Degenerate
    sd = 0: p = 0 when mean > 0, p = 1 when mean < 0, p = 0.5 when mean = 0.
    """
    x = np.asarray(scores, dtype=np.float64)
    n = x.size
    if n < 2:
        raise StatsError(f"t-test needs n >= 2, got {n}")
    mean = x.mean()
    sd = x.std()
    if sd == 0:
        if mean > 0:
            return float("inf"), 0.0
        if mean < 0:
            return float("-inf"), 1.0
        return 0.0, 0.5
    t = mean / (sd / np.sqrt(n))
    df = n - 1
    # upper tail: 0.5 * I_{df/(df+t^2)}(df/2, 1/2) for t >= 0
    xx = df / (df + t * t)
    tail = 0.5 * special.betainc(df / 2.0, 0.5, xx)
    p = tail if t >= 0 else 1.0 - tail
    return float(t), float(p)


def t_map(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise one-sided t-test of a (subjects, rois) matrix."""
    scores = np.asarray(scores, dtype=np.float64)
    out_t = np.empty(scores.shape[1])
    out_p = np.empty(scores.shape[1])
    for j in range(scores.shape[1]):
        out_t[j], out_p[j] = one_sample_t_one_sided(scores[:, j])
    return out_t, out_p


def bh_fdr(pvals, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Benjamini-Hochberg step-up control at level q.

    Returns (mask, adjusted q). The mask is the step-up rejection set: sort p
    ascending, find the largest k with p_(k) <= k*q/m, reject ranks 1..k.
    Adjusted q_i = min over j >= i of m*p_(j)/j, clipped to 1. Ties keep
    original indices stable.
    """
    p = np.asarray(pvals, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise StatsError("p-values must be a non-empty vector")
    if np.any(np.isnan(p)) or p.min() < 0 or p.max() > 1:
        raise StatsError("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    ranks = np.arange(1, m + 1)
    passed = ranked <= ranks * q / m
    mask = np.zeros(m, dtype=bool)
    if passed.any():
        k = np.max(np.nonzero(passed)[0]) + 1
        mask[order[:k]] = True
    adj = np.minimum.accumulate((m * ranked / ranks)[::-1])[::-1]
    adj = np.minimum(adj, 1.0)
    out = np.empty(m)
    out[order] = adj
    return mask, out


def _perm_pvals(diffs: np.ndarray, sign_chunks, n_patterns: int, two_sided: bool,
                add_one: bool) -> np.ndarray:
    """Count sign patterns whose statistic reaches the observed one.

    Comparisons use a per-ROI tolerance of 1e-12 times the mean |diff| so the
    identity pattern always counts regardless of summation order.
    """
    n, n_roi = diffs.shape
    t_obs = diffs.mean(axis=0)
    tol = 1e-12 * np.abs(diffs).mean(axis=0)
    target = (np.abs(t_obs) if two_sided else t_obs) - tol
    counts = np.zeros(n_roi, dtype=np.int64)
    for signs in sign_chunks:
        stats = (signs.astype(np.float64) @ diffs) / n
        if two_sided:
            stats = np.abs(stats)
        counts += (stats >= target).sum(axis=0)
    if add_one:
        return (counts + 1) / (n_patterns + 1)
    return counts / n_patterns


def _exact_chunks(n: int):
    total = 1 << n
    bits = np.arange(n, dtype=np.uint64)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        yield (((idx[:, None] >> bits) & np.uint64(1)).astype(np.int8) * 2 - 1)


def _mc_chunks(n: int, n_perm: int, seed: int):
    for start in range(0, n_perm, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, n_perm), dtype=np.uint64)
        yield signflip_signs(seed, idx, n)


def signflip_paired(diffs: np.ndarray, sidedness: str = "two-sided",
                    n_perm: int = DEFAULT_N_PERM, seed: int = 0,
                    method: str = "auto") -> np.ndarray:
    """Paired sign-flip permutation test on per-subject differences.

    The statistic is the mean difference across subjects, computed per ROI
    with one shared sign pattern per permutation. With 2^n <= 2^20 patterns
    all flips are enumerated and p = #{T_perm >= T_obs} / 2^n (respectively
    |T| for two-sided); otherwise Monte Carlo with p = (c + 1) / (n_perm + 1).

    Parameters
    ----------
    diffs : (n_subjects, n_rois) array
    sidedness : "two-sided" or "greater"
    method : "auto", "exact" or "mc"; "auto" enumerates whenever affordable.
        Forcing "mc" at small n exists so the sampler can be validated
        against enumeration.
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    if diffs.ndim == 1:
        diffs = diffs[:, None]
    n = diffs.shape[0]
    if n < 2:
        raise StatsError(f"sign-flip test needs >= 2 subjects, got {n}")
    if sidedness not in ("two-sided", "greater"):
        raise StatsError(f"unknown sidedness {sidedness!r}")
    two_sided = sidedness == "two-sided"
    if method not in ("auto", "exact", "mc"):
        raise StatsError(f"unknown method {method!r}")
    if method == "exact" and 2 ** n > EXACT_LIMIT:
        raise StatsError(f"exact enumeration infeasible for n = {n}")
    exact = method == "exact" or (method == "auto" and 2 ** n <= EXACT_LIMIT)
    if exact:
        return _perm_pvals(diffs, _exact_chunks(n), 2 ** n, two_sided, add_one=False)
    if n_perm < 100:
        raise StatsError(f"Monte Carlo mode needs n_perm >= 100, got {n_perm}")
    return _perm_pvals(diffs, _mc_chunks(n, n_perm, seed), n_perm, two_sided, add_one=True)


def significance_map(scores: np.ndarray, roi_ids, q: float = 0.05,
                     descriptor: dict | None = None) -> StatMap:
    """Per-ROI one-sided t-test across subjects with BH-FDR masking.

    `scores` is (subjects, rois) for one layer. The returned map carries the
    group-mean score on surviving ROIs and NaN elsewhere.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 2:
        raise StatsError("need a (subjects, rois) matrix with >= 2 subjects")
    t, p = t_map(scores)
    mask, adj = bh_fdr(p, q)
    group = scores.mean(axis=0)
    masked = np.where(mask, group, np.nan)
    desc = {"kind": "one-sample-t", "sidedness": "greater",
            "n_subjects": int(scores.shape[0]), "q": q}
    desc.update(descriptor or {})
    return StatMap(roi_ids=np.asarray(roi_ids), stat=t, p=p, q=adj,
                   significant=mask, descriptor=desc, group_mean=masked)


def _signflip_statmap(diffs: np.ndarray, roi_ids, sidedness: str, q: float,
                      n_perm: int, seed: int, kind: str) -> StatMap:
    valid = ~np.any(np.isnan(diffs), axis=0)
    p = np.full(diffs.shape[1], np.nan)
    if valid.any():
        p[valid] = signflip_paired(diffs[:, valid], sidedness, n_perm, seed)
    mask = np.zeros(diffs.shape[1], dtype=bool)
    adj = np.full(diffs.shape[1], np.nan)
    if valid.any():
        mask[valid], adj[valid] = bh_fdr(p[valid], q)
    t_obs = diffs.mean(axis=0)
    desc = {"kind": kind, "sidedness": sidedness, "n_subjects": int(diffs.shape[0]),
            "n_perm": (None if 2 ** diffs.shape[0] <= EXACT_LIMIT else n_perm),
            "seed": seed, "q": q}
    return StatMap(roi_ids=np.asarray(roi_ids), stat=t_obs, p=p, q=adj,
                   significant=mask, descriptor=desc)


def model_compare(scores_a: np.ndarray, scores_b: np.ndarray, roi_ids,
                  sidedness: str = "two-sided", q: float = 0.05,
                  n_perm: int = DEFAULT_N_PERM, seed: int = 0) -> StatMap:
    """Sign-flip comparison of two models' (subjects, rois) score matrices.

    Tests A - B per ROI; "greater" tests the hypothesis A > B.
    """
    A = np.asarray(scores_a, dtype=np.float64)
    B = np.asarray(scores_b, dtype=np.float64)
    if A.shape != B.shape:
        raise StatsError(f"score shapes differ: {A.shape} vs {B.shape}")
    return _signflip_statmap(A - B, roi_ids, sidedness, q, n_perm, seed,
                             kind="signflip-model-compare")


def layer_pair_fractions(scores: np.ndarray, q: float = 0.05,
                         n_perm: int = DEFAULT_N_PERM, seed: int = 0,
                         threads: int = 1) -> np.ndarray:
    """Fraction of ROIs with FDR-significant between-layer score differences.

    `scores` is (subjects, layers, rois). For every layer pair a two-sided
    sign-flip test runs per ROI, BH-FDR is applied across ROIs, and the cell
    holds the significant fraction (out of all ROIs). Symmetric, zero
    diagonal.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 3 or scores.shape[1] < 2:
        raise StatsError("need (subjects, layers, rois) with >= 2 layers")
    n_layers = scores.shape[1]
    n_rois = scores.shape[2]
    pairs = [(i, j) for i in range(n_layers) for j in range(i + 1, n_layers)]

    def one_pair(pair):
        i, j = pair
        sm = _signflip_statmap(scores[:, i, :] - scores[:, j, :], np.arange(n_rois),
                               "two-sided", q, n_perm, seed, kind="signflip-layer-pair")
        return pair, sm.significant.sum() / n_rois

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_pair, pairs))
    else:
        results = [one_pair(p) for p in pairs]

    frac = np.zeros((n_layers, n_layers))
    for (i, j), f in results:
        frac[i, j] = frac[j, i] = f
    return frac


@dataclass
class LmmFit:
    estimate: float
    se: float
    p: float
    var_subject: float
    var_roi: float
    var_residual: float
    converged: bool
    iterations: int


def lmm_crossed(subjects, rois, models, scores, tol: float = 1e-8,
                max_iter: int = 500) -> LmmFit:
    """Crossed random-intercepts model: score ~ model + (1|subject) + (1|roi).

    Variance components are estimated by EM-REML on Henderson's mixed-model
    equations to relative tolerance `tol`; the model contrast and its standard
    error come from generalized least squares at the converged components, and
    the p-value is a two-sided normal approximation on estimate/SE.
    """
    subjects = np.asarray(subjects)
    rois = np.asarray(rois)
    models = np.asarray(models)
    y = np.asarray(scores, dtype=np.float64)
    if not (len(subjects) == len(rois) == len(models) == len(y)):
        raise StatsError("subject/roi/model/score columns must be equally long")

    subj_levels, subj_idx = np.unique(subjects, return_inverse=True)
    roi_levels, roi_idx = np.unique(rois, return_inverse=True)
    model_levels, model_idx = np.unique(models, return_inverse=True)
    if len(model_levels) != 2:
        raise StatsError(f"need exactly 2 model levels, got {len(model_levels)}")
    if len(subj_levels) < 2 or len(roi_levels) < 2:
        raise StatsError("need >= 2 subjects and >= 2 ROIs")

    n = y.size
    X = np.column_stack([np.ones(n), model_idx.astype(np.float64)])
    q_s, q_r = len(subj_levels), len(roi_levels)
    Z = np.zeros((n, q_s + q_r))
    Z[np.arange(n), subj_idx] = 1.0
    Z[np.arange(n), q_s + roi_idx] = 1.0

    XtX = X.T @ X
    XtZ = X.T @ Z
    ZtZ = Z.T @ Z
    Xty = X.T @ y
    Zty = Z.T @ y
    yty = y @ y
    p_rank = np.linalg.matrix_rank(XtX)
    if p_rank < 2:
        raise StatsError("singular fixed-effect design")

    var_y = y.var() if y.var() > 0 else 1.0
    sig = np.array([var_y / 4, var_y / 4, var_y / 2])  # subject, roi, residual
    floor = 1e-10 * var_y

    def solve(sig_vec):
        lam = np.concatenate([
            np.full(q_s, sig_vec[2] / max(sig_vec[0], floor)),
            np.full(q_r, sig_vec[2] / max(sig_vec[1], floor)),
        ])
        M = np.block([[XtX, XtZ], [XtZ.T, ZtZ + np.diag(lam)]])
        rhs = np.concatenate([Xty, Zty])
        Minv = np.linalg.inv(M)
        sol = Minv @ rhs
        return sol[:2], sol[2:], Minv

    def neg2_restricted_ll(sig_vec, beta, u, Minv):
        # log|V| + log|X'V^-1 X| + y'Py up to an additive constant,
        # written in mixed-model-equation quantities
        s2e = sig_vec[2]
        lam = np.concatenate([
            np.full(q_s, s2e / max(sig_vec[0], floor)),
            np.full(q_r, s2e / max(sig_vec[1], floor)),
        ])
        S = ZtZ + np.diag(lam)
        _, logdet_s = np.linalg.slogdet(S)
        _, logdet_bb = np.linalg.slogdet(Minv[:2, :2])
        q = q_s + q_r
        return ((n - q - 2) * np.log(s2e)
                + q_s * np.log(max(sig_vec[0], floor))
                + q_r * np.log(max(sig_vec[1], floor))
                + logdet_s - logdet_bb
                + (yty - beta @ Xty - u @ Zty) / s2e)

    # convergence: relative change of the components, or of the restricted
    # likelihood (components on the zero boundary creep forever while the
    # likelihood is flat)
    converged = False
    it = 0
    prev_ll = None
    for it in range(1, max_iter + 1):
        beta, u, Minv = solve(sig)
        ll = neg2_restricted_ll(sig, beta, u, Minv)
        ll_rel = (abs(ll - prev_ll) / (1.0 + abs(ll))) if prev_ll is not None else np.inf
        prev_ll = ll
        u_s, u_r = u[:q_s], u[q_s:]
        tr_s = np.trace(Minv[2:2 + q_s, 2:2 + q_s])
        tr_r = np.trace(Minv[2 + q_s:, 2 + q_s:])
        new = np.array([
            (u_s @ u_s + sig[2] * tr_s) / q_s,
            (u_r @ u_r + sig[2] * tr_r) / q_r,
            (yty - beta @ Xty - u @ Zty) / (n - 2),
        ])
        new = np.maximum(new, floor)
        rel = np.max(np.abs(new - sig) / np.maximum(np.abs(sig), floor))
        sig = new
        if rel < tol or ll_rel < tol:
            converged = True
            break

    beta, u, Minv = solve(sig)
    se = float(np.sqrt(sig[2] * Minv[1, 1]))
    est = float(beta[1])
    if se > 0:
        p = float(2 * special.ndtr(-abs(est / se)))
    else:
        p = 1.0 if est == 0 else 0.0
    at_floor = sig[:2] <= 10 * floor
    return LmmFit(
        estimate=est, se=se, p=p,
        var_subject=0.0 if at_floor[0] else float(sig[0]),
        var_roi=0.0 if at_floor[1] else float(sig[1]),
        var_residual=float(sig[2]),
        converged=converged, iterations=it,
    )

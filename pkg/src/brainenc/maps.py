"""Spatial analytics over score maps.

Cross-lingual overlap categories, preferred layers, network-level score
profiles, and layer-wise cross-lingual convergence of thresholded maps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .encoding import pearson
from .io import Atlas

CATEGORIES = ("none", "only-l1", "only-l2", "only-l3",
              "pair-l1l2", "pair-l1l3", "pair-l2l3", "shared-all")
# figure-parity projection: pairwise overlaps collapse into "partial"
PAPER_CATEGORIES = {
    "none": "none", "only-l1": "only-l1", "only-l2": "only-l2", "only-l3": "only-l3",
    "pair-l1l2": "partial", "pair-l1l3": "partial", "pair-l2l3": "partial",
    "shared-all": "shared-all",
}


class MapsError(ValueError):
    pass


@dataclass
class OverlapMap:
    categories: list[str]        # per ROI, one of CATEGORIES
    paper_categories: list[str]  # pairs collapsed into "partial"

    def counts(self) -> dict[str, int]:
        out = {c: 0 for c in CATEGORIES}
        for c in self.categories:
            out[c] += 1
        return out


def overlap_categories(mask1, mask2, mask3) -> OverlapMap:
    """Classify every ROI by which of the three language masks contain it."""
    m1 = np.asarray(mask1, dtype=bool)
    m2 = np.asarray(mask2, dtype=bool)
    m3 = np.asarray(mask3, dtype=bool)
    if not (m1.shape == m2.shape == m3.shape) or m1.ndim != 1:
        raise MapsError("masks must be equal-length vectors")
    lut = {
        (False, False, False): "none",
        (True, False, False): "only-l1",
        (False, True, False): "only-l2",
        (False, False, True): "only-l3",
        (True, True, False): "pair-l1l2",
        (True, False, True): "pair-l1l3",
        (False, True, True): "pair-l2l3",
        (True, True, True): "shared-all",
    }
    cats = [lut[(bool(a), bool(b), bool(c))] for a, b, c in zip(m1, m2, m3)]
    return OverlapMap(categories=cats, paper_categories=[PAPER_CATEGORIES[c] for c in cats])


@dataclass
class PreferredLayerMap:
    best_layer: np.ndarray   # per-ROI layer label
    best_score: np.ndarray   # group-mean score at that layer


def preferred_layer(group_scores: np.ndarray, layers=None) -> PreferredLayerMap:
    """Per-ROI argmax of the (layers, rois) group-mean score matrix.

    Ties break toward the lowest layer index.
    """
    g = np.asarray(group_scores, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1:
        raise MapsError("need a (layers, rois) matrix")
    if layers is None:
        layers = list(range(1, g.shape[0] + 1))
    if len(layers) != g.shape[0]:
        raise MapsError("layer labels must match matrix rows")
    idx = np.argmax(g, axis=0)  # first maximum = lowest layer
    best = g[idx, np.arange(g.shape[1])]
    return PreferredLayerMap(best_layer=np.asarray(layers)[idx], best_score=best)


@dataclass
class NetworkProfile:
    networks: list[str]
    layers: list[int]
    means: np.ndarray       # (networks, layers)
    language: str = ""


def network_profile(group_scores: np.ndarray, atlas: Atlas, layers=None,
                    language: str = "") -> NetworkProfile:
    """Mean group-level score per (network, layer).

    `group_scores` is (layers, rois) in atlas ROI order; each cell is the
    arithmetic mean of the member ROIs' group scores.
    """
    g = np.asarray(group_scores, dtype=np.float64)
    if g.ndim != 2 or g.shape[1] != atlas.n_rois:
        raise MapsError(f"scores have {g.shape[1] if g.ndim == 2 else '?'} ROIs, "
                        f"atlas has {atlas.n_rois}")
    if layers is None:
        layers = list(range(1, g.shape[0] + 1))
    members = atlas.network_members()
    networks = sorted(members)
    means = np.empty((len(networks), g.shape[0]))
    for ni, net in enumerate(networks):
        means[ni] = g[:, members[net]].mean(axis=1)
    return NetworkProfile(networks=networks, layers=list(layers), means=means,
                          language=language)


def spearman(a, b) -> float:
    """Spearman rank correlation: Pearson on average ranks (ties averaged)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise MapsError("spearman needs two equal-length vectors of length >= 2")
    return pearson(rankdata(a), rankdata(b))


@dataclass
class ConvergenceResult:
    layers: list[int]
    pair_labels: list[str]
    pair_rho: np.ndarray     # (layers, pairs), NaN = missing
    summary: np.ndarray      # per-layer mean |rho| over available pairs


def map_convergence(masked_maps: dict[str, np.ndarray], layers=None) -> ConvergenceResult:
    """Layer-wise cross-lingual convergence of thresholded score maps.

    `masked_maps` maps language tag -> (layers, rois) array with NaN at
    non-significant ROIs. For each layer and language pair, Spearman rank
    correlation over the jointly finite ROIs; a pair is missing when fewer
    than two overlapping ROIs exist or the correlation is undefined. The
    summary is the mean of absolute correlations over available pairs.
    """
    langs = sorted(masked_maps)
    if len(langs) != 3:
        raise MapsError(f"need exactly 3 languages, got {langs}")
    mats = [np.asarray(masked_maps[l], dtype=np.float64) for l in langs]
    if len({m.shape for m in mats}) != 1 or mats[0].ndim != 2:
        raise MapsError("maps must share one (layers, rois) shape")
    n_layers = mats[0].shape[0]
    if layers is None:
        layers = list(range(1, n_layers + 1))
    pairs = [(0, 1), (0, 2), (1, 2)]
    labels = [f"{langs[i]}-{langs[j]}" for i, j in pairs]
    rho = np.full((n_layers, 3), np.nan)
    for li in range(n_layers):
        for pi, (i, j) in enumerate(pairs):
            a, b = mats[i][li], mats[j][li]
            ok = np.isfinite(a) & np.isfinite(b)
            if ok.sum() < 2:
                continue
            rho[li, pi] = spearman(a[ok], b[ok])
    summary = np.full(n_layers, np.nan)
    for li in range(n_layers):
        avail = np.isfinite(rho[li])
        if avail.any():
            summary[li] = np.abs(rho[li, avail]).mean()
    return ConvergenceResult(layers=list(layers), pair_labels=labels,
                             pair_rho=rho, summary=summary)


def masked_group_maps(tensor, q: float = 0.05) -> np.ndarray:
    """Per-layer significance-masked group-mean maps of a ScoreTensor -> (L, R)."""
    from .stats import significance_map

    out = np.full((len(tensor.layers), len(tensor.roi_ids)), np.nan)
    for li in range(len(tensor.layers)):
        sm = significance_map(tensor.scores[:, li, :], tensor.roi_ids, q)
        out[li] = sm.group_mean
    return out

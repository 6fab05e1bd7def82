"""Cross-lingual overlap and convergence on three synthetic languages.

Three datasets share a driven ROI core and carry private per-language sets;
the demo recovers the shared/private structure from significance masks and
computes layer-wise Spearman convergence of the thresholded maps.
"""

import numpy as np

from brainenc.encoding import RidgeConfig, loro_cv
from brainenc.maps import map_convergence, overlap_categories, preferred_layer
from brainenc.simulate import SimConfig, synth_designs, synth_three_languages
from brainenc.stats import significance_map

SHARED = (0, 1, 2, 3)
PRIVATE = ((8, 9), (12, 13), (16, 17))


def encode_language(ds):
    designs = synth_designs(ds)[1]
    return np.vstack([loro_cv(designs, ds.bold[s], RidgeConfig()).scores
                      for s in ds.subjects])


def main():
    cfg = SimConfig(seed=7, n_subjects=12, n_runs=5, n_trs=40, n_rois=32,
                    n_features=5, effect=0.8, noise_sd=1.0)
    datasets = synth_three_languages(cfg, SHARED, PRIVATE)

    masks, maps = [], {}
    for lang in sorted(datasets):
        scores = encode_language(datasets[lang])
        sm = significance_map(scores, np.arange(cfg.n_rois), q=0.05)
        masks.append(sm.significant)
        maps[lang] = sm.group_mean[None, :]  # single layer
        print(f"{lang}: {sm.significant.sum()} significant ROIs "
              f"(truth {len(SHARED) + 2})")

    om = overlap_categories(*masks)
    counts = om.counts()
    print("overlap counts:", {k: v for k, v in counts.items() if v})
    print(f"shared set recovered: "
          f"{[om.categories[r] for r in SHARED].count('shared-all')} of {len(SHARED)}")

    conv = map_convergence(maps)
    print(f"map convergence (mean |spearman| over pairs): {conv.summary[0]:.3f}")

    # preferred layer on a constructed 4-layer curve
    rng = np.random.default_rng(1)
    g = rng.normal(0.1, 0.01, size=(4, cfg.n_rois))
    g[2, :10] += 0.3
    pl = preferred_layer(g)
    print(f"preferred layer histogram: "
          f"{np.bincount(pl.best_layer, minlength=5)[1:].tolist()} (layers 1-4)")


if __name__ == "__main__":
    main()

"""brainenc: whole-brain encoding-model analysis.

From per-layer word embeddings and parcellated BOLD time series to brain
scores, significance maps, layer and model comparisons, cross-lingual
overlap and convergence, intrinsic dimensionality, and surprisal profiles.
"""

from .io import (
    Atlas,
    DatasetManifest,
    WordRecord,
    load_atlas,
    load_manifest,
    load_word_records,
    read_matrix,
    write_matrix,
)
from .design import DesignMatrix, HrfKernel, build_design, fit_apply_zscore, hrf_kernel
from .encoding import (
    RidgeConfig,
    ScoreTensor,
    banded_ridge_fit,
    banded_ridge_search,
    encode_dataset,
    loro_cv,
    pearson,
    ridge_fit,
)
from .stats import (
    LmmFit,
    StatMap,
    bh_fdr,
    layer_pair_fractions,
    lmm_crossed,
    model_compare,
    one_sample_t_one_sided,
    signflip_paired,
    significance_map,
)
from .maps import (
    NetworkProfile,
    OverlapMap,
    PreferredLayerMap,
    map_convergence,
    masked_group_maps,
    network_profile,
    overlap_categories,
    preferred_layer,
    spearman,
)
from .geometry import IdEstimate, l2_normalize_rows, id_per_run, two_nn_id, two_nn_ratios
from .surprisal import (
    SurprisalTable,
    TokenTable,
    aggregate_word_surprisal,
    layer_mean_surprisal,
    surprisal_convergence,
)
from .simulate import SimConfig, SynthDataset, synth_dataset, synth_three_languages

__version__ = "0.1.0"

__all__ = [
    "Atlas", "DatasetManifest", "WordRecord", "load_atlas", "load_manifest",
    "load_word_records", "read_matrix", "write_matrix",
    "DesignMatrix", "HrfKernel", "build_design", "fit_apply_zscore", "hrf_kernel",
    "RidgeConfig", "ScoreTensor", "banded_ridge_fit", "banded_ridge_search",
    "encode_dataset", "loro_cv", "pearson", "ridge_fit",
    "LmmFit", "StatMap", "bh_fdr", "layer_pair_fractions", "lmm_crossed",
    "model_compare", "one_sample_t_one_sided", "signflip_paired", "significance_map",
    "NetworkProfile", "OverlapMap", "PreferredLayerMap", "map_convergence",
    "masked_group_maps", "network_profile", "overlap_categories", "preferred_layer",
    "spearman",
    "IdEstimate", "l2_normalize_rows", "id_per_run", "two_nn_id", "two_nn_ratios",
    "SurprisalTable", "TokenTable", "aggregate_word_surprisal", "layer_mean_surprisal",
    "surprisal_convergence",
    "SimConfig", "SynthDataset", "synth_dataset", "synth_three_languages",
]

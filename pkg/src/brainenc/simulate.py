"""Synthetic datasets with known ground truth.

Every downstream statistic gets an independent oracle: driven ROIs carry an
HRF-convolved signal with a declared signal-to-noise ratio, null ROIs are
pure white noise, and everything is a pure function of the seed through
fixed Philox streams (see rng module).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io, rng
from .design import build_design
from .io import Atlas, DatasetManifest, RunSpec, WordRecord


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    n_subjects: int = 1
    n_runs: int = 9
    n_trs: int = 50              # per run
    n_rois: int = 100
    n_features: int = 10
    n_layers: int = 1
    signal_rois: tuple = ()
    effect: float = 1.0          # signal sd in units of the noise sd
    noise_sd: float = 1.0
    tr: float = 2.0
    word_rate: float = 0.5       # words per second
    signal_layer: int = 1        # layer whose features drive the BOLD signal

    def __post_init__(self):
        counts = (self.n_subjects, self.n_runs, self.n_trs, self.n_rois,
                  self.n_features, self.n_layers)
        if any(c < 1 for c in counts):
            raise SimulationError("all counts must be >= 1")
        if self.noise_sd < 0:
            raise SimulationError("noise sd must be >= 0")
        if self.tr <= 0 or self.word_rate <= 0:
            raise SimulationError("tr and word rate must be > 0")
        if any(not (0 <= r < self.n_rois) for r in self.signal_rois):
            raise SimulationError("signal ROIs must lie inside the ROI set")
        if not (1 <= self.signal_layer <= self.n_layers):
            raise SimulationError("signal layer outside declared layers")


@dataclass
class SynthDataset:
    config: SimConfig
    language: str
    words: list[WordRecord]
    features: dict[int, np.ndarray]          # layer -> (words, dims)
    bold: dict[str, list[np.ndarray]]        # subject -> per-run (n_trs, n_rois)
    true_weights: np.ndarray                 # (dims, rois), zero off the signal set
    atlas: Atlas
    run_ids: list[str] = field(default_factory=list)

    @property
    def subjects(self) -> list[str]:
        return sorted(self.bold)


def _synth_atlas(n_rois: int) -> Atlas:
    nets = [io.NETWORKS[i % len(io.NETWORKS)] for i in range(n_rois)]
    return Atlas(
        roi_ids=np.arange(n_rois),
        names=[f"ROI-{i:04d}" for i in range(n_rois)],
        networks=nets,
        hemispheres=["L" if i % 2 == 0 else "R" for i in range(n_rois)],
    )


def _synth_words(cfg: SimConfig) -> list[WordRecord]:
    duration = cfg.n_trs * cfg.tr
    per_run = max(1, int(duration * cfg.word_rate))
    slot = duration / per_run
    records = []
    idx = 0
    for ri in range(cfg.n_runs):
        gen = rng.stream(cfg.seed, rng.ONSETS, ri)
        jitter = gen.uniform(0.05, 0.95, per_run)
        for wi in range(per_run):
            records.append(WordRecord(word=f"w{idx:05d}",
                                      onset_sec=float((wi + jitter[wi]) * slot),
                                      run_id=f"run-{ri + 1}", word_index=idx))
            idx += 1
    return records


def synth_dataset(cfg: SimConfig, language: str = "sim") -> SynthDataset:
    """Generate features, word onsets and per-subject BOLD for one language.

    BOLD at driven ROIs is the HRF design of the signal layer times the true
    weights, normalized to sd = effect * noise_sd (effect alone when the
    noise sd is 0), plus Gaussian noise; null ROIs are unit white noise
    (noise-sd-scaled when positive) so correlations stay defined.
    """
    words = _synth_words(cfg)
    run_ids = [f"run-{i + 1}" for i in range(cfg.n_runs)]
    n_words = len(words)

    features = {}
    for layer in range(1, cfg.n_layers + 1):
        gen = rng.stream(cfg.seed, rng.FEATURES, layer)
        features[layer] = gen.standard_normal((n_words, cfg.n_features))

    wgen = rng.stream(cfg.seed, rng.WEIGHTS, cfg.signal_layer)
    W = np.zeros((cfg.n_features, cfg.n_rois))
    signal = sorted(cfg.signal_rois)
    if signal:
        W[:, signal] = wgen.standard_normal((cfg.n_features, len(signal)))

    designs = synth_designs_for_layer(cfg, words, features[cfg.signal_layer])
    raw = [d @ W for d in designs]
    concat = np.vstack(raw)
    amplitude = cfg.effect * (cfg.noise_sd if cfg.noise_sd > 0 else 1.0)
    scale = np.ones(cfg.n_rois)
    if signal:
        sd = concat[:, signal].std(axis=0)
        if np.any(sd == 0):
            raise SimulationError("degenerate signal time series; increase run length")
        scale[signal] = amplitude / sd
    null_sd = cfg.noise_sd if cfg.noise_sd > 0 else 1.0

    bold = {}
    for si in range(cfg.n_subjects):
        subject = f"sub-{si + 1:02d}"
        runs = []
        for ri in range(cfg.n_runs):
            gen = rng.stream(cfg.seed, rng.NOISE, si, ri)
            noise = gen.standard_normal((cfg.n_trs, cfg.n_rois))
            y = raw[ri] * scale
            y[:, _null_mask(cfg)] = 0.0
            y += noise * _noise_scale(cfg, null_sd)
            runs.append(y)
        bold[subject] = runs

    return SynthDataset(config=cfg, language=language, words=words, features=features,
                        bold=bold, true_weights=W, atlas=_synth_atlas(cfg.n_rois),
                        run_ids=run_ids)


def _null_mask(cfg: SimConfig) -> np.ndarray:
    mask = np.ones(cfg.n_rois, dtype=bool)
    mask[list(cfg.signal_rois)] = False
    return mask


def _noise_scale(cfg: SimConfig, null_sd: float) -> np.ndarray:
    scale = np.full(cfg.n_rois, cfg.noise_sd)
    scale[_null_mask(cfg)] = null_sd
    return scale


def synth_designs_for_layer(cfg: SimConfig, words, layer_features: np.ndarray):
    """HRF design matrices per run for one layer's feature matrix."""
    designs = []
    for ri in range(cfg.n_runs):
        run_id = f"run-{ri + 1}"
        wr = [w for w in words if w.run_id == run_id]
        rows = np.asarray([w.word_index for w in wr], dtype=int)
        designs.append(build_design(layer_features[rows], wr, cfg.tr, cfg.n_trs,
                                    run_id=run_id).values)
    return designs


def synth_designs(ds: SynthDataset) -> dict[int, list[np.ndarray]]:
    """Designs per layer for an in-memory synthetic dataset."""
    return {layer: synth_designs_for_layer(ds.config, ds.words, feats)
            for layer, feats in ds.features.items()}


def derive_seed(seed: int, index: int) -> int:
    """SplitMix64-derived child seed, for independent sibling datasets."""
    with np.errstate(over="ignore"):
        z = rng._mix(np.uint64(seed) + np.uint64(index + 1) * rng._GOLDEN)
    return int(z)


def synth_three_languages(cfg: SimConfig, shared_rois, private_rois) -> dict[str, SynthDataset]:
    """Three datasets whose driven ROI sets are shared + per-language private.

    `private_rois` is a sequence of three disjoint ROI collections, each also
    disjoint from `shared_rois`.
    """
    shared = set(int(r) for r in shared_rois)
    privates = [set(int(r) for r in p) for p in private_rois]
    if len(privates) != 3:
        raise SimulationError("need exactly 3 private ROI sets")
    for i, p in enumerate(privates):
        if p & shared:
            raise SimulationError(f"private set {i} overlaps the shared set")
        for j in range(i + 1, 3):
            if p & privates[j]:
                raise SimulationError(f"private sets {i} and {j} overlap")
    out = {}
    for li, lang in enumerate(("l1", "l2", "l3")):
        lang_cfg = replace(cfg, seed=derive_seed(cfg.seed, li),
                           signal_rois=tuple(sorted(shared | privates[li])))
        out[lang] = synth_dataset(lang_cfg, language=lang)
    return out


def write_dataset(ds: SynthDataset, outdir) -> Path:
    """Write a synthetic dataset in the exact on-disk layout the pipeline ingests."""
    outdir = Path(outdir)
    (outdir / "features").mkdir(parents=True, exist_ok=True)
    (outdir / "bold").mkdir(parents=True, exist_ok=True)

    io.write_atlas(ds.atlas, outdir / "atlas.csv")
    io.write_word_records(ds.words, outdir / "words.jsonl")
    feature_paths = {}
    for layer, feats in sorted(ds.features.items()):
        rel = f"features/layer{layer:02d}.enc"
        io.write_matrix(feats, outdir / rel)
        feature_paths[layer] = rel
    for subject, runs in sorted(ds.bold.items()):
        for ri, y in enumerate(runs):
            io.write_matrix(y, outdir / "bold" / f"{subject}_run-{ri + 1}.enc")

    cfg = ds.config
    manifest = DatasetManifest(
        language=ds.language,
        subjects=ds.subjects,
        runs=[RunSpec(run_id=f"run-{i + 1}", tr_seconds=cfg.tr, n_tr=cfg.n_trs,
                      bold_path=f"bold/{{subject}}_run-{i + 1}.enc")
              for i in range(cfg.n_runs)],
        atlas_path="atlas.csv",
        feature_paths=feature_paths,
        word_records_path="words.jsonl",
        root=outdir,
    )
    io.write_manifest(manifest, outdir / "manifest.json")
    return outdir / "manifest.json"

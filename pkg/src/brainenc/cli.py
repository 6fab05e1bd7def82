"""Command-line entry point.

Every pipeline stage is a subcommand taking a JSON config (``--config``) plus
a few overriding flags. Artifacts are deterministic: re-running a subcommand
with an identical config reproduces every CSV byte for byte, at any worker
count. Each run writes a provenance record with the config hash and library
versions next to its artifacts.

Exit codes: 0 ok, 1 user error (config/io/numeric), 2 internal error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .design import DesignError, build_design
from .encoding import EncodingError, RidgeConfig, ScoreTensor, encode_dataset
from .geometry import GeometryError, id_per_run, l2_normalize_rows, two_nn_id
from .io import ContainerError, ManifestError, write_csv
from .maps import (MapsError, map_convergence, masked_group_maps, network_profile,
                   overlap_categories, preferred_layer)
from .simulate import SimConfig, SimulationError, synth_dataset, synth_three_languages, write_dataset
from .stats import (StatsError, layer_pair_fractions, lmm_crossed, model_compare,
                    significance_map)
from .surprisal import (SurprisalError, TokenTable, aggregate_word_surprisal,
                        layer_mean_surprisal, surprisal_convergence)

THREADS_ENV = "BRAINENC_THREADS"

_USER_ERRORS = {
    "config": (ManifestError, SimulationError, KeyError, json.JSONDecodeError, TypeError),
    "io": (ContainerError, FileNotFoundError, OSError),
    "numeric": (EncodingError, StatsError, GeometryError, MapsError, SurprisalError,
                DesignError, ValueError),
}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _classify(exc: Exception) -> str:
    for kind, types in _USER_ERRORS.items():
        if isinstance(exc, types):
            return kind
    return "internal"


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise CliError("config", f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise CliError("config", f"invalid config JSON: {e}") from None


def _canonical(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def _write_provenance(outdir: Path, subcommand: str, config: dict, seed: int,
                      threads: int) -> None:
    canon = _canonical(config)
    record = {
        "subcommand": subcommand,
        "config": config,
        "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        "seed": seed,
        "threads": threads,
        "versions": {
            "brainenc": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
    }
    with open(outdir / f"{subcommand.replace('-', '_')}_provenance.json", "w",
              encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")


class _OutputLock:
    """One process per output directory, via an O_EXCL lock file."""

    def __init__(self, outdir: Path):
        self.path = outdir / ".brainenc.lock"
        self.fd = None

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(self.fd, str(os.getpid()).encode())
        except FileExistsError:
            raise CliError("config",
                           f"output directory is locked by another run: {self.path}") from None
        return self

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)
        return False


def _statmap_csv(sm, path, descriptor_path=None) -> None:
    header = ["roi_id", "stat", "p", "q", "significant"]
    if sm.group_mean is not None:
        header.append("group_mean")
    write_csv(path, header, sm.rows())
    if descriptor_path is not None:
        with open(descriptor_path, "w", encoding="utf-8") as f:
            json.dump(sm.descriptor, f, indent=2, sort_keys=True)
            f.write("\n")


def _load_tensor(spec) -> ScoreTensor:
    tensor = ScoreTensor.load(spec)
    tensor.validate()
    return tensor


# ---------------------------------------------------------------- subcommands

def cmd_simulate(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    sim_raw = dict(cfg.get("sim", {}))
    sim_raw.setdefault("seed", seed)
    sim_raw["signal_rois"] = tuple(sim_raw.get("signal_rois", ()))
    sim = SimConfig(**sim_raw)
    if "languages" in cfg:
        spec = cfg["languages"]
        datasets = synth_three_languages(sim, spec.get("shared_rois", ()),
                                         spec.get("private_rois", ((), (), ())))
        for lang, ds in datasets.items():
            write_dataset(ds, out / lang)
    else:
        write_dataset(synth_dataset(sim, language=cfg.get("language", "sim")), out)


def cmd_design(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    manifest = io.load_manifest(cfg["manifest"])
    words = manifest.load_words()
    rows = []
    for layer in manifest.layers:
        feats = manifest.load_features(layer)
        for run in manifest.runs:
            wr = [w for w in words if w.run_id == run.run_id]
            idx = np.asarray([w.word_index for w in wr], dtype=int)
            dm = build_design(feats[idx], wr, run.tr_seconds, run.n_tr,
                              run_id=run.run_id, layer=layer)
            name = f"design_layer{layer:02d}_{run.run_id}.enc"
            io.write_matrix(dm.values, out / name)
            rows.append([layer, run.run_id, dm.values.shape[0], dm.values.shape[1], name])
    write_csv(out / "designs.csv", ["layer", "run_id", "n_tr", "n_features", "file"], rows)


def cmd_encode(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    manifest = io.load_manifest(cfg["manifest"])
    ridge = RidgeConfig(alpha_grid=tuple(cfg.get("alpha_grid", RidgeConfig().alpha_grid)))
    tensor = encode_dataset(manifest, ridge, threads=threads)
    tensor.save(out / "scores")
    rows = []
    for si, subject in enumerate(tensor.subjects):
        for li, layer in enumerate(tensor.layers):
            for fi, run in enumerate(tensor.fold_run_ids):
                n_ok = int(np.isfinite(tensor.fold_scores[si, li, :, fi]).sum())
                rows.append([subject, layer, run, n_ok])
    write_csv(out / "folds.csv", ["subject", "layer", "test_run", "n_scored_rois"], rows)


def cmd_group_map(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tensor = _load_tensor(cfg["scores"])
    layer = int(cfg.get("layer", tensor.layers[0]))
    q = float(cfg.get("q", 0.05))
    li = tensor.layers.index(layer)
    sm = significance_map(tensor.scores[:, li, :], tensor.roi_ids, q,
                          descriptor={"layer": layer})
    _statmap_csv(sm, out / "group_map.csv", out / "group_map.json")


def cmd_layer_compare(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tensor = _load_tensor(cfg["scores"])
    q = float(cfg.get("q", 0.05))
    n_perm = int(cfg.get("n_perm", 10_000))
    frac = layer_pair_fractions(tensor.scores, q=q, n_perm=n_perm, seed=seed,
                                threads=threads)
    rows = [[tensor.layers[i], tensor.layers[j], float(frac[i, j])]
            for i in range(len(tensor.layers)) for j in range(len(tensor.layers))]
    write_csv(out / "layer_fractions.csv", ["layer_i", "layer_j", "fraction"], rows)
    if plots:
        from .plots import save_heatmap
        save_heatmap(frac, tensor.layers, tensor.layers, out / "layer_fractions.png",
                     title="fraction of ROIs with significant layer differences",
                     xlabel="layer", ylabel="layer")


def cmd_model_compare(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    ta = _load_tensor(cfg["scores_a"])
    tb = _load_tensor(cfg["scores_b"])
    if ta.subjects != tb.subjects or ta.roi_ids != tb.roi_ids:
        raise StatsError("score tensors must share subjects and ROIs")
    layer_a = int(cfg.get("layer_a", ta.layers[-1]))
    layer_b = int(cfg.get("layer_b", tb.layers[0]))
    sidedness = cfg.get("sidedness", "two-sided")
    q = float(cfg.get("q", 0.05))
    n_perm = int(cfg.get("n_perm", 10_000))
    A = ta.scores[:, ta.layers.index(layer_a), :]
    B = tb.scores[:, tb.layers.index(layer_b), :]
    sm = model_compare(A, B, ta.roi_ids, sidedness=sidedness, q=q, n_perm=n_perm, seed=seed)
    sm.descriptor.update({"layer_a": layer_a, "layer_b": layer_b})
    _statmap_csv(sm, out / "model_compare.csv", out / "model_compare.json")

    subjects, rois, models, values = [], [], [], []
    for si, subject in enumerate(ta.subjects):
        for ri, roi in enumerate(ta.roi_ids):
            subjects += [subject, subject]
            rois += [roi, roi]
            models += ["a", "b"]
            values += [float(A[si, ri]), float(B[si, ri])]
    fit = lmm_crossed(subjects, rois, models, values)
    # model contrast is b - a with levels sorted; report a - b for consistency
    write_csv(out / "model_compare_lmm.csv",
              ["estimate_a_minus_b", "se", "p", "var_subject", "var_roi",
               "var_residual", "converged", "iterations"],
              [[-fit.estimate, fit.se, fit.p, fit.var_subject, fit.var_roi,
                fit.var_residual, int(fit.converged), fit.iterations]])


def cmd_overlap(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tensors = {lang: _load_tensor(path) for lang, path in sorted(cfg["scores"].items())}
    if len(tensors) != 3:
        raise MapsError("overlap needs exactly 3 languages")
    q = float(cfg.get("q", 0.05))
    layer = cfg.get("layer")
    langs = sorted(tensors)
    masks = []
    for lang in langs:
        t = tensors[lang]
        li = t.layers.index(int(layer)) if layer is not None else 0
        sm = significance_map(t.scores[:, li, :], t.roi_ids, q)
        masks.append(sm.significant)
    om = overlap_categories(*masks)
    roi_ids = tensors[langs[0]].roi_ids
    write_csv(out / "overlap.csv", ["roi_id", "category", "paper_category"],
              [[roi_ids[i], om.categories[i], om.paper_categories[i]]
               for i in range(len(roi_ids))])
    write_csv(out / "overlap_counts.csv", ["category", "count"],
              sorted(om.counts().items()))


def cmd_preferred_layer(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tensor = _load_tensor(cfg["scores"])
    q = float(cfg.get("q", 0.05))
    group = tensor.group_mean()
    pl_all = preferred_layer(group, tensor.layers)
    write_csv(out / "preferred_layer_all.csv", ["roi_id", "best_layer", "best_score"],
              [[tensor.roi_ids[i], int(pl_all.best_layer[i]), float(pl_all.best_score[i])]
               for i in range(len(tensor.roi_ids))])
    masked = masked_group_maps(tensor, q)
    rows = []
    for i in range(len(tensor.roi_ids)):
        col = masked[:, i]
        if np.all(np.isnan(col)):
            rows.append([tensor.roi_ids[i], "", float("nan")])
        else:
            li = int(np.nanargmax(col))
            rows.append([tensor.roi_ids[i], tensor.layers[li], float(col[li])])
    write_csv(out / "preferred_layer_significant.csv",
              ["roi_id", "best_layer", "best_score"], rows)


def cmd_networks(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tensor = _load_tensor(cfg["scores"])
    atlas = io.load_atlas(cfg["atlas"])
    profile = network_profile(tensor.group_mean(), atlas, tensor.layers,
                              language=cfg.get("language", ""))
    rows = [[net, profile.layers[li], float(profile.means[ni, li])]
            for ni, net in enumerate(profile.networks)
            for li in range(len(profile.layers))]
    write_csv(out / "networks.csv", ["network", "layer", "mean_score"], rows)
    if plots:
        from .plots import save_heatmap
        save_heatmap(profile.means, profile.networks, profile.layers,
                     out / "networks.png", title="network x layer mean brain score",
                     xlabel="layer", ylabel="network")


def cmd_convergence(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tensors = {lang: _load_tensor(path) for lang, path in sorted(cfg["scores"].items())}
    q = float(cfg.get("q", 0.05))
    maps = {lang: masked_group_maps(t, q) for lang, t in tensors.items()}
    layers = tensors[sorted(tensors)[0]].layers
    res = map_convergence(maps, layers)
    rows = [[res.layers[li]] + [float(r) for r in res.pair_rho[li]] + [float(res.summary[li])]
            for li in range(len(res.layers))]
    write_csv(out / "map_convergence.csv",
              ["layer"] + res.pair_labels + ["mean_abs"], rows)
    if plots:
        from .plots import save_curves
        save_curves(res.layers, {"mean |spearman|": res.summary},
                    out / "map_convergence.png", title="cross-lingual map convergence",
                    xlabel="layer", ylabel="mean |rho|")


def cmd_id(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    max_n = int(cfg.get("max_n", 8000))
    language = cfg.get("language", "")
    rows = []
    if "manifest" in cfg:
        manifest = io.load_manifest(cfg["manifest"])
        words = manifest.load_words()
        run_ids = np.asarray([w.run_id for w in words], dtype=object)
        per_run = bool(cfg.get("per_run", False))
        for layer in manifest.layers:
            pts, dropped = l2_normalize_rows(manifest.load_features(layer))
            kept_runs = run_ids if dropped == 0 else run_ids[
                np.linalg.norm(manifest.load_features(layer), axis=1) > 0]
            if per_run:
                for run, est in id_per_run(pts, kept_runs, max_n=max_n, seed=seed).items():
                    rows.append([language or manifest.language, layer, run, est.n_used,
                                 est.duplicates_removed, est.id, int(est.flagged)])
            else:
                est = two_nn_id(pts, max_n=max_n, seed=seed)
                rows.append([language or manifest.language, layer, "all", est.n_used,
                             est.duplicates_removed, est.id, int(est.flagged)])
    else:
        for layer, path in enumerate(cfg["features"], start=1):
            pts, _ = l2_normalize_rows(io.read_matrix(path))
            est = two_nn_id(pts, max_n=max_n, seed=seed)
            rows.append([language, layer, "all", est.n_used, est.duplicates_removed,
                         est.id, int(est.flagged)])
    write_csv(out / "id.csv",
              ["language", "layer", "run", "n_used", "duplicates_removed", "id", "flagged"],
              rows)


def cmd_surprisal(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tables = {}
    for lang, spec in sorted(cfg["tables"].items()):
        tokens = TokenTable.load(spec["matrix"], spec["sidecar"])
        tables[lang] = aggregate_word_surprisal(tokens, spec.get("n_words"))
    for lang, table in tables.items():
        n_layers = table.values.shape[1]
        write_csv(out / f"surprisal_words_{lang}.csv",
                  ["word_index", "run_id"] + [f"layer_{k}" for k in range(1, n_layers + 1)],
                  [[i, str(table.run_ids[i])] + [float(v) for v in table.values[i]]
                   for i in range(table.values.shape[0])])
        means = layer_mean_surprisal(table)
        write_csv(out / f"surprisal_layers_{lang}.csv", ["layer", "mean_surprisal"],
                  [[k + 1, float(means[k])] for k in range(n_layers)])
    if len(tables) == 3:
        res = surprisal_convergence(tables)
        rows = [[res.layers[li]] + [float(r) for r in res.pair_r[li]]
                + [float(res.mean_abs[li]), float(res.abs_mean[li])]
                for li in range(len(res.layers))]
        write_csv(out / "surprisal_convergence.csv",
                  ["layer"] + res.pair_labels + ["mean_abs", "abs_mean"], rows)


def cmd_report(cfg: dict, out: Path, seed: int, threads: int, plots: bool):
    tensors = {lang: _load_tensor(path) for lang, path in sorted(cfg["scores"].items())}
    q = float(cfg.get("q", 0.05))
    atlas = io.load_atlas(cfg["atlas"]) if "atlas" in cfg else None

    sig_rows = []
    for lang, t in sorted(tensors.items()):
        for li, layer in enumerate(t.layers):
            sm = significance_map(t.scores[:, li, :], t.roi_ids, q)
            n_sig = int(sm.significant.sum())
            mean_sig = float(np.nanmean(sm.group_mean)) if n_sig else float("nan")
            sig_rows.append([lang, layer, n_sig, mean_sig])
    write_csv(out / "report_significant.csv",
              ["language", "layer", "n_significant", "mean_significant_score"], sig_rows)

    pl_rows = []
    for lang, t in sorted(tensors.items()):
        pl = preferred_layer(t.group_mean(), t.layers)
        for i in range(len(t.roi_ids)):
            pl_rows.append([lang, t.roi_ids[i], int(pl.best_layer[i]),
                            float(pl.best_score[i])])
    write_csv(out / "report_preferred_layer.csv",
              ["language", "roi_id", "best_layer", "best_score"], pl_rows)

    if len(tensors) == 3:
        langs = sorted(tensors)
        first = tensors[langs[0]]
        overlap_rows = []
        for li, layer in enumerate(first.layers):
            masks = []
            for lang in langs:
                t = tensors[lang]
                sm = significance_map(t.scores[:, li, :], t.roi_ids, q)
                masks.append(sm.significant)
            om = overlap_categories(*masks)
            for cat, count in sorted(om.counts().items()):
                overlap_rows.append([layer, cat, count])
        write_csv(out / "report_overlap.csv", ["layer", "category", "count"], overlap_rows)

        maps = {lang: masked_group_maps(t, q) for lang, t in tensors.items()}
        conv = map_convergence(maps, first.layers)
        write_csv(out / "report_convergence.csv",
                  ["layer"] + conv.pair_labels + ["mean_abs"],
                  [[conv.layers[li]] + [float(r) for r in conv.pair_rho[li]]
                   + [float(conv.summary[li])] for li in range(len(conv.layers))])
        if plots:
            from .plots import save_curves
            save_curves(conv.layers, {"mean |spearman|": conv.summary},
                        out / "report_convergence.png",
                        title="cross-lingual map convergence", xlabel="layer",
                        ylabel="mean |rho|")

    if atlas is not None:
        net_rows = []
        for lang, t in sorted(tensors.items()):
            profile = network_profile(t.group_mean(), atlas, t.layers, language=lang)
            for ni, net in enumerate(profile.networks):
                for li in range(len(profile.layers)):
                    net_rows.append([lang, net, profile.layers[li],
                                     float(profile.means[ni, li])])
        write_csv(out / "report_networks.csv",
                  ["language", "network", "layer", "mean_score"], net_rows)
        if plots:
            from .plots import save_heatmap
            for lang, t in sorted(tensors.items()):
                profile = network_profile(t.group_mean(), atlas, t.layers, language=lang)
                save_heatmap(profile.means, profile.networks, profile.layers,
                             out / f"report_networks_{lang}.png",
                             title=f"network profile ({lang})", xlabel="layer",
                             ylabel="network")


_COMMANDS = {
    "simulate": cmd_simulate,
    "design": cmd_design,
    "encode": cmd_encode,
    "group-map": cmd_group_map,
    "layer-compare": cmd_layer_compare,
    "model-compare": cmd_model_compare,
    "overlap": cmd_overlap,
    "preferred-layer": cmd_preferred_layer,
    "networks": cmd_networks,
    "convergence": cmd_convergence,
    "id": cmd_id,
    "surprisal": cmd_surprisal,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brainenc",
                                     description="brain-LLM alignment analysis pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get(THREADS_ENV, "1")))
        p.add_argument("--plots", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.threads < 1:
            raise CliError("config", "--threads must be >= 1")
        with _OutputLock(out):
            _COMMANDS[args.subcommand](config, out, args.seed, args.threads, args.plots)
            _write_provenance(out, args.subcommand, config, args.seed, args.threads)
    except CliError as e:
        print(f"brainenc: error[{e.kind}]: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - classified below
        kind = _classify(e)
        print(f"brainenc: error[{kind}]: {e}", file=sys.stderr)
        return 1 if kind != "internal" else 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Word- and layer-level aggregation of masked-LM surprisal.

The pipeline never runs a language model here: it consumes per-token,
per-layer negative log-probabilities (nats) produced by the extractor, sums
subword pieces into word values, and derives layer means and cross-lingual
convergence profiles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import io
from .encoding import pearson


class SurprisalError(ValueError):
    pass


@dataclass
class TokenTable:
    """Per-token, per-layer surprisal with subword-to-word alignment."""

    surprisal: np.ndarray        # (tokens, layers), >= 0
    sentence_ids: np.ndarray
    run_ids: np.ndarray          # str per token
    positions: np.ndarray
    word_indices: np.ndarray     # token -> word, many-to-one

    def validate(self) -> None:
        n = self.surprisal.shape[0]
        for name in ("sentence_ids", "run_ids", "positions", "word_indices"):
            if len(getattr(self, name)) != n:
                raise SurprisalError(f"{name} length does not match {n} tokens")
        if np.any(self.surprisal < 0):
            raise SurprisalError("surprisal values must be >= 0")

    def save(self, matrix_path, sidecar_path) -> None:
        io.write_matrix(self.surprisal, matrix_path)
        with open(sidecar_path, "w", encoding="utf-8") as f:
            for i in range(self.surprisal.shape[0]):
                f.write(json.dumps({
                    "sentence_id": int(self.sentence_ids[i]),
                    "run_id": str(self.run_ids[i]),
                    "position": int(self.positions[i]),
                    "word_index": int(self.word_indices[i]),
                }) + "\n")

    @classmethod
    def load(cls, matrix_path, sidecar_path) -> "TokenTable":
        surp = io.read_matrix(matrix_path)
        sent, runs, pos, words = [], [], [], []
        with open(sidecar_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                sent.append(int(obj["sentence_id"]))
                runs.append(str(obj["run_id"]))
                pos.append(int(obj["position"]))
                words.append(int(obj["word_index"]))
        table = cls(surprisal=surp, sentence_ids=np.asarray(sent),
                    run_ids=np.asarray(runs, dtype=object),
                    positions=np.asarray(pos), word_indices=np.asarray(words))
        table.validate()
        return table


@dataclass
class SurprisalTable:
    values: np.ndarray       # (words, layers)
    run_ids: np.ndarray      # run id per word


def aggregate_word_surprisal(tokens: TokenTable, n_words: int | None = None) -> SurprisalTable:
    """Sum token surprisal into word surprisal per layer.

    Every word in [0, n_words) must have at least one aligned token; tokens of
    one word must agree on their run id.
    """
    tokens.validate()
    if n_words is None:
        n_words = int(tokens.word_indices.max()) + 1 if tokens.word_indices.size else 0
    if n_words < 1:
        raise SurprisalError("no words to aggregate")
    values = np.zeros((n_words, tokens.surprisal.shape[1]))
    counts = np.zeros(n_words, dtype=int)
    run_ids = np.empty(n_words, dtype=object)
    for t in range(tokens.surprisal.shape[0]):
        w = int(tokens.word_indices[t])
        if not (0 <= w < n_words):
            raise SurprisalError(f"token {t} maps to word {w} outside [0, {n_words})")
        if counts[w] and run_ids[w] != tokens.run_ids[t]:
            raise SurprisalError(f"word {w} has tokens from multiple runs")
        values[w] += tokens.surprisal[t]
        counts[w] += 1
        run_ids[w] = tokens.run_ids[t]
    missing = np.nonzero(counts == 0)[0]
    if missing.size:
        raise SurprisalError(f"words with zero aligned tokens: {missing[:10].tolist()}"
                             + ("..." if missing.size > 10 else ""))
    return SurprisalTable(values=values, run_ids=run_ids)


def layer_mean_surprisal(table: SurprisalTable) -> np.ndarray:
    """Arithmetic mean over words, one value per layer."""
    if table.values.shape[0] < 1:
        raise SurprisalError("empty surprisal table")
    return table.values.mean(axis=0)


@dataclass
class SurprisalConvergence:
    layers: list[int]
    pair_labels: list[str]
    pair_r: np.ndarray          # (layers, pairs), NaN = missing
    mean_abs: np.ndarray        # per layer: mean of |r| over available pairs
    abs_mean: np.ndarray        # per layer: |mean of r| over available pairs
    shared_runs: list[str]


def surprisal_convergence(tables: dict[str, SurprisalTable]) -> SurprisalConvergence:
    """Cross-lingual convergence of run-level surprisal profiles.

    Restricted to runs present in all languages. Word surprisal is averaged
    within each run to give a (runs, layers) profile per language; Pearson
    correlations across runs are computed per layer for each language pair.
    Two summaries are emitted: the mean of absolute pairwise correlations and
    the absolute value of the mean pairwise correlation (these differ, and the
    convergence figures use the latter for surprisal).
    """
    langs = sorted(tables)
    if len(langs) != 3:
        raise SurprisalError(f"need exactly 3 languages, got {langs}")
    shared = set(tables[langs[0]].run_ids.tolist())
    for lang in langs[1:]:
        shared &= set(tables[lang].run_ids.tolist())
    shared = sorted(shared)
    if len(shared) < 2:
        raise SurprisalError(f"need >= 2 shared runs, got {shared}")

    n_layers = tables[langs[0]].values.shape[1]
    profiles = {}
    for lang in langs:
        t = tables[lang]
        if t.values.shape[1] != n_layers:
            raise SurprisalError("layer counts differ across languages")
        prof = np.empty((len(shared), n_layers))
        for ri, run in enumerate(shared):
            rows = t.run_ids == run
            prof[ri] = t.values[rows].mean(axis=0)
        profiles[lang] = prof

    pairs = [(0, 1), (0, 2), (1, 2)]
    labels = [f"{langs[i]}-{langs[j]}" for i, j in pairs]
    pair_r = np.full((n_layers, 3), np.nan)
    for li in range(n_layers):
        for pi, (i, j) in enumerate(pairs):
            pair_r[li, pi] = pearson(profiles[langs[i]][:, li], profiles[langs[j]][:, li])
    mean_abs = np.full(n_layers, np.nan)
    abs_mean = np.full(n_layers, np.nan)
    for li in range(n_layers):
        avail = np.isfinite(pair_r[li])
        if avail.any():
            mean_abs[li] = np.abs(pair_r[li, avail]).mean()
            abs_mean[li] = abs(pair_r[li, avail].mean())
    return SurprisalConvergence(layers=list(range(1, n_layers + 1)), pair_labels=labels,
                                pair_r=pair_r, mean_abs=mean_abs, abs_mean=abs_mean,
                                shared_runs=[str(r) for r in shared])

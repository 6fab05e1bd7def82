"""Word- and layer-level surprisal aggregation plus cross-lingual convergence.

Token tables (token x layer negative log-probabilities with a token-to-word
alignment) are summed into word surprisal, averaged into layer profiles, and
correlated across languages at the run level.
"""

import numpy as np

from brainenc.surprisal import (TokenTable, aggregate_word_surprisal,
                                layer_mean_surprisal, surprisal_convergence)

N_LAYERS = 12
RUNS = [f"run-{i}" for i in range(1, 10)]


def synth_token_table(rng, run_difficulty):
    """Tokens for 9 runs; per-layer surprisal decays with depth."""
    rows, words, run_ids = [], [], []
    word_index = 0
    depth_profile = np.linspace(1.0, 0.55, N_LAYERS)  # decreasing with depth
    for run in RUNS:
        for _ in range(12):  # words per run
            n_pieces = rng.integers(1, 3)
            for _ in range(n_pieces):
                base = run_difficulty[run] * depth_profile
                rows.append(base + rng.uniform(0, 0.3, N_LAYERS))
                words.append(word_index)
                run_ids.append(run)
            word_index += 1
    n = len(rows)
    return TokenTable(surprisal=np.asarray(rows), sentence_ids=np.zeros(n, dtype=int),
                      run_ids=np.asarray(run_ids, dtype=object),
                      positions=np.arange(n), word_indices=np.asarray(words))


def main():
    rng = np.random.default_rng(0)
    difficulty = {run: float(rng.uniform(2.0, 6.0)) for run in RUNS}

    tables = {}
    for lang in ("cn", "en", "fr"):
        tokens = synth_token_table(rng, difficulty)  # shared run difficulty
        tables[lang] = aggregate_word_surprisal(tokens)
        means = layer_mean_surprisal(tables[lang])
        print(f"{lang}: {tables[lang].values.shape[0]} words; layer means "
              f"{means[0]:.2f} -> {means[-1]:.2f} (depth {N_LAYERS})")

    conv = surprisal_convergence(tables)
    print(f"shared runs: {len(conv.shared_runs)}")
    print("layer  " + "  ".join(conv.pair_labels) + "  mean|r|  |mean r|")
    for li in (0, N_LAYERS // 2, N_LAYERS - 1):
        pairs = "  ".join(f"{r:6.3f}" for r in conv.pair_r[li])
        print(f"{conv.layers[li]:5d}  {pairs}  {conv.mean_abs[li]:7.3f}  "
              f"{conv.abs_mean[li]:8.3f}")


if __name__ == "__main__":
    main()

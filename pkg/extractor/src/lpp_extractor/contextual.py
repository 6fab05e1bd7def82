"""Per-layer contextual word embeddings from a masked LM.

Each utterance is one context window; hidden states come from every
transformer block (the input embedding layer is excluded), and word vectors
are the mean of their subword token states. Outputs are one ENC1 matrix per
layer (words x hidden size) plus the word-record sidecar the pipeline
manifests point at.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import enc1
from .corpus import write_word_records
from .modeling import chunk_words, default_max_tokens, load_mlm, write_lock

log = logging.getLogger("lpp_extractor")


@dataclass
class ExtractionSummary:
    n_words: int
    n_layers: int
    hidden_size: int
    layer_files: dict[int, str]
    dropped: list[dict] = field(default_factory=list)
    chunks_split: int = 0


def _pool_words(hidden, word_ids, n_words):
    """Mean-pool token states per word -> (n_words, hidden); None marks specials."""
    pooled = np.zeros((n_words, hidden[0].shape[-1]), dtype=np.float64)
    counts = np.zeros(n_words, dtype=int)
    for pos, wid in enumerate(word_ids):
        if wid is None:
            continue
        pooled[wid] += hidden[pos]
        counts[wid] += 1
    return pooled, counts


def extract_contextual(utterances, model_dir, out_dir, layers=None,
                       device: str = "cpu", max_tokens: int | None = None) -> ExtractionSummary:
    """Write per-layer embedding matrices and word records for one corpus.

    Words that the tokenizer maps to zero pieces are dropped with a log entry
    and reported in the summary; remaining words are re-indexed densely so
    feature rows and word records stay aligned.
    """
    tokenizer, model = load_mlm(model_dir, device)
    n_layers = model.config.num_hidden_layers
    if layers is None:
        layers = list(range(1, n_layers + 1))
    if any(not (1 <= l <= n_layers) for l in layers):
        raise ValueError(f"layers must lie in 1..{n_layers}")
    max_tokens = default_max_tokens(tokenizer, model, max_tokens)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = {layer: [] for layer in layers}
    records = []
    dropped = []
    n_chunks_split = 0
    for utt in utterances:
        texts = [w.text for w in utt.words]
        chunks = chunk_words(tokenizer, texts, max_tokens, context=f"utterance {utt.utterance_id}")
        n_chunks_split += len(chunks) - 1
        for start, stop in chunks:
            chunk_texts = texts[start:stop]
            enc = tokenizer(chunk_texts, is_split_into_words=True, return_tensors="pt")
            with torch.no_grad():
                out = model(**{k: v.to(device) for k, v in enc.items()},
                            output_hidden_states=True)
            word_ids = enc.word_ids(0)
            states = [h[0].cpu().numpy() for h in out.hidden_states]  # (seq, hidden)
            counts = None
            per_layer = {}
            for layer in layers:
                pooled, counts = _pool_words(states[layer], word_ids, len(chunk_texts))
                per_layer[layer] = pooled
            for wi, text in enumerate(chunk_texts):
                word = utt.words[start + wi]
                if counts[wi] == 0:
                    log.warning("dropping word %r (utterance %d): no tokens",
                                text, utt.utterance_id)
                    dropped.append({"utterance_id": utt.utterance_id, "word": text})
                    continue
                for layer in layers:
                    rows[layer].append(per_layer[layer][wi] / counts[wi])
                records.append((word.text, word.onset_sec, utt.run_id))

    if not records:
        raise ValueError("no words survived extraction")
    layer_files = {}
    for layer in layers:
        name = f"layer{layer:02d}.enc"
        enc1.write_matrix(np.vstack(rows[layer]), out_dir / name)
        layer_files[layer] = name
    write_word_records(records, out_dir / "words.jsonl")
    write_lock(model_dir, out_dir / "model.lock.json")
    return ExtractionSummary(n_words=len(records), n_layers=len(layers),
                             hidden_size=model.config.hidden_size,
                             layer_files=layer_files, dropped=dropped,
                             chunks_split=n_chunks_split)

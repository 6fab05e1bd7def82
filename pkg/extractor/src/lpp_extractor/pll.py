"""Layer-wise pseudo-log-likelihood surprisal.

Each non-special token position is masked in turn; the masked sequence runs
through the model once, and the prediction head applied to every transformer
layer's hidden state at the masked position yields per-layer log-probabilities
of the true token. Surprisal is the negative log-probability in nats.
Special tokens never enter the table.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import enc1
from .modeling import chunk_words, default_max_tokens, load_mlm, mlm_head, write_lock

log = logging.getLogger("lpp_extractor")


@dataclass
class PllSummary:
    n_tokens: int
    n_layers: int
    matrix_file: str
    sidecar_file: str
    chunks_split: int = 0


def _layer_surprisal(model, head, enc, device) -> np.ndarray:
    """(n_positions, n_layers) surprisal for every non-special position."""
    input_ids = enc["input_ids"][0]
    special = set()
    word_ids = enc.word_ids(0)
    for pos, wid in enumerate(word_ids):
        if wid is None:
            special.add(pos)
    positions = [p for p in range(len(input_ids)) if p not in special]
    if not positions:
        return np.zeros((0, model.config.num_hidden_layers))

    mask_id = model.config.mask_token_id
    if mask_id is None:
        raise ValueError("model config declares no mask token")
    batch_ids = input_ids.repeat(len(positions), 1).clone()
    true_ids = input_ids[positions]
    for row, pos in enumerate(positions):
        batch_ids[row, pos] = mask_id
    attention = enc["attention_mask"].repeat(len(positions), 1)
    with torch.no_grad():
        out = model(input_ids=batch_ids.to(device), attention_mask=attention.to(device),
                    output_hidden_states=True)
        # hidden_states[0] is the embedding layer; blocks start at index 1
        n_layers = model.config.num_hidden_layers
        surp = np.empty((len(positions), n_layers))
        rows = torch.arange(len(positions))
        for layer in range(1, n_layers + 1):
            states = out.hidden_states[layer][rows, torch.tensor(positions)]
            logp = torch.log_softmax(head(states), dim=-1)
            surp[:, layer - 1] = (-logp[rows, true_ids]).cpu().numpy()
    return surp


def extract_pll(utterances, model_dir, out_dir, device: str = "cpu",
                max_tokens: int | None = None) -> PllSummary:
    """Write the token x layer surprisal table and its alignment sidecar.

    Sidecar rows carry (sentence_id, run_id, position, word_index) per token;
    word indices run densely over all utterances in corpus order. Utterances
    longer than the model window are split into chunks and logged.
    """
    tokenizer, model = load_mlm(model_dir, device)
    if tokenizer.mask_token_id is None:
        raise ValueError("tokenizer declares no mask token; PLL needs one")
    model.config.mask_token_id = tokenizer.mask_token_id
    head = mlm_head(model)
    max_tokens = default_max_tokens(tokenizer, model, max_tokens)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    all_rows = []
    sidecar = []
    word_base = 0
    n_chunks_split = 0
    for utt in utterances:
        texts = [w.text for w in utt.words]
        chunks = chunk_words(tokenizer, texts, max_tokens,
                             context=f"utterance {utt.utterance_id}")
        n_chunks_split += len(chunks) - 1
        position = 0
        for start, stop in chunks:
            enc = tokenizer(texts[start:stop], is_split_into_words=True,
                            return_tensors="pt")
            surp = _layer_surprisal(model, head, enc, device)
            word_ids = [w for w in enc.word_ids(0) if w is not None]
            if len(word_ids) != surp.shape[0]:
                raise ValueError("alignment does not cover all scored positions")
            for row, wid in enumerate(word_ids):
                all_rows.append(surp[row])
                sidecar.append({"sentence_id": utt.utterance_id, "run_id": utt.run_id,
                                "position": position,
                                "word_index": word_base + start + wid})
                position += 1
        word_base += len(texts)

    if not all_rows:
        raise ValueError("no tokens scored")
    matrix = np.vstack(all_rows)
    matrix = np.maximum(matrix, 0.0)  # -log p >= 0 up to float round-off at p = 1
    enc1.write_matrix(matrix, out_dir / "pll.enc")
    with open(out_dir / "pll.jsonl", "w", encoding="utf-8") as f:
        for row in sidecar:
            f.write(json.dumps(row) + "\n")
    write_lock(model_dir, out_dir / "model.lock.json")
    return PllSummary(n_tokens=matrix.shape[0], n_layers=matrix.shape[1],
                      matrix_file="pll.enc", sidecar_file="pll.jsonl",
                      chunks_split=n_chunks_split)

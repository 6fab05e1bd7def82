"""Shared model loading, alignment, and provenance helpers."""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import torch

log = logging.getLogger("lpp_extractor")


class ModelError(ValueError):
    pass


def load_mlm(model_dir, device: str = "cpu"):
    """Load a local masked-LM checkpoint and its fast tokenizer."""
    import transformers
    from transformers import AutoModelForMaskedLM, AutoTokenizer

    transformers.utils.logging.disable_progress_bar()
    model_dir = Path(model_dir)
    if not model_dir.exists():
        raise ModelError(f"model not found: {model_dir}")
    tokenizer = AutoTokenizer.from_pretrained(model_dir)
    if not tokenizer.is_fast:
        raise ModelError("a fast tokenizer is required for word alignment")
    model = AutoModelForMaskedLM.from_pretrained(model_dir)
    model.to(device)
    model.eval()
    return tokenizer, model


def mlm_head(model):
    """The model's prediction head, applied per layer to hidden states."""
    if hasattr(model, "cls"):
        return model.cls
    raise ModelError("model exposes no MLM prediction head")


def chunk_words(tokenizer, words: list[str], max_tokens: int, context: str = ""):
    """Split a word list so each chunk tokenizes within max_tokens.

    Returns a list of (start, stop) word slices. Splits are logged; most
    utterances fit in one chunk.
    """
    enc = tokenizer(words, is_split_into_words=True)
    if len(enc["input_ids"]) <= max_tokens:
        return [(0, len(words))]
    per_word = [len(tokenizer(w, add_special_tokens=False)["input_ids"]) for w in words]
    budget = max_tokens - 2  # specials
    chunks = []
    start, used = 0, 0
    for i, n in enumerate(per_word):
        if used + max(n, 1) > budget and i > start:
            chunks.append((start, i))
            start, used = i, 0
        used += max(n, 1)
    chunks.append((start, len(words)))
    log.info("split %s into %d chunks (%d tokens > max %d)",
             context or "utterance", len(chunks), len(enc["input_ids"]), max_tokens)
    return chunks


def default_max_tokens(tokenizer, model, requested: int | None) -> int:
    limit = getattr(model.config, "max_position_embeddings", 512)
    if requested is None:
        return int(limit)
    return min(int(requested), int(limit))


def write_lock(model_dir, out_path) -> None:
    """Pin the exact model revision the outputs were extracted with."""
    import tokenizers
    import transformers

    model_dir = Path(model_dir)
    digest = hashlib.sha256()
    for p in sorted(model_dir.rglob("*")):
        if p.is_file():
            digest.update(p.name.encode())
            digest.update(p.read_bytes())
    record = {
        "model_path": str(model_dir),
        "model_sha256": digest.hexdigest(),
        "torch": torch.__version__,
        "transformers": transformers.__version__,
        "tokenizers": tokenizers.__version__,
    }
    with open(out_path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")

"""Static word vectors with a subword fallback.

Vectors are built FastText-style from character n-grams of the boundary-marked
word, hashed into buckets whose vectors are deterministic functions of
(model seed, bucket). Every word, in or out of vocabulary, therefore gets a
stable vector from its subword structure alone. The model file is a small
JSON description; no weight matrix is stored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import enc1
from .corpus import write_word_records

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class VectorModelError(ValueError):
    pass


@dataclass(frozen=True)
class VectorModel:
    dim: int
    buckets: int
    minn: int
    maxn: int
    seed: int


def create_vector_model(path, dim: int = 300, buckets: int = 2 ** 20,
                        minn: int = 3, maxn: int = 6, seed: int = 0) -> VectorModel:
    model = VectorModel(dim=dim, buckets=buckets, minn=minn, maxn=maxn, seed=seed)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"format": "ngram-hash-v1", **model.__dict__}, f, indent=2, sort_keys=True)
        f.write("\n")
    return model


def load_vector_model(path) -> VectorModel:
    path = Path(path)
    if not path.exists():
        raise VectorModelError(f"vector model file not found: {path}")
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    if raw.get("format") != "ngram-hash-v1":
        raise VectorModelError(f"{path}: unknown vector model format {raw.get('format')!r}")
    return VectorModel(dim=int(raw["dim"]), buckets=int(raw["buckets"]),
                       minn=int(raw["minn"]), maxn=int(raw["maxn"]),
                       seed=int(raw["seed"]))


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def _ngrams(word: str, minn: int, maxn: int) -> list[str]:
    marked = f"<{word}>"
    grams = [marked]  # the whole marked word always contributes
    for n in range(minn, maxn + 1):
        if n >= len(marked):
            continue
        grams.extend(marked[i:i + n] for i in range(len(marked) - n + 1))
    return grams


class VectorTable:
    """Caches bucket vectors; each is a Philox-generated unit-variance draw."""

    def __init__(self, model: VectorModel):
        self.model = model
        self._cache: dict[int, np.ndarray] = {}

    def _bucket_vector(self, bucket: int) -> np.ndarray:
        vec = self._cache.get(bucket)
        if vec is None:
            gen = np.random.Generator(np.random.Philox(key=[self.model.seed, bucket]))
            vec = gen.standard_normal(self.model.dim)
            self._cache[bucket] = vec
        return vec

    def word_vector(self, word: str) -> np.ndarray:
        grams = _ngrams(word, self.model.minn, self.model.maxn)
        acc = np.zeros(self.model.dim)
        for gram in grams:
            acc += self._bucket_vector(_fnv1a(gram.encode("utf-8")) % self.model.buckets)
        return acc / len(grams)


def extract_static(utterances, model_path, out_dir) -> Path:
    """Write the words x dim static embedding matrix and word records.

    Rows follow word-record order exactly; repeated words get identical rows.
    """
    model = load_vector_model(model_path)
    table = VectorTable(model)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    records = []
    for utt in utterances:
        for word in utt.words:
            rows.append(table.word_vector(word.text))
            records.append((word.text, word.onset_sec, utt.run_id))
    if not rows:
        raise VectorModelError("no words to embed")
    out = out_dir / "static.enc"
    enc1.write_matrix(np.vstack(rows), out)
    write_word_records(records, out_dir / "words.jsonl")
    return out

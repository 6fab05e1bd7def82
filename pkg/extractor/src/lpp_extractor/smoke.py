"""Locally constructed smoke models and corpora.

The real studies use published checkpoints from the model hub; tests and
offline development need something self-contained. This module builds a
WordPiece tokenizer from a corpus and a randomly initialized BERT MLM with the
full 12 x 768 geometry, saved to disk so extraction runs against a pinned
local revision. The MLM decoder starts near the corpus unigram distribution
(small decoder weights, log-frequency bias), so token probabilities reflect
frequency without any training.
"""

from __future__ import annotations

import collections
from pathlib import Path

import torch

from .corpus import Utterance, Word

EN_SENTENCES = [
    "the little prince asked the fox about the rose",
    "the fox said the secret is simple",
    "the prince watched the sunset from the chair",
    "the rose said the prince tamed the fox",
    "the king commanded the sunset and the stars",
    "the lamplighter obeyed the orders every minute",
    "the geographer wrote the mountains in the ledger",
]
FR_SENTENCES = [
    "le petit prince demande au renard la rose",
    "le renard dit que le secret est simple",
    "le prince regarde le coucher du soleil",
    "la rose dit que le prince apprivoise le renard",
    "le roi commande le soleil et les etoiles",
    "l allumeur obeit aux ordres chaque minute",
    "le geographe ecrit les montagnes dans le livre",
]
ZH_SENTENCES = [
    "小 王子 问 狐狸 关于 玫瑰 的 事",
    "狐狸 说 这个 秘密 很 简单",
    "小 王子 看 日落 的 时候 很 安静",
    "玫瑰 说 小 王子 驯服 了 狐狸",
    "国王 命令 日落 和 星星",
    "点灯人 服从 命令 每 一 分钟",
]


def smoke_utterances(language: str) -> list[Utterance]:
    sentences = {"en": EN_SENTENCES, "fr": FR_SENTENCES, "zh": ZH_SENTENCES}[language]
    utterances = []
    t = 0.0
    for si, sent in enumerate(sentences):
        words = []
        for w in sent.split():
            words.append(Word(w, round(t, 3)))
            t += 0.4
        run_id = f"run-{si % 3 + 1}"
        utterances.append(Utterance(si, run_id, language, tuple(words)))
        t += 1.0
    return utterances


def all_smoke_sentences() -> list[str]:
    return EN_SENTENCES + FR_SENTENCES + ZH_SENTENCES


def train_smoke_tokenizer(out_dir, sentences=None, vocab_size: int = 600):
    from tokenizers import Tokenizer, models, normalizers, pre_tokenizers, trainers
    from transformers import BertTokenizerFast

    sentences = sentences or all_smoke_sentences()
    tok = Tokenizer(models.WordPiece(unk_token="[UNK]"))
    tok.normalizer = normalizers.BertNormalizer(lowercase=False)
    tok.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    trainer = trainers.WordPieceTrainer(
        vocab_size=vocab_size,
        special_tokens=["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"])
    tok.train_from_iterator(sentences, trainer)
    fast = BertTokenizerFast(tokenizer_object=tok)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fast.save_pretrained(out_dir)
    return fast


def build_smoke_model(out_dir, tokenizer, sentences=None, seed: int = 0,
                      hidden_size: int = 768, num_layers: int = 12,
                      decoder_scale: float = 1e-3):
    """Construct and save a deterministic 12-layer BERT MLM.

    No training happens: the decoder bias is set to smoothed log unigram
    frequencies over the corpus tokenization and the decoder weight is scaled
    down, so predicted probabilities approximate the unigram distribution at
    every position while hidden states stay a fixed random function of the
    input.
    """
    import transformers
    from transformers import BertConfig, BertForMaskedLM

    transformers.utils.logging.disable_progress_bar()
    sentences = sentences or all_smoke_sentences()
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=12,
        intermediate_size=1024,
        max_position_embeddings=64,
        pad_token_id=tokenizer.pad_token_id,
    )
    model = BertForMaskedLM(config)
    counts = collections.Counter()
    for sent in sentences:
        counts.update(tokenizer(sent)["input_ids"])
    total = sum(counts.values())
    vocab = tokenizer.vocab_size
    freqs = torch.tensor([(counts.get(i, 0) + 0.5) / (total + 0.5 * vocab)
                          for i in range(vocab)])
    with torch.no_grad():
        model.cls.predictions.decoder.weight.mul_(decoder_scale)
        model.cls.predictions.decoder.bias.copy_(torch.log(freqs))
    model.eval()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return out_dir

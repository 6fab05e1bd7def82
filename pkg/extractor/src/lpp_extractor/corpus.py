"""Utterance input format and word bookkeeping."""

from __future__ import annotations

import json
from dataclasses import dataclass


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Word:
    text: str
    onset_sec: float


@dataclass(frozen=True)
class Utterance:
    utterance_id: int
    run_id: str
    language: str
    words: tuple[Word, ...]


def load_utterances(path) -> list[Utterance]:
    """Read utterances from JSON lines.

    Each line: {"utterance_id", "run_id", "language", "words": [{"word",
    "onset_sec"}, ...]}. Words must be non-empty and onsets strictly
    increasing within an utterance.
    """
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                words = tuple(Word(str(w["word"]), float(w["onset_sec"]))
                              for w in obj["words"])
                utt = Utterance(int(obj["utterance_id"]), str(obj["run_id"]),
                                str(obj["language"]), words)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise CorpusError(f"{path}:{lineno}: bad utterance: {e}") from None
            if not utt.words:
                raise CorpusError(f"{path}:{lineno}: utterance has no words")
            onsets = [w.onset_sec for w in utt.words]
            if any(b <= a for a, b in zip(onsets, onsets[1:])):
                raise CorpusError(f"{path}:{lineno}: onsets must increase within "
                                  f"an utterance")
            out.append(utt)
    if not out:
        raise CorpusError(f"{path}: no utterances")
    return out


def write_utterances(utterances, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for u in utterances:
            f.write(json.dumps({
                "utterance_id": u.utterance_id,
                "run_id": u.run_id,
                "language": u.language,
                "words": [{"word": w.text, "onset_sec": w.onset_sec} for w in u.words],
            }, ensure_ascii=False) + "\n")


def write_word_records(records, path) -> None:
    """Word records in the pipeline's sidecar schema."""
    with open(path, "w", encoding="utf-8") as f:
        for word_index, (text, onset, run_id) in enumerate(records):
            f.write(json.dumps({"word": text, "onset_sec": onset, "run_id": run_id,
                                "word_index": word_index}, ensure_ascii=False) + "\n")

"""JSONL example I/O, fixed-precision records, and a synthetic grounded corpus."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from itertools import product

import numpy as np

from .faith import LABELS, GroundedExample, Turn
from .tokenizer import atomic_write_text


class DataError(ValueError):
    pass


def example_from_dict(obj: dict) -> GroundedExample:
    if not isinstance(obj, dict):
        raise DataError("record is not a JSON object")
    for key in ("id", "document"):
        if not isinstance(obj.get(key), str):
            raise DataError(f"missing or non-string field {key!r}")
    history = obj.get("history", [])
    if not isinstance(history, list):
        raise DataError("history must be a list")
    turns = []
    for turn in history:
        if not isinstance(turn, dict) or not isinstance(turn.get("text"), str):
            raise DataError("history turns need 'speaker' and 'text'")
        if turn.get("speaker") not in ("user", "agent"):
            raise DataError(f"unknown speaker {turn.get('speaker')!r}")
        turns.append(Turn(turn["speaker"], turn["text"]))
    label = obj.get("label")
    if label is not None and label not in LABELS:
        raise DataError(f"unknown label {label!r}")
    response = obj.get("response")
    if response is not None and not isinstance(response, str):
        raise DataError("response must be a string")
    return GroundedExample(obj["id"], obj["document"], tuple(turns), response, label,
                           obj.get("dataset_tag"))


def example_to_dict(ex: GroundedExample) -> dict:
    out = {"id": ex.id, "document": ex.document,
           "history": [{"speaker": t.speaker, "text": t.text} for t in ex.history]}
    if ex.response is not None:
        out["response"] = ex.response
    if ex.label is not None:
        out["label"] = ex.label
    if ex.dataset_tag is not None:
        out["dataset_tag"] = ex.dataset_tag
    return out


def read_jsonl(path) -> list[tuple[int, dict]]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append((lineno, json.loads(line)))
            except ValueError as e:
                raise DataError(f"line {lineno}: parse failure ({e.msg})") from e
    return rows


def read_examples(path) -> list[GroundedExample]:
    examples = []
    for lineno, obj in read_jsonl(path):
        try:
            examples.append(example_from_dict(obj))
        except (DataError, ValueError) as e:
            raise DataError(f"line {lineno}: {e}") from e
    return examples


def _encode(value) -> str:
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot serialize {value}")
        text = f"{value:.6f}"
        return "0.000000" if text == "-0.000000" else text
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in value) + "]"
    return json.dumps(value, ensure_ascii=False)


def dumps_record(record: dict) -> str:
    """One JSON line with every float written with six decimals."""
    return _encode(record)


def write_jsonl(path, records) -> None:
    atomic_write_text(path, "".join(dumps_record(r) + "\n" for r in records))


FILLER = ("the", "a", "of", "and", "is", "in", "to", "it", "that", "was",
          "for", "on", "with", "as", "by", "at", "this", "from", "are", "be")


def word_inventory() -> tuple[str, ...]:
    """A fixed list of pronounceable content words."""
    syllables = [c + v for c, v in product("bdfgklmnprstvz", "aeiou")]
    words = [a + b for a, b in product(syllables, repeat=2) if a != b]
    return tuple(words[::16])


@dataclass
class SyntheticCorpus:
    train_lines: list[str]
    dev: list[GroundedExample]
    test: list[GroundedExample]


_FILLER_WEIGHTS = 1.0 / np.arange(1, len(FILLER) + 1)
_FILLER_WEIGHTS /= _FILLER_WEIGHTS.sum()


def _sentence(rng: np.random.Generator, topic: list[str]) -> str:
    # 3-20 words, about 60% Zipf-distributed filler, at least two topic words.
    length = int(rng.integers(3, 21))
    while True:
        is_filler = rng.random(length) < 0.6
        if (~is_filler).sum() >= 2:
            break
    words = [FILLER[int(rng.choice(len(FILLER), p=_FILLER_WEIGHTS))] if f
             else topic[int(rng.integers(len(topic)))] for f in is_filler]
    return " ".join(words) + " ."


def make_synthetic_corpus(seed: int, n_docs: int = 50, sentences_per_doc: int = 5,
                          topic_size: int = 12) -> SyntheticCorpus:
    """Pseudo-documents plus balanced faithful / unfaithful examples.

    A positive copies a sentence of its own document; its negative twin
    uses the same document and history but a sentence from another
    document. Train, dev and test use disjoint documents; the training
    lines are the training documents, one per line.
    """
    if n_docs < 2:
        raise ValueError("n_docs must be >= 2")
    if sentences_per_doc < 1:
        raise ValueError("sentences_per_doc must be >= 1")
    rng = np.random.default_rng(seed)
    inventory = word_inventory()
    docs = []
    for _ in range(n_docs):
        topic = [inventory[int(i)] for i in rng.choice(len(inventory), topic_size, replace=False)]
        docs.append((topic, [_sentence(rng, topic) for _ in range(sentences_per_doc)]))
    order = [int(i) for i in rng.permutation(n_docs)]
    n_eval = max(1, round(0.2 * n_docs))
    dev_ids, test_ids = order[:n_eval], order[n_eval:2 * n_eval]
    train_ids = order[2 * n_eval:]

    def examples(split: str, doc_ids: list[int]) -> list[GroundedExample]:
        out = []
        for d in doc_ids:
            topic, sentences = docs[d]
            document = " ".join(sentences)
            history = (Turn("user", f"tell me about {topic[0]} ."),)
            for j, sent in enumerate(sentences):
                other = int(rng.integers(n_docs - 1))
                other += other >= d
                foreign = docs[other][1][int(rng.integers(sentences_per_doc))]
                base = f"{split}-{d:03d}-{j:02d}"
                out.append(GroundedExample(base + "-pos", document, history, sent,
                                           "fully_attributable", "synthetic"))
                out.append(GroundedExample(base + "-neg", document, history, foreign,
                                           "not_fully_attributable", "synthetic"))
        return out

    dev = examples("dev", dev_ids)
    test = examples("test", test_ids)
    train_lines = [" ".join(docs[d][1]) for d in train_ids]
    return SyntheticCorpus(train_lines, dev, test)


def write_synthetic(corpus: SyntheticCorpus, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    atomic_write_text(os.path.join(out_dir, "train.txt"),
                      "".join(line + "\n" for line in corpus.train_lines))
    for name, split in (("dev", corpus.dev), ("test", corpus.test)):
        write_jsonl(os.path.join(out_dir, f"{name}.jsonl"), [example_to_dict(e) for e in split])

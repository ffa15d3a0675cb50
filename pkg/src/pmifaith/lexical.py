"""Lexical overlap baselines: unigram F1, sentence BLEU-4 and ROUGE-L."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .tokenizer import is_punct, split_text

BLEU_ZERO_MATCH = 0.1


@dataclass(frozen=True)
class MetricReport:
    unigram_f1: float
    bleu4: float
    rouge_l: float


def _words(text: str) -> list[str]:
    return [t for t in split_text(text) if not all(is_punct(c) for c in t)]


def _f1(overlap: float, n_cand: int, n_ref: int) -> float:
    if overlap == 0 or n_cand == 0 or n_ref == 0:
        return 0.0
    p, r = overlap / n_cand, overlap / n_ref
    return 2 * p * r / (p + r)


def unigram_f1(candidate: str, reference: str) -> float:
    """Bag-of-words F1 with punctuation tokens removed."""
    cand, ref = Counter(_words(candidate)), Counter(_words(reference))
    overlap = sum((cand & ref).values())
    return _f1(overlap, sum(cand.values()), sum(ref.values()))


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: str, reference: str) -> float:
    """Sentence BLEU on a 0-100 scale.

    Orders longer than the candidate are left out of the geometric mean;
    an order with no matches gets precision ``0.1 / total``.
    """
    cand, ref = split_text(candidate), split_text(reference)
    if not cand:
        return 0.0
    log_precisions = []
    for n in range(1, 5):
        total = max(len(cand) - n + 1, 0)
        if total == 0:
            continue
        matches = sum((_ngrams(cand, n) & _ngrams(ref, n)).values())
        p = matches / total if matches else BLEU_ZERO_MATCH / total
        log_precisions.append(math.log(p))
    bp = min(1.0, math.exp(1 - len(ref) / len(cand)))
    return 100.0 * bp * math.exp(sum(log_precisions) / len(log_precisions))


def lcs_length(a: list, b: list) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> float:
    cand, ref = split_text(candidate), split_text(reference)
    return _f1(lcs_length(cand, ref), len(cand), len(ref))


def metric_report(candidate: str, document: str, gold: str) -> MetricReport:
    return MetricReport(unigram_f1(candidate, document), bleu4(candidate, gold),
                        rouge_l(candidate, gold))

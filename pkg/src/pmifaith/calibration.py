"""Binary faithfulness classification: threshold calibration and reports."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .faith import (DEFAULT_BOUNDS, DEFAULT_TEMPLATE, LABELS, GroundedExample,
                    NormalizationBounds, PromptTemplate, pmi_faith)
from .lexical import bleu4, rouge_l, unigram_f1
from .lm import LanguageModel


@dataclass(frozen=True)
class LabeledScore:
    id: str
    score: float
    positive: bool
    dataset_tag: str | None = None


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp,
                      self.tn + other.tn, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0


@dataclass(frozen=True)
class ClassificationReport:
    threshold: float
    counts: Counts
    per_dataset: dict[str, "ClassificationReport"] = field(default_factory=dict)

    precision = property(lambda self: self.counts.precision)
    recall = property(lambda self: self.counts.recall)
    f1 = property(lambda self: self.counts.f1)
    accuracy = property(lambda self: self.counts.accuracy)

    def record(self) -> dict:
        out = {"threshold": self.threshold, "precision": self.precision,
               "recall": self.recall, "f1": self.f1, "accuracy": self.accuracy,
               "tp": self.counts.tp, "fp": self.counts.fp,
               "tn": self.counts.tn, "fn": self.counts.fn}
        if self.per_dataset:
            out["per_dataset"] = {tag: r.record() for tag, r in sorted(self.per_dataset.items())}
        else:
            out["per_dataset"] = {}
        return out


def binarize_label(label: str) -> bool:
    if label not in LABELS:
        raise ValueError(f"unknown label {label!r}")
    return label == "fully_attributable"


def confusion(scores: Iterable[LabeledScore], threshold: float) -> Counts:
    tp = fp = tn = fn = 0
    for s in scores:
        predicted = s.score > threshold
        if predicted and s.positive:
            tp += 1
        elif predicted:
            fp += 1
        elif s.positive:
            fn += 1
        else:
            tn += 1
    return Counts(tp, fp, tn, fn)


def candidate_thresholds(scores: Sequence[float]) -> list[float]:
    distinct = sorted(set(scores))
    mids = [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]
    return [distinct[0] - 1.0] + mids + [distinct[-1] + 1.0]


def calibrate_threshold(dev: Sequence[LabeledScore]) -> float:
    """Threshold maximizing dev F1; ties go to the smallest threshold."""
    labels = {s.positive for s in dev}
    if labels != {True, False}:
        raise ValueError("degenerate dev set")
    best, best_f1 = None, -1.0
    for t in candidate_thresholds([s.score for s in dev]):
        f1 = confusion(dev, t).f1
        if f1 > best_f1:
            best, best_f1 = t, f1
    return best


def classification_report(test: Sequence[LabeledScore], threshold: float,
                          per_dataset_thresholds: Mapping[str, float] | None = None
                          ) -> ClassificationReport:
    """Overall and per-dataset-tag counts under ``score > threshold``.

    Per-tag rows reuse the global threshold unless a tag appears in
    ``per_dataset_thresholds``; the overall counts are then the sum of the
    per-tag counts.
    """
    groups: dict[str, list[LabeledScore]] = defaultdict(list)
    for s in test:
        if s.dataset_tag is not None:
            groups[s.dataset_tag].append(s)
    per_dataset = {}
    for tag, items in groups.items():
        t = (per_dataset_thresholds or {}).get(tag, threshold)
        per_dataset[tag] = ClassificationReport(t, confusion(items, t))
    if per_dataset_thresholds:
        untagged = confusion([s for s in test if s.dataset_tag is None], threshold)
        overall = sum((r.counts for r in per_dataset.values()), untagged)
    else:
        overall = confusion(test, threshold)
    return ClassificationReport(threshold, overall, per_dataset)


def format_report(report: ClassificationReport) -> str:
    rows = [("all", report)] + sorted(report.per_dataset.items())
    lines = [f"threshold = {report.threshold:.6f}",
             f"{'dataset':<16}{'P':>10}{'R':>10}{'F1':>10}{'Acc':>10}{'N':>8}"]
    for name, r in rows:
        lines.append(f"{name:<16}{r.precision:>10.4f}{r.recall:>10.4f}"
                     f"{r.f1:>10.4f}{r.accuracy:>10.4f}{r.counts.total:>8d}")
    return "\n".join(lines)


@dataclass
class DecodeEvaluation:
    rows: list[dict]
    means: dict[str, float]


METRIC_COLUMNS = ("pmif", "f1_u", "bleu", "rouge_l")


def evaluate_decodes(examples: Sequence[GroundedExample], generated: Mapping[str, str],
                     lm: LanguageModel, bounds: NormalizationBounds = DEFAULT_BOUNDS,
                     template: PromptTemplate = DEFAULT_TEMPLATE,
                     allow_empty: bool = False) -> DecodeEvaluation:
    """Faithfulness (vs. document) and relevance (vs. gold) of generated responses.

    BLEU is averaged over sentences, not pooled over the corpus.
    """
    if not examples:
        if allow_empty:
            return DecodeEvaluation([], {})
        raise ValueError("no examples to evaluate")
    missing = [ex.id for ex in examples if ex.id not in generated]
    if missing:
        raise ValueError("missing generated responses for ids: " + ", ".join(missing))
    rows = []
    for ex in examples:
        text = generated[ex.id]
        gold = ex.response or ""
        score = pmi_faith(lm, ex, template, bounds, response=text)
        rows.append({"id": ex.id, "pmif": score.normalized, "pmif_raw": score.raw,
                     "f1_u": unigram_f1(text, ex.document),
                     "bleu": bleu4(text, gold), "rouge_l": rouge_l(text, gold)})
    means = {c: sum(r[c] for r in rows) / len(rows) for c in METRIC_COLUMNS}
    return DecodeEvaluation(rows, means)


def format_decode_table(results: Mapping[str, DecodeEvaluation]) -> str:
    lines = [f"{'method':<20}{'PMIF':>8}{'F1-U':>8}{'BLEU':>8}{'RougeL':>8}"]
    for name, ev in results.items():
        m = ev.means
        lines.append(f"{name:<20}{m['pmif']:>8.2f}{m['f1_u']:>8.2f}"
                     f"{m['bleu']:>8.2f}{m['rouge_l']:>8.2f}")
    return "\n".join(lines)

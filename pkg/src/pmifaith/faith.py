"""Conditional PMI between a response and its grounding document.

The score is ``log P(r | d, h) - log P(r | h)``: how much more likely the
response becomes once the document is shown to the language model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .lm import LanguageModel, sequence_logprob

LABELS = ("fully_attributable", "generic", "not_fully_attributable")
SPEAKERS = ("user", "agent")


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str

    def __post_init__(self):
        if self.speaker not in SPEAKERS:
            raise ValueError(f"unknown speaker {self.speaker!r}")


@dataclass(frozen=True)
class GroundedExample:
    id: str
    document: str
    history: tuple[Turn, ...] = ()
    response: str | None = None
    label: str | None = None
    dataset_tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        if self.label is not None and self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")


@dataclass(frozen=True)
class PromptTemplate:
    document_prefix: str = "document: "
    turn_format: str = "{speaker}: {text}"
    response_cue: str = "agent:"
    separator: str = "\n"

    def render(self, example: GroundedExample, include_document: bool) -> str:
        blocks = []
        if include_document:
            blocks.append(self.document_prefix + example.document)
        blocks.extend(self.turn_format.format(speaker=t.speaker, text=t.text)
                      for t in example.history)
        blocks.append(self.response_cue)
        return self.separator.join(blocks)


@dataclass(frozen=True)
class NormalizationBounds:
    # Min/max of the raw score seen on a human-labeled dev split.
    min: float = -2.1
    max: float = 6.4

    def __post_init__(self):
        if not self.max > self.min:
            raise ValueError("degenerate bounds")


@dataclass(frozen=True)
class FaithScore:
    raw: float
    normalized: float
    logprob_with_doc: float
    logprob_without_doc: float
    num_tokens: int = field(default=0, compare=False)

    def record(self, example_id: str) -> dict:
        return {"id": example_id, "raw": self.raw, "normalized": self.normalized,
                "logprob_with_doc": self.logprob_with_doc,
                "logprob_without_doc": self.logprob_without_doc}


DEFAULT_TEMPLATE = PromptTemplate()
DEFAULT_BOUNDS = NormalizationBounds()


def build_prompt(lm: LanguageModel, example: GroundedExample,
                 template: PromptTemplate = DEFAULT_TEMPLATE,
                 include_document: bool = True) -> list[int]:
    return lm.tokenize(template.render(example, include_document))


def normalize_score(raw: float, bounds: NormalizationBounds = DEFAULT_BOUNDS) -> float:
    if not bounds.max > bounds.min:
        raise ValueError("degenerate bounds")
    return min(1.0, max(0.0, (raw - bounds.min) / (bounds.max - bounds.min)))


def response_ids(lm: LanguageModel, response: str) -> list[int]:
    ids = lm.tokenize(response)
    if not ids:
        raise ValueError("empty response")
    return ids + [lm.eos_id]


def pmi_faith(lm: LanguageModel, example: GroundedExample,
              template: PromptTemplate = DEFAULT_TEMPLATE,
              bounds: NormalizationBounds = DEFAULT_BOUNDS,
              response: str | None = None, per_token: bool = False) -> FaithScore:
    """Score ``example.response`` (or ``response`` if given) against the document.

    EOS is appended to the response so both conditionals also model its
    length. With ``per_token=True`` the raw score and both log-probabilities
    are divided by the number of scored tokens.
    """
    text = example.response if response is None else response
    if text is None:
        raise ValueError("empty response")
    target = response_ids(lm, text)
    with_doc = sequence_logprob(lm, build_prompt(lm, example, template, True), target)
    without_doc = sequence_logprob(lm, build_prompt(lm, example, template, False), target)
    if per_token:
        with_doc /= len(target)
        without_doc /= len(target)
    raw = with_doc - without_doc
    return FaithScore(raw, normalize_score(raw, bounds), with_doc, without_doc, len(target))


def token_cpmi(lm: LanguageModel, candidate: int, example: GroundedExample,
               partial_response: Sequence[int],
               template: PromptTemplate = DEFAULT_TEMPLATE) -> float:
    """CPMI of one next-token candidate given the response so far."""
    partial = list(partial_response)
    with_doc = lm.next_logprobs(build_prompt(lm, example, template, True) + partial)
    without_doc = lm.next_logprobs(build_prompt(lm, example, template, False) + partial)
    return float(with_doc[candidate]) - float(without_doc[candidate])


def calibrate_bounds(raw_scores: Sequence[float]) -> NormalizationBounds:
    """Bounds taken as the min and max of a scored dev split."""
    if not raw_scores:
        raise ValueError("no scores to calibrate bounds from")
    return NormalizationBounds(float(min(raw_scores)), float(max(raw_scores)))

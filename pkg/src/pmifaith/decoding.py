"""Greedy and beam decoding for likelihood or likelihood + CPMI objectives.

For the ``pmi`` objective each step scores a candidate ``v`` as

    (1 - alpha) * log P(v | d, h, r<t) + alpha * [log P(v | d, h, r<t) - log P(v | h, r<t)]

restricted to the top-p set of the with-document distribution.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .faith import DEFAULT_TEMPLATE, GroundedExample, PromptTemplate, build_prompt
from .lm import LanguageModel

STRATEGIES = ("greedy", "beam")
OBJECTIVES = ("likelihood", "pmi")

# Top-p cumulative sums are compared with this slack so that p=0.5 over
# {0.5, 0.5} stops after one token despite rounding in exp().
_MASS_EPS = 1e-12


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str = "greedy"
    objective: str = "likelihood"
    alpha: float = 0.0
    top_p: float = 1.0
    beam_width: int = 4
    max_len: int = 64
    min_len: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must lie in (0, 1]")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        if self.min_len < 0:
            raise ValueError("min_len must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


GREEDY = DecodeConfig()
PMI_D = DecodeConfig(objective="pmi", alpha=0.25, top_p=0.6)
PMI_D_NM = DecodeConfig(objective="pmi", alpha=0.25, top_p=1.0)
PMI_D_EQ = DecodeConfig(objective="pmi", alpha=0.5, top_p=0.6)
PRESETS = {"greedy": GREEDY, "pmi-d": PMI_D, "pmi-d-nm": PMI_D_NM, "pmi-d-eq": PMI_D_EQ}


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...] = ()
    combined_score: float = 0.0
    loglik: float = 0.0
    finished: bool = False


def _ranked_top_p(logprobs: np.ndarray, p: float) -> np.ndarray:
    """Ids of the smallest probability-ranked prefix holding mass >= p."""
    logprobs = np.asarray(logprobs, dtype=np.float64)
    ids = np.arange(len(logprobs))
    order = np.lexsort((ids, -logprobs))
    if p >= 1.0:
        return order
    mass = np.cumsum(np.exp(logprobs[order]))
    cut = int(np.searchsorted(mass, p - _MASS_EPS, side="left"))
    return order[:min(cut + 1, len(order))]


def top_p_mask(logprobs: np.ndarray, p: float) -> frozenset[int]:
    """Minimal set of highest-probability tokens whose mass reaches ``p``.

    Ties in probability are broken by ascending token id.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    return frozenset(int(i) for i in _ranked_top_p(logprobs, p))


class _Prompts:
    def __init__(self, lm: LanguageModel, example: GroundedExample,
                 template: PromptTemplate, objective: str):
        self.lm = lm
        self.with_doc = build_prompt(lm, example, template, True)
        self.without_doc = build_prompt(lm, example, template, False) if objective == "pmi" else None

    def distributions(self, tokens: Sequence[int]):
        partial = list(tokens)
        with_doc = self.lm.next_logprobs(self.with_doc + partial)
        without_doc = None
        if self.without_doc is not None:
            without_doc = self.lm.next_logprobs(self.without_doc + partial)
        return with_doc, without_doc


def _scores(ids, with_doc, without_doc, config: DecodeConfig):
    loglik = with_doc[ids]
    if config.objective == "likelihood":
        return loglik, loglik
    cpmi = loglik - without_doc[ids]
    return (1.0 - config.alpha) * loglik + config.alpha * cpmi, loglik


def _candidates(with_doc: np.ndarray, eos_id: int, n_tokens: int, config: DecodeConfig) -> np.ndarray:
    """Masked candidate ids in ascending order, with EOS suppressed below min_len."""
    ids = _ranked_top_p(with_doc, config.top_p)
    if n_tokens < config.min_len:
        ids = ids[ids != eos_id]
        if ids.size == 0:
            no_eos = with_doc.copy()
            no_eos[eos_id] = -np.inf
            no_eos -= np.logaddexp.reduce(no_eos)
            ids = _ranked_top_p(no_eos, config.top_p)
            ids = ids[ids != eos_id]
    return np.sort(ids)


def _expand(prompts: _Prompts, state: Hypothesis, config: DecodeConfig):
    with_doc, without_doc = prompts.distributions(state.tokens)
    ids = _candidates(with_doc, prompts.lm.eos_id, len(state.tokens), config)
    scores, logliks = _scores(ids, with_doc, without_doc, config)
    return ids, scores, logliks


def step_score(lm: LanguageModel, candidate: int, state: Hypothesis, example: GroundedExample,
               config: DecodeConfig, template: PromptTemplate = DEFAULT_TEMPLATE) -> float:
    prompts = _Prompts(lm, example, template, config.objective)
    with_doc, without_doc = prompts.distributions(state.tokens)
    score, _ = _scores(np.array([candidate]), with_doc, without_doc, config)
    return float(score[0])


def decode_step(lm: LanguageModel, state: Hypothesis, example: GroundedExample,
                config: DecodeConfig, template: PromptTemplate = DEFAULT_TEMPLATE) -> int:
    if state.finished or len(state.tokens) >= config.max_len:
        raise ValueError("hypothesis cannot be extended")
    prompts = _Prompts(lm, example, template, config.objective)
    ids, scores, _ = _expand(prompts, state, config)
    return int(ids[int(np.argmax(scores))])


def _extend(state: Hypothesis, token: int, score: float, loglik: float, eos_id: int) -> Hypothesis:
    return Hypothesis(state.tokens + (token,), state.combined_score + score,
                      state.loglik + loglik, token == eos_id)


def _greedy(prompts: _Prompts, config: DecodeConfig) -> Hypothesis:
    eos_id = prompts.lm.eos_id
    state = Hypothesis()
    while not state.finished and len(state.tokens) < config.max_len:
        ids, scores, logliks = _expand(prompts, state, config)
        best = int(np.argmax(scores))
        state = _extend(state, int(ids[best]), float(scores[best]), float(logliks[best]), eos_id)
    return state


def _rank_key(h: Hypothesis):
    return (-h.combined_score, h.tokens)


def _beam(prompts: _Prompts, config: DecodeConfig) -> Hypothesis:
    eos_id = prompts.lm.eos_id
    beam = [Hypothesis()]
    finished: list[Hypothesis] = []
    for _ in range(config.max_len):
        expansions = []
        for state in beam:
            ids, scores, logliks = _expand(prompts, state, config)
            expansions.extend(_extend(state, int(i), float(s), float(l), eos_id)
                              for i, s, l in zip(ids, scores, logliks))
        expansions.sort(key=_rank_key)
        beam = []
        for h in expansions[:config.beam_width]:
            (finished if h.finished else beam).append(h)
        if not beam:
            break
    pool = finished or beam
    return min(pool, key=_rank_key)


def decode(lm: LanguageModel, example: GroundedExample, config: DecodeConfig = GREEDY,
           template: PromptTemplate = DEFAULT_TEMPLATE) -> Hypothesis:
    """Generate a response for ``example`` (its ``response`` field is ignored).

    Beam search keeps the ``beam_width`` best expansions by accumulated
    score; finished ones are set aside. The best finished hypothesis is
    returned, or the best unfinished one at ``max_len`` if none finished.
    Scores are not length-normalized.
    """
    prompts = _Prompts(lm, example, template, config.objective)
    if config.strategy == "greedy":
        return _greedy(prompts, config)
    return _beam(prompts, config)


def with_overrides(config: DecodeConfig, **kwargs) -> DecodeConfig:
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})


def decode_record(lm: LanguageModel, example: GroundedExample, hyp: Hypothesis,
                  config: DecodeConfig) -> dict:
    return {"id": example.id, "response": lm.detokenize(hyp.tokens),
            "combined_score": hyp.combined_score, "loglik": hyp.loglik,
            "num_tokens": len(hyp.tokens), "config": config.to_dict()}

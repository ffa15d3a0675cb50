"""Faithfulness scoring and faithfulness-aware decoding for grounded dialog.

The score is the conditional PMI between a response and its document given
the dialog history; decoding maximizes a mix of likelihood and token-level
CPMI over a top-p masked vocabulary.
"""
from .calibration import (ClassificationReport, LabeledScore, binarize_label,
                          calibrate_threshold, classification_report, evaluate_decodes)
from .data import make_synthetic_corpus, read_examples, write_jsonl
from .decoding import (GREEDY, PMI_D, PMI_D_EQ, PMI_D_NM, DecodeConfig, Hypothesis,
                       decode, decode_step, step_score, top_p_mask)
from .faith import (FaithScore, GroundedExample, NormalizationBounds, PromptTemplate, Turn,
                    build_prompt, normalize_score, pmi_faith, token_cpmi)
from .lexical import bleu4, rouge_l, unigram_f1
from .lm import (BackendError, LengthMismatchError, NGramLM, RemoteLMClient, StubServer,
                 next_logprobs, sequence_logprob, train_ngram)
from .tokenizer import Vocabulary, build_vocab, detokenize, tokenize

__version__ = "0.1.0"

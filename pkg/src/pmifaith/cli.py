"""Command-line entry point: ``pmifaith <subcommand> ...``."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import calibration as cal
from .data import (DataError, dumps_record, make_synthetic_corpus, read_examples,
                   read_jsonl, write_synthetic)
from .decoding import DecodeConfig, decode, decode_record
from .faith import NormalizationBounds, PromptTemplate, pmi_faith
from .lexical import unigram_f1
from .lm import BackendError, NGramLM, RemoteLMClient, StubServer, train_ngram
from .tokenizer import atomic_write_text, build_vocab


@dataclass
class RunConfig:
    backend: str | None = None
    template: PromptTemplate = field(default_factory=PromptTemplate)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    bounds: NormalizationBounds = field(default_factory=NormalizationBounds)
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("--workers must be >= 1")


def load_backend(spec: str):
    kind, sep, target = spec.partition(":")
    if not sep or not target:
        raise ValueError(f"backend must be ngram:<model-file> or remote:<url>, got {spec!r}")
    if kind == "ngram":
        return NGramLM.load(target)
    if kind == "remote":
        client = RemoteLMClient(target)
        client.handshake()
        return client
    raise ValueError(f"unknown backend kind {kind!r}")


def _parse_floats(text: str, n: int | None = None) -> list[float]:
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if n is not None and len(values) != n:
        raise argparse.ArgumentTypeError(f"expected {n} numbers, got {text!r}")
    return values


def _parallel_map(fn, items, workers: int) -> list:
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _emit(records, out) -> None:
    text = "".join(dumps_record(r) + "\n" for r in sorted(records, key=lambda r: r["id"]))
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write_text(out, text)


def _template(args) -> PromptTemplate:
    return PromptTemplate(document_prefix=args.document_prefix, turn_format=args.turn_format,
                          response_cue=args.response_cue,
                          separator=args.separator.encode().decode("unicode_escape"))


def _read_scores(path, field_name: str) -> dict[str, float]:
    scores = {}
    for lineno, obj in read_jsonl(path):
        try:
            scores[str(obj["id"])] = float(obj[field_name])
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path} line {lineno}: missing id or {field_name!r}") from e
    return scores


def _labeled(examples, scores: dict[str, float]) -> list[cal.LabeledScore]:
    missing = [e.id for e in examples if e.id not in scores]
    if missing:
        raise DataError("no score for ids: " + ", ".join(missing[:10]))
    unlabeled = [e.id for e in examples if e.label is None]
    if unlabeled:
        raise DataError("unlabeled examples: " + ", ".join(unlabeled[:10]))
    return [cal.LabeledScore(e.id, scores[e.id], cal.binarize_label(e.label), e.dataset_tag)
            for e in examples]


def cmd_train_lm(args) -> None:
    with open(args.corpus, encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    vocab = build_vocab(lines, args.min_count)
    lm = train_ngram(lines, vocab, args.order, args.add_k, args.lambdas,
                     cache_weight=args.cache_weight, copy_weight=args.copy_weight)
    lm.save(args.out)


def cmd_score(args) -> None:
    cfg = RunConfig(backend=args.backend, template=_template(args),
                    bounds=NormalizationBounds(*args.bounds), workers=args.workers)
    examples = read_examples(args.data)
    if args.metric == "unigram_f1":
        def score(ex):
            value = unigram_f1(ex.response or "", ex.document)
            return {"id": ex.id, "raw": value, "normalized": value}
    else:
        if cfg.backend is None:
            raise ValueError("--backend is required for the pmi metric")
        lm = load_backend(cfg.backend)

        def score(ex):
            return pmi_faith(lm, ex, cfg.template, cfg.bounds, per_token=args.per_token).record(ex.id)
    _emit(_parallel_map(score, examples, cfg.workers), args.out)


def cmd_decode(args) -> None:
    config = DecodeConfig(strategy=args.strategy, objective=args.objective, alpha=args.alpha,
                          top_p=args.top_p, beam_width=args.beam_width,
                          max_len=args.max_len, min_len=args.min_len)
    cfg = RunConfig(backend=args.backend, template=_template(args), decode=config,
                    workers=args.workers)
    lm = load_backend(cfg.backend)
    examples = read_examples(args.data)

    def run(ex):
        return decode_record(lm, ex, decode(lm, ex, cfg.decode, cfg.template), cfg.decode)
    _emit(_parallel_map(run, examples, cfg.workers), args.out)


def cmd_calibrate(args) -> None:
    dev = _labeled(read_examples(args.dev), _read_scores(args.scores, args.field))
    threshold = cal.calibrate_threshold(dev)
    f1 = cal.confusion(dev, threshold).f1
    sys.stdout.write(dumps_record({"threshold": threshold, "f1": f1}) + "\n")


def cmd_evaluate(args) -> None:
    examples = read_examples(args.test)
    if args.scores is not None:
        if args.threshold is None:
            raise ValueError("--threshold is required with --scores")
        test = _labeled(examples, _read_scores(args.scores, args.field))
        report = cal.classification_report(test, args.threshold)
        sys.stdout.write(cal.format_report(report) + "\n")
        if args.record:
            atomic_write_text(args.record, dumps_record(report.record()) + "\n")
        return
    if not args.generated:
        raise ValueError("evaluate needs --scores or --generated")
    if args.backend is None:
        raise ValueError("--backend is required with --generated")
    lm = load_backend(args.backend)
    bounds = NormalizationBounds(*args.bounds)
    template = _template(args)
    results = {}
    for path in args.generated:
        generated = {}
        name = path
        for _, obj in read_jsonl(path):
            generated[str(obj["id"])] = obj["response"]
        results[name] = cal.evaluate_decodes(examples, generated, lm, bounds, template)
    sys.stdout.write(cal.format_decode_table(results) + "\n")
    if args.record:
        rows = []
        for name, ev in results.items():
            rows.append({"id": name, "means": ev.means, "rows": ev.rows})
        atomic_write_text(args.record, "".join(dumps_record(r) + "\n" for r in rows))


def cmd_serve_stub(args) -> None:
    lm = NGramLM.load(args.model)
    server = StubServer(lm, host=args.host, port=args.port, model_name=args.model,
                        delay=args.delay)
    print(f"serving {args.model} on {server.url}", file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()


def cmd_make_synthetic(args) -> None:
    corpus = make_synthetic_corpus(args.seed, args.n_docs, args.sentences_per_doc)
    write_synthetic(corpus, args.out_dir)


def _add_template_args(p) -> None:
    defaults = PromptTemplate()
    p.add_argument("--document-prefix", default=defaults.document_prefix)
    p.add_argument("--turn-format", default=defaults.turn_format)
    p.add_argument("--response-cue", default=defaults.response_cue)
    p.add_argument("--separator", default="\\n", help="backslash escapes allowed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmifaith", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-lm", help="train an interpolated n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--add-k", type=float, default=0.01)
    p.add_argument("--lambdas", type=_parse_floats, default=[0.2, 0.3, 0.5])
    p.add_argument("--cache-weight", type=float, default=0.1)
    p.add_argument("--copy-weight", type=float, default=0.2)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("score", help="PMI-Faith (or unigram-F1) per example")
    p.add_argument("--data", required=True)
    p.add_argument("--backend")
    p.add_argument("--metric", choices=("pmi", "unigram_f1"), default="pmi")
    p.add_argument("--bounds", type=lambda s: _parse_floats(s, 2), default=[-2.1, 6.4])
    p.add_argument("--per-token", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    _add_template_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("decode", help="generate responses")
    p.add_argument("--data", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--objective", choices=("likelihood", "pmi"), default="likelihood")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--top-p", type=float, default=1.0)
    p.add_argument("--strategy", choices=("greedy", "beam"), default="greedy")
    p.add_argument("--beam-width", type=int, default=4)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    _add_template_args(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("calibrate", help="pick the dev-F1-optimal threshold")
    p.add_argument("--dev", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--field", default="raw")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="classification report or decode metric table")
    p.add_argument("--test", required=True)
    p.add_argument("--scores")
    p.add_argument("--field", default="raw")
    p.add_argument("--threshold", type=float)
    p.add_argument("--generated", action="append")
    p.add_argument("--backend")
    p.add_argument("--bounds", type=lambda s: _parse_floats(s, 2), default=[-2.1, 6.4])
    p.add_argument("--record", help="also write the machine-readable record here")
    _add_template_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve-stub", help="serve an n-gram model over HTTP")
    p.add_argument("--model", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--delay", type=float, default=0.0)
    p.set_defaults(func=cmd_serve_stub)

    p = sub.add_parser("make-synthetic", help="write synthetic train/dev/test splits")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-docs", type=int, default=50)
    p.add_argument("--sentences-per-doc", type=int, default=5)
    p.set_defaults(func=cmd_make_synthetic)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except (BackendError, DataError, ValueError, OSError, KeyError) as e:
        print(f"pmifaith {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

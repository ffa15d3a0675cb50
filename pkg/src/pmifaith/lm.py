"""Next-token distributions: an interpolated n-gram LM and an HTTP client.

Every backend exposes ``vocab_size``, ``eos_id``, ``tokenize``,
``detokenize`` and ``next_logprobs``; the decoder and the faithfulness
metric only rely on that surface.
"""
from __future__ import annotations

import json
import math
import os
import socket
import threading
import time
import urllib.error
import urllib.request
from collections import Counter, defaultdict
from functools import lru_cache
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Protocol, Sequence

import numpy as np

from . import tokenizer as tok
from .tokenizer import BOS, EOS, Vocabulary, atomic_write_text

LOG_FLOOR = math.log(1e-12)
MODEL_VERSION = 1


class BackendError(RuntimeError):
    """A backend could not produce a valid distribution."""


class BackendConnectionError(BackendError):
    pass


class BackendTimeoutError(BackendConnectionError):
    pass


class LengthMismatchError(BackendError):
    pass


class LanguageModel(Protocol):
    vocab_size: int
    eos_id: int

    def tokenize(self, text: str) -> list[int]: ...

    def detokenize(self, ids: Sequence[int]) -> str: ...

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray: ...


def logsumexp(x: np.ndarray) -> float:
    m = np.max(x)
    return float(m + np.log(np.sum(np.exp(x - m))))


def floor_and_normalize(logp: np.ndarray) -> np.ndarray:
    """Floor entries at ln(1e-12) and renormalize so they sum to one."""
    logp = np.maximum(np.asarray(logp, dtype=np.float64), LOG_FLOOR)
    return logp - logsumexp(logp)


class NGramLM:
    """Interpolated add-k n-gram model over a fixed vocabulary.

    ``counts`` maps a context tuple (length ``0 .. order-1``) to a Counter
    of next-token ids. Lines are framed with ``order-1`` BOS symbols and a
    trailing EOS; queries are padded with BOS the same way.

    Two optional context caches are mixed in on top of the n-gram
    estimate. ``cache_weight`` is the weight of the unigram distribution of
    the context tokens; ``copy_weight`` is the weight of a copy distribution
    over the tokens that followed earlier occurrences of the last context
    token (its mass falls back to the unigram cache when there is no earlier
    occurrence). Reserved ids (in particular UNK, which stands for every
    out-of-vocabulary word at once) are left out of both caches. With both at 0 the model is a plain interpolated n-gram
    model, which cannot see a document more than ``order-1`` tokens back.
    """

    def __init__(self, vocab: Vocabulary, order: int, add_k: float,
                 lambdas: Sequence[float], counts=None, cache_weight: float = 0.0,
                 copy_weight: float = 0.0):
        if order < 1:
            raise ValueError("order must be >= 1")
        if len(lambdas) != order:
            raise ValueError(f"expected {order} interpolation weights, got {len(lambdas)}")
        if any(l < 0 for l in lambdas) or abs(math.fsum(lambdas) - 1.0) > 1e-9:
            raise ValueError("interpolation weights must be nonnegative and sum to 1")
        if add_k < 0:
            raise ValueError("add_k must be >= 0")
        if cache_weight < 0 or copy_weight < 0 or cache_weight + copy_weight >= 1.0:
            raise ValueError("cache weights must be nonnegative with sum below 1")
        self.vocab = vocab
        self.order = order
        self.add_k = float(add_k)
        self.lambdas = tuple(float(l) for l in lambdas)
        self.cache_weight = float(cache_weight)
        self.copy_weight = float(copy_weight)
        self.counts: dict[tuple[int, ...], Counter] = {}
        for ctx, row in (counts or {}).items():
            row = Counter({int(v): int(c) for v, c in row.items() if c})
            if any(c < 0 for c in row.values()):
                raise ValueError("counts must be positive")
            if row:
                self.counts[tuple(int(i) for i in ctx)] = row
        self._totals = {ctx: sum(row.values()) for ctx, row in self.counts.items()}
        self._ngram_probs = lru_cache(maxsize=65536)(self._ngram_probs_uncached)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def eos_id(self) -> int:
        return EOS

    def tokenize(self, text: str) -> list[int]:
        return tok.tokenize(self.vocab, text)

    def detokenize(self, ids: Sequence[int]) -> str:
        return tok.detokenize(self.vocab, ids)

    def _estimate(self, ctx: tuple[int, ...]) -> np.ndarray:
        size = self.vocab_size
        total = self._totals.get(ctx, 0)
        denom = total + self.add_k * size
        if denom == 0:
            raise ValueError(f"unseen context {ctx} with add_k=0")
        est = np.full(size, self.add_k, dtype=np.float64)
        row = self.counts.get(ctx)
        if row:
            ids = np.fromiter(row.keys(), dtype=np.int64, count=len(row))
            est[ids] += np.fromiter(row.values(), dtype=np.float64, count=len(row))
        return est / denom

    def _ngram_probs_uncached(self, history: tuple[int, ...]) -> np.ndarray:
        probs = np.zeros(self.vocab_size, dtype=np.float64)
        for k, weight in enumerate(self.lambdas, start=1):
            if weight == 0.0:
                continue
            ctx = history[len(history) - (k - 1):] if k > 1 else ()
            probs += weight * self._estimate(ctx)
        probs.flags.writeable = False
        return probs

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        context = [int(i) for i in context]
        if any(i < 0 or i >= self.vocab_size for i in context):
            raise ValueError("context contains an id outside the vocabulary")
        padded = [BOS] * (self.order - 1) + context
        history = tuple(padded[len(padded) - (self.order - 1):]) if self.order > 1 else ()
        probs = self._ngram_probs(history)
        if self.cache_weight or self.copy_weight:
            words = np.asarray(context, dtype=np.int64)
            words = words[words >= len(tok.RESERVED)]
            if words.size:
                probs = self._mix_caches(probs, words)
        with np.errstate(divide="ignore"):
            return floor_and_normalize(np.log(probs))

    def _mix_caches(self, probs: np.ndarray, context: np.ndarray) -> np.ndarray:
        size = self.vocab_size
        unigram = np.bincount(context, minlength=size) / len(context)
        earlier = np.flatnonzero(context[:-1] == context[-1])
        cache_w, copy_w = self.cache_weight, self.copy_weight
        mixed = (1.0 - cache_w - copy_w) * probs
        if earlier.size:
            copy = np.bincount(context[earlier + 1], minlength=size) / earlier.size
            return mixed + cache_w * unigram + copy_w * copy
        return mixed + (cache_w + copy_w) * unigram

    def to_json(self, vocab_file: str) -> dict:
        counts = {}
        for ctx in sorted(self.counts):
            row = self.counts[ctx]
            counts[" ".join(map(str, ctx))] = {str(v): row[v] for v in sorted(row)}
        return {
            "version": MODEL_VERSION,
            "order": self.order,
            "add_k": self.add_k,
            "lambdas": list(self.lambdas),
            "cache_weight": self.cache_weight,
            "copy_weight": self.copy_weight,
            "vocab_file": vocab_file,
            "counts": counts,
        }

    def save(self, path) -> None:
        """Write the model JSON and its vocabulary file next to it."""
        path = os.fspath(path)
        vocab_path = path + ".vocab"
        self.vocab.save(vocab_path)
        doc = self.to_json(os.path.basename(vocab_path))
        atomic_write_text(path, json.dumps(doc, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "NGramLM":
        path = os.fspath(path)
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        vocab = Vocabulary.load(os.path.join(os.path.dirname(path), doc["vocab_file"]))
        counts = {}
        for key, row in doc["counts"].items():
            ctx = tuple(int(i) for i in key.split()) if key else ()
            counts[ctx] = {int(v): int(c) for v, c in row.items()}
        return cls(vocab, doc["order"], doc["add_k"], doc["lambdas"], counts,
                   cache_weight=doc.get("cache_weight", 0.0),
                   copy_weight=doc.get("copy_weight", 0.0))


def train_ngram(corpus: Sequence[str], vocab: Vocabulary, order: int, add_k: float,
                lambdas: Sequence[float], cache_weight: float = 0.0,
                copy_weight: float = 0.0) -> NGramLM:
    if order < 1:
        raise ValueError("order must be >= 1")
    counts: dict[tuple[int, ...], Counter] = defaultdict(Counter)
    for line in corpus:
        ids = [BOS] * (order - 1) + tok.tokenize(vocab, line) + [EOS]
        for pos in range(order - 1, len(ids)):
            target = ids[pos]
            for k in range(1, order + 1):
                counts[tuple(ids[pos - k + 1:pos])][target] += 1
    return NGramLM(vocab, order, add_k, lambdas, counts,
                   cache_weight=cache_weight, copy_weight=copy_weight)


def next_logprobs(lm: LanguageModel, context: Sequence[int]) -> np.ndarray:
    return lm.next_logprobs(context)


def sequence_logprob(lm: LanguageModel, context: Sequence[int],
                     continuation: Sequence[int]) -> float:
    """Sum of per-token log-probabilities, accumulated left to right."""
    context = list(context)
    total = 0.0
    for t, token in enumerate(continuation):
        total += float(lm.next_logprobs(context + list(continuation[:t]))[token])
    return total


class RemoteLMClient:
    """Client for the JSON logprob protocol (``/v1/info``, ``/v1/tokenize``,
    ``/v1/next_logprobs``).

    ``vocab_size`` is fetched by :meth:`handshake`, which runs lazily on
    first use; every returned vector must have that length.
    """

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._info: dict | None = None
        self._lock = threading.Lock()

    def _request(self, path: str, body=None) -> dict:
        url = self.base_url + path
        data = None
        headers = {}
        if body is not None:
            data = json.dumps(body).encode("utf-8")
            headers["Content-Type"] = "application/json"
        req = urllib.request.Request(url, data=data, headers=headers,
                                     method="POST" if body is not None else "GET")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read()
        except urllib.error.HTTPError as e:
            try:
                msg = json.loads(e.read().decode("utf-8")).get("error", "")
            except (ValueError, AttributeError):
                msg = ""
            raise BackendError(f"{url}: HTTP {e.code} {msg}".rstrip()) from e
        except urllib.error.URLError as e:
            if isinstance(e.reason, (socket.timeout, TimeoutError)):
                raise BackendTimeoutError(f"{url}: timed out after {self.timeout}s") from e
            raise BackendConnectionError(f"{url}: {e.reason}") from e
        except (socket.timeout, TimeoutError) as e:
            raise BackendTimeoutError(f"{url}: timed out after {self.timeout}s") from e
        except OSError as e:
            raise BackendConnectionError(f"{url}: {e}") from e
        try:
            return json.loads(payload.decode("utf-8"))
        except ValueError as e:
            raise BackendError(f"{url}: malformed JSON response") from e

    def handshake(self) -> int:
        with self._lock:
            if self._info is None:
                info = self._request("/v1/info")
                if not isinstance(info.get("vocab_size"), int) or info["vocab_size"] < 1:
                    raise BackendError("server reported no valid vocab_size")
                self._info = info
        return self._info["vocab_size"]

    @property
    def vocab_size(self) -> int:
        return self.handshake()

    @property
    def eos_id(self) -> int:
        self.handshake()
        return int(self._info.get("eos_id", EOS))

    @property
    def model_name(self) -> str:
        self.handshake()
        return str(self._info.get("model", ""))

    def tokenize(self, text: str) -> list[int]:
        return [int(i) for i in self._request("/v1/tokenize", {"text": text})["ids"]]

    def detokenize(self, ids: Sequence[int]) -> str:
        return self._request("/v1/detokenize", {"ids": [int(i) for i in ids]})["text"]

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        size = self.handshake()
        out = self._request("/v1/next_logprobs", {"context_ids": [int(i) for i in context]})
        values = out.get("logprobs")
        if not isinstance(values, list):
            raise BackendError("response lacks a logprobs list")
        if len(values) != size:
            raise LengthMismatchError(f"length mismatch: expected {size}, got {len(values)}")
        return np.asarray(values, dtype=np.float64)


def _make_handler(lm: NGramLM, model_name: str, delay: float, vocab_size_override):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):
            pass

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self) -> dict:
            n = int(self.headers.get("Content-Length") or 0)
            return json.loads(self.rfile.read(n).decode("utf-8"))

        def do_GET(self):
            if delay:
                time.sleep(delay)
            if self.path == "/v1/info":
                size = vocab_size_override or lm.vocab_size
                self._send(200, {"vocab_size": size, "model": model_name, "eos_id": lm.eos_id})
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def do_POST(self):
            if delay:
                time.sleep(delay)
            try:
                body = self._body()
                if self.path == "/v1/tokenize":
                    self._send(200, {"ids": lm.tokenize(str(body["text"]))})
                elif self.path == "/v1/detokenize":
                    self._send(200, {"text": lm.detokenize(body["ids"])})
                elif self.path == "/v1/next_logprobs":
                    logp = lm.next_logprobs(body["context_ids"])
                    self._send(200, {"logprobs": logp.tolist()})
                else:
                    self._send(404, {"error": f"no route {self.path}"})
            except (KeyError, TypeError, ValueError) as e:
                self._send(400, {"error": str(e)})

    return Handler


class _QuietServer(ThreadingHTTPServer):
    def handle_error(self, request, client_address):
        pass  # clients that time out and hang up are expected


class StubServer:
    """Serve an :class:`NGramLM` over the logprob protocol.

    ``delay`` (seconds) is added before every response; ``vocab_size``
    overrides the advertised size, for exercising client validation.
    """

    def __init__(self, lm: NGramLM, host: str = "127.0.0.1", port: int = 0,
                 model_name: str = "ngram", delay: float = 0.0, vocab_size: int | None = None):
        handler = _make_handler(lm, model_name, delay, vocab_size)
        self.httpd = _QuietServer((host, port), handler)
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "StubServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

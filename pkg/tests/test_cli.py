import json
import subprocess
import sys

import pytest

from pmifaith.cli import main
from pmifaith.data import read_jsonl
from pmifaith.lm import NGramLM, RemoteLMClient


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["make-synthetic", "--seed", "42", "--out-dir", str(root / "data")]) == 0
    assert main(["train-lm", "--corpus", str(root / "data" / "train.txt"),
                 "--out", str(root / "lm.json")]) == 0
    small = root / "small.jsonl"
    small.write_text("".join((root / "data" / "test.jsonl").read_text().splitlines(True)[:12]))
    return root


def test_make_synthetic_and_train(workspace):
    names = sorted(p.name for p in (workspace / "data").iterdir())
    assert names == ["dev.jsonl", "test.jsonl", "train.txt"]
    lm = NGramLM.load(workspace / "lm.json")
    assert lm.order == 3 and list(lm.lambdas) == [0.2, 0.3, 0.5]


def test_score_records(capsys, workspace):
    code, out, _ = run(capsys, "score", "--data", workspace / "small.jsonl",
                       "--backend", f"ngram:{workspace / 'lm.json'}")
    assert code == 0
    recs = [json.loads(line) for line in out.splitlines()]
    assert len(recs) == 12 and [r["id"] for r in recs] == sorted(r["id"] for r in recs)
    assert set(recs[0]) >= {"id", "raw", "normalized", "logprob_with_doc", "logprob_without_doc"}
    assert all(0.0 <= r["normalized"] <= 1.0 for r in recs)
    assert '"raw": ' in out and all(len(line.split('"raw": ')[1].split(",")[0].split(".")[1]) == 6
                                    for line in out.splitlines())


def test_decode_degeneration_is_byte_identical(capsys, workspace):
    base = ["decode", "--data", workspace / "small.jsonl", "--backend",
            f"ngram:{workspace / 'lm.json'}", "--max-len", "16"]
    _, a, _ = run(capsys, *base, "--objective", "likelihood")
    _, b, _ = run(capsys, *base, "--objective", "pmi", "--alpha", "0", "--top-p", "1.0")
    strip = [{k: v for k, v in json.loads(line).items() if k != "config"} for line in a.splitlines()]
    strip_b = [{k: v for k, v in json.loads(line).items() if k != "config"} for line in b.splitlines()]
    assert strip == strip_b


def test_calibrate_then_evaluate(capsys, workspace, tmp_path):
    backend = f"ngram:{workspace / 'lm.json'}"
    data = workspace / "data"
    for split in ("dev", "test"):
        assert main(["score", "--data", str(data / f"{split}.jsonl"), "--backend", backend,
                     "--out", str(tmp_path / f"{split}.scores")]) == 0
    code, out, _ = run(capsys, "calibrate", "--dev", data / "dev.jsonl", "--scores", tmp_path / "dev.scores")
    assert code == 0
    threshold = json.loads(out)["threshold"]
    code, out, _ = run(capsys, "evaluate", "--test", data / "test.jsonl", "--scores",
                       tmp_path / "test.scores", "--threshold", threshold,
                       "--record", tmp_path / "report.json")
    assert code == 0 and "F1" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["f1"] > 0.9


def test_evaluate_generated_table(capsys, workspace, tmp_path):
    backend = f"ngram:{workspace / 'lm.json'}"
    gen = tmp_path / "greedy.jsonl"
    assert main(["decode", "--data", str(workspace / "small.jsonl"), "--backend", backend,
                 "--max-len", "12", "--out", str(gen)]) == 0
    code, out, _ = run(capsys, "evaluate", "--test", workspace / "small.jsonl",
                       "--generated", gen, "--backend", backend)
    assert code == 0
    assert "bleu" in out.lower() and "greedy.jsonl" in out


@pytest.mark.parametrize("argv, needle", [
    (["score", "--data", "{small}", "--bogus"], "unrecognized"),
    (["score", "--data", "/nonexistent.jsonl", "--metric", "unigram_f1"], "No such file"),
    (["score", "--data", "{small}", "--backend", "remote:http://127.0.0.1:9"], "error"),
    (["score", "--data", "{small}", "--backend", "nope"], "backend must be"),
    (["evaluate", "--test", "{small}"], "needs --scores or --generated"),
])
def test_errors_exit_nonzero(capsys, workspace, argv, needle):
    argv = [a.format(small=workspace / "small.jsonl") for a in argv]
    code, _, err = run(capsys, *argv)
    assert code != 0 and needle in err


def test_workers_do_not_change_output(capsys, workspace):
    base = ["--data", workspace / "small.jsonl", "--backend", f"ngram:{workspace / 'lm.json'}"]
    outs = [run(capsys, "score", *base, "--workers", w)[1] for w in (1, 8, 1)]
    assert outs[0] == outs[1] == outs[2]
    dec = ["decode", *base, "--objective", "pmi", "--alpha", "0.25", "--top-p", "0.6",
           "--strategy", "beam", "--max-len", "12"]
    assert run(capsys, *dec, "--workers", 1)[1] == run(capsys, *dec, "--workers", 8)[1]


def test_serve_stub_process(workspace):
    proc = subprocess.Popen([sys.executable, "-m", "pmifaith", "serve-stub", "--model",
                             str(workspace / "lm.json"), "--port", "0"],
                            stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stderr.readline()
        url = line.rsplit(" ", 1)[1].strip()
        client = RemoteLMClient(url, timeout=5)
        lm = NGramLM.load(workspace / "lm.json")
        assert client.handshake() == lm.vocab_size
        ctx = lm.tokenize("tell me about")
        assert client.next_logprobs(ctx).tolist() == pytest.approx(lm.next_logprobs(ctx).tolist(), abs=1e-9)
    finally:
        proc.terminate()
        proc.wait(5)


def test_read_jsonl_of_decode_output(workspace, tmp_path):
    out = tmp_path / "d.jsonl"
    assert main(["decode", "--data", str(workspace / "small.jsonl"), "--backend",
                 f"ngram:{workspace / 'lm.json'}", "--max-len", "8", "--out", str(out)]) == 0
    rows = read_jsonl(out)
    assert len(rows) == 12 and all("response" in r for _, r in rows)

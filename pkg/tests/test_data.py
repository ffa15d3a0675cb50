import json

import pytest

from pmifaith.data import (DataError, dumps_record, example_from_dict, example_to_dict,
                           make_synthetic_corpus, read_examples, write_synthetic)


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_minimal_record(tmp_path):
    p = write_lines(tmp_path / "x.jsonl",
                    ['{"id":"1","document":"d","history":[],"response":"r"}'])
    (ex,) = read_examples(p)
    assert (ex.id, ex.document, ex.history, ex.response, ex.label) == ("1", "d", (), "r", None)


def test_label_and_history(tmp_path):
    rec = {"id": "a", "document": "d", "label": "fully_attributable", "dataset_tag": "t",
           "history": [{"speaker": "user", "text": "hi"}, {"speaker": "agent", "text": "yo"}],
           "response": "r"}
    p = write_lines(tmp_path / "x.jsonl", [json.dumps(rec)])
    (ex,) = read_examples(p)
    assert ex.label == "fully_attributable" and ex.history[1].speaker == "agent"
    assert example_to_dict(ex) == rec


def test_parse_failure_reports_line(tmp_path):
    good = '{"id":"1","document":"d","history":[]}'
    p = write_lines(tmp_path / "x.jsonl", [good] * 6 + ['{"id": "7", "docu'])
    with pytest.raises(DataError, match="line 7: parse failure"):
        read_examples(p)


@pytest.mark.parametrize("rec, msg", [
    ({"id": "1", "document": "d", "label": "partly"}, "unknown label"),
    ({"id": "1"}, "document"),
    ({"id": "1", "document": "d", "history": [{"speaker": "bot", "text": "x"}]}, "speaker"),
    ({"id": "1", "document": "d", "response": 3}, "response"),
])
def test_invalid_records(rec, msg):
    with pytest.raises(DataError, match=msg):
        example_from_dict(rec)


def test_dumps_record_precision():
    assert dumps_record({"id": "x", "v": 1 / 3, "n": 2, "z": -0.0, "l": [0.5]}) == \
        '{"id": "x", "v": 0.333333, "n": 2, "z": 0.000000, "l": [0.500000]}'
    with pytest.raises(ValueError):
        dumps_record({"v": float("nan")})


class TestSynthetic:
    def test_deterministic_files(self, tmp_path):
        for name in ("a", "b"):
            write_synthetic(make_synthetic_corpus(7, n_docs=10, sentences_per_doc=3), tmp_path / name)
        for f in ("train.txt", "dev.jsonl", "test.jsonl"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_construction(self, synthetic):
        for split in (synthetic.dev, synthetic.test):
            pos = [e for e in split if e.label == "fully_attributable"]
            neg = [e for e in split if e.label == "not_fully_attributable"]
            assert abs(len(pos) - len(neg)) <= 1
            assert all(e.response in e.document for e in pos)
            assert all(e.response not in e.document for e in neg)

    def test_splits_disjoint_by_document(self, synthetic):
        dev_docs = {e.document for e in synthetic.dev}
        test_docs = {e.document for e in synthetic.test}
        assert not dev_docs & test_docs
        assert not (dev_docs | test_docs) & set(synthetic.train_lines)
        assert len(synthetic.train_lines) == 30 and len(dev_docs) == len(test_docs) == 10

    def test_too_few_documents(self):
        with pytest.raises(ValueError):
            make_synthetic_corpus(0, n_docs=1)

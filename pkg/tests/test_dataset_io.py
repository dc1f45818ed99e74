import io
import json

import pytest
from hypothesis import given, strategies as st

from certcal.dataset_io import (
    QuestionRecord,
    canonicalize,
    dumps_records,
    label_correctness,
    load_column,
    load_matrix,
    load_records,
    read_records_text,
    save_records,
    split_certain_uncertain,
)
from certcal.errors import InvalidInputError, ParseError
from certcal.scores import AnswerSample


@pytest.mark.parametrize("raw,expected", [
    ("The Eiffel Tower ", "eiffel tower"),
    ("PARIS.", "paris"),
    ("  an   Apple\tpie!! ", "apple pie"),
    ('"The the cat"', "cat"),
    ("the", "the"),
    ("", ""),
    ("...", ""),
])
def test_canonicalize(raw, expected):
    assert canonicalize(raw) == expected


@given(st.text())
def test_canonicalize_idempotent(x):
    c = canonicalize(x)
    assert canonicalize(c) == c


@given(st.text(alphabet=st.sampled_from(list("aAnNtThHeE .,!'\"-x "))))
def test_canonicalize_idempotent_article_heavy(x):
    c = canonicalize(x)
    assert canonicalize(c) == c


def test_label_correctness():
    assert label_correctness("Paris", ["paris"]) == 1
    assert label_correctness("London", ["Paris"]) == 0
    assert label_correctness("the Nile", ["Nile", "Nile River"]) == 1
    with pytest.raises(InvalidInputError):
        label_correctness("x", [])


@given(st.text(), st.lists(st.text(), min_size=1, max_size=3))
def test_label_symmetric_under_canonicalization(g, refs):
    assert label_correctness(g, refs) == label_correctness(canonicalize(g), [canonicalize(r) for r in refs])


def _r(i, gen, ref, label=None):
    return QuestionRecord(id=str(i), generated=gen, reference=(ref,), label=label)


def test_split_partition_and_order():
    recs = [_r(1, "a", "a"), _r(2, "a", "b"), _r(3, "c", "c"), _r(4, "x", "y")]
    s = split_certain_uncertain(recs)
    assert s.certain == ["1", "3"] and s.uncertain == ["2", "4"]
    assert not set(s.certain) & set(s.uncertain)


def test_split_all_certain_and_override():
    recs = [_r(1, "a", "a"), _r(2, "b", "b")]
    assert split_certain_uncertain(recs).uncertain == []
    recs = [_r(1, "a", "a", label=0), _r(2, "a", "b", label=1)]
    s = split_certain_uncertain(recs)
    assert s.uncertain == ["1"] and s.certain == ["2"]


def test_split_unlabeled_without_reference():
    with pytest.raises(InvalidInputError, match="q9"):
        split_certain_uncertain([QuestionRecord(id="q9", generated="x")])


@given(st.permutations(list(range(12))))
def test_split_stable_under_shuffle(perm):
    recs = [_r(i, "a", "a" if i % 3 else "b") for i in range(12)]
    base = split_certain_uncertain(recs)
    shuf = split_certain_uncertain([recs[i] for i in perm])
    assert set(shuf.certain) == set(base.certain) and set(shuf.uncertain) == set(base.uncertain)


FULL = {
    "id": "q1", "question": "Capital of France?", "generated": "Paris",
    "answers": ["Paris", "Lyon"], "answer_logprobs": [-0.1, -2.5], "clusters": [0, 1],
    "kernel": [[0.6, 0.1], [0.1, 0.4]], "reference": ["Paris"], "label": 1, "extra": "ignored",
}


def test_load_full_and_minimal():
    text = json.dumps(FULL) + "\n\n" + json.dumps({"id": "q2"}) + "\n"
    recs = read_records_text(text)
    assert len(recs) == 2
    r = recs[0]
    assert r.answers == (AnswerSample("Paris", -0.1, 0), AnswerSample("Lyon", -2.5, 1))
    assert r.kernel == ((0.6, 0.1), (0.1, 0.4)) and r.label == 1 and r.y == 1
    m = recs[1]
    assert m.answers == () and m.kernel is None and m.label is None and m.reference == ()


def test_load_empty():
    assert load_records(io.StringIO("")) == []


def test_duplicate_id_cites_line():
    lines = [json.dumps({"id": f"q{i}"}) for i in range(6)] + [json.dumps({"id": "q2"})]
    with pytest.raises(ParseError) as ei:
        read_records_text("\n".join(lines))
    assert ei.value.line == 7 and "line 7" in str(ei.value)


@pytest.mark.parametrize("line", [
    "{bad json", '["not", "object"]', '{"question": "no id"}', '{"id": "a", "label": 2}',
    '{"id": "a", "answers": ["x"], "clusters": [0, 1]}', '{"id": "a", "answers": ["x"], "answer_logprobs": [0.5]}',
    '{"id": "a", "answers": "x"}',
])
def test_malformed_lines(line):
    with pytest.raises(ParseError) as ei:
        read_records_text(json.dumps({"id": "ok"}) + "\n" + line + "\n")
    assert ei.value.line == 2


def test_round_trip(tmp_path):
    recs = read_records_text(json.dumps(FULL) + "\n" + json.dumps({"id": "q2", "answers": ["ü"], "reference": "x"}) + "\n")
    path = tmp_path / "r.jsonl"
    save_records(recs, path)
    again = load_records(path)
    assert again == recs
    assert dumps_records(again) == path.read_text(encoding="utf-8")


def test_column_and_matrix(tmp_path):
    p = tmp_path / "w.txt"
    p.write_text("1.5\n\n2\n")
    assert load_column(p) == [1.5, 2.0]
    p.write_text("1\nabc\n")
    with pytest.raises(ParseError, match="line 2"):
        load_column(p)
    m = tmp_path / "x.txt"
    m.write_text("1, 2 3\n4 5,6\n")
    assert load_matrix(m) == [[1, 2, 3], [4, 5, 6]]
    m.write_text("1 2\n3\n")
    with pytest.raises(ParseError, match="line 2"):
        load_matrix(m)

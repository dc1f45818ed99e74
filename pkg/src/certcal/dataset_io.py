"""Question records: loading, answer alignment and the certain/uncertain split."""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Sequence, Union

from .errors import InvalidInputError, ParseError
from .scores import AnswerSample

_ARTICLES = ("a ", "an ", "the ")


def _strip_punct(s: str) -> str:
    lo, hi = 0, len(s)
    while lo < hi and unicodedata.category(s[lo]).startswith("P"):
        lo += 1
    while hi > lo and unicodedata.category(s[hi - 1]).startswith("P"):
        hi -= 1
    return s[lo:hi]


def _canon_step(s: str) -> str:
    s = " ".join(s.lower().split())
    s = _strip_punct(s).strip()
    for art in _ARTICLES:
        if s.startswith(art):
            s = s[len(art):]
            break
    return s


def canonicalize(text: str) -> str:
    """Normalize an answer for exact-match comparison.

    Lowercases, collapses whitespace, strips surrounding punctuation and a
    leading "a"/"an"/"the". Rules are applied until nothing changes, which
    makes the function idempotent.

    >>> canonicalize("The Eiffel Tower ")
    'eiffel tower'
    """
    prev = None
    s = text
    for _ in range(len(text) + 8):
        if s == prev:
            return s
        prev, s = s, _canon_step(s)
    return s


def label_correctness(generated: str, reference: Sequence[str]) -> int:
    if not reference:
        raise InvalidInputError("reference answers must be non-empty")
    g = canonicalize(generated)
    return int(any(g == canonicalize(r) for r in reference))


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    question: str = ""
    generated: str = ""
    answers: tuple = ()
    reference: tuple = ()
    label: Optional[int] = None
    kernel: Optional[tuple] = None

    def __post_init__(self):
        if not self.id:
            raise InvalidInputError("record id must be non-empty")
        if self.label is not None and self.label not in (0, 1):
            raise InvalidInputError(f"record {self.id}: label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "answers", tuple(self.answers))
        object.__setattr__(self, "reference", tuple(self.reference))
        if self.kernel is not None:
            object.__setattr__(self, "kernel", tuple(tuple(float(x) for x in row) for row in self.kernel))

    @property
    def y(self) -> int:
        """Explicit label if present, else exact-match alignment of ``generated``."""
        if self.label is not None:
            return self.label
        if not self.reference:
            raise InvalidInputError(f"record {self.id}: no label and no reference answers")
        return label_correctness(self.generated, self.reference)


@dataclass(frozen=True)
class SplitResult:
    certain: list = field(default_factory=list)
    uncertain: list = field(default_factory=list)


def split_certain_uncertain(records: Iterable[QuestionRecord]) -> SplitResult:
    """Partition record ids by label, preserving input order on each side."""
    out = SplitResult()
    for r in records:
        (out.certain if r.y == 1 else out.uncertain).append(r.id)
    return out


def uncertain_records(records: Sequence[QuestionRecord]) -> list[QuestionRecord]:
    return [r for r in records if r.y == 0]


# -- file format ------------------------------------------------------------

def _record_from_obj(obj: dict) -> QuestionRecord:
    if not isinstance(obj, dict):
        raise InvalidInputError("expected a JSON object")
    if "id" not in obj:
        raise InvalidInputError("missing field 'id'")
    texts = obj.get("answers") or []
    logprobs = obj.get("answer_logprobs")
    clusters = obj.get("clusters")
    if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
        raise InvalidInputError("'answers' must be a list of strings")
    for name, extra in (("answer_logprobs", logprobs), ("clusters", clusters)):
        if extra is not None and (not isinstance(extra, list) or len(extra) != len(texts)):
            raise InvalidInputError(f"'{name}' must be a list aligned with 'answers'")
    if clusters is not None and not all(isinstance(c, int) and not isinstance(c, bool) for c in clusters):
        raise InvalidInputError("'clusters' must hold integers")
    answers = tuple(
        AnswerSample(
            text=t,
            log_prob=None if logprobs is None or logprobs[i] is None else float(logprobs[i]),
            cluster_id=None if clusters is None else clusters[i],
        )
        for i, t in enumerate(texts)
    )
    reference = obj.get("reference") or []
    if isinstance(reference, str):
        reference = [reference]
    label = obj.get("label")
    if label is not None and (isinstance(label, bool) or label not in (0, 1)):
        raise InvalidInputError(f"'label' must be 0 or 1, got {label!r}")
    kernel = obj.get("kernel")
    if kernel is not None:
        if not isinstance(kernel, list) or not all(isinstance(row, list) for row in kernel):
            raise InvalidInputError("'kernel' must be a list of lists")
    return QuestionRecord(
        id=str(obj["id"]),
        question=str(obj.get("question", "")),
        generated=str(obj.get("generated", "")),
        answers=answers,
        reference=tuple(str(r) for r in reference),
        label=None if label is None else int(label),
        kernel=kernel,
    )


def record_to_obj(r: QuestionRecord) -> dict:
    obj = {
        "id": r.id,
        "question": r.question,
        "generated": r.generated,
        "answers": [a.text for a in r.answers],
        "reference": list(r.reference),
    }
    if any(a.log_prob is not None for a in r.answers):
        obj["answer_logprobs"] = [a.log_prob for a in r.answers]
    if any(a.cluster_id is not None for a in r.answers):
        obj["clusters"] = [a.cluster_id for a in r.answers]
    if r.kernel is not None:
        obj["kernel"] = [list(row) for row in r.kernel]
    if r.label is not None:
        obj["label"] = r.label
    return obj


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, encoding="utf-8"), True
    return source, False


def load_records(source: Union[str, os.PathLike, IO[str]]) -> list[QuestionRecord]:
    """Read a JSON-lines record file. Blank lines are skipped, unknown keys ignored."""
    fh, owned = _open_text(source)
    records: list[QuestionRecord] = []
    seen: dict[str, int] = {}
    try:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"malformed JSON ({exc.msg})", lineno) from None
            try:
                rec = _record_from_obj(obj)
            except InvalidInputError as exc:
                raise ParseError(str(exc), lineno) from None
            if rec.id in seen:
                raise ParseError(f"duplicate id {rec.id!r} (first seen on line {seen[rec.id]})", lineno)
            seen[rec.id] = lineno
            records.append(rec)
    finally:
        if owned:
            fh.close()
    return records


def dumps_records(records: Iterable[QuestionRecord]) -> str:
    return "".join(json.dumps(record_to_obj(r), ensure_ascii=False) + "\n" for r in records)


def atomic_write_text(path: Union[str, os.PathLike], text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_records(records: Iterable[QuestionRecord], path) -> None:
    atomic_write_text(path, dumps_records(records))


def load_column(path) -> list[float]:
    """One real per non-blank line (ratio files)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            try:
                v = float(s)
            except ValueError:
                raise ParseError(f"not a number: {s!r}", lineno) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {s!r}", lineno)
            out.append(v)
    return out


def load_matrix(path) -> list[list[float]]:
    """Rows of reals separated by commas and/or whitespace (feature files)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.replace(",", " ").split()
            if not s:
                continue
            try:
                row = [float(x) for x in s]
            except ValueError:
                raise ParseError("non-numeric feature value", lineno) from None
            if rows and len(row) != len(rows[0]):
                raise ParseError(f"expected {len(rows[0])} columns, got {len(row)}", lineno)
            rows.append(row)
    return rows


def read_records_text(text: str) -> list[QuestionRecord]:
    return load_records(io.StringIO(text))

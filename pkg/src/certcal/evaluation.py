"""Accuracy on answered questions, Type I / Type II error and curve tables."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .calibration import CertaintyPredictor, calibrate, predict_many
from .dataset_io import atomic_write_text
from .errors import InvalidInputError, ParseError

UNDEFINED = "undefined"


@dataclass(frozen=True)
class EvaluationReport:
    n_total: int
    n_answered: int
    accuracy_answered: Optional[float]
    fpr: Optional[float]
    fnr: Optional[float]
    answer_rate: float

    def to_dict(self) -> dict:
        return {k: (UNDEFINED if v is None else v) for k, v in asdict(self).items()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(**{k: (None if d[k] == UNDEFINED else d[k]) for k in cls.__dataclass_fields__})


def _split_labeled(labeled):
    if len(labeled) == 0:
        raise InvalidInputError("labeled data must be non-empty")
    eta = np.array([float(r[0]) for r in labeled])
    y = np.array([int(r[1]) for r in labeled])
    correct = np.array([int(r[2]) if len(r) > 2 else int(r[1]) for r in labeled])
    return eta, y, correct


def evaluate(predictor: CertaintyPredictor, labeled: Sequence[tuple]) -> EvaluationReport:
    """Score a predictor on ``(eta, y, correct)`` triples.

    ``y`` is the certainty label used for FPR/FNR; ``correct`` is the answer
    correctness used for accuracy (the two coincide under exact-match
    labeling). Pairs ``(eta, y)`` are accepted with ``correct = y``.
    """
    eta, y, correct = _split_labeled(labeled)
    answered = predict_many(predictor, eta)
    n = eta.size
    n_ans = int(answered.sum())
    n_neg = int((y == 0).sum())
    n_pos = n - n_neg
    return EvaluationReport(
        n_total=n,
        n_answered=n_ans,
        accuracy_answered=None if n_ans == 0 else int((answered & (correct == 1)).sum()) / n_ans,
        fpr=None if n_neg == 0 else int((answered & (y == 0)).sum()) / n_neg,
        fnr=None if n_pos == 0 else int((~answered & (y == 1)).sum()) / n_pos,
        answer_rate=n_ans / n,
    )


def fpr_alpha_curve(cal_scores, test, alphas, delta: float) -> list[tuple[float, Optional[float]]]:
    """Empirical test-set FPR of the predictor calibrated at each alpha on the grid."""
    grid = [float(a) for a in alphas]
    if any(not (0 < a < 1) for a in grid) or grid != sorted(grid):
        raise InvalidInputError("alpha grid must be ascending values in (0, 1)")
    cal = np.asarray(cal_scores, dtype=float)
    out = []
    for a in grid:
        out.append((a, evaluate(calibrate(cal, a, delta), test).fpr))
    return out


def emit_curves(path, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    """Write a comma-separated table with a header row; floats use ``repr`` so they round-trip."""
    if len(rows) == 0:
        raise InvalidInputError("refusing to write an empty curve")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise InvalidInputError(f"row {row!r} does not match header {list(columns)!r}")
        w.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def _fmt(v):
    if v is None:
        return UNDEFINED
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _parse(v: str):
    if v == UNDEFINED:
        return None
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def read_curve(path) -> tuple[list[str], list[tuple]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("curve file is empty", 1)
    header, body = rows[0], rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(r)}", i)
    return header, [tuple(_parse(v) for v in r) for r in body]

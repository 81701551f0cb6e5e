"""ANLS scoring and the multi-page confidence-selection protocol."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import EvalError
from .ocr import QARecord

ANLS_THRESHOLD = 0.5


@dataclass(frozen=True)
class Prediction:
    """A model answer for one question. ``confidence`` is set only by the
    multi-page flow (0-100 self-reported)."""

    question_id: str
    answer: str
    confidence: int | None = None


@dataclass(frozen=True)
class AnlsReport:
    per_question: dict[str, float]
    mean: float
    count: int


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance, two-row dynamic program."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb))
        prev = cur
    return prev[-1]


def normalized_levenshtein(a: str, b: str) -> float:
    """Edit distance divided by the longer length; 0.0 when both are empty."""
    if not a and not b:
        return 0.0
    return edit_distance(a, b) / max(len(a), len(b))


def normalize_answer(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace runs to one space."""
    return " ".join(text.split()).lower()


def anls_question(
    pred: str,
    golds: Sequence[str],
    tau: float = ANLS_THRESHOLD,
    *,
    normalize: bool = True,
) -> float:
    """Best-gold similarity: 1 - NL when NL < tau, else 0; max over golds.

    Both sides are normalized (case/whitespace) unless ``normalize`` is off.
    """
    if not golds:
        raise EvalError("golds must be non-empty")
    if normalize:
        pred = normalize_answer(pred)
        golds = [normalize_answer(g) for g in golds]
    best = 0.0
    for gold in golds:
        nl = normalized_levenshtein(pred, gold)
        score = 1.0 - nl if nl < tau else 0.0
        best = max(best, score)
    return best


def anls_dataset(
    preds: Sequence[Prediction],
    records: Sequence[QARecord],
    tau: float = ANLS_THRESHOLD,
) -> AnlsReport:
    """Score a prediction set against its QA records.

    Records without gold answers are skipped (unlabeled). A record with no
    prediction scores 0. Predictions for unknown question ids are an error.
    """
    by_id: dict[str, Prediction] = {}
    for pred in preds:
        if pred.question_id in by_id:
            raise EvalError(f"duplicate prediction for question {pred.question_id!r}")
        by_id[pred.question_id] = pred
    known = {r.question_id for r in records}
    unknown = sorted(set(by_id) - known)
    if unknown:
        raise EvalError(f"predictions reference unknown question ids: {unknown[:5]}")
    per_question: dict[str, float] = {}
    for record in records:
        if not record.gold_answers:
            continue
        pred = by_id.get(record.question_id)
        per_question[record.question_id] = (
            anls_question(pred.answer, record.gold_answers, tau) if pred is not None else 0.0
        )
    mean = sum(per_question.values()) / len(per_question) if per_question else 0.0
    return AnlsReport(per_question=per_question, mean=mean, count=len(per_question))


def parse_confident_answer(raw: str, question_id: str = "") -> Prediction:
    """Parse the "<confidence>, <answer>" completion format.

    Splits at the first comma; the left side must parse as an integer (then
    clamped to [0, 100]). Anything else falls back to confidence 0 with the
    whole trimmed string as the answer.
    """
    head, sep, tail = raw.partition(",")
    if sep:
        try:
            confidence = int(head.strip())
        except ValueError:
            return Prediction(question_id, raw.strip(), 0)
        return Prediction(question_id, tail.strip(), min(100, max(0, confidence)))
    return Prediction(question_id, raw.strip(), 0)


def max_conf_select(candidates: Sequence[Prediction]) -> Prediction:
    """Pick the candidate with the highest confidence; first wins ties."""
    if not candidates:
        raise EvalError("no candidates to select from")
    best = candidates[0]
    for candidate in candidates[1:]:
        if (candidate.confidence or 0) > (best.confidence or 0):
            best = candidate
    return best

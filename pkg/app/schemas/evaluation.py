"""評価（一致モードと適合率・再現率・F値）のスキーマ"""
from enum import Enum
from typing import NamedTuple

from pydantic import Field, model_validator

from app.schemas.base import BaseSchema


class EvalMode(str, Enum):
    B = "B-software"
    I = "I-software"
    PARTIAL = "partial"
    EXACT = "exact"


# report row order
EVAL_MODES = (EvalMode.B, EvalMode.I, EvalMode.PARTIAL, EvalMode.EXACT)


class Span(NamedTuple):
    """(doc_id, sentence_index, token_start, token_end), token_end exclusive"""
    doc_id: str
    sentence_index: int
    start: int
    end: int


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


class Metrics(BaseSchema):
    precision: float = Field(..., ge=0, le=1, description="適合率")
    recall: float = Field(..., ge=0, le=1, description="再現率")
    f_score: float = Field(..., ge=0, le=1, description="F値")
    tp: int = Field(..., ge=0)
    fp: int = Field(..., ge=0)
    fn: int = Field(..., ge=0)

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "Metrics":
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        f_score = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(precision=precision, recall=recall, f_score=f_score, tp=tp, fp=fp, fn=fn)

    @model_validator(mode="after")
    def check_consistent(self) -> "Metrics":
        if abs(self.precision - _ratio(self.tp, self.tp + self.fp)) > 1e-12:
            raise ValueError("precision does not match the counts")
        if abs(self.recall - _ratio(self.tp, self.tp + self.fn)) > 1e-12:
            raise ValueError("recall does not match the counts")
        return self

    def __add__(self, other: "Metrics") -> "Metrics":
        return Metrics.from_counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

"""系列ラベリング（CRF タガー）のスキーマ"""
import math
from enum import Enum
from typing import Dict, List, Tuple

from pydantic import BaseModel, Field, model_validator

from app.schemas.base import BaseSchema
from app.schemas.corpus import Sentence


class BioTag(str, Enum):
    O = "O"
    B = "B-software"
    I = "I-software"


# ラベル順序（Viterbi の同点処理にも使う）: O < B-software < I-software
LABELS: Tuple[BioTag, ...] = (BioTag.O, BioTag.B, BioTag.I)
LABEL_INDEX: Dict[BioTag, int] = {label: i for i, label in enumerate(LABELS)}


def is_valid_bio(tags: List[BioTag]) -> bool:
    """I-software never follows O or the sentence start"""
    previous = BioTag.O
    for tag in tags:
        if tag == BioTag.I and previous == BioTag.O:
            return False
        previous = tag
    return True


def bio_runs(tags: List[BioTag]) -> List[Tuple[int, int]]:
    """Half-open token ranges of B/I runs; a stray I opens a new run"""
    runs: List[Tuple[int, int]] = []
    start = None
    for i, tag in enumerate(tags):
        if tag == BioTag.B or (tag == BioTag.I and start is None):
            if start is not None:
                runs.append((start, i))
            start = i
        elif tag == BioTag.O and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(tags)))
    return runs


def tags_from_runs(length: int, runs: List[Tuple[int, int]]) -> List[BioTag]:
    tags = [BioTag.O] * length
    for start, end in runs:
        tags[start] = BioTag.B
        for i in range(start + 1, end):
            tags[i] = BioTag.I
    return tags


class TaggedSentence(BaseSchema):
    sentence: Sentence = Field(..., description="対象の文")
    tags: List[BioTag] = Field(..., description="トークンごとの BIO タグ")

    @model_validator(mode="after")
    def check_tags(self) -> "TaggedSentence":
        if len(self.tags) != len(self.sentence.tokens):
            raise ValueError(
                f"{len(self.tags)} tags for {len(self.sentence.tokens)} tokens"
            )
        if not is_valid_bio(self.tags):
            raise ValueError("invalid BIO sequence: I-software after O or sentence start")
        return self

    @property
    def is_positive(self) -> bool:
        return any(tag != BioTag.O for tag in self.tags)


class TaggedDocument(BaseSchema):
    doc_id: str
    sentences: List[TaggedSentence] = Field(default_factory=list)


class DecayKind(str, Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exponential"


class TrainingConfig(BaseModel):
    """学習設定（SSC / GSC の各段階で1つずつ）"""

    learning_rate: float = Field(0.002, gt=0, description="学習率")
    lr_decay_kind: DecayKind = Field(DecayKind.LINEAR, description="学習率減衰の種類")
    lr_decay_rate: float = Field(0.0001, ge=0, description="エポックごとの減衰率")
    feature_dropout: float = Field(0.5, ge=0, lt=1, description="素性ドロップアウト率")
    positive_class_weight_boost: float = Field(0.1, ge=0, description="非Oトークンの重み加算")
    epochs: int = Field(2, ge=0, description="エポック数")
    seed: int = Field(42, description="乱数シード")
    negative_sampling_ratio: float = Field(1.0, ge=0, description="正例1文あたりの負例文数")
    rms_decay: float = Field(0.9, gt=0, lt=1, description="RMSprop の減衰係数")
    epsilon: float = Field(1e-8, gt=0, description="RMSprop の安定化項")

    @classmethod
    def ssc_defaults(cls, **overrides) -> "TrainingConfig":
        values = dict(
            learning_rate=0.002,
            lr_decay_kind=DecayKind.LINEAR,
            lr_decay_rate=0.0001,
            feature_dropout=0.5,
            positive_class_weight_boost=0.1,
            epochs=2,
        )
        values.update(overrides)
        return cls(**values)

    @classmethod
    def gsc_defaults(cls, **overrides) -> "TrainingConfig":
        values = dict(
            learning_rate=0.0015,
            lr_decay_kind=DecayKind.EXPONENTIAL,
            lr_decay_rate=0.0007,
            feature_dropout=0.4,
            positive_class_weight_boost=0.1,
            epochs=22,
        )
        values.update(overrides)
        return cls(**values)

    def learning_rate_at(self, epoch: int) -> float:
        """Learning rate for a 0-based epoch; decay is applied once per epoch"""
        if self.lr_decay_kind == DecayKind.LINEAR:
            return self.learning_rate * max(0.0, 1.0 - self.lr_decay_rate * epoch)
        return self.learning_rate * math.exp(-self.lr_decay_rate * epoch)


class Mention(BaseSchema):
    doc_id: str = Field(..., description="文書ID")
    sentence_index: int = Field(..., ge=0, description="M&M セクション内の文番号")
    token_start: int = Field(..., ge=0)
    token_end: int = Field(..., description="トークン終了位置（排他的）")
    surface: str = Field(..., min_length=1, description="言及文字列")
    char_start: int = Field(..., ge=0, description="文書全文内の開始オフセット")
    char_end: int = Field(..., description="文書全文内の終了オフセット")

    @model_validator(mode="after")
    def check_span(self) -> "Mention":
        if self.token_end <= self.token_start or self.char_end <= self.char_start:
            raise ValueError(f"empty mention span for '{self.surface}'")
        return self


class TaggingResult(BaseSchema):
    mentions: List[Mention] = Field(default_factory=list)
    processed_doc_ids: List[str] = Field(default_factory=list)
    skipped_doc_ids: List[str] = Field(default_factory=list, description="M&M セクションのない文書")

    @property
    def mentions_per_article(self) -> float:
        if not self.processed_doc_ids:
            return 0.0
        return len(self.mentions) / len(self.processed_doc_ids)


class EpochRecord(BaseSchema):
    stage: str = Field(..., description="ssc または gsc")
    epoch: int = Field(..., ge=0)
    learning_rate: float
    mean_loss: float = Field(..., ge=0, description="エポック平均損失")
    n_sentences: int = Field(..., ge=0, description="このエポックで学習した文数")


class TrainingHistory(BaseSchema):
    epochs: List[EpochRecord] = Field(default_factory=list)

    def losses(self, stage: str) -> List[float]:
        return [record.mean_loss for record in self.epochs if record.stage == stage]

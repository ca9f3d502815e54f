"""弱教師あり学習（候補・ラベリング関数・生成ラベルモデル）のスキーマ"""
from enum import IntEnum
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

from pydantic import Field, field_validator, model_validator

from app.schemas.base import BaseSchema

MAX_CANDIDATE_LENGTH = 6
KB_LANGUAGES = frozenset({"en", "de", "es", "fr"})


class Vote(IntEnum):
    """投票値（-1/0/1 の規約）"""
    ABSTAIN = -1
    NEGATIVE = 0
    POSITIVE = 1


class Candidate(BaseSchema):
    doc_id: str = Field(..., description="文書ID")
    sentence_index: int = Field(..., ge=0, description="文番号")
    start: int = Field(..., ge=0, description="開始トークン位置")
    end: int = Field(..., description="終了トークン位置（排他的）")
    surface: str = Field(..., min_length=1, description="表層文字列")

    @model_validator(mode="after")
    def check_length(self) -> "Candidate":
        if not 1 <= self.end - self.start <= MAX_CANDIDATE_LENGTH:
            raise ValueError(
                f"candidate '{self.surface}' spans {self.end - self.start} tokens "
                f"(allowed 1..{MAX_CANDIDATE_LENGTH})"
            )
        return self

    @property
    def n(self) -> int:
        return self.end - self.start

    @property
    def sentence_ref(self) -> Tuple[str, int]:
        return (self.doc_id, self.sentence_index)

    @property
    def token_span(self) -> Tuple[int, int]:
        return (self.start, self.end)

    def overlaps(self, other: "Candidate") -> bool:
        return self.start < other.end and other.start < self.end


class LabelingFunctionVote(BaseSchema):
    lf_id: str = Field(..., min_length=1, description="ラベリング関数ID")
    value: Vote = Field(..., description="投票値")


class KbAliasDictionary(BaseSchema):
    """KB の別名辞書（alias -> 正規KB ID）"""

    entries: Dict[str, str] = Field(default_factory=dict, description="別名から KB ID への対応")
    languages: FrozenSet[str] = Field(KB_LANGUAGES, description="対象言語")
    english_wordlist: FrozenSet[str] = Field(frozenset(), description="一般英単語（小文字）")

    @model_validator(mode="after")
    def check_entries(self) -> "KbAliasDictionary":
        for alias in self.entries:
            if alias.lower() in self.english_wordlist:
                raise ValueError(f"alias '{alias}' is an English dictionary word")
        return self

    @cached_property
    def spacing_free_aliases(self) -> FrozenSet[str]:
        """Aliases with whitespace removed, matched against joined token surfaces"""
        return frozenset("".join(alias.split()) for alias in self.entries)

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def __len__(self) -> int:
        return len(self.entries)


class LabelModel(BaseSchema):
    """生成ラベルモデルのパラメータ"""

    lf_ids: List[str] = Field(..., min_length=1, description="登録済みラベリング関数ID（列順）")
    lf_accuracies: Dict[str, float] = Field(..., description="投票が真のラベルに一致する確率")
    lf_propensities: Dict[str, float] = Field(..., description="棄権しない確率")
    class_prior: float = Field(..., gt=0, lt=1, description="正例の事前確率")
    threshold: float = Field(0.5, description="判定閾値（.5 固定）")
    groups: List[List[str]] = Field(default_factory=list, description="相関するLFのグループ")
    n_iterations: int = Field(0, ge=0, description="EM の反復回数")
    log_likelihood: Optional[float] = Field(None, description="最終対数尤度")

    @field_validator("threshold")
    @classmethod
    def check_threshold(cls, value: float) -> float:
        if value != 0.5:
            raise ValueError("the scoring threshold is fixed at 0.5")
        return value

    @model_validator(mode="after")
    def check_parameters(self) -> "LabelModel":
        registered = set(self.lf_ids)
        if set(self.lf_accuracies) != registered or set(self.lf_propensities) != registered:
            raise ValueError("accuracies and propensities must cover exactly the registered LFs")
        for lf_id, accuracy in self.lf_accuracies.items():
            if not 0.0 < accuracy < 1.0:
                raise ValueError(f"accuracy of {lf_id} outside (0, 1): {accuracy}")
        for lf_id, propensity in self.lf_propensities.items():
            if not 0.0 <= propensity <= 1.0:
                raise ValueError(f"propensity of {lf_id} outside [0, 1]: {propensity}")
        if self.groups:
            members = [lf_id for group in self.groups for lf_id in group]
            if sorted(members) != sorted(self.lf_ids):
                raise ValueError("correlation groups must partition the registered LFs")
        return self

    @property
    def resolved_groups(self) -> List[List[str]]:
        return self.groups or [[lf_id] for lf_id in self.lf_ids]


class LfSummaryRow(BaseSchema):
    lf_id: str
    coverage: float = Field(..., ge=0, le=1, description="棄権しなかった候補の割合")
    overlaps: float = Field(..., ge=0, le=1, description="他のLFも投票した候補の割合")
    conflicts: float = Field(..., ge=0, le=1, description="他のLFと異なる投票をした候補の割合")
    positives: int = Field(0, ge=0)
    negatives: int = Field(0, ge=0)


class FalsePositiveSuggestion(BaseSchema):
    surface: str
    false_positives: int = Field(..., ge=1)

"""論文コーパスのスキーマ（文書・セクション・文・トークン）"""
from typing import List, Optional

from pydantic import Field, model_validator

from app.schemas.base import BaseSchema


class Token(BaseSchema):
    surface: str = Field(..., min_length=1, description="表層文字列")
    start: int = Field(..., ge=0, description="文内の開始オフセット")
    end: int = Field(..., description="文内の終了オフセット（排他的）")
    is_stopword: bool = Field(False, description="ストップワードかどうか")
    stem: str = Field("", description="語幹")

    @model_validator(mode="after")
    def check_range(self) -> "Token":
        if self.end <= self.start:
            raise ValueError(f"token '{self.surface}' has empty range {self.start}:{self.end}")
        if self.end - self.start != len(self.surface):
            raise ValueError(f"token '{self.surface}' range does not match its length")
        return self


class Sentence(BaseSchema):
    doc_id: str = Field("", description="文書ID")
    index: int = Field(0, ge=0, description="セクション内の文番号")
    text: str = Field(..., description="文のテキスト")
    char_offset: int = Field(0, ge=0, description="セクション本文内の開始オフセット")
    tokens: List[Token] = Field(default_factory=list, description="トークン列")

    @model_validator(mode="after")
    def check_tokens(self) -> "Sentence":
        previous_end = 0
        for token in self.tokens:
            if token.start < previous_end:
                raise ValueError(f"token '{token.surface}' overlaps its predecessor")
            if token.end > len(self.text) or self.text[token.start:token.end] != token.surface:
                raise ValueError(f"token '{token.surface}' does not match sentence text")
            previous_end = token.end
        return self

    @property
    def surfaces(self) -> List[str]:
        return [token.surface for token in self.tokens]


class AuthorRef(BaseSchema):
    name: str = Field(..., min_length=1, description="著者名")
    orcid: Optional[str] = Field(None, description="ORCID iD")
    affiliation: Optional[str] = Field(None, description="所属機関")


class Section(BaseSchema):
    heading: str = Field(..., description="見出し")
    text: str = Field(..., description="本文")
    char_offset: int = Field(..., ge=0, description="文書全文内の開始オフセット")
    is_mm: bool = Field(False, description="Methods & Materials セクションかどうか")

    @model_validator(mode="after")
    def check_mm_text(self) -> "Section":
        if self.is_mm and not self.text.strip():
            raise ValueError(f"M&M section '{self.heading}' has no text")
        return self


class Document(BaseSchema):
    id: str = Field(..., min_length=1, description="DOI またはファイル名の stem")
    title: str = Field("", description="タイトル")
    year: Optional[int] = Field(None, description="出版年")
    doi: Optional[str] = Field(None, description="DOI")
    publisher: Optional[str] = Field(None, description="出版者")
    authors: List[AuthorRef] = Field(default_factory=list, description="著者")
    sections: List[Section] = Field(default_factory=list, description="トップレベルのセクション")
    same_as: List[str] = Field(default_factory=list, description="外部グラフ上の同一出版物の IRI")
    text: str = Field("", description="セクションを連結した全文")
    source_path: str = Field("", description="読み込み元のファイルパス")

    @model_validator(mode="after")
    def check_document(self) -> "Document":
        if self.year is not None and not 1900 <= self.year <= 2100:
            raise ValueError(f"document {self.id}: year {self.year} outside [1900, 2100]")
        for section in self.sections:
            end = section.char_offset + len(section.text)
            if end > len(self.text) or self.text[section.char_offset:end] != section.text:
                raise ValueError(
                    f"document {self.id}: section '{section.heading}' lies outside the text"
                )
        return self


class SegmentedDocument(BaseSchema):
    """M&M セクションを文分割した結果（タグ付け・弱教師の入力単位）"""

    doc_id: str = Field(..., min_length=1, description="文書ID")
    section_offset: int = Field(0, ge=0, description="M&M セクションの文書全文内オフセット")
    sentences: List[Sentence] = Field(default_factory=list, description="M&M セクションの文")

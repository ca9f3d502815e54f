"""名寄せ・KB リンキングのスキーマ"""
from typing import Dict, FrozenSet, List, Optional, Tuple

from pydantic import Field, model_validator

from app.schemas.base import BaseSchema
from app.schemas.weak_supervision import KB_LANGUAGES

# (doc_id, (char_start, char_end))
DocRef = Tuple[str, Tuple[int, int]]

EXCLUDED_KB_TYPES = frozenset({"video game"})


class MentionString(BaseSchema):
    surface: str = Field(..., min_length=1, description="表記")
    frequency: int = Field(..., ge=1, description="コーパス内の出現回数")
    doc_refs: List[DocRef] = Field(default_factory=list, description="出現箇所")

    @model_validator(mode="after")
    def check_frequency(self) -> "MentionString":
        if self.frequency != len(self.doc_refs):
            raise ValueError(
                f"'{self.surface}': frequency {self.frequency} != {len(self.doc_refs)} references"
            )
        return self


class MentionCluster(BaseSchema):
    members: List[MentionString] = Field(..., min_length=1, description="表記ゆれのメンバー")
    normal_form: str = Field(..., description="正規化形")
    abbreviation: str = Field("", description="略語")
    kb_id: Optional[str] = Field(None, description="リンク先の KB ID")
    representative_name: str = Field("", description="代表名")
    ambiguous: bool = Field(False, description="複数の KB エントリに一致した")

    @property
    def frequency(self) -> int:
        return sum(member.frequency for member in self.members)

    @property
    def surfaces(self) -> List[str]:
        return [member.surface for member in self.members]


class KbEntry(BaseSchema):
    id: str = Field(..., min_length=1, description="KB ID")
    label: str = Field(..., min_length=1, description="ラベル")
    aliases: List[Tuple[str, str]] = Field(default_factory=list, description="(別名, 言語)")
    redirects: List[str] = Field(default_factory=list)
    disambiguates: List[str] = Field(default_factory=list)
    developer: Optional[str] = Field(None, description="開発元")
    type_tags: FrozenSet[str] = Field(frozenset(), description="種別タグ")
    replaced_by: List[str] = Field(default_factory=list, description="後継ソフトウェアの KB ID")

    @model_validator(mode="after")
    def check_entry(self) -> "KbEntry":
        for alias, language in self.aliases:
            if language not in KB_LANGUAGES:
                raise ValueError(f"{self.id}: alias '{alias}' has unsupported language '{language}'")
        if self.type_tags & EXCLUDED_KB_TYPES:
            raise ValueError(f"{self.id}: entries of type {sorted(EXCLUDED_KB_TYPES)} are excluded")
        return self


class SoftwareEnrichment(BaseSchema):
    name: str = Field(..., min_length=1, description="ソフトウェア名")
    software_ontology_id: Optional[str] = None
    wikidata_id: Optional[str] = None
    wikipedia_id: Optional[str] = None
    url: Optional[str] = None
    manufacturer: Optional[str] = None
    is_free: Optional[bool] = Field(None, description="無償で利用できるか")
    is_source_available: Optional[bool] = Field(None, description="ソースコードが公開されているか")
    license: Optional[str] = None

    @model_validator(mode="after")
    def check_license(self) -> "SoftwareEnrichment":
        if self.license and self.is_source_available is not True:
            raise ValueError(f"'{self.name}' has a license but is not marked source-available")
        return self


class DisambiguationResult(BaseSchema):
    clusters: List[MentionCluster] = Field(default_factory=list)
    unique_names: int = Field(0, ge=0, description="クラスタリング前のユニーク表記数")

    def cluster_of(self) -> Dict[str, MentionCluster]:
        return {member.surface: cluster for cluster in self.clusters for member in cluster.members}

"""パイプライン各段階のマニフェスト（再現性の記録）"""
from typing import Dict, Union

from pydantic import Field

from app.schemas.base import ARTIFACT_FORMAT_VERSION, BaseSchema

SummaryValue = Union[int, float, str]


class PipelineManifest(BaseSchema):
    """段階ごとに manifests/<stage>.json として書き出す。時刻は含めない。"""

    stage: str = Field(..., description="段階名")
    format_version: str = Field(ARTIFACT_FORMAT_VERSION, description="成果物の書式バージョン")
    versions: Dict[str, str] = Field(default_factory=dict, description="パッケージとライブラリのバージョン")
    config_hash: str = Field(..., description="設定の SHA-256")
    seed: int = Field(42, description="乱数シード")
    inputs: Dict[str, str] = Field(default_factory=dict, description="入力ファイルの SHA-256")
    outputs: Dict[str, str] = Field(default_factory=dict, description="出力ファイルの SHA-256")
    summary: Dict[str, SummaryValue] = Field(default_factory=dict, description="段階の集計値")

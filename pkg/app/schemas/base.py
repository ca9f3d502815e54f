"""共通のスキーマベースクラス"""
from pydantic import BaseModel, ConfigDict


# 成果物ファイルの書式バージョン（互換性のない変更で上げる）
ARTIFACT_FORMAT_VERSION = "1"


class BaseSchema(BaseModel):
    """パイプライン内で受け渡すレコードのベーススキーマ

    レコードは生成後に変更しない。更新が必要な場合は model_copy(update=...) を使う。
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

import hashlib
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import Field, ValidationInfo, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.errors import ConfigurationError
from app.schemas.tagging import TrainingConfig


class Settings(BaseSettings):
    PROJECT_NAME: str = "Software Mention KG"
    VERSION: str = "0.1.0"

    # Run registry (kept outside output_dir so artifacts stay byte-identical)
    DATABASE_URL: str = "sqlite:///./data/pipeline_runs.db"

    LOG_LEVEL: str = "INFO"

    class Config:
        env_file = ".env"
        extra = "ignore"  # Ignore extra fields


settings = Settings()


class PipelineConfig(BaseSettings):
    """Configuration of one pipeline run.

    The config file is a key-value dotenv file (``SMKG_CORPUS_DIR=data/corpus``);
    nested training settings use ``__`` (``SMKG_GSC_CFG__EPOCHS=22``).
    Environment variables override the file, CLI flags override both.
    """

    model_config = SettingsConfigDict(
        env_prefix="SMKG_",
        env_nested_delimiter="__",
        extra="ignore",
    )

    corpus_dir: Optional[Path] = None
    corpus_manifest_path: Optional[Path] = None
    kb_dictionary_path: Optional[Path] = None
    english_wordlist_path: Optional[Path] = None
    exact_rules_path: Optional[Path] = None
    negative_list_path: Optional[Path] = None
    enrichment_path: Optional[Path] = None
    kb_export_path: Optional[Path] = None
    gsc_train_path: Optional[Path] = None
    gsc_test_path: Optional[Path] = None
    mm_headings_path: Optional[Path] = None
    stopwords_path: Optional[Path] = None

    ssc_cfg: TrainingConfig = Field(default_factory=TrainingConfig.ssc_defaults)
    gsc_cfg: TrainingConfig = Field(default_factory=TrainingConfig.gsc_defaults)

    output_dir: Path = Path("output")
    seed: int = 42
    jobs: int = Field(1, ge=1)
    top_k: Optional[int] = Field(None, ge=1)
    max_candidate_length: int = Field(6, ge=1)

    @field_validator("ssc_cfg", "gsc_cfg", mode="before")
    @classmethod
    def fill_stage_defaults(cls, value: Any, info: ValidationInfo) -> Any:
        # a partial nested override keeps the other stage-specific defaults
        if isinstance(value, dict):
            defaults = TrainingConfig.ssc_defaults if info.field_name == "ssc_cfg" else TrainingConfig.gsc_defaults
            return defaults(**value)
        return value

    @classmethod
    def load(cls, config_file: Optional[Path] = None, **overrides: Any) -> "PipelineConfig":
        """Read the config file (if any) and apply flag overrides on top"""
        if config_file is not None and not Path(config_file).exists():
            raise ConfigurationError(f"config file not found: {config_file}")
        config = cls(_env_file=config_file) if config_file else cls()
        return config.with_overrides(**overrides)

    def with_overrides(self, **overrides: Any) -> "PipelineConfig":
        """Return a validated copy; keys like ``gsc_cfg__epochs`` reach nested configs"""
        values: Dict[str, Any] = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            if "__" in key:
                outer, inner = key.split("__", 1)
                values[outer] = {**values[outer], inner: value}
            else:
                values[key] = value
        # init kwargs take precedence over environment and dotenv sources
        return type(self)(_env_file=None, **values)

    def referenced_paths(self) -> Dict[str, Path]:
        paths = {}
        for name in type(self).model_fields:
            value = getattr(self, name)
            if name.endswith(("_path", "_dir")) and name != "output_dir" and value is not None:
                paths[name] = Path(value)
        return paths

    def validate_paths(self, names: Optional[List[str]] = None) -> None:
        missing = [
            f"{name}={path}"
            for name, path in self.referenced_paths().items()
            if (names is None or name in names) and not path.exists()
        ]
        if missing:
            raise ConfigurationError(f"referenced paths do not exist: {', '.join(missing)}")

    def config_hash(self) -> str:
        # output_dir and jobs do not change artifact contents
        payload = self.model_dump_json(exclude={"output_dir", "jobs"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

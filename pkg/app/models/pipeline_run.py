from sqlalchemy import Column, DateTime, Integer, String, Text
from sqlalchemy.sql import func

from app.db.base import Base


class PipelineRun(Base):
    __tablename__ = "pipeline_runs"

    id = Column(Integer, primary_key=True, index=True)
    stage = Column(String(32), nullable=False, index=True)
    status = Column(String(16), nullable=False)  # "running", "succeeded", "failed"
    config_hash = Column(String(64), nullable=False)
    output_dir = Column(String(500))
    manifest_path = Column(String(500))
    error = Column(Text)

    # Timestamps
    started_at = Column(DateTime(timezone=True), server_default=func.now())
    finished_at = Column(DateTime(timezone=True))

"""Service recording stage invocations in the SQLite run registry"""
import logging
from datetime import datetime, timezone
from typing import List, Optional

from sqlalchemy.orm import Session, sessionmaker

from app.db.session import make_session_factory
from app.models.pipeline_run import PipelineRun

logger = logging.getLogger(__name__)

STATUS_RUNNING = "running"
STATUS_SUCCEEDED = "succeeded"
STATUS_FAILED = "failed"


class PipelineRunRegistry:
    def __init__(self, session_factory: Optional[sessionmaker] = None, database_url: Optional[str] = None):
        if session_factory is None:
            session_factory = make_session_factory(database_url) if database_url else make_session_factory()
        self.session_factory = session_factory

    def _session(self) -> Session:
        return self.session_factory()

    def start(self, stage: str, config_hash: str, output_dir: str) -> int:
        db = self._session()
        try:
            run = PipelineRun(stage=stage, status=STATUS_RUNNING, config_hash=config_hash, output_dir=output_dir)
            db.add(run)
            db.commit()
            db.refresh(run)
            return run.id
        finally:
            db.close()

    def finish(
        self,
        run_id: int,
        succeeded: bool,
        manifest_path: Optional[str] = None,
        error: Optional[str] = None,
    ) -> None:
        db = self._session()
        try:
            run = db.query(PipelineRun).filter(PipelineRun.id == run_id).first()
            if run is None:
                logger.warning("Run %d not found in registry", run_id)
                return
            run.status = STATUS_SUCCEEDED if succeeded else STATUS_FAILED
            run.manifest_path = manifest_path
            run.error = error
            run.finished_at = datetime.now(timezone.utc)
            db.commit()
        finally:
            db.close()

    def recent(self, stage: Optional[str] = None, limit: int = 20) -> List[PipelineRun]:
        db = self._session()
        try:
            query = db.query(PipelineRun)
            if stage is not None:
                query = query.filter(PipelineRun.stage == stage)
            runs = query.order_by(PipelineRun.id.desc()).limit(limit).all()
            db.expunge_all()
            return runs
        finally:
            db.close()

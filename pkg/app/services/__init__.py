from .disambiguation_service import DisambiguationService
from .ingest_service import IngestService
from .pipeline_service import PipelineService
from .run_registry import PipelineRunRegistry
from .silver_corpus_service import WeakSupervisionService
from .tagging_service import TaggingService

__all__ = [
    "DisambiguationService",
    "IngestService",
    "PipelineService",
    "PipelineRunRegistry",
    "WeakSupervisionService",
    "TaggingService",
]

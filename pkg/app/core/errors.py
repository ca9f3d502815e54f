"""Exception hierarchy shared by every pipeline stage"""
from typing import List, Optional


class PipelineError(Exception):
    """Base class for all expected pipeline failures"""


class ConfigurationError(PipelineError):
    pass


class ArticleParseError(PipelineError):
    def __init__(self, message: str, byte_offset: Optional[int] = None):
        self.byte_offset = byte_offset
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)


class NoContentError(PipelineError):
    def __init__(self, source: str = ""):
        self.source = source
        super().__init__(f"no content: {source}" if source else "no content")


class NoSignalError(PipelineError):
    def __init__(self):
        super().__init__("no signal: every labeling function abstained on every candidate")


class UnknownLabelingFunctionError(PipelineError):
    def __init__(self, lf_id: str):
        self.lf_id = lf_id
        super().__init__(f"vote from unregistered labeling function '{lf_id}'")


class LabelModelError(PipelineError):
    pass


class TrainingError(PipelineError):
    pass


class NumericalError(PipelineError):
    pass


class EvaluationError(PipelineError):
    pass


class OverlappingSpansError(EvaluationError):
    pass


class GraphBuildError(PipelineError):
    pass


class QuerySyntaxError(PipelineError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{message} at line {line}, column {column}")


class UnsupportedFeatureError(QuerySyntaxError):
    def __init__(self, feature: str, line: int = 0, column: int = 0):
        self.feature = feature
        super().__init__(f"unsupported feature {feature}", line, column)


class MissingEnrichmentError(PipelineError):
    def __init__(self):
        super().__init__(
            "availability analysis needs enrichment data; "
            "load the enrichment file (SMKG_ENRICHMENT_PATH / --enrichment)"
        )


class StageOrderError(PipelineError):
    def __init__(self, stage: str, missing: List[str]):
        self.stage = stage
        self.missing = missing
        super().__init__(
            f"stage '{stage}' is missing required artifacts: {', '.join(missing)}"
        )


class CorpusFormatError(PipelineError):
    def __init__(self, message: str, source: str = "", line: int = 0):
        self.source = source
        self.line = line
        super().__init__(f"{source}:{line}: {message}" if source else message)

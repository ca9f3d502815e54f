from .corpus import Document, Sentence, Token
from .disambiguation import DisambiguationResult, KbEntry, MentionCluster
from .evaluation import EvalMode, Metrics, Span
from .graph import GraphStatistics, Iri, Literal, Triple, TripleGraph
from .pipeline import PipelineManifest
from .query import ResultTable, SelectQuery
from .tagging import BioTag, Mention, TaggedDocument, TrainingConfig
from .weak_supervision import Candidate, LabelModel, Vote

__all__ = [
    "Document",
    "Sentence",
    "Token",
    "DisambiguationResult",
    "KbEntry",
    "MentionCluster",
    "EvalMode",
    "Metrics",
    "Span",
    "GraphStatistics",
    "Iri",
    "Literal",
    "Triple",
    "TripleGraph",
    "PipelineManifest",
    "ResultTable",
    "SelectQuery",
    "BioTag",
    "Mention",
    "TaggedDocument",
    "TrainingConfig",
    "Candidate",
    "LabelModel",
    "Vote",
]

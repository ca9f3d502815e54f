"""ナレッジグラフの値型（IRI・リテラル・トリプル）とインデックス付きトリプル集合"""
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple, Union

from pydantic import Field

from app.core.errors import GraphBuildError
from app.core.vocabulary import PROPERTIES, XSD_STRING
from app.schemas.base import BaseSchema

ABSOLUTE_IRI_RE = re.compile(r'^[A-Za-z][A-Za-z0-9+.\-]*:[^\s<>"{}|^`\\]*$')


@dataclass(frozen=True, order=True)
class Iri:
    value: str

    def __post_init__(self):
        if not ABSOLUTE_IRI_RE.match(self.value):
            raise ValueError(f"not an absolute IRI: {self.value!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Literal:
    value: str
    # None is a plain (xsd:string) literal
    datatype: Optional[str] = None

    def __post_init__(self):
        if self.datatype == XSD_STRING:
            object.__setattr__(self, "datatype", None)
        if self.datatype is not None and not ABSOLUTE_IRI_RE.match(self.datatype):
            raise ValueError(f"literal datatype is not an absolute IRI: {self.datatype!r}")

    def __str__(self) -> str:
        return self.value


Term = Union[Iri, Literal]


def term_sort_key(term: Term) -> Tuple[int, str, str]:
    if isinstance(term, Iri):
        return (0, term.value, "")
    return (1, term.value, term.datatype or "")


@dataclass(frozen=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: Term

    def __post_init__(self):
        if not isinstance(self.subject, Iri) or not isinstance(self.predicate, Iri):
            raise ValueError("subject and predicate must be IRIs")
        if not isinstance(self.object, (Iri, Literal)):
            raise ValueError(f"object must be an IRI or a literal, got {type(self.object).__name__}")

    def sort_key(self) -> Tuple:
        return (self.subject.value, self.predicate.value, term_sort_key(self.object))


@dataclass
class TripleGraph:
    """Set of triples with subject / predicate / object indexes.

    Built by a single writer; treat it as read-only once construction finishes.
    """

    triples: Set[Triple] = field(default_factory=set)
    by_subject: Dict[Iri, Set[Triple]] = field(default_factory=lambda: defaultdict(set), repr=False)
    by_predicate: Dict[Iri, Set[Triple]] = field(default_factory=lambda: defaultdict(set), repr=False)
    by_object: Dict[Term, Set[Triple]] = field(default_factory=lambda: defaultdict(set), repr=False)

    @classmethod
    def of(cls, triples: Iterable[Triple]) -> "TripleGraph":
        graph = cls()
        for triple in triples:
            graph.add(triple)
        return graph

    def add(self, triple: Triple) -> None:
        if triple.predicate.value not in PROPERTIES:
            raise GraphBuildError(f"predicate <{triple.predicate.value}> is not part of the data model")
        if triple in self.triples:
            return
        self.triples.add(triple)
        self.by_subject[triple.subject].add(triple)
        self.by_predicate[triple.predicate].add(triple)
        self.by_object[triple.object].add(triple)

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(sorted(self.triples, key=Triple.sort_key))

    def __contains__(self, triple: object) -> bool:
        return triple in self.triples

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TripleGraph):
            return NotImplemented
        return self.triples == other.triples

    def _candidates(
        self, subject: Optional[Iri], predicate: Optional[Iri], obj: Optional[Term]
    ) -> Set[Triple]:
        pools = []
        if subject is not None:
            pools.append(self.by_subject.get(subject, set()))
        if predicate is not None:
            pools.append(self.by_predicate.get(predicate, set()))
        if obj is not None:
            pools.append(self.by_object.get(obj, set()))
        if not pools:
            return self.triples
        return min(pools, key=len)

    def match(
        self,
        subject: Optional[Iri] = None,
        predicate: Optional[Iri] = None,
        obj: Optional[Term] = None,
    ) -> List[Triple]:
        """Triples matching the bound positions (None is a wildcard)"""
        return [
            t for t in self._candidates(subject, predicate, obj)
            if (subject is None or t.subject == subject)
            and (predicate is None or t.predicate == predicate)
            and (obj is None or t.object == obj)
        ]

    def estimate(
        self,
        subject: Optional[Iri] = None,
        predicate: Optional[Iri] = None,
        obj: Optional[Term] = None,
    ) -> int:
        """Upper bound on the number of matches: size of the smallest index bucket"""
        return len(self._candidates(subject, predicate, obj))

    def objects(self, subject: Iri, predicate: Iri) -> List[Term]:
        return sorted((t.object for t in self.match(subject, predicate)), key=term_sort_key)

    def type_census(self, rdf_type: Iri) -> Counter:
        return Counter(t.object for t in self.by_predicate.get(rdf_type, ()))


class GraphStatistics(BaseSchema):
    triples: int = Field(0, ge=0, description="トリプル数")
    resources: int = Field(0, ge=0, description="型付きリソース数")
    types: Dict[str, int] = Field(default_factory=dict, description="型ごとのリソース数")
    properties: Dict[str, int] = Field(default_factory=dict, description="プロパティごとのトリプル数")

"""Materializing publications, mentions and software entities as a triple graph"""
import hashlib
import json
import logging
import re
from collections import Counter
from typing import Dict, List, Optional, Sequence
from urllib.parse import quote

import rdflib

from app.core import vocabulary as v
from app.core.errors import GraphBuildError
from app.schemas.corpus import AuthorRef, Document
from app.schemas.disambiguation import DisambiguationResult, MentionCluster, SoftwareEnrichment
from app.schemas.graph import GraphStatistics, Iri, Literal, Term, Triple, TripleGraph
from app.schemas.tagging import Mention
from app.services.disambiguation_service import enrichment_for

logger = logging.getLogger(__name__)

WIKIDATA_ID_RE = re.compile(r"^Q\d+$")
RDF_TYPE = Iri(v.RDF_TYPE)


def mint_iri(kind: str, key: str) -> Iri:
    """Stable resource IRI: hash of the resource type and its natural key"""
    digest = hashlib.sha256(f"{kind}\x1f{key}".encode("utf-8")).hexdigest()[:16]
    return Iri(f"{v.SKG}{kind}/{digest}")


def _normalize_name(name: str) -> str:
    return " ".join(name.casefold().split())


def _external_iri(value: str, base: str) -> Optional[Iri]:
    value = value.strip()
    if not value:
        return None
    if not re.match(r"^[A-Za-z][A-Za-z0-9+.\-]*:", value):
        value = base + value
    try:
        return Iri(quote(value, safe=":/?#[]@!$&'()*+,;=%~"))
    except ValueError:
        logger.warning("Skipping unusable link %r", value)
        return None


class KnowledgeGraphBuilder:
    """Single-writer fold of pipeline records into a TripleGraph"""

    def __init__(self):
        self.graph = TripleGraph()

    def _add(self, subject: Iri, predicate: str, obj: Term) -> None:
        self.graph.add(Triple(subject, Iri(predicate), obj))

    def _typed(self, kind: str, key: str) -> Iri:
        iri = mint_iri(kind, key)
        self._add(iri, v.RDF_TYPE, Iri(v.RESOURCE_TYPES[kind]))
        return iri

    def organization(self, name: str) -> Iri:
        key = _normalize_name(name)
        if not key:
            raise GraphBuildError("organization without a name")
        iri = self._typed("organization", key)
        self._add(iri, v.NAME, Literal(name.strip()))
        return iri

    def author(self, author: AuthorRef) -> Iri:
        key = _normalize_name(author.name)
        if not key:
            raise GraphBuildError(f"author record {author!r} has no name")
        iri = self._typed("author", f"{key}\x1f{author.orcid or ''}")
        self._add(iri, v.NAME, Literal(author.name.strip()))
        if author.orcid:
            self._add(iri, v.IDENTIFIER, Literal(author.orcid))
        if author.affiliation:
            self._add(iri, v.AFFILIATION, self.organization(author.affiliation))
        return iri

    def publication(self, doc: Document) -> Iri:
        if not doc.id.strip():
            raise GraphBuildError(f"publication from '{doc.source_path}' has no id")
        iri = self._typed("publication", doc.id)
        if doc.title:
            self._add(iri, v.TITLE, Literal(doc.title))
        if doc.doi:
            self._add(iri, v.DOI, Literal(doc.doi))
        if doc.year is not None:
            self._add(iri, v.DATE, Literal(str(doc.year)))
        if doc.publisher:
            self._add(iri, v.PUBLISHER, self.organization(doc.publisher))
        for author in doc.authors:
            self._add(iri, v.AUTHOR_OF, self.author(author))
        for same_as in doc.same_as:
            link = _external_iri(same_as, v.DOI_RESOLVER)
            if link is not None:
                self._add(iri, v.SAME_AS, link)
        return iri

    def software(self, cluster: MentionCluster, enrichment: Optional[SoftwareEnrichment]) -> Iri:
        key = f"kb:{cluster.kb_id}" if cluster.kb_id else f"name:{_normalize_name(cluster.representative_name)}"
        iri = self._typed("software", key)
        self._add(iri, v.NAME, Literal(cluster.representative_name))
        if cluster.kb_id:
            self._add(iri, v.IDENTIFIER, Literal(cluster.kb_id))
            if WIKIDATA_ID_RE.match(cluster.kb_id):
                self._add(iri, v.SAME_AS, Iri(v.WIKIDATA_ENTITY + cluster.kb_id))
        if enrichment is None:
            return iri
        if enrichment.manufacturer:
            self._add(iri, v.PUBLISHER, self.organization(enrichment.manufacturer))
        if enrichment.url:
            homepage = _external_iri(enrichment.url, "http://")
            if homepage is not None:
                self._add(iri, v.URL, homepage)
        if enrichment.license:
            self._add(iri, v.LICENSE, Literal(enrichment.license))
        if enrichment.is_free is not None:
            self._add(iri, v.IS_FREE, Literal(str(enrichment.is_free).lower(), v.XSD_BOOLEAN))
        if enrichment.is_source_available is not None:
            self._add(
                iri, v.IS_SOURCE_AVAILABLE,
                Literal(str(enrichment.is_source_available).lower(), v.XSD_BOOLEAN),
            )
        for value, base in (
            (enrichment.wikidata_id, v.WIKIDATA_ENTITY),
            (enrichment.wikipedia_id, v.WIKIPEDIA_PAGE),
            (enrichment.software_ontology_id, v.SOFTWARE_ONTOLOGY),
        ):
            if value:
                link = _external_iri(value, base)
                if link is not None:
                    self._add(iri, v.SAME_AS, link)
        return iri

    def mention(self, mention: Mention, publication: Iri, software: Optional[Iri]) -> Iri:
        iri = self._typed("mention", f"{mention.doc_id}\x1f{mention.char_start}\x1f{mention.char_end}")
        self._add(publication, v.MENTIONS, iri)
        self._add(iri, v.IS_STRING, Literal(mention.surface))
        self._add(iri, v.BEGIN_INDEX, Literal(str(mention.char_start), v.XSD_INTEGER))
        self._add(iri, v.END_INDEX, Literal(str(mention.char_end), v.XSD_INTEGER))
        if software is not None:
            self._add(iri, v.SOFTWARE_LINK, software)
        return iri


def build_graph(
    pubs: Sequence[Document],
    mentions: Sequence[Mention],
    disambiguation: DisambiguationResult,
    enrichment: Optional[Dict[str, SoftwareEnrichment]] = None,
) -> TripleGraph:
    enrichment = enrichment or {}
    builder = KnowledgeGraphBuilder()
    publications = {doc.id: builder.publication(doc) for doc in pubs}

    software: Dict[str, Iri] = {}
    for cluster in disambiguation.clusters:
        iri = builder.software(cluster, enrichment_for(cluster, enrichment))
        for surface in cluster.surfaces:
            software[surface] = iri

    unlinked = 0
    for mention in mentions:
        if mention.doc_id not in publications:
            raise GraphBuildError(
                f"mention '{mention.surface}' at {mention.char_start}:{mention.char_end} "
                f"refers to unknown publication '{mention.doc_id}'"
            )
        target = software.get(mention.surface)
        unlinked += target is None
        builder.mention(mention, publications[mention.doc_id], target)
    if unlinked:
        logger.warning("%d mentions have no software cluster", unlinked)

    graph = builder.graph
    stats = graph_statistics(graph)
    logger.info("Built graph: %d triples, %d resources, types %s",
                stats.triples, stats.resources, stats.types)
    return graph


def graph_statistics(g: TripleGraph) -> GraphStatistics:
    types = g.type_census(RDF_TYPE)
    return GraphStatistics(
        triples=len(g),
        resources=len({t.subject for t in g.by_predicate.get(RDF_TYPE, ())}),
        types={v.compact(t.value): n for t, n in sorted(types.items(), key=lambda kv: str(kv[0]))},
        properties=dict(sorted(Counter(v.compact(t.predicate.value) for t in g.triples).items())),
    )


# --- N-Triples -------------------------------------------------------------

_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape(text: str) -> str:
    out = []
    for ch in text:
        code = ord(ch)
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif code < 0x20 or 0x7F <= code <= 0xFFFF:
            out.append(f"\\u{code:04X}")
        elif code > 0xFFFF:
            out.append(f"\\U{code:08X}")
        else:
            out.append(ch)
    return "".join(out)


def _iri_ntriples(iri: Iri) -> str:
    return f"<{_escape(iri.value)}>"


def _term_ntriples(term: Term) -> str:
    if isinstance(term, Iri):
        return _iri_ntriples(term)
    text = f'"{_escape(term.value)}"'
    if term.datatype is not None:
        text += f"^^<{_escape(term.datatype)}>"
    return text


def ntriples_line(t: Triple) -> str:
    return f"{_iri_ntriples(t.subject)} {_iri_ntriples(t.predicate)} {_term_ntriples(t.object)} ."


def serialize_ntriples(g: TripleGraph) -> bytes:
    """One ASCII line per triple, sorted, so rebuilds are byte-identical"""
    lines = sorted(ntriples_line(t) for t in g.triples)
    return "".join(f"{line}\n" for line in lines).encode("ascii")


def _from_rdflib(term) -> Term:
    if isinstance(term, rdflib.URIRef):
        return Iri(str(term))
    if isinstance(term, rdflib.Literal):
        if term.language:
            raise GraphBuildError(f"language-tagged literal {term!r} is not part of the data model")
        return Literal(str(term), str(term.datatype) if term.datatype is not None else None)
    raise GraphBuildError(f"blank node {term!r} is not part of the data model")


def from_rdflib(rdf: rdflib.Graph) -> TripleGraph:
    return TripleGraph.of(
        Triple(_from_rdflib(s), _from_rdflib(p), _from_rdflib(o)) for s, p, o in rdf
    )


def parse_ntriples(data: bytes) -> TripleGraph:
    rdf = rdflib.Graph()
    rdf.parse(data=data.decode("utf-8"), format="nt")
    return from_rdflib(rdf)


# --- JSON-LD ---------------------------------------------------------------

def _jsonld_value(term: Term):
    if isinstance(term, Iri):
        return {"@id": v.compact(term.value)}
    if term.datatype is None:
        return term.value
    return {"@value": term.value, "@type": v.compact(term.datatype)}


def serialize_jsonld(g: TripleGraph) -> bytes:
    """Compacted document: built-in context plus one node object per subject"""
    nodes: Dict[str, Dict[str, List]] = {}
    for t in g:
        node = nodes.setdefault(t.subject.value, {"@id": v.compact(t.subject.value)})
        if t.predicate == RDF_TYPE and isinstance(t.object, Iri):
            node.setdefault("@type", []).append(v.compact(t.object.value))
        else:
            node.setdefault(v.compact(t.predicate.value), []).append(_jsonld_value(t.object))

    graph = []
    for subject in sorted(nodes):
        node = nodes[subject]
        graph.append({
            key: values[0] if isinstance(values, list) and len(values) == 1 else values
            for key, values in node.items()
        })
    document = {"@context": dict(sorted(v.JSONLD_CONTEXT.items())), "@graph": graph}
    return (json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def parse_jsonld(data: bytes) -> TripleGraph:
    rdf = rdflib.Graph()
    rdf.parse(data=data.decode("utf-8"), format="json-ld")
    return from_rdflib(rdf)

"""Namespaces, classes and properties of the knowledge graph data model"""
from typing import Dict, FrozenSet

SCHEMA = "http://schema.org/"
SKG = "http://data.gesis.org/softwarekg/"
NIF = "http://persistence.uni-leipzig.org/nlp2rdf/ontologies/nif-core#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
DC = "http://purl.org/dc/elements/1.1/"
XSD = "http://www.w3.org/2001/XMLSchema#"

# Built-in prefix table; queries may use these without declaring them
PREFIXES: Dict[str, str] = {
    "schema": SCHEMA,
    "skg": SKG,
    "nif": NIF,
    "rdf": RDF,
    "dc": DC,
}

# JSON-LD context also needs xsd for typed literals
JSONLD_CONTEXT: Dict[str, str] = {**PREFIXES, "xsd": XSD}

XSD_STRING = XSD + "string"
XSD_INTEGER = XSD + "integer"
XSD_BOOLEAN = XSD + "boolean"

RDF_TYPE = RDF + "type"

# resource types
SOFTWARE = SCHEMA + "SoftwareApplication"
PUBLICATION = SCHEMA + "ScholarlyArticle"
AUTHOR = SCHEMA + "Person"
ORGANIZATION = SCHEMA + "Organization"
MENTION = NIF + "String"

RESOURCE_TYPES: Dict[str, str] = {
    "software": SOFTWARE,
    "publication": PUBLICATION,
    "author": AUTHOR,
    "organization": ORGANIZATION,
    "mention": MENTION,
}

# properties
NAME = SCHEMA + "name"
SAME_AS = SCHEMA + "sameAs"
PUBLISHER = SCHEMA + "publisher"
URL = SCHEMA + "url"
LICENSE = SCHEMA + "license"
IDENTIFIER = SCHEMA + "identifier"
AUTHOR_OF = SCHEMA + "author"
AFFILIATION = SCHEMA + "affiliation"
MENTIONS = SCHEMA + "mentions"
TITLE = DC + "title"
DATE = DC + "date"
DOI = DC + "identifier"
IS_STRING = NIF + "isString"
BEGIN_INDEX = NIF + "beginIndex"
END_INDEX = NIF + "endIndex"
SOFTWARE_LINK = SKG + "software"
IS_FREE = SKG + "isFree"
IS_SOURCE_AVAILABLE = SKG + "isSourceAvailable"

PROPERTIES: FrozenSet[str] = frozenset({
    RDF_TYPE,
    NAME,
    SAME_AS,
    PUBLISHER,
    URL,
    LICENSE,
    IDENTIFIER,
    AUTHOR_OF,
    AFFILIATION,
    MENTIONS,
    TITLE,
    DATE,
    DOI,
    IS_STRING,
    BEGIN_INDEX,
    END_INDEX,
    SOFTWARE_LINK,
    IS_FREE,
    IS_SOURCE_AVAILABLE,
})

WIKIDATA_ENTITY = "http://www.wikidata.org/entity/"
WIKIPEDIA_PAGE = "https://en.wikipedia.org/wiki/"
SOFTWARE_ONTOLOGY = "http://www.ebi.ac.uk/swo/"
DOI_RESOLVER = "https://doi.org/"


def compact(iri: str) -> str:
    """Shortest `prefix:local` form of an IRI, or the IRI itself"""
    best = iri
    for prefix, namespace in JSONLD_CONTEXT.items():
        if iri.startswith(namespace) and len(iri) > len(namespace):
            candidate = f"{prefix}:{iri[len(namespace):]}"
            if len(candidate) < len(best):
                best = candidate
    return best

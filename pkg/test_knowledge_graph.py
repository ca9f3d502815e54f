"""Tests for knowledge graph construction and its N-Triples / JSON-LD serializations"""
import json
import random

import pytest

from app.core import vocabulary as v
from app.core.errors import GraphBuildError
from app.schemas.corpus import AuthorRef, Document
from app.schemas.graph import Iri, Literal, Triple, TripleGraph
from app.schemas.tagging import Mention
from app.services.disambiguation_service import DisambiguationService, load_enrichment, load_kb_export
from app.services.ingest_service import IngestService
from app.services.knowledge_graph_service import (
    build_graph,
    graph_statistics,
    mint_iri,
    ntriples_line,
    parse_jsonld,
    parse_ntriples,
    serialize_jsonld,
    serialize_ntriples,
)
from app.services.sample_data import N_ARTICLES, SOFTWARE

DOC = Document(
    id="10.1371/journal.test.0001",
    title="A cohort study",
    year=2012,
    doi="10.1371/journal.test.0001",
    publisher="PLOS",
    authors=[AuthorRef(name="Kenji Sato", orcid="https://orcid.org/0000-0002-1825-0097", affiliation="University of Tsukuba")],
    same_as=["10.1371/journal.test.0001"],
    text="We used SPSS here.",
)


def _mention(doc_id="10.1371/journal.test.0001", surface="SPSS", start=8):
    return Mention(
        doc_id=doc_id, sentence_index=0, token_start=2, token_end=3, surface=surface,
        char_start=start, char_end=start + len(surface),
    )


def _disambiguated(mentions, sample_root):
    kb, _ = load_kb_export(sample_root / "kb" / "export.tsv")
    return DisambiguationService(kb).disambiguate(mentions)


def test_iris_are_stable_and_typed():
    """Test that minted IRIs depend only on the resource type and key"""
    assert mint_iri("software", "kb:Q1") == mint_iri("software", "kb:Q1")
    assert mint_iri("software", "kb:Q1") != mint_iri("publication", "kb:Q1")
    assert mint_iri("mention", "x").value.startswith(v.SKG + "mention/")


def test_publication_mention_software_chain(sample_root):
    """Test the triples linking a publication to a software entity through a mention"""
    mention = _mention()
    result = _disambiguated([mention], sample_root)
    enrichment = load_enrichment(sample_root / "kb" / "enrichment.tsv")
    g = build_graph([DOC], [mention], result, enrichment)

    publication = mint_iri("publication", DOC.id)
    mention_iri = mint_iri("mention", f"{DOC.id}\x1f8\x1f12")
    software = mint_iri("software", "kb:Q900001")
    expected = {
        Triple(publication, Iri(v.MENTIONS), mention_iri),
        Triple(mention_iri, Iri(v.SOFTWARE_LINK), software),
        Triple(mention_iri, Iri(v.IS_STRING), Literal("SPSS")),
        Triple(mention_iri, Iri(v.BEGIN_INDEX), Literal("8", v.XSD_INTEGER)),
        Triple(mention_iri, Iri(v.END_INDEX), Literal("12", v.XSD_INTEGER)),
        Triple(software, Iri(v.NAME), Literal("SPSS")),
        Triple(software, Iri(v.IDENTIFIER), Literal("Q900001")),
        Triple(software, Iri(v.SAME_AS), Iri(v.WIKIDATA_ENTITY + "Q900001")),
        Triple(software, Iri(v.IS_FREE), Literal("false", v.XSD_BOOLEAN)),
        Triple(publication, Iri(v.DATE), Literal("2012")),
        Triple(publication, Iri(v.SAME_AS), Iri("https://doi.org/10.1371/journal.test.0001")),
    }
    assert expected <= g.triples

    author = g.objects(publication, Iri(v.AUTHOR_OF))
    assert len(author) == 1
    organization = g.objects(author[0], Iri(v.AFFILIATION))[0]
    assert g.objects(organization, Iri(v.NAME)) == [Literal("University of Tsukuba")]

    stats = graph_statistics(g)
    assert stats.types == {
        "nif:String": 1,
        "schema:Organization": 3,
        "schema:Person": 1,
        "schema:ScholarlyArticle": 1,
        "schema:SoftwareApplication": 1,
    }
    assert stats.triples == len(g)
    assert sum(stats.properties.values()) == len(g)


def test_unknown_publication_and_predicate_are_rejected(sample_root):
    """Test graph build failures"""
    mention = _mention(doc_id="missing")
    with pytest.raises(GraphBuildError):
        build_graph([DOC], [mention], _disambiguated([mention], sample_root))
    with pytest.raises(GraphBuildError):
        TripleGraph().add(Triple(Iri(v.SKG + "a"), Iri(v.SCHEMA + "knows"), Iri(v.SKG + "b")))


def test_match_uses_the_indexes():
    """Test pattern matching with wildcards"""
    a, b = Iri(v.SKG + "a"), Iri(v.SKG + "b")
    g = TripleGraph.of([
        Triple(a, Iri(v.NAME), Literal("A")),
        Triple(b, Iri(v.NAME), Literal("B")),
        Triple(a, Iri(v.SAME_AS), b),
    ])
    assert len(g.match(predicate=Iri(v.NAME))) == 2
    assert g.match(a, Iri(v.SAME_AS)) == [Triple(a, Iri(v.SAME_AS), b)]
    assert g.match(obj=Literal("C")) == []
    assert g.estimate(subject=a) == 2


def test_ntriples_escapes():
    """Test string escaping in N-Triples lines"""
    triple = Triple(Iri(v.SKG + "a"), Iri(v.NAME), Literal('say "hi"\\\n\tcafé 😀'))
    line = ntriples_line(triple)
    assert line.endswith('"say \\"hi\\"\\\\\\n\\tcaf\\u00E9 \\U0001F600" .')
    assert parse_ntriples((line + "\n").encode("ascii")) == TripleGraph.of([triple])


def random_graph(n, seed):
    rng = random.Random(seed)
    alphabet = ["a", "Z", "0", " ", '"', "\\", "\n", "\t", "\r", "é", "日", "😀"]
    properties = sorted(v.PROPERTIES)
    triples = set()
    while len(triples) < n:
        subject = Iri(f"{v.SKG}node/{rng.randrange(200)}")
        predicate = Iri(rng.choice(properties))
        kind = rng.randrange(4)
        if kind == 0:
            obj = Iri(f"{v.SKG}node/{rng.randrange(200)}")
        elif kind == 1:
            obj = Literal("".join(rng.choice(alphabet) for _ in range(rng.randrange(8))))
        elif kind == 2:
            obj = Literal(str(rng.randrange(-1000, 1000)), v.XSD_INTEGER)
        else:
            obj = Literal(rng.choice(["true", "false"]), v.XSD_BOOLEAN)
        triples.add(Triple(subject, predicate, obj))
    return TripleGraph.of(triples)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ntriples_round_trip_of_random_graphs(seed):
    """Test that 1000 random triples survive serialization and parsing"""
    g = random_graph(1000, seed)
    data = serialize_ntriples(g)
    parsed = parse_ntriples(data)
    assert parsed == g
    assert serialize_ntriples(parsed) == data


@pytest.fixture(scope="module")
def fixture_graph(sample_root):
    docs = IngestService().load_corpus(sample_root / "corpus", sample_root / "corpus" / "manifest.tsv")
    mentions = []
    for doc in docs:
        for software in SOFTWARE:
            start = doc.text.find(software.name)
            if start >= 0:
                mentions.append(_mention(doc.id, software.name, start))
    result = _disambiguated(mentions, sample_root)
    enrichment = load_enrichment(sample_root / "kb" / "enrichment.tsv")
    return docs, mentions, build_graph(docs, mentions, result, enrichment)


def test_fixture_graph_counts(fixture_graph):
    """Test type and property counts against the records the graph was built from"""
    docs, mentions, g = fixture_graph
    stats = graph_statistics(g)
    assert stats.types["schema:ScholarlyArticle"] == N_ARTICLES == len(docs)
    assert stats.types["nif:String"] == len(mentions)
    assert stats.properties["schema:mentions"] == len(mentions)
    assert stats.properties["skg:software"] == len(mentions)
    assert stats.properties["dc:date"] == N_ARTICLES
    assert stats.types["schema:SoftwareApplication"] == len({m.surface for m in mentions})


def test_jsonld_and_ntriples_describe_the_same_graph(fixture_graph):
    """Test that both serializations parse back to the built graph"""
    _, _, g = fixture_graph
    document = json.loads(serialize_jsonld(g))
    assert document["@context"]["schema"] == v.SCHEMA
    assert parse_jsonld(serialize_jsonld(g)) == g
    assert parse_ntriples(serialize_ntriples(g)) == g
    assert serialize_ntriples(g) == serialize_ntriples(TripleGraph.of(reversed(list(g))))

"""Tests for the canned analyses over the knowledge graph"""
import pytest

from app.core import vocabulary as v
from app.core.errors import MissingEnrichmentError
from app.schemas.disambiguation import SoftwareEnrichment
from app.schemas.graph import Iri, Literal, Triple, TripleGraph
from app.services.analysis_service import (
    availability_bucket,
    availability_trend,
    mentions_per_year,
    successor_analysis,
    year_of,
)

SOFTWARE = {"SPSS": "Q900001", "WinBUGS": "Q900008", "OpenBUGS": "Q900009"}
MENTIONS = {
    "2009": ["WinBUGS", "WinBUGS", "SPSS"],
    "2010-06-01": ["WinBUGS", "OpenBUGS"],
    "2011": ["OpenBUGS", "OpenBUGS", "SPSS", "SPSS"],
}
ENRICHMENT = {
    "SPSS": SoftwareEnrichment(name="SPSS", is_free=False, is_source_available=False),
    "WinBUGS": SoftwareEnrichment(name="WinBUGS", is_free=True, is_source_available=False),
    "OpenBUGS": SoftwareEnrichment(name="OpenBUGS", is_free=True, is_source_available=True),
}


@pytest.fixture
def usage_graph():
    triples = []
    software = {}
    for name, kb_id in SOFTWARE.items():
        s = Iri(f"{v.SKG}software/{kb_id}")
        software[name] = s
        triples += [
            Triple(s, Iri(v.RDF_TYPE), Iri(v.SOFTWARE)),
            Triple(s, Iri(v.NAME), Literal(name)),
            Triple(s, Iri(v.IDENTIFIER), Literal(kb_id)),
        ]
    k = 0
    for i, (date, names) in enumerate(MENTIONS.items()):
        p = Iri(f"{v.SKG}publication/{i}")
        triples += [Triple(p, Iri(v.RDF_TYPE), Iri(v.PUBLICATION)), Triple(p, Iri(v.DATE), Literal(date))]
        for name in names:
            m = Iri(f"{v.SKG}mention/{k}")
            k += 1
            triples += [Triple(p, Iri(v.MENTIONS), m), Triple(m, Iri(v.SOFTWARE_LINK), software[name])]
    return TripleGraph.of(triples)


def test_year_of():
    """Test year extraction from date literals"""
    assert year_of("2009") == 2009
    assert year_of("2010-06-01") == 2010
    assert year_of("n.d.") is None


def test_mentions_per_year(usage_graph):
    """Test per-year counts ranked by frequency then name"""
    table = mentions_per_year(usage_graph)
    assert table.columns == ["software", "year", "count"]
    assert table.rows == [
        ("WinBUGS", 2009, 2),
        ("SPSS", 2009, 1),
        ("OpenBUGS", 2010, 1),
        ("WinBUGS", 2010, 1),
        ("OpenBUGS", 2011, 2),
        ("SPSS", 2011, 2),
    ]
    top = mentions_per_year(usage_graph, top_k=1)
    assert [row[0] for row in top.rows] == ["WinBUGS", "OpenBUGS", "OpenBUGS"]


def test_availability_buckets():
    """Test the open source > free > commercial precedence"""
    assert availability_bucket(ENRICHMENT["OpenBUGS"]) == "open_source"
    assert availability_bucket(ENRICHMENT["WinBUGS"]) == "free"
    assert availability_bucket(ENRICHMENT["SPSS"]) == "commercial"
    assert availability_bucket(SoftwareEnrichment(name="X")) == "unknown"
    assert availability_bucket(None) == "unknown"


def test_availability_trend(usage_graph):
    """Test yearly absolute counts per availability bucket"""
    table = availability_trend(usage_graph, ENRICHMENT)
    assert table.columns == ["year", "commercial", "free", "open_source", "unknown", "total"]
    assert table.rows == [
        (2009, 1, 2, 0, 0, 3),
        (2010, 0, 1, 1, 0, 2),
        (2011, 2, 0, 2, 0, 4),
    ]
    with pytest.raises(MissingEnrichmentError):
        availability_trend(usage_graph, None)
    with pytest.raises(MissingEnrichmentError):
        availability_trend(usage_graph, {})


def test_successor_analysis_zero_fills_years(usage_graph):
    """Test predecessor and successor counts side by side"""
    table = successor_analysis(usage_graph, [("Q900008", "Q900009")])
    assert table.rows == [
        ("WinBUGS", "OpenBUGS", 2009, 2, 0),
        ("WinBUGS", "OpenBUGS", 2010, 1, 1),
        ("WinBUGS", "OpenBUGS", 2011, 0, 2),
    ]
    assert successor_analysis(usage_graph, [("Q1", "Q2")]).rows == []


def test_analysis_csv(usage_graph, tmp_path):
    """Test that analysis tables are written as CSV"""
    path = mentions_per_year(usage_graph, top_k=1).write_csv(tmp_path / "analysis" / "usage.csv")
    assert path.read_bytes() == b"software,year,count\r\nWinBUGS,2009,2\r\nOpenBUGS,2010,1\r\nOpenBUGS,2011,2\r\n"


def test_availability_matches_enrichment_by_kb_id(usage_graph):
    """Test that an enrichment record keyed by another name is found through the KB id"""
    enrichment = {
        "IBM SPSS Statistics": SoftwareEnrichment(
            name="IBM SPSS Statistics", wikidata_id="Q900001", is_free=False, is_source_available=False
        ),
    }
    table = availability_trend(usage_graph, enrichment)
    commercial = {row[0]: row[1] for row in table.rows}
    unknown = {row[0]: row[4] for row in table.rows}
    assert commercial == {2009: 1, 2010: 0, 2011: 2}
    assert unknown == {2009: 2, 2010: 2, 2011: 2}

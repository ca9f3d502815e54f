"""Tests for name normalization, clustering and KB linking"""
import pytest
from pydantic import ValidationError

from app.core.errors import ConfigurationError
from app.schemas.disambiguation import KbEntry, MentionCluster, MentionString
from app.schemas.tagging import Mention
from app.services.disambiguation_service import (
    DisambiguationService,
    aggregate_mentions,
    cluster_mentions,
    enrichment_for,
    link_kb,
    load_enrichment,
    load_kb_export,
    make_abbreviation,
    normalize_mention,
    write_cluster_report,
)
from app.services.sample_data import SPSS_VARIANTS


def mentions_of(*surfaces, doc_id="doc1"):
    mentions, offset = [], 0
    for i, surface in enumerate(surfaces):
        mentions.append(
            Mention(
                doc_id=doc_id, sentence_index=i, token_start=0, token_end=1, surface=surface,
                char_start=offset, char_end=offset + len(surface),
            )
        )
        offset += len(surface) + 1
    return mentions


def test_normalization_drops_versions_and_marketing_syllables():
    """Test case folding, digit stripping and trailing syllable removal"""
    assert normalize_mention("SPSS 17.0") == normalize_mention("spss")
    assert normalize_mention("ImageJ Pro") == normalize_mention("ImageJ")
    assert normalize_mention("Pro") == "pro"
    assert normalize_mention("ATLAS.ti") == normalize_mention("Atlas ti")


def test_abbreviation_skips_stopwords():
    """Test abbreviations of multi-word names"""
    assert make_abbreviation("Statistical Package for the Social Sciences") == "SPSS"
    assert make_abbreviation("Stata") == "STATA"
    assert make_abbreviation("E-Prime") == "E-PRIME"
    assert make_abbreviation("Analysis of Functional NeuroImages") == "AFN"


def test_aggregate_counts_every_reference():
    """Test that identical surfaces are aggregated with their positions"""
    strings = aggregate_mentions(mentions_of("SPSS", "Stata", "SPSS"))
    assert [(s.surface, s.frequency) for s in strings] == [("SPSS", 2), ("Stata", 1)]
    assert strings[0].doc_refs == [("doc1", (0, 4)), ("doc1", (11, 15))]


def test_long_forms_fold_into_their_abbreviation_without_a_kb():
    """Test both clustering stages without KB evidence"""
    clusters = cluster_mentions(aggregate_mentions(mentions_of(*SPSS_VARIANTS)))
    by_surface = {s: c for c in clusters for s in c.surfaces}
    spss = by_surface["SPSS"]
    assert set(spss.surfaces) == {
        "SPSS",
        "Statistical Package for the Social Sciences",
        "Statistical Package for Social Sciences",
    }
    assert by_surface["IBM SPSS"] is not spss
    assert all(c.kb_id is None for c in clusters)


def test_spss_variants_collapse_into_one_linked_entity(sample_root):
    """Test that all five SPSS surface forms end up in one KB-linked cluster"""
    kb, _ = load_kb_export(sample_root / "kb" / "export.tsv")
    result = DisambiguationService(kb).disambiguate(mentions_of(*SPSS_VARIANTS, "Stata", "Stata 14"))
    assert result.unique_names == 7
    spss = result.cluster_of()["SPSS"]
    assert set(spss.surfaces) == set(SPSS_VARIANTS)
    assert spss.kb_id == "Q900001"
    assert spss.representative_name == "SPSS"
    stata = result.cluster_of()["Stata 14"]
    assert stata.kb_id == "Q900003" and set(stata.surfaces) == {"Stata", "Stata 14"}
    assert len(result.clusters) == 2


def test_ambiguous_names_stay_unlinked():
    """Test that a name matching two KB entries in one pass is not linked"""
    kb = [
        KbEntry(id="Q1", label="Prism"),
        KbEntry(id="Q2", label="GraphPad Prism", redirects=["Prism"]),
    ]
    clusters = cluster_mentions([MentionString(surface="Prism", frequency=1, doc_refs=[("d", (0, 5))])])
    linked = link_kb(clusters, kb)
    assert len(linked) == 1
    assert linked[0].ambiguous and linked[0].kb_id is None


def test_label_pass_requires_the_exact_string():
    """Test that a case variant skips the label pass and links through the alias pass"""
    kb = [
        KbEntry(id="Q1", label="Prism"),
        KbEntry(id="Q2", label="GraphPad Prism", aliases=[("PRISM", "en")]),
    ]
    lower = cluster_mentions([MentionString(surface="prism", frequency=1, doc_refs=[("d", (0, 5))])])
    assert [c.kb_id for c in link_kb(lower, kb)] == ["Q2"]

    exact = cluster_mentions([MentionString(surface="Prism", frequency=1, doc_refs=[("d", (0, 5))])])
    linked = link_kb(exact, kb)
    assert [c.kb_id for c in linked] == ["Q1"]
    assert not linked[0].ambiguous


def test_alias_and_developer_passes():
    """Test linking through aliases and developer-qualified names"""
    kb = [KbEntry(id="Q5", label="GraphPad Prism", developer="GraphPad Software", aliases=[("Prism 5", "en")])]
    strings = [
        MentionString(surface="Prism 5", frequency=1, doc_refs=[("d", (0, 7))]),
        MentionString(surface="GraphPad Software GraphPad Prism", frequency=1, doc_refs=[("d", (10, 41))]),
    ]
    linked = link_kb(cluster_mentions(strings), kb)
    assert [c.kb_id for c in linked] == ["Q5"]
    assert linked[0].representative_name == "GraphPad Prism"


def test_kb_export_drops_video_games(sample_root):
    """Test the KB export loader on the fixture"""
    kb, replaced_by = load_kb_export(sample_root / "kb" / "export.tsv")
    ids = {entry.id for entry in kb}
    assert len(kb) == 30 and "Q900099" not in ids
    assert replaced_by == [("Q900008", "Q900009")]
    spss = next(entry for entry in kb if entry.id == "Q900001")
    assert "IBM SPSS Statistics" in spss.redirects
    with pytest.raises(ValidationError):
        KbEntry(id="Q0", label="Portal", type_tags=frozenset({"video game"}))


def test_kb_export_rejects_unknown_field_kinds(tmp_path):
    """Test export validation"""
    path = tmp_path / "export.tsv"
    path.write_text("Q1\tlabel\tSPSS\nQ1\tcolour\tblue\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_kb_export(path)


def test_enrichment_matches_kb_id_then_name(sample_root, tmp_path):
    """Test enrichment lookup by KB id and by representative name"""
    enrichment = load_enrichment(sample_root / "kb" / "enrichment.tsv")
    linked = MentionCluster(
        members=[MentionString(surface="IBM SPSS", frequency=1, doc_refs=[("d", (0, 8))])],
        normal_form="ibm spss", kb_id="Q900001", representative_name="IBM SPSS",
    )
    assert enrichment_for(linked, enrichment).name == "SPSS"
    unlinked = MentionCluster(
        members=[MentionString(surface="imagej", frequency=1, doc_refs=[("d", (0, 6))])],
        normal_form="imagej", representative_name="imagej",
    )
    record = enrichment_for(unlinked, enrichment)
    assert record.name == "ImageJ" and record.is_free and record.is_source_available
    assert enrichment_for(unlinked.model_copy(update={"representative_name": "Unknown"}), enrichment) is None

    path = tmp_path / "enrichment.tsv"
    path.write_text("name\tis_free\tis_source_available\nFoo\tunknown\tyes\n", encoding="utf-8")
    assert load_enrichment(path)["Foo"].is_free is None
    path.write_text("name\tis_free\tis_source_available\nFoo\tmaybe\tyes\n", encoding="utf-8")
    with pytest.raises(ConfigurationError):
        load_enrichment(path)


def test_cluster_report(sample_root, tmp_path):
    """Test the cluster TSV"""
    kb, _ = load_kb_export(sample_root / "kb" / "export.tsv")
    result = DisambiguationService(kb).disambiguate(mentions_of("SPSS", "SPSS", "IBM SPSS"))
    lines = write_cluster_report(tmp_path / "clusters.tsv", result).read_text(encoding="utf-8").splitlines()
    assert lines == [
        "representative\tkb_id\tambiguous\tmembers",
        "SPSS\tQ900001\tfalse\tSPSS:2;IBM SPSS:1",
    ]

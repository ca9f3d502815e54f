"""Tests for candidate generation, labeling functions, the label model and SSC emission"""
import numpy as np
import pytest

from app.core.errors import LabelModelError, NoSignalError, UnknownLabelingFunctionError
from app.schemas.corpus import SegmentedDocument
from app.schemas.tagging import BioTag, TaggedDocument, bio_runs, is_valid_bio
from app.schemas.weak_supervision import Candidate, KbAliasDictionary, LabelModel, LabelingFunctionVote, Vote
from app.services.corpus_io import format_tagged_corpus, parse_tagged_corpus
from app.services.ingest_service import IngestService, segment_mm
from app.services.label_model import correlation_groups, fit_label_model, predict_marginal, predict_marginals
from app.services.labeling_functions import (
    apply_labeling_functions,
    build_default_registry,
    generate_candidates,
    lf_dictionary,
    lf_exact_context,
    lf_general_context,
    lf_negative_list,
    lf_summary,
    load_exact_rules,
    load_kb_dictionary,
    load_negative_list,
)
from app.services.silver_corpus_service import (
    WeakSupervisionService,
    emit_ssc,
    error_analysis_report,
    resolve_overlaps,
)
from app.services.text_processing import split_sentences


def _candidate(sentence, start, end):
    return next(c for c in generate_candidates(sentence) if (c.start, c.end) == (start, end))


def simulate_labeled_votes(n, accuracies, propensity, prior, seed):
    rng = np.random.default_rng(seed)
    y = rng.random(n) < prior
    votes = np.full((n, len(accuracies)), Vote.ABSTAIN, dtype=np.int8)
    for j, accuracy in enumerate(accuracies):
        fires = rng.random(n) < propensity
        correct = rng.random(n) < accuracy
        label = np.where(correct, y, ~y).astype(np.int8)
        votes[fires, j] = label[fires]
    return votes, y


def simulate_votes(n, accuracies, propensity, prior, seed):
    return simulate_labeled_votes(n, accuracies, propensity, prior, seed)[0]


def test_candidates_skip_filler_only_ngrams(example_sentence):
    """Test that candidates up to six tokens exclude stopword/punctuation-only n-grams"""
    candidates = generate_candidates(example_sentence)
    assert all(1 <= c.n <= 6 for c in candidates)
    surfaces = {c.surface for c in candidates}
    assert "SPSS" in surfaces
    assert "SPSS version 17.0" in surfaces
    assert "(" not in surfaces and "," not in surfaces
    for c in candidates:
        assert c.surface == example_sentence.text[
            example_sentence.tokens[c.start].start:example_sentence.tokens[c.end - 1].end
        ]


def test_candidate_length_is_bounded():
    """Test the candidate length bound"""
    with pytest.raises(ValueError):
        Candidate(doc_id="d", sentence_index=0, start=0, end=7, surface="x")


def test_candidates_cover_every_ngram_of_a_short_sentence():
    """Test that a four-token sentence without fillers yields 4 + 3 + 2 + 1 candidates"""
    sentence = split_sentences("GROMACS AMBER Chimera PyMOL", "d")[0]
    assert len(sentence.tokens) == 4
    candidates = generate_candidates(sentence)
    assert len(candidates) == 10
    assert {c.surface for c in candidates if c.n == 4} == {"GROMACS AMBER Chimera PyMOL"}


def test_labeling_functions_on_the_example_sentence(example_sentence, dictionary):
    """Test each labeling function on the SPSS mention"""
    spss = _candidate(example_sentence, 5, 6)
    assert spss.surface == "SPSS"
    assert lf_dictionary(spss, dictionary).value == Vote.POSITIVE
    assert lf_general_context(spss, example_sentence).value == Vote.POSITIVE
    assert lf_exact_context(spss, example_sentence, load_exact_rules()).value == Vote.POSITIVE
    assert lf_negative_list(spss, load_negative_list()).value == Vote.ABSTAIN

    statistical = _candidate(example_sentence, 0, 1)
    assert lf_dictionary(statistical, dictionary).value == Vote.ABSTAIN
    assert lf_exact_context(statistical, example_sentence, load_exact_rules()).value == Vote.ABSTAIN


def test_negative_list_votes_negative():
    """Test that listed false positives receive a NEGATIVE vote"""
    sentence = split_sentences("Section 2 describes the ELISA procedure.", "d")[0]
    elisa = _candidate(sentence, 4, 5)
    assert lf_negative_list(elisa, load_negative_list()).value == Vote.NEGATIVE


def test_general_context_abstains_without_cue():
    """Test that no head word, version or developer in the window means ABSTAIN"""
    regression_sentence = split_sentences("linear regression was fitted", "d")[0]
    regression = _candidate(regression_sentence, 1, 2)
    assert regression.surface == "regression"
    assert lf_general_context(regression, regression_sentence).value == Vote.ABSTAIN

    elisa_sentence = split_sentences("measured by ELISA kit assay", "d")[0]
    elisa = _candidate(elisa_sentence, 2, 3)
    assert elisa.surface == "ELISA"
    assert lf_general_context(elisa, elisa_sentence).value == Vote.ABSTAIN


def test_kb_dictionary_drops_english_words(tmp_path):
    """Test that aliases which are English words never enter the dictionary"""
    path = tmp_path / "aliases.tsv"
    path.write_text("Q1\tSPSS\ten\nQ2\tPrism\ten\nQ3\tExcel\tja\nQ4\tBEAST\ten\n", encoding="utf-8")
    dictionary = load_kb_dictionary(path, frozenset({"prism", "beast"}))
    assert dictionary.entries == {"SPSS": "Q1"}


def test_vote_matrix_and_summary(example_sentence, dictionary):
    """Test the -1/0/1 vote matrix and per-LF coverage"""
    registry = build_default_registry(dictionary, load_exact_rules(), load_negative_list())
    candidates = generate_candidates(example_sentence)
    votes = apply_labeling_functions(candidates, [example_sentence], registry, jobs=2)
    assert votes.shape == (len(candidates), len(registry))
    assert set(np.unique(votes)) <= {-1, 0, 1}
    assert (votes == apply_labeling_functions(candidates, [example_sentence], registry)).all()

    summary = {row.lf_id: row for row in lf_summary(votes, registry.lf_ids)}
    assert summary["lf_dictionary"].positives == 2
    assert summary["lf_dictionary"].coverage == pytest.approx(2 / len(candidates))
    assert summary["lf_negative_list"].coverage == 0.0


def test_label_model_recovers_planted_accuracies():
    """Test EM on simulated votes with accuracies 0.9, 0.8 and 0.7"""
    planted = np.array([0.9, 0.8, 0.7])
    lf_ids = ["a", "b", "c"]
    estimates = []
    for seed in range(5):
        votes = simulate_votes(10_000, planted, propensity=0.7, prior=0.3, seed=seed)
        model = fit_label_model(votes, lf_ids, seed=seed)
        assert model.groups == [["a"], ["b"], ["c"]]
        estimates.append([model.lf_accuracies[lf_id] for lf_id in lf_ids])
        assert model.class_prior == pytest.approx(0.3, abs=0.05)
    assert np.abs(np.mean(estimates, axis=0) - planted).max() <= 0.05


def test_all_abstain_marginal_is_the_class_prior():
    """Test that a candidate without votes scores exactly the prior"""
    votes = simulate_votes(2000, [0.9, 0.8], propensity=0.6, prior=0.4, seed=1)
    model = fit_label_model(votes, ["a", "b"])
    assert predict_marginal(model, []) == model.class_prior
    abstain = np.full((3, 2), Vote.ABSTAIN, dtype=np.int8)
    assert (predict_marginals(model, abstain) == model.class_prior).all()
    positive = predict_marginal(model, [LabelingFunctionVote(lf_id="a", value=Vote.POSITIVE)])
    assert positive > model.class_prior


def test_single_positive_vote_follows_bayes_rule():
    """Test the posterior of one POSITIVE vote and of cancelling votes"""
    model = LabelModel(
        lf_ids=["a", "b"],
        lf_accuracies={"a": 0.9, "b": 0.9},
        lf_propensities={"a": 1.0, "b": 1.0},
        class_prior=0.3,
    )
    positive = predict_marginal(model, [LabelingFunctionVote(lf_id="a", value=Vote.POSITIVE)])
    assert positive == pytest.approx(0.3 * 0.9 / (0.3 * 0.9 + 0.7 * 0.1))
    assert positive == pytest.approx(0.794, abs=1e-3)
    cancelled = predict_marginal(
        model,
        [LabelingFunctionVote(lf_id="a", value=Vote.POSITIVE), LabelingFunctionVote(lf_id="b", value=Vote.NEGATIVE)],
    )
    assert cancelled == pytest.approx(0.3)


def test_label_model_recall_dominates_each_labeling_function():
    """Test that thresholded label-model output recalls at least as many positives as any single LF"""
    votes, truth = simulate_labeled_votes(10_000, [0.9, 0.8, 0.7], propensity=0.7, prior=0.3, seed=0)
    model = fit_label_model(votes, ["a", "b", "c"], seed=0)
    predicted = predict_marginals(model, votes) > model.threshold
    model_recall = (predicted & truth).sum() / truth.sum()
    for j in range(votes.shape[1]):
        lf_recall = ((votes[:, j] == Vote.POSITIVE) & truth).sum() / truth.sum()
        assert model_recall >= lf_recall


def test_label_model_errors():
    """Test the failure modes of the label model"""
    with pytest.raises(NoSignalError):
        fit_label_model(np.full((4, 2), Vote.ABSTAIN, dtype=np.int8), ["a", "b"])
    with pytest.raises(LabelModelError):
        fit_label_model(np.zeros((4, 3), dtype=np.int8), ["a", "b"])
    model = fit_label_model(simulate_votes(500, [0.9, 0.8], 0.6, 0.4, seed=2), ["a", "b"])
    with pytest.raises(UnknownLabelingFunctionError):
        predict_marginal(model, [LabelingFunctionVote(lf_id="zzz", value=Vote.POSITIVE)])


def test_duplicated_labeling_functions_share_one_group():
    """Test that identical LF columns are tied into one group"""
    votes = simulate_votes(3000, [0.9, 0.75], propensity=0.7, prior=0.3, seed=3)
    duplicated = np.column_stack([votes[:, 0], votes[:, 0], votes[:, 1]])
    assert correlation_groups(duplicated) == [[0, 1], [2]]
    model = fit_label_model(duplicated, ["a", "a_copy", "b"])
    assert model.lf_accuracies["a"] == model.lf_accuracies["a_copy"]


@pytest.fixture(scope="module")
def fixture_weak_labeling(sample_root):
    docs = IngestService().load_corpus(sample_root / "corpus", sample_root / "corpus" / "manifest.tsv")
    segmented = [s for s in (segment_mm(d) for d in docs) if s is not None]
    dictionary = load_kb_dictionary(sample_root / "kb" / "aliases.tsv")
    registry = build_default_registry(dictionary, load_exact_rules(), load_negative_list())
    return segmented, WeakSupervisionService(registry, seed=42).run(segmented)


def test_silver_corpus_is_valid_and_reproducible(fixture_weak_labeling, sample_root):
    """Test that emitted SSC documents are valid BIO and stable across runs"""
    segmented, result = fixture_weak_labeling
    assert [d.doc_id for d in result.ssc] == [s.doc_id for s in segmented]
    spans = 0
    for document in result.ssc:
        for tagged in document.sentences:
            assert is_valid_bio(tagged.tags)
            spans += len(bio_runs(tagged.tags))
    assert spans > 0
    assert 0.0 < result.model.class_prior < 1.0

    dictionary = load_kb_dictionary(sample_root / "kb" / "aliases.tsv")
    registry = build_default_registry(dictionary, load_exact_rules(), load_negative_list())
    again = WeakSupervisionService(registry, seed=42).run(segmented)
    assert format_tagged_corpus(again.ssc) == format_tagged_corpus(result.ssc)


def test_tagged_corpus_file_round_trip(fixture_weak_labeling):
    """Test that the token-tag file keeps surfaces and tags"""
    _, result = fixture_weak_labeling
    text = format_tagged_corpus(result.ssc)
    parsed = parse_tagged_corpus(text)
    assert format_tagged_corpus(parsed) == text
    assert [len(d.sentences) for d in parsed] == [len(d.sentences) for d in result.ssc]


def test_error_analysis_suggests_false_positives(example_sentence):
    """Test that surfaces never confirmed by the gold corpus are suggested"""
    n = len(example_sentence.tokens)
    silver_tags = [BioTag.O] * n
    silver_tags[0] = BioTag.B
    silver_tags[5] = BioTag.B
    gold_tags = [BioTag.O] * n
    gold_tags[5] = BioTag.B

    def document(tags):
        return TaggedDocument.model_validate(
            {"doc_id": "doc1", "sentences": [{"sentence": example_sentence, "tags": tags}]}
        )

    suggestions = error_analysis_report([document(silver_tags)], [document(gold_tags)])
    assert [(s.surface, s.false_positives) for s in suggestions] == [("Statistical", 1)]


def test_overlapping_positives_keep_the_higher_marginal():
    """Test that "SPSS" at .9 wins over the overlapping "SPSS software" at .6"""
    sentence = split_sentences("We used SPSS software", "d")[0]
    spss, spss_software = _candidate(sentence, 2, 3), _candidate(sentence, 2, 4)
    assert spss_software.surface == "SPSS software"
    assert resolve_overlaps(sentence, [(spss_software, 0.6), (spss, 0.9)]) == [spss]


def test_emitted_silver_tags_for_a_product_name_and_repeated_mentions():
    """Test B, I, I for the three-token product name and B for each single-token mention"""
    text = (
        "All statistical procedures were performed using IBM SPSS Statistics software version 22. "
        "Task accuracy and response times were analyzed using the SPSS software package "
        "(SPSS v17.0, Chicago, Illinois, USA)."
    )
    sentences = split_sentences(text, "doc2")
    assert len(sentences) == 2
    dictionary = KbAliasDictionary(entries={"SPSS": "Q1", "IBM SPSS Statistics": "Q1"})
    candidates = [c for s in sentences for c in generate_candidates(s)]
    votes = np.array([[lf_dictionary(c, dictionary).value] for c in candidates], dtype=np.int8)
    model = LabelModel(
        lf_ids=["lf_dictionary"],
        lf_accuracies={"lf_dictionary": 0.9},
        lf_propensities={"lf_dictionary": 0.2},
        class_prior=0.3,
    )

    (document,) = emit_ssc([SegmentedDocument(doc_id="doc2", sentences=sentences)], model, candidates, votes)
    first, second = document.sentences
    surfaces = [t.surface for t in first.sentence.tokens]
    ibm = surfaces.index("IBM")
    assert first.tags[ibm:ibm + 3] == [BioTag.B, BioTag.I, BioTag.I]
    assert bio_runs(first.tags) == [(ibm, ibm + 3)]
    spss = [i for i, t in enumerate(second.sentence.tokens) if t.surface == "SPSS"]
    assert len(spss) == 2
    assert bio_runs(second.tags) == [(i, i + 1) for i in spss]

    silent = split_sentences("Samples were stored at room temperature.", "doc3")
    silent_candidates = [c for s in silent for c in generate_candidates(s)]
    silent_votes = np.array([[lf_dictionary(c, dictionary).value] for c in silent_candidates], dtype=np.int8)
    (silent_document,) = emit_ssc(
        [SegmentedDocument(doc_id="doc3", sentences=silent)], model, silent_candidates, silent_votes
    )
    assert all(tag == BioTag.O for tag in silent_document.sentences[0].tags)

"""Weak supervision stage: candidates, votes, label model and the silver standard corpus"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.schemas.corpus import SegmentedDocument, Sentence
from app.schemas.tagging import TaggedDocument, TaggedSentence, bio_runs, tags_from_runs
from app.schemas.weak_supervision import (
    MAX_CANDIDATE_LENGTH,
    Candidate,
    FalsePositiveSuggestion,
    LabelModel,
    LfSummaryRow,
    Vote,
)
from app.services.label_model import fit_label_model, predict_marginals
from app.services.labeling_functions import (
    LabelingFunctionRegistry,
    apply_labeling_functions,
    generate_candidates,
    is_proper_noun_shaped,
    lf_summary,
)

logger = logging.getLogger(__name__)

SentenceKey = Tuple[str, int]


def labeled_rows(votes: np.ndarray) -> np.ndarray:
    """Rows with at least one non-abstaining vote"""
    return (votes != Vote.ABSTAIN).any(axis=1)


def resolve_overlaps(sentence: Sentence, scored: Sequence[Tuple[Candidate, float]]) -> List[Candidate]:
    """Pick a non-overlapping subset of positive candidates

    Candidates not headed by a proper-noun-shaped token give way to overlapping ones
    that are; the rest is resolved greedily by marginal, then length, then position.
    """
    proper = [is_proper_noun_shaped(sentence, c.start) for c, _ in scored]
    kept = [
        (c, p) for (c, p), is_proper in zip(scored, proper)
        if is_proper or not any(
            other_proper and c.overlaps(other)
            for (other, _), other_proper in zip(scored, proper)
        )
    ]
    accepted: List[Candidate] = []
    for c, _ in sorted(kept, key=lambda item: (-item[1], -item[0].n, item[0].start)):
        if not any(c.overlaps(other) for other in accepted):
            accepted.append(c)
    return sorted(accepted, key=lambda c: c.start)


@dataclass
class WeakLabelingResult:
    candidates: List[Candidate]
    votes: np.ndarray
    model: LabelModel
    summary: List[LfSummaryRow]
    ssc: List[TaggedDocument]


def emit_ssc(
    corpus: Sequence[SegmentedDocument],
    model: LabelModel,
    candidates: Sequence[Candidate],
    votes: np.ndarray,
) -> List[TaggedDocument]:
    """BIO-tag every sentence from the labeled candidates scoring above the threshold"""
    labeled = labeled_rows(votes)
    marginals = np.zeros(len(candidates))
    if len(candidates):
        marginals[labeled] = predict_marginals(model, votes[labeled])
    positives: Dict[SentenceKey, List[Tuple[Candidate, float]]] = defaultdict(list)
    for c, is_labeled, p in zip(candidates, labeled, marginals):
        if is_labeled and p > model.threshold:
            positives[c.sentence_ref].append((c, float(p)))

    documents = []
    for document in corpus:
        tagged = []
        for sentence in document.sentences:
            accepted = resolve_overlaps(sentence, positives.get((sentence.doc_id, sentence.index), []))
            tags = tags_from_runs(len(sentence.tokens), [(c.start, c.end) for c in accepted])
            tagged.append(TaggedSentence(sentence=sentence, tags=tags))
        documents.append(TaggedDocument(doc_id=document.doc_id, sentences=tagged))
    return documents


class WeakSupervisionService:
    """Runs candidate generation, LF application, label model fitting and SSC emission"""

    def __init__(
        self,
        registry: LabelingFunctionRegistry,
        max_candidate_length: int = MAX_CANDIDATE_LENGTH,
        seed: int = 42,
        jobs: int = 1,
    ):
        self.registry = registry
        self.max_candidate_length = max_candidate_length
        self.seed = seed
        self.jobs = jobs

    def candidates_for(self, corpus: Sequence[SegmentedDocument]) -> List[Candidate]:
        return [
            c
            for document in corpus
            for sentence in document.sentences
            for c in generate_candidates(sentence, self.max_candidate_length)
        ]

    def run(self, corpus: Sequence[SegmentedDocument]) -> WeakLabelingResult:
        sentences = [s for document in corpus for s in document.sentences]
        candidates = self.candidates_for(corpus)
        votes = apply_labeling_functions(candidates, sentences, self.registry, self.jobs)
        summary = lf_summary(votes, self.registry.lf_ids)
        for row in summary:
            logger.info(
                "LF %s: coverage %.3f, overlaps %.3f, conflicts %.3f",
                row.lf_id, row.coverage, row.overlaps, row.conflicts,
            )

        # unlabeled candidates carry no evidence about the latent label
        labeled = labeled_rows(votes)
        model = fit_label_model(votes[labeled] if labeled.any() else votes, self.registry.lf_ids, seed=self.seed)
        ssc = emit_ssc(corpus, model, candidates, votes)
        n_spans = sum(len(bio_runs(t.tags)) for d in ssc for t in d.sentences)
        logger.info(
            "Weak labeling: %d sentences, %d candidates (%d labeled), %d silver spans",
            len(sentences), len(candidates), int(labeled.sum()), n_spans,
        )
        return WeakLabelingResult(candidates=candidates, votes=votes, model=model, summary=summary, ssc=ssc)


def _surface_spans(documents: Sequence[TaggedDocument]) -> Dict[SentenceKey, Dict[Tuple[int, int], str]]:
    spans: Dict[SentenceKey, Dict[Tuple[int, int], str]] = {}
    for document in documents:
        for tagged in document.sentences:
            sentence = tagged.sentence
            spans[(document.doc_id, sentence.index)] = {
                (start, end): sentence.text[sentence.tokens[start].start:sentence.tokens[end - 1].end]
                for start, end in bio_runs(tagged.tags)
            }
    return spans


def error_analysis_report(
    ssc: Sequence[TaggedDocument],
    gold: Sequence[TaggedDocument],
    top_n: Optional[int] = 20,
) -> List[FalsePositiveSuggestion]:
    """Most frequent silver surfaces that never match a gold span (negative-list candidates)"""
    predicted = _surface_spans(ssc)
    expected = _surface_spans(gold)
    false_positives: Counter = Counter()
    true_positives: Counter = Counter()
    for key, spans in predicted.items():
        if key not in expected:
            continue
        for span, surface in spans.items():
            if span in expected[key]:
                true_positives[surface] += 1
            else:
                false_positives[surface] += 1
    ranked = sorted(
        (surface for surface in false_positives if true_positives[surface] == 0),
        key=lambda surface: (-false_positives[surface], surface),
    )
    if top_n is not None:
        ranked = ranked[:top_n]
    return [FalsePositiveSuggestion(surface=s, false_positives=false_positives[s]) for s in ranked]

"""Applying a trained CRF to sentences and to the M&M sections of a corpus"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import FrozenSet, List, Optional, Sequence

from tqdm import tqdm

from app.schemas.corpus import Document, SegmentedDocument, Sentence
from app.schemas.tagging import LABELS, Mention, TaggedDocument, TaggedSentence, TaggingResult, bio_runs
from app.schemas.weak_supervision import KbAliasDictionary
from app.services.crf_features import sentence_features
from app.services.crf_model import CrfModel, decode
from app.services.ingest_service import segment_mm

logger = logging.getLogger(__name__)


def viterbi_decode(
    model: CrfModel, sentence: Sentence, dictionary: Optional[KbAliasDictionary] = None
) -> TaggedSentence:
    encoded = model.encode(sentence_features(sentence, dictionary))
    labels = decode(model, encoded)
    return TaggedSentence(sentence=sentence, tags=[LABELS[y] for y in labels])


def mentions_from_tagged(document: SegmentedDocument, tagged: Sequence[TaggedSentence]) -> List[Mention]:
    """BIO runs -> mentions with character offsets into the full document text"""
    mentions = []
    for ts in tagged:
        sentence = ts.sentence
        base = document.section_offset + sentence.char_offset
        for start, end in bio_runs(ts.tags):
            char_start = sentence.tokens[start].start
            char_end = sentence.tokens[end - 1].end
            mentions.append(
                Mention(
                    doc_id=document.doc_id,
                    sentence_index=sentence.index,
                    token_start=start,
                    token_end=end,
                    surface=sentence.text[char_start:char_end],
                    char_start=base + char_start,
                    char_end=base + char_end,
                )
            )
    return mentions


class TaggingService:
    """Decodes every M&M sentence of a corpus with a trained model"""

    def __init__(
        self,
        model: CrfModel,
        dictionary: Optional[KbAliasDictionary] = None,
        mm_headings: Optional[FrozenSet[str]] = None,
        stopwords: Optional[FrozenSet[str]] = None,
        jobs: int = 1,
        show_progress: bool = False,
    ):
        self.model = model
        self.dictionary = dictionary
        self.mm_headings = mm_headings
        self.stopwords = stopwords
        self.jobs = jobs
        self.show_progress = show_progress

    def tag_sentences(self, sentences: Sequence[Sentence]) -> List[TaggedSentence]:
        if self.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                return list(pool.map(lambda s: viterbi_decode(self.model, s, self.dictionary), sentences))
        return [viterbi_decode(self.model, s, self.dictionary) for s in sentences]

    def tag_segmented(self, document: SegmentedDocument) -> TaggedDocument:
        return TaggedDocument(doc_id=document.doc_id, sentences=self.tag_sentences(document.sentences))

    def tag_corpus(self, docs: Sequence[Document]) -> TaggingResult:
        mentions: List[Mention] = []
        processed, skipped = [], []
        for doc in tqdm(docs, desc="tagging", disable=not self.show_progress):
            segmented = segment_mm(doc, self.mm_headings, self.stopwords)
            if segmented is None:
                skipped.append(doc.id)
                continue
            processed.append(doc.id)
            mentions.extend(mentions_from_tagged(segmented, self.tag_segmented(segmented).sentences))
        result = TaggingResult(mentions=mentions, processed_doc_ids=processed, skipped_doc_ids=skipped)
        logger.info(
            "Tagged %d documents (%d without M&M section): %d mentions, %.2f mentions per article",
            len(processed), len(skipped), len(mentions), result.mentions_per_article,
        )
        return result

"""Token-tag corpus files shared by the silver and gold standard corpora

One token per line (``surface<TAB>tag``), a blank line after every sentence and a
``-DOCSTART- <doc_id>`` line before every document.
"""
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Union

from pydantic import ValidationError

from app.core.errors import CorpusFormatError
from app.schemas.corpus import Sentence, Token
from app.schemas.tagging import BioTag, TaggedDocument, TaggedSentence
from app.services.text_processing import default_stopwords, stem
from app.utils.files import write_text

DOCSTART = "-DOCSTART-"


def format_tagged_corpus(documents: Iterable[TaggedDocument]) -> str:
    lines: List[str] = []
    for document in documents:
        lines.append(f"{DOCSTART} {document.doc_id}")
        lines.append("")
        for tagged in document.sentences:
            if not tagged.sentence.tokens:
                continue
            for token, tag in zip(tagged.sentence.tokens, tagged.tags):
                lines.append(f"{token.surface}\t{tag.value}")
            lines.append("")
    return "".join(f"{line}\n" for line in lines)


def write_tagged_corpus(path: Union[str, Path], documents: Iterable[TaggedDocument]) -> Path:
    return write_text(path, format_tagged_corpus(documents))


def sentence_from_surfaces(
    surfaces: List[str], doc_id: str = "", index: int = 0, stopwords: Optional[FrozenSet[str]] = None
) -> Sentence:
    """Rebuild a Sentence from token surfaces joined by single spaces"""
    stopwords = default_stopwords() if stopwords is None else stopwords
    tokens = []
    cursor = 0
    for surface in surfaces:
        tokens.append(
            Token(
                surface=surface,
                start=cursor,
                end=cursor + len(surface),
                is_stopword=surface.lower() in stopwords,
                stem=stem(surface),
            )
        )
        cursor += len(surface) + 1
    return Sentence(doc_id=doc_id, index=index, text=" ".join(surfaces), tokens=tokens)


def parse_tagged_corpus(
    text: str, source: str = "", stopwords: Optional[FrozenSet[str]] = None
) -> List[TaggedDocument]:
    documents: List[TaggedDocument] = []
    doc_id: Optional[str] = None
    sentences: List[TaggedSentence] = []
    surfaces: List[str] = []
    tags: List[BioTag] = []
    sentence_line = 0

    def close_sentence() -> None:
        nonlocal surfaces, tags
        if not surfaces:
            return
        if doc_id is None:
            raise CorpusFormatError(f"tokens before the first {DOCSTART} line", source, sentence_line)
        sentence = sentence_from_surfaces(surfaces, doc_id, len(sentences), stopwords)
        try:
            sentences.append(TaggedSentence(sentence=sentence, tags=tags))
        except ValidationError as e:
            raise CorpusFormatError(f"invalid sentence: {e.errors()[0]['msg']}", source, sentence_line) from e
        surfaces, tags = [], []

    def close_document() -> None:
        nonlocal sentences
        close_sentence()
        if doc_id is not None:
            documents.append(TaggedDocument(doc_id=doc_id, sentences=sentences))
        sentences = []

    for line_number, line in enumerate(text.splitlines(), 1):
        if line.startswith(DOCSTART):
            close_document()
            doc_id = line[len(DOCSTART):].strip()
            if not doc_id:
                raise CorpusFormatError(f"{DOCSTART} without a document id", source, line_number)
            continue
        if not line.strip():
            close_sentence()
            continue
        surface, sep, tag = line.partition("\t")
        if not sep or not surface:
            raise CorpusFormatError(f"expected 'surface<TAB>tag', got {line!r}", source, line_number)
        try:
            tags.append(BioTag(tag.strip()))
        except ValueError as e:
            raise CorpusFormatError(f"unknown tag {tag!r}", source, line_number) from e
        if not surfaces:
            sentence_line = line_number
        surfaces.append(surface)
    close_document()
    return documents


def read_tagged_corpus(path: Union[str, Path], stopwords: Optional[FrozenSet[str]] = None) -> List[TaggedDocument]:
    path = Path(path)
    return parse_tagged_corpus(path.read_text(encoding="utf-8"), str(path), stopwords)


def corpus_sentences(documents: Iterable[TaggedDocument]) -> List[TaggedSentence]:
    return [tagged for document in documents for tagged in document.sentences]

"""Tokenization, sentence splitting, stemming and stopword utilities"""
import re
from functools import lru_cache
from pathlib import Path
from typing import FrozenSet, List, Optional

from nltk.stem.porter import PorterStemmer

from app.schemas.corpus import Sentence, Token
from app.utils.files import read_word_list, resource_path

# Word runs may be joined by '.' or '-' when a word character follows,
# which keeps "v17.0", "2.0.12", "ATLAS.ti" and "E-Prime" whole.
TOKEN_RE = re.compile(r"\w+(?:[.\-]\w+)*|[^\w\s]")

# Candidate sentence boundary: terminal punctuation, optional closers, whitespace
BOUNDARY_RE = re.compile(r"[.!?]+[\"')\]]*(?=\s)")

ABBREVIATIONS = frozenset({
    "e.g.", "i.e.", "inc.", "ltd.", "co.", "corp.", "v.", "vs.", "cf.", "ca.",
    "approx.", "fig.", "figs.", "al.", "dr.", "mr.", "ms.", "no.", "nos.", "eq.",
    "ref.", "vol.", "ver.", "st.", "jr.", "ed.", "eds.", "resp.", "sect.", "tab.",
})

INITIAL_RE = re.compile(r"^[A-Z]\.$")
DOTTED_ACRONYM_RE = re.compile(r"^(?:[A-Za-z]\.){2,}$")

# Irregular forms needed by the exact context rules
IRREGULAR_LEMMAS = {
    "used": "use",
    "using": "use",
    "performed": "perform",
    "was": "be",
    "were": "be",
    "analysed": "analyze",
    "analyzed": "analyze",
}

_stemmer = PorterStemmer()


@lru_cache(maxsize=1)
def default_stopwords() -> FrozenSet[str]:
    return frozenset(word.lower() for word in read_word_list(resource_path("stopwords.txt")))


def load_stopwords(path: Optional[Path] = None) -> FrozenSet[str]:
    if path is None:
        return default_stopwords()
    return frozenset(word.lower() for word in read_word_list(path))


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    """Porter stem, lowercased and iterated to a fixed point"""
    current = word.lower()
    for _ in range(10):
        stemmed = _stemmer.stem(current, to_lowercase=True)
        if stemmed == current:
            break
        current = stemmed
    return current


def lemmatize(word: str) -> str:
    lowered = word.lower()
    return stem(IRREGULAR_LEMMAS.get(lowered, lowered))


def is_punctuation(surface: str) -> bool:
    return not any(ch.isalnum() for ch in surface)


def tokenize(sentence_text: str, stopwords: Optional[FrozenSet[str]] = None) -> List[Token]:
    stopwords = default_stopwords() if stopwords is None else stopwords
    tokens = []
    for match in TOKEN_RE.finditer(sentence_text):
        surface = match.group()
        tokens.append(
            Token(
                surface=surface,
                start=match.start(),
                end=match.end(),
                is_stopword=surface.lower() in stopwords,
                stem=stem(surface),
            )
        )
    return tokens


def _last_word(text: str, end: int) -> str:
    start = end
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start:end].lstrip("([{\"'")


def _next_word(text: str, start: int) -> str:
    while start < len(text) and text[start].isspace():
        start += 1
    end = start
    while end < len(text) and not text[end].isspace():
        end += 1
    return text[start:end]


def _is_boundary(text: str, period_end: int, after: int) -> bool:
    word = _last_word(text, period_end)
    if word.lower() in ABBREVIATIONS or DOTTED_ACRONYM_RE.match(word):
        return False
    following = _next_word(text, after)
    if not following:
        return True
    if following[0].islower() or following[0].isdigit():
        return False
    if INITIAL_RE.match(word):
        # chains of initials ("A. B. C.") stay together
        word_start = period_end - len(word)
        previous = _last_word(text, len(text[:word_start].rstrip()))
        if INITIAL_RE.match(following) or INITIAL_RE.match(previous):
            return False
    return True


def split_sentences(text: str, doc_id: str = "", stopwords: Optional[FrozenSet[str]] = None) -> List[Sentence]:
    """Rule-based splitter; sentence texts are exact slices of the input"""
    sentences: List[Sentence] = []
    start = 0
    spans = []
    for match in BOUNDARY_RE.finditer(text):
        period_end = match.start() + len(match.group().rstrip("\"')]"))
        if _is_boundary(text, period_end, match.end()):
            spans.append((start, match.end()))
            start = match.end()
    spans.append((start, len(text)))

    for span_start, span_end in spans:
        chunk = text[span_start:span_end]
        stripped = chunk.strip()
        if not stripped:
            continue
        offset = span_start + (len(chunk) - len(chunk.lstrip()))
        sentences.append(
            Sentence(
                doc_id=doc_id,
                index=len(sentences),
                text=stripped,
                char_offset=offset,
                tokens=tokenize(stripped, stopwords),
            )
        )
    return sentences

"""Candidate generation and the labeling functions of the weak supervision stage"""
import csv
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ConfigurationError
from app.schemas.corpus import Sentence
from app.schemas.weak_supervision import (
    KB_LANGUAGES,
    MAX_CANDIDATE_LENGTH,
    Candidate,
    KbAliasDictionary,
    LabelingFunctionVote,
    LfSummaryRow,
    Vote,
)
from app.services.text_processing import is_punctuation, lemmatize, stem
from app.utils.files import read_word_list, resource_path

logger = logging.getLogger(__name__)

CONTEXT_WIDTH = 4
HEAD_WORDS = ("software", "tool", "toolbox", "package", "program", "script")
HEAD_STEMS = frozenset(stem(word) for word in HEAD_WORDS)
DEVELOPER_SUFFIXES = frozenset({"Inc", "Ltd", "GmbH", "Corp", "LLC", "Co"})
MAX_DEVELOPER_RUN = 4
SLOT = "<>"

V_VERSION_RE = re.compile(r"^[vV]\d+(?:\.\d+)*$")
NUMBER_RE = re.compile(r"^\d+(?:\.\d+)*$")
DOTTED_VERSION_RE = re.compile(r"^\d+(?:\.\d+){2,}$")

LabelingFunction = Callable[[Candidate, Sentence], LabelingFunctionVote]


def _is_filler(sentence: Sentence, i: int) -> bool:
    token = sentence.tokens[i]
    return token.is_stopword or is_punctuation(token.surface)


def _is_capitalized(surface: str) -> bool:
    return surface[:1].isupper()


def is_proper_noun_shaped(sentence: Sentence, i: int) -> bool:
    """Capitalized token that is not the first token of the sentence"""
    return i > 0 and _is_capitalized(sentence.tokens[i].surface)


def candidate_surface(sentence: Sentence, start: int, end: int) -> str:
    return sentence.text[sentence.tokens[start].start:sentence.tokens[end - 1].end]


def generate_candidates(sentence: Sentence, max_n: int = MAX_CANDIDATE_LENGTH) -> List[Candidate]:
    """All token n-grams up to max_n that are not only stopwords/punctuation"""
    if max_n < 1:
        raise ConfigurationError(f"max candidate length must be >= 1, got {max_n}")
    max_n = min(max_n, MAX_CANDIDATE_LENGTH)
    filler = [_is_filler(sentence, i) for i in range(len(sentence.tokens))]
    candidates = []
    for start in range(len(sentence.tokens)):
        for end in range(start + 1, min(start + max_n, len(sentence.tokens)) + 1):
            if all(filler[start:end]):
                continue
            candidates.append(
                Candidate(
                    doc_id=sentence.doc_id,
                    sentence_index=sentence.index,
                    start=start,
                    end=end,
                    surface=candidate_surface(sentence, start, end),
                )
            )
    return candidates


# --- resources -------------------------------------------------------------

def load_english_wordlist(path: Optional[Path]) -> FrozenSet[str]:
    if path is None:
        return frozenset()
    return frozenset(word.lower() for word in read_word_list(path))


def load_kb_dictionary(path: Path, english_wordlist: FrozenSet[str] = frozenset()) -> KbAliasDictionary:
    """Read `canonical_id \\t alias \\t language`; dictionary words are dropped"""
    entries: Dict[str, str] = {}
    excluded = 0
    with open(path, encoding="utf-8", newline="") as f:
        for line_number, row in enumerate(csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or not row[0].strip() or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise ConfigurationError(f"{path}:{line_number}: expected 'id<TAB>alias<TAB>language'")
            kb_id, alias = row[0].strip(), row[1].strip()
            language = row[2].strip() if len(row) > 2 and row[2].strip() else "en"
            if language not in KB_LANGUAGES or not alias:
                continue
            if alias.lower() in english_wordlist:
                excluded += 1
                continue
            entries.setdefault(alias, kb_id)
    logger.info("Loaded %d aliases from %s (%d dictionary words excluded)", len(entries), path, excluded)
    return KbAliasDictionary(entries=entries, english_wordlist=english_wordlist)


@dataclass(frozen=True)
class ExactRule:
    """Lemmatized context pattern with one candidate slot"""

    text: str
    left: Tuple[str, ...]
    right: Tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "ExactRule":
        words = text.split()
        if words.count(SLOT) != 1:
            raise ConfigurationError(f"exact rule '{text}' must contain exactly one {SLOT} slot")
        slot = words.index(SLOT)
        return cls(
            text=text,
            left=tuple(lemmatize(w) for w in words[:slot]),
            right=tuple(lemmatize(w) for w in words[slot + 1:]),
        )

    def matches(self, lemmas: Sequence[str], start: int, end: int) -> bool:
        if start < len(self.left) or end + len(self.right) > len(lemmas):
            return False
        return (
            tuple(lemmas[start - len(self.left):start]) == self.left
            and tuple(lemmas[end:end + len(self.right)]) == self.right
        )


def load_exact_rules(path: Optional[Path] = None) -> List[ExactRule]:
    path = Path(path) if path is not None else resource_path("exact_rules.txt")
    if not path.exists():
        raise ConfigurationError(f"exact rule file not found: {path}")
    return [ExactRule.parse(line) for line in read_word_list(path)]


def load_negative_list(path: Optional[Path] = None) -> FrozenSet[str]:
    path = Path(path) if path is not None else resource_path("negative_list.txt")
    if not path.exists():
        raise ConfigurationError(f"negative list not found: {path}")
    return frozenset(read_word_list(path))


# --- labeling functions ----------------------------------------------------

def _vote(lf_id: str, value: Vote) -> LabelingFunctionVote:
    return LabelingFunctionVote(lf_id=lf_id, value=value)


def lf_dictionary(c: Candidate, dictionary: KbAliasDictionary) -> LabelingFunctionVote:
    hit = c.surface.strip() in dictionary
    return _vote("lf_dictionary", Vote.POSITIVE if hit else Vote.ABSTAIN)


def context_window(sentence: Sentence, start: int, end: int, width: int = CONTEXT_WIDTH) -> List[int]:
    """Indices of the nearest non-stopword, non-punctuation tokens on each side"""
    left: List[int] = []
    i = start - 1
    while i >= 0 and len(left) < width:
        if not _is_filler(sentence, i):
            left.append(i)
        i -= 1
    right: List[int] = []
    i = end
    while i < len(sentence.tokens) and len(right) < width:
        if not _is_filler(sentence, i):
            right.append(i)
        i += 1
    return sorted(left) + right


def is_version_token(sentence: Sentence, i: int) -> bool:
    surface = sentence.tokens[i].surface
    if V_VERSION_RE.match(surface) or DOTTED_VERSION_RE.match(surface):
        return True
    return (
        surface.lower() == "version"
        and i + 1 < len(sentence.tokens)
        and bool(NUMBER_RE.match(sentence.tokens[i + 1].surface))
    )


def _developer_at(sentence: Sentence, i: int) -> bool:
    tokens = sentence.tokens
    if not _is_capitalized(tokens[i].surface) or tokens[i].surface in DEVELOPER_SUFFIXES:
        return False
    # "SPSS Inc", "Mathworks Ltd"
    j = i + 1
    while j < len(tokens) and j - i <= MAX_DEVELOPER_RUN:
        surface = tokens[j].surface
        if surface in DEVELOPER_SUFFIXES:
            return True
        if not _is_capitalized(surface):
            break
        j += 1
    # "(StataCorp, College Station"
    return (
        i >= 1 and tokens[i - 1].surface == "("
        and i + 2 < len(tokens) and tokens[i + 1].surface == ","
        and _is_capitalized(tokens[i + 2].surface)
    )


def lf_general_context(c: Candidate, s: Sentence) -> LabelingFunctionVote:
    for i in context_window(s, c.start, c.end):
        if s.tokens[i].stem in HEAD_STEMS or is_version_token(s, i) or _developer_at(s, i):
            return _vote("lf_general_context", Vote.POSITIVE)
    return _vote("lf_general_context", Vote.ABSTAIN)


def sentence_lemmas(s: Sentence) -> List[str]:
    return [lemmatize(token.surface) for token in s.tokens]


def lf_exact_context(
    c: Candidate,
    s: Sentence,
    rules: Sequence[ExactRule],
    lemmas: Optional[Sequence[str]] = None,
) -> LabelingFunctionVote:
    lemmas = sentence_lemmas(s) if lemmas is None else lemmas
    hit = any(rule.matches(lemmas, c.start, c.end) for rule in rules)
    return _vote("lf_exact_context", Vote.POSITIVE if hit else Vote.ABSTAIN)


def lf_negative_list(c: Candidate, neglist: FrozenSet[str]) -> LabelingFunctionVote:
    return _vote("lf_negative_list", Vote.NEGATIVE if c.surface in neglist else Vote.ABSTAIN)


# --- registry --------------------------------------------------------------

class LabelingFunctionRegistry:
    """Ordered lf_id -> labeling function mapping; column order of the vote matrix"""

    def __init__(self):
        self._functions: Dict[str, LabelingFunction] = {}

    def register(self, lf_id: str, func: LabelingFunction) -> LabelingFunction:
        if lf_id in self._functions:
            raise ConfigurationError(f"labeling function '{lf_id}' registered twice")
        self._functions[lf_id] = func
        return func

    def labeling_function(self, lf_id: str) -> Callable[[LabelingFunction], LabelingFunction]:
        def decorator(func: LabelingFunction) -> LabelingFunction:
            return self.register(lf_id, func)
        return decorator

    @property
    def lf_ids(self) -> List[str]:
        return list(self._functions)

    def __contains__(self, lf_id: str) -> bool:
        return lf_id in self._functions

    def __len__(self) -> int:
        return len(self._functions)

    def votes_for(self, c: Candidate, s: Sentence) -> List[LabelingFunctionVote]:
        votes = []
        for lf_id, func in self._functions.items():
            vote = func(c, s)
            votes.append(vote if vote.lf_id == lf_id else vote.model_copy(update={"lf_id": lf_id}))
        return votes


def build_default_registry(
    dictionary: KbAliasDictionary,
    exact_rules: Sequence[ExactRule],
    negative_list: FrozenSet[str],
) -> LabelingFunctionRegistry:
    registry = LabelingFunctionRegistry()
    registry.register("lf_dictionary", lambda c, s: lf_dictionary(c, dictionary))
    registry.register("lf_general_context", lf_general_context)
    registry.register("lf_exact_context", partial(lf_exact_context, rules=tuple(exact_rules)))
    registry.register("lf_negative_list", lambda c, s: lf_negative_list(c, negative_list))
    return registry


def apply_labeling_functions(
    candidates: Sequence[Candidate],
    sentences: Iterable[Sentence],
    registry: LabelingFunctionRegistry,
    jobs: int = 1,
) -> np.ndarray:
    """Vote matrix (candidates x LFs) in the -1/0/1 convention"""
    by_ref = {(s.doc_id, s.index): s for s in sentences}

    def row(c: Candidate) -> List[int]:
        return [int(v.value) for v in registry.votes_for(c, by_ref[c.sentence_ref])]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(row, candidates))
    else:
        rows = [row(c) for c in candidates]
    if not rows:
        return np.full((0, len(registry)), Vote.ABSTAIN, dtype=np.int8)
    return np.asarray(rows, dtype=np.int8)


def lf_summary(votes: np.ndarray, lf_ids: Sequence[str]) -> List[LfSummaryRow]:
    """Coverage, overlap and conflict rates per labeling function"""
    n = votes.shape[0]
    voted = votes != Vote.ABSTAIN
    rows = []
    for j, lf_id in enumerate(lf_ids):
        others = np.delete(voted, j, axis=1)
        other_votes = np.delete(votes, j, axis=1)
        overlap = voted[:, j] & others.any(axis=1)
        conflict = voted[:, j] & (others & (other_votes != votes[:, [j]])).any(axis=1)
        rows.append(
            LfSummaryRow(
                lf_id=lf_id,
                coverage=float(voted[:, j].mean()) if n else 0.0,
                overlaps=float(overlap.mean()) if n else 0.0,
                conflicts=float(conflict.mean()) if n else 0.0,
                positives=int((votes[:, j] == Vote.POSITIVE).sum()),
                negatives=int((votes[:, j] == Vote.NEGATIVE).sum()),
            )
        )
    return rows

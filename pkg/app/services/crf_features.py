"""Feature templates of the CRF tagger"""
import re
from typing import List, Optional

from app.schemas.corpus import Sentence
from app.schemas.weak_supervision import MAX_CANDIDATE_LENGTH, KbAliasDictionary
from app.services.labeling_functions import is_version_token

# Bump when the feature templates change; stored in every model dump
TEMPLATE_ID = "std-v1"

WINDOW_OFFSETS = (-2, -1, 1, 2)
AFFIX_LENGTHS = (2, 3, 4)
VERSION_DISTANCE = 2


def word_shape(surface: str) -> str:
    """Character classes: X upper, x lower, d digit, anything else kept ("v17.0" -> "xdd.d")"""
    out = []
    for ch in surface:
        if ch.isupper():
            out.append("X")
        elif ch.islower():
            out.append("x")
        elif ch.isdigit():
            out.append("d")
        else:
            out.append(ch)
    return "".join(out)


def short_shape(surface: str) -> str:
    return re.sub(r"(.)\1+", r"\1", word_shape(surface))


def dictionary_parts(sentence: Sentence, dictionary: Optional[KbAliasDictionary]) -> List[bool]:
    """Tokens covered by some multi-token dictionary alias in this sentence

    Matching uses token surfaces, so the original text and its space-joined
    token form get the same features.
    """
    covered = [False] * len(sentence.tokens)
    if not dictionary:
        return covered
    n = len(sentence.tokens)
    for start in range(n):
        for end in range(start + 2, min(start + MAX_CANDIDATE_LENGTH, n) + 1):
            joined = "".join(t.surface for t in sentence.tokens[start:end])
            if joined in dictionary.spacing_free_aliases:
                for i in range(start, end):
                    covered[i] = True
    return covered


def _token_features(sentence: Sentence, i: int, dictionary: Optional[KbAliasDictionary], dict_part: bool) -> List[str]:
    surface = sentence.tokens[i].surface
    lower = surface.lower()
    features = [
        f"lower={lower}",
        f"shape={word_shape(surface)}",
        f"short_shape={short_shape(surface)}",
    ]
    for k in AFFIX_LENGTHS:
        if len(lower) >= k:
            features.append(f"prefix{k}={lower[:k]}")
            features.append(f"suffix{k}={lower[-k:]}")
    if any(ch.isdigit() for ch in surface):
        features.append("has_digit")
    if i > 0 and surface[:1].isupper():
        features.append("capitalized=true")
    hit = dictionary is not None and surface in dictionary
    features.append(f"dict-hit={'true' if hit else 'false'}")
    if dict_part:
        features.append("dict-part=true")
    return features


def sentence_features(sentence: Sentence, dictionary: Optional[KbAliasDictionary] = None) -> List[List[str]]:
    """Sorted feature ids for every token of the sentence"""
    n = len(sentence.tokens)
    parts = dictionary_parts(sentence, dictionary)
    own = [_token_features(sentence, i, dictionary, parts[i]) for i in range(n)]
    versions = [is_version_token(sentence, i) for i in range(n)]

    result = []
    for i in range(n):
        features = ["bias"] + own[i]
        lo, hi = max(0, i - VERSION_DISTANCE), min(n, i + VERSION_DISTANCE + 1)
        if any(versions[j] for j in range(lo, hi) if j != i):
            features.append("version-nearby=true")
        for offset in WINDOW_OFFSETS:
            j = i + offset
            prefix = f"{offset:+d}:"
            if j < 0:
                features.append(f"{prefix}BOS")
            elif j >= n:
                features.append(f"{prefix}EOS")
            else:
                features.extend(prefix + f for f in own[j])
        result.append(sorted(set(features)))
    return result


def extract_features(sentence: Sentence, i: int, dictionary: Optional[KbAliasDictionary] = None) -> List[str]:
    if not 0 <= i < len(sentence.tokens):
        raise IndexError(f"token index {i} outside sentence of {len(sentence.tokens)} tokens")
    return sentence_features(sentence, dictionary)[i]

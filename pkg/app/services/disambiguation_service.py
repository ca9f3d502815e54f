"""Collapsing spelling variants of software names and linking them to the KB"""
import csv
import logging
import re
import string
import unicodedata
from collections import defaultdict
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import pandas as pd

from app.core.errors import ConfigurationError
from app.schemas.disambiguation import (
    EXCLUDED_KB_TYPES,
    DisambiguationResult,
    KbEntry,
    MentionCluster,
    MentionString,
    SoftwareEnrichment,
)
from app.schemas.tagging import Mention
from app.services.text_processing import default_stopwords, stem
from app.utils.files import read_word_list, resource_path, write_lines

logger = logging.getLogger(__name__)

GREEK_RE = re.compile("[Ͱ-Ͽἀ-῿]")
DIGIT_RE = re.compile(r"\d")
WORD_SPLIT_RE = re.compile(r"[\W_]+")
KB_FIELD_KINDS = {
    "label", "alias", "redirect", "disambiguates", "developer", "type", "replaced_by",
}
ENRICHMENT_COLUMNS = list(SoftwareEnrichment.model_fields)


def load_marketing_syllables(path: Optional[Path] = None) -> FrozenSet[str]:
    return frozenset(w.lower() for w in read_word_list(path or resource_path("marketing_syllables.txt")))


def normalize_mention(surface: str, syllables: Optional[FrozenSet[str]] = None) -> str:
    """Case-fold, strip digits, Greek letters and punctuation, drop trailing
    marketing syllables and stem every remaining word"""
    syllables = load_marketing_syllables() if syllables is None else syllables
    folded = unicodedata.normalize("NFKC", surface).casefold()
    stripped = DIGIT_RE.sub(" ", GREEK_RE.sub(" ", folded))
    words = [w for w in WORD_SPLIT_RE.split(stripped) if w]
    syllable_stems = {stem(s) for s in syllables}
    while len(words) > 1 and stem(words[-1]) in syllable_stems:
        words.pop()
    normal = " ".join(stem(w) for w in words)
    return normal or " ".join(folded.split())


def make_abbreviation(surface: str, stopwords: Optional[FrozenSet[str]] = None) -> str:
    stopwords = default_stopwords() if stopwords is None else stopwords
    words = [w.strip(string.punctuation) for w in surface.split()]
    words = [w for w in words if w]
    if len(words) <= 1:
        return (words[0] if words else surface).upper()
    content = [w for w in words if w.lower() not in stopwords] or words
    return "".join(w[0].upper() for w in content)


def aggregate_mentions(mentions: Iterable[Mention]) -> List[MentionString]:
    refs: Dict[str, List[Tuple[str, Tuple[int, int]]]] = defaultdict(list)
    for m in mentions:
        refs[m.surface].append((m.doc_id, (m.char_start, m.char_end)))
    return [
        MentionString(surface=surface, frequency=len(r), doc_refs=sorted(r))
        for surface, r in sorted(refs.items())
    ]


def _most_frequent(members: Sequence[MentionString]) -> str:
    return min(members, key=lambda m: (-m.frequency, m.surface)).surface


def representative_name(c: MentionCluster, kb: Optional[Dict[str, KbEntry]] = None) -> str:
    if c.kb_id is not None and kb is not None and c.kb_id in kb:
        return kb[c.kb_id].label
    return _most_frequent(c.members)


def _make_cluster(members: Iterable[MentionString], normal_form: str, **extra) -> MentionCluster:
    members = sorted(members, key=lambda m: m.surface)
    return MentionCluster(
        members=members,
        normal_form=normal_form,
        abbreviation=make_abbreviation(_most_frequent(members)),
        representative_name=_most_frequent(members),
        **extra,
    )


def cluster_mentions(
    mentions: Sequence[MentionString], syllables: Optional[FrozenSet[str]] = None
) -> List[MentionCluster]:
    """Stage 1 merges equal normal forms; stage 2 folds multi-word clusters into the
    single-token cluster spelling their abbreviation"""
    syllables = load_marketing_syllables() if syllables is None else syllables
    by_form: Dict[str, List[MentionString]] = defaultdict(list)
    for m in sorted(mentions, key=lambda m: m.surface):
        by_form[normalize_mention(m.surface, syllables)].append(m)

    single_token = {}
    for form, members in by_form.items():
        if len(form.split()) == 1:
            for member in members:
                single_token.setdefault(member.surface.casefold(), form)

    target: Dict[str, str] = {}
    for form, members in sorted(by_form.items()):
        if len(form.split()) > 1:
            abbreviation = make_abbreviation(_most_frequent(members)).casefold()
            if abbreviation in single_token:
                target[form] = single_token[abbreviation]

    merged: Dict[str, List[MentionString]] = defaultdict(list)
    for form, members in by_form.items():
        merged[target.get(form, form)].extend(members)
    return sorted(
        (_make_cluster(members, form) for form, members in merged.items()),
        key=lambda c: c.normal_form,
    )


def _key(text: str, kb_pass: int) -> str:
    # labels and redirects must match verbatim; later passes ignore case and spacing
    if kb_pass == 1:
        return text.strip()
    return " ".join(text.casefold().split())


def _pass_keys(entry: KbEntry, kb_pass: int) -> Set[str]:
    if kb_pass == 1:
        names = [entry.label, *entry.redirects, *entry.disambiguates]
    elif kb_pass == 2:
        names = [alias for alias, _ in entry.aliases]
    else:
        if not entry.developer:
            return set()
        names = [f"{entry.developer} {entry.label}", f"{entry.label} {entry.developer}"]
    return {_key(name, kb_pass) for name in names if name.strip()}


def _merge_linked(clusters: List[MentionCluster], kb: Dict[str, KbEntry]) -> List[MentionCluster]:
    by_id: Dict[str, List[MentionCluster]] = defaultdict(list)
    rest = []
    for c in clusters:
        (by_id[c.kb_id] if c.kb_id is not None else rest).append(c)
    for kb_id, group in by_id.items():
        group.sort(key=lambda c: (-c.frequency, c.normal_form))
        members = [m for c in group for m in c.members]
        merged = _make_cluster(members, group[0].normal_form, kb_id=kb_id)
        rest.append(merged.model_copy(update={"representative_name": kb[kb_id].label}))
    return sorted(rest, key=lambda c: c.normal_form)


def link_kb(clusters: Sequence[MentionCluster], kb: Sequence[KbEntry]) -> List[MentionCluster]:
    """Label/redirect pass, alias pass, then developer+label pass; ambiguous clusters stay unlinked"""
    entries = {entry.id: entry for entry in kb}
    current = list(clusters)
    for kb_pass in (1, 2, 3):
        index: Dict[str, Set[str]] = defaultdict(set)
        for entry in kb:
            for key in _pass_keys(entry, kb_pass):
                index[key].add(entry.id)
        updated = []
        for c in current:
            if c.kb_id is not None or c.ambiguous:
                updated.append(c)
                continue
            matches = set().union(*(index.get(_key(m.surface, kb_pass), set()) for m in c.members))
            if len(matches) == 1:
                updated.append(c.model_copy(update={"kb_id": next(iter(matches))}))
            elif len(matches) > 1:
                logger.info("Cluster '%s' matches %d KB entries in pass %d; left unlinked",
                            c.representative_name, len(matches), kb_pass)
                updated.append(c.model_copy(update={"ambiguous": True}))
            else:
                updated.append(c)
        current = _merge_linked(updated, entries)
    return current


# --- KB export and enrichment ----------------------------------------------

def load_kb_export(path: Path) -> Tuple[List[KbEntry], List[Tuple[str, str]]]:
    """Read `id \\t field_kind \\t value \\t language?` rows; video games are dropped"""
    fields: Dict[str, Dict[str, list]] = defaultdict(lambda: defaultdict(list))
    with open(path, encoding="utf-8", newline="") as f:
        for line_number, row in enumerate(csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or not row[0].strip() or row[0].startswith("#"):
                continue
            if len(row) < 3:
                raise ConfigurationError(f"{path}:{line_number}: expected 'id<TAB>kind<TAB>value'")
            kb_id, kind, value = row[0].strip(), row[1].strip(), row[2].strip()
            if kind == "disambiguate":
                kind = "disambiguates"
            if kind not in KB_FIELD_KINDS:
                raise ConfigurationError(f"{path}:{line_number}: unknown field kind '{kind}'")
            language = row[3].strip() if len(row) > 3 and row[3].strip() else "en"
            fields[kb_id][kind].append((value, language) if kind == "alias" else value)

    entries, replaced_by, dropped = [], [], 0
    for kb_id in sorted(fields):
        f = fields[kb_id]
        types = frozenset(t.lower() for t in f["type"])
        if types & EXCLUDED_KB_TYPES:
            dropped += 1
            continue
        if not f["label"]:
            raise ConfigurationError(f"KB entry {kb_id} has no label")
        entries.append(
            KbEntry(
                id=kb_id,
                label=f["label"][0],
                aliases=f["alias"],
                redirects=f["redirect"],
                disambiguates=f["disambiguates"],
                developer=f["developer"][0] if f["developer"] else None,
                type_tags=types,
                replaced_by=f["replaced_by"],
            )
        )
        replaced_by.extend((kb_id, new_id) for new_id in f["replaced_by"])
    logger.info("Loaded %d KB entries (%d video games dropped), %d replaced-by pairs",
                len(entries), dropped, len(replaced_by))
    return entries, replaced_by


def _parse_bool(value: str, name: str) -> Optional[bool]:
    value = value.strip().lower()
    if value in ("", "unknown"):
        return None
    if value in ("true", "yes", "1"):
        return True
    if value in ("false", "no", "0"):
        return False
    raise ConfigurationError(f"enrichment for '{name}': cannot read boolean '{value}'")


def load_enrichment(path: Path) -> Dict[str, SoftwareEnrichment]:
    frame = pd.read_csv(path, sep="\t", dtype=str, keep_default_na=False)
    missing = [c for c in ("name", "is_free", "is_source_available") if c not in frame.columns]
    if missing:
        raise ConfigurationError(f"{path}: enrichment header lacks {missing}")
    records = {}
    for row in frame.to_dict(orient="records"):
        name = row["name"].strip()
        values = {
            column: (row.get(column, "").strip() or None)
            for column in ENRICHMENT_COLUMNS
            if column not in ("name", "is_free", "is_source_available")
        }
        records[name] = SoftwareEnrichment(
            name=name,
            is_free=_parse_bool(row["is_free"], name),
            is_source_available=_parse_bool(row["is_source_available"], name),
            **values,
        )
    return records


def lookup_enrichment(
    kb_id: Optional[str], name: str, enrichment: Dict[str, SoftwareEnrichment]
) -> Optional[SoftwareEnrichment]:
    """Match on the KB id first, then on the name (case-insensitive)"""
    if kb_id is not None:
        for record in enrichment.values():
            if kb_id in (record.wikidata_id, record.software_ontology_id, record.wikipedia_id):
                return record
    wanted = name.casefold()
    for key in sorted(enrichment):
        if key.casefold() == wanted:
            return enrichment[key]
    return None


def enrichment_for(
    cluster: MentionCluster, enrichment: Dict[str, SoftwareEnrichment]
) -> Optional[SoftwareEnrichment]:
    return lookup_enrichment(cluster.kb_id, cluster.representative_name, enrichment)


# --- stage -----------------------------------------------------------------

class DisambiguationService:
    def __init__(self, kb: Sequence[KbEntry] = (), syllables: Optional[FrozenSet[str]] = None):
        self.kb = list(kb)
        self.syllables = load_marketing_syllables() if syllables is None else syllables

    def disambiguate(self, mentions: Iterable[Mention]) -> DisambiguationResult:
        strings = aggregate_mentions(mentions)
        clusters = cluster_mentions(strings, self.syllables)
        after_clustering = len(clusters)
        clusters = link_kb(clusters, self.kb)
        linked = sum(1 for c in clusters if c.kb_id is not None)
        logger.info(
            "Disambiguation: %d unique names -> %d clusters -> %d entities (%d linked, %d ambiguous)",
            len(strings), after_clustering, len(clusters), linked, sum(c.ambiguous for c in clusters),
        )
        return DisambiguationResult(clusters=clusters, unique_names=len(strings))


def cluster_report_lines(result: DisambiguationResult) -> List[str]:
    lines = ["representative\tkb_id\tambiguous\tmembers"]
    for c in sorted(result.clusters, key=lambda c: (c.representative_name, c.normal_form)):
        members = ";".join(f"{m.surface}:{m.frequency}" for m in sorted(c.members, key=lambda m: (-m.frequency, m.surface)))
        lines.append(f"{c.representative_name}\t{c.kb_id or ''}\t{str(c.ambiguous).lower()}\t{members}")
    return lines


def write_cluster_report(path: Path, result: DisambiguationResult) -> Path:
    return write_lines(path, cluster_report_lines(result))

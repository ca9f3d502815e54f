"""Service for parsing article files and locating Methods & Materials sections"""
import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from lxml import etree

from app.core.errors import ArticleParseError, ConfigurationError, NoContentError
from app.schemas.corpus import AuthorRef, Document, Section, SegmentedDocument
from app.services.text_processing import split_sentences
from app.utils.files import read_word_list, resource_path

logger = logging.getLogger(__name__)

SECTION_SEPARATOR = "\n\n"
PARAGRAPH_SEPARATOR = "\n\n"
FRONT_MATTER_KEYS = {"title", "doi", "year", "authors", "publisher"}
HEADING_NUMBER_RE = re.compile(r"^(?:\d+(?:\.\d+)*\.?|[IVXLC]+\.)\s+")

# (path, doi, year, same_as)
ManifestEntry = Tuple[Path, Optional[str], Optional[int], Optional[str]]


class ArticleFormat(str, Enum):
    JATS_XML = "jats-xml"
    PLAIN_TEXT = "plain-text-with-headings"

    @classmethod
    def from_path(cls, path: Path) -> "ArticleFormat":
        return cls.JATS_XML if path.suffix.lower() in {".xml", ".nxml"} else cls.PLAIN_TEXT


def normalize_heading(heading: str) -> str:
    heading = HEADING_NUMBER_RE.sub("", heading.strip())
    heading = heading.lower().replace("&", " & ")
    heading = re.sub(r"\s+", " ", heading)
    return heading.strip(" .:;")


def _collapse(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def _assemble(doc_id: str, blocks: Sequence[Tuple[str, str]], **metadata) -> Document:
    """Join (heading, text) blocks into the full text and record section offsets"""
    parts: List[str] = []
    sections: List[Section] = []
    cursor = 0
    for heading, body in blocks:
        prefix = f"{heading}\n" if heading else ""
        parts.append(prefix)
        cursor += len(prefix)
        sections.append(Section(heading=heading, text=body, char_offset=cursor))
        parts.append(body)
        cursor += len(body)
        parts.append(SECTION_SEPARATOR)
        cursor += len(SECTION_SEPARATOR)
    return Document(id=doc_id, sections=sections, text="".join(parts), **metadata)


def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ArticleParseError("input is not valid UTF-8", byte_offset=e.start) from e


def _byte_offset(data: bytes, line: int, column: int) -> int:
    lines = data.split(b"\n")
    offset = sum(len(l) + 1 for l in lines[: max(line - 1, 0)])
    return offset + max(column - 1, 0)


def _text_of(element) -> str:
    return _collapse("".join(element.itertext()))


def _first_text(root, path: str) -> Optional[str]:
    found = root.xpath(path)
    if not found:
        return None
    value = found[0] if isinstance(found[0], str) else _text_of(found[0])
    value = _collapse(value)
    return value or None


def _jats_authors(root) -> List[AuthorRef]:
    affiliations: Dict[str, str] = {}
    for aff in root.xpath("//aff[@id]"):
        labels = aff.xpath("./label")
        text = _text_of(aff)
        if labels:
            text = _collapse(text[len(_text_of(labels[0])):])
        affiliations[aff.get("id")] = text
    authors = []
    for contrib in root.xpath("//contrib[@contrib-type='author']"):
        surname = _first_text(contrib, "./name/surname")
        given = _first_text(contrib, "./name/given-names")
        name = " ".join(part for part in (given, surname) if part) or _first_text(contrib, "./collab")
        if not name:
            continue
        orcid = _first_text(contrib, "./contrib-id[@contrib-id-type='orcid']")
        affiliation = None
        for xref in contrib.xpath("./xref[@ref-type='aff']"):
            affiliation = affiliations.get(xref.get("rid"))
            if affiliation:
                break
        if affiliation is None:
            affiliation = _first_text(contrib, "./aff")
        authors.append(AuthorRef(name=name, orcid=orcid, affiliation=affiliation))
    return authors


def _jats_section_text(sec) -> str:
    blocks = []
    for child in sec:
        if not isinstance(child.tag, str) or etree.QName(child).localname == "title":
            continue
        text = _text_of(child)
        if text:
            blocks.append(text)
    return PARAGRAPH_SEPARATOR.join(blocks)


def _parse_jats(data: bytes, doc_id: str) -> Document:
    _decode(data)
    parser = etree.XMLParser(resolve_entities=False, no_network=True, recover=False)
    try:
        root = etree.fromstring(data, parser=parser)
    except etree.XMLSyntaxError as e:
        line, column = e.position if e.position else (0, 0)
        raise ArticleParseError(f"malformed XML: {e.msg}", _byte_offset(data, line, column)) from e

    doi = _first_text(root, "//article-meta/article-id[@pub-id-type='doi']")
    year_text = _first_text(root, "//article-meta/pub-date/year")
    metadata = dict(
        title=_first_text(root, "//article-meta/title-group/article-title") or "",
        doi=doi,
        year=int(year_text) if year_text and year_text.isdigit() else None,
        publisher=_first_text(root, "//publisher/publisher-name"),
        authors=_jats_authors(root),
    )

    blocks: List[Tuple[str, str]] = []
    bodies = root.xpath("//body")
    if bodies:
        body = bodies[0]
        for sec in body.xpath("./sec"):
            heading = _first_text(sec, "./title") or ""
            blocks.append((heading, _jats_section_text(sec)))
        if not blocks:
            loose = _jats_section_text(body)
            if loose:
                blocks.append(("body", loose))
    if not any(text for _, text in blocks):
        raise NoContentError(doc_id)
    return _assemble(doi or doc_id, blocks, **metadata)


def _looks_like_heading(line: str, previous_blank: bool, next_line: Optional[str]) -> bool:
    stripped = line.strip()
    if not stripped or not previous_blank or next_line is None or not next_line.strip():
        return False
    if len(stripped) > 80 or len(stripped.split()) > 8:
        return False
    if stripped[-1] in ".,;:!?":
        return False
    first = HEADING_NUMBER_RE.sub("", stripped)[:1]
    return first.isupper()


def _parse_plain_text(data: bytes, doc_id: str) -> Document:
    text = _decode(data).replace("\r\n", "\n")
    lines = text.split("\n")
    if not any(line.strip() for line in lines):
        raise NoContentError(doc_id)

    metadata: Dict[str, object] = {}
    cursor = 0
    while cursor < len(lines) and lines[cursor].strip():
        key, sep, value = lines[cursor].partition(":")
        if not sep or key.strip().lower() not in FRONT_MATTER_KEYS:
            break
        metadata[key.strip().lower()] = value.strip()
        cursor += 1
    if metadata:
        # front matter only counts when it forms a whole block
        if cursor < len(lines) and lines[cursor].strip():
            metadata, cursor = {}, 0

    blocks: List[Tuple[str, List[str]]] = []
    preamble: List[str] = []
    previous_blank = True
    for i in range(cursor, len(lines)):
        line = lines[i]
        next_line = lines[i + 1] if i + 1 < len(lines) else None
        if _looks_like_heading(line, previous_blank, next_line):
            blocks.append((line.strip(), []))
        elif blocks:
            blocks[-1][1].append(line)
        else:
            preamble.append(line)
        previous_blank = not line.strip()

    def paragraphs(raw: List[str]) -> str:
        chunks = re.split(r"\n\s*\n", "\n".join(raw))
        return PARAGRAPH_SEPARATOR.join(_collapse(c) for c in chunks if c.strip())

    section_blocks = [(heading, paragraphs(body)) for heading, body in blocks]
    if not section_blocks:
        section_blocks = [("body", paragraphs(preamble))]
    if not any(body for _, body in section_blocks):
        raise NoContentError(doc_id)

    year = str(metadata.get("year", ""))
    authors = [
        AuthorRef(name=name.strip())
        for name in str(metadata.get("authors", "")).split(";")
        if name.strip()
    ]
    doi = metadata.get("doi") or None
    return _assemble(
        doi or doc_id,
        section_blocks,
        title=str(metadata.get("title", "")),
        doi=doi,
        year=int(year) if year.isdigit() else None,
        publisher=metadata.get("publisher") or None,
        authors=authors,
    )


def parse_article(data: bytes, format: ArticleFormat, doc_id: str = "article", source_path: str = "") -> Document:
    """Parse one article; the id defaults to the DOI when present"""
    format = ArticleFormat(format)
    if format == ArticleFormat.JATS_XML:
        document = _parse_jats(data, doc_id)
    else:
        document = _parse_plain_text(data, doc_id)
    return document.model_copy(update={"source_path": source_path})


def load_mm_headings(path: Optional[Path] = None) -> FrozenSet[str]:
    entries = read_word_list(path or resource_path("mm_headings.txt"))
    return frozenset(normalize_heading(entry) for entry in entries)


def find_mm_section(doc: Document, headings: Optional[FrozenSet[str]] = None) -> Optional[Section]:
    """First section whose normalized heading is an M&M synonym"""
    headings = load_mm_headings() if headings is None else headings
    for section in doc.sections:
        if normalize_heading(section.heading) in headings and section.text.strip():
            return section.model_copy(update={"is_mm": True})
    return None


def segment_mm(
    doc: Document,
    headings: Optional[FrozenSet[str]] = None,
    stopwords: Optional[FrozenSet[str]] = None,
) -> Optional[SegmentedDocument]:
    """Sentences of the M&M section, or None when the document has none"""
    section = find_mm_section(doc, headings)
    if section is None:
        return None
    return SegmentedDocument(
        doc_id=doc.id,
        section_offset=section.char_offset,
        sentences=split_sentences(section.text, doc_id=doc.id, stopwords=stopwords),
    )


def split_corpus(
    doc_ids: Sequence[str],
    seed: int = 42,
    fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2),
) -> Tuple[List[str], List[str], List[str]]:
    """Deterministic document-level train/devel/test split"""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must sum to 1, got {fractions}")
    ordered = sorted(doc_ids)
    random.Random(seed).shuffle(ordered)
    n_train = round(len(ordered) * fractions[0])
    n_devel = round(len(ordered) * fractions[1])
    return (
        ordered[:n_train],
        ordered[n_train:n_train + n_devel],
        ordered[n_train + n_devel:],
    )


class IngestService:
    """Loads a corpus directory into Documents"""

    def __init__(self, jobs: int = 1):
        self.jobs = jobs

    def read_manifest(self, corpus_dir: Path, manifest_path: Path) -> List[ManifestEntry]:
        """Tab-separated rows: path, doi?, year?, same_as? (an external graph IRI)"""
        entries = []
        with open(manifest_path, encoding="utf-8") as f:
            for line_number, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                fields = line.split("\t")
                path = Path(fields[0])
                if not path.is_absolute():
                    path = corpus_dir / path
                doi = fields[1].strip() if len(fields) > 1 and fields[1].strip() else None
                year_field = fields[2].strip() if len(fields) > 2 else ""
                if year_field and not year_field.isdigit():
                    raise ConfigurationError(f"{manifest_path}:{line_number}: bad year '{year_field}'")
                same_as = fields[3].strip() if len(fields) > 3 and fields[3].strip() else None
                entries.append((path, doi, int(year_field) if year_field else None, same_as))
        return entries

    def _load_one(self, entry: ManifestEntry) -> Document:
        path, doi, year, same_as = entry
        document = parse_article(
            path.read_bytes(), ArticleFormat.from_path(path), doc_id=path.stem, source_path=str(path)
        )
        update: Dict[str, object] = {}
        if doi:
            update.update(id=doi, doi=doi)
        if year is not None:
            update["year"] = year
        if same_as:
            update["same_as"] = [same_as]
        if update:
            document = Document.model_validate({**document.model_dump(), **update})
        return document

    def load_corpus(self, corpus_dir: Path, manifest_path: Optional[Path] = None) -> List[Document]:
        corpus_dir = Path(corpus_dir)
        if manifest_path is not None:
            entries = self.read_manifest(corpus_dir, Path(manifest_path))
        else:
            paths = sorted(
                p for p in corpus_dir.iterdir()
                if p.suffix.lower() in {".xml", ".nxml", ".txt"}
            )
            entries = [(p, None, None, None) for p in paths]

        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            documents = list(pool.map(self._load_one, entries))

        seen = set()
        for document in documents:
            if document.id in seen:
                raise ConfigurationError(f"duplicate document id in corpus: {document.id}")
            seen.add(document.id)
        logger.info("Parsed %d documents from %s", len(documents), corpus_dir)
        return documents

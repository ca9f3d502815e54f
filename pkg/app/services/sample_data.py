"""Synthetic fixtures: a 20-article corpus, KB files, gold corpora and a config file"""
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from app.schemas.corpus import Sentence
from app.schemas.tagging import TaggedDocument, TaggedSentence, tags_from_runs
from app.services.corpus_io import format_tagged_corpus
from app.services.ingest_service import split_corpus
from app.services.text_processing import tokenize
from app.utils.files import write_lines, write_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SoftwareFixture:
    name: str
    kb_id: str
    developer: str
    is_free: Optional[bool] = None
    is_source_available: Optional[bool] = None
    aliases: Tuple[str, ...] = ()


SOFTWARE: Tuple[SoftwareFixture, ...] = (
    SoftwareFixture("SPSS", "Q900001", "IBM", False, False, ("PASW Statistics",)),
    SoftwareFixture("SAS", "Q900002", "SAS Institute", False, False),
    SoftwareFixture("Stata", "Q900003", "StataCorp", False, False),
    SoftwareFixture("MATLAB", "Q900004", "MathWorks", False, False),
    SoftwareFixture("GraphPad Prism", "Q900005", "GraphPad Software", False, False, ("Prism",)),
    SoftwareFixture("ImageJ", "Q900006", "NIH", True, True),
    SoftwareFixture("Fiji", "Q900007", "Fiji Team", True, True),
    SoftwareFixture("WinBUGS", "Q900008", "MRC Biostatistics Unit", True, False),
    SoftwareFixture("OpenBUGS", "Q900009", "MRC Biostatistics Unit", True, True),
    SoftwareFixture("ArcGIS", "Q900010", "Esri", False, False),
    SoftwareFixture("NVivo", "Q900011", "QSR International", False, False),
    SoftwareFixture("ATLAS.ti", "Q900012", "Scientific Software Development", False, False),
    SoftwareFixture("Mplus", "Q900013", "Muthen", False, False),
    SoftwareFixture("LISREL", "Q900014", "Scientific Software International", False, False),
    SoftwareFixture("AMOS", "Q900015", "IBM", False, False),
    SoftwareFixture("BLAST", "Q900016", "NCBI", True, True),
    SoftwareFixture("ClustalW", "Q900017", "EMBL", True, True),
    SoftwareFixture("MEGA", "Q900018", "Kumar Lab", True, False),
    SoftwareFixture("PAUP", "Q900019", "Sinauer Associates", False, False),
    SoftwareFixture("MrBayes", "Q900020", "Huelsenbeck Lab", True, True),
    SoftwareFixture("BEAST", "Q900021", "BEAST Developers", True, True),
    SoftwareFixture("PLINK", "Q900022", "Purcell Lab", True, True),
    SoftwareFixture("Bowtie", "Q900023", "Langmead Lab", True, True),
    SoftwareFixture("SAMtools", "Q900024", "Sanger Institute", True, True),
    SoftwareFixture("GATK", "Q900025", "Broad Institute", True, True),
    SoftwareFixture("Cytoscape", "Q900026", "Cytoscape Consortium", True, True),
    SoftwareFixture("FlowJo", "Q900027", "Tree Star", False, False),
    SoftwareFixture("EndNote", "Q900028", "Clarivate", False, False),
    SoftwareFixture("Minitab", "Q900029", "Minitab Inc", False, False),
    SoftwareFixture("Statistica", "Q900030", "StatSoft", False, False),
)
SOFTWARE_BY_NAME: Dict[str, SoftwareFixture] = {s.name: s for s in SOFTWARE}

# surface forms of one product that all resolve to the SPSS entry
SPSS_VARIANTS = (
    "SPSS",
    "Statistical Package for the Social Sciences",
    "IBM SPSS Statistics",
    "Statistical Package for Social Sciences",
    "IBM SPSS",
)

# "beast" is an English word, so the BEAST alias never reaches the dictionary
ENGLISH_WORDS = (
    "analysis", "data", "software", "image", "images", "model", "version", "package",
    "statistics", "prism", "beast", "sample", "samples", "method", "methods", "study",
)

POSITIVE_TEMPLATES = (
    "Statistical analysis was performed using {name} version {version} ({developer} Inc, Chicago, IL).",
    "Data were analyzed with {name} {version} ({developer}, College Station, TX).",
    "We used {name} software for all analyses.",
    "All models were run in {name} version {version}.",
    "Images were processed with {name} software.",
)
NEGATIVE_SENTENCES = (
    "Samples were stored at -80 degrees until analysis.",
    "Patients were recruited between 2005 and 2010.",
    "The protocol was approved by the local ethics committee.",
    "Blood samples were collected from each participant.",
    "Section 2 describes the ELISA procedure in detail.",
    "Cells were cultured in medium supplemented with serum.",
    "Participants completed the questionnaire at baseline.",
)

AUTHORS = (
    "Anna Schmidt", "Kenji Sato", "Maria Garcia", "John Miller", "Li Wei",
    "Fatima Khan", "Pierre Dubois", "Olga Ivanova",
)
PUBLISHER = "Public Library of Science"
N_ARTICLES = 20
FIRST_YEAR = 2005


def _version(rng: random.Random) -> str:
    return f"{rng.randint(1, 22)}.{rng.randint(0, 9)}"


def positive_sentence(name: str, rng: random.Random, developer: Optional[str] = None) -> str:
    template = rng.choice(POSITIVE_TEMPLATES)
    fixture = SOFTWARE_BY_NAME.get(name)
    developer = developer or (fixture.developer if fixture else "Acme")
    return template.format(name=name, version=_version(rng), developer=developer)


def tag_sentence(text: str, names: Sequence[str], doc_id: str = "", index: int = 0) -> TaggedSentence:
    """Gold tags for the first occurrence of each name"""
    tokens = tokenize(text)
    surfaces = [t.surface for t in tokens]
    runs = []
    for name in names:
        wanted = [t.surface for t in tokenize(name)]
        for start in range(len(surfaces) - len(wanted) + 1):
            if surfaces[start:start + len(wanted)] == wanted:
                runs.append((start, start + len(wanted)))
                break
        else:
            raise ValueError(f"'{name}' does not occur in '{text}'")
    sentence = Sentence(doc_id=doc_id, index=index, text=text, tokens=tokens)
    return TaggedSentence(sentence=sentence, tags=tags_from_runs(len(tokens), sorted(runs)))


def synthetic_gold_corpus(
    n_sentences: int = 200,
    seed: int = 42,
    sentences_per_document: int = 10,
    positive_rate: float = 0.6,
    names: Optional[Sequence[str]] = None,
) -> List[TaggedDocument]:
    """Cue-pattern sentences over the 30-name dictionary, tagged with their gold spans"""
    rng = random.Random(seed)
    names = list(names or SOFTWARE_BY_NAME)
    documents: List[TaggedDocument] = []
    for start in range(0, n_sentences, sentences_per_document):
        doc_id = f"gold-{start // sentences_per_document:04d}"
        sentences = []
        for index in range(min(sentences_per_document, n_sentences - start)):
            if rng.random() < positive_rate:
                name = rng.choice(names)
                sentences.append(tag_sentence(positive_sentence(name, rng), [name], doc_id, index))
            else:
                sentences.append(tag_sentence(rng.choice(NEGATIVE_SENTENCES), [], doc_id, index))
        documents.append(TaggedDocument(doc_id=doc_id, sentences=sentences))
    return documents


def gold_split(seed: int = 42) -> Tuple[List[TaggedDocument], List[TaggedDocument]]:
    """200 gold sentences split by document into 150 training and 50 held-out sentences"""
    corpus = synthetic_gold_corpus(200, seed)
    train_ids, _, test_ids = split_corpus([d.doc_id for d in corpus], seed, (0.75, 0.0, 0.25))
    by_id = {d.doc_id: d for d in corpus}
    return [by_id[i] for i in sorted(train_ids)], [by_id[i] for i in sorted(test_ids)]


# --- articles --------------------------------------------------------------

@dataclass(frozen=True)
class SampleArticle:
    filename: str
    doi: str
    year: int
    content: str
    software: Tuple[str, ...]
    same_as: Optional[str] = None


def _article_software(i: int, year: int, rng: random.Random) -> List[str]:
    pool = [s.name for s in SOFTWARE if s.name not in ("SPSS", "WinBUGS", "OpenBUGS")]
    names = [SPSS_VARIANTS[i % len(SPSS_VARIANTS)]]
    names.append("WinBUGS" if year < 2010 else "OpenBUGS")
    names.append(rng.choice(pool))
    return names


def _plain_text_article(
    title: str, doi: str, year: int, authors: Sequence[str], methods: Optional[str], rng: random.Random
) -> str:
    lines = [
        f"Title: {title}",
        f"DOI: {doi}",
        f"Year: {year}",
        f"Authors: {'; '.join(authors)}",
        f"Publisher: {PUBLISHER}",
        "",
        "Introduction",
        "Software use in research is rarely cited formally. "
        "We describe a cohort study conducted at two sites.",
        "",
    ]
    if methods is not None:
        lines += ["Methods", methods, ""]
    lines += [
        "Results",
        f"A total of {rng.randint(40, 400)} participants were included. "
        "The main effect was significant.",
        "",
    ]
    return "\n".join(lines)


def _jats_article(title: str, doi: str, year: int, methods: str) -> str:
    return f"""<?xml version="1.0" encoding="UTF-8"?>
<article>
  <front>
    <journal-meta>
      <publisher><publisher-name>{PUBLISHER}</publisher-name></publisher>
    </journal-meta>
    <article-meta>
      <article-id pub-id-type="doi">{doi}</article-id>
      <title-group><article-title>{title}</article-title></title-group>
      <contrib-group>
        <contrib contrib-type="author">
          <contrib-id contrib-id-type="orcid">https://orcid.org/0000-0002-1825-0097</contrib-id>
          <name><surname>Sato</surname><given-names>Kenji</given-names></name>
          <xref ref-type="aff" rid="aff1"/>
        </contrib>
        <contrib contrib-type="author">
          <name><surname>Garcia</surname><given-names>Maria</given-names></name>
          <xref ref-type="aff" rid="aff1"/>
        </contrib>
      </contrib-group>
      <aff id="aff1"><label>1</label>University of Tsukuba, Japan</aff>
      <pub-date><year>{year}</year></pub-date>
    </article-meta>
  </front>
  <body>
    <sec><title>Introduction</title><p>Statistical software supports most analyses in the field.</p></sec>
    <sec><title>Materials and Methods</title><p>{methods}</p></sec>
    <sec><title>Results</title><p>The estimates were stable across sites.</p></sec>
  </body>
</article>
"""


def sample_articles(seed: int = 42) -> List[SampleArticle]:
    """Two articles per year from 2005; the 19th has no Methods section, the 20th is JATS XML"""
    rng = random.Random(seed)
    articles = []
    for i in range(N_ARTICLES):
        year = FIRST_YEAR + i // 2
        doi = f"10.1371/journal.smkg.{i + 1:04d}"
        names = _article_software(i, year, rng)
        sentences = [positive_sentence(name, rng) for name in names]
        sentences.insert(rng.randint(0, len(sentences)), rng.choice(NEGATIVE_SENTENCES))
        methods = " ".join(sentences)
        title = f"Cohort study {i + 1} of outcomes in {year}"
        authors = rng.sample(AUTHORS, 2)
        if i == N_ARTICLES - 1:
            articles.append(SampleArticle(f"article_{i + 1:02d}.xml", doi, year, _jats_article(title, doi, year, methods), tuple(names)))
            continue
        has_methods = i != N_ARTICLES - 2
        content = _plain_text_article(title, doi, year, authors, methods if has_methods else None, rng)
        same_as = f"https://doi.org/{doi}" if i == 0 else None
        articles.append(
            SampleArticle(f"article_{i + 1:02d}.txt", doi, year, content, tuple(names) if has_methods else (), same_as)
        )
    return articles


# --- KB files --------------------------------------------------------------

def kb_dictionary_lines() -> List[str]:
    lines = ["# canonical_id\talias\tlanguage"]
    for s in SOFTWARE:
        lines.append(f"{s.kb_id}\t{s.name}\ten")
        lines.extend(f"{s.kb_id}\t{alias}\ten" for alias in s.aliases)
    lines.extend(f"Q900001\t{variant}\ten" for variant in SPSS_VARIANTS[1:])
    lines.append("Q900001\tSPSS Statistik\tde")
    return lines


def kb_export_lines() -> List[str]:
    lines = ["# id\tfield_kind\tvalue\tlanguage"]
    for s in SOFTWARE:
        lines.append(f"{s.kb_id}\tlabel\t{s.name}")
        lines.append(f"{s.kb_id}\ttype\tsoftware")
        lines.append(f"{s.kb_id}\tdeveloper\t{s.developer}")
        lines.extend(f"{s.kb_id}\talias\t{alias}\ten" for alias in s.aliases)
    lines += [
        "Q900001\talias\tStatistical Package for the Social Sciences\ten",
        "Q900001\tredirect\tIBM SPSS Statistics",
        "Q900008\treplaced_by\tQ900009",
        "Q900099\tlabel\tPortal",
        "Q900099\ttype\tvideo game",
    ]
    return lines


def enrichment_lines() -> List[str]:
    def flag(value: Optional[bool]) -> str:
        return "unknown" if value is None else str(value).lower()

    lines = ["name\twikidata_id\tmanufacturer\tis_free\tis_source_available"]
    for s in SOFTWARE:
        lines.append(f"{s.name}\t{s.kb_id}\t{s.developer}\t{flag(s.is_free)}\t{flag(s.is_source_available)}")
    return lines


def write_sample_fixture(root: Path, seed: int = 42, gsc_epochs: int = 12) -> Path:
    """Write the corpus, KB files, gold corpora and a pipeline.env config; returns the config path"""
    root = Path(root).resolve()
    articles = sample_articles(seed)
    for article in articles:
        write_text(root / "corpus" / article.filename, article.content)
    write_lines(
        root / "corpus" / "manifest.tsv",
        [f"{a.filename}\t{a.doi}\t{a.year}\t{a.same_as or ''}" for a in articles],
    )
    write_lines(root / "kb" / "aliases.tsv", kb_dictionary_lines())
    write_lines(root / "kb" / "export.tsv", kb_export_lines())
    write_lines(root / "kb" / "english_words.txt", ENGLISH_WORDS)
    write_lines(root / "kb" / "enrichment.tsv", enrichment_lines())

    train, test = gold_split(seed)
    write_text(root / "gold" / "train.tsv", format_tagged_corpus(train))
    write_text(root / "gold" / "test.tsv", format_tagged_corpus(test))

    config = {
        "SMKG_CORPUS_DIR": root / "corpus",
        "SMKG_CORPUS_MANIFEST_PATH": root / "corpus" / "manifest.tsv",
        "SMKG_KB_DICTIONARY_PATH": root / "kb" / "aliases.tsv",
        "SMKG_ENGLISH_WORDLIST_PATH": root / "kb" / "english_words.txt",
        "SMKG_KB_EXPORT_PATH": root / "kb" / "export.tsv",
        "SMKG_ENRICHMENT_PATH": root / "kb" / "enrichment.tsv",
        "SMKG_GSC_TRAIN_PATH": root / "gold" / "train.tsv",
        "SMKG_GSC_TEST_PATH": root / "gold" / "test.tsv",
        "SMKG_OUTPUT_DIR": root / "output",
        "SMKG_SEED": seed,
        "SMKG_GSC_CFG__EPOCHS": gsc_epochs,
    }
    config_path = write_lines(root / "pipeline.env", [f"{key}={value}" for key, value in config.items()])
    logger.info("Wrote %d articles and the KB fixture to %s", len(articles), root)
    return config_path

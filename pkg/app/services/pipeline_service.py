"""Stage orchestration: each stage reads its predecessor's artifacts from output_dir"""
import hashlib
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy

from app.core.config import PipelineConfig, settings
from app.core.errors import ConfigurationError, MissingEnrichmentError, StageOrderError
from app.schemas.corpus import Document
from app.schemas.disambiguation import DisambiguationResult, KbEntry, SoftwareEnrichment
from app.schemas.pipeline import PipelineManifest, SummaryValue
from app.schemas.query import ResultTable
from app.schemas.tagging import TaggedDocument, TaggingResult, bio_runs
from app.schemas.weak_supervision import KbAliasDictionary
from app.services.analysis_service import availability_trend, mentions_per_year, successor_analysis
from app.services.corpus_io import read_tagged_corpus, write_tagged_corpus
from app.services.crf_model import load_model, save_model
from app.services.crf_training_service import CrfTrainer, compare_training_regimes
from app.services.disambiguation_service import (
    DisambiguationService,
    load_enrichment,
    load_kb_export,
    write_cluster_report,
)
from app.services.evaluation_service import evaluate_all, format_report, spans_from_tags, write_report
from app.services.ingest_service import IngestService, load_mm_headings, segment_mm
from app.services.knowledge_graph_service import (
    build_graph,
    graph_statistics,
    parse_ntriples,
    serialize_jsonld,
    serialize_ntriples,
)
from app.services.labeling_functions import (
    build_default_registry,
    load_english_wordlist,
    load_exact_rules,
    load_kb_dictionary,
    load_negative_list,
)
from app.services.query_executor import run_query
from app.services.run_registry import PipelineRunRegistry
from app.services.silver_corpus_service import WeakSupervisionService, error_analysis_report
from app.services.tagging_service import TaggingService
from app.services.text_processing import load_stopwords
from app.utils.files import sha256_file, write_bytes, write_lines, write_text

logger = logging.getLogger(__name__)

STAGES = (
    "ingest", "weaklabel", "train", "tag", "evaluate",
    "disambiguate", "build-kg", "query", "analyze", "pipeline",
)
ANALYSES = ("mentions-per-year", "availability", "successor")


@dataclass(frozen=True)
class ArtifactLayout:
    """Relative artifact paths under output_dir"""

    documents: str = "corpus/documents.jsonl"
    ssc: str = "weaklabel/ssc.tsv"
    label_model: str = "weaklabel/label_model.json"
    lf_summary: str = "weaklabel/lf_summary.tsv"
    negative_suggestions: str = "weaklabel/negative_list_suggestions.tsv"
    model: str = "train/crf_model.txt"
    history: str = "train/training_history.json"
    mentions: str = "tag/mentions.json"
    report_tsv: str = "evaluate/report.tsv"
    report_json: str = "evaluate/report.json"
    regimes: str = "evaluate/training_regimes.tsv"
    clusters: str = "disambiguate/clusters.json"
    clusters_tsv: str = "disambiguate/clusters.tsv"
    graph_nt: str = "kg/graph.nt"
    graph_jsonld: str = "kg/graph.jsonld"
    statistics: str = "kg/statistics.json"

    @staticmethod
    def analysis(name: str) -> str:
        return f"analysis/{name}.csv"

    @staticmethod
    def manifest(stage: str) -> str:
        return f"manifests/{stage}.json"


ARTIFACTS = ArtifactLayout()


def dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def hash_path(path: Path) -> str:
    """SHA-256 of a file, or of the sorted (name, hash) listing of a directory"""
    path = Path(path)
    if path.is_dir():
        listing = "".join(
            f"{p.relative_to(path).as_posix()}\t{sha256_file(p)}\n"
            for p in sorted(path.rglob("*")) if p.is_file()
        )
        return hashlib.sha256(listing.encode("utf-8")).hexdigest()
    return sha256_file(path)


class PipelineService:
    def __init__(
        self,
        config: PipelineConfig,
        registry: Optional[PipelineRunRegistry] = None,
        show_progress: bool = False,
    ):
        self.config = config
        self.registry = registry
        self.show_progress = show_progress
        self.output_dir = Path(config.output_dir)
        self.failed_stage: Optional[str] = None

    # --- helpers --------------------------------------------------------

    def path(self, relative: str) -> Path:
        return self.output_dir / relative

    def require(self, stage: str, *relatives: str) -> None:
        missing = [r for r in relatives if not self.path(r).exists()]
        if missing:
            raise StageOrderError(stage, missing)

    def require_config(self, stage: str, *names: str) -> None:
        unset = [f"SMKG_{n.upper()}" for n in names if getattr(self.config, n) is None]
        if unset:
            raise ConfigurationError(f"stage '{stage}' needs {', '.join(unset)}")
        self.config.validate_paths(list(names))

    def _relative_outputs(self, *paths: Optional[Path]) -> List[str]:
        """Paths inside output_dir, relative to it; files written elsewhere are not hashed"""
        root = self.output_dir.resolve()
        relative = []
        for p in paths:
            if p is not None and Path(p).resolve().is_relative_to(root):
                relative.append(Path(p).resolve().relative_to(root).as_posix())
        return relative

    def _config_inputs(self, *names: str) -> Dict[str, Path]:
        return {
            name: Path(getattr(self.config, name))
            for name in names
            if getattr(self.config, name) is not None
        }

    def _artifact_inputs(self, *relatives: str) -> Dict[str, Path]:
        return {relative: self.path(relative) for relative in relatives}

    def _manifest(
        self,
        stage: str,
        inputs: Dict[str, Path],
        outputs: Sequence[str],
        summary: Dict[str, SummaryValue],
    ) -> Path:
        manifest = PipelineManifest(
            stage=stage,
            versions={"app": settings.VERSION, "numpy": np.__version__, "scipy": scipy.__version__},
            config_hash=self.config.config_hash(),
            seed=self.config.seed,
            inputs={name: hash_path(p) for name, p in sorted(inputs.items())},
            outputs={relative: hash_path(self.path(relative)) for relative in sorted(outputs)},
            summary=summary,
        )
        return write_text(self.path(ARTIFACTS.manifest(stage)), dump_json(manifest.model_dump(mode="json")))

    def _run(self, stage: str, body: Callable[[], Tuple[Dict[str, Path], List[str], Dict[str, SummaryValue]]]):
        run_id = None
        if self.registry is not None:
            run_id = self.registry.start(stage, self.config.config_hash(), str(self.output_dir))
        try:
            inputs, outputs, summary = body()
            manifest_path = self._manifest(stage, inputs, outputs, summary)
        except Exception as e:
            self.failed_stage = stage
            if run_id is not None:
                self.registry.finish(run_id, False, error=str(e))
            raise
        if run_id is not None:
            self.registry.finish(run_id, True, manifest_path=str(manifest_path))
        logger.info("Stage %s finished: %s", stage, summary)
        return summary

    # --- resources ------------------------------------------------------

    @cached_property
    def stopwords(self):
        return load_stopwords(self.config.stopwords_path)

    @cached_property
    def mm_headings(self):
        return load_mm_headings(self.config.mm_headings_path)

    @cached_property
    def dictionary(self) -> KbAliasDictionary:
        if self.config.kb_dictionary_path is None:
            logger.warning("No KB alias dictionary configured; the dictionary labeling function abstains")
            return KbAliasDictionary()
        return load_kb_dictionary(
            self.config.kb_dictionary_path, load_english_wordlist(self.config.english_wordlist_path)
        )

    @cached_property
    def kb_export(self) -> Tuple[List[KbEntry], List[Tuple[str, str]]]:
        if self.config.kb_export_path is None:
            return [], []
        return load_kb_export(self.config.kb_export_path)

    def enrichment(self, required: bool = False) -> Dict[str, SoftwareEnrichment]:
        if self.config.enrichment_path is None:
            if required:
                raise MissingEnrichmentError()
            return {}
        return load_enrichment(self.config.enrichment_path)

    def documents(self) -> List[Document]:
        with open(self.path(ARTIFACTS.documents), encoding="utf-8") as f:
            return [Document.model_validate_json(line) for line in f if line.strip()]

    def tagging_result(self) -> TaggingResult:
        return TaggingResult.model_validate_json(self.path(ARTIFACTS.mentions).read_text(encoding="utf-8"))

    # --- stages ---------------------------------------------------------

    def ingest(self) -> Dict[str, SummaryValue]:
        def body():
            self.require_config("ingest", "corpus_dir")
            docs = IngestService(self.config.jobs).load_corpus(
                self.config.corpus_dir, self.config.corpus_manifest_path
            )
            write_text(self.path(ARTIFACTS.documents), "".join(d.model_dump_json() + "\n" for d in docs))
            with_mm = sum(1 for d in docs if segment_mm(d, self.mm_headings, self.stopwords) is not None)
            inputs = self._config_inputs("corpus_dir", "corpus_manifest_path", "mm_headings_path")
            return inputs, [ARTIFACTS.documents], {"documents": len(docs), "documents_with_mm": with_mm}

        return self._run("ingest", body)

    def weaklabel(self, gold_path: Optional[Path] = None) -> Dict[str, SummaryValue]:
        def body():
            self.require("weaklabel", ARTIFACTS.documents)
            segmented = [
                s for s in (segment_mm(d, self.mm_headings, self.stopwords) for d in self.documents())
                if s is not None
            ]
            registry = build_default_registry(
                self.dictionary,
                load_exact_rules(self.config.exact_rules_path),
                load_negative_list(self.config.negative_list_path),
            )
            service = WeakSupervisionService(
                registry, self.config.max_candidate_length, self.config.seed, self.config.jobs
            )
            result = service.run(segmented)

            write_tagged_corpus(self.path(ARTIFACTS.ssc), result.ssc)
            write_text(self.path(ARTIFACTS.label_model), dump_json(result.model.model_dump(mode="json")))
            write_lines(
                self.path(ARTIFACTS.lf_summary),
                ["lf_id\tcoverage\toverlaps\tconflicts\tpositives\tnegatives"] + [
                    f"{r.lf_id}\t{r.coverage:.4f}\t{r.overlaps:.4f}\t{r.conflicts:.4f}\t{r.positives}\t{r.negatives}"
                    for r in result.summary
                ],
            )
            outputs = [ARTIFACTS.ssc, ARTIFACTS.label_model, ARTIFACTS.lf_summary]
            inputs = {
                **self._artifact_inputs(ARTIFACTS.documents),
                **self._config_inputs(
                    "kb_dictionary_path", "english_wordlist_path", "exact_rules_path", "negative_list_path"
                ),
            }
            if gold_path is not None:
                gold = read_tagged_corpus(gold_path, self.stopwords)
                suggestions = error_analysis_report(result.ssc, gold)
                write_lines(
                    self.path(ARTIFACTS.negative_suggestions),
                    ["surface\tfalse_positives"] + [f"{s.surface}\t{s.false_positives}" for s in suggestions],
                )
                outputs.append(ARTIFACTS.negative_suggestions)
                inputs["gold"] = Path(gold_path)

            spans = sum(len(bio_runs(t.tags)) for d in result.ssc for t in d.sentences)
            summary = {
                "documents": len(segmented),
                "candidates": len(result.candidates),
                "silver_spans": spans,
                "class_prior": round(result.model.class_prior, 6),
                "em_iterations": result.model.n_iterations,
            }
            return inputs, outputs, summary

        return self._run("weaklabel", body)

    def train(self) -> Dict[str, SummaryValue]:
        def body():
            self.require("train", ARTIFACTS.ssc)
            self.require_config("train", "gsc_train_path")
            ssc = read_tagged_corpus(self.path(ARTIFACTS.ssc), self.stopwords)
            gsc = read_tagged_corpus(self.config.gsc_train_path, self.stopwords)
            trainer = CrfTrainer(self.dictionary, show_progress=self.show_progress)
            model, history = trainer.train(ssc, gsc, self.config.ssc_cfg, self.config.gsc_cfg)
            save_model(self.path(ARTIFACTS.model), model)
            write_text(self.path(ARTIFACTS.history), dump_json(history.model_dump(mode="json")))

            summary: Dict[str, SummaryValue] = {"features": len(model.feature_index)}
            for stage in ("ssc", "gsc"):
                losses = history.losses(stage)
                summary[f"{stage}_epochs"] = len(losses)
                if losses:
                    summary[f"{stage}_final_loss"] = round(losses[-1], 6)
            inputs = {
                **self._artifact_inputs(ARTIFACTS.ssc),
                **self._config_inputs("gsc_train_path", "kb_dictionary_path"),
            }
            return inputs, [ARTIFACTS.model, ARTIFACTS.history], summary

        return self._run("train", body)

    def tagger(self) -> TaggingService:
        return TaggingService(
            load_model(self.path(ARTIFACTS.model)),
            self.dictionary,
            self.mm_headings,
            self.stopwords,
            jobs=self.config.jobs,
            show_progress=self.show_progress,
        )

    def tag(self) -> Dict[str, SummaryValue]:
        def body():
            self.require("tag", ARTIFACTS.model, ARTIFACTS.documents)
            result = self.tagger().tag_corpus(self.documents())
            write_text(self.path(ARTIFACTS.mentions), dump_json(result.model_dump(mode="json")))
            summary = {
                "documents": len(result.processed_doc_ids),
                "skipped_documents": len(result.skipped_doc_ids),
                "mentions": len(result.mentions),
                "mentions_per_article": round(result.mentions_per_article, 4),
            }
            inputs = self._artifact_inputs(ARTIFACTS.model, ARTIFACTS.documents)
            return inputs, [ARTIFACTS.mentions], summary

        return self._run("tag", body)

    def evaluate(self, compare_regimes: bool = False) -> str:
        """Scores the trained model on the gold test corpus; returns the printed report"""
        report: List[str] = []

        def body():
            self.require("evaluate", ARTIFACTS.model)
            self.require_config("evaluate", "gsc_test_path")
            gold = read_tagged_corpus(self.config.gsc_test_path, self.stopwords)
            tagger = self.tagger()
            predicted = [
                TaggedDocument(
                    doc_id=d.doc_id,
                    sentences=tagger.tag_sentences([ts.sentence for ts in d.sentences]),
                )
                for d in gold
            ]
            metrics = evaluate_all(spans_from_tags(predicted), spans_from_tags(gold))
            write_report(metrics, self.path(ARTIFACTS.report_tsv), self.path(ARTIFACTS.report_json))
            report.append(format_report(metrics))
            outputs = [ARTIFACTS.report_tsv, ARTIFACTS.report_json]
            inputs = {
                **self._artifact_inputs(ARTIFACTS.model),
                **self._config_inputs("gsc_test_path"),
            }

            if compare_regimes:
                self.require("evaluate", ARTIFACTS.ssc)
                self.require_config("evaluate", "gsc_train_path")
                results = compare_training_regimes(
                    read_tagged_corpus(self.path(ARTIFACTS.ssc), self.stopwords),
                    read_tagged_corpus(self.config.gsc_train_path, self.stopwords),
                    gold,
                    self.config.ssc_cfg,
                    self.config.gsc_cfg,
                    self.dictionary,
                )
                table = "".join(format_report(m, title=name) for name, m in results.items())
                write_text(self.path(ARTIFACTS.regimes), table)
                report.append(table)
                outputs.append(ARTIFACTS.regimes)
                inputs.update(self._artifact_inputs(ARTIFACTS.ssc))
                inputs.update(self._config_inputs("gsc_train_path"))

            summary = {f"{mode.value}_f_score": round(m.f_score, 6) for mode, m in metrics.items()}
            return inputs, outputs, summary

        self._run("evaluate", body)
        return "".join(report)

    def disambiguate(self) -> Dict[str, SummaryValue]:
        def body():
            self.require("disambiguate", ARTIFACTS.mentions)
            kb, _ = self.kb_export
            result = DisambiguationService(kb).disambiguate(self.tagging_result().mentions)
            write_text(self.path(ARTIFACTS.clusters), dump_json(result.model_dump(mode="json")))
            write_cluster_report(self.path(ARTIFACTS.clusters_tsv), result)
            summary = {
                "unique_names": result.unique_names,
                "entities": len(result.clusters),
                "linked": sum(1 for c in result.clusters if c.kb_id is not None),
                "ambiguous": sum(1 for c in result.clusters if c.ambiguous),
            }
            inputs = {
                **self._artifact_inputs(ARTIFACTS.mentions),
                **self._config_inputs("kb_export_path"),
            }
            return inputs, [ARTIFACTS.clusters, ARTIFACTS.clusters_tsv], summary

        return self._run("disambiguate", body)

    def build_kg(self) -> Dict[str, SummaryValue]:
        def body():
            self.require("build-kg", ARTIFACTS.documents, ARTIFACTS.mentions, ARTIFACTS.clusters)
            clusters = DisambiguationResult.model_validate_json(
                self.path(ARTIFACTS.clusters).read_text(encoding="utf-8")
            )
            graph = build_graph(self.documents(), self.tagging_result().mentions, clusters, self.enrichment())
            write_bytes(self.path(ARTIFACTS.graph_nt), serialize_ntriples(graph))
            write_bytes(self.path(ARTIFACTS.graph_jsonld), serialize_jsonld(graph))
            stats = graph_statistics(graph)
            write_text(self.path(ARTIFACTS.statistics), dump_json(stats.model_dump(mode="json")))
            inputs = {
                **self._artifact_inputs(ARTIFACTS.documents, ARTIFACTS.mentions, ARTIFACTS.clusters),
                **self._config_inputs("enrichment_path"),
            }
            outputs = [ARTIFACTS.graph_nt, ARTIFACTS.graph_jsonld, ARTIFACTS.statistics]
            return inputs, outputs, {"triples": stats.triples, "resources": stats.resources}

        return self._run("build-kg", body)

    def query(self, query_file: Path, graph_path: Optional[Path] = None, csv_path: Optional[Path] = None) -> ResultTable:
        table: List[ResultTable] = []

        def body():
            graph_file = Path(graph_path) if graph_path is not None else self.path(ARTIFACTS.graph_nt)
            if not graph_file.exists():
                raise StageOrderError("query", [str(graph_file)])
            result = run_query(Path(query_file).read_text(encoding="utf-8"), parse_ntriples(graph_file.read_bytes()))
            table.append(result)
            if csv_path is not None:
                result.write_csv(csv_path)
            outputs = self._relative_outputs(csv_path)
            inputs = {"query": Path(query_file), "graph": graph_file}
            return inputs, outputs, {"rows": len(result.rows)}

        self._run("query", body)
        return table[0]

    def analyze(self, name: str, csv_path: Optional[Path] = None, top_k: Optional[int] = None) -> ResultTable:
        if name not in ANALYSES:
            raise ConfigurationError(f"unknown analysis '{name}', expected one of {', '.join(ANALYSES)}")
        table: List[ResultTable] = []

        def body():
            self.require("analyze", ARTIFACTS.graph_nt)
            graph = parse_ntriples(self.path(ARTIFACTS.graph_nt).read_bytes())
            inputs = self._artifact_inputs(ARTIFACTS.graph_nt)
            if name == "mentions-per-year":
                result = mentions_per_year(graph, top_k if top_k is not None else self.config.top_k)
            elif name == "availability":
                result = availability_trend(graph, self.enrichment(required=True))
                inputs.update(self._config_inputs("enrichment_path"))
            else:
                result = successor_analysis(graph, self.kb_export[1])
                inputs.update(self._config_inputs("kb_export_path"))
            target = Path(csv_path) if csv_path is not None else self.path(ARTIFACTS.analysis(name))
            result.write_csv(target)
            table.append(result)
            outputs = self._relative_outputs(target)
            return inputs, outputs, {"rows": len(result.rows)}

        self._run(f"analyze-{name}", body)
        return table[0]

    def pipeline(self) -> Dict[str, SummaryValue]:
        """ingest -> weaklabel -> train -> tag -> evaluate -> disambiguate -> build-kg -> analyze"""
        self.ingest()
        self.weaklabel()
        self.train()
        self.tag()
        if self.config.gsc_test_path is not None:
            for line in self.evaluate().splitlines():
                logger.info("%s", line)
        else:
            logger.info("No gold test corpus configured; skipping evaluate")
        self.disambiguate()
        summary = self.build_kg()
        for name in ANALYSES:
            if name == "availability" and self.config.enrichment_path is None:
                logger.warning("No enrichment file configured; skipping the availability analysis")
                continue
            self.analyze(name)
        return summary

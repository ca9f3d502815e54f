"""Command line entry point: python -m app.main <subcommand> [flags]"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.core.config import PipelineConfig, settings
from app.core.errors import PipelineError, StageOrderError
from app.schemas.tagging import DecayKind
from app.services.pipeline_service import ANALYSES, STAGES, PipelineService
from app.services.run_registry import PipelineRunRegistry

logger = logging.getLogger("app.main")

# (flag suffix, TrainingConfig field, type); each is exposed once per stage as --ssc-* and --gsc-*
TRAINING_FLAGS = [
    ("epochs", "epochs", int),
    ("learning-rate", "learning_rate", float),
    ("lr-decay", "lr_decay_kind", str),
    ("lr-decay-rate", "lr_decay_rate", float),
    ("dropout", "feature_dropout", float),
    ("weight-boost", "positive_class_weight_boost", float),
    ("negative-ratio", "negative_sampling_ratio", float),
    ("seed", "seed", int),
    ("rms-decay", "rms_decay", float),
    ("epsilon", "epsilon", float),
]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="dotenv style config file (SMKG_* keys)")
    common.add_argument("--output-dir", type=Path, help="artifact directory (overrides SMKG_OUTPUT_DIR)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="worker cap for parsing, labeling and tagging")
    common.add_argument("--enrichment", type=Path, dest="enrichment_path", help="software enrichment TSV")
    common.add_argument("--quiet", action="store_true", help="no progress bars, warnings only")
    common.add_argument("--no-registry", action="store_true", help="do not record the run in the SQLite registry")

    parser = argparse.ArgumentParser(prog="smkg", description=settings.PROJECT_NAME)
    parser.add_argument("--version", action="version", version=settings.VERSION)
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(STAGES) + "}")

    sub.add_parser("ingest", parents=[common], help="parse the corpus into documents.jsonl")

    weaklabel = sub.add_parser("weaklabel", parents=[common], help="build the silver standard corpus")
    weaklabel.add_argument("--gold", type=Path, help="gold corpus for the negative list suggestions")

    train = sub.add_parser("train", parents=[common], help="train the CRF tagger (SSC then GSC)")
    for stage in ("ssc", "gsc"):
        for flag, field, kind in TRAINING_FLAGS:
            options = {"choices": [k.value for k in DecayKind]} if field == "lr_decay_kind" else {}
            train.add_argument(f"--{stage}-{flag}", type=kind, dest=f"{stage}_cfg__{field}", **options)

    sub.add_parser("tag", parents=[common], help="tag the M&M sections of every document")

    evaluate = sub.add_parser("evaluate", parents=[common], help="score the tagger on the gold test corpus")
    evaluate.add_argument(
        "--compare-regimes", action="store_true", help="also train and score SSC, GSC and SSC->GSC models"
    )

    sub.add_parser("disambiguate", parents=[common], help="cluster and link the tagged mentions")
    sub.add_parser("build-kg", parents=[common], help="write the knowledge graph as N-Triples and JSON-LD")

    query = sub.add_parser("query", parents=[common], help="run a SPARQL subset query")
    query.add_argument("--file", type=Path, required=True, dest="query_file", help="query text (.rq)")
    query.add_argument("--graph", type=Path, help="N-Triples file (default: <output>/kg/graph.nt)")
    query.add_argument("--csv", type=Path, help="write the result table as CSV")

    analyze = sub.add_parser("analyze", parents=[common], help="run one of the canned analyses")
    analyze.add_argument("name", choices=ANALYSES)
    analyze.add_argument("--csv", type=Path, help="CSV path (default: <output>/analysis/<name>.csv)")
    analyze.add_argument("--top-k", type=int)

    sub.add_parser("pipeline", parents=[common], help="run every stage in order")
    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {
        "output_dir": args.output_dir,
        "seed": args.seed,
        "jobs": args.jobs,
        "enrichment_path": args.enrichment_path,
    }
    for key, value in vars(args).items():
        if "_cfg__" in key:
            overrides[key] = value
    return PipelineConfig.load(args.config, **overrides)


def run_subcommand(args: argparse.Namespace, service: PipelineService) -> int:
    if args.command == "ingest":
        service.ingest()
    elif args.command == "weaklabel":
        service.weaklabel(args.gold)
    elif args.command == "train":
        service.train()
    elif args.command == "tag":
        service.tag()
    elif args.command == "evaluate":
        sys.stdout.write(service.evaluate(args.compare_regimes))
    elif args.command == "disambiguate":
        service.disambiguate()
    elif args.command == "build-kg":
        service.build_kg()
    elif args.command == "query":
        table = service.query(args.query_file, args.graph, args.csv)
        if args.csv is None:
            sys.stdout.write(table.to_csv().decode("utf-8"))
    elif args.command == "analyze":
        table = service.analyze(args.name, args.csv, args.top_k)
        logger.info("%s: %d rows", args.name, len(table.rows))
    elif args.command == "pipeline":
        service.pipeline()
    return 0


def failed_stage(args: argparse.Namespace, service: Optional[PipelineService]) -> str:
    if service is not None and service.failed_stage is not None:
        return service.failed_stage
    return args.command


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else settings.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    service: Optional[PipelineService] = None
    try:
        config = load_config(args)
        registry = None if args.no_registry else PipelineRunRegistry()
        service = PipelineService(config, registry, show_progress=not args.quiet and sys.stderr.isatty())
        return run_subcommand(args, service)
    except StageOrderError as e:
        logger.error("stage %s failed: %s", e.stage, e)
        return 2
    except PipelineError as e:
        logger.error("stage %s failed: %s", failed_stage(args, service), e)
        return 1
    except Exception:
        logger.exception("stage %s failed unexpectedly", failed_stage(args, service))
        return 1


if __name__ == "__main__":
    sys.exit(main())

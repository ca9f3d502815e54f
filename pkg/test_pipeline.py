"""End-to-end tests for the stage runner, the CLI and the run registry"""
import json
import logging

import pytest

from app.core.config import PipelineConfig
from app.core.errors import ConfigurationError, StageOrderError
from app.core.queries import MENTIONS_PER_YEAR
from app.main import build_parser, load_config, main
from app.schemas.tagging import DecayKind
from app.services.ingest_service import IngestService
from app.services.pipeline_service import ANALYSES, ARTIFACTS, PipelineService, hash_path
from app.services.run_registry import STATUS_FAILED, STATUS_SUCCEEDED, PipelineRunRegistry
from app.services.sample_data import N_ARTICLES


def run_cli(*args):
    return main([*args, "--quiet", "--no-registry"])


def listing(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def pipeline_runs(sample_root, tmp_path_factory):
    config = str(sample_root / "pipeline.env")
    outputs = []
    for _ in range(2):
        output = tmp_path_factory.mktemp("run")
        assert run_cli("pipeline", "--config", config, "--output-dir", str(output)) == 0
        outputs.append(output)
    return outputs


def test_pipeline_is_byte_reproducible(pipeline_runs):
    """Test that two runs with the same config and seed produce identical artifacts"""
    first, second = (listing(root) for root in pipeline_runs)
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


def test_pipeline_writes_every_artifact_and_manifest(pipeline_runs):
    """Test the artifact layout and the manifest hashes"""
    root = pipeline_runs[0]
    for relative in (
        ARTIFACTS.documents, ARTIFACTS.ssc, ARTIFACTS.label_model, ARTIFACTS.lf_summary,
        ARTIFACTS.model, ARTIFACTS.history, ARTIFACTS.mentions, ARTIFACTS.report_tsv,
        ARTIFACTS.report_json, ARTIFACTS.clusters, ARTIFACTS.clusters_tsv,
        ARTIFACTS.graph_nt, ARTIFACTS.graph_jsonld, ARTIFACTS.statistics,
    ):
        assert (root / relative).is_file(), relative
    for name in ANALYSES:
        assert (root / ARTIFACTS.analysis(name)).is_file()

    for stage in ("ingest", "weaklabel", "train", "tag", "evaluate", "disambiguate", "build-kg"):
        manifest = json.loads((root / ARTIFACTS.manifest(stage)).read_text(encoding="utf-8"))
        assert manifest["stage"] == stage
        assert manifest["seed"] == 42
        for relative, digest in manifest["outputs"].items():
            assert hash_path(root / relative) == digest

    ingest = json.loads((root / ARTIFACTS.manifest("ingest")).read_text(encoding="utf-8"))
    assert ingest["summary"]["documents"] == N_ARTICLES
    lf_header = (root / ARTIFACTS.lf_summary).read_text(encoding="utf-8").splitlines()[0]
    assert lf_header == "lf_id\tcoverage\toverlaps\tconflicts\tpositives\tnegatives"


def test_query_stage_on_the_built_graph(pipeline_runs, sample_root, tmp_path):
    """Test the query stage against the graph written by build-kg"""
    query_file = tmp_path / "usage.rq"
    query_file.write_text(MENTIONS_PER_YEAR, encoding="utf-8")
    config = PipelineConfig.load(sample_root / "pipeline.env", output_dir=tmp_path / "output")
    csv_path = tmp_path / "usage.csv"
    table = PipelineService(config).query(query_file, pipeline_runs[0] / ARTIFACTS.graph_nt, csv_path)
    assert table.columns == ["n", "y", "count"]
    assert table.rows
    assert csv_path.read_bytes() == table.to_csv()


def test_stage_without_predecessor_exits_with_code_2(sample_root, tmp_path):
    """Test that a stage run before its predecessor reports the missing artifacts"""
    assert run_cli("tag", "--config", str(sample_root / "pipeline.env"), "--output-dir", str(tmp_path)) == 2
    assert not (tmp_path / ARTIFACTS.mentions).exists()


def test_missing_config_file_exits_with_code_1(tmp_path):
    """Test that configuration errors exit with status 1"""
    assert run_cli("ingest", "--config", str(tmp_path / "absent.env")) == 1


def test_partial_training_override_keeps_stage_defaults(sample_root, tmp_path):
    """Test that overriding one nested field keeps the other stage defaults"""
    config = PipelineConfig.load(sample_root / "pipeline.env", output_dir=tmp_path, gsc_cfg__epochs=3)
    assert config.gsc_cfg.epochs == 3
    assert config.gsc_cfg.learning_rate == 0.0015
    assert config.ssc_cfg.learning_rate == 0.002
    assert config.config_hash() != PipelineConfig.load(sample_root / "pipeline.env").config_hash()
    with pytest.raises(ConfigurationError):
        config.with_overrides(corpus_dir=tmp_path / "nowhere").validate_paths()


def test_unknown_analysis_is_rejected(sample_config):
    """Test analysis name validation"""
    with pytest.raises(ConfigurationError):
        PipelineService(sample_config).analyze("citations")


def test_registry_records_successes_and_failures(sample_config, tmp_path):
    """Test that every stage invocation is recorded with its outcome"""
    registry = PipelineRunRegistry(database_url=f"sqlite:///{tmp_path / 'runs.db'}")
    service = PipelineService(sample_config, registry)
    service.ingest()
    with pytest.raises(StageOrderError):
        service.tag()

    tag, ingest = registry.recent()
    assert ingest.stage == "ingest" and ingest.status == STATUS_SUCCEEDED
    assert ingest.manifest_path.endswith("manifests/ingest.json")
    assert ingest.config_hash == sample_config.config_hash()
    assert tag.stage == "tag" and tag.status == STATUS_FAILED
    assert "crf_model.txt" in tag.error
    assert tag.finished_at is not None
    assert [run.stage for run in registry.recent(stage="ingest")] == ["ingest"]


def test_train_flags_reach_each_stage_config(sample_root):
    """Test that every per-stage training flag lands in its own stage config"""
    args = build_parser().parse_args([
        "train", "--config", str(sample_root / "pipeline.env"),
        "--ssc-negative-ratio", "2", "--ssc-seed", "7", "--ssc-rms-decay", "0.95",
        "--gsc-lr-decay", "linear", "--gsc-lr-decay-rate", "0.001",
        "--gsc-weight-boost", "0.3", "--gsc-epsilon", "1e-6",
    ])
    config = load_config(args)
    assert config.ssc_cfg.negative_sampling_ratio == 2.0
    assert config.ssc_cfg.seed == 7
    assert config.ssc_cfg.rms_decay == 0.95
    assert config.ssc_cfg.learning_rate == 0.002
    assert config.gsc_cfg.lr_decay_kind == DecayKind.LINEAR
    assert config.gsc_cfg.lr_decay_rate == 0.001
    assert config.gsc_cfg.positive_class_weight_boost == 0.3
    assert config.gsc_cfg.epsilon == 1e-6
    assert config.gsc_cfg.learning_rate == 0.0015
    assert config.gsc_cfg.epochs == 12

    with pytest.raises(SystemExit):
        build_parser().parse_args(["train", "--ssc-lr-decay", "cosine"])


def test_failure_inside_pipeline_names_the_failing_stage(sample_root, tmp_path, monkeypatch, caplog):
    """Test that an unexpected error exits with 1 and is logged under the stage that raised it"""
    def broken_corpus(self, *args, **kwargs):
        raise RuntimeError("disk went away")

    monkeypatch.setattr(IngestService, "load_corpus", broken_corpus)
    caplog.set_level(logging.ERROR)
    config = str(sample_root / "pipeline.env")
    assert run_cli("pipeline", "--config", config, "--output-dir", str(tmp_path)) == 1
    messages = [r.getMessage() for r in caplog.records if r.name == "app.main"]
    assert messages == ["stage ingest failed unexpectedly"]

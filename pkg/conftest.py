"""Shared pytest fixtures"""
import pytest

from app.core.config import PipelineConfig
from app.schemas.weak_supervision import KbAliasDictionary
from app.services.sample_data import SOFTWARE, write_sample_fixture
from app.services.text_processing import split_sentences


@pytest.fixture(scope="session")
def sample_root(tmp_path_factory):
    """The bundled 20-article fixture written once per session"""
    root = tmp_path_factory.mktemp("sample")
    write_sample_fixture(root, seed=42)
    return root


@pytest.fixture
def sample_config(sample_root, tmp_path):
    return PipelineConfig.load(sample_root / "pipeline.env", output_dir=tmp_path / "output")


@pytest.fixture(scope="session")
def dictionary():
    return KbAliasDictionary(entries={s.name: s.kb_id for s in SOFTWARE})


@pytest.fixture
def example_sentence():
    return split_sentences(
        "Statistical analysis was performed using SPSS version 17.0 (SPSS Inc, Chicago, IL).",
        doc_id="doc1",
    )[0]

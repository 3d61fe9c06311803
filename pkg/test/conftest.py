"""
Shared fixtures: a seeded sample collection and an index built over it with
the mock embedding provider
"""

import pytest

from models.theme import HyperParams
from repositories.index_store import IndexStore
from repositories.results import load_qa_records
from services.embeddings import MockEmbeddingProvider
from services.indexer import IndexBuilder
from utils.sample_data import SampleDataGenerator


# Small chunks so the sample collection yields a few dozen chunks
TEST_PARAMS = HyperParams(chunk_budget=100)


@pytest.fixture(scope='session')
def sample_fixture(tmp_path_factory):
    """Directory holding collection/ (10 documents) and qa.jsonl (20 questions)"""
    root = tmp_path_factory.mktemp('sample')
    SampleDataGenerator(seed=42).write_fixture(str(root / 'collection'), str(root / 'qa.jsonl'))
    return root


@pytest.fixture(scope='session')
def built_index(sample_fixture, tmp_path_factory):
    """Index directory built once per session; tests must not modify it"""
    index_dir = tmp_path_factory.mktemp('index')
    IndexBuilder(MockEmbeddingProvider(), TEST_PARAMS).build(
        str(sample_fixture / 'collection'), str(index_dir)
    )
    return index_dir


@pytest.fixture(scope='session')
def index_data(built_index):
    return IndexStore(built_index).load()


@pytest.fixture(scope='session')
def qa_records(sample_fixture):
    return load_qa_records(sample_fixture / 'qa.jsonl')

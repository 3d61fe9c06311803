"""
Unit tests for Sample Data Generator
Tests that generated collections and QA files have a valid structure and
that write_fixture() produces files the pipeline can load
"""

import pytest

from repositories.results import load_qa_records
from services.corpus import load_collection, split_sentences
from utils.sample_data import SampleDataGenerator


@pytest.fixture
def generator():
    """Create a SampleDataGenerator instance"""
    return SampleDataGenerator(seed=42)


def test_generate_documents_returns_correct_count(generator):
    documents = generator.generate_documents(7)
    assert sorted(documents) == [f"doc{i:02d}" for i in range(1, 8)]


def test_documents_have_title_and_paragraphs(generator):
    for text in generator.generate_documents(6, sentences_per_document=12).values():
        title, _, body = text.partition('\n\n')
        assert title.startswith('Notes on ')
        paragraphs = body.strip().split('\n\n')
        assert len(paragraphs) == 2
        assert len(split_sentences(body)) == 12


def test_sentences_are_unique_across_the_collection(generator):
    documents = generator.generate_documents(10)
    sentences = []
    for text in documents.values():
        body = text.split('\n\n', 1)[1]
        sentences.extend(body[start:end] for start, end in split_sentences(body))
    assert len(sentences) == 240
    assert len(set(sentences)) == len(sentences)


def test_same_seed_same_output():
    first = SampleDataGenerator(seed=5)
    second = SampleDataGenerator(seed=5)
    documents = first.generate_documents(4)
    assert documents == second.generate_documents(4)
    assert first.generate_questions(documents, 6) == second.generate_questions(documents, 6)


def test_different_seed_different_output():
    assert SampleDataGenerator(seed=1).generate_documents(3) != SampleDataGenerator(seed=2).generate_documents(3)


def test_answers_quote_a_source_document(generator):
    documents = generator.generate_documents(5)
    records = generator.generate_questions(documents, 12, collection_id='demo')

    assert [r.qa_id for r in records] == [f"q{i:03d}" for i in range(1, 13)]
    for record in records:
        assert record.collection_id == 'demo'
        assert record.question.endswith('?')
        assert any(record.answer in text for text in documents.values())


def test_write_fixture(tmp_path, generator):
    counts = generator.write_fixture(str(tmp_path / 'collection'), str(tmp_path / 'qa.jsonl'),
                                     documents=4, questions=9)
    assert counts == {'documents': 4, 'questions': 9}

    documents = load_collection(str(tmp_path / 'collection'))
    assert [d.doc_id for d in documents] == ['doc01', 'doc02', 'doc03', 'doc04']
    assert all(d.collection_id == 'collection' for d in documents)

    records = load_qa_records(tmp_path / 'qa.jsonl')
    assert len(records) == 9
    assert {r.collection_id for r in records} == {'collection'}

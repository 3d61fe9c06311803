"""
Sample Data Generator for the insight generation pipeline
Generates a seeded fixture collection of research-style documents and a QA
JSONL file for offline runs
"""

import logging
from pathlib import Path
from typing import Dict, List

import numpy as np

from models.store import QARecord
from utils.serialization import dumps_jsonl, write_atomic


logger = logging.getLogger(__name__)


class SampleDataGenerator:
    """Utility class for generating sample collections for testing and demonstration"""

    # Topics and the vocabulary their documents draw from
    TOPICS = {
        'retrieval': ['dense retrieval', 'sparse indexes', 'query expansion', 'passage ranking', 'recall'],
        'clustering': ['k-means', 'centroid drift', 'cluster purity', 'silhouette scores', 'topic groups'],
        'evaluation': ['judge models', 'pairwise preference', 'rubric design', 'score calibration', 'agreement'],
        'summarization': ['extractive summaries', 'abstractive models', 'faithfulness', 'compression ratio', 'coverage'],
        'graphs': ['neighbourhood search', 'shortest paths', 'hub nodes', 'edge weights', 'breadth-first traversal'],
        'statistics': ['rank correlation', 'signed-rank tests', 'effect sizes', 'multiple comparisons', 'bootstrap intervals'],
    }

    VERBS = [
        'improves', 'complicates', 'depends on', 'is sensitive to', 'interacts with',
        'is often confused with', 'scales poorly with', 'benefits from',
    ]

    SETTINGS = [
        'in low-resource collections', 'on long documents', 'under a fixed token budget',
        'across twenty domains', 'when the corpus is noisy', 'for open-ended questions',
        'in multilingual settings', 'with small embedding models',
    ]

    QUESTION_FORMS = [
        'How does {a} relate to {b}?',
        'What should a practitioner know about {a}?',
        'Why does {a} matter for {b}?',
        'What are the open problems around {a}?',
    ]

    def __init__(self, seed: int = 42):
        """
        Initialize SampleDataGenerator

        Args:
            seed: Seed for numpy's default_rng; equal seeds give identical output
        """
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def _pick(self, options: List[str]) -> str:
        return options[int(self.rng.integers(len(options)))]

    def _sentence(self, topic: str, serial: int) -> str:
        terms = self.TOPICS[topic]
        a, b = self._pick(terms), self._pick(terms)
        return (
            f"In study {serial}, {a} {self._pick(self.VERBS)} {b} "
            f"{self._pick(self.SETTINGS)}, with {int(self.rng.integers(2, 60))} cases examined."
        )

    def generate_documents(self, count: int = 10, sentences_per_document: int = 24) -> Dict[str, str]:
        """
        Generate documents, each centred on one topic with asides from another

        Returns:
            doc_id -> document text (title line, blank line, paragraphs)
        """
        topics = sorted(self.TOPICS)
        documents = {}
        serial = 0
        for index in range(count):
            topic = topics[index % len(topics)]
            aside = topics[(index + 1 + int(self.rng.integers(len(topics) - 1))) % len(topics)]
            sentences = []
            for position in range(sentences_per_document):
                serial += 1
                sentences.append(self._sentence(aside if position % 5 == 4 else topic, serial))
            paragraphs = [' '.join(sentences[i:i + 6]) for i in range(0, len(sentences), 6)]
            title = f"Notes on {topic} ({index + 1})"
            documents[f"doc{index + 1:02d}"] = title + '\n\n' + '\n\n'.join(paragraphs) + '\n'
        return documents

    def generate_questions(self, documents: Dict[str, str], count: int = 20,
                           collection_id: str = 'sample') -> List[QARecord]:
        """
        Generate question-answer pairs whose answers quote one source document

        Returns:
            QARecords with ids q001, q002, ...
        """
        doc_ids = sorted(documents)
        records = []
        for index in range(count):
            doc_id = doc_ids[int(self.rng.integers(len(doc_ids)))]
            paragraphs = documents[doc_id].split('\n\n')[1:]
            paragraph = paragraphs[int(self.rng.integers(len(paragraphs)))].strip()
            sentences = [s.strip() + '.' for s in paragraph.split('.') if s.strip()]
            answer = ' '.join(sentences[:3])

            topic = next(t for t in sorted(self.TOPICS) if t in documents[doc_id].splitlines()[0])
            a, b = self._pick(self.TOPICS[topic]), self._pick(self.TOPICS[topic])
            question = self._pick(self.QUESTION_FORMS).format(a=a, b=b)
            records.append(QARecord(
                qa_id=f"q{index + 1:03d}",
                collection_id=collection_id,
                question=question,
                answer=answer,
            ))
        return records

    def write_fixture(self, collection_dir: str, qa_file: str, documents: int = 10,
                      questions: int = 20) -> Dict[str, int]:
        """
        Write the collection files and the QA JSONL file

        Returns:
            Counts of documents and questions written
        """
        generated = self.generate_documents(documents)
        root = Path(collection_dir)
        root.mkdir(parents=True, exist_ok=True)
        for doc_id, text in generated.items():
            write_atomic(root / f"{doc_id}.txt", text.encode('utf-8'))

        records = self.generate_questions(generated, questions, collection_id=root.name)
        write_atomic(Path(qa_file), dumps_jsonl(record.to_dict() for record in records))

        logger.info("Wrote %d documents to %s and %d questions to %s",
                    len(generated), collection_dir, len(records), qa_file)
        return {'documents': len(generated), 'questions': len(records)}

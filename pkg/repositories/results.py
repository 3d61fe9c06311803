"""
Results Repository
Persists insight sets, selection traces, question records and judge rows
"""

import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from models.evaluation import JudgeScore, ScoreSummary
from models.insights import InsightSet, IntentProfile, MethodId
from models.store import QARecord
from repositories.index_store import IndexLock
from utils.errors import ContractError, IndexStoreError
from services.insight_engine import insights_from_list
from utils.serialization import (
    PathLike, dumps_json, dumps_jsonl, read_json, read_jsonl, sha256_bytes, write_if_changed,
)


logger = logging.getLogger(__name__)

QUESTIONS = 'questions.jsonl'
INSIGHTS = 'insights'
JUDGMENTS = 'judgments'
SUMMARIES = 'summaries'

_UNSAFE = re.compile(r'[^A-Za-z0-9._-]')


def safe_name(identifier: str) -> str:
    """
    File-name form of an identifier

    Identifiers that are already safe are used as they are; any other gets a
    short digest of the raw identifier appended, so distinct identifiers never
    share a file name.
    """
    name = _UNSAFE.sub('_', identifier)
    if not name or name.startswith('.'):
        name = f"_{name}"
    if name != identifier:
        name = f"{name}-{sha256_bytes(identifier.encode('utf-8'))[:10]}"
    return name


def insight_set_from_dict(data: Dict[str, Any]) -> InsightSet:
    """
    Rebuild an InsightSet written by to_dict

    Raises:
        InsightSchemaError: If a stored insight violates the schema
    """
    intent = data.get('intent')
    return InsightSet(
        qa_id=data['qa_id'],
        method_id=MethodId(data['method_id']),
        insights=insights_from_list(data['insights']),
        template_version=data.get('template_version', ''),
        intent=IntentProfile(
            persona=intent['persona'], goals=list(intent['goals']), intents=list(intent.get('intents', []))
        ) if intent else None,
        context_chunks=int(data.get('context_chunks', 0)),
        context_tokens=int(data.get('context_tokens', 0)),
    )


def load_qa_records(path: PathLike) -> List[QARecord]:
    """
    Read a QA JSONL file

    Raises:
        FileNotFoundError: If the file is missing
        ContractError: On a malformed row or duplicate qa_id
    """
    records = []
    seen = set()
    for line_number, row in enumerate(read_jsonl(path), start=1):
        try:
            record = QARecord.from_dict(row)
        except (KeyError, TypeError) as e:
            raise ContractError(f"{path}:{line_number}: malformed QA record ({e})") from e
        if record.qa_id in seen:
            raise ContractError(f"{path}:{line_number}: duplicate qa_id '{record.qa_id}'")
        seen.add(record.qa_id)
        records.append(record)
    return records


class ResultsStore:
    """
    Repository for a results directory

    Layout: questions.jsonl, insights/<qa_id>/<METHOD>.json,
    judgments/<judge_id>.<protocol>.jsonl and
    summaries/<judge_id>.<protocol>.json. Writers hold the directory lock.
    """

    def __init__(self, root: PathLike):
        self.root = Path(root)

    def lock(self) -> IndexLock:
        return IndexLock(self.root)

    def insight_path(self, qa_id: str, method_id: MethodId) -> Path:
        return self.root / INSIGHTS / safe_name(qa_id) / f"{method_id.value}.json"

    def save_questions(self, records: Sequence[QARecord]) -> bool:
        """Merge records into questions.jsonl, keyed and sorted by qa_id"""
        merged = {record.qa_id: record for record in self.load_questions()}
        merged.update({record.qa_id: record for record in records})
        rows = [merged[qa_id].to_dict() for qa_id in sorted(merged)]
        return write_if_changed(self.root / QUESTIONS, dumps_jsonl(rows))

    def load_questions(self) -> List[QARecord]:
        path = self.root / QUESTIONS
        return load_qa_records(path) if path.exists() else []

    def save_insight_set(self, insight_set: InsightSet) -> Path:
        path = self.insight_path(insight_set.qa_id, insight_set.method_id)
        write_if_changed(path, dumps_json(insight_set.to_dict()))
        return path

    def load_insight_set(self, qa_id: str, method_id: MethodId) -> InsightSet:
        path = self.insight_path(qa_id, method_id)
        if not path.exists():
            raise IndexStoreError(f"No {method_id.value} insights for {qa_id} in {self.root}")
        return insight_set_from_dict(read_json(path))

    def load_sets_for(self, qa_id: str) -> Dict[str, InsightSet]:
        """method id -> InsightSet for every method stored for one question"""
        directory = self.root / INSIGHTS / safe_name(qa_id)
        sets = {}
        if directory.is_dir():
            for path in sorted(directory.glob('*.json')):
                insight_set = insight_set_from_dict(read_json(path))
                if insight_set.qa_id != qa_id:
                    raise IndexStoreError(f"{path} holds insights for '{insight_set.qa_id}', not '{qa_id}'")
                sets[insight_set.method_id.value] = insight_set
        return sets

    def judgment_path(self, judge_id: str, protocol: str) -> Path:
        return self.root / JUDGMENTS / f"{safe_name(judge_id)}.{protocol}.jsonl"

    def save_judgments(self, judge_id: str, protocol: str, scores: Sequence[JudgeScore]) -> Path:
        path = self.judgment_path(judge_id, protocol)
        ordered = sorted(scores, key=lambda s: (s.qa_id, s.repeat, s.method_id))
        write_if_changed(path, dumps_jsonl(score.to_row() for score in ordered))
        return path

    def summary_path(self, judge_id: str, protocol: str) -> Path:
        return self.root / SUMMARIES / f"{safe_name(judge_id)}.{protocol}.json"

    def save_summary(self, summary: ScoreSummary) -> Path:
        path = self.summary_path(summary.judge_id, summary.protocol)
        write_if_changed(path, dumps_json(summary.to_dict()))
        return path


def load_judgments(path: PathLike) -> List[JudgeScore]:
    """
    Raises:
        ContractError: On a malformed row
    """
    try:
        return [JudgeScore.from_row(row) for row in read_jsonl(path)]
    except (KeyError, TypeError, ValueError) as e:
        raise ContractError(f"Malformed judge rows in {path}: {e}") from e


class TraceStore:
    """Selection traces under <index>/traces, one JSON document per question"""

    def __init__(self, root: PathLike):
        self.root = Path(root)

    def path(self, qa_id: str) -> Path:
        return self.root / f"{safe_name(qa_id)}.json"

    def load(self, qa_id: str) -> Optional[Dict[str, Any]]:
        path = self.path(qa_id)
        return read_json(path) if path.exists() else None

    def update(self, qa_id: str, sections: Dict[str, Any]) -> Dict[str, Any]:
        """Set sections of a question's trace, keeping the others"""
        trace = self.load(qa_id) or {'qa_id': qa_id}
        trace.update(sections)
        write_if_changed(self.path(qa_id), dumps_json(trace))
        return trace

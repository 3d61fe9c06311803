"""
Judge Evaluation Service
Set-level and insight-level comparative judging with seeded presentation order
"""

import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from models.evaluation import PROTOCOL_INSIGHT, PROTOCOL_SET, InsightLevelResult, JudgeScore
from models.insights import SCORE_MAX, SCORE_MIN, Insight, InsightSet
from models.store import QARecord
from utils.errors import ContractError, JudgeParseError
from services.prompting import complete_with_repair, extract_json, render
from services.text_models import DEFAULT_MAX_TOKENS, TextModel


logger = logging.getLogger(__name__)

DEFAULT_REPEATS = 10
DEFAULT_CRITERIA = {
    'novelty': 'Novelty: how much new information or ideas the insights introduce',
    'diversity': 'Diversity: how distinct the insights are from one another',
    'relevance': 'Relevance: how well the insights address the original question',
    'depth': 'Depth: whether the insights are substantive rather than superficial',
}
SET_CRITERIA = ('novelty', 'diversity', 'relevance', 'depth')
INSIGHT_CRITERIA = ('novelty', 'relevance', 'depth')


def method_label(position: int) -> str:
    return f"Method {position + 1}"


def shuffle_methods(methods: Sequence[str], rng: np.random.Generator) -> List[str]:
    """Presentation order: a uniformly random permutation drawn from rng"""
    return [methods[i] for i in rng.permutation(len(methods))]


def format_insight(insight: Insight) -> str:
    return (
        f"- [{insight.insight_type.value}] {insight.hook}\n"
        f"  {insight.body}\n"
        f"  Takeaway: {insight.takeaway}"
    )


def parse_judge_reply(raw: str, labels: Sequence[str]) -> Dict[str, Dict]:
    """
    Parse {"scores": [{"method", "score", "rationale"}]} into label -> entry

    Raises:
        ValueError: If the reply misses a label, repeats one, names an unknown
            label or carries a score outside [0, 5]
    """
    data = extract_json(raw)
    entries = data.get('scores') if isinstance(data, dict) else data
    if not isinstance(entries, list):
        raise ValueError("judge reply needs a 'scores' list")

    parsed: Dict[str, Dict] = {}
    for entry in entries:
        if not isinstance(entry, dict):
            raise ValueError("every score entry must be an object")
        label = str(entry.get('method', '')).strip()
        if label not in labels:
            raise ValueError(f"unknown method label {label!r}")
        if label in parsed:
            raise ValueError(f"duplicate score for {label}")
        score = entry.get('score')
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise ValueError(f"score for {label} must be a number")
        if not math.isfinite(score) or not SCORE_MIN <= float(score) <= SCORE_MAX:
            raise ValueError(f"score {score} for {label} outside [0, 5]")
        rationale = entry.get('rationale', '')
        parsed[label] = {'score': float(score), 'rationale': rationale if isinstance(rationale, str) else ''}

    missing = [label for label in labels if label not in parsed]
    if missing:
        raise ValueError(f"judge reply misses {', '.join(missing)}")
    return parsed


class JudgeEvaluator:
    """
    Runs the comparative judge protocols for one judge model

    Methods are shown under neutral labels ("Method 1", ...) in a seeded
    random order and scores are mapped back to methods by label.
    """

    def __init__(self, judge: TextModel, judge_id: Optional[str] = None,
                 criteria: Optional[Mapping[str, str]] = None, parse_retries: int = 2,
                 temperature: float = 0.0, max_tokens: int = DEFAULT_MAX_TOKENS):
        """
        Initialize JudgeEvaluator

        Args:
            judge: Text model used only for judging
            judge_id: Id recorded on every score (defaults to the model id)
            criteria: Criterion name -> description shown to the judge
            parse_retries: Repair prompts allowed after a malformed reply
            temperature: Judge sampling temperature
            max_tokens: Output token cap per judge call
        """
        self.judge = judge
        self.judge_id = judge_id or getattr(judge, 'model_id', 'judge')
        self.criteria = dict(DEFAULT_CRITERIA)
        self.criteria.update(criteria or {})
        self.parse_retries = parse_retries
        self.temperature = temperature
        self.max_tokens = max_tokens

    def _criteria_lines(self, names: Sequence[str]) -> List[str]:
        return [self.criteria[name] for name in names if name in self.criteria]

    def _ask(self, template: str, qa: QARecord, criteria: Sequence[str],
             blocks: List[Dict[str, str]]) -> Dict[str, Dict]:
        prompt = render(
            template,
            question=qa.question,
            answer=qa.answer,
            criteria=self._criteria_lines(criteria),
            methods=blocks,
        )
        labels = [block['label'] for block in blocks]
        return complete_with_repair(
            self.judge, prompt, lambda raw: parse_judge_reply(raw, labels),
            self.parse_retries, self.temperature, self.max_tokens, JudgeParseError,
        )

    def judge_set_level(self, qa: QARecord, sets: Mapping[str, InsightSet],
                        rng: np.random.Generator, seed: Optional[int] = None) -> List[JudgeScore]:
        """
        Score every method's whole insight set in one comparative prompt

        Args:
            qa: Question and answer
            sets: Method id -> InsightSet (at least two methods)
            rng: Seeded generator driving the presentation order
            seed: Seed recorded on the result rows

        Returns:
            One JudgeScore per method, in method id order

        Raises:
            ContractError: With fewer than two methods
            JudgeParseError: If the reply stays malformed after the repair retries
        """
        if len(sets) < 2:
            raise ContractError("Set-level judging needs at least two methods")
        methods = sorted(sets)
        order = shuffle_methods(methods, rng)
        blocks = [
            {
                'label': method_label(position),
                'text': '\n'.join(format_insight(insight) for insight in sets[method].insights),
            }
            for position, method in enumerate(order)
        ]
        parsed = self._ask('judge_set', qa, SET_CRITERIA, blocks)
        by_method = {method: parsed[method_label(position)] for position, method in enumerate(order)}

        logger.debug("Set-level order for %s: %s", qa.qa_id, order)
        return [
            JudgeScore(
                qa_id=qa.qa_id,
                method_id=method,
                score=by_method[method]['score'],
                rationale=by_method[method]['rationale'],
                judge_id=self.judge_id,
                protocol=PROTOCOL_SET,
                repeat=0,
                seed=seed,
                collection_id=qa.collection_id,
            )
            for method in methods
        ]

    def judge_insight_level(self, qa: QARecord, sets: Mapping[str, InsightSet],
                            rng: np.random.Generator, repeats: int = DEFAULT_REPEATS,
                            seed: Optional[int] = None) -> InsightLevelResult:
        """
        Judge one sampled insight per method, repeated and averaged

        Each repeat first draws one insight index per method (methods in id
        order, rng.integers) and then a presentation permutation. Diversity is
        not a criterion here.

        Returns:
            InsightLevelResult with the mean per method and every per-repeat score

        Raises:
            ContractError: If repeats < 1, fewer than two methods or an empty set
            JudgeParseError: If a reply stays malformed after the repair retries
        """
        if repeats < 1:
            raise ContractError(f"repeats must be >= 1, got {repeats}")
        if len(sets) < 2:
            raise ContractError("Insight-level judging needs at least two methods")
        empty = [method for method, insight_set in sets.items() if not insight_set.insights]
        if empty:
            raise ContractError(f"Insight sets are empty for: {', '.join(sorted(empty))}")

        methods = sorted(sets)
        per_repeat: List[Dict[str, float]] = []
        sampled: List[Dict[str, int]] = []
        scores: List[JudgeScore] = []

        for repeat in range(repeats):
            picks = {method: int(rng.integers(len(sets[method].insights))) for method in methods}
            order = shuffle_methods(methods, rng)
            blocks = [
                {
                    'label': method_label(position),
                    'text': format_insight(sets[method].insights[picks[method]]),
                }
                for position, method in enumerate(order)
            ]
            parsed = self._ask('judge_insight', qa, INSIGHT_CRITERIA, blocks)

            round_scores = {}
            for position, method in enumerate(order):
                entry = parsed[method_label(position)]
                round_scores[method] = entry['score']
                scores.append(JudgeScore(
                    qa_id=qa.qa_id,
                    method_id=method,
                    score=entry['score'],
                    rationale=entry['rationale'],
                    judge_id=self.judge_id,
                    protocol=PROTOCOL_INSIGHT,
                    repeat=repeat,
                    seed=seed,
                    collection_id=qa.collection_id,
                ))
            per_repeat.append({method: round_scores[method] for method in methods})
            sampled.append(picks)

        means = {method: math.fsum(row[method] for row in per_repeat) / repeats for method in methods}
        scores.sort(key=lambda s: (s.repeat, s.method_id))
        return InsightLevelResult(means=means, per_repeat=per_repeat, sampled_indices=sampled, scores=scores)


def judge_set_level(qa: QARecord, sets: Mapping[str, InsightSet], judge: TextModel,
                    rng: np.random.Generator, **kwargs) -> List[JudgeScore]:
    return JudgeEvaluator(judge, **kwargs).judge_set_level(qa, sets, rng)


def judge_insight_level(qa: QARecord, sets: Mapping[str, InsightSet], judge: TextModel,
                        rng: np.random.Generator, repeats: int = DEFAULT_REPEATS,
                        **kwargs) -> Dict[str, float]:
    """Mean score per method; use JudgeEvaluator for the per-repeat detail"""
    return JudgeEvaluator(judge, **kwargs).judge_insight_level(qa, sets, rng, repeats).means

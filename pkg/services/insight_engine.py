"""
Insight Engine Service
Two-step generation: infer the reader's intent, then write typed, self-scored
insights grounded in a context block
"""

import json
import logging
import math
from typing import Any, List, Optional, Sequence

from models.insights import (
    SCORE_KEYS, SCORE_MAX, SCORE_MIN, Insight, InsightSet, InsightType, IntentProfile, MethodId,
)
from utils.errors import (
    ContractError, EmptyGenerationError, GenerationParseError, InsightSchemaError,
)
from services.prompting import TEMPLATE_VERSION, complete_with_repair, extract_json, render
from services.text_models import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, TextModel


logger = logging.getLogger(__name__)

DEFAULT_MAX_INSIGHTS = 5
DEFAULT_PARSE_RETRIES = 2
REPETITION_WINDOW = 200

_TEXT_FIELDS = ('hook', 'body', 'takeaway', 'justification')
_REQUIRED_NONEMPTY = ('hook', 'body')


def _require_text(data: dict, key: str, path: str, nonempty: bool) -> str:
    value = data.get(key)
    if not isinstance(value, str):
        raise InsightSchemaError(f"{path}.{key}", "required text field is missing or not a string")
    if nonempty and not value.strip():
        raise InsightSchemaError(f"{path}.{key}", "must not be empty")
    return value


def _parse_score(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InsightSchemaError(path, f"score must be a number, got {value!r}")
    score = float(value)
    if not math.isfinite(score) or not SCORE_MIN <= score <= SCORE_MAX:
        raise InsightSchemaError(path, f"score {value} outside [{SCORE_MIN:g}, {SCORE_MAX:g}]")
    return score


def insight_from_dict(data: Any, path: str = '') -> Insight:
    """
    Validate one insight object; unknown fields are ignored

    Raises:
        InsightSchemaError: Naming the offending field path
    """
    if not isinstance(data, dict):
        raise InsightSchemaError(path, "insight must be an object")

    raw_type = data.get('insight_type')
    try:
        insight_type = InsightType(raw_type)
    except ValueError:
        raise InsightSchemaError(f"{path}.insight_type", f"unknown insight type {raw_type!r}")

    fields = {key: _require_text(data, key, path, key in _REQUIRED_NONEMPTY) for key in _TEXT_FIELDS}

    scores = data.get('self_scores')
    if not isinstance(scores, dict):
        raise InsightSchemaError(f"{path}.self_scores", "self_scores must be an object")
    self_scores = {}
    for key in SCORE_KEYS:
        if key not in scores:
            raise InsightSchemaError(f"{path}.self_scores.{key}", "missing self-score")
        self_scores[key] = _parse_score(scores[key], f"{path}.self_scores.{key}")

    return Insight(insight_type=insight_type, self_scores=self_scores, **fields)


def insights_from_list(items: Any) -> List[Insight]:
    if not isinstance(items, list):
        raise InsightSchemaError('', "expected a JSON array of insights")
    return [insight_from_dict(item, f"[{i}]") for i, item in enumerate(items)]


def parse_insights(raw: str) -> List[Insight]:
    """
    Parse a model reply into insights with strict schema validation

    Args:
        raw: Reply text holding a JSON array (markdown fences allowed)

    Returns:
        List of Insight in reply order

    Raises:
        ValueError: If the reply holds no JSON
        InsightSchemaError: On the first schema violation, with its field path
            (e.g. "[0].self_scores.novelty")
    """
    data = extract_json(raw)
    if isinstance(data, dict) and 'insights' in data:
        data = data['insights']
    return insights_from_list(data)


def serialize_insights(insights: Sequence[Insight]) -> str:
    return json.dumps([insight.to_dict() for insight in insights], ensure_ascii=False)


def parse_intent(raw: str) -> IntentProfile:
    """
    Parse an intent reply

    Raises:
        ValueError: If the reply is not a JSON object with a persona and at least one goal
    """
    data = extract_json(raw)
    if not isinstance(data, dict):
        raise ValueError("intent reply must be a JSON object")
    persona = data.get('persona')
    goals = data.get('goals')
    intents = data.get('intents', [])
    if not isinstance(persona, str) or not persona.strip():
        raise ValueError("intent reply needs a non-empty 'persona'")
    if not isinstance(goals, list) or not goals or not all(isinstance(g, str) and g.strip() for g in goals):
        raise ValueError("intent reply needs at least one non-empty goal in 'goals'")
    if not isinstance(intents, list) or not all(isinstance(i, str) for i in intents):
        raise ValueError("'intents' must be a list of strings")
    return IntentProfile(persona=persona.strip(), goals=list(goals), intents=list(intents))


def copies_answer(body: str, answer: str, window: int = REPETITION_WINDOW) -> bool:
    """True when body contains any window-length substring of answer verbatim"""
    if len(answer) < window or len(body) < window:
        return False
    answer_windows = {answer[i:i + window] for i in range(len(answer) - window + 1)}
    return any(body[i:i + window] in answer_windows for i in range(len(body) - window + 1))


class InsightEngine:
    """Renders the generation prompts and turns model replies into insight sets"""

    def __init__(self, text_model: TextModel, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS, parse_retries: int = DEFAULT_PARSE_RETRIES):
        """
        Initialize InsightEngine

        Args:
            text_model: Provider used for both generation steps
            temperature: Sampling temperature
            max_tokens: Output token cap per call
            parse_retries: Repair prompts allowed after a malformed reply
        """
        if parse_retries < 0:
            raise ContractError("parse_retries must be >= 0")
        self.text_model = text_model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.parse_retries = parse_retries

    def intent_prompt(self, question: str, answer: str) -> str:
        return render('intent', question=question, answer=answer)

    def cot_prompt(self, question: str, answer: str, context: str, intent: IntentProfile,
                   max_n: int = DEFAULT_MAX_INSIGHTS) -> str:
        """Second CoT step; identical across methods apart from the context block"""
        return render(
            'insights_cot',
            question=question,
            answer=answer,
            intent_json=json.dumps(intent.to_dict(), ensure_ascii=False, sort_keys=True),
            context=context,
            insight_types=[t.value for t in InsightType],
            score_keys=SCORE_KEYS,
            max_insights=max_n,
        )

    def direct_prompt(self, question: str, answer: str, context: str,
                      max_n: int = DEFAULT_MAX_INSIGHTS) -> str:
        return render(
            'insights_direct',
            question=question,
            answer=answer,
            context=context,
            insight_types=[t.value for t in InsightType],
            score_keys=SCORE_KEYS,
            max_insights=max_n,
        )

    def _complete(self, prompt: str, parse):
        return complete_with_repair(
            self.text_model, prompt, parse, self.parse_retries,
            self.temperature, self.max_tokens, GenerationParseError,
        )

    def infer_intent(self, question: str, answer: str) -> IntentProfile:
        """
        Step 1: infer the reader's persona, goals and intents

        Raises:
            ContractError: If question or answer is empty
            GenerationParseError: If the reply stays malformed after the repair retries
            ProviderError: On provider failure
        """
        if not question.strip() or not answer.strip():
            raise ContractError("infer_intent requires a non-empty question and answer")
        return self._complete(self.intent_prompt(question, answer), parse_intent)

    def _finalize(self, insights: List[Insight], answer: str, max_n: int, qa_id: str,
                  method_id: MethodId, intent: Optional[IntentProfile]) -> InsightSet:
        kept = []
        for insight in insights:
            if copies_answer(insight.body, answer):
                logger.warning("Rejected insight '%s' for %s/%s: body repeats the answer",
                               insight.hook, qa_id, method_id.value)
                continue
            kept.append(insight)

        if len(kept) > max_n:
            logger.info("Truncating %d insights to %d for %s/%s", len(kept), max_n, qa_id, method_id.value)
            kept = kept[:max_n]
        if not kept:
            raise EmptyGenerationError(f"No valid insights for {qa_id}/{method_id.value}")

        return InsightSet(
            qa_id=qa_id,
            method_id=method_id,
            insights=kept,
            template_version=TEMPLATE_VERSION,
            intent=intent,
        )

    def generate_insights(self, question: str, answer: str, context: str, intent: IntentProfile,
                          max_n: int = DEFAULT_MAX_INSIGHTS, qa_id: str = '',
                          method_id: MethodId = MethodId.INSIGHTGEN) -> InsightSet:
        """
        Step 2: generate typed insights from the context and the inferred intent

        Insights whose body repeats a 200-character span of the answer are
        rejected, then the reply is cut to the first max_n insights.

        Raises:
            EmptyGenerationError: If no insight survives
            GenerationParseError: If the reply stays malformed after the repair retries
        """
        if max_n < 1:
            raise ContractError("max_n must be >= 1")
        prompt = self.cot_prompt(question, answer, context, intent, max_n)
        insights = self._complete(prompt, parse_insights)
        return self._finalize(insights, answer, max_n, qa_id, method_id, intent)

    def generate_single_prompt(self, question: str, answer: str, context: str,
                               max_n: int = DEFAULT_MAX_INSIGHTS, qa_id: str = '',
                               method_id: MethodId = MethodId.DIRECT) -> InsightSet:
        """Single-prompt generation without the intent step"""
        if max_n < 1:
            raise ContractError("max_n must be >= 1")
        prompt = self.direct_prompt(question, answer, context, max_n)
        insights = self._complete(prompt, parse_insights)
        return self._finalize(insights, answer, max_n, qa_id, method_id, None)


def infer_intent(question: str, answer: str, provider: TextModel,
                 parse_retries: int = DEFAULT_PARSE_RETRIES) -> IntentProfile:
    return InsightEngine(provider, parse_retries=parse_retries).infer_intent(question, answer)


def generate_insights(question: str, answer: str, context: str, intent: IntentProfile,
                      provider: TextModel, max_n: int = DEFAULT_MAX_INSIGHTS,
                      parse_retries: int = DEFAULT_PARSE_RETRIES) -> InsightSet:
    engine = InsightEngine(provider, parse_retries=parse_retries)
    return engine.generate_insights(question, answer, context, intent, max_n)

"""
Insight data types shared by the generator, the baselines and the judges
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class InsightType(str, Enum):
    MISSING_INFORMATION = 'MISSING_INFORMATION'
    NEW_IDEA = 'NEW_IDEA'
    ALTERNATE_FRAMING = 'ALTERNATE_FRAMING'
    MIND_MAP = 'MIND_MAP'
    POTENTIAL_ISSUE = 'POTENTIAL_ISSUE'
    INTERESTING_FACT = 'INTERESTING_FACT'
    SHORT_QUIZ = 'SHORT_QUIZ'
    REAL_WORLD_APPLICATION = 'REAL_WORLD_APPLICATION'
    TRADEOFF_ANALYSIS = 'TRADEOFF_ANALYSIS'


class MethodId(str, Enum):
    INSIGHTGEN = 'INSIGHTGEN'
    DIRECT = 'DIRECT'
    DIRECT_COT = 'DIRECT_COT'
    SIM = 'SIM'
    SIM_COT = 'SIM_COT'

    @property
    def uses_cot(self) -> bool:
        return self in (MethodId.INSIGHTGEN, MethodId.DIRECT_COT, MethodId.SIM_COT)


# Self-assessment dimensions, each scored in [0, 5]
SCORE_KEYS = ('relevance', 'novelty', 'usefulness', 'intent_alignment')
SCORE_MIN = 0.0
SCORE_MAX = 5.0


@dataclass(frozen=True)
class IntentProfile:
    """User persona, goals and intents inferred from a question-answer pair"""

    persona: str
    goals: List[str]
    intents: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'persona': self.persona, 'goals': list(self.goals), 'intents': list(self.intents)}


@dataclass(frozen=True)
class Insight:
    insight_type: InsightType
    hook: str
    body: str
    takeaway: str
    justification: str
    self_scores: Dict[str, float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'insight_type': self.insight_type.value,
            'hook': self.hook,
            'body': self.body,
            'takeaway': self.takeaway,
            'justification': self.justification,
            'self_scores': {key: self.self_scores[key] for key in SCORE_KEYS},
        }


@dataclass
class InsightSet:
    """
    Insights produced by one method for one question

    template_version records the prompt templates used; intent is only
    present for the two-step methods.
    """

    qa_id: str
    method_id: MethodId
    insights: List[Insight]
    template_version: str = ''
    intent: Optional[IntentProfile] = None
    context_chunks: int = 0
    context_tokens: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'qa_id': self.qa_id,
            'method_id': self.method_id.value,
            'template_version': self.template_version,
            'intent': self.intent.to_dict() if self.intent else None,
            'context_chunks': self.context_chunks,
            'context_tokens': self.context_tokens,
            'insights': [insight.to_dict() for insight in self.insights],
        }

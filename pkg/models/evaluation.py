"""
Judge scores and cross-judge agreement types
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional


PROTOCOL_SET = 'set'
PROTOCOL_INSIGHT = 'insight'


@dataclass(frozen=True)
class JudgeScore:
    qa_id: str
    method_id: str
    score: float
    rationale: str = ''
    judge_id: str = ''
    protocol: str = PROTOCOL_SET
    repeat: int = 0
    seed: Optional[int] = None
    collection_id: str = ''

    def to_row(self) -> Dict[str, Any]:
        """Results-table row; rationale is kept for auditability"""
        return {
            'qa_id': self.qa_id,
            'method_id': self.method_id,
            'judge_id': self.judge_id,
            'protocol': self.protocol,
            'repeat': self.repeat,
            'score': self.score,
            'seed': self.seed,
            'rationale': self.rationale,
            'collection_id': self.collection_id,
        }

    @classmethod
    def from_row(cls, row: Dict[str, Any]) -> 'JudgeScore':
        return cls(
            qa_id=row['qa_id'],
            method_id=row['method_id'],
            score=float(row['score']),
            rationale=row.get('rationale', ''),
            judge_id=row.get('judge_id', ''),
            protocol=row.get('protocol', PROTOCOL_SET),
            repeat=int(row.get('repeat', 0)),
            seed=row.get('seed'),
            collection_id=row.get('collection_id', ''),
        )


@dataclass
class InsightLevelResult:
    """Mean score per method plus the retained per-repeat scores"""

    means: Dict[str, float]
    per_repeat: List[Dict[str, float]]
    sampled_indices: List[Dict[str, int]] = field(default_factory=list)
    scores: List[JudgeScore] = field(default_factory=list)


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    z: float
    effect_r: float
    n: int
    method: str
    w_plus: float = 0.0
    w_minus: float = 0.0
    comparison_id: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {
            'comparison_id': self.comparison_id,
            'W': self.statistic,
            'w_plus': self.w_plus,
            'w_minus': self.w_minus,
            'p': self.p_value,
            'z': self.z,
            'effect_r': self.effect_r,
            'n': self.n,
            'method': self.method,
        }


@dataclass
class AgreementReport:
    spearman_per_domain: Dict[str, float]
    pairwise_ordering_agreement: float
    top2_jaccard: float
    top1_agreement: float
    wilcoxon: List[WilcoxonResult]
    bonferroni_alpha: float
    base_alpha: float = 0.05
    num_questions: int = 0
    spearman_summary: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'num_questions': self.num_questions,
            'spearman_per_domain': dict(sorted(self.spearman_per_domain.items())),
            'spearman_summary': dict(self.spearman_summary),
            'pairwise_ordering_agreement': self.pairwise_ordering_agreement,
            'top2_jaccard': self.top2_jaccard,
            'top1_agreement': self.top1_agreement,
            'wilcoxon': [result.to_dict() for result in self.wilcoxon],
            'base_alpha': self.base_alpha,
            'bonferroni_alpha': self.bonferroni_alpha,
            'significant': [
                result.comparison_id for result in self.wilcoxon
                if result.p_value < self.bonferroni_alpha
            ],
        }


@dataclass
class ScoreSummary:
    """Mean judge score per method, overall and per domain"""

    judge_id: str
    protocol: str
    num_questions: int
    methods: Dict[str, Dict[str, float]]
    by_domain: Dict[str, Dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'judge_id': self.judge_id,
            'protocol': self.protocol,
            'num_questions': self.num_questions,
            'methods': {method: dict(stats) for method, stats in self.methods.items()},
            'by_domain': {domain: dict(means) for domain, means in sorted(self.by_domain.items())},
        }

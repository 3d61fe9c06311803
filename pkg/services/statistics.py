"""
Statistics Service
Rank statistics for comparing methods and judges: Spearman correlation,
Wilcoxon signed-rank test, Bonferroni correction and cross-judge agreement
"""

import logging
import math
from collections import defaultdict
from itertools import combinations
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

from models.evaluation import AgreementReport, JudgeScore, ScoreSummary, WilcoxonResult
from models.insights import MethodId
from utils.errors import ContractError, DegenerateSampleError


logger = logging.getLogger(__name__)

EXACT_MAX_N = 25
MIN_WILCOXON_N = 5
WILCOXON_METHODS = ('auto', 'exact', 'approx')
DEFAULT_DOMAIN = 'default'

ScoreTable = Dict[str, Dict[str, float]]


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Spearman rank correlation with average ranks for ties

    Raises:
        ContractError: On length mismatch or fewer than two observations
        DegenerateSampleError: If either input is constant
    """
    if len(x) != len(y):
        raise ContractError(f"Length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ContractError("spearman_rho needs at least two observations")

    rx = rankdata(np.asarray(x, dtype=np.float64))
    ry = rankdata(np.asarray(y, dtype=np.float64))
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denominator = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    if denominator == 0.0:
        raise DegenerateSampleError("Spearman correlation is undefined for constant input")
    return float(np.clip(np.dot(dx, dy) / denominator, -1.0, 1.0))


def _exact_tails(doubled_ranks: np.ndarray, observed: int) -> Tuple[float, float]:
    """P(W+ <= observed) and P(W+ >= observed) over all sign patterns (doubled units)"""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for rank in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[rank:] = counts[:total + 1 - rank]
        counts = counts + shifted
    counts /= counts.sum()
    return float(counts[:observed + 1].sum()), float(counts[observed:].sum())


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], method: str = 'auto',
                         comparison_id: str = '') -> WilcoxonResult:
    """
    Two-sided Wilcoxon signed-rank test on paired samples

    Zero differences are dropped and tied absolute differences share the
    average rank. The p value is exact (enumerating every sign pattern) for
    n <= 25 and otherwise from the normal approximation with tie correction
    and continuity correction. Z always comes from the approximation and is
    signed by W+; effect_r = |Z| / sqrt(n).

    Args:
        a: First sample
        b: Second sample, paired with a
        method: 'auto', 'exact' or 'approx'
        comparison_id: Label carried on the result

    Returns:
        WilcoxonResult with W = min(W+, W-)

    Raises:
        ContractError: On length mismatch, an unknown method, or fewer than 5
            nonzero differences
        DegenerateSampleError: If every difference is zero
    """
    if method not in WILCOXON_METHODS:
        raise ContractError(f"Invalid method '{method}'. Valid: {', '.join(WILCOXON_METHODS)}")
    if len(a) != len(b):
        raise ContractError(f"Length mismatch: {len(a)} vs {len(b)}")

    differences = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    differences = differences[differences != 0.0]
    n = int(differences.shape[0])
    if n == 0:
        raise DegenerateSampleError("All paired differences are zero")
    if n < MIN_WILCOXON_N:
        raise ContractError(f"Wilcoxon needs at least {MIN_WILCOXON_N} nonzero differences, got {n}")

    ranks = rankdata(np.abs(differences))
    w_plus = float(ranks[differences > 0].sum())
    w_minus = float(ranks[differences < 0].sum())

    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_sizes.astype(np.float64) ** 3 - tie_sizes)) / 48.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    offset = w_plus - mean
    corrected = max(abs(offset) - 0.5, 0.0)
    z = math.copysign(corrected, offset) / math.sqrt(variance) if corrected > 0 else 0.0

    use_exact = method == 'exact' or (method == 'auto' and n <= EXACT_MAX_N)
    if use_exact:
        doubled = np.rint(2 * ranks).astype(np.int64)
        lower, upper = _exact_tails(doubled, int(round(2 * w_plus)))
        p_value = min(1.0, 2.0 * min(lower, upper))
    else:
        p_value = min(1.0, 2.0 * float(norm.sf(abs(z))))

    return WilcoxonResult(
        statistic=min(w_plus, w_minus),
        p_value=p_value,
        z=z,
        effect_r=abs(z) / math.sqrt(n),
        n=n,
        method='exact' if use_exact else 'approx',
        w_plus=w_plus,
        w_minus=w_minus,
        comparison_id=comparison_id,
    )


def bonferroni(alpha: float, num_tests: int) -> float:
    """Per-test significance level alpha / num_tests"""
    if num_tests < 1:
        raise ContractError(f"num_tests must be >= 1, got {num_tests}")
    return alpha / num_tests


def method_sort_key(method: str) -> Tuple[int, str]:
    """Canonical method order: MethodId declaration order, unknown ids after it"""
    order = [m.value for m in MethodId]
    return (order.index(method), method) if method in order else (len(order), method)


def score_table(scores: Iterable[JudgeScore]) -> ScoreTable:
    """qa_id -> method -> mean score (averages insight-level repeats)"""
    sums: Dict[Tuple[str, str], List[float]] = defaultdict(list)
    for score in scores:
        sums[(score.qa_id, score.method_id)].append(score.score)
    table: ScoreTable = defaultdict(dict)
    for (qa_id, method), values in sums.items():
        table[qa_id][method] = math.fsum(values) / len(values)
    return dict(table)


def _ranked_methods(row: Mapping[str, float]) -> List[str]:
    return sorted(row, key=lambda m: (-row[m], method_sort_key(m)))


def _sign(value: float) -> int:
    return (value > 0) - (value < 0)


def pairwise_ordering_agreement(table_a: ScoreTable, table_b: ScoreTable) -> float:
    """
    Fraction of (question, method pair) cases both judges order the same way

    A tie agrees only with a tie.
    """
    agree = total = 0
    for qa_id in sorted(table_a):
        row_a, row_b = table_a[qa_id], table_b[qa_id]
        for m1, m2 in combinations(sorted(row_a, key=method_sort_key), 2):
            total += 1
            agree += _sign(row_a[m1] - row_a[m2]) == _sign(row_b[m1] - row_b[m2])
    if total == 0:
        raise ContractError("No method pairs to compare; every question needs at least two methods")
    return agree / total


def top_k_jaccard(table_a: ScoreTable, table_b: ScoreTable, k: int = 2) -> float:
    """Mean Jaccard index of the judges' top-k method sets per question"""
    values = []
    for qa_id in sorted(table_a):
        top_a = set(_ranked_methods(table_a[qa_id])[:k])
        top_b = set(_ranked_methods(table_b[qa_id])[:k])
        values.append(len(top_a & top_b) / len(top_a | top_b))
    return math.fsum(values) / len(values)


def top1_agreement(table_a: ScoreTable, table_b: ScoreTable) -> float:
    matches = sum(
        _ranked_methods(table_a[qa_id])[0] == _ranked_methods(table_b[qa_id])[0]
        for qa_id in table_a
    )
    return matches / len(table_a)


def _domains(scores: Iterable[JudgeScore], domain_of: Optional[Mapping[str, str]]) -> Dict[str, str]:
    mapping = {}
    for score in scores:
        mapping[score.qa_id] = score.collection_id or DEFAULT_DOMAIN
    if domain_of:
        mapping.update(domain_of)
    return mapping


def spearman_by_domain(table_a: ScoreTable, table_b: ScoreTable,
                       domains: Mapping[str, str]) -> Dict[str, float]:
    """
    Spearman correlation of the judges' mean method scores within each domain

    Domains where a judge gives every method the same mean are skipped with
    a warning.
    """
    grouped: Dict[str, List[str]] = defaultdict(list)
    for qa_id in sorted(table_a):
        grouped[domains.get(qa_id, DEFAULT_DOMAIN)].append(qa_id)

    result = {}
    for domain, qa_ids in sorted(grouped.items()):
        methods = sorted({m for qa_id in qa_ids for m in table_a[qa_id]}, key=method_sort_key)
        if len(methods) < 2:
            continue
        means_a, means_b = [], []
        for method in methods:
            values_a = [table_a[q][method] for q in qa_ids if method in table_a[q]]
            values_b = [table_b[q][method] for q in qa_ids if method in table_b[q]]
            means_a.append(math.fsum(values_a) / len(values_a))
            means_b.append(math.fsum(values_b) / len(values_b))
        try:
            result[domain] = spearman_rho(means_a, means_b)
        except DegenerateSampleError as e:
            logger.warning("Skipping Spearman for domain '%s': %s", domain, e)
    return result


def summarize(values: Sequence[float]) -> Dict[str, float]:
    if not values:
        return {}
    data = np.asarray(values, dtype=np.float64)
    return {
        'median': float(np.median(data)),
        'p75': float(np.percentile(data, 75)),
        'p90': float(np.percentile(data, 90)),
        'mean': float(data.mean()),
    }


def _judge_label(scores: Sequence[JudgeScore], fallback: str) -> str:
    ids = {score.judge_id for score in scores if score.judge_id}
    return ids.pop() if len(ids) == 1 else fallback


def agreement_stats(scores_a: Sequence[JudgeScore], scores_b: Sequence[JudgeScore],
                    reference: str = MethodId.INSIGHTGEN.value, base_alpha: float = 0.05,
                    num_tests: Optional[int] = None,
                    domain_of: Optional[Mapping[str, str]] = None) -> AgreementReport:
    """
    Cross-judge agreement report

    Both judges must score exactly the same (question, method) keys;
    insight-level rows are averaged per key first. One Wilcoxon test runs per
    judge and baseline method, comparing the reference method's per-question
    scores against the baseline's. The Bonferroni family size defaults to the
    number of tests attempted.

    Args:
        scores_a: Judge A scores
        scores_b: Judge B scores
        reference: Method compared against every other method
        base_alpha: Family-wise significance level
        num_tests: Family size override for the Bonferroni correction
        domain_of: qa_id -> domain override (defaults to the rows' collection ids)

    Returns:
        AgreementReport

    Raises:
        ContractError: If the judges' keys do not align or a table is empty
    """
    table_a = score_table(scores_a)
    table_b = score_table(scores_b)
    keys_a = {(q, m) for q, row in table_a.items() for m in row}
    keys_b = {(q, m) for q, row in table_b.items() for m in row}
    if keys_a != keys_b:
        raise ContractError(
            f"Judge tables are not aligned: {len(keys_a - keys_b)} keys only in A, "
            f"{len(keys_b - keys_a)} only in B"
        )
    if not table_a:
        raise ContractError("agreement_stats needs at least one scored question")

    spearman = spearman_by_domain(table_a, table_b, _domains(list(scores_a) + list(scores_b), domain_of))

    label_a = _judge_label(scores_a, 'judge_a')
    label_b = _judge_label(scores_b, 'judge_b')
    if label_a == label_b:
        label_a, label_b = f"{label_a}#a", f"{label_b}#b"

    methods = sorted({m for _, m in keys_a}, key=method_sort_key)
    baselines = [m for m in methods if m != reference]
    if reference not in methods:
        logger.warning("Reference method %s has no scores; no Wilcoxon tests run", reference)
        baselines = []

    wilcoxon: List[WilcoxonResult] = []
    attempted = 0
    for label, table in ((label_a, table_a), (label_b, table_b)):
        for baseline in baselines:
            attempted += 1
            qa_ids = [q for q in sorted(table) if reference in table[q] and baseline in table[q]]
            comparison_id = f"{label}:{reference}_vs_{baseline}"
            try:
                wilcoxon.append(wilcoxon_signed_rank(
                    [table[q][reference] for q in qa_ids],
                    [table[q][baseline] for q in qa_ids],
                    comparison_id=comparison_id,
                ))
            except (DegenerateSampleError, ContractError) as e:
                logger.warning("Skipping Wilcoxon %s: %s", comparison_id, e)

    family = num_tests if num_tests is not None else attempted
    alpha = bonferroni(base_alpha, family) if family > 0 else base_alpha

    return AgreementReport(
        spearman_per_domain=spearman,
        pairwise_ordering_agreement=pairwise_ordering_agreement(table_a, table_b),
        top2_jaccard=top_k_jaccard(table_a, table_b, 2),
        top1_agreement=top1_agreement(table_a, table_b),
        wilcoxon=wilcoxon,
        bonferroni_alpha=alpha,
        base_alpha=base_alpha,
        num_questions=len(table_a),
        spearman_summary=summarize(list(spearman.values())),
    )


def score_summary(scores: Sequence[JudgeScore],
                  domain_of: Optional[Mapping[str, str]] = None) -> ScoreSummary:
    """
    Mean score per method across questions, overall and within each domain

    Repeated scores for one (question, method) are averaged first, so every
    question weighs the same whatever the protocol. std is the population
    standard deviation of the per-question means.

    Raises:
        ContractError: If there are no scores
    """
    if not scores:
        raise ContractError("score_summary needs at least one score")
    table = score_table(scores)
    domains = _domains(scores, domain_of)

    per_method: Dict[str, List[float]] = defaultdict(list)
    per_domain: Dict[str, Dict[str, List[float]]] = defaultdict(lambda: defaultdict(list))
    for qa_id in sorted(table):
        for method, value in table[qa_id].items():
            per_method[method].append(value)
            per_domain[domains.get(qa_id, DEFAULT_DOMAIN)][method].append(value)

    methods = {}
    for method in sorted(per_method, key=method_sort_key):
        values = np.asarray(per_method[method], dtype=np.float64)
        methods[method] = {
            'mean': math.fsum(per_method[method]) / len(values),
            'std': float(values.std()),
            'n': int(len(values)),
        }
    by_domain = {
        domain: {
            method: math.fsum(values) / len(values)
            for method, values in sorted(means.items(), key=lambda item: method_sort_key(item[0]))
        }
        for domain, means in per_domain.items()
    }

    protocols = {score.protocol for score in scores}
    return ScoreSummary(
        judge_id=_judge_label(scores, ''),
        protocol=protocols.pop() if len(protocols) == 1 else 'mixed',
        num_questions=len(table),
        methods=methods,
        by_domain=by_domain,
    )

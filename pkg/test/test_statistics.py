"""
Property-based tests for the Statistics Service
Tests Spearman correlation, the Wilcoxon signed-rank test, Bonferroni
correction and the cross-judge agreement report
"""

import math
from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st, settings

from models.evaluation import JudgeScore
from models.insights import MethodId
from utils.errors import ContractError, DegenerateSampleError
from services.statistics import (
    agreement_stats, bonferroni, pairwise_ordering_agreement, score_summary, score_table, spearman_rho,
    top1_agreement, top_k_jaccard, wilcoxon_signed_rank,
)


METHODS = [m.value for m in MethodId]


def average_ranks(values):
    """Average 1-based ranks, written out pairwise"""
    ranks = []
    for v in values:
        below = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        ranks.append(below + (equal + 1) / 2.0)
    return ranks


def pearson(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def enumerated_p_value(differences):
    """Two-sided exact p by enumerating every sign assignment of the ranks"""
    nonzero = [d for d in differences if d != 0]
    ranks = average_ranks([abs(d) for d in nonzero])
    observed = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    lower = upper = 0
    total = 0
    for signs in product((0, 1), repeat=len(ranks)):
        w = sum(r for r, s in zip(ranks, signs) if s)
        total += 1
        lower += w <= observed + 1e-9
        upper += w >= observed - 1e-9
    return min(1.0, 2.0 * min(lower, upper) / total)


def make_scores(table, judge_id, collection_id='sample'):
    return [
        JudgeScore(qa_id=qa_id, method_id=method, score=score, judge_id=judge_id, collection_id=collection_id)
        for qa_id, row in table.items()
        for method, score in row.items()
    ]


def random_table(rng, questions=20, offset=None):
    table = {}
    for q in range(questions):
        row = {method: float(rng.integers(0, 11)) / 2.0 for method in METHODS}
        if offset:
            row[MethodId.INSIGHTGEN.value] = min(5.0, row[MethodId.INSIGHTGEN.value] + offset)
        table[f"q{q:03d}"] = row
    return table


@pytest.mark.property
def test_spearman_matches_rank_pearson_oracle():
    """
    Spearman equals Pearson correlation of average ranks on 200 tied samples
    """
    rng = np.random.default_rng(17)
    checked = 0
    while checked < 200:
        n = int(rng.integers(2, 30))
        x = rng.integers(0, 6, size=n).astype(float).tolist()
        y = rng.integers(0, 6, size=n).astype(float).tolist()
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        expected = pearson(average_ranks(x), average_ranks(y))
        assert abs(spearman_rho(x, y) - expected) <= 1e-9
        checked += 1


@pytest.mark.unit
def test_spearman_examples_and_errors():
    assert spearman_rho([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman_rho([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(DegenerateSampleError):
        spearman_rho([1, 2, 3], [2, 2, 2])
    with pytest.raises(ContractError):
        spearman_rho([1, 2], [1, 2, 3])
    with pytest.raises(ContractError):
        spearman_rho([1], [1])


# Property 16: Exact Wilcoxon p equals full sign enumeration
@given(differences=st.lists(st.integers(min_value=-4, max_value=4), min_size=5, max_size=10)
       .filter(lambda ds: sum(1 for d in ds if d != 0) >= 5))
@settings(max_examples=100, deadline=None)
@pytest.mark.property
def test_exact_wilcoxon_matches_enumeration(differences):
    """
    Property 16: Exact Wilcoxon p equals full sign enumeration
    For n <= 10 with ties, the dynamic-programming p value equals the one
    found by enumerating all 2^n sign patterns
    """
    zeros = [0.0] * len(differences)
    result = wilcoxon_signed_rank([float(d) for d in differences], zeros, method='exact')

    assert result.method == 'exact'
    assert result.p_value == pytest.approx(enumerated_p_value(differences), abs=1e-9)
    assert result.statistic == min(result.w_plus, result.w_minus)
    assert result.w_plus + result.w_minus == pytest.approx(result.n * (result.n + 1) / 2)


@pytest.mark.unit
def test_exact_and_approximate_agree_for_larger_samples():
    rng = np.random.default_rng(8)
    for n in range(20, 26):
        for _ in range(5):
            a = rng.normal(size=n)
            b = rng.normal(0.3, 1.0, size=n)
            exact = wilcoxon_signed_rank(a, b, method='exact')
            approx = wilcoxon_signed_rank(a, b, method='approx')
            assert abs(exact.p_value - approx.p_value) <= 0.01
            assert exact.z == approx.z


@pytest.mark.unit
def test_wilcoxon_auto_switches_at_25():
    rng = np.random.default_rng(4)
    assert wilcoxon_signed_rank(rng.normal(size=25), rng.normal(size=25)).method == 'exact'
    assert wilcoxon_signed_rank(rng.normal(size=26), rng.normal(size=26)).method == 'approx'


@pytest.mark.unit
def test_wilcoxon_direction_and_effect():
    a = [5.0, 4.5, 4.0, 5.0, 4.5, 3.5, 4.0, 5.0]
    b = [3.0, 3.5, 2.0, 4.0, 2.5, 3.0, 1.0, 2.0]
    result = wilcoxon_signed_rank(a, b)
    assert result.w_minus == 0.0
    assert result.statistic == 0.0
    assert result.z > 0
    assert result.effect_r == pytest.approx(abs(result.z) / math.sqrt(result.n))
    assert result.p_value == pytest.approx(2.0 / 2 ** 8)

    reverse = wilcoxon_signed_rank(b, a)
    assert reverse.z == -result.z
    assert reverse.p_value == result.p_value


@pytest.mark.unit
def test_wilcoxon_errors():
    with pytest.raises(DegenerateSampleError):
        wilcoxon_signed_rank([1.0] * 6, [1.0] * 6)
    with pytest.raises(ContractError):
        wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0], [0.0, 0.0, 0.0, 0.0])
    with pytest.raises(ContractError):
        wilcoxon_signed_rank([1.0] * 5, [0.0] * 6)
    with pytest.raises(ContractError):
        wilcoxon_signed_rank([1.0] * 5, [0.0] * 5, method='bootstrap')


@pytest.mark.unit
def test_bonferroni():
    assert bonferroni(0.05, 8) == 0.00625
    assert bonferroni(0.05, 1) == 0.05
    with pytest.raises(ContractError):
        bonferroni(0.05, 0)


@pytest.mark.unit
def test_ordering_and_topk_examples():
    table_a = {'q1': {'INSIGHTGEN': 5.0, 'DIRECT': 3.0, 'SIM': 1.0}}
    table_b = {'q1': {'INSIGHTGEN': 4.0, 'DIRECT': 4.0, 'SIM': 1.0}}

    # Pairs: (INSIGHTGEN, DIRECT) disagrees since a tie only agrees with a tie
    assert pairwise_ordering_agreement(table_a, table_b) == pytest.approx(2 / 3)
    assert top_k_jaccard(table_a, table_b, 2) == 1.0
    assert top1_agreement(table_a, table_b) == 1.0

    table_c = {'q1': {'INSIGHTGEN': 1.0, 'DIRECT': 2.0, 'SIM': 3.0}}
    assert pairwise_ordering_agreement(table_a, table_c) == 0.0
    assert top_k_jaccard(table_a, table_c, 2) == pytest.approx(1 / 3)
    assert top1_agreement(table_a, table_c) == 0.0


@pytest.mark.unit
def test_top_k_ties_break_by_method_order():
    tied = {'q1': {'SIM': 3.0, 'DIRECT': 3.0, 'INSIGHTGEN': 3.0}}
    other = {'q1': {'SIM': 1.0, 'DIRECT': 4.0, 'INSIGHTGEN': 5.0}}
    assert top1_agreement(tied, other) == 1.0
    assert top_k_jaccard(tied, other, 2) == 1.0


@pytest.mark.unit
def test_score_table_averages_repeats():
    scores = [
        JudgeScore(qa_id='q1', method_id='SIM', score=2.0, repeat=0),
        JudgeScore(qa_id='q1', method_id='SIM', score=3.0, repeat=1),
        JudgeScore(qa_id='q1', method_id='DIRECT', score=4.0),
    ]
    assert score_table(scores) == {'q1': {'SIM': 2.5, 'DIRECT': 4.0}}


@pytest.mark.unit
def test_agreement_report_for_identical_judges():
    rng = np.random.default_rng(21)
    table = random_table(rng, offset=1.5)
    report = agreement_stats(make_scores(table, 'judge-a'), make_scores(table, 'judge-b'))

    assert report.num_questions == 20
    assert report.pairwise_ordering_agreement == 1.0
    assert report.top2_jaccard == 1.0
    assert report.top1_agreement == 1.0
    assert report.spearman_per_domain == {'sample': pytest.approx(1.0)}
    assert len(report.wilcoxon) == 8
    assert report.bonferroni_alpha == 0.00625
    assert {r.comparison_id.split(':')[0] for r in report.wilcoxon} == {'judge-a', 'judge-b'}

    document = report.to_dict()
    assert document['bonferroni_alpha'] == 0.00625
    assert set(document['significant']) <= {r.comparison_id for r in report.wilcoxon}


@pytest.mark.unit
def test_agreement_requires_aligned_keys():
    rng = np.random.default_rng(2)
    table = random_table(rng, questions=6)
    scores_b = make_scores(table, 'b')[:-1]
    with pytest.raises(ContractError):
        agreement_stats(make_scores(table, 'a'), scores_b)
    with pytest.raises(ContractError):
        agreement_stats([], [])


@pytest.mark.unit
def test_agreement_skips_degenerate_domains():
    flat = {f"q{i}": {method: 3.0 for method in METHODS} for i in range(6)}
    report = agreement_stats(make_scores(flat, 'a'), make_scores(flat, 'b'), num_tests=8)

    assert report.spearman_per_domain == {}
    assert report.wilcoxon == []
    assert report.bonferroni_alpha == 0.00625
    assert report.pairwise_ordering_agreement == 1.0


@pytest.mark.unit
def test_agreement_per_domain():
    rng = np.random.default_rng(5)
    table = random_table(rng, questions=10, offset=1.0)
    domains = {qa_id: ('news' if i % 2 else 'science') for i, qa_id in enumerate(sorted(table))}
    report = agreement_stats(make_scores(table, 'a'), make_scores(table, 'b'), domain_of=domains)
    assert set(report.spearman_per_domain) == {'news', 'science'}
    assert set(report.spearman_summary) == {'median', 'p75', 'p90', 'mean'}


# Property 21: Spearman correlation ignores strictly increasing transforms
@given(pairs=st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=2, max_size=30))
@settings(max_examples=200, deadline=None)
@pytest.mark.property
def test_spearman_invariant_under_increasing_transforms(pairs):
    """
    Property 21: Spearman correlation ignores strictly increasing transforms
    Cubing, shifting and scaling either sample leaves rho unchanged
    """
    x = [float(a) for a, _ in pairs]
    y = [float(b) for _, b in pairs]
    assume(len(set(x)) > 1 and len(set(y)) > 1)

    rho = spearman_rho(x, y)
    assert spearman_rho([v ** 3 + 7.0 * v for v in x], y) == pytest.approx(rho, abs=1e-12)
    assert spearman_rho(x, [2.5 * v - 11.0 for v in y]) == pytest.approx(rho, abs=1e-12)
    assert spearman_rho([math.exp(v / 10.0) for v in x], [v ** 3 for v in y]) == pytest.approx(rho, abs=1e-12)


def brute_force_pair_agreement(table_a, table_b):
    agree = total = 0
    for qa_id in table_a:
        for i in range(len(METHODS)):
            for j in range(i + 1, len(METHODS)):
                m1, m2 = METHODS[i], METHODS[j]
                if m1 not in table_a[qa_id] or m2 not in table_a[qa_id]:
                    continue
                if table_a[qa_id][m1] > table_a[qa_id][m2]:
                    order_a = 'first'
                elif table_a[qa_id][m1] < table_a[qa_id][m2]:
                    order_a = 'second'
                else:
                    order_a = 'tie'
                if table_b[qa_id][m1] > table_b[qa_id][m2]:
                    order_b = 'first'
                elif table_b[qa_id][m1] < table_b[qa_id][m2]:
                    order_b = 'second'
                else:
                    order_b = 'tie'
                total += 1
                if order_a == order_b:
                    agree += 1
    return agree / total


def brute_force_top_k(row, k):
    """The one k-subset that beats every outsider on score, then on method order"""
    def beats(s, t):
        return row[s] > row[t] or (row[s] == row[t] and METHODS.index(s) < METHODS.index(t))

    winners = [
        set(subset) for subset in combinations(row, k)
        if all(beats(s, t) for s in subset for t in row if t not in subset)
    ]
    assert len(winners) == 1
    return winners[0]


# Property 22: Ordering agreement and top-k overlap match brute force
@pytest.mark.property
def test_ordering_and_topk_match_brute_force():
    """
    Property 22: Ordering agreement and top-k overlap match brute force
    Over 20 seeded random judge pairs of 50 questions on a coarse score grid
    (so ties are frequent), the pooled pairwise agreement and the mean top-k
    Jaccard equal a direct enumeration
    """
    rng = np.random.default_rng(4242)
    for _ in range(20):
        table_a = random_table(rng, questions=50)
        table_b = random_table(rng, questions=50)

        assert pairwise_ordering_agreement(table_a, table_b) == pytest.approx(
            brute_force_pair_agreement(table_a, table_b), abs=1e-12
        )
        for k in (1, 2, 3):
            jaccards = []
            for qa_id in table_a:
                top_a = brute_force_top_k(table_a[qa_id], k)
                top_b = brute_force_top_k(table_b[qa_id], k)
                jaccards.append(len(top_a & top_b) / len(top_a | top_b))
            assert top_k_jaccard(table_a, table_b, k) == pytest.approx(sum(jaccards) / len(jaccards), abs=1e-12)

        matches = sum(brute_force_top_k(table_a[q], 1) == brute_force_top_k(table_b[q], 1) for q in table_a)
        assert top1_agreement(table_a, table_b) == pytest.approx(matches / 50, abs=1e-12)


@pytest.mark.unit
def test_score_summary_means_by_hand():
    scores = [
        JudgeScore(qa_id='q1', method_id='INSIGHTGEN', score=4.0, judge_id='j', protocol='insight',
                   repeat=0, collection_id='news'),
        JudgeScore(qa_id='q1', method_id='INSIGHTGEN', score=5.0, judge_id='j', protocol='insight',
                   repeat=1, collection_id='news'),
        JudgeScore(qa_id='q1', method_id='SIM', score=2.0, judge_id='j', protocol='insight',
                   collection_id='news'),
        JudgeScore(qa_id='q2', method_id='INSIGHTGEN', score=3.0, judge_id='j', protocol='insight',
                   collection_id='science'),
        JudgeScore(qa_id='q2', method_id='SIM', score=3.0, judge_id='j', protocol='insight',
                   collection_id='science'),
        JudgeScore(qa_id='q3', method_id='SIM', score=1.0, judge_id='j', protocol='insight',
                   collection_id='science'),
    ]

    summary = score_summary(scores)

    assert summary.judge_id == 'j'
    assert summary.protocol == 'insight'
    assert summary.num_questions == 3
    # q1 INSIGHTGEN repeats average to 4.5 before the per-method mean
    assert summary.methods['INSIGHTGEN'] == {'mean': 3.75, 'std': 0.75, 'n': 2}
    assert summary.methods['SIM']['mean'] == pytest.approx(2.0)
    assert summary.methods['SIM']['n'] == 3
    assert list(summary.methods) == ['INSIGHTGEN', 'SIM']
    assert summary.by_domain == {
        'news': {'INSIGHTGEN': 4.5, 'SIM': 2.0},
        'science': {'INSIGHTGEN': 3.0, 'SIM': 2.0},
    }
    assert summary.to_dict()['by_domain']['science'] == {'INSIGHTGEN': 3.0, 'SIM': 2.0}

    with pytest.raises(ContractError):
        score_summary([])

"""
Property-based tests for the Judge Evaluation Service
Tests presentation-order shuffling, reply parsing, label-to-method mapping
and the insight-level averaging
"""

import json
import re
from collections import Counter
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, strategies as st, settings
from scipy.stats import chisquare

from models.evaluation import PROTOCOL_INSIGHT, PROTOCOL_SET
from models.insights import SCORE_KEYS, Insight, InsightSet, InsightType, MethodId
from models.store import QARecord
from utils.errors import ContractError, JudgeParseError
from services.judge_eval import (
    JudgeEvaluator, judge_insight_level, judge_set_level, method_label, parse_judge_reply,
    shuffle_methods,
)
from services.text_models import MockTextModel


QA = QARecord(qa_id='q001', collection_id='sample', question='What do clusters show?',
              answer='Clusters group passages that share a theme.')

LABEL_PATTERN = re.compile(r'^### (Method \d+)$', re.MULTILINE)


class ConstantJudge:
    """Judge that gives every method block the same score"""

    model_id = 'constant'

    def __init__(self, score):
        self.score = score
        self.prompts = []

    def complete(self, prompt, temperature=0.0, max_tokens=4000):
        self.prompts.append(prompt)
        labels = LABEL_PATTERN.findall(prompt)
        return json.dumps({'scores': [{'method': label, 'score': self.score} for label in labels]})


class CountingJudge(ConstantJudge):
    """Judge whose score for a block is the number of insights shown in it"""

    def complete(self, prompt, temperature=0.0, max_tokens=4000):
        self.prompts.append(prompt)
        body = prompt.split('END OF METHODS', 1)[0]
        parts = LABEL_PATTERN.split(body)[1:]
        scores = [
            {'method': label, 'score': float(text.count('- ['))}
            for label, text in zip(parts[0::2], parts[1::2])
        ]
        return json.dumps({'scores': scores})


class BrokenJudge:
    model_id = 'broken'

    def __init__(self):
        self.calls = 0

    def complete(self, prompt, temperature=0.0, max_tokens=4000):
        self.calls += 1
        return 'I would rather not say.'


def make_set(method, count, qa_id='q001'):
    insights = [
        Insight(
            insight_type=InsightType.NEW_IDEA,
            hook=f"{method.value} hook {i}",
            body=f"{method.value} body {i}.",
            takeaway=f"{method.value} takeaway {i}.",
            justification='From context.',
            self_scores={key: 3.0 for key in SCORE_KEYS},
        )
        for i in range(count)
    ]
    return InsightSet(qa_id=qa_id, method_id=method, insights=insights)


def all_sets(counts=(1, 2, 3, 4, 5)):
    return {method.value: make_set(method, count) for method, count in zip(MethodId, counts)}


@pytest.mark.property
def test_shuffle_is_uniform_over_permutations():
    """
    Presentation order: every one of the 5! orders is equally likely
    Chi-square goodness of fit over 10000 seeded draws does not reject
    uniformity at the 0.01 level
    """
    methods = [m.value for m in MethodId]
    rng = np.random.default_rng(12345)
    counts = Counter(tuple(shuffle_methods(methods, rng)) for _ in range(10000))

    observed = [counts.get(order, 0) for order in permutations(methods)]
    assert sum(observed) == 10000
    assert chisquare(observed).pvalue > 0.01


@pytest.mark.unit
def test_shuffle_is_seeded():
    methods = ['a', 'b', 'c', 'd']
    first = shuffle_methods(methods, np.random.default_rng(3))
    second = shuffle_methods(methods, np.random.default_rng(3))
    assert first == second
    assert sorted(first) == methods


@pytest.mark.unit
def test_parse_judge_reply():
    labels = ['Method 1', 'Method 2']
    reply = '{"scores": [{"method": "Method 2", "score": 4}, {"method": "Method 1", "score": 1.5, "rationale": "thin"}]}'
    parsed = parse_judge_reply(reply, labels)
    assert parsed['Method 1'] == {'score': 1.5, 'rationale': 'thin'}
    assert parsed['Method 2'] == {'score': 4.0, 'rationale': ''}

    bare_list = '[{"method": "Method 1", "score": 0}, {"method": "Method 2", "score": 5}]'
    assert parse_judge_reply(bare_list, labels)['Method 2']['score'] == 5.0


@pytest.mark.unit
@pytest.mark.parametrize('scores', [
    [{'method': 'Method 1', 'score': 3}],
    [{'method': 'Method 1', 'score': 3}, {'method': 'Method 3', 'score': 3}],
    [{'method': 'Method 1', 'score': 3}, {'method': 'Method 1', 'score': 2}],
    [{'method': 'Method 1', 'score': 3}, {'method': 'Method 2', 'score': 5.5}],
    [{'method': 'Method 1', 'score': True}, {'method': 'Method 2', 'score': 2}],
    [{'method': 'Method 1', 'score': '3'}, {'method': 'Method 2', 'score': 2}],
])
def test_parse_judge_reply_rejects_bad_entries(scores):
    with pytest.raises(ValueError):
        parse_judge_reply(json.dumps({'scores': scores}), ['Method 1', 'Method 2'])


@pytest.mark.unit
def test_set_level_maps_labels_back_to_methods():
    sets = all_sets()
    for seed in range(10):
        results = JudgeEvaluator(CountingJudge(0)).judge_set_level(QA, sets, np.random.default_rng(seed), seed=seed)
        assert {r.method_id: r.score for r in results} == {
            method: float(len(insight_set.insights)) for method, insight_set in sets.items()
        }
        assert [r.method_id for r in results] == sorted(sets)
        assert all(r.protocol == PROTOCOL_SET and r.seed == seed for r in results)


@pytest.mark.unit
def test_set_level_prompt_hides_method_ids():
    judge = ConstantJudge(2.0)
    JudgeEvaluator(judge).judge_set_level(QA, all_sets(), np.random.default_rng(0))

    prompt = judge.prompts[0]
    assert LABEL_PATTERN.findall(prompt) == [method_label(i) for i in range(5)]
    for method in MethodId:
        assert f"### {method.value}" not in prompt
    assert 'Diversity' in prompt


@pytest.mark.unit
def test_set_level_requires_two_methods():
    with pytest.raises(ContractError):
        judge_set_level(QA, {'INSIGHTGEN': make_set(MethodId.INSIGHTGEN, 2)}, ConstantJudge(1.0),
                        np.random.default_rng(0))


@pytest.mark.unit
def test_set_level_gives_up_on_malformed_replies():
    judge = BrokenJudge()
    with pytest.raises(JudgeParseError):
        JudgeEvaluator(judge, parse_retries=2).judge_set_level(QA, all_sets(), np.random.default_rng(0))
    assert judge.calls == 3


# Property 15: A constant judge yields exactly the constant as every mean
@given(score=st.sampled_from([0.0, 0.5, 1.25, 3.5, 4.75, 5.0]),
       repeats=st.integers(min_value=1, max_value=12),
       seed=st.integers(min_value=0, max_value=1000))
@settings(max_examples=30, deadline=None)
@pytest.mark.property
def test_constant_judge_means(score, repeats, seed):
    """
    Property 15: A constant judge yields exactly the constant as every mean
    """
    sets = all_sets()
    result = JudgeEvaluator(ConstantJudge(score)).judge_insight_level(
        QA, sets, np.random.default_rng(seed), repeats=repeats,
    )

    assert result.means == {method: score for method in sets}
    assert len(result.per_repeat) == repeats
    assert len(result.scores) == repeats * len(sets)
    assert all(s.protocol == PROTOCOL_INSIGHT for s in result.scores)
    for picks in result.sampled_indices:
        assert all(0 <= picks[m] < len(sets[m].insights) for m in sets)


@pytest.mark.unit
def test_insight_level_shows_one_insight_per_method():
    judge = ConstantJudge(3.0)
    JudgeEvaluator(judge).judge_insight_level(QA, all_sets(), np.random.default_rng(1), repeats=3)

    assert len(judge.prompts) == 3
    for prompt in judge.prompts:
        body = prompt.split('END OF METHODS', 1)[0]
        assert body.count('- [') == 5
        assert 'Diversity' not in prompt


@pytest.mark.unit
def test_insight_level_contract_errors():
    sets = all_sets()
    with pytest.raises(ContractError):
        judge_insight_level(QA, sets, ConstantJudge(1.0), np.random.default_rng(0), repeats=0)
    with pytest.raises(ContractError):
        judge_insight_level(QA, {'SIM': sets['SIM']}, ConstantJudge(1.0), np.random.default_rng(0))
    sets['SIM'] = make_set(MethodId.SIM, 0)
    with pytest.raises(ContractError):
        judge_insight_level(QA, sets, ConstantJudge(1.0), np.random.default_rng(0))


@pytest.mark.unit
def test_mock_judge_ignores_presentation_order():
    sets = all_sets()
    evaluator = JudgeEvaluator(MockTextModel(seed=42, model_id='mock-judge-a'))
    baseline = {r.method_id: r.score for r in evaluator.judge_set_level(QA, sets, np.random.default_rng(0))}
    for seed in range(1, 8):
        scores = {r.method_id: r.score for r in evaluator.judge_set_level(QA, sets, np.random.default_rng(seed))}
        assert scores == baseline
    assert all(0.0 <= score <= 5.0 for score in baseline.values())


@pytest.mark.unit
def test_insight_level_sampling_replays_seeded_draws():
    """
    Each repeat draws one insight index per method (methods sorted) and then
    a presentation permutation; replaying those draws on a fresh generator
    with the same seed predicts every prompt
    """
    sets = all_sets()
    judge = ConstantJudge(2.0)
    result = JudgeEvaluator(judge).judge_insight_level(QA, sets, np.random.default_rng(77), repeats=6)

    reference = np.random.default_rng(77)
    methods = sorted(sets)
    assert len(judge.prompts) == 6
    for repeat, prompt in enumerate(judge.prompts):
        picks = {method: int(reference.integers(len(sets[method].insights))) for method in methods}
        order = [methods[i] for i in reference.permutation(len(methods))]
        assert result.sampled_indices[repeat] == picks

        body = prompt.split('END OF METHODS', 1)[0]
        parts = LABEL_PATTERN.split(body)[1:]
        shown = dict(zip(parts[0::2], parts[1::2]))
        assert len(shown) == len(methods)
        for position, method in enumerate(order):
            block = shown[f"Method {position + 1}"]
            assert f"] {method} hook {picks[method]}\n" in block

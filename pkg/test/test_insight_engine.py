"""
Property-based tests for the Insight Engine Service and prompt handling
Tests intent inference, insight parsing and validation, repair retries,
truncation, the repetition guard and the mock text model
"""

import json

import httpx
import pytest
from hypothesis import given, strategies as st, settings

from models.insights import SCORE_KEYS, InsightType, IntentProfile, MethodId
from utils.errors import (
    ContractError, EmptyGenerationError, GenerationParseError, InsightSchemaError, ProviderError,
)
from services.insight_engine import (
    InsightEngine, copies_answer, generate_insights, infer_intent, parse_insights, serialize_insights,
)
from services.prompting import context_block, extract_json, render, task_names
from services.text_models import HttpTextModel, MockTextModel


INTENT = IntentProfile(persona='A curious engineer', goals=['Understand clustering'], intents=['learn'])

QUESTION = 'How does clustering help retrieval?'
ANSWER = 'Clustering groups similar passages so retrieval can look beyond the nearest matches.'


class ScriptedModel:
    """Text model that replays fixed replies and records every prompt"""

    model_id = 'scripted'

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, prompt, temperature=0.7, max_tokens=4000):
        self.prompts.append(prompt)
        return self.replies.pop(0)


def make_insight(index=0, body=None, **overrides):
    data = {
        'insight_type': list(InsightType)[index % len(InsightType)].value,
        'hook': f"Hook {index}",
        'body': body if body is not None else f"Body of insight {index}.",
        'takeaway': f"Takeaway {index}.",
        'justification': 'Grounded in the context.',
        'self_scores': {key: 3.0 for key in SCORE_KEYS},
    }
    data.update(overrides)
    return data


# Strategies for generating test data

insight_dicts = st.builds(
    lambda type_, hook, body, takeaway, justification, scores: {
        'insight_type': type_.value,
        'hook': hook,
        'body': body,
        'takeaway': takeaway,
        'justification': justification,
        'self_scores': dict(zip(SCORE_KEYS, scores)),
    },
    st.sampled_from(list(InsightType)),
    st.text(min_size=1, max_size=30).filter(str.strip),
    st.text(min_size=1, max_size=120).filter(str.strip),
    st.text(max_size=60),
    st.text(max_size=60),
    st.lists(st.floats(min_value=0, max_value=5, allow_nan=False), min_size=4, max_size=4),
)


# Property 12: Valid insight replies parse to equal values
@given(items=st.lists(insight_dicts, min_size=1, max_size=8))
@settings(max_examples=100, deadline=None)
@pytest.mark.property
def test_parse_insights_accepts_valid_sets(items):
    """
    Property 12: Valid insight replies parse to equal values
    For any list of valid insight objects, parsing yields insights whose
    serialized form equals the input and serialization parses back equal
    """
    insights = parse_insights(json.dumps(items))
    assert [insight.to_dict() for insight in insights] == items
    assert parse_insights(serialize_insights(insights)) == insights


@pytest.mark.unit
def test_parse_insights_reports_field_paths():
    bad_score = [make_insight(0), make_insight(1, self_scores={**{k: 3 for k in SCORE_KEYS}, 'novelty': 5.5})]
    with pytest.raises(InsightSchemaError) as excinfo:
        parse_insights(json.dumps(bad_score))
    assert excinfo.value.field_path == '[1].self_scores.novelty'

    with pytest.raises(InsightSchemaError) as excinfo:
        parse_insights(json.dumps([make_insight(0, insight_type='OPINION')]))
    assert excinfo.value.field_path == '[0].insight_type'

    with pytest.raises(InsightSchemaError) as excinfo:
        parse_insights(json.dumps([make_insight(0, hook='  ')]))
    assert excinfo.value.field_path == '[0].hook'

    with pytest.raises(InsightSchemaError):
        parse_insights(json.dumps([make_insight(0, self_scores={k: True for k in SCORE_KEYS})]))


@pytest.mark.unit
def test_parse_insights_accepts_fences_and_wrappers():
    items = [make_insight(0), make_insight(1)]
    fenced = f"Here you go:\n```json\n{json.dumps(items)}\n```\n"
    assert len(parse_insights(fenced)) == 2
    assert len(parse_insights(json.dumps({'insights': items}))) == 2
    with pytest.raises(ValueError):
        parse_insights('no json here')


@pytest.mark.unit
def test_extract_json_prefers_first_bracket():
    assert extract_json('Result: {"scores": [1, 2]} done') == {'scores': [1, 2]}
    assert extract_json('List: [{"a": 1}] end') == [{'a': 1}]


@pytest.mark.unit
def test_infer_intent_from_fixed_reply():
    reply = json.dumps({'persona': 'A student', 'goals': ['Pass the exam'], 'intents': ['revise']})
    profile = infer_intent(QUESTION, ANSWER, ScriptedModel([reply]))
    assert profile == IntentProfile(persona='A student', goals=['Pass the exam'], intents=['revise'])


@pytest.mark.unit
def test_infer_intent_repairs_twice_then_succeeds():
    valid = json.dumps({'persona': 'A student', 'goals': ['Pass']})
    model = ScriptedModel(['not json', '{"persona": ""}', valid])

    profile = infer_intent(QUESTION, ANSWER, model)

    assert profile.persona == 'A student'
    assert len(model.prompts) == 3
    assert task_names(model.prompts[1])[0] == 'repair'
    assert 'not json' in model.prompts[1]


@pytest.mark.unit
def test_infer_intent_gives_up_after_retries():
    model = ScriptedModel(['bad', 'bad', 'bad'])
    with pytest.raises(GenerationParseError):
        infer_intent(QUESTION, ANSWER, model)
    assert len(model.prompts) == 3


@pytest.mark.unit
def test_infer_intent_requires_inputs():
    with pytest.raises(ContractError):
        infer_intent('', ANSWER, ScriptedModel([]))


@pytest.mark.unit
def test_generate_three_insights():
    model = ScriptedModel([json.dumps([make_insight(i) for i in range(3)])])
    insight_set = generate_insights(QUESTION, ANSWER, 'Some context.', INTENT, model)
    assert len(insight_set.insights) == 3
    assert insight_set.intent == INTENT
    assert insight_set.method_id == MethodId.INSIGHTGEN
    assert insight_set.template_version == 'v1'


@pytest.mark.unit
def test_generate_truncates_to_max_n():
    model = ScriptedModel([json.dumps([make_insight(i) for i in range(7)])])
    insight_set = generate_insights(QUESTION, ANSWER, 'Some context.', INTENT, model, max_n=5)
    assert [i.hook for i in insight_set.insights] == [f"Hook {i}" for i in range(5)]


@pytest.mark.unit
def test_generate_rejects_insight_copying_the_answer():
    long_answer = ' '.join(f"word{i}" for i in range(80))
    copied = 'As stated: ' + long_answer[:300]
    items = [make_insight(0), make_insight(1, body=copied), make_insight(2)]
    model = ScriptedModel([json.dumps(items)])

    insight_set = generate_insights(QUESTION, long_answer, 'ctx', INTENT, model)

    assert [i.hook for i in insight_set.insights] == ['Hook 0', 'Hook 2']


@pytest.mark.unit
def test_generate_fails_when_nothing_survives():
    long_answer = 'x' * 250
    model = ScriptedModel([json.dumps([make_insight(0, body=long_answer)])])
    with pytest.raises(EmptyGenerationError):
        generate_insights(QUESTION, long_answer, 'ctx', INTENT, model)


@pytest.mark.unit
def test_copies_answer_window():
    answer = 'a' * 199
    assert not copies_answer(answer, answer)
    answer = ''.join(chr(ord('a') + i % 26) for i in range(260))
    assert copies_answer('prefix ' + answer[30:230] + ' suffix', answer)
    assert not copies_answer('prefix ' + answer[30:229] + ' suffix', answer)


@pytest.mark.unit
def test_cot_prompts_differ_only_in_context_block():
    engine = InsightEngine(ScriptedModel([]))
    first = engine.cot_prompt(QUESTION, ANSWER, 'context one', INTENT)
    second = engine.cot_prompt(QUESTION, ANSWER, 'a different context\nover two lines', INTENT)

    assert context_block(first) == 'context one'
    assert context_block(second) == 'a different context\nover two lines'
    assert first.replace('context one', '') == second.replace('a different context\nover two lines', '')


@pytest.mark.unit
def test_render_rejects_unknown_template():
    with pytest.raises(ValueError):
        render('summary')


# Property 13: Mock generation is deterministic and schema-valid
@given(context=st.lists(st.sampled_from([
    'Clusters reveal themes.', 'Hubs connect topics!', 'Graphs bound the search.',
    'Budgets limit context?', 'Sentences end here.',
]), min_size=0, max_size=12).map(' '.join), max_n=st.integers(min_value=1, max_value=6))
@settings(max_examples=50, deadline=None)
@pytest.mark.property
def test_mock_generation_deterministic_and_valid(context, max_n):
    """
    Property 13: Mock generation is deterministic and schema-valid
    """
    engine = InsightEngine(MockTextModel(seed=7))
    intent = engine.infer_intent(QUESTION, ANSWER)
    first = engine.generate_insights(QUESTION, ANSWER, context, intent, max_n)
    second = InsightEngine(MockTextModel(seed=7)).generate_insights(QUESTION, ANSWER, context, intent, max_n)

    assert first.to_dict() == second.to_dict()
    assert 1 <= len(first.insights) <= max_n
    for insight in first.insights:
        assert all(0.0 <= insight.self_scores[key] <= 5.0 for key in SCORE_KEYS)


@pytest.mark.unit
def test_http_text_model():
    seen = []

    def handler(request):
        body = json.loads(request.content)
        seen.append(body)
        if len(seen) == 1:
            return httpx.Response(500)
        return httpx.Response(200, json={'choices': [{'message': {'content': 'hello'}}]})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    model = HttpTextModel('http://llm.test/v1', '', 'chat-model', backoff_base=0.0, client=client)

    assert model.complete('prompt', temperature=0.0, max_tokens=10) == 'hello'
    assert seen[-1]['messages'] == [{'role': 'user', 'content': 'prompt'}]
    assert seen[-1]['temperature'] == 0.0


@pytest.mark.unit
def test_http_text_model_gives_up():
    client = httpx.Client(transport=httpx.MockTransport(lambda request: httpx.Response(503)))
    model = HttpTextModel('http://llm.test/v1', '', 'chat-model', max_retries=1, backoff_base=0.0, client=client)
    with pytest.raises(ProviderError):
        model.complete('prompt')

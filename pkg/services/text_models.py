"""
Text Model Service
Chat-completion providers used for generation and judging
"""

import json
import logging
import re
from typing import Dict, List, Optional, Protocol, Tuple

import httpx
import numpy as np

from models.insights import SCORE_KEYS, InsightType
from services.corpus import split_sentences
from services.embeddings import stable_seed
from utils.errors import ContractError, ProtocolError, ProviderError, RetryableProviderError
from services.prompting import context_block, task_names
from utils.retry import call_with_retries


logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 4000

_MAX_INSIGHTS_PATTERN = re.compile(r'Return at most (\d+) insights')
_METHOD_HEADER = re.compile(r'^### (Method \d+)$', re.MULTILINE)
_METHODS_END = 'END OF METHODS'


class TextModel(Protocol):
    model_id: str

    def complete(self, prompt: str, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> str:
        ...


class HttpTextModel:
    """
    OpenAI-compatible chat completions endpoint

    Sends the prompt as one user message to <endpoint>/chat/completions and
    returns choices[0].message.content. Safe to share between threads.
    """

    def __init__(self, endpoint: str, api_key: str, model_id: str,
                 timeout: float = 120.0, max_retries: int = 3, backoff_base: float = 0.5,
                 client: Optional[httpx.Client] = None):
        if not endpoint:
            raise ContractError("Text model endpoint is not configured (LLM_ENDPOINT)")
        if not model_id:
            raise ContractError("Text model is not configured (LLM_MODEL)")
        self.endpoint = endpoint.rstrip('/')
        self.model_id = model_id
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        headers = {'Content-Type': 'application/json'}
        if api_key:
            headers['Authorization'] = f"Bearer {api_key}"
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def _post(self, body: Dict) -> Dict:
        try:
            response = self._client.post(f"{self.endpoint}/chat/completions", json=body)
        except httpx.TransportError as e:
            raise RetryableProviderError(f"Text model transport error: {e}") from e
        if response.status_code == 429 or response.status_code >= 500:
            raise RetryableProviderError(f"Text model endpoint returned HTTP {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(
                f"Text model endpoint returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()
        except ValueError as e:
            raise ProtocolError(f"Text model reply is not JSON: {e}") from e

    def complete(self, prompt: str, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> str:
        body = {
            'model': self.model_id,
            'messages': [{'role': 'user', 'content': prompt}],
            'temperature': temperature,
            'max_tokens': max_tokens,
        }
        payload = call_with_retries(
            lambda: self._post(body), self.max_retries, self.backoff_base, "Text model request"
        )
        try:
            content = payload['choices'][0]['message']['content']
        except (KeyError, IndexError, TypeError) as e:
            raise ProtocolError(f"Malformed chat completion reply: {e}") from e
        if not isinstance(content, str):
            raise ProtocolError("Chat completion content is not text")
        return content


def _words(text: str, limit: int) -> str:
    return ' '.join(text.split()[:limit])


def _method_blocks(prompt: str) -> List[Tuple[str, str]]:
    """(label, text) for every '### Method N' block of a judge prompt"""
    end = prompt.find(_METHODS_END)
    body = prompt if end < 0 else prompt[:end]
    headers = list(_METHOD_HEADER.finditer(body))
    blocks = []
    for i, header in enumerate(headers):
        stop = headers[i + 1].start() if i + 1 < len(headers) else len(body)
        blocks.append((header.group(1), body[header.end():stop].strip()))
    return blocks


class MockTextModel:
    """
    Deterministic offline text model

    Recognizes the task line of the rendered templates and answers with a
    well-formed reply built from the prompt itself. Every reply is a pure
    function of (seed, model_id, prompt). Judge scores depend on the judged
    content rather than its position, so presentation order never changes
    the score a method receives; two mock judges with different model ids
    share a content-driven base score and differ by a bounded offset.
    """

    def __init__(self, seed: int = 42, model_id: str = 'mock-llm'):
        self.seed = seed
        self.model_id = model_id

    def _rng(self, *parts: str) -> np.random.Generator:
        return np.random.default_rng(stable_seed(str(self.seed), self.model_id, *parts))

    def complete(self, prompt: str, temperature: float = DEFAULT_TEMPERATURE,
                 max_tokens: int = DEFAULT_MAX_TOKENS) -> str:
        tasks = [task for task in task_names(prompt) if task != 'repair']
        if not tasks:
            raise ProtocolError("Mock text model received a prompt without a task line")
        task = tasks[0]
        if task == 'intent':
            return self._intent(prompt)
        if task in ('insights_cot', 'insights_direct'):
            return self._insights(prompt)
        if task in ('judge_set', 'judge_insight'):
            return self._judge(prompt, task)
        raise ProtocolError(f"Mock text model cannot answer task '{task}'")

    def _intent(self, prompt: str) -> str:
        question = prompt.split('Question:\n', 1)[-1].split('\n\n', 1)[0].strip()
        topic = _words(question, 8) or 'the topic'
        return json.dumps({
            'persona': f"A reader investigating: {topic}",
            'goals': [f"Understand {topic}", "Find connections the answer does not cover"],
            'intents': ["deepen understanding", "explore related work"],
        })

    def _insights(self, prompt: str) -> str:
        rng = self._rng('insights', prompt)
        match = _MAX_INSIGHTS_PATTERN.search(prompt)
        max_n = int(match.group(1)) if match else 5

        context = context_block(prompt)
        lines = [line for line in context.splitlines() if line and not line.startswith('[')]
        text = ' '.join(lines)
        sentences = [text[start:end] for start, end in split_sentences(text)]
        if not sentences:
            sentences = ["The collection offers no further context on this question."]

        count = max(1, min(max_n, len(sentences)))
        picks = sorted(rng.permutation(len(sentences))[:count].tolist())
        types = list(InsightType)
        insights = []
        for index in picks:
            sentence = sentences[index]
            insights.append({
                'insight_type': types[int(rng.integers(len(types)))].value,
                'hook': _words(sentence, 8) or 'A related point',
                'body': f"Related context adds: {sentence[:150]}",
                'takeaway': f"Consider how this bears on the answer: {_words(sentence, 12)}",
                'justification': "Drawn from the supplied context rather than the answer.",
                'self_scores': {
                    key: round(float(rng.uniform(2.5, 5.0)), 1) for key in SCORE_KEYS
                },
            })
        return json.dumps(insights)

    def _judge(self, prompt: str, task: str) -> str:
        scores = []
        for label, text in _method_blocks(prompt):
            base = np.random.default_rng(stable_seed(str(self.seed), task, text)).random()
            offset = self._rng(task, text).random()
            score = round(min(5.0, 1.0 + 3.0 * float(base) + float(offset)), 2)
            scores.append({
                'method': label,
                'score': score,
                'rationale': f"{_words(text, 6)} ...",
            })
        if not scores:
            raise ProtocolError("Mock judge found no method blocks in the prompt")
        return json.dumps({'scores': scores})

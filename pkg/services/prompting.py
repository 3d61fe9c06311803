"""
Prompt Templates
Renders the versioned Jinja2 prompt assets and extracts JSON from model replies
"""

import json
import logging
import re
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Type, TypeVar

import jinja2

from utils.errors import InsightSchemaError


logger = logging.getLogger(__name__)

T = TypeVar('T')


TEMPLATE_VERSION = 'v1'
TEMPLATE_DIR = Path(__file__).resolve().parent.parent / 'prompts'

CONTEXT_OPEN = '<<<CONTEXT'
CONTEXT_CLOSE = 'CONTEXT>>>'

TEMPLATES = ('intent', 'insights_cot', 'insights_direct', 'repair', 'judge_set', 'judge_insight')

TASK_PATTERN = re.compile(r'^Task: (\w+) \(template (v\d+)\)$', re.MULTILINE)
_FENCE_PATTERN = re.compile(r'```(?:json)?\s*\n(.*?)\n\s*```', re.DOTALL)


@lru_cache(maxsize=1)
def _environment() -> jinja2.Environment:
    return jinja2.Environment(
        loader=jinja2.FileSystemLoader(str(TEMPLATE_DIR)),
        autoescape=False,
        undefined=jinja2.StrictUndefined,
    )


def render(name: str, **variables: Any) -> str:
    """Render prompts/<name>.md.j2; the template version is always supplied"""
    if name not in TEMPLATES:
        raise ValueError(f"Unknown prompt template '{name}'")
    template = _environment().get_template(f"{name}.md.j2")
    return template.render(version=TEMPLATE_VERSION, **variables)


def task_names(prompt: str):
    """Task ids declared in a rendered prompt, outermost first"""
    return [match.group(1) for match in TASK_PATTERN.finditer(prompt)]


def context_block(prompt: str) -> str:
    """Text between the context delimiters, or '' when the prompt has none"""
    start = prompt.find(CONTEXT_OPEN)
    end = prompt.find(CONTEXT_CLOSE, start + 1)
    if start < 0 or end < 0:
        return ''
    return prompt[start + len(CONTEXT_OPEN):end].strip('\n')


def extract_json(text: str) -> Any:
    """
    Parse JSON from a model reply that may wrap it in markdown fences

    Raises:
        ValueError: If no JSON value can be parsed
    """
    fence_match = _FENCE_PATTERN.search(text)
    if fence_match:
        text = fence_match.group(1)
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass

    # Fall back to the outermost bracketed span, whichever bracket opens first
    pairs = sorted(
        (('[', ']'), ('{', '}')),
        key=lambda pair: (text.find(pair[0]) < 0, text.find(pair[0])),
    )
    for opener, closer in pairs:
        start, end = text.find(opener), text.rfind(closer)
        if 0 <= start < end:
            try:
                return json.loads(text[start:end + 1])
            except json.JSONDecodeError:
                continue
    raise ValueError("Reply does not contain valid JSON")


def complete_with_repair(model, prompt: str, parse: Callable[[str], T], retries: int,
                         temperature: float, max_tokens: int,
                         error_cls: Type[Exception]) -> T:
    """
    Complete a prompt and parse the reply, sending repair prompts on failure

    parse must raise ValueError or InsightSchemaError on a malformed
    reply. At most `retries` repair prompts follow the first attempt.

    Raises:
        error_cls: If the reply is still malformed after the retries
        ProviderError: Propagated from the model
    """
    reply = model.complete(prompt, temperature=temperature, max_tokens=max_tokens)
    for attempt in range(retries + 1):
        try:
            return parse(reply)
        except (ValueError, InsightSchemaError) as e:
            if attempt == retries:
                raise error_cls(f"Reply unparseable after {retries} repair attempts: {e}") from e
            logger.warning("Malformed model reply (%s); sending repair prompt %d/%d",
                           e, attempt + 1, retries)
            repair = render('repair', error=str(e), reply=reply, original_prompt=prompt)
            reply = model.complete(repair, temperature=temperature, max_tokens=max_tokens)
    raise error_cls("Reply unparseable")

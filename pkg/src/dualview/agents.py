"""Text-generation agents: HTTP chat endpoint client and a deterministic mock.

An agent is any callable ``(prompt: str) -> str``. The mock agent recognizes
the two prompt families used by the pipeline and produces rule-based output so
the whole pipeline can run offline with exactly reproducible results.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

import requests

from .errors import ParseError, TransportError

SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+(?=[A-Z])")
MOCK_CHUNK_WORD_LIMIT = 60
MOCK_TITLE_WORDS = 6
_PRONOUNS = {"It", "They", "This", "These"}


@dataclass
class AgentConfig:
    """Connection and decoding settings for the generation agents.

    Passages longer than ``skip_word_threshold`` words bypass chunking and are
    kept whole. Temperature defaults to 0 for deterministic decoding.
    """

    endpoint_url: str = ""
    model_name: str = ""
    api_key_env_var: str = ""
    temperature: float = 0.0
    max_retries: int = 2
    concurrency_limit: int = 4
    skip_word_threshold: int = 5000
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 1]")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")
        if self.skip_word_threshold <= 0:
            raise ValueError("skip_word_threshold must be > 0")


def extract_json_array(text: str) -> list:
    """Return the first balanced top-level JSON array found in ``text``.

    Tolerates markdown code fences and commentary around the array; raises
    ParseError when no parseable array exists.
    """
    for start, ch in enumerate(text):
        if ch != "[":
            continue
        depth = 0
        in_str = False
        escaped = False
        for pos in range(start, len(text)):
            cur = text[pos]
            if in_str:
                if escaped:
                    escaped = False
                elif cur == "\\":
                    escaped = True
                elif cur == '"':
                    in_str = False
            elif cur == '"':
                in_str = True
            elif cur == "[":
                depth += 1
            elif cur == "]":
                depth -= 1
                if depth == 0:
                    try:
                        parsed = json.loads(text[start : pos + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(parsed, list):
                        return parsed
                    break
    raise ParseError("no parseable JSON array in agent output")


class HttpChatAgent:
    """Minimal chat-completions client; one request per call, no retries here.

    Retrying is owned by the augmentation operations so that transport and
    parse failures share one retry budget.
    """

    def __init__(self, config: AgentConfig):
        if not config.endpoint_url:
            raise ValueError("endpoint_url is required for the HTTP agent")
        self.config = config

    def __call__(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env_var:
            key = os.environ.get(self.config.api_key_env_var)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            response = requests.post(
                self.config.endpoint_url,
                json=payload,
                headers=headers,
                timeout=self.config.timeout,
            )
            response.raise_for_status()
            body = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise TransportError(f"agent request failed: {exc}") from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError("malformed chat-completion response") from exc


def split_sentences(text: str) -> list[str]:
    """Split at ., ! or ? followed by whitespace and an uppercase letter."""
    stripped = text.strip()
    if not stripped:
        return []
    return SENTENCE_BOUNDARY.split(stripped)


def _leading_entity(text: str) -> str | None:
    """The passage's first maximal run of capitalized words, minus punctuation."""
    phrase: list[str] = []
    for token in text.split():
        core = token.strip("\"'()[]")
        bare = core.rstrip(".,;:!?")
        capitalized = bool(bare) and bare[0].isupper()
        if not phrase:
            if capitalized:
                phrase.append(bare)
                if bare != core:
                    break
            continue
        if capitalized:
            phrase.append(bare)
            if bare != core:
                break
        else:
            break
    return " ".join(phrase) if phrase else None


def _resolve_pronoun(sentence: str, entity: str | None) -> str:
    first, sep, rest = sentence.partition(" ")
    if entity and first in _PRONOUNS:
        return entity + sep + rest
    return sentence


def _mock_chunks(passage_text: str) -> list[dict[str, str]]:
    entity = _leading_entity(passage_text)
    sentences = [_resolve_pronoun(s, entity) for s in split_sentences(passage_text)]
    groups: list[str] = []
    current: list[str] = []
    word_total = 0
    for sentence in sentences:
        n_words = len(sentence.split())
        if current and word_total + n_words > MOCK_CHUNK_WORD_LIMIT:
            groups.append(" ".join(current))
            current = []
            word_total = 0
        current.append(sentence)
        word_total += n_words
    if current:
        groups.append(" ".join(current))
    return [
        {
            "chunk_id": chunk_letters(i),
            "chunk_title": " ".join(text.split()[:MOCK_TITLE_WORDS]),
            "chunk_text": text,
        }
        for i, text in enumerate(groups)
    ]


def _mock_pseudo_queries(title: str, chunk_text: str) -> list[dict[str, str]]:
    sentences = split_sentences(chunk_text)
    first_sentence = sentences[0] if sentences else chunk_text
    queries = [
        f"what is {title.lower()}",
        f"is it true that {first_sentence}",
        f"{title.lower()} explained",
    ]
    return [{"pseudo_query": q} for q in queries]


def chunk_letters(index: int) -> str:
    """Sequential chunk ids: a..z, aa, ab, ... (spreadsheet style)."""
    if index < 0:
        raise ValueError("index must be >= 0")
    letters = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        letters = chr(ord("a") + rem) + letters
    return letters


def mock_agent(prompt: str) -> str:
    """Deterministic stand-in for the LLM; output is fenced JSON."""
    task = prompt.rsplit("### Task Begin", 1)
    if len(task) != 2:
        raise ParseError("mock_agent: prompt has no task section")
    payload = task[1]
    if "expert linguistic analyst" in prompt:
        marker = payload.find("passage:")
        if marker < 0:
            raise ParseError("mock_agent: chunking prompt has no passage")
        passage_text = payload[marker + len("passage:"):].strip()
        items = _mock_chunks(passage_text)
    elif "expert query generation system" in prompt:
        t_idx = payload.find("title:")
        c_idx = payload.find("chunk:", t_idx + 1)
        if t_idx < 0 or c_idx < 0:
            raise ParseError("mock_agent: pseudo-query prompt has no title/chunk")
        title = payload[t_idx + len("title:"):c_idx].strip()
        chunk_text = payload[c_idx + len("chunk:"):].strip()
        items = _mock_pseudo_queries(title, chunk_text)
    else:
        raise ParseError("mock_agent: unrecognized prompt family")
    return "```json\n" + json.dumps(items, ensure_ascii=False) + "\n```"

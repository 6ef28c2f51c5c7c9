import json

import pytest
import requests

from dualview.agents import (
    AgentConfig,
    HttpChatAgent,
    chunk_letters,
    extract_json_array,
    mock_agent,
    split_sentences,
)
from dualview.errors import ParseError, TransportError
from dualview.prompts_io import (
    chunking_template,
    pseudo_query_template,
    render_chunking_prompt,
    render_pseudo_query_prompt,
)


# --- config -------------------------------------------------------------------

def test_agent_config_defaults():
    config = AgentConfig()
    assert config.temperature == 0.0
    assert config.skip_word_threshold == 5000


@pytest.mark.parametrize(
    "kwargs",
    [
        {"temperature": -0.1},
        {"temperature": 1.5},
        {"max_retries": -1},
        {"concurrency_limit": 0},
        {"skip_word_threshold": 0},
    ],
)
def test_agent_config_validation(kwargs):
    with pytest.raises(ValueError):
        AgentConfig(**kwargs)


# --- templates ----------------------------------------------------------------

def test_chunking_template_renders_passage():
    prompt = render_chunking_prompt("Some passage body.")
    assert prompt.endswith("passage:\nSome passage body.\n")
    assert "Your passage text goes here." not in prompt


def test_pseudo_query_template_renders_slots():
    prompt = render_pseudo_query_prompt("A Title", "Chunk body.")
    assert "title: A Title" in prompt
    assert "chunk: Chunk body." in prompt
    assert "{{" not in prompt


def test_templates_are_distinct_families():
    assert "expert linguistic analyst" in chunking_template()
    assert "expert query generation system" in pseudo_query_template()


# --- JSON extraction ------------------------------------------------------------

def test_extract_json_array_plain():
    assert extract_json_array('[{"a": 1}]') == [{"a": 1}]


def test_extract_json_array_fenced_with_commentary():
    text = 'Sure! Here you go:\n```json\n[{"chunk_id": "a"}]\n```\nHope that helps.'
    assert extract_json_array(text) == [{"chunk_id": "a"}]


def test_extract_json_array_skips_false_starts():
    text = '[not json] then the real one: ["x", "y"]'
    assert extract_json_array(text) == ["x", "y"]


def test_extract_json_array_nested():
    assert extract_json_array("[[1, 2], [3]]") == [[1, 2], [3]]


def test_extract_json_array_brackets_inside_strings():
    assert extract_json_array('["a ] tricky [ value"]') == ["a ] tricky [ value"]


def test_extract_json_array_none_found():
    with pytest.raises(ParseError):
        extract_json_array("no array here {\"a\": 1}")


# --- sentence splitting ---------------------------------------------------------

def test_split_sentences_boundary_rule():
    text = "First sentence. Second one! Third? fourth stays attached. Fifth."
    parts = split_sentences(text)
    assert parts == [
        "First sentence.",
        "Second one!",
        "Third? fourth stays attached.",
        "Fifth.",
    ]


def test_chunk_letters_sequence():
    assert [chunk_letters(i) for i in (0, 1, 25, 26, 27)] == ["a", "b", "z", "aa", "ab"]


# --- mock agent: chunking family -------------------------------------------------

def mock_chunks(passage_text):
    return extract_json_array(mock_agent(render_chunking_prompt(passage_text)))


def test_mock_two_short_sentences_one_chunk():
    items = mock_chunks("Alpha beta gamma delta epsilon zeta eta theta iota kappa. "
                        "Lambda mu nu xi omicron pi rho sigma tau upsilon.")
    assert len(items) == 1
    assert items[0]["chunk_id"] == "a"


def test_mock_grouping_respects_word_limit():
    long_sentence = "Alpha " + " ".join(f"word{i}" for i in range(34)) + "."  # 35 words
    passage = " ".join([long_sentence, long_sentence, long_sentence])
    items = mock_chunks(passage)
    assert len(items) == 3  # 35 + 35 > 60, so every sentence is its own chunk


def test_mock_title_is_first_six_words():
    items = mock_chunks("Alpha beta gamma delta epsilon zeta eta theta.")
    assert items[0]["chunk_title"] == "Alpha beta gamma delta epsilon zeta"


def test_mock_pronoun_substitution():
    # sentence-initial "It" resolves to the passage's leading capitalized phrase
    items = mock_chunks("Honey is sweet. It serves as food.")
    assert items[0]["chunk_text"] == "Honey is sweet. Honey serves as food."


def test_mock_substitutes_all_listed_pronouns():
    text = ("Glaciers move slowly. They carve valleys. This takes centuries. "
            "These persist today. It continues.")
    items = mock_chunks(text)
    combined = " ".join(item["chunk_text"] for item in items)
    for pronoun in ("They ", "This ", "These ", "It "):
        assert pronoun not in combined
    assert combined.count("Glaciers") == 5


def test_mock_mid_sentence_pronoun_untouched():
    items = mock_chunks("Rivers flow because it rains.")
    assert items[0]["chunk_text"] == "Rivers flow because it rains."


def test_mock_output_is_fenced_json():
    raw = mock_agent(render_chunking_prompt("Water boils."))
    assert raw.startswith("```json")
    assert raw.rstrip().endswith("```")


def test_mock_conservativity_sentences_covered_once():
    # with no sentence-initial pronouns, concatenated chunks equal the passage
    import random

    rng = random.Random(7)
    bank = "alpha beta gamma delta epsilon zeta eta theta iota kappa".split()
    for _ in range(25):
        sentences = []
        for _ in range(rng.randint(1, 12)):
            words = [rng.choice(bank).capitalize()]
            words += rng.choices(bank, k=rng.randint(3, 40))
            sentences.append(" ".join(words) + ".")
        passage = " ".join(sentences)
        items = mock_chunks(passage)
        assert " ".join(item["chunk_text"] for item in items) == passage


# --- mock agent: pseudo-query family ----------------------------------------------

def test_mock_pseudo_queries_exact_output():
    prompt = render_pseudo_query_prompt(
        "Optimal Climate for Coffee Cultivation",
        "Coffee beans grow primarily in tropical climates. "
        "Coffee beans require specific conditions.",
    )
    items = extract_json_array(mock_agent(prompt))
    assert items == [
        {"pseudo_query": "what is optimal climate for coffee cultivation"},
        {"pseudo_query": "is it true that Coffee beans grow primarily in tropical climates."},
        {"pseudo_query": "optimal climate for coffee cultivation explained"},
    ]


def test_mock_pseudo_query_title_rule():
    prompt = render_pseudo_query_prompt("Coffee Climate", "Beans grow in the tropics.")
    items = extract_json_array(mock_agent(prompt))
    assert items[0]["pseudo_query"] == "what is coffee climate"


def test_mock_unrecognized_prompt_family():
    with pytest.raises(ParseError, match="unrecognized"):
        mock_agent("Translate this to French.\n### Task Begin\nbonjour")


def test_mock_determinism():
    prompt = render_chunking_prompt("Stars shine. They burn hydrogen.")
    assert mock_agent(prompt) == mock_agent(prompt)


# --- HTTP agent -----------------------------------------------------------------

class _FakeResponse:
    def __init__(self, payload, status=200):
        self._payload = payload
        self.status_code = status

    def raise_for_status(self):
        if self.status_code >= 400:
            raise requests.HTTPError(f"status {self.status_code}")

    def json(self):
        return self._payload


def http_config():
    return AgentConfig(endpoint_url="http://example.test/v1/chat/completions",
                       model_name="test-model")


def test_http_agent_parses_content(monkeypatch):
    captured = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        captured["url"] = url
        captured["payload"] = json
        return _FakeResponse({"choices": [{"message": {"content": "[1]"}}]})

    monkeypatch.setattr(requests, "post", fake_post)
    agent = HttpChatAgent(http_config())
    assert agent("hello") == "[1]"
    assert captured["payload"]["model"] == "test-model"
    assert captured["payload"]["temperature"] == 0.0
    assert captured["payload"]["messages"][0]["content"] == "hello"


def test_http_agent_sends_api_key(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen["headers"] = headers
        return _FakeResponse({"choices": [{"message": {"content": "x"}}]})

    monkeypatch.setattr(requests, "post", fake_post)
    monkeypatch.setenv("TEST_AGENT_KEY", "sekrit")
    config = AgentConfig(endpoint_url="http://example.test", api_key_env_var="TEST_AGENT_KEY")
    HttpChatAgent(config)("p")
    assert seen["headers"]["Authorization"] == "Bearer sekrit"


def test_http_agent_transport_error(monkeypatch):
    def fake_post(*args, **kwargs):
        raise requests.ConnectionError("boom")

    monkeypatch.setattr(requests, "post", fake_post)
    with pytest.raises(TransportError):
        HttpChatAgent(http_config())("p")


def test_http_agent_malformed_envelope(monkeypatch):
    monkeypatch.setattr(
        requests, "post", lambda *a, **k: _FakeResponse({"unexpected": True})
    )
    with pytest.raises(TransportError, match="malformed"):
        HttpChatAgent(http_config())("p")


def test_http_agent_requires_endpoint():
    with pytest.raises(ValueError):
        HttpChatAgent(AgentConfig())

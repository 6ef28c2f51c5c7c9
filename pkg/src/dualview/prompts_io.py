"""Loading and rendering of the chunking and pseudo-query prompt templates.

The templates live as plain-text package assets under ``dualview/prompts/``.
The chunking template ends with a placeholder passage line; the pseudo-query
template carries ``{{ title }}`` / ``{{ chunk }}`` slots.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

CHUNKING_PASSAGE_PLACEHOLDER = "Your passage text goes here."


@lru_cache(maxsize=None)
def _load_asset(name: str) -> str:
    return (resources.files("dualview") / "prompts" / name).read_text(encoding="utf-8")


def chunking_template() -> str:
    return _load_asset("chunking.txt")


def pseudo_query_template() -> str:
    return _load_asset("pseudo_query.txt")


def render_chunking_prompt(passage_text: str) -> str:
    template = chunking_template()
    assert CHUNKING_PASSAGE_PLACEHOLDER in template
    return template.replace(CHUNKING_PASSAGE_PLACEHOLDER, passage_text)


def render_pseudo_query_prompt(title: str, chunk_text: str) -> str:
    template = pseudo_query_template()
    return template.replace("{{ title }}", title).replace("{{ chunk }}", chunk_text)

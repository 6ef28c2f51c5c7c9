"""Offline preprocessing cost estimator.

Token accounting per passage: one chunking call (fixed prompt + the passage),
then one pseudo-query call per chunk (fixed prompt + chunk text in, a few
queries out). Defaults reflect a typical 200-token passage -> 5 chunks profile
at $2/M input and $6/M output tokens.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class CostModel:
    input_price_per_token: float = 2e-6
    output_price_per_token: float = 6e-6
    chunking_prompt_tokens: int = 120
    per_chunk_query_prompt_tokens: int = 60
    per_chunk_input_tokens: int = 40
    per_chunk_output_tokens: int = 20
    chunking_output_tokens: int = 200

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")


@dataclass(frozen=True)
class CostEstimate:
    input_tokens: int
    output_tokens: int
    total_cost: float

    def to_dict(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "total_cost": self.total_cost,
        }


def estimate_cost(
    passages: int,
    avg_passage_tokens: int,
    avg_chunks: int,
    model: CostModel | None = None,
) -> CostEstimate:
    """Total token usage and price for augmenting ``passages`` passages."""
    if passages <= 0 or avg_passage_tokens <= 0 or avg_chunks <= 0:
        raise ValueError("passages, avg_passage_tokens and avg_chunks must be positive")
    model = model or CostModel()
    input_per_passage = (
        model.chunking_prompt_tokens
        + avg_passage_tokens
        + avg_chunks * (model.per_chunk_query_prompt_tokens + model.per_chunk_input_tokens)
    )
    output_per_passage = (
        model.chunking_output_tokens + avg_chunks * model.per_chunk_output_tokens
    )
    input_tokens = input_per_passage * passages
    output_tokens = output_per_passage * passages
    total = (
        input_tokens * model.input_price_per_token
        + output_tokens * model.output_price_per_token
    )
    return CostEstimate(input_tokens=input_tokens, output_tokens=output_tokens, total_cost=total)

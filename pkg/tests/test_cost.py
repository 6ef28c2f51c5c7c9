import pytest

from dualview.cost import CostModel, estimate_cost


def test_reference_passage_profile():
    # 200-token passage split into 5 chunks at $2/M in, $6/M out
    estimate = estimate_cost(1, 200, 5, CostModel(2e-6, 6e-6))
    assert estimate.input_tokens == 820
    assert estimate.output_tokens == 300
    assert abs(estimate.total_cost - 0.00344) < 1e-9


def test_full_corpus_total():
    estimate = estimate_cost(484_000, 200, 5, CostModel(2e-6, 6e-6))
    assert 1600 <= estimate.total_cost <= 1700


def test_zero_price_model():
    model = CostModel(input_price_per_token=0.0, output_price_per_token=0.0)
    estimate = estimate_cost(10, 200, 5, model)
    assert estimate.total_cost == 0.0
    assert estimate.input_tokens == 8200
    assert estimate.output_tokens == 3000


def test_defaults_match_reference_prices():
    assert estimate_cost(1, 200, 5).total_cost == pytest.approx(0.00344, abs=1e-9)


def test_token_arithmetic_scales_linearly():
    one = estimate_cost(1, 300, 4)
    many = estimate_cost(50, 300, 4)
    assert many.input_tokens == 50 * one.input_tokens
    assert many.output_tokens == 50 * one.output_tokens
    assert many.total_cost == pytest.approx(50 * one.total_cost)


@pytest.mark.parametrize("args", [(0, 200, 5), (1, 0, 5), (1, 200, 0), (-3, 200, 5)])
def test_nonpositive_counts_rejected(args):
    with pytest.raises(ValueError):
        estimate_cost(*args)


def test_negative_model_field_rejected():
    with pytest.raises(ValueError):
        CostModel(input_price_per_token=-1e-6)

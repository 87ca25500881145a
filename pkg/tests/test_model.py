import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SIX_ITEM_DESIGN, all_patterns, random_complete_q, uniform_params
from dinaid.catalog import six_item_truth
from dinaid.model import (
    DegeneratePosteriorError,
    InvalidParamsError,
    ModelParams,
    ResponseDataset,
    attribute_posterior,
    ideal_matrix,
    ideal_response,
    item_prob,
    log_likelihood,
    pattern_probabilities,
    random_params,
    response_pattern_prob,
    simulate,
)
from dinaid.qmatrix import QMatrix
from dinaid.tmoments import canonical_order

ONE_ITEM = QMatrix(np.array([[1]]))
ONE_ITEM_PARAMS = ModelParams([0.2], [0.2], [0.5, 0.5])


# ---------------------------------------------------------------- ideal responses


@pytest.mark.parametrize(
    "q,alpha,expected",
    [((1, 1), (1, 1), 1), ((1, 1), (1, 0), 0), ((0, 1), (0, 1), 1), ((1, 0), (0, 1), 0)],
)
def test_ideal_response(q, alpha, expected):
    assert ideal_response(q, alpha) == expected


@pytest.mark.parametrize("alpha", [(0, 0), (1, 0), (0, 1), (1, 1)])
def test_ideal_response_zero_q(alpha):
    assert ideal_response((0, 0), alpha) == 1


def test_ideal_response_length_mismatch():
    with pytest.raises(ValueError):
        ideal_response((1, 0), (1, 0, 1))


def test_ideal_matrix_columns_follow_canonical_order():
    Q = [[1, 0], [0, 1], [1, 1]]
    # profiles 00, 10, 01, 11
    assert ideal_matrix(Q).tolist() == [[0, 1, 0, 1], [0, 0, 1, 1], [0, 0, 0, 1]]


# ---------------------------------------------------------------- item probabilities


def test_item_prob_mastered_and_not():
    Q = [[1, 0], [0, 1]]
    params = ModelParams([0.2, 0.1], [0.2, 0.3], np.full(4, 0.25))
    assert item_prob(Q, params, 0, (1, 0)) == pytest.approx(0.8)
    assert item_prob(Q, params, 1, (1, 0)) == pytest.approx(0.3)


def test_item_prob_zero_row_always_mastered():
    Q = [[1, 0], [0, 0]]
    params = ModelParams([0.2, 0.15], [0.2, 0.0], np.full(4, 0.25))
    for alpha in canonical_order(2).vectors:
        assert item_prob(Q, params, 1, alpha) == pytest.approx(0.85)


# ---------------------------------------------------------------- parameter validation


def test_zero_row_guessing_must_be_zero():
    Q = [[1, 0], [0, 1], [0, 0]]
    with pytest.raises(InvalidParamsError, match="all-zero"):
        ModelParams.build(Q, [0.2] * 3, [0.2, 0.2, 0.1], np.full(4, 0.25))
    ModelParams.build(Q, [0.2] * 3, [0.2, 0.2, 0.0], np.full(4, 0.25))


@pytest.mark.parametrize(
    "s,g,p",
    [
        ([0.6], [0.5], [0.5, 0.5]),  # g >= 1 - s
        ([0.0], [0.2], [0.5, 0.5]),  # boundary slip
        ([0.2], [0.2], [1.0, 0.0]),  # empty profile
    ],
)
def test_interior_validation_rejects(s, g, p):
    with pytest.raises(InvalidParamsError):
        ModelParams.build(ONE_ITEM, s, g, p)


@pytest.mark.parametrize(
    "s,g,p",
    [([1.2], [0.2], [0.5, 0.5]), ([0.2], [0.2], [0.5, 0.6]), ([0.2], [0.2], [0.2, 0.3, 0.5]), ([0.2, 0.1], [0.2], [0.5, 0.5])],
)
def test_structural_checks(s, g, p):
    with pytest.raises(InvalidParamsError):
        ModelParams(s, g, p)


def test_params_json_roundtrip():
    params = six_item_truth()
    text = params.to_json()
    d = json.loads(text)
    assert list(d["p"])[:4] == ["000", "100", "010", "001"]
    back = ModelParams.from_json(text)
    assert back.allclose(params)


def test_params_from_dict_rejects_bad_keys():
    with pytest.raises(InvalidParamsError):
        ModelParams.from_dict({"s": [0.2], "g": [0.2], "p": {"0": 0.5, "2": 0.5}})


def test_params_are_read_only():
    params = six_item_truth()
    with pytest.raises(ValueError):
        params.s[0] = 0.5


# ---------------------------------------------------------------- pattern probabilities


def test_single_item_probability():
    assert response_pattern_prob(ONE_ITEM, ONE_ITEM_PARAMS, [1]) == pytest.approx(0.5)


def test_deterministic_limit():
    Q = QMatrix(np.array([[1, 0], [0, 1], [1, 1]]))
    p = np.array([0.1, 0.2, 0.3, 0.4])
    params = ModelParams(np.zeros(3), np.zeros(3), p)
    xi = ideal_matrix(Q)
    for r in all_patterns(3):
        expected = sum(p[a] for a in range(4) if np.array_equal(xi[:, a], r))
        assert response_pattern_prob(Q, params, r) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("J,K", [(3, 1), (5, 2), (8, 3), (12, 3)])
def test_normalization(J, K, rng):
    Q = random_complete_q(rng, J, K)
    params = random_params(Q, rng)
    probs = pattern_probabilities(Q, params)
    assert abs(probs.sum() - 1.0) <= 1e-12
    if J <= 8:
        pats = [canonical_order(J).vectors[i] for i in range(1 << J)]
        direct = np.array([response_pattern_prob(Q, params, r) for r in pats])
        assert np.allclose(direct, probs, rtol=0, atol=1e-15)
        assert abs(direct.sum() - 1.0) <= 1e-12


# ---------------------------------------------------------------- log-likelihood


def test_log_likelihood_single_subject():
    assert log_likelihood(ONE_ITEM, ONE_ITEM_PARAMS, [[1]]) == pytest.approx(np.log(0.5))


def test_log_likelihood_additive(rng):
    Q = SIX_ITEM_DESIGN
    params = random_params(Q, rng)
    data = simulate(Q, params, 300, 1)
    doubled = np.vstack([data.rows, data.rows])
    assert log_likelihood(Q, params, doubled) == pytest.approx(2 * log_likelihood(Q, params, data), rel=1e-14)


def test_log_likelihood_matches_pattern_enumeration(rng):
    Q = SIX_ITEM_DESIGN
    params = random_params(Q, rng)
    data = simulate(Q, params, 500, 2)
    patterns, counts = data.pattern_counts()
    expected = sum(c * np.log(response_pattern_prob(Q, params, r)) for r, c in zip(patterns, counts))
    assert log_likelihood(Q, params, data) == pytest.approx(expected, rel=1e-12)


def test_log_likelihood_dimension_mismatch():
    with pytest.raises(ValueError):
        log_likelihood(SIX_ITEM_DESIGN, six_item_truth(), np.ones((4, 5), dtype=np.uint8))


# ---------------------------------------------------------------- simulation


def test_simulate_deterministic_limit():
    Q = SIX_ITEM_DESIGN
    p = np.zeros(8)
    p[-1] = 1.0
    params = ModelParams(np.zeros(6), np.zeros(6), p)
    data = simulate(Q, params, 50, 3)
    assert (data.rows == 1).all()


def test_simulate_boundary_matches_ideal_rows(rng):
    Q = SIX_ITEM_DESIGN
    params = ModelParams(np.zeros(6), np.zeros(6), rng.dirichlet(np.ones(8)))
    data = simulate(Q, params, 200, 4)
    ideal = {tuple(col) for col in ideal_matrix(Q).T}
    assert all(tuple(row) in ideal for row in data.rows)


def test_simulate_same_seed_identical():
    a = simulate(SIX_ITEM_DESIGN, six_item_truth(), 400, 99)
    b = simulate(SIX_ITEM_DESIGN, six_item_truth(), 400, 99)
    c = simulate(SIX_ITEM_DESIGN, six_item_truth(), 400, 100)
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != c.to_csv()


def test_simulate_rejects_empty():
    with pytest.raises(ValueError):
        simulate(SIX_ITEM_DESIGN, six_item_truth(), 0, 1)


def test_simulated_marginals():
    Q = SIX_ITEM_DESIGN
    params = six_item_truth()
    data = simulate(Q, params, 100_000, 5)
    probs = pattern_probabilities(Q, params)
    vecs = canonical_order(6).vectors
    marginal = np.array([probs[vecs[:, j] == 1].sum() for j in range(6)])
    assert np.max(np.abs(data.rows.mean(axis=0) - marginal)) < 0.01


def test_dataset_csv_roundtrip(tmp_path):
    data = simulate(SIX_ITEM_DESIGN, six_item_truth(), 25, 6)
    path = tmp_path / "d.csv"
    data.write_csv(path)
    assert np.array_equal(ResponseDataset.read_csv(path).rows, data.rows)


def test_dataset_rejects_nonbinary():
    with pytest.raises(ValueError):
        ResponseDataset(np.array([[0, 2]]))


# ---------------------------------------------------------------- posterior


def test_posterior_uniform_when_uninformative():
    Q = SIX_ITEM_DESIGN
    params = uniform_params(6, 3, s=0.5, g=0.5)
    post = attribute_posterior(Q, params, [1, 0, 1, 1, 0, 0])
    assert np.allclose(post, 1 / 8, atol=1e-15)


def test_posterior_single_item():
    assert np.allclose(attribute_posterior(ONE_ITEM, ONE_ITEM_PARAMS, [1]), [0.2, 0.8])


def test_posterior_degenerate():
    params = ModelParams([0.0], [0.0], [1.0, 0.0])
    with pytest.raises(DegeneratePosteriorError):
        attribute_posterior(ONE_ITEM, params, [1])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_posterior_normalized(seed):
    rng = np.random.default_rng(seed)
    Q = random_complete_q(rng, 6, 3)
    params = random_params(Q, rng)
    R = rng.integers(0, 2, (20, 6))
    post = attribute_posterior(Q, params, R)
    assert np.allclose(post.sum(axis=1), 1.0, atol=1e-12)
    assert (post >= 0).all()


@pytest.mark.parametrize("J,K", [(4, 2), (8, 3)])
def test_posterior_recovers_joint(J, K, rng):
    Q = random_complete_q(rng, J, K)
    params = random_params(Q, rng)
    R = canonical_order(J).vectors
    post = attribute_posterior(Q, params, R)
    probs = np.array([response_pattern_prob(Q, params, r) for r in R])
    # P(r) * P(alpha | r) summed over r is the prior p
    assert np.allclose(probs @ post, params.p, atol=1e-12)
    # and recombining prior with class likelihoods gives back P(r)
    theta = np.where(ideal_matrix(Q).astype(bool), 1 - params.s[:, None], params.g[:, None])
    lik = np.prod(np.where(R[:, :, None] == 1, theta[None], 1 - theta[None]), axis=1)
    assert np.allclose(post * probs[:, None], lik * params.p[None], atol=1e-14)

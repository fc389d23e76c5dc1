import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mdp, random_stochastic
from mdpturnpike.chain import analyze_matrix
from mdpturnpike.core import FactoredMDP, build_decision_model, explicit_model
from mdpturnpike.errors import (
    DominanceFailureError,
    GridResolutionError,
    PreconditionError,
    ValidationError,
)
from mdpturnpike.optimality import (
    all_gains,
    average_optimal_set,
    blackwell_optimal,
    discounted_optimal_decisions,
    discounted_value_of,
    solve_optimality_equation,
    summarize,
    verify_modified_optimality,
)


@pytest.fixture
def small_model(examples_dir):
    mdp = FactoredMDP.from_dict(json.loads((examples_dir / "small_mdp.json").read_text()))
    return build_decision_model(mdp)


def test_gains_match_cesaro_oracle(small_model):
    gains = all_gains(small_model)
    for k in range(small_model.size):
        Q, R = small_model.Q[k], small_model.R[k]
        P, acc = np.eye(3), np.zeros(3)
        for _ in range(20000):
            acc += P @ R
            P = P @ Q
        np.testing.assert_allclose(gains[k], acc / 20000, atol=1e-3)


def test_average_optimal_dominates(small_model):
    D_star, g_star = average_optimal_set(small_model)
    gains = all_gains(small_model)
    assert np.all(gains <= g_star + 1e-9)
    for d in D_star:
        np.testing.assert_allclose(gains[small_model.index(d)], g_star, atol=1e-9)


def test_dominance_failure_reports_frontier():
    model = explicit_model([(0,), (1,)], [[1.0, 0.0], [0.0, 1.0]], [np.eye(2), np.eye(2)])
    with pytest.raises(DominanceFailureError) as err:
        average_optimal_set(model)
    assert len(err.value.frontier) == 2


def test_discounted_value_matches_series(small_model):
    d = small_model.decisions[3]
    V = discounted_value_of(small_model, d, 0.7)
    k = small_model.index(d)
    S, P = np.zeros(3), np.eye(3)
    for t in range(200):
        S += 0.7**t * (P @ small_model.R[k])
        P = P @ small_model.Q[k]
    np.testing.assert_allclose(V, S, atol=1e-12)


def test_blackwell_inside_average_optimal(small_model):
    bw = blackwell_optimal(small_model)
    D_star, _ = average_optimal_set(small_model)
    assert bw and set(bw) <= set(D_star)


def test_blackwell_grid_validation(small_model):
    with pytest.raises(ValidationError):
        blackwell_optimal(small_model, [])
    with pytest.raises(ValidationError):
        blackwell_optimal(small_model, [0.9, 0.5])
    with pytest.raises(ValidationError):
        blackwell_optimal(small_model, [0.5, 1.0])


def test_grid_resolution_error():
    # decision 0 wins for small beta, decision 1 for beta close to 1
    Q0 = np.array([[0.0, 1.0], [0.0, 1.0]])
    Q1 = np.array([[1.0, 0.0], [0.0, 1.0]])
    model = explicit_model([(0, 0), (1, 0)], [[2.0, 0.0], [0.5, 0.0]], [Q0, Q1])
    assert blackwell_optimal(model, [0.9, 0.99]) == [(1, 0)]
    with pytest.raises(GridResolutionError):
        blackwell_optimal(model, [0.1, 0.9])


def test_optimality_equation_requires_irreducible(small_model):
    mdp = FactoredMDP(np.zeros((2, 1)), np.array([np.eye(2)]))
    with pytest.raises(PreconditionError):
        solve_optimality_equation(build_decision_model(mdp))


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1))
def test_policy_iteration_against_enumeration(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, int(rng.integers(1, 5)), int(rng.integers(1, 4)), "dense")
    model = build_decision_model(mdp)
    G, Y, ds = solve_optimality_equation(model)
    D_star, g_star = average_optimal_set(model)
    np.testing.assert_allclose(g_star, G, atol=1e-9)
    assert Y[0] == 0.0
    assert set(ds) <= set(D_star)
    rep = verify_modified_optimality(model, G * np.ones(model.M), Y)
    assert rep.holds
    assert set(rep.average_optimal) <= set(D_star)


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.2, 0.95))
def test_discounted_optimal_vs_enumeration(seed, beta):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3)))
    model = build_decision_model(mdp)
    values = np.array([discounted_value_of(model, d, beta) for d in model.decisions])
    ds, Vstar = discounted_optimal_decisions(model, beta)
    np.testing.assert_allclose(Vstar, values.max(axis=0), atol=1e-9)
    for d in ds:
        np.testing.assert_allclose(values[model.index(d)], Vstar, atol=1e-8)


@settings(max_examples=40)
@given(seed=st.integers(0, 2**32 - 1))
def test_modified_equation_on_multichain(seed):
    # g* and a bias of an optimal decision satisfy the first equation exactly
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3)), "reducible")
    model = build_decision_model(mdp)
    D_star, g_star = average_optimal_set(model)
    rep = verify_modified_optimality(model, g_star, np.zeros(model.M), tol=1e-9)
    assert rep.gain_residual <= 1e-9


def test_summary_dict(small_model):
    out = summarize(small_model).to_dict()
    assert out["blackwell_certification"] == "grid-certified"
    assert out["average_optimal_set"]
    assert len(out["beta_grid"]) == 8


def test_summary_skips_equation_when_reducible():
    Q = random_stochastic(np.random.default_rng(1), 3, "reducible")
    mdp = FactoredMDP(np.ones((3, 1)), np.array([Q]))
    out = summarize(build_decision_model(mdp)).to_dict()
    assert out["optimality_equation_solution"] is None
    assert analyze_matrix(Q).structure.irreducible is False

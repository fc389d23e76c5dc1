import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import gauss_seidel_decision_oracle, random_mdp
from mdpturnpike.core import (
    FactoredMDP,
    as_vector,
    bellman_gauss_seidel,
    bellman_general,
    bellman_standard,
    build_decision_model,
    discounted_fixed_point,
    discounted_fixed_point_mdp,
    explicit_model,
    span,
    sup_norm,
    value_iteration,
    value_iteration_mdp,
)
from mdpturnpike.errors import (
    AssumptionViolationError,
    DimensionError,
    EnumerationLimitError,
    ModelConstructionError,
    ValidationError,
)


@pytest.fixture
def two_state():
    r = np.array([[1.0, 0.0], [0.0, 2.0]])
    P = np.array([
        [[0.5, 0.5], [0.0, 1.0]],
        [[1.0, 0.0], [0.3, 0.7]],
    ])
    return FactoredMDP(r, P)


class TestVectors:
    def test_span_and_norm(self):
        assert span([3.0, -1.0, 2.0]) == 4.0
        assert span([5.0, 5.0]) == 0.0
        assert sup_norm([3.0, -4.0]) == 4.0

    def test_as_vector_rejects(self):
        with pytest.raises(DimensionError):
            as_vector([])
        with pytest.raises(DimensionError):
            as_vector([1.0, 2.0], 3)
        with pytest.raises(ValidationError):
            as_vector([1.0, np.nan])


class TestFactoredMDP:
    def test_arrays_are_read_only(self, two_state):
        with pytest.raises(ValueError):
            two_state.rewards[0, 0] = 5.0

    def test_shape_errors(self):
        with pytest.raises(DimensionError):
            FactoredMDP(np.zeros((2, 2)), np.zeros((2, 3, 3)))

    def test_row_sum_names_action_and_row(self):
        P = np.array([[[1.0, 0.0], [0.5, 0.4]]])
        with pytest.raises(ValidationError, match=r"transitions\[0\], row 1"):
            FactoredMDP(np.zeros((2, 1)), P)

    def test_dict_round_trip(self, two_state):
        again = FactoredMDP.from_dict(two_state.to_dict())
        assert np.array_equal(again.rewards, two_state.rewards)
        assert np.array_equal(again.transitions, two_state.transitions)

    def test_from_dict_errors(self):
        with pytest.raises(ValidationError, match="missing field 'transitions'"):
            FactoredMDP.from_dict({"M": 1, "N": 1, "rewards": [[0.0]]})
        with pytest.raises(ValidationError, match="model.rewards"):
            FactoredMDP.from_dict({"M": 2, "N": 1, "rewards": [[0.0]], "transitions": [[[1.0]]]})

    def test_renormalize_only_on_request(self):
        data = {"M": 1, "N": 1, "rewards": [[0.0]], "transitions": [[[0.9]]]}
        with pytest.raises(ValidationError):
            FactoredMDP.from_dict(data)
        assert FactoredMDP.from_dict(data, renormalize=True).transitions[0, 0, 0] == 1.0

    def test_shifted_moves_values(self, two_state):
        W = np.array([0.3, -0.2])
        a, _ = bellman_standard(two_state, 1.0, W)
        b, _ = bellman_standard(two_state.shifted(1.5), 1.0, W)
        np.testing.assert_allclose(b, a + 1.5)


class TestDecisionModel:
    def test_lexicographic_enumeration(self, two_state):
        model = build_decision_model(two_state)
        assert model.decisions == ((0, 0), (0, 1), (1, 0), (1, 1))
        np.testing.assert_array_equal(model.matrix((1, 0)), [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(model.reward((1, 0)), [0.0, 0.0])

    def test_cap(self, two_state):
        with pytest.raises(EnumerationLimitError, match="cap 3"):
            build_decision_model(two_state, cap=3)

    def test_unknown_decision(self, two_state):
        with pytest.raises(ValidationError):
            build_decision_model(two_state).index((2, 0))

    def test_explicit_needs_stochastic_rows(self):
        with pytest.raises(ModelConstructionError):
            explicit_model([(0,)], [[1.0]], [[[0.5]]])

    def test_duplicate_decisions(self):
        with pytest.raises(ValidationError):
            explicit_model([(0,), (0,)], [[1.0], [2.0]], [[[1.0]], [[1.0]]])

    def test_gauss_seidel_by_hand(self, two_state):
        # decision (0, 1): row 1 folds the updated row 0 into its P[1, 0] mass
        model = build_decision_model(two_state, "gauss-seidel")
        R, Q = model.reward((0, 1)), model.matrix((0, 1))
        np.testing.assert_allclose(R, [1.0, 2.0 + 0.3 * 1.0])
        np.testing.assert_allclose(Q, [[0.5, 0.5], [0.15, 0.85]])

    @settings(max_examples=40)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_gauss_seidel_matches_sweep_probes(self, seed):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(rng, int(rng.integers(1, 5)), int(rng.integers(1, 3)))
        model = build_decision_model(mdp, "gauss-seidel")
        for k, d in enumerate(model.decisions):
            R, Q = gauss_seidel_decision_oracle(mdp, d)
            np.testing.assert_allclose(model.R[k], R, atol=1e-12)
            np.testing.assert_allclose(model.Q[k], Q, atol=1e-12)


class TestOperators:
    def test_standard_by_enumeration(self, two_state):
        W = np.array([1.0, -1.0])
        Wn, am = bellman_standard(two_state, 0.9, W)
        expect = []
        for s in range(2):
            vals = [two_state.rewards[s, a] + 0.9 * two_state.transitions[a, s] @ W for a in range(2)]
            expect.append(max(vals))
        np.testing.assert_allclose(Wn, expect)
        assert am == [(0,), (1,)]

    def test_beta_range(self, two_state):
        with pytest.raises(ValidationError):
            bellman_standard(two_state, 1.2, np.zeros(2))
        with pytest.raises(ValidationError):
            bellman_standard(two_state, 0.0, np.zeros(2))

    def test_ties_reported(self):
        mdp = FactoredMDP(np.array([[1.0, 1.0]]), np.ones((2, 1, 1)))
        _, am = bellman_standard(mdp, 1.0, np.zeros(1))
        assert am == [(0, 1)]

    def test_gauss_seidel_uses_fresh_values(self, two_state):
        W = np.zeros(2)
        Wn, _ = bellman_gauss_seidel(two_state, 1.0, W)
        # state 0 picks action 0 (value 1); state 1 then sees W'(0) = 1
        assert Wn[0] == 1.0
        assert Wn[1] == pytest.approx(max(0.0 + 1.0 * 0.0, 2.0 + 0.3 * 1.0))

    def test_general_assumption_violation(self):
        model = explicit_model([(0,), (1,)], [[1.0, 0.0], [0.0, 1.0]], [np.eye(2), np.eye(2)])
        with pytest.raises(AssumptionViolationError) as err:
            bellman_general(model, 1.0, np.zeros(2))
        assert err.value.states == (1,)

    @settings(max_examples=40)
    @given(seed=st.integers(0, 2**32 - 1), K=st.integers(1, 8))
    def test_trace_variants_agree(self, seed, K):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(rng, int(rng.integers(1, 4)), int(rng.integers(1, 3)))
        W0 = rng.normal(0, 1, mdp.M)
        for kind, beta in (("standard", 0.8), ("gauss-seidel", 1.0)):
            a = value_iteration(build_decision_model(mdp, kind), beta, W0, K)
            b = value_iteration_mdp(mdp, beta, W0, K, kind)
            assert a.K == b.K == K
            for x, y in zip(a.W, b.W):
                np.testing.assert_allclose(x, y, atol=1e-12)
            assert a.decision_sets == b.decision_sets
            np.testing.assert_allclose(a.span_diffs, b.span_diffs, atol=1e-12)


class TestFixedPoint:
    def test_matches_policy_enumeration(self, two_state):
        beta = 0.9
        best = np.full(2, -np.inf)
        for d in itertools.product(range(2), repeat=2):
            R = np.array([two_state.rewards[s, d[s]] for s in range(2)])
            Q = np.array([two_state.transitions[d[s], s] for s in range(2)])
            best = np.maximum(best, np.linalg.solve(np.eye(2) - beta * Q, R))
        V, ds = discounted_fixed_point(build_decision_model(two_state), beta, tol=1e-11)
        np.testing.assert_allclose(V, best, atol=1e-10)
        V2, am = discounted_fixed_point_mdp(two_state, beta, tol=1e-11)
        np.testing.assert_allclose(V2, best, atol=1e-10)
        assert ds == [tuple(a[0] for a in am)]

    def test_rejects_beta_one(self, two_state):
        with pytest.raises(ValidationError):
            discounted_fixed_point_mdp(two_state, 1.0)

    def test_trace_dict(self, two_state):
        tr = value_iteration_mdp(two_state, 0.5, None, 2)
        d = tr.to_dict()
        assert len(d["W"]) == 3 and len(d["span_diffs"]) == 2

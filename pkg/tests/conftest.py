"""Shared generators, independent oracles and the acceptance summary hook."""
import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mdpturnpike.core import FactoredMDP

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

EXAMPLES = Path(__file__).resolve().parents[1] / "src" / "mdpturnpike" / "examples"

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def examples_dir():
    return EXAMPLES


# ---------------------------------------------------------------------------
# random generators (numpy Generator in, arrays out)
# ---------------------------------------------------------------------------

STRUCTURES = ("dense", "sparse", "periodic", "reducible")


def _weights(rng, mask):
    W = np.where(mask, rng.uniform(0.1, 1.0, mask.shape), 0.0)
    return W / W.sum(axis=1, keepdims=True)


def _sparse_mask(rng, M, density=0.5):
    mask = rng.random((M, M)) < density
    for s in range(M):
        if not mask[s].any():
            mask[s, rng.integers(M)] = True
    return mask


def _cyclic_mask(rng, states, period):
    # groups visited in cyclic order; every state reaches the next group
    groups = np.array_split(rng.permutation(states), period)
    M = max(states) + 1
    mask = np.zeros((M, M), dtype=bool)
    for g, nxt in zip(groups, groups[1:] + groups[:1]):
        for s in g:
            mask[s, nxt] = rng.random(len(nxt)) < 0.7
            mask[s, rng.choice(nxt)] = True
    return mask


def random_stochastic(rng, M, structure):
    """Row-stochastic ``(M, M)`` matrix of the requested structure."""
    if structure == "dense":
        return _weights(rng, np.ones((M, M), dtype=bool))
    if structure == "sparse":
        return _weights(rng, _sparse_mask(rng, M))
    if structure == "periodic":
        period = int(rng.integers(2, M + 1)) if M >= 2 else 1
        return _weights(rng, _cyclic_mask(rng, list(range(M)), period))
    # reducible: one or two closed blocks plus transient states
    if M == 1:
        return np.ones((1, 1))
    perm = rng.permutation(M)
    n_closed = int(rng.integers(1, M))
    closed = perm[:n_closed]
    transient = perm[n_closed:]
    mask = np.zeros((M, M), dtype=bool)
    blocks = np.array_split(closed, 2 if n_closed >= 2 and rng.random() < 0.5 else 1)
    for b in blocks:
        sub = list(b)
        if len(sub) >= 2 and rng.random() < 0.4:
            cm = _cyclic_mask(rng, list(range(len(sub))), int(rng.integers(2, len(sub) + 1)))
        else:
            cm = np.ones((len(sub), len(sub)), dtype=bool)
        mask[np.ix_(sub, sub)] = cm
    for s in transient:
        mask[s] = rng.random(M) < 0.5
        mask[s, rng.choice(closed)] = True
    return _weights(rng, mask)


def random_mdp(rng, M, N, structure=None):
    structure = structure or rng.choice(STRUCTURES)
    P = np.stack([random_stochastic(rng, M, structure) for _ in range(N)])
    r = rng.normal(0.0, 1.0, (M, N))
    return FactoredMDP(r, P)


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def cesaro_doubling(Q, log2n=30):
    """``(1/n) sum_{k<n} Q^k`` with ``n = 2^log2n`` by repeated doubling."""
    Q = np.asarray(Q, dtype=np.float64)
    S = np.eye(Q.shape[0])  # sum of the first n powers
    P = Q.copy()  # Q^n
    for _ in range(log2n):
        S = S + P @ S
        P = P @ P
    return S / 2.0**log2n


def affine_map_oracle(step, M):
    """``(R, Q)`` of an affine map ``W -> R + Q W`` recovered from basis probes."""
    R = step(np.zeros(M))
    Q = np.column_stack([step(np.eye(M)[j]) - R for j in range(M)])
    return R, Q


def gauss_seidel_decision_oracle(mdp, d):
    """Reward vector and matrix of one Gauss-Seidel decision, by probing the sweep."""
    M = mdp.M

    def step(W):
        Wn = np.array(W, dtype=np.float64)
        for s in range(M):
            a = d[s]
            Wn[s] = mdp.rewards[s, a] + mdp.transitions[a, s] @ Wn
        return Wn

    return affine_map_oracle(step, M)


def brute_force_horizon(model, W0, T, beta):
    """Component-wise max over all ``|D|^T`` decision sequences."""
    best = np.full(model.M, -np.inf)
    for seq in itertools.product(range(model.size), repeat=T):
        acc = np.zeros(model.M)
        P = np.eye(model.M)
        disc = 1.0
        for k in seq:
            acc = acc + disc * (P @ model.R[k])
            P = P @ model.Q[k]
            disc *= beta
        acc = acc + disc * (P @ W0)
        best = np.maximum(best, acc)
    return best


def period_oracle(Q, s):
    """gcd of return times ``n <= 3 M^2`` with ``(Q^n)_{ss} > 0``."""
    from math import gcd

    A = (np.asarray(Q) > 1e-10).astype(np.int64)
    M = A.shape[0]
    P = np.eye(M, dtype=np.int64)
    g = 0
    for n in range(1, 3 * M * M + 1):
        P = np.minimum(P @ A, 1)
        if P[s, s]:
            g = gcd(g, n)
    return g

"""Numeric substrate and Bellman operators.

Vectors are 1-d float arrays, stochastic matrices are 2-d float arrays.
A :class:`FactoredMDP` holds per-action data ``<S, A, P, r>``; a
:class:`DecisionModel` holds the enumerated triplet ``<D, R, Q>`` where each
decision is a tuple of action indices (one per state).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._constants import DECISION_CAP, TAU_STOCH, TAU_TIE
from .errors import (
    AssumptionViolationError,
    DimensionError,
    EnumerationLimitError,
    ModelConstructionError,
    NumericError,
    ValidationError,
)

KINDS = ("standard", "gauss-seidel", "explicit")


# ---------------------------------------------------------------------------
# vectors and matrices
# ---------------------------------------------------------------------------

def as_vector(v, M=None, name="vector"):
    """Convert to a finite 1-d float array, optionally checking its length."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a nonempty 1-d vector, got shape {arr.shape}")
    if M is not None and arr.size != M:
        raise DimensionError(f"{name} has length {arr.size}, expected {M}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    return arr


def span(v):
    """Span seminorm ``max v - min v``."""
    v = as_vector(v)
    return float(v.max() - v.min())


def sup_norm(v):
    """Uniform norm ``max |v|``."""
    v = as_vector(v)
    return float(np.abs(v).max())


def stochastic_violation(Q):
    """Return ``(row, message)`` for the first row breaking stochasticity, else None."""
    Q = np.asarray(Q, dtype=np.float64)
    for s, row in enumerate(Q):
        if not np.all(np.isfinite(row)):
            return s, "non-finite entry"
        if row.min() < -TAU_STOCH or row.max() > 1 + TAU_STOCH:
            return s, f"entry outside [0, 1] (min {row.min():.3g}, max {row.max():.3g})"
        total = row.sum()
        if abs(total - 1.0) > TAU_STOCH:
            return s, f"row sum {total:.12g} != 1"
    return None


def check_stochastic(Q, name="matrix", error=ValidationError):
    """Raise ``error`` unless ``Q`` is square and row-stochastic within TAU_STOCH."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] == 0:
        raise DimensionError(f"{name} must be a nonempty square matrix, got shape {Q.shape}")
    bad = stochastic_violation(Q)
    if bad is not None:
        raise error(f"{name}, row {bad[0]}: {bad[1]}")
    return Q


def normalize_rows(P):
    """Divide every row by its sum. Only applied on explicit request."""
    P = np.array(P, dtype=np.float64)
    sums = P.sum(axis=-1, keepdims=True)
    if np.any(sums <= 0):
        raise ValidationError("cannot normalize a row with non-positive sum")
    return P / sums


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactoredMDP:
    """Finite MDP with ``rewards[s, a]`` and ``transitions[a, s, j]``."""

    rewards: np.ndarray
    transitions: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rewards, dtype=np.float64)
        P = np.asarray(self.transitions, dtype=np.float64)
        if r.ndim != 2 or r.shape[0] == 0 or r.shape[1] == 0:
            raise DimensionError(f"rewards must be an (M, N) array, got shape {r.shape}")
        M, N = r.shape
        if P.shape != (N, M, M):
            raise DimensionError(f"transitions must have shape {(N, M, M)}, got {P.shape}")
        if not np.all(np.isfinite(r)):
            raise ValidationError("rewards contain non-finite values")
        for a in range(N):
            check_stochastic(P[a], name=f"transitions[{a}]")
        object.__setattr__(self, "rewards", _readonly(r))
        object.__setattr__(self, "transitions", _readonly(P))

    @property
    def M(self):
        return self.rewards.shape[0]

    @property
    def N(self):
        return self.rewards.shape[1]

    @classmethod
    def from_dict(cls, data, renormalize=False):
        """Build from the JSON model schema (``M, N, rewards, transitions``)."""
        for key in ("M", "N", "rewards", "transitions"):
            if key not in data:
                raise ValidationError(f"model: missing field {key!r}")
        M, N = data["M"], data["N"]
        if not (isinstance(M, int) and isinstance(N, int) and M >= 1 and N >= 1):
            raise ValidationError("model: M and N must be positive integers")
        r = np.asarray(data["rewards"], dtype=np.float64)
        if r.shape != (M, N):
            raise ValidationError(f"model.rewards: expected shape {(M, N)}, got {r.shape}")
        P = np.asarray(data["transitions"], dtype=np.float64)
        if P.shape != (N, M, M):
            raise ValidationError(f"model.transitions: expected shape {(N, M, M)}, got {P.shape}")
        if renormalize:
            P = normalize_rows(P)
        return cls(r, P)

    def to_dict(self):
        return {
            "M": self.M,
            "N": self.N,
            "rewards": self.rewards.tolist(),
            "transitions": self.transitions.tolist(),
        }

    def shifted(self, c):
        """Copy with ``c`` added to every reward."""
        return FactoredMDP(self.rewards + c, self.transitions)


@dataclass(frozen=True)
class DecisionModel:
    """Enumerated model ``<D, R, Q>``.

    ``R[k]`` and ``Q[k]`` belong to ``decisions[k]``. For the kinds
    ``standard`` and ``gauss-seidel`` each decision is the tuple
    ``(d(0), ..., d(M-1))`` and ``mdp`` is the source model.
    """

    decisions: tuple
    R: np.ndarray
    Q: np.ndarray
    kind: str = "explicit"
    mdp: FactoredMDP | None = None
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        decisions = tuple(tuple(int(x) for x in d) for d in self.decisions)
        R = np.asarray(self.R, dtype=np.float64)
        Q = np.asarray(self.Q, dtype=np.float64)
        K = len(decisions)
        if K == 0:
            raise ValidationError("model has no decisions")
        if R.ndim != 2 or R.shape[0] != K:
            raise DimensionError(f"R must have shape (|D|, M), got {R.shape}")
        M = R.shape[1]
        if Q.shape != (K, M, M):
            raise DimensionError(f"Q must have shape {(K, M, M)}, got {Q.shape}")
        if not np.all(np.isfinite(R)):
            raise ValidationError("R contains non-finite values")
        for k, d in enumerate(decisions):
            check_stochastic(Q[k], name=f"Q{list(d)}", error=ModelConstructionError)
        if len(set(decisions)) != K:
            raise ValidationError("duplicate decision identifiers")
        object.__setattr__(self, "decisions", decisions)
        object.__setattr__(self, "R", _readonly(R))
        object.__setattr__(self, "Q", _readonly(Q))
        object.__setattr__(self, "_index", {d: k for k, d in enumerate(decisions)})

    @property
    def M(self):
        return self.R.shape[1]

    @property
    def size(self):
        return len(self.decisions)

    def index(self, d):
        try:
            return self._index[tuple(int(x) for x in d)]
        except KeyError:
            raise ValidationError(f"decision {list(d)} is not in the model") from None

    def reward(self, d):
        return self.R[self.index(d)]

    def matrix(self, d):
        return self.Q[self.index(d)]


def build_decision_model(mdp, kind="standard", cap=DECISION_CAP):
    """Enumerate all ``N**M`` decisions in lexicographic order.

    For ``standard`` row ``s`` of ``(R, Q)`` is copied from action
    ``d(s)``. For ``gauss-seidel`` rows are built recursively so that row
    ``l`` already folds in the updated rows ``0..l-1``.
    """
    if kind not in ("standard", "gauss-seidel"):
        raise ValidationError(f"build_decision_model: kind must be standard or gauss-seidel, got {kind!r}")
    M, N = mdp.M, mdp.N
    count = N ** M
    if count > cap:
        raise EnumerationLimitError("decisions N**M", count, cap)
    D = np.array(list(itertools.product(range(N), repeat=M)), dtype=np.intp).reshape(count, M)
    r, P = mdp.rewards, mdp.transitions
    states = np.arange(M)
    R = r[states[None, :], D]  # (K, M)
    rows = P[D, states[None, :], :]  # (K, M, M): rows[k, s] = P(d_k(s))[s, :]
    if kind == "standard":
        Q = rows.copy()
    else:
        R = R.copy()
        Q = np.zeros((count, M, M))
        for l in range(M):
            prow = rows[:, l, :]  # (K, M)
            # reward and transition mass routed through already-updated states i < l
            R[:, l] = R[:, l] + np.einsum("ki,ki->k", prow[:, :l], R[:, :l])
            Q[:, l, :] = np.einsum("ki,kij->kj", prow[:, :l], Q[:, :l, :])
            Q[:, l, l:] += prow[:, l:]
    decisions = [tuple(int(x) for x in d) for d in D]
    try:
        return DecisionModel(decisions, R, Q, kind=kind, mdp=mdp)
    except ModelConstructionError as exc:
        raise ModelConstructionError(f"{kind} construction broke stochasticity: {exc}") from exc


def explicit_model(decisions, R, Q):
    """Wrap user-supplied ``(R, Q)`` per decision as an ``explicit`` model."""
    return DecisionModel(tuple(decisions), R, Q, kind="explicit")


# ---------------------------------------------------------------------------
# Bellman operators
# ---------------------------------------------------------------------------

def _check_beta(beta, closed=True):
    if not (0.0 < beta < 1.0 or (closed and beta == 1.0)):
        rng = "(0, 1]" if closed else "(0, 1)"
        raise ValidationError(f"beta must lie in {rng}, got {beta}")


def bellman_standard(mdp, beta, W, tie=TAU_TIE):
    """Apply ``W'(s) = max_a r_s(a) + beta sum_j P_sj(a) W(j)``.

    Returns ``(W', argmax)`` where ``argmax[s]`` is the sorted tuple of
    actions within ``tie`` of the maximum.
    """
    _check_beta(beta)
    W = as_vector(W, mdp.M, "W")
    q = mdp.rewards + beta * np.einsum("asj,j->sa", mdp.transitions, W)
    Wn = q.max(axis=1)
    argmax = [tuple(int(a) for a in np.flatnonzero(q[s] >= Wn[s] - tie)) for s in range(mdp.M)]
    return Wn, argmax


def bellman_gauss_seidel(mdp, beta, W, tie=TAU_TIE):
    """Gauss-Seidel sweep: state ``s`` sees the new values of states ``j < s``.

    ``beta`` multiplies both the updated and the old part of the sum. For
    ``beta = 1`` this equals :func:`bellman_general` on the gauss-seidel
    decision model.
    """
    _check_beta(beta)
    W = as_vector(W, mdp.M, "W")
    Wn, mask = kernels.gs_sweep(mdp.rewards, mdp.transitions, float(beta), W, tie)
    argmax = [tuple(int(a) for a in np.flatnonzero(mask[s])) for s in range(mdp.M)]
    return Wn, argmax


def decisions_from_action_sets(action_sets):
    """Cartesian product of per-state action sets, lexicographically sorted."""
    return [tuple(d) for d in itertools.product(*action_sets)]


def _common_maximizers(vals, tie):
    """Indices of rows of ``vals`` that are within ``tie`` of the column max everywhere."""
    best = vals.max(axis=0)
    ok = vals >= best - tie
    hits = np.flatnonzero(ok.all(axis=1))
    if hits.size:
        return best, hits
    # locate where the per-state maximizer sets stop intersecting
    alive = np.ones(vals.shape[0], dtype=bool)
    conflict = []
    for s in range(vals.shape[1]):
        nxt = alive & ok[:, s]
        if not nxt.any():
            conflict.append(s)
        else:
            alive = nxt
    raise AssumptionViolationError(conflict)


def bellman_general(model, beta, W, tie=TAU_TIE):
    """Apply ``W' = max_d {R(d) + beta Q(d) W}`` component-wise.

    Returns ``(W', decisions)`` with every decision attaining the
    component-wise maximum within ``tie``, in model order. Raises
    :class:`AssumptionViolationError` when no single decision does.
    """
    _check_beta(beta)
    W = as_vector(W, model.M, "W")
    vals = model.R + beta * (model.Q @ W)
    best, hits = _common_maximizers(vals, tie)
    return best, [model.decisions[k] for k in hits]


# ---------------------------------------------------------------------------
# value iteration
# ---------------------------------------------------------------------------

@dataclass
class IterationTrace:
    """Iterates ``W^0..W^K`` with the maximizers used at each step.

    ``decision_sets[k]`` and ``argmax_sets[k]`` belong to the step
    ``W^k -> W^{k+1}``. ``argmax_sets`` holds per-state action tuples and is
    None for explicit models, whose decisions are opaque labels.
    """

    beta: float
    W: list
    decision_sets: list
    argmax_sets: list | None
    span_diffs: list

    def __post_init__(self):
        if len(self.span_diffs) != len(self.W) - 1:
            raise ValidationError("trace: span_diffs must have one entry per step")

    @property
    def K(self):
        return len(self.W) - 1

    def to_dict(self):
        return {
            "beta": self.beta,
            "W": [np.asarray(w).tolist() for w in self.W],
            "decision_sets": [[list(d) for d in ds] for ds in self.decision_sets],
            "argmax_sets": None
            if self.argmax_sets is None
            else [[list(a) for a in step] for step in self.argmax_sets],
            "span_diffs": list(self.span_diffs),
        }


def _per_state_sets(decisions, M):
    return [tuple(sorted({d[s] for d in decisions})) for s in range(M)]


def value_iteration(model, beta, W0=None, K=0, tie=TAU_TIE):
    """Run ``K`` applications of :func:`bellman_general` from ``W0`` (default zero)."""
    if K < 0:
        raise ValidationError("K must be non-negative")
    W = np.zeros(model.M) if W0 is None else as_vector(W0, model.M, "W0")
    Ws, dsets, spans = [W], [], []
    for k in range(K):
        try:
            Wn, ds = bellman_general(model, beta, W, tie)
        except AssumptionViolationError as exc:
            raise AssumptionViolationError(exc.states, f"iteration {k}: {exc}") from exc
        dsets.append(ds)
        spans.append(span(Wn - W))
        Ws.append(Wn)
        W = Wn
    asets = None
    if model.kind != "explicit":
        asets = [_per_state_sets(ds, model.M) for ds in dsets]
    return IterationTrace(float(beta), Ws, dsets, asets, spans)


def value_iteration_mdp(mdp, beta, W0=None, K=0, kind="standard", tie=TAU_TIE):
    """Value iteration with the per-state operators; never enumerates decisions."""
    if K < 0:
        raise ValidationError("K must be non-negative")
    op = bellman_standard if kind == "standard" else bellman_gauss_seidel
    W = np.zeros(mdp.M) if W0 is None else as_vector(W0, mdp.M, "W0")
    Ws, asets, spans = [W], [], []
    for _ in range(K):
        Wn, am = op(mdp, beta, W, tie)
        asets.append(am)
        spans.append(span(Wn - W))
        Ws.append(Wn)
        W = Wn
    dsets = [decisions_from_action_sets(a) for a in asets]
    return IterationTrace(float(beta), Ws, dsets, asets, spans)


def _iteration_cap(beta, gap, first_step):
    if first_step <= gap:
        return 2
    return int(math.ceil(math.log(gap / first_step) / math.log(beta))) + 10


def _fixed_point(step, W0, beta, tol, max_iter):
    threshold = tol * (1 - beta) / beta
    W = W0
    Wn = step(W)
    first = sup_norm(Wn - W)
    cap = max_iter or min(_iteration_cap(beta, threshold, first), 10_000_000)
    for _ in range(cap):
        if sup_norm(Wn - W) <= threshold:
            return Wn
        W, Wn = Wn, step(Wn)
    raise NumericError(f"fixed-point iteration did not converge within {cap} steps (beta={beta})")


def discounted_fixed_point(model, beta, tol=1e-10, max_iter=None, tie=TAU_TIE):
    """Approximate ``V^{beta*}`` to ``sup_norm`` accuracy ``tol``.

    Stops once ``||W^{k+1} - W^k|| <= tol (1 - beta) / beta``. Returns the
    estimate and the decisions attaining the maximum at it.
    """
    _check_beta(beta, closed=False)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    V = _fixed_point(lambda W: bellman_general(model, beta, W, tie)[0],
                     np.zeros(model.M), beta, tol, max_iter)
    _, ds = bellman_general(model, beta, V, tie)
    return V, ds


def discounted_fixed_point_mdp(mdp, beta, tol=1e-10, max_iter=None, tie=TAU_TIE):
    """Same as :func:`discounted_fixed_point` using the standard per-state operator."""
    _check_beta(beta, closed=False)
    if tol <= 0:
        raise ValidationError("tol must be positive")
    V = _fixed_point(lambda W: bellman_standard(mdp, beta, W, tie)[0],
                     np.zeros(mdp.M), beta, tol, max_iter)
    _, am = bellman_standard(mdp, beta, V, tie)
    return V, am

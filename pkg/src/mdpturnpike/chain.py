"""Structure and long-run behaviour of a single stochastic matrix.

The limiting matrix ``Q*`` is assembled exactly from the class
decomposition: a stationary distribution per closed class plus absorption
probabilities for transient states.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from ._constants import PIVOT_TOL, TAU_LIN, TAU_STOCH
from .core import check_stochastic
from .errors import NumericError, ReportValidationError


@dataclass(frozen=True)
class ChainStructure:
    """Communicating classes of a finite chain.

    ``classes`` are sorted by smallest member; ``closed[i]`` tells whether
    class ``i`` is closed and ``periods[i]`` is its period (None for
    non-closed classes).
    """

    classes: tuple
    closed: tuple
    periods: tuple
    transient_states: tuple
    irreducible: bool
    aperiodic: bool
    ergodic: bool

    @property
    def has_transient(self):
        return bool(self.transient_states)

    @property
    def closed_classes(self):
        return [c for c, cl in zip(self.classes, self.closed) if cl]

    def to_dict(self):
        return {
            "classes": [list(c) for c in self.classes],
            "closed": list(self.closed),
            "periods": list(self.periods),
            "transient_states": list(self.transient_states),
            "irreducible": self.irreducible,
            "aperiodic": self.aperiodic,
            "ergodic": self.ergodic,
            "has_transient": self.has_transient,
        }


def support(Q, threshold=TAU_STOCH):
    """Boolean adjacency ``Q[s, j] > threshold``."""
    return np.asarray(Q) > threshold


def _class_period(adj, members):
    # BFS levels; the period is the gcd of level[u] + 1 - level[v] over edges in the class
    idx = {s: n for n, s in enumerate(members)}
    level = {members[0]: 0}
    queue = [members[0]]
    for u in queue:
        for v in np.flatnonzero(adj[u]):
            v = int(v)
            if v in idx and v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    g = 0
    for u in members:
        for v in np.flatnonzero(adj[u]):
            v = int(v)
            if v in idx:
                g = gcd(g, abs(level[u] + 1 - level[v]))
    return g


def communicating_classes(Q):
    """Strongly connected components of the support digraph with closedness and periods."""
    Q = check_stochastic(Q, "Q")
    adj = support(Q)
    M = Q.shape[0]
    n, labels = connected_components(adj, directed=True, connection="strong")
    groups = [tuple(int(s) for s in np.flatnonzero(labels == c)) for c in range(n)]
    groups.sort(key=lambda g: g[0])
    closed, periods = [], []
    for g in groups:
        inside = np.zeros(M, dtype=bool)
        inside[list(g)] = True
        is_closed = not adj[np.ix_(list(g), ~inside)].any()
        closed.append(is_closed)
        periods.append(_class_period(adj, list(g)) if is_closed else None)
    transient = tuple(sorted(s for g, c in zip(groups, closed) if not c for s in g))
    irreducible = len(groups) == 1
    aperiodic = all(p == 1 for p, c in zip(periods, closed) if c)
    return ChainStructure(
        classes=tuple(groups),
        closed=tuple(closed),
        periods=tuple(periods),
        transient_states=transient,
        irreducible=irreducible,
        aperiodic=aperiodic,
        ergodic=irreducible and aperiodic,
    )


def _lu_solve(A, B, what):
    """Solve ``A X = B`` by partially pivoted LU, refusing tiny pivots."""
    A = np.asarray(A, dtype=np.float64)
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.size and pivots.min() < PIVOT_TOL:
        cond = np.linalg.cond(A)
        raise NumericError(f"{what}: singular system (min pivot {pivots.min():.2e}, cond {cond:.2e})")
    return scipy.linalg.lu_solve((lu, piv), B)


def stationary_distribution(Q_cc):
    """Stationary row vector of an irreducible stochastic block."""
    m = Q_cc.shape[0]
    A = (Q_cc - np.eye(m)).T
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    return _lu_solve(A, b, "stationary distribution")


def limiting_matrix(Q, structure=None):
    """Cesaro limit ``Q* = lim (1/n) sum_{k<n} Q^k`` computed exactly."""
    Q = check_stochastic(Q, "Q")
    st = structure or communicating_classes(Q)
    M = Q.shape[0]
    Qs = np.zeros((M, M))
    closed = st.closed_classes
    for c in closed:
        c = list(c)
        pi = stationary_distribution(Q[np.ix_(c, c)])
        Qs[np.ix_(c, c)] = pi[None, :]
    T = list(st.transient_states)
    if T:
        # absorption probabilities into each closed class
        onestep = np.column_stack([Q[np.ix_(T, list(c))].sum(axis=1) for c in closed])
        absorb = _lu_solve(np.eye(len(T)) - Q[np.ix_(T, T)], onestep, "absorption probabilities")
        for n, c in enumerate(closed):
            c = list(c)
            pi = Qs[c[0], c]
            Qs[np.ix_(T, c)] = np.outer(absorb[:, n], pi)
    return Qs


def _max_abs(a):
    return float(np.abs(a).max()) if np.size(a) else 0.0


def deviation_matrix(Q, Q_star, tol=TAU_LIN):
    """``D = (I - Q + Q*)^{-1} - Q*``, checked against ``(I - Q + Q*)^{-1}(I - Q*)``."""
    Q = np.asarray(Q, dtype=np.float64)
    Q_star = np.asarray(Q_star, dtype=np.float64)
    M = Q.shape[0]
    I = np.eye(M)
    Z = _lu_solve(I - Q + Q_star, I, "fundamental matrix (I - Q + Q*)")
    D = Z - Q_star
    alt = Z @ (I - Q_star)
    resid = _max_abs(D - alt)
    if resid > tol * max(1.0, _max_abs(Z)):
        raise NumericError(f"deviation matrix forms disagree by {resid:.2e}; Q* inconsistent with Q")
    return D


def gain_bias(model, d):
    """Gain ``Q*(d) R(d)`` and bias ``D(d) R(d)`` of one decision."""
    report = full_report(model, d)
    return report.gain, report.bias


@dataclass(frozen=True)
class ChainReport:
    structure: ChainStructure
    Q: np.ndarray
    Q_star: np.ndarray
    deviation: np.ndarray
    gain: np.ndarray
    bias: np.ndarray

    def to_dict(self):
        return {
            "structure": self.structure.to_dict(),
            "Q": self.Q.tolist(),
            "Q_star": self.Q_star.tolist(),
            "deviation": self.deviation.tolist(),
            "gain": self.gain.tolist(),
            "bias": self.bias.tolist(),
        }


def chain_identities(Q, Q_star, D, R=None, gain=None, bias=None):
    """Residuals of all algebraic identities a chain report must satisfy."""
    M = Q.shape[0]
    I = np.eye(M)
    e = np.ones(M)
    out = {
        "Q Q* = Q*": _max_abs(Q @ Q_star - Q_star),
        "Q* Q = Q*": _max_abs(Q_star @ Q - Q_star),
        "Q* Q* = Q*": _max_abs(Q_star @ Q_star - Q_star),
        "Q* e = e": _max_abs(Q_star @ e - e),
        "D e = 0": _max_abs(D @ e),
        "Q* D = 0": _max_abs(Q_star @ D),
        "(I - Q + Q*) (D + Q*) = I": _max_abs((I - Q + Q_star) @ (D + Q_star) - I),
    }
    if R is not None:
        out["g = Q* R"] = _max_abs(gain - Q_star @ R)
        out["h = D R"] = _max_abs(bias - D @ R)
        out["g = Q g"] = _max_abs(gain - Q @ gain)
        out["g + (I - Q) h = R"] = _max_abs(gain + (I - Q) @ bias - R)
    return out


def analyze_matrix(Q, R=None, tol=TAU_LIN):
    """Chain report for a bare matrix; ``R`` defaults to zero rewards."""
    Q = check_stochastic(Q, "Q")
    M = Q.shape[0]
    R = np.zeros(M) if R is None else np.asarray(R, dtype=np.float64)
    st = communicating_classes(Q)
    Qs = limiting_matrix(Q, st)
    D = deviation_matrix(Q, Qs)
    g = Qs @ R
    h = D @ R
    scale = max(1.0, _max_abs(D), _max_abs(R))
    for name, resid in chain_identities(Q, Qs, D, R, g, h).items():
        if resid > tol * scale:
            raise ReportValidationError(name, resid, tol * scale)
    return ChainReport(st, Q, Qs, D, g, h)


def full_report(model, d, tol=TAU_LIN):
    """Structure, ``Q*``, deviation matrix, gain and bias of decision ``d``."""
    k = model.index(d)
    return analyze_matrix(model.Q[k], model.R[k], tol)


"""Average-optimal, Blackwell-optimal and optimality-equation machinery."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._constants import TAU_LIN, TAU_TIE
from .chain import analyze_matrix, communicating_classes
from .core import _check_beta, _common_maximizers, as_vector
from .errors import (
    DominanceFailureError,
    GridResolutionError,
    NumericError,
    PreconditionError,
    ValidationError,
)

DEFAULT_BETA_GRID = tuple(1.0 - 10.0 ** (-j) for j in range(1, 9))


def all_gains(model):
    """Array ``(|D|, M)`` with the gain of every decision, in model order."""
    return np.array([analyze_matrix(model.Q[k], model.R[k]).gain for k in range(model.size)])


def _pareto_frontier(gains, tie):
    keep = []
    for k, g in enumerate(gains):
        dominated = any(
            np.all(h >= g - tie) and np.any(h > g + tie) for n, h in enumerate(gains) if n != k
        )
        if not dominated:
            keep.append(k)
    return keep


def average_optimal_set(model, tie=TAU_TIE, gains=None):
    """Decisions whose gain dominates all others component-wise, and that gain.

    Returns ``(decisions, g_star)``.
    """
    if gains is None:
        gains = all_gains(model)
    g_star = gains.max(axis=0)
    hits = np.flatnonzero(np.all(gains >= g_star - tie, axis=1))
    if hits.size == 0:
        frontier = _pareto_frontier(gains, tie)
        raise DominanceFailureError(
            [(list(model.decisions[k]), gains[k].tolist()) for k in frontier]
        )
    # report the gain of an actual member, not the synthetic column max
    return [model.decisions[k] for k in hits], gains[hits[0]].copy()


def discounted_value_of(model, d, beta):
    """Solve ``(I - beta Q(d)) V = R(d)``."""
    _check_beta(beta, closed=False)
    k = model.index(d)
    A = np.eye(model.M) - beta * model.Q[k]
    try:
        return np.linalg.solve(A, model.R[k])
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular discounted system for decision {list(d)}") from exc


def _all_discounted_values(model, beta, gains=None):
    # V = g / (1 - beta) + w with (I - beta Q) w = R - g; the right-hand side has
    # no component along the near-null direction, so w stays accurate as beta -> 1
    if gains is None:
        gains = all_gains(model)
    A = np.eye(model.M)[None, :, :] - beta * model.Q
    w = np.linalg.solve(A, (model.R - gains)[:, :, None])[:, :, 0]
    return gains / (1.0 - beta) + w


def discounted_optimal_decisions(model, beta, tol=TAU_TIE, gains=None):
    """Decisions attaining the discounted optimality equation at ``beta``.

    ``V^{beta*}`` is the component-wise maximum of the exact values
    ``V^{beta d}``; the tie band is ``tol * max(1, ||V^{beta*}||)`` because
    values grow like ``1 / (1 - beta)``.
    """
    _check_beta(beta, closed=False)
    V = _all_discounted_values(model, beta, gains)
    Vstar = V.max(axis=0)
    band = tol * max(1.0, float(np.abs(Vstar).max()))
    vals = model.R + beta * (model.Q @ Vstar)
    hits = np.flatnonzero(np.all(vals >= Vstar - band, axis=1))
    return [model.decisions[k] for k in hits], Vstar


def blackwell_optimal(model, beta_grid=DEFAULT_BETA_GRID, tol=TAU_TIE):
    """Decisions that are discounted-optimal at every grid point.

    The result is grid-certified only: exact Blackwell optimality would
    need a comparison of the rational functions ``beta -> V^{beta d}``.
    """
    grid = [float(b) for b in beta_grid]
    if not grid:
        raise ValidationError("beta grid is empty")
    if any(b <= 0.0 or b >= 1.0 for b in grid):
        raise ValidationError("beta grid values must lie in (0, 1)")
    if any(b2 <= b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValidationError("beta grid must be strictly increasing")
    gains = all_gains(model)
    alive = None
    for beta in grid:
        ds, _ = discounted_optimal_decisions(model, beta, tol, gains)
        alive = set(ds) if alive is None else alive & set(ds)
    if not alive:
        raise GridResolutionError("no decision is optimal on the whole beta grid; refine the grid")
    return [d for d in model.decisions if d in alive]


def solve_optimality_equation(model, tie=TAU_TIE, max_iter=None):
    """Policy iteration for ``G e + Y = max_d {R(d) + Q(d) Y}``.

    Every ``Q(d)`` must be irreducible. Returns ``(G, Y, maximizers)``
    with ``Y(0) = 0``.
    """
    for k, d in enumerate(model.decisions):
        if not communicating_classes(model.Q[k]).irreducible:
            raise PreconditionError(f"Q{list(d)} is reducible; the optimality equation needs irreducible chains")
    current = 0
    visited = [model.decisions[0]]
    cap = max_iter or model.size + 1
    for _ in range(cap):
        rep = analyze_matrix(model.Q[current], model.R[current])
        G = float(rep.gain[0])
        Y = rep.bias - rep.bias[0]
        vals = model.R + model.Q @ Y
        best, hits = _common_maximizers(vals, tie)
        if current in hits:
            return G, Y, [model.decisions[k] for k in hits]
        current = int(hits[0])
        if model.decisions[current] in visited:
            raise NumericError(f"policy iteration cycled; visited {[list(v) for v in visited]}")
        visited.append(model.decisions[current])
    raise NumericError(f"policy iteration did not stop; visited {[list(v) for v in visited]}")


@dataclass(frozen=True)
class ModifiedOptimalityReport:
    gain_residual: float
    bias_residual: float
    gain_maximizers: list
    bias_maximizers: list
    average_optimal: list
    tol: float

    @property
    def holds(self):
        return self.gain_residual <= self.tol and self.bias_residual <= self.tol

    def to_dict(self):
        return {
            "gain_residual": self.gain_residual,
            "bias_residual": self.bias_residual,
            "holds": self.holds,
            "gain_maximizers": [list(d) for d in self.gain_maximizers],
            "bias_maximizers": [list(d) for d in self.bias_maximizers],
            "average_optimal": [list(d) for d in self.average_optimal],
            "tol": self.tol,
        }


def verify_modified_optimality(model, g, Y, tol=TAU_LIN):
    """Residuals of ``g = max_d Q(d) g`` and ``g + Y = max_d {R(d) + Q(d) Y}``.

    A decision attaining both maxima is average optimal.
    """
    g = as_vector(g, model.M, "g")
    Y = as_vector(Y, model.M, "Y")
    first = model.Q @ g
    second = model.R + model.Q @ Y
    m1, m2 = first.max(axis=0), second.max(axis=0)
    hit1 = np.flatnonzero(np.all(first >= m1 - tol, axis=1))
    hit2 = np.flatnonzero(np.all(second >= m2 - tol, axis=1))
    both = sorted(set(hit1.tolist()) & set(hit2.tolist()))
    return ModifiedOptimalityReport(
        gain_residual=float(np.abs(g - m1).max()),
        bias_residual=float(np.abs(g + Y - m2).max()),
        gain_maximizers=[model.decisions[k] for k in hit1],
        bias_maximizers=[model.decisions[k] for k in hit2],
        average_optimal=[model.decisions[k] for k in both],
        tol=tol,
    )


@dataclass
class OptimalitySummary:
    average_optimal_set: list
    optimal_gain: np.ndarray
    blackwell_candidates: list
    beta_grid: tuple
    optimality_equation_solution: tuple | None = None

    def to_dict(self):
        sol = None
        if self.optimality_equation_solution is not None:
            G, Y, ds = self.optimality_equation_solution
            sol = {"G": G, "Y": np.asarray(Y).tolist(), "maximizers": [list(d) for d in ds]}
        return {
            "average_optimal_set": [list(d) for d in self.average_optimal_set],
            "optimal_gain": np.asarray(self.optimal_gain).tolist(),
            "blackwell_candidates": [list(d) for d in self.blackwell_candidates],
            "blackwell_certification": "grid-certified",
            "beta_grid": list(self.beta_grid),
            "optimality_equation_solution": sol,
        }


def summarize(model, beta_grid=DEFAULT_BETA_GRID, tie=TAU_TIE):
    """Everything above in one summary; the optimality equation only when all chains are irreducible."""
    D_star, g_star = average_optimal_set(model, tie)
    blackwell = blackwell_optimal(model, beta_grid, tie)
    sol = None
    if all(communicating_classes(Q).irreducible for Q in model.Q):
        sol = solve_optimality_equation(model, tie)
    return OptimalitySummary(D_star, g_star, blackwell, tuple(beta_grid), sol)

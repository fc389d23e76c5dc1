"""Turnpike integers, the J-step coupling coefficient and sufficient conditions.

``K*`` values are always relative to the horizon ``Kmax`` actually run:
``empirical_K_star = K`` means the inclusion held for every recorded step
``k`` in ``[K, Kmax]``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._constants import PRODUCT_CAP, TAU_STOCH, TAU_TIE
from .chain import analyze_matrix, communicating_classes
from .core import (
    _check_beta,
    as_vector,
    bellman_general,
    discounted_fixed_point_mdp,
    sup_norm,
    value_iteration,
    value_iteration_mdp,
)
from .errors import EnumerationLimitError, ResolutionError, ValidationError
from .optimality import all_gains, average_optimal_set

UNKNOWN = "unknown"


# ---------------------------------------------------------------------------
# discounted branch
# ---------------------------------------------------------------------------

def discounted_delta(mdp, beta, tol=1e-11, tie=TAU_TIE):
    """Optimality gap ``Delta`` and per-state optimal action sets ``D*(s)``.

    ``W^inf`` is approximated to accuracy ``tol``; a computed gap then
    carries an error of at most ``(1 + beta) tol``, which is added to the
    tie band. Returns ``(Delta, action_sets)``; ``Delta`` is ``inf`` when
    every action is optimal everywhere.
    """
    _check_beta(beta, closed=False)
    W, _ = discounted_fixed_point_mdp(mdp, beta, tol, tie=tie)
    noise = (1.0 + beta) * tol
    q = mdp.rewards + beta * np.einsum("asj,j->sa", mdp.transitions, W)
    best = q.max(axis=1)
    gaps = best[:, None] - q
    optimal = gaps <= tie + noise
    sets = [tuple(int(a) for a in np.flatnonzero(optimal[s])) for s in range(mdp.M)]
    if optimal.all():
        return math.inf, sets
    delta = float(gaps[~optimal].min())
    if delta <= 2 * (tie + noise):
        raise ResolutionError(
            f"smallest gap {delta:.3e} is within numeric noise {tie + noise:.1e}; use a smaller tol"
        )
    return delta, sets


@dataclass
class DiscountedTurnpikeReport:
    beta: float
    Delta: float
    epsilon: float | None
    certified_K: int | None
    empirical_K_star: int | None
    optimal_action_sets: list
    Kmax: int
    inconclusive: bool
    inclusion: list = field(default_factory=list)

    def to_dict(self):
        return {
            "beta": self.beta,
            "Delta": None if math.isinf(self.Delta) else self.Delta,
            "Delta_infinite": math.isinf(self.Delta),
            "epsilon": self.epsilon,
            "certified_K": self.certified_K,
            "empirical_K_star": self.empirical_K_star,
            "optimal_action_sets": [list(a) for a in self.optimal_action_sets],
            "Kmax": self.Kmax,
            "inconclusive": self.inconclusive,
            "inclusion": list(self.inclusion),
        }


def _tail_start(flags):
    """Smallest K with ``flags[k]`` true for all ``k >= K``; None if the last flag is false."""
    if not flags or not flags[-1]:
        return None
    K = len(flags)
    while K > 0 and flags[K - 1]:
        K -= 1
    return K


def discounted_turnpike(mdp, beta, W0=None, Kmax=200, tol=1e-11, tie=TAU_TIE):
    """Certified and empirical turnpike integers for discounted value iteration.

    ``epsilon = Delta / 4``. ``certified_K`` is the first ``k`` with
    ``beta^k ||W^1 - W^0|| / (1 - beta) < epsilon``, which bounds
    ``||W^k - W^inf||``. ``inclusion[k]`` records whether every maximizer
    at step ``k`` lies in ``D*(s)``, for ``k = 0..Kmax``.
    """
    _check_beta(beta, closed=False)
    if Kmax < 1:
        raise ValidationError("Kmax must be at least 1")
    delta, sets = discounted_delta(mdp, beta, tol, tie)
    W0 = np.zeros(mdp.M) if W0 is None else as_vector(W0, mdp.M, "W0")
    trace = value_iteration_mdp(mdp, beta, W0, Kmax + 1, "standard", tie)
    inclusion = [
        all(set(step[s]) <= set(sets[s]) for s in range(mdp.M)) for step in trace.argmax_sets
    ]
    if math.isinf(delta):
        return DiscountedTurnpikeReport(beta, delta, None, 0, 0, sets, Kmax, False, inclusion)
    eps = delta / 4.0
    first = sup_norm(trace.W[1] - trace.W[0])
    if first / (1.0 - beta) < eps:
        cert = 0
    else:
        cert = int(math.floor(math.log(eps * (1.0 - beta) / first) / math.log(beta))) + 1
        while cert > 0 and beta ** (cert - 1) * first / (1.0 - beta) < eps:
            cert -= 1
        while beta ** cert * first / (1.0 - beta) >= eps:
            cert += 1
    emp = _tail_start(inclusion)
    return DiscountedTurnpikeReport(beta, delta, eps, cert, emp, sets, Kmax, emp is None, inclusion)


# ---------------------------------------------------------------------------
# J-step coupling
# ---------------------------------------------------------------------------

def _unique_matrices(mats):
    flat = np.ascontiguousarray(mats).reshape(mats.shape[0], -1)
    return np.unique(flat, axis=0).reshape(-1, mats.shape[1], mats.shape[2])


def product_set(model, J, cap=PRODUCT_CAP):
    """Distinct products ``Q(d_1) ... Q(d_J)`` over all decision sequences."""
    if J < 1:
        raise ValidationError("J must be at least 1")
    count = model.size ** J
    if count > cap:
        raise EnumerationLimitError(f"decision products |D|^{J}", count, cap)
    level = _unique_matrices(model.Q)
    for _ in range(J - 1):
        nxt = np.einsum("pij,qjk->pqik", level, model.Q).reshape(-1, model.M, model.M)
        level = _unique_matrices(nxt)
    return level


def gamma_J(model, J, cap=PRODUCT_CAP):
    """``1 - min`` row overlap over all pairs of length-``J`` products.

    Every pair of product rows is a candidate ``(s, u)`` pair, so the
    minimum over product pairs and state pairs reduces to a minimum over
    pairs of rows drawn from all products.
    """
    prods = product_set(model, J, cap)
    rows = np.unique(prods.reshape(-1, model.M), axis=0)
    eta = kernels.min_row_overlap(rows)
    return float(min(1.0, max(0.0, 1.0 - eta)))


def check_positive_column(model, J, cap=PRODUCT_CAP):
    """Is some column strictly positive in every length-``J`` product?

    Returns ``(True, l)`` with the first such column ``l``, or ``(False, None)``.
    """
    prods = product_set(model, J, cap)
    colmin = prods.min(axis=(0, 1))
    hits = np.flatnonzero(colmin > TAU_STOCH)
    if hits.size:
        return True, int(hits[0])
    return False, None


def check_ergodic_diagonal(model):
    """Every ``Q(d)`` ergodic with a strictly positive diagonal."""
    for Q in model.Q:
        if not np.all(np.diag(Q) > TAU_STOCH):
            return False
        if not communicating_classes(Q).ergodic:
            return False
    return True


@dataclass
class ConditionFlags:
    condition1: bool
    condition2: bool | str
    condition2_gamma: bool | str
    condition2_aperiodic: bool
    constant_gain: bool
    gamma_table: dict
    transient_witness: list

    def to_dict(self):
        return {
            "condition1": self.condition1,
            "condition2": self.condition2,
            "condition2_gamma": self.condition2_gamma,
            "condition2_aperiodic": self.condition2_aperiodic,
            "constant_gain": self.constant_gain,
            "gamma_table": {str(J): v for J, v in self.gamma_table.items()},
            "transient_witness": [[list(d), list(t)] for d, t in self.transient_witness],
        }


def gamma_table(model, Jmax, cap=PRODUCT_CAP):
    """``{J: gamma_J or 'unknown'}`` for ``J = 1..Jmax``."""
    out = {}
    for J in range(1, Jmax + 1):
        try:
            out[J] = gamma_J(model, J, cap)
        except EnumerationLimitError:
            out[J] = UNKNOWN
    return out


def gamma_increases(table, tol=1e-12):
    """Lengths ``J`` with ``gamma_{J+1} > gamma_J``; unknown entries are skipped.

    No monotonicity in ``J`` is assumed, so this is reported, never enforced.
    """
    return [J for J in sorted(table)
            if J + 1 in table and UNKNOWN not in (table[J], table[J + 1])
            and table[J + 1] > table[J] + tol]


def check_conditions_1_2(model, D_star, Jmax=4, cap=PRODUCT_CAP, g_star=None, tie=TAU_TIE):
    """Condition 1 (no transient states under any ``d*``) and Condition 2.

    Condition 2 holds if ``gamma_J < 1`` for some ``J <= Jmax`` or every
    ``Q(d*)`` is aperiodic. The gamma branch is ``'unknown'`` when every
    ``J`` either gave 1 or exceeded the cap and at least one exceeded it.
    """
    witness = []
    aperiodic = True
    for d in D_star:
        st = communicating_classes(model.matrix(d))
        if st.has_transient:
            witness.append((d, st.transient_states))
        aperiodic = aperiodic and st.aperiodic
    table = gamma_table(model, Jmax, cap)
    values = [v for v in table.values() if v != UNKNOWN]
    if any(v < 1.0 for v in values):
        gamma_ok = True
    elif len(values) < len(table):
        gamma_ok = UNKNOWN
    else:
        gamma_ok = False
    if gamma_ok is True or aperiodic:
        cond2 = True
    elif gamma_ok == UNKNOWN:
        cond2 = UNKNOWN
    else:
        cond2 = False
    if g_star is None and D_star:
        g_star = analyze_matrix(model.matrix(D_star[0]), model.reward(D_star[0])).gain
    constant = bool(g_star is not None and np.ptp(g_star) <= tie)
    return ConditionFlags(
        condition1=not witness,
        condition2=cond2,
        condition2_gamma=gamma_ok,
        condition2_aperiodic=aperiodic,
        constant_gain=constant,
        gamma_table=table,
        transient_witness=witness,
    )


# ---------------------------------------------------------------------------
# undiscounted branch
# ---------------------------------------------------------------------------

@dataclass
class UndiscountedTurnpikeReport:
    D_star: list
    g_star: np.ndarray
    epsilon_star: float
    span_history: list
    argmax_history: list
    in_D_star: list
    empirical_K_star: int | None
    certified_onset: int | None
    consistency_violations: list
    condition_flags: dict
    gamma_table: dict
    Kmax: int

    @property
    def verdict(self):
        return "turnpike certified" if self.certified_onset is not None else "turnpike not certified"

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "D_star": [list(d) for d in self.D_star],
            "g_star": np.asarray(self.g_star).tolist(),
            "epsilon_star": None if math.isinf(self.epsilon_star) else self.epsilon_star,
            "epsilon_star_infinite": math.isinf(self.epsilon_star),
            "Kmax": self.Kmax,
            "empirical_K_star": self.empirical_K_star,
            "certified_onset": self.certified_onset,
            "consistency_violations": list(self.consistency_violations),
            "span_history": list(self.span_history),
            "argmax_history": [[list(d) for d in ds] for ds in self.argmax_history],
            "argmax_in_D_star": list(self.in_D_star),
            "condition_flags": self.condition_flags,
            "gamma_table": {str(J): v for J, v in self.gamma_table.items()},
            "gamma_increases": gamma_increases(self.gamma_table),
        }

    def span_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "span", "argmax_in_Dstar"])
        for k, (sp, ok) in enumerate(zip(self.span_history, self.in_D_star)):
            w.writerow([k, repr(float(sp)), str(bool(ok)).lower()])
        return buf.getvalue()


def undiscounted_turnpike(model, W0=None, Kmax=200, Jmax=4, cap=PRODUCT_CAP, tie=TAU_TIE):
    """Run ``beta = 1`` value iteration and locate the turnpike.

    ``epsilon_star`` is the smallest sup-norm distance from ``g*`` to a
    non-optimal gain. Once ``sp(W^{k+1} - W^k) < epsilon_star`` from step
    ``k`` on, every maximizer must be average optimal; the first such
    ``k`` (holding through ``Kmax``) is the certified onset.
    """
    if Kmax < 1:
        raise ValidationError("Kmax must be at least 1")
    gains = all_gains(model)
    D_star, g_star = average_optimal_set(model, tie, gains)
    in_star = set(D_star)
    others = [k for k, d in enumerate(model.decisions) if d not in in_star]
    eps = min((float(np.abs(g_star - gains[k]).max()) for k in others), default=math.inf)

    trace = value_iteration(model, 1.0, W0, Kmax + 1, tie)
    spans = trace.span_diffs
    inside = [all(d in in_star for d in ds) for ds in trace.decision_sets]
    emp = 0 if math.isinf(eps) else _tail_start(inside)
    below = [sp < eps for sp in spans]
    onset = 0 if math.isinf(eps) else _tail_start(below)
    violations = [k for k, (b, ok) in enumerate(zip(below, inside)) if b and not ok]

    flags = check_conditions_1_2(model, D_star, Jmax, cap, g_star, tie)
    positive_col = UNKNOWN
    for J in range(1, Jmax + 1):
        try:
            ok, _ = check_positive_column(model, J, cap)
        except EnumerationLimitError:
            continue
        if ok:
            positive_col = True
            break
        positive_col = False
    cond = {
        "condition1": flags.condition1,
        "condition2_gamma": flags.condition2_gamma,
        "condition2_aperiodic": flags.condition2_aperiodic,
        "lemma4_column": positive_col,
        "corollary1": check_ergodic_diagonal(model),
        "constant_gain": flags.constant_gain,
    }
    return UndiscountedTurnpikeReport(
        D_star=D_star,
        g_star=g_star,
        epsilon_star=eps,
        span_history=spans,
        argmax_history=trace.decision_sets,
        in_D_star=inside,
        empirical_K_star=emp,
        certified_onset=onset,
        consistency_violations=violations,
        condition_flags=cond,
        gamma_table=flags.gamma_table,
        Kmax=Kmax,
    )


def apply_U_power(model, V, J, beta=1.0):
    """``U^J V`` for the general operator."""
    for _ in range(J):
        V, _ = bellman_general(model, beta, V)
    return V

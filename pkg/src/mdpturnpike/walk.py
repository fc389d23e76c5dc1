"""Controlled random walk on ``{-M, -M+1, ...}`` with absorbing negative states.

Action ``a`` moves the walk down by ``m`` with probability ``p_m(a)`` and
earns ``R^a``. The Bellman recursion is solved level by level, folded into
``M``-blocks, and analysed as a Gauss-Seidel decision model.

Levels can be computed in floating point (compiled kernel) or exactly
with :class:`fractions.Fraction`; the exact path is what makes long
alternating argmax patterns checkable, since the margins there shrink
geometrically below any floating-point tie band.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from ._constants import DECISION_CAP, PRODUCT_CAP, TAU_LIN, TAU_STOCH, TAU_TIE
from .chain import analyze_matrix, communicating_classes, support
from .core import (
    FactoredMDP,
    IterationTrace,
    bellman_gauss_seidel,
    build_decision_model,
    decisions_from_action_sets,
    span,
)
from .errors import ConsistencyError, ValidationError
from .optimality import all_gains, average_optimal_set
from .turnpike import _tail_start, check_conditions_1_2

STRICT_MARGIN = 1e-9  # float-mode slack for strict inequalities


def to_fraction(x):
    """Exact rational for ``x``; floats are read through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return Fraction(int(x))
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"not a number: {x!r}") from exc
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"non-finite value {x}")
    # numpy scalars repr as np.float64(...); go through a plain float first
    return Fraction(repr(x))


@dataclass(frozen=True)
class RandomWalkSpec:
    """Walk with step law ``p[a, m-1] = p_m(a)`` and rewards ``R[a]``."""

    p_exact: tuple
    R_exact: tuple
    names: tuple

    def __post_init__(self):
        p = tuple(tuple(to_fraction(x) for x in row) for row in self.p_exact)
        R = tuple(to_fraction(x) for x in self.R_exact)
        if not p or not p[0]:
            raise ValidationError("walk: need at least one action and M >= 1")
        M = len(p[0])
        if any(len(row) != M for row in p):
            raise ValidationError("walk: every action needs M step probabilities")
        if len(R) != len(p):
            raise ValidationError("walk: one reward per action required")
        names = tuple(self.names) if self.names else tuple(f"a{k + 1}" for k in range(len(p)))
        if len(names) != len(p):
            raise ValidationError("walk: one name per action required")
        for a, row in enumerate(p):
            if any(x < 0 for x in row):
                raise ValidationError(f"walk.actions[{a}].p: negative probability")
            if abs(float(sum(row)) - 1.0) > TAU_STOCH:
                raise ValidationError(f"walk.actions[{a}].p: probabilities sum to {float(sum(row))}, not 1")
        object.__setattr__(self, "p_exact", p)
        object.__setattr__(self, "R_exact", R)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_arrays(cls, p, R, names=None):
        return cls(tuple(tuple(row) for row in p), tuple(R), tuple(names or ()))

    @classmethod
    def from_dict(cls, data):
        if "M" not in data or "actions" not in data:
            raise ValidationError("walk: fields 'M' and 'actions' are required")
        M = data["M"]
        if not isinstance(M, int) or M < 1:
            raise ValidationError("walk.M: must be a positive integer")
        acts = data["actions"]
        if not isinstance(acts, list) or not acts:
            raise ValidationError("walk.actions: must be a nonempty list")
        p, R, names = [], [], []
        for k, act in enumerate(acts):
            for key in ("p", "reward"):
                if key not in act:
                    raise ValidationError(f"walk.actions[{k}]: missing field {key!r}")
            if len(act["p"]) != M:
                raise ValidationError(f"walk.actions[{k}].p: expected {M} entries, got {len(act['p'])}")
            p.append(act["p"])
            R.append(act["reward"])
            names.append(act.get("name", f"a{k + 1}"))
        return cls.from_arrays(p, R, names)

    def to_dict(self):
        return {
            "M": self.M,
            "actions": [
                {"name": n, "p": [float(x) for x in row], "reward": float(r)}
                for n, row, r in zip(self.names, self.p_exact, self.R_exact)
            ],
        }

    @property
    def M(self):
        return len(self.p_exact[0])

    @property
    def N(self):
        return len(self.p_exact)

    @property
    def exact(self):
        """True when every step law sums to exactly one as a rational."""
        return all(sum(row) == 1 for row in self.p_exact)

    @property
    def p(self):
        return np.array([[float(x) for x in row] for row in self.p_exact])

    @property
    def R(self):
        return np.array([float(r) for r in self.R_exact])


def cyclic_matrix(pa):
    """Stochastic matrix with ``P[s, j] = p_{M - ((j - s) mod M)}``."""
    pa = np.asarray(pa, dtype=np.float64)
    M = pa.size
    P = np.empty((M, M))
    for s in range(M):
        for j in range(M):
            P[s, j] = pa[M - ((j - s) % M) - 1]
    return P


@dataclass(frozen=True)
class WalkDerived:
    L: np.ndarray
    c_star: float
    A_star: tuple
    P_cyclic: np.ndarray
    rewards: np.ndarray  # (M, N), r_s(a) = R^a - c_star L^a
    mdp: FactoredMDP
    folded_model: object
    c_star_exact: Fraction | None = None

    @property
    def trivial_decisions(self):
        return decisions_from_action_sets([self.A_star] * self.mdp.M)


def _ratios(spec):
    if spec.exact:
        L = [sum((m + 1) * x for m, x in enumerate(row)) for row in spec.p_exact]
        ratios = [r / l for r, l in zip(spec.R_exact, L)]
        c = max(ratios)
        A = tuple(a for a, q in enumerate(ratios) if q == c)
        return [float(l) for l in L], c, A
    L = spec.p @ np.arange(1, spec.M + 1)
    ratios = spec.R / L
    c = float(ratios.max())
    A = tuple(int(a) for a in np.flatnonzero(ratios >= c - TAU_TIE))
    return list(L), c, A


def derive(spec, cap=DECISION_CAP):
    """Mean steps, ``c*``, ``A*``, cyclic matrices and the folded model."""
    L, c, A = _ratios(spec)
    L = np.array(L)
    c_f = float(c)
    P = np.stack([cyclic_matrix(row) for row in spec.p])
    if spec.exact:
        r_a = np.array([float(R - c * sum((m + 1) * x for m, x in enumerate(row)))
                        for R, row in zip(spec.R_exact, spec.p_exact)])
    else:
        r_a = spec.R - c_f * L
    r_a[list(A)] = 0.0
    rewards = np.tile(r_a, (spec.M, 1))
    mdp = FactoredMDP(rewards, P)
    model = build_decision_model(mdp, "gauss-seidel", cap)
    return WalkDerived(L, c_f, A, P, rewards, mdp, model, c if spec.exact else None)


@dataclass
class WalkSolution:
    """Levels ``i = -M..i_max``; ``V[i + M]`` is level ``i``."""

    M: int
    i_max: int
    V: np.ndarray
    W_tilde: np.ndarray
    argmax_actions: list
    A_star: tuple
    c_star: float
    conjecture_level: int | None
    argmax_equivalent: bool
    bounded: bool
    V_exact: list | None = None
    W_tilde_exact: list | None = None

    def value(self, i):
        return self.V_exact[i + self.M] if self.V_exact is not None else float(self.V[i + self.M])

    def level_table_csv(self, names):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "V", "W_tilde", "argmax"])
        for i in range(-self.M, self.i_max + 1):
            am = "" if i < 0 else "|".join(names[a] for a in self.argmax_actions[i])
            w.writerow([i, repr(float(self.V[i + self.M])), repr(float(self.W_tilde[i + self.M])), am])
        return buf.getvalue()

    def to_dict(self, names=None):
        lab = (lambda a: names[a]) if names else (lambda a: a)
        return {
            "M": self.M,
            "i_max": self.i_max,
            "exact": self.V_exact is not None,
            "c_star": self.c_star,
            "A_star": [lab(a) for a in self.A_star],
            "conjecture_level": self.conjecture_level if self.conjecture_level is not None
            else f"not found <= {self.i_max}",
            "argmax_equivalent": self.argmax_equivalent,
            "bounded": self.bounded,
            "V": self.V.tolist(),
            "W_tilde": self.W_tilde.tolist(),
            "argmax_actions": [[lab(a) for a in s] for s in self.argmax_actions],
        }


def _solve_exact(spec, i_max, c):
    M, N = spec.M, spec.N
    p, R = spec.p_exact, spec.R_exact
    L = [sum((m + 1) * x for m, x in enumerate(row)) for row in p]
    r23 = [R[a] - c * L[a] for a in range(N)]
    V = [Fraction(0)] * M
    Wt = [-c * i for i in range(-M, 0)]
    argmax, same = [], True
    for i in range(i_max + 1):
        vals = [R[a] + sum(p[a][m] * V[i + M - (m + 1)] for m in range(M)) for a in range(N)]
        best = max(vals)
        V.append(best)
        am = tuple(a for a in range(N) if vals[a] == best)
        vals23 = [r23[a] + sum(p[a][m] * Wt[i + M - (m + 1)] for m in range(M)) for a in range(N)]
        b23 = max(vals23)
        Wt.append(best - c * i)
        same = same and b23 == Wt[-1] and am == tuple(a for a in range(N) if vals23[a] == b23)
        argmax.append(am)
    return V, Wt, argmax, same


def solve_bellman(spec, i_max=None, exact=False, tie=TAU_TIE):
    """Solve the level recursion up to ``i_max`` (default ``50 M``).

    With ``exact=True`` all arithmetic is rational and ties are exact;
    this requires a spec whose step laws sum to exactly one.
    """
    M = spec.M
    if i_max is None:
        i_max = 50 * M
    if i_max < 0:
        raise ValidationError("i_max must be non-negative")
    L, c, A = _ratios(spec)
    levels = np.arange(-M, i_max + 1)
    V_exact = Wt_exact = None
    if exact:
        if not spec.exact:
            raise ValidationError("exact mode needs step laws that sum to exactly 1")
        V_exact, Wt_exact, argmax, same = _solve_exact(spec, i_max, c)
        V = np.array([float(v) for v in V_exact])
        Wt = np.array([float(w) for w in Wt_exact])
        bounded = all(abs(w) <= abs(c) * M for w in Wt_exact)
    else:
        p, R = spec.p, spec.R
        V, mask = kernels.walk_forward(p, R, i_max, tie)
        argmax = [tuple(int(a) for a in np.flatnonzero(row)) for row in mask]
        c_f = float(c)
        Wt = V - c_f * levels
        Wt[:M] = -c_f * levels[:M]
        # shifted recursion: same maximizers within the tie band
        r23 = R - c_f * np.array(L, dtype=np.float64)
        r23[list(A)] = 0.0
        win = np.lib.stride_tricks.sliding_window_view(Wt[:-1], M)[:, ::-1]  # win[i, m-1] = Wt(i - m)
        vals23 = r23[None, :] + win @ p.T
        best23 = vals23.max(axis=1)
        am23 = [tuple(int(a) for a in np.flatnonzero(v >= b - tie)) for v, b in zip(vals23, best23)]
        same = am23 == argmax and bool(np.all(np.abs(best23 - Wt[M:]) <= TAU_LIN * max(1.0, abs(c_f) * M)))
        bounded = bool(np.all(np.abs(Wt) <= abs(c_f) * M + TAU_LIN * max(1.0, float(np.abs(V).max()))))
    level = _tail_start([set(am) <= set(A) for am in argmax])
    # a tail shorter than one full block is not evidence of an onset
    if level is not None and len(argmax) - level < M:
        level = None
    return WalkSolution(M, i_max, V, Wt, argmax, A, float(c), level, same, bounded, V_exact, Wt_exact)


def fold(solution, derived, tol=TAU_LIN):
    """Re-index levels as ``W^k(s)`` with ``i = (k-1) M + s``.

    Every step ``W^k -> W^{k+1}`` is checked against the Gauss-Seidel
    operator of the folded model; maximizers come from the level
    recursion.
    """
    M = solution.M
    if solution.i_max < 2 * M:
        raise ValidationError(f"fold needs i_max >= 2M = {2 * M}, got {solution.i_max}")
    K = (solution.i_max + 1) // M
    Wt = solution.W_tilde
    # block k starts at level (k - 1) M, i.e. array offset k M
    W = [Wt[k * M:(k + 1) * M].copy() for k in range(K + 1)]
    asets, dsets, spans = [], [], []
    for k in range(K):
        nxt, _ = bellman_gauss_seidel(derived.mdp, 1.0, W[k])
        resid = float(np.abs(nxt - W[k + 1]).max())
        if resid > tol * max(1.0, float(np.abs(W[k + 1]).max())):
            raise ConsistencyError(f"folded step {k}: residual {resid:.3e} against the Gauss-Seidel recursion")
        step = [solution.argmax_actions[k * M + s] for s in range(M)]
        asets.append(step)
        dsets.append(decisions_from_action_sets(step))
        spans.append(span(W[k + 1] - W[k]))
    return IterationTrace(1.0, W, dsets, asets, spans)


def walk_certificate_check(spec, derived=None):
    """Sufficient step-law conditions for a certified walk: ``p_M(a) > 0`` for every
    action and a path between any two states that is feasible under every
    action (strong connectivity of the common support of the cyclic matrices).
    """
    derived = derived or derive(spec)
    pM_positive = bool(np.all(spec.p[:, -1] > TAU_STOCH))
    common = np.all([support(P) for P in derived.P_cyclic], axis=0)
    from scipy.sparse.csgraph import connected_components

    n, _ = connected_components(common, directed=True, connection="strong")
    reasons = []
    for a in np.flatnonzero(spec.p[:, -1] <= TAU_STOCH):
        reasons.append(f"p_{spec.M}({spec.names[a]}) = 0")
    if n != 1:
        reasons.append("no all-action path between some pair of states")
    return {
        "pM_positive": pM_positive,
        "common_paths": n == 1,
        "applicable": pM_positive and n == 1,
        "reasons": reasons,
    }


@dataclass
class ConjectureReport:
    verdict: str
    basis: str
    conjecture_level: int | None
    i_max: int
    A_star: tuple
    names: tuple
    trivial_decisions: list
    D_star: list
    D_star_only_trivial: bool
    trivial_in_D_star: bool
    conditions: dict
    walk_certificate: dict
    witness_levels: list

    def to_dict(self):
        nm = lambda a: self.names[a]
        return {
            "verdict": self.verdict,
            "basis": self.basis,
            "conjecture_level": self.conjecture_level if self.conjecture_level is not None
            else f"not found <= {self.i_max}",
            "i_max": self.i_max,
            "A_star": [nm(a) for a in self.A_star],
            "trivial_decisions": [list(d) for d in self.trivial_decisions],
            "D_star": [list(d) for d in self.D_star],
            "D_star_only_trivial": self.D_star_only_trivial,
            "trivial_in_D_star": self.trivial_in_D_star,
            "conditions": self.conditions,
            "walk_certificate": self.walk_certificate,
            "witness_levels": self.witness_levels,
        }


def check_conjecture(spec, i_max=None, Jmax=4, decision_cap=DECISION_CAP,
                     product_cap=PRODUCT_CAP, exact=None):
    """Combine the empirical level with the structural certificates.

    Verdicts: ``certified`` (all actions optimal, Conditions 1-2 on the
    folded model, or the step-law certificate), ``empirical only`` (a level was found without a
    certificate) or ``fails`` (maximizers outside ``A*`` up to ``i_max``).
    """
    exact = spec.exact if exact is None else exact
    derived = derive(spec, decision_cap)
    sol = solve_bellman(spec, i_max, exact=exact)
    model = derived.folded_model
    gains = all_gains(model)
    D_star, g_star = average_optimal_set(model, gains=gains)
    trivial = derived.trivial_decisions
    flags = check_conditions_1_2(model, D_star, Jmax, product_cap, g_star)
    cor2 = walk_certificate_check(spec, derived)
    only_trivial = set(D_star) <= set(trivial)
    if len(derived.A_star) == spec.N:
        verdict, basis = "certified", "all actions optimal"
    elif flags.condition1 and flags.condition2 is True:
        verdict, basis = "certified", "conditions 1 and 2"
    elif cor2["applicable"]:
        verdict, basis = "certified", "walk certificate hypotheses"
    elif sol.conjecture_level is not None:
        verdict, basis = "empirical only", "no certificate; level found up to i_max"
    else:
        verdict, basis = "fails", "maximizers outside A* at the last levels"
    witness = [i for i, am in enumerate(sol.argmax_actions) if not set(am) <= set(derived.A_star)]
    return ConjectureReport(
        verdict=verdict,
        basis=basis,
        conjecture_level=sol.conjecture_level,
        i_max=sol.i_max,
        A_star=derived.A_star,
        names=spec.names,
        trivial_decisions=trivial,
        D_star=D_star,
        D_star_only_trivial=only_trivial,
        trivial_in_D_star=set(trivial) <= set(D_star),
        conditions=flags.to_dict(),
        walk_certificate=cor2,
        witness_levels=witness[-10:],
    )


# ---------------------------------------------------------------------------
# the two-action counterexample
# ---------------------------------------------------------------------------

def counterexample_spec(epsilon, h):
    """Two actions, ``M = 3``: ``a1`` steps 2; ``a2`` steps 2 or 3 (prob ``epsilon``).

    Rewards are 2 and ``h`` with ``2 < h < 2 + epsilon``.
    """
    eps, hh = to_fraction(epsilon), to_fraction(h)
    if not 0 < eps < 1:
        raise ValidationError(f"epsilon must lie in (0, 1), got {float(eps)}")
    if not 2 < hh < 2 + eps:
        raise ValidationError(f"h must lie in (2, 2 + epsilon) = (2, {float(2 + eps)}), got {float(hh)}")
    return RandomWalkSpec(
        ((0, 1, 0), (0, 1 - eps, eps)),
        (2, hh),
        ("a1", "a2"),
    )


D_TRIVIAL = (0, 0, 0)
D_ODD = (1, 0, 1)
D_EVEN = (0, 1, 0)


@dataclass
class CounterexampleReport:
    epsilon: float
    h: float
    j_max: int
    exact: bool
    checks: dict
    failures: list
    z: list
    z_limit: float
    span_diffs: list
    span_limit: float
    D_star: list
    gamma_table: dict
    gamma_witness: list
    conditions: dict
    walk_certificate: dict
    alternation_ok: bool
    trace: IterationTrace = field(repr=False, default=None)

    @property
    def ok(self):
        return not self.failures

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "h": self.h,
            "j_max": self.j_max,
            "exact": self.exact,
            "ok": self.ok,
            "checks": self.checks,
            "failures": self.failures,
            "z": self.z,
            "z_limit": self.z_limit,
            "span_diffs": self.span_diffs,
            "span_limit": self.span_limit,
            "D_star": [list(d) for d in self.D_star],
            "gamma_table": {str(J): v for J, v in self.gamma_table.items()},
            "gamma_witness": self.gamma_witness,
            "conditions": self.conditions,
            "walk_certificate": self.walk_certificate,
            "alternation_ok": self.alternation_ok,
        }

    def z_table_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "z(2j+1)", "gap_to_limit"])
        for j, z in enumerate(self.z):
            w.writerow([j, repr(z), repr(self.z_limit - z)])
        return buf.getvalue()


def counterexample_5_3(epsilon=0.5, h=2.25, j_max=200, exact=True, Jmax=4):
    """Level-by-level verification of the counterexample to the conjecture.

    Checks the closed form at even levels, the recursion and the upper
    bound at odd levels, the unique average-optimal decision, the
    coupling witness and the failing conditions. Any failed check is
    listed in ``failures`` with the level and the values involved.
    """
    if j_max < 1:
        raise ValidationError("j_max must be at least 1")
    spec = counterexample_spec(epsilon, h)
    eps, hh = spec.p_exact[1][2], spec.R_exact[1]
    i_max = 2 * j_max + 1
    sol = solve_bellman(spec, i_max, exact=exact)
    num = (lambda x: x) if exact else float
    V = sol.value
    failures = []

    def expect(cond, what, **vals):
        if not cond:
            failures.append({"check": what, **{k: float(v) for k, v in vals.items()}})
        return cond

    e, hv = num(eps), num(hh)
    exactly = (lambda a, b: a == b) if exact else (lambda a, b: abs(a - b) <= 1e-12 * max(1.0, abs(b)))
    pre = [
        expect(exactly(V(0), hv), "V(0) = h", V=V(0)),
        expect(exactly(V(1), hv), "V(1) = h", V=V(1)),
        expect(exactly(V(2), 2 + hv), "V(2) = 2 + h", V=V(2)),
        expect(exactly(V(3), 2 * hv), "V(3) = 2h", V=V(3)),
    ]
    even_ok = odd_ok = bound_ok = argmax_ok = True
    for j in range(1, j_max + 1):
        i = 2 * j
        even_ok &= expect(exactly(V(i), i + hv), "V(2j) = 2j + h", i=i, V=V(i))
        argmax_ok &= expect(sol.argmax_actions[i] == (0,), "argmax {a1} at even level", i=i)
        bound = (2 * e * (j - 1) + (1 + e) * hv - 2) / e
        strict = V(2 * j - 1) < bound if exact else V(2 * j - 1) < bound + STRICT_MARGIN
        bound_ok &= expect(strict, "V(2j-1) < bound", i=2 * j - 1, V=V(2 * j - 1), bound=bound)
        rhs = (1 - e) * V(2 * j - 1) + (1 + e) * hv + 2 * e * (j - 1)
        ok = exactly(V(2 * j + 1), rhs) if exact else abs(V(2 * j + 1) - rhs) <= TAU_LIN * max(1.0, abs(rhs))
        odd_ok &= expect(ok, "odd-level recursion", i=2 * j + 1, V=V(2 * j + 1), rhs=rhs)
        if 2 * j + 1 >= 3:
            argmax_ok &= expect(sol.argmax_actions[2 * j + 1] == (1,), "argmax {a2} at odd level", i=2 * j + 1)

    z = [V(2 * j + 1) - (2 * j + 1) for j in range(j_max + 1)]
    z_lim = hv + (hv - 2) / e - 1
    z_inc = all(b > a for a, b in zip(z, z[1:]))
    z_below = all(x < z_lim for x in z) if exact else all(x < z_lim + STRICT_MARGIN for x in z)
    expect(z_inc or not exact, "z increasing")
    expect(z_below, "z below limit")

    derived = derive(spec)
    trace = fold(sol, derived)
    span_lim = 2 * (1 - (hv - 2) / e)
    alternation = all(
        trace.decision_sets[k] == [D_ODD if k % 2 else D_EVEN] for k in range(1, trace.K)
    )
    expect(alternation, "alternating maximizers d_o / d_e")

    model = derived.folded_model
    D_star, _ = average_optimal_set(model)
    expect(D_star == [D_TRIVIAL], "D* = {d*}")
    flags = check_conditions_1_2(model, D_star, Jmax)
    witness = []
    Qd = model.matrix(D_TRIVIAL)
    P = np.eye(3)
    for J in range(1, Jmax + 1):
        P = P @ Qd
        witness.append({"J": J, "eta_rows_1_2": float(np.minimum(P[1], P[2]).sum())})
    expect(all(w["eta_rows_1_2"] == 0.0 for w in witness), "gamma witness rows 1, 2 disjoint")
    expect(flags.condition1 is False, "condition 1 fails")
    expect(flags.condition2 is False, "condition 2 fails")
    cor2 = walk_certificate_check(spec, derived)
    expect(not cor2["applicable"], "walk certificate inapplicable")

    checks = {
        "preliminary_levels": all(pre),
        "even_closed_form": bool(even_ok),
        "odd_bound": bool(bound_ok),
        "odd_recursion": bool(odd_ok),
        "argmax_pattern": bool(argmax_ok),
        "z_increasing": bool(z_inc),
        "z_below_limit": bool(z_below),
        "alternation": bool(alternation),
        "D_star_trivial_only": D_star == [D_TRIVIAL],
        "condition1_fails": flags.condition1 is False,
        "condition2_fails": flags.condition2 is False,
        "walk_certificate_inapplicable": not cor2["applicable"],
    }
    return CounterexampleReport(
        epsilon=float(eps),
        h=float(hh),
        j_max=j_max,
        exact=exact,
        checks=checks,
        failures=failures,
        z=[float(x) for x in z],
        z_limit=float(z_lim),
        span_diffs=[float(s) for s in trace.span_diffs],
        span_limit=float(span_lim),
        D_star=D_star,
        gamma_table=flags.gamma_table,
        gamma_witness=witness,
        conditions=flags.to_dict(),
        walk_certificate=cor2,
        alternation_ok=alternation,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# switching strategies
# ---------------------------------------------------------------------------

def propagate_average(model, sequence, T_max):
    """Exact expected averages ``A_T = (1/T) E[sum_{t<=T} R_{S(t-1)}(d_t)]``.

    ``sequence`` is a function ``t -> decision`` (``t`` starts at 1).
    Returns ``(A, S)`` of shape ``(T_max, M)`` where row ``T - 1`` holds
    ``A_T`` and ``S_T = T A_T`` for every initial state.
    """
    M = model.M
    Pi = np.eye(M)
    acc = np.zeros(M)
    S = np.empty((T_max, M))
    for t in range(1, T_max + 1):
        k = model.index(sequence(t))
        acc = acc + Pi @ model.R[k]
        Pi = Pi @ model.Q[k]
        S[t - 1] = acc
    T = np.arange(1, T_max + 1)[:, None]
    return S / T, S


@dataclass
class ParrondoReport:
    epsilon: float
    h: float
    T_max: int
    T_min: int
    strategies: dict
    gains: dict
    stationary_negative: dict
    trivial_zero: bool

    @property
    def ok(self):
        return (
            self.trivial_zero
            and all(s["stable"] for s in self.strategies.values())
            and all(self.stationary_negative.values())
        )

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "h": self.h,
            "T_max": self.T_max,
            "T_min": self.T_min,
            "ok": self.ok,
            "strategies": {
                k: {kk: vv for kk, vv in v.items() if kk != "A"} for k, v in self.strategies.items()
            },
            "gains": {k: np.asarray(v).tolist() for k, v in self.gains.items()},
            "stationary_negative": self.stationary_negative,
            "trivial_zero": self.trivial_zero,
        }

    def averages_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.strategies)
        M = self.strategies[names[0]]["A"].shape[1]
        w.writerow(["T"] + [f"{n}_s{s}" for n in names for s in range(M)])
        for T in range(1, self.T_max + 1):
            row = [T]
            for n in names:
                row += [repr(float(x)) for x in self.strategies[n]["A"][T - 1]]
            w.writerow(row)
        return buf.getvalue()


def parrondo(epsilon=0.5, h=2.25, T_max=10_000, T_min=100):
    """Averages of the alternating strategies ``pi_1 = (d_e, d_o, ...)`` and
    ``pi_2 = (d_o, d_e, ...)`` against the stationary ``d_o`` and ``d_e``.

    ``C`` is the largest ``|S_T| = T |A_T|`` over ``T in [T_min, T_max]``;
    it counts as stable when the second half of the range does not
    exceed the first.
    """
    if T_max < 2 * T_min:
        raise ValidationError(f"T_max must be at least 2 T_min = {2 * T_min}")
    spec = counterexample_spec(epsilon, h)
    model = derive(spec).folded_model
    seqs = STRATEGIES
    mid = (T_min + T_max) // 2
    out = {}
    for name, seq in seqs.items():
        A, S = propagate_average(model, seq, T_max)
        absS = np.abs(S).max(axis=1)
        C1 = float(absS[T_min - 1:mid].max())
        C2 = float(absS[mid:].max())
        C = max(C1, C2)
        out[name] = {
            "A": A,
            "C": C,
            "C_first_half": C1,
            "C_second_half": C2,
            "stable": C2 <= C1 + 1e-9,
            "A_final": A[-1].tolist(),
            "bound_holds": bool(np.all(np.abs(A[T_min - 1:]) <= C / np.arange(T_min, T_max + 1)[:, None] + 1e-15)),
        }
    gains = {
        "d_o": analyze_matrix(model.matrix(D_ODD), model.reward(D_ODD)).gain,
        "d_e": analyze_matrix(model.matrix(D_EVEN), model.reward(D_EVEN)).gain,
    }
    negative = {k: bool(np.any(g < -TAU_TIE)) for k, g in gains.items()}
    trivial_zero = bool(np.all(out["trivial"]["A"] == 0.0))
    return ParrondoReport(float(to_fraction(epsilon)), float(to_fraction(h)), T_max, T_min,
                          out, gains, negative, trivial_zero)


def walk_structure(derived):
    """Chain structure of every folded decision, in model order."""
    return [communicating_classes(Q) for Q in derived.folded_model.Q]


def monte_carlo_average(model, sequence, T, n_paths, rng, s0):
    """Sampled ``A_T`` from state ``s0``: mean reward over ``n_paths`` trajectories."""
    states = np.full(n_paths, s0, dtype=np.int64)
    total = np.zeros(n_paths)
    for t in range(1, T + 1):
        k = model.index(sequence(t))
        total += model.R[k][states]
        cum = np.cumsum(model.Q[k][states], axis=1)
        u = rng.random(n_paths)[:, None]
        states = np.minimum((u >= cum).sum(axis=1), model.M - 1)
    return float(total.mean() / T)


STRATEGIES = {
    "pi_1": lambda t: D_EVEN if t % 2 else D_ODD,
    "pi_2": lambda t: D_ODD if t % 2 else D_EVEN,
    "trivial": lambda t: D_TRIVIAL,
}

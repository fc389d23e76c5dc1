"""Pure numpy implementations of the hot loops.

Signatures and results match ``_ckernels`` exactly; this module is used
when the extension is not built or ``MDPTURNPIKE_PURE_PYTHON=1``.
"""
import numpy as np


def walk_forward(p, R, i_max, tie):
    """Forward recursion ``V(i) = max_a R[a] + sum_m p[a, m-1] V(i-m)``.

    Returns ``(V, mask)`` where ``V[i + M]`` holds level ``i`` (levels
    ``-M..-1`` are zero) and ``mask[i, a]`` flags actions within ``tie``
    of the maximum at level ``i``.
    """
    p = np.ascontiguousarray(p, dtype=np.float64)
    R = np.ascontiguousarray(R, dtype=np.float64)
    N, M = p.shape
    V = np.zeros(M + i_max + 1)
    mask = np.zeros((i_max + 1, N), dtype=np.uint8)
    # columns reversed so that p_rev @ V[i:i+M] pairs p_m with V(i-m)
    p_rev = p[:, ::-1].copy()
    for i in range(i_max + 1):
        vals = R + p_rev @ V[i:i + M]
        best = vals.max()
        V[i + M] = best
        mask[i] = vals >= best - tie
    return V, mask


def gs_sweep(r, P, beta, W, tie):
    """One Gauss-Seidel sweep over states ``0..M-1`` in order.

    ``r`` is ``(M, N)``, ``P`` is ``(N, M, M)``. Components already
    updated in this sweep are used for ``j < s``.
    """
    r = np.asarray(r, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    M, N = r.shape
    Wn = np.array(W, dtype=np.float64)
    mask = np.zeros((M, N), dtype=np.uint8)
    for s in range(M):
        vals = r[s] + beta * (P[:, s, :] @ Wn)
        best = vals.max()
        Wn[s] = best
        mask[s] = vals >= best - tie
    return Wn, mask


def min_row_overlap(rows, block=512):
    """Minimum of ``sum_l min(x_l, y_l)`` over all pairs of rows.

    A row paired with itself is included, so the result is at most the
    smallest row sum.
    """
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    n = rows.shape[0]
    best = float(rows.sum(axis=1).min()) if n else 1.0
    for start in range(0, n, block):
        chunk = rows[start:start + block]
        # pairs (i, j) with j >= i only
        rest = rows[start:]
        ov = np.minimum(chunk[:, None, :], rest[None, :, :]).sum(axis=2)
        best = min(best, float(ov.min()))
        if best <= 0.0:
            return 0.0
    return best

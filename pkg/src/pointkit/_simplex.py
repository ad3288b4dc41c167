"""Dense two-phase tableau simplex for small linear programs.

Solves ``max c.x  s.t.  A x <= b, x >= 0`` with Bland's rule, which rules
out cycling on degenerate vertices. Meant for a few dozen constraints.
"""

import numpy as np

EPS = 1e-11


class LPInfeasible(Exception):
    pass


class LPUnbounded(Exception):
    pass


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _iterate(T, basis, ncols):
    """Minimize the objective held in the last row over columns ``[0, ncols)``."""
    m = T.shape[0] - 1
    for _ in range(50_000):
        cost = T[-1, :ncols]
        enter = np.flatnonzero(cost < -EPS)
        if enter.size == 0:
            return
        col = int(enter[0])
        colv = T[:m, col]
        pos = np.flatnonzero(colv > EPS)
        if pos.size == 0:
            raise LPUnbounded()
        ratios = T[pos, -1] / colv[pos]
        best = ratios.min()
        tied = pos[ratios <= best + EPS * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise RuntimeError("simplex iteration limit reached")


def linprog_max(c, A, b):
    """Return ``(x, value)`` maximizing ``c.x`` subject to ``A x <= b, x >= 0``.

    Raises :class:`LPInfeasible` or :class:`LPUnbounded`.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    neg = b < 0
    n_art = int(neg.sum())
    width = n + m + n_art + 1
    T = np.zeros((m + 1, width))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[np.flatnonzero(neg)] *= -1.0
    basis = [0] * m
    art = 0
    for i in range(m):
        if neg[i]:
            col = n + m + art
            T[i, col] = 1.0
            basis[i] = col
            art += 1
        else:
            basis[i] = n + i

    if n_art:
        T[-1, n + m:n + m + n_art] = 1.0
        for i in range(m):
            if neg[i]:
                T[-1] -= T[i]
        _iterate(T, basis, n + m + n_art)
        if -T[-1, -1] > 1e-9 * max(1.0, np.abs(b).max()):
            raise LPInfeasible()
        # drive zero-level artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n + m:
                cand = np.flatnonzero(np.abs(T[i, :n + m]) > EPS)
                if cand.size:
                    _pivot(T, i, int(cand[0]))
                    basis[i] = int(cand[0])
                else:
                    keep[i] = False
        rows = np.flatnonzero(keep)
        reduced = np.zeros((len(rows) + 1, n + m + 1))
        reduced[:-1, :n + m] = T[rows, :n + m]
        reduced[:-1, -1] = T[rows, -1]
        T = reduced
        basis = [basis[i] for i in rows]
    T[-1, :] = 0.0
    T[-1, :n] = -c
    for i, bcol in enumerate(basis):
        if T[-1, bcol] != 0.0:
            T[-1] -= T[-1, bcol] * T[i]
    _iterate(T, basis, n + m)
    x = np.zeros(n + m)
    for i, bcol in enumerate(basis):
        x[bcol] = T[i, -1]
    return x[:n], float(c @ x[:n])

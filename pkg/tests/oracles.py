"""Brute-force oracles that share no code with the library."""
from itertools import combinations

import numpy as np


def mul(table, a, b):
    return table[a][b]


def subgroups_by_subset_closure(table):
    """Every subset containing the identity and closed under multiplication."""
    n = len(table)
    e = next(i for i in range(n) if all(table[i][j] == j for j in range(n)))
    others = [g for g in range(n) if g != e]
    subs = []
    for r in range(len(others) + 1):
        for extra in combinations(others, r):
            s = frozenset((e,) + extra)
            if all(table[a][b] in s for a in s for b in s):
                subs.append(s)
    return subs, e


def inverse(table, e, a):
    return next(b for b in range(len(table)) if table[a][b] == e)


def conjugate(table, e, g, s):
    gi = inverse(table, e, g)
    return frozenset(table[table[g][h]][gi] for h in s)


def conjugacy_classes_of_subgroups(table):
    subs, e = subgroups_by_subset_closure(table)
    classes = []
    seen = set()
    for s in subs:
        if s in seen:
            continue
        cls = {conjugate(table, e, g, s) for g in range(len(table))}
        seen |= cls
        classes.append(frozenset(cls))
    return classes, e


def left_cosets(table, L):
    return {frozenset(table[g][l] for l in L) for g in range(len(table))}


def marks(table, K, L):
    """#{gL : k gL = gL for all k in K} by direct coset counting."""
    return sum(1 for c in left_cosets(table, L)
               if all(frozenset(table[k][x] for x in c) == c for k in K))


def ring_rotating_wave_states():
    """Rotating waves of ring_z3 (alpha=1, w=1, c=0.1) with period in (4, 8).

    Frozen from an algebraic solve of (alpha - |A_j|^2 - c + i(w - W)) A_j
    + c A_{j+1} = 0 by multistart Newton (20000 starts); states are
    (Re z_0, Im z_0, Re z_1, ...) at t = 0, with the period 2pi/W.
    """
    return [
        (5.78241360, [0.92195445, 0.0, -0.46097722, 0.79843597, -0.46097722, -0.79843597]),
        (6.28318531, [1.0, 0.0, 1.0, 0.0, 1.0, 0.0]),
        (6.28318531, [0.8948791, 0.0, -0.88764301, 0.0, 0.99495799, 0.0]),
        (6.28318531, [-0.11238209, 0.0, 0.99724522, 0.0, 0.94237711, 0.0]),
        (6.28318531, [-0.10683743, 0.0, 0.94934221, 0.0, 0.01187269, 0.0]),
        (6.28318531, [0.10004759, 0.0, -0.89041401, 0.0, 0.9541934, 0.0]),
        (6.87891699, [0.92195445, 0.0, -0.46097722, -0.79843597, -0.46097722, 0.79843597]),
    ]


def radial_multiplier(drdt_prime, r, period):
    """Floquet multiplier of a circle r = const from the radial linearization."""
    return float(np.exp(drdt_prime(r) * period))


def _ring_field(x, alpha=1.0, w=1.0, c=0.1):
    z = x[0::2] + 1j * x[1::2]
    dz = (alpha - abs(z) ** 2 + 1j * w) * z + c * (np.roll(z, -1) - z)
    out = np.empty_like(x)
    out[0::2], out[1::2] = dz.real, dz.imag
    return out


def ring_wave_stratum_signs(x, T, h=1e-6):
    """Signs of det(I - DP) for a rotating wave, from the co-rotating linearization.

    In the frame rotating at W = 2pi/T the wave is an equilibrium with
    linearization L = Df(x) - W R (R the block rotation generator), so the
    monodromy is exp(T L) and its multipliers are exp(T eig(L)); the zero
    eigenvalue (phase direction) is dropped.  Returns (sign on the full
    space, sign on the synchronous subspace or None if x is not synchronous).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    W = 2 * np.pi / T
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (_ring_field(x + e) - _ring_field(x - e)) / (2 * h)
    R = np.kron(np.eye(n // 2), np.array([[0.0, -1.0], [1.0, 0.0]]))
    L = J - W * R

    def sign(M):
        lam = np.linalg.eigvals(M)
        lam = np.delete(lam, np.argmin(np.abs(lam)))
        return int(np.sign(np.prod(1 - np.exp(T * lam)).real))

    synchronous = np.allclose(x[0::2], x[0]) and np.allclose(x[1::2], x[1])
    sync_sign = None
    if synchronous:
        Q = np.kron(np.ones((n // 2, 1)), np.eye(2)) / np.sqrt(n // 2)
        sync_sign = sign(Q.T @ L @ Q)
    return sign(L), sync_sign

"""Independent reference implementations used as test oracles.

Nothing here imports the package's numerical code; each routine is the
most literal formula available so that agreement means something.
"""

import itertools
import math

import numpy as np


def lexicographic_permutations(L):
    """All permutations of 1..L in lexicographic order (rank = list index)."""
    return list(itertools.permutations(range(1, L + 1)))


def alamouti_block(s1, s2):
    return np.array([[s1, s2], [-np.conj(s2), np.conj(s1)]]) / math.sqrt(2.0)


def literal_codeword(symbols, sigma):
    """``blkdiag(G_1..G_L) @ (P kron I_2)`` built entry by entry."""
    L = len(sigma)
    T = 2 * L
    S = np.zeros((T, T), dtype=complex)
    for l in range(L):
        S[2 * l:2 * l + 2, 2 * l:2 * l + 2] = alamouti_block(symbols[2 * l], symbols[2 * l + 1])
    P = np.zeros((L, L))
    for l, v in enumerate(sigma):
        P[l, v - 1] = 1.0
    return S @ np.kron(P, np.eye(2))


def brute_force_ml(y, z, matrices):
    """Index of the codeword minimising ``||y - Q z||^2`` (first on ties)."""
    metric = np.linalg.norm(y - np.asarray(matrices) @ z, axis=1) ** 2
    return int(np.argmin(metric))


def rayleigh_pep_closed_form(lam, N0):
    """``(1/pi) int_0^{pi/2} (1 + lam / (8 N0 sin^2))^-1 dtheta`` in closed form."""
    c = lam / (8.0 * N0)
    return 0.5 * (1.0 - math.sqrt(c / (1.0 + c)))


def scalar_mgf_closed_form(s, mu, var, a):
    """``E exp(-s a |g|^2)`` for ``g ~ CN(mu, var)``."""
    d = 1.0 + s * a * var
    return math.exp(-s * a * abs(mu) ** 2 / d) / d


def euclidean(p, q):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(p, q)))

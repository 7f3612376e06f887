"""Inner loops of the link simulation.

Two implementations of each kernel live here: a numba ``@njit`` version
and a vectorised numpy version.  ``DSMPA_BACKEND=numpy`` (or a missing
numba install) selects the numpy path at import time; the kernels are
otherwise interchangeable and are cross-checked in the test suite.

Kernel conventions
------------------
``perms``    (P, L) int64, 0-based; subblock ``l`` of pattern ``u`` sits on
             position ``perms[u, l]``.
``const``    (M,) complex128 PSK points in natural order.
``alamouti`` True for Alamouti subblocks, False for ``diag(s1, s2)``.
"""

import os

import numpy as np

INV_SQRT2 = 1.0 / np.sqrt(2.0)

_requested = os.environ.get("DSMPA_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"DSMPA_BACKEND must be 'numba' or 'numpy', not {_requested!r}")

try:
    if _requested == "numpy":
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference path
# ---------------------------------------------------------------------------

def _subblock_coeffs_np(y, z, alamouti):
    """Per-symbol correlation coefficients, shape (..., T)."""
    y1, y2 = y[..., 0::2], y[..., 1::2]
    z1, z2 = z[..., 0::2], z[..., 1::2]
    c = np.empty(np.broadcast_shapes(y.shape, z.shape), dtype=np.complex128)
    if alamouti:
        c[..., 0::2] = INV_SQRT2 * (y1.conj() * z1 + y2 * z2.conj())
        c[..., 1::2] = INV_SQRT2 * (y1.conj() * z2 - y2 * z1.conj())
    else:
        c[..., 0::2] = y1.conj() * z1
        c[..., 1::2] = y2.conj() * z2
    return c


def structured_ml_numpy(y, z, perms, const, alamouti):
    """ML decision ``argmax_Q Re(y^H Q z)`` for a batch of observations.

    Returns natural symbol indices ``(N, T)``, pattern ranks ``(N,)`` and
    the maximised correlation ``(N,)``.
    """
    N, T = y.shape
    P, L = perms.shape
    # permuted reference for every pattern: (N, P, T)
    pos = (2 * perms[:, :, None] + np.arange(2)).reshape(P, T)
    zp = z[:, pos]
    c = _subblock_coeffs_np(y[:, None, :], zp, alamouti)
    scores = (c[..., None] * const).real          # (N, P, T, M)
    sym = np.argmax(scores, axis=-1)
    best = np.take_along_axis(scores, sym[..., None], -1)[..., 0].sum(-1)
    u = np.argmax(best, axis=1)
    rows = np.arange(N)
    return sym[rows, u], u, best[rows, u]


def differential_signals_numpy(h, sym, pat, perms, const, alamouti):
    """Noiseless signals ``x_k = Q_k x_{k-1}``, ``x_0 = h``.

    ``h`` (F, T); ``sym`` (F, K, T) natural symbol indices; ``pat`` (F, K)
    pattern ranks.  Returns (F, K+1, T).
    """
    F, K, T = sym.shape
    out = np.empty((F, K + 1, T), dtype=np.complex128)
    out[:, 0] = h
    s = const[sym]
    rows = np.arange(F)[:, None]
    for k in range(K):
        P = perms[pat[:, k]]                      # (F, L)
        pos = (2 * P[:, :, None] + np.arange(2)).reshape(F, T)
        w = out[:, k][rows, pos]
        w1, w2 = w[:, 0::2], w[:, 1::2]
        s1, s2 = s[:, k, 0::2], s[:, k, 1::2]
        if alamouti:
            out[:, k + 1, 0::2] = INV_SQRT2 * (s1 * w1 + s2 * w2)
            out[:, k + 1, 1::2] = INV_SQRT2 * (-s2.conj() * w1 + s1.conj() * w2)
        else:
            out[:, k + 1, 0::2] = s1 * w1
            out[:, k + 1, 1::2] = s2 * w2
    return out


def coherent_signals_numpy(h, sym, pat, perms, const, alamouti):
    """``Q_k h`` for every block, shape (F, K, T)."""
    F, K, T = sym.shape
    s = const[sym]
    P = perms[pat]                                # (F, K, L)
    pos = (2 * P[..., None] + np.arange(2)).reshape(F, K, T)
    w = np.take_along_axis(np.broadcast_to(h[:, None, :], (F, K, T)), pos, -1)
    out = np.empty((F, K, T), dtype=np.complex128)
    w1, w2 = w[..., 0::2], w[..., 1::2]
    s1, s2 = s[..., 0::2], s[..., 1::2]
    if alamouti:
        out[..., 0::2] = INV_SQRT2 * (s1 * w1 + s2 * w2)
        out[..., 1::2] = INV_SQRT2 * (-s2.conj() * w1 + s1.conj() * w2)
    else:
        out[..., 0::2] = s1 * w1
        out[..., 1::2] = s2 * w2
    return out


def craig_spectral_numpy(lam, c2, xis, weights):
    """Craig-form PEP for each spectrum row and each noise level.

    ``lam``/``c2`` (R, T): eigenvalues and squared mean projections;
    ``xis`` (S, Q): MGF arguments per noise level and node; ``weights`` (Q,).
    Returns (S, R).
    """
    out = np.zeros((xis.shape[0], lam.shape[0]))
    for n in range(xis.shape[0]):
        for xi, w in zip(xis[n], weights):
            d = 1.0 + xi * lam
            out[n] += w * np.exp(-xi * np.sum(lam * c2 / d, axis=1)) / np.prod(d, axis=1)
    return out / np.pi


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _apply_codeword(s, perm, w_in, w_out, alamouti):
        L = perm.shape[0]
        for l in range(L):
            a = w_in[2 * perm[l]]
            b = w_in[2 * perm[l] + 1]
            s1 = s[2 * l]
            s2 = s[2 * l + 1]
            if alamouti:
                w_out[2 * l] = INV_SQRT2 * (s1 * a + s2 * b)
                w_out[2 * l + 1] = INV_SQRT2 * (-s2.conjugate() * a + s1.conjugate() * b)
            else:
                w_out[2 * l] = s1 * a
                w_out[2 * l + 1] = s2 * b

    @njit(cache=True, nogil=True)
    def structured_ml_numba(y, z, perms, const, alamouti):
        N, T = y.shape
        P, L = perms.shape
        M = const.shape[0]
        sym_out = np.empty((N, T), dtype=np.int64)
        pat_out = np.empty(N, dtype=np.int64)
        val_out = np.empty(N)
        cur = np.empty(T, dtype=np.int64)
        c = np.empty(T, dtype=np.complex128)
        for n in range(N):
            best_total = -np.inf
            for u in range(P):
                for l in range(L):
                    y1 = y[n, 2 * l]
                    y2 = y[n, 2 * l + 1]
                    z1 = z[n, 2 * perms[u, l]]
                    z2 = z[n, 2 * perms[u, l] + 1]
                    if alamouti:
                        c[2 * l] = INV_SQRT2 * (y1.conjugate() * z1 + y2 * z2.conjugate())
                        c[2 * l + 1] = INV_SQRT2 * (y1.conjugate() * z2 - y2 * z1.conjugate())
                    else:
                        c[2 * l] = y1.conjugate() * z1
                        c[2 * l + 1] = y2.conjugate() * z2
                total = 0.0
                for t in range(T):
                    bm = 0
                    bv = (c[t] * const[0]).real
                    for m in range(1, M):
                        v = (c[t] * const[m]).real
                        if v > bv:
                            bv = v
                            bm = m
                    cur[t] = bm
                    total += bv
                if total > best_total:
                    best_total = total
                    pat_out[n] = u
                    for t in range(T):
                        sym_out[n, t] = cur[t]
            val_out[n] = best_total
        return sym_out, pat_out, val_out

    @njit(cache=True, nogil=True)
    def differential_signals_numba(h, sym, pat, perms, const, alamouti):
        F, K, T = sym.shape
        out = np.empty((F, K + 1, T), dtype=np.complex128)
        s = np.empty(T, dtype=np.complex128)
        for f in range(F):
            for t in range(T):
                out[f, 0, t] = h[f, t]
            for k in range(K):
                for t in range(T):
                    s[t] = const[sym[f, k, t]]
                _apply_codeword(s, perms[pat[f, k]], out[f, k], out[f, k + 1], alamouti)
        return out

    @njit(cache=True, nogil=True)
    def coherent_signals_numba(h, sym, pat, perms, const, alamouti):
        F, K, T = sym.shape
        out = np.empty((F, K, T), dtype=np.complex128)
        s = np.empty(T, dtype=np.complex128)
        for f in range(F):
            for k in range(K):
                for t in range(T):
                    s[t] = const[sym[f, k, t]]
                _apply_codeword(s, perms[pat[f, k]], h[f], out[f, k], alamouti)
        return out

    @njit(cache=True, nogil=True)
    def craig_spectral_numba(lam, c2, xis, weights):
        R, T = lam.shape
        S, Q = xis.shape
        out = np.zeros((S, R))
        for r in range(R):
            for n in range(S):
                acc = 0.0
                for q in range(Q):
                    xi = xis[n, q]
                    prod = 1.0
                    e = 0.0
                    for t in range(T):
                        d = 1.0 + xi * lam[r, t]
                        prod *= d
                        e += lam[r, t] * c2[r, t] / d
                    acc += weights[q] * np.exp(-xi * e) / prod
                out[n, r] = acc / np.pi
        return out

    structured_ml = structured_ml_numba
    differential_signals = differential_signals_numba
    coherent_signals = coherent_signals_numba
    craig_spectral = craig_spectral_numba
else:
    structured_ml = structured_ml_numpy
    differential_signals = differential_signals_numpy
    coherent_signals = coherent_signals_numpy
    craig_spectral = craig_spectral_numpy


def get_craig_kernel(backend=None):
    backend = backend or BACKEND
    if backend == "numpy":
        return craig_spectral_numpy
    if backend == "numba" and HAVE_NUMBA:
        return craig_spectral_numba
    raise ValueError(f"backend {backend!r} unavailable")


def get_kernels(backend=None):
    """Kernel triple ``(structured_ml, differential_signals, coherent_signals)``."""
    backend = backend or BACKEND
    if backend == "numpy":
        return structured_ml_numpy, differential_signals_numpy, coherent_signals_numpy
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return structured_ml_numba, differential_signals_numba, coherent_signals_numba
    raise ValueError(f"unknown backend {backend!r}")

"""Semi-analytical BER bound and diversity checks.

The pairwise error probability uses the high-SNR model in which the
previous observation is replaced by the noiseless ``g = X_{k-1} h``::

    P(Q_i -> Q_j | g) = Qfunc(sqrt(g^H A_ij g / (4 N0))),  A_ij = D^H D,  D = Q_i - Q_j

Averaging over ``g ~ CN(X mu_h, X Sigma_h X^H)`` with Craig's form of the
Q-function gives a one-dimensional integral of the quadratic-form MGF over
``theta in (0, pi/2)`` with ``s = 1 / (8 N0 sin^2 theta)``.  The outer
average over ``X_{k-1}`` is a sample mean over random codeword products.

Two evaluation routes are kept apart on purpose.  :func:`conditional_mgf`
and :func:`conditional_pep` factorise ``I + s Sigma_g A`` directly (LU);
:func:`ber_union_bound` diagonalises ``Sigma^(1/2) A Sigma^(1/2)`` once per
(Gram, state) pair and reuses the spectrum for every node and SNR.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from dsmpa import _kernels
from dsmpa.channel import ChannelStats
from dsmpa.codebook import Codebook, Codeword
from dsmpa.errors import ConfigurationError, DomainError, NumericalError

__all__ = [
    "BoundConfig",
    "PairGram",
    "numerical_rank",
    "difference_gram",
    "craig_nodes",
    "conditional_mgf",
    "conditional_pep",
    "sample_past_state",
    "sample_past_states",
    "average_pep",
    "ber_union_bound",
    "bound_anchors",
    "pair_diagnostics",
    "min_rank_difference",
    "estimate_diversity_slope",
    "RANK_RTOL",
]

RANK_RTOL = 1e-9
# codebooks up to this size are bounded over every pair
EXHAUSTIVE_MAX_CODEWORDS = 4096
# ordered pairs covered by the sampled anchors of larger codebooks
DEFAULT_PAIR_BUDGET = 200_000


@dataclass(frozen=True)
class BoundConfig:
    """Numerical settings of the union bound.

    ``pair_subsample`` only applies to codebooks too large for the
    exhaustive pair sum.  It is a budget of ordered pairs: that many divided
    by ``n - 1`` anchor codewords are drawn, each paired with every other
    codeword.  ``None`` means 200 000.
    """

    quad_nodes: int = 64
    num_past_states: int = 200
    past_depth: int = 8
    pair_subsample: int | None = None

    def __post_init__(self):
        if self.quad_nodes < 8:
            raise ConfigurationError("quad_nodes must be >= 8")
        if self.num_past_states < 1:
            raise ConfigurationError("num_past_states must be >= 1")
        if self.past_depth < 0:
            raise ConfigurationError("past_depth must be >= 0")
        if self.pair_subsample is not None and self.pair_subsample < 1:
            raise ConfigurationError("pair_subsample must be positive")


@dataclass(frozen=True, eq=False)
class PairGram:
    delta: np.ndarray
    gram: np.ndarray
    rank: int


def _mat(q):
    return q.matrix if isinstance(q, Codeword) else np.asarray(q, dtype=np.complex128)


def numerical_rank(M, rtol: float = RANK_RTOL) -> int:
    sv = np.linalg.svd(np.asarray(M), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def difference_gram(Q_i, Q_j) -> PairGram:
    Qi, Qj = _mat(Q_i), _mat(Q_j)
    if Qi.shape != Qj.shape:
        raise ConfigurationError(f"shape mismatch {Qi.shape} vs {Qj.shape}")
    delta = Qi - Qj
    gram = delta.conj().T @ delta
    return PairGram(delta, gram, numerical_rank(delta))


@lru_cache(maxsize=16)
def craig_nodes(n: int):
    """Gauss-Legendre nodes and weights on ``(0, pi/2)``."""
    x, w = np.polynomial.legendre.leggauss(n)
    theta = np.pi / 4 * (x + 1.0)
    weights = np.pi / 4 * w
    theta.setflags(write=False)
    weights.setflags(write=False)
    return theta, weights


# ---------------------------------------------------------------------------
# direct route
# ---------------------------------------------------------------------------

def _gram(A):
    return A.gram if isinstance(A, PairGram) else np.asarray(A, dtype=np.complex128)


def conditional_mgf(s: float, mu_g, Sigma_g, A) -> float:
    """``E[exp(-s g^H A g)]`` for ``g ~ CN(mu_g, Sigma_g)``.

    Evaluated from an LU factorisation of ``I + s Sigma_g A``.
    """
    A = _gram(A)
    mu_g = np.asarray(mu_g, dtype=np.complex128).ravel()
    Sigma_g = np.atleast_2d(np.asarray(Sigma_g, dtype=np.complex128))
    if s == 0:
        return 1.0
    T = mu_g.size
    W = np.eye(T) + s * (Sigma_g @ A)
    with warnings.catch_warnings():
        # singular pivots are detected and reported below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(W, check_finite=False)
    diag = np.diag(lu)
    if np.any(np.abs(diag) <= np.finfo(float).eps * np.max(np.abs(diag)) * T):
        cond = np.linalg.cond(W)
        raise NumericalError(f"I + s*Sigma*A is singular at s={s:g} (condition ~{cond:.3g})")
    sign = np.prod(np.where(piv != np.arange(T), -1.0, 1.0))
    det = sign * np.prod(diag)
    quad = mu_g.conj() @ (A @ scipy.linalg.lu_solve((lu, piv), mu_g, check_finite=False))
    return float(np.exp(-s * quad.real) / det.real)


def _xi(theta, N0):
    return 1.0 / (8.0 * N0 * np.sin(theta) ** 2)


def conditional_pep(X_prev, stats: ChannelStats, pair, N0: float,
                    cfg: BoundConfig = BoundConfig()) -> float:
    """Channel-averaged PEP for a fixed previous transmit state."""
    if N0 <= 0:
        raise DomainError("N0 must be positive")
    X = np.asarray(X_prev, dtype=np.complex128)
    mu_g = X @ stats.mean
    Sigma_g = (X * stats.variances) @ X.conj().T
    theta, w = craig_nodes(cfg.quad_nodes)
    vals = [conditional_mgf(s, mu_g, Sigma_g, pair) for s in _xi(theta, N0)]
    return float(np.dot(w, vals) / np.pi)


def sample_past_states(codebook, depth: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` products of ``depth`` uniformly drawn codewords, shape ``(n, T, T)``."""
    mats = codebook.matrices if isinstance(codebook, Codebook) else np.asarray(
        [_mat(q) for q in codebook])
    T = mats.shape[-1]
    X = np.broadcast_to(np.eye(T, dtype=np.complex128), (n, T, T)).copy()
    for _ in range(depth):
        X = mats[rng.integers(0, len(mats), n)] @ X
    return X


def sample_past_state(codebook, depth: int, rng: np.random.Generator) -> np.ndarray:
    if depth < 0:
        raise DomainError("depth must be >= 0")
    return sample_past_states(codebook, depth, rng, 1)[0]


def average_pep(Q_i, Q_j, stats: ChannelStats, N0: float, cfg: BoundConfig,
                rng: np.random.Generator, codebook=None, full_output: bool = False):
    """Mean of :func:`conditional_pep` over sampled previous states.

    States are products of ``cfg.past_depth`` codewords drawn from
    ``codebook`` (defaults to ``{Q_i, Q_j}`` when not given).  With
    ``full_output`` the standard error of the mean is returned as well.
    """
    pair = difference_gram(Q_i, Q_j)
    if pair.rank == 0:
        raise DomainError("PEP of a codeword against itself is undefined")
    source = codebook if codebook is not None else [_mat(Q_i), _mat(Q_j)]
    states = sample_past_states(source, cfg.past_depth, rng, cfg.num_past_states)
    peps = np.array([conditional_pep(X, stats, pair, N0, cfg) for X in states])
    mean = float(peps.mean())
    if not full_output:
        return mean
    se = float(peps.std(ddof=1) / np.sqrt(peps.size)) if peps.size > 1 else 0.0
    return mean, se


# ---------------------------------------------------------------------------
# spectral route for the union bound
# ---------------------------------------------------------------------------

def _pair_grams(mats, i, j):
    D = mats[i] - mats[j]
    return np.einsum("nki,nkj->nij", D.conj(), D)


def _gram_keys(grams):
    return np.round(grams.view(np.float64).reshape(len(grams), -1) * 1e8).astype(np.int64)


def _dedupe(grams, weights):
    """Merge identical Gram matrices, summing their weights."""
    _, first, inv = np.unique(_gram_keys(grams), axis=0, return_index=True, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=weights, minlength=first.size)
    return grams[first], w


def _anchor_grams(mats, anchors, B, chunk_pairs=1 << 17):
    """Distinct Grams of ``Q_i - Q_j`` for every anchor ``i`` and all ``j != i``.

    Weights are Hamming distances summed over the merged pairs, divided by
    ``len(anchors) * B``, so the weighted PEP sum is the BER bound when the
    anchors cover the whole codebook and an unbiased estimate otherwise.
    """
    n = len(mats)
    per = max(1, chunk_pairs // n)
    grams = np.empty((0,) + mats.shape[1:], dtype=np.complex128)
    weights = np.empty(0)
    for a0 in range(0, len(anchors), per):
        a = np.asarray(anchors[a0:a0 + per])
        i = np.repeat(a, n)
        j = np.tile(np.arange(n), a.size)
        keep = i != j
        i, j = i[keep], j[keep]
        g, w = _dedupe(_pair_grams(mats, i, j), _hamming(i, j).astype(float))
        grams, weights = _dedupe(np.concatenate([grams, g]), np.concatenate([weights, w]))
    return grams, weights / (len(anchors) * B)


def _spectra(grams, states, stats):
    """Eigen-data of ``Sigma_h^(1/2) X^H A X Sigma_h^(1/2)`` per (gram, state).

    Returns ``lam`` and ``c2 = |V^H Sigma_h^(-1/2) mu_h|^2``, both
    ``(len(grams), len(states), T)``.
    """
    sig = np.sqrt(stats.variances)
    nu = stats.mean / sig
    XH = states.conj().transpose(0, 2, 1)
    C = XH[None] @ grams[:, None] @ states[None]             # (G, S, T, T)
    C = C * sig[:, None] * sig[None, :]
    C = 0.5 * (C + C.conj().swapaxes(-1, -2))
    lam, V = np.linalg.eigh(C)
    c2 = np.abs(np.einsum("gsji,j->gsi", V.conj(), nu)) ** 2
    return np.clip(lam, 0.0, None), c2


def _spectral_pep(lam, c2, N0s, quad_nodes, backend=None):
    """Craig integral for every spectrum row and noise level.

    ``lam``/``c2`` have shape ``(..., T)``; result ``(len(N0s), ...)``.
    """
    theta, w = craig_nodes(quad_nodes)
    xis = np.array([_xi(theta, N0) for N0 in N0s])
    T = lam.shape[-1]
    out = _kernels.get_craig_kernel(backend)(
        np.ascontiguousarray(lam.reshape(-1, T)), np.ascontiguousarray(c2.reshape(-1, T)),
        xis, np.ascontiguousarray(w))
    return out.reshape((len(N0s),) + lam.shape[:-1])


def _hamming(i, j):
    return np.bitwise_count(np.asarray(i, dtype=np.int64) ^ np.asarray(j, dtype=np.int64))


def bound_anchors(n: int, cfg: BoundConfig, rng: np.random.Generator) -> np.ndarray:
    """Codewords whose outgoing pairs enter the bound.

    Every codeword up to :data:`EXHAUSTIVE_MAX_CODEWORDS`; beyond that about
    ``pair_subsample / (n - 1)`` anchors drawn without replacement.
    """
    if n <= EXHAUSTIVE_MAX_CODEWORDS:
        return np.arange(n)
    budget = cfg.pair_subsample or DEFAULT_PAIR_BUDGET
    k = min(n, max(1, round(budget / (n - 1))))
    return np.sort(rng.choice(n, k, replace=False))


def ber_union_bound(codebook: Codebook, stats: ChannelStats, N0, cfg: BoundConfig = BoundConfig(),
                    rng: np.random.Generator | None = None, *, backend=None, chunk: int = 1 << 14):
    """Union bound on the bit error rate.

    ``N0`` may be a scalar or a sequence; a sequence reuses the same past
    states and spectra for every noise level and returns an array.
    """
    if np.any(stats.variances <= 0):
        raise NumericalError("spectral bound needs a nonsingular scattering covariance (finite K)")
    rng = rng if rng is not None else np.random.default_rng()
    scalar = np.ndim(N0) == 0
    N0s = np.atleast_1d(np.asarray(N0, dtype=float))
    if np.any(N0s <= 0):
        raise DomainError("N0 must be positive")
    mats = codebook.matrices
    if len(mats) < 2:
        raise DomainError("need at least two codewords")
    anchors = bound_anchors(len(mats), cfg, rng)
    grams, weights = _anchor_grams(mats, anchors, codebook.config.total_bits)
    states = sample_past_states(codebook, cfg.past_depth, rng, cfg.num_past_states)
    bound = np.zeros(N0s.size)
    step = max(1, chunk // len(states))
    for g0 in range(0, len(grams), step):
        lam, c2 = _spectra(grams[g0:g0 + step], states, stats)
        pep = _spectral_pep(lam, c2, N0s, cfg.quad_nodes, backend).mean(axis=-1)
        bound += pep @ weights[g0:g0 + step]
    return float(bound[0]) if scalar else bound


def pair_diagnostics(codebook: Codebook, stats: ChannelStats, N0: float,
                     cfg: BoundConfig = BoundConfig(), rng=None, pairs=None) -> list[dict]:
    """Per-pair records ``{i, j, rank, bit_errors, pep}`` for selected pairs.

    ``pairs`` defaults to every pair involving codeword 0.
    """
    rng = rng if rng is not None else np.random.default_rng()
    mats = codebook.matrices
    if pairs is None:
        pairs = [(0, j) for j in range(1, len(mats))]
    i, j = (np.array(p) for p in zip(*pairs))
    grams = _pair_grams(mats, i, j)
    states = sample_past_states(codebook, cfg.past_depth, rng, cfg.num_past_states)
    lam, c2 = _spectra(grams, states, stats)
    pep = _spectral_pep(lam, c2, [N0], cfg.quad_nodes)[0].mean(axis=-1)
    ranks = _batch_rank(mats[i] - mats[j])
    return [
        {"i": int(a), "j": int(b), "rank": int(r), "bit_errors": int(h), "pep": float(p)}
        for a, b, r, h, p in zip(i, j, ranks, _hamming(i, j), pep)
    ]


def _batch_rank(D, rtol=RANK_RTOL):
    sv = np.linalg.svd(D, compute_uv=False)
    top = sv[:, :1]
    return np.sum((sv > rtol * top) & (top > 0), axis=1)


def min_rank_difference(codebook, chunk: int = 1 << 16) -> int:
    """Smallest rank of ``Q_i - Q_j`` over all distinct pairs."""
    mats = codebook.matrices if isinstance(codebook, Codebook) else np.asarray(
        [_mat(q) for q in codebook])
    n = len(mats)
    if n < 2:
        raise DomainError("need at least two codewords")
    i, j = np.triu_indices(n, 1)
    best = mats.shape[-1]
    for k in range(0, i.size, chunk):
        r = _batch_rank(mats[i[k:k + chunk]] - mats[j[k:k + chunk]])
        best = min(best, int(r.min()))
        if best == 0:
            raise DomainError("codebook contains duplicate codewords")
    return best


def estimate_diversity_slope(ebn0_db, ber, window=None) -> float:
    """Negated least-squares slope of ``log10(BER)`` against ``Eb/N0 / 10``.

    ``ebn0_db``/``ber`` may also be given as a ``BerCurve`` (first
    argument), in which case ``ber`` is the optional window.
    """
    if hasattr(ebn0_db, "points"):
        curve, window = ebn0_db, ber if window is None else window
        ebn0_db = [p.ebn0_db for p in curve.points]
        ber = [p.ber_sim for p in curve.points]
    x = np.asarray(ebn0_db, dtype=float)
    y = np.asarray(ber, dtype=float)
    keep = y > 0
    if window is not None:
        keep &= (x >= window[0]) & (x <= window[1])
    if keep.sum() < 3:
        raise DomainError(f"need >= 3 points with BER > 0 in the window, got {int(keep.sum())}")
    slope = np.polyfit(x[keep] / 10.0, np.log10(y[keep]), 1)[0]
    return float(-slope)

"""Signal space of the differential pinching-antenna scheme.

A codeword is ``Q = S @ A`` where ``S`` is block diagonal with 2x2
Alamouti subblocks built from Gray-coded PSK symbols and ``A`` is a
block permutation (``perm_matrix kron I_2``) that assigns each subblock
to a pinching position.  The bit label of a codeword is the modulation
bits followed by the index bits, read MSB first; enumerating the labels
in increasing integer order gives codebook row ``i`` the label ``i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from dsmpa.errors import ConfigurationError, DetectionError, DomainError

__all__ = [
    "CodebookConfig",
    "Codeword",
    "Codebook",
    "gray_to_binary",
    "binary_to_gray",
    "bits_to_int",
    "int_to_bits",
    "psk_constellation",
    "psk_modulate",
    "psk_demodulate",
    "build_alamouti_subblock",
    "build_diagonal_subblock",
    "build_modulation_matrix",
    "permutation_to_index",
    "index_to_permutation",
    "permutation_matrix",
    "build_activation_matrix",
    "encode_codeword",
    "demap_codeword",
    "enumerate_codebook",
    "build_no_alamouti_codebook",
    "MAX_ENUMERABLE_BITS",
]

MAX_ENUMERABLE_BITS = 20
NUM_WAVEGUIDES = 2
SUBBLOCK_KINDS = ("alamouti", "diagonal")


@dataclass(frozen=True)
class CodebookConfig:
    """Sizes of the codebook.

    Parameters
    ----------
    modulation_order : int
        PSK order M, a power of two >= 2.
    num_positions : int
        Pinching positions per waveguide; equals the number of subblocks L.
    """

    modulation_order: int = 2
    num_positions: int = 3
    num_waveguides: int = NUM_WAVEGUIDES

    def __post_init__(self):
        m = self.modulation_order
        if not isinstance(m, (int, np.integer)) or m < 2 or m & (m - 1):
            raise ConfigurationError(f"modulation order must be a power of two >= 2, got {m!r}")
        if not isinstance(self.num_positions, (int, np.integer)) or self.num_positions < 1:
            raise ConfigurationError(f"num_positions must be >= 1, got {self.num_positions!r}")
        if self.num_waveguides != NUM_WAVEGUIDES:
            raise ConfigurationError("only the dual-waveguide layout is supported")

    @property
    def num_subblocks(self) -> int:
        return self.num_positions

    @property
    def block_length(self) -> int:
        return 2 * self.num_positions

    @property
    def bits_per_symbol(self) -> int:
        return self.modulation_order.bit_length() - 1

    @property
    def mod_bits(self) -> int:
        return self.block_length * self.bits_per_symbol

    @property
    def index_bits(self) -> int:
        # floor(log2(L!)) computed on integers, exact for any L
        return math.factorial(self.num_positions).bit_length() - 1

    @property
    def total_bits(self) -> int:
        return self.mod_bits + self.index_bits

    @property
    def num_patterns(self) -> int:
        return 1 << self.index_bits

    @property
    def size(self) -> int:
        return 1 << self.total_bits


@dataclass(frozen=True)
class Codeword:
    matrix: np.ndarray
    mod_bits: tuple
    index_bits: tuple

    @property
    def bits(self) -> tuple:
        return self.mod_bits + self.index_bits

    @property
    def label(self) -> int:
        return bits_to_int(self.bits)


# ---------------------------------------------------------------------------
# bits and PSK
# ---------------------------------------------------------------------------

def bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, width: int) -> tuple:
    return tuple((value >> (width - 1 - k)) & 1 for k in range(width))


def gray_to_binary(g):
    """Decode a reflected Gray code; works elementwise on integer arrays."""
    b = np.asarray(g).copy() if isinstance(g, np.ndarray) else int(g)
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift = shift >> 1
    return b


def binary_to_gray(b):
    return b ^ (b >> 1)


def psk_constellation(M: int) -> np.ndarray:
    """PSK points ``exp(j 2 pi m / M)`` in natural (phase) order."""
    pts = np.exp(2j * np.pi * np.arange(M) / M)
    # snap the exact axis points so BPSK/QPSK are exactly +-1, +-j
    pts.real[np.abs(pts.real) < 1e-15] = 0.0
    pts.imag[np.abs(pts.imag) < 1e-15] = 0.0
    return pts


def _check_order(M):
    if not isinstance(M, (int, np.integer)) or M < 2 or M & (M - 1):
        raise ConfigurationError(f"modulation order must be a power of two >= 2, got {M!r}")
    return int(M).bit_length() - 1


def psk_modulate(bits, M: int) -> complex:
    """Map ``log2(M)`` Gray-labelled bits to a unit-modulus PSK symbol."""
    k = _check_order(M)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size != k or np.any((bits != 0) & (bits != 1)):
        raise ConfigurationError(f"expected {k} bits for {M}-PSK, got {bits.tolist()}")
    m = gray_to_binary(bits_to_int(bits))
    return complex(psk_constellation(M)[m])


def psk_demodulate(symbol: complex, M: int) -> tuple:
    """Hard-decide a PSK symbol back to its Gray bit label."""
    k = _check_order(M)
    m = int(np.round(np.angle(symbol) * M / (2 * np.pi))) % M
    return int_to_bits(binary_to_gray(m), k)


# ---------------------------------------------------------------------------
# subblocks and matrices
# ---------------------------------------------------------------------------

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def build_alamouti_subblock(s1: complex, s2: complex) -> np.ndarray:
    return _INV_SQRT2 * np.array(
        [[s1, s2], [-np.conj(s2), np.conj(s1)]], dtype=np.complex128
    )


def build_diagonal_subblock(s1: complex, s2: complex) -> np.ndarray:
    """Subblock of the baseline without Alamouti coding: ``diag(s1, s2)``."""
    return np.array([[s1, 0.0], [0.0, s2]], dtype=np.complex128)


def build_modulation_matrix(symbols, kind: str = "alamouti") -> np.ndarray:
    """Block-diagonal ``S`` from consecutive symbol pairs."""
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    if symbols.size == 0 or symbols.size % 2:
        raise ConfigurationError(f"need an even, nonzero number of symbols, got {symbols.size}")
    if kind == "alamouti":
        make = build_alamouti_subblock
    elif kind == "diagonal":
        make = build_diagonal_subblock
    else:
        raise ConfigurationError(f"unknown subblock kind {kind!r}")
    T = symbols.size
    S = np.zeros((T, T), dtype=np.complex128)
    for l in range(T // 2):
        S[2 * l:2 * l + 2, 2 * l:2 * l + 2] = make(symbols[2 * l], symbols[2 * l + 1])
    return S


# ---------------------------------------------------------------------------
# permutations (Lehmer code, lexicographic order, 1-based values)
# ---------------------------------------------------------------------------

def _max_rank(L: int) -> int:
    return 1 << (math.factorial(L).bit_length() - 1)


def index_to_permutation(rank: int, L: int) -> tuple:
    """Permutation of ``1..L`` at lexicographic position ``rank``.

    Only the first ``2**floor(log2(L!))`` ranks carry index bits, so larger
    ranks are rejected.

    >>> index_to_permutation(13, 4)
    (3, 1, 4, 2)
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    if not 0 <= rank < _max_rank(L):
        raise DomainError(f"rank {rank} outside [0, {_max_rank(L)}) for L={L}")
    pool = list(range(1, L + 1))
    out = []
    for i in range(L - 1, -1, -1):
        digit, rank = divmod(rank, math.factorial(i))
        out.append(pool.pop(digit))
    return tuple(out)


def permutation_to_index(sigma) -> int:
    sigma = [int(v) for v in sigma]
    L = len(sigma)
    if sorted(sigma) != list(range(1, L + 1)):
        raise DomainError(f"{sigma} is not a permutation of 1..{L}")
    rank = 0
    for i, v in enumerate(sigma):
        smaller_after = sum(1 for w in sigma[i + 1:] if w < v)
        rank += smaller_after * math.factorial(L - 1 - i)
    return rank


def permutation_matrix(sigma) -> np.ndarray:
    """``P[l, sigma[l] - 1] = 1``: subblock ``l`` goes to position ``sigma[l]``."""
    L = len(sigma)
    P = np.zeros((L, L))
    P[np.arange(L), np.asarray(sigma) - 1] = 1.0
    return P


def build_activation_matrix(sigma) -> np.ndarray:
    return np.kron(permutation_matrix(sigma), np.eye(2))


# ---------------------------------------------------------------------------
# codewords
# ---------------------------------------------------------------------------

def _symbols_from_bits(mod_bits, cfg: CodebookConfig) -> np.ndarray:
    k = cfg.bits_per_symbol
    mod_bits = np.asarray(mod_bits, dtype=np.int64)
    groups = mod_bits.reshape(cfg.block_length, k)
    idx = gray_to_binary(groups @ (1 << np.arange(k - 1, -1, -1)))
    return psk_constellation(cfg.modulation_order)[idx]


def _check_bits(bits, n, what):
    arr = np.asarray(bits, dtype=np.int64).ravel()
    if arr.size != n or np.any((arr != 0) & (arr != 1)):
        raise ConfigurationError(f"expected {n} {what} bits, got {list(arr)}")
    return tuple(int(b) for b in arr)


def encode_codeword(mod_bits, index_bits, cfg: CodebookConfig,
                    kind: str = "alamouti") -> Codeword:
    mod_bits = _check_bits(mod_bits, cfg.mod_bits, "modulation")
    index_bits = _check_bits(index_bits, cfg.index_bits, "index")
    S = build_modulation_matrix(_symbols_from_bits(mod_bits, cfg), kind)
    sigma = index_to_permutation(bits_to_int(index_bits), cfg.num_subblocks)
    Q = S @ build_activation_matrix(sigma)
    Q.setflags(write=False)
    return Codeword(Q, mod_bits, index_bits)


@dataclass(frozen=True, eq=False)
class Codebook:
    """All ``2**B`` codewords, stacked so that row ``i`` has label ``i``.

    Besides the dense ``matrices`` stack, the structured view used by the
    fast detectors is exposed: ``perms`` (0-based, one row per index
    pattern) and the PSK ``constellation``.
    """

    config: CodebookConfig
    kind: str = "alamouti"
    matrices: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.kind not in SUBBLOCK_KINDS:
            raise ConfigurationError(f"unknown subblock kind {self.kind!r}")
        cfg = self.config
        if cfg.total_bits > MAX_ENUMERABLE_BITS:
            raise DomainError(
                f"codebook has 2**{cfg.total_bits} entries; exhaustive enumeration "
                f"is limited to B <= {MAX_ENUMERABLE_BITS}"
            )
        if self.matrices is None:
            object.__setattr__(self, "matrices", self._build())
        self.matrices.setflags(write=False)

    def _build(self) -> np.ndarray:
        cfg = self.config
        T, L, k = cfg.block_length, cfg.num_subblocks, cfg.bits_per_symbol
        n_mod = 1 << cfg.mod_bits
        # symbol indices for every modulation label, MSB-first groups
        labels = np.arange(n_mod)
        shifts = k * np.arange(T - 1, -1, -1)
        gray = (labels[:, None] >> shifts) & (cfg.modulation_order - 1)
        sym = self.constellation[gray_to_binary(gray)]
        S = np.zeros((n_mod, T, T), dtype=np.complex128)
        for l in range(L):
            s1, s2 = sym[:, 2 * l], sym[:, 2 * l + 1]
            r = slice(2 * l, 2 * l + 2)
            if self.kind == "alamouti":
                blk = _INV_SQRT2 * np.stack(
                    [np.stack([s1, s2], -1), np.stack([-s2.conj(), s1.conj()], -1)], -2
                )
            else:
                z = np.zeros_like(s1)
                blk = np.stack([np.stack([s1, z], -1), np.stack([z, s2], -1)], -2)
            S[:, r, r] = blk
        acts = np.stack([build_activation_matrix(p + 1) for p in self.perms])
        Q = np.einsum("mij,ujk->muik", S, acts).reshape(-1, T, T)
        return np.ascontiguousarray(Q)

    @cached_property
    def constellation(self) -> np.ndarray:
        return psk_constellation(self.config.modulation_order)

    @cached_property
    def perms(self) -> np.ndarray:
        L = self.config.num_subblocks
        return np.array(
            [np.array(index_to_permutation(u, L)) - 1 for u in range(self.config.num_patterns)],
            dtype=np.int64,
        ).reshape(self.config.num_patterns, L)

    @cached_property
    def symbol_to_gray(self) -> np.ndarray:
        """Gray label of each constellation point (natural index -> bits as int)."""
        return binary_to_gray(np.arange(self.config.modulation_order))

    @property
    def size(self) -> int:
        return self.matrices.shape[0]

    def __len__(self):
        return self.size

    def __getitem__(self, i) -> Codeword:
        cfg = self.config
        bits = int_to_bits(int(i), cfg.total_bits)
        return Codeword(self.matrices[i], bits[:cfg.mod_bits], bits[cfg.mod_bits:])

    def __iter__(self):
        return (self[i] for i in range(self.size))

    def label_bits(self) -> np.ndarray:
        """``(size, B)`` 0/1 array of all labels."""
        B = self.config.total_bits
        return ((np.arange(self.size)[:, None] >> np.arange(B - 1, -1, -1)) & 1).astype(np.int8)

    def label_from_parts(self, sym_idx: np.ndarray, pattern: np.ndarray) -> np.ndarray:
        """Codeword labels from natural symbol indices ``(..., T)`` and pattern ranks."""
        cfg = self.config
        k = cfg.bits_per_symbol
        gray = self.symbol_to_gray[sym_idx]
        shifts = k * np.arange(cfg.block_length - 1, -1, -1)
        mod = np.sum(gray.astype(np.int64) << shifts, axis=-1)
        return (mod << cfg.index_bits) | pattern

    def parts_from_label(self, labels: np.ndarray):
        """Inverse of :meth:`label_from_parts`."""
        cfg = self.config
        k = cfg.bits_per_symbol
        labels = np.asarray(labels, dtype=np.int64)
        pattern = labels & (cfg.num_patterns - 1)
        mod = labels >> cfg.index_bits
        shifts = k * np.arange(cfg.block_length - 1, -1, -1)
        gray = (mod[..., None] >> shifts) & (cfg.modulation_order - 1)
        return gray_to_binary(gray), pattern


def enumerate_codebook(cfg: CodebookConfig) -> Codebook:
    return Codebook(cfg, "alamouti")


def build_no_alamouti_codebook(cfg: CodebookConfig) -> Codebook:
    return Codebook(cfg, "diagonal")


def demap_codeword(Q, codebook: Codebook | CodebookConfig, tol: float = 1e-9):
    """Recover ``(mod_bits, index_bits)`` of a codebook matrix.

    Matching is by nearest codeword; anything farther than ``tol`` (max
    abs entry difference) from every codeword is rejected.
    """
    if isinstance(codebook, CodebookConfig):
        codebook = enumerate_codebook(codebook)
    Q = np.asarray(Q)
    if Q.shape != codebook.matrices.shape[1:]:
        raise DetectionError(f"matrix shape {Q.shape} does not match the codebook")
    err = np.max(np.abs(codebook.matrices - Q), axis=(1, 2))
    i = int(np.argmin(err))
    if err[i] > tol:
        raise DetectionError(f"matrix is not a codeword (nearest distance {err[i]:.3g})")
    cw = codebook[i]
    return cw.mod_bits, cw.index_bits

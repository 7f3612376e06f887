"""Differential transmitter, AWGN channel and ML detectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dsmpa import _kernels
from dsmpa.codebook import Codebook, CodebookConfig, Codeword
from dsmpa.errors import ConfigurationError, DomainError

__all__ = [
    "Frame",
    "DetectionResult",
    "differential_encode",
    "transmit_block",
    "complex_noise",
    "detect_differential_ml",
    "detect_coherent_ml",
    "detect_batch",
    "ebn0_to_n0",
    "unitarity_defect",
    "UNITARITY_GUARD",
]

# a frame whose state drifts further than this from unitary is rejected
UNITARITY_GUARD = 1e-6


def unitarity_defect(X) -> float:
    X = np.asarray(X)
    return float(np.max(np.abs(X.conj().T @ X - np.eye(X.shape[0]))))


@dataclass(frozen=True, eq=False)
class Frame:
    """Transmitted matrices ``X_0 .. X_K`` of one frame; ``X_0 = I``."""

    matrices: np.ndarray
    labels: tuple

    @property
    def num_blocks(self) -> int:
        return self.matrices.shape[0] - 1

    @property
    def max_defect(self) -> float:
        return max(unitarity_defect(X) for X in self.matrices)


@dataclass(frozen=True)
class DetectionResult:
    label: int
    metric: float
    bit_errors: np.ndarray | None = None


def _as_matrix(q):
    return q.matrix if isinstance(q, Codeword) else np.asarray(q, dtype=np.complex128)


def differential_encode(codewords) -> Frame:
    """Run ``X_k = Q_k X_{k-1}`` from the identity reference.

    No re-orthonormalisation is done; the drift is checked against
    :data:`UNITARITY_GUARD` instead.
    """
    codewords = list(codewords)
    if not codewords:
        raise ConfigurationError("need at least one codeword")
    mats = [_as_matrix(q) for q in codewords]
    T = mats[0].shape[0]
    if any(m.shape != (T, T) for m in mats):
        raise ConfigurationError("codewords have inconsistent dimensions")
    X = np.empty((len(mats) + 1, T, T), dtype=np.complex128)
    X[0] = np.eye(T)
    for k, Q in enumerate(mats, start=1):
        X[k] = Q @ X[k - 1]
    if unitarity_defect(X[-1]) > UNITARITY_GUARD:
        raise ArithmeticError("transmit state drifted away from unitary")
    labels = tuple(q.label if isinstance(q, Codeword) else None for q in codewords)
    return Frame(X, labels)


def complex_noise(rng: np.random.Generator, shape, N0: float) -> np.ndarray:
    """Circularly-symmetric Gaussian samples with ``E|n|^2 = N0``."""
    shape = tuple(np.atleast_1d(shape))
    w = rng.standard_normal(shape + (2,)).view(np.complex128)[..., 0]
    return w * np.sqrt(N0 / 2.0)


def transmit_block(X, h, N0: float, rng: np.random.Generator) -> np.ndarray:
    """``y = X h + n`` with ``n ~ CN(0, N0 I)``."""
    if N0 < 0:
        raise DomainError("noise level must be nonnegative")
    y = np.asarray(X) @ np.asarray(h)
    if N0 > 0:
        y = y + complex_noise(rng, y.shape, N0)
    return y


def ebn0_to_n0(ebn0_db: float, cfg: CodebookConfig) -> float:
    """Noise density for unit-column-energy codewords (``E_b = T / B``)."""
    return cfg.block_length / cfg.total_bits * 10.0 ** (-ebn0_db / 10.0)


def _bit_errors(label_hat, truth, B):
    if truth is None:
        return None
    diff = int(label_hat) ^ int(truth)
    return np.array([(diff >> (B - 1 - k)) & 1 for k in range(B)], dtype=bool)


def _exhaustive(y, z, matrices):
    metric = np.sum(np.abs(y - matrices @ z) ** 2, axis=1)
    i = int(np.argmin(metric))
    return i, float(metric[i])


def detect_batch(y, z, codebook: Codebook, backend=None) -> np.ndarray:
    """Labels minimising ``||y_n - Q z_n||`` for each row of ``y`` and ``z``."""
    ml, _, _ = _kernels.get_kernels(backend)
    y = np.ascontiguousarray(y, dtype=np.complex128).reshape(-1, codebook.config.block_length)
    z = np.ascontiguousarray(z, dtype=np.complex128).reshape(y.shape)
    sym, pat, _ = ml(y, z, codebook.perms, codebook.constellation, codebook.kind == "alamouti")
    return codebook.label_from_parts(sym, pat)


def _detect(y, z, codebook, truth):
    y = np.asarray(y, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    if isinstance(codebook, Codebook):
        label = int(detect_batch(y[None], z[None], codebook)[0])
        metric = float(np.sum(np.abs(y - codebook.matrices[label] @ z) ** 2))
        B = codebook.config.total_bits
    else:
        mats = np.asarray([_as_matrix(q) for q in codebook])
        if mats.size == 0:
            raise ConfigurationError("empty codebook")
        label, metric = _exhaustive(y, z, mats)
        B = max(1, (len(mats) - 1).bit_length())
    return DetectionResult(label, metric, _bit_errors(label, truth, B))


def detect_differential_ml(y_k, y_prev, codebook, truth=None) -> DetectionResult:
    """Noncoherent decision ``argmin_i ||y_k - Q_i y_prev||^2``.

    ``codebook`` is a :class:`Codebook` (fast structured search) or any
    sequence of matrices (exhaustive search, lowest index wins ties).
    """
    return _detect(y_k, y_prev, codebook, truth)


def detect_coherent_ml(y_k, h, codebook, truth=None) -> DetectionResult:
    """Perfect-CSI decision ``argmin_i ||y_k - Q_i h||^2``."""
    return _detect(y_k, h, codebook, truth)

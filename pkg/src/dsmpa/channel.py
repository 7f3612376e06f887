"""Equivalent channel of the dual-waveguide pinching-antenna layout.

Entries of the channel vector are ordered position-major,
``[h(1,1), h(2,1), h(1,2), h(2,2), ...]`` (waveguide ``n``, position
``l``), i.e. 0-based index ``2*l + n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dsmpa.errors import ConfigurationError, SingularityError

SPEED_OF_LIGHT = 299_792_458.0
MIN_DISTANCE = 1e-3

__all__ = [
    "Geometry",
    "ChannelParams",
    "ChannelStats",
    "propagation_distance",
    "channel_stats",
    "sample_channel",
    "sample_channels",
]


def _vec(x, n=None):
    a = np.asarray(x, dtype=float).ravel()
    if n is not None and a.size != n:
        raise ConfigurationError(f"expected {n} values, got {a.size}")
    return a


@dataclass(frozen=True)
class Geometry:
    """Waveguide layout, pinching positions and receiver location (meters)."""

    position_x: tuple = (1.5, 7.5, 18.5)
    waveguide_y: tuple = (9.75, 10.25)
    waveguide_height: float = 3.0
    receiver: tuple = (13.2, 7.1, 0.0)
    region_side: float = 20.0
    carrier_freq: float = 28e9

    def __post_init__(self):
        for name in ("position_x", "waveguide_y", "receiver"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        x = np.array(self.position_x)
        if x.size < 1:
            raise ConfigurationError("need at least one pinching position")
        if np.any(x < 0) or np.any(x > self.region_side):
            raise ConfigurationError(f"pinching positions {self.position_x} leave [0, {self.region_side}]")
        if len(self.waveguide_y) != 2 or self.waveguide_y[0] == self.waveguide_y[1]:
            raise ConfigurationError(f"need two distinct waveguide y coordinates, got {self.waveguide_y}")
        if len(self.receiver) != 3:
            raise ConfigurationError("receiver must be a 3-vector")
        if self.carrier_freq <= 0:
            raise ConfigurationError("carrier frequency must be positive")

    @property
    def num_positions(self) -> int:
        return len(self.position_x)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    def pinching_coordinates(self) -> np.ndarray:
        """``(2*N_p, 3)`` coordinates in channel-vector order."""
        pts = [
            (x, y, self.waveguide_height)
            for x in self.position_x
            for y in self.waveguide_y
        ]
        return np.array(pts)


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 2.2
    rician_factor: float | tuple = 5.0
    los: complex | tuple = 1.0

    def __post_init__(self):
        if not self.path_loss_exponent > 0:
            raise ConfigurationError("path-loss exponent must be positive")
        K = np.asarray(self.rician_factor, dtype=float)
        if np.any(K < 0) or np.any(np.isnan(K)):
            raise ConfigurationError("Rician factor must be >= 0")
        if not np.allclose(np.abs(np.asarray(self.los)), 1.0, atol=1e-12):
            raise ConfigurationError("LoS component must have unit modulus")


@dataclass(frozen=True, eq=False)
class ChannelStats:
    """Mean and diagonal covariance of the equivalent channel."""

    mean: np.ndarray
    variances: np.ndarray
    path_gain: np.ndarray = field(default=None, repr=False)

    @property
    def covariance(self) -> np.ndarray:
        return np.diag(self.variances)

    @property
    def size(self) -> int:
        return self.mean.size


def propagation_distance(p_r, p) -> float:
    return float(np.linalg.norm(_vec(p_r, 3) - _vec(p, 3)))


def channel_stats(geom: Geometry, params: ChannelParams = ChannelParams()) -> ChannelStats:
    pts = geom.pinching_coordinates()
    n = pts.shape[0]
    d = np.linalg.norm(np.asarray(geom.receiver) - pts, axis=1)
    if np.any(d < MIN_DISTANCE):
        i = int(np.argmin(d))
        raise SingularityError(
            f"receiver is {d[i]:.3g} m from pinching point {pts[i].tolist()}; "
            f"minimum allowed distance is {MIN_DISTANCE} m"
        )
    beta = d ** (-params.path_loss_exponent)
    K = np.broadcast_to(np.asarray(params.rician_factor, dtype=float), (n,))
    los = np.broadcast_to(np.asarray(params.los, dtype=complex), (n,))
    gamma = np.exp(-2j * np.pi * d / geom.wavelength)
    if np.any(np.isinf(K)):
        with np.errstate(invalid="ignore"):
            los_frac = np.where(np.isinf(K), 1.0, K / (K + 1.0))
        scat = np.where(np.isinf(K), 0.0, beta / (K + 1.0))
    else:
        los_frac = K / (K + 1.0)
        scat = beta / (K + 1.0)
    mean = np.sqrt(beta) * np.sqrt(los_frac) * los * gamma
    return ChannelStats(mean, scat, beta)


def sample_channel(stats: ChannelStats, rng: np.random.Generator) -> np.ndarray:
    """One quasi-static draw ``h = mu + Sigma^(1/2) w``."""
    return sample_channels(stats, rng, 1)[0]


def sample_channels(stats: ChannelStats, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` independent frames' worth of channel vectors, shape ``(n, T)``."""
    T = stats.size
    w = rng.standard_normal((n, T, 2)).view(np.complex128)[..., 0] * np.sqrt(0.5)
    return stats.mean + np.sqrt(stats.variances) * w

"""Monte Carlo BER engine and sweep drivers."""

from __future__ import annotations

import logging
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from dsmpa import _kernels
from dsmpa.analysis import ber_union_bound
from dsmpa.channel import sample_channels
from dsmpa.errors import DomainError
from dsmpa.link import complex_noise
from dsmpa.scenarios import ScenarioConfig

__all__ = [
    "BerPoint",
    "BerCurve",
    "point_seed",
    "monte_carlo_ber",
    "run_ber_sweep",
    "run_theory_sweep",
]

log = logging.getLogger(__name__)


@dataclass
class BerPoint:
    """One simulated grid point.

    Besides the totals, second moments of the per-batch counts are kept so
    that :attr:`batch_std_error` can account for errors clustering within
    frames (every block of a frame shares one channel draw).
    """

    ebn0_db: float
    bits_sent: int = 0
    bit_errors: int = 0
    ber_bound: float | None = None
    wallclock: float = 0.0
    num_batches: int = 0
    sum_err_sq: float = 0.0
    sum_err_bits: float = 0.0
    sum_bits_sq: float = 0.0

    def add_batch(self, bits: int, errors: int) -> None:
        self.bits_sent += bits
        self.bit_errors += errors
        self.num_batches += 1
        self.sum_err_sq += float(errors) ** 2
        self.sum_err_bits += float(errors) * bits
        self.sum_bits_sq += float(bits) ** 2

    @property
    def ber_sim(self) -> float | None:
        if self.bits_sent == 0:
            return None
        return self.bit_errors / self.bits_sent

    @property
    def rel_std_error(self) -> float | None:
        """Binomial relative standard error of ``ber_sim``."""
        if not self.bit_errors:
            return None
        p = self.ber_sim
        return float(np.sqrt((1 - p) / (p * self.bits_sent)))

    @property
    def batch_std_error(self) -> float | None:
        """Batch-means standard error of ``ber_sim`` (ratio estimator).

        Batches hold whole frames and use independent channel draws, so this
        is the honest error bar; the binomial one treats every bit as
        independent and is too small when errors arrive in bursts.
        """
        if self.num_batches < 2:
            return None
        p = self.ber_sim
        ss = self.sum_err_sq - 2 * p * self.sum_err_bits + p * p * self.sum_bits_sq
        n = self.num_batches
        return float(np.sqrt(max(ss, 0.0) * n / (n - 1)) / self.bits_sent)

    @property
    def rel_batch_error(self) -> float | None:
        se = self.batch_std_error
        if se is None or not self.bit_errors:
            return None
        return se / self.ber_sim

    def confidence_interval(self, z: float = 1.96) -> tuple[float, float]:
        """Normal-approximation binomial interval on ``ber_sim``."""
        p = self.ber_sim
        half = z * np.sqrt(p * (1 - p) / self.bits_sent)
        return max(0.0, p - half), min(1.0, p + half)


@dataclass
class BerCurve:
    scenario: ScenarioConfig
    points: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.scenario.name

    def ebn0(self) -> np.ndarray:
        return np.array([p.ebn0_db for p in self.points])

    def ber(self) -> np.ndarray:
        return np.array([np.nan if p.ber_sim is None else p.ber_sim for p in self.points])

    def bound(self) -> np.ndarray:
        return np.array([np.nan if p.ber_bound is None else p.ber_bound for p in self.points])

    def snr_at_ber(self, target: float) -> float:
        """Eb/N0 where the simulated curve crosses ``target`` (log-linear interpolation)."""
        x, y = self.ebn0(), self.ber()
        for k in range(len(x) - 1):
            if y[k] >= target > y[k + 1] and y[k + 1] > 0:
                t = (np.log10(y[k]) - np.log10(target)) / (np.log10(y[k]) - np.log10(y[k + 1]))
                return float(x[k] + t * (x[k + 1] - x[k]))
        raise DomainError(f"{self.name}: BER never crosses {target:g} on the grid")


def point_seed(master_seed: int, scenario_id: str, snr_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(
        int(master_seed), spawn_key=(zlib.crc32(scenario_id.encode()), int(snr_index))
    )


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def monte_carlo_ber(scenario: ScenarioConfig, ebn0_db: float, rng=None, *,
                    backend=None, codebook=None) -> BerPoint:
    """Simulate one Eb/N0 point until the stopping rule fires.

    The point stops once it has ``min_bit_errors`` errors over at least
    ``min_frames`` frames, or after ``max_bits`` bits, whichever is first.
    Every frame draws a fresh channel that stays fixed over its blocks.
    Differential schemes send a reference block first, which carries no
    bits.  Batches of ``frames_per_batch`` frames are drawn from ``rng`` in
    order, so a given generator state fully determines the result.
    """
    rng = _as_rng(rng)
    ml, diff_signals, coh_signals = _kernels.get_kernels(backend)
    cb = codebook if codebook is not None else scenario.codebook()
    cfg = cb.config
    stats = scenario.channel_stats()
    N0 = scenario.noise_level(ebn0_db)
    T, B, K = cfg.block_length, cfg.total_bits, scenario.blocks_per_frame
    alamouti = cb.kind == "alamouti"
    coherent = scenario.scheme == "coherent_sm_pa"
    bits_per_frame = K * B

    point = BerPoint(float(ebn0_db))
    frames = 0
    t0 = time.perf_counter()
    while point.bits_sent < scenario.max_bits and (
        point.bit_errors < scenario.min_bit_errors or frames < scenario.min_frames
    ):
        remaining = -(-(scenario.max_bits - point.bits_sent) // bits_per_frame)
        F = min(scenario.frames_per_batch, remaining)
        h = sample_channels(stats, rng, F)
        labels = rng.integers(0, cb.size, (F, K))
        sym, pat = cb.parts_from_label(labels)
        sym = np.ascontiguousarray(sym)
        if coherent:
            x = coh_signals(h, sym, pat, cb.perms, cb.constellation, alamouti)
            y = x + complex_noise(rng, x.shape, N0)
            ref = np.broadcast_to(h[:, None, :], y.shape)
            cur = y
        else:
            x = diff_signals(h, sym, pat, cb.perms, cb.constellation, alamouti)
            y = x + complex_noise(rng, x.shape, N0)
            cur, ref = y[:, 1:], y[:, :-1]
        s_hat, u_hat, _ = ml(
            np.ascontiguousarray(cur.reshape(-1, T)),
            np.ascontiguousarray(ref.reshape(-1, T)),
            cb.perms, cb.constellation, alamouti,
        )
        detected = cb.label_from_parts(s_hat, u_hat)
        point.add_batch(F * bits_per_frame, int(np.bitwise_count(detected ^ labels.ravel()).sum()))
        frames += F
    point.wallclock = time.perf_counter() - t0
    if point.bits_sent == 0:
        raise DomainError("no bits were simulated")
    return point


def run_ber_sweep(scenario: ScenarioConfig, *, backend=None) -> BerCurve:
    cb = scenario.codebook()
    curve = BerCurve(scenario)
    for k, snr in enumerate(scenario.snr_grid()):
        rng = np.random.default_rng(point_seed(scenario.seed, scenario.name, k))
        p = monte_carlo_ber(scenario, snr, rng, backend=backend, codebook=cb)
        log.info("%s %5.1f dB: %d/%d errors, BER %.3e (%.1fs)",
                 scenario.name, snr, p.bit_errors, p.bits_sent, p.ber_sim, p.wallclock)
        curve.points.append(p)
    if scenario.theory:
        if scenario.scheme == "coherent_sm_pa":
            log.info("%s: no bound for the coherent detector, skipped", scenario.name)
        else:
            attach_bound(curve)
    return curve


def _bound_values(scenario: ScenarioConfig, grid) -> np.ndarray:
    cb = scenario.codebook()
    stats = scenario.channel_stats()
    N0 = [scenario.noise_level(s) for s in grid]
    # one seed for the whole curve: every SNR point shares the sampled states
    rng = np.random.default_rng(point_seed(scenario.seed, scenario.name + "#bound", 0))
    return ber_union_bound(cb, stats, N0, scenario.bound_config(), rng)


def attach_bound(curve: BerCurve) -> BerCurve:
    values = _bound_values(curve.scenario, [p.ebn0_db for p in curve.points])
    for p, v in zip(curve.points, values):
        p.ber_bound = float(v)
    return curve


def run_theory_sweep(scenario: ScenarioConfig) -> BerCurve:
    """Union-bound values on the scenario grid (no simulation)."""
    if scenario.scheme == "coherent_sm_pa":
        raise DomainError("the union bound covers the differential detector only")
    grid = scenario.snr_grid()
    curve = BerCurve(scenario, [BerPoint(float(s)) for s in grid])
    for p, v in zip(curve.points, _bound_values(scenario, grid)):
        p.ber_bound = float(v)
    return curve

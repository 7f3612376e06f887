"""Scenario descriptions, presets and the flat config-file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from dsmpa.analysis import BoundConfig
from dsmpa.channel import ChannelParams, Geometry, channel_stats
from dsmpa.codebook import Codebook, CodebookConfig
from dsmpa.errors import ConfigurationError
from dsmpa.link import ebn0_to_n0

__all__ = ["SCHEMES", "ScenarioConfig", "PRESETS", "preset", "load_config", "apply_overrides"]

SCHEMES = ("dsm_pa", "dsm_pa_no_alamouti", "coherent_sm_pa")
SNR_REFERENCES = ("received", "transmit")

DEPLOYMENTS = {
    "close": (9.0, 10.0, 11.0),
    "equal": (2.0, 10.0, 18.0),
    "nonuniform": (1.5, 7.5, 18.5),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one BER curve."""

    name: str = "custom"
    scheme: str = "dsm_pa"
    modulation_order: int = 2
    num_positions: int = 3
    # geometry
    position_x: tuple = DEPLOYMENTS["nonuniform"]
    waveguide_y: tuple = (9.75, 10.25)
    waveguide_height: float = 3.0
    receiver: tuple = (13.2, 7.1, 0.0)
    region_side: float = 20.0
    carrier_freq: float = 28e9
    # channel
    path_loss_exponent: float = 2.2
    rician_factor: float = 5.0
    # "received": Eb/N0 is measured after path loss (mean path gain 1);
    # "transmit": Eb counts transmitted energy only
    snr_reference: str = "received"
    # sweep and stopping rule
    snr_min_db: float = 0.0
    snr_max_db: float = 40.0
    snr_step_db: float = 2.0
    min_bit_errors: int = 200
    max_bits: int = 20_000_000
    # errors arrive in bursts (one channel per frame), so a point also needs
    # this many frames before the error count may stop it
    min_frames: int = 20_000
    blocks_per_frame: int = 50
    frames_per_batch: int = 200
    seed: int = 0
    # bound
    theory: bool = False
    quad_nodes: int = 64
    num_past_states: int = 200
    past_depth: int = 8
    pair_subsample: int | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        for name in ("position_x", "waveguide_y", "receiver"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if len(self.position_x) != self.num_positions:
            raise ConfigurationError(
                f"{len(self.position_x)} pinching positions given for num_positions={self.num_positions}"
            )
        if self.snr_reference not in SNR_REFERENCES:
            raise ConfigurationError(f"snr_reference must be one of {SNR_REFERENCES}")
        if self.snr_step_db <= 0 or self.snr_max_db < self.snr_min_db:
            raise ConfigurationError("SNR grid must be nonempty and increasing")
        if self.min_bit_errors < 1 or self.max_bits < 1 or self.blocks_per_frame < 1:
            raise ConfigurationError("stopping rule and frame length must be positive")
        if self.min_frames < 0:
            raise ConfigurationError("min_frames must be >= 0")
        if self.frames_per_batch < 1:
            raise ConfigurationError("frames_per_batch must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        # constructing these validates the remaining fields
        self.codebook_config()
        self.geometry()
        self.channel_params()
        self.bound_config()

    # -- derived objects -------------------------------------------------
    def codebook_config(self) -> CodebookConfig:
        return CodebookConfig(self.modulation_order, self.num_positions)

    def codebook(self) -> Codebook:
        kind = "diagonal" if self.scheme == "dsm_pa_no_alamouti" else "alamouti"
        return Codebook(self.codebook_config(), kind)

    def geometry(self) -> Geometry:
        return Geometry(
            position_x=self.position_x,
            waveguide_y=self.waveguide_y,
            waveguide_height=self.waveguide_height,
            receiver=self.receiver,
            region_side=self.region_side,
            carrier_freq=self.carrier_freq,
        )

    def channel_params(self) -> ChannelParams:
        return ChannelParams(self.path_loss_exponent, self.rician_factor)

    def channel_stats(self):
        return channel_stats(self.geometry(), self.channel_params())

    def noise_level(self, ebn0_db: float) -> float:
        """N0 for a grid point, including the received-energy scaling."""
        N0 = ebn0_to_n0(ebn0_db, self.codebook_config())
        if self.snr_reference == "received":
            N0 *= float(np.mean(self.channel_stats().path_gain))
        return N0

    def bound_config(self) -> BoundConfig:
        return BoundConfig(self.quad_nodes, self.num_past_states, self.past_depth, self.pair_subsample)

    def snr_grid(self) -> np.ndarray:
        n = int(np.floor((self.snr_max_db - self.snr_min_db) / self.snr_step_db + 1e-9)) + 1
        return np.round(self.snr_min_db + self.snr_step_db * np.arange(n), 10)

    @property
    def modulation(self) -> str:
        return {2: "BPSK", 4: "QPSK"}.get(self.modulation_order, f"{self.modulation_order}PSK")


FIELD_NAMES = {f.name for f in dataclasses.fields(ScenarioConfig)}


def _fig3():
    base = ScenarioConfig(theory=True)
    return [
        replace(base, name="fig3/bpsk"),
        replace(base, name="fig3/qpsk", modulation_order=4),
    ]


def _fig4():
    base = ScenarioConfig()
    return [replace(base, name=f"fig4/{s}", scheme=s) for s in SCHEMES]


def _fig5():
    base = ScenarioConfig()
    return [replace(base, name=f"fig5/{k}", position_x=v) for k, v in DEPLOYMENTS.items()]


PRESETS = {"fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "custom": lambda: [ScenarioConfig()]}


def preset(name: str) -> list[ScenarioConfig]:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown scenario {name!r}; choose from {sorted(PRESETS)}") from None


def apply_overrides(scenarios, **overrides) -> list[ScenarioConfig]:
    """Replace fields on every scenario, ignoring ``None`` values."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(overrides) - FIELD_NAMES
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return [replace(s, **overrides) for s in scenarios]


def load_config(path) -> dict:
    """Read a flat ``key: value`` YAML mapping of scenario fields."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must be a key/value mapping")
    unknown = set(data) - FIELD_NAMES
    if unknown:
        raise ConfigurationError(f"unknown config keys in {path}: {sorted(unknown)}")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigurationError(f"config must be flat; nested values under {nested}")
    return data

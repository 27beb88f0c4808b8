"""Quasi-static Rayleigh MIMO multipath channel."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class TapProfile:
    """Integer sample delays and linear tap powers (summing to one)."""

    delays: np.ndarray
    powers: np.ndarray
    degenerate: bool = False  # true when quantisation collapsed a dispersive profile to one tap

    def __post_init__(self):
        d = np.asarray(self.delays)
        p = np.asarray(self.powers, dtype=float)
        if d.ndim != 1 or d.shape != p.shape or d.size == 0:
            raise ValueError("delays and powers must be equal-length 1-D arrays")
        if d[0] != 0 or np.any(np.diff(d) <= 0):
            raise ValueError("delays must start at 0 and be strictly ascending")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("tap powers must be non-negative and sum to 1")

    @property
    def length(self) -> int:
        """Channel length L in samples (max delay + 1)."""
        return int(self.delays[-1]) + 1

    @classmethod
    def flat(cls) -> "TapProfile":
        return cls(np.array([0]), np.array([1.0]))


def quantize_profile(delays_s, powers_db, sample_rate: float) -> TapProfile:
    """Round delays to the sample grid, power-combine coinciding taps, normalise."""
    if not sample_rate > 0:
        raise ValueError("sample rate must be positive")
    delays_s = np.asarray(delays_s, dtype=float)
    lin = 10 ** (np.asarray(powers_db, dtype=float) / 10)
    idx = np.round(delays_s * sample_rate).astype(int)
    idx -= idx.min()
    uniq = np.unique(idx)
    power = np.array([lin[idx == u].sum() for u in uniq])
    degenerate = uniq.size == 1 and np.any(delays_s > delays_s.min())
    return TapProfile(uniq, power / power.sum(), bool(degenerate))


def load_profile(path, sample_rate: float) -> TapProfile:
    """Two-column text file: delay in ns, power in dB.  '#' starts a comment."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (delay_ns, power_dB)")
    return quantize_profile(data[:, 0] * 1e-9, data[:, 1], sample_rate)


def epa_profile(sample_rate: float) -> TapProfile:
    with resources.as_file(resources.files("fbmclab") / "data" / "epa.txt") as p:
        return load_profile(p, sample_rate)


def named_profile(name: str, sample_rate: float) -> TapProfile:
    """'epa', 'flat', or a path to a profile file."""
    key = name.strip().lower()
    if key == "epa":
        return epa_profile(sample_rate)
    if key == "flat":
        return TapProfile.flat()
    return load_profile(Path(name), sample_rate)


@dataclass(frozen=True, eq=False)
class MimoChannel:
    """Tap matrices ``taps[..., l, :, :] = H_l`` (n_rx x n_tx) at sample delays
    ``delays[l]``.  Leading axes index independent realisations."""

    delays: np.ndarray
    taps: np.ndarray
    _freq: dict = field(default_factory=dict, repr=False)

    @property
    def n_rx(self) -> int:
        return self.taps.shape[-2]

    @property
    def n_tx(self) -> int:
        return self.taps.shape[-1]

    @property
    def length(self) -> int:
        return int(self.delays[-1]) + 1

    def freq_response(self, N: int) -> np.ndarray:
        """C_n = sum_l H_l exp(-j 2 pi n d_l / N), shape (..., N, n_rx, n_tx)."""
        if N not in self._freq:
            n = np.arange(N)
            ph = np.exp(-2j * np.pi * np.outer(n, self.delays) / N)  # (N, L)
            self._freq[N] = np.einsum("nl,...lrt->...nrt", ph, self.taps)
        return self._freq[N]


def draw_channel(profile: TapProfile, n_tx: int, n_rx: int, rng) -> MimoChannel:
    """H_l = rho_l Z_l with Z_l entries i.i.d. CN(0, 1)."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    L = profile.delays.size
    z = (rng.standard_normal((L, n_rx, n_tx)) + 1j * rng.standard_normal((L, n_rx, n_tx))) / np.sqrt(2)
    return MimoChannel(profile.delays.copy(), np.sqrt(profile.powers)[:, None, None] * z)


def stack_channels(channels) -> MimoChannel:
    """Stack same-profile realisations along a new leading axis."""
    channels = list(channels)
    return MimoChannel(channels[0].delays, np.stack([c.taps for c in channels]))


def identity_channel(n: int) -> MimoChannel:
    return MimoChannel(np.array([0]), np.eye(n, dtype=complex)[None])


def complex_noise(rng: np.random.Generator, shape, noise_power: float) -> np.ndarray:
    return np.sqrt(noise_power / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(x: np.ndarray, channel: MimoChannel, noise_power: float = 0.0, rng=None) -> np.ndarray:
    """Linear convolution with zero history, output cut to the input length.

    ``x`` has shape (..., n_tx, T); the result (..., n_rx, T).  Noise is
    circular complex Gaussian with variance ``noise_power`` per sample.
    """
    x = np.asarray(x)
    T = x.shape[-1]
    out_shape = np.broadcast_shapes(x.shape[:-2], channel.taps.shape[:-3]) + (channel.n_rx, T)
    y = np.zeros(out_shape, dtype=complex)
    for l, d in enumerate(channel.delays):
        if d >= T:
            continue
        H = channel.taps[..., l, :, :]
        y[..., d:] += np.einsum("...rt,...tk->...rk", H, x[..., : T - d])
    if noise_power > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_power > 0")
        y += complex_noise(rng, y.shape, noise_power)
    return y

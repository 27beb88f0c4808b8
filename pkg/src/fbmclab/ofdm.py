"""CP-OFDM MIMO chain used as the comparison baseline."""

from __future__ import annotations

import numpy as np


def ofdm_transmit(grid: np.ndarray, cp_len: int) -> np.ndarray:
    """(..., n_tx, M, N) symbols -> (..., n_tx, M (N + cp)) samples."""
    x = np.fft.ifft(grid, axis=-1, norm="ortho")
    if cp_len:
        x = np.concatenate([x[..., -cp_len:], x], axis=-1)
    return x.reshape(x.shape[:-2] + (-1,))


def ofdm_receive(r: np.ndarray, N: int, cp_len: int) -> np.ndarray:
    """(..., n_rx, M (N + cp)) -> (..., n_rx, M, N) after CP removal and DFT."""
    seg = r.reshape(r.shape[:-1] + (-1, N + cp_len))[..., cp_len:]
    return np.fft.fft(seg, axis=-1, norm="ortho")


def cp_noise_scale(N: int, cp_len: int) -> float:
    """Factor on the noise variance that charges the CP energy to each bit."""
    return (N + cp_len) / N

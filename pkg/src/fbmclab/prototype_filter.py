"""Prototype filter generation (IOTA), the half-symbol-shifted Q-branch twin,
and the per-slice diagonal blocks."""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TAU0 = 2**-0.5  # IOTA lattice: tau0 = nu0 = 1/sqrt(2), symbol period T = 2 tau0


def _gauss(t):
    return 2**0.25 * np.exp(-np.pi * t**2)


def _time_orthogonalised(t):
    k = np.arange(-30, 31)
    s = np.sum(_gauss(t[..., None] - k * TAU0) ** 2, axis=-1)
    return _gauss(t) / np.sqrt(TAU0 * s)


@functools.lru_cache(maxsize=None)
def _iota_spectrum(span: float = 6.0, per_tau: int = 64):
    """IOTA spectrum sampled on a grid of step tau0/per_tau over [-span, span].

    Orthogonalise the Gaussian in time, transform, orthogonalise in frequency.
    All functions involved are real and even, so cosine transforms suffice.
    """
    h = TAU0 / per_tau
    n_side = int(span / h)
    t = np.arange(-n_side, n_side + 1) * h
    y = _time_orthogonalised(t)
    # spectrum on an extended grid so shifted copies are plain index offsets
    n_shift = 12
    ext = n_side + n_shift * per_tau
    f_ext = np.arange(-ext, ext + 1) * h
    Y = (np.cos(2 * np.pi * np.outer(f_ext, t)) @ y) * h
    centre = np.arange(2 * n_side + 1) + n_shift * per_tau
    shifted = np.stack([Y[centre - k * per_tau] for k in range(-n_shift, n_shift + 1)])
    Z = Y[centre] / np.sqrt(TAU0 * np.sum(shifted**2, axis=0))
    return t, Z, h


def iota_waveform(t) -> np.ndarray:
    """Continuous-time IOTA function (unit energy, symbol period sqrt(2))."""
    f, Z, h = _iota_spectrum()
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return (np.cos(2 * np.pi * np.outer(t, f)) @ Z) * h


def shift_half_symbol(coeffs, N: int, advance: bool = False) -> np.ndarray:
    """Q-branch twin: circular shift of the prototype by N/2 samples.

    By default the twin lags the prototype, ``w~[n] = w[(n - N/2) mod KN]``, so
    the imaginary branch of symbol m sits half a symbol after its real branch.
    ``advance=True`` gives the opposite index map ``w~[n] = w[(n + N/2) mod KN]``.
    """
    w = np.asarray(coeffs, dtype=float)
    if N % 2:
        raise ValueError("half-symbol shift needs an even N")
    return np.roll(w, -(N // 2) if advance else N // 2)


def slice_blocks(coeffs, N: int, K: int) -> np.ndarray:
    """(K, N) array; row k is the diagonal of block W_k, samples [kN, kN+N)."""
    w = np.asarray(coeffs, dtype=float)
    if w.shape != (K * N,):
        raise ValueError(f"expected {K * N} coefficients for N={N}, K={K}, got {w.size}")
    return w.reshape(K, N)


@dataclass(frozen=True, eq=False)
class PrototypeFilter:
    N: int
    K: int
    coeffs: np.ndarray
    q_coeffs: np.ndarray

    @classmethod
    def from_coeffs(cls, coeffs, N: int, K: int, advance: bool = False) -> "PrototypeFilter":
        if N % 2:
            raise ValueError("N must be even (the half-symbol shift is undefined otherwise)")
        w = np.array(coeffs, dtype=float)
        slice_blocks(w, N, K)  # length check
        wq = shift_half_symbol(w, N, advance)
        w.flags.writeable = False
        wq.flags.writeable = False
        return cls(N, K, w, wq)

    @property
    def slices(self) -> np.ndarray:
        return slice_blocks(self.coeffs, self.N, self.K)

    @property
    def q_slices(self) -> np.ndarray:
        return slice_blocks(self.q_coeffs, self.N, self.K)

    def branch_slices(self, branch: str) -> np.ndarray:
        return {"I": self.slices, "Q": self.q_slices}[branch]


@functools.lru_cache(maxsize=64)
def generate_iota(N: int, K: int) -> PrototypeFilter:
    """Sampled IOTA prototype of length K*N.

    The waveform is centred on sample KN/2 and sampled at KN points with
    ``w[0] = 0``, giving the symmetry ``w[n] = w[KN - n]``.  Energy is scaled
    to ``sum(w**2) = N`` so each polyphase component has unit average energy.
    """
    if N % 2 or N < 2:
        raise ValueError(f"N must be even and >= 2, got {N}")
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    n = np.arange(K * N)
    w = iota_waveform((n - K * N / 2) * np.sqrt(2) / N)
    w[0] = 0.0
    # enforce the symmetry exactly (quadrature noise is ~1e-16)
    w[1:] = 0.5 * (w[1:] + w[1:][::-1])
    w *= np.sqrt(N / np.sum(w**2))
    return PrototypeFilter.from_coeffs(w, N, K)


def save_coefficients(path, filt: PrototypeFilter) -> None:
    lines = [f"# N={filt.N} K={filt.K}"] + [repr(float(v)) for v in filt.coeffs]
    Path(path).write_text("\n".join(lines) + "\n")


def load_coefficients(path, advance: bool = False) -> PrototypeFilter:
    """Read a coefficient file: header ``# N=<n> K=<k>`` then one value per line."""
    text = Path(path).read_text().splitlines()
    m = re.match(r"#\s*N\s*=\s*(\d+)\s+K\s*=\s*(\d+)\s*$", text[0].strip()) if text else None
    if not m:
        raise ValueError(f"{path}: first line must be the header '# N=<n> K=<k>'")
    N, K = int(m.group(1)), int(m.group(2))
    values = [float(s) for s in text[1:] if s.strip() and not s.lstrip().startswith("#")]
    if len(values) != N * K:
        raise ValueError(f"{path}: header promises N*K = {N * K} coefficients, found {len(values)}")
    return PrototypeFilter.from_coeffs(values, N, K, advance)

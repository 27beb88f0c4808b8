"""Transmit chain, receiver front end, demodulation and one-tap MIMO equalisation.

Shapes: symbol grids are (..., n_streams, M, N); time signals are
(..., n_streams, rows * N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import BranchGrid, FbmcConfig
from .filter_bank import build_synthesis, phase_vector
from .prototype_filter import PrototypeFilter


class SingularChannelError(np.linalg.LinAlgError):
    def __init__(self, subcarrier: int, index: tuple = ()):
        self.subcarrier = subcarrier
        self.index = index
        where = f" (realisation {index})" if index else ""
        super().__init__(f"channel matrix is singular at subcarrier {subcarrier}{where}; ZF undefined")


def phase_matrix(M: int, N: int, branch: str = "I") -> np.ndarray:
    """(M, N) stack of phase diagonals."""
    return np.stack([phase_vector(m, N, branch) for m in range(M)])


def _check_grid(x: np.ndarray, cfg: FbmcConfig, streams: int, what: str):
    want = (streams, cfg.block_len, cfg.n_subcarriers)
    if x.shape[-3:] != want:
        raise ValueError(f"{what}: expected trailing shape {want}, got {x.shape[-3:]}")


def transmit(grid: BranchGrid, filt: PrototypeFilter, cfg: FbmcConfig) -> np.ndarray:
    """Sum of the I-branch and Q-branch synthesis outputs, per tx stream."""
    _check_grid(grid.real, cfg, cfg.n_tx, "transmit")
    _check_grid(grid.imag, cfg, cfg.n_tx, "transmit")
    M, N = cfg.block_len, cfg.n_subcarriers
    out = 0
    for branch, s in (("I", grid.real), ("Q", grid.imag)):
        b = np.fft.ifft(phase_matrix(M, N, branch) * s, axis=-1, norm="ortho")
        out = out + build_synthesis(filt, branch, M, cfg.cut_front, cfg.cut_rear).apply(b)
    return out


def receive_front(r: np.ndarray, filt: PrototypeFilter, cfg: FbmcConfig) -> tuple[np.ndarray, np.ndarray]:
    """Matched filtering by the transposed synthesis matrices: (x_I, x_Q), each
    (..., n_rx, M, N)."""
    P = {b: build_synthesis(filt, b, cfg.block_len, cfg.cut_front, cfg.cut_rear) for b in ("I", "Q")}
    if r.shape[-1] != P["I"].shape[0]:
        raise ValueError(f"receive_front: expected {P['I'].shape[0]} samples, got {r.shape[-1]}")
    return P["I"].adjoint(r), P["Q"].adjoint(r)


def demod(x: np.ndarray, m: int | None = None) -> np.ndarray:
    """Unitary DFT followed by derotation with the conjugate I-branch phase.

    ``x`` is one segment (..., N) when ``m`` is given, else (..., M, N).  Both
    branches use the same derotation, so the wanted Q-branch term lands on the
    imaginary axis.
    """
    X = np.fft.fft(x, axis=-1, norm="ortho")
    N = x.shape[-1]
    if m is not None:
        return np.conj(phase_vector(m, N)) * X
    return np.conj(phase_matrix(x.shape[-2], N)) * X


def build_equalizer(C: np.ndarray, noise_power: float, symbol_power: float = 1.0, nu: int = 1) -> np.ndarray:
    """Per-subcarrier linear equaliser, shape (..., N, n_tx, n_rx).

    ``E = (C^H C + nu sigma^2/delta^2 I)^-1 C^H``, which equals
    ``C^H (C C^H + nu sigma^2/delta^2 I)^-1``.  With ``nu = 0`` this is the
    (pseudo-)inverse; a rank-deficient ``C_n`` then raises
    :class:`SingularChannelError`.
    """
    C = np.asarray(C)
    nt = C.shape[-1]
    Ch = np.conj(np.swapaxes(C, -1, -2))
    gram = Ch @ C
    if nu == 0:
        s = np.linalg.svd(C, compute_uv=False)
        bad = s[..., -1] <= 1e-12 * s[..., 0]
        if np.any(bad):
            idx = tuple(int(v) for v in np.argwhere(bad)[0])
            raise SingularChannelError(idx[-1], idx[:-1])
        return np.linalg.solve(gram, Ch)
    reg = nu * noise_power / symbol_power
    return np.linalg.solve(gram + reg * np.eye(nt), Ch)


def equalize(y: np.ndarray, E: np.ndarray) -> np.ndarray:
    """u[.., t, m, n] = sum_r E[.., n, t, r] y[.., r, m, n]."""
    if y.shape[-1] != E.shape[-3] or y.shape[-3] != E.shape[-1]:
        raise ValueError(f"equalize: y {y.shape} incompatible with E {E.shape}")
    return np.einsum("...ntr,...rmn->...tmn", E, y)


@dataclass(frozen=True)
class EqualizedGrid:
    """Equalised receiver outputs for both branches, (..., n_tx, M, N) complex."""

    real_branch: np.ndarray
    imag_branch: np.ndarray

    def extract(self) -> BranchGrid:
        """Uncompensated symbol estimates: Re of the I branch, Im of the Q branch."""
        return BranchGrid(self.real_branch.real.copy(), self.imag_branch.imag.copy())


def receive(r: np.ndarray, filt: PrototypeFilter, cfg: FbmcConfig, E: np.ndarray) -> EqualizedGrid:
    xI, xQ = receive_front(r, filt, cfg)
    return EqualizedGrid(equalize(demod(xI), E), equalize(demod(xQ), E))

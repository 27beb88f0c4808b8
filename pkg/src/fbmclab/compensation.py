"""Receiver-side compensation of the interference caused by filter output
truncation.

Per stream the noise-free flat-channel receiver sees ``z = T_trunc s`` where
``s`` stacks the real and imaginary symbol parts and ``T_trunc`` is the real
transfer matrix of the truncated bank.  The truncation error is
``D = T_trunc - T_orig``, built from the removed slice products.  Symbol
``(b, m)`` is recovered as

    s_hat = (I + D_mm)^-1 (z_m - sum_{t != (b, m)} D_{m,t} s_t)

using estimates of the other symbols.  Only ``D`` is cancelled, so the
finite-filter residual of the untruncated bank remains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import BranchGrid, FbmcConfig, slice_pam, split_oqam
from .filter_bank import correlation_set, kernel_set, real_transfer, transfer_matrix
from .prototype_filter import PrototypeFilter
from .transceiver import EqualizedGrid

MAX_CONDITION = 1e6
REAL, IMAG = 0, 1


class OrderingError(RuntimeError):
    """A symbol was compensated before a prerequisite estimate existed."""


class IllConditionedError(np.linalg.LinAlgError):
    def __init__(self, branch: int, m: int, cond: float):
        self.branch, self.m, self.cond = branch, m, cond
        name = "real" if branch == REAL else "imaginary"
        super().__init__(f"self-correction matrix of {name} symbol {m} has condition number {cond:.3g} > {MAX_CONDITION:g}")


def schedule_for(K: int, M: int) -> tuple:
    """Compensation order as (branch, m) pairs.

    Even K: real 0 first, the other real symbols, then the imaginary ones.
    Odd K mirrors this: imaginary M-1 first, descending, then real descending.
    """
    if K % 2 == 0:
        return ((REAL, 0),) + tuple((REAL, m) for m in range(1, M)) + tuple((IMAG, m) for m in range(M))
    return ((IMAG, M - 1),) + tuple((IMAG, m) for m in range(M - 2, -1, -1)) + tuple((REAL, m) for m in range(M - 1, -1, -1))


@dataclass(frozen=True, eq=False)
class CompensationSet:
    N: int
    M: int
    K: int
    error: np.ndarray  # (2MN, 2MN) T_trunc - T_orig
    self_matrix: np.ndarray  # (2, M, N, N): I + D_mm
    inverse: np.ndarray  # (2, M, N, N): (I + D_mm + reg I)^-1
    condition: np.ndarray  # (2, M)
    links: np.ndarray  # (2, M, 2, M) nonzero cross kernels, self excluded
    cross: np.ndarray  # (2, M, N, 2MN) error rows with the self block zeroed
    regularization: float

    @property
    def root(self) -> tuple:
        return schedule_for(self.K, self.M)[0]

    @property
    def schedule(self) -> tuple:
        return schedule_for(self.K, self.M)

    def cross_rows(self, branch: int, m: int) -> np.ndarray:
        """(N, 2MN) error rows of symbol (branch, m) with the self block zeroed."""
        return self.cross[branch, m]


def build_compensation(
    filt: PrototypeFilter, cfg: FbmcConfig, regularization: float | None = None
) -> CompensationSet:
    """Precompute the per-symbol corrections and inverses for one scenario.

    ``regularization`` defaults to ``nu sigma^2 / delta^2`` from the config, the
    same loading the MMSE equaliser uses; pass 0 for a plain inverse.
    """
    N, M, K = cfg.n_subcarriers, cfg.block_len, cfg.overlap
    if (filt.N, filt.K) != (N, K):
        raise ValueError(f"filter is (N={filt.N}, K={filt.K}), config wants (N={N}, K={K})")
    if regularization is None:
        regularization = cfg.equalizer * cfg.noise_power / cfg.symbol_power
    cs = correlation_set(filt, M, cfg.cut_front, cfg.cut_rear)
    D = -real_transfer(kernel_set(cs, delta=True), M, N)
    blocks = D.reshape(2, M, N, 2, M, N)
    eye = np.eye(N)
    A = np.empty((2, M, N, N))
    inv = np.empty_like(A)
    cond = np.empty((2, M))
    links = np.zeros((2, M, 2, M), dtype=bool)
    for b in range(2):
        for m in range(M):
            A[b, m] = eye + blocks[b, m, :, b, m, :]
            cond[b, m] = np.linalg.cond(A[b, m])
            if not cond[b, m] <= MAX_CONDITION:
                raise IllConditionedError(b, m, cond[b, m])
            inv[b, m] = np.linalg.inv(A[b, m] + regularization * eye)
            links[b, m] = np.max(np.abs(blocks[b, m]), axis=(0, 3)) > 1e-12
            links[b, m, b, m] = False
    cross = D.reshape(2, M, N, 2 * M * N).copy()
    for b in range(2):
        for m in range(M):
            s = b * M + m
            cross[b, m, :, s * N : (s + 1) * N] = 0.0
    for arr in (D, A, inv, cross):
        arr.flags.writeable = False
    return CompensationSet(N, M, K, D, A, inv, cond, links, cross, float(regularization))


def _stack_known(known: BranchGrid) -> np.ndarray:
    """(..., M, N) pair -> (..., 2MN) in (branch, symbol, subcarrier) order."""
    st = known.stacked()
    return st.reshape(st.shape[:-3] + (-1,))


def _compensate(branch, m, z, known, cset, compensated):
    needed = cset.links[branch, m]
    kr, ki = np.asarray(known.real), np.asarray(known.imag)
    for b, arr in ((REAL, kr), (IMAG, ki)):
        finite = np.isfinite(arr).all(axis=-1).reshape(-1, cset.M).all(axis=0)
        missing = needed[b] & ~finite
        if np.any(missing):
            i = int(np.argmax(missing))
            raise OrderingError(
                f"{'real' if branch == REAL else 'imaginary'} symbol {m} needs an estimate of "
                f"{'real' if b == REAL else 'imaginary'} symbol {i}"
            )
    root = cset.root
    if compensated is not None and (branch, m) != root and needed[root] and not compensated[root]:
        raise OrderingError(
            f"{'real' if root[0] == REAL else 'imaginary'} symbol {root[1]} must be compensated before "
            f"{'real' if branch == REAL else 'imaginary'} symbol {m}"
        )
    est = np.nan_to_num(_stack_known(BranchGrid(kr, ki)), nan=0.0)
    zc = z - est @ cset.cross_rows(branch, m).T
    return zc @ cset.inverse[branch, m].T


def compensate_real(m, u_m, known: BranchGrid, cset: CompensationSet, compensated=None) -> np.ndarray:
    """Real-part estimate of symbol m from the I-branch output ``u_m`` (..., N).

    ``known`` holds current estimates of all symbols (NaN where none exists).
    ``compensated`` is a (2, M) mask of symbols already compensated; when given
    the schedule root must be among them if this symbol's kernels reference it.
    """
    return _compensate(REAL, m, np.real(u_m), known, cset, compensated)


def compensate_imag(m, u_m, known: BranchGrid, cset: CompensationSet, compensated=None) -> np.ndarray:
    """Imaginary-part estimate of symbol m from the Q-branch output ``u_m``."""
    return _compensate(IMAG, m, np.imag(u_m), known, cset, compensated)


def compensate_block(
    eq: EqualizedGrid,
    cset: CompensationSet,
    mode: str = "decision_directed",
    truth=None,
    modulation: str = "QPSK",
    symbol_power: float = 1.0,
    schedule=None,
    enforce_order: bool = True,
) -> np.ndarray:
    """Compensate every symbol of a block; returns the soft complex estimate.

    ``mode="genie"`` feeds the true symbols (``truth``) into the subtraction
    terms and is meant for analysis only.  ``mode="decision_directed"`` starts
    from sliced uncompensated outputs and refreshes each estimate with the
    slice of its compensated value as the sweep proceeds.
    """
    raw = eq.extract()
    out = [raw.real.copy(), raw.imag.copy()]
    compensated = np.zeros((2, cset.M), dtype=bool)
    if mode == "genie":
        if truth is None:
            raise ValueError("genie mode needs the true symbols")
        t = truth if isinstance(truth, BranchGrid) else split_oqam(truth)
        known = [t.real, t.imag]
        compensated[:] = True
    elif mode in ("decision_directed", "dd"):
        known = [slice_pam(raw.real, modulation, symbol_power), slice_pam(raw.imag, modulation, symbol_power)]
    else:
        raise ValueError(f"unknown compensation mode {mode!r}")
    for b, m in schedule if schedule is not None else cset.schedule:
        z = out[b][..., m, :]
        s_hat = _compensate(b, m, z, BranchGrid(known[0], known[1]), cset, compensated if enforce_order else None)
        out[b][..., m, :] = s_hat
        if mode != "genie":
            known[b][..., m, :] = slice_pam(s_hat, modulation, symbol_power)
            compensated[b, m] = True
    return out[0] + 1j * out[1]


def compensated_transfer(cset: CompensationSet, T_trunc: np.ndarray) -> np.ndarray:
    """Genie, noise-free transfer after compensation, row block by row block:
    ``inv_s (T_trunc[s] - D_offdiag[s])``."""
    N, M = cset.N, cset.M
    X = np.empty_like(T_trunc)
    for b in range(2):
        for m in range(M):
            s = b * M + m
            rows = T_trunc[s * N : (s + 1) * N] - cset.cross_rows(b, m)
            X[s * N : (s + 1) * N] = cset.inverse[b, m] @ rows
    return X


def scenario_transfer(filt: PrototypeFilter, cfg: FbmcConfig) -> np.ndarray:
    return transfer_matrix(filt, cfg.block_len, cfg.cut_front, cfg.cut_rear)

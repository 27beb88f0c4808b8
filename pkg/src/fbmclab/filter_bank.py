"""Banded synthesis matrices, branch correlations, truncation-error blocks and
phase-rotated interference kernels.

Conventions
-----------
* Block row ``r`` of a truncated synthesis matrix is block row ``r + cut_front``
  of the full matrix, whose block ``(r', c)`` is ``diag(W_{r'-c})`` when
  ``0 <= r'-c <= K-1``.
* Every correlation block ``G_{m,i} = sum_r W_{r-m} W_{r-i}`` is diagonal and is
  stored as its length-N diagonal.  Correlation arrays have shape (M, M, N).
* Branch pairs ``(a, b)`` read "row branch a, column branch b", e.g. ``("I",
  "Q")`` is the I-branch analysis filter against the Q-branch synthesis filter.
* Kernel rows are derotated with the I-branch phase for both branches.  The
  wanted Q-branch component then lies on the imaginary axis, so the real
  transfer matrix takes Re for I rows and Im for Q rows.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .prototype_filter import PrototypeFilter

BRANCHES = ("I", "Q")
PAIRS = (("I", "I"), ("I", "Q"), ("Q", "Q"), ("Q", "I"))
ZERO_TOL = 1e-12


def _check_cut(K: int, i_F: int, i_R: int):
    if i_F < 0 or i_R < 0:
        raise ValueError("truncation counts must be non-negative")
    if i_F + i_R > K - 1:
        raise ValueError(f"i_F + i_R = {i_F + i_R} exceeds K - 1 = {K - 1}")


@dataclass(frozen=True, eq=False)
class SynthesisMatrix:
    """Per-stream filter matrix held as its K slice vectors."""

    slices: np.ndarray  # (K, N)
    block_len: int
    cut_front: int = 0
    cut_rear: int = 0

    @property
    def N(self) -> int:
        return self.slices.shape[1]

    @property
    def K(self) -> int:
        return self.slices.shape[0]

    @property
    def rows(self) -> int:
        """Number of N-sample block rows kept."""
        return self.K + self.block_len - 1 - self.cut_front - self.cut_rear

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows * self.N, self.block_len * self.N

    def block_index(self, r: int, c: int) -> int | None:
        k = r + self.cut_front - c
        return k if 0 <= k < self.K else None

    def _spans(self):
        """(k, first kept row, first column, count) for each slice k."""
        R, M, iF = self.rows, self.block_len, self.cut_front
        for k in range(self.K):
            # rows r = c + k - iF for columns c with 0 <= r < R
            c0 = max(0, iF - k)
            c1 = min(M, R + iF - k)
            if c1 > c0:
                yield k, c0 + k - iF, c0, c1 - c0

    def apply(self, b: np.ndarray) -> np.ndarray:
        """(..., M, N) -> (..., rows*N)."""
        b = np.asarray(b)
        if b.shape[-2:] != (self.block_len, self.N):
            raise ValueError(f"expected trailing shape {(self.block_len, self.N)}, got {b.shape[-2:]}")
        out = np.zeros(b.shape[:-2] + (self.rows, self.N), dtype=np.result_type(b, float))
        for k, r0, c0, n in self._spans():
            out[..., r0 : r0 + n, :] += self.slices[k] * b[..., c0 : c0 + n, :]
        return out.reshape(b.shape[:-2] + (self.rows * self.N,))

    def adjoint(self, o: np.ndarray) -> np.ndarray:
        """Transpose (the slices are real): (..., rows*N) -> (..., M, N)."""
        o = np.asarray(o)
        if o.shape[-1] != self.rows * self.N:
            raise ValueError(f"expected {self.rows * self.N} samples, got {o.shape[-1]}")
        o = o.reshape(o.shape[:-1] + (self.rows, self.N))
        out = np.zeros(o.shape[:-2] + (self.block_len, self.N), dtype=np.result_type(o, float))
        for k, r0, c0, n in self._spans():
            out[..., c0 : c0 + n, :] += self.slices[k] * o[..., r0 : r0 + n, :]
        return out

    def dense(self) -> np.ndarray:
        """Materialised matrix.  Test oracle only."""
        N = self.N
        P = np.zeros(self.shape)
        for r in range(self.rows):
            for c in range(self.block_len):
                k = self.block_index(r, c)
                if k is not None:
                    P[r * N : (r + 1) * N, c * N : (c + 1) * N] = np.diag(self.slices[k])
        return P


def build_synthesis(filt: PrototypeFilter, branch: str, M: int, i_F: int = 0, i_R: int = 0) -> SynthesisMatrix:
    _check_cut(filt.K, i_F, i_R)
    return SynthesisMatrix(filt.branch_slices(branch), M, i_F, i_R)


def correlations(Pa: SynthesisMatrix, Pb: SynthesisMatrix) -> np.ndarray:
    """Diagonals of the blocks of ``Pa^T Pb``, shape (M, M, N)."""
    if (Pa.N, Pa.block_len, Pa.cut_front, Pa.cut_rear) != (Pb.N, Pb.block_len, Pb.cut_front, Pb.cut_rear):
        raise ValueError("synthesis matrices differ in (N, M, i_F, i_R)")
    return _row_sum(Pa.slices, Pb.slices, Pa.block_len, range(Pa.cut_front, Pa.cut_front + Pa.rows))


def _row_sum(Wa: np.ndarray, Wb: np.ndarray, M: int, full_rows) -> np.ndarray:
    """sum over full-matrix block rows r' of W_a[r'-m] * W_b[r'-i]."""
    K, N = Wa.shape
    G = np.zeros((M, M, N))
    for rp in full_rows:
        ms = [m for m in range(M) if 0 <= rp - m < K]
        for m in ms:
            for i in ms:
                G[m, i] += Wa[rp - m] * Wb[rp - i]
    return G


def delta_blocks(filt: PrototypeFilter, i_F: int, i_R: int, pair: tuple[str, str], M: int) -> np.ndarray:
    """Truncation error ``G_orig - G_trunc``: the products over the i_F front
    and i_R rear block rows that truncation removes, shape (M, M, N)."""
    _check_cut(filt.K, i_F, i_R)
    total = filt.K + M - 1
    removed = list(range(i_F)) + list(range(total - i_R, total))
    return _row_sum(filt.branch_slices(pair[0]), filt.branch_slices(pair[1]), M, removed)


@dataclass(frozen=True, eq=False)
class CorrelationSet:
    """The four branch correlations of a truncated bank plus their errors."""

    M: int
    cut_front: int
    cut_rear: int
    g: dict  # pair -> (M, M, N)
    delta: dict  # pair -> (M, M, N)

    def block(self, pair, m: int, i: int, delta: bool = False) -> np.ndarray:
        src = self.delta if delta else self.g
        return np.diag(src[tuple(pair)][m, i])


@functools.lru_cache(maxsize=128)
def correlation_set(filt: PrototypeFilter, M: int, i_F: int = 0, i_R: int = 0) -> CorrelationSet:
    P = {b: build_synthesis(filt, b, M, i_F, i_R) for b in BRANCHES}
    g = {p: correlations(P[p[0]], P[p[1]]) for p in PAIRS}
    d = {p: delta_blocks(filt, i_F, i_R, p, M) for p in PAIRS}
    return CorrelationSet(M, i_F, i_R, g, d)


# ---------------------------------------------------------------- kernels

def phase_vector(m: int, N: int, branch: str = "I") -> np.ndarray:
    """Diagonal of the phase matrix: exp(-j pi (n + 2m) / 2), times j on Q."""
    n = np.arange(N)
    # exponent reduced mod 4 so the values are exact quarter turns
    phi = np.array([1, -1j, -1, 1j])[(n + 2 * m) % 4]
    return phi if branch == "I" else 1j * phi


def circulant_from_diag(g: np.ndarray) -> np.ndarray:
    """``F diag(g) F^H`` for the unitary DFT F, i.e. C[p, q] = fft(g)[(p-q) mod N] / N.

    Works on stacks: (..., N) -> (..., N, N).
    """
    g = np.asarray(g)
    N = g.shape[-1]
    c = np.fft.fft(g, axis=-1) / N
    idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return c[..., idx]


def interference_kernel(g: np.ndarray, m: int, i: int, pair: tuple[str, str], N: int | None = None) -> np.ndarray:
    """Complex N x N kernel ``Phi_m^H F diag(g) F^H Phi^b_i`` for one block.

    ``g`` is the diagonal of a correlation (or truncation-error) block.  Antenna
    replication is implicit: the same kernel applies to every stream.
    """
    g = np.asarray(g, dtype=float)
    N = g.shape[-1] if N is None else N
    left = np.conj(phase_vector(m, N, "I"))
    right = phase_vector(i, N, pair[1])
    return left[:, None] * circulant_from_diag(g) * right[None, :]


def _kernel_grid(G: np.ndarray, col_branch: str) -> np.ndarray:
    """All (m, i) kernels of one pair at once, shape (M, M, N, N)."""
    M, _, N = G.shape
    left = np.conj(np.stack([phase_vector(m, N, "I") for m in range(M)]))
    right = np.stack([phase_vector(i, N, col_branch) for i in range(M)])
    return left[:, None, :, None] * circulant_from_diag(G) * right[None, :, None, :]


def kernel_set(cs: CorrelationSet, delta: bool = False) -> dict:
    """pair -> complex kernels (M, M, N, N) built from G (or from delta G)."""
    src = cs.delta if delta else cs.g
    return {p: _kernel_grid(src[p], p[1]) for p in PAIRS}


def _extract(branch: str, z: np.ndarray) -> np.ndarray:
    return z.real if branch == "I" else z.imag


def real_transfer(kernels: dict, M: int, N: int) -> np.ndarray:
    """Assemble the real (2MN, 2MN) map from [s_re; s_im] to extracted outputs.

    Index layout is (branch, symbol, subcarrier) on both axes.
    """
    T = np.zeros((2, M, N, 2, M, N))
    for a_idx, a in enumerate(BRANCHES):
        for b_idx, b in enumerate(BRANCHES):
            T[a_idx, :, :, b_idx, :, :] = _extract(a, kernels[(a, b)]).transpose(0, 2, 1, 3)
    return T.reshape(2 * M * N, 2 * M * N)


@functools.lru_cache(maxsize=64)
def transfer_matrix(filt: PrototypeFilter, M: int, i_F: int = 0, i_R: int = 0) -> np.ndarray:
    """Noise-free flat-channel map from the real symbol vector to the
    extracted receiver outputs, per stream.  Read-only cached array."""
    T = real_transfer(kernel_set(correlation_set(filt, M, i_F, i_R)), M, filt.N)
    T.flags.writeable = False
    return T


def orthogonality_residual(filt: PrototypeFilter, block_len: int = 8) -> float:
    """max |T - I| of the untruncated bank: the finite-K orthogonality error."""
    T = transfer_matrix(filt, block_len, 0, 0)
    return float(np.max(np.abs(T - np.eye(T.shape[0]))))

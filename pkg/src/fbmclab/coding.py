"""Rate-1/2 convolutional code (constraint length 7, generators 133/171 octal)
with hard-decision Viterbi decoding and a seeded block interleaver."""

from __future__ import annotations

import numpy as np

from .core_model import STREAM_INTERLEAVER, trial_rng

CONSTRAINT = 7
GENERATORS = (0o133, 0o171)
N_STATES = 1 << (CONSTRAINT - 1)
RATE = 0.5


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x >>= 1
    return out


def _trellis():
    """next_state[s, u] and the two output bits out[s, u, 2].

    The register holds the newest input in its most significant bit.
    """
    s = np.arange(N_STATES)[:, None]
    u = np.arange(2)[None, :]
    reg = (u << (CONSTRAINT - 1)) | s
    out = np.stack([_parity(reg & g) for g in GENERATORS], axis=-1)
    return reg >> 1, out.astype(np.uint8)


NEXT_STATE, OUTPUT = _trellis()


def info_length(coded_length: int) -> int:
    """Information bits that fit a coded block of ``coded_length`` bits,
    including the zero tail."""
    k = coded_length // 2 - (CONSTRAINT - 1)
    if k <= 0:
        raise ValueError(f"coded block of {coded_length} bits is too short")
    return k


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Encode (..., k) bits with a zero tail; output (..., 2 (k + 6))."""
    bits = np.asarray(bits, dtype=np.uint8)
    tail = np.zeros(bits.shape[:-1] + (CONSTRAINT - 1,), dtype=np.uint8)
    u = np.concatenate([bits, tail], axis=-1)
    state = np.zeros(bits.shape[:-1], dtype=np.int64)
    out = np.empty(u.shape + (2,), dtype=np.uint8)
    for t in range(u.shape[-1]):
        out[..., t, :] = OUTPUT[state, u[..., t]]
        state = NEXT_STATE[state, u[..., t]]
    return out.reshape(bits.shape[:-1] + (-1,))


# predecessor table: for each state, the two (previous state, input) pairs
_PREV = np.zeros((N_STATES, 2), dtype=np.int64)
_PREV_IN = np.zeros((N_STATES, 2), dtype=np.int64)
_fill = np.zeros(N_STATES, dtype=np.int64)
for _s in range(N_STATES):
    for _u in range(2):
        _n = NEXT_STATE[_s, _u]
        _PREV[_n, _fill[_n]] = _s
        _PREV_IN[_n, _fill[_n]] = _u
        _fill[_n] += 1
del _s, _u, _n, _fill


def viterbi_decode(coded: np.ndarray) -> np.ndarray:
    """Hard-decision Viterbi for a zero-terminated block; (..., 2 n) -> (..., n - 6)."""
    coded = np.asarray(coded, dtype=np.uint8)
    lead = coded.shape[:-1]
    r = coded.reshape((-1, coded.shape[-1] // 2, 2))
    B, T, _ = r.shape
    inf = np.iinfo(np.int32).max // 2
    metric = np.full((B, N_STATES), inf, dtype=np.int32)
    metric[:, 0] = 0
    choice = np.empty((T, B, N_STATES), dtype=np.uint8)
    out_prev = OUTPUT[_PREV, _PREV_IN]  # (S, 2, 2) expected bits per branch
    for t in range(T):
        cost = np.sum(out_prev[None] != r[:, t, None, None, :], axis=-1, dtype=np.int32)  # (B, S, 2)
        cand = metric[:, _PREV] + cost
        pick = np.argmin(cand, axis=-1).astype(np.uint8)
        choice[t] = pick
        metric = np.take_along_axis(cand, pick[..., None].astype(np.int64), -1)[..., 0]
    state = np.zeros(B, dtype=np.int64)
    bits = np.empty((B, T), dtype=np.uint8)
    rows = np.arange(B)
    for t in range(T - 1, -1, -1):
        c = choice[t, rows, state]
        bits[:, t] = _PREV_IN[state, c]
        state = _PREV[state, c]
    return bits[:, : T - (CONSTRAINT - 1)].reshape(lead + (-1,))


def interleaver(length: int, seed: int) -> np.ndarray:
    """Fixed pseudo-random permutation, one per seed."""
    return trial_rng(seed, 0, STREAM_INTERLEAVER).permutation(length)


def interleave(bits: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return bits[..., perm]


def deinterleave(bits: np.ndarray, perm: np.ndarray) -> np.ndarray:
    out = np.empty_like(bits)
    out[..., perm] = bits
    return out

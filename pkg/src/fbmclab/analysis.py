"""Deterministic interference analysis: truncation cases, per-symbol SIR and
SINR tables, and the spectral-efficiency accounting.

All quantities here are evaluated from the real transfer matrix of one stream
under a flat identity channel, so they are properties of the filter bank and
not Monte-Carlo estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compensation import build_compensation, compensated_transfer
from .core_model import FbmcConfig
from .filter_bank import transfer_matrix
from .prototype_filter import PrototypeFilter, generate_iota

CASES = ("use_it_all", "one_front_and_end", "one_front", "one_end", "same_length")
DB_FLOOR = -120.0
SE_SCHEMES = ("use_it_all", "one_front", "compensate_all")


def db(x) -> np.ndarray:
    """10 log10 with a floor of -120 dB for zero (or negative round-off) powers."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.maximum(10 * np.log10(np.maximum(x, 0.0)), DB_FLOOR)


def truncation_case(cfg: FbmcConfig | int, case: str) -> tuple[int, int]:
    """(cut_front, cut_rear) for a named case.

    With ``t = K // 2`` the full cut removes ``t`` blocks in front and
    ``K - 1 - t`` at the rear, which keeps exactly M output blocks.  The
    "one ..." cases keep one extra block at the front, the end, or both.
    """
    K = cfg if isinstance(cfg, int) else cfg.overlap
    t = K // 2
    table = {
        "use_it_all": (0, 0),
        "one_front_and_end": (t - 1, K - 2 - t),
        "one_front": (t - 1, K - 1 - t),
        "one_end": (t, K - 2 - t),
        "same_length": (t, K - 1 - t),
    }
    key = case.replace("-", "_")
    if key not in table:
        raise ValueError(f"unknown truncation case {case!r}; choose from {', '.join(CASES)}")
    cut = table[key]
    if min(cut) < 0:
        raise ValueError(f"case {case!r} is undefined for K={K}")
    return cut


def with_case(cfg: FbmcConfig, case: str) -> FbmcConfig:
    iF, iR = truncation_case(cfg, case)
    return cfg.replace(cut_front=iF, cut_rear=iR)


def filter_for(cfg: FbmcConfig) -> PrototypeFilter:
    return generate_iota(cfg.n_subcarriers, cfg.overlap)


def _row_powers(X: np.ndarray, N: int, M: int):
    """Per (branch, symbol): mean desired power, mean total row power."""
    rows = X.reshape(2, M, N, 2 * M * N)
    d = np.arange(N)
    diag = np.stack([[rows[b, m, d, (b * M + m) * N + d] for m in range(M)] for b in range(2)])
    return np.mean(diag**2, axis=-1), np.mean(np.sum(rows**2, axis=-1), axis=-1)


@dataclass(frozen=True)
class SirReport:
    """Per (branch, symbol) powers for unit real-symbol power.

    Arrays are (2, M); branch 0 carries the real symbol parts.
    """

    K: int
    M: int
    cut_front: int
    cut_rear: int
    compensated: bool
    signal: np.ndarray
    interference: np.ndarray
    total: np.ndarray

    @property
    def signal_db(self) -> np.ndarray:
        return db(self.signal)

    @property
    def interference_db(self) -> np.ndarray:
        return db(self.interference)

    @property
    def sir_db(self) -> np.ndarray:
        return self.signal_db - self.interference_db

    def rows(self):
        """(branch, m, signal_db, interference_db, sir_db) tuples, branch-major."""
        s, i, r = self.signal_db, self.interference_db, self.sir_db
        return [
            ("real" if b == 0 else "imag", m, float(s[b, m]), float(i[b, m]), float(r[b, m]))
            for b in range(2)
            for m in range(self.M)
        ]

    def worst(self) -> tuple[int, int]:
        b, m = np.unravel_index(np.argmin(self.sir_db), self.sir_db.shape)
        return int(b), int(m)


def scenario_matrix(cfg: FbmcConfig, compensated: bool, filt: PrototypeFilter | None = None, regularization=0.0):
    filt = filt or filter_for(cfg)
    T = transfer_matrix(filt, cfg.block_len, cfg.cut_front, cfg.cut_rear)
    if not compensated:
        return T, None
    cset = build_compensation(filt, cfg, regularization)
    return compensated_transfer(cset, T), cset


def sir_table(cfg: FbmcConfig, compensated: bool = False, filt: PrototypeFilter | None = None) -> SirReport:
    """Noise-free SIR per symbol from the transfer matrix (genie compensation
    when ``compensated``)."""
    X, _ = scenario_matrix(cfg, compensated, filt)
    sig, tot = _row_powers(X, cfg.n_subcarriers, cfg.block_len)
    return SirReport(
        cfg.overlap, cfg.block_len, cfg.cut_front, cfg.cut_rear, compensated, sig, np.maximum(tot - sig, 0.0), tot
    )


def noise_power_for(ebn0_db: float, bits_per_symbol: int, symbol_power: float = 1.0, code_rate: float = 1.0) -> float:
    """Per-sample noise variance for a given Eb/N0 (FBMC, no CP)."""
    return symbol_power / (bits_per_symbol * code_rate * 10 ** (ebn0_db / 10))


def sinr_table(cfg: FbmcConfig, noise_power: float, compensated: bool, filt: PrototypeFilter | None = None):
    """Per complex symbol m: (signal, interference, noise) mean powers, each (M,).

    The real and imaginary parts carry half the symbol power each.  The noise
    on the extracted outputs has covariance ``sigma^2/2 T_ss`` per symbol;
    compensation maps it through the regularised inverse.
    """
    filt = filt or filter_for(cfg)
    N, M = cfg.n_subcarriers, cfg.block_len
    reg = cfg.equalizer * noise_power / cfg.symbol_power
    X, cset = scenario_matrix(cfg, compensated, filt, reg)
    T = transfer_matrix(filt, M, cfg.cut_front, cfg.cut_rear)
    sig, tot = _row_powers(X, N, M)
    half = cfg.symbol_power / 2
    noise = np.empty((2, M))
    for b in range(2):
        for m in range(M):
            s = slice((b * M + m) * N, (b * M + m + 1) * N)
            C = T[s, s]
            if cset is not None:
                C = cset.inverse[b, m] @ C @ cset.inverse[b, m].T
            noise[b, m] = noise_power / 2 * np.trace(C) / N
    return half * sig.sum(0), half * np.maximum(tot - sig, 0).sum(0), noise.sum(0)


def se_formula(sinr: np.ndarray, alpha: int, n_streams: int) -> float:
    """min(Nt, Nr) * M/(M+alpha) * mean_m log2(1 + SINR_m)."""
    sinr = np.asarray(sinr, dtype=float)
    M = sinr.size
    # weight each distinct value by its share so equal SINRs give exactly the
    # same mean for every M
    vals, counts = np.unique(sinr, return_counts=True)
    mean = math.fsum((c / M) * v for v, c in zip(np.log2(1 + vals), counts))
    return float(n_streams * (M / (M + alpha)) * mean)


def scheme_setup(cfg: FbmcConfig, scheme: str) -> tuple[FbmcConfig, bool, int]:
    """(config with the scheme's cut, compensated?, overhead alpha)."""
    if scheme == "use_it_all":
        return with_case(cfg, "use_it_all"), False, cfg.overlap - 1
    if scheme == "one_front":
        return with_case(cfg, "one_front"), False, 1
    if scheme == "compensate_all":
        return with_case(cfg, "same_length"), True, 0
    raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(SE_SCHEMES)}")


@dataclass(frozen=True)
class SeReport:
    scheme: str
    M: int
    K: int
    ebn0_db: float
    alpha: int
    eta: float  # M / (K + M - 1), the untruncated transmission efficiency
    factor: float  # M / (M + alpha)
    overhead: float  # alpha / M
    sinr_db: np.ndarray
    se: float


def spectral_efficiency(cfg: FbmcConfig, snr_grid, schemes=SE_SCHEMES) -> list[SeReport]:
    filt = filter_for(cfg)
    M, K = cfg.block_len, cfg.overlap
    out = []
    for scheme in schemes:
        scfg, comp, alpha = scheme_setup(cfg, scheme)
        for x in snr_grid:
            sigma2 = noise_power_for(x, cfg.bits_per_symbol, cfg.symbol_power)
            s, i, n = sinr_table(scfg.replace(noise_power=sigma2), sigma2, comp, filt)
            sinr = s / (i + n)
            out.append(
                SeReport(
                    scheme, M, K, float(x), alpha, M / (K + M - 1), M / (M + alpha), alpha / M,
                    db(sinr), se_formula(sinr, alpha, min(cfg.n_tx, cfg.n_rx)),
                )
            )
    return out

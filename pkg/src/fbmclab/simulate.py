"""Monte-Carlo BER of the FBMC link and the CP-OFDM baseline.

Every trial draws its bits, channel and noise from generators keyed by
``(seed, point, trial, purpose)``, so FBMC schemes and OFDM at the same
(seed, point) see identical bits and channel realisations, and results do not
depend on the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import filter_for, noise_power_for, with_case
from .channel import apply_channel, complex_noise, draw_channel, named_profile, stack_channels
from .coding import RATE, conv_encode, deinterleave, info_length, interleave, interleaver, viterbi_decode
from .compensation import build_compensation, compensate_block
from .core_model import STREAM_CHANNEL, STREAM_NOISE, FbmcConfig, demap_qam, map_qam, random_bits, split_oqam, trial_rng
from .ofdm import cp_noise_scale, ofdm_receive, ofdm_transmit
from .transceiver import build_equalizer, equalize, receive, transmit

SCHEMES = ("use_it_all", "one_front", "same_length", "compensated", "ofdm")
COMPENSATE = ("off", "genie", "dd")
CHUNK = 16
Z95 = 1.959963984540054


@dataclass(frozen=True)
class BerPoint:
    scheme: str
    ebn0_db: float
    errors: int
    bits: int
    trials: int
    converged: bool
    note: str = ""

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    def wilson(self, z: float = Z95) -> tuple[float, float]:
        n, p = self.bits, self.ber
        if n == 0:
            return 0.0, 1.0
        d = 1 + z * z / n
        c = (p + z * z / (2 * n)) / d
        h = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / d
        return max(0.0, c - h), min(1.0, c + h)

    @property
    def half_width(self) -> float:
        lo, hi = self.wilson()
        return (hi - lo) / 2


def worker_count() -> int:
    try:
        n = int(os.environ.get("FBMCLAB_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def _block_bits(cfg: FbmcConfig) -> int:
    return cfg.bits_per_symbol * cfg.n_tx * cfg.block_len * cfg.n_subcarriers


class _Payload:
    """Bit source and sink for one block, coded or uncoded."""

    def __init__(self, cfg: FbmcConfig):
        self.cfg = cfg
        self.coded_len = _block_bits(cfg)
        self.k = info_length(self.coded_len) if cfg.coded else self.coded_len
        self.perm = interleaver(self.coded_len, cfg.seed) if cfg.coded else None

    def grids(self, trials, point):
        cfg = self.cfg
        info = np.stack([random_bits(cfg, t, point, self.k) for t in trials])
        tx = info
        if cfg.coded:
            c = conv_encode(info)
            tx = np.concatenate([c, np.zeros((len(trials), self.coded_len - c.shape[-1]), np.uint8)], axis=-1)
            tx = interleave(tx, self.perm)
        shape = (len(trials), cfg.n_tx, cfg.block_len, cfg.n_subcarriers)
        return info, map_qam(tx, cfg.modulation, cfg.symbol_power, shape)

    def decide(self, est):
        cfg = self.cfg
        hard = demap_qam(est, cfg.modulation, cfg.symbol_power).reshape(est.shape[0], -1)
        if not cfg.coded:
            return hard
        c = deinterleave(hard, self.perm)[:, : 2 * (self.k + 6)]
        return viterbi_decode(c)


def _channels(cfg: FbmcConfig, trials):
    """Channel of each trial; keyed by trial only, so every SNR point of a
    curve sees the same realisations."""
    prof = named_profile(cfg.channel_profile, cfg.sample_rate)
    chans = [draw_channel(prof, cfg.n_tx, cfg.n_rx, trial_rng(cfg.seed, t, STREAM_CHANNEL)) for t in trials]
    return prof, stack_channels(chans)


def _noise(cfg: FbmcConfig, trials, point, shape, sigma2):
    if sigma2 <= 0:
        return 0.0
    return np.stack([complex_noise(trial_rng(cfg.seed, t, STREAM_NOISE, point), shape, sigma2) for t in trials])


def _fbmc_chunk(cfg, filt, cset, compensate, payload, sigma2, trials, point):
    info, grid = payload.grids(trials, point)
    _, ch = _channels(cfg, trials)
    r = apply_channel(transmit(split_oqam(grid), filt, cfg), ch)
    r = r + _noise(cfg, trials, point, r.shape[1:], sigma2)
    E = build_equalizer(ch.freq_response(cfg.n_subcarriers), sigma2, cfg.symbol_power, cfg.equalizer)
    eq = receive(r, filt, cfg, E)
    if cset is None:
        est = eq.extract().combine()
    else:
        mode = "genie" if compensate == "genie" else "decision_directed"
        est = compensate_block(eq, cset, mode, truth=grid, modulation=cfg.modulation, symbol_power=cfg.symbol_power)
    return int(np.count_nonzero(payload.decide(est) != info)), info.size


def _ofdm_chunk(cfg, payload, sigma2, trials, point):
    info, grid = payload.grids(trials, point)
    _, ch = _channels(cfg, trials)
    r = apply_channel(ofdm_transmit(grid, cfg.cp_len), ch)
    r = r + _noise(cfg, trials, point, r.shape[1:], sigma2)
    E = build_equalizer(ch.freq_response(cfg.n_subcarriers), sigma2, cfg.symbol_power, cfg.equalizer)
    est = equalize(ofdm_receive(r, cfg.n_subcarriers, cfg.cp_len), E)
    return int(np.count_nonzero(payload.decide(est) != info)), info.size


def _accumulate(run, min_errors: int, max_trials: int, workers: int, min_trials: int = 0):
    """Run trial chunks in order until ``min_errors`` errors and ``min_trials``
    trials are reached.

    Chunks are evaluated ``workers`` at a time but consumed strictly in order,
    so the stopping point equals that of a sequential run.
    """
    spans = [range(s, min(s + CHUNK, max_trials)) for s in range(0, max_trials, CHUNK)]
    errors = bits = trials = 0
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for w in range(0, len(spans), workers):
            wave = spans[w : w + workers]
            results = list(pool.map(run, wave)) if pool else [run(s) for s in wave]
            for span, (e, b) in zip(wave, results):
                errors, bits, trials = errors + e, bits + b, trials + len(span)
                if errors >= min_errors and trials >= min_trials:
                    return errors, bits, trials
    finally:
        if pool:
            pool.shutdown()
    return errors, bits, trials


def _scheme_config(cfg: FbmcConfig, scheme: str) -> FbmcConfig:
    if scheme in ("compensated", "same_length"):
        return with_case(cfg, "same_length")
    return with_case(cfg, scheme)


def ber_curve(
    cfg: FbmcConfig,
    snr_grid,
    min_errors: int = 200,
    max_trials: int = 2000,
    scheme: str = "same_length",
    compensate: str | None = None,
    progress=None,
    min_trials: int = 0,
) -> list[BerPoint]:
    """BER against Eb/N0 (dB) for one scheme.

    ``scheme="compensated"`` is the same-length cut with the compensation of
    kind ``compensate`` (decision directed by default).  ``same_length`` is
    uncompensated unless ``compensate`` asks otherwise; the remaining cuts
    are never compensated.  Point ``p`` of the grid keys its bits and noise.
    """
    if scheme == "ofdm":
        return ofdm_baseline(cfg, snr_grid, min_errors, max_trials, progress, min_trials)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {', '.join(SCHEMES)}")
    if compensate is not None and compensate not in COMPENSATE:
        raise ValueError(f"unknown compensation {compensate!r}; choose from {', '.join(COMPENSATE)}")
    if scheme == "compensated":
        compensate = "dd" if compensate in (None, "off") else compensate
    elif scheme != "same_length" or compensate is None:
        compensate = "off"
    snr_grid = list(snr_grid)
    if any(b < a for a, b in zip(snr_grid, snr_grid[1:])):
        raise ValueError("snr grid must be ascending")
    scfg = _scheme_config(cfg, scheme)
    filt = filter_for(scfg)
    payload = _Payload(scfg)
    rate = RATE if cfg.coded else 1.0
    points = []
    for p, x in enumerate(snr_grid):
        sigma2 = noise_power_for(x, cfg.bits_per_symbol, cfg.symbol_power, rate)
        cset = None
        if compensate != "off":
            cset = build_compensation(filt, scfg.replace(noise_power=sigma2))

        def run(span, p=p, sigma2=sigma2, cset=cset):
            return _fbmc_chunk(scfg, filt, cset, compensate, payload, sigma2, span, p)

        e, b, t = _accumulate(run, min_errors, max_trials, worker_count(), min_trials)
        tag = scheme if compensate in ("off", "dd") else f"{scheme}+{compensate}"
        points.append(BerPoint(tag, float(x), e, b, t, e >= min_errors))
        if progress:
            progress(points[-1])
    return points


def ofdm_baseline(
    cfg: FbmcConfig, snr_grid, min_errors: int = 200, max_trials: int = 2000, progress=None, min_trials: int = 0
) -> list[BerPoint]:
    """CP-OFDM BER with the same bits and channels as the FBMC runs; the noise
    variance is scaled up by (N + CP)/N to charge the CP energy."""
    prof = named_profile(cfg.channel_profile, cfg.sample_rate)
    note = "" if cfg.cp_len >= prof.length - 1 else "cp shorter than channel delay spread"
    payload = _Payload(cfg)
    rate = RATE if cfg.coded else 1.0
    points = []
    for p, x in enumerate(snr_grid):
        sigma2 = noise_power_for(x, cfg.bits_per_symbol, cfg.symbol_power, rate) * cp_noise_scale(cfg.n_subcarriers, cfg.cp_len)

        def run(span, p=p, sigma2=sigma2):
            return _ofdm_chunk(cfg, payload, sigma2, span, p)

        e, b, t = _accumulate(run, min_errors, max_trials, worker_count(), min_trials)
        points.append(BerPoint("ofdm", float(x), e, b, t, e >= min_errors, note))
        if progress:
            progress(points[-1])
    return points


def ebn0_at_ber(points: list[BerPoint], target: float) -> float:
    """Eb/N0 where the curve crosses ``target``, by linear interpolation of
    log10 BER; nan when the curve never reaches it."""
    x = np.array([p.ebn0_db for p in points])
    y = np.array([p.ber for p in points])
    for k in range(1, len(points)):
        if y[k - 1] >= target > y[k] or (y[k - 1] > target >= y[k]):
            if y[k] <= 0:
                return float(x[k])
            a, b = np.log10(y[k - 1]), np.log10(y[k])
            return float(x[k - 1] + (np.log10(target) - a) * (x[k] - x[k - 1]) / (b - a))
    return float("nan")

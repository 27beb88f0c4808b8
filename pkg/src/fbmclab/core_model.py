"""Scenario configuration, QAM grids, OQAM branch splitting and seeded randomness.

Array layout used throughout the package: a symbol grid is a complex array of
shape ``(..., n_streams, M, N)`` (stream, FBMC symbol, subcarrier).  Leading
axes are free batch dimensions.  :func:`to_stacked` converts to the
antenna-interleaved ``(N * n_streams, M)`` matrix form used in the matrix
model, where row ``n * n_streams + j`` holds subcarrier ``n`` of stream ``j``.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MODULATIONS = {"QPSK": 4, "16QAM": 16, "64QAM": 64}
EQUALIZERS = {"ZF": 0, "MMSE": 1}


class ConfigError(ValueError):
    """Invalid scenario configuration.  ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FbmcConfig:
    """All parameters of one simulation scenario.

    The first block of fields is the core system model.  The trailing fields
    (channel profile, sample rate, cyclic prefix, coding) only matter for the
    Monte-Carlo studies.
    """

    n_subcarriers: int = 64
    block_len: int = 8
    overlap: int = 6
    n_tx: int = 2
    n_rx: int = 2
    cut_front: int = 0
    cut_rear: int = 0
    modulation: str = "QPSK"
    equalizer: int = 1
    symbol_power: float = 1.0
    noise_power: float = 0.0
    seed: int = 0
    channel_profile: str = "epa"
    sample_rate: float = 1.92e6
    cp_len: int = 16
    coded: bool = False

    def __post_init__(self):
        for name, value, problem in self._problems():
            raise ConfigError(f"{name} = {value!r}: {problem}")

    def _problems(self):
        N, K = self.n_subcarriers, self.overlap
        if not _is_pow2(N) or N < 2:
            yield "n_subcarriers", N, "must be a power of two >= 2"
        if self.block_len < 1:
            yield "block_len", self.block_len, "must be >= 1"
        if K < 2:
            yield "overlap", K, "must be >= 2"
        if self.n_tx < 1:
            yield "n_tx", self.n_tx, "must be >= 1"
        if self.n_rx < self.n_tx:
            yield "n_rx", self.n_rx, "must be >= n_tx"
        if self.cut_front < 0:
            yield "cut_front", self.cut_front, "must be >= 0"
        if self.cut_rear < 0:
            yield "cut_rear", self.cut_rear, "must be >= 0"
        if self.cut_front + self.cut_rear > K - 1:
            yield "cut_rear", self.cut_rear, f"cut_front + cut_rear must be <= overlap - 1 = {K - 1}"
        if self.modulation not in MODULATIONS:
            yield "modulation", self.modulation, f"must be one of {sorted(MODULATIONS)}"
        if self.equalizer not in (0, 1):
            yield "equalizer", self.equalizer, "must be 0 (ZF) or 1 (MMSE)"
        if not self.symbol_power > 0:
            yield "symbol_power", self.symbol_power, "must be > 0"
        if not self.noise_power >= 0:
            yield "noise_power", self.noise_power, "must be >= 0"
        if not 0 <= self.seed < 2**64:
            yield "seed", self.seed, "must fit in 64 unsigned bits"
        if not self.sample_rate > 0:
            yield "sample_rate", self.sample_rate, "must be > 0"
        if self.cp_len < 0:
            yield "cp_len", self.cp_len, "must be >= 0"

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(MODULATIONS[self.modulation]))

    @property
    def out_blocks(self) -> int:
        """Number of N-sample blocks actually transmitted per stream."""
        return self.overlap + self.block_len - 1 - self.cut_front - self.cut_rear

    def replace(self, **changes) -> "FbmcConfig":
        return dataclasses.replace(self, **changes)


# section -> key -> parser; keys map to FbmcConfig fields of the same name
# except where _FIELD renames them
_SCHEMA = {
    "system": {
        "n_subcarriers": int,
        "block_len": int,
        "overlap": int,
        "n_tx": int,
        "n_rx": int,
    },
    "truncation": {"cut_front": int, "cut_rear": int},
    "modulation": {"scheme": str, "symbol_power": float},
    "receiver": {"equalizer": str, "noise_power": float},
    "channel": {"profile": str, "sample_rate": float, "cp_len": int},
    "simulation": {"seed": int, "coded": str},
}
_FIELD = {("modulation", "scheme"): "modulation", ("channel", "profile"): "channel_profile"}


def _locate(text: str, section: str | None, key: str | None) -> int | None:
    """1-based line of ``key`` inside ``[section]`` (or of the section header)."""
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"\[(.+)\]$", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None:
            m = re.match(r"([^=:]+)[=:]", line)
            if m and m.group(1).strip().lower() == key:
                return i
    return None


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_equalizer(s: str) -> int:
    v = s.strip().upper()
    if v in EQUALIZERS:
        return EQUALIZERS[v]
    if v in ("0", "1"):
        return int(v)
    raise ValueError(f"expected ZF, MMSE, 0 or 1, got {s!r}")


def parse_config(text: str, path: str | None = None) -> FbmcConfig:
    """Parse the INI-style configuration text.  Errors carry the line number."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"syntax error: {exc.errors[0][1].strip() if exc.errors else exc}", line, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, path) from None

    values: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", _locate(text, section, None), path)
        for key, raw in cp.items(section):
            line = _locate(text, section, key)
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line, path)
            field = _FIELD.get((section, key), key)
            try:
                if field == "equalizer":
                    value = _parse_equalizer(raw)
                elif field == "coded":
                    value = _parse_bool(raw)
                elif field == "modulation":
                    value = raw.strip().upper()
                else:
                    value = _SCHEMA[section][key](raw.strip())
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", line, path) from None
            values[field] = (value, line)

    try:
        return FbmcConfig(**{k: v for k, (v, _) in values.items()})
    except ConfigError as exc:
        # re-raise with the line of the offending key
        m = re.match(r"(\w+) = ", str(exc))
        field = m.group(1) if m else None
        line = values.get(field, (None, None))[1]
        raise ConfigError(str(exc), line, path) from None


def load_config(path: str | Path) -> FbmcConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def dump_config(cfg: FbmcConfig) -> str:
    """Serialize to the same INI text accepted by :func:`parse_config`."""
    out = []
    for section, keys in _SCHEMA.items():
        out.append(f"[{section}]")
        for key in keys:
            field = _FIELD.get((section, key), key)
            value = getattr(cfg, field)
            if field == "equalizer":
                value = "MMSE" if value else "ZF"
            elif field == "coded":
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            out.append(f"{key} = {value}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------- QAM

def pam_levels(order: int, symbol_power: float = 1.0) -> np.ndarray:
    """Per-axis amplitude levels of square QAM, scaled so E|s|^2 = symbol_power."""
    side = int(round(np.sqrt(order)))
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    scale = np.sqrt(symbol_power / (2 * np.mean(levels**2)))
    return levels * scale


def _gray_axis(bits_per_axis: int) -> np.ndarray:
    """Gray code -> level index.  Bit pattern ``g`` (MSB first) maps to level
    ``table[g]`` counted from the most positive level, so all-zero bits sit at
    the positive corner."""
    n = 1 << bits_per_axis
    table = np.empty(n, dtype=int)
    for idx in range(n):
        table[idx ^ (idx >> 1)] = idx
    return table


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    w = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return bits.astype(np.int64) @ w


def map_qam(bits, order: int | str, symbol_power: float = 1.0, shape=None) -> np.ndarray:
    """Gray-mapped square QAM.  Per symbol the first half of the bits selects
    the real level, the second half the imaginary level.

    ``shape`` optionally fixes the output grid shape; the bit count must then
    be exactly ``log2(order) * prod(shape)``.
    """
    order = MODULATIONS[order] if isinstance(order, str) else int(order)
    bps = int(np.log2(order))
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if shape is not None:
        need = bps * int(np.prod(shape))
        if bits.size != need:
            raise ValueError(f"map_qam: got {bits.size} bits, grid {tuple(shape)} needs {need}")
    elif bits.size % bps:
        raise ValueError(f"map_qam: {bits.size} bits is not a multiple of {bps}")
    half = bps // 2
    b = bits.reshape(-1, bps)
    table = _gray_axis(half)
    levels = pam_levels(order, symbol_power)[::-1]  # most positive first
    re = levels[table[_bits_to_int(b[:, :half])]]
    im = levels[table[_bits_to_int(b[:, half:])]]
    s = re + 1j * im
    return s.reshape(shape) if shape is not None else s


def _levels_by_pattern(order: int, symbol_power: float) -> np.ndarray:
    """Axis level carried by each Gray bit pattern 0..sqrt(order)-1."""
    half = int(np.log2(order)) // 2
    return pam_levels(order, symbol_power)[::-1][_gray_axis(half)]


def _axis_decide(x: np.ndarray, by_pattern: np.ndarray) -> np.ndarray:
    """Gray pattern of the nearest level; argmin returns the first minimum, so
    ties go to the smallest pattern."""
    x = np.asarray(x, dtype=float)
    step = abs(by_pattern[0] - by_pattern[1]) if by_pattern.size > 1 else 1.0
    # distances rounded in units of the level spacing so float midpoints tie
    dist = np.round(np.abs(x[..., None] - by_pattern) / step, 9)
    return np.argmin(dist, axis=-1)


def slice_pam(x: np.ndarray, order: int | str, symbol_power: float = 1.0) -> np.ndarray:
    """Nearest per-axis constellation level of a real array (same tie rule as
    :func:`demap_qam`)."""
    order = MODULATIONS[order] if isinstance(order, str) else int(order)
    by_pattern = _levels_by_pattern(order, symbol_power)
    return by_pattern[_axis_decide(x, by_pattern)]


def demap_qam(grid, order: int | str, symbol_power: float = 1.0) -> np.ndarray:
    """Minimum-distance hard decision back to a flat bit array.  Ties resolve
    to the lexicographically smallest bit pattern."""
    order = MODULATIONS[order] if isinstance(order, str) else int(order)
    half = int(np.log2(order)) // 2
    by_pattern = _levels_by_pattern(order, symbol_power)
    g = np.asarray(grid).ravel()
    shifts = np.arange(half - 1, -1, -1)

    def axis_bits(v):
        pattern = _axis_decide(v, by_pattern)
        return ((pattern[:, None] >> shifts) & 1).astype(np.uint8)

    return np.concatenate([axis_bits(g.real), axis_bits(g.imag)], axis=1).ravel()


# ---------------------------------------------------------------- OQAM split

@dataclass(frozen=True)
class BranchGrid:
    """Real part and imaginary part of a symbol grid, carried on the I and Q
    branches respectively."""

    real: np.ndarray
    imag: np.ndarray

    def combine(self) -> np.ndarray:
        return self.real + 1j * self.imag

    def stacked(self) -> np.ndarray:
        """(..., 2, M, N) real array with the branch on axis -3."""
        return np.stack([self.real, self.imag], axis=-3)


def split_oqam(grid) -> BranchGrid:
    g = np.asarray(grid)
    return BranchGrid(np.ascontiguousarray(g.real, dtype=float), np.ascontiguousarray(g.imag, dtype=float))


def to_stacked(grid: np.ndarray) -> np.ndarray:
    """(n_streams, M, N) -> antenna-interleaved (N * n_streams, M)."""
    g = np.asarray(grid)
    nt, M, N = g.shape
    return g.transpose(2, 0, 1).reshape(N * nt, M)


def from_stacked(mat: np.ndarray, n_streams: int) -> np.ndarray:
    mat = np.asarray(mat)
    NN, M = mat.shape
    return mat.reshape(NN // n_streams, n_streams, M).transpose(1, 2, 0)


# ---------------------------------------------------------------- randomness

# purpose tags keep the streams for bits, channel and noise independent
STREAM_BITS = 1
STREAM_CHANNEL = 2
STREAM_NOISE = 3
STREAM_INTERLEAVER = 4


def trial_rng(seed: int, trial: int, purpose: int = STREAM_BITS, point: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, point, trial, purpose).

    Any trial can be regenerated in isolation, so Monte-Carlo results do not
    depend on execution order or worker count.
    """
    key = np.random.SeedSequence([int(seed) & (2**64 - 1), int(point), int(trial), int(purpose)])
    return np.random.Generator(np.random.Philox(key=key.generate_state(2, np.uint64)))


def random_bits(cfg: FbmcConfig, trial: int, point: int = 0, count: int | None = None) -> np.ndarray:
    if count is None:
        count = cfg.bits_per_symbol * cfg.n_tx * cfg.block_len * cfg.n_subcarriers
    return trial_rng(cfg.seed, trial, STREAM_BITS, point).integers(0, 2, count, dtype=np.uint8)


def random_grid(cfg: FbmcConfig, trial: int, point: int = 0) -> np.ndarray:
    """Random (n_tx, M, N) symbol grid for one trial."""
    shape = (cfg.n_tx, cfg.block_len, cfg.n_subcarriers)
    return map_qam(random_bits(cfg, trial, point), cfg.modulation, cfg.symbol_power, shape)

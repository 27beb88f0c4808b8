import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbmclab.analysis import (
    CASES,
    DB_FLOOR,
    db,
    noise_power_for,
    se_formula,
    sinr_table,
    sir_table,
    spectral_efficiency,
    truncation_case,
    with_case,
)
from fbmclab.channel import identity_channel
from fbmclab.core_model import FbmcConfig, split_oqam
from fbmclab.filter_bank import transfer_matrix
from fbmclab.prototype_filter import generate_iota
from fbmclab.transceiver import build_equalizer, receive, transmit

BASE = FbmcConfig(n_subcarriers=64, block_len=8, overlap=6, n_tx=2, n_rx=2)


@pytest.mark.parametrize(
    "case,cut",
    [("use_it_all", (0, 0)), ("one_front_and_end", (2, 1)), ("one_front", (2, 2)), ("one_end", (3, 1)), ("same_length", (3, 2))],
)
def test_cases_at_k6(case, cut):
    assert truncation_case(BASE, case) == cut


@pytest.mark.parametrize("K", [3, 4, 5, 7, 8])
def test_cases_other_k(K):
    iF, iR = truncation_case(K, "same_length")
    assert iF + iR == K - 1  # exactly M output blocks
    assert truncation_case(K, "one_front") == (iF - 1, iR)
    assert truncation_case(K, "one_end") == (iF, iR - 1)


def test_unknown_case():
    with pytest.raises(ValueError, match="unknown truncation case"):
        truncation_case(BASE, "cut_everything")
    with pytest.raises(ValueError, match="undefined"):
        truncation_case(2, "one_front_and_end")


def test_db_floor():
    np.testing.assert_array_equal(db([0.0, -1e-30, 1.0, 0.1]), [DB_FLOOR, DB_FLOOR, 0.0, -10.0])


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("comp", [False, True])
def test_sir_accounting_closure(case, comp):
    r = sir_table(with_case(BASE, case), comp)
    np.testing.assert_allclose(r.signal + r.interference, r.total, rtol=1e-10)
    np.testing.assert_array_equal(r.sir_db, r.signal_db - r.interference_db)
    assert r.signal.shape == (2, 8) and len(r.rows()) == 16


def test_use_it_all_clears_40db():
    full = sir_table(with_case(BASE, "use_it_all"))
    same = sir_table(with_case(BASE, "same_length"))
    assert np.all(full.sir_db >= 40)
    assert np.all(full.sir_db >= same.sir_db[0, 0])


def test_one_front_above_20db():
    assert np.all(sir_table(with_case(BASE, "one_front")).sir_db >= 20)


@pytest.mark.parametrize("K,worst", [(4, (0, 0)), (6, (0, 0)), (8, (0, 0)), (5, (1, 7)), (7, (1, 7))])
def test_odd_even_worst_symbol(K, worst):
    cfg = with_case(BASE.replace(overlap=K), "same_length")
    assert sir_table(cfg).worst() == worst


def test_compensation_raises_every_symbol():
    cfg = with_case(BASE, "same_length")
    pre, post = sir_table(cfg), sir_table(cfg, True)
    assert np.all(post.sir_db >= pre.sir_db - 1e-6)
    assert post.signal_db[0, 0] == pytest.approx(0.0, abs=1.0)


def probe_stream_sir(cfg):
    """Per-stream SIR measured by driving the full 2x2 chain with every unit
    real symbol under the identity channel."""
    N, M, nt = cfg.n_subcarriers, cfg.block_len, cfg.n_tx
    f = generate_iota(N, cfg.overlap)
    E = build_equalizer(identity_channel(nt).freq_response(N), 0.0, nu=0)
    out = np.empty((nt, 2 * M * N, 2 * M * N))
    for j in range(nt):
        eye = np.eye(2 * M * N).reshape(-1, 2, M, N)
        g = np.zeros((2 * M * N, nt, M, N), dtype=complex)
        g[:, j] = eye[:, 0] + 1j * eye[:, 1]
        eq = receive(transmit(split_oqam(g), f, cfg), f, cfg, E).extract()
        out[j] = np.stack([eq.real[:, j], eq.imag[:, j]], 1).reshape(2 * M * N, -1).T
    return out


def test_streams_identical_under_identity_channel():
    cfg = with_case(BASE.replace(n_subcarriers=16, block_len=4), "same_length")
    per_stream = probe_stream_sir(cfg)
    T = transfer_matrix(generate_iota(16, 6), 4, 3, 2)
    for j in range(cfg.n_tx):
        np.testing.assert_allclose(per_stream[j], T, atol=1e-10)


def test_noise_power_conversion():
    assert noise_power_for(0.0, 2) == pytest.approx(0.5)
    assert noise_power_for(10.0, 6, 1.0, 0.5) == pytest.approx(1 / 30)


def test_sinr_noise_only_when_untruncated():
    cfg = with_case(BASE, "use_it_all")
    s, i, n = sinr_table(cfg, 0.01, False)
    np.testing.assert_allclose(s, 1.0, rtol=1e-4)
    np.testing.assert_allclose(n, 0.01, rtol=1e-3)
    assert np.all(i < 1e-7)


def test_eta_and_overhead():
    reps = spectral_efficiency(BASE.replace(block_len=20), [10.0])
    by = {r.scheme: r for r in reps}
    for r in reps:
        assert r.eta == 20 / 25
    assert by["one_front"].overhead == 0.05
    assert by["use_it_all"].factor == 20 / 25 and by["compensate_all"].factor == 1.0
    five = {r.scheme: r for r in spectral_efficiency(BASE.replace(block_len=5), [10.0])}
    assert five["one_front"].overhead == 0.2 and five["one_front"].eta == 0.5


@settings(max_examples=500)
@given(st.floats(0, 1e4), st.integers(1, 40), st.integers(1, 40), st.integers(1, 4))
def test_se_alpha_zero_independent_of_m(sinr, M1, M2, ns):
    assert se_formula(np.full(M1, sinr), 0, ns) == se_formula(np.full(M2, sinr), 0, ns)


def test_se_monotone_in_snr_and_ordered():
    grid = [0.0, 5.0, 10.0, 20.0, 30.0]
    for M in (5, 12):
        reps = spectral_efficiency(BASE.replace(block_len=M), grid)
        se = {s: [r.se for r in reps if r.scheme == s] for s in ("use_it_all", "one_front", "compensate_all")}
        for v in se.values():
            assert np.all(np.diff(v) > 0)
        assert np.all(np.array(se["compensate_all"]) >= se["one_front"])
        assert np.all(np.array(se["one_front"]) >= se["use_it_all"])

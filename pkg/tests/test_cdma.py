import math

import numpy as np
import pytest
from scipy.signal import welch

from robust_mud.ber import AnalyticBerInputs, average_ber, single_user_ber
from robust_mud.cdma import (PRIMITIVE_POLYNOMIALS, ChannelRealization, FadingParams, SignatureSet,
                             ar2_coefficients, build_composite_matrix, column_layout,
                             generate_fading, generate_m_sequence, make_signatures,
                             synthesize_received)
from robust_mud.interference import count_transitions
from robust_mud.noise import MixtureNoiseParams


def cyclic_acf(s):
    s = s.astype(int)
    return np.array([np.dot(s, np.roll(s, k)) for k in range(s.size)])


def test_degree3_sequence():
    s = generate_m_sequence(3, 0b1011)
    assert s.size == 7
    assert sorted(np.unique(s, return_counts=True)[1].tolist()) == [3, 4]
    assert cyclic_acf(s)[3] == -1


def test_degree7_length():
    assert generate_m_sequence(7).size == 127


@pytest.mark.parametrize("m", sorted(PRIMITIVE_POLYNOMIALS))
def test_default_polynomials_are_maximal(m):
    s = generate_m_sequence(m)
    assert s.size == 2**m - 1
    assert abs(int(s.sum())) == 1
    if m <= 10:
        acf = cyclic_acf(s)
        assert acf[0] == s.size and np.all(acf[1:] == -1)


@pytest.mark.parametrize("degree,taps", [(3, 0b1001), (4, 0b10101), (4, 0b11111), (3, 0b0011)])
def test_non_primitive_rejected(degree, taps):
    with pytest.raises(ValueError):
        generate_m_sequence(degree, taps)


@pytest.mark.parametrize("degree", [1, 17])
def test_degree_range(degree):
    with pytest.raises(ValueError):
        generate_m_sequence(degree)


def test_signatures_are_shifts():
    sig = make_signatures(31, 4)
    base = sig.chips[0]
    for row, shift in zip(sig.chips, sig.shifts):
        np.testing.assert_array_equal(row, np.roll(base, -shift))
    with pytest.raises(ValueError):
        make_signatures(30, 2)


def test_fading_params():
    fp = FadingParams(0.998, 80.0, 10_000.0)
    assert fp.pole_angle == pytest.approx(0.050265, abs=5e-7)
    assert fp.warmup == 5000
    c1, c2 = ar2_coefficients(fp)
    poles = np.roots([1, -c1, -c2])
    np.testing.assert_allclose(np.abs(poles), 0.998)
    np.testing.assert_allclose(sorted(np.angle(poles)), [-fp.pole_angle, fp.pole_angle])
    for bad in (dict(pole_radius=1.0), dict(peak_freq=6000.0), dict(peak_freq=0.0)):
        with pytest.raises(ValueError):
            FadingParams(**bad)


def test_fading_unit_power_and_deterministic():
    fp = FadingParams()
    g = generate_fading(10**6, fp, np.random.default_rng(4))
    assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, rel=0.02)
    np.testing.assert_array_equal(g[:100], generate_fading(10**6, fp, np.random.default_rng(4))[:100])


def test_fading_white_for_tiny_radius(rng):
    n = 10**6
    g = generate_fading(n, FadingParams(1e-6, 80.0, 10_000.0), rng)
    rho1 = np.real(np.vdot(g[:-1], g[1:])) / np.vdot(g, g).real
    assert abs(rho1) <= 3 / math.sqrt(n)


def test_fading_spectral_peak(rng):
    fp = FadingParams()
    g = generate_fading(2**20, fp, rng)
    f, pxx = welch(g, fs=fp.symbol_rate, nperseg=2**14, return_onesided=False)
    assert abs(abs(f[np.argmax(pxx)]) - 80.0) <= 5.0


def test_composite_zero_delays_is_synchronous():
    sig = make_signatures(7, 3)
    np.testing.assert_array_equal(build_composite_matrix(sig, [0, 0, 0]), sig.chips.T)


def test_composite_split_columns():
    sig = make_signatures(7, 2)
    M = build_composite_matrix(sig, [0, 3])
    assert M.shape == (7, 3)
    tail, head = M[:, 1] != 0, M[:, 2] != 0
    assert tail.sum() == 3 and head.sum() == 4
    assert not np.any(tail & head) and np.all(tail | head)
    assert np.all(M[:, 0] != 0)
    assert set(np.unique(M)) <= {-1.0, 0.0, 1.0}


@pytest.mark.parametrize("delays", [[0, 0, 0, 0], [0, 5, 0, 30], [0, 1, 2, 3], [0, 17, 17, 9]])
def test_composite_structure(delays):
    sig = make_signatures(31, 4)
    M = build_composite_matrix(sig, delays)
    layout = column_layout(delays)
    assert M.shape[1] == len(layout) == 1 + sum(1 if d == 0 else 2 for d in delays[1:])
    for user in range(1, 4):
        idx = [k for k, (u, _) in enumerate(layout) if u == user]
        support = M[:, idx] != 0
        assert np.all(support.sum(axis=1) == 1)


def test_composite_bad_delays():
    sig = make_signatures(7, 2)
    for delays in ([0, 7], [0, -1], [1, 0], [0]):
        with pytest.raises(ValueError):
            build_composite_matrix(sig, delays)


def _realization(sig, delays, rng, count=3):
    L = sig.num_users
    symbols = 2 * rng.integers(0, 2, size=(count, L)) - 1
    fading = (rng.standard_normal((count, L)) + 1j * rng.standard_normal((count, L))) / math.sqrt(2)
    return ChannelRealization(sig, tuple(delays), symbols, fading)


def test_single_user_noiseless():
    sig = make_signatures(7, 1)
    ch = ChannelRealization(sig, (0,), np.ones((2, 1), int), np.ones((2, 1), complex))
    y = synthesize_received(ch, None, 1)
    np.testing.assert_array_equal(y, sig.chips[0] / math.sqrt(7))


def test_noiseless_synchronous_is_signature_matrix(rng):
    sig = make_signatures(15, 4)
    ch = _realization(sig, [0, 0, 0, 0], rng)
    theta = ch.symbols[2] * ch.fading[2] / math.sqrt(15)
    np.testing.assert_allclose(synthesize_received(ch, None, 2), ch.matrix @ theta, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(ch.matrix, sig.chips.T)


def test_noiseless_async_uses_previous_symbol(rng):
    sig = make_signatures(15, 2)
    ch = _realization(sig, [0, 4], rng)
    i = 2
    a0 = sig.chips[0].astype(float)
    a1 = sig.chips[1].astype(float)
    g = ch.fading[i]
    expected = a0 * ch.symbols[i, 0] * g[0]
    expected[:4] += a1[-4:] * ch.symbols[i - 1, 1] * g[1]
    expected[4:] += a1[:-4] * ch.symbols[i, 1] * g[1]
    np.testing.assert_allclose(synthesize_received(ch, None, i), expected / math.sqrt(15),
                               rtol=1e-15, atol=1e-15)


def test_symbol_index_must_have_predecessor(rng):
    ch = _realization(make_signatures(7, 2), [0, 2], rng)
    with pytest.raises(ValueError):
        synthesize_received(ch, None, 0)


def test_noisy_observation_deterministic():
    sig = make_signatures(7, 2)
    ch = _realization(sig, [0, 2], np.random.default_rng(0))
    p = MixtureNoiseParams(0.3, 0.1, 100.0)
    a = synthesize_received(ch, p, [1, 2], np.random.default_rng(5))
    b = synthesize_received(ch, p, [1, 2], np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (2, 7)


def _matched_filter_ber(num_users, sigma_c, trials, rng):
    n = 7
    base = make_signatures(n, 1).chips[0]
    errors = 0
    for _ in range(trials):
        chips = np.vstack([base, 2 * rng.integers(0, 2, size=(num_users - 1, n)) - 1])
        sig = SignatureSet(chips, (0,) * num_users)
        delays = (0, *rng.integers(0, n, num_users - 1))
        g = (rng.standard_normal((2, num_users)) + 1j * rng.standard_normal((2, num_users))) / math.sqrt(2)
        b = 2 * rng.integers(0, 2, size=(2, num_users)) - 1
        ch = ChannelRealization(sig, delays, b, g)
        y = synthesize_received(ch, MixtureNoiseParams(sigma_c), 1, rng)
        stat = np.real(np.conj(g[1, 0]) * (base @ y))
        errors += (stat < 0) != (b[1, 0] < 0)
    return errors / trials


@pytest.mark.slow
def test_matched_filter_agrees_with_chip_synchronous_analysis(rng):
    # Random interferer chips and integer delays reproduce the analytic model at
    # zero fractional offset; the statistic scaled by sqrt(2 n) has noise std
    # sqrt(2) n sigma_c.
    n, sigma_c, trials = 7, 0.3, 10**5
    prof = count_transitions(make_signatures(n, 1).chips[0])
    inp = AnalyticBerInputs.gaussian(prof, 3, math.sqrt(2) * n * sigma_c, offset=0.0)
    exact = average_ber(inp)
    emp = _matched_filter_ber(3, sigma_c, trials, rng)
    assert abs(emp - exact) <= 3 * math.sqrt(exact * (1 - exact) / trials)


def test_matched_filter_single_user_closed_form(rng):
    n, sigma_c, trials = 7, 0.5, 20000
    exact = single_user_ber(n, math.sqrt(2) * n * sigma_c)
    emp = _matched_filter_ber(1, sigma_c, trials, rng)
    assert abs(emp - exact) <= 3 * math.sqrt(exact * (1 - exact) / trials)

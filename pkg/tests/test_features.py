import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from eegdiff import features as fx

from conftest import sine

FS = 250.0
finite = st.floats(-1e3, 1e3, allow_nan=False)


# independent oracles --------------------------------------------------------

def hann_periodogram(x, fs):
    """Single Hann-windowed periodogram, one-sided density."""
    n = len(x)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    spec = np.abs(np.fft.rfft(x * w)) ** 2 / (fs * np.sum(w ** 2))
    spec[1:-1] *= 2
    return np.fft.rfftfreq(n, 1 / fs), spec


def brute_cwt(x, fs, freq, w0=6.0):
    """Direct inner product of the signal with a shifted Morlet at every sample."""
    s = w0 * fs / (2 * np.pi * freq)
    n = len(x)
    idx = np.arange(n)
    out = np.empty(n)
    for k in range(n):
        tau = (idx - k) / s
        psi = np.exp(1j * w0 * tau - tau ** 2 / 2)
        out[k] = abs(np.sum(x * np.conj(psi)) * 2 / (s * math.sqrt(2 * math.pi)))
    return out


# statistics -----------------------------------------------------------------

def test_temporal_stats_examples():
    assert fx.temporal_stats(np.full(10, 3.0)) == (0.0, 0.0, 3.0, 9.0)
    assert fx.temporal_stats([1, -1, 1, -1]) == (1.0, 1.0, 0.0, 1.0)
    me = fx.temporal_stats(sine(10, 250))[3]
    assert me == pytest.approx(0.5, rel=0.02)
    with pytest.raises(ValueError):
        fx.temporal_stats([1.0])


def test_energy_pmf_examples():
    assert np.array_equal(fx.energy_pmf([0, 0, 1, 0]), [0, 0, 1, 0])
    assert np.allclose(fx.energy_pmf([2, -2, 2, -2, 2]), 0.2)
    assert np.allclose(fx.energy_pmf([1, 2]), [0.2, 0.8], atol=1e-15)
    with pytest.raises(ValueError):
        fx.energy_pmf(np.zeros(4))


def test_entropy_closed_forms():
    impulse = [0, 0, 1, 0]
    flat = np.ones(8)
    p28 = [1, 2]
    assert fx.shannon_entropy(impulse) == 0
    assert fx.renyi_entropy(impulse) == 0
    assert fx.tsallis_entropy(impulse) == 0
    assert fx.shannon_entropy(flat) == pytest.approx(3.0, abs=1e-12)
    assert fx.renyi_entropy(flat) == pytest.approx(3.0, abs=1e-12)
    assert fx.tsallis_entropy(flat) == pytest.approx(1 - 1 / 8, abs=1e-12)
    assert fx.shannon_entropy(p28) == pytest.approx(0.7219280948873623, abs=1e-6)
    assert fx.renyi_entropy(p28) == pytest.approx(0.5563933485243852, abs=1e-6)
    assert fx.tsallis_entropy(p28) == pytest.approx(0.32, abs=1e-6)


def test_log_energy_entropy():
    assert fx.log_energy_entropy(np.ones(4)) == pytest.approx(4 * math.log(1 + 1e-12), abs=1e-20)
    assert fx.log_energy_entropy(np.zeros(4)) == 4 * math.log(1e-12)
    assert fx.log_energy_entropy([math.e, math.e]) == pytest.approx(4.0, abs=1e-9)


@pytest.mark.parametrize("fn", [fx.renyi_entropy, fx.tsallis_entropy])
@pytest.mark.parametrize("order", [1.0, 0.0, -2.0])
def test_invalid_entropy_order(fn, order):
    with pytest.raises(ValueError):
        fn([1.0, 2.0], order)


@given(arrays(np.float64, 16, elements=finite), st.floats(1e-3, 1e3), st.booleans())
def test_entropies_scale_invariant(x, c, flip):
    assume(np.sum(x * x) > 1e-6)
    c = -c if flip else c
    for fn in (fx.shannon_entropy, fx.renyi_entropy, fx.tsallis_entropy):
        assert fn(c * x) == pytest.approx(fn(x), abs=1e-9)


@given(arrays(np.float64, 32, elements=finite))
def test_feature_ranges(x):
    assume(np.var(x) > 1e-6)
    f = fx.temporal_features(x)
    assert f.variance == pytest.approx(f.std_dev ** 2, abs=1e-9 * max(1, f.variance))
    assert f.mean_energy >= 0
    assert -1e-12 <= f.shannon <= 5 + 1e-12
    assert -1e-12 <= f.renyi <= 5 + 1e-12
    assert 0 <= f.tsallis < 1
    assert f.hjorth_activity == f.variance
    assert f.hjorth_mobility >= 0 and f.hjorth_complexity >= 0


def test_hjorth_sine():
    _, mob, comp = fx.hjorth(sine(10, 5000))
    assert mob == pytest.approx(2 * math.sin(math.pi * 10 / 250), rel=0.02)
    assert comp == pytest.approx(1.0, rel=0.02)


def test_hjorth_brute_force():
    x = np.random.default_rng(3).standard_normal(200)
    mean = sum(x) / len(x)
    act = sum((v - mean) ** 2 for v in x) / len(x)
    d = [x[i + 1] - x[i] for i in range(len(x) - 1)]
    dm = sum(d) / len(d)
    vd = sum((v - dm) ** 2 for v in d) / len(d)
    dd = [d[i + 1] - d[i] for i in range(len(d) - 1)]
    ddm = sum(dd) / len(dd)
    vdd = sum((v - ddm) ** 2 for v in dd) / len(dd)
    a, m, c = fx.hjorth(x)
    assert a == pytest.approx(act, rel=1e-12)
    assert m == pytest.approx(math.sqrt(vd / act), rel=1e-12)
    assert c == pytest.approx(math.sqrt(vdd / vd) / math.sqrt(vd / act), rel=1e-12)


def test_hjorth_white_noise_complexity():
    for seed in range(100):
        x = np.random.default_rng(seed).standard_normal(256)
        assert fx.hjorth(x)[2] > 1


def test_hjorth_zero_variance():
    with pytest.raises(ValueError):
        fx.hjorth(np.full(8, 2.0))


def test_feature_matrix_layout():
    x = np.random.default_rng(0).standard_normal((3, 2, 64))
    m = fx.feature_matrix(x)
    assert m.shape == (6, len(fx.FEATURE_NAMES))
    assert np.array_equal(m[3], list(fx.temporal_features(x[1, 1]).as_dict().values()))


# histograms and JS -----------------------------------------------------------

def test_histogram_examples():
    h = fx.histogram(np.zeros(10), 4, (0.0, 1.0))
    assert h.mass[0] == 1 and h.mass.sum() == 1
    grid = np.linspace(0, 1, 1000, endpoint=False)
    assert np.allclose(fx.histogram(grid, 10, (0.0, 1.0)).mass, 0.1, atol=1 / 1000)
    assert fx.histogram([5.0, 0.5], 4, (0.0, 1.0)).mass[-1] == 0.5
    with pytest.raises(ValueError):
        fx.histogram([], 4, (0.0, 1.0))
    with pytest.raises(ValueError):
        fx.histogram([1.0], 1, (0.0, 1.0))
    with pytest.raises(ValueError):
        fx.histogram([1.0], 4, (1.0, 1.0))


def test_js_examples():
    e = np.array([0.0, 0.5, 1.0])
    p = fx.Histogram(e, np.array([1.0, 0.0]))
    q = fx.Histogram(e, np.array([0.5, 0.5]))
    r = fx.Histogram(e, np.array([0.0, 1.0]))
    assert fx.js_divergence(p, p) == 0
    assert fx.js_divergence(p, r) == pytest.approx(1.0, abs=1e-12)
    assert fx.js_divergence(p, q) == pytest.approx(0.31127812445913283, abs=1e-9)
    with pytest.raises(ValueError):
        fx.js_divergence(p, fx.Histogram(np.array([0.0, 0.4, 1.0]), q.mass))


@given(st.lists(st.floats(0, 1), min_size=4, max_size=4), st.lists(st.floats(0, 1), min_size=4, max_size=4))
def test_js_symmetric_and_bounded(a, b):
    assume(sum(a) > 1e-6 and sum(b) > 1e-6)
    e = np.linspace(0, 1, 5)
    p = fx.Histogram(e, np.array(a) / sum(a))
    q = fx.Histogram(e, np.array(b) / sum(b))
    assert fx.js_divergence(p, q) == fx.js_divergence(q, p)
    assert 0 <= fx.js_divergence(p, q) <= 1


@given(arrays(np.float64, 20, elements=finite), arrays(np.float64, 30, elements=finite))
def test_pooled_histograms(a, b):
    p, q = fx.pooled_histograms(a, b)
    assert np.array_equal(p.bin_edges, q.bin_edges)
    assert np.all(np.diff(p.bin_edges) > 0)
    assert abs(p.mass.sum() - 1) < 1e-12 and abs(q.mass.sum() - 1) < 1e-12


# spectra -----------------------------------------------------------------------

def test_welch_sine_peak_and_power():
    x = sine(10, 1024)
    f, p = fx.welch_psd(x, FS)
    df = f[1] - f[0]
    assert abs(f[np.argmax(p)] - 10) <= df
    assert p.sum() * df == pytest.approx(0.5, rel=0.05)
    fo, po = hann_periodogram(x[:128], FS)
    assert abs(fo[np.argmax(po)] - f[np.argmax(p)]) <= df


def test_welch_matches_periodogram_average():
    x = np.random.default_rng(2).standard_normal(512)
    f, p = fx.welch_psd(x, FS)
    segs = [hann_periodogram(x[i:i + 128], FS)[1] for i in range(0, 512 - 127, 64)]
    assert np.allclose(p, np.mean(segs, axis=0), rtol=1e-10)


def test_welch_zero_and_short():
    _, p = fx.welch_psd(np.zeros(256), FS)
    assert not p.any()
    with pytest.raises(ValueError):
        fx.welch_psd(np.ones(100), FS)


def test_band_proportion_examples():
    assert fx.band_proportions(sine(10, 1024), FS).alpha >= 0.9
    assert fx.band_proportions(sine(2, 1024), FS).delta >= 0.9
    with pytest.raises(ValueError):
        fx.band_proportions(np.zeros(256), FS)


@given(arrays(np.float64, 256, elements=st.floats(-10, 10)))
def test_band_proportions_sum_to_one(x):
    assume(np.ptp(x) > 1e-3)
    b = fx.band_proportions(x, FS).as_array()
    assert abs(b.sum() - 1) < 1e-9 and np.all(b >= 0)


@pytest.mark.xfail(strict=True, reason="128-sample Hann leakage puts delta/beta at 0.78-0.86; see decisions ledger")
def test_equal_power_pair_balances_delta_and_beta():
    worst = 1.0
    for phase in np.linspace(0, np.pi, 7):
        b = fx.band_proportions(sine(2, 1024, phase=phase) + sine(20, 1024), FS)
        worst = min(worst, min(b.delta, b.beta) / max(b.delta, b.beta))
    assert worst >= 0.85


# wavelets ----------------------------------------------------------------------

def test_cwt_matches_brute_force():
    x = np.random.default_rng(4).standard_normal(128)
    sc = fx.cwt_morlet(x, FS, [5.0, 12.0])
    for row, f in zip(sc.magnitude, [5.0, 12.0]):
        assert np.allclose(row, brute_cwt(x, FS, f), atol=1e-12)


def test_cwt_ridge_at_ten_hz():
    freqs = np.arange(1, 41, dtype=float)
    sc = fx.cwt_morlet(sine(10, 512), FS, freqs)
    ridge = freqs[np.argmax(sc.magnitude[:, 128:384], axis=0)]
    assert np.all(np.abs(ridge - 10) <= 1)
    assert np.all(sc.magnitude >= 0)


def test_cwt_chirp_ridge_non_decreasing():
    n = 1000
    t = np.arange(n) / FS
    f0, f1 = 5.0, 20.0
    x = np.sin(2 * np.pi * (f0 * t + (f1 - f0) / (2 * t[-1]) * t ** 2))
    freqs = np.arange(1, 41, dtype=float)
    sc = fx.cwt_morlet(x, FS, freqs)
    ridge = freqs[np.argmax(sc.magnitude[:, n // 4: 3 * n // 4], axis=0)]
    assert np.all(np.diff(ridge) >= 0)


def test_cwt_zero_and_range():
    assert not fx.cwt_morlet(np.zeros(64), FS, [10.0]).magnitude.any()
    for bad in (0.0, 125.0, 200.0):
        with pytest.raises(ValueError):
            fx.cwt_morlet(np.ones(64), FS, [bad])


@given(arrays(np.float64, 64, elements=finite))
def test_cwt_sign_flip(x):
    a = fx.cwt_morlet(x, FS, [4.0, 10.0, 30.0]).magnitude
    b = fx.cwt_morlet(-x, FS, [4.0, 10.0, 30.0]).magnitude
    assert np.array_equal(a, b)


def test_csv_exports(tmp_path):
    f, p = fx.welch_psd(sine(10, 256), FS)
    fx.write_psd_csv(tmp_path / "psd.csv", f, p, "digest=abc")
    lines = (tmp_path / "psd.csv").read_text().splitlines()
    assert lines[0] == "# digest=abc" and lines[1] == "freq_hz,density"
    assert len(lines) == 2 + len(f)
    sc = fx.cwt_morlet(sine(10, 32), FS, [5.0, 10.0])
    fx.write_scalogram_csv(tmp_path / "sc.csv", sc)
    rows = (tmp_path / "sc.csv").read_text().splitlines()
    assert len(rows) == 3 and len(rows[1].split(",")) == 33

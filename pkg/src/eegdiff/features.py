"""Signal features used by the reward and by the evaluation reports.

Entropies are computed over the energy distribution ``p_i = x_i**2 / sum(x**2)``,
which makes them invariant to rescaling of the signal. Variances are
population variances.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, astuple, fields

import numpy as np
from scipy import signal as sp_signal

LOG_ENERGY_FLOOR = 1e-12
WELCH_SEGMENT = 128
MORLET_W0 = 6.0

BANDS = {
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
}

FEATURE_GROUPS = {
    "statistical": ("variance", "std_dev", "mean", "mean_energy"),
    "informational": ("shannon", "renyi", "tsallis", "log_energy"),
    "nonlinear": ("hjorth_activity", "hjorth_mobility", "hjorth_complexity"),
}


def _as_signal(x, min_len=1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D signal, got shape {x.shape}")
    if x.size < min_len:
        raise ValueError(f"signal needs at least {min_len} samples, got {x.size}")
    return x


# ------------------------------------------------------------ statistics


def temporal_stats(x) -> tuple[float, float, float, float]:
    """Return ``(variance, std_dev, mean, mean_energy)``."""
    x = _as_signal(x, 2)
    var = float(np.var(x))
    return var, float(np.sqrt(var)), float(np.mean(x)), float(np.mean(x * x))


def energy_pmf(x) -> np.ndarray:
    x = _as_signal(x)
    e = x * x
    total = e.sum()
    if not total > 0:
        raise ValueError("energy distribution undefined for an all-zero signal")
    return e / total


def _check_order(q, name):
    if not q > 0 or q == 1:
        raise ValueError(f"{name} must be positive and != 1, got {q}")


def shannon_entropy(x) -> float:
    p = energy_pmf(x)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def renyi_entropy(x, alpha: float = 2.0) -> float:
    _check_order(alpha, "alpha")
    p = energy_pmf(x)
    return float(np.log2(np.sum(p[p > 0] ** alpha)) / (1.0 - alpha))


def tsallis_entropy(x, q: float = 2.0) -> float:
    _check_order(q, "q")
    p = energy_pmf(x)
    return float((1.0 - np.sum(p[p > 0] ** q)) / (q - 1.0))


def log_energy_entropy(x) -> float:
    x = _as_signal(x)
    return float(np.sum(np.log(x * x + LOG_ENERGY_FLOOR)))


def hjorth(x) -> tuple[float, float, float]:
    """Hjorth activity, mobility and complexity using first differences."""
    x = _as_signal(x, 3)
    activity = float(np.var(x))
    if activity <= 0:
        raise ValueError("Hjorth parameters undefined for a zero-variance signal")
    d1 = np.diff(x)
    d2 = np.diff(d1)
    var_d1 = np.var(d1)
    mobility = float(np.sqrt(var_d1 / activity))
    if var_d1 <= 0:
        return activity, mobility, 0.0
    complexity = float(np.sqrt(np.var(d2) / var_d1) / mobility)
    return activity, mobility, complexity


@dataclass(frozen=True)
class TemporalFeatures:
    variance: float
    std_dev: float
    mean: float
    mean_energy: float
    shannon: float
    renyi: float
    tsallis: float
    log_energy: float
    hjorth_activity: float
    hjorth_mobility: float
    hjorth_complexity: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


FEATURE_NAMES = tuple(f.name for f in fields(TemporalFeatures))


def temporal_features(x) -> TemporalFeatures:
    var, std, mean, energy = temporal_stats(x)
    activity, mobility, complexity = hjorth(x)
    return TemporalFeatures(
        var, std, mean, energy,
        shannon_entropy(x), renyi_entropy(x), tsallis_entropy(x), log_energy_entropy(x),
        activity, mobility, complexity,
    )


def feature_matrix(epochs: np.ndarray) -> np.ndarray:
    """Temporal features for every (epoch, channel) pair.

    ``epochs`` has shape (n, channels, samples); the result has shape
    (n * channels, 11) in ``FEATURE_NAMES`` order.
    """
    epochs = np.asarray(epochs, dtype=np.float64)
    rows = [astuple(temporal_features(ch)) for ep in epochs for ch in ep]
    return np.array(rows, dtype=np.float64)


# ----------------------------------------------------- histograms and JS


@dataclass(frozen=True)
class Histogram:
    bin_edges: np.ndarray
    mass: np.ndarray


def histogram(values, bins: int = 32, range: tuple[float, float] | None = None) -> Histogram:
    """Normalized histogram; values outside ``range`` are clamped to its ends."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if bins < 2:
        raise ValueError("need at least two bins")
    lo, hi = range if range is not None else (values.min(), values.max())
    if not lo < hi:
        raise ValueError(f"histogram range must satisfy lo < hi, got ({lo}, {hi})")
    counts, edges = np.histogram(np.clip(values, lo, hi), bins=bins, range=(lo, hi))
    return Histogram(edges, counts / counts.sum())


def pooled_histograms(a, b, bins: int = 32) -> tuple[Histogram, Histogram]:
    """Histograms of two samples over their shared min/max range."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if not hi > lo:
        lo, hi = lo - 0.5, hi + 0.5
    return histogram(a, bins, (lo, hi)), histogram(b, bins, (lo, hi))


def _kl2(p, q):
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / q[nz])))


def js_divergence(p: Histogram, q: Histogram) -> float:
    """Base-2 Jensen-Shannon divergence, bounded to [0, 1]."""
    if p.bin_edges.shape != q.bin_edges.shape or not np.array_equal(p.bin_edges, q.bin_edges):
        raise ValueError("histograms must share bin edges")
    pm, qm = np.asarray(p.mass, float), np.asarray(q.mass, float)
    m = 0.5 * (pm + qm)
    js = 0.5 * _kl2(pm, m) + 0.5 * _kl2(qm, m)
    return min(max(js, 0.0), 1.0)


# --------------------------------------------------------------- spectra


def welch_psd(x, fs_hz: float, nperseg: int = WELCH_SEGMENT) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Welch PSD (Hann window, 50% overlap) along the last axis.

    Densities are scaled so that ``sum(psd) * df`` approximates the signal power.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < nperseg:
        raise ValueError(f"signal of {x.shape[-1]} samples is shorter than one {nperseg}-sample segment")
    return sp_signal.welch(
        x, fs=fs_hz, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
        detrend=False, scaling="density", average="mean", axis=-1,
    )


@dataclass(frozen=True)
class BandProportions:
    delta: float
    theta: float
    alpha: float
    beta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.delta, self.theta, self.alpha, self.beta])


def band_powers(freqs, psd) -> np.ndarray:
    """Power in each band of ``BANDS``; the last axis of the result is the band.

    Each PSD bin is treated as a rectangle of width ``df`` centred on its
    frequency and contributes the part of its area that overlaps the band.
    """
    freqs = np.asarray(freqs, dtype=np.float64)
    df = freqs[1] - freqs[0]
    left, right = freqs - df / 2, freqs + df / 2
    out = []
    for lo, hi in BANDS.values():
        overlap = np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, None)
        out.append(psd @ overlap)
    return np.stack(out, axis=-1)


def band_proportion_array(x, fs_hz: float) -> np.ndarray:
    """Vectorized band proportions; shape ``x.shape[:-1] + (4,)``."""
    freqs, psd = welch_psd(x, fs_hz)
    powers = band_powers(freqs, psd)
    total = powers.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("total band power is zero")
    return powers / total


def band_proportions(x, fs_hz: float) -> BandProportions:
    props = band_proportion_array(_as_signal(x), fs_hz)
    return BandProportions(*map(float, props))


# ------------------------------------------------------------ wavelets


@dataclass(frozen=True)
class Scalogram:
    freqs_hz: np.ndarray
    magnitude: np.ndarray


def morlet_scale(freq_hz: float, fs_hz: float, w0: float = MORLET_W0) -> float:
    """Wavelet scale in samples for a given centre frequency."""
    return w0 * fs_hz / (2 * np.pi * freq_hz)


def morlet_kernel(scale: float, offsets) -> np.ndarray:
    """Complex Morlet analysis wavelet sampled at integer ``offsets``.

    Scaled so a unit-amplitude sinusoid at the centre frequency has
    magnitude close to 1.
    """
    tau = np.asarray(offsets, dtype=np.float64) / scale
    return 2.0 / (scale * np.sqrt(2 * np.pi)) * np.exp(1j * MORLET_W0 * tau - 0.5 * tau * tau)


def morlet_filter_bank(n_samples: int, fs_hz: float, freqs_hz, w0: float = MORLET_W0):
    """Correlation filters for a finite epoch of ``n_samples``.

    Returns ``(nfft, bank)`` with ``bank`` of shape (n_freqs, nfft). Only
    lags within +-(n_samples - 1) can reach inside the epoch, so with
    ``nfft = 2 * n_samples`` the product ``fft(x) * bank`` inverts to the
    direct sum ``W[n] = sum_m x[m] * conj(psi(m - n))`` exactly.
    """
    freqs_hz = np.asarray(freqs_hz, dtype=np.float64)
    if freqs_hz.ndim != 1 or freqs_hz.size == 0:
        raise ValueError("need a non-empty 1-D list of frequencies")
    if np.any(freqs_hz <= 0) or np.any(freqs_hz >= fs_hz / 2):
        raise ValueError(f"CWT frequencies must lie in (0, {fs_hz / 2}) Hz")
    nfft = 2 * n_samples
    lags = np.arange(nfft)
    lags = np.where(lags < n_samples, lags, lags - nfft)
    scales = np.asarray(morlet_scale(freqs_hz, fs_hz, w0))
    kernels = morlet_kernel(scales[:, None], lags[None, :])
    kernels[:, n_samples] = 0.0  # lag -n_samples never lands on the epoch
    return nfft, np.conj(np.fft.fft(kernels, axis=-1))


def cwt_morlet(x, fs_hz: float, freqs_hz) -> Scalogram:
    """Magnitude of the complex Morlet transform, one row per frequency.

    Works along the last axis; for input shape (..., samples) the magnitude
    has shape (..., n_freqs, samples). Edges are not trimmed.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    freqs_hz = np.asarray(freqs_hz, dtype=np.float64)
    nfft, bank = morlet_filter_bank(n, fs_hz, freqs_hz)
    spec = np.fft.fft(x, n=nfft, axis=-1)
    coeffs = np.fft.ifft(spec[..., None, :] * bank, axis=-1)[..., :n]
    return Scalogram(freqs_hz, np.abs(coeffs))


# --------------------------------------------------------------- export


def write_psd_csv(path, freqs, psd, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz", "density"])
        for f, d in zip(freqs, psd):
            w.writerow([repr(float(f)), repr(float(d))])


def write_scalogram_csv(path, scalogram: Scalogram, header_comment: str | None = None) -> None:
    mag = np.asarray(scalogram.magnitude)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_hz"] + [f"s{i}" for i in range(mag.shape[-1])])
        for f, row in zip(scalogram.freqs_hz, mag):
            w.writerow([repr(float(f))] + [repr(float(v)) for v in row])

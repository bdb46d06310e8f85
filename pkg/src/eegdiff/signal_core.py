"""EEG epoch container, CSV/JSON storage, preprocessing and a synthetic
motor-imagery generator.

All variances are population variances (divide by N).
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sp_signal

DEFAULT_CHANNELS = ("C3", "C4", "Cz", "Fz", "Pz", "Oz")
MIN_SAMPLES = 16


class EpochFormatError(ValueError):
    """Raised when an epoch file or its metadata is malformed."""


def default_channel_names(n: int) -> list[str]:
    names = list(DEFAULT_CHANNELS[:n])
    names += [f"E{i}" for i in range(len(names), n)]
    return names


@dataclass
class EegEpoch:
    """One multichannel trial, ``data`` is channels x samples in microvolts."""

    data: np.ndarray
    fs_hz: float
    label: int = 0
    channel_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[None, :]
        if data.ndim != 2:
            raise ValueError(f"epoch data must be 2-D, got shape {data.shape}")
        n_ch, n_s = data.shape
        if n_ch < 1 or n_s < MIN_SAMPLES:
            raise ValueError(f"epoch needs >=1 channel and >={MIN_SAMPLES} samples, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("epoch data contains non-finite values")
        if not (self.fs_hz > 0 and math.isfinite(self.fs_hz)):
            raise ValueError(f"fs_hz must be positive, got {self.fs_hz}")
        label = int(self.label)
        if label < 0 or label != self.label:
            raise ValueError(f"label must be a non-negative integer, got {self.label!r}")
        names = list(self.channel_names) or default_channel_names(n_ch)
        if len(names) != n_ch:
            raise ValueError(f"{len(names)} channel names for {n_ch} channels")
        if len(set(names)) != n_ch:
            raise ValueError("channel names must be unique")
        self.data = data
        self.fs_hz = float(self.fs_hz)
        self.label = label
        self.channel_names = names

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def replace(self, data: np.ndarray) -> "EegEpoch":
        return EegEpoch(data, self.fs_hz, self.label, list(self.channel_names))


@dataclass
class EpochSet:
    """Homogeneous collection of epochs (same fs, channel count and length)."""

    epochs: list[EegEpoch]

    def __post_init__(self):
        if not self.epochs:
            raise ValueError("EpochSet must not be empty")
        first = self.epochs[0]
        for ep in self.epochs[1:]:
            if ep.data.shape != first.data.shape or ep.fs_hz != first.fs_hz:
                raise ValueError("EpochSet epochs must share shape and fs_hz")

    def __len__(self):
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)

    def __getitem__(self, idx):
        if isinstance(idx, (slice, list, np.ndarray)):
            items = self.epochs[idx] if isinstance(idx, slice) else [self.epochs[i] for i in idx]
            return EpochSet(items)
        return self.epochs[idx]

    @property
    def class_ids(self) -> set[int]:
        return {ep.label for ep in self.epochs}

    @property
    def fs_hz(self) -> float:
        return self.epochs[0].fs_hz

    @property
    def channel_names(self) -> list[str]:
        return self.epochs[0].channel_names

    @property
    def shape(self) -> tuple[int, int]:
        return self.epochs[0].data.shape

    def data(self) -> np.ndarray:
        """Stacked array of shape (n_epochs, channels, samples)."""
        return np.stack([ep.data for ep in self.epochs])

    def labels(self) -> np.ndarray:
        return np.array([ep.label for ep in self.epochs], dtype=np.int64)

    def by_class(self, label: int) -> "EpochSet":
        return EpochSet([ep for ep in self.epochs if ep.label == label])

    @classmethod
    def from_arrays(cls, data, labels, fs_hz, channel_names=None) -> "EpochSet":
        data = np.asarray(data, dtype=np.float64)
        names = list(channel_names) if channel_names else default_channel_names(data.shape[1])
        return cls([EegEpoch(x, fs_hz, int(y), names) for x, y in zip(data, labels)])


# ---------------------------------------------------------------- file I/O


def save_epoch_csv(epoch: EegEpoch, path, meta_path) -> None:
    """Write the epoch as a CSV body (one row per sample) plus a JSON sidecar."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(epoch.channel_names)
        for row in epoch.data.T:
            writer.writerow([_fmt(v) for v in row])
    meta = {"fs_hz": epoch.fs_hz, "label": epoch.label, "channels": epoch.channel_names}
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh)


def _fmt(v: float) -> str:
    # 17 significant digits is enough for an exact float64 round trip
    s = format(float(v), ".17g")
    return "0" if s in ("0", "-0") else s


def load_epoch_csv(path, meta_path) -> EegEpoch:
    try:
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise EpochFormatError(f"{meta_path}: invalid JSON ({exc})") from exc
    if not isinstance(meta, dict):
        raise EpochFormatError(f"{meta_path}: metadata must be a JSON object")
    fs = meta.get("fs_hz")
    label = meta.get("label")
    if isinstance(fs, bool) or not isinstance(fs, (int, float)) or not fs > 0:
        raise EpochFormatError(f"{meta_path}: missing or invalid fs_hz")
    if isinstance(label, bool) or not isinstance(label, int) or label < 0:
        raise EpochFormatError(f"{meta_path}: missing or invalid label")

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EpochFormatError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise EpochFormatError(f"{path}: no sample rows")
    channels = meta.get("channels", header)
    if list(channels) != header:
        raise EpochFormatError(f"{path}: header does not match metadata channels")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise EpochFormatError(f"{path}:{i}: expected {len(header)} values, got {len(row)}")
        try:
            values[i - 2] = [float(cell) for cell in row]
        except ValueError as exc:
            raise EpochFormatError(f"{path}:{i}: non-numeric cell ({exc})") from exc
    try:
        return EegEpoch(values.T, float(fs), label, header)
    except ValueError as exc:
        raise EpochFormatError(f"{path}: {exc}") from exc


def save_dataset(epochs, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for idx, ep in enumerate(epochs):
        save_epoch_csv(ep, directory / f"epoch_{idx}.csv", directory / f"epoch_{idx}.json")


def load_dataset(directory) -> EpochSet:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    pattern = re.compile(r"epoch_(\d+)\.csv$")
    found = sorted(
        (int(m.group(1)), name) for name in os.listdir(directory) if (m := pattern.match(name))
    )
    if not found:
        raise FileNotFoundError(f"no epoch_<idx>.csv files in {directory}")
    epochs = [load_epoch_csv(directory / name, directory / name.replace(".csv", ".json")) for _, name in found]
    return EpochSet(epochs)


# ----------------------------------------------------------- preprocessing


def bandpass_array(x, fs_hz: float, lo_hz: float = 0.5, hi_hz: float = 40.0, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth band-pass along the last axis of ``x``.

    The filter is a cascade of second-order sections run forward and then
    backward, so the effective magnitude response is squared and the phase
    is zero. Both ends are mirrored over two periods of the low edge before
    filtering, long enough for the high-pass transient to die out inside the
    padding; filtering the result again then leaves in-band energy unchanged.
    """
    nyq = fs_hz / 2.0
    if not (0 < lo_hz < hi_hz < nyq):
        raise ValueError(f"band edges must satisfy 0 < lo < hi < fs/2, got ({lo_hz}, {hi_hz}) with fs={fs_hz}")
    sos = sp_signal.butter(order, [lo_hz, hi_hz], btype="bandpass", fs=fs_hz, output="sos")
    x = np.asarray(x, dtype=np.float64)
    pad = int(math.ceil(2.0 * fs_hz / lo_hz))
    widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
    y = sp_signal.sosfiltfilt(sos, np.pad(x, widths, mode="symmetric"), axis=-1, padlen=0)
    return y[..., pad:pad + x.shape[-1]]


def bandpass(epoch: EegEpoch, lo_hz: float = 0.5, hi_hz: float = 40.0, order: int = 4) -> EegEpoch:
    """Per-channel zero-phase band-pass of one epoch; see ``bandpass_array``."""
    return epoch.replace(bandpass_array(epoch.data, epoch.fs_hz, lo_hz, hi_hz, order))


def rereference_common_average(epoch: EegEpoch) -> EegEpoch:
    if epoch.n_channels < 2:
        raise ValueError("common average reference needs at least two channels")
    return epoch.replace(epoch.data - epoch.data.mean(axis=0, keepdims=True))


def normalize_per_channel(epoch: EegEpoch) -> EegEpoch:
    """Z-score each channel to mean 0 and population std 1."""
    mean = epoch.data.mean(axis=1, keepdims=True)
    std = epoch.data.std(axis=1, keepdims=True)
    if np.any(std <= 1e-12 * np.maximum(1.0, np.abs(mean))):
        raise ValueError("cannot normalize a zero-variance channel")
    return epoch.replace((epoch.data - mean) / std)


def preprocess(epoch: EegEpoch, lo_hz=0.5, hi_hz=40.0, rereference=False, normalize=False) -> EegEpoch:
    out = bandpass(epoch, lo_hz, hi_hz)
    if rereference:
        out = rereference_common_average(out)
    if normalize:
        out = normalize_per_channel(out)
    return out


# ------------------------------------------------------- synthetic corpus

ALPHA_HZ = 10.0
ALPHA_RATIO = 1.5


def pink_noise(rng: np.random.Generator, shape, fs_hz: float) -> np.ndarray:
    """Unit-variance 1/f noise along the last axis."""
    white = rng.standard_normal(shape)
    spec = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(shape[-1], d=1.0 / fs_hz)
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    x = np.fft.irfft(spec * scale, n=shape[-1], axis=-1)
    return x / x.std(axis=-1, keepdims=True)


def synth_mi_epoch(
    class_id: int,
    channels: int = 4,
    samples: int = 256,
    fs_hz: float = 250.0,
    seed: int = 0,
    noise_uv: float = 10.0,
    alpha_uv: float = 30.0,
) -> EegEpoch:
    """Deterministic synthetic left/right motor-imagery epoch.

    Channel 0 plays C3 and channel 1 plays C4. Every channel carries pink
    noise plus a Gaussian-windowed 10 Hz burst; for class 0 the C3 burst is
    1.5 times the C4 burst, for class 1 the roles swap. The overall alpha
    gain, burst timing and phases are drawn per epoch so only the C3/C4
    ratio carries the class.
    """
    if class_id not in (0, 1):
        raise ValueError(f"class_id must be 0 or 1, got {class_id}")
    if channels < 2:
        raise ValueError("synthetic motor imagery needs at least two channels (C3, C4)")
    rng = np.random.default_rng(seed)
    t = np.arange(samples) / fs_hz
    dur = samples / fs_hz

    noise = pink_noise(rng, (channels, samples), fs_hz) * noise_uv
    gain = alpha_uv * math.exp(0.3 * rng.standard_normal())
    center = rng.uniform(0.35, 0.65) * dur
    width = rng.uniform(0.15, 0.25) * dur
    envelope = np.exp(-0.5 * ((t - center) / width) ** 2)
    phases = rng.uniform(0, 2 * np.pi, channels)

    amps = np.empty(channels)
    amps[0], amps[1] = gain, gain / ALPHA_RATIO
    if class_id == 1:
        amps[0], amps[1] = amps[1], amps[0]
    amps[2:] = gain / ALPHA_RATIO * rng.uniform(0.8, 1.2, channels - 2)

    bursts = amps[:, None] * envelope[None, :] * np.sin(2 * np.pi * ALPHA_HZ * t[None, :] + phases[:, None])
    return EegEpoch(noise + bursts, fs_hz, class_id, default_channel_names(channels))


def synth_dataset(per_class: int, channels: int = 4, samples: int = 256, fs_hz: float = 250.0, seed: int = 0, **kwargs) -> EpochSet:
    """Balanced two-class corpus, epochs interleaved 0, 1, 0, 1, ..."""
    seeds = np.random.SeedSequence(seed).generate_state(2 * per_class, dtype=np.uint32)
    epochs = [
        synth_mi_epoch(i % 2, channels, samples, fs_hz, int(s), **kwargs)
        for i, s in enumerate(seeds)
    ]
    return EpochSet(epochs)

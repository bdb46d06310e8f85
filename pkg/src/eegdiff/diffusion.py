"""Noise schedule, closed-form forward corruption and the ancestral sampler.

Step indices are 1-based: ``t`` runs from 1 to ``T`` and ``alpha_bar(0) == 1``.
Functions accept numpy arrays or torch tensors; per-item step arrays
broadcast over the trailing (channel, sample) axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import torch

from eegdiff.signal_core import EegEpoch


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alpha_bars: np.ndarray

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ValueError("betas must lie in (0, 1)")
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alpha_bars", np.asarray(self.alpha_bars, dtype=np.float64))

    @classmethod
    def from_betas(cls, betas) -> "NoiseSchedule":
        betas = np.asarray(betas, dtype=np.float64)
        return cls(betas, np.cumprod(1.0 - betas))

    @property
    def T(self) -> int:
        return self.betas.size

    def alpha_bar(self, t):
        """Cumulative product at step ``t`` (vectorized, ``t = 0`` gives 1)."""
        t = np.asarray(t)
        padded = np.concatenate([[1.0], self.alpha_bars])
        return padded[t]

    def to_json(self) -> str:
        return json.dumps([float(b) for b in self.betas])

    @classmethod
    def from_json(cls, text: str) -> "NoiseSchedule":
        return cls.from_betas(json.loads(text))


def make_linear_schedule(T: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not (0 < beta_start <= beta_end < 1):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return NoiseSchedule.from_betas(np.linspace(beta_start, beta_end, T))


def _check_step(t, schedule: NoiseSchedule):
    arr = np.asarray(t.detach().cpu().numpy() if torch.is_tensor(t) else t)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("diffusion steps must be integers")
        arr = arr.astype(np.int64)
    if np.any(arr < 1) or np.any(arr > schedule.T):
        raise ValueError(f"diffusion step out of range [1, {schedule.T}]")
    return arr


def _coef(values, like, ndim):
    """Broadcast per-item coefficients to the layout of ``like``."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 0:
        return float(values)
    shape = values.shape + (1,) * (ndim - values.ndim)
    values = values.reshape(shape)
    if torch.is_tensor(like):
        return torch.as_tensor(values, dtype=like.dtype, device=like.device)
    return values


def forward_diffuse(x0, t, eps, schedule: NoiseSchedule):
    """Corrupt ``x0`` straight to step ``t``: sqrt(ab) * x0 + sqrt(1 - ab) * eps."""
    steps = _check_step(t, schedule)
    if tuple(x0.shape) != tuple(eps.shape):
        raise ValueError(f"x0 shape {tuple(x0.shape)} != eps shape {tuple(eps.shape)}")
    ab = schedule.alpha_bar(steps)
    nd = len(x0.shape)
    return _coef(np.sqrt(ab), x0, nd) * x0 + _coef(np.sqrt(1.0 - ab), x0, nd) * eps


def x0_estimate(x_t, t, eps_pred, schedule: NoiseSchedule):
    """Invert the forward corruption given a noise estimate (differentiable for tensors)."""
    steps = _check_step(t, schedule)
    ab = schedule.alpha_bar(steps)
    nd = len(x_t.shape)
    return (x_t - _coef(np.sqrt(1.0 - ab), x_t, nd) * eps_pred) / _coef(np.sqrt(ab), x_t, nd)


def reverse_coefficients(t: int, schedule: NoiseSchedule) -> tuple[float, float, float]:
    """Return ``(scale, eps_coef, noise_std)`` of one ancestral step.

    ``y_{t-1} = scale * (y_t - eps_coef * eps_pred) + noise_std * z``.
    """
    beta = schedule.betas[t - 1]
    ab_t = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t - 1)
    scale = 1.0 / math.sqrt(1.0 - beta)
    eps_coef = beta / math.sqrt(1.0 - ab_t)
    noise_std = math.sqrt((1.0 - ab_prev) / (1.0 - ab_t) * beta)
    return scale, eps_coef, noise_std


def reverse_step(y_t, t: int, eps_pred, z, schedule: NoiseSchedule):
    (step,) = np.atleast_1d(_check_step(t, schedule))
    if tuple(z.shape) != tuple(y_t.shape) or tuple(eps_pred.shape) != tuple(y_t.shape):
        raise ValueError("y_t, eps_pred and z must share a shape")
    scale, eps_coef, noise_std = reverse_coefficients(int(step), schedule)
    out = scale * (y_t - eps_coef * eps_pred)
    if noise_std > 0:
        out = out + noise_std * z
    return out


def sample_batch(noise_predictor, labels, schedule: NoiseSchedule, shape, seed) -> np.ndarray:
    """Run the reverse chain from ``y_T ~ N(0, I)`` down to ``y_1``.

    ``noise_predictor(y, t, labels)`` receives a (batch, channels, samples)
    array, an integer step and the label array, and returns an array of the
    same shape. ``shape`` is (channels, samples). Deterministic in ``seed``.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    rng = np.random.default_rng(seed)
    full = (labels.size,) + tuple(shape)
    y = rng.standard_normal(full)
    for t in range(schedule.T, 0, -1):
        eps_pred = np.asarray(noise_predictor(y, t, labels), dtype=np.float64)
        if eps_pred.shape != full:
            raise ValueError(f"noise predictor returned shape {eps_pred.shape}, expected {full}")
        z = rng.standard_normal(full) if t > 1 else np.zeros(full)
        y = reverse_step(y, t, eps_pred, z, schedule)
    return y


def sample(noise_predictor, label: int, schedule: NoiseSchedule, shape, seed, fs_hz: float = 250.0,
           channel_names=None) -> EegEpoch:
    """Generate one epoch; see ``sample_batch`` for the predictor contract."""
    y = sample_batch(noise_predictor, [label], schedule, shape, seed)[0]
    return EegEpoch(y, fs_hz, int(label), list(channel_names or []))

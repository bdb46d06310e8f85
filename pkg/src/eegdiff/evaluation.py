"""Quality analyses for generated epochs.

Fréchet distance between compressed classifier features, alpha-band
energy maps, averaged Welch spectra and scalograms, classification
metrics and the with/without-augmentation experiment.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np
import torch
from scipy import stats

from eegdiff import features as fx
from eegdiff import nets
from eegdiff.signal_core import bandpass_array

ALPHA_BAND = (8.0, 13.0)


# ------------------------------------------------------------------- FID


@dataclass(frozen=True)
class FidResult:
    value: float
    mean_a: np.ndarray
    mean_b: np.ndarray
    cov_a: np.ndarray
    cov_b: np.ndarray


def compressed_features(class_params: nets.ParameterStore, cfg: nets.NetConfig, epochs, batch: int = 256) -> np.ndarray:
    """Penultimate-layer activations of the classification network, one row per epoch."""
    x = np.asarray(epochs, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    rows = []
    with torch.no_grad():
        for start in range(0, len(x), batch):
            feats, _ = nets.class_net_forward(class_params, cfg, x[start:start + batch], training=False)
            rows.append(feats.numpy())
    return np.concatenate(rows) if rows else np.zeros((0, cfg.feature_dim))


def _psd_sqrt(cov: np.ndarray, tol: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -tol:
        raise ValueError(f"covariance is indefinite (eigenvalue {vals.min():.3g})")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def fid(feats_a, feats_b, tol: float = 1e-8) -> FidResult:
    """Fréchet distance between Gaussian fits of two feature sets (sample covariances).

    The trace of ``(cov_a cov_b)^(1/2)`` equals the sum of singular values of
    ``cov_a^(1/2) cov_b^(1/2)`` (both roots by eigendecomposition). Going
    through singular values rather than square roots of the eigenvalues of
    ``cov_a^(1/2) cov_b cov_a^(1/2)`` keeps rank-deficient covariances
    accurate to round-off instead of its square root.
    """
    a = np.asarray(feats_a, dtype=np.float64)
    b = np.asarray(feats_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("feature sets must be 2-D with the same width")
    d = a.shape[1]
    if len(a) < d + 1 or len(b) < d + 1:
        raise ValueError(f"need at least {d + 1} rows per feature set, got {len(a)} and {len(b)}")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    cov_a = np.cov(a, rowvar=False, ddof=1).reshape(d, d)
    cov_b = np.cov(b, rowvar=False, ddof=1).reshape(d, d)
    scale = max(1.0, np.trace(cov_a), np.trace(cov_b))
    root_a = _psd_sqrt(cov_a, tol * scale)
    root_b = _psd_sqrt(cov_b, tol * scale)
    tr_sqrt = float(np.linalg.svd(root_a @ root_b, compute_uv=False).sum())
    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * tr_sqrt)
    if value < 0:
        if value < -tol * scale:
            raise ValueError(f"negative Fréchet distance {value:.3g}")
        value = 0.0
    return FidResult(value, mu_a, mu_b, cov_a, cov_b)


# --------------------------------------------------------- energy / spectra


def energy_map(epochs, fs_hz: float, band=ALPHA_BAND) -> np.ndarray:
    """Per-channel variance after band-pass filtering, averaged over epochs."""
    x = np.asarray(epochs, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    lo, hi = band
    if len(x) == 0:
        if not 0 < lo < hi < fs_hz / 2:
            raise ValueError(f"invalid band {band} for fs {fs_hz}")
        return np.zeros(x.shape[1])
    filtered = bandpass_array(x, fs_hz, lo, hi)
    return np.var(filtered, axis=-1).mean(axis=0)


def _write_rows(path, header, rows, comment):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _channel_index(channel_names, channels):
    names = list(channel_names)
    missing = [c for c in channels if c not in names]
    if missing:
        raise ValueError(f"channels {missing} not in {names}")
    return [names.index(c) for c in channels]


def mean_psd(epochs, fs_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Welch PSD averaged over epochs; returns (freqs, psd of shape channels x freqs)."""
    freqs, psd = fx.welch_psd(np.asarray(epochs, dtype=np.float64), fs_hz)
    return freqs, psd.mean(axis=0)


def spectra_report(real_x, real_y, gen_x, gen_y, fs_hz: float, channel_names, out_dir,
                   channels=("C3", "C4"), comment: str | None = None) -> dict:
    """Mean Welch spectra per class, channel and source, one long-format CSV per class.

    Columns: ``freq_hz, channel, source, density``. Returns
    ``{class: {(channel, source): psd}}`` together with the frequency grid
    under the key ``"freqs"``.
    """
    idx = _channel_index(channel_names, channels)
    out: dict = {}
    os.makedirs(out_dir, exist_ok=True)
    for c in sorted(set(np.asarray(real_y).tolist()) | set(np.asarray(gen_y).tolist())):
        per = {}
        rows = []
        for source, x, y in (("real", real_x, real_y), ("generated", gen_x, gen_y)):
            sel = np.asarray(x)[np.asarray(y) == c]
            if len(sel) == 0:
                continue
            freqs, psd = mean_psd(sel, fs_hz)
            out["freqs"] = freqs
            for name, i in zip(channels, idx):
                per[(name, source)] = psd[i]
                rows += [[repr(float(f)), name, source, repr(float(v))] for f, v in zip(freqs, psd[i])]
        _write_rows(os.path.join(out_dir, f"spectra_class{c}.csv"), ["freq_hz", "channel", "source", "density"],
                    rows, comment)
        out[c] = per
    return out


def mean_scalogram(epochs, fs_hz: float, freqs_hz) -> np.ndarray:
    """CWT magnitude averaged over epochs: (channels, freqs, samples)."""
    x = np.asarray(epochs, dtype=np.float64)
    if len(x) == 0:
        return np.zeros((x.shape[1], len(freqs_hz), x.shape[2]))
    return fx.cwt_morlet(x, fs_hz, freqs_hz).magnitude.mean(axis=0)


def tf_report(x, y, fs_hz: float, channel_names, out_dir, channels=("C3", "C4"), freqs_hz=None,
              prefix: str = "tf", comment: str | None = None) -> dict:
    """Average scalogram per class and channel, each written to its own CSV."""
    freqs_hz = np.arange(1.0, 41.0) if freqs_hz is None else np.asarray(freqs_hz, dtype=np.float64)
    idx = _channel_index(channel_names, channels)
    os.makedirs(out_dir, exist_ok=True)
    out = {}
    for c in sorted(set(np.asarray(y).tolist())):
        mag = mean_scalogram(np.asarray(x)[np.asarray(y) == c], fs_hz, freqs_hz)
        for name, i in zip(channels, idx):
            sc = fx.Scalogram(freqs_hz, mag[i])
            fx.write_scalogram_csv(os.path.join(out_dir, f"{prefix}_class{c}_{name}.csv"), sc, comment)
            out[(c, name)] = sc
    return out


# ------------------------------------------------------- classification


@dataclass(frozen=True)
class ClassifierMetrics:
    accuracy: float
    kappa: float
    f1: float
    confusion: np.ndarray

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "kappa": self.kappa, "f1": self.f1,
                "confusion": np.asarray(self.confusion).tolist()}


def classifier_metrics(predictions, labels, num_classes: int | None = None) -> ClassifierMetrics:
    """Accuracy, Cohen's kappa and macro F1 (rows of the confusion matrix are true classes)."""
    pred = np.asarray(predictions, dtype=np.int64).reshape(-1)
    true = np.asarray(labels, dtype=np.int64).reshape(-1)
    if pred.size == 0 or pred.size != true.size:
        raise ValueError("need equally long, non-empty prediction and label arrays")
    k = num_classes or int(max(pred.max(), true.max())) + 1
    k = max(k, 2)
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (true, pred), 1)
    n = conf.sum()
    accuracy = np.trace(conf) / n
    p_e = float(np.sum(conf.sum(axis=0) * conf.sum(axis=1))) / n ** 2
    if p_e >= 1.0:
        raise ValueError("kappa undefined: chance agreement is 1")
    kappa = (accuracy - p_e) / (1.0 - p_e)
    f1s = []
    for c in range(k):
        tp = conf[c, c]
        denom = conf[c, :].sum() + conf[:, c].sum()
        if denom:
            f1s.append(2.0 * tp / denom)
    return ClassifierMetrics(float(accuracy), float(kappa), float(np.mean(f1s)), conf)


def predict(class_params, cfg: nets.NetConfig, x) -> np.ndarray:
    with torch.no_grad():
        _, logits = nets.class_net_forward(class_params, cfg, np.asarray(x, dtype=np.float64), training=False)
    return logits.argmax(dim=1).numpy()


def stratified_folds(labels, k: int, seed) -> list[np.ndarray]:
    """Split indices into ``k`` folds with per-class round-robin assignment."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        for j, i in enumerate(idx):
            folds[(j + offset) % k].append(i)
        offset += len(idx)
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


@dataclass
class AugmentationResult:
    baseline: list
    augmented: list
    p_value: float
    fold_seed: int
    synth_count: int

    def summary(self, which: str) -> dict:
        ms = getattr(self, which)
        return {key: float(np.mean([getattr(m, key) for m in ms])) for key in ("accuracy", "kappa", "f1")}

    def to_json(self) -> dict:
        return {"baseline": self.summary("baseline"), "augmented": self.summary("augmented"),
                "p_value": self.p_value, "folds": len(self.baseline), "fold_seed": self.fold_seed,
                "synth_count": self.synth_count}

    def fold_records(self) -> list[dict]:
        return [{"fold": i, "baseline": b.as_dict(), "augmented": a.as_dict()}
                for i, (b, a) in enumerate(zip(self.baseline, self.augmented))]

    def write(self, metrics_path, folds_path) -> None:
        with open(metrics_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(folds_path, "w", encoding="utf-8") as fh:
            for rec in self.fold_records():
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def paired_p_value(a, b) -> float:
    """Two-sided paired t-test; identical samples give 1.0 instead of NaN."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    d = b - a
    if np.all(d == d[0]):
        return 1.0 if d[0] == 0 else 0.0
    return float(stats.ttest_rel(b, a).pvalue)


def _balanced_pick(pool_y, count, rng):
    classes = np.unique(pool_y)
    per = [count // len(classes) + (1 if i < count % len(classes) else 0) for i in range(len(classes))]
    picks = []
    for c, n in zip(classes, per):
        idx = np.flatnonzero(pool_y == c)
        if n > len(idx):
            raise ValueError(f"synthetic pool has {len(idx)} epochs of class {c}, need {n}")
        picks.append(rng.choice(idx, size=n, replace=False))
    return np.concatenate(picks) if picks else np.zeros(0, dtype=np.int64)


def augmentation_experiment(train_x, train_y, test_x, test_y, synth_x, synth_y, synth_count: int,
                            cfg: nets.NetConfig, folds: int = 10, seed: int = 0, epochs: int = 30,
                            lr: float = 0.1, batch: int = 32) -> AugmentationResult:
    """Classifier accuracy with and without generated epochs, paired by fold.

    Fold ``k`` trains on the real training epochs outside stratified fold
    ``k`` (baseline), then from the same initialization on those plus
    ``synth_count`` class-balanced epochs from the synthetic pool
    (augmented). Both are scored on the disjoint test set.
    """
    from eegdiff.trainer import fit_classifier

    train_x, test_x = np.asarray(train_x, float), np.asarray(test_x, float)
    train_y, test_y = np.asarray(train_y, np.int64), np.asarray(test_y, np.int64)
    synth_x = np.asarray(synth_x, float) if synth_count else np.zeros((0,) + train_x.shape[1:])
    synth_y = np.asarray(synth_y, np.int64) if synth_count else np.zeros(0, np.int64)
    k = cfg.num_classes
    base, aug = [], []
    for f, held in enumerate(stratified_folds(train_y, folds, seed)):
        keep = np.setdiff1d(np.arange(len(train_y)), held)
        init_seed = seed * 7919 + f
        params, _ = fit_classifier("class", train_x[keep], train_y[keep], cfg, epochs, lr, batch, init_seed)
        base.append(classifier_metrics(predict(params, cfg, test_x), test_y, k))
        pick = _balanced_pick(synth_y, synth_count, np.random.default_rng([seed, f])) if synth_count else []
        xa = np.concatenate([train_x[keep], synth_x[pick]]) if synth_count else train_x[keep]
        ya = np.concatenate([train_y[keep], synth_y[pick]]) if synth_count else train_y[keep]
        params, _ = fit_classifier("class", xa, ya, cfg, epochs, lr, batch, init_seed)
        aug.append(classifier_metrics(predict(params, cfg, test_x), test_y, k))
    p = paired_p_value([m.accuracy for m in base], [m.accuracy for m in aug])
    return AugmentationResult(base, aug, p, seed, synth_count)

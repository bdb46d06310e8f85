"""Networks as pure functions of a ``ParameterStore``.

Every network is a pair ``init_*(config, seed) -> ParameterStore`` and
``*_forward(params, config, ...)``. Computation runs in float64 on the CPU
through torch autograd; parameters live in named tensors so they can be
soft-updated, checkpointed and finite-difference checked uniformly.
"""

from __future__ import annotations

import math
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn.functional as F

from eegdiff.features import morlet_filter_bank

DTYPE = torch.float64
BUFFER_SUFFIXES = ("running_mean", "running_var")
CHECKPOINT_MAGIC = b"EEGD"
CHECKPOINT_VERSION = 1

torch.set_num_threads(max(1, int(os.environ.get("EEGDIFF_THREADS", "1"))))


class CheckpointError(ValueError):
    """Raised for unreadable, corrupted or version-mismatched checkpoints."""


def is_buffer(name: str) -> bool:
    return name.endswith(BUFFER_SUFFIXES)


class ParameterStore:
    """Ordered mapping of name -> float64 tensor with gradient slots.

    Entries whose names end in ``running_mean``/``running_var`` are
    normalization statistics: stored and checkpointed, never trained.
    """

    def __init__(self, entries=None):
        self._entries: OrderedDict[str, torch.Tensor] = OrderedDict()
        for name, value in (entries or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> torch.Tensor:
        if name in self._entries:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = torch.as_tensor(np.asarray(value, dtype=np.float64)).clone()
        if not is_buffer(name):
            t.requires_grad_(True)
        self._entries[name] = t
        return t

    def __getitem__(self, name: str) -> torch.Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def trainable(self):
        return [(n, t) for n, t in self._entries.items() if not is_buffer(n)]

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {n: tuple(t.shape) for n, t in self._entries.items()}

    def num_values(self, trainable_only: bool = True) -> int:
        items = self.trainable() if trainable_only else self._entries.items()
        return sum(t.numel() for _, t in items)

    # gradients ---------------------------------------------------------
    def zero_grad(self) -> None:
        for _, t in self.trainable():
            t.grad = None

    def grad(self, name: str) -> torch.Tensor:
        t = self._entries[name]
        return torch.zeros_like(t) if t.grad is None else t.grad

    def grad_vector(self) -> np.ndarray:
        return np.concatenate([self.grad(n).detach().numpy().ravel() for n, _ in self.trainable()] or [np.zeros(0)])

    def sgd_step(self, lr: float) -> None:
        with torch.no_grad():
            for _, t in self.trainable():
                if t.grad is not None:
                    t -= lr * t.grad

    def set_trainable(self, flag: bool) -> None:
        for _, t in self.trainable():
            t.requires_grad_(flag)
            if not flag:
                t.grad = None

    # values ------------------------------------------------------------
    def vector(self) -> np.ndarray:
        return np.concatenate([t.detach().numpy().ravel() for _, t in self.trainable()] or [np.zeros(0)])

    def numpy(self) -> dict[str, np.ndarray]:
        return {n: t.detach().numpy().copy() for n, t in self._entries.items()}

    def copy(self) -> "ParameterStore":
        out = ParameterStore()
        for n, t in self._entries.items():
            c = out.add(n, t.detach().numpy())
            if not is_buffer(n):
                c.requires_grad_(t.requires_grad)
        return out

    def assign(self, other: "ParameterStore") -> None:
        """Copy values from a congruent store in place."""
        _check_congruent(self, other)
        with torch.no_grad():
            for n, t in self._entries.items():
                t.copy_(other[n])

    def equal(self, other: "ParameterStore") -> bool:
        if self.names() != other.names():
            return False
        return all(torch.equal(t.detach(), other[n].detach()) for n, t in self._entries.items())


def gradient_step(store: ParameterStore, loss: torch.Tensor, lr: float) -> dict[str, torch.Tensor]:
    """One SGD step on ``store`` only; gradients of other stores are not touched.

    Returns the gradients that were applied, keyed by entry name.
    """
    entries = [(n, t) for n, t in store.trainable() if t.requires_grad]
    grads = torch.autograd.grad(loss, [t for _, t in entries], allow_unused=True)
    out = {}
    with torch.no_grad():
        for (name, t), g in zip(entries, grads):
            if g is None:
                g = torch.zeros_like(t)
            t -= lr * g
            out[name] = g
    return out


def _check_congruent(a: ParameterStore, b: ParameterStore) -> None:
    if a.shapes() != b.shapes():
        raise ValueError("parameter stores are not congruent")


def soft_update(source: ParameterStore, target: ParameterStore, sigma: float) -> None:
    """target <- sigma * source + (1 - sigma) * target for every coordinate."""
    if not 0.0 <= sigma <= 1.0:
        raise ValueError(f"sigma must lie in [0, 1], got {sigma}")
    _check_congruent(source, target)
    with torch.no_grad():
        for n, t in target.items():
            t.copy_(sigma * source[n] + (1.0 - sigma) * t)


# ------------------------------------------------------------ primitives


def swish(x):
    if torch.is_tensor(x):
        return x * torch.sigmoid(x)
    x = np.asarray(x, dtype=np.float64)
    return x / (1.0 + np.exp(-x))


def as_tensor(x) -> torch.Tensor:
    if torch.is_tensor(x):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def cross_entropy(logits, labels, item_weights=None) -> torch.Tensor:
    """Mean negative log-softmax of the true class (max-shifted).

    ``item_weights`` scales each row's term before averaging over rows.
    """
    logits = as_tensor(logits)
    labels = torch.as_tensor(np.asarray(labels, dtype=np.int64).reshape(-1))
    k = logits.shape[-1]
    if labels.numel() != logits.shape[0]:
        raise ValueError("one label per logit row is required")
    if torch.any(labels < 0) or torch.any(labels >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    shifted = logits - logits.max(dim=-1, keepdim=True).values.detach()
    log_probs = shifted - torch.logsumexp(shifted, dim=-1, keepdim=True)
    nll = -log_probs.gather(1, labels[:, None])[:, 0]
    if item_weights is not None:
        nll = nll * as_tensor(item_weights).reshape(-1)
    return nll.mean()


class _Init:
    """Uniform fan-in initializer drawing from one numpy generator."""

    def __init__(self, seed):
        self.rng = np.random.default_rng(seed)
        self.params = ParameterStore()

    def uniform(self, name, shape, fan_in):
        bound = math.sqrt(1.0 / fan_in)
        self.params.add(name, self.rng.uniform(-bound, bound, shape))

    # bias=False for layers feeding batch-statistic normalization, which
    # would cancel a per-channel offset and leave it with zero gradient
    def linear(self, name, n_in, n_out, zero=False, bias=True):
        if zero:
            self.params.add(f"{name}.weight", np.zeros((n_out, n_in)))
            self.params.add(f"{name}.bias", np.zeros(n_out))
            return
        self.uniform(f"{name}.weight", (n_out, n_in), n_in)
        if bias:
            self.uniform(f"{name}.bias", (n_out,), n_in)

    def conv(self, name, c_in, c_out, *kernel, zero=False, bias=True):
        fan_in = c_in * int(np.prod(kernel))
        if zero:
            self.params.add(f"{name}.weight", np.zeros((c_out, c_in, *kernel)))
            self.params.add(f"{name}.bias", np.zeros(c_out))
            return
        self.uniform(f"{name}.weight", (c_out, c_in, *kernel), fan_in)
        if bias:
            self.uniform(f"{name}.bias", (c_out,), fan_in)

    def conv_transpose(self, name, c_in, c_out, kernel):
        self.uniform(f"{name}.weight", (c_in, c_out, kernel), c_in * kernel)
        self.uniform(f"{name}.bias", (c_out,), c_in * kernel)

    def norm(self, name, c):
        self.params.add(f"{name}.weight", np.ones(c))
        self.params.add(f"{name}.bias", np.zeros(c))
        self.params.add(f"{name}.running_mean", np.zeros(c))
        self.params.add(f"{name}.running_var", np.ones(c))


def _bias(p, name):
    key = f"{name}.bias"
    return p[key] if key in p else None


def _linear(p, name, x):
    return F.linear(x, p[f"{name}.weight"], _bias(p, name))


def _conv1d(p, name, x, stride=1):
    w = p[f"{name}.weight"]
    return F.conv1d(x, w, _bias(p, name), stride=stride, padding=w.shape[-1] // 2)


def _conv2d(p, name, x, stride=1):
    w = p[f"{name}.weight"]
    return F.conv2d(x, w, _bias(p, name), stride=stride, padding=(w.shape[-2] // 2, w.shape[-1] // 2))


def _upsample(p, name, x):
    # kernel 4, stride 2, padding 1 doubles the length exactly
    return F.conv_transpose1d(x, p[f"{name}.weight"], p[f"{name}.bias"], stride=2, padding=1)


def _norm(p, name, x, training, momentum=0.1):
    """Per-feature-map normalization with batch statistics while training."""
    return F.batch_norm(
        x, p[f"{name}.running_mean"], p[f"{name}.running_var"],
        p[f"{name}.weight"], p[f"{name}.bias"], training=training, momentum=momentum, eps=1e-5,
    )


# --------------------------------------------------------------- configs


@dataclass(frozen=True)
class NetConfig:
    channels: int = 4
    samples: int = 256
    fs_hz: float = 250.0
    base_width: int = 16
    depth: int = 3
    embed_dim: int = 32
    num_classes: int = 2
    feature_dim: int = 16
    hidden: int = 64
    wavelet_freqs: int = 16

    def __post_init__(self):
        ints = ("channels", "samples", "base_width", "depth", "embed_dim", "num_classes", "feature_dim", "hidden", "wavelet_freqs")
        for name in ints:
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"NetConfig.{name} must be positive")
        if self.samples % (2 ** self.depth):
            raise ValueError(f"samples ({self.samples}) must be divisible by 2**depth ({2 ** self.depth})")
        if self.embed_dim % 2:
            raise ValueError("embed_dim must be even")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_input(x, cfg: NetConfig) -> torch.Tensor:
    x = as_tensor(x)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or tuple(x.shape[1:]) != (cfg.channels, cfg.samples):
        raise ValueError(f"expected input (batch, {cfg.channels}, {cfg.samples}), got {tuple(x.shape)}")
    return x


# ------------------------------------------------------------------ U-Net


def step_embedding(t, dim: int) -> torch.Tensor:
    """Sinusoidal encoding of integer diffusion steps, shape (batch, dim)."""
    t = torch.as_tensor(np.asarray(t, dtype=np.float64).reshape(-1))
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=DTYPE) / half)
    args = t[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


def unet_widths(cfg: NetConfig) -> list[int]:
    return [cfg.base_width * 2 ** i for i in range(cfg.depth)]


def _init_resblock(init: _Init, name, c_in, c_out, cond_dim):
    init.norm(f"{name}.norm1", c_in)
    init.conv(f"{name}.conv1", c_in, c_out, 3, bias=False)
    init.linear(f"{name}.cond", cond_dim, c_out, bias=False)
    init.norm(f"{name}.norm2", c_out)
    init.conv(f"{name}.conv2", c_out, c_out, 3)
    if c_in != c_out:
        init.conv(f"{name}.skip", c_in, c_out, 1)


def _resblock(p, name, x, cond, training):
    h = _conv1d(p, f"{name}.conv1", swish(_norm(p, f"{name}.norm1", x, training)))
    h = h + _linear(p, f"{name}.cond", cond)[:, :, None]
    h = _conv1d(p, f"{name}.conv2", swish(_norm(p, f"{name}.norm2", h, training)))
    shortcut = _conv1d(p, f"{name}.skip", x) if f"{name}.skip.weight" in p else x
    return h + shortcut


def init_unet(cfg: NetConfig, seed: int = 0, zero_head: bool = True) -> ParameterStore:
    """Encoder-decoder noise predictor conditioned on step and class label.

    With ``zero_head`` the output projection starts at zero, so the
    untrained network predicts zero noise.
    """
    init = _Init(seed)
    e = cfg.embed_dim
    init.linear("embed.step1", e, e)
    init.linear("embed.step2", e, e)
    init.params.add("embed.label", init.rng.standard_normal((cfg.num_classes, e)))
    widths = unet_widths(cfg)
    init.conv("stem", cfg.channels, widths[0], 3)
    c = widths[0]
    for i, w in enumerate(widths):
        _init_resblock(init, f"enc{i}", c, w, e)
        init.conv(f"down{i}", w, w, 3)
        c = w
    mid = 2 * widths[-1]
    _init_resblock(init, "mid", c, mid, e)
    c = mid
    for i in reversed(range(cfg.depth)):
        w = widths[i]
        init.conv_transpose(f"up{i}", c, w, 4)
        _init_resblock(init, f"dec{i}", 2 * w, w, e)
        c = w
    init.norm("head_norm", c)
    init.conv("head", c, cfg.channels, 1, zero=zero_head)
    return init.params


def unet_forward(params: ParameterStore, cfg: NetConfig, x_t, t, labels, training: bool = False) -> torch.Tensor:
    """Predict the noise in ``x_t`` (batch, channels, samples) at steps ``t``."""
    x = _check_input(x_t, cfg)
    b = x.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=np.int64), (b,)).copy()
    labels = np.broadcast_to(np.asarray(labels, dtype=np.int64), (b,)).copy()
    if np.any(labels < 0) or np.any(labels >= cfg.num_classes):
        raise ValueError(f"labels must lie in [0, {cfg.num_classes})")

    p = params
    emb = step_embedding(t, cfg.embed_dim)
    emb = _linear(p, "embed.step2", swish(_linear(p, "embed.step1", emb)))
    cond = swish(emb + p["embed.label"][torch.as_tensor(labels)])

    h = _conv1d(p, "stem", x)
    skips = []
    for i in range(cfg.depth):
        h = _resblock(p, f"enc{i}", h, cond, training)
        skips.append(h)
        h = _conv1d(p, f"down{i}", h, stride=2)
    h = _resblock(p, "mid", h, cond, training)
    for i in reversed(range(cfg.depth)):
        h = _upsample(p, f"up{i}", h)
        h = torch.cat([h, skips[i]], dim=1)
        h = _resblock(p, f"dec{i}", h, cond, training)
    return _conv1d(p, "head", swish(_norm(p, "head_norm", h, training)))


def unet_predictor(params: ParameterStore, cfg: NetConfig):
    """Wrap the U-Net as a numpy noise predictor for ``diffusion.sample_batch``."""

    def predict(y, t, labels):
        with torch.no_grad():
            return unet_forward(params, cfg, y, t, labels, training=False).numpy()

    return predict


# -------------------------------------------------------- wavelet network


def wavelet_freqs(cfg: NetConfig) -> np.ndarray:
    return np.geomspace(1.0, 40.0, cfg.wavelet_freqs)


_BANK_CACHE: dict = {}


def _filter_bank(cfg: NetConfig):
    key = (cfg.samples, cfg.fs_hz, cfg.wavelet_freqs)
    if key not in _BANK_CACHE:
        nfft, bank = morlet_filter_bank(cfg.samples, cfg.fs_hz, wavelet_freqs(cfg))
        _BANK_CACHE[key] = (nfft, torch.as_tensor(bank, dtype=torch.complex128))
    return _BANK_CACHE[key]


def scalogram_frontend(x, cfg: NetConfig) -> torch.Tensor:
    """Fixed Morlet magnitude front-end: (batch, ch, samples) -> (batch, ch, freqs, samples).

    Magnitudes are computed as ``sqrt(p + eps) - sqrt(eps)`` so the map is
    differentiable everywhere and exactly zero for a zero input.
    """
    x = _check_input(x, cfg)
    nfft, bank = _filter_bank(cfg)
    spec = torch.fft.fft(x, n=nfft, dim=-1)
    coeffs = torch.fft.ifft(spec[:, :, None, :] * bank, dim=-1)[..., : cfg.samples]
    power = coeffs.real ** 2 + coeffs.imag ** 2
    eps = 1e-12
    return torch.sqrt(power + eps) - math.sqrt(eps)


def init_wavelet_net(cfg: NetConfig, seed: int = 0) -> ParameterStore:
    init = _Init(seed)
    init.conv("conv1", cfg.channels, 8, 3, 3, bias=False)
    init.norm("norm1", 8)
    init.conv("conv2", 8, 16, 3, 3, bias=False)
    init.norm("norm2", 16)
    init.conv("conv3", 16, 16, 3, 3, bias=False)
    init.norm("norm3", 16)
    init.linear("feat", 16, cfg.feature_dim)
    init.linear("head", cfg.feature_dim, cfg.num_classes)
    return init.params


def wavelet_net_forward(params: ParameterStore, cfg: NetConfig, x, training: bool = False):
    """Return ``(features, logits)`` for a batch of epochs."""
    p = params
    h = scalogram_frontend(x, cfg)
    h = swish(_norm(p, "norm1", _conv2d(p, "conv1", h, stride=(1, 2)), training))
    h = swish(_norm(p, "norm2", _conv2d(p, "conv2", h, stride=2), training))
    h = swish(_norm(p, "norm3", _conv2d(p, "conv3", h, stride=2), training))
    features = swish(_linear(p, "feat", h.mean(dim=(2, 3))))
    return features, _linear(p, "head", features)


# ------------------------------------------------- classification network


def init_class_net(cfg: NetConfig, seed: int = 0) -> ParameterStore:
    init = _Init(seed)
    init.conv("conv1", cfg.channels, 16, 7, bias=False)
    init.norm("norm1", 16)
    init.conv("conv2", 16, 32, 5, bias=False)
    init.norm("norm2", 32)
    init.conv("conv3", 32, 32, 5, bias=False)
    init.norm("norm3", 32)
    init.linear("feat", 32, cfg.feature_dim)
    init.linear("head", cfg.feature_dim, cfg.num_classes)
    return init.params


def class_net_forward(params: ParameterStore, cfg: NetConfig, x, training: bool = False):
    p = params
    h = _check_input(x, cfg)
    h = swish(_norm(p, "norm1", _conv1d(p, "conv1", h, stride=2), training))
    h = swish(_norm(p, "norm2", _conv1d(p, "conv2", h, stride=2), training))
    h = swish(_norm(p, "norm3", _conv1d(p, "conv3", h, stride=2), training))
    features = swish(_linear(p, "feat", h.mean(dim=2)))
    return features, _linear(p, "head", features)


FEATURE_NETS = {
    "wavelet": (init_wavelet_net, wavelet_net_forward),
    "class": (init_class_net, class_net_forward),
}


# ---------------------------------------------------------------- MLPs


def init_mlp(n_in: int, n_out: int, hidden: int = 64, seed: int = 0) -> ParameterStore:
    init = _Init(seed)
    init.linear("fc1", n_in, hidden)
    init.linear("fc2", hidden, hidden)
    init.linear("out", hidden, n_out)
    return init.params


def mlp_forward(params: ParameterStore, x) -> torch.Tensor:
    x = as_tensor(x)
    n_in = params["fc1.weight"].shape[1]
    if x.shape[-1] != n_in:
        raise ValueError(f"MLP expects input width {n_in}, got {x.shape[-1]}")
    h = swish(_linear(params, "fc1", x))
    h = swish(_linear(params, "fc2", h))
    return _linear(params, "out", h)


# ---------------------------------------------------------- verification


def sample_coordinates(params: ParameterStore, fraction: float = 0.05, seed: int = 0) -> dict[str, np.ndarray]:
    """Flat indices checked per trainable entry: a random ``fraction``, at least one."""
    rng = np.random.default_rng(seed)
    out = {}
    for name, tensor in params.trainable():
        k = max(1, int(round(fraction * tensor.numel())))
        out[name] = rng.choice(tensor.numel(), size=k, replace=False)
    return out


def grad_check_report(f, params: ParameterStore, step: float = 1e-5, fraction: float = 0.05,
                      seed: int = 0, analytic: dict | None = None) -> dict[str, float]:
    """Worst relative error between analytic and central-difference gradients, per entry.

    ``f(params)`` must return a scalar tensor. Coordinates come from
    ``sample_coordinates`` and are perturbed by ``step * (1 + |theta|)``.
    ``analytic`` overrides the autograd gradient (name -> array), which is
    how fault injection is exercised.
    """
    params.zero_grad()
    loss = f(params)
    if not torch.isfinite(loss):
        raise FloatingPointError("loss is not finite at the check point")
    loss.backward()
    grads = {n: params.grad(n).detach().numpy().ravel().copy() for n, _ in params.trainable()}
    params.zero_grad()
    if analytic is not None:
        grads.update({n: np.asarray(g, dtype=np.float64).ravel() for n, g in analytic.items()})

    coords = sample_coordinates(params, fraction, seed)
    report = {}
    with torch.no_grad():
        for name, tensor in params.trainable():
            flat = tensor.view(-1)
            worst = 0.0
            for i in coords[name]:
                orig = flat[i].item()
                h = step * (1.0 + abs(orig))
                flat[i] = orig + h
                f_plus = f(params).item()
                flat[i] = orig - h
                f_minus = f(params).item()
                flat[i] = orig
                if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                    raise FloatingPointError(f"non-finite loss while perturbing {name}[{i}]")
                numeric = (f_plus - f_minus) / (2 * h)
                a = grads[name][i]
                err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
                worst = max(worst, err)
            report[name] = worst
    return report


def grad_check(f, params: ParameterStore, step: float = 1e-5, **kwargs) -> float:
    """Maximum relative gradient error over a random coordinate subsample."""
    return max(grad_check_report(f, params, step, **kwargs).values())


# ------------------------------------------------------------ checkpoints


def encode_entries(entries: dict[str, np.ndarray]) -> bytes:
    """Serialize named arrays in the ``EEGD`` layout (little-endian)."""
    out = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(entries))]
    for name, arr in entries.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)) + raw)
        out.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.tobytes())
    return b"".join(out)


def decode_entries(buf: bytes, offset: int = 0) -> tuple[OrderedDict, int]:
    """Inverse of ``encode_entries``; returns the entries and the end offset."""
    if buf[offset:offset + 4] != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic bytes: not an EEGD checkpoint")
    try:
        version, count = struct.unpack_from("<II", buf, offset + 4)
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})")
        pos = offset + 12
        entries = OrderedDict()
        for _ in range(count):
            (n,) = struct.unpack_from("<I", buf, pos)
            name = buf[pos + 4:pos + 4 + n].decode("utf-8")
            pos += 4 + n
            (rank,) = struct.unpack_from("<I", buf, pos)
            dims = struct.unpack_from(f"<{rank}I", buf, pos + 4)
            pos += 4 + 4 * rank
            size = int(np.prod(dims)) if rank else 1
            if pos + 8 * size > len(buf):
                raise CheckpointError("truncated checkpoint")
            entries[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(dims).copy()
            pos += 8 * size
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint ({exc})") from exc
    return entries, pos


def stores_to_entries(stores: dict[str, ParameterStore]) -> OrderedDict:
    out = OrderedDict()
    for prefix, store in stores.items():
        for name, arr in store.numpy().items():
            out[f"{prefix}/{name}"] = arr
    return out


def entries_to_stores(entries: dict[str, np.ndarray]) -> OrderedDict:
    stores: OrderedDict[str, ParameterStore] = OrderedDict()
    for full, arr in entries.items():
        prefix, _, name = full.partition("/")
        stores.setdefault(prefix, ParameterStore()).add(name, arr)
    return stores


def save_params(path, stores: dict[str, ParameterStore]) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_entries(stores_to_entries(stores)))


def load_params(path) -> OrderedDict:
    with open(path, "rb") as fh:
        buf = fh.read()
    entries, _ = decode_entries(buf)
    return entries_to_stores(entries)

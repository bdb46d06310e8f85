"""Training loop for the weight-guided diffusion generator.

Every random draw is taken from a generator seeded by
``(seed, epoch, iteration, purpose)``, so a run resumed from a checkpoint
replays exactly the draws of an uninterrupted run.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import torch

from eegdiff import agent as ag
from eegdiff import diffusion as dm
from eegdiff import nets
from eegdiff.signal_core import EpochSet, bandpass_array

PURPOSES = {"batch": 1, "noise": 2, "action": 3, "chain": 4, "agent": 5, "pretrain": 6, "init": 7}
SECTION_MAGIC = b"EEGDTRN1"


class NonFiniteLoss(FloatingPointError):
    """Raised when a training loss stops being finite."""


class PretrainingFailed(RuntimeError):
    """A feature network missed its held-out accuracy floor."""


def _rng(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


AUX_WEIGHTINGS = ("none", "alpha_bar")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    iters_per_epoch: int = 5
    batch_size: int = 16
    T: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    lr_unet: float = 1e-3
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    discount: float = 0.9
    sigma: float = 0.005
    noise_std: float = 0.05
    noise_decay: float = 0.995
    gen_batch: int = 16
    ref_batch: int = 32
    buffer_capacity: int = 10_000
    agent_minibatch: int = 32
    agent_updates: int = 1
    agent_enabled: bool = True
    fixed_weights: tuple = (1.0, 0.0, 0.0)
    predict_target: str = "noise"
    aux_weighting: str = "none"
    bandpass_hz: tuple | None = (0.5, 40.0)
    pretrain_epochs: int = 30
    pretrain_lr: float = 0.1
    pretrain_batch: int = 32
    pretrain_target: float = 0.8
    seed: int = 0
    net: nets.NetConfig = field(default_factory=nets.NetConfig)

    def __post_init__(self):
        if isinstance(self.net, dict):
            object.__setattr__(self, "net", nets.NetConfig(**self.net))
        object.__setattr__(self, "fixed_weights", tuple(float(w) for w in self.fixed_weights))
        if self.bandpass_hz is not None:
            object.__setattr__(self, "bandpass_hz", tuple(float(v) for v in self.bandpass_hz))
        positive = ("epochs", "iters_per_epoch", "batch_size", "T", "beta_start", "beta_end", "lr_unet",
                    "lr_actor", "lr_critic", "gen_batch", "ref_batch", "buffer_capacity",
                    "agent_minibatch", "agent_updates", "pretrain_epochs", "pretrain_lr", "pretrain_batch")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"TrainConfig.{name} must be positive")
        if self.predict_target not in ("noise", "signal"):
            raise ValueError("predict_target must be 'noise' or 'signal'")
        if self.aux_weighting not in AUX_WEIGHTINGS:
            raise ValueError(f"aux_weighting must be one of {', '.join(AUX_WEIGHTINGS)}")
        if len(self.fixed_weights) != 3 or min(self.fixed_weights) < 0:
            raise ValueError("fixed_weights needs three non-negative values")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fixed_weights"] = list(self.fixed_weights)
        d["bandpass_hz"] = None if self.bandpass_hz is None else list(self.bandpass_hz)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise KeyError(f"unknown TrainConfig key(s): {', '.join(unknown)}")
        d = dict(d)
        if "net" in d:
            net_known = {f.name for f in fields(nets.NetConfig)}
            bad = sorted(set(d["net"]) - net_known)
            if bad:
                raise KeyError(f"unknown net key(s): {', '.join(bad)}")
            d["net"] = nets.NetConfig(**d["net"])
        return cls(**d)

    def agent_config(self) -> ag.AgentConfig:
        return ag.AgentConfig(
            actor_lr=self.lr_actor, critic_lr=self.lr_critic, discount=self.discount, sigma=self.sigma,
            noise_std=self.noise_std, noise_decay=self.noise_decay, buffer_capacity=self.buffer_capacity,
            minibatch=self.agent_minibatch, updates_per_epoch=self.agent_updates, hidden=self.net.hidden,
        )

    def schedule(self) -> dm.NoiseSchedule:
        return dm.make_linear_schedule(self.T, self.beta_start, self.beta_end)


DESK_OVERRIDES = {"beta_end": 0.1, "lr_unet": 0.3, "gen_batch": 8, "aux_weighting": "alpha_bar",
                  "net": {"base_width": 8}}


def desk_config(**overrides) -> TrainConfig:
    """The single-core configuration: 4 x 256 epochs, T = 100, 200 epochs of 5 iterations.

    It departs from the defaults where the short budget needs it: a steeper
    noise schedule so that step T is close to pure noise, plain SGD with a
    larger step, half-width networks and fewer epochs per reward evaluation.
    """
    d = {**DESK_OVERRIDES, **overrides}
    if isinstance(d.get("net"), dict):
        d["net"] = nets.NetConfig(**d["net"])
    return TrainConfig(**d)


def config_digest(config: TrainConfig) -> str:
    text = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# ----------------------------------------------------------------- data


@dataclass(frozen=True)
class Standardizer:
    """One offset and one scale for the whole dataset, so channel ratios survive."""

    offset: float
    scale: float

    @classmethod
    def fit(cls, data: np.ndarray) -> "Standardizer":
        scale = float(np.std(data))
        if not scale > 0:
            raise ValueError("training data has zero variance")
        return cls(float(np.mean(data)), scale)

    def apply(self, data):
        return (np.asarray(data, dtype=np.float64) - self.offset) / self.scale

    def invert(self, data):
        return np.asarray(data, dtype=np.float64) * self.scale + self.offset


def prepare_epochs(epochs: EpochSet, band_hz) -> np.ndarray:
    """Band-limit every epoch (if ``band_hz``) and stack to (n, channels, samples)."""
    if band_hz is None:
        return epochs.data()
    lo, hi = band_hz
    return bandpass_array(epochs.data(), epochs.fs_hz, lo, hi)


# ------------------------------------------------------------ pretraining


def _accuracy(forward, params, cfg, x, y) -> float:
    with torch.no_grad():
        _, logits = forward(params, cfg, x, training=False)
    return float(np.mean(logits.argmax(dim=1).numpy() == y))


def fit_classifier(kind: str, x: np.ndarray, y: np.ndarray, cfg: nets.NetConfig, epochs: int, lr: float,
                   batch: int, seed: int, x_val=None, y_val=None, target: float | None = None):
    """Cross-entropy SGD on one of the feature networks.

    Stops early once validation accuracy reaches ``target``. Returns the
    parameters and the last validation accuracy (``None`` without data).
    """
    init, forward = nets.FEATURE_NETS[kind]
    params = init(cfg, seed)
    n = len(x)
    acc = None
    for epoch in range(epochs):
        order = _rng(seed, PURPOSES["pretrain"], epoch).permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            if len(idx) < 2:
                continue
            _, logits = forward(params, cfg, x[idx], training=True)
            loss = nets.cross_entropy(logits, y[idx])
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"{kind} net pretraining loss is not finite")
            nets.gradient_step(params, loss, lr)
        if x_val is not None:
            acc = _accuracy(forward, params, cfg, x_val, y_val)
            if target is not None and acc >= target:
                break
    return params, acc


def pretrain_feature_nets(x: np.ndarray, y: np.ndarray, config: TrainConfig, min_accuracy: float = 0.6):
    """Train the wavelet and classification networks, then freeze them.

    A quarter of the data (stratified) is held out to measure accuracy.
    Returns ``(wavelet_params, class_params, {"wavelet": acc, "class": acc})``.
    """
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("pretraining needs at least two classes")
    rng = _rng(config.seed, PURPOSES["pretrain"])
    val = np.zeros(len(y), dtype=bool)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        val[rng.choice(idx, size=max(1, len(idx) // 4), replace=False)] = True
    out, accs = [], {}
    for k, kind in enumerate(("wavelet", "class")):
        params, acc = fit_classifier(kind, x[~val], y[~val], config.net, config.pretrain_epochs, config.pretrain_lr,
                                     config.pretrain_batch, config.seed * 1000 + k, x[val], y[val],
                                     config.pretrain_target)
        if acc < min_accuracy:
            raise PretrainingFailed(f"{kind} network reached only {acc:.1%} held-out accuracy; check the data pipeline")
        params.set_trainable(False)
        out.append(params)
        accs[kind] = acc
    return out[0], out[1], accs


# ------------------------------------------------------------ mixed loss


def mixed_loss(unet_params, x0, labels, weights, wavelet_params, class_params,
               schedule: dm.NoiseSchedule, seed, cfg: nets.NetConfig, predict_target: str = "noise",
               aux_weighting: str = "none"):
    """Weighted sum of the diffusion loss and two auxiliary classification losses.

    The auxiliary terms classify the clean-signal estimate recovered from
    the prediction, so their gradients reach the U-Net. With
    ``aux_weighting="alpha_bar"`` each item's classification term is scaled
    by its signal fraction ``alpha_bar(t)``, so near-pure-noise steps, whose
    estimates are the prediction amplified by ``1/sqrt(alpha_bar)``, barely
    contribute. Returns
    ``(total, components)`` with float components ``mse``, ``ce_tf``,
    ``ce_cls`` and the draws ``t`` and ``eps``.
    """
    x0 = nets.as_tensor(x0)
    rng = np.random.default_rng(seed)
    t = rng.integers(1, schedule.T + 1, size=x0.shape[0])
    eps = torch.as_tensor(rng.standard_normal(tuple(x0.shape)))
    x_t = dm.forward_diffuse(x0, t, eps, schedule)
    pred = nets.unet_forward(unet_params, cfg, x_t, t, labels, training=True)
    if predict_target == "noise":
        mse = torch.mean((eps - pred) ** 2)
        x0_hat = dm.x0_estimate(x_t, t, pred, schedule)
    else:
        mse = torch.mean((x0 - pred) ** 2)
        x0_hat = pred
    total = weights.w_d * mse
    item_w = schedule.alpha_bar(t) if aux_weighting == "alpha_bar" else None
    ce_tf = ce_cls = torch.zeros((), dtype=nets.DTYPE)
    if weights.w_tf > 0:
        _, logits = nets.wavelet_net_forward(wavelet_params, cfg, x0_hat, training=False)
        ce_tf = nets.cross_entropy(logits, labels, item_w)
        total = total + weights.w_tf * ce_tf
    if weights.w_c > 0:
        _, logits = nets.class_net_forward(class_params, cfg, x0_hat, training=False)
        ce_cls = nets.cross_entropy(logits, labels, item_w)
        total = total + weights.w_c * ce_cls
    comps = {"mse": float(mse.detach()), "ce_tf": float(ce_tf.detach()), "ce_cls": float(ce_cls.detach()),
             "t": t, "eps": eps.numpy()}
    return total, comps


# -------------------------------------------------------------- manifest


class RunManifest:
    """Header plus an append-only list of JSON records."""

    def __init__(self, header: dict, records: list | None = None):
        self.header = header
        self.records = list(records or [])

    def append(self, record: dict) -> None:
        self.records.append(record)

    def iterations(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "iter"]

    def agent_updates(self) -> list[dict]:
        return [r for r in self.records if r["kind"] == "agent"]

    def epoch_means(self, key: str) -> np.ndarray:
        by_epoch: dict[int, list] = {}
        for r in self.iterations():
            by_epoch.setdefault(r["epoch"], []).append(r[key])
        return np.array([np.mean(by_epoch[e]) for e in sorted(by_epoch)])

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "header", **self.header}, sort_keys=True)]
        lines += [json.dumps(r, sort_keys=True) for r in self.records]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RunManifest":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("kind") != "header":
            raise ValueError("manifest must start with a header line")
        header = dict(rows[0])
        header.pop("kind")
        return cls(header, rows[1:])

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    def __eq__(self, other) -> bool:
        return isinstance(other, RunManifest) and self.to_jsonl() == other.to_jsonl()


# --------------------------------------------------------------- trainer


class Trainer:
    """State of one training run; ``run()`` advances it epoch by epoch."""

    def __init__(self, config: TrainConfig, train_set: EpochSet, pretrained=None):
        self.config = config
        cfg = config.net
        if tuple(train_set.shape) != (cfg.channels, cfg.samples):
            raise ValueError(f"epoch shape {train_set.shape} does not match net config "
                             f"({cfg.channels}, {cfg.samples})")
        if config.batch_size > len(train_set):
            raise ValueError("batch_size exceeds the dataset size")
        self.fs_hz = train_set.fs_hz
        self.channel_names = list(train_set.channel_names)
        raw = prepare_epochs(train_set, config.bandpass_hz)
        self.standardizer = Standardizer.fit(raw)
        self.x = self.standardizer.apply(raw)
        self.y = train_set.labels()
        self.schedule = config.schedule()

        if pretrained is None:
            self.wavelet, self.classnet, self.pretrain_acc = pretrain_feature_nets(self.x, self.y, config)
        else:
            self.wavelet, self.classnet, self.pretrain_acc = pretrained
            self.wavelet.set_trainable(False)
            self.classnet.set_trainable(False)
        self.state_scaler = ag.StateScaler.fit(ag.epoch_features(self.x, self.wavelet, self.classnet, cfg))
        self.unet = nets.init_unet(cfg, seed=config.seed)
        state_dim = 2 * cfg.feature_dim
        self.agent = ag.WeightAgent(state_dim, config.agent_config(), seed=config.seed + 1)

        ref_rng = _rng(config.seed, PURPOSES["init"])
        ref_idx = self._balanced_indices(ref_rng, min(config.ref_batch, len(self.x)))
        self.reference = ag.RewardReference.from_batch(self.x[ref_idx], self.fs_hz)
        self.gen_labels = np.arange(config.gen_batch) % cfg.num_classes

        self.epoch = 0
        self.carry_state = None
        self.manifest = RunManifest(self._header())

    def _balanced_indices(self, rng, n):
        classes = np.unique(self.y)
        per = [np.flatnonzero(self.y == c) for c in classes]
        take = [rng.permutation(p)[: -(-n // len(classes))] for p in per]
        inter = [i for group in zip(*take) for i in group]
        return np.array(inter[:n])

    def _header(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "config_digest": config_digest(self.config),
            "betas": [float(b) for b in self.schedule.betas],
            "standardizer": asdict(self.standardizer),
            "pretrain_accuracy": self.pretrain_acc,
            "state_scaler": self.state_scaler.to_dict(),
            "fs_hz": self.fs_hz,
            "channel_names": self.channel_names,
        }

    def stores(self) -> dict[str, nets.ParameterStore]:
        return {"unet": self.unet, "wavelet": self.wavelet, "class": self.classnet, **self.agent.stores()}

    # generation ------------------------------------------------------
    def generate(self, labels, seed) -> np.ndarray:
        """Reverse-sample standardized epochs for ``labels``."""
        shape = (self.config.net.channels, self.config.net.samples)
        return dm.sample_batch(nets.unet_predictor(self.unet, self.config.net), labels, self.schedule, shape, seed)

    def _state(self, y) -> np.ndarray:
        return self.state_scaler.apply(ag.build_state(y, self.wavelet, self.classnet, self.config.net))

    # loop ------------------------------------------------------------
    def _iteration(self, it: int) -> dict:
        c = self.config
        e = self.epoch
        if self.carry_state is None:
            y0 = self.generate(self.gen_labels, _rng(c.seed, PURPOSES["chain"], e, it, 0))
            self.carry_state = self._state(y0)
        state = self.carry_state

        idx = _rng(c.seed, PURPOSES["batch"], e, it).choice(len(self.x), size=c.batch_size, replace=False)
        if c.agent_enabled:
            weights = self.agent.act(state, e, _rng(c.seed, PURPOSES["action"], e, it))
        else:
            weights = FixedWeights(*c.fixed_weights)
        loss, comps = mixed_loss(self.unet, self.x[idx], self.y[idx], weights, self.wavelet, self.classnet,
                                 self.schedule, _rng(c.seed, PURPOSES["noise"], e, it), c.net, c.predict_target,
                                 c.aux_weighting)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"mixed loss is not finite at epoch {e}, iteration {it}: {comps['mse']}")
        nets.gradient_step(self.unet, loss, c.lr_unet)

        y1 = self.generate(self.gen_labels, _rng(c.seed, PURPOSES["chain"], e, it, 1))
        next_state = self._state(y1)
        if not np.all(np.isfinite(y1)):
            raise NonFiniteLoss(f"generated batch is not finite at epoch {e}, iteration {it}")
        reward = ag.compute_reward(y1, self.reference, self.fs_hz)
        if c.agent_enabled:
            self.agent.observe(ag.Transition(state, weights, reward.total, next_state))
        self.carry_state = next_state
        return {
            "kind": "iter", "epoch": e, "iter": e * c.iters_per_epoch + it,
            "w_d": weights.w_d, "w_tf": weights.w_tf, "w_c": weights.w_c,
            "mse": comps["mse"], "ce_tf": comps["ce_tf"], "ce_cls": comps["ce_cls"], "loss": float(loss.detach()),
            "js_stat": reward.js_statistical, "js_info": reward.js_informational,
            "js_nonlin": reward.js_nonlinear, "spectral": reward.spectral_discrepancy, "total": reward.total,
        }

    def run_epoch(self) -> None:
        c = self.config
        for it in range(c.iters_per_epoch):
            self.manifest.append(self._iteration(it))
        if c.agent_enabled:
            upd = self.agent.update(_rng(c.seed, PURPOSES["agent"], self.epoch))
            if upd is not None:
                self.manifest.append({"kind": "agent", "epoch": self.epoch, **upd})
        self.epoch += 1

    def run(self, until_epoch: int | None = None, progress=None) -> RunManifest:
        stop = self.config.epochs if until_epoch is None else min(until_epoch, self.config.epochs)
        while self.epoch < stop:
            self.run_epoch()
            if progress is not None:
                progress(self)
        return self.manifest

    # checkpoints -----------------------------------------------------
    def save_checkpoint(self, path) -> str:
        """Write all parameter stores, the buffer, loop position and manifest; returns the digest."""
        blob = encode_checkpoint(self)
        with open(path, "wb") as fh:
            fh.write(blob)
        return blob[-32:].hex()

    @classmethod
    def from_checkpoint(cls, path, train_set: EpochSet) -> "Trainer":
        with open(path, "rb") as fh:
            blob = fh.read()
        stores, sections = decode_checkpoint(blob)
        meta = json.loads(sections["META"].decode("utf-8"))
        config = TrainConfig.from_dict(meta["config"])
        trainer = cls(config, train_set, pretrained=(stores["wavelet"], stores["class"], meta["pretrain_accuracy"]))
        for name, store in trainer.stores().items():
            if name in ("wavelet", "class"):
                continue
            store.assign(stores[name])
        buffer_entries, _ = nets.decode_entries(sections["BUFR"])
        trainer.agent.buffer = ag.ReplayBuffer.from_arrays(buffer_entries)
        rng_state = json.loads(sections["RNGS"].decode("utf-8"))
        trainer.epoch = rng_state["epoch"]
        carry = rng_state["carry_state"]
        trainer.carry_state = None if carry is None else np.array(carry, dtype=np.float64)
        trainer.manifest = RunManifest(meta["header"], meta["records"])
        return trainer


@dataclass(frozen=True)
class FixedWeights:
    """Loss weights used with the agent switched off; unlike actions they may be zero."""

    w_d: float
    w_tf: float
    w_c: float


def train(config: TrainConfig, train_set: EpochSet, progress=None) -> RunManifest:
    return Trainer(config, train_set).run(progress=progress)


# ------------------------------------------------------ checkpoint format


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


def encode_checkpoint(trainer: Trainer) -> bytes:
    """Parameter block followed by tagged, length-prefixed sections and a SHA-256 digest."""
    body = [nets.encode_entries(nets.stores_to_entries(trainer.stores())), SECTION_MAGIC]
    body.append(_section(b"BUFR", nets.encode_entries(trainer.agent.buffer.to_arrays())))
    carry = None if trainer.carry_state is None else [float(v) for v in trainer.carry_state]
    rng_state = {"seed": trainer.config.seed, "epoch": trainer.epoch, "carry_state": carry}
    body.append(_section(b"RNGS", json.dumps(rng_state).encode("utf-8")))
    meta = {"config": trainer.config.to_dict(), "pretrain_accuracy": trainer.pretrain_acc,
            "header": trainer.manifest.header, "records": trainer.manifest.records}
    body.append(_section(b"META", json.dumps(meta).encode("utf-8")))
    blob = b"".join(body)
    return blob + _section(b"DGST", hashlib.sha256(blob).digest())


def decode_checkpoint(blob: bytes):
    """Return ``(stores, sections)``; raises ``CheckpointError`` on any inconsistency."""
    entries, pos = nets.decode_entries(blob)
    stores = nets.entries_to_stores(entries)
    if pos == len(blob):
        return stores, {}
    if blob[pos:pos + len(SECTION_MAGIC)] != SECTION_MAGIC:
        raise nets.CheckpointError("unrecognized data after the parameter block")
    pos += len(SECTION_MAGIC)
    sections = {}
    while pos < len(blob):
        if pos + 12 > len(blob):
            raise nets.CheckpointError("truncated section header")
        tag = blob[pos:pos + 4].decode("ascii", "replace")
        (n,) = struct.unpack_from("<Q", blob, pos + 4)
        start = pos + 12
        if start + n > len(blob):
            raise nets.CheckpointError(f"truncated {tag} section")
        if tag == "DGST":
            if hashlib.sha256(blob[:pos]).digest() != blob[start:start + n]:
                raise nets.CheckpointError("checkpoint digest mismatch")
        sections[tag] = blob[start:start + n]
        pos = start + n
    missing = {"BUFR", "RNGS", "META", "DGST"} - set(sections)
    if missing:
        raise nets.CheckpointError(f"checkpoint lacks section(s) {sorted(missing)}")
    return stores, sections


def load_generator(path):
    """Read just what generation needs: U-Net weights, configs, schedule and data scaling."""
    with open(path, "rb") as fh:
        blob = fh.read()
    stores, sections = decode_checkpoint(blob)
    if "unet" not in stores or "META" not in sections:
        raise nets.CheckpointError("checkpoint does not contain a trained generator")
    meta = json.loads(sections["META"].decode("utf-8"))
    config = TrainConfig.from_dict(meta["config"])
    header = meta["header"]
    return {
        "unet": stores["unet"],
        "wavelet": stores.get("wavelet"),
        "class": stores.get("class"),
        "config": config,
        "schedule": dm.NoiseSchedule.from_betas(header["betas"]),
        "standardizer": Standardizer(**header["standardizer"]),
        "fs_hz": header["fs_hz"],
        "channel_names": header["channel_names"],
    }


# ------------------------------------------------------- gradient checks

TOY_NET = nets.NetConfig(channels=2, samples=32, base_width=4, depth=2, embed_dim=8, feature_dim=4,
                         hidden=8, wavelet_freqs=4)
CHECKED = ("unet", "wavelet", "class", "actor", "critic", "mixed_loss")


def _check_problems(cfg: nets.NetConfig, seed: int, batch: int = 4):
    """(loss function, parameter store) for every checked network."""
    rng = _rng(seed, PURPOSES["init"])
    x = rng.standard_normal((batch, cfg.channels, cfg.samples))
    labels = np.arange(batch) % cfg.num_classes
    t = rng.integers(1, 11, size=batch)
    unet = nets.init_unet(cfg, seed, zero_head=False)
    wavelet = nets.init_wavelet_net(cfg, seed + 1)
    classnet = nets.init_class_net(cfg, seed + 2)
    state_dim = 2 * cfg.feature_dim
    actor = ag.init_actor(state_dim, cfg.hidden, seed + 3)
    critic = ag.init_critic(state_dim, cfg.hidden, seed + 4)
    proj = torch.as_tensor(rng.standard_normal((batch, cfg.channels, cfg.samples)))
    states = rng.standard_normal((batch, state_dim))
    actions = rng.uniform(0.01, 1.0, (batch, ag.ACTION_DIM))
    targets = rng.standard_normal(batch)
    act_proj = torch.as_tensor(rng.standard_normal((batch, ag.ACTION_DIM)))
    schedule = dm.make_linear_schedule(10, 1e-3, 0.2)

    frozen_w, frozen_c = wavelet.copy(), classnet.copy()
    frozen_w.set_trainable(False)
    frozen_c.set_trainable(False)
    mixed_unet = unet.copy()
    weights = ag.LossWeights(0.6, 0.3, 0.4)
    noise_seed = int(rng.integers(2 ** 31))

    return {
        "unet": (lambda p: (nets.unet_forward(p, cfg, x, t, labels, training=True) * proj).mean(), unet),
        "wavelet": (lambda p: nets.cross_entropy(nets.wavelet_net_forward(p, cfg, x, training=True)[1], labels),
                    wavelet),
        "class": (lambda p: nets.cross_entropy(nets.class_net_forward(p, cfg, x, training=True)[1], labels),
                  classnet),
        "actor": (lambda p: (ag.actor_forward(p, states) * act_proj).mean(), actor),
        "critic": (lambda p: ag.critic_loss(p, states, actions, targets), critic),
        "mixed_loss": (lambda p: mixed_loss(p, x, labels, weights, frozen_w, frozen_c, schedule, noise_seed,
                                            cfg)[0], mixed_unet),
    }


def gradient_checks(cfg: nets.NetConfig = TOY_NET, seed: int = 0, fraction: float = 0.05,
                    inject: str | None = None) -> dict[str, dict[str, float]]:
    """Finite-difference check of every trainable network and of the mixed loss.

    Returns ``{network: {entry: worst relative error}}``. ``inject`` names a
    network whose analytic gradient gets one checked coordinate doubled.
    """
    if inject is not None and inject not in CHECKED:
        raise ValueError(f"unknown network {inject!r}; choose from {', '.join(CHECKED)}")
    out = {}
    for name, (f, params) in _check_problems(cfg, seed).items():
        analytic = None
        if name == inject:
            params.zero_grad()
            f(params).backward()
            entry, coords = next(iter(nets.sample_coordinates(params, fraction, seed).items()))
            g = params.grad(entry).detach().numpy().ravel().copy()
            params.zero_grad()
            i = coords[0]
            g[i] = 2.0 * g[i] if g[i] != 0 else 1.0
            analytic = {entry: g}
        out[name] = nets.grad_check_report(f, params, fraction=fraction, seed=seed, analytic=analytic)
    return out

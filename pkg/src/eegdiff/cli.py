"""Command-line entry point: ``eegdiff <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 numeric abort,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from eegdiff import diffusion as dm
from eegdiff import evaluation as ev
from eegdiff import nets
from eegdiff import trainer as tr
from eegdiff.agent import write_reward_trace
from eegdiff.signal_core import EegEpoch, EpochSet, load_dataset, save_dataset, synth_dataset

log = logging.getLogger("eegdiff")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3

CONFIG_KEYS = {
    "data_dir": str,
    "out_dir": str,
    "checkpoint": str,
    "checkpoint_every": int,
    "train": dict,
    "generate": dict,
    "evaluate": dict,
}
GENERATE_KEYS = {"class": int, "count": int}
EVALUATE_KEYS = {"synth_count": int, "folds": int, "fid_count": int, "classifier_epochs": int,
                 "classifier_lr": float, "test_fraction": float}
EVALUATE_DEFAULTS = {"synth_count": 100, "folds": 10, "fid_count": 200, "classifier_epochs": 30,
                     "classifier_lr": 0.1, "test_fraction": 0.5}


class UsageError(Exception):
    pass


def _check_keys(section: dict, allowed: dict, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise UsageError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    for key, typ in allowed.items():
        if key in section and section[key] is not None:
            ok = isinstance(section[key], (int, float)) if typ is float else isinstance(section[key], typ)
            if not ok or (typ is int and isinstance(section[key], bool)):
                raise UsageError(f"{where}.{key} must be of type {typ.__name__}")


def load_config(path) -> dict:
    """Read and validate a JSON run configuration (unknown keys are errors)."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    _check_keys(cfg, CONFIG_KEYS, "config")
    _check_keys(cfg.get("generate", {}), GENERATE_KEYS, "generate")
    _check_keys(cfg.get("evaluate", {}), EVALUATE_KEYS, "evaluate")
    try:
        tr.TrainConfig.from_dict(cfg.get("train", {}))
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from exc
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid train section: {exc}") from exc
    return cfg


def _train_config(cfg: dict, seed) -> tr.TrainConfig:
    section = dict(cfg.get("train", {}))
    if seed is not None:
        section["seed"] = seed
    return tr.TrainConfig.from_dict(section)


def _out_dir(args, cfg) -> str:
    out = args.out or cfg.get("out_dir")
    if not out:
        raise UsageError("an output directory is required (--out or out_dir in the config)")
    os.makedirs(out, exist_ok=True)
    return out


def _require_dir(path, what) -> str:
    if not path or not os.path.isdir(path):
        raise UsageError(f"{what} directory {path!r} does not exist")
    return path


def _require_file(path, what) -> str:
    if not path or not os.path.isfile(path):
        raise UsageError(f"{what} {path!r} does not exist")
    return path


# ------------------------------------------------------------- commands


def cmd_synth_data(args, cfg) -> int:
    out = _out_dir(args, cfg)
    seed = 0 if args.seed is None else args.seed
    ds = synth_dataset(args.per_class, channels=args.channels, samples=args.samples, fs_hz=args.fs, seed=seed)
    save_dataset(ds, out)
    log.info("wrote %d epochs to %s", len(ds), out)
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    out = _out_dir(args, cfg)
    data_dir = _require_dir(args.data or cfg.get("data_dir"), "data")
    train_set = load_dataset(data_dir)
    every = cfg.get("checkpoint_every")

    if args.resume:
        trainer = tr.Trainer.from_checkpoint(_require_file(args.resume, "checkpoint"), train_set)
        log.info("resumed at epoch %d", trainer.epoch)
    else:
        trainer = tr.Trainer(_train_config(cfg, args.seed), train_set)

    def progress(t):
        if every and t.epoch % every == 0 and t.epoch < t.config.epochs:
            t.save_checkpoint(os.path.join(out, f"checkpoint_epoch{t.epoch}.eegd"))
        if t.epoch % 10 == 0 or t.epoch == t.config.epochs:
            means = t.manifest.epoch_means("mse")
            log.info("epoch %d/%d  diffusion loss %.4f", t.epoch, t.config.epochs, means[-1] if len(means) else float("nan"))

    try:
        trainer.run(progress=progress)
    except tr.NonFiniteLoss as exc:
        log.error("numeric abort: %s", exc)
        trainer.manifest.write(os.path.join(out, "manifest.jsonl"))
        return EXIT_NUMERIC
    trainer.manifest.write(os.path.join(out, "manifest.jsonl"))
    write_reward_trace(os.path.join(out, "reward_trace.jsonl"), trainer.manifest.iterations())
    digest = trainer.save_checkpoint(os.path.join(out, "checkpoint.eegd"))
    log.info("checkpoint digest %s", digest)
    return EXIT_OK


def generate_epochs(gen: dict, label: int, count: int, seed: int) -> np.ndarray:
    """Sample ``count`` epochs of one class, returned in the original signal units."""
    cfg = gen["config"].net
    if not 0 <= label < cfg.num_classes:
        raise UsageError(f"class must lie in [0, {cfg.num_classes})")
    predictor = nets.unet_predictor(gen["unet"], cfg)
    y = dm.sample_batch(predictor, np.full(count, label), gen["schedule"], (cfg.channels, cfg.samples), seed)
    return gen["standardizer"].invert(y)


def cmd_generate(args, cfg) -> int:
    out = _out_dir(args, cfg)
    gen = tr.load_generator(_require_file(args.checkpoint or cfg.get("checkpoint"), "checkpoint"))
    section = cfg.get("generate", {})
    label = args.label if args.label is not None else section.get("class", 0)
    count = args.count if args.count is not None else section.get("count", 1)
    if count < 1:
        raise UsageError("count must be >= 1")
    seed = 0 if args.seed is None else args.seed
    data = generate_epochs(gen, label, count, seed)
    epochs = [EegEpoch(d, gen["fs_hz"], label, gen["channel_names"]) for d in data]
    save_dataset(epochs, out)
    log.info("wrote %d generated epochs of class %d to %s", count, label, out)
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    out = _out_dir(args, cfg)
    gen = tr.load_generator(_require_file(args.checkpoint or cfg.get("checkpoint"), "checkpoint"))
    real = load_dataset(_require_dir(args.data or cfg.get("data_dir"), "data"))
    opts = {**EVALUATE_DEFAULTS, **cfg.get("evaluate", {})}
    if args.synth_count is not None:
        opts["synth_count"] = args.synth_count
    seed = 0 if args.seed is None else args.seed
    report = evaluate(gen, real, out, seed=seed, **opts)
    log.info("FID generated %.4f, real split %.4f, noise %.4f; augmentation p=%.3g",
             report["fid"]["generated"], report["fid"]["real_split"], report["fid"]["noise"], report["p_value"])
    return EXIT_OK


def evaluate(gen: dict, real: EpochSet, out: str, seed: int = 0, synth_count: int = 100, folds: int = 10,
             fid_count: int = 200, classifier_epochs: int = 30, classifier_lr: float = 0.1,
             test_fraction: float = 0.5) -> dict:
    """Run every analysis on a trained generator and a set of real epochs.

    The real set is split (stratified) into a training part for the
    augmentation experiment and a test part used by every comparison.
    """
    config = gen["config"]
    cfg = config.net
    std = gen["standardizer"]
    fs = gen["fs_hz"]
    names = gen["channel_names"]
    comment = f"config_digest={tr.config_digest(config)}"

    x = std.apply(tr.prepare_epochs(real, config.bandpass_hz))
    y = real.labels()
    n_test_folds = max(2, int(round(1 / test_fraction)))
    test_idx = ev.stratified_folds(y, n_test_folds, seed)[0]
    train_idx = np.setdiff1d(np.arange(len(y)), test_idx)
    x_test, y_test = x[test_idx], y[test_idx]
    if len(x_test) < cfg.feature_dim + 1 or len(x_test) < 4:
        raise UsageError(f"need at least {cfg.feature_dim + 1} test epochs for FID, got {len(x_test)}")

    per_class = max(fid_count, synth_count) // cfg.num_classes + 1
    labels = np.repeat(np.arange(cfg.num_classes), per_class)
    predictor = nets.unet_predictor(gen["unet"], cfg)
    gen_x = dm.sample_batch(predictor, labels, gen["schedule"], (cfg.channels, cfg.samples), seed)

    class_params = gen["class"]
    f_test = ev.compressed_features(class_params, cfg, x_test)
    halves = ev.stratified_folds(y_test, 2, seed + 1)
    noise = np.random.default_rng(seed + 2).standard_normal(x_test.shape)
    fid = {
        "generated": ev.fid(f_test, ev.compressed_features(class_params, cfg, gen_x)).value,
        "real_split": ev.fid(ev.compressed_features(class_params, cfg, x_test[halves[0]]),
                             ev.compressed_features(class_params, cfg, x_test[halves[1]])).value,
        "noise": ev.fid(f_test, ev.compressed_features(class_params, cfg, noise)).value,
    }
    with open(os.path.join(out, "fid.json"), "w", encoding="utf-8") as fh:
        json.dump(fid, fh, indent=2, sort_keys=True)
        fh.write("\n")

    rows = []
    for source, xs, ys in (("real", x_test, y_test), ("generated", gen_x, labels)):
        for c in range(cfg.num_classes):
            m = ev.energy_map(std.invert(xs[ys == c]), fs)
            rows += [[source, c, name, repr(float(v))] for name, v in zip(names, m)]
    ev._write_rows(os.path.join(out, "energy_map.csv"), ["source", "class", "channel", "alpha_variance"], rows,
                   comment)

    channels = [c for c in ("C3", "C4") if c in names] or names[:2]
    ev.spectra_report(std.invert(x_test), y_test, std.invert(gen_x), labels, fs, names, out, channels, comment)
    ev.tf_report(std.invert(x_test), y_test, fs, names, out, channels, prefix="tf_real", comment=comment)
    ev.tf_report(std.invert(gen_x), labels, fs, names, out, channels, prefix="tf_generated", comment=comment)

    result = ev.augmentation_experiment(x[train_idx], y[train_idx], x_test, y_test, gen_x, labels, synth_count,
                                        cfg, folds=folds, seed=seed, epochs=classifier_epochs, lr=classifier_lr)
    result.write(os.path.join(out, "metrics.json"), os.path.join(out, "folds.jsonl"))
    return {"fid": fid, "p_value": result.p_value, **result.to_json()}


def cmd_gradcheck(args, cfg) -> int:
    net = tr.TOY_NET
    if cfg.get("train", {}).get("net"):
        net = tr.TrainConfig.from_dict({"net": cfg["train"]["net"]}).net
    seed = 0 if args.seed is None else args.seed
    report = tr.gradient_checks(net, seed=seed, inject=args.inject_fault)
    failed = []
    for name, entries in report.items():
        worst = max(entries.values())
        status = "ok" if worst < args.tolerance else "FAIL"
        print(f"{name:<12} max relative error {worst:.3e}  {status}")
        if worst >= args.tolerance:
            failed += [f"{name}/{entry}" for entry, err in entries.items() if err >= args.tolerance]
    if failed:
        print("gradient check failed for: " + ", ".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="eegdiff", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", parents=[common], help="write a synthetic two-class dataset")
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--fs", type=float, default=250.0)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", parents=[common], help="pretrain feature nets and train the generator")
    p.add_argument("--data", help="dataset directory (overrides data_dir)")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", parents=[common], help="sample epochs from a checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--class", dest="label", type=int)
    p.add_argument("--count", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", parents=[common], help="FID, spectra, scalograms and augmentation metrics")
    p.add_argument("--checkpoint")
    p.add_argument("--data", help="real dataset directory")
    p.add_argument("--synth-count", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient verification")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--inject-fault", choices=tr.CHECKED, help="corrupt one gradient coordinate of a network")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    for name, default in (("config", None), ("seed", None), ("out", None), ("quiet", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s",
                        stream=sys.stderr, force=True)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except nets.CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (tr.NonFiniteLoss, FloatingPointError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except tr.PretrainingFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

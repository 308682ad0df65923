"""Command-line entry point: ``forged-eeg <command> [options]``.

Settings come from the defaults, then ``--config FILE``, then ``--set
key=value`` pairs, then dedicated flags. Every output file records the base
seed in a ``# seed=`` line (or a ``.meta`` sidecar for binary files).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import (
    AppConfig,
    apply_overrides,
    load_config,
    load_entry,
    parse_policy,
    read_manifest,
    write_manifest,
)
from .core import DatasetManifest, ManifestEntry, epoch_length
from .errors import BadFlag, ForgedEEGError, UnknownCommand
from .forge import export_ppm, normalize_stack, resize_bilinear, write_forged_dataset
from .ingest import read_bdf, synth_recording, synthetic_cohort, write_raw
from .losocv import forge_recording, losocv_on_images, write_report
from .nn.model import build_paper_cnn, save_checkpoint
from .nn.train import evaluate, train
from .preprocess import clean_recording
from .tfr import spwvd

log = logging.getLogger("forged_eeg")

COMMANDS = ("synth", "ingest", "preprocess", "forge", "train", "losocv", "tfr-plot")
MANIFEST_NAME = "manifest.txt"
THREADS_ENV = "FORGED_EEG_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        token = ""
        if "unrecognized arguments:" in message:
            token = message.split("unrecognized arguments:", 1)[1].split()[0]
        elif "argument " in message:
            token = message.split("argument ", 1)[1].split(":", 1)[0]
        raise BadFlag(token, message)


def _flag(p, name, key, type_=str, help_=None):
    p.add_argument(name, dest=key, type=type_, default=argparse.SUPPRESS, help=help_ or f"sets {key}")


def _switch(p, name, key, value, help_):
    p.add_argument(name, dest=key, action="store_const", const=str(value), default=argparse.SUPPRESS, help=help_)


def _common(p):
    p.add_argument("--config", dest="_config", default=None, help="key = value config file")
    p.add_argument("--set", dest="_set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. forge.out_height=64")
    _flag(p, "--threads", "threads", int, f"cap BLAS/worker threads (fallback: ${THREADS_ENV})")
    _flag(p, "--seed", "losocv.base_seed", int, "base seed for all randomness")
    _flag(p, "--out", "paths.out_dir", str, "output directory (tfr-plot, train: output file)")
    p.add_argument("-v", "--verbose", dest="_verbose", action="store_true", help="log progress to stderr")


def _data(p):
    _flag(p, "--data-dir", "paths.data_dir", str, f"directory holding {MANIFEST_NAME}")
    p.add_argument("--manifest", dest="_manifest", default=None, help=f"manifest file (default DATA_DIR/{MANIFEST_NAME})")


def _forge_flags(p):
    _flag(p, "--epoch-seconds", "forge.epoch_seconds", float, "epoch length; 0 keeps the manifest value")
    _flag(p, "--n-freq-bins", "forge.n_freq_bins", int)
    _flag(p, "--time-window-len", "forge.time_window_len", int)
    _flag(p, "--lag-window-len", "forge.lag_window_len", int)
    _flag(p, "--out-height", "forge.out_height", int)
    _flag(p, "--out-width", "forge.out_width", int)
    _flag(p, "--normalization", "forge.normalization", str, "joint or per_plane")


def _train_flags(p):
    _flag(p, "--lr", "train.lr", float)
    _flag(p, "--epochs", "train.epochs", int)
    _flag(p, "--batch-size", "train.batch_size", int)
    _flag(p, "--l2", "train.l2_coeff", float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="forged-eeg", description="Forged-channel EEG imaging and CNN classification.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic two-class cohort and its manifest")
    _common(p)
    _flag(p, "--n-per-class", "synth.n_per_class", int)
    _flag(p, "--duration", "synth.duration_s", float, "seconds per recording")
    _flag(p, "--channels", "synth.n_channels", int)
    _flag(p, "--rate", "synth.sample_rate_hz", float)
    _flag(p, "--noise", "synth.noise_sigma", float)

    p = sub.add_parser("ingest", help="convert the BDF recordings of a manifest to the raw format")
    _common(p)
    _data(p)

    p = sub.add_parser("preprocess", help="band-pass and optional ICA cleaning into a new directory")
    _common(p)
    _data(p)
    _flag(p, "--low-hz", "preprocess.low_hz", float)
    _flag(p, "--high-hz", "preprocess.high_hz", float)
    _switch(p, "--no-bandpass", "preprocess.bandpass", False, "skip the band-pass filter")
    _switch(p, "--ica", "preprocess.ica", True, "run FastICA component rejection")
    _flag(p, "--policy", "preprocess.policy", str, "keep_all | kurtosis:<t> | list:<i>,<j>")

    p = sub.add_parser("forge", help="materialize forged images and their index")
    _common(p)
    _data(p)
    _forge_flags(p)

    p = sub.add_parser("train", help="fit one network and save a checkpoint")
    _common(p)
    _data(p)
    _forge_flags(p)
    _train_flags(p)
    p.add_argument("--holdout", dest="_holdout", action="append", default=[], metavar="SUBJECT",
                   help="subject to exclude from training and score afterwards (repeatable)")

    p = sub.add_parser("losocv", help="leave-one-subject-out cross-validation report")
    _common(p)
    _data(p)
    _forge_flags(p)
    _train_flags(p)
    _flag(p, "--n-jobs", "losocv.n_jobs", int, "folds run in parallel")

    p = sub.add_parser("tfr-plot", help="render the SPWVD of one signal window as a PPM")
    _common(p)
    _forge_flags(p)
    p.add_argument("_input", metavar="input", help="raw tensor or .bdf file")
    p.add_argument("--channel", dest="_channel", type=int, default=-1,
                   help="channel index; -1 averages all channels (default)")
    p.add_argument("--start", dest="_start", type=float, default=0.0, help="window start in seconds")
    return parser


@dataclass
class ParsedArgs:
    command: str
    config: AppConfig
    options: dict = field(default_factory=dict)


def parse_args(argv) -> ParsedArgs:
    """Resolve ``argv`` into a command, its effective config, and command-only options."""
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        build_parser().print_help()
        raise SystemExit(0)
    if argv[0].startswith("-"):
        raise BadFlag(argv[0], "expected a command before any flag")
    if argv[0] not in COMMANDS:
        raise UnknownCommand(f"unknown command {argv[0]!r}; choose from {', '.join(COMMANDS)}")
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    cfg = load_config(ns.pop("_config")) if ns.get("_config") else AppConfig()
    ns.pop("_config", None)
    pairs = {}
    for item in ns.pop("_set"):
        if "=" not in item:
            raise BadFlag(item, "--set expects KEY=VALUE")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value
    options = {k[1:]: v for k, v in ns.items() if k.startswith("_")}
    pairs.update({k: str(v) for k, v in ns.items() if not k.startswith("_")})
    try:
        apply_overrides(cfg, pairs)
    except (KeyError, ValueError) as exc:
        raise BadFlag(next(iter(pairs)), str(exc)) from exc
    return ParsedArgs(command, cfg, options)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _require(path: Path, kind: str = "path") -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{kind} not found: {path}")
    return path


def _manifest_path(args: ParsedArgs) -> Path:
    if args.options.get("manifest"):
        return _require(Path(args.options["manifest"]), "manifest")
    data_dir = _require(Path(args.config.paths.data_dir), "data directory")
    return _require(data_dir / MANIFEST_NAME, "manifest")


def _load_manifest(args: ParsedArgs) -> DatasetManifest:
    m = read_manifest(_manifest_path(args))
    for e in m.entries:
        _require(Path(e.path), f"recording of {e.subject_id}")
    if args.config.forge.epoch_seconds > 0:
        m = DatasetManifest(m.entries, args.config.forge.epoch_seconds)
    return m


def _output_dir(args: ParsedArgs, inputs: DatasetManifest | None = None) -> Path:
    out = Path(args.config.paths.out_dir)
    if inputs is not None:
        sources = {Path(e.path).resolve().parent for e in inputs.entries}
        if out.resolve() in sources:
            raise ValueError(f"output directory {out} holds input recordings; choose another --out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(cfg: AppConfig) -> int:
    return cfg.losocv.base_seed


def cmd_synth(args: ParsedArgs) -> int:
    cfg, s = args.config, args.config.synth
    out = _output_dir(args)
    cohort = synthetic_cohort(s.n_per_class, s.duration_s, s.n_channels, s.sample_rate_hz, _seed(cfg),
                              s.amplitude, s.bandwidth_hz, s.noise_sigma)
    entries = []
    for sid, label, spec in cohort:
        path = out / f"{sid}.frg"
        write_raw(synth_recording(spec, sid, label), path)
        entries.append(ManifestEntry(sid, label, path))
    write_manifest(DatasetManifest(entries, 2.0), out / MANIFEST_NAME, seed=_seed(cfg))
    print(f"wrote {len(entries)} recordings and {out / MANIFEST_NAME}")
    return 0


def _with_context(e: ManifestEntry, fn):
    try:
        return fn(e)
    except ForgedEEGError as exc:
        raise ValueError(f"{e.subject_id} ({e.path}): {exc}") from exc


def _convert(args: ParsedArgs, transform) -> int:
    m = _load_manifest(args)
    out = _output_dir(args, m)
    entries = []
    for e in m.entries:
        rec = _with_context(e, transform)
        path = out / f"{e.subject_id}.frg"
        write_raw(rec, path)
        entries.append(ManifestEntry(e.subject_id, e.label, path))
        log.info("wrote %s", path)
    write_manifest(DatasetManifest(entries, m.epoch_seconds), out / MANIFEST_NAME, seed=_seed(args.config))
    print(f"wrote {len(entries)} recordings and {out / MANIFEST_NAME}")
    return 0


def cmd_ingest(args: ParsedArgs) -> int:
    return _convert(args, lambda e: read_bdf(e.path, e.subject_id, e.label))


def cmd_preprocess(args: ParsedArgs) -> int:
    p = args.config.preprocess
    band = (p.low_hz, p.high_hz) if p.bandpass else None
    policy = parse_policy(p.policy)

    def clean(e):
        return clean_recording(load_entry(e), band, p.ica, policy, seed=_seed(args.config))

    return _convert(args, clean)


def _forge_all(args: ParsedArgs, m: DatasetManifest):
    cfg = args.config.forge.to_forge_config()
    images = []
    for e in m.entries:
        images += _with_context(e, lambda entry: forge_recording(load_entry(entry), m.epoch_seconds, cfg))
        log.info("forged %s", e.subject_id)
    return images


def cmd_forge(args: ParsedArgs) -> int:
    m = _load_manifest(args)
    out = _output_dir(args, m)
    index = write_forged_dataset(_forge_all(args, m), out, seed=_seed(args.config))
    print(f"wrote {index}")
    return 0


def _stack(images):
    x = np.stack([im.planes for im in images])
    y = np.array([int(im.label) for im in images])
    return x, y


def cmd_train(args: ParsedArgs) -> int:
    m = _load_manifest(args)
    holdout = set(args.options.get("holdout") or [])
    unknown = holdout - set(m.subject_ids)
    if unknown:
        raise ValueError(f"holdout subjects not in manifest: {sorted(unknown)}")
    out = _output_dir(args, m)
    images = _forge_all(args, m)
    train_imgs = [im for im in images if im.subject_id not in holdout]
    test_imgs = [im for im in images if im.subject_id in holdout]
    x, y = _stack(train_imgs)
    seed = _seed(args.config)
    model = build_paper_cnn(seed, x.shape[1:])
    _, history = train(model, x, y, args.config.train.to_train_config(seed))
    ckpt = out / "model.ckpt"
    save_checkpoint(model, ckpt)
    (out / "model.ckpt.meta").write_text(f"# seed={seed}\n")
    lines = [f"# seed={seed}", "epoch,loss,accuracy"]
    lines += [f"{i},{loss!r},{acc!r}" for i, (loss, acc) in enumerate(zip(history.loss, history.accuracy), 1)]
    (out / "history.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {ckpt}; final training loss {history.loss[-1]:.4f}, accuracy {history.accuracy[-1]:.4f}")
    if test_imgs:
        loss, acc = evaluate(model, *_stack(test_imgs))
        print(f"holdout loss {loss:.4f}, accuracy {acc:.4f}")
    return 0


def cmd_losocv(args: ParsedArgs) -> int:
    m = _load_manifest(args)
    out = _output_dir(args, m)
    images = _forge_all(args, m)
    cfg = args.config
    n_jobs = cfg.losocv.n_jobs
    if cfg.threads > 0:
        n_jobs = min(n_jobs, cfg.threads)
    report = losocv_on_images(m, images, cfg.train.to_train_config(_seed(cfg)), _seed(cfg), n_jobs)
    text = write_report(report, out / "report.csv", seed=_seed(cfg))
    print(text, end="")
    print(f"wrote {out / 'report.csv'}")
    return 0


def cmd_tfr_plot(args: ParsedArgs) -> int:
    path = _require(Path(args.options["input"]), "input")
    rec = load_entry(ManifestEntry(path.stem, 0, path))
    cfg = args.config.forge
    seconds = cfg.epoch_seconds or 2.0
    n = epoch_length(seconds, rec.sample_rate_hz)
    start = int(round(args.options["start"] * rec.sample_rate_hz))
    if start < 0 or start + n > rec.n_samples:
        raise ValueError(f"window [{start}, {start + n}) lies outside the {rec.n_samples}-sample recording")
    window = rec.data[:, start:start + n].astype(np.float64)
    ch = args.options["channel"]
    if ch >= rec.n_channels:
        raise ValueError(f"channel {ch} out of range for {rec.n_channels} channels")
    signal = window.mean(axis=0) if ch < 0 else window[ch]
    tfr = spwvd(signal, cfg.to_forge_config().spwvd, rec.sample_rate_hz)
    plane = resize_bilinear(tfr.values, cfg.out_height, cfg.out_width)
    out = Path(args.config.paths.out_dir)
    if out.suffix.lower() != ".ppm":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{path.stem}_tfr.ppm"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    export_ppm(normalize_stack(plane, plane, plane, "joint"), out)
    Path(str(out) + ".meta").write_text(f"# seed={_seed(args.config)}\n")
    print(f"wrote {out}")
    return 0


HANDLERS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "forge": cmd_forge,
    "train": cmd_train,
    "losocv": cmd_losocv,
    "tfr-plot": cmd_tfr_plot,
}


def thread_cap(cfg: AppConfig) -> int | None:
    if cfg.threads > 0:
        return cfg.threads
    env = os.environ.get(THREADS_ENV, "").strip()
    return int(env) if env else None


def run_command(args: ParsedArgs) -> int:
    cap = thread_cap(args.config)
    if cap is not None and args.config.threads <= 0:
        args.config.threads = cap
    with threadpool_limits(limits=cap):
        return HANDLERS[args.command](args)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except (UnknownCommand, BadFlag) as exc:
        print(f"forged-eeg: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.options.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return run_command(args)
    except (ForgedEEGError, OSError, ValueError) as exc:
        print(f"forged-eeg {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

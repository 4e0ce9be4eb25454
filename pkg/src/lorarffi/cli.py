"""Command-line interface: generate, train, eval, cfo-report.

Experiment configuration lives in a YAML document; see ``demos/config.yaml``
for a worked example. Dataset and checkpoint files are the versioned binary
containers documented in :mod:`lorarffi.dataset` and
:mod:`lorarffi.checkpoint`.
"""

import argparse
import os
import sys

import numpy as np
import yaml

from .classify import DEFAULT_LAMBDA_HZ, TrainConfig
from .dataset import DatasetReader, generate_dataset
from .devices import CaptureSchedule, DeviceProfile, sample_profiles
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ConfigurationError, DatasetError, LoraRffiError
from .phy import LoRaParams
from .pipeline import cfo_report_rows, evaluate, test_selection, train_on_dataset

__all__ = ["main", "load_config"]


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"config {path} must be a mapping at the top level")
    return cfg


def params_from_config(cfg: dict) -> LoRaParams:
    section = cfg.get("params")
    if not isinstance(section, dict):
        raise ConfigurationError("config is missing the 'params' mapping")
    try:
        return LoRaParams(**{k: v for k, v in section.items()})
    except TypeError as exc:
        raise ConfigurationError(f"bad 'params' section: {exc}") from exc


def profiles_from_config(cfg: dict, params: LoRaParams, seed: int) -> list:
    section = cfg.get("devices")
    if isinstance(section, dict) and "count" in section:
        return sample_profiles(
            int(section["count"]),
            params,
            seed=int(section.get("seed", seed)),
            cfo_day_sigma=float(section.get("cfo_day_sigma", 100.0)),
            cfo_jitter_sigma=float(section.get("cfo_jitter_sigma", 10.0)),
        )
    if isinstance(section, list):
        try:
            return [DeviceProfile(**entry) for entry in section]
        except TypeError as exc:
            raise ConfigurationError(f"bad device profile entry: {exc}") from exc
    raise ConfigurationError(
        "config 'devices' must be either {'count': N} or a list of profile mappings"
    )


def schedule_from_config(cfg: dict) -> CaptureSchedule:
    section = cfg.get("schedule", {})
    if not isinstance(section, dict):
        raise ConfigurationError("config 'schedule' must be a mapping")
    try:
        return CaptureSchedule(**section)
    except TypeError as exc:
        raise ConfigurationError(f"bad 'schedule' section: {exc}") from exc


def train_config_from(cfg: dict, seed: int) -> TrainConfig:
    section = dict(cfg.get("training", {}))
    for key in ("session", "train_count", "lambda_hz", "window_len", "hop", "kernel_width"):
        section.pop(key, None)
    try:
        return TrainConfig(seed=seed, **section)
    except TypeError as exc:
        raise ConfigurationError(f"bad 'training' section: {exc}") from exc


def _refuse_existing(path: str, force: bool) -> None:
    if os.path.exists(path) and not force:
        raise ConfigurationError(f"{path} exists; pass --force to overwrite")


def _cmd_generate(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    params = params_from_config(cfg)
    profiles = profiles_from_config(cfg, params, seed)
    schedule = schedule_from_config(cfg)
    _refuse_existing(args.out, args.force)
    generate_dataset(params, profiles, schedule, seed, args.out)
    size = os.path.getsize(args.out)
    n_records = len(profiles) * len(schedule.sessions) * schedule.packets_per_session
    print(
        f"wrote {args.out}: {len(profiles)} devices, {len(schedule.sessions)} session(s), "
        f"{n_records} packets, {size} bytes"
    )
    return 0


def _cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    training = cfg.get("training", {})
    _refuse_existing(args.out, args.force)
    with DatasetReader(args.dataset) as reader:
        tc = train_config_from(cfg, seed)
        session = training.get("session")
        train_count = training.get("train_count")
        lambda_hz = float(training.get("lambda_hz", DEFAULT_LAMBDA_HZ))
        window_len = int(training.get("window_len", 256))
        hop = int(training.get("hop", 128))
        kernel_width = int(training.get("kernel_width", 128))
        result, indices = train_on_dataset(
            reader,
            args.representation,
            args.compensate,
            tc,
            session=session,
            train_count=train_count,
            lambda_hz=lambda_hz,
            window_len=window_len,
            hop=hop,
            kernel_width=kernel_width,
            verbose=args.verbose,
        )
        session = session if session is not None else reader.schedule.sessions[0]
        extra = {
            "train_session": int(session),
            "train_count": len(indices) // len(reader.device_ids()),
            "train_selection": f"session {session}, first "
            f"{len(indices) // len(reader.device_ids())} packets per device",
            "seed": seed,
            "window_len": window_len,
            "hop": hop,
        }
        save_checkpoint(
            args.out,
            result.model,
            result.cfo_database,
            args.representation,
            args.compensate,
            reader.params,
            extra=extra,
        )
    final_val = result.val_accuracy_curve[-1] if result.val_accuracy_curve else float("nan")
    print(
        f"wrote {args.out}: representation={args.representation} "
        f"compensated={args.compensate} classes={result.class_ids} "
        f"validation accuracy={final_val:.4f}"
    )
    return 0


def _cmd_eval(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    model, db, header = load_checkpoint(args.checkpoint)
    if args.compensate is not None and args.compensate != header["compensated"]:
        raise ConfigurationError(
            f"checkpoint was trained with compensated={header['compensated']}; "
            "refusing to evaluate in the opposite mode"
        )
    with DatasetReader(args.dataset) as reader:
        eval_cfg = cfg.get("eval", {})
        train_session = int(header["extra"].get("train_session", reader.schedule.sessions[0]))
        train_count = int(header["extra"].get("train_count", 0))
        session = int(eval_cfg.get("session", args.session if args.session is not None else train_session))
        start = eval_cfg.get("start", args.start)
        if start is None:
            start = train_count if session == train_session else 0
        count = eval_cfg.get("count", args.count)
        if session == train_session and start < train_count and not args.allow_overlap:
            raise DatasetError(
                f"test selection (session {session}, start {start}) overlaps the training "
                f"selection (first {train_count}); pass --allow-overlap to force"
            )
        indices = test_selection(reader, session, int(start), count)
        report = evaluate(
            model,
            db,
            header,
            reader,
            indices,
            classifier=args.classifier,
            lambda_hz=args.lambda_hz,
        )
        report.test_selection = f"session {session}, packets {start}..{start + (count or 0) or ''}"
    if args.out:
        _refuse_existing(args.out + ".txt", args.force)
        with open(args.out + ".txt", "w") as fh:
            fh.write(report.to_text())
        with open(args.out + ".csv", "w") as fh:
            fh.write(report.to_csv())
        print(f"wrote {args.out}.txt and {args.out}.csv")
    print(f"overall accuracy: {report.accuracy:.4f}")
    return 0


def _cmd_cfo_report(args) -> int:
    with DatasetReader(args.dataset) as reader:
        rows = cfo_report_rows(reader)
    lines = ["device,session,elapsed,true_cfo,coarse,fine,total,error"]
    for r in rows:
        lines.append(
            f"{r['device']},{r['session']},{r['elapsed']:.6f},{r['true_cfo']:.3f},"
            f"{r['coarse']:.3f},{r['fine']:.3f},{r['total']:.3f},{r['error']:.3f}"
        )
    # per-device per-session means, plot-ready
    lines.append("device,session,mean_total,std_total,mean_true,n")
    keys = sorted({(r["device"], r["session"]) for r in rows})
    for dev, session in keys:
        sel = [r for r in rows if r["device"] == dev and r["session"] == session]
        totals = np.array([r["total"] for r in sel])
        trues = np.array([r["true_cfo"] for r in sel])
        lines.append(
            f"{dev},{session},{totals.mean():.3f},{totals.std():.3f},{trues.mean():.3f},{len(sel)}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        _refuse_existing(args.out, args.force)
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({len(rows)} packets)")
    else:
        sys.stdout.write(text)
    return 0


def _add_compensate_flags(parser, default=None):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--compensate", dest="compensate", action="store_true")
    group.add_argument("--no-compensate", dest="compensate", action="store_false")
    parser.set_defaults(compensate=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorarffi", description="LoRa RF fingerprinting testbed"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="synthesize a packet dataset")
    gen.add_argument("--config", required=True, help="YAML experiment config")
    gen.add_argument("--out", required=True, help="output dataset path")
    gen.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    gen.add_argument("--force", action="store_true", help="overwrite existing output")
    gen.set_defaults(func=_cmd_generate)

    tr = sub.add_parser("train", help="train a classifier on a dataset")
    tr.add_argument("dataset")
    tr.add_argument("--representation", choices=("iq", "fft", "spectrogram"), required=True)
    _add_compensate_flags(tr, default=True)
    tr.add_argument("--config", default=None)
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--out", required=True, help="output checkpoint path")
    tr.add_argument("--force", action="store_true")
    tr.add_argument("--verbose", action="store_true")
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a test selection")
    ev.add_argument("checkpoint")
    ev.add_argument("dataset")
    ev.add_argument("--classifier", choices=("cnn", "hybrid"), default="cnn")
    ev.add_argument("--lambda", dest="lambda_hz", type=float, default=None,
                    help="hybrid gating threshold in Hz (inf disables the gate)")
    _add_compensate_flags(ev, default=None)
    ev.add_argument("--config", default=None)
    ev.add_argument("--session", type=int, default=None)
    ev.add_argument("--start", type=int, default=None)
    ev.add_argument("--count", type=int, default=None)
    ev.add_argument("--allow-overlap", action="store_true")
    ev.add_argument("--out", default=None, help="report path stem (.txt and .csv)")
    ev.add_argument("--force", action="store_true")
    ev.set_defaults(func=_cmd_eval)

    cr = sub.add_parser("cfo-report", help="per-packet CFO estimates as CSV")
    cr.add_argument("dataset")
    cr.add_argument("--out", default=None)
    cr.add_argument("--force", action="store_true")
    cr.set_defaults(func=_cmd_cfo_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LoraRffiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``risfb {gen-data,train,eval,sweep,report,golden}``.

Settings come from built-in defaults, then an optional ``--config`` key-value
file, then command-line flags.  Every command writes a ``<command>.manifest``
key-value file next to its outputs.

Exit codes: 0 success, 1 I/O or file-format error, 2 configuration error,
3 training divergence, 4 golden-vector verification failure.
"""
from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, golden
from .channel import ArrayGeometry
from .dataset import ChannelConfig, gen_dataset, load_dataset, save_dataset
from .errors import ConfigError, DecodeError, DomainError, TrainingError
from .experiment import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    evaluate,
    load_models,
    report_complexity,
    run_sweep,
    save_models,
    train_models,
    write_csv,
)
from .kvfile import read_kv, write_kv
from .metrics import format_db
from .nn import TrainConfig, build_ae1, build_ae2

log = logging.getLogger("risfb")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3, 4

FULL_SIZE = {"n_t": "32", "n1": "16", "n2": "16"}

DEFAULTS = {
    # channel / dataset
    "n_t": "8", "n1": "8", "n2": "8", "spacing": "0.5",
    "data_T": "9", "n_paths_bs": "8", "n_paths_ue": "4", "rho": "0.9", "speed": "1.0",
    "carrier_hz": "2.655e9", "dt": "5e-3", "n_samples": "20000", "split": "8,1,1",
    # experiment
    "seed": "0", "method": "proposed", "T": "", "gamma1": "1/4", "gamma2": "1/4", "nq": "4",
    "ae1_filters": "16", "ae2_hidden": "",
    "ae1_epochs": "100", "ae1_batch": "64", "ae2_epochs": "100", "ae2_batch": "256",
    "lr_initial": "1e-3", "lr_final": "1e-4", "patience": "10", "min_rel_improvement": "1e-5",
    "max_train_samples": "", "max_eval_episodes": "",
    # sweep grid
    "sweep_gamma1": "1/4,1/16,1/64", "sweep_gamma2": "1/4", "sweep_T": "", "sweep_seeds": "0,1,2",
    "sweep_methods": "proposed,baseline",
}

FLAG_KEYS = {"seed": "seed", "method": "method", "T": "T", "gamma1": "gamma1", "gamma2": "gamma2", "nq": "nq"}


# -- settings -------------------------------------------------------------------

def resolve_settings(args) -> dict:
    settings = dict(DEFAULTS)
    if args.config:
        loaded = read_kv(args.config)
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {', '.join(unknown)}")
        settings.update(loaded)
    if args.full_size:
        settings.update(FULL_SIZE)
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            settings[key] = str(value)
    return settings


def _int(s, key, optional=False):
    if optional and s.strip() in ("", "none", "None"):
        return None
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {s!r}") from None


def _float(s, key):
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {s!r}") from None


def _fraction(s, key):
    try:
        return Fraction(s.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key} must be a fraction such as 1/4, got {s!r}") from None


def _list(s, conv, key):
    return [conv(p.strip(), key) for p in s.split(",") if p.strip()]


def channel_config(s: dict) -> ChannelConfig:
    try:
        geometry = ArrayGeometry(_int(s["n_t"], "n_t"), _int(s["n1"], "n1"), _int(s["n2"], "n2"),
                                 _float(s["spacing"], "spacing"))
        return ChannelConfig(
            geometry=geometry,
            T=_int(s["data_T"], "data_T"),
            n_paths_bs=_int(s["n_paths_bs"], "n_paths_bs"),
            n_paths_ue=_int(s["n_paths_ue"], "n_paths_ue"),
            rho=_float(s["rho"], "rho"),
            speed=_float(s["speed"], "speed"),
            carrier_hz=_float(s["carrier_hz"], "carrier_hz"),
            dt=_float(s["dt"], "dt"),
            n_samples=_int(s["n_samples"], "n_samples"),
            split=tuple(_list(s["split"], _int, "split")),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def experiment_config(s: dict, channel: ChannelConfig) -> ExperimentConfig:
    T = _int(s["T"], "T", optional=True)
    common = dict(lr_initial=_float(s["lr_initial"], "lr_initial"), lr_final=_float(s["lr_final"], "lr_final"),
                  patience=_int(s["patience"], "patience"),
                  min_rel_improvement=_float(s["min_rel_improvement"], "min_rel_improvement"))
    try:
        return ExperimentConfig(
            channel=channel,
            T=channel.T if T is None else T,
            gamma1=_fraction(s["gamma1"], "gamma1"),
            gamma2=_fraction(s["gamma2"], "gamma2"),
            n_q=_int(s["nq"], "nq", optional=True),
            method=s["method"],
            seed=_int(s["seed"], "seed"),
            ae1_filters=_int(s["ae1_filters"], "ae1_filters"),
            ae2_hidden=_int(s["ae2_hidden"], "ae2_hidden", optional=True),
            ae1_train=TrainConfig(epochs=_int(s["ae1_epochs"], "ae1_epochs"),
                                  batch_size=_int(s["ae1_batch"], "ae1_batch"), **common),
            ae2_train=TrainConfig(epochs=_int(s["ae2_epochs"], "ae2_epochs"),
                                  batch_size=_int(s["ae2_batch"], "ae2_batch"), **common),
            max_train_samples=_int(s["max_train_samples"], "max_train_samples", optional=True),
            max_eval_episodes=_int(s["max_eval_episodes"], "max_eval_episodes", optional=True),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _manifest(out_dir: Path, command: str, settings: dict, extra: dict) -> Path:
    values = {
        "command": command,
        "risfb_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
    }
    values.update({f"setting.{k}": v for k, v in settings.items()})
    values.update(extra)
    path = out_dir / f"{command}.manifest"
    write_kv(path, values)
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_path(args, out: Path) -> Path:
    return Path(args.data) if args.data else out / "dataset.rcsf"


def _models_dir(args, out: Path) -> Path:
    return Path(args.models) if args.models else out / "models"


def _load_for(args, out, settings):
    ds = load_dataset(_data_path(args, out))
    return ds, experiment_config(settings, ds.config)


# -- commands -------------------------------------------------------------------

def cmd_gen_data(args, settings) -> int:
    out = _out_dir(args)
    cfg = channel_config(settings)
    seed = _int(settings["seed"], "seed")
    t0 = time.perf_counter()
    ds = gen_dataset(cfg, seed)
    path = save_dataset(ds, _data_path(args, out))
    _manifest(out, "gen-data", settings, {"dataset": path, "episodes": ds.n_episodes,
                                          "elapsed_s": f"{time.perf_counter() - t0:.3f}"})
    print(f"wrote {path} ({ds.n_episodes} episodes of {cfg.T + 1} intervals)")
    return EXIT_OK


def cmd_train(args, settings) -> int:
    out = _out_dir(args)
    ds, cfg = _load_for(args, out, settings)
    t0 = time.perf_counter()
    models = train_models(cfg, ds)
    model_dir = save_models(models, _models_dir(args, out))
    for name, history in models.histories.items():
        write_csv(history, out / f"history_{name}.csv")
    _manifest(out, "train", settings, {"models": model_dir, "n_s1": cfg.n_s1,
                                       "n_s2": cfg.n_s2 if models.ae2 is not None else 0,
                                       "elapsed_s": f"{time.perf_counter() - t0:.3f}"})
    print(f"wrote models to {model_dir}")
    return EXIT_OK


def cmd_eval(args, settings) -> int:
    out = _out_dir(args)
    ds, cfg = _load_for(args, out, settings)
    models = load_models(_models_dir(args, out))
    if cfg.method == "proposed" and cfg.T > 0 and models.ae2 is None:
        raise ConfigError("the proposed method needs ae2.rcnn in the model directory")
    t0 = time.perf_counter()
    res = evaluate(cfg, models, ds.split("test"), cfg.method)
    elapsed = time.perf_counter() - t0
    rows = [{"t": t, "nmse_linear": float(v), "nmse_db": format_db(v)} for t, v in enumerate(res.per_interval)]
    write_csv(rows, out / "eval_per_interval.csv")
    T_eff = 0 if cfg.method == "baseline" else cfg.T
    cx = report_complexity(models.ae1, models.ae2 if T_eff > 0 else 0, T_eff)
    summary = [{
        "method": cfg.method, "T": cfg.T, "gamma1": str(Fraction(cfg.gamma1)),
        "gamma2": str(Fraction(cfg.gamma2)) if T_eff > 0 else "",
        "n_s1": models.ae1.code_size, "n_s2": models.ae2.code_size if T_eff > 0 else 0,
        "n_q": 64 if cfg.n_q is None else cfg.n_q, "n_equ": res.n_equ,
        "avg_nmse_db": format_db(res.avg_linear),
        "ae1_flops": cx["ae1_flops"], "ae2_flops": cx["ae2_flops"],
        "avg_flops_per_interval": cx["proposed_flops_per_interval"], "elapsed_s": round(elapsed, 3),
    }]
    write_csv(summary, out / "eval.csv")
    _manifest(out, "eval", settings, {"episodes": ds.split("test").shape[0], "elapsed_s": f"{elapsed:.3f}"})
    print(f"{cfg.method} T={cfg.T}: average NMSE {format_db(res.avg_linear)} dB, {res.n_equ:g} bits/interval")
    return EXIT_OK


def cmd_sweep(args, settings) -> int:
    out = _out_dir(args)
    ds, cfg = _load_for(args, out, settings)
    Ts = _list(settings["sweep_T"], _int, "sweep_T") or [cfg.T]
    methods = [m.strip() for m in settings["sweep_methods"].split(",") if m.strip()]
    t0 = time.perf_counter()
    rows = run_sweep(cfg, ds, _list(settings["sweep_gamma1"], _fraction, "sweep_gamma1"),
                     _list(settings["sweep_gamma2"], _fraction, "sweep_gamma2"), Ts, methods,
                     seeds=_list(settings["sweep_seeds"], _int, "sweep_seeds"))
    path = write_csv(rows, out / "sweep.csv", SWEEP_COLUMNS)
    _manifest(out, "sweep", settings, {"rows": len(rows), "elapsed_s": f"{time.perf_counter() - t0:.3f}"})
    print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_report(args, settings) -> int:
    out = _out_dir(args)
    model_dir = _models_dir(args, out)
    if (model_dir / "ae1.rcnn").exists():
        models = load_models(model_dir)
        ae1, ae2 = models.ae1, models.ae2
    else:
        cfg = experiment_config(settings, channel_config(settings))
        ae1 = build_ae1(cfg.n_ris, cfg.n_t, cfg.n_s1, filters=cfg.ae1_filters)
        ae2 = build_ae2(cfg.n_ris, cfg.n_s2, hidden=cfg.ae2_hidden)
    Ts = _list(settings["sweep_T"], _int, "sweep_T") or [_int(settings["T"] or settings["data_T"], "T")]
    rows = [report_complexity(ae1, ae2 if ae2 is not None else 0, T) for T in Ts]
    for row in rows:
        row["ratio_float"] = float(row["ratio"])
    path = write_csv(rows, out / "complexity.csv")
    _manifest(out, "report", settings, {"models": model_dir if ae1 is not None else ""})
    for row in rows:
        print(f"T={row['T']}: proposed/baseline FLOPs per interval = {row['ratio']} ({row['ratio_float']:.4f})")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_golden(args, settings) -> int:
    if args.emit:
        path = golden.emit(args.emit)
        print(f"wrote {path}")
        return EXIT_OK
    mismatches = golden.verify(args.verify or None)
    for line in mismatches:
        print(line)
    if mismatches:
        print(f"golden verification FAILED ({len(mismatches)} mismatches)")
        return EXIT_VERIFY
    print("golden verification passed")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "golden": cmd_golden,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="run", help="output directory (default: run)")
    common.add_argument("--method", choices=("proposed", "baseline"))
    common.add_argument("--T", type=int, help="ratio intervals per large timescale")
    common.add_argument("--gamma1", help="AE1 compression ratio, e.g. 1/4")
    common.add_argument("--gamma2", help="AE2 compression ratio, e.g. 1/4")
    common.add_argument("--nq", help="quantization bits per code value, or 'none' for raw float64")
    common.add_argument("--full-size", action="store_true", help="32 BS antennas and a 16x16 RIS")
    common.add_argument("--data", help="dataset file (default: OUT/dataset.rcsf)")
    common.add_argument("--models", help="model directory (default: OUT/models)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="risfb", description="Two-timescale RIS cascaded channel feedback.")
    parser.add_argument("--version", action="version", version=f"risfb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common], help="generate a channel dataset")
    sub.add_parser("train", parents=[common], help="train AE1 (and AE2 for the proposed method)")
    sub.add_parser("eval", parents=[common], help="evaluate a method on the test split")
    sub.add_parser("sweep", parents=[common], help="overhead vs NMSE sweep over the configured grid")
    sub.add_parser("report", parents=[common], help="FLOP complexity table")
    g = sub.add_parser("golden", parents=[common], help="emit or verify golden test vectors")
    mode = g.add_mutually_exclusive_group(required=True)
    mode.add_argument("--emit", metavar="DIR")
    mode.add_argument("--verify", nargs="?", const="", metavar="PATH",
                      help="verify PATH (default: the vectors shipped with the package)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](args, settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: ``stochseize {synth,ingest,features,eval,optimize,power}``.

Settings resolve as CLI flags > ``--config`` JSON > built-in defaults. Every
command writes its outputs plus a ``manifest.json`` into ``--out``.

Exit codes: 0 ok, 1 input/config error, 2 insufficient data, 3 internal error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import ConfigError, InsufficientDataError, ParseError
from .evaluation import (Backend, EvalConfig, WindowedDataset, evaluate_combo, make_folds, sweep_single,
                         write_heatmap_csv, write_reports_csv, write_reports_json)
from .features import FeatureConfig, FeatureKind, evaluate_streaming
from .optimizer import GaConfig, exhaustive_pairs, ga_search
from .power import DEFAULT_SCENARIOS, load_scenario
from .presets import PRESETS
from .signal_io import (MontageSpec, State, SynthesisConfig, apply_montage, labels_path, load_recording,
                        meets_inclusion, synthesize_recording, write_csv, write_edf, write_labels)

log = logging.getLogger("stochseize")

EXIT_OK, EXIT_INPUT, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class Run:
    """Output directory bookkeeping shared by every subcommand."""

    def __init__(self, command: str, out: Path, config: dict, timestamp: bool):
        self.command = command
        self.out = Path(out)
        self.config = config
        self.timestamp = timestamp
        self.artifacts: list[str] = []
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def write_json(self, name: str, doc) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return p

    def finish(self):
        blob = json.dumps(self.config, sort_keys=True, default=str)
        manifest = {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
            "artifacts": sorted(self.artifacts),
        }
        if self.timestamp:
            manifest["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _resolve(args, defaults: dict, keys: list[str]) -> dict:
    cfg = dict(defaults)
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {args.config} not found") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{args.config}: malformed JSON ({exc})") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.update(file_cfg.get(args.command, file_cfg))
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["seed"] = args.seed if args.seed is not None else cfg.get("seed", 0)
    return cfg


def _parse_list(value, conv=str) -> list:
    if value is None:
        return []
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    return [conv(v) for v in value]


def _features(value) -> list[FeatureKind]:
    return [FeatureKind.parse(v) if isinstance(v, str) else FeatureKind(v) for v in _parse_list(value, str)]


def _combo(value) -> list:
    out = []
    for item in _parse_list(value, str) if isinstance(value, str) else value:
        if isinstance(item, str):
            kind, _, ch = item.partition(":")
            out.append((FeatureKind.parse(kind), int(ch)))
        else:
            out.append((FeatureKind.parse(item[0]), int(item[1])))
    return out


def _load_labelled(path):
    rec = load_recording(path)
    if not rec.labels:
        raise ConfigError(f"{path}: no labels (expected sidecar {labels_path(path).name})")
    return rec


def _eval_cfg(cfg: dict) -> EvalConfig:
    return EvalConfig(window_s=float(cfg["window_s"]), tau_s=float(cfg["tau_s"]), feature_mode=cfg["feature_mode"],
                      target_bins=int(cfg["target_bins"]), min_count=int(cfg["min_count"]),
                      smoothing=float(cfg["smoothing"]), prior=cfg.get("prior"), threshold=float(cfg["threshold"]),
                      n_bits=int(cfg["n_bits"]), lut_levels=cfg.get("lut_levels"), seed=int(cfg["seed"]))


def _workers(cfg: dict) -> int:
    w = cfg.get("workers")
    return int(w) if w else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    keys = ["preset", "format", "n_channels", "sample_rate_hz"]
    cfg = _resolve(args, {"preset": "planted", "format": "csv"}, keys)
    base = dict(PRESETS.get(cfg["preset"]) or {})
    if cfg["preset"] not in PRESETS:
        raise ConfigError(f"unknown preset {cfg['preset']!r}; choose from {sorted(PRESETS)}")
    base.update({k: v for k, v in cfg.items() if k in SynthesisConfig.__dataclass_fields__})
    cfg["synthesis"] = base
    synth = SynthesisConfig.from_dict(base)
    rec = synthesize_recording(synth, int(cfg["seed"]))
    run = Run("synth", args.out, cfg, not args.no_timestamp)
    fmt = cfg["format"].lower()
    if fmt == "edf":
        write_edf(rec, run.path("recording.edf"), write_sidecar=False)
    elif fmt == "csv":
        write_csv(rec, run.path("recording.csv"), write_sidecar=False)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    write_labels(rec.labels, run.path("recording.labels.json"))
    run.finish()
    print(f"wrote {rec.n_samples} samples x {len(rec.channels)} channels at {rec.sample_rate_hz:g} Hz "
          f"({rec.duration_s:g} s, {rec.seconds_in(State.ICTAL):g} s ictal) to {run.out}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _resolve(args, {"montage": "none", "min_ictal_s": 60.0, "min_interictal_s": 60.0},
                   ["input", "montage", "min_ictal_s", "min_interictal_s"])
    if not cfg.get("input"):
        raise ConfigError("--input is required")
    rec = load_recording(cfg["input"])
    if cfg["montage"] == "tcp":
        rec = apply_montage(rec, MontageSpec())
    elif cfg["montage"] != "none":
        raise ConfigError("montage must be 'none' or 'tcp'")
    run = Run("ingest", args.out, cfg, not args.no_timestamp)
    write_csv(rec, run.path("recording.csv"), write_sidecar=False)
    write_labels(rec.labels, run.path("recording.labels.json"))
    summary = {
        "channels": rec.channel_names,
        "sample_rate_hz": rec.sample_rate_hz,
        "duration_s": rec.duration_s,
        "ictal_s": rec.seconds_in(State.ICTAL),
        "interictal_s": rec.seconds_in(State.INTERICTAL),
        "included": meets_inclusion(rec, float(cfg["min_ictal_s"]), float(cfg["min_interictal_s"])),
    }
    run.write_json("summary.json", summary)
    run.finish()
    print(json.dumps(summary))
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _resolve(args, {"features": [k.value for k in FeatureKind], "channels": None, "tau_s": 5.0},
                   ["input", "features", "channels", "tau_s"])
    if not cfg.get("input"):
        raise ConfigError("--input is required")
    rec = load_recording(cfg["input"])
    chans = _parse_list(cfg["channels"], int) or list(range(len(rec.channels)))
    fcfg = FeatureConfig(float(cfg["tau_s"]), rec.sample_rate_hz)
    run = Run("features", args.out, cfg, not args.no_timestamp)
    for kind in _features(cfg["features"]):
        for ch in chans:
            trace = evaluate_streaming(rec.channels[ch].samples, kind, fcfg, ch)
            trace.to_csv(run.path(f"features/{kind.value}_ch{ch}.csv"))
    run.finish()
    return EXIT_OK


EVAL_DEFAULTS = {
    "features": [k.value for k in FeatureKind], "channels": None, "combo": None, "backend": "exact",
    "folds": 5, "window_s": 5.0, "tau_s": 5.0, "feature_mode": "streaming", "target_bins": 40,
    "min_count": 5, "smoothing": 1.0, "prior": None, "threshold": 0.5, "n_bits": 5000, "lut_levels": None,
    "workers": None,
}
EVAL_KEYS = list(EVAL_DEFAULTS) + ["input"]


def cmd_eval(args) -> int:
    cfg = _resolve(args, EVAL_DEFAULTS, EVAL_KEYS)
    if not cfg.get("input"):
        raise ConfigError("--input is required")
    rec = _load_labelled(cfg["input"])
    ds = WindowedDataset(rec, _eval_cfg(cfg))
    plan = make_folds(ds.windows, int(cfg["folds"]), int(cfg["seed"]))
    backend = Backend(cfg["backend"])
    run = Run("eval", args.out, cfg, not args.no_timestamp)
    meta = {"backend": backend.value, "n_windows": len(ds), "folds": plan.fold_count}
    if cfg.get("combo"):
        reports = [evaluate_combo(ds, _combo(cfg["combo"]), plan, backend)]
    else:
        chans = _parse_list(cfg["channels"], int) or list(range(len(rec.channels)))
        sweep = sweep_single(ds, _features(cfg["features"]), chans, plan, backend=backend, workers=_workers(cfg))
        reports = sweep.reports
        write_heatmap_csv(sweep, run.path("heatmap.csv"))
        meta["best_by_feature"] = {k.value: {"channel": r.combo[0][1], "J": r.j_statistic}
                                   for k, r in sweep.best_by_feature.items()}
    write_reports_json(reports, run.path("reports.json"), meta)
    write_reports_csv(reports, run.path("reports.csv"))
    run.finish()
    best = max(reports, key=lambda r: r.j_statistic)
    print(f"{len(reports)} report(s); best J={best.j_statistic:.3f} for "
          + ", ".join(f"{k.value}:{c}" for k, c in best.combo))
    return EXIT_OK


def cmd_optimize(args) -> int:
    defaults = dict(EVAL_DEFAULTS, combo_size=3, population=24, generations=30, mutation_rate=0.2, elitism=2)
    cfg = _resolve(args, defaults, EVAL_KEYS + ["combo_size", "population", "generations", "mutation_rate",
                                               "elitism"])
    if not cfg.get("input"):
        raise ConfigError("--input is required")
    rec = _load_labelled(cfg["input"])
    feats = _features(cfg["features"])
    chans = _parse_list(cfg["channels"], int) or list(range(len(rec.channels)))
    if int(cfg["combo_size"]) > len(feats) * len(chans):
        raise ConfigError(f"combo_size {cfg['combo_size']} exceeds the {len(feats) * len(chans)} members")
    ds = WindowedDataset(rec, _eval_cfg(cfg))
    plan = make_folds(ds.windows, int(cfg["folds"]), int(cfg["seed"]))
    workers = _workers(cfg)
    ranked = exhaustive_pairs(ds, feats, chans, plan, workers=workers)
    ga_cfg = GaConfig(combo_size=int(cfg["combo_size"]), population=int(cfg["population"]),
                      generations=int(cfg["generations"]), mutation_rate=float(cfg["mutation_rate"]),
                      elitism=int(cfg["elitism"]), seed=int(cfg["seed"]))
    run = Run("optimize", args.out, cfg, not args.no_timestamp)
    with run.path("pairs.csv").open("w") as fh:
        fh.write("rank,members,J\n")
        for i, (combo, rep) in enumerate(ranked):
            members = " ".join(f"{k.value}:{c}" for k, c in combo)
            fh.write(f"{i},{members},{rep.j_statistic!r}\n")
    doc = {"best_pair": {"members": ranked[0][0].to_list(), "J": ranked[0][1].j_statistic}}
    if ga_cfg.combo_size > 2:
        res = ga_search(ds, feats, chans, plan, ga_cfg, ranked[0][0].members, workers=workers)
        res.write_log(run.path("search_log.jsonl"))
        doc.update({
            "best": {"members": res.best.to_list(), "fitness": res.report.mean_fold_j,
                     "exact": res.report.to_dict(),
                     "stochastic": res.stochastic_report.to_dict() if res.stochastic_report else None},
            "history": res.history,
        })
        print(f"best {ga_cfg.combo_size}-combo: " + ", ".join(f"{k.value}:{c}" for k, c in res.best)
              + f" (mean fold J={res.report.mean_fold_j:.3f})")
    run.write_json("best.json", doc)
    run.finish()
    return EXIT_OK


def cmd_power(args) -> int:
    cfg = _resolve(args, {"scenario": None, "preset": "all", "pairs": None, "lut_levels": None},
                   ["scenario", "preset", "pairs", "lut_levels"])
    if cfg.get("scenario"):
        scenarios = [load_scenario(cfg["scenario"])]
    elif cfg["preset"] == "all":
        scenarios = list(DEFAULT_SCENARIOS.values())
    elif cfg["preset"] in DEFAULT_SCENARIOS:
        scenarios = [DEFAULT_SCENARIOS[cfg["preset"]]]
    else:
        raise ConfigError(f"unknown preset {cfg['preset']!r}")
    if cfg.get("pairs") is not None:
        scenarios = [replace(s, pairs=int(cfg["pairs"])) for s in scenarios]
    if cfg.get("lut_levels") is not None:
        scenarios = [replace(s, lut_levels=int(cfg["lut_levels"])) for s in scenarios]
    reports = [s.report() for s in scenarios]
    run = Run("power", args.out, cfg, not args.no_timestamp)
    run.write_json("power_report.json", {"scenarios": reports})
    run.finish()
    for r in reports:
        print(f"[{r['scenario']}]")
        for block, w in r["per_block_w"].items():
            print(f"  {block:<20s}{w * 1e6:12.6f} uW")
        print(f"  {'per pair':<20s}{r['per_pair_w'] * 1e6:12.6f} uW (published {r['published_per_pair_w'] * 1e6:.3f})")
        print(f"  {'stimulation':<20s}{r['stim_energy_j'] * 1e6:12.3f} uJ/event, {r['stim_w'] * 1e6:.3f} uW")
        print(f"  {'total':<20s}{r['total_w'] * 1e6:12.3f} uW for {r['pairs']} pairs")
        print(f"  {'battery life':<20s}{r['battery_years']:12.2f} years")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--config", type=Path, default=None, help="JSON file with command settings")
    common.add_argument("--no-timestamp", action="store_true", help="omit the manifest timestamp")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="stochseize", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic labelled recording")
    s.add_argument("--preset", choices=sorted(PRESETS), default=None)
    s.add_argument("--format", choices=["csv", "edf"], default=None)
    s.add_argument("--n-channels", dest="n_channels", type=int, default=None)
    s.add_argument("--sample-rate", dest="sample_rate_hz", type=float, default=None)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", parents=[common], help="load CSV/EDF, optionally montage, check inclusion")
    s.add_argument("--input", default=None)
    s.add_argument("--montage", choices=["none", "tcp"], default=None)
    s.add_argument("--min-ictal-s", dest="min_ictal_s", type=float, default=None)
    s.add_argument("--min-interictal-s", dest="min_interictal_s", type=float, default=None)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("features", parents=[common], help="export streaming feature traces")
    s.add_argument("--input", default=None)
    s.add_argument("--features", default=None, help="comma-separated feature names")
    s.add_argument("--channels", default=None, help="comma-separated channel indices")
    s.add_argument("--tau", dest="tau_s", type=float, default=None)
    s.set_defaults(func=cmd_features)

    def eval_args(s):
        s.add_argument("--input", default=None)
        s.add_argument("--features", default=None)
        s.add_argument("--channels", default=None)
        s.add_argument("--backend", choices=[b.value for b in Backend], default=None)
        s.add_argument("--folds", type=int, default=None)
        s.add_argument("--window", dest="window_s", type=float, default=None)
        s.add_argument("--tau", dest="tau_s", type=float, default=None)
        s.add_argument("--mode", dest="feature_mode", choices=["streaming", "windowed"], default=None)
        s.add_argument("--bins", dest="target_bins", type=int, default=None)
        s.add_argument("--min-count", dest="min_count", type=int, default=None)
        s.add_argument("--lut-levels", dest="lut_levels", type=int, default=None)
        s.add_argument("--n-bits", dest="n_bits", type=int, default=None)
        s.add_argument("--workers", type=int, default=None)

    s = sub.add_parser("eval", parents=[common], help="cross-validated evaluation or single-pair sweep")
    eval_args(s)
    s.add_argument("--combo", default=None, help="e.g. ENERGY_MEAN:0,LINE_LENGTH:3")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("optimize", parents=[common], help="exhaustive pair search then GA")
    eval_args(s)
    s.add_argument("--combo-size", dest="combo_size", type=int, default=None)
    s.add_argument("--population", type=int, default=None)
    s.add_argument("--generations", type=int, default=None)
    s.add_argument("--mutation-rate", dest="mutation_rate", type=float, default=None)
    s.add_argument("--elitism", type=int, default=None)
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("power", parents=[common], help="power budget and battery life")
    s.add_argument("--scenario", default=None, help="scenario JSON file")
    s.add_argument("--preset", choices=sorted(DEFAULT_SCENARIOS) + ["all"], default=None)
    s.add_argument("--pairs", type=int, default=None)
    s.add_argument("--lut-levels", dest="lut_levels", type=int, default=None)
    s.set_defaults(func=cmd_power)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ParseError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

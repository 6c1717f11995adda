"""Config-driven experiment runner: ``sitlab run | plot | compare``.

Config files are INI (sections ``[dataset] [stream] [model] [train] [run]
[acceptance]``) or JSON with the same nesting; see ``configs/reference.ini``.
Missing keys take the reference-experiment defaults.

Exit codes: 0 success, 1 a run (or comparison input) failed, 2 bad config.
``SITLAB_OUTPUT_ROOT`` sets the default output root when neither the config
nor ``--output`` names a directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import reference as ref
from . import svg
from .datagen import generate_dataset, load_dataset, make_descriptors
from .errors import ConfigError, MissingArtifact, ParseError, SeedMismatch, SitlabError
from .metrics import a_auc, a_avg, a_last, new_class_bias
from .model import ModelConfig, init_model
from .objective import BUCKETS, GradientLedger
from .streams import REGIMES, export_schedule, make_schedule
from .trainer import STRATEGIES, TrainConfig, train_online

log = logging.getLogger("sitlab")

ENV_OUTPUT_ROOT = "SITLAB_OUTPUT_ROOT"
METRICS = ("a_auc", "a_avg", "a_last", "new_class_bias", "zero_shot_before", "zero_shot_after")

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "dataset": {
        "path": (str, None),
        "num_classes": (int, ref.DATASET["num_classes"]),
        "held_out": (int, ref.DATASET["held_out_count"]),
        "per_class_train": (int, ref.DATASET["per_class_train"]),
        "per_class_test": (int, ref.DATASET["per_class_test"]),
        "d_in": (int, ref.DATASET["d_in"]),
        "cluster_sigma": (float, ref.DATASET["cluster_sigma"]),
        "separation": (float, None),
        "eta": (float, ref.ETA),
    },
    "stream": {
        "regime": (str, ref.STREAM["regime"]),
        "tasks": (int, ref.STREAM["T"]),
        "disjoint_fraction": (float, ref.STREAM["disjoint_fraction"]),
        "blurry_level": (float, ref.STREAM["blurry_level"]),
    },
    "model": {
        "d_desc": (int, ref.MODEL.d_desc),
        "d_embed": (int, ref.MODEL.d_embed),
        "pet_kind": (str, ref.MODEL.pet_kind),
        "pet_rank": (int, ref.MODEL.pet_rank),
        "adapter_down_dim": (int, ref.MODEL.adapter_down_dim),
        "tune_image": (bool, True),
        "tune_text": (bool, True),
        "temperature": (float, ref.MODEL.temperature),
        "pet_scale": (float, ref.MODEL.pet_scale),
        "model_seed": (int, None),
    },
    "train": {
        "strategies": (list, ["sit", "ait"]),
        "optimizer": (str, ref.TRAIN.optimizer),
        "lr": (float, ref.TRAIN.lr),
        "beta1": (float, ref.TRAIN.beta1),
        "beta2": (float, ref.TRAIN.beta2),
        "eps": (float, ref.TRAIN.eps),
        "iterations_per_batch": (int, ref.TRAIN.iterations_per_batch),
        "batch_size": (int, ref.TRAIN.batch_size),
        "eval_period": (int, ref.TRAIN.eval_period),
    },
    "run": {
        "seeds": (list, list(ref.SEEDS)),
        "output_dir": (str, None),
    },
    "acceptance": {
        "min_a_last_gap": (float, ref.MIN_A_LAST_GAP),
        "min_seed_wins": (int, ref.MIN_SEED_WINS),
        "min_bias_ratio": (float, ref.MIN_BIAS_RATIO),
    },
}


@dataclass
class ExperimentConfig:
    dataset: dict
    stream: dict
    model: dict
    train: dict
    run: dict
    acceptance: dict
    source: str | None = field(default=None, compare=False)

    @property
    def seeds(self) -> list[int]:
        return self.run["seeds"]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d

    def model_config(self) -> ModelConfig:
        m = {k: v for k, v in self.model.items() if k != "model_seed"}
        return ModelConfig(d_in=self.dataset["d_in"], **m)

    def train_config(self, strategy: str, seed: int) -> TrainConfig:
        t = {k: v for k, v in self.train.items() if k != "strategies"}
        return TrainConfig(strategy=strategy, seed=seed, **t)


def _coerce(path: str, typ: type, raw):
    if raw is None:
        return None
    try:
        if typ is bool:
            if isinstance(raw, bool):
                return raw
            s = str(raw).strip().lower()
            if s in ("1", "true", "yes", "on"):
                return True
            if s in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is list:
            items = raw if isinstance(raw, list) else [p for p in str(raw).replace(",", " ").split() if p]
            return items
        if typ is int:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if typ is float:
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ConfigError(path, f"cannot read {raw!r} as {typ.__name__}") from None


def _validate(blocks: dict) -> dict:
    out = {}
    for section, keys in SCHEMA.items():
        given = blocks.get(section, {}) or {}
        if not isinstance(given, dict):
            raise ConfigError(section, "must be a table/section")
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(f"{section}.{sorted(unknown)[0]}", "unknown key")
        out[section] = {k: _coerce(f"{section}.{k}", t, given.get(k, d)) for k, (t, d) in keys.items()}
    unknown = set(blocks) - set(SCHEMA)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")

    st, tr, run = out["stream"], out["train"], out["run"]
    if st["regime"] not in REGIMES:
        raise ConfigError("stream.regime", f"must be one of {REGIMES}, got {st['regime']!r}")
    tr["strategies"] = [s.lower() for s in tr["strategies"]]
    for s in tr["strategies"]:
        if s not in STRATEGIES:
            raise ConfigError("train.strategies", f"unknown strategy {s!r}")
    if not tr["strategies"]:
        raise ConfigError("train.strategies", "must not be empty")
    run["seeds"] = [_coerce("run.seeds", int, s) for s in run["seeds"]]
    if not run["seeds"]:
        raise ConfigError("run.seeds", "must not be empty")
    if len(set(run["seeds"])) != len(run["seeds"]):
        raise ConfigError("run.seeds", "duplicate seeds")
    cfg = ExperimentConfig(**out)
    # surface block-level contract violations with a field path
    try:
        cfg.model_config()
    except SitlabError as exc:
        raise ConfigError("model", str(exc)) from None
    try:
        cfg.train_config(tr["strategies"][0], 0)
    except SitlabError as exc:
        raise ConfigError("train", str(exc)) from None
    return out


def parse_config(text: str, fmt: str = "ini") -> ExperimentConfig:
    if fmt == "json":
        try:
            blocks = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"invalid JSON: {exc}") from None
        if not isinstance(blocks, dict):
            raise ConfigError("<file>", "top level must be an object")
    else:
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("<file>", f"invalid INI: {exc}") from None
        blocks = {s: dict(cp[s]) for s in cp.sections()}
    return ExperimentConfig(**_validate(blocks))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
    cfg = parse_config(text, "json" if path.suffix.lower() == ".json" else "ini")
    cfg.source = str(path)
    return cfg


# ---------------------------------------------------------------- run


def _resolve_output(cfg: ExperimentConfig, output: str | None) -> Path:
    if output:
        return Path(output)
    if cfg.run["output_dir"]:
        return Path(cfg.run["output_dir"])
    root = Path(os.environ.get(ENV_OUTPUT_ROOT, "runs"))
    stem = Path(cfg.source).stem if cfg.source else "experiment"
    return root / stem


def build_run(cfg: ExperimentConfig, seed: int):
    """Dataset (with descriptors), schedule and initial params for one seed."""
    d = cfg.dataset
    mcfg = cfg.model_config()
    params = init_model(mcfg, cfg.model["model_seed"] if cfg.model["model_seed"] is not None else seed)
    if d["path"]:
        ds = load_dataset(d["path"])
    else:
        ds = generate_dataset(d["num_classes"], d["held_out"], d["per_class_train"],
                              d["per_class_test"], d["d_in"], d["cluster_sigma"], seed,
                              separation=d["separation"])
    if not ds.has_descriptors():
        ds = make_descriptors(ds, params, d["eta"], seed)
    s = cfg.stream
    sch = make_schedule(ds, s["regime"], s["tasks"], s["disjoint_fraction"], s["blurry_level"], seed)
    return ds, sch, params


def read_run_metrics(run_dir) -> dict:
    """Recompute a run's summary metrics from its CSV files alone."""
    run_dir = Path(run_dir)
    curve = _read_rows(run_dir / "curve.csv")
    tasks = _read_rows(run_dir / "tasks.csv")
    conf_rows = _read_rows(run_dir / "confusion.csv")
    zs = {r["phase"]: float(r["accuracy"]) for r in _read_rows(run_dir / "zero_shot.csv", allow_empty=True)}
    task_acc = [float(r["accuracy"]) for r in tasks]
    points = [(int(r["samples_seen"]), float(r["accuracy"])) for r in curve]
    ids = [int(r["class_id"]) for r in conf_rows]
    home = {int(r["class_id"]): int(r["home_task"]) for r in conf_rows}
    M = np.array([[int(r[f"pred_{c}"]) for c in ids] for r in conf_rows], dtype=np.int64)
    return {
        "a_auc": a_auc(points),
        "a_avg": a_avg(task_acc),
        "a_last": a_last(task_acc),
        "new_class_bias": new_class_bias(M, ids, home, len(task_acc) - 1),
        "zero_shot_before": zs.get("before"),
        "zero_shot_after": zs.get("after"),
    }


def _read_rows(path: Path, allow_empty: bool = False) -> list[dict]:
    if not path.is_file():
        raise MissingArtifact(f"missing {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows and not allow_empty:
        raise MissingArtifact(f"{path} has no data rows")
    return rows


def _stats(values: list) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "values": values}
    a = np.array(vals, dtype=np.float64)
    std = float(a.std(ddof=1)) if len(a) > 1 else 0.0
    return {"mean": float(a.mean()), "std": std, "values": values}


def summarize(out_dir, strategies, seeds) -> dict:
    per = {}
    for s in strategies:
        rows = [read_run_metrics(Path(out_dir) / s / f"seed_{seed}") for seed in seeds]
        per[s] = {m: _stats([r[m] for r in rows]) for m in METRICS}
    return per


def run(cfg: ExperimentConfig, output: str | None = None, seeds: list[int] | None = None,
        strategies: list[str] | None = None) -> tuple[int, Path]:
    """Train every (strategy, seed) pair and write artifacts plus ``summary.json``."""
    out = _resolve_output(cfg, output)
    seeds = list(seeds) if seeds else list(cfg.seeds)
    strategies = list(strategies) if strategies else list(cfg.train["strategies"])
    out.mkdir(parents=True, exist_ok=True)
    echo = cfg.to_dict()
    echo["run"] = {**echo["run"], "seeds": seeds, "output_dir": str(out)}
    echo["train"] = {**echo["train"], "strategies": strategies}
    (out / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")

    failed = []
    for seed in seeds:
        try:
            ds, sch, params = build_run(cfg, seed)
        except (SitlabError, OSError) as exc:
            log.error("seed %s: setup failed: %s", seed, exc)
            failed.extend((s, seed) for s in strategies)
            continue
        for s in strategies:
            run_dir = out / s / f"seed_{seed}"
            try:
                art = train_online(ds, sch, params, cfg.train_config(s, seed))
                art.save(run_dir)
                export_schedule(sch, run_dir / "schedule.csv")
                log.info("%s seed %s: A_last %.4f A_auc %s", s, seed, art.a_last, art.a_auc)
            except (SitlabError, OSError, FloatingPointError) as exc:
                log.error("%s seed %s failed: %s", s, seed, exc)
                failed.append((s, seed))

    summary = {"config": echo, "seeds": seeds, "strategies": strategies,
               "failed": [[s, seed] for s, seed in failed]}
    if not failed:
        summary["metrics"] = summarize(out, strategies, seeds)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return (1 if failed else 0), out


# ---------------------------------------------------------------- plot


def _run_dirs(root: Path) -> list[Path]:
    if (root / "metrics.json").is_file():
        return [root]
    return sorted(p.parent for p in root.rglob("metrics.json"))


def plot_run(run_dir) -> list[Path]:
    run_dir = Path(run_dir)
    curve = _read_rows(run_dir / "curve.csv")
    conf_rows = _read_rows(run_dir / "confusion.csv")
    ledger_path = run_dir / "ledger.csv"
    if not ledger_path.is_file():
        raise MissingArtifact(f"missing {ledger_path}")
    ledger = GradientLedger.load_csv(ledger_path)
    written = []

    pts = [(int(r["samples_seen"]), float(r["accuracy"])) for r in curve]
    chart = svg.line_chart({"accuracy": pts}, title="Anytime accuracy on seen classes",
                           xlabel="samples seen", ylabel="top-1 accuracy", ylim=(0.0, 1.0))
    written.append(_write(run_dir / "curve.svg", chart))

    ids = [int(r["class_id"]) for r in conf_rows]
    tag = {int(r["class_id"]): r["role"][0] for r in conf_rows}  # b / d
    M = np.array([[int(r[f"pred_{c}"]) for c in ids] for r in conf_rows])
    labels = [f"{c}{tag[c]}" for c in ids]
    written.append(_write(run_dir / "confusion.svg",
                          svg.heatmap(M, labels, labels, title="Final confusion (occurrence order)")))

    steps = sorted(ledger.steps)
    totals = {b: [(s, sum(r[i] for r in ledger.steps[s].values())) for s in steps]
              for i, b in enumerate(BUCKETS)}
    neg = {"symmetric negative": totals["symmetric"]}
    if ledger.bucket_total("asymmetric") > 0:
        neg["asymmetric negative"] = totals["asymmetric"]
    timeline = svg.stacked_panels([("Positive-sample gradient", {"positive": totals["positive"]}),
                                   ("Negative-sample gradient", neg)],
                                  xlabel="step", ylabel="|dL/dt|")
    written.append(_write(run_dir / "ledger_timeline.svg", timeline))

    order = ledger.class_ids()
    roles = {int(r["class_id"]): r["role"][0] for r in conf_rows}
    per = [ledger.totals(c) for c in order]
    bars = svg.bar_chart([f"{c}{roles.get(c, '')}" for c in order],
                         [p["positive"] for p in per],
                         [p["symmetric"] + p["asymmetric"] for p in per],
                         title="Cumulative text-feature gradient per class",
                         up_name="positive", down_name="negative")
    written.append(_write(run_dir / "ledger_classes.svg", bars))
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def plot(artifact_dir) -> list[Path]:
    root = Path(artifact_dir)
    dirs = _run_dirs(root) if root.is_dir() else []
    if not dirs:
        raise MissingArtifact(f"no run artifacts under {root}")
    out = []
    for d in dirs:
        out.extend(plot_run(d))
    return out


# ---------------------------------------------------------------- compare


def _seed_dirs(strategy_dir: Path) -> dict[int, Path]:
    if not strategy_dir.is_dir():
        raise MissingArtifact(f"{strategy_dir} is not a directory")
    found = {}
    for p in strategy_dir.iterdir():
        if p.is_dir() and p.name.startswith("seed_"):
            try:
                found[int(p.name[5:])] = p
            except ValueError:
                continue
    if not found:
        raise MissingArtifact(f"no seed_* runs in {strategy_dir}")
    return dict(sorted(found.items()))


def compare(dir_sit, dir_ait, thresholds: dict | None = None) -> dict:
    """Paired per-seed comparison of two strategy directories."""
    th = {"min_a_last_gap": ref.MIN_A_LAST_GAP, "min_seed_wins": ref.MIN_SEED_WINS,
          "min_bias_ratio": ref.MIN_BIAS_RATIO, **(thresholds or {})}
    a, b = _seed_dirs(Path(dir_sit)), _seed_dirs(Path(dir_ait))
    if list(a) != list(b):
        raise SeedMismatch(f"seed sets differ: {list(a)} vs {list(b)}")
    seeds = list(a)
    ma = {s: read_run_metrics(a[s]) for s in seeds}
    mb = {s: read_run_metrics(b[s]) for s in seeds}
    report = {"seeds": seeds, "dir_sit": str(dir_sit), "dir_ait": str(dir_ait),
              "thresholds": th, "metrics": {}, "checks": []}
    for m in METRICS:
        va = [ma[s][m] for s in seeds]
        vb = [mb[s][m] for s in seeds]
        delta = [None if x is None or y is None else x - y for x, y in zip(va, vb)]
        report["metrics"][m] = {"sit": _stats(va), "ait": _stats(vb), "delta": _stats(delta)}

    gap = report["metrics"]["a_last"]["delta"]
    wins = sum(1 for d in gap["values"] if d is not None and d > 0)
    ratios = [mb[s]["new_class_bias"] / ma[s]["new_class_bias"] if ma[s]["new_class_bias"] > 0
              else float("inf") for s in seeds]
    need = min(th["min_seed_wins"], len(seeds))
    bias_wins = sum(1 for r in ratios if r >= th["min_bias_ratio"])
    report["checks"] = [
        _check("mean A_last gap (SIT - AIT)", gap["mean"], th["min_a_last_gap"], gap["mean"] >= th["min_a_last_gap"]),
        _check("seeds with SIT A_last > AIT", wins, need, wins >= need),
        _check(f"seeds with AIT/SIT new-class bias >= {th['min_bias_ratio']}", bias_wins, need, bias_wins >= need),
    ]
    return report


def _check(name, value, threshold, ok) -> dict:
    return {"name": name, "value": value, "threshold": threshold, "status": "PASS" if ok else "FAIL"}


def format_report(report: dict) -> str:
    lines = [f"seeds: {report['seeds']}",
             f"{'metric':<18}{'SIT':>18}{'AIT':>18}{'delta':>18}"]

    def ms(st):
        return "n/a" if st["mean"] is None else f"{st['mean']:.4f}±{st['std']:.4f}"

    for m, row in report["metrics"].items():
        lines.append(f"{m:<18}{ms(row['sit']):>18}{ms(row['ait']):>18}{ms(row['delta']):>18}")
    for c in report["checks"]:
        v = c["value"]
        v = f"{v:.4f}" if isinstance(v, float) else str(v)
        lines.append(f"[{c['status']}] {c['name']}: {v} (threshold {c['threshold']})")
    return "\n".join(lines)


# ---------------------------------------------------------------- entry point


def _seed_list(s: str) -> list[int]:
    try:
        return [int(p) for p in s.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {s!r}") from None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sitlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="train every (strategy, seed) in a config")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (overrides config)")
    p.add_argument("--seeds", type=_seed_list, help="comma-separated seed override")
    p.add_argument("--strategy", choices=[*STRATEGIES, "both"], help="strategy override")

    p = sub.add_parser("plot", help="write SVG plots for run artifacts")
    p.add_argument("artifact_dir")

    p = sub.add_parser("compare", help="compare SIT and AIT strategy directories")
    p.add_argument("dir_sit")
    p.add_argument("dir_ait")
    p.add_argument("--min-a-last-gap", type=float)
    p.add_argument("--min-seed-wins", type=int)
    p.add_argument("--min-bias-ratio", type=float)
    p.add_argument("-o", "--output", help="also write the report as JSON here")
    p.add_argument("--strict", action="store_true", help="exit 1 if any check fails")

    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.cmd == "run":
            cfg = load_config(args.config)
            strategies = None
            if args.strategy:
                strategies = list(STRATEGIES) if args.strategy == "both" else [args.strategy]
            code, out = run(cfg, args.output, args.seeds, strategies)
            print(out / "summary.json")
            return code
        if args.cmd == "plot":
            for path in plot(args.artifact_dir):
                print(path)
            return 0
        th = {k: v for k, v in (("min_a_last_gap", args.min_a_last_gap),
                                ("min_seed_wins", args.min_seed_wins),
                                ("min_bias_ratio", args.min_bias_ratio)) if v is not None}
        report = compare(args.dir_sit, args.dir_ait, th)
        print(format_report(report))
        if args.output:
            Path(args.output).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        failed = any(c["status"] == "FAIL" for c in report["checks"])
        return 1 if (args.strict and failed) else 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (MissingArtifact, SeedMismatch, ParseError, SitlabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands::

    dmtree train --train data.csv --method dmt --k 7 --out model.txt
    dmtree predict --model model.txt --test new.csv
    dmtree benchmark cross-lab --train a.csv --test b.csv --test c.csv --method c45 --method dmt
    dmtree benchmark sweep --train a.csv --test b.csv --noise-frac 0,0.1,0.3 --trials 100
    dmtree benchmark cv --train a.csv --folds 10 --method dmt:scheme=laplace
    dmtree stats wilcoxon --input accuracies.csv

Values are resolved in this order, later ones winning: built-in defaults,
the ``--config`` file (JSON, or YAML for ``.yml``/``.yaml``), ``DMTREE_*``
environment variables, then command-line flags. The seed is never read from
the environment. When no seed is given one is generated and echoed, and the
fully resolved configuration is written next to the output as
``<out>.config.json`` (or to standard error when writing to standard out).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from dmtree import __version__
from dmtree.dataset import (
    DatasetError,
    NormalizationStats,
    apply_normalization,
    conform,
    fit_normalization,
    load_dataset,
    write_atomic,
)
from dmtree.experiment import (
    NoiseSpec,
    parallel_map,
    prepare_pair,
    run_cross_lab,
    run_cv,
    run_noise_sweep,
)
from dmtree.methods import MethodError, MethodSpec
from dmtree.report import FORMATS, ReportError, method_columns, render_report, render_wilcoxon
from dmtree.serialize import load_model, save_model

log = logging.getLogger("dmtree")

ENV_PREFIX = "DMTREE_"
DEFAULT_SWEEP = (0.0, 0.05, 0.1, 0.2, 0.3, 0.5)
# keys that a config file or the environment may set, with their defaults
DEFAULTS = {
    "train": None,
    "test": None,
    "model": None,
    "input": None,
    "class_col": None,
    "method": None,
    "k": None,
    "scheme": None,
    "members": None,
    "rounds": None,
    "subset": None,
    "pool": None,
    "min_leaf": None,
    "confidence": None,
    "noise_frac": None,
    "trials": 100,
    "sigma_source": "test",
    "folds": 10,
    "seed": None,
    "jobs": 1,
    "out": None,
    "format": "table",
    "columns": None,
    "alpha": 0.05,
}
LIST_KEYS = ("test", "method", "noise_frac", "columns")
INT_KEYS = ("k", "members", "rounds", "subset", "pool", "min_leaf", "trials", "folds", "seed", "jobs")
FLOAT_KEYS = ("confidence", "alpha")
# keys the config echo adds that are not options
ECHO_ONLY = ("command", "artifact_version")
# commands that draw no random numbers and so need no seed
RANDOM_FREE = ("predict", "stats wilcoxon")


class ConfigError(ValueError):
    pass


def _fractions(values) -> list[float]:
    out = []
    for v in values:
        for part in str(v).split(","):
            part = part.strip()
            if part:
                try:
                    out.append(float(part))
                except ValueError:
                    raise ConfigError(f"noise fraction {part!r} is not a number") from None
    return out


def _coerce(key, value):
    if value is None:
        return None
    if key in LIST_KEYS:
        if isinstance(value, str):
            value = [value]
        value = list(value)
        if key == "noise_frac":
            value = _fractions(value)
        return value
    try:
        if key in INT_KEYS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} expects a number, got {value!r}") from None
    return value


def _read_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = p.read_text()
    if p.suffix.lower() in (".yml", ".yaml"):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping of option names to values")
    out = {}
    for key, value in data.items():
        k = key.replace("-", "_")
        if k in ECHO_ONLY:
            # written by the config echo; informational when read back
            if k == "artifact_version" and value != __version__:
                log.warning("config was written by dmtree %s, running %s", value, __version__)
            continue
        if k not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        out[k] = value
    return out


def _env_values(environ) -> dict:
    out = {}
    for key in DEFAULTS:
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is None:
            continue
        if key == "seed":
            log.warning("ignoring %sSEED: seeds are only taken from flags or the config file", ENV_PREFIX)
            continue
        out[key] = raw.split(",") if key in LIST_KEYS else raw
    return out


def resolve(args: argparse.Namespace, environ=None) -> dict:
    """Merge defaults, config file, environment and flags into one dict."""
    environ = os.environ if environ is None else environ
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_read_config(args.config))
    cfg.update(_env_values(environ))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg = {k: _coerce(k, v) for k, v in cfg.items()}
    cfg["command"] = args.command_name
    if cfg["seed"] is None and cfg["command"] not in RANDOM_FREE:
        cfg["seed"] = secrets.randbelow(2**31)
        print(f"seed: {cfg['seed']} (generated)", file=sys.stderr)
    if cfg["format"] not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    for key in ("train", "model", "input"):
        if cfg[key] is not None and not Path(cfg[key]).is_file():
            raise ConfigError(f"{key} file not found: {cfg[key]}")
    for path in cfg["test"] or []:
        if not Path(path).is_file():
            raise ConfigError(f"test file not found: {path}")
    return cfg


def _require(cfg, *keys):
    for key in keys:
        if not cfg.get(key):
            raise ConfigError(f"--{key.replace('_', '-')} is required for {cfg['command']}")


def _methods(cfg) -> list[MethodSpec]:
    overrides = {k: cfg[k] for k in ("k", "scheme", "members", "rounds", "subset", "pool", "min_leaf", "confidence")}
    out = []
    for desc in cfg["method"] or ["dmt"]:
        name = desc.partition(":")[0]
        spec_defaults = MethodSpec.create(name).params
        # shared flags apply only to methods that have the parameter
        applicable = {k: v for k, v in overrides.items() if k in spec_defaults}
        out.append(MethodSpec.parse(desc, **applicable))
    return out


def _materialize(cfg) -> dict:
    """The config echo: every value resolved, methods expanded in full."""
    echo = {k: cfg[k] for k in sorted(cfg)}
    if cfg["command"] in ("train", "benchmark cross-lab", "benchmark sweep", "benchmark cv"):
        echo["method"] = [str(m) for m in _methods(cfg)]
    if cfg["command"] == "benchmark sweep" and not cfg["noise_frac"]:
        echo["noise_frac"] = list(DEFAULT_SWEEP)
    echo["artifact_version"] = __version__
    return echo


def _emit(cfg, text: str) -> None:
    echo = json.dumps(_materialize(cfg), indent=2, sort_keys=True) + "\n"
    if cfg["out"]:
        write_atomic(cfg["out"], text)
        write_atomic(cfg["out"] + ".config.json", echo)
    else:
        sys.stdout.write(text)
        sys.stderr.write(echo)


def _header(path) -> list[str]:
    with open(path, newline="") as fh:
        return next(csv.reader(fh), [])


def _load(path, cfg):
    """Labelled dataset; the class column defaults to the last column."""
    class_col = cfg["class_col"]
    if class_col is None:
        head = _header(path)
        if not head:
            raise DatasetError(f"{path}: empty file")
        class_col = head[-1]
    return load_dataset(path, class_col)


def cmd_train(cfg) -> None:
    _require(cfg, "train", "out")
    methods = _methods(cfg)
    if len(methods) != 1:
        raise ConfigError("train takes exactly one --method")
    d = _load(cfg["train"], cfg)
    stats = fit_normalization(d)
    model = methods[0].fit(apply_normalization(d, stats), cfg["seed"])
    save_model(model, cfg["out"])
    write_atomic(cfg["out"] + ".norm.csv", stats.to_text())
    write_atomic(cfg["out"] + ".config.json", json.dumps(_materialize(cfg), indent=2, sort_keys=True) + "\n")


def _vote_weights(model, X) -> np.ndarray:
    if hasattr(model, "vote_matrix"):
        return model.vote_matrix(X)
    # a single tree reports the class distribution of the reached leaf
    _, counts = model.predict_counts(X)
    totals = counts.sum(axis=1, keepdims=True)
    return np.divide(counts, totals, out=np.zeros_like(counts), where=totals > 0)


def cmd_predict(cfg) -> None:
    _require(cfg, "model", "test")
    if len(cfg["test"]) != 1:
        raise ConfigError("predict takes exactly one --test file")
    model = load_model(cfg["model"])
    path = cfg["test"][0]
    # without --class-col every column is read as an attribute and columns
    # the model does not use (such as a label column) are ignored
    d = load_dataset(path, cfg["class_col"])
    names = [a.name for a in model.schema]
    for name in names:
        if name not in d.names:
            raise DatasetError(f"{path}: attribute {name!r} required by the model is missing")
    d = d.select(names)
    sidecar = Path(cfg["model"] + ".norm.csv")
    if sidecar.is_file():
        d = apply_normalization(d, NormalizationStats.from_text(sidecar.read_text()))
    X = conform(d, model.schema)
    weights = _vote_weights(model, X)
    winners = model.predict(X)
    classes = list(model.classes)
    if cfg["format"] == "structured":
        rows = [
            {"row": i, "winner": classes[w], "weights": {c: float(v) for c, v in zip(classes, weights[i])}}
            for i, w in enumerate(winners)
        ]
        text = json.dumps({"schema": "dmtree-predictions", "schema_version": 1, "predictions": rows}, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n") if cfg["format"] == "delimited" else None
        head = ["row", "winner", *(f"weight[{c}]" for c in classes)]
        if w:
            w.writerow(head)
        else:
            buf.write("\t".join(head) + "\n")
        for i, win in enumerate(winners):
            rec = [str(i), classes[win], *(f"{v:.6g}" for v in weights[i])]
            if w:
                w.writerow(rec)
            else:
                buf.write("\t".join(rec) + "\n")
        text = buf.getvalue()
    _emit(cfg, text)


def _noise_spec(cfg, fraction: float) -> NoiseSpec:
    return NoiseSpec(fraction, trials=cfg["trials"], seed=cfg["seed"], sigma_source=cfg["sigma_source"])


def _cross_lab_task(args):
    train, test, method, spec, seed = args
    return run_cross_lab(train, test, method, spec, seed)


def cmd_benchmark(cfg) -> None:
    _require(cfg, "train")
    methods = _methods(cfg)
    sub = cfg["command"].split()[1]
    if sub == "cv":
        data = [_load(cfg["train"], cfg)] + [_load(p, cfg) for p in cfg["test"] or []]
        reports = [run_cv(d, cfg["folds"], m, cfg["seed"], cfg["jobs"]) for d in data for m in methods]
    else:
        _require(cfg, "test")
        train = _load(cfg["train"], cfg)
        tests = [_load(p, cfg) for p in cfg["test"]]
        for t in tests:
            prepare_pair(train, t)  # fail fast on alignment problems
        if sub == "cross-lab":
            fracs = cfg["noise_frac"] or []
            if len(fracs) > 1:
                raise ConfigError("cross-lab takes at most one --noise-frac; use sweep for several")
            spec = _noise_spec(cfg, fracs[0]) if fracs else None
            tasks = [(train, t, m, spec, cfg["seed"]) for t in tests for m in methods]
            reports = parallel_map(_cross_lab_task, tasks, cfg["jobs"])
        else:
            fracs = cfg["noise_frac"] or list(DEFAULT_SWEEP)
            reports = []
            for t in tests:
                reports.extend(run_noise_sweep(train, t, methods, fracs, _noise_spec(cfg, 0.0), cfg["seed"], cfg["jobs"]))
    _emit(cfg, render_report(reports, cfg["format"]))


def _read_columns(path: str) -> dict[str, list[float]]:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        from dmtree.experiment import ExperimentReport, TrialResult

        doc = json.loads(text)
        reports = []
        for r in doc.get("reports", []):
            fields = {k: v for k, v in r.items() if k in ExperimentReport.__dataclass_fields__}
            fields["trials"] = [TrialResult(t["trial"], tuple(t["noised"]), t["accuracy"], t["digest"]) for t in r["trials"]]
            reports.append(ExperimentReport(**fields))
        return method_columns(reports)
    rows = [r for r in csv.reader(line for line in text.splitlines() if not line.startswith("#")) if r]
    if len(rows) < 2:
        raise ConfigError(f"{path}: expected a header row and at least one accuracy row")
    head, body = rows[0], rows[1:]
    cols: dict[str, list[float]] = {}
    for j, name in enumerate(head):
        try:
            vals = [float(r[j]) for r in body]
        except (ValueError, IndexError):
            continue  # a condition/label column
        # percentages are accepted and scaled to [0, 1]
        cols[name] = vals
    if cols and max(max(v) for v in cols.values()) > 1.0:
        cols = {k: [x / 100.0 for x in v] for k, v in cols.items()}
    return cols


def cmd_stats(cfg) -> None:
    _require(cfg, "input")
    cols = _read_columns(cfg["input"])
    if cfg["columns"]:
        missing = [c for c in cfg["columns"] if c not in cols]
        if missing:
            raise ConfigError(f"columns not found in {cfg['input']}: {missing}")
        cols = {c: cols[c] for c in cfg["columns"]}
    _emit(cfg, render_wilcoxon(cols, cfg["format"], cfg["alpha"]))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or YAML file with option values")
    p.add_argument("--class-col", dest="class_col", help="name of the class column (default: last column)")
    p.add_argument("--seed", type=int, help="top-level seed; generated and echoed when omitted")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", choices=FORMATS, help="output format (default: table)")


def _add_method(p: argparse.ArgumentParser, repeat: bool) -> None:
    p.add_argument(
        "--method",
        action="append" if repeat else None,
        type=(lambda s: s) if repeat else (lambda s: [s]),
        help="method descriptor, e.g. c45, dmt:k=7,scheme=laplace, bagging, adaboost, random_forest, random_tree"
        + (" (repeatable)" if repeat else ""),
    )
    p.add_argument("--k", type=int, help="number of DMT trees")
    p.add_argument("--scheme", help="DMT voting scheme: simple, laplace or support")
    p.add_argument("--members", type=int, help="ensemble size for bagging, random forest and random trees")
    p.add_argument("--rounds", type=int, help="AdaBoost rounds")
    p.add_argument("--subset", type=int, help="random forest attribute subset size")
    p.add_argument("--pool", type=int, help="random trees candidate pool size")
    p.add_argument("--min-leaf", dest="min_leaf", type=int, help="minimum instances per branch")
    p.add_argument("--confidence", type=float, help="pruning confidence factor; 1 disables pruning")


def _add_noise(p: argparse.ArgumentParser) -> None:
    p.add_argument("--noise-frac", dest="noise_frac", action="append", help="fraction of attributes to noise; repeatable or comma-separated")
    p.add_argument("--trials", type=int, help="noised copies per fraction (default: 100)")
    p.add_argument("--sigma-source", dest="sigma_source", choices=("test", "train"), help="set whose standard deviations scale the noise")
    p.add_argument("--jobs", type=int, help="worker processes (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmtree", description="Diversified multiple trees and noise-robustness benchmarks.")
    parser.add_argument("--version", action="version", version=f"dmtree {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write it with its normalization sidecar")
    p.add_argument("--train", help="training CSV file")
    _add_method(p, repeat=False)
    _add_common(p)
    p.set_defaults(command_name="train", handler=cmd_train)

    p = sub.add_parser("predict", help="classify rows of a CSV file with a saved model")
    p.add_argument("--model", help="model file written by train")
    p.add_argument("--test", action="append", help="CSV file to classify")
    _add_common(p)
    p.set_defaults(command_name="predict", handler=cmd_predict)

    bench = sub.add_parser("benchmark", help="run an evaluation protocol")
    bsub = bench.add_subparsers(dest="protocol", required=True)
    for name, helptext in (
        ("cross-lab", "train on one dataset, test on others"),
        ("sweep", "accuracy at several noise fractions with paired trials"),
        ("cv", "stratified cross-validation"),
    ):
        p = bsub.add_parser(name, help=helptext)
        p.add_argument("--train", help="training CSV file (the dataset for cv)")
        p.add_argument("--test", action="append", help="test CSV file (repeatable; extra datasets for cv)")
        _add_method(p, repeat=True)
        _add_noise(p)
        p.add_argument("--folds", type=int, help="cross-validation folds (default: 10)")
        _add_common(p)
        p.set_defaults(command_name=f"benchmark {name}", handler=cmd_benchmark)

    stats = sub.add_parser("stats", help="statistical tests over accuracy columns")
    ssub = stats.add_subparsers(dest="test_name", required=True)
    p = ssub.add_parser("wilcoxon", help="pairwise one-sided Wilcoxon signed-rank p-values")
    p.add_argument("--input", help="CSV with one accuracy column per method, or a structured report")
    p.add_argument("--columns", nargs="+", help="method columns to compare (default: all numeric columns)")
    p.add_argument("--alpha", type=float, help="mark p-values at or below this level (default: 0.05)")
    _add_common(p)
    p.set_defaults(command_name="stats wilcoxon", handler=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = resolve(args)
        args.handler(cfg)
    except (ConfigError, DatasetError, MethodError, ReportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``maldomain {generate,evaluate,tune,select,compare}``.

Settings come from built-in defaults, then an optional profile, then a
``key = value`` config file, then flags; later sources win. Every command
that writes a report also writes ``effective_config.txt``, which can be fed
back through ``--config`` to repeat the run exactly.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 computation error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import re
import sys
from collections import defaultdict
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .bpso import BPSOConfig, nested_selection_cv, run_bpso
from .classifiers.base import ALL_FAMILIES, ClassifierSpec, Family, make_params
from .dataset import generate_synthetic, load_csv, min_max_scale, write_csv
from .errors import ConfigurationError, DataError, MaldomainError, PairingError
from .evaluation import (
    DEFAULT_GRIDS,
    METRICS,
    SCALING_MODES,
    CVResult,
    folds_csv,
    format_table,
    grid_search,
    repeated_cv,
    summary_csv,
    write_text,
)
from .stats import friedman_ranks, pairwise_comparison_table

log = logging.getLogger("maldomain")

MODES = ("select-then-evaluate", "nested")
BLOCKINGS = ("dataset-metric", "fold")

PROFILES = {
    "full": {},
    # reduced ensemble sizes and swarm budget for a single-CPU desk run
    "desk": {
        "rf.n_trees": 200,
        "gbm.n_trees": 500,
        "bpso.swarm_size": 8,
        "bpso.max_iterations": 10,
    },
}


# ---------------------------------------------------------------------------
# Config


def parse_value(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    if low == "none":
        return None
    if re.fullmatch(r"[+-]?\d+", t):
        return int(t)
    try:
        return float(t)
    except ValueError:
        return t


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, Family):
        return v.value
    return str(v)


def read_config(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{no}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{path}:{no}: empty key")
        out[key] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    data: tuple[str, ...] = ()
    models: tuple[Family, ...] = ALL_FAMILIES
    model: Family | None = None
    k: int = 10
    repeats: int = 10
    seed: int = 0
    scaling: str = "global"
    mode: str = "select-then-evaluate"
    jobs: int = 1
    params: dict = field(default_factory=dict)
    bpso: BPSOConfig = field(default_factory=BPSOConfig)
    grid: dict = field(default_factory=dict)

    def spec(self, family: Family) -> ClassifierSpec:
        return ClassifierSpec(family, dict(self.params.get(family, {})))

    def echo(self, families=None) -> str:
        """Every setting, one ``key = value`` per line, sorted."""
        families = families if families is not None else self.models
        lines = {
            "data": format_value(self.data),
            "models": format_value(self.models),
            "k": format_value(self.k),
            "repeats": format_value(self.repeats),
            "seed": format_value(self.seed),
            "scaling": self.scaling,
            "mode": self.mode,
            "jobs": format_value(self.jobs),
        }
        if self.model is not None:
            lines["model"] = self.model.value
        for fam in families:
            for name, v in self.spec(fam).params.as_dict().items():
                lines[f"{fam.value}.{name}"] = format_value(v)
        for name, v in self.bpso.as_dict().items():
            if name != "seed":
                lines[f"bpso.{name}"] = format_value(v)
        for name, values in self.grid.items():
            lines[f"grid.{name}"] = format_value(values)
        return "".join(f"{k} = {lines[k]}\n" for k in sorted(lines))


_SCALAR_KEYS = {"k", "repeats", "seed", "jobs"}


def build_config(settings: dict) -> ExperimentConfig:
    """Validate raw ``key -> text`` settings into an :class:`ExperimentConfig`."""
    kw: dict = {}
    params: dict = defaultdict(dict)
    bpso: dict = {}
    grid: dict = {}
    bpso_fields = {f.name for f in fields(BPSOConfig)}
    for key, raw in settings.items():
        text = raw if isinstance(raw, str) else format_value(raw)
        if key == "data":
            kw["data"] = tuple(p.strip() for p in text.split(",") if p.strip())
        elif key == "models":
            kw["models"] = tuple(Family.parse(t) for t in text.split(",") if t.strip())
            if not kw["models"]:
                raise ConfigurationError("models list is empty")
        elif key == "model":
            kw["model"] = Family.parse(text)
        elif key in _SCALAR_KEYS:
            v = parse_value(text)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigurationError(f"{key} must be an integer, got {text!r}")
            kw[key] = v
        elif key == "scaling":
            if text not in SCALING_MODES:
                raise ConfigurationError(f"scaling must be one of {SCALING_MODES}")
            kw["scaling"] = text
        elif key == "mode":
            if text not in MODES:
                raise ConfigurationError(f"mode must be one of {MODES}")
            kw["mode"] = text
        elif key.startswith("bpso."):
            name = key[5:]
            if name not in bpso_fields or name == "seed":
                raise ConfigurationError(f"unknown BPSO setting {key!r}")
            bpso[name] = parse_value(text)
        elif key.startswith("grid."):
            grid[key[5:]] = [parse_value(t) for t in text.split(",") if t.strip()]
        elif "." in key:
            fam_token, name = key.split(".", 1)
            params[Family.parse(fam_token)][name] = parse_value(text)
        else:
            raise ConfigurationError(f"unknown setting {key!r}")
    seed = kw.get("seed", 0)
    if seed < 0:
        raise ConfigurationError("seed must be >= 0")
    if kw.get("k", 2) < 2:
        raise ConfigurationError("k must be >= 2")
    if kw.get("repeats", 1) < 1:
        raise ConfigurationError("repeats must be >= 1")
    if kw.get("jobs", 1) == 0:
        raise ConfigurationError("jobs must be non-zero")
    for fam, values in params.items():
        ClassifierSpec(fam, make_params(fam, values))  # validates
    return ExperimentConfig(**kw, params=dict(params), bpso=BPSOConfig(**bpso, seed=seed),
                            grid=grid)


def collect_settings(args, flag_settings: dict) -> dict:
    settings = dict(PROFILES[args.profile])
    if args.config:
        settings.update(read_config(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        settings[key.strip()] = value.strip()
    settings.update({k: v for k, v in flag_settings.items() if v is not None})
    return settings


# ---------------------------------------------------------------------------
# Commands


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_scaled(path: str, scaling: str):
    d = load_csv(path)
    return d if scaling == "per_fold" else min_max_scale(d)


def _dataset_name(path: str) -> str:
    return Path(path).stem


def _require_data(cfg: ExperimentConfig):
    if not cfg.data:
        raise ConfigurationError("no dataset given (use --data or 'data =' in the config)")


def cmd_generate(args) -> int:
    d = generate_synthetic(args.per_class, args.separation, args.seed, args.distribution)
    write_csv(d, args.out)
    print(f"wrote {len(d)} records to {args.out}")
    return 0


def _write_reports(out: Path, results: list[CVResult], title: str):
    write_text(out / "summary.csv", summary_csv(results))
    write_text(out / "folds.csv", folds_csv(results))
    text = "".join(format_table([r for r in results if r.dataset == ds], f"{title}: {ds}")
                   for ds in dict.fromkeys(r.dataset for r in results))
    write_text(out / "report.txt", text)
    return text


def cmd_evaluate(args, cfg: ExperimentConfig) -> int:
    _require_data(cfg)
    out = _out_dir(args.out)
    write_text(out / "effective_config.txt", cfg.echo())
    results, failed = [], []
    for path in cfg.data:
        d = _load_scaled(path, cfg.scaling)
        name = _dataset_name(path)
        for fam in cfg.models:
            try:
                res = repeated_cv(cfg.spec(fam), d, cfg.k, cfg.repeats, cfg.seed,
                                  scaling=cfg.scaling, n_jobs=cfg.jobs, dataset_name=name)
            except MaldomainError as exc:
                log.error("%s on %s failed: %s", fam.value, name, exc)
                failed.append(f"{name}:{fam.value}")
                continue
            results.append(res)
    text = _write_reports(out, results, "Cross-validated performance")
    print(text, end="")
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return 4
    return 0


def cmd_tune(args, cfg: ExperimentConfig) -> int:
    _require_data(cfg)
    if cfg.model is None:
        raise ConfigurationError("tune needs a model (--model)")
    grid = cfg.grid or DEFAULT_GRIDS.get(cfg.model)
    if not grid:
        raise ConfigurationError(f"no default grid for {cfg.model.value}; give grid.<param> keys")
    out = _out_dir(args.out)
    write_text(out / "effective_config.txt", replace(cfg, grid=grid).echo((cfg.model,)))
    d = _load_scaled(cfg.data[0], cfg.scaling)
    res = grid_search(cfg.model, grid, d, cfg.seed, k=5,
                      base=dict(cfg.params.get(cfg.model, {})), scaling=cfg.scaling)
    keys = list(res.points[0])
    rows = [",".join([*keys, "f_measure"])]
    for point, score in zip(res.points, res.scores):
        rows.append(",".join([*(format_value(point[k]) for k in keys), format_value(score)]))
    write_text(out / "grid.csv", "\n".join(rows) + "\n")
    best = "".join(f"{cfg.model.value}.{k} = {format_value(getattr(res.best.params, k))}\n"
                   for k in keys)
    write_text(out / "best.txt", best)
    print(best, end="")
    print(f"best 5-fold F-measure: {res.best_score:.4f}")
    return 0


def cmd_select(args, cfg: ExperimentConfig) -> int:
    _require_data(cfg)
    if cfg.model is None:
        raise ConfigurationError("select needs a model (--model)")
    out = _out_dir(args.out)
    if cfg.scaling != "global":
        raise ConfigurationError("feature selection runs on globally scaled data")
    write_text(out / "effective_config.txt", cfg.echo((cfg.model,)))
    d = _load_scaled(cfg.data[0], cfg.scaling)
    name = _dataset_name(cfg.data[0])
    spec = cfg.spec(cfg.model)
    if cfg.mode == "nested":
        res = nested_selection_cv(spec, d, cfg.bpso, cfg.k, cfg.repeats, cfg.seed,
                                  n_jobs=cfg.jobs, dataset_name=name)
        res = replace(res, model=f"FS_{spec.name}")
        write_text(out / "masks.csv", "repeat,fold,mask\n" + "".join(
            f"{f.repeat},{f.fold},{m}\n" for f, m in zip(res.folds, res.extra["masks"])))
    else:
        sel = run_bpso(d, spec, cfg.bpso, n_jobs=cfg.jobs)
        write_text(out / "mask.txt", sel.mask_string + "\n")
        write_text(out / "mask.csv", sel.mask_csv())
        write_text(out / "history.csv", sel.history_csv())
        res = repeated_cv(spec, d, cfg.k, cfg.repeats, cfg.seed, mask=sel.best_mask,
                          n_jobs=cfg.jobs, dataset_name=name)
        res = replace(res, model=f"FS_{spec.name}")
        print(f"selected mask {sel.mask_string} ({', '.join(sel.selected_features)}), "
              f"fitness {sel.best_fitness:.4f}")
    print(_write_reports(out, [res], "Feature-selection based performance"), end="")
    return 0


def read_fold_results(path: str | Path) -> dict:
    """``{(dataset, model): {(repeat, fold, seed): {metric: value}}}`` from a folds CSV."""
    out: dict = defaultdict(dict)
    try:
        fh = Path(path).open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read results file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        need = {"model", "dataset", "repeat", "fold", "repeat_seed", *METRICS}
        if reader.fieldnames is None or need - set(reader.fieldnames):
            raise DataError(f"{path}: not a per-fold results file")
        for row in reader:
            key = (int(row["repeat"]), int(row["fold"]), int(row["repeat_seed"]))
            out[(row["dataset"], row["model"])][key] = {
                m: None if row[m] == "NA" else float(row[m]) for m in METRICS
            }
    return dict(out)


def compare_results(paths, blocking: str = "dataset-metric", metric: str = "f_measure"):
    """Friedman ranks and pairwise Wilcoxon p-values over per-fold result files."""
    tables = [(Path(p), read_fold_results(p)) for p in paths]
    names = [m for _, t in tables for (_, m) in t]
    dup = {m for m in names if names.count(m) > 1}
    series: dict = {}
    for path, t in tables:
        for (ds, model), folds in t.items():
            label = f"{path.parent.name or path.stem}:{model}" if model in dup else model
            if (ds, label) in series:
                label = f"{path}:{model}"
            series[(ds, label)] = folds
    datasets = sorted({ds for ds, _ in series})
    models = list(dict.fromkeys(m for _, m in series))
    for ds in datasets:
        keys = {frozenset(series[(ds, m)]) for m in models if (ds, m) in series}
        if any((ds, m) not in series for m in models) or len(keys) != 1:
            raise PairingError(f"results on {ds} do not share the same models, folds and seeds")
    rows = []
    if blocking == "dataset-metric":
        for ds in datasets:
            for m in METRICS:
                row = []
                for model in models:
                    vals = [v[m] for v in series[(ds, model)].values() if v[m] is not None]
                    row.append(float(np.mean(vals)) if vals else np.nan)
                rows.append(row)
    else:
        for ds in datasets:
            for key in sorted(series[(ds, models[0])]):
                rows.append([series[(ds, model)][key][metric] for model in models])
    rows = [r for r in rows if all(v is not None and np.isfinite(v) for v in r)]
    ranks = friedman_ranks(rows, models)
    paired = {model: [] for model in models}
    for ds in datasets:
        for key in sorted(series[(ds, models[0])]):
            vals = [series[(ds, model)][key][metric] for model in models]
            if any(v is None for v in vals):
                continue
            for model, v in zip(models, vals):
                paired[model].append(v)
    table = pairwise_comparison_table(paired)
    return ranks, table


def cmd_compare(args, cfg: ExperimentConfig) -> int:
    if len(args.results) < 1:
        raise ConfigurationError("compare needs at least one results file")
    out = _out_dir(args.out)
    write_text(out / "effective_config.txt",
               f"blocking = {args.blocking}\nmetric = {args.metric}\nresults = "
               f"{','.join(args.results)}\n")
    ranks, table = compare_results(args.results, args.blocking, args.metric)
    write_text(out / "ranks.csv", ranks.to_csv())
    write_text(out / "pvalues.csv", table.to_csv())
    lines = ["Average ranks (1 = best)"]
    width = max(len(m) for m in ranks.models)
    for m, r in sorted(zip(ranks.models, ranks.average_ranks), key=lambda t: (t[1], t[0])):
        lines.append(f"{m.ljust(width)}  {r:.3f}")
    lines.append(f"Friedman chi-square: {ranks.statistic:.4f}")
    lines.append("")
    lines.append(f"Wilcoxon signed-rank p-values on {args.metric} (* = not significant at 0.05)")
    text = "\n".join(lines) + "\n" + table.format()
    write_text(out / "comparison.txt", text)
    print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def _common(p: argparse.ArgumentParser, needs_out_dir=True):
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--profile", choices=sorted(PROFILES), default="full",
                   help="preset sizes; 'desk' shrinks RF, GBM and BPSO budgets")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one setting, e.g. rf.n_trees=200 (repeatable)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    if needs_out_dir:
        p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maldomain",
                                     description="Malicious domain classification experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset CSV")
    g.add_argument("--per-class", type=int, default=1000)
    g.add_argument("--separation", type=float, default=3.0)
    g.add_argument("--distribution", choices=("lognormal", "gaussian"), default="lognormal")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output CSV path")

    e = sub.add_parser("evaluate", help="repeated stratified CV of several models")
    _common(e)
    e.add_argument("--data", help="dataset CSV path(s), comma separated")
    e.add_argument("--models", help="comma-separated model list")
    e.add_argument("--k", type=int)
    e.add_argument("--repeats", type=int)
    e.add_argument("--scaling", choices=SCALING_MODES)

    t = sub.add_parser("tune", help="grid search one model by 5-fold F-measure")
    _common(t)
    t.add_argument("--data")
    t.add_argument("--model")
    t.add_argument("--grid", action="append", metavar="PARAM=V1,V2,...")

    s = sub.add_parser("select", help="BPSO feature selection, then repeated CV")
    _common(s)
    s.add_argument("--data")
    s.add_argument("--model")
    s.add_argument("--k", type=int)
    s.add_argument("--repeats", type=int)
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--swarm-size", type=int)
    s.add_argument("--max-iterations", type=int)

    c = sub.add_parser("compare", help="Friedman ranks and Wilcoxon p-values")
    _common(c)
    c.add_argument("results", nargs="+", help="folds.csv files written by evaluate/select")
    c.add_argument("--blocking", choices=BLOCKINGS, default="dataset-metric")
    c.add_argument("--metric", choices=METRICS, default="f_measure")
    return parser


def _flag_settings(args) -> dict:
    get = lambda name: getattr(args, name, None)  # noqa: E731
    flags = {
        "data": get("data"),
        "models": get("models"),
        "model": get("model"),
        "k": get("k"),
        "repeats": get("repeats"),
        "seed": get("seed"),
        "jobs": get("jobs"),
        "scaling": get("scaling"),
        "mode": get("mode"),
        "bpso.swarm_size": get("swarm_size"),
        "bpso.max_iterations": get("max_iterations"),
    }
    for item in get("grid") or []:
        if "=" not in item:
            raise ConfigurationError(f"--grid expects PARAM=V1,V2,..., got {item!r}")
        name, values = item.split("=", 1)
        flags[f"grid.{name.strip()}"] = values
    return {k: (v if isinstance(v, str) else format_value(v)) for k, v in flags.items()
            if v is not None}


_COMMANDS = {"evaluate": cmd_evaluate, "tune": cmd_tune, "select": cmd_select,
             "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        cfg = build_config(collect_settings(args, _flag_settings(args)))
        return _COMMANDS[args.command](args, cfg)
    except MaldomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""Experiment harness: train, ablate, sweep, gradcheck, synth and report commands.

Exit codes: 0 success, 1 gradient check failed, 2 configuration error,
3 training diverged, 4 input/output failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path

import numpy as np

from .baselines import baseline_lp, baseline_softmax
from .dataset import (
    BinarizationPolicy,
    DatasetError,
    LeDataset,
    load_dataset,
    load_named,
    split_folds,
    synth_generate,
    write_matrix,
)
from .diffnet import compare_gradients, init_mlp
from .metrics import DISPLAY, LOWER_BETTER, MEASURES, MetricReport, average_ranks, evaluate, \
    format_rank_table, mean_report
from .objective import THRESHOLD_FORMS, VARIANTS, ConleConfig, ConleModel, gradients_as_list, \
    loss_gradients, weighted_total
from .trainer import TrainConfig, TrainingDiverged, recover_all, train

log = logging.getLogger(__name__)

EXIT_OK, EXIT_GRADCHECK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4
METHODS = ("conle", "baseline_softmax", "baseline_lp")
MODES = ("transductive", "kfold")
SWEEP_PARAMS = ("lambda1", "lambda2")
SWEEP_GRID = (0.1, 0.3, 0.5, 0.8, 1.0, 5.0, 10.0)


class ConfigError(ValueError):
    pass


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0"


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class SynthSpec:
    n: int = 500
    dim1: int = 20
    c: int = 5
    seed: int = 7
    noise: float = 0.1


@dataclass(frozen=True)
class DatasetSpec:
    """Either ``synth``, a directory plus ``name``, or explicit file paths.

    ``scaling`` applies to file datasets; synthetic features are already
    standard normal and are used as generated.
    """
    synth: SynthSpec | None = None
    dir: str | None = None
    name: str | None = None
    features: str | None = None
    logical: str | None = None
    distribution: str | None = None
    scaling: str = "zscore"
    binarization: BinarizationPolicy = field(default_factory=BinarizationPolicy)

    def __post_init__(self):
        sources = [self.synth is not None, self.dir is not None, self.features is not None]
        if sum(sources) != 1:
            raise ConfigError("dataset needs exactly one of synth, dir+name or features paths")
        if self.dir is not None and not self.name:
            raise ConfigError("dataset.dir needs dataset.name")


@dataclass(frozen=True)
class ModeSpec:
    kind: str = "transductive"
    k: int = 10
    repeats: int = 10

    def __post_init__(self):
        if self.kind not in MODES:
            raise ConfigError(f"unknown mode {self.kind!r}")
        if self.kind == "kfold" and (self.k < 2 or self.repeats < 1):
            raise ConfigError("kfold needs k >= 2 and repeats >= 1")


@dataclass(frozen=True)
class LpSpec:
    k_neighbors: int = 10
    alpha: float = 0.5
    iterations: int = 100


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetSpec
    train: TrainConfig = field(default_factory=TrainConfig)
    mode: ModeSpec = field(default_factory=ModeSpec)
    method: str = "conle"
    lp: LpSpec = field(default_factory=LpSpec)
    seed: int = 0
    canberra_squared: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, data, path: str):
    """Recursively instantiate a (possibly nested) frozen dataclass from plain dicts."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown config key {path + '.' if path else ''}{unknown[0]}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        if sub is not None and value is not None:
            value = _build(sub, value, f"{path}.{name}" if path else name)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


_NESTED = {
    (RunConfig, "dataset"): DatasetSpec,
    (RunConfig, "train"): TrainConfig,
    (RunConfig, "mode"): ModeSpec,
    (RunConfig, "lp"): LpSpec,
    (DatasetSpec, "synth"): SynthSpec,
    (DatasetSpec, "binarization"): BinarizationPolicy,
    (TrainConfig, "conle"): ConleConfig,
}


def config_from_dict(data: dict) -> RunConfig:
    if "dataset" not in data:
        raise ConfigError("config needs a dataset section")
    return _build(RunConfig, data, "")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value`` to a nested dict; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key.path=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        child = node.get(p)
        if child is None:
            child = node[p] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set {key}: {p} is not a section")
        node = child
    node[parts[-1]] = _parse_value(raw)
    return data


def resolve_config(path: str | None, overrides: list[str], seed: int | None = None) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    for o in overrides:
        apply_override(data, o)
    if seed is not None:
        data["seed"] = seed
    cfg = config_from_dict(data)
    # the run seed drives training; the resolved echo shows the value actually used
    return replace(cfg, train=replace(cfg.train, seed=cfg.seed))


def with_conle(cfg: RunConfig, **kw) -> RunConfig:
    return replace(cfg, train=replace(cfg.train, conle=replace(cfg.train.conle, **kw)))


# ---------------------------------------------------------------- running


def load_from_spec(spec: DatasetSpec) -> LeDataset:
    if spec.synth is not None:
        s = spec.synth
        return synth_generate(s.n, s.dim1, s.c, s.seed, s.noise, spec.binarization)
    if spec.dir is not None:
        return load_named(spec.dir, spec.name, spec.scaling, spec.binarization)
    return load_dataset(spec.features, spec.logical, spec.distribution, spec.scaling,
                        spec.binarization, spec.name)


def _derived_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def repeat_seeds(seed: int, repeats: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(repeats)]


def _recover(cfg: RunConfig, ds: LeDataset, train_seed: int, fit: LeDataset | None = None):
    """Recover distributions for ``ds``; ConLE is fitted on ``fit`` (default ``ds``)."""
    if cfg.method == "baseline_softmax":
        return baseline_softmax(ds), None
    if cfg.method == "baseline_lp":
        return baseline_lp(ds, cfg.lp.k_neighbors, cfg.lp.alpha, cfg.lp.iterations), None
    model, report = train(fit if fit is not None else ds, replace(cfg.train, seed=train_seed))
    return recover_all(model, ds), report


def _fold_job(args):
    cfg, ds, repeat, master, fold, train_idx, test_idx = args
    train_seed = _derived_seed(master, fold)
    if cfg.method == "baseline_lp":
        # propagation is inherently transductive: run on the full set, score the held-out rows
        full, _ = _recover(cfg, ds, train_seed)
        rec, report = full[test_idx], None
    else:
        rec, report = _recover(cfg, ds.subset(test_idx), train_seed, fit=ds.subset(train_idx))
    metrics = evaluate(rec, ds.ground_truth[test_idx], canberra_squared=cfg.canberra_squared)
    return {"repeat": repeat, "fold": fold, "seed": train_seed, "test_index": test_idx,
            "recovered": rec, "metrics": metrics, "report": report}


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


@dataclass
class RunResult:
    config: RunConfig
    dataset: LeDataset
    folds: list[dict]
    aggregate: MetricReport
    recovered: np.ndarray
    wall_time: float

    @property
    def train_reports(self):
        return [f["report"] for f in self.folds if f["report"] is not None]

    def record(self) -> dict:
        ds = self.dataset
        return {
            "tool": {"name": "conle", "version": tool_version()},
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "dataset": {"name": ds.name, "n": ds.n, "dim1": ds.dim1, "c": ds.c,
                        "feature_scaling": ds.feature_scaling, "meta": ds.meta},
            "method": self.config.method,
            "mode": self.config.mode.kind,
            "folds": [{"repeat": f["repeat"], "fold": f["fold"], "seed": f["seed"],
                       "metrics": f["metrics"].to_dict()} for f in self.folds],
            "aggregate": self.aggregate.to_dict(),
            "train_reports": [r.to_dict() for r in self.train_reports],
            "wall_time": self.wall_time,
        }


def run_experiment(cfg: RunConfig, workers: int = 1, dataset: LeDataset | None = None) -> RunResult:
    start = time.perf_counter()
    ds = dataset if dataset is not None else load_from_spec(cfg.dataset)
    if ds.ground_truth is None:
        raise DatasetError(f"dataset {ds.name} has no ground-truth distributions to evaluate against")
    if cfg.mode.kind == "transductive":
        rec, report = _recover(cfg, ds, cfg.seed)
        metrics = evaluate(rec, ds.ground_truth, canberra_squared=cfg.canberra_squared)
        folds = [{"repeat": 0, "fold": 0, "seed": cfg.seed, "recovered": rec,
                  "metrics": metrics, "report": report}]
        recovered = rec
    else:
        jobs = []
        for r, master in enumerate(repeat_seeds(cfg.seed, cfg.mode.repeats)):
            plan = split_folds(ds, cfg.mode.k, master)
            for f in range(cfg.mode.k):
                tr, te = plan.train_test(f)
                jobs.append((cfg, ds, r, master, f, tr, te))
        folds = _map(_fold_job, jobs, workers)
        # out-of-fold recovery from the first repeat covers every sample once
        recovered = np.zeros((ds.n, ds.c))
        for f in folds:
            if f["repeat"] == 0:
                recovered[f["test_index"]] = f["recovered"]
    aggregate = mean_report([f["metrics"] for f in folds])
    return RunResult(cfg, ds, folds, aggregate, recovered, time.perf_counter() - start)


def write_run(result: RunResult, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    rec = result.record()
    (out / "record.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    write_matrix(out / "recovered.csv", result.recovered)
    reports = result.train_reports
    if reports:
        reports[0].write_loss_csv(out / "loss_curve.csv")
    return rec


# ---------------------------------------------------------------- tables


def metrics_table(rows: dict[str, dict], title: str = "", digits: int = 3) -> str:
    """One row per method, one column per measure (arrows mark the better direction)."""
    heads = [f"{DISPLAY[m]}{'↓' if LOWER_BETTER[m] else '↑'}" for m in MEASURES]
    first = max(10, *(len(k) + 2 for k in rows))
    width = max(12, *(len(h) + 2 for h in heads))
    lines = [title] if title else []
    lines.append(f"{'':<{first}}" + "".join(f"{h:>{width}}" for h in heads))
    for name, vals in rows.items():
        lines.append(f"{name:<{first}}" + "".join(f"{vals[m]:>{width}.{digits}f}" for m in MEASURES))
    return "\n".join(lines)


def ranks_from_records(records: list[dict]) -> tuple[dict, str]:
    """Average-rank tables for every measure from a list of ExperimentRecords."""
    table: dict[str, dict[str, dict[str, float]]] = {m: {} for m in MEASURES}
    coverage: dict[str, set] = {}
    for r in records:
        method, dname = r["method"], r["dataset"]["name"]
        if dname in coverage.get(method, set()):
            raise ConfigError(f"two records for method {method} on dataset {dname}")
        coverage.setdefault(method, set()).add(dname)
        for m in MEASURES:
            table[m].setdefault(method, {})[dname] = float(r["aggregate"][m])
    sets = {frozenset(s) for s in coverage.values()}
    if len(sets) != 1:
        detail = {k: sorted(v) for k, v in sorted(coverage.items())}
        raise ConfigError(f"records cover different dataset lists: {detail}")
    ranks, blocks = {}, []
    for m in MEASURES:
        rt = average_ranks(table[m], lower_better=LOWER_BETTER[m])
        ranks[m] = rt.to_dict()
        arrow = "↓" if LOWER_BETTER[m] else "↑"
        blocks.append(format_rank_table(rt, f"{DISPLAY[m]}{arrow}"))
    return ranks, "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------- gradcheck


def _tiny_instance(seed: int, config: ConleConfig):
    rng = np.random.default_rng(seed)
    n, dim1, c = int(rng.integers(3, 6)), int(rng.integers(2, 6)), int(rng.integers(3, 6))
    X = rng.normal(size=(n, dim1))
    L = np.zeros((n, c))
    for i in range(n):
        L[i, rng.choice(c, size=int(rng.integers(1, c)), replace=False)] = 1.0
    d2 = int(rng.integers(2, 5))
    cfg = replace(config, dim2=d2, hidden=int(rng.integers(2, 6)))
    model = ConleModel(
        init_mlp([dim1, cfg.hidden, d2], cfg.slope, "linear", rng),
        init_mlp([c, cfg.hidden, d2], cfg.slope, "linear", rng),
        init_mlp([2 * d2, cfg.hidden, c], cfg.slope, "softmax", rng),
    )
    return model, X, L, cfg


def gradcheck(seed: int = 0, instances: int = 20, h: float = 1e-5, bound: float = 1e-4) -> dict:
    """Finite-difference check of every loss term, variant and threshold form."""
    # a wide margin and a steeper leaky slope keep hinges active and kinks far from the probes
    base = ConleConfig(epsilon=0.5, slope=0.1)
    results = []
    for form in THRESHOLD_FORMS:
        for variant in VARIANTS:
            cfg0 = replace(base, variant=variant, threshold_form=form)
            worst = {"total": 0.0, "l_con": 0.0, "l_dis": 0.0, "l_thr": 0.0}
            for i in range(instances):
                model, X, L, cfg = _tiny_instance(_derived_seed(seed, i), cfg0)
                params = [p for net in (model.f1, model.f2, model.f3) for p in net.parameters()]
                full = (1.0 if cfg.uses_contrastive else 0.0, cfg.lambda1,
                        cfg.lambda2 if cfg.uses_threshold else 0.0)
                terms = {"total": full, "l_dis": (0.0, 1.0, 0.0)}
                if cfg.uses_contrastive:
                    terms["l_con"] = (1.0, 0.0, 0.0)
                if cfg.uses_threshold:
                    terms["l_thr"] = (0.0, 0.0, 1.0)
                for term, w in terms.items():
                    _, grads = loss_gradients(model, X, L, cfg, weights=w)
                    err = compare_gradients(params, lambda: weighted_total(model, X, L, cfg, w),
                                            gradients_as_list(grads), h)
                    worst[term] = max(worst[term], err)
            results.append({"variant": variant, "threshold_form": form, "max_error": max(worst.values()),
                            "terms": worst})
    max_err = max(r["max_error"] for r in results)
    return {"seed": seed, "instances": instances, "h": h, "bound": bound, "max_error": max_err,
            "passed": bool(max_err < bound), "checks": results}


# ---------------------------------------------------------------- commands


def _out_dir(args) -> Path:
    return Path(args.out)


def cmd_train(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    result = run_experiment(cfg, args.workers)
    write_run(result, _out_dir(args))
    agg = result.aggregate.values()
    print(metrics_table({cfg.method: agg}, f"{result.dataset.name} ({cfg.mode.kind})", 4))
    return EXIT_OK


def _ablation_jobs(cfg: RunConfig):
    return [(v, with_conle(cfg, variant=v)) for v in VARIANTS]


def _run_job(item):
    label, cfg, workers = item
    return label, run_experiment(cfg, workers)


def run_many(items: list[tuple[str, RunConfig]], workers: int) -> list[tuple[str, RunResult]]:
    # parallelise across runs when there are several; otherwise hand the budget to the folds
    if workers > 1 and len(items) > 1:
        return _map(_run_job, [(label, cfg, 1) for label, cfg in items], workers)
    return [_run_job((label, cfg, workers)) for label, cfg in items]


ABLATION_NAMES = {"full": "ConLE", "ablation_h": "ConLE_h", "ablation_l": "ConLE_l"}


def cmd_ablate(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    if cfg.method != "conle":
        raise ConfigError("ablate needs method conle")
    out = _out_dir(args)
    results = run_many(_ablation_jobs(cfg), args.workers)
    rows = {}
    summary = {}
    for variant, res in results:
        write_run(res, out / variant)
        rows[ABLATION_NAMES[variant]] = res.aggregate.values()
        summary[variant] = res.aggregate.to_dict()
    name = results[0][1].dataset.name
    text = metrics_table(rows, f"Ablation on {name} ({cfg.mode.kind})") + "\n"
    (out / "table.txt").write_text(text)
    (out / "ablation.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(text, end="")
    return EXIT_OK


def sweep_results(cfg: RunConfig, param: str, values: list[float], workers: int = 1):
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    if not values or any(v <= 0 for v in values):
        raise ConfigError("sweep values must be a non-empty list of positive numbers")
    items = [(f"{param}={v:g}", with_conle(cfg, **{param: float(v)})) for v in values]
    return run_many(items, workers)


def cmd_sweep(args) -> int:
    cfg = resolve_config(args.config, args.set, args.seed)
    values = [float(v) for v in args.values.split(",")] if args.values else list(SWEEP_GRID)
    out = _out_dir(args)
    results = sweep_results(cfg, args.param, values, args.workers)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([args.param, *MEASURES])
        for v, (label, res) in zip(values, results):
            write_run(res, out / label)
            w.writerow([repr(v), *(repr(getattr(res.aggregate, m)) for m in MEASURES)])
    rows = {label: res.aggregate.values() for label, res in results}
    print(metrics_table(rows, f"Sweep of {args.param}", 4))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = 0 if args.seed is None else args.seed
    rep = gradcheck(seed, args.instances)
    for r in rep["checks"]:
        terms = " ".join(f"{k}={v:.2e}" for k, v in r["terms"].items())
        status = "ok" if r["max_error"] < rep["bound"] else "FAIL"
        print(f"{r['variant']:<11} {r['threshold_form']:<16} max={r['max_error']:.2e} {status}  [{terms}]")
    print(f"gradcheck {'PASS' if rep['passed'] else 'FAIL'}: max relative error "
          f"{rep['max_error']:.3e} (bound {rep['bound']:g}, {rep['instances']} instances per case)")
    if args.out:
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gradcheck.json").write_text(json.dumps(rep, indent=2) + "\n")
    return EXIT_OK if rep["passed"] else EXIT_GRADCHECK


def cmd_synth(args) -> int:
    seed = 7 if args.seed is None else args.seed
    policy = BinarizationPolicy(args.binarize, args.binarize_param)
    ds = synth_generate(args.n, args.dim1, args.c, seed, args.noise, policy, args.name)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / f"{ds.name}_features.csv", ds.features)
    write_matrix(out / f"{ds.name}_logical.csv", ds.logical)
    write_matrix(out / f"{ds.name}_distribution.csv", ds.ground_truth)
    print(f"wrote {ds.name}: n={ds.n} dim1={ds.dim1} c={ds.c} to {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    records = []
    for p in args.records:
        path = Path(p)
        if path.is_dir():
            path = path / "record.json"
        try:
            records.append(json.loads(path.read_text()))
        except OSError as exc:
            raise OSError(f"cannot read record {path}: {exc}") from None
    if not records:
        raise ConfigError("report needs at least one record")
    ranks, text = ranks_from_records(records)
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ranks.json").write_text(json.dumps(ranks, indent=2, sort_keys=True) + "\n")
    (out / "table.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="run seed (overrides config)")
    common.add_argument("--workers", type=int, default=1, help="parallel runs (default: 1)")
    common.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE",
                        help="override a config value, e.g. train.lr=0.001 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="conle", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train and evaluate one method").set_defaults(fn=cmd_train)
    sub.add_parser("ablate", parents=[common], help="full model against both ablations").set_defaults(
        fn=cmd_ablate)
    sp = sub.add_parser("sweep", parents=[common], help="sensitivity sweep over lambda1 or lambda2")
    sp.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    sp.add_argument("--values", help="comma-separated values (default: 0.1,0.3,0.5,0.8,1,5,10)")
    sp.set_defaults(fn=cmd_sweep)
    gp = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    gp.add_argument("--instances", type=int, default=20)
    gp.set_defaults(fn=cmd_gradcheck, out=None)
    yp = sub.add_parser("synth", parents=[common], help="write a synthetic dataset as CSV files")
    yp.add_argument("--n", type=int, default=500)
    yp.add_argument("--dim1", type=int, default=20)
    yp.add_argument("--c", type=int, default=5)
    yp.add_argument("--noise", type=float, default=0.1)
    yp.add_argument("--name")
    yp.add_argument("--binarize", default="threshold_over_uniform")
    yp.add_argument("--binarize-param", type=float, default=1.0)
    yp.set_defaults(fn=cmd_synth)
    rp = sub.add_parser("report", parents=[common], help="average-rank tables over saved records")
    rp.add_argument("records", nargs="+", help="record.json files or run directories")
    rp.set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDiverged as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, DatasetError) as exc:
        print(f"input/output error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

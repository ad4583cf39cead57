"""Experiment runner: configuration schema, restart protocol, reports.

Reports are JSON (deterministic: sorted keys, reproducible seed ledger) and
traces/sweeps are CSV; nothing is plotted here. Exit codes: 0 success,
2 configuration error, 3 data error, 4 solver failure.
"""
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import click
import numpy as np

from . import __version__
from .data import (DatasetSpec, SyntheticConfig, fit_standardizer,
                   generate_synthetic, load_dataset, train_test_split,
                   uci_dataset_spec, verify_datasets)
from .errors import (ConfigError, DataValidationError, DatasetParseError,
                     SolverError)
from .graph import gaussian_affinity, laplacian
from .metrics import accuracy, nmi, purity
from .solver import (SolverOptions, dogc_fit, dogcos_fit, kmeans,
                     predict_out_of_sample)
from .updates import smallest_eigvecs

METHODS = ("dogc", "dogcos", "dogc1", "dogc2", "kmeans", "spectral")
SELECTIONS = ("best_acc", "best_objective")
SWEEPABLE = ("alpha", "beta", "gamma", "p", "k")

_DATASET_KEYS_FILE = {"name", "path", "label_column", "delimiter",
                      "normalize", "root", "expected_n", "expected_d",
                      "expected_c"}
_DATASET_KEYS_SYNTH = {"kind", "n", "noise", "separation", "seed"}
_SPLIT_KEYS = {"ratio", "seed"}
_CONFIG_KEYS = {"dataset", "method", "c", "k", "m", "alpha", "beta", "gamma",
                "p", "restarts", "selection", "seed", "split", "normalize",
                "output_dir", "workers", "max_sweeps", "tol"}


@dataclass
class ExperimentConfig:
    """Validated experiment description; round-trips through dicts/JSON."""

    dataset: object
    method: str
    c: int = None
    k: int = None
    m: int = None
    alpha: float = 1e-2
    beta: float = 1e-2
    gamma: float = 0.1
    p: float = 1.25
    restarts: int = 10
    selection: str = "best_acc"
    seed: int = 0
    split: dict = None
    normalize: str = None
    output_dir: str = None
    workers: int = 1
    max_sweeps: int = 50
    tol: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, "
                              f"got {self.method!r}")
        if self.selection not in SELECTIONS:
            raise ConfigError(f"selection must be one of {SELECTIONS}")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.split is not None:
            unknown = set(self.split) - _SPLIT_KEYS
            if unknown:
                raise ConfigError(f"unknown split keys {sorted(unknown)}")
            ratio = self.split.get("ratio", 0.5)
            if not 0 < ratio < 1:
                raise ConfigError("split ratio must lie in (0, 1)")

    @classmethod
    def from_dict(cls, raw):
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        if "dataset" not in raw or "method" not in raw:
            raise ConfigError("config requires 'dataset' and 'method'")
        dataset = _parse_dataset(raw["dataset"])
        kwargs = {k: v for k, v in raw.items() if k != "dataset"}
        try:
            return cls(dataset=dataset, **kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self):
        out = asdict(self)
        out["dataset"] = _dataset_to_dict(self.dataset)
        return out


def _parse_dataset(raw):
    if isinstance(raw, (DatasetSpec, SyntheticConfig)):
        return raw
    if not isinstance(raw, dict):
        raise ConfigError("dataset must be a mapping")
    if "kind" in raw:
        unknown = set(raw) - _DATASET_KEYS_SYNTH
        if unknown:
            raise ConfigError(f"unknown synthetic dataset keys {sorted(unknown)}")
        try:
            return SyntheticConfig(**raw)
        except (TypeError, DataValidationError) as exc:
            raise ConfigError(str(exc)) from exc
    unknown = set(raw) - _DATASET_KEYS_FILE
    if unknown:
        raise ConfigError(f"unknown dataset keys {sorted(unknown)}")
    if "path" in raw:
        kwargs = {k: v for k, v in raw.items() if k != "root"}
        kwargs.setdefault("name", os.path.basename(raw["path"]))
        try:
            return DatasetSpec(**kwargs)
        except (TypeError, DataValidationError) as exc:
            raise ConfigError(str(exc)) from exc
    if "name" in raw:
        extra = set(raw) - {"name", "root", "normalize"}
        if extra:
            raise ConfigError(f"registry datasets only accept 'root' and "
                              f"'normalize' overrides, got {sorted(extra)}")
        return uci_dataset_spec(raw["name"], root=raw.get("root"),
                                normalize=raw.get("normalize", "zscore"))
    raise ConfigError("dataset needs 'kind', 'path', or 'name'")


def _dataset_to_dict(ds):
    if isinstance(ds, SyntheticConfig):
        return {k: v for k, v in asdict(ds).items() if v is not None}
    out = {k: v for k, v in asdict(ds).items() if v is not None}
    return out


def _load_features(config):
    ds = config.dataset
    if isinstance(ds, SyntheticConfig):
        fm = generate_synthetic(ds)
        mode = config.normalize or "none"
    else:
        fm = load_dataset(ds)
        mode = config.normalize or ds.normalize
    return fm, mode


def _restart_payload(config, data, c, seed):
    return {"data": data, "c": c, "method": config.method, "k": config.k,
            "m": config.m, "alpha": config.alpha, "beta": config.beta,
            "gamma": config.gamma, "p": config.p, "seed": seed,
            "max_sweeps": config.max_sweeps, "tol": config.tol}


def _run_restart(payload):
    """Execute one seeded restart; safe to run in a worker process.

    Failures are captured per restart so a single bad seed cannot take the
    whole protocol down.
    """
    try:
        return _run_restart_inner(payload)
    except Exception as exc:  # noqa: BLE001 - reported in the run record
        return {"seed": payload["seed"], "error": f"{type(exc).__name__}: {exc}"}


def _run_restart_inner(payload):
    data = payload["data"]
    c = payload["c"]
    method = payload["method"]
    seed = payload["seed"]
    start = time.perf_counter()
    opts = SolverOptions(max_sweeps=payload["max_sweeps"],
                         tol=payload["tol"], seed=seed)
    out = {"seed": seed, "trace": [], "sweeps": 0, "converged": True,
           "predictor": None}
    if method == "kmeans":
        labels, inertia = kmeans(data, c, restarts=1, seed=seed,
                                 return_inertia=True)
        out.update(labels=labels, objective=inertia)
    elif method == "spectral":
        affinity = gaussian_affinity(data)
        emb = smallest_eigvecs(laplacian(affinity).laplacian, c)
        labels, inertia = kmeans(emb.T, c, restarts=1, seed=seed,
                                 return_inertia=True)
        out.update(labels=labels, objective=inertia)
    else:
        if method == "dogc1":
            opts = SolverOptions(max_sweeps=opts.max_sweeps, tol=opts.tol,
                                 seed=seed, relax_labels=True)
        elif method == "dogc2":
            opts = SolverOptions(max_sweeps=opts.max_sweeps, tol=opts.tol,
                                 seed=seed, fixed_graph=True)
        if method == "dogcos":
            res = dogcos_fit(data, c, k=payload["k"], alpha=payload["alpha"],
                             beta=payload["beta"], gamma=payload["gamma"],
                             p=payload["p"], m=payload["m"], options=opts)
            out["predictor"] = res.state.P
        else:
            res = dogc_fit(data, c, k=payload["k"], alpha=payload["alpha"],
                           m=payload["m"], options=opts)
        out.update(labels=res.labels,
                   objective=(res.state.objective_trace[-1]
                              if res.state.objective_trace else float("nan")),
                   trace=list(res.state.objective_trace),
                   sweeps=res.sweeps, converged=res.converged)
    out["wall_time"] = time.perf_counter() - start
    return out


def _execute_restarts(config, data, c):
    payloads = [_restart_payload(config, data, c, config.seed + r)
                for r in range(config.restarts)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_run_restart, payloads))
    return [_run_restart(p) for p in payloads]


def _select(records, selection):
    if selection == "best_acc":
        scores = [r.get("acc", -np.inf) if "error" not in r else -np.inf
                  for r in records]
        return int(np.argmax(scores))
    finals = [r["objective"] if "error" not in r and r.get("objective")
              is not None else np.inf for r in records]
    return int(np.argmin(finals))


@dataclass
class RunReport:
    """Everything needed to reconstruct and compare a run."""

    config: dict
    library_version: str
    seeds: list
    restarts: list
    selected_index: int
    selected: dict
    wall_time_total: float
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"config": self.config, "library_version": self.library_version,
               "seeds": self.seeds, "restarts": self.restarts,
               "selected_index": self.selected_index, "selected": self.selected,
               "wall_time_total": self.wall_time_total}
        out.update(self.extras)
        return out

    def write(self, output_dir):
        os.makedirs(output_dir, exist_ok=True)
        report_path = os.path.join(output_dir, "report.json")
        with open(report_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        trace_path = os.path.join(output_dir, "traces.csv")
        with open(trace_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["restart", "sweep", "objective"])
            for i, rec in enumerate(self.restarts):
                for t, val in enumerate(rec.get("trace") or [], start=1):
                    writer.writerow([i, t, repr(float(val))])
        return report_path


def _metric_record(rec, truth):
    if "error" in rec:
        return {"seed": rec["seed"], "error": rec["error"]}
    entry = {"seed": rec["seed"], "objective": rec["objective"],
             "sweeps": rec["sweeps"], "converged": rec["converged"],
             "wall_time": rec["wall_time"], "trace": rec["trace"]}
    if truth is not None:
        entry["acc"] = accuracy(rec["labels"], truth)
        entry["nmi"] = nmi(rec["labels"], truth)
        entry["purity"] = purity(rec["labels"], truth)
    return entry


def run_experiment(config):
    """Run the restart protocol for one configuration and assemble a report."""
    started = time.perf_counter()
    fm, mode = _load_features(config)
    fm = fit_standardizer(fm, mode).apply(fm)
    truth = fm.labels
    c = config.c or fm.n_classes
    if c is None:
        raise ConfigError("no labels in the data; set 'c' explicitly")
    if config.selection == "best_acc" and truth is None:
        raise ConfigError("selection 'best_acc' requires ground-truth labels")

    raw = _execute_restarts(config, fm.data, c)
    failures = [r for r in raw if "error" in r]
    if len(failures) == len(raw):
        raise SolverError("every restart failed: " + failures[0]["error"])
    records = [_metric_record(r, truth) for r in raw]
    best = _select(records, config.selection)

    report = RunReport(
        config=config.to_dict(), library_version=__version__,
        seeds=[r["seed"] for r in records], restarts=records,
        selected_index=best, selected=dict(records[best]),
        wall_time_total=time.perf_counter() - started)
    if config.output_dir:
        report.write(config.output_dir)
    return report


def run_out_of_sample(config):
    """Fit on a stratified split, then label the held-out part with the
    trained predictor; reports train and test accuracy separately."""
    if config.method != "dogcos":
        raise ConfigError("out-of-sample runs require method 'dogcos'")
    if config.split is None:
        raise ConfigError("out-of-sample runs require a 'split' section")
    started = time.perf_counter()
    fm, mode = _load_features(config)
    if fm.labels is None:
        raise ConfigError("out-of-sample evaluation requires labels")
    split = train_test_split(fm, config.split.get("ratio", 0.5),
                             config.split.get("seed", 0))
    scaler = fit_standardizer(split.train, mode)
    train = scaler.apply(split.train)
    test = scaler.apply(split.test)
    c = config.c or fm.n_classes

    raw = _execute_restarts(config, train.data, c)
    if all("error" in r for r in raw):
        raise SolverError("every restart failed: " + raw[0]["error"])
    records = []
    for rec in raw:
        entry = _metric_record(rec, train.labels)
        if "error" not in entry:
            entry["train_acc"] = entry.pop("acc")
            entry["train_nmi"] = entry.pop("nmi")
            entry["train_purity"] = entry.pop("purity")
            test_labels = predict_out_of_sample(rec["predictor"], test.data)
            entry["test_acc"] = accuracy(test_labels, test.labels)
            entry["test_nmi"] = nmi(test_labels, test.labels)
        records.append(entry)
    if config.selection == "best_acc":
        best = int(np.argmax([r.get("train_acc", -np.inf) for r in records]))
    else:
        best = int(np.argmin([r["objective"] if "error" not in r else np.inf
                              for r in records]))

    report = RunReport(
        config=config.to_dict(), library_version=__version__,
        seeds=[r["seed"] for r in records], restarts=records,
        selected_index=best, selected=dict(records[best]),
        wall_time_total=time.perf_counter() - started,
        extras={"split": {"ratio": config.split.get("ratio", 0.5),
                          "seed": config.split.get("seed", 0),
                          "train_size": int(split.train.n),
                          "test_size": int(split.test.n)}})
    if config.output_dir:
        report.write(config.output_dir)
    return report


def emit_sweep(config, param, values):
    """Re-run the experiment across one hyperparameter axis.

    Returns plot-ready ``(value, acc, nmi)`` rows and writes ``sweep.csv``
    when an output directory is configured.
    """
    if param not in SWEEPABLE:
        raise ConfigError(f"sweep parameter must be one of {SWEEPABLE}")
    rows = []
    for value in values:
        raw = config.to_dict()
        raw[param] = int(value) if param == "k" else float(value)
        raw["output_dir"] = None
        sub = ExperimentConfig.from_dict(raw)
        report = run_experiment(sub)
        sel = report.selected
        rows.append((raw[param], sel.get("acc"), sel.get("nmi")))
    if config.output_dir:
        os.makedirs(config.output_dir, exist_ok=True)
        path = os.path.join(config.output_dir, "sweep.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([param, "acc", "nmi"])
            for value, acc_v, nmi_v in rows:
                writer.writerow([value, acc_v, nmi_v])
    return rows


def _config_from_sources(config_path, overrides, defaults=None):
    raw = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    for key, value in (defaults or {}).items():
        raw.setdefault(key, value)
    return ExperimentConfig.from_dict(raw)


def _dataset_overrides(dataset, synthetic, data_root, n, noise, separation,
                       dataset_seed):
    if dataset and synthetic:
        raise ConfigError("give either --dataset or --synthetic, not both")
    if synthetic:
        ds = {"kind": synthetic}
        if n is not None:
            ds["n"] = n
        if noise is not None:
            ds["noise"] = noise
        if separation is not None:
            ds["separation"] = separation
        if dataset_seed is not None:
            ds["seed"] = dataset_seed
        return ds
    if dataset:
        if os.sep in dataset or dataset.endswith(".csv"):
            return {"path": dataset, "label_column": "label"}
        ds = {"name": dataset}
        if data_root:
            ds["root"] = data_root
        return ds
    return None


_COMMON = [
    click.option("--config", "config_path", type=click.Path(), default=None,
                 help="JSON file holding the full experiment schema."),
    click.option("--dataset", default=None,
                 help="Registry dataset name or a CSV path."),
    click.option("--synthetic", default=None,
                 type=click.Choice(["two_moon", "two_gaussian",
                                    "multi_cluster_36"])),
    click.option("--data-root", default=None, help="Canonical CSV directory."),
    click.option("--n", type=int, default=None, help="Synthetic sample count."),
    click.option("--noise", type=float, default=None),
    click.option("--separation", type=float, default=None),
    click.option("--dataset-seed", type=int, default=None),
    click.option("--method", type=click.Choice(METHODS), default=None),
    click.option("--c", type=int, default=None),
    click.option("--k", type=int, default=None),
    click.option("--m", type=int, default=None),
    click.option("--alpha", type=float, default=None),
    click.option("--beta", type=float, default=None),
    click.option("--gamma", type=float, default=None),
    click.option("--p", type=float, default=None),
    click.option("--restarts", type=int, default=None),
    click.option("--selection", type=click.Choice(SELECTIONS), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--normalize", type=click.Choice(["none", "zscore", "minmax"]),
                 default=None),
    click.option("--output-dir", default=None),
    click.option("--workers", type=int, default=None),
    click.option("--max-sweeps", type=int, default=None),
    click.option("--tol", type=float, default=None),
]


def _with_common(fn):
    for opt in reversed(_COMMON):
        fn = opt(fn)
    return fn


def _build_config(config_path, dataset, synthetic, data_root, n, noise,
                  separation, dataset_seed, defaults=None, **overrides):
    ds = _dataset_overrides(dataset, synthetic, data_root, n, noise,
                            separation, dataset_seed)
    if ds is not None:
        overrides["dataset"] = ds
    return _config_from_sources(config_path, overrides, defaults)


@click.group()
def cli():
    """Graph-clustering benchmark runner."""


@cli.command()
@_with_common
def cluster(config_path, dataset, synthetic, data_root, n, noise, separation,
            dataset_seed, **overrides):
    """Run the restart protocol and report the selected clustering."""
    config = _build_config(config_path, dataset, synthetic, data_root, n,
                           noise, separation, dataset_seed, **overrides)
    report = run_experiment(config)
    sel = report.selected
    click.echo(json.dumps({k: sel.get(k) for k in
                           ("acc", "nmi", "purity", "objective", "sweeps")},
                          sort_keys=True))
    if config.output_dir:
        click.echo(f"report written to {config.output_dir}/report.json")


@cli.command()
@_with_common
@click.option("--split-ratio", type=float, default=0.5)
@click.option("--split-seed", type=int, default=0)
def oos(config_path, dataset, synthetic, data_root, n, noise, separation,
        dataset_seed, split_ratio, split_seed, **overrides):
    """Train on a stratified split and label the held-out samples."""
    defaults = {"split": {"ratio": split_ratio, "seed": split_seed},
                "method": "dogcos"}
    config = _build_config(config_path, dataset, synthetic, data_root, n,
                           noise, separation, dataset_seed, defaults=defaults,
                           **overrides)
    report = run_out_of_sample(config)
    sel = report.selected
    click.echo(json.dumps({"train_acc": sel["train_acc"],
                           "test_acc": sel["test_acc"]}, sort_keys=True))
    if config.output_dir:
        click.echo(f"report written to {config.output_dir}/report.json")


@cli.command()
@_with_common
@click.option("--param", type=click.Choice(SWEEPABLE), required=True)
@click.option("--values", required=True,
              help="Comma-separated list of parameter values.")
def sweep(config_path, dataset, synthetic, data_root, n, noise, separation,
          dataset_seed, param, values, **overrides):
    """Sweep one hyperparameter and emit a (value, ACC, NMI) table."""
    config = _build_config(config_path, dataset, synthetic, data_root, n,
                           noise, separation, dataset_seed, **overrides)
    try:
        parsed = [float(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --values list: {exc}") from exc
    rows = emit_sweep(config, param, parsed)
    for value, acc_v, nmi_v in rows:
        click.echo(f"{value},{acc_v},{nmi_v}")


@cli.group()
def datasets():
    """Canonical dataset utilities."""


@datasets.command()
@click.option("--data-root", default=None)
def verify(data_root):
    """Checksum and size-check the canonical benchmark CSVs."""
    report = verify_datasets(data_root)
    bad = False
    for name, status in report:
        click.echo(f"{name:10s} {status}")
        if status in ("missing", "checksum-mismatch", "size-mismatch"):
            bad = True
    if bad:
        raise DataValidationError("one or more canonical datasets failed "
                                  "verification")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except (DatasetParseError, DataValidationError) as exc:
        click.echo(f"data error: {exc}", err=True)
        sys.exit(3)
    except (SolverError, np.linalg.LinAlgError) as exc:
        click.echo(f"solver error: {exc}", err=True)
        sys.exit(4)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(1)
    return 0


if __name__ == "__main__":
    main()

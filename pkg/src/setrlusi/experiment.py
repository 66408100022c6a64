"""Experiment orchestration: multi-trial runs, baselines, result files,
hyperparameter grids, and the scaling/backend benchmarks."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _backend, _kernels_py
from .datasets import (
    CsvSchema,
    DomainDataset,
    SyntheticSpec,
    TransferTask,
    gen_synthetic_domains,
    load_csv_dataset,
    minmax_scale_task,
    split_labeled_target,
    twelve_domain_spec,
)
from .ensemble import TrainConfig, ensemble_predict, train_setrlusi
from .linalg import KernelConfig
from .predicates import PoolConfig, build_predicate_pool
from .weak_learner import HyperParams, fit_weak_learner, predict_proba

METHOD_SETRLUSI = "setrlusi"
METHOD_SINGLE_ONES = "single_lusi_ones"
METHOD_NO_SI = "setrlusi_no_si"
ALL_METHODS = (METHOD_SETRLUSI, METHOD_SINGLE_ONES, METHOD_NO_SI)

RECORD_FIELDS = (
    "task",
    "method",
    "trial",
    "seed",
    "accuracy",
    "wall_time_seconds",
    "h_index",
    "test_error",
)

# spawn-key slots under one trial seed
_KEY_SPLIT = 0
_KEY_POOL = 1
_KEY_METHOD_BASE = 10
_KEY_GRID = 999_981


class ConfigError(ValueError):
    """The experiment configuration is missing or malformed."""


def derive_seed(root: int, *key: int) -> int:
    """Stable 64-bit child seed for a spawn-key path under a root seed."""
    ss = np.random.SeedSequence(entropy=root, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class TaskConfig:
    name: str
    split_fraction: float
    seed: int
    source_csvs: tuple[str, ...] = ()
    target_csv: str | None = None
    label_column: str | None = None
    feature_columns: tuple[str, ...] | None = None
    synthetic: SyntheticSpec | None = None
    target_domain: int = 0
    source_domains: tuple[int, ...] = ()


@dataclass(frozen=True)
class ModelConfig:
    tau: float | tuple[float, ...] = 0.5
    gamma: float | tuple[float, ...] = 0.5
    lam: float = 0.01
    H: int = 100
    kernel: str = "rbf"
    sigma: float = 1.0
    sigma_rule: str = "median_heuristic"
    regularizer_mode: str = "identity"
    scaling: str = "minmax"
    pool: PoolConfig = PoolConfig()
    refit_max_epochs: int = 200


@dataclass(frozen=True)
class RunConfig:
    trials: int = 10
    workers: int = 1
    output: str = "results"
    format: str = "json_lines"
    record_timing: bool = True
    methods: tuple[str, ...] = ALL_METHODS
    master_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    task: TaskConfig
    model: ModelConfig
    run: RunConfig


@dataclass
class TrialRecord:
    """One (task, method, trial) outcome; trial -1 marks an aggregate."""

    task: str
    method: str
    trial: int
    seed: int
    accuracy: float
    wall_time_seconds: float
    h_index: list[int] = field(default_factory=list)
    test_error: list[float] = field(default_factory=list)


@dataclass
class ExperimentResult:
    """Aggregate over trials for one (task, method) pair."""

    task_name: str
    method_name: str
    trials: int
    accuracy_mean: float
    accuracy_std: float
    wall_time_seconds: float
    trace: list[list[float]]
    config_snapshot: dict
    master_seed: int
    records: list[TrialRecord] = field(default_factory=list)


def load_config(path) -> ExperimentConfig:
    """Parse a TOML experiment config with [task], [model], [experiment]."""
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}")
    return parse_config(raw, base_dir=path.parent)


def parse_config(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    base_dir = base_dir or Path(".")
    for section in ("task", "model", "experiment"):
        if section not in raw:
            raise ConfigError(f"missing [{section}] section")
    t, m, e = raw["task"], raw["model"], raw["experiment"]

    synthetic = None
    target_domain = 0
    source_domains: tuple[int, ...] = ()
    synthetic_table = t.get("synthetic_spec", t.get("synthetic"))
    if synthetic_table is not None:
        s = dict(synthetic_table)
        preset = s.pop("preset", None)
        target_domain = int(s.pop("target_domain", 0))
        source_domains = tuple(int(v) for v in s.pop("source_domains", ()))
        if preset == "twelve_grid" or not s.get("rotation_angles"):
            synthetic = twelve_domain_spec(
                n_per_domain=int(s.get("n_per_domain", 200)),
                seed=int(t.get("seed", 0)),
                class_offset=float(s.get("class_offset", 2.0)),
                base_std=float(s.get("base_std", 0.6)),
            )
        else:
            synthetic = SyntheticSpec(
                n_domains=int(s["n_domains"]),
                rotation_angles=tuple(float(v) for v in s["rotation_angles"]),
                centers=tuple(tuple(float(x) for x in c) for c in s["centers"]),
                compactness=tuple(float(v) for v in s["compactness"]),
                n_per_domain=int(s.get("n_per_domain", 200)),
                seed=int(t.get("seed", 0)),
                class_offset=float(s.get("class_offset", 2.0)),
                base_std=float(s.get("base_std", 0.6)),
            )
        if not source_domains:
            source_domains = tuple(
                i for i in range(synthetic.n_domains) if i != target_domain
            )
    elif "source_csvs" not in t or "target_csv" not in t:
        raise ConfigError("[task] needs source_csvs + target_csv or a synthetic table")

    try:
        task_cfg = TaskConfig(
            name=str(t.get("name", "task")),
            split_fraction=float(t.get("split_fraction", 0.10)),
            seed=int(t.get("seed", 0)),
            source_csvs=tuple(
                str(base_dir / p) for p in t.get("source_csvs", ())
            ),
            target_csv=(
                str(base_dir / t["target_csv"]) if "target_csv" in t else None
            ),
            label_column=t.get("label_column"),
            feature_columns=(
                tuple(t["feature_columns"]) if "feature_columns" in t else None
            ),
            synthetic=synthetic,
            target_domain=target_domain,
            source_domains=source_domains,
        )

        def scalar_or_grid(value):
            if isinstance(value, (list, tuple)):
                return tuple(float(v) for v in value)
            return float(value)

        pool_kwargs = {}
        for key in ("fs_reg_grid", "gs_reg_grid", "kernel_sigma_grid"):
            if key in m:
                pool_kwargs[key] = tuple(float(v) for v in m[key])
        if "svm_max_epochs" in m:
            pool_kwargs["svm_max_epochs"] = int(m["svm_max_epochs"])

        model_cfg = ModelConfig(
            tau=scalar_or_grid(m.get("tau", 0.5)),
            gamma=scalar_or_grid(m.get("gamma", 0.5)),
            lam=float(m.get("lambda", 0.01)),
            H=int(m.get("H", 100)),
            kernel=str(m.get("kernel", "rbf")),
            sigma=float(m.get("sigma", 1.0)),
            sigma_rule=str(m.get("sigma_rule", "median_heuristic")),
            regularizer_mode=str(m.get("regularizer_mode", "identity")),
            scaling=str(m.get("scaling", "minmax")),
            pool=PoolConfig(**pool_kwargs),
            refit_max_epochs=int(m.get("refit_max_epochs", 200)),
        )
        methods = tuple(e.get("methods", ALL_METHODS))
        unknown = [x for x in methods if x not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods: {unknown}")
        run_cfg = RunConfig(
            trials=int(e.get("trials", 10)),
            workers=int(e.get("workers", 1)),
            output=str(e.get("output", "results")),
            format=str(e.get("format", "json_lines")),
            record_timing=bool(e.get("record_timing", True)),
            methods=methods,
            master_seed=int(e.get("seed", t.get("seed", 0))),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad configuration value: {exc}")

    if model_cfg.scaling not in ("minmax", "none"):
        raise ConfigError(f"unknown scaling mode: {model_cfg.scaling!r}")
    if run_cfg.format not in ("json_lines", "csv"):
        raise ConfigError(f"unknown output format: {run_cfg.format!r}")
    if run_cfg.trials < 1 or run_cfg.workers < 1:
        raise ConfigError("trials and workers must be >= 1")
    return ExperimentConfig(task=task_cfg, model=model_cfg, run=run_cfg)


def _load_domains(cfg: TaskConfig) -> tuple[list[DomainDataset], DomainDataset]:
    if cfg.synthetic is not None:
        domains = gen_synthetic_domains(cfg.synthetic)
        target = domains[cfg.target_domain]
        sources = [domains[i] for i in cfg.source_domains]
        return sources, target
    schema = CsvSchema(
        label_column=cfg.label_column, feature_columns=cfg.feature_columns
    )
    sources = [load_csv_dataset(p, schema) for p in cfg.source_csvs]
    target = load_csv_dataset(cfg.target_csv, schema)
    return sources, target


def _hyperparams(model: ModelConfig, tau: float) -> HyperParams:
    kernel = KernelConfig(
        kind=model.kernel, sigma=model.sigma, sigma_rule=model.sigma_rule
    )
    return HyperParams(
        tau=tau, lam=model.lam, kernel=kernel, regularizer_mode=model.regularizer_mode
    )


def _build_task(
    sources: list[DomainDataset],
    target: DomainDataset,
    fraction: float,
    split_seed: int,
    scaling: str,
) -> TransferTask:
    train, test = split_labeled_target(target, fraction, split_seed)
    task = TransferTask(sources=sources, target_train=train, target_test=test)
    if scaling == "minmax":
        task = minmax_scale_task(task)
    return task


def _run_method(
    method: str,
    task: TransferTask,
    model: ModelConfig,
    tau: float,
    gamma: float,
    pool_seed: int,
    train_seed: int,
) -> tuple[float, list[int], list[float]]:
    """Train one method on a prepared task; returns (accuracy, h, errors)."""
    test_y = task.target_test.labels
    if method == METHOD_SINGLE_ONES:
        params = _hyperparams(model, tau if tau > 0 else 0.5)
        learner = fit_weak_learner(
            task.target_train.features,
            task.target_train.labels,
            np.ones(task.target_train.n),
            params,
        )
        proba = predict_proba(learner, task.target_test.features)
        accuracy = float(np.mean((proba >= 0.5) == (test_y == 1)))
        return accuracy, [1], [1.0 - accuracy]

    method_tau = 0.0 if method == METHOD_NO_SI else tau
    params = _hyperparams(model, method_tau)
    pool = build_predicate_pool(task, model.pool, seed=pool_seed)
    config = TrainConfig(
        gamma=gamma,
        params=params,
        master_seed=train_seed,
        H=model.H,
        refit_max_epochs=model.refit_max_epochs,
    )
    ens, trace = train_setrlusi(task, pool, config)
    _, classes = ensemble_predict(ens, task.target_test.features)
    accuracy = float(np.mean(classes == test_y))
    return accuracy, trace.h_index, trace.test_error


def _run_trial(args) -> list[TrialRecord]:
    (config, sources, target, trial, tau, gamma) = args
    trial_seed = derive_seed(config.run.master_seed, trial)
    task = _build_task(
        sources,
        target,
        config.task.split_fraction,
        derive_seed(trial_seed, _KEY_SPLIT),
        config.model.scaling,
    )
    pool_seed = derive_seed(trial_seed, _KEY_POOL)
    records = []
    for m_idx, method in enumerate(config.run.methods):
        train_seed = derive_seed(trial_seed, _KEY_METHOD_BASE + m_idx)
        start = time.perf_counter()
        accuracy, h_index, test_error = _run_method(
            method, task, config.model, tau, gamma, pool_seed, train_seed
        )
        elapsed = time.perf_counter() - start
        records.append(
            TrialRecord(
                task=config.task.name,
                method=method,
                trial=trial,
                seed=trial_seed,
                accuracy=accuracy,
                wall_time_seconds=elapsed if config.run.record_timing else 0.0,
                h_index=list(h_index),
                test_error=[float(v) for v in test_error],
            )
        )
    return records


def select_hyperparams(
    config: ExperimentConfig,
    sources: list[DomainDataset],
    target: DomainDataset,
) -> tuple[float, float]:
    """Pick (tau, gamma) from the configured grids.

    Each combination trains once under a fixed inner seed and is scored
    by accuracy on the full labeled target training set; ties keep the
    earlier combination.
    """
    taus = config.model.tau if isinstance(config.model.tau, tuple) else (config.model.tau,)
    gammas = (
        config.model.gamma
        if isinstance(config.model.gamma, tuple)
        else (config.model.gamma,)
    )
    if len(taus) == 1 and len(gammas) == 1:
        return taus[0], gammas[0]

    inner_seed = derive_seed(config.run.master_seed, _KEY_GRID)
    task = _build_task(
        sources,
        target,
        config.task.split_fraction,
        derive_seed(inner_seed, _KEY_SPLIT),
        config.model.scaling,
    )
    pool_seed = derive_seed(inner_seed, _KEY_POOL)
    best = None
    for tau in taus:
        for gamma in gammas:
            params = _hyperparams(config.model, tau)
            pool = build_predicate_pool(task, config.model.pool, seed=pool_seed)
            ens, _ = train_setrlusi(
                task,
                pool,
                TrainConfig(
                    gamma=gamma,
                    params=params,
                    master_seed=inner_seed,
                    H=config.model.H,
                    refit_max_epochs=config.model.refit_max_epochs,
                ),
            )
            _, classes = ensemble_predict(ens, task.target_train.features)
            score = float(np.mean(classes == task.target_train.labels))
            if best is None or score > best[0]:
                best = (score, tau, gamma)
    return best[1], best[2]


def run_experiment(config: ExperimentConfig) -> list[ExperimentResult]:
    """Run every configured method for the configured number of trials."""
    sources, target = _load_domains(config.task)
    tau, gamma = select_hyperparams(config, sources, target)

    jobs = [
        (config, sources, target, trial, tau, gamma)
        for trial in range(config.run.trials)
    ]
    if config.run.workers > 1:
        with ProcessPoolExecutor(max_workers=config.run.workers) as pool:
            per_trial = list(pool.map(_run_trial, jobs))
    else:
        per_trial = [_run_trial(job) for job in jobs]

    records = [rec for trial_records in per_trial for rec in trial_records]
    records.sort(key=lambda r: (r.task, r.method, r.trial))

    results = []
    snapshot = {
        "task": asdict(config.task)
        if config.task.synthetic is None
        else {**asdict(config.task), "synthetic": asdict(config.task.synthetic)},
        "model": {**asdict(config.model), "tau_selected": tau, "gamma_selected": gamma},
        "experiment": asdict(config.run),
    }
    for method in config.run.methods:
        group = [r for r in records if r.method == method]
        accs = np.array([r.accuracy for r in group])
        results.append(
            ExperimentResult(
                task_name=config.task.name,
                method_name=method,
                trials=len(group),
                accuracy_mean=float(accs.mean()),
                accuracy_std=float(accs.std(ddof=1)) if len(group) > 1 else 0.0,
                wall_time_seconds=float(sum(r.wall_time_seconds for r in group)),
                trace=[r.test_error for r in group],
                config_snapshot=snapshot,
                master_seed=config.run.master_seed,
                records=group,
            )
        )
    return results


def _record_to_row(rec: TrialRecord) -> dict:
    return {
        "task": rec.task,
        "method": rec.method,
        "trial": rec.trial,
        "seed": rec.seed,
        "accuracy": rec.accuracy,
        "wall_time_seconds": rec.wall_time_seconds,
        "h_index": rec.h_index,
        "test_error": rec.test_error,
    }


def _aggregate_record(result: ExperimentResult) -> TrialRecord:
    return TrialRecord(
        task=result.task_name,
        method=result.method_name,
        trial=-1,
        seed=result.master_seed,
        accuracy=result.accuracy_mean,
        wall_time_seconds=result.wall_time_seconds,
        h_index=[],
        test_error=[],
    )


def emit_results(
    results: list[ExperimentResult], output: str, format: str = "json_lines"
) -> list[Path]:
    """Write trial + aggregate records and one convergence CSV per method.

    Returns the written paths.  Record schema:
    task, method, trial, seed, accuracy, wall_time_seconds, h_index[],
    test_error[]; the aggregate row carries trial = -1.
    """
    if not results:
        raise ValueError("no results to emit")
    if format not in ("json_lines", "csv"):
        raise ValueError(f"unknown format: {format!r}")
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    written = []

    rows = []
    for result in results:
        rows.extend(_record_to_row(r) for r in result.records)
        rows.append(_record_to_row(_aggregate_record(result)))
    rows.sort(key=lambda r: (r["task"], r["method"], r["trial"]))

    if format == "json_lines":
        records_path = output.with_suffix(".jsonl")
        with open(records_path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
    else:
        records_path = output.with_suffix(".csv")
        with open(records_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(RECORD_FIELDS)
            for row in rows:
                writer.writerow(
                    [
                        row["task"],
                        row["method"],
                        row["trial"],
                        row["seed"],
                        repr(row["accuracy"]),
                        repr(row["wall_time_seconds"]),
                        ";".join(str(v) for v in row["h_index"]),
                        ";".join(repr(v) for v in row["test_error"]),
                    ]
                )
    written.append(records_path)

    for result in results:
        written.append(_emit_convergence(result, output))
    return written


def _emit_convergence(result: ExperimentResult, output: Path) -> Path:
    h_max = max((max(r.h_index) for r in result.records if r.h_index), default=0)
    per_h = {h: [] for h in range(1, h_max + 1)}
    for rec in result.records:
        for h, err in zip(rec.h_index, rec.test_error):
            per_h[h].append(err)
    safe_task = result.task_name.replace("/", "_")
    path = output.parent / (
        f"{output.name}_convergence_{safe_task}_{result.method_name}.csv"
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["h", "mean_test_error", "std_test_error"])
        for h in range(1, h_max + 1):
            errs = np.array(per_h[h])
            if errs.size:
                writer.writerow([h, repr(float(errs.mean())), repr(float(errs.std()))])
            else:
                writer.writerow([h, "nan", "nan"])
    return path


def read_results(path) -> list[dict]:
    """Parse a records file written by emit_results (either format)."""
    path = Path(path)
    rows = []
    if path.suffix == ".jsonl":
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rows.append(json.loads(line))
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                rows.append(
                    {
                        "task": row["task"],
                        "method": row["method"],
                        "trial": int(row["trial"]),
                        "seed": int(row["seed"]),
                        "accuracy": float(row["accuracy"]),
                        "wall_time_seconds": float(row["wall_time_seconds"]),
                        "h_index": [int(v) for v in row["h_index"].split(";") if v],
                        "test_error": [
                            float(v) for v in row["test_error"].split(";") if v
                        ],
                    }
                )
    return rows


def accuracy_table(rows: list[dict]) -> tuple[list[str], list[str], np.ndarray]:
    """Build the datasets x methods mean-accuracy table from trial rows."""
    trials = [r for r in rows if r["trial"] >= 0]
    tasks = sorted({r["task"] for r in trials})
    methods = sorted({r["method"] for r in trials})
    table = np.full((len(tasks), len(methods)), np.nan)
    for ti, task in enumerate(tasks):
        for mi, method in enumerate(methods):
            accs = [
                r["accuracy"]
                for r in trials
                if r["task"] == task and r["method"] == method
            ]
            if accs:
                table[ti, mi] = float(np.mean(accs))
    if np.isnan(table).any():
        raise ValueError("accuracy table has holes; every (task, method) needs trials")
    return tasks, methods, table


def _scaling_task(q: int, seed: int) -> TransferTask:
    """Fixed-shape task whose labeled target train set has exactly q rows."""
    sources = gen_synthetic_domains(
        SyntheticSpec(
            n_domains=2,
            rotation_angles=(0.0, 0.3),
            centers=((0.0, 0.0), (1.0, 0.5)),
            compactness=(1.0, 1.0),
            n_per_domain=300,
            seed=seed,
        )
    )
    target = gen_synthetic_domains(
        SyntheticSpec(
            n_domains=1,
            rotation_angles=(0.15,),
            centers=((0.0, 0.0),),
            compactness=(1.0,),
            n_per_domain=q + 200,
            seed=seed + 1,
        )
    )[0]
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    idx = rng.permutation(target.n)
    train = target.take(idx[:q], name_suffix="#train")
    test = target.take(idx[q : q + 200], name_suffix="#test")
    return TransferTask(sources=sources, target_train=train, target_test=test)


def bench_scaling(
    q_values=(50, 100, 200, 400), H: int = 10, seed: int = 0
) -> dict:
    """Measure training wall time against target train size q.

    Returns timings and the fitted log-log slope.  Predicate pools use a
    minimal grid so the measured cost tracks the fit kernels.
    """
    pool_cfg = PoolConfig(
        fs_reg_grid=(0.25,), gs_reg_grid=(0.25,), kernel_sigma_grid=(1.0,),
        svm_max_epochs=50,
    )
    params = HyperParams(tau=0.5, lam=0.01)
    timings = []
    for q in q_values:
        task = minmax_scale_task(_scaling_task(q, seed))
        pool = build_predicate_pool(task, pool_cfg, seed=seed)
        config = TrainConfig(
            gamma=0.5, params=params, master_seed=seed, H=H, refit_max_epochs=50
        )
        start = time.perf_counter()
        train_setrlusi(task, pool, config)
        timings.append((q, time.perf_counter() - start))
    qs = np.log([t[0] for t in timings])
    ts = np.log([t[1] for t in timings])
    slope = float(np.polyfit(qs, ts, 1)[0])
    return {"timings": timings, "slope": slope, "H": H}


def bench_backends(sizes=(100, 200, 400), d: int = 8, repeats: int = 5, seed: int = 0):
    """Compare the compiled and pure-NumPy kernel backends.

    Returns rows (op, q, python_seconds, compiled_seconds or None).
    """
    rng = np.random.default_rng(seed)
    compiled = None
    if _backend.active_backend() == "compiled":
        from . import _vkernels as compiled

    def best_time(fn, *args):
        best = np.inf
        for _ in range(repeats):
            start = time.perf_counter()
            fn(*args)
            best = min(best, time.perf_counter() - start)
        return best

    rows = []
    for q in sizes:
        x = rng.random((q, d))
        py_v = best_time(_kernels_py.v_matrix, x)
        cy_v = best_time(compiled.v_matrix, x) if compiled else None
        rows.append(("v_matrix", q, py_v, cy_v))
        py_k = best_time(_kernels_py.rbf_kernel, x, x, 0.7)
        cy_k = best_time(compiled.rbf_kernel, x, x, 0.7) if compiled else None
        rows.append(("rbf_kernel", q, py_k, cy_k))
    return rows

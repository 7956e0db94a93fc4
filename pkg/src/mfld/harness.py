"""Experiment orchestration: configs, cost accounting, CSV records, aggregation.

Each invocation runs one (experiment, method) pair over a list of seeds and
appends rows to a CSV with the fixed schema

    run_id, experiment, method, g, N, T, seed, iteration,
    cumulative_cost, wallclock_s, metric_name, metric_value

(UTF-8, LF line endings, header mandatory).  The cumulative-cost column is
the closed-form per-iteration cost times the iteration index, so methods
with different per-iteration complexity can be compared at matched cost.
"""

import csv
import math
import sys
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from . import dynamics, kernels, lv, mfg, objectives
from . import rng as streams
from . import thinning

EXPERIMENTS = ("quantize", "teach", "pro", "mfg", "thin-bench")
METHODS = ("mfld", "kt1", "kt2", "random", "rbm")

CSV_COLUMNS = (
    "run_id",
    "experiment",
    "method",
    "g",
    "N",
    "T",
    "seed",
    "iteration",
    "cumulative_cost",
    "wallclock_s",
    "metric_name",
    "metric_value",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    method: str = "kt1"
    n: int = 1024
    t: int = 0  # 0: use the experiment default
    g: int = 0
    seeds: tuple = (0,)
    out: str = "runs.csv"
    record_every: int = 0  # 0: use the experiment default
    options: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.method in ("kt1", "kt2") and self.experiment != "thin-bench":
            n = self.n
            if not (n > 0 and (n & (n - 1)) == 0 and (n.bit_length() - 1) % 2 == 0):
                raise ConfigError(
                    f"KT methods need a power-of-4 particle count, got N={n} (choose N in 256, 1024, 4096, ...)"
                )
        if self.g < 0:
            raise ConfigError("g must be nonnegative")


# Engine / model defaults per experiment (overridable via dotted options).
EXPERIMENT_DEFAULTS = {
    "quantize": {"t": 300, "record_every": 10, "gamma": 1.0, "zeta": 1e-4, "sigma": 1e-3, "init_variance": 1.0},
    "teach": {"t": 200, "record_every": 10, "gamma": 0.01, "zeta": 1e-4, "sigma": 1e-3, "init_variance": 0.05},
    "pro": {"t": 100, "record_every": 5, "gamma": 0.05, "zeta": 0.1, "sigma": 1e-3, "init_variance": 0.1},
    "mfg": {"t": 100, "record_every": 1},
    "thin-bench": {"t": 1, "record_every": 1},
}

# Coreset-selection kernel per experiment (the paper's pairing).
def default_thinning_kernel(experiment: str) -> kernels.KernelSpec:
    if experiment in ("quantize", "mfg", "thin-bench"):
        return kernels.Gaussian(1.0)
    return kernels.SobolevSum((1, 2, 3))


def cost(n: int, t: int, method: str, g: int = 0) -> float:
    """Closed-form cumulative interaction cost after t iterations."""
    if method == "mfld":
        return float(n) ** 2 * t
    if method in ("kt1", "kt2", "random", "rbm"):
        return 2.0**g * float(n) ** 1.5 * t
    raise ConfigError(f"unknown method {method!r}")


def parse_seeds(text: str) -> tuple:
    """Parse 'a..b' (inclusive), 'a,b,c', or a single integer."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    if "," in text:
        return tuple(int(p) for p in text.split(",") if p.strip())
    return (int(text),)


def load_config_file(path: str) -> Dict[str, str]:
    """Flat `key = value` text with dotted sections and # comments."""
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def config_from_options(options: Dict[str, str]) -> ExperimentConfig:
    opts = dict(options)
    try:
        experiment = opts.pop("experiment")
    except KeyError:
        raise ConfigError("config must set 'experiment'") from None
    cfg = ExperimentConfig(
        experiment=experiment,
        method=opts.pop("method", "kt1"),
        n=int(opts.pop("n", 1024)),
        t=int(opts.pop("t", 0)),
        g=int(opts.pop("g", 0)),
        seeds=parse_seeds(opts.pop("seeds", "0")),
        out=opts.pop("out", "runs.csv"),
        record_every=int(opts.pop("record_every", 0)),
        options=opts,
    )
    return cfg


def _opt(cfg: ExperimentConfig, key: str, fallback):
    if key in cfg.options:
        val = cfg.options[key]
        return type(fallback)(val) if fallback is not None else val
    return fallback


def build_strategy(cfg: ExperimentConfig) -> thinning.InteractionStrategy:
    """Interaction strategy for the configured method."""
    variant = cfg.options.get("kernel.variant")
    if variant is None:
        kern = default_thinning_kernel(cfg.experiment)
    elif variant == "gaussian":
        kern = kernels.Gaussian(float(cfg.options.get("kernel.lengthscale", 1.0)))
    elif variant == "sobolev":
        orders = tuple(int(s) for s in cfg.options.get("kernel.orders", "1,2,3").split(","))
        kern = kernels.SobolevSum(orders)
    else:
        raise ConfigError(f"unknown kernel.variant {variant!r}")
    delta_raw = cfg.options.get("strategy.delta", "0.5")
    delta = thinning.theoretical_delta(cfg.n) if delta_raw == "theory" else float(delta_raw)
    if cfg.method == "mfld":
        return thinning.Full()
    if cfg.method == "kt1":
        return thinning.KTSplitCompress(kernel=kern, g=cfg.g, delta=delta)
    if cfg.method == "kt2":
        return thinning.KTCompress(kernel=kern, g=cfg.g, delta=delta)
    if cfg.method == "random":
        return thinning.UniformRandom(g=cfg.g)
    p = int(cfg.options.get("strategy.p", math.isqrt(cfg.n - 1) + 1))
    return thinning.RandomBatch(p=p)


def build_model(cfg: ExperimentConfig, seed: int):
    name = cfg.options.get("objective.name") or {"quantize": "mmd", "teach": "net", "pro": "pro"}.get(cfg.experiment)
    if name == "mmd":
        return objectives.MMDQuantizationModel(dim=int(cfg.options.get("mmd.dim", 2)))
    if name == "net":
        return objectives.MeanFieldNetModel(
            seed=seed,
            dz=int(cfg.options.get("net.dz", 10)),
            batch_size=int(cfg.options.get("net.batch_size", 32)),
            label_noise_var=float(cfg.options.get("net.label_noise_var", 1e-4)),
            n_test=int(cfg.options.get("net.n_test", 256)),
        )
    if name == "pro":
        path = cfg.options.get("pro.dataset")
        data_seed = int(cfg.options.get("pro.data_seed", 0))
        if path:
            try:
                taus, ys = lv.load_dataset(path)
            except FileNotFoundError:
                taus, ys = lv.make_dataset(data_seed)
                lv.save_dataset(path, taus, ys)
        else:
            taus, ys = lv.make_dataset(data_seed)
        return objectives.PrOLVModel(taus, ys)
    raise ConfigError(f"no objective for experiment {cfg.experiment!r}")


def format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvSink:
    """Single-consumer CSV writer with the fixed schema (LF, UTF-8)."""

    def __init__(self, path: str, append: bool = False):
        self.path = path
        mode = "a" if append else "w"
        self._fh = open(path, mode, newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        if mode == "w" or self._fh.tell() == 0:
            self._writer.writerow(CSV_COLUMNS)

    def write_row(self, **fields) -> None:
        self._writer.writerow([format_value(fields[c]) for c in CSV_COLUMNS])

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_rows(path: str) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("g", "N", "T", "seed", "iteration"):
            row[key] = int(row[key])
        for key in ("cumulative_cost", "wallclock_s", "metric_value"):
            row[key] = float(row[key])
    return rows


def _run_id(cfg: ExperimentConfig, seed: int) -> str:
    return f"{cfg.experiment}-{cfg.method}-N{cfg.n}-g{cfg.g}-s{seed}"


def _effective(cfg: ExperimentConfig) -> ExperimentConfig:
    defaults = EXPERIMENT_DEFAULTS[cfg.experiment]
    t = cfg.t or defaults["t"]
    record_every = cfg.record_every or defaults["record_every"]
    return replace(cfg, t=t, record_every=record_every)


def run_experiment(cfg: ExperimentConfig, append: bool = False) -> str:
    """Run all seeds of the configured experiment; returns the CSV path.

    Rows are flushed after every seed, so a mid-run failure keeps the
    completed seeds (a `failure` row marks the broken one).
    """
    cfg = _effective(cfg)
    with CsvSink(cfg.out, append=append) as sink:
        for seed in cfg.seeds:
            try:
                if cfg.experiment == "thin-bench":
                    _run_thin_bench_seed(cfg, seed, sink)
                elif cfg.experiment == "mfg":
                    _run_mfg_seed(cfg, seed, sink)
                else:
                    _run_mfld_seed(cfg, seed, sink)
            except Exception as exc:  # noqa: BLE001 - failure rows keep partial output
                sink.write_row(
                    run_id=_run_id(cfg, seed),
                    experiment=cfg.experiment,
                    method=cfg.method,
                    g=cfg.g,
                    N=cfg.n,
                    T=cfg.t,
                    seed=seed,
                    iteration=-1,
                    cumulative_cost=0.0,
                    wallclock_s=0.0,
                    metric_name="failure",
                    metric_value=float("nan"),
                )
                sink.flush()
                print(f"seed {seed} failed: {exc}", file=sys.stderr)
            else:
                sink.flush()
    return cfg.out


def _run_mfld_seed(cfg: ExperimentConfig, seed: int, sink: CsvSink) -> None:
    defaults = EXPERIMENT_DEFAULTS[cfg.experiment]
    model = build_model(cfg, seed)
    engine_cfg = dynamics.MFLDConfig(
        step_size=float(_opt(cfg, "gamma", defaults["gamma"])),
        noise=float(_opt(cfg, "sigma", defaults["sigma"])),
        confinement=float(_opt(cfg, "zeta", defaults["zeta"])),
        n_particles=cfg.n,
        n_steps=cfg.t,
        strategy=build_strategy(cfg),
        seed=seed,
        init_variance=float(_opt(cfg, "init_variance", defaults["init_variance"])),
    )
    result = dynamics.run_mfld(engine_cfg, model, record_every=cfg.record_every)
    per_iter = cost(cfg.n, 1, cfg.method, cfg.g)
    for row in result.rows:
        metrics = dict(row.metrics)
        if row.iteration > 0:
            metrics["pair_evals"] = float(row.drift_pairs + row.selection_pairs)
        for name, value in metrics.items():
            sink.write_row(
                run_id=_run_id(cfg, seed),
                experiment=cfg.experiment,
                method=cfg.method,
                g=cfg.g,
                N=cfg.n,
                T=cfg.t,
                seed=seed,
                iteration=row.iteration,
                cumulative_cost=per_iter * row.iteration,
                wallclock_s=row.wallclock_s,
                metric_name=name,
                metric_value=float(value),
            )


def _run_mfg_seed(cfg: ExperimentConfig, seed: int, sink: CsvSink) -> None:
    if cfg.method == "rbm":
        raise ConfigError("random batches do not apply to the mean-field game solver")
    game_cfg = mfg.MFGConfig(
        n_particles=cfg.n,
        dim=int(cfg.options.get("mfg.dim", 2)),
        dt=float(cfg.options.get("mfg.dt", 0.01)),
        horizon=float(cfg.options.get("mfg.horizon", 1.0)),
        terminal_weight=float(cfg.options.get("mfg.terminal_weight", 10.0)),
        kernel=None if cfg.options.get("mfg.kernel") == "none" else kernels.Gaussian(1.0),
        strategy=build_strategy(cfg),
        sweeps=cfg.t,
        risk_eval_subset=int(cfg.options.get("mfg.risk_eval_subset", 512)),
        seed=seed,
        damping=float(cfg.options.get("mfg.damping", 0.05)),
        risk_every=int(cfg.options.get("mfg.risk_every", 1)),
    )
    start = time.perf_counter()
    result = mfg.mfg_solve(game_cfg)
    elapsed = time.perf_counter() - start
    per_sweep = cost(cfg.n, 1, cfg.method, cfg.g)
    for sweep, risk in zip(result.risk_sweeps, result.risk_history):
        sink.write_row(
            run_id=_run_id(cfg, seed),
            experiment=cfg.experiment,
            method=cfg.method,
            g=cfg.g,
            N=cfg.n,
            T=cfg.t,
            seed=seed,
            iteration=sweep,
            cumulative_cost=per_sweep * sweep,
            wallclock_s=elapsed * sweep / max(cfg.t, 1),
            metric_name="risk",
            metric_value=float(risk),
        )


def _run_thin_bench_seed(cfg: ExperimentConfig, seed: int, sink: CsvSink) -> None:
    ns = tuple(int(s) for s in cfg.options.get("thin.ns", str(cfg.n)).split(","))
    kern = default_thinning_kernel("thin-bench")
    for n in ns:
        pts = streams.stream(seed, streams.DATA, n).standard_normal((n, int(cfg.options.get("thin.dim", 2))))
        fvals = kernels.cross(kern, pts, np.zeros((1, pts.shape[1])))[:, 0]
        bench_cfg = replace(cfg, n=n)
        strategy = build_strategy(bench_cfg)
        tag = 0 if cfg.method in ("kt1", "kt2", "mfld") else 1
        start = time.perf_counter()
        if cfg.method == "rbm":
            part = thinning.rbm_partition(n, math.isqrt(n - 1) + 1, streams.stream(seed, streams.THIN, tag))
            err = float(np.mean([abs(fvals.mean() - fvals[b].mean()) for b in part.batches]))
        else:
            core = thinning.select_coreset(strategy, pts, streams.stream(seed, streams.THIN, tag))
            err = thinning.integration_error(fvals, core)
        sink.write_row(
            run_id=f"{cfg.experiment}-{cfg.method}-N{n}-g{cfg.g}-s{seed}",
            experiment=cfg.experiment,
            method=cfg.method,
            g=cfg.g,
            N=n,
            T=1,
            seed=seed,
            iteration=0,
            cumulative_cost=cost(n, 1, cfg.method, cfg.g),
            wallclock_s=time.perf_counter() - start,
            metric_name="integration_error",
            metric_value=err,
        )


def aggregate(rows: List[dict], group_keys=("experiment", "method", "N", "g", "metric_name", "iteration")) -> List[dict]:
    """Mean, standard error, and median over seeds per group.

    Groups with fewer than two seeds are skipped with a warning.  Rows are
    returned sorted by the group key tuple.
    """
    groups: Dict[tuple, List[dict]] = {}
    for row in rows:
        if row["metric_name"] in ("failure", "pair_evals"):
            continue
        groups.setdefault(tuple(row[k] for k in group_keys), []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: tuple(str(x) for x in k)):
        rows_g = groups[key]
        seeds = {r["seed"] for r in rows_g}
        if len(seeds) < 2:
            warnings.warn(f"group {dict(zip(group_keys, key))} has {len(seeds)} seed(s); skipped", stacklevel=2)
            continue
        values = np.array([r["metric_value"] for r in rows_g])
        record = dict(zip(group_keys, key))
        record["n_seeds"] = len(seeds)
        record["mean"] = float(values.mean())
        record["stderr"] = float(values.std(ddof=1) / math.sqrt(len(values)))
        record["median"] = float(np.median(values))
        out.append(record)
    return out


def write_aggregate(path: str, rows: List[dict]) -> None:
    if not rows:
        raise ConfigError("nothing to aggregate")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_value(v) for k, v in row.items()})

"""Benchmark harness: canonical instances, method registry, experiment runner.

Every method is run from scratch at each sample budget, seeds 0..9 by
default, and the learned deterministic gain is scored by its exact
closed-loop average cost.  Runs that produce no stabilizing gain are
recorded with the failure sentinel inf rather than dropped, so median
curves over seeds are taken over the extended reals.

Each (method, seed, budget) cell owns the random stream
np.random.default_rng([seed_base, method_index, seed, budget_index])
with method_index taken from the METHODS registry order, so results are
independent of scheduling and of the order methods appear in a spec.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    ContractViolationError,
    LqrLabError,
)
from .lds import (
    EpisodicOracle,
    GaussianLinear,
    LinearSystem,
    LqrInstance,
    QuadraticCost,
    instance_from_dict,
    instance_to_dict,
)
from .adp import lspi, q_learning_train
from .policysearch import random_search_train, reinforce_train
from .riccati import closed_loop_average_cost, dare_solve
from .sysid import least_squares_identify

__all__ = [
    "instance_double_integrator",
    "instance_laplacian",
    "ExperimentSpec",
    "RunRecord",
    "ResultTable",
    "Summary",
    "run_experiment",
    "stabilization_fraction",
    "evaluate_gain",
    "emit_csv",
    "parse_csv",
    "emit_plot",
    "load_experiment_spec",
    "experiment_spec_from_dict",
    "experiment_spec_to_dict",
    "METHODS",
    "DEFAULT_CONFIGS",
]


def instance_double_integrator(r0=1.0, noise_var=1e-4, episode_len=10):
    """Marginally unstable double integrator with position-only state cost.

    A = [[1, 1], [0, 1]], B = [0, 1]', Q = diag(1, 0), R = [r0],
    x0 = (-1, 0), process noise noise_var * I.
    """
    system = LinearSystem(
        A=[[1.0, 1.0], [0.0, 1.0]],
        B=[[0.0], [1.0]],
        noise_cov=noise_var * np.eye(2),
    )
    cost = QuadraticCost(Q=np.diag([1.0, 0.0]), R=[[float(r0)]])
    return LqrInstance(system=system, cost=cost, x0=[-1.0, 0.0],
                       episode_len=episode_len)


def instance_laplacian(r_scale=1000.0, noise_var=1e-4, episode_len=20):
    """Unstable graph-Laplacian-style dynamics with expensive control.

    A is tridiagonal with 1.01 on the diagonal and 0.01 off it, B = I,
    Q = I, R = r_scale * I.  Open-loop spectral radius 1.01 + 0.01*sqrt(2).
    The initial state is the origin: episodes are driven by process
    noise, which keeps episode costs finite even under mildly
    destabilizing gains and makes the stabilization fraction the
    interesting statistic.
    """
    A = np.array([
        [1.01, 0.01, 0.00],
        [0.01, 1.01, 0.01],
        [0.00, 0.01, 1.01],
    ])
    system = LinearSystem(A=A, B=np.eye(3), noise_cov=noise_var * np.eye(3))
    cost = QuadraticCost(Q=np.eye(3), R=float(r_scale) * np.eye(3))
    return LqrInstance(system=system, cost=cost, x0=[0.0, 0.0, 0.0],
                       episode_len=episode_len)


# ---------------------------------------------------------------------------
# method registry

METHODS = ("nominal", "lspi", "q-learning", "reinforce", "random-search")

DEFAULT_CONFIGS = {
    "nominal": {"excitation_std": 1.0, "ridge": 0.0},
    "lspi": {"gamma": 0.99, "exploration_std": 0.5, "ridge": 1e-6,
             "samples_per_iter": None},
    "q-learning": {"gamma": 0.99, "eta": 0.05, "eta_decay": 0.0,
                   "exploration_std": 0.5},
    "reinforce": {"exploration_std": 0.3, "step_size": 0.01, "batch_size": 4,
                  "use_baseline": True, "use_adam": True,
                  "beta1": 0.9, "beta2": 0.999, "eps_reg": 1e-8},
    "random-search": {"sigma": 0.04, "step_size": 0.002, "n_directions": 2,
                      "whiten_states": False},
}


def _zeros_gain(instance):
    return np.zeros((instance.system.p, instance.system.d))


def _run_nominal(oracle, budget, cfg, rng):
    inst = oracle.instance
    probe = GaussianLinear(K=_zeros_gain(inst),
                           exploration_std=cfg["excitation_std"])
    trajectories = []
    while oracle.samples_used < budget:
        horizon = min(inst.episode_len, budget - oracle.samples_used)
        trajectories.append(oracle.query(probe, horizon, rng))
    estimate = least_squares_identify(trajectories, ridge=cfg["ridge"])
    return dare_solve(estimate.A_hat, estimate.B_hat, inst.cost).K


def _run_lspi(oracle, budget, cfg, rng):
    inst = oracle.instance
    spi = cfg["samples_per_iter"] or inst.episode_len
    n_iters = budget // spi
    if n_iters == 0:
        return _zeros_gain(inst)
    result = lspi(oracle, _zeros_gain(inst), cfg["gamma"], n_iters, spi,
                  cfg["exploration_std"], rng, ridge=cfg["ridge"])
    return None if result.failed else result.gains[-1]


def _run_q_learning(oracle, budget, cfg, rng):
    result = q_learning_train(oracle, cfg["gamma"], budget, cfg["eta"],
                              cfg["exploration_std"], rng,
                              eta_decay=cfg["eta_decay"])
    return result.gain


def _run_reinforce(oracle, budget, cfg, rng):
    inst = oracle.instance
    per_iter = cfg["batch_size"] * inst.episode_len
    n_iters = budget // per_iter
    if n_iters == 0:
        return _zeros_gain(inst)
    result = reinforce_train(oracle, _zeros_gain(inst),
                             cfg["exploration_std"], cfg["step_size"],
                             n_iters, cfg["batch_size"], rng,
                             use_baseline=cfg["use_baseline"],
                             use_adam=cfg["use_adam"], beta1=cfg["beta1"],
                             beta2=cfg["beta2"], eps_reg=cfg["eps_reg"])
    return result.gains[-1]


def _run_random_search(oracle, budget, cfg, rng):
    inst = oracle.instance
    per_iter = 2 * cfg["n_directions"] * inst.episode_len
    n_iters = budget // per_iter
    if n_iters == 0:
        return _zeros_gain(inst)
    result = random_search_train(oracle, _zeros_gain(inst), cfg["sigma"],
                                 cfg["step_size"], n_iters,
                                 cfg["n_directions"], rng,
                                 whiten_states=cfg["whiten_states"])
    return result.gains[-1]


_DRIVERS = {
    "nominal": _run_nominal,
    "lspi": _run_lspi,
    "q-learning": _run_q_learning,
    "reinforce": _run_reinforce,
    "random-search": _run_random_search,
}


def method_config(name, overrides=None):
    """Default configuration for a registered method, with overrides applied."""
    if name not in DEFAULT_CONFIGS:
        raise ConfigurationError(
            f"unknown method '{name}'; registered: {', '.join(METHODS)}")
    cfg = dict(DEFAULT_CONFIGS[name])
    for key, value in (overrides or {}).items():
        if key not in cfg:
            raise ConfigurationError(
                f"unknown option '{key}' for method '{name}'")
        cfg[key] = value
    return cfg


# ---------------------------------------------------------------------------
# experiment plumbing


@dataclass
class ExperimentSpec:
    """One benchmark run: an instance, methods with configs, seeds, budgets."""

    instance: LqrInstance
    methods: list
    seeds: list = field(default_factory=lambda: list(range(10)))
    budget_schedule: list = field(default_factory=list)

    def __post_init__(self):
        if not self.methods:
            raise ContractViolationError("at least one method required")
        if not self.seeds:
            raise ContractViolationError("at least one seed required")
        normalized = []
        for entry in self.methods:
            if isinstance(entry, str):
                name, overrides = entry, {}
            else:
                name, overrides = entry
            normalized.append((name, method_config(name, overrides)))
        self.methods = normalized
        budgets = [int(b) for b in self.budget_schedule]
        if not budgets or any(b <= 0 for b in budgets):
            raise ContractViolationError("budgets must be positive")
        if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
            raise ContractViolationError("budgets must be strictly increasing")
        self.budget_schedule = budgets

    @property
    def episode_len(self):
        return self.instance.episode_len


@dataclass
class RunRecord:
    """Outcome of one (method, seed, budget) cell."""

    method: str
    seed: int
    samples: int
    cost: float
    stabilized: bool

    def __post_init__(self):
        self.cost = float(self.cost)
        if not math.isfinite(self.cost) and self.stabilized:
            raise ContractViolationError(
                "a failure-sentinel cost cannot be marked stabilized")


@dataclass
class Summary:
    median: float
    min: float
    max: float
    n_seeds: int


@dataclass
class ResultTable:
    """Flat record list plus derived per-(method, samples) summaries."""

    records: list

    def summaries(self):
        table = {}
        for key, costs in self._grouped().items():
            arr = np.array(costs)
            table[key] = Summary(median=float(np.median(arr)),
                                 min=float(arr.min()), max=float(arr.max()),
                                 n_seeds=len(costs))
        return table

    def _grouped(self):
        groups = {}
        for r in self.records:
            groups.setdefault((r.method, r.samples), []).append(r.cost)
        return groups


def evaluate_gain(instance, K):
    """Score a learned gain analytically: (average cost, stabilized).

    Uses no oracle samples.  A missing, non-finite, or destabilizing
    gain maps to (inf, False).
    """
    if K is None or not np.all(np.isfinite(K)):
        return math.inf, False
    try:
        cost = closed_loop_average_cost(instance.system.A, instance.system.B,
                                        K, instance.cost,
                                        instance.system.noise_cov)
    except LqrLabError:
        return math.inf, False
    return cost, True


def run_experiment(spec, seed_base=0):
    """Run every (method, seed, budget) cell of the spec from scratch.

    Learned gains are evaluated analytically, so a record's `samples` is
    exactly what the method consumed.  Methods that fail (no stabilizing
    gain, rank-deficient identification, divergence) yield cost inf and
    stabilized False; nothing raises out of a cell.
    """
    for name, _ in spec.methods:
        if name not in _DRIVERS:
            raise ConfigurationError(f"unknown method '{name}'")
    records = []
    for name, cfg in spec.methods:
        driver = _DRIVERS[name]
        method_index = METHODS.index(name)
        for seed in spec.seeds:
            for budget_index, budget in enumerate(spec.budget_schedule):
                rng = np.random.default_rng(
                    [seed_base, method_index, seed, budget_index])
                oracle = EpisodicOracle(spec.instance, budget=budget)
                with np.errstate(over="ignore", invalid="ignore"):
                    try:
                        K = driver(oracle, budget, cfg, rng)
                    except LqrLabError:
                        K = None
                    cost, stabilized = evaluate_gain(spec.instance, K)
                records.append(RunRecord(method=name, seed=int(seed),
                                         samples=oracle.samples_used,
                                         cost=cost, stabilized=stabilized))
    return ResultTable(records=records)


def stabilization_fraction(table):
    """Fraction of seeds with a stabilizing result per (method, samples)."""
    groups = {}
    for r in table.records:
        groups.setdefault((r.method, r.samples), []).append(r.stabilized)
    return {key: sum(flags) / len(flags) for key, flags in groups.items()}


# ---------------------------------------------------------------------------
# CSV artifacts

_CSV_HEADER = ["method", "seed", "samples", "cost", "stabilized"]


def emit_csv(table):
    """Render records as CSV text, `inf` for the failure sentinel."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for r in table.records:
        writer.writerow([r.method, r.seed, r.samples, repr(r.cost),
                         "true" if r.stabilized else "false"])
    return buf.getvalue()


def parse_csv(text):
    """Inverse of emit_csv; validates the header and every record."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != _CSV_HEADER:
        raise ConfigurationError(
            f"expected header {','.join(_CSV_HEADER)}")
    records = []
    for row in rows[1:]:
        if len(row) != 5:
            raise ConfigurationError(f"malformed CSV row: {row!r}")
        method, seed, samples, cost, stabilized = row
        if stabilized not in ("true", "false"):
            raise ConfigurationError(
                f"stabilized must be true or false, got {stabilized!r}")
        records.append(RunRecord(method=method, seed=int(seed),
                                 samples=int(samples), cost=float(cost),
                                 stabilized=stabilized == "true"))
    return ResultTable(records=records)


# ---------------------------------------------------------------------------
# plotting


def emit_plot(table, metric="cost"):
    """Render median lines with min-max bands on a log-x sample axis as SVG.

    metric is "cost" (failure sentinel drawn as a gap) or
    "stabilization" (fraction of stabilizing seeds).
    """
    if metric not in ("cost", "stabilization"):
        raise ConfigurationError(
            f"metric must be cost or stabilization, not {metric!r}")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    summaries = table.summaries()
    fractions = stabilization_fraction(table)
    methods = []
    for r in table.records:
        if r.method not in methods:
            methods.append(r.method)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in methods:
        cells = sorted(key[1] for key in summaries if key[0] == name)
        if metric == "cost":
            med = [summaries[(name, s)].median for s in cells]
            lo = [summaries[(name, s)].min for s in cells]
            hi = [summaries[(name, s)].max for s in cells]
            med = [m if math.isfinite(m) else math.nan for m in med]
            band_ok = [math.isfinite(a) and math.isfinite(b)
                       for a, b in zip(lo, hi)]
            xs = [s for s, ok in zip(cells, band_ok) if ok]
            ax.plot(cells, med, marker="o", label=name)
            if xs:
                ax.fill_between(
                    xs,
                    [a for a, ok in zip(lo, band_ok) if ok],
                    [b for b, ok in zip(hi, band_ok) if ok],
                    alpha=0.2)
        else:
            ax.plot(cells, [fractions[(name, s)] for s in cells],
                    marker="o", label=name)
    ax.set_xscale("log")
    ax.set_xlabel("samples")
    if metric == "cost":
        ax.set_yscale("log")
        ax.set_ylabel("average cost of learned gain")
    else:
        ax.set_ylabel("stabilization fraction")
        ax.set_ylim(-0.05, 1.05)
    ax.legend()
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg")
    plt.close(fig)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# spec files: the instance-file format plus methods/seeds/budgets


def experiment_spec_from_dict(doc):
    instance = instance_from_dict(doc)
    if "methods" not in doc:
        raise ConfigurationError("spec file needs a methods list")
    methods = []
    for entry in doc["methods"]:
        if isinstance(entry, str):
            methods.append(entry)
        elif isinstance(entry, dict) and "name" in entry:
            overrides = {k: v for k, v in entry.items() if k != "name"}
            methods.append((entry["name"], overrides))
        else:
            raise ConfigurationError(
                f"method entries are names or objects with a name: {entry!r}")
    if "budgets" not in doc:
        raise ConfigurationError("spec file needs a budgets list")
    try:
        return ExperimentSpec(instance=instance, methods=methods,
                              seeds=[int(s) for s in
                                     doc.get("seeds", list(range(10)))],
                              budget_schedule=doc["budgets"])
    except ContractViolationError as exc:
        raise ConfigurationError(str(exc)) from exc


def experiment_spec_to_dict(spec):
    doc = instance_to_dict(spec.instance)
    doc["methods"] = [{"name": name, **cfg} for name, cfg in spec.methods]
    doc["seeds"] = list(spec.seeds)
    doc["budgets"] = list(spec.budget_schedule)
    return doc


def load_experiment_spec(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"spec file is not valid JSON: {exc}")
    return experiment_spec_from_dict(doc)

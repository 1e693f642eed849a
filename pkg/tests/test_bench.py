"""Benchmark harness: instances, registry, runner, CSV and plot artifacts."""

import json
import math

import numpy as np
import pytest

from lqrlab import (
    ConfigurationError,
    ContractViolationError,
    closed_loop_average_cost,
    dare_solve,
    stability_report,
)
from lqrlab.bench import (
    DEFAULT_CONFIGS,
    METHODS,
    ExperimentSpec,
    ResultTable,
    RunRecord,
    emit_csv,
    emit_plot,
    evaluate_gain,
    experiment_spec_from_dict,
    experiment_spec_to_dict,
    instance_double_integrator,
    instance_laplacian,
    load_experiment_spec,
    method_config,
    parse_csv,
    run_experiment,
    stabilization_fraction,
)

# ---------------------------------------------------------------------------
# canonical instances


def test_double_integrator_matrices():
    inst = instance_double_integrator()
    np.testing.assert_array_equal(inst.system.A, [[1.0, 1.0], [0.0, 1.0]])
    np.testing.assert_array_equal(inst.system.B, [[0.0], [1.0]])
    np.testing.assert_array_equal(inst.cost.Q, np.diag([1.0, 0.0]))
    np.testing.assert_array_equal(inst.cost.R, [[1.0]])
    np.testing.assert_array_equal(inst.x0, [-1.0, 0.0])
    np.testing.assert_array_equal(inst.system.noise_cov, 1e-4 * np.eye(2))
    assert inst.episode_len == 10


def test_double_integrator_overrides():
    inst = instance_double_integrator(r0=5.0, noise_var=0.01, episode_len=7)
    np.testing.assert_array_equal(inst.cost.R, [[5.0]])
    np.testing.assert_array_equal(inst.system.noise_cov, 0.01 * np.eye(2))
    assert inst.episode_len == 7


def test_laplacian_matrices():
    inst = instance_laplacian()
    A = np.array([[1.01, 0.01, 0.0], [0.01, 1.01, 0.01], [0.0, 0.01, 1.01]])
    np.testing.assert_array_equal(inst.system.A, A)
    np.testing.assert_array_equal(inst.system.B, np.eye(3))
    np.testing.assert_array_equal(inst.cost.Q, np.eye(3))
    np.testing.assert_array_equal(inst.cost.R, 1000.0 * np.eye(3))
    np.testing.assert_array_equal(inst.system.noise_cov, 1e-4 * np.eye(3))
    # noise-driven: episodes start at the origin
    np.testing.assert_array_equal(inst.x0, np.zeros(3))
    assert inst.episode_len == 20


def test_laplacian_open_loop_radius():
    # tridiagonal eigenvalues 1.01 + 0.01 * 2 cos(k pi / 4), k = 1, 2, 3
    inst = instance_laplacian()
    rho = stability_report(inst.system.A).spectral_radius
    assert rho == pytest.approx(1.01 + 0.01 * math.sqrt(2.0), abs=1e-12)


# ---------------------------------------------------------------------------
# registry and per-method configuration


def test_registry_and_defaults_agree():
    assert set(METHODS) == set(DEFAULT_CONFIGS)


def test_method_config_returns_copy():
    cfg = method_config("nominal")
    cfg["ridge"] = 123.0
    assert DEFAULT_CONFIGS["nominal"]["ridge"] == 0.0


def test_method_config_applies_overrides():
    cfg = method_config("lspi", {"gamma": 0.9})
    assert cfg["gamma"] == 0.9
    assert cfg["ridge"] == DEFAULT_CONFIGS["lspi"]["ridge"]


def test_method_config_rejects_unknown_method():
    with pytest.raises(ConfigurationError):
        method_config("frobnicate")


def test_method_config_rejects_unknown_option():
    with pytest.raises(ConfigurationError):
        method_config("nominal", {"gamma": 0.9})


# ---------------------------------------------------------------------------
# experiment spec validation


def test_spec_normalizes_method_entries(double_integrator):
    spec = ExperimentSpec(instance=double_integrator,
                          methods=["nominal", ("lspi", {"gamma": 0.9})],
                          seeds=[0], budget_schedule=[10])
    names = [name for name, _ in spec.methods]
    assert names == ["nominal", "lspi"]
    assert spec.methods[1][1]["gamma"] == 0.9
    assert spec.methods[0][1] == DEFAULT_CONFIGS["nominal"]
    assert spec.episode_len == 10


def test_spec_requires_methods_and_seeds(double_integrator):
    with pytest.raises(ContractViolationError):
        ExperimentSpec(instance=double_integrator, methods=[],
                       seeds=[0], budget_schedule=[10])
    with pytest.raises(ContractViolationError):
        ExperimentSpec(instance=double_integrator, methods=["nominal"],
                       seeds=[], budget_schedule=[10])


@pytest.mark.parametrize("budgets", [[], [0], [-5, 10], [10, 10], [20, 10]])
def test_spec_rejects_bad_budget_schedules(double_integrator, budgets):
    with pytest.raises(ContractViolationError):
        ExperimentSpec(instance=double_integrator, methods=["nominal"],
                       seeds=[0], budget_schedule=budgets)


def test_spec_rejects_unknown_method_upfront(double_integrator):
    with pytest.raises(ConfigurationError):
        ExperimentSpec(instance=double_integrator, methods=["frobnicate"],
                       seeds=[0], budget_schedule=[10])


def test_run_record_sentinel_invariant():
    RunRecord(method="m", seed=0, samples=5, cost=math.inf, stabilized=False)
    RunRecord(method="m", seed=0, samples=5, cost=1.5, stabilized=True)
    with pytest.raises(ContractViolationError):
        RunRecord(method="m", seed=0, samples=5, cost=math.inf,
                  stabilized=True)


# ---------------------------------------------------------------------------
# analytic gain scoring


def test_evaluate_gain_missing_or_nonfinite(double_integrator):
    assert evaluate_gain(double_integrator, None) == (math.inf, False)
    bad = np.array([[math.nan, 0.0]])
    assert evaluate_gain(double_integrator, bad) == (math.inf, False)


def test_evaluate_gain_destabilizing(double_integrator):
    # zero gain leaves the marginally unstable plant unstabilized
    cost, stabilized = evaluate_gain(double_integrator,
                                     np.zeros((1, 2)))
    assert cost == math.inf and not stabilized


def test_evaluate_gain_matches_analytic_cost(double_integrator):
    sys_, lqr = double_integrator.system, double_integrator.cost
    sol = dare_solve(sys_.A, sys_.B, lqr)
    cost, stabilized = evaluate_gain(double_integrator, sol.K)
    assert stabilized
    expected = closed_loop_average_cost(sys_.A, sys_.B, sol.K, lqr,
                                        sys_.noise_cov)
    assert cost == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# the runner


def test_single_cell_consumes_exact_budget(double_integrator):
    spec = ExperimentSpec(instance=double_integrator, methods=["nominal"],
                          seeds=[0], budget_schedule=[10])
    table = run_experiment(spec, seed_base=0)
    assert len(table.records) == 1
    rec = table.records[0]
    assert rec.method == "nominal" and rec.seed == 0
    assert rec.samples == 10
    assert math.isfinite(rec.cost) and rec.stabilized


def test_nominal_one_episode_near_optimal(double_integrator):
    # one excited episode already identifies the double integrator well
    spec = ExperimentSpec(instance=double_integrator, methods=["nominal"],
                          seeds=list(range(10)), budget_schedule=[10])
    table = run_experiment(spec, seed_base=0)
    sys_, lqr = double_integrator.system, double_integrator.cost
    sol = dare_solve(sys_.A, sys_.B, lqr)
    jstar = closed_loop_average_cost(sys_.A, sys_.B, sol.K, lqr,
                                     sys_.noise_cov)
    med = table.summaries()[("nominal", 10)].median
    assert med <= 1.05 * jstar


def test_failure_is_recorded_not_raised(double_integrator):
    # two transitions cannot identify a 2 + 1 dimensional regression
    spec = ExperimentSpec(instance=double_integrator, methods=["nominal"],
                          seeds=[0], budget_schedule=[2])
    rec = run_experiment(spec, seed_base=0).records[0]
    assert rec.cost == math.inf and not rec.stabilized
    assert rec.samples == 2


def test_underfunded_search_returns_zero_gain_cell(double_integrator):
    # budget below one update: random search emits the zero gain, which
    # does not stabilize the plant, and consumes nothing
    spec = ExperimentSpec(instance=double_integrator,
                          methods=["random-search"],
                          seeds=[0], budget_schedule=[10])
    rec = run_experiment(spec, seed_base=0).records[0]
    assert rec.samples == 0
    assert rec.cost == math.inf and not rec.stabilized


def test_rerun_is_deterministic(double_integrator):
    spec = ExperimentSpec(instance=double_integrator,
                          methods=["nominal", "random-search"],
                          seeds=[0, 1], budget_schedule=[40])
    first = emit_csv(run_experiment(spec, seed_base=3))
    second = emit_csv(run_experiment(spec, seed_base=3))
    assert first == second


def test_cell_streams_do_not_depend_on_schedule(double_integrator):
    # lspi alone and lspi after nominal draw identical streams
    alone = ExperimentSpec(instance=double_integrator, methods=["lspi"],
                           seeds=[0, 1], budget_schedule=[30])
    paired = ExperimentSpec(instance=double_integrator,
                            methods=["nominal", "lspi"],
                            seeds=[0, 1], budget_schedule=[30])
    recs_alone = run_experiment(alone, seed_base=0).records
    recs_paired = [r for r in run_experiment(paired, seed_base=0).records
                   if r.method == "lspi"]
    assert recs_alone == recs_paired


def test_unknown_method_rejected_before_any_run(double_integrator):
    spec = ExperimentSpec(instance=double_integrator, methods=["nominal"],
                          seeds=[0], budget_schedule=[10])
    spec.methods = [("frobnicate", {})]
    with pytest.raises(ConfigurationError):
        run_experiment(spec)


def test_nominal_learning_curve_nearly_monotone(double_integrator):
    # more data never hurts: the identification error decays so fast that
    # the median cost curve sits within 2e-5 of optimal from the first
    # budget on, and adjacent points differ by sampling jitter.  An
    # inversion therefore only counts when the median rises materially
    # (0.1 percent, three orders above the jitter floor).
    budgets = [10, 20, 30, 50, 70, 100, 150, 200, 350, 500]
    spec = ExperimentSpec(instance=double_integrator, methods=["nominal"],
                          seeds=list(range(10)), budget_schedule=budgets)
    summaries = run_experiment(spec, seed_base=0).summaries()
    medians = [summaries[("nominal", b)].median for b in budgets]
    assert all(math.isfinite(m) for m in medians)
    inversions = sum(b > a * 1.001 for a, b in zip(medians, medians[1:]))
    assert inversions <= 1
    # the overall trend over the schedule is still a genuine decrease
    assert medians[-1] < medians[0]


# ---------------------------------------------------------------------------
# summaries and stabilization fractions


def _record(method, seed, cost, stabilized, samples=100):
    return RunRecord(method=method, seed=seed, samples=samples, cost=cost,
                     stabilized=stabilized)


def test_summaries_take_medians_over_extended_reals():
    table = ResultTable(records=[
        _record("a", 0, 1.0, True),
        _record("a", 1, 2.0, True),
        _record("a", 2, math.inf, False),
    ])
    summary = table.summaries()[("a", 100)]
    assert summary.median == 2.0
    assert summary.min == 1.0 and summary.max == math.inf
    assert summary.n_seeds == 3


def test_summaries_majority_failures_give_inf_median():
    table = ResultTable(records=[
        _record("a", 0, 1.0, True),
        _record("a", 1, math.inf, False),
        _record("a", 2, math.inf, False),
    ])
    assert table.summaries()[("a", 100)].median == math.inf


def test_stabilization_fraction_literals():
    table = ResultTable(records=[
        _record("a", 0, 1.0, True),
        _record("a", 1, 1.5, True),
        _record("b", 0, math.inf, False),
        _record("b", 1, 2.0, True),
        _record("b", 2, math.inf, False),
    ])
    fractions = stabilization_fraction(table)
    assert fractions[("a", 100)] == 1.0
    assert fractions[("b", 100)] == pytest.approx(1.0 / 3.0)


# ---------------------------------------------------------------------------
# CSV artifacts


def test_emit_csv_empty_table_is_header_only():
    assert emit_csv(ResultTable(records=[])) == \
        "method,seed,samples,cost,stabilized\n"


def test_csv_round_trip_is_exact():
    table = ResultTable(records=[
        _record("nominal", 0, 1.0 / 3.0, True, samples=10),
        _record("random-search", 3, math.inf, False, samples=40),
    ])
    text = emit_csv(table)
    assert "inf" in text
    back = parse_csv(text)
    assert back.records == table.records
    assert emit_csv(back) == text


def test_parse_csv_rejects_bad_header():
    with pytest.raises(ConfigurationError):
        parse_csv("method,seed,cost\nnominal,0,1.0\n")


def test_parse_csv_rejects_short_rows():
    text = "method,seed,samples,cost,stabilized\nnominal,0,10,1.0\n"
    with pytest.raises(ConfigurationError):
        parse_csv(text)


def test_parse_csv_rejects_bad_flag():
    text = "method,seed,samples,cost,stabilized\nnominal,0,10,1.0,maybe\n"
    with pytest.raises(ConfigurationError):
        parse_csv(text)
    capitalized = "method,seed,samples,cost,stabilized\nnominal,0,10,1.0,True\n"
    with pytest.raises(ConfigurationError):
        parse_csv(capitalized)


def test_parse_csv_enforces_sentinel_invariant():
    text = "method,seed,samples,cost,stabilized\nnominal,0,10,inf,true\n"
    with pytest.raises(ContractViolationError):
        parse_csv(text)


# ---------------------------------------------------------------------------
# plots


def test_emit_plot_renders_svg_for_both_metrics():
    table = ResultTable(records=[
        _record("a", 0, 3.0, True, samples=10),
        _record("a", 1, 4.0, True, samples=10),
        _record("a", 0, 2.0, True, samples=20),
        _record("a", 1, math.inf, False, samples=20),
        _record("b", 0, math.inf, False, samples=10),
        _record("b", 1, math.inf, False, samples=10),
    ])
    for metric in ("cost", "stabilization"):
        svg = emit_plot(table, metric=metric)
        assert "<svg" in svg


def test_emit_plot_rejects_unknown_metric():
    with pytest.raises(ConfigurationError):
        emit_plot(ResultTable(records=[]), metric="speed")


# ---------------------------------------------------------------------------
# spec files


def test_spec_dict_round_trip(double_integrator):
    spec = ExperimentSpec(instance=double_integrator,
                          methods=["nominal", ("lspi", {"gamma": 0.9})],
                          seeds=[0, 1, 2], budget_schedule=[10, 20])
    back = experiment_spec_from_dict(experiment_spec_to_dict(spec))
    assert back.methods == spec.methods
    assert back.seeds == spec.seeds
    assert back.budget_schedule == spec.budget_schedule
    np.testing.assert_array_equal(back.instance.system.A,
                                  spec.instance.system.A)
    np.testing.assert_array_equal(back.instance.x0, spec.instance.x0)


def test_load_spec_file(tmp_path, double_integrator):
    doc = experiment_spec_to_dict(
        ExperimentSpec(instance=double_integrator, methods=["nominal"],
                       seeds=[0, 1], budget_schedule=[10]))
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(doc))
    spec = load_experiment_spec(path)
    assert [name for name, _ in spec.methods] == ["nominal"]
    assert spec.seeds == [0, 1]
    assert spec.budget_schedule == [10]


def test_spec_seeds_default_to_ten(double_integrator):
    doc = experiment_spec_to_dict(
        ExperimentSpec(instance=double_integrator, methods=["nominal"],
                       seeds=[0], budget_schedule=[10]))
    del doc["seeds"]
    spec = experiment_spec_from_dict(doc)
    assert spec.seeds == list(range(10))


@pytest.mark.parametrize("mutate", [
    lambda doc: doc.pop("methods"),
    lambda doc: doc.pop("budgets"),
    lambda doc: doc.__setitem__("methods", [42]),
    lambda doc: doc.__setitem__("methods", [{"name": "nominal",
                                             "gamma": 0.9}]),
    lambda doc: doc.__setitem__("budgets", [20, 10]),
])
def test_spec_dict_errors(double_integrator, mutate):
    doc = experiment_spec_to_dict(
        ExperimentSpec(instance=double_integrator, methods=["nominal"],
                       seeds=[0], budget_schedule=[10]))
    mutate(doc)
    with pytest.raises(ConfigurationError):
        experiment_spec_from_dict(doc)


def test_load_spec_rejects_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_experiment_spec(path)

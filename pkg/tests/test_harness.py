"""Config parsing, seed streams, run metadata, replay, comparisons, CLI."""

import math
import os

import numpy as np
import pytest

from sliding_opt.cli import main
from sliding_opt.geometry import FeasibleSet, NormPair, make_setup
from sliding_opt.harness import (ConfigError, RunConfig, _largest_N_for_zo,
                                 _zosa_zo_cost, apply_overrides, compare,
                                 config_from_metadata, from_mapping, load_config,
                                 parse_config_file, parse_metric, parse_seed_spec,
                                 replay, run, seed_stream, validate)
from sliding_opt.sliding import build_schedule, theoretical_bound
from sliding_opt.trace import RunTrace


def write_config(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


BASE = """
# demo config
experiment = synthetic
method = zosa
seed = 7
n = 6
N = 8
checkpoints = 4
"""


# ---------------------------------------------------------------------------
# parsing and validation


def test_parse_config_file_skips_comments_and_blanks(tmp_path):
    path = write_config(tmp_path, BASE)
    mapping = parse_config_file(path)
    assert mapping["experiment"] == "synthetic"
    assert mapping["N"] == "8"
    assert "#" not in mapping


def test_parse_config_file_reports_line_number(tmp_path):
    path = write_config(tmp_path, "experiment = synthetic\nnot a pair\n")
    with pytest.raises(ConfigError, match=r":2"):
        parse_config_file(path)


def test_overrides_win_over_file_values(tmp_path):
    path = write_config(tmp_path, BASE)
    cfg = load_config(path, ["N=20", "seed=3"])
    assert cfg.N == 20 and cfg.seed == 3
    assert cfg.n == 6


def test_override_without_equals_rejected():
    with pytest.raises(ConfigError, match="override"):
        apply_overrides({}, ["N20"])


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="budgetN"):
        from_mapping({"budgetN": "5"})


def test_coercions_int_float_bool_none():
    cfg = from_mapping({"max_zo_calls": "1e6", "with_bound": "true",
                        "rho0": "2.5", "N": "none", "eta0": ""})
    assert cfg.max_zo_calls == 10 ** 6
    assert cfg.with_bound is True
    assert cfg.rho0 == 2.5
    assert cfg.N is None and cfg.eta0 is None


def test_bad_int_and_required_value_rejected():
    with pytest.raises(ConfigError, match="N: expected an integer"):
        from_mapping({"N": "2.5"})
    with pytest.raises(ConfigError, match="seed: a value is required"):
        from_mapping({"seed": ""})


def base_cfg(**kw):
    cfg = RunConfig(experiment="synthetic", method="zosa", seed=1, n=6, N=5)
    for key, value in kw.items():
        setattr(cfg, key, value)
    return cfg


@pytest.mark.parametrize("kw,field", [
    (dict(method="bogus"), "method"),
    (dict(experiment="bogus"), "experiment"),
    (dict(N=None), "N"),
    (dict(N=None, max_zo_calls=100, max_wall_ms=10.0), "N"),
    (dict(method="gd", max_zo_calls=100), "max_zo_calls"),
    (dict(max_comm_rounds=10), "max_comm_rounds"),
    (dict(R=5.0), "R"),
    (dict(method="mzosa", N=None, mu=0.1), "rho0"),
    (dict(method="mzosa", N=None, rho0=1.0), "mu"),
    (dict(method="mzosa", rho0=1.0, mu=0.1), "N"),
    (dict(eps=0.0), "eps"),
    (dict(noise_kind="gaussian"), "noise_kind"),
    (dict(method="zogd", with_bound=True), "with_bound"),
])
def test_validation_errors_name_the_field(kw, field):
    with pytest.raises(ConfigError, match=f"^{field}"):
        validate(base_cfg(**kw))


def test_custom_topology_needs_edge_file():
    cfg = RunConfig(experiment="geom_median", method="zosa", N=3, topology="custom")
    with pytest.raises(ConfigError, match="^edge_file"):
        validate(cfg)


# ---------------------------------------------------------------------------
# seed streams


def test_seed_streams_are_independent_and_reproducible():
    a1 = seed_stream(42, "data").standard_normal(4)
    a2 = seed_stream(42, "data").standard_normal(4)
    b = seed_stream(42, "noise").standard_normal(4)
    c = seed_stream(43, "data").standard_normal(4)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert not np.array_equal(a1, c)


def test_seed_streams_per_node_index():
    x0 = seed_stream(5, "noise", 0).uniform(size=3)
    x1 = seed_stream(5, "noise", 1).uniform(size=3)
    base = seed_stream(5, "noise").uniform(size=3)
    assert not np.array_equal(x0, x1)
    assert not np.array_equal(x0, base)


def test_unknown_stream_rejected():
    with pytest.raises(ConfigError, match="stream"):
        seed_stream(1, "weights")


# ---------------------------------------------------------------------------
# runs and metadata


def test_run_echoes_every_config_field_into_metadata():
    import dataclasses
    trace = run(base_cfg())
    for f in dataclasses.fields(RunConfig):
        assert f"config.{f.name}" in trace.metadata
    assert trace.metadata["version"]
    assert "derived.r" in trace.metadata
    assert trace.metadata["reference.kind"] == "closed_form"


def test_config_from_metadata_round_trips():
    cfg = base_cfg(Delta=1e-4, noise_kind="uniform", r=0.02)
    trace = run(cfg)
    back = config_from_metadata(trace.metadata)
    assert back == cfg


def test_replay_reproduces_trace_body_exactly():
    trace = run(base_cfg(seed=11))
    again = replay(trace)
    assert again.body_text() == trace.body_text()


def test_replay_from_saved_file(tmp_path):
    out = str(tmp_path / "t.csv")
    trace = run(base_cfg(out_path=out))
    assert os.path.exists(out)
    again = replay(out)
    assert again.body_text() == RunTrace.from_csv(out).body_text()


def test_zosa_counters_fo_equals_N():
    trace = run(base_cfg(N=7))
    final = trace.final()
    assert final.fo_calls == 7
    assert final.step == 7
    assert final.zo_calls % 2 == 0


def test_geom_median_comm_equals_N_for_sliding():
    cfg = RunConfig(experiment="geom_median", method="zosa", seed=2, n=3, m=4,
                    topology="chain", N=6, checkpoints=3, T_cap=10)
    trace = run(cfg)
    assert trace.final().comm_rounds == 6
    assert trace.metadata["derived.nonconforming_compactness"] == "true"
    assert float(trace.metadata["derived.chi"]) > 1.0
    assert trace.rows[0].consensus_sq_norm is not None


def test_geom_median_replay_identical():
    cfg = RunConfig(experiment="geom_median", method="zogd", seed=4, n=3, m=4,
                    topology="star", N=5, checkpoints=3)
    trace = run(cfg)
    assert replay(trace).body_text() == trace.body_text()


def test_mzosa_run_counts_phases():
    cfg = RunConfig(experiment="synthetic", method="mzosa", seed=3, n=6,
                    mu=0.1, rho0=2.0, phases=2, N0=4, checkpoints=2)
    trace = run(cfg)
    assert trace.final().fo_calls == 8
    assert trace.final().phase == 2
    assert trace.metadata["derived.N0"] == "4"


def test_reference_none_blanks_gap_column():
    trace = run(base_cfg(reference="none"))
    assert all(row.gap_vs_reference is None for row in trace.rows)
    assert trace.metadata.get("reference.kind") is None


def test_noise_kinds_run_through_harness():
    for kind in ("uniform", "adversarial_sine"):
        trace = run(base_cfg(noise_kind=kind, Delta=1e-5, N=3, seed=2))
        assert trace.final().step == 3


# ---------------------------------------------------------------------------
# horizon resolution


def zero_moment_kwargs():
    # M_est = 0 and Delta = 0 force T_k = 1, so the scheduled cost is 2N
    return dict(L=1.0, M_est=0.0, n=4, C1=1.0, p_star=1.0, Delta=0.0,
                r=0.1, D_tilde=1.0, mu=0.0, T_cap=100)


def test_largest_N_for_zo_budget_boundaries():
    kw = zero_moment_kwargs()
    assert _zosa_zo_cost(kw, 5) == 10
    assert _largest_N_for_zo(kw, 100) == 50
    assert _largest_N_for_zo(kw, 101) == 50
    assert _largest_N_for_zo(kw, 1) == 1
    assert _largest_N_for_zo(kw, 2) == 1


def test_zo_budget_derives_largest_fitting_N():
    cfg = base_cfg(N=None, max_zo_calls=500)
    trace = run(cfg)
    assert trace.metadata["derived.budget_primary"] == "max_zo_calls"
    assert trace.final().zo_calls <= 500
    assert trace.metadata.get("budget.halted") is None
    N = int(trace.metadata["derived.N"])
    sched_kw = dict(L=float(trace.metadata["derived.L"]),
                    M_est=float(trace.metadata["derived.M_est"]),
                    n=int(trace.metadata["derived.dim"]), C1=1.0,
                    p_star=float(trace.metadata["derived.p_star"]),
                    Delta=0.0, r=float(trace.metadata["derived.r"]),
                    D_tilde=float(trace.metadata["derived.D_tilde"]),
                    mu=0.0, T_cap=10 ** 6)
    assert _zosa_zo_cost(sched_kw, N) <= 500
    assert _zosa_zo_cost(sched_kw, N + 1) > 500


def test_wall_budget_runs_to_horizon_or_halts():
    trace = run(base_cfg(N=None, max_wall_ms=60000.0, N_horizon=4))
    assert trace.final().step == 4
    assert trace.metadata["derived.budget_primary"] == "max_wall_ms"
    halted = run(base_cfg(N=None, max_wall_ms=1e-6, N_horizon=50))
    assert halted.metadata["budget.halted"] == "wall_ms"
    assert halted.final().step < 50


def test_comm_budget_converts_per_method():
    for method, steps in (("zosa", 12), ("gd", 12), ("zogd", 6)):
        cfg = RunConfig(experiment="geom_median", method=method, seed=1, n=3, m=4,
                        topology="star", max_comm_rounds=12, checkpoints=3, T_cap=5)
        trace = run(cfg)
        assert int(trace.metadata["derived.N"]) == steps
        assert trace.final().comm_rounds <= 12 + 2


# ---------------------------------------------------------------------------
# bound reporting


def test_bound_column_nonincreasing_and_exact_at_final():
    cfg = base_cfg(N=10, with_bound=True, checkpoints=10)
    trace = run(cfg)
    assert trace.rows[0].bound is None
    bounds = [row.bound for row in trace.rows if row.step > 0]
    assert all(b is not None for b in bounds)
    assert all(b1 >= b2 for b1, b2 in zip(bounds, bounds[1:]))

    meta = trace.metadata
    sched = build_schedule(L=float(meta["derived.L"]), M_est=float(meta["derived.M_est"]),
                           n=int(meta["derived.dim"]), C1=1.0,
                           p_star=float(meta["derived.p_star"]), Delta=0.0,
                           r=float(meta["derived.r"]),
                           D_tilde=float(meta["derived.D_tilde"]), N=10)
    problem_setup = make_setup(NormPair.euclidean(),
                               FeasibleSet.box(-2.0 * np.ones(6), 2.0 * np.ones(6)),
                               "half_sq_euclid")
    # same estimator constants: radius r, M from the instance, no noise
    class Est:
        pass
    est = Est()
    est.oracle = Est()
    est.oracle.M = float(meta["derived.M_est"])
    est.oracle.Delta = 0.0
    est.r = float(meta["derived.r"])
    est.n = 6
    est.p_star = 1.0
    expected = theoretical_bound(sched, problem_setup, est, 10)
    assert trace.final().bound == expected


def test_gap_stays_under_reported_bound():
    trace = run(base_cfg(N=20, with_bound=True, seed=9))
    final = trace.final()
    assert final.gap_vs_reference <= final.bound


# ---------------------------------------------------------------------------
# comparisons


def test_parse_seed_spec_forms():
    assert parse_seed_spec("1..4") == [1, 2, 3, 4]
    assert parse_seed_spec("3,5,9") == [3, 5, 9]
    assert parse_seed_spec("7") == [7]
    with pytest.raises(ConfigError):
        parse_seed_spec("4..1")
    with pytest.raises(ConfigError):
        parse_seed_spec("a..b")


def test_parse_metric_forms():
    assert parse_metric("gap_at_budget") == ("gap_at_budget", None)
    assert parse_metric("budget_to_gap:0.01") == ("budget_to_gap", 0.01)
    with pytest.raises(ConfigError):
        parse_metric("speed")
    with pytest.raises(ConfigError):
        parse_metric("budget_to_gap:zero")


def test_compare_table_shape_and_tuning():
    cfg = base_cfg(N=12, checkpoints=6)
    rows, text = compare(cfg, ["zosa", "gd"], [1, 2, 3])
    assert [row["method"] for row in rows] == ["zosa", "gd"]
    assert rows[0]["eta_scale"] == 1.0
    assert rows[1]["eta_scale"] in (0.1, 1.0, 10.0)
    assert all(row["seeds"] == 3 for row in rows)
    assert all(row["q25"] <= row["median"] <= row["q75"] for row in rows)
    lines = text.strip().split("\n")
    assert lines[0] == "method,topology,metric,median,q25,q75,seeds,eta_scale"
    assert len(lines) == 3
    assert lines[1].startswith("zosa,-,gap_at_budget,")


def test_compare_budget_to_gap_censors_with_inf():
    cfg = base_cfg(N=3, checkpoints=3)
    rows, _ = compare(cfg, ["zosa"], [1, 2], metric="budget_to_gap:1e-9")
    assert math.isinf(rows[0]["median"])


def test_compare_budget_to_gap_reports_cost():
    cfg = base_cfg(N=15, checkpoints=15)
    rows, _ = compare(cfg, ["zosa"], [1, 2, 3], metric="budget_to_gap:0.5")
    assert 0 < rows[0]["median"] < float("inf")


def test_compare_explicit_eta0_skips_tuning():
    cfg = base_cfg(N=6, eta0=0.5)
    rows, _ = compare(cfg, ["gd"], [1, 2])
    assert rows[0]["eta_scale"] == 1.0


def test_compare_requires_reference():
    cfg = base_cfg(reference="none", N=4)
    with pytest.raises(ConfigError, match="reference"):
        compare(cfg, ["zosa"], [1])


def test_compare_writes_csv(tmp_path):
    out = str(tmp_path / "bench.csv")
    cfg = base_cfg(N=5, checkpoints=3)
    _, text = compare(cfg, ["zosa"], [1], out_path=out)
    assert open(out).read() == text


# ---------------------------------------------------------------------------
# command line


def test_cli_run_writes_trace(tmp_path, capsys):
    out = str(tmp_path / "out.csv")
    path = write_config(tmp_path, BASE + f"out_path = {out}\n")
    assert main(["run", "--config", path]) == 0
    captured = capsys.readouterr()
    assert f"wrote {out}" in captured.out
    assert os.path.exists(out)


def test_cli_run_prints_trace_without_out_path(tmp_path, capsys):
    path = write_config(tmp_path, BASE)
    assert main(["run", "--config", path, "--set", "N=3"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# sliding-opt trace v1\n")
    assert "step,fo_calls,zo_calls" in out


def test_cli_set_overrides_and_with_bound(tmp_path, capsys):
    path = write_config(tmp_path, BASE)
    assert main(["run", "--config", path, "--set", "N=4", "--with-bound"]) == 0
    out = capsys.readouterr().out
    assert "# config.with_bound = true" in out
    header = [l for l in out.split("\n") if l.startswith("step,")][0]
    assert header.endswith(",bound")


def test_cli_validation_failures_exit_2(tmp_path, capsys):
    path = write_config(tmp_path, BASE)
    assert main(["run", "--config", path, "--set", "method=bogus"]) == 2
    assert main(["run", "--config", str(tmp_path / "nope.conf")]) == 2
    assert main(["run", "--config", path, "--set", "frobnicate=1"]) == 2
    err = capsys.readouterr().err
    assert "method" in err and "frobnicate" in err


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_cli_runtime_abort_exits_3(tmp_path, capsys):
    path = write_config(tmp_path, BASE)
    code = main(["run", "--config", path, "--set", "experiment=nesterov",
                 "--set", "method=gd", "--set", "step_rule=constant",
                 "--set", "eta=1e200", "--set", "N=5"])
    assert code == 3
    assert "runtime abort" in capsys.readouterr().err


def test_cli_bench_prints_table(tmp_path, capsys):
    path = write_config(tmp_path, BASE)
    code = main(["bench", "--config", path, "--set", "N=6",
                 "--methods", "zosa", "--seeds", "1..2"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("method,topology,metric,")
    assert "\nzosa,-," in out


def test_cli_inspect_graph(capsys):
    assert main(["inspect-graph", "--topology", "star", "--m", "5"]) == 0
    out = capsys.readouterr().out
    assert "chi = 5" in out
    assert "eigenvalues = 0 1 1 1 5" in out
    assert main(["inspect-graph", "--topology", "pentagon"]) == 2


def test_cli_inspect_graph_custom_edge_file(tmp_path, capsys):
    edges = tmp_path / "g.edges"
    edges.write_text("0 1\n1 2\n")
    assert main(["inspect-graph", "--topology", "custom",
                 "--edge-file", str(edges)]) == 0
    out = capsys.readouterr().out
    assert "m = 3" in out
    assert main(["inspect-graph", "--topology", "custom"]) == 2

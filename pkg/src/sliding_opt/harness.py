"""Experiment harness: flat run configs, named seed streams, builders for the
bundled objectives, the run/replay entry points, and multi-seed comparisons.

A run is described by a flat `key = value` config file plus command-line
overrides. Every config field is echoed into the trace metadata, so a saved
trace file is enough to re-execute the run without the original config.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .baselines import BaselineConfig, gd_run, zogd_run
from .geometry import FeasibleSet, NormPair, make_setup
from .network import (NetworkProblem, Graph, build_laplacian, dual_bound_radius,
                      lift_to_penalized, penalty_coefficient, read_edge_list)
from .oracles import (NoiseModel, NoisyZeroOrderOracle, SmoothingEstimator,
                      default_p_star)
from .problems import (GeometricMedianInstance, NesterovLassoInstance, dataset_path,
                       make_strongly_convex_instance, make_verification_instance,
                       prox_grad_reference, read_libsvm, weiszfeld, wire_composite)
from .sliding import (Budgets, CompositeProblem, RestartConfig, SolverAbort,
                      build_schedule, mzosa_run, suggest_r_delta,
                      theoretical_bound, zosa_run)
from .trace import RunTrace, format_float


class ConfigError(ValueError):
    """A run configuration problem; messages start with the offending field."""


EXPERIMENTS = ("geom_median", "logreg", "nesterov", "synthetic")
METHODS = ("zosa", "mzosa", "gd", "zogd")
TOPOLOGIES = ("star", "complete", "chain", "cycle", "custom")
NOISE_KINDS = ("zero", "uniform", "adversarial_sine")
STEP_RULES = ("constant", "inv_sqrt")
AVERAGING_MODES = ("last", "running_best", "uniform_avg")
REFERENCE_MODES = ("auto", "none")

# Fixed offsets under the master seed; every consumer of randomness draws from
# its own stream so that, e.g., changing the noise realization leaves the data
# and the sphere directions untouched.
STREAM_IDS = {"data": 0, "init": 1, "sphere": 2, "noise": 3, "xi": 4}


def seed_stream(master: int, name: str, index: int | None = None) -> np.random.Generator:
    """Generator for the named substream of a master seed.

    Streams derive as SeedSequence(master, spawn_key=(STREAM_IDS[name],));
    per-node variants append the node index to the spawn key.
    """
    if name not in STREAM_IDS:
        raise ConfigError(f"stream: unknown '{name}'")
    key = (STREAM_IDS[name],) if index is None else (STREAM_IDS[name], index)
    return np.random.default_rng(np.random.SeedSequence(master, spawn_key=key))


def stream_seed_int(master: int, name: str) -> int:
    """A plain integer seed drawn from the named stream (for seeded factories)."""
    if name not in STREAM_IDS:
        raise ConfigError(f"stream: unknown '{name}'")
    seq = np.random.SeedSequence(master, spawn_key=(STREAM_IDS[name],))
    return int(seq.generate_state(1)[0])


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """One run of one method on one experiment.

    Optional numeric fields left at None are derived (r, L, R, eta0, ...) or
    treated as absent (N, budgets). Derived values land in the trace metadata
    under derived.*.
    """

    experiment: str = ""
    method: str = ""
    seed: int = 0
    n: int = 0                       # 0 = experiment default
    N: int | None = None
    phases: int = 6
    N0: int | None = None
    max_zo_calls: int | None = None
    max_comm_rounds: int | None = None
    max_wall_ms: float | None = None
    N_horizon: int = 1000            # outer-iteration cap for wall-clock budgets
    checkpoints: int = 50
    out_path: str | None = None
    eps: float = 1e-3
    r: float | None = None
    noise_kind: str = "zero"
    Delta: float = 0.0
    topology: str = "star"
    m: int = 20
    edge_file: str | None = None
    R: float | None = None
    L: float | None = None
    mu: float = 0.0
    M_est: float | None = None
    c_const: float = 1.0
    C_const: float = 1.0
    T_cap: int = 10 ** 6
    rho0: float | None = None
    dataset: str = "german.numer"
    l1: float | None = None
    bound_hint: float | None = None
    box_half: float = 2.0
    step_rule: str = "inv_sqrt"
    eta: float = 0.0
    eta0: float | None = None
    eta_scale: float = 1.0
    averaging: str = "last"
    with_bound: bool = False
    reference: str = "auto"
    reference_max_iter: int = 10 ** 6


_INT_KEYS = {"seed", "n", "N", "phases", "N0", "max_zo_calls", "max_comm_rounds",
             "N_horizon", "checkpoints", "m", "T_cap", "reference_max_iter"}
_FLOAT_KEYS = {"max_wall_ms", "eps", "r", "Delta", "R", "L", "mu", "M_est",
               "c_const", "C_const", "rho0", "l1", "bound_hint", "box_half",
               "eta", "eta0", "eta_scale"}
_BOOL_KEYS = {"with_bound"}
_NONE_OK = {"N", "N0", "max_zo_calls", "max_comm_rounds", "max_wall_ms", "out_path",
            "r", "edge_file", "R", "L", "M_est", "rho0", "l1", "bound_hint", "eta0"}
_ALL_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if raw == "" or raw.lower() == "none":
        if key in _NONE_OK:
            return None
        raise ConfigError(f"{key}: a value is required")
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected true/false, got '{raw}'")
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            pass
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got '{raw}'") from None
        if not val.is_integer():
            raise ConfigError(f"{key}: expected an integer, got '{raw}'")
        return int(val)
    if key in _FLOAT_KEYS:
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got '{raw}'") from None
    return raw


def parse_config_file(path) -> dict:
    """Read a flat config file into a key -> raw string mapping.

    Blank lines and lines starting with # are skipped; everything else must
    be `key = value` (first = splits). Later duplicates win.
    """
    mapping = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{stripped}'")
            key, _, value = stripped.partition("=")
            mapping[key.strip()] = value.strip()
    return mapping


def apply_overrides(mapping: dict, overrides) -> dict:
    """Fold `key=value` override strings into a raw mapping (overrides win)."""
    out = dict(mapping)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override: expected key=value, got '{item}'")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out


def from_mapping(mapping: dict) -> RunConfig:
    cfg = RunConfig()
    for key, raw in mapping.items():
        if key not in _ALL_KEYS:
            raise ConfigError(f"{key}: unknown config key")
        setattr(cfg, key, _coerce(key, raw))
    return cfg


def load_config(path, overrides=()) -> RunConfig:
    """Parse a config file, fold in overrides, and validate."""
    cfg = from_mapping(apply_overrides(parse_config_file(path), overrides))
    validate(cfg)
    return cfg


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def validate(cfg: RunConfig):
    _require(cfg.experiment in EXPERIMENTS,
             f"experiment: must be one of {', '.join(EXPERIMENTS)}, got '{cfg.experiment}'")
    _require(cfg.method in METHODS,
             f"method: must be one of {', '.join(METHODS)}, got '{cfg.method}'")
    _require(cfg.seed >= 0, "seed: must be >= 0")
    _require(cfg.n >= 0, "n: must be >= 0 (0 picks the experiment default)")
    _require(cfg.eps > 0, "eps: must be > 0")
    _require(cfg.Delta >= 0, "Delta: must be >= 0")
    _require(cfg.checkpoints >= 0, "checkpoints: must be >= 0")
    _require(cfg.phases >= 0, "phases: must be >= 0")
    _require(cfg.N_horizon >= 1, "N_horizon: must be >= 1")
    _require(cfg.m >= 2, "m: must be >= 2")
    _require(cfg.T_cap >= 1, "T_cap: must be >= 1")
    _require(cfg.box_half > 0, "box_half: must be > 0")
    _require(cfg.c_const > 0, "c_const: must be > 0")
    _require(cfg.C_const > 0, "C_const: must be > 0")
    _require(cfg.eta >= 0, "eta: must be >= 0")
    _require(cfg.eta_scale > 0, "eta_scale: must be > 0")
    _require(cfg.mu >= 0, "mu: must be >= 0")
    _require(cfg.reference_max_iter >= 1, "reference_max_iter: must be >= 1")
    _require(cfg.noise_kind in NOISE_KINDS,
             f"noise_kind: must be one of {', '.join(NOISE_KINDS)}, got '{cfg.noise_kind}'")
    _require(cfg.step_rule in STEP_RULES,
             f"step_rule: must be one of {', '.join(STEP_RULES)}, got '{cfg.step_rule}'")
    _require(cfg.averaging in AVERAGING_MODES,
             f"averaging: must be one of {', '.join(AVERAGING_MODES)}, got '{cfg.averaging}'")
    _require(cfg.reference in REFERENCE_MODES,
             f"reference: must be one of {', '.join(REFERENCE_MODES)}, got '{cfg.reference}'")

    for name, lower in (("N", 1), ("N0", 1), ("max_zo_calls", 1), ("max_comm_rounds", 1)):
        value = getattr(cfg, name)
        _require(value is None or value >= lower, f"{name}: must be >= {lower}")
    for name in ("max_wall_ms", "r", "R", "L", "rho0", "l1", "bound_hint", "M_est", "eta0"):
        value = getattr(cfg, name)
        _require(value is None or value > 0, f"{name}: must be > 0")

    if cfg.experiment == "geom_median":
        _require(cfg.topology in TOPOLOGIES,
                 f"topology: must be one of {', '.join(TOPOLOGIES)}, got '{cfg.topology}'")
        if cfg.topology == "custom":
            _require(cfg.edge_file is not None, "edge_file: required for topology = custom")
    else:
        _require(cfg.max_comm_rounds is None,
                 "max_comm_rounds: only the decentralized experiment counts communication")
        _require(cfg.R is None,
                 "R: only the decentralized experiment uses the penalty coefficient")
        _require(cfg.edge_file is None, "edge_file: only used with topology = custom")

    if cfg.method == "gd":
        _require(cfg.max_zo_calls is None,
                 "max_zo_calls: the first-order baseline makes no zero-order queries")
    if cfg.method in ("gd", "zogd"):
        _require(not cfg.with_bound, "with_bound: bound reporting applies to the sliding methods")

    budget_names = ("max_zo_calls", "max_comm_rounds", "max_wall_ms")
    budgets_set = [name for name in budget_names if getattr(cfg, name) is not None]
    if cfg.method == "mzosa":
        _require(cfg.N is None,
                 "N: the restarted method runs phases * N0 outer iterations; unset N")
        _require(cfg.rho0 is not None, "rho0: required for method = mzosa")
        _require(cfg.mu > 0, "mu: must be > 0 for method = mzosa")
        _require(cfg.phases >= 1, "phases: must be >= 1 for method = mzosa")
    elif cfg.N is None:
        _require(len(budgets_set) == 1,
                 "N: set N or exactly one of max_zo_calls | max_comm_rounds | max_wall_ms")


# ---------------------------------------------------------------------------
# experiment builders


@dataclass
class _Build:
    problem: CompositeProblem
    x0: np.ndarray
    dim: int
    M_f: float
    L: float
    mu: float
    r: float
    delta_max: float | None
    quiet_grad: Callable
    derived: dict = field(default_factory=dict)
    reference: dict = field(default_factory=dict)
    net: NetworkProblem | None = None


def _noise_model(cfg: RunConfig, dim: int, rng) -> NoiseModel:
    if cfg.noise_kind == "zero" or cfg.Delta == 0.0:
        return NoiseModel.zero()
    if cfg.noise_kind == "uniform":
        return NoiseModel.uniform(cfg.Delta, rng)
    return NoiseModel.adversarial_sine(cfg.Delta, np.arange(1, dim + 1, dtype=float))


def _build_synthetic(cfg: RunConfig) -> _Build:
    n = cfg.n if cfg.n else 10
    lam = cfg.l1 if cfg.l1 is not None else 0.1
    L_target = cfg.L if cfg.L is not None else 1.0
    data_seed = stream_seed_int(cfg.seed, "data")
    if cfg.mu > 0:
        _require(cfg.mu <= L_target, "mu: must be <= L")
        inst, feasible = make_strongly_convex_instance(
            n, data_seed, mu=cfg.mu, L=L_target, lam=lam, box_half=cfg.box_half)
    else:
        inst, feasible = make_verification_instance(
            n, data_seed, lam=lam, box_half=cfg.box_half)
    problem, sugg = wire_composite(
        inst, feasible, eps=cfg.eps, Delta=cfg.Delta, noise_kind=cfg.noise_kind,
        r=cfg.r, sphere_rng=seed_stream(cfg.seed, "sphere"),
        noise_rng=seed_stream(cfg.seed, "noise"))
    reference = {}
    if cfg.reference == "none":
        problem.psi0_reference = None
    else:
        reference = {"kind": "closed_form", "value": float(inst.optimal_value())}
    return _Build(problem=problem, x0=np.zeros(n), dim=n, M_f=inst.M_bound(),
                  L=inst.L, mu=inst.mu, r=sugg["r"], delta_max=sugg["delta_max"],
                  quiet_grad=inst.g_grad, reference=reference)


def _build_smooth_lasso(cfg: RunConfig, inst, n: int, l1: float, L: float) -> _Build:
    # shared wiring for the worst-case and logistic objectives (whole space)
    bound_hint = cfg.bound_hint if cfg.bound_hint is not None else 2.0 * math.sqrt(n)
    norms = NormPair.euclidean()
    setup = make_setup(norms, FeasibleSet.whole_space(n, bound_hint), "half_sq_euclid")
    M_f = l1 * math.sqrt(n)
    sugg = suggest_r_delta(cfg.eps, M_f, n, setup.D_X, default_p_star(norms, n))
    r = cfg.r if cfg.r is not None else sugg["r"]
    noise = _noise_model(cfg, n, seed_stream(cfg.seed, "noise"))
    oracle = NoisyZeroOrderOracle(inst.f_value, M=M_f, s=2.0 * r, noise=noise)
    est = SmoothingEstimator(oracle, r=r, n=n, norms=norms,
                             rng=seed_stream(cfg.seed, "sphere"))
    reference = {}
    psi0_ref = None
    if cfg.reference == "auto":
        ref = prox_grad_reference(inst.g_value, inst.g_grad, l1, L, np.zeros(n),
                                  max_iter=cfg.reference_max_iter)
        psi0_ref = ref["value"]
        reference = {"kind": "prox_grad", "value": ref["value"],
                     "iterations": ref["iterations"], "tol": ref["tol"]}
    problem = CompositeProblem(setup, inst.g_value, inst.g_grad, est,
                               psi0_reference=psi0_ref, f_subgrad=inst.f_subgrad,
                               L=L, mu=0.0)
    return _Build(problem=problem, x0=np.zeros(n), dim=n, M_f=M_f, L=L, mu=0.0,
                  r=r, delta_max=sugg["delta_max"], quiet_grad=inst.g_grad,
                  derived={"nonconforming_compactness": True, "bound_hint": bound_hint},
                  reference=reference)


def _build_nesterov(cfg: RunConfig) -> _Build:
    n = cfg.n if cfg.n else 50
    l1 = cfg.l1 if cfg.l1 is not None else 1e-3
    L = cfg.L if cfg.L is not None else 4.0
    inst = NesterovLassoInstance(n=n, L=L, l1=l1)
    return _build_smooth_lasso(cfg, inst, n, l1, L)


def _build_logreg(cfg: RunConfig) -> _Build:
    l1 = cfg.l1 if cfg.l1 is not None else 1e-4
    path = dataset_path(cfg.dataset)
    if not os.path.exists(path):
        raise ConfigError(f"dataset: '{cfg.dataset}' not found (looked at {path}; "
                          f"set SLIDING_OPT_DATA to the dataset directory)")
    inst = read_libsvm(path, l1=l1)
    if cfg.n and cfg.n != inst.n:
        raise ConfigError(f"n: dataset has {inst.n} features, config says {cfg.n}")
    L = cfg.L if cfg.L is not None else inst.smoothness()
    build = _build_smooth_lasso(cfg, inst, inst.n, l1, L)
    build.derived["dataset_rows"] = inst.m
    return build


def _build_geom_median(cfg: RunConfig) -> _Build:
    n = cfg.n if cfg.n else 10
    if cfg.topology == "custom":
        graph = read_edge_list(cfg.edge_file, m=cfg.m)
    else:
        graph = getattr(Graph, cfg.topology)(cfg.m)
    lap = build_laplacian(graph)
    m = graph.m
    inst = GeometricMedianInstance.sample(m, n, seed_stream(cfg.seed, "data"))
    R = cfg.R if cfg.R is not None else penalty_coefficient(1.0, m, lap, cfg.eps)
    bound_hint = cfg.bound_hint if cfg.bound_hint is not None else 8.0 * math.sqrt(n)
    per_node = make_setup(NormPair.euclidean(), FeasibleSet.whole_space(n, bound_hint),
                          "half_sq_euclid")
    M_lift = 1.0 / math.sqrt(m)
    sugg = suggest_r_delta(cfg.eps, M_lift, m * n, per_node.D_X * math.sqrt(m), 1.0)
    r = cfg.r if cfg.r is not None else sugg["r"]
    noise_models = None
    if cfg.noise_kind != "zero" and cfg.Delta > 0:
        if cfg.noise_kind == "uniform":
            noise_models = [NoiseModel.uniform(cfg.Delta, seed_stream(cfg.seed, "noise", i))
                            for i in range(m)]
        else:
            noise_models = [NoiseModel.adversarial_sine(
                cfg.Delta, (i + 1.0) * np.arange(1, n + 1, dtype=float)) for i in range(m)]
    oracles = inst.make_node_oracles(s=2.0 * r, noise_models=noise_models)
    net = NetworkProblem(lap, n, oracles, R)
    reference = {}
    psi0_ref = None
    if cfg.reference == "auto":
        _, ref_val = weiszfeld(inst)
        psi0_ref = ref_val
        reference = {"kind": "weiszfeld", "value": ref_val}
    subgrads = [(lambda x, _i=i: inst.node_subgrad(_i, x)) for i in range(m)]
    problem = lift_to_penalized(net, per_node, r=r,
                                sphere_rng=seed_stream(cfg.seed, "sphere"),
                                node_subgrads=subgrads, psi0_reference=psi0_ref)
    derived = {"nonconforming_compactness": True, "bound_hint": bound_hint,
               "R": R, "chi": lap.chi, "lambda_max": lap.lambda_max,
               "lambda_min_plus": lap.lambda_min_plus,
               "R_y": dual_bound_radius(1.0, m, lap), "edges": len(graph.edges)}
    return _Build(problem=problem, x0=inst.anchors.ravel().copy(), dim=m * n,
                  M_f=M_lift, L=net.L_penalty, mu=0.0, r=r, delta_max=sugg["delta_max"],
                  quiet_grad=(lambda x: 2.0 * R * net.apply_W_quiet(x)),
                  derived=derived, reference=reference, net=net)


_BUILDERS = {"synthetic": _build_synthetic, "nesterov": _build_nesterov,
             "logreg": _build_logreg, "geom_median": _build_geom_median}


# ---------------------------------------------------------------------------
# horizon resolution


def _zosa_zo_cost(sched_kwargs: dict, N: int) -> int:
    sched = build_schedule(N=N, **sched_kwargs)
    return 2 * sum(sched.inner_steps(k)[0] for k in range(1, N + 1))


def _largest_N_for_zo(sched_kwargs: dict, budget: int) -> int:
    """Largest N whose scheduled zero-order work 2*sum_k T_k fits the budget."""
    if _zosa_zo_cost(sched_kwargs, 1) > budget:
        return 1
    hi = 1
    while hi < 10 ** 7 and _zosa_zo_cost(sched_kwargs, 2 * hi) <= budget:
        hi *= 2
    lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _zosa_zo_cost(sched_kwargs, mid) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def _resolve_horizon(cfg: RunConfig, sched_kwargs: dict | None) -> tuple:
    """(N, primary budget dimension) for the non-restarted methods.

    With N set the budgets are secondary halts. Otherwise exactly one budget
    is set (validated): a communication budget converts exactly (1 round per
    zosa/gd step, 2 per zogd step), a zero-order budget picks the largest N
    whose scheduled work fits (zosa) or budget // 2 steps (zogd), and a
    wall-clock budget runs to N_horizon unless time halts the run first.
    """
    if cfg.N is not None:
        return cfg.N, "N"
    per_step_comm = {"zosa": 1, "gd": 1, "zogd": 2}
    if cfg.max_comm_rounds is not None:
        return max(1, cfg.max_comm_rounds // per_step_comm[cfg.method]), "max_comm_rounds"
    if cfg.max_zo_calls is not None:
        if cfg.method == "zogd":
            return max(1, cfg.max_zo_calls // 2), "max_zo_calls"
        return _largest_N_for_zo(sched_kwargs, cfg.max_zo_calls), "max_zo_calls"
    return cfg.N_horizon, "max_wall_ms"


# ---------------------------------------------------------------------------
# run


def _package_version() -> str:
    from . import __version__
    return __version__


def _meta_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))    # normalizes numpy scalars too
    return str(value)


def _finalize_metadata(trace: RunTrace, cfg: RunConfig, derived: dict, reference: dict):
    meta = {"version": _package_version()}
    for f in dataclasses.fields(RunConfig):
        meta[f"config.{f.name}"] = _meta_value(getattr(cfg, f.name))
    for key, value in derived.items():
        meta[f"derived.{key}"] = _meta_value(value)
    for key, value in reference.items():
        meta[f"reference.{key}"] = _meta_value(value)
    for key, value in trace.metadata.items():
        if key not in meta:
            meta[key] = value
    trace.metadata = meta


def _default_eta0(cfg: RunConfig, b: _Build) -> float:
    """Step-size scale from the gradient magnitude at the start point.

    gd sees the combined subgradient; zogd's estimator magnitude carries an
    extra sqrt(dim) factor, so its default shrinks accordingly.
    """
    grad0 = np.asarray(b.quiet_grad(b.x0), dtype=float)
    if cfg.method == "gd":
        sub = np.asarray(b.problem.f_subgrad(b.x0), dtype=float)
        denom = float(np.linalg.norm(sub + grad0))
    else:
        denom = math.sqrt(b.dim) * (b.M_f + float(np.linalg.norm(grad0)))
    return b.problem.setup.D_X / (denom + 1e-12)


def _execute(cfg: RunConfig, b: _Build) -> tuple:
    setup = b.problem.setup
    p_star = default_p_star(setup.norms, b.dim)
    M_est = cfg.M_est if cfg.M_est is not None else b.M_f
    budgets = None
    if any(v is not None for v in (cfg.max_zo_calls, cfg.max_comm_rounds, cfg.max_wall_ms)):
        budgets = Budgets(max_zo_calls=cfg.max_zo_calls, max_comm_rounds=cfg.max_comm_rounds,
                          max_wall_ms=cfg.max_wall_ms)
    derived = dict(b.derived)
    derived.update(dim=b.dim, r=b.r, M_est=M_est, p_star=p_star, L=b.L)
    if b.delta_max is not None:
        derived["delta_max"] = b.delta_max

    if cfg.method in ("zosa", "mzosa"):
        mu_sched = cfg.mu if cfg.mu > 0 else 0.0
        sched_kwargs = dict(L=b.L, M_est=M_est, n=b.dim, C1=setup.norms.C1,
                            p_star=p_star, Delta=cfg.Delta, r=b.r, mu=mu_sched,
                            T_cap=cfg.T_cap, c_const=cfg.c_const, C_const=cfg.C_const)
        if cfg.method == "zosa":
            D_tilde = 0.75 * setup.D_XV ** 2
            N, primary = _resolve_horizon(cfg, dict(sched_kwargs, D_tilde=D_tilde))
            sched = build_schedule(N=N, D_tilde=D_tilde, **sched_kwargs)
            bound_fn = None
            if cfg.with_bound:
                bound_fn = lambda k: theoretical_bound(sched, setup, b.problem.estimator, k)
            _, trace = zosa_run(b.problem, sched, b.x0, checkpoints=cfg.checkpoints,
                                budgets=budgets, bound_fn=bound_fn)
            derived.update(N=N, D_tilde=D_tilde, M_tilde=sched.M_tilde,
                           sigma_sq=sched.sigma_sq, budget_primary=primary)
        else:
            restart = RestartConfig(rho0=cfg.rho0, phases=cfg.phases, N0=cfg.N0)
            N0 = restart.resolved_N0(b.L, mu_sched)
            sched = build_schedule(N=N0, D_tilde=cfg.rho0 / (2.0 * mu_sched), **sched_kwargs)
            bound_fn = None
            if cfg.with_bound:
                bound_fn = lambda i: theoretical_bound(sched, setup, b.problem.estimator,
                                                       i, restart=restart)
            _, trace = mzosa_run(b.problem, sched, restart, b.x0,
                                 checkpoints=cfg.checkpoints, budgets=budgets,
                                 bound_fn=bound_fn)
            derived.update(N0=N0, rho0=cfg.rho0, phases=cfg.phases, M_tilde=sched.M_tilde,
                           sigma_sq=sched.sigma_sq, budget_primary="phases")
        return trace, derived

    N, primary = _resolve_horizon(cfg, None)
    if cfg.step_rule == "constant" and cfg.eta > 0:
        base = cfg.eta
    elif cfg.eta0 is not None:
        base = cfg.eta0
    else:
        base = _default_eta0(cfg, b)
    eta_eff = base * cfg.eta_scale
    bl = BaselineConfig(N_steps=N, step_rule=cfg.step_rule, eta=eta_eff, eta0=eta_eff,
                        averaging=cfg.averaging, r=(b.r if cfg.method == "zogd" else 0.0))
    if cfg.method == "gd":
        _, trace = gd_run(b.problem, bl, b.x0, checkpoints=cfg.checkpoints, budgets=budgets)
    else:
        _, trace = zogd_run(b.problem, bl, b.x0, rng=seed_stream(cfg.seed, "sphere"),
                            checkpoints=cfg.checkpoints, budgets=budgets)
    derived.update(N=N, eta0=eta_eff, budget_primary=primary)
    return trace, derived


def run(cfg: RunConfig) -> RunTrace:
    """Execute one configured run; returns the trace (and writes out_path)."""
    validate(cfg)
    b = _BUILDERS[cfg.experiment](cfg)
    trace, derived = _execute(cfg, b)
    _finalize_metadata(trace, cfg, derived, b.reference)
    if cfg.out_path:
        trace.to_csv(cfg.out_path)
    return trace


def config_from_metadata(metadata: dict) -> RunConfig:
    """Rebuild the RunConfig echoed into a trace's metadata."""
    mapping = {key[len("config."):]: str(value)
               for key, value in metadata.items() if key.startswith("config.")}
    if not mapping:
        raise ConfigError("metadata: no config.* entries to rebuild a run from")
    cfg = from_mapping(mapping)
    validate(cfg)
    return cfg


def replay(trace_or_path) -> RunTrace:
    """Re-execute the run recorded in a trace; the body must come out identical."""
    trace = trace_or_path
    if not isinstance(trace, RunTrace):
        trace = RunTrace.from_csv(trace_or_path)
    cfg = config_from_metadata(trace.metadata)
    cfg.out_path = None
    return run(cfg)


# ---------------------------------------------------------------------------
# multi-seed comparison


def parse_seed_spec(spec: str) -> list:
    """Seed list from 'a..b' (inclusive), 'a,b,c', or a single integer."""
    s = spec.strip()
    try:
        if ".." in s:
            first, _, last = s.partition("..")
            lo, hi = int(first), int(last)
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(tok) for tok in s.split(",")]
    except ValueError:
        raise ConfigError(f"seeds: expected 'a..b' or a comma list, got '{spec}'") from None


def parse_metric(spec: str) -> tuple:
    """('gap_at_budget', None) or ('budget_to_gap', target)."""
    if spec == "gap_at_budget":
        return "gap_at_budget", None
    if spec.startswith("budget_to_gap:"):
        tail = spec[len("budget_to_gap:"):]
        try:
            target = float(tail)
        except ValueError:
            raise ConfigError(f"metric: bad target '{tail}'") from None
        if target <= 0:
            raise ConfigError("metric: target must be > 0")
        return "budget_to_gap", target
    raise ConfigError(f"metric: unknown '{spec}'")


def _score(trace: RunTrace, metric: str, target, cost_attr: str) -> float:
    rows = trace.rows
    if not rows or rows[0].gap_vs_reference is None:
        raise ConfigError("reference: comparison metrics need reference = auto")
    gap0 = rows[0].gap_vs_reference
    if not gap0 > 0:
        raise ConfigError("reference: the start point already meets the reference value")
    if metric == "gap_at_budget":
        return rows[-1].gap_vs_reference / gap0
    for row in rows:
        if row.gap_vs_reference / gap0 <= target:
            return float(getattr(row, cost_attr))
    return float("inf")


def _quantile(values, q: float) -> float:
    """Linear-interpolation quantile that keeps censored (inf) scores as inf."""
    v = sorted(values)
    pos = (len(v) - 1) * q
    lo = math.floor(pos)
    hi = math.ceil(pos)
    if lo == hi or v[lo] == v[hi]:
        return float(v[lo])
    frac = pos - lo
    return float(v[lo] * (1.0 - frac) + v[hi] * frac)


_TUNING_GRID = (1.0, 0.1, 10.0)


def compare(cfg: RunConfig, methods, seeds, metric: str = "gap_at_budget",
            out_path=None) -> tuple:
    """Median and quartiles of a metric per method over shared seeds.

    gap_at_budget is the final gap relative to the start gap; budget_to_gap:t
    is the first recorded cost (comm_rounds on the decentralized experiment,
    zo_calls otherwise) at which the relative gap reaches t, inf if never.
    Baselines without an explicit step size get a one-seed grid search over
    {0.1, 1, 10} x the default scale; the chosen factor is reported.
    Returns (rows, csv_text).
    """
    metric_kind, target = parse_metric(metric)
    if not seeds:
        raise ConfigError("seeds: at least one seed required")
    cost_attr = "comm_rounds" if cfg.experiment == "geom_median" else "zo_calls"

    def one(method, seed, scale):
        run_cfg = replace(cfg, method=method, seed=seed, eta_scale=scale,
                          out_path=None, with_bound=False)
        try:
            return _score(run(run_cfg), metric_kind, target, cost_attr)
        except SolverAbort:
            # a diverged run (e.g. an oversized tuning candidate) is censored
            return float("inf")

    rows = []
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"method: must be one of {', '.join(METHODS)}, got '{method}'")
        scale = 1.0
        first_scores = {}
        if method in ("gd", "zogd") and cfg.eta0 is None and cfg.eta == 0:
            for s in _TUNING_GRID:
                first_scores[s] = one(method, seeds[0], s * cfg.eta_scale)
            scale = min(_TUNING_GRID, key=lambda s: first_scores[s])
        scores = [first_scores[scale] if (first_scores and seed == seeds[0])
                  else one(method, seed, scale * cfg.eta_scale)
                  for seed in seeds]
        median, q25, q75 = (_quantile(scores, q) for q in (0.5, 0.25, 0.75))
        rows.append({"method": method,
                     "topology": cfg.topology if cfg.experiment == "geom_median" else "-",
                     "metric": metric,
                     "median": median, "q25": q25, "q75": q75,
                     "seeds": len(seeds),
                     "eta_scale": scale})

    lines = ["method,topology,metric,median,q25,q75,seeds,eta_scale"]
    for row in rows:
        lines.append(",".join([row["method"], row["topology"], row["metric"],
                               format_float(row["median"]), format_float(row["q25"]),
                               format_float(row["q75"]), str(row["seeds"]),
                               format_float(row["eta_scale"])]))
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    return rows, text

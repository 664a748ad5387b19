"""First-order and zeroth-order baseline descent methods on the same problems.

gd_run gets clean subgradients of the whole composite objective; zogd_run
sees it only through two-point value queries of f + g. Both share the trace
format with the sliding solvers so comparisons line up column for column.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import project
from .oracles import EstimatorError, SmoothingEstimator
from .sliding import Budgets, CompositeProblem, SolverAbort, SolverState, _checkpoint_steps, _record
from .trace import RunTrace


@dataclass
class BaselineConfig:
    """Step rule (constant eta, or eta0/sqrt(t)), iteration count, reporting mode.

    averaging: 'last' reports the current iterate, 'running_best' the best
    objective value seen, 'uniform_avg' the running mean of iterates. r is
    the two-point estimator radius (zogd only).
    """

    N_steps: int
    step_rule: str = "inv_sqrt"
    eta: float = 0.0
    eta0: float = 1.0
    averaging: str = "last"
    r: float = 0.0

    def step_size(self, t: int) -> float:
        if self.step_rule == "constant":
            return self.eta
        if self.step_rule == "inv_sqrt":
            return self.eta0 / np.sqrt(t)
        raise ValueError(f"step_rule: unknown '{self.step_rule}'")


def _validate(cfg: BaselineConfig):
    if cfg.N_steps < 0:
        raise ValueError("N_steps: must be >= 0")
    if cfg.step_rule == "constant" and cfg.eta < 0:
        raise ValueError("eta: must be >= 0")
    if cfg.step_rule == "inv_sqrt" and cfg.eta0 <= 0:
        raise ValueError("eta0: must be > 0")
    if cfg.averaging not in ("last", "running_best", "uniform_avg"):
        raise ValueError(f"averaging: unknown '{cfg.averaging}'")


class _Reporter:
    """Tracks the reported point per the averaging mode."""

    def __init__(self, cfg, problem, x0):
        self.mode = cfg.averaging
        self.problem = problem
        self.x = np.asarray(x0, dtype=float).copy()
        if self.mode == "running_best":
            self.best_val = problem.psi0(self.x)
            self.best_x = self.x.copy()
        elif self.mode == "uniform_avg":
            self.mean = self.x.copy()
            self.count = 1

    def update(self, x):
        self.x = x
        if self.mode == "running_best":
            val = self.problem.psi0(x)
            if val < self.best_val:
                self.best_val = val
                self.best_x = x.copy()
        elif self.mode == "uniform_avg":
            self.count += 1
            self.mean += (x - self.mean) / self.count

    def point(self) -> np.ndarray:
        if self.mode == "running_best":
            return self.best_x
        if self.mode == "uniform_avg":
            return self.mean
        return self.x


def _descent_loop(problem: CompositeProblem, cfg: BaselineConfig, x0, direction_fn, *,
                  checkpoints: int, budgets: Budgets | None, trace: RunTrace | None):
    _validate(cfg)
    x = np.asarray(x0, dtype=float)
    if not problem.setup.feasible.contains(x, tol=1e-9):
        raise ValueError("x0: not in the feasible set")
    if trace is None:
        trace = RunTrace()
    wall0 = time.perf_counter()
    if budgets is not None and budgets.t_start is None:
        budgets.t_start = wall0
    x = x.copy()
    reporter = _Reporter(cfg, problem, x)
    marks = _checkpoint_steps(max(cfg.N_steps, 1), checkpoints)
    _record(trace, problem, reporter.point(), 0, 0, wall0, None, SolverState(0, 0, 0, x))
    for t in range(1, cfg.N_steps + 1):
        d = direction_fn(x, t)
        with np.errstate(over="ignore", invalid="ignore"):
            target = x - cfg.step_size(t) * d
        if not np.all(np.isfinite(target)):
            raise SolverAbort(f"non-finite iterate at step {t}",
                              SolverState(k=t, t=0, phase=0, x=x))
        x = project(problem.setup.feasible, target)
        reporter.update(x)
        hit = budgets.exceeded(problem.zo_calls, problem.comm_rounds) if budgets else None
        if t in marks or hit is not None or t == cfg.N_steps:
            _record(trace, problem, reporter.point(), t, 0, wall0, None,
                    SolverState(k=t, t=0, phase=0, x=x))
        if hit is not None:
            trace.metadata["budget.halted"] = hit
            break
    return reporter.point(), trace


def gd_run(problem: CompositeProblem, cfg: BaselineConfig, x0, *,
           checkpoints: int = 50, budgets: Budgets | None = None,
           trace: RunTrace | None = None):
    """Projected subgradient descent with clean first-order access to f + g.

    One combined subgradient per step, counted as one first-order call.
    """
    if problem.f_subgrad is None:
        raise ValueError("problem: f_subgrad required for the first-order baseline")

    def direction(x, t):
        return problem.f_subgrad(x) + problem.grad_g(x)

    return _descent_loop(problem, cfg, x0, direction,
                         checkpoints=checkpoints, budgets=budgets, trace=trace)


class _FullValueOracle:
    """Value oracle for f + g: the noisy f path plus exact g, g counted as a
    communication on decentralized instances."""

    def __init__(self, problem: CompositeProblem):
        self.problem = problem
        self.s = problem.f_oracle.s
        self.M = problem.f_oracle.M
        self.Delta = problem.f_oracle.Delta

    @property
    def call_counter(self):
        return self.problem.f_oracle.call_counter

    def evaluate(self, x) -> float:
        return self.problem.f_oracle.evaluate(x) + self.problem.g_counted(x)

    def clean_value(self, x) -> float:
        return self.problem.psi0(x)


def zogd_run(problem: CompositeProblem, cfg: BaselineConfig, x0, *,
             rng: np.random.Generator | None = None, checkpoints: int = 50,
             budgets: Budgets | None = None, trace: RunTrace | None = None):
    """Zeroth-order projected descent on the full objective.

    Each step takes one two-point sphere estimate of f + g (two value
    queries, hence zo_calls = 2 * steps and zero first-order calls).
    """
    if cfg.r <= 0:
        raise ValueError("r: must be > 0 for the zeroth-order baseline")
    full = _FullValueOracle(problem)
    n = problem.setup.feasible.n
    estimator = SmoothingEstimator(full, r=cfg.r, n=n, norms=problem.setup.norms, rng=rng)

    def direction(x, t):
        try:
            return estimator.estimate_gradient(x)
        except EstimatorError as err:
            raise SolverAbort(str(err), SolverState(k=t, t=0, phase=0, x=x)) from err

    return _descent_loop(problem, cfg, x0, direction,
                         checkpoints=checkpoints, budgets=budgets, trace=trace)

"""Gradient sliding with a zeroth-order inner loop, and its restarted variant.

The outer loop linearizes the smooth component g at an interpolation point
and hands the linear model to an inner loop that only touches the non-smooth
component f through the two-point sphere estimator. First-order work (one
gradient of g per outer iteration) and zeroth-order work (two f-values per
inner iteration) are counted separately.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .geometry import ProximalSetup, prox_step
from .oracles import EstimatorError, SmoothingEstimator
from .trace import RunTrace, TraceRow


@dataclass
class SlidingSchedule:
    """Step-size and inner-loop schedule for a horizon of N outer iterations.

    M_tilde and sigma_sq summarize the estimator's first and second moments;
    D_tilde scales the inner-iteration count (for restarts it shrinks per
    phase). T_cap bounds the inner loop, with the cap noted in run metadata
    whenever it binds.
    """

    L: float
    mu: float
    M_est: float
    M_tilde: float
    sigma_sq: float
    D_tilde: float
    N: int
    T_cap: int = 10 ** 6
    c_const: float = 1.0
    C_const: float = 1.0

    def beta(self, k: int) -> float:
        return 2.0 * self.L / k

    def gamma(self, k: int) -> float:
        return 2.0 / (k + 1.0)

    def Gamma(self, k: int) -> float:
        return 2.0 / (k * (k + 1.0))

    def inner_steps(self, k: int):
        """(T_k, raw value, capped?) for outer iteration k."""
        raw = self.N * (self.M_tilde ** 2 + self.sigma_sq) * k * k / (self.D_tilde * self.L ** 2)
        T = max(1, math.ceil(raw))
        if T > self.T_cap:
            return self.T_cap, raw, True
        return T, raw, False


def build_schedule(*, L: float, M_est: float, n: int, C1: float, p_star: float,
                   Delta: float, r: float, D_tilde: float, N: int,
                   mu: float = 0.0, T_cap: int = 10 ** 6,
                   c_const: float = 1.0, C_const: float = 1.0) -> SlidingSchedule:
    if L <= 0:
        raise ValueError("L: must be > 0")
    if D_tilde <= 0:
        raise ValueError("D_tilde: must be > 0")
    if N < 1:
        raise ValueError("N: must be >= 1")
    if T_cap < 1:
        raise ValueError("T_cap: must be >= 1")
    if r <= 0:
        raise ValueError("r: must be > 0")
    M_tilde = c_const * math.sqrt(n) * C1 * M_est
    sigma_sq = 4.0 * p_star ** 2 * (C_const * n * M_est ** 2 + (n * Delta / r) ** 2)
    return SlidingSchedule(L=L, mu=mu, M_est=M_est, M_tilde=M_tilde, sigma_sq=sigma_sq,
                           D_tilde=D_tilde, N=N, T_cap=T_cap,
                           c_const=c_const, C_const=C_const)


@dataclass
class ScheduleValues:
    p_t: float
    theta_t: float
    P_t: float
    beta_k: float
    gamma_k: float
    Gamma_k: float
    T_k: int


def schedule_values(sched: SlidingSchedule, k: int, t: int) -> ScheduleValues:
    """All schedule quantities at outer index k >= 1 and inner index t >= 0.

    Closed forms: p_t = t/2, theta_t = 2(t+1)/(t(t+3)), P_t = 2/((t+1)(t+2))
    (P_0 = 1), beta_k = 2L/k, gamma_k = 2/(k+1), Gamma_k = 2/(k(k+1)).
    """
    if k < 1:
        raise ValueError("k: must be >= 1")
    if t < 0:
        raise ValueError("t: must be >= 0")
    p_t = 0.5 * t
    theta_t = 1.0 if t <= 1 else 2.0 * (t + 1.0) / (t * (t + 3.0))
    P_t = 2.0 / ((t + 1.0) * (t + 2.0))
    T_k, _, _ = sched.inner_steps(k)
    return ScheduleValues(p_t=p_t, theta_t=theta_t, P_t=P_t,
                          beta_k=sched.beta(k), gamma_k=sched.gamma(k),
                          Gamma_k=sched.Gamma(k), T_k=T_k)


@dataclass
class Budgets:
    """Secondary halt conditions checked once per outer iteration."""

    max_zo_calls: int | None = None
    max_comm_rounds: int | None = None
    max_wall_ms: float | None = None
    t_start: float | None = None

    def exceeded(self, zo: int, comm: int) -> str | None:
        if self.max_zo_calls is not None and zo >= self.max_zo_calls:
            return "zo_calls"
        if self.max_comm_rounds is not None and comm >= self.max_comm_rounds:
            return "comm_rounds"
        if self.max_wall_ms is not None and self.t_start is not None:
            if (time.perf_counter() - self.t_start) * 1e3 >= self.max_wall_ms:
                return "wall_ms"
        return None


@dataclass
class SolverState:
    k: int
    t: int
    phase: int
    x: np.ndarray


class SolverAbort(RuntimeError):
    """Non-finite value or estimator failure inside a run; carries the loop state."""

    def __init__(self, message, state: SolverState):
        super().__init__(f"{message} (outer k={state.k}, inner t={state.t}, phase={state.phase})")
        self.state = state


class CompositeProblem:
    """A composite objective f + g with the oracle access the solvers expect.

    f is reachable only through a noisy zero-order oracle and its smoothing
    estimator; g through exact values and gradients. grad_g counts first-order
    calls; the estimator's oracle counts zero-order calls; decentralized
    instances plug a communication counter and a consensus diagnostic in.
    f_subgrad (clean) exists so first-order baselines can be run on the same
    instance, never used by the sliding solvers.
    """

    def __init__(self, setup: ProximalSetup, g_value, g_grad,
                 estimator: SmoothingEstimator, *, psi0_reference: float | None = None,
                 f_subgrad=None, g_value_counted=None, comm_counter=None,
                 consensus_diag=None, L: float | None = None, mu: float = 0.0):
        self.setup = setup
        self._g_value = g_value
        self._g_grad = g_grad
        self.estimator = estimator
        self.f_oracle = estimator.oracle
        self.psi0_reference = psi0_reference
        self.f_subgrad = f_subgrad
        self._g_value_counted = g_value_counted if g_value_counted is not None else g_value
        self._comm_counter = comm_counter
        self.consensus_diag = consensus_diag
        self.L = L
        self.mu = mu
        self.fo_calls = 0

    def g(self, x) -> float:
        return float(self._g_value(x))

    def g_counted(self, x) -> float:
        return float(self._g_value_counted(x))

    def grad_g(self, x) -> np.ndarray:
        self.fo_calls += 1
        return self._g_grad(x)

    def f_clean(self, x) -> float:
        return self.f_oracle.clean_value(x)

    def psi0(self, x) -> float:
        return self.f_clean(x) + self.g(x)

    @property
    def zo_calls(self) -> int:
        return self.f_oracle.call_counter

    @property
    def comm_rounds(self) -> int:
        return self._comm_counter() if self._comm_counter is not None else 0


def _checkpoint_steps(N: int, checkpoints: int):
    if checkpoints <= 0:
        return {N}
    ks = {min(N, max(1, round(N * j / checkpoints))) for j in range(1, checkpoints + 1)}
    ks.add(N)
    return ks


def _record(trace: RunTrace, problem: CompositeProblem, x, step: int, phase: int,
            wall0: float, bound: float | None, state: SolverState):
    psi0 = problem.psi0(x)
    if not np.isfinite(psi0):
        raise SolverAbort(f"non-finite objective {psi0} at checkpoint", state)
    gap = None if problem.psi0_reference is None else psi0 - problem.psi0_reference
    cons = None if problem.consensus_diag is None else problem.consensus_diag(x)
    trace.add_row(TraceRow(step=step, fo_calls=problem.fo_calls, zo_calls=problem.zo_calls,
                           comm_rounds=problem.comm_rounds, psi0=psi0,
                           gap_vs_reference=gap, consensus_sq_norm=cons, phase=phase,
                           bound=bound, wall_ms=(time.perf_counter() - wall0) * 1e3))


def ps_procedure(problem: CompositeProblem, sched: SlidingSchedule, h_grad, x_anchor,
                 beta: float, T: int, *, k: int = 1, phase: int = 0):
    """Inner prox loop against the linear model h with gradient h_grad.

    Starting from the anchor, T steps of: draw a fresh gradient estimate at
    the current point, take the doubly-regularized prox step, fold the result
    into the weighted running average. Returns (last iterate, average).
    """
    u = np.array(x_anchor, dtype=float, copy=True)
    u_tilde = u.copy()
    estimator = problem.estimator
    setup = problem.setup
    for t in range(1, T + 1):
        try:
            ghat = estimator.estimate_gradient(u)
        except EstimatorError as err:
            raise SolverAbort(str(err), SolverState(k=k, t=t, phase=phase, x=u)) from err
        a = h_grad + ghat
        u = prox_step(setup, a, x_anchor, u, beta, 0.5 * t)
        if t == 1:
            u_tilde = u.copy()
        else:
            theta = 2.0 * (t + 1.0) / (t * (t + 3.0))
            u_tilde += theta * (u - u_tilde)
    return u, u_tilde


def zosa_run(problem: CompositeProblem, sched: SlidingSchedule, x0, *,
             checkpoints: int = 50, budgets: Budgets | None = None,
             trace: RunTrace | None = None, phase: int = 0, k_offset: int = 0,
             record_step0: bool = True, bound_fn: Callable[[int], float] | None = None):
    """Run the sliding solver for sched.N outer iterations from x0.

    Returns (final averaged iterate, trace). The trace gets a step-0 row, a
    row at up to `checkpoints` evenly spaced outer iterations plus the final
    one, and a final row immediately after any budget trips (the counters on
    that row show the overshoot).
    """
    x0 = np.asarray(x0, dtype=float)
    if not problem.setup.feasible.contains(x0, tol=1e-9):
        raise ValueError("x0: not in the feasible set")
    if trace is None:
        trace = RunTrace()
    if bound_fn is not None:
        trace.with_bound = True
    wall0 = budgets.t_start if budgets is not None and budgets.t_start is not None \
        else time.perf_counter()
    if budgets is not None and budgets.t_start is None:
        budgets.t_start = wall0
    N = sched.N
    marks = _checkpoint_steps(N, checkpoints)
    x_bar = x0.copy()
    x_prev = x0.copy()
    if record_step0:
        _record(trace, problem, x_bar, 0, phase, wall0, None,
                SolverState(k=0, t=0, phase=phase, x=x_bar))
    cap_hit = trace.metadata.get("derived.T_cap_hit", "false") == "true"
    for k in range(1, N + 1):
        gamma = sched.gamma(k)
        beta = sched.beta(k)
        T_k, _, capped = sched.inner_steps(k)
        cap_hit = cap_hit or capped
        x_under = (1.0 - gamma) * x_bar + gamma * x_prev
        h_grad = problem.grad_g(x_under)
        if not np.all(np.isfinite(h_grad)):
            raise SolverAbort(f"non-finite smooth gradient at outer iteration {k}",
                              SolverState(k=k, t=0, phase=phase, x=x_under))
        x_prev, x_tilde = ps_procedure(problem, sched, h_grad, x_prev, beta, T_k,
                                       k=k, phase=phase)
        x_bar = (1.0 - gamma) * x_bar + gamma * x_tilde
        hit = budgets.exceeded(problem.zo_calls, problem.comm_rounds) if budgets else None
        if k in marks or hit is not None:
            bound = bound_fn(k) if bound_fn is not None else None
            _record(trace, problem, x_bar, k_offset + k, phase, wall0, bound,
                    SolverState(k=k, t=0, phase=phase, x=x_bar))
        if hit is not None:
            trace.metadata["budget.halted"] = hit
            break
    trace.metadata["derived.T_cap_hit"] = "true" if cap_hit else "false"
    return x_bar, trace


@dataclass
class RestartConfig:
    """Restart scheme for strongly convex objectives: rho0 bounds the initial
    gap, each of `phases` runs halves it using N0 outer iterations."""

    rho0: float
    phases: int
    N0: int | None = None

    def resolved_N0(self, L: float, mu: float) -> int:
        if self.N0 is not None:
            return self.N0
        return 2 * math.ceil(math.sqrt(5.0 * L / mu))


def mzosa_run(problem: CompositeProblem, sched: SlidingSchedule, restart: RestartConfig,
              y0, *, checkpoints: int = 50, budgets: Budgets | None = None,
              bound_fn: Callable[[int], float] | None = None):
    """Restarted sliding for mu-strongly convex objectives.

    Phase i reruns the convex solver from the previous phase's output with
    the inner-loop scale D_tilde = rho0 / (mu * 2^i). Returns (y_I, trace);
    phases appear in the trace's phase column with cumulative step indices.
    """
    if sched.mu <= 0:
        raise ValueError("mu: must be > 0 for the restarted solver")
    if restart.rho0 <= 0:
        raise ValueError("rho0: must be > 0")
    if restart.phases < 0:
        raise ValueError("phases: must be >= 0")
    y = np.asarray(y0, dtype=float)
    trace = RunTrace()
    wall0 = time.perf_counter()
    if budgets is not None and budgets.t_start is None:
        budgets.t_start = wall0
    if restart.phases == 0:
        _record(trace, problem, y, 0, 0, wall0, None, SolverState(0, 0, 0, y))
        return y, trace
    N0 = restart.resolved_N0(sched.L, sched.mu)
    for i in range(1, restart.phases + 1):
        D_i = restart.rho0 / (sched.mu * 2.0 ** i)
        sched_i = replace(sched, D_tilde=D_i, N=N0)
        phase_bound = (lambda k, _i=i: bound_fn(_i)) if bound_fn is not None else None
        y, trace = zosa_run(problem, sched_i, y, checkpoints=checkpoints, budgets=budgets,
                            trace=trace, phase=i, k_offset=(i - 1) * N0,
                            record_step0=(i == 1), bound_fn=phase_bound)
        if trace.metadata.get("budget.halted"):
            break
    return y, trace


def theoretical_bound(sched: SlidingSchedule, setup: ProximalSetup,
                      est: SmoothingEstimator | None, k_or_phase: int, *,
                      restart: RestartConfig | None = None) -> float:
    """Expected-gap bound on the full objective after k outer iterations
    (convex) or after phase i (restarted).

    est = None takes the clean small-radius limit (no smoothing or noise
    terms). With est given, the smoothing term 2 r M and the noise-bias term
    n Delta D_X p_star / r (doubled under restarts) are included.
    """
    if k_or_phase < 1:
        raise ValueError("k_or_phase: must be >= 1")
    if est is None:
        smooth_term = 0.0
        noise_term = 0.0
    else:
        M = est.oracle.M
        Delta = est.oracle.Delta
        smooth_term = 2.0 * est.r * M
        noise_term = est.n * Delta * setup.D_X * est.p_star / est.r if Delta > 0 else 0.0
    if restart is None:
        k = k_or_phase
        return smooth_term + 12.0 * sched.L * setup.D_XV ** 2 / (k * (k + 1.0)) + noise_term
    return smooth_term + restart.rho0 / 2.0 ** k_or_phase + 2.0 * noise_term


def suggest_r_delta(eps: float, M: float, n: int, D_X: float, p_star: float,
                    C3: float = 1.0) -> dict:
    """Smoothing radius, admissible noise level, and minimal oracle
    neighborhood for a target accuracy eps.

    r = eps/(4M) keeps the smoothing term at eps/2; delta_max keeps the
    noise-bias term at eps/8; s_min makes r < s*C3 hold with a hair of slack.
    """
    if eps <= 0:
        raise ValueError("eps: must be > 0")
    if M <= 0:
        raise ValueError("M: must be > 0")
    if n < 1:
        raise ValueError("n: must be >= 1")
    if not np.isfinite(D_X) or D_X <= 0:
        raise ValueError("D_X: must be finite and > 0")
    r = eps / (4.0 * M)
    delta_max = eps ** 2 / (8.0 * n * M * D_X * min(p_star, 1.0))
    s_min = r / C3 * (1.0 + 1e-6)
    return {"r": r, "delta_max": delta_max, "s_min": s_min}

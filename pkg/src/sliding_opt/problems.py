"""Experiment objectives, dataset ingestion, and reference solvers.

Three families: the decentralized geometric median, l1-regularized logistic
regression on LIBSVM data, and Nesterov's worst-case smooth function plus an
l1 term. A separable synthetic instance with a closed-form optimum backs the
verification tests.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import FeasibleSet, NormPair, make_setup
from .oracles import NoiseModel, NoisyZeroOrderOracle, SmoothingEstimator
from .sliding import CompositeProblem, suggest_r_delta


# ---------------------------------------------------------------------------
# geometric median

@dataclass(frozen=True)
class GeometricMedianInstance:
    """Anchors b_i; node i holds f_i(x) = ||x - b_i||_2 (Lipschitz constant 1)."""

    m: int
    n: int
    anchors: np.ndarray

    @staticmethod
    def sample(m: int, n: int, rng: np.random.Generator) -> "GeometricMedianInstance":
        # Anchor law: mean-1 Gaussian with covariance 2*I.
        anchors = 1.0 + math.sqrt(2.0) * rng.standard_normal((m, n))
        return GeometricMedianInstance(m, n, anchors)

    def node_value(self, i: int, x) -> float:
        return float(np.linalg.norm(np.asarray(x) - self.anchors[i]))

    def node_subgrad(self, i: int, x) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.anchors[i]
        nd = float(np.linalg.norm(d))
        if nd == 0.0:
            return np.zeros_like(d)
        return d / nd

    def objective(self, x) -> float:
        """Consensus objective: the mean anchor distance of a single point."""
        x = np.asarray(x, dtype=float)
        return float(np.mean(np.linalg.norm(self.anchors - x, axis=1)))

    def make_node_oracles(self, *, s: float, noise_models: list | None = None) -> list:
        oracles = []
        for i in range(self.m):
            noise = noise_models[i] if noise_models is not None else NoiseModel.zero()
            oracles.append(NoisyZeroOrderOracle(
                (lambda x, _i=i: self.node_value(_i, x)), M=1.0, s=s, noise=noise))
        return oracles


def weiszfeld(instance: GeometricMedianInstance, tol: float = 1e-13,
              max_iter: int = 100000) -> tuple:
    """Long-run Weiszfeld iteration; returns (median point, objective value).

    Distances are floored at 1e-15 so an iterate landing on an anchor cannot
    divide by zero; Gaussian anchors make that event measure-zero anyway.
    """
    b = instance.anchors
    x = b.mean(axis=0)
    for _ in range(max_iter):
        d = np.maximum(np.linalg.norm(b - x, axis=1), 1e-15)
        w = 1.0 / d
        x_new = (w[:, None] * b).sum(axis=0) / w.sum()
        if np.linalg.norm(x_new - x) <= tol * max(1.0, np.linalg.norm(x)):
            x = x_new
            break
        x = x_new
    return x, instance.objective(x)


# ---------------------------------------------------------------------------
# l1 logistic regression

@dataclass
class LogRegLassoInstance:
    """Average logistic loss over (A, y) plus l1 * ||x||_1."""

    A: sp.csr_matrix
    y: np.ndarray
    l1: float = 0.0

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def g_value(self, x) -> float:
        t = self.y * (self.A @ np.asarray(x, dtype=float))
        # log(1 + exp(-t)) without overflow on either tail
        return float(np.mean(np.where(t >= 0, np.log1p(np.exp(-np.abs(t))),
                                      np.log1p(np.exp(-np.abs(t))) - t)))

    def g_grad(self, x) -> np.ndarray:
        t = self.y * (self.A @ np.asarray(x, dtype=float))
        sig = 1.0 / (1.0 + np.exp(np.minimum(t, 50.0)))
        coeff = -self.y * sig / self.m
        return np.asarray(self.A.T @ coeff).ravel()

    def f_value(self, x) -> float:
        return self.l1 * float(np.sum(np.abs(x)))

    def f_subgrad(self, x) -> np.ndarray:
        return self.l1 * np.sign(np.asarray(x, dtype=float))

    def smoothness(self, iters: int = 100, tol: float = 1e-10) -> float:
        """L = ||A||_2^2 / (4m) with the spectral norm from power iteration."""
        rng = np.random.default_rng(0)
        v = rng.standard_normal(self.n)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(iters):
            w = np.asarray(self.A.T @ (self.A @ v)).ravel()
            lam_new = float(np.linalg.norm(w))
            if lam_new == 0.0:
                return 0.0
            v = w / lam_new
            if abs(lam_new - lam) <= tol * max(lam_new, 1.0):
                lam = lam_new
                break
            lam = lam_new
        return lam / (4.0 * self.m)


def read_libsvm(path, l1: float = 0.0) -> LogRegLassoInstance:
    """Parse a LIBSVM-format text file into a sparse instance.

    Labels in {-1,+1} pass through; {0,1} maps 0 to -1; {1,2} maps 1 to -1
    (order-preserving). The feature count is the maximum 1-based index seen.
    """
    labels = []
    rows, cols, vals = [], [], []
    n_features = 0
    with open(path) as fh:
        lineno = 0
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body:
                continue
            parts = body.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            for item in parts[1:]:
                idx, _, val = item.partition(":")
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad feature entry {item!r}") from None
                if j < 1:
                    raise ValueError(f"{path}:{lineno}: feature index {j} < 1")
                rows.append(len(labels) - 1)
                cols.append(j - 1)
                vals.append(v)
                n_features = max(n_features, j)
        if not labels:
            raise ValueError(f"{path}: empty dataset")
    y = np.asarray(labels)
    uniq = set(np.unique(y).tolist())
    if uniq <= {-1.0, 1.0}:
        pass
    elif uniq <= {0.0, 1.0}:
        y = np.where(y == 0.0, -1.0, 1.0)
    elif uniq <= {1.0, 2.0}:
        y = np.where(y == 1.0, -1.0, 1.0)
    else:
        raise ValueError(f"{path}: unsupported label set {sorted(uniq)}")
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), n_features))
    return LogRegLassoInstance(A=A, y=y, l1=l1)


def dataset_path(name_or_path: str) -> str:
    """Resolve a dataset argument: absolute/existing paths win, then the
    SLIDING_OPT_DATA root, then the working directory."""
    if os.path.isabs(name_or_path) or os.path.exists(name_or_path):
        return name_or_path
    root = os.environ.get("SLIDING_OPT_DATA")
    if root:
        candidate = os.path.join(root, name_or_path)
        if os.path.exists(candidate):
            return candidate
    return name_or_path


# ---------------------------------------------------------------------------
# Nesterov's worst-case smooth function plus l1

@dataclass(frozen=True)
class NesterovLassoInstance:
    """g(x) = (L/8)(x_1^2 + sum (x_i - x_{i+1})^2 + x_n^2) - (L/4) x_1, plus l1*||x||_1.

    The gradient is (L/4)(T x - e_1) with T the [-1, 2, -1] tridiagonal
    matrix, so g is L-smooth (lambda_max(T) < 4).
    """

    n: int
    L: float = 4.0
    l1: float = 1e-3

    def g_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        quad = x[0] ** 2 + float(np.sum(np.diff(x) ** 2)) + x[-1] ** 2
        return self.L / 8.0 * quad - self.L / 4.0 * x[0]

    def g_grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        Tx = 2.0 * x
        Tx[:-1] -= x[1:]
        Tx[1:] -= x[:-1]
        Tx[0] -= 1.0
        return self.L / 4.0 * Tx

    def f_value(self, x) -> float:
        return self.l1 * float(np.sum(np.abs(x)))

    def f_subgrad(self, x) -> np.ndarray:
        return self.l1 * np.sign(np.asarray(x, dtype=float))

    def smooth_minimizer(self) -> np.ndarray:
        i = np.arange(1, self.n + 1, dtype=float)
        return 1.0 - i / (self.n + 1.0)


# ---------------------------------------------------------------------------
# synthetic verification instances (separable, closed-form optimum)

def _soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@dataclass(frozen=True)
class SeparableLassoInstance:
    """g(x) = 0.5 (x-z)' H (x-z) with diagonal H, f(x) = lam ||x||_1.

    Separability gives the exact optimum x_i* = soft(z_i, lam/h_i) and the
    exact optimal value, which anchors convergence tests.
    """

    z: np.ndarray
    h: np.ndarray
    lam: float

    @property
    def n(self) -> int:
        return self.z.size

    def g_value(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.z
        return 0.5 * float(d @ (self.h * d))

    def g_grad(self, x) -> np.ndarray:
        return self.h * (np.asarray(x, dtype=float) - self.z)

    def f_value(self, x) -> float:
        return self.lam * float(np.sum(np.abs(x)))

    def f_subgrad(self, x) -> np.ndarray:
        return self.lam * np.sign(np.asarray(x, dtype=float))

    def psi0(self, x) -> float:
        return self.g_value(x) + self.f_value(x)

    def minimizer(self) -> np.ndarray:
        return _soft_threshold(self.z, self.lam / self.h)

    def optimal_value(self) -> float:
        return self.psi0(self.minimizer())

    @property
    def L(self) -> float:
        return float(np.max(self.h))

    @property
    def mu(self) -> float:
        return float(np.min(self.h))

    def M_bound(self) -> float:
        return self.lam * math.sqrt(self.n)


def make_verification_instance(n: int, seed: int, *, lam: float = 0.1,
                               box_half: float = 2.0) -> tuple:
    """Convex check instance (H = I) on the box [-box_half, box_half]^n.

    Returns (instance, feasible set); z is drawn in [-1, 1]^n so the
    soft-threshold optimum sits strictly inside the box.
    """
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, size=n)
    instance = SeparableLassoInstance(z=z, h=np.ones(n), lam=lam)
    feasible = FeasibleSet.box(-box_half * np.ones(n), box_half * np.ones(n))
    return instance, feasible


def make_strongly_convex_instance(n: int, seed: int, *, mu: float = 0.1, L: float = 1.0,
                                  lam: float = 0.01, box_half: float = 2.0) -> tuple:
    """Strongly convex check instance: diagonal curvatures spanning [mu, L]."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, size=n)
    h = np.linspace(mu, L, n)
    instance = SeparableLassoInstance(z=z, h=h, lam=lam)
    feasible = FeasibleSet.box(-box_half * np.ones(n), box_half * np.ones(n))
    return instance, feasible


def wire_composite(instance: SeparableLassoInstance, feasible: FeasibleSet, *,
                   eps: float = 1e-3, Delta: float = 0.0, noise_kind: str = "zero",
                   r: float | None = None, sphere_rng=None, noise_rng=None) -> tuple:
    """Build a CompositeProblem around a separable instance.

    The smoothing radius and noise ceiling come from the accuracy heuristics
    unless r is pinned explicitly; returns (problem, suggestion dict).
    """
    n = instance.n
    norms = NormPair.euclidean()
    setup = make_setup(norms, feasible, "half_sq_euclid")
    M = instance.M_bound()
    sugg = suggest_r_delta(eps, M, n, setup.D_X, 1.0, C3=norms.C3)
    if r is not None:
        sugg = dict(sugg, r=r, s_min=max(sugg["s_min"], r / norms.C3 * (1.0 + 1e-6)))
    if noise_kind == "zero" or Delta == 0.0:
        noise = NoiseModel.zero()
    elif noise_kind == "uniform":
        noise = NoiseModel.uniform(Delta, noise_rng)
    else:
        omega = np.arange(1, n + 1, dtype=float)
        noise = NoiseModel.adversarial_sine(Delta, omega)
    oracle = NoisyZeroOrderOracle(instance.f_value, M=M, s=sugg["s_min"], noise=noise)
    estimator = SmoothingEstimator(oracle, r=sugg["r"], n=n, norms=norms, rng=sphere_rng)
    problem = CompositeProblem(setup, instance.g_value, instance.g_grad, estimator,
                               psi0_reference=instance.optimal_value(),
                               f_subgrad=instance.f_subgrad,
                               L=instance.L, mu=instance.mu)
    return problem, sugg


# ---------------------------------------------------------------------------
# long-run proximal-gradient reference

def prox_grad_reference(g_value, g_grad, l1: float, L: float, x0, *,
                        max_iter: int = 10 ** 6, tol: float = 1e-15) -> dict:
    """Accelerated proximal gradient with monotone restart, run to numerical rest.

    Returns {'x', 'value', 'iterations', 'tol'}; used as the psi0 reference
    oracle for objectives without a closed-form optimum.
    """
    if L <= 0:
        raise ValueError("L: must be > 0")
    x = np.asarray(x0, dtype=float).copy()
    y = x.copy()
    step = 1.0 / L
    t_mom = 1.0

    def psi(u):
        return g_value(u) + l1 * float(np.sum(np.abs(u)))

    val = psi(x)
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        x_new = _soft_threshold(y - step * g_grad(y), step * l1)
        val_new = psi(x_new)
        if val_new > val:
            # momentum overshoot: restart from the current point
            y = x.copy()
            t_mom = 1.0
            x_new = _soft_threshold(y - step * g_grad(y), step * l1)
            val_new = psi(x_new)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        y = x_new + (t_mom - 1.0) / t_next * (x_new - x)
        t_mom = t_next
        stall = stall + 1 if abs(val - val_new) <= tol * max(1.0, abs(val)) else 0
        x, val = x_new, val_new
        if stall >= 20:
            break
    return {"x": x, "value": val, "iterations": it, "tol": tol}

"""Noisy zeroth-order oracles and the two-point sphere gradient estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import NormPair, _as_vector


class EstimatorError(RuntimeError):
    """Raised when an estimate cannot be formed; carries the query point and direction."""

    def __init__(self, message, x=None, e=None):
        super().__init__(message)
        self.x = x
        self.e = e


def default_p_star(norms: NormPair, n: int) -> float:
    """Fourth-moment bound on the dual norm of a uniform sphere direction.

    Euclidean dual: exactly 1. l-infinity dual: min(1, sqrt(4*ln(2n)/n)),
    the standard max-of-coordinates bound.
    """
    if n < 1:
        raise ValueError("n: must be >= 1")
    if norms.dual_id == "euclidean":
        return 1.0
    return min(1.0, float(np.sqrt(4.0 * np.log(2.0 * n) / n)))


def sample_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the Euclidean unit sphere in R^n (normalized Gaussian)."""
    if n < 1:
        raise ValueError("n: must be >= 1")
    while True:
        g = rng.standard_normal(n)
        nrm = math.sqrt(g @ g)
        if nrm > 1e-12:
            return g / nrm


@dataclass
class NoiseModel:
    """Bounded additive observation noise: zero, i.i.d. uniform, or a sine in x.

    The sine variant Delta*sin(<omega, x>/scale) is deterministic in x, so it
    can carry a genuine bias through the estimator; its magnitude never
    exceeds Delta either way.
    """

    kind: str
    Delta: float = 0.0
    omega: np.ndarray | None = None
    scale: float | None = None
    rng: np.random.Generator | None = None

    @staticmethod
    def zero() -> "NoiseModel":
        return NoiseModel("zero")

    @staticmethod
    def uniform(Delta: float, rng: np.random.Generator) -> "NoiseModel":
        if Delta < 0:
            raise ValueError("Delta: must be >= 0")
        return NoiseModel("uniform", Delta=float(Delta), rng=rng)

    @staticmethod
    def adversarial_sine(Delta: float, omega, scale: float | None = None) -> "NoiseModel":
        if Delta < 0:
            raise ValueError("Delta: must be >= 0")
        omega = _as_vector(omega, "omega")
        return NoiseModel("adversarial_sine", Delta=float(Delta), omega=omega, scale=scale)

    def sample(self, x) -> float:
        if self.kind == "zero" or self.Delta == 0.0:
            return 0.0
        if self.kind == "uniform":
            return float(self.rng.uniform(-self.Delta, self.Delta))
        scale = self.scale if self.scale is not None else max(self.Delta, 1e-30)
        return self.Delta * float(np.sin(float(self.omega @ np.asarray(x)) / scale))


class NoisyZeroOrderOracle:
    """Value access to f through f(x, xi) + bounded noise; counts every call.

    M bounds the Lipschitz constant (sup ||grad f(x, xi)||_2 in the second
    moment sense), s is the radius of the neighborhood of the feasible set on
    which queries stay valid. clean_value bypasses both noise and the counter
    and exists for diagnostics and trace checkpoints only.
    """

    def __init__(self, f_clean: Callable[[np.ndarray], float], *, M: float, s: float,
                 noise: NoiseModel | None = None,
                 stochastic_component: Callable[[np.ndarray, np.random.Generator], float] | None = None,
                 xi_rng: np.random.Generator | None = None):
        if M < 0:
            raise ValueError("M: must be >= 0")
        if s <= 0:
            raise ValueError("s: must be > 0")
        self.f_clean = f_clean
        self.M = float(M)
        self.s = float(s)
        self.noise = noise if noise is not None else NoiseModel.zero()
        self.Delta = self.noise.Delta
        self.stochastic_component = stochastic_component
        self.xi_rng = xi_rng
        self.call_counter = 0

    def evaluate(self, x) -> float:
        self.call_counter += 1
        if self.stochastic_component is not None:
            val = float(self.stochastic_component(x, self.xi_rng))
        else:
            val = float(self.f_clean(x))
        return val + self.noise.sample(x)

    def clean_value(self, x) -> float:
        return float(self.f_clean(x))


class SmoothingEstimator:
    """Two-point sphere-smoothing gradient estimator at radius r.

    One estimate draws a fresh uniform sphere direction e and returns
    (n / (2r)) * (f~(x + r e) - f~(x - r e)) * e, consuming exactly two
    oracle calls. Requires r < s * C3 so both query points stay inside the
    oracle's validity neighborhood of the feasible set.
    """

    def __init__(self, oracle, r: float, n: int, norms: NormPair,
                 p_star: float | None = None, rng: np.random.Generator | None = None):
        if n < 1:
            raise ValueError("n: must be >= 1")
        if r <= 0:
            raise ValueError("r: must be > 0")
        if not r < oracle.s * norms.C3:
            raise ValueError(f"r: must satisfy r < s*C3 (r={r}, s*C3={oracle.s * norms.C3})")
        self.oracle = oracle
        self.r = float(r)
        self.n = int(n)
        self.norms = norms
        self.p_star = float(p_star) if p_star is not None else default_p_star(norms, n)
        self.rng = rng if rng is not None else np.random.default_rng()

    def estimate_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        e = sample_sphere(self.n, self.rng)
        step = self.r * e
        fp = self.oracle.evaluate(x + step)
        fm = self.oracle.evaluate(x - step)
        val = (self.n / (2.0 * self.r)) * (fp - fm)
        if not math.isfinite(val):
            raise EstimatorError(f"non-finite estimate ({fp} vs {fm})", x=x, e=e)
        return val * e

    def smoothed_value(self, x, samples: int) -> float:
        """Monte-Carlo estimate of the sphere-smoothed value E_e[f~(x + r e)]."""
        if samples < 1:
            raise ValueError("samples: must be >= 1")
        x = np.asarray(x, dtype=float)
        acc = 0.0
        for _ in range(samples):
            e = sample_sphere(self.n, self.rng)
            acc += self.oracle.evaluate(x + self.r * e)
        return acc / samples

    def estimator_bias_norm(self, x, samples: int) -> float:
        """Dual norm of the empirical estimator mean minus a clean-value reference.

        The reference gradient of the smoothed function is averaged over the
        same directions with the noise-free value path, so the difference
        isolates the noise-induced bias (bounded by n*Delta*p_star/r).
        """
        if samples < 1000:
            raise ValueError("samples: must be >= 1000 for a meaningful bias estimate")
        x = np.asarray(x, dtype=float)
        scale = self.n / (2.0 * self.r)
        mean_est = np.zeros(self.n)
        mean_ref = np.zeros(self.n)
        for _ in range(samples):
            e = sample_sphere(self.n, self.rng)
            step = self.r * e
            xp, xm = x + step, x - step
            est = scale * (self.oracle.evaluate(xp) - self.oracle.evaluate(xm))
            ref = scale * (self.oracle.clean_value(xp) - self.oracle.clean_value(xm))
            mean_est += est * e
            mean_ref += ref * e
        mean_est /= samples
        mean_ref /= samples
        return self.norms.dual(mean_est - mean_ref)

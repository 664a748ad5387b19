"""Communication graphs, Laplacians, and the penalty lift to a single composite problem.

The mixing matrix is the graph Laplacian applied blockwise to stacked
per-node vectors; the Kronecker form is never materialized. Every counted
application is one communication round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import FeasibleSet, NormPair, make_setup
from .oracles import NoisyZeroOrderOracle, SmoothingEstimator, default_p_star
from .sliding import CompositeProblem

# Relative threshold separating the zero eigenvalue from the connectivity eigenvalue.
_EIG_REL_TOL = 1e-9


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    m: int
    edges: tuple
    topology_tag: str = "custom"

    @staticmethod
    def _validate(m, edges, tag):
        if m < 2:
            raise GraphError("m: must be >= 2")
        seen = set()
        for (i, j) in edges:
            if not (0 <= i < m and 0 <= j < m):
                raise GraphError(f"edge ({i},{j}): node out of range for m={m}")
            if i == j:
                raise GraphError(f"edge ({i},{j}): self-loop")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"edge ({i},{j}): duplicate")
            seen.add(key)
        adj = [[] for _ in range(m)]
        for (i, j) in seen:
            adj[i].append(j)
            adj[j].append(i)
        comp = [-1] * m
        label = 0
        for start in range(m):
            if comp[start] >= 0:
                continue
            stack = [start]
            comp[start] = label
            while stack:
                v = stack.pop()
                for w in adj[v]:
                    if comp[w] < 0:
                        comp[w] = label
                        stack.append(w)
            label += 1
        if label > 1:
            groups = [[v for v in range(m) if comp[v] == c] for c in range(label)]
            raise GraphError(f"graph is disconnected; components: {groups}")
        return tuple(sorted(seen)), tag

    @staticmethod
    def custom(m: int, edges, topology_tag: str = "custom") -> "Graph":
        edges, tag = Graph._validate(m, list(edges), topology_tag)
        return Graph(m, edges, tag)

    @staticmethod
    def star(m: int) -> "Graph":
        return Graph.custom(m, [(0, i) for i in range(1, m)], "star")

    @staticmethod
    def complete(m: int) -> "Graph":
        return Graph.custom(m, [(i, j) for i in range(m) for j in range(i + 1, m)], "complete")

    @staticmethod
    def chain(m: int) -> "Graph":
        return Graph.custom(m, [(i, i + 1) for i in range(m - 1)], "chain")

    @staticmethod
    def cycle(m: int) -> "Graph":
        if m < 3:
            raise GraphError("m: cycle needs m >= 3")
        return Graph.custom(m, [(i, (i + 1) % m) for i in range(m)], "cycle")


def read_edge_list(path, m: int | None = None) -> Graph:
    """Parse an edge-list file: one '<i> <j>' pair per line, 0-indexed,
    whitespace-separated, full-line '#' comments allowed."""
    edges = []
    max_node = -1
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.strip()
            if not body or body.startswith("#"):
                continue
            parts = body.split()
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected two node indices, got {body!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-integer node index in {body!r}") from None
            edges.append((i, j))
            max_node = max(max_node, i, j)
    if not edges:
        raise GraphError(f"{path}: no edges")
    return Graph.custom(m if m is not None else max_node + 1, edges)


@dataclass(frozen=True)
class Laplacian:
    graph: Graph
    W_bar: np.ndarray
    eigenvalues: np.ndarray
    lambda_max: float
    lambda_min_plus: float
    chi: float


def build_laplacian(graph: Graph) -> Laplacian:
    """Degree-diagonal minus adjacency; spectrum via symmetric eigensolve."""
    m = graph.m
    W = np.zeros((m, m))
    for (i, j) in graph.edges:
        W[i, i] += 1.0
        W[j, j] += 1.0
        W[i, j] -= 1.0
        W[j, i] -= 1.0
    eig = np.linalg.eigvalsh(W)
    lam_max = float(eig[-1])
    positive = eig[eig > _EIG_REL_TOL * max(lam_max, 1.0)]
    if positive.size == 0:
        raise GraphError("Laplacian has no positive eigenvalue")
    lam_min_plus = float(positive[0])
    return Laplacian(graph, W, eig, lam_max, lam_min_plus, lam_max / lam_min_plus)


def penalty_coefficient(M: float, m: int, lap: Laplacian | None, eps: float) -> float:
    """Penalty weight R = M^2 / (m * lambda_min_plus * eps) making the
    eps-accurate penalized solution eps-consensus-accurate.

    lap = None is the degenerate single-rig convention lambda_min_plus = 1.
    """
    if eps <= 0:
        raise ValueError("eps: must be > 0")
    if m < 1:
        raise ValueError("m: must be >= 1")
    lam = 1.0 if lap is None else lap.lambda_min_plus
    return M ** 2 / (m * lam * eps)


def dual_bound_radius(M: float, m: int, lap: Laplacian) -> float:
    """Bound on the optimal consensus multiplier norm: M / sqrt(m * lambda_min_plus)."""
    return M / np.sqrt(m * lap.lambda_min_plus)


class NetworkProblem:
    """Per-node zero-order oracles coupled by a Laplacian penalty.

    apply_W is the counted blockwise mixing step (one communication round);
    the _quiet variant serves diagnostics and never touches the counter.
    """

    def __init__(self, lap: Laplacian, n: int, node_oracles: list, R: float):
        if R <= 0:
            raise ValueError("R: must be > 0")
        if len(node_oracles) != lap.graph.m:
            raise ValueError(f"node_oracles: expected {lap.graph.m}, got {len(node_oracles)}")
        self.lap = lap
        self.n = int(n)
        self.m = lap.graph.m
        self.node_oracles = node_oracles
        self.R = float(R)
        self.L_penalty = 2.0 * R * lap.lambda_max
        self.comm_rounds = 0

    def _check_dim(self, x):
        x = np.asarray(x, dtype=float)
        if x.size != self.m * self.n:
            raise ValueError(f"x: expected stacked dimension {self.m * self.n}, got {x.size}")
        return x

    def apply_W_quiet(self, x) -> np.ndarray:
        x = self._check_dim(x)
        return (self.lap.W_bar @ x.reshape(self.m, self.n)).ravel()

    def apply_W(self, x) -> np.ndarray:
        self.comm_rounds += 1
        return self.apply_W_quiet(x)

    def consensus_violation(self, x) -> dict:
        """{'sq_norm_Wx': ||Wx||_2^2, 'sq_norm_sqrtWx': <x, Wx>}; uncounted.

        Must tolerate diverged iterates: overflow propagates as inf/nan for
        the caller's finiteness checks instead of warning.
        """
        x = self._check_dim(x)
        with np.errstate(over="ignore", invalid="ignore"):
            Wx = self.apply_W_quiet(x)
            return {"sq_norm_Wx": float(Wx @ Wx),
                    "sq_norm_sqrtWx": max(float(x @ Wx), 0.0)}


class _LiftedOracle:
    """Stacked zero-order oracle: one call evaluates every node's local term
    on its own block (each node oracle counts one call) and averages."""

    def __init__(self, net: NetworkProblem):
        self.net = net
        self.M = max(o.M for o in net.node_oracles) / np.sqrt(net.m)
        self.s = min(o.s for o in net.node_oracles)
        self.Delta = max(o.Delta for o in net.node_oracles)
        self.call_counter = 0

    def evaluate(self, x) -> float:
        self.call_counter += 1
        net = self.net
        blocks = np.asarray(x, dtype=float).reshape(net.m, net.n)
        total = 0.0
        for oracle, block in zip(net.node_oracles, blocks):
            total += oracle.evaluate(block)
        return total / net.m

    def clean_value(self, x) -> float:
        net = self.net
        blocks = np.asarray(x, dtype=float).reshape(net.m, net.n)
        return sum(o.clean_value(b) for o, b in zip(net.node_oracles, blocks)) / net.m


def lift_to_penalized(net: NetworkProblem, setup_per_node, *, r: float,
                      sphere_rng: np.random.Generator,
                      node_subgrads: list | None = None,
                      psi0_reference: float | None = None) -> CompositeProblem:
    """Lift per-node objectives to one composite problem on the stacked space.

    f becomes the node average through a stacked zero-order oracle; g becomes
    the penalty R <x, Wx> with gradient 2 R W x (one communication round per
    counted evaluation or gradient). Supports whole_space and box per-node
    sets; diameters scale by sqrt(m), the Lipschitz bound by 1/sqrt(m).
    """
    fs = setup_per_node.feasible
    m, n = net.m, net.n
    if fs.n != n:
        raise ValueError(f"setup_per_node: dimension {fs.n} != node dimension {n}")
    if setup_per_node.dgf_id != "half_sq_euclid":
        raise ValueError("lift_to_penalized: only the Euclidean setup lifts")
    if fs.kind == "whole_space":
        stacked_set = FeasibleSet.whole_space(m * n, bound_hint=fs.bound_hint * np.sqrt(m))
    elif fs.kind == "box":
        stacked_set = FeasibleSet.box(np.tile(fs.lo, m), np.tile(fs.hi, m))
    else:
        raise ValueError(f"lift_to_penalized: per-node set kind '{fs.kind}' unsupported")
    setup = make_setup(NormPair.euclidean(), stacked_set, "half_sq_euclid",
                       D_X=setup_per_node.D_X * np.sqrt(m))

    oracle = _LiftedOracle(net)
    estimator = SmoothingEstimator(oracle, r=r, n=m * n, norms=setup.norms, rng=sphere_rng)

    def g_value(x):
        return net.R * net.consensus_violation(x)["sq_norm_sqrtWx"]

    def g_value_counted(x):
        x = net._check_dim(x)
        return net.R * max(float(x @ net.apply_W(x)), 0.0)

    def g_grad(x):
        return 2.0 * net.R * net.apply_W(x)

    f_subgrad = None
    if node_subgrads is not None:
        def f_subgrad(x):
            blocks = np.asarray(x, dtype=float).reshape(m, n)
            out = np.empty_like(blocks)
            for i, (sg, block) in enumerate(zip(node_subgrads, blocks)):
                out[i] = sg(block)
            return out.ravel() / m

    return CompositeProblem(setup, g_value, g_grad, estimator,
                            psi0_reference=psi0_reference, f_subgrad=f_subgrad,
                            g_value_counted=g_value_counted,
                            comm_counter=lambda: net.comm_rounds,
                            consensus_diag=lambda x: net.consensus_violation(x)["sq_norm_sqrtWx"],
                            L=net.L_penalty)

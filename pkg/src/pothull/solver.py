"""Exact discrete transport: optimal plan, dual pair, and the optimal face.

The primal is solved by the transportation (network) simplex method on the
bipartite graph ``sources x targets``. A basis is a spanning tree with
``n + m - 1`` cells; zero-mass basic cells are kept in the tree but never
reported as plan entries.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import DEFAULT_TOL, CostSpec, DiscreteMeasure, cost_matrix, feasibility_residual
from .errors import InvariantViolation, PreconditionError, SolverError

MASS_TOL = 1e-14


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling; ``entries`` rows are ``(i, j, mass)``."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        for name in ("rows", "cols"):
            a = np.asarray(getattr(self, name), dtype=np.int64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        m = np.asarray(self.mass, dtype=float)
        m.flags.writeable = False
        object.__setattr__(self, "mass", m)

    @classmethod
    def from_dense(cls, P: np.ndarray, tol: float = MASS_TOL) -> "TransportPlan":
        i, j = np.nonzero(P > tol)
        return cls(i, j, P[i, j], P.shape)

    @classmethod
    def from_entries(cls, entries, shape) -> "TransportPlan":
        e = np.asarray(entries, dtype=float).reshape(-1, 3)
        return cls(e[:, 0].astype(np.int64), e[:, 1].astype(np.int64), e[:, 2], tuple(shape))

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.rows, self.cols, self.mass)]

    @property
    def support(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in zip(self.rows, self.cols)}

    def dense(self, n: Optional[int] = None, m: Optional[int] = None) -> np.ndarray:
        n = self.shape[0] if n is None else n
        m = self.shape[1] if m is None else m
        P = np.zeros((n, m))
        np.add.at(P, (self.rows, self.cols), self.mass)
        return P

    def marginal_error(self, rho: DiscreteMeasure, mu: DiscreteMeasure) -> float:
        P = self.dense(rho.size, mu.size)
        return float(max(np.max(np.abs(P.sum(1) - rho.weights)),
                         np.max(np.abs(P.sum(0) - mu.weights))))


@dataclass(frozen=True)
class Solution:
    plan: TransportPlan
    phi: np.ndarray
    psi: np.ndarray
    value: float
    iterations: int = 0
    cost_table: np.ndarray = field(default=None, repr=False)

    def __iter__(self):
        # allows ``plan, phi, psi, value = solve(...)``
        return iter((self.plan, self.phi, self.psi, self.value))


# ---------------------------------------------------------------------------
# Network simplex
# ---------------------------------------------------------------------------


class _Basis:
    """Spanning tree over nodes ``0..n-1`` (sources) and ``n..n+m-1`` (targets)."""

    def __init__(self, n: int, m: int):
        self.n, self.m = n, m
        self.adj: list[set[int]] = [set() for _ in range(n + m)]
        self.flow: dict[tuple[int, int], float] = {}

    def add(self, i: int, j: int, x: float):
        self.flow[(i, j)] = x
        self.adj[i].add(self.n + j)
        self.adj[self.n + j].add(i)

    def remove(self, i: int, j: int):
        del self.flow[(i, j)]
        self.adj[i].discard(self.n + j)
        self.adj[self.n + j].discard(i)

    def potentials(self, C: np.ndarray):
        """Solve ``u_i + v_j = C_ij`` on the tree with ``u_0 = 0``; also return parents/depths."""
        n = self.n
        N = n + self.m
        pot = np.zeros(N)
        parent = np.full(N, -1)
        depth = np.zeros(N, dtype=np.int64)
        seen = np.zeros(N, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            a = queue.popleft()
            for b in self.adj[a]:
                if seen[b]:
                    continue
                seen[b] = True
                parent[b] = a
                depth[b] = depth[a] + 1
                if a < n:  # a source, b target: v_b = C - u_a
                    pot[b] = C[a, b - n] - pot[a]
                else:
                    pot[b] = C[b, a - n] - pot[a]
                queue.append(b)
        if not seen.all():
            raise SolverError("basis is not a spanning tree")
        return pot[:n], pot[n:], parent, depth

    def tree_path(self, a: int, b: int, parent, depth) -> list[int]:
        """Node sequence from ``a`` to ``b`` along the tree."""
        left, right = [a], [b]
        while depth[left[-1]] > depth[right[-1]]:
            left.append(parent[left[-1]])
        while depth[right[-1]] > depth[left[-1]]:
            right.append(parent[right[-1]])
        while left[-1] != right[-1]:
            left.append(parent[left[-1]])
            right.append(parent[right[-1]])
        return left + right[-2::-1]


def _initial_basis(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> _Basis:
    """Least-cost allocation, completed to a spanning tree with zero-mass cells."""
    n, m = C.shape
    basis = _Basis(n, m)
    ufp = list(range(n + m))

    def find(x):
        while ufp[x] != x:
            ufp[x] = ufp[ufp[x]]
            x = ufp[x]
        return x

    s, d = a.astype(float).copy(), b.astype(float).copy()
    order = np.argsort(C, axis=None, kind="stable")
    for k in order:
        i, j = divmod(int(k), m)
        if s[i] <= 0 or d[j] <= 0:
            continue
        ri, rj = find(i), find(n + j)
        if ri == rj:
            continue
        if abs(s[i] - d[j]) <= MASS_TOL:
            q = s[i]
            s[i] = d[j] = 0.0
        elif s[i] < d[j]:
            q = s[i]
            s[i], d[j] = 0.0, d[j] - q
        else:
            q = d[j]
            s[i], d[j] = s[i] - q, 0.0
        basis.add(i, j, q)
        ufp[ri] = rj
    if len(basis.flow) < n + m - 1:
        for k in order:
            i, j = divmod(int(k), m)
            ri, rj = find(i), find(n + j)
            if ri != rj:
                basis.add(i, j, 0.0)
                ufp[ri] = rj
                if len(basis.flow) == n + m - 1:
                    break
    return basis


def solve(rho: DiscreteMeasure, mu: DiscreteMeasure, c: CostSpec,
          max_iter: Optional[int] = None, C: Optional[np.ndarray] = None) -> Solution:
    """Optimal plan and dual pair of the discrete transport problem.

    Pricing is Dantzig (most negative reduced cost) and switches to Bland's
    smallest-index rule after a run of degenerate pivots; leaving-cell ties
    are broken by smallest index as well.
    """
    C = cost_matrix(c, rho, mu) if C is None else np.asarray(C, dtype=float)
    n, m = C.shape
    a, b = rho.weights, mu.weights
    scale = 1.0 + float(np.max(np.abs(C)))
    price_tol = 1e-12 * scale
    max_iter = max_iter if max_iter is not None else 50 * (n + m) * max(1, min(n, m)) + 1000

    basis = _initial_basis(a, b, C)
    degenerate_run = 0
    it = 0
    while True:
        u, v, parent, depth = basis.potentials(C)
        R = C - u[:, None] - v[None, :]
        if degenerate_run >= 20:
            neg = np.flatnonzero(R.ravel() < -price_tol)
            if neg.size == 0:
                break
            k = int(neg[0])
        else:
            k = int(np.argmin(R))
            if R.flat[k] >= -price_tol:
                break
        if it >= max_iter:
            raise SolverError(f"simplex stalled after {it} iterations", iterations=it)
        it += 1
        i_in, j_in = divmod(k, m)
        # cycle: entering cell (+), then the tree path from target j_in back to source i_in
        path = basis.tree_path(n + j_in, i_in, parent, depth)
        cells, signs = [], []
        for t in range(len(path) - 1):
            p, q = path[t], path[t + 1]
            cell = (q, p - n) if p >= n else (p, q - n)
            cells.append(cell)
            signs.append(-1 if t % 2 == 0 else 1)
        minus = [cells[t] for t in range(len(cells)) if signs[t] < 0]
        theta = min(basis.flow[cl] for cl in minus)
        leaving = min((cl for cl in minus if basis.flow[cl] <= theta),
                      key=lambda cl: cl[0] * m + cl[1])
        for cl, sg in zip(cells, signs):
            basis.flow[cl] += sg * theta
        basis.remove(*leaving)
        basis.add(i_in, j_in, theta)
        degenerate_run = degenerate_run + 1 if theta <= MASS_TOL else 0

    P = np.zeros((n, m))
    for (i, j), x in basis.flow.items():
        if x > MASS_TOL:
            P[i, j] = x
    plan = TransportPlan.from_dense(P)
    value = float(np.sum(plan.mass * C[plan.rows, plan.cols]))
    return Solution(plan, u, v, value, iterations=it, cost_table=C)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalityReport:
    marginal_error: float
    negative_mass: float
    feasibility_violation: float
    worst_constraint: tuple[int, int]
    gap: float
    slackness_violation: float
    worst_slackness: Optional[tuple[int, int]]
    tol: float

    @property
    def optimal(self) -> bool:
        return (
            self.marginal_error <= self.tol
            and self.negative_mass <= self.tol
            and self.feasibility_violation <= self.tol
            and abs(self.gap) <= self.tol
            and self.slackness_violation <= self.tol
        )

    @property
    def verdict(self) -> str:
        return "optimal" if self.optimal else "non-optimal"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "marginal_error": self.marginal_error,
            "negative_mass": self.negative_mass,
            "feasibility_violation": self.feasibility_violation,
            "worst_constraint": list(self.worst_constraint),
            "gap": self.gap,
            "slackness_violation": self.slackness_violation,
            "worst_slackness": None if self.worst_slackness is None else list(self.worst_slackness),
            "tol": self.tol,
        }


def verify_optimal(plan, phi, psi, rho: DiscreteMeasure, mu: DiscreteMeasure, c: CostSpec,
                   tol: float = DEFAULT_TOL, C: Optional[np.ndarray] = None) -> OptimalityReport:
    """Feasibility residuals, duality gap and worst complementary-slackness violation."""
    C = cost_matrix(c, rho, mu) if C is None else C
    P = plan.dense(*C.shape) if hasattr(plan, "dense") else np.asarray(plan, dtype=float)
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    marg = float(max(np.max(np.abs(P.sum(1) - rho.weights)), np.max(np.abs(P.sum(0) - mu.weights))))
    negm = float(max(0.0, -P.min()))
    feas, worst = feasibility_residual(phi, psi, C)
    gap = float(np.sum(P * C) - (rho.weights @ phi + mu.weights @ psi))
    R = C - phi[:, None] - psi[None, :]
    on = P > MASS_TOL
    if np.any(on):
        slack = np.where(on, np.abs(R), -np.inf)
        k = int(np.argmax(slack))
        ws = divmod(k, C.shape[1])
        sv = float(slack.flat[k])
    else:
        ws, sv = None, 0.0
    return OptimalityReport(marg, negm, max(feas, 0.0), worst, gap, sv, ws, tol)


# ---------------------------------------------------------------------------
# Optimal face
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimalFace:
    """One optimal plan together with every cell used by some optimal plan."""

    base_plan: TransportPlan
    usable: np.ndarray  # boolean (n, m)
    reduced_costs: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    value: float

    def __post_init__(self):
        for name in ("usable", "reduced_costs", "phi", "psi"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def usable_edges(self) -> set[tuple[int, int]]:
        i, j = np.nonzero(self.usable)
        return {(int(a), int(b)) for a, b in zip(i, j)}

    @property
    def shape(self) -> tuple[int, int]:
        return self.usable.shape

    def to_dict(self) -> dict:
        i, j = np.nonzero(self.usable)
        return {
            "plan": [[a, b, w] for a, b, w in self.base_plan.entries],
            "usable_edges": [[int(a), int(b)] for a, b in zip(i, j)],
            "value": self.value,
            "phi": self.phi.tolist(),
            "psi": self.psi.tolist(),
        }


def face_tolerance(value: float, tol: float = DEFAULT_TOL) -> float:
    return tol * (1.0 + abs(value))


def optimal_face(plan: TransportPlan, phi, psi, rho: DiscreteMeasure, mu: DiscreteMeasure,
                 c: CostSpec, tol: float = DEFAULT_TOL, C: Optional[np.ndarray] = None) -> OptimalFace:
    """Cells carrying mass in at least one optimal plan.

    A zero-reduced-cost cell ``(i, j)`` outside the base plan is usable iff
    the residual digraph (forward arcs ``i -> j`` on every zero-reduced-cost
    cell, backward arcs ``j -> i`` on every positive base-plan cell) has a
    cycle through it, i.e. iff ``i`` and ``j`` share a strongly connected
    component.
    """
    C = cost_matrix(c, rho, mu) if C is None else C
    n, m = C.shape
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    report = verify_optimal(plan, phi, psi, rho, mu, c, tol=tol, C=C)
    value = float(np.sum(plan.mass * C[plan.rows, plan.cols]))
    ftol = face_tolerance(value, tol)
    if not (report.marginal_error <= ftol and report.feasibility_violation <= ftol
            and abs(report.gap) <= ftol and report.slackness_violation <= ftol):
        raise PreconditionError(
            f"inputs are not an optimal primal/dual pair (gap={report.gap:.3e}, "
            f"feasibility={report.feasibility_violation:.3e})"
        )
    R = C - phi[:, None] - psi[None, :]
    tight = R <= ftol
    ti, tj = np.nonzero(tight)
    pr, pc = plan.rows, plan.cols
    src = np.concatenate([ti, n + pc])
    dst = np.concatenate([n + tj, pr])
    G = coo_matrix((np.ones(src.shape[0]), (src, dst)), shape=(n + m, n + m)).tocsr()
    _, label = connected_components(G, directed=True, connection="strong")
    usable = tight & (label[:n, None] == label[None, n:])
    usable[pr, pc] = True
    if not usable.any(axis=1).all():
        raise InvariantViolation("some source atom has no usable edge")
    return OptimalFace(plan, usable, R, phi, psi, value)


def solve_face(rho: DiscreteMeasure, mu: DiscreteMeasure, c: CostSpec,
               tol: float = DEFAULT_TOL) -> tuple[Solution, OptimalFace]:
    """Convenience: ``solve`` followed by ``optimal_face`` on the same cost table."""
    sol = solve(rho, mu, c)
    face = optimal_face(sol.plan, sol.phi, sol.psi, rho, mu, c, tol=tol, C=sol.cost_table)
    return sol, face

"""Chain graph, the shortest-path quasi-metric lambda, and the potential set it cuts out.

Orientation convention: ``lam[x, x0]`` bounds ``phi[x] - phi[x0]`` from above
for every Kantorovich potential ``phi`` (general-cost sign convention). It is
the shortest-path distance from ``x0`` to ``x`` in the chain graph, whose arc
``u -> v`` has weight ``min_j C[v, j] - C[u, j]`` over targets ``j`` usable at ``u``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import DEFAULT_TOL, CostSpec, DiscreteMeasure, cost_matrix
from .errors import DomainError, InvariantViolation, NegativeCycleError
from .solver import OptimalFace

LAMBDA_XCHECK_TOL = 1e-12
RELAX_RTOL = 1e-13


def _readonly(a) -> np.ndarray:
    a = np.array(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# Chain graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainGraph:
    """Complete digraph on source atoms; ``weight[u, v]`` is the arc ``u -> v``."""

    weight: np.ndarray
    witness: np.ndarray
    usable: np.ndarray
    cost_table: np.ndarray

    def __post_init__(self):
        for name in ("weight", "witness", "usable", "cost_table"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def size(self) -> int:
        return self.weight.shape[0]

    def reversed_weights(self) -> np.ndarray:
        """Arc ``u -> v`` weighs ``min_j C[u, j] - C[v, j]`` over ``j`` usable at ``v``.

        Built from the cost table directly, not by transposing ``weight``, so
        shortest paths on it give an independent route to ``lam[x0, x]``.
        """
        C, U = self.cost_table, self.usable
        n = C.shape[0]
        R = np.empty((n, n))
        for v in range(n):
            J = np.flatnonzero(U[v])
            R[:, v] = np.min(C[:, J] - C[v, J], axis=1)
        np.fill_diagonal(R, 0.0)
        return R


def build_chain_graph(face: OptimalFace, c: Optional[CostSpec] = None,
                      rho: Optional[DiscreteMeasure] = None, mu: Optional[DiscreteMeasure] = None,
                      C: Optional[np.ndarray] = None) -> ChainGraph:
    """Chain graph of an optimal face; ``C`` may be passed to skip re-evaluating the cost."""
    if C is None:
        if c is None or rho is None or mu is None:
            raise DomainError("need either a cost table or (c, rho, mu)")
        C = cost_matrix(c, rho, mu)
    C = np.asarray(C, dtype=float)
    U = np.asarray(face.usable, dtype=bool)
    if U.shape != C.shape:
        raise DomainError(f"face shape {U.shape} does not match cost table {C.shape}")
    n = C.shape[0]
    if not U.any(axis=1).all():
        bad = int(np.flatnonzero(~U.any(axis=1))[0])
        raise InvariantViolation(f"source atom {bad} has no usable edge")
    W = np.empty((n, n))
    wit = np.empty((n, n), dtype=np.int64)
    for u in range(n):
        J = np.flatnonzero(U[u])
        D = C[:, J] - C[u, J]
        k = np.argmin(D, axis=1)
        W[u] = D[np.arange(n), k]
        wit[u] = J[k]
    # the diagonal is an exact min over zeros
    np.fill_diagonal(W, 0.0)
    return ChainGraph(W, wit, U, C)


# ---------------------------------------------------------------------------
# Shortest paths
# ---------------------------------------------------------------------------


def spfa(W: np.ndarray, source: int) -> np.ndarray:
    """Single-source shortest paths on a dense weight matrix, negative arcs allowed.

    Queue-based label correcting (Bellman-Ford with a FIFO work list). A node
    dequeued ``n`` times or more means a negative cycle is reachable.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    atol = RELAX_RTOL * (1.0 + float(np.max(np.abs(W))))
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    in_queue = np.zeros(n, dtype=bool)
    count = np.zeros(n, dtype=np.int64)
    queue = deque([source])
    in_queue[source] = True
    while queue:
        u = queue.popleft()
        in_queue[u] = False
        count[u] += 1
        if count[u] > n:
            raise NegativeCycleError(f"negative cycle reachable from node {source}")
        cand = dist[u] + W[u]
        better = cand < dist - atol
        if better.any():
            idx = np.flatnonzero(better)
            dist[idx] = cand[idx]
            for v in idx[~in_queue[idx]]:
                queue.append(int(v))
                in_queue[v] = True
    return dist


def _group_min(values: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """Column-block minimum: out[:, g] = min of values[:, k] over k with groups[k] == g."""
    order = np.argsort(groups, kind="stable")
    g = groups[order]
    starts = np.flatnonzero(np.r_[True, g[1:] != g[:-1]])
    out = np.full((values.shape[0], n_groups), np.inf)
    out[:, g[starts]] = np.minimum.reduceat(values[:, order], starts, axis=1)
    return out


def all_pairs_lambda(C: np.ndarray, usable: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """All-pairs ``lam[x, x0]`` by round-based label correcting on the bipartite chain graph.

    A chain alternates source -> target arcs (weight ``-C[x, j]``, usable cells only)
    and target -> source arcs (weight ``C[x, j]``). ``S[j, x]`` holds the best
    distance from target ``j`` to source ``x``; each round relaxes every path
    through one more source atom. Without negative cycles the labels settle
    after at most ``m`` rounds.
    """
    C = np.asarray(C, dtype=float)
    n, m = C.shape
    ex, ej = np.nonzero(usable)
    # improvements below this are rounding noise around zero-weight cycles
    atol = RELAX_RTOL * (1.0 + float(np.max(np.abs(C))))
    S = C.T.copy()
    for _ in range(m + 1):
        # T[j, k]: best distance target j -> target k through at least one source atom
        T = _group_min(S[:, ex] - C[ex, ej][None, :], ej, m)
        # next label: j -> k -> x
        S_new = S.copy()
        for k in range(m):
            np.minimum(S_new, T[:, k, None] + C[None, :, k], out=S_new)
        better = S_new < S - atol
        if not better.any():
            break
        S = np.where(better, S_new, S)
    else:
        raise NegativeCycleError("labels failed to settle: negative cycle in the chain graph")
    if np.any(np.diag(T) < -tol):
        raise NegativeCycleError(f"negative cycle through a target (weight {np.diag(T).min():.3e})")
    # lam[x, x0] = min over j usable at x0 of -C[x0, j] + S[j, x]
    L0 = _group_min(S[ej, :].T - C[ex, ej][None, :], ex, n)  # rows x, columns x0
    cyc = np.diag(L0)
    if np.any(cyc < -tol):
        raise NegativeCycleError(f"negative cycle through a source (weight {cyc.min():.3e})")
    np.fill_diagonal(L0, 0.0)
    return L0


# ---------------------------------------------------------------------------
# Certificate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PotentialCertificate:
    """Half-space description of the potential set plus its extremal elements.

    ``lam[x, x0]`` (row ``x``, column ``x0``); ``phi_max = lam[:, anchor]`` and
    ``phi_min = -lam[anchor, :]`` are the largest and smallest potentials
    vanishing at the anchor.
    """

    anchor: int
    lam: np.ndarray
    phi_max: np.ndarray
    phi_min: np.ndarray
    sym: np.ndarray
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        for name in ("lam", "phi_max", "phi_min", "sym"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def size(self) -> int:
        return self.lam.shape[0]

    @property
    def intervals(self) -> np.ndarray:
        """Per atom ``x``: admissible range ``[-lam(x0, x), lam(x, x0)]`` of ``phi(x) - phi(x0)``."""
        return np.column_stack([self.phi_min, self.phi_max])

    def reanchor(self, anchor: int) -> "PotentialCertificate":
        return _certificate_from_lambda(self.lam, anchor, self.tol)

    def to_dict(self) -> dict:
        cert, exact = diameter_linf(self)
        return {
            "anchor": self.anchor,
            "lambda": self.lam.tolist(),
            "phi_max": self.phi_max.tolist(),
            "phi_min": self.phi_min.tolist(),
            "diam_linf_certified": cert,
            "diam_linf_exact": exact,
        }


def _certificate_from_lambda(L: np.ndarray, anchor: int, tol: float) -> PotentialCertificate:
    n = L.shape[0]
    if not 0 <= anchor < n:
        raise DomainError(f"anchor {anchor} out of range for {n} source atoms")
    return PotentialCertificate(anchor, L, L[:, anchor].copy(), -L[anchor, :].copy(), L + L.T, tol)


def compute_lambda(g: ChainGraph, anchor: Optional[int] = None, tol: float = DEFAULT_TOL,
                   crosscheck: bool = True) -> PotentialCertificate:
    """Certificate for the potential set; ``anchor`` defaults to atom 0.

    With ``crosscheck`` the anchor column is recomputed by single-source
    label correcting on the chain graph and the anchor row by the reversed-role
    weights; both must agree with the all-pairs labels to 1e-12 (relative to
    the cost scale).
    """
    anchor = 0 if anchor is None else int(anchor)
    L = all_pairs_lambda(g.cost_table, g.usable, tol)
    if crosscheck:
        scale = 1.0 + float(np.max(np.abs(g.cost_table)))
        col = spfa(g.weight, anchor)
        row = spfa(g.reversed_weights(), anchor)
        err = max(np.max(np.abs(col - L[:, anchor])), np.max(np.abs(row - L[anchor, :])))
        if err > LAMBDA_XCHECK_TOL * scale:
            raise InvariantViolation(f"shortest-path cross-check mismatch {err:.3e}")
    return _certificate_from_lambda(L, anchor, tol)


# Public alias; ``lambda`` itself is reserved in Python
lambda_certificate = compute_lambda


def min_cycle_weight(W: np.ndarray) -> float:
    """Lightest directed cycle (length >= 2) of a dense weight matrix, by Floyd-Warshall.

    If a negative cycle exists the returned value is negative but not
    necessarily the lightest simple cycle.
    """
    D = np.array(W, dtype=float)
    np.fill_diagonal(D, np.inf)
    for k in range(D.shape[0]):
        np.minimum(D, D[:, k, None] + D[None, k, :], out=D)
    return float(np.min(np.diag(D))) if D.size > 1 else 0.0


def is_member(phi, cert: PotentialCertificate, tol: Optional[float] = None) -> tuple[bool, float, tuple[int, int]]:
    """Whether ``phi`` is a Kantorovich potential; returns (verdict, worst violation, worst pair)."""
    tol = cert.tol if tol is None else tol
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (cert.size,):
        raise DomainError(f"phi has shape {phi.shape}, expected ({cert.size},)")
    if not np.all(np.isfinite(phi)):
        raise DomainError("phi must be finite")
    V = phi[:, None] - phi[None, :] - cert.lam
    k = int(np.argmax(V))
    u, v = divmod(k, cert.size)
    worst = float(V.flat[k])
    return worst <= tol, max(worst, 0.0), (u, v)


def diameter_linf(cert: PotentialCertificate) -> tuple[float, float]:
    """(certified anchored bound, exact diameter modulo constants)."""
    certified = float(np.max(cert.sym[:, cert.anchor]))
    exact = 0.5 * float(np.max(cert.sym))
    return max(certified, 0.0), max(exact, 0.0)


def diameter_lq(cert: PotentialCertificate, rho: DiscreteMeasure, q: float) -> float:
    """Anchored ``L^q(rho)`` bound ``(sum_x rho(x) sym(x, anchor)^q)^(1/q)``."""
    if q < 1:
        raise DomainError("q must be >= 1")
    s = np.maximum(cert.sym[:, cert.anchor], 0.0)
    w = rho.weights
    top = float(s.max()) if s.size else 0.0
    if top == 0.0:
        return 0.0
    # scale out the maximum so large q does not underflow
    return top * float(np.sum(w * (s / top) ** q)) ** (1.0 / q)


@dataclass(frozen=True)
class Components:
    connected: bool
    source_labels: np.ndarray
    target_labels: np.ndarray

    @property
    def count(self) -> int:
        return int(max(self.source_labels.max(initial=-1), self.target_labels.max(initial=-1)) + 1)

    def partition(self) -> list[dict]:
        out = []
        for k in range(self.count):
            out.append({
                "sources": np.flatnonzero(self.source_labels == k).tolist(),
                "targets": np.flatnonzero(self.target_labels == k).tolist(),
            })
        return out


def uniqueness_predictor(face: OptimalFace) -> Components:
    """Connected components of the bipartite graph on atoms with usable edges."""
    U = np.asarray(face.usable, dtype=bool)
    n, m = U.shape
    i, j = np.nonzero(U)
    G = coo_matrix((np.ones(i.size), (i, n + j)), shape=(n + m, n + m))
    k, labels = connected_components(G, directed=False)
    return Components(k == 1, labels[:n], labels[n:])


# ---------------------------------------------------------------------------
# Sign conventions
# ---------------------------------------------------------------------------


def from_brenier(phi_b, points=None, kind: str = "bilinear") -> np.ndarray:
    """Brenier (convex) potential to the general-cost convention.

    For the bilinear cost this is plain negation. For the quadratic cost the
    general potential is ``|x|^2 - 2 phi_b`` (the Minkowski relation between
    the two potential sets).
    """
    phi_b = np.asarray(phi_b, dtype=float)
    if kind == "bilinear":
        return -phi_b
    if kind == "quadratic":
        x = np.asarray(points, dtype=float)
        return np.sum(x * x, axis=1) - 2.0 * phi_b
    raise DomainError(f"no Brenier convention for cost kind {kind!r}")


def to_brenier(phi, points=None, kind: str = "bilinear") -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if kind == "bilinear":
        return -phi
    if kind == "quadratic":
        x = np.asarray(points, dtype=float)
        return 0.5 * (np.sum(x * x, axis=1) - phi)
    raise DomainError(f"no Brenier convention for cost kind {kind!r}")


def certify(rho: DiscreteMeasure, mu: DiscreteMeasure, c: CostSpec, anchor: Optional[int] = None,
            tol: float = DEFAULT_TOL):
    """Solve, build the face and chain graph, and return ``(solution, face, graph, certificate)``."""
    from .solver import solve_face

    sol, face = solve_face(rho, mu, c, tol=tol)
    g = build_chain_graph(face, C=sol.cost_table)
    cert = compute_lambda(g, anchor, tol)
    return sol, face, g, cert

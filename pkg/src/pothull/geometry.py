"""Hausdorff distances, grid paths, piecewise-linear curves and the curve bound."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, Delaunay, HalfspaceIntersection, QhullError, cKDTree
from scipy.spatial.distance import pdist

from .core import Box, CostConstants, CostSpec, pairwise_cost
from .errors import DomainError

GRID_TOL = 1e-9


def _as_points(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] == 0:
        raise DomainError("point set must be a nonempty (n, d) array")
    return A


# ---------------------------------------------------------------------------
# Hausdorff distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampledSet:
    """A continuum set given only through samples whose mesh is ``resolution``.

    Distances to it are exact for the samples and carry an error of at most
    ``resolution``; results computed against it are flagged as limited.
    """

    points: np.ndarray
    resolution: float


@dataclass(frozen=True)
class HausdorffResult:
    value: float
    resolution_limited: bool = False
    resolution: float = 0.0

    def __float__(self) -> float:
        return self.value


def _directed_points(A: np.ndarray, B: np.ndarray) -> float:
    """sup over a in A of dist(a, B)."""
    d, _ = cKDTree(B).query(A)
    return float(np.max(d))


def _dist_to_box(A: np.ndarray, box: Box) -> np.ndarray:
    diff = A - np.clip(A, box.lo, box.hi)
    return np.sqrt(np.sum(diff * diff, axis=1))


def _max_envelope_1d(a: np.ndarray, w: np.ndarray, lo: float, hi: float) -> float:
    """max over t in [lo, hi] of min_k sqrt((t - a_k)^2 + w_k)."""
    # power cell of k on the line: 2 (a_j - a_k) t <= a_j^2 + w_j - a_k^2 - w_k for all j
    A = 2.0 * (a[None, :] - a[:, None])
    B = (a * a + w)[None, :] - (a * a + w)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = B / A
    upper = np.where(A > 0, t, np.inf)
    lower = np.where(A < 0, t, -np.inf)
    infeasible = (A == 0) & (B < 0)
    hi_k = np.minimum(np.min(upper, axis=1), hi)
    lo_k = np.maximum(np.max(lower, axis=1), lo)
    ok = (lo_k <= hi_k) & ~infeasible.any(axis=1)
    best = 0.0
    for t_end in (lo_k[ok], hi_k[ok]):
        v = (t_end - a[ok]) ** 2 + w[ok]
        best = max(best, float(np.max(v)))
    return float(np.sqrt(best))


def _interior_point(H: np.ndarray, guess: np.ndarray) -> Optional[np.ndarray]:
    """Strictly interior point of {x : H[:, :-1] x + H[:, -1] <= 0}, or None if the set is thin."""
    A, b = H[:, :-1], -H[:, -1]
    norms = np.linalg.norm(A, axis=1)
    slack = b - A @ guess
    if np.all(slack > 1e-9 * (1.0 + norms)):
        return guess
    k = A.shape[1]
    res = linprog(np.r_[np.zeros(k), -1.0], A_ub=np.column_stack([A, norms]), b_ub=b,
                  bounds=[(None, None)] * k + [(0, None)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        return None
    return res.x[:k]


def _max_envelope_nd(S: np.ndarray, w: np.ndarray, box: Box, neighbours) -> float:
    """max over x in box of min_k sqrt(|x - S_k|^2 + w_k), via the power diagram clipped to the box."""
    n, k = S.shape
    box_h = np.vstack([
        np.column_stack([np.eye(k), -box.hi]),
        np.column_stack([-np.eye(k), box.lo]),
    ])
    centre = 0.5 * (box.lo + box.hi)
    sq = np.sum(S * S, axis=1) + w
    best = 0.0
    for i in range(n):
        J = neighbours(i)
        # |x - S_i|^2 + w_i <= |x - S_j|^2 + w_j  <=>  2 (S_j - S_i) x + sq_i - sq_j <= 0
        H = np.vstack([np.column_stack([2.0 * (S[J] - S[i]), sq[i] - sq[J]]), box_h])
        guess = np.clip(S[i], box.lo, box.hi)
        guess = guess + 1e-7 * (centre - guess)
        ip = _interior_point(H, guess)
        if ip is None:
            continue
        try:
            verts = HalfspaceIntersection(H, ip).intersections
        except QhullError:
            continue
        v = np.sum((verts - S[i]) ** 2, axis=1) + w[i]
        best = max(best, float(np.max(v)))
    return float(np.sqrt(best))


def _directed_box_to_points(box: Box, A: np.ndarray) -> float:
    """sup over b in box of dist(b, A), exact."""
    free = box.widths > 0
    fixed = ~free
    w = np.sum((A[:, fixed] - box.lo[fixed]) ** 2, axis=1)
    k = int(free.sum())
    if k == 0:
        return float(np.sqrt(np.min(w)))
    S = A[:, free]
    sub = Box(box.lo[free], box.hi[free])
    if k == 1:
        return _max_envelope_1d(S[:, 0], w, float(sub.lo[0]), float(sub.hi[0]))
    grid = _product_grid_axes(S)
    if grid is not None:
        # distance to a product set splits over coordinates
        total = 0.0
        for j, u in enumerate(grid):
            total += _max_envelope_1d(u, np.zeros_like(u), float(sub.lo[j]), float(sub.hi[j])) ** 2
        extra = np.unique(w)
        if extra.size == 1:
            return float(np.sqrt(total + extra[0]))
    if np.all(w == w[0]) and S.shape[0] > k + 1:
        try:
            tri = Delaunay(S)
            indptr, indices = tri.vertex_neighbor_vertices
            return _max_envelope_nd(S, w, sub, lambda i: indices[indptr[i]:indptr[i + 1]])
        except QhullError:
            pass
    everyone = np.arange(S.shape[0])
    return _max_envelope_nd(S, w, sub, lambda i: everyone[everyone != i])


def _product_grid_axes(S: np.ndarray) -> Optional[list[np.ndarray]]:
    """Per-axis coordinate sets if ``S`` is exactly their Cartesian product."""
    axes = [np.unique(S[:, j]) for j in range(S.shape[1])]
    if int(np.prod([a.size for a in axes])) != S.shape[0]:
        return None
    idx = np.column_stack([np.searchsorted(a, S[:, j]) for j, a in enumerate(axes)])
    if np.unique(idx, axis=0).shape[0] != S.shape[0]:
        return None
    return axes


SetLike = Union[np.ndarray, Box, Sequence[Box], SampledSet]


def _directed_from(A: np.ndarray, B: SetLike) -> float:
    """sup over a in A of dist(a, B)."""
    if isinstance(B, Box):
        return float(np.max(_dist_to_box(A, B)))
    if isinstance(B, SampledSet):
        return _directed_points(A, _as_points(B.points))
    if isinstance(B, (list, tuple)) and B and all(isinstance(b, Box) for b in B):
        return float(np.max(np.min([_dist_to_box(A, b) for b in B], axis=0)))
    return _directed_points(A, _as_points(B))


def _directed_to(B: SetLike, A: np.ndarray) -> float:
    """sup over b in B of dist(b, A)."""
    if isinstance(B, Box):
        return _directed_box_to_points(B, A)
    if isinstance(B, SampledSet):
        return _directed_points(_as_points(B.points), A)
    if isinstance(B, (list, tuple)) and B and all(isinstance(b, Box) for b in B):
        return max(_directed_box_to_points(b, A) for b in B)
    return _directed_points(_as_points(B), A)


def hausdorff(A, B: SetLike) -> float:
    """Hausdorff distance between a finite set and a finite set, a box, or a union of boxes.

    The continuum side is handled exactly: the farthest point of a box from a
    finite set is a vertex of the set's (power) Voronoi diagram clipped to the
    box. Degenerate boxes (zero width along some axes) are supported.
    """
    return hausdorff_report(A, B).value


def hausdorff_report(A, B: SetLike) -> HausdorffResult:
    """Like :func:`hausdorff` but flags values computed against sampled continua."""
    A = _as_points(A)
    if isinstance(B, (list, tuple)) and len(B) == 0:
        raise DomainError("second set is empty")
    value = max(_directed_from(A, B), _directed_to(B, A))
    if isinstance(B, SampledSet):
        return HausdorffResult(value, True, float(B.resolution))
    return HausdorffResult(value)


# ---------------------------------------------------------------------------
# Grid paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridPath:
    points: np.ndarray
    direction_changes: int
    max_step: float
    eps: float

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "direction_changes": self.direction_changes,
                "max_step": self.max_step, "eps": self.eps}


def _on_grid(z: np.ndarray, box: Box, eps: float) -> bool:
    k = z / eps
    return bool(np.all(np.abs(k - np.round(k)) <= GRID_TOL) and np.all(box.contains(z[None, :], GRID_TOL)))


def grid_path(omega: Box, eps: float, z_start, z_end) -> GridPath:
    """Axis-by-axis path through ``omega ∩ eps Z^d`` from ``z_start`` to ``z_end``."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    a = np.asarray(z_start, dtype=float)
    b = np.asarray(z_end, dtype=float)
    for name, z in (("start", a), ("end", b)):
        if z.shape != (omega.dim,) or not _on_grid(z, omega, eps):
            raise DomainError(f"{name} point {z.tolist()} is not on the grid of the box")
    ka = np.round(a / eps).astype(np.int64)
    kb = np.round(b / eps).astype(np.int64)
    pts = [ka.copy()]
    cur = ka.copy()
    pieces = 0
    for axis in range(omega.dim):
        steps = int(kb[axis] - cur[axis])
        if steps == 0:
            continue
        pieces += 1
        s = 1 if steps > 0 else -1
        for _ in range(abs(steps)):
            cur[axis] += s
            pts.append(cur.copy())
    P = np.array(pts, dtype=float) * eps
    P[0], P[-1] = a, b
    return GridPath(P, max(pieces - 1, 0), eps if len(pts) > 1 else 0.0, eps)


def validate_grid_path(path: GridPath, omega: Box, eps: float, max_changes: int,
                       max_step_factor: float = 1.0) -> list[str]:
    """Independent check of the finite-turn conditions; returns a list of problems (empty if valid)."""
    problems = []
    P = np.asarray(path.points, dtype=float)
    for i, z in enumerate(P):
        if not _on_grid(z, omega, eps):
            problems.append(f"point {i} off the grid or outside the box")
    if P.shape[0] > 1:
        D = np.diff(P, axis=0)
        steps = np.linalg.norm(D, axis=1)
        if np.any(steps > max_step_factor * eps * (1 + GRID_TOL)):
            problems.append(f"step {float(steps.max())} exceeds {max_step_factor} * eps")
        if np.any(steps == 0):
            problems.append("repeated point")
        changes = int(np.sum(np.any(np.abs(D[1:] - D[:-1]) > GRID_TOL * eps, axis=1)))
        if changes > max_changes:
            problems.append(f"{changes} direction changes exceed {max_changes}")
        if changes != path.direction_changes:
            problems.append(f"reported {path.direction_changes} changes, counted {changes}")
    return problems


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyCurve:
    """Piecewise-linear curve on [0, 1] with equal time per segment."""

    vertices: np.ndarray

    def __post_init__(self):
        V = _as_points(self.vertices)
        if V.shape[0] < 2:
            raise DomainError("a curve needs at least two vertices")
        if np.any(np.linalg.norm(np.diff(V, axis=0), axis=1) == 0):
            raise DomainError("consecutive vertices must be distinct")
        V = V.copy()
        V.flags.writeable = False
        object.__setattr__(self, "vertices", V)

    @classmethod
    def from_grid_path(cls, path: GridPath) -> "PolyCurve":
        """Curve through the corners of a grid path (one segment per straight run)."""
        P = path.points
        if P.shape[0] < 2:
            raise DomainError("grid path has a single point")
        D = np.diff(P, axis=0)
        keep = [0] + [i + 1 for i in range(len(D) - 1) if np.any(D[i + 1] != D[i])] + [len(P) - 1]
        return cls(P[keep])

    @property
    def segments(self) -> int:
        return self.vertices.shape[0] - 1

    def velocities(self) -> np.ndarray:
        return self.segments * np.diff(self.vertices, axis=0)

    def __call__(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        K = self.segments
        s = t * K
        k = np.minimum(np.floor(s).astype(np.int64), K - 1)
        frac = (s - k)[..., None]
        return self.vertices[k] * (1 - frac) + self.vertices[k + 1] * frac

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist()}


def curve_stats(curve: PolyCurve) -> tuple[float, float]:
    """(sup of speed, total variation of the velocity)."""
    v = curve.velocities()
    speed = float(np.max(np.linalg.norm(v, axis=1)))
    tv = float(np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1))) if v.shape[0] > 1 else 0.0
    return speed, tv


def chain_sum(C: np.ndarray) -> float:
    """Four-point chain sum for a chain whose cost table is ``C[i, k] = c(x_i, y_k)``."""
    i = np.arange(C.shape[0] - 1)
    return float(np.sum(C[i + 1, i] - C[i, i] + C[i, i + 1] - C[i + 1, i + 1]))


def chain_sum_points(c: CostSpec, xs, ys) -> float:
    xs, ys = _as_points(xs), _as_points(ys)
    if xs.shape[0] != ys.shape[0]:
        raise DomainError("chain needs as many targets as sources")
    return chain_sum(pairwise_cost(c, xs, ys))


@dataclass(frozen=True)
class CurveBound:
    approximation: float
    speed: float
    turning: float
    holder: float

    @property
    def total(self) -> float:
        return self.approximation + self.speed + self.turning + self.holder

    def to_dict(self) -> dict:
        return {"approximation": self.approximation, "speed": self.speed,
                "turning": self.turning, "holder": self.holder, "total": self.total}


def curve_bound_rhs(curve: PolyCurve, atoms, n: int, constants: CostConstants,
                    asymmetric: bool = False) -> CurveBound:
    """Four-term upper bound for the chain sum of atoms ``x_0..x_n`` shadowing ``curve`` at ``t_i = i/n``.

    ``asymmetric`` uses the per-target Hölder seminorm, which is valid for
    every cost and vanishes for bilinear-reduced costs.
    """
    X = _as_points(atoms)
    if n < 1 or X.shape[0] != n + 1:
        raise DomainError(f"expected n + 1 = {n + 1} atoms, got {X.shape[0]}")
    t = np.arange(n + 1) / n
    off = np.linalg.norm(X - curve(t), axis=1)
    G = constants.grad_sup
    H = constants.asymmetric_holder if asymmetric else constants.holder_seminorm
    a = constants.holder_alpha
    speed, tv = curve_stats(curve)
    t1 = 2.0 * G * (off[0] + off[-1] + 2.0 * float(np.sum(off[1:-1])))
    t2 = 2.0 * G * speed / n
    t3 = G * tv / n
    t4 = H * speed ** (1.0 + a) / n ** a
    return CurveBound(t1, t2, t3, t4)


def convex_c_omega(points) -> float:
    """Diameter of a finite point set (equal to the diameter of its convex hull)."""
    P = _as_points(points)
    if P.shape[0] < 2:
        return 0.0
    if P.shape[0] > P.shape[1] + 1:
        try:
            P = P[ConvexHull(P).vertices]
        except QhullError:
            pass
    return float(np.max(pdist(P)))

"""Instance model: discrete measures, costs, and dual-feasibility primitives.

All types here are immutable after construction. Arrays held by them are
marked read-only so that instances can be shared between workers.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, FeasibilityError, UnsupportedOperation

DEFAULT_TOL = 1e-9
WEIGHT_SUM_TOL = 1e-12

COST_KINDS = ("quadratic", "bilinear", "pcost", "matrix")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


class SchemaError(DomainError):
    """Instance JSON does not follow the schema; ``field`` names the offending path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


# ---------------------------------------------------------------------------
# Boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``; zero widths allowed."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box bounds must be 1-d arrays of equal length")
        if np.any(hi < lo):
            raise DomainError("box requires lo <= hi in every coordinate")
        object.__setattr__(self, "lo", _frozen(lo))
        object.__setattr__(self, "hi", _frozen(hi))

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls(np.zeros(d), np.ones(d))

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def corners(self) -> np.ndarray:
        d = self.dim
        bits = (np.arange(2**d)[:, None] >> np.arange(d)[None, :]) & 1
        return np.where(bits == 1, self.hi, self.lo)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.lo - tol) & (p <= self.hi + tol), axis=1)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.lo + self.widths * rng.random((size, self.dim))


def max_box_distance(box_x: Box, box_y: Box) -> float:
    """max over x in box_x, y in box_y of ||x - y|| (attained coordinatewise at corners)."""
    gap = np.maximum(np.abs(box_x.hi - box_y.lo), np.abs(box_x.lo - box_y.hi))
    return float(np.linalg.norm(gap))


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, init=False)
class DiscreteMeasure:
    """Weighted finite point set in R^d.

    Duplicate points are merged (weights summed, first-occurrence order kept).
    Zero or negative weights are rejected, and the weights must sum to one
    within ``1e-12``.
    """

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DomainError("points must be a non-empty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points must be finite")
        if weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(weights, dtype=float).ravel()
        if w.shape[0] != pts.shape[0]:
            raise DomainError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise DomainError("every weight must be finite and > 0")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(f"weights sum to {total!r}, expected 1")

        _, first, inverse = np.unique(pts, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.ravel()
        if first.shape[0] < pts.shape[0]:
            order = np.argsort(first)
            rank = np.empty_like(order)
            rank[order] = np.arange(order.shape[0])
            slot = rank[inverse]
            merged = np.zeros(first.shape[0])
            np.add.at(merged, slot, w)
            pts, w = pts[first[order]], merged

        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        return cls(points)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.size

    def to_dict(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostSpec:
    """A transport cost.

    ``quadratic``: ``||x - y||^2``; ``bilinear``: ``-scale * <x, y>``;
    ``pcost``: ``||x - y||^p`` with ``p > 1``; ``matrix``: an explicit table
    ``values[i, j] = c(sources[i], targets[j])`` with an optional gradient
    table of shape ``(n, m, d)``.
    """

    kind: str
    p: Optional[float] = None
    scale: float = 1.0
    values: Optional[np.ndarray] = field(default=None, repr=False)
    grad: Optional[np.ndarray] = field(default=None, repr=False)
    sources: Optional[np.ndarray] = field(default=None, repr=False)
    targets: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise DomainError(f"unknown cost kind {self.kind!r}")
        if self.kind == "pcost":
            if self.p is None or not self.p > 1:
                raise DomainError("p-cost requires p > 1")
            object.__setattr__(self, "p", float(self.p))
        if self.kind == "matrix":
            if self.values is None:
                raise DomainError("matrix cost requires a values table")
            vals = np.asarray(self.values, dtype=float)
            if vals.ndim != 2:
                raise DomainError("matrix cost values must be 2-d")
            object.__setattr__(self, "values", _frozen(vals))
            if self.grad is not None:
                g = np.asarray(self.grad, dtype=float)
                if g.shape[:2] != vals.shape:
                    raise DomainError("gradient table shape does not match values")
                object.__setattr__(self, "grad", _frozen(g))
            for name in ("sources", "targets"):
                arr = getattr(self, name)
                if arr is not None:
                    arr = np.asarray(arr, dtype=float)
                    if arr.ndim == 1:
                        arr = arr[:, None]
                    object.__setattr__(self, name, _frozen(arr))

    @classmethod
    def quadratic(cls) -> "CostSpec":
        return cls("quadratic")

    @classmethod
    def bilinear(cls, scale: float = 1.0) -> "CostSpec":
        return cls("bilinear", scale=float(scale))

    @classmethod
    def pcost(cls, p: float) -> "CostSpec":
        return cls("pcost", p=p)

    @classmethod
    def matrix(cls, values, sources=None, targets=None, grad=None) -> "CostSpec":
        return cls("matrix", values=values, grad=grad, sources=sources, targets=targets)

    def bind(self, rho: DiscreteMeasure, mu: DiscreteMeasure) -> "CostSpec":
        """Attach atom coordinates to a matrix cost (no-op for analytic kinds)."""
        if self.kind != "matrix":
            return self
        if self.values.shape != (rho.size, mu.size):
            raise DomainError(
                f"matrix cost is {self.values.shape}, measures need {(rho.size, mu.size)}"
            )
        return CostSpec.matrix(self.values, rho.points, mu.points, self.grad)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "pcost":
            out["p"] = self.p
        if self.kind == "bilinear" and self.scale != 1.0:
            out["scale"] = self.scale
        if self.kind == "matrix":
            out["values"] = self.values.tolist()
            if self.grad is not None:
                out["grad"] = self.grad.tolist()
        return out


def _atom_index(table: Optional[np.ndarray], point: np.ndarray, side: str) -> int:
    if table is None:
        raise DomainError(f"matrix cost is not bound to {side} atoms")
    hit = np.flatnonzero(np.all(table == point, axis=1))
    if hit.size == 0:
        raise DomainError(f"point {point.tolist()} is not a {side} atom of the matrix cost")
    return int(hit[0])


def cost_eval(c: CostSpec, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if c.kind == "quadratic":
        return float(np.sum((x - y) ** 2))
    if c.kind == "bilinear":
        return float(-c.scale * np.dot(x, y))
    if c.kind == "pcost":
        return float(np.linalg.norm(x - y) ** c.p)
    i = _atom_index(c.sources, x, "source")
    j = _atom_index(c.targets, y, "target")
    return float(c.values[i, j])


def cost_grad_x(c: CostSpec, x, y) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if c.kind == "quadratic":
        return 2.0 * (x - y)
    if c.kind == "bilinear":
        return -c.scale * y + 0.0 * x
    if c.kind == "pcost":
        z = x - y
        r = np.linalg.norm(z)
        if r == 0.0:
            # continuous extension at the tip
            return np.zeros_like(z)
        return c.p * r ** (c.p - 2.0) * z
    if c.grad is None:
        raise UnsupportedOperation("matrix cost has no gradient table")
    i = _atom_index(c.sources, x, "source")
    j = _atom_index(c.targets, y, "target")
    return np.array(c.grad[i, j], dtype=float)


def _pairwise_sq(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def cost_matrix(c: CostSpec, rho: DiscreteMeasure, mu: DiscreteMeasure) -> np.ndarray:
    """Table ``C[i, j] = c(x_i, y_j)`` over the atoms of ``rho`` and ``mu``."""
    if c.kind == "matrix":
        if c.values.shape != (rho.size, mu.size):
            raise DomainError(
                f"matrix cost is {c.values.shape}, measures need {(rho.size, mu.size)}"
            )
        return np.array(c.values)
    return pairwise_cost(c, rho.points, mu.points)


def pairwise_cost(c: CostSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Table ``C[i, k] = c(X[i], Y[k])`` for an analytic cost."""
    if c.kind == "matrix":
        raise UnsupportedOperation("matrix cost is only defined on its bound atoms")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise DomainError("source and target dimensions differ")
    if c.kind == "quadratic":
        return _pairwise_sq(X, Y)
    if c.kind == "bilinear":
        return -c.scale * (X @ Y.T)
    return np.sqrt(_pairwise_sq(X, Y)) ** c.p


def grad_x_table(c: CostSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Vectorised ``grad_x c(X[k], Y[k])`` for row-aligned point arrays."""
    if c.kind == "quadratic":
        return 2.0 * (X - Y)
    if c.kind == "bilinear":
        return -c.scale * Y + 0.0 * X
    if c.kind == "pcost":
        Z = X - Y
        r = np.linalg.norm(Z, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = c.p * np.where(r > 0, r ** (c.p - 2.0), 0.0) * Z
        return g
    raise UnsupportedOperation("vectorised gradient needs an analytic cost")


def reduce_to_bilinear(c: CostSpec) -> CostSpec:
    """Translation-equivalent bilinear form of the quadratic cost.

    ``||x - y||^2 = ||x||^2 + ||y||^2 - 2<x, y>``; the first two terms do not
    change four-point cost differences, so ``-2<x, y>`` is interchangeable
    with the quadratic cost in every chain sum.
    """
    if c.kind == "quadratic":
        return CostSpec.bilinear(2.0)
    if c.kind == "bilinear":
        return c
    raise UnsupportedOperation(f"no bilinear reduction for {c.kind} cost")


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostConstants:
    grad_sup: float
    holder_alpha: float
    holder_seminorm: float
    asymmetric_holder: float
    lower_estimate: bool = False

    def __post_init__(self):
        for name in ("grad_sup", "holder_seminorm", "asymmetric_holder"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if not 0 < self.holder_alpha <= 1:
            raise DomainError("holder_alpha must lie in (0, 1]")


def pcost_holder_bound(p: float) -> float:
    """Upper Hölder constant of ``z -> p ||z||^{p-2} z`` with exponent ``p - 1``, 1 < p <= 2."""
    if not 1 < p <= 2:
        raise DomainError("bound holds for 1 < p <= 2")
    return p * np.sqrt(1.0 + 2.0 ** (4.0 - 2.0 * p))


def estimate_cost_constants(
    c: CostSpec,
    box_x: Box,
    box_y: Box,
    alpha: float,
    samples: int = 2000,
    seed: int = 0,
) -> CostConstants:
    """Gradient bound and Hölder seminorm of ``grad_x c`` on ``box_x x box_y``.

    Quadratic and bilinear costs use closed forms; so does the gradient bound
    of the p-cost. The p-cost Hölder seminorm is a sampled lower estimate:
    ``samples`` triples ``(x0, x1, y)`` drawn from a Philox stream, so a
    larger sample count extends (never replaces) a smaller one.
    """
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    if samples < 2:
        raise DomainError("samples must be >= 2")
    if box_x.dim != box_y.dim:
        raise DomainError("boxes must share a dimension")

    if c.kind == "quadratic":
        g = 2.0 * max_box_distance(box_x, box_y)
        h = 2.0 * box_x.diameter ** (1.0 - alpha) if alpha < 1 else 2.0
        return CostConstants(g, alpha, h, h)
    if c.kind == "bilinear":
        ymax = float(np.max(np.linalg.norm(box_y.corners(), axis=1)))
        return CostConstants(c.scale * ymax, alpha, 0.0, 0.0)
    if c.kind == "matrix":
        return _matrix_constants(c, alpha)

    grad_sup = c.p * max_box_distance(box_x, box_y) ** (c.p - 1.0)
    rng = np.random.Generator(np.random.Philox(seed))
    d = box_x.dim
    u = rng.random((samples, 3, d))
    x0 = box_x.lo + box_x.widths * u[:, 0]
    x1 = box_x.lo + box_x.widths * u[:, 1]
    y = box_y.lo + box_y.widths * u[:, 2]
    num = np.linalg.norm(grad_x_table(c, x0, y) - grad_x_table(c, x1, y), axis=1)
    den = np.linalg.norm(x0 - x1, axis=1) ** alpha
    ok = den > 0
    h = float(np.max(num[ok] / den[ok])) if np.any(ok) else 0.0
    return CostConstants(float(grad_sup), alpha, h, h, lower_estimate=True)


def reduced_quadratic_constants(target_points) -> CostConstants:
    """Constants of the quadratic cost after subtracting ``|x|^2 - 2<x, y_c>``.

    The translated cost ``-2<x, y - y_c>`` (``y_c`` the centre of the targets'
    bounding box) has the same four-point differences as the quadratic cost,
    gradient ``-2(y - y_c)`` and zero Hölder seminorm in ``x``.
    """
    Y = np.atleast_2d(np.asarray(target_points, dtype=float))
    yc = 0.5 * (Y.min(axis=0) + Y.max(axis=0))
    g = 2.0 * float(np.max(np.linalg.norm(Y - yc, axis=1)))
    return CostConstants(g, 1.0, 0.0, 0.0)


def _matrix_constants(c: CostSpec, alpha: float) -> CostConstants:
    if c.grad is None:
        raise UnsupportedOperation("matrix cost has no gradient table")
    G = np.asarray(c.grad)
    grad_sup = float(np.max(np.linalg.norm(G, axis=2)))
    h = 0.0
    if c.sources is not None and G.shape[0] > 1:
        X = c.sources
        dx = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
        iu = np.triu_indices(X.shape[0], 1)
        for j in range(G.shape[1]):
            dg = np.linalg.norm(G[:, None, j, :] - G[None, :, j, :], axis=2)
            ratio = dg[iu] / dx[iu] ** alpha
            h = max(h, float(ratio.max()))
    return CostConstants(grad_sup, alpha, h, h, lower_estimate=True)


# ---------------------------------------------------------------------------
# Transforms and duality
# ---------------------------------------------------------------------------


def c_transform(phi, c: CostSpec, rho: DiscreteMeasure, mu: DiscreteMeasure, C=None) -> np.ndarray:
    """``psi(y_j) = min_i c(x_i, y_j) - phi(x_i)``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (rho.size,) or not np.all(np.isfinite(phi)):
        raise DomainError("phi must be finite on every source atom")
    C = cost_matrix(c, rho, mu) if C is None else C
    return np.min(C - phi[:, None], axis=0)


def c_transform_bar(psi, c: CostSpec, rho: DiscreteMeasure, mu: DiscreteMeasure, C=None) -> np.ndarray:
    """``phi(x_i) = min_j c(x_i, y_j) - psi(y_j)``."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (mu.size,) or not np.all(np.isfinite(psi)):
        raise DomainError("psi must be finite on every target atom")
    C = cost_matrix(c, rho, mu) if C is None else C
    return np.min(C - psi[None, :], axis=1)


def _dense_plan(plan, shape) -> np.ndarray:
    if hasattr(plan, "dense"):
        return plan.dense(*shape)
    P = np.asarray(plan, dtype=float)
    if P.shape != shape:
        raise DomainError(f"plan has shape {P.shape}, expected {shape}")
    return P


def feasibility_residual(phi, psi, C) -> tuple[float, tuple[int, int]]:
    """Largest ``phi_i + psi_j - C_ij`` and where it occurs."""
    V = np.asarray(phi)[:, None] + np.asarray(psi)[None, :] - C
    k = int(np.argmax(V))
    i, j = divmod(k, C.shape[1])
    return float(V[i, j]), (i, j)


def dual_gap(phi, psi, plan, c: CostSpec, rho: DiscreteMeasure, mu: DiscreteMeasure,
             tol: float = DEFAULT_TOL, C=None) -> float:
    """Primal cost of ``plan`` minus the dual objective of ``(phi, psi)``.

    Raises FeasibilityError when some ``phi_i + psi_j`` exceeds ``c_ij + tol``.
    """
    C = cost_matrix(c, rho, mu) if C is None else C
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    worst, (i, j) = feasibility_residual(phi, psi, C)
    if worst > tol:
        raise FeasibilityError(
            f"dual constraint violated at (i={i}, j={j}) by {worst:.3e}",
            worst=(i, j), violation=worst,
        )
    P = _dense_plan(plan, C.shape)
    return float(np.sum(P * C) - (rho.weights @ phi + mu.weights @ psi))


# ---------------------------------------------------------------------------
# Instance I/O
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Instance:
    rho: DiscreteMeasure
    mu: DiscreteMeasure
    cost: CostSpec

    def cost_matrix(self) -> np.ndarray:
        return cost_matrix(self.cost, self.rho, self.mu)

    def to_dict(self) -> dict:
        return {"rho": self.rho.to_dict(), "mu": self.mu.to_dict(), "cost": self.cost.to_dict()}

    def content_hash(self) -> str:
        return instance_hash(self.to_dict())


def instance_hash(data: Mapping[str, Any]) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _measure_from(data: Any, path: str) -> DiscreteMeasure:
    if not isinstance(data, Mapping):
        raise SchemaError(path, "expected an object with points and weights")
    for key in ("points", "weights"):
        if key not in data:
            raise SchemaError(f"{path}.{key}", "missing")
    try:
        pts = np.asarray(data["points"], dtype=float)
        w = np.asarray(data["weights"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, f"non-numeric entries ({exc})") from None
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise SchemaError(f"{path}.points", "expected a non-empty list of coordinate lists")
    if w.ndim != 1 or w.shape[0] != pts.shape[0]:
        raise SchemaError(f"{path}.weights", "length must match points")
    if np.any(w <= 0):
        raise SchemaError(f"{path}.weights", "every weight must be > 0")
    if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
        raise SchemaError(f"{path}.weights", f"sum is {float(w.sum())!r}, expected 1")
    try:
        return DiscreteMeasure(pts, w)
    except DomainError as exc:
        raise SchemaError(path, str(exc)) from None


def instance_from_dict(data: Mapping[str, Any]) -> Instance:
    if not isinstance(data, Mapping):
        raise SchemaError("$", "instance must be a JSON object")
    for key in ("rho", "mu", "cost"):
        if key not in data:
            raise SchemaError(key, "missing")
    rho = _measure_from(data["rho"], "rho")
    mu = _measure_from(data["mu"], "mu")
    if rho.dim != mu.dim:
        raise SchemaError("mu.points", "dimension differs from rho")
    cd = data["cost"]
    if not isinstance(cd, Mapping) or "kind" not in cd:
        raise SchemaError("cost.kind", "missing")
    kind = cd["kind"]
    if kind not in COST_KINDS:
        raise SchemaError("cost.kind", f"must be one of {COST_KINDS}")
    try:
        if kind == "pcost":
            if "p" not in cd:
                raise SchemaError("cost.p", "missing for pcost")
            cost = CostSpec.pcost(float(cd["p"]))
        elif kind == "matrix":
            if "values" not in cd:
                raise SchemaError("cost.values", "missing for matrix cost")
            cost = CostSpec.matrix(cd["values"], grad=cd.get("grad")).bind(rho, mu)
        elif kind == "bilinear":
            cost = CostSpec.bilinear(float(cd.get("scale", 1.0)))
        else:
            cost = CostSpec.quadratic()
    except SchemaError:
        raise
    except (DomainError, TypeError, ValueError) as exc:
        raise SchemaError("cost", str(exc)) from None
    return Instance(rho, mu, cost)


def load_instance(path) -> Instance:
    with open(Path(path)) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON ({exc})") from None
    return instance_from_dict(data)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict()))

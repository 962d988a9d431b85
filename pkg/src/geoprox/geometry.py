"""Spherical metric geometry on the unit sphere S^n embedded in R^(n+1).

Points are stored as unit vectors. Curvature kappa > 0 is handled by
rescaling the metric, ``d_kappa = d_1 / sqrt(kappa)``, on the same unit
sphere, so a single set of formulas serves every CAT(kappa) model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

NORM_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for invalid geometric input (dimension mismatch, antipodes, ...)."""


@dataclass(frozen=True, eq=False)
class SpherePoint:
    """A point of S^n, stored as a unit vector of length n + 1.

    The coordinates are renormalized on construction and the stored array
    is read-only.
    """

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float).reshape(-1)
        if c.size < 2:
            raise GeometryError("a sphere point needs at least 2 coordinates")
        if not np.all(np.isfinite(c)):
            raise GeometryError("coordinates must be finite")
        norm = np.linalg.norm(c)
        if norm == 0.0:
            raise GeometryError("cannot normalize the zero vector")
        # leave unit vectors bit-identical so re-wrapping a point is a no-op
        if abs(norm - 1.0) > 4 * np.finfo(float).eps:
            c = c / norm
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self) -> int:
        """Intrinsic dimension n of the sphere carrying this point."""
        return self.coords.size - 1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __repr__(self):
        inner = ", ".join(f"{v:.6g}" for v in self.coords)
        return f"SpherePoint([{inner}])"

    def allclose(self, other, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.coords, as_coords(other), rtol=0.0, atol=atol))


@dataclass(frozen=True)
class ModelSpace:
    """The unit sphere S^dim with metric rescaled for curvature ``kappa``."""

    dim: int
    kappa: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise GeometryError(f"dim must be a positive integer, got {self.dim!r}")
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise GeometryError(f"kappa must be positive and finite, got {self.kappa!r}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "kappa", float(self.kappa))

    @property
    def sqrt_kappa(self) -> float:
        return math.sqrt(self.kappa)

    @property
    def admissible_radius(self) -> float:
        """Open bound pi / (2 sqrt(kappa)) on pairwise distances."""
        return math.pi / (2.0 * self.sqrt_kappa)

    @property
    def diameter(self) -> float:
        return math.pi / self.sqrt_kappa

    def to_angle(self, d: float) -> float:
        """Convert a distance in this metric to a unit-sphere angle."""
        return d * self.sqrt_kappa

    def from_angle(self, theta: float) -> float:
        return theta / self.sqrt_kappa


def as_coords(p) -> np.ndarray:
    """Unit coordinate vector of a SpherePoint or array-like (not renormalized)."""
    if isinstance(p, SpherePoint):
        return p.coords
    return np.asarray(p, dtype=float)


def as_point(p) -> SpherePoint:
    return p if isinstance(p, SpherePoint) else SpherePoint(p)


def _space_for(space: Optional[ModelSpace], *points) -> ModelSpace:
    if space is None:
        return ModelSpace(as_coords(points[0]).size - 1)
    return space


def _check_dims(space: ModelSpace, *coords: np.ndarray) -> None:
    for c in coords:
        if c.shape[-1] != space.dim + 1:
            raise GeometryError(
                f"point has {c.shape[-1]} coordinates, space S^{space.dim} "
                f"expects {space.dim + 1}"
            )


def angle(x, y) -> float:
    """Unit-sphere angle between x and y.

    Computed as 2 atan2(|x - y|, |x + y|), which equals arccos<x, y> but keeps
    full relative precision for tiny and near-antipodal angles.
    """
    cx, cy = as_coords(x), as_coords(y)
    return 2.0 * math.atan2(float(np.linalg.norm(cx - cy)), float(np.linalg.norm(cx + cy)))


def angles(Y: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vectorized :func:`angle` between each row of ``Y`` and the point ``p``."""
    Y = np.atleast_2d(Y)
    return 2.0 * np.arctan2(np.linalg.norm(Y - p, axis=1), np.linalg.norm(Y + p, axis=1))


def distance(x, y, space: Optional[ModelSpace] = None) -> float:
    """Geodesic distance arccos<x, y> / sqrt(kappa).

    Raises
    ------
    GeometryError
        If either point does not live on ``space``.
    """
    space = _space_for(space, x)
    cx, cy = as_coords(x), as_coords(y)
    _check_dims(space, cx, cy)
    return angle(cx, cy) / space.sqrt_kappa


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``x``, shape (n, n + 1)."""
    c = as_coords(x)
    # Householder reflection mapping e_k to x; its other columns span x-perp.
    k = int(np.argmax(np.abs(c)))
    v = c.copy()
    v[k] += math.copysign(1.0, c[k])
    v /= np.linalg.norm(v)
    H = np.eye(c.size) - 2.0 * np.outer(v, v)
    return np.delete(H, k, axis=1).T


def exp_map(x, v: np.ndarray) -> np.ndarray:
    """Unit-sphere exponential map: follow the great circle from x along v."""
    c = as_coords(x)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return np.array(c, dtype=float)
    out = math.cos(nv) * c + (math.sin(nv) / nv) * v
    return out / np.linalg.norm(out)


def log_map(x, y) -> np.ndarray:
    """Inverse of :func:`exp_map` for non-antipodal points (unit-sphere angle)."""
    cx, cy = as_coords(x), as_coords(y)
    ip = min(1.0, max(-1.0, float(cx @ cy)))
    w = cy - ip * cx
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        if ip > 0:
            return np.zeros_like(cx)
        raise GeometryError("log map undefined for antipodal points")
    return math.acos(ip) * w / nw


def geodesic_point(x, y, t: float, space: Optional[ModelSpace] = None,
                   atol: float = 1e-12) -> SpherePoint:
    """Point at arc length ``t`` along the unique geodesic from x to y.

    Uses c(s) = cos(s) x + sin(s) (y - <y,x> x)/||y - <y,x> x|| at the
    unit-sphere parameter s = t sqrt(kappa).
    """
    space = _space_for(space, x)
    cx, cy = as_coords(x), as_coords(y)
    _check_dims(space, cx, cy)
    theta = angle(cx, cy)
    if math.pi - theta < 1e-12:
        raise GeometryError("antipodal points: the geodesic is not unique")
    length = theta / space.sqrt_kappa
    if t < -atol or t > length + atol:
        raise GeometryError(f"parameter t={t!r} outside [0, {length!r}]")
    s = min(max(t, 0.0), length) * space.sqrt_kappa
    if s == 0.0:
        return SpherePoint(cx)
    w = cy - float(cx @ cy) * cx
    nw = float(np.linalg.norm(w))
    if nw == 0.0:
        return SpherePoint(cx)
    return SpherePoint(math.cos(s) * cx + math.sin(s) * (w / nw))


def convex_combination(x, y, alpha: float, space: Optional[ModelSpace] = None) -> SpherePoint:
    """The point alpha x (+) (1 - alpha) y, i.e. c((1 - alpha) d(x, y))."""
    if not 0.0 <= alpha <= 1.0:
        raise GeometryError(f"alpha must lie in [0, 1], got {alpha!r}")
    space = _space_for(space, x)
    if alpha == 1.0:
        return as_point(x)
    if alpha == 0.0:
        return as_point(y)
    d = distance(x, y, space)
    return geodesic_point(x, y, (1.0 - alpha) * d, space)


def midpoint(x, y, space: Optional[ModelSpace] = None) -> SpherePoint:
    return convex_combination(x, y, 0.5, space)


@dataclass(frozen=True, eq=False)
class Geodesic:
    """Unit-speed geodesic segment between two distinct, non-antipodal points."""

    start: SpherePoint
    end: SpherePoint
    space: ModelSpace
    length: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "start", as_point(self.start))
        object.__setattr__(self, "end", as_point(self.end))
        length = distance(self.start, self.end, self.space)
        if length == 0.0:
            raise GeometryError("geodesic endpoints must be distinct")
        if length * self.space.sqrt_kappa >= math.pi - 1e-12:
            raise GeometryError("antipodal points: the geodesic is not unique")
        object.__setattr__(self, "length", length)

    def __call__(self, t: float) -> SpherePoint:
        return geodesic_point(self.start, self.end, t, self.space)

    def sample(self, samples: int) -> list[tuple[float, SpherePoint]]:
        """``samples`` equally spaced (t, c(t)) pairs including both endpoints."""
        if samples < 2:
            raise GeometryError("need at least 2 samples to include both endpoints")
        ts = np.linspace(0.0, self.length, samples)
        out = [(float(t), self(float(t))) for t in ts[:-1]]
        out.append((self.length, self.end))
        return out


def check_admissible(points: Iterable, space: Optional[ModelSpace] = None) -> bool:
    """True iff every pairwise distance is strictly below pi / (2 sqrt(kappa))."""
    pts = [as_coords(p) for p in points]
    if not pts:
        raise GeometryError("check_admissible needs a nonempty point list")
    space = _space_for(space, pts[0])
    _check_dims(space, *pts)
    P = np.vstack(pts)
    # d < pi/(2 sqrt(kappa)) in the rescaled metric is angle < pi/2.
    return all(bool(np.all(angles(P[i + 1:], P[i]) < math.pi / 2)) for i in range(len(P) - 1))


def pairwise_distances(points: Sequence, space: Optional[ModelSpace] = None) -> np.ndarray:
    P = np.vstack([as_coords(p) for p in points])
    space = _space_for(space, P[0])
    return np.vstack([angles(P, row) for row in P]) / space.sqrt_kappa


class ComparisonReport(NamedTuple):
    """Outcome of the three spherical comparison inequalities for one triple.

    ``*_slack`` is left side minus right side; a check passes when its
    slack is at least ``-tol``. ``cosine_combination`` is ``None`` when
    its extra hypothesis (both distances to x3 at most pi/2) fails.
    """

    sine_weighted: bool
    midpoint: bool
    cosine_combination: Optional[bool]
    sine_weighted_slack: float
    midpoint_slack: float
    cosine_combination_slack: Optional[float]

    @property
    def all_hold(self) -> bool:
        return self.sine_weighted and self.midpoint and self.cosine_combination is not False


def comparison_inequality_oracle(x1, x2, x3, alpha: float,
                                 space: Optional[ModelSpace] = None,
                                 tol: float = 1e-10) -> ComparisonReport:
    """Evaluate the three CAT(1) comparison inequalities at a triple.

    With distances measured in the CAT(1)-normalized metric sqrt(kappa) d:

    * cos d(a(+)b, x3) sin d(x1,x2) >= cos d(x1,x3) sin(a d(x1,x2))
      + cos d(x2,x3) sin((1-a) d(x1,x2))
    * cos d(m, x3) cos(d(x1,x2)/2) >= (cos d(x1,x3) + cos d(x2,x3)) / 2,
      m the midpoint
    * cos d(a(+)b, x3) >= a cos d(x1,x3) + (1-a) cos d(x2,x3),
      when d(x1,x3), d(x2,x3) <= pi/2
    """
    space = _space_for(space, x1)
    if not 0.0 <= alpha <= 1.0:
        raise GeometryError(f"alpha must lie in [0, 1], got {alpha!r}")
    c1, c2, c3 = as_coords(x1), as_coords(x2), as_coords(x3)
    _check_dims(space, c1, c2, c3)
    a12, a23, a13 = angle(c1, c2), angle(c2, c3), angle(c1, c3)
    if a12 + a23 + a13 >= 2 * math.pi:
        raise GeometryError("triangle perimeter must be below 2 pi")
    z = convex_combination(c1, c2, alpha, space)
    az3 = angle(z, c3)
    lhs1 = math.cos(az3) * math.sin(a12)
    rhs1 = math.cos(a13) * math.sin(alpha * a12) + math.cos(a23) * math.sin((1 - alpha) * a12)

    m = convex_combination(c1, c2, 0.5, space)
    lhs2 = math.cos(angle(m, c3)) * math.cos(a12 / 2)
    rhs2 = 0.5 * math.cos(a13) + 0.5 * math.cos(a23)

    s1, s2 = lhs1 - rhs1, lhs2 - rhs2
    if a13 <= math.pi / 2 and a23 <= math.pi / 2:
        s3 = math.cos(az3) - (alpha * math.cos(a13) + (1 - alpha) * math.cos(a23))
        ok3: Optional[bool] = s3 >= -tol
    else:
        s3, ok3 = None, None
    return ComparisonReport(s1 >= -tol, s2 >= -tol, ok3, s1, s2, s3)


def row_angles(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-wise :func:`angle` between two arrays of unit vectors."""
    return 2.0 * np.arctan2(np.linalg.norm(X - Y, axis=1), np.linalg.norm(X + Y, axis=1))


def comparison_slacks(X1: np.ndarray, X2: np.ndarray, X3: np.ndarray,
                      alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched slacks of :func:`comparison_inequality_oracle` on S^n (kappa = 1).

    Rows are triples; returns (sine_weighted, midpoint, cosine_combination)
    slack arrays, the last one NaN where its hypothesis fails.
    """
    X1, X2, X3 = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (X1, X2, X3))
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if np.any((alpha < 0) | (alpha > 1)):
        raise GeometryError("alpha must lie in [0, 1]")
    a12, a23, a13 = row_angles(X1, X2), row_angles(X2, X3), row_angles(X1, X3)
    if np.any(a12 + a23 + a13 >= 2 * math.pi) or np.any(math.pi - a12 < 1e-12):
        raise GeometryError("triangle perimeter must be below 2 pi")
    W = X2 - np.sum(X1 * X2, axis=1, keepdims=True) * X1
    nw = np.linalg.norm(W, axis=1, keepdims=True)
    U = np.divide(W, nw, out=np.zeros_like(W), where=nw > 0)

    def along(s):
        P = np.cos(s)[:, None] * X1 + np.sin(s)[:, None] * U
        return P / np.linalg.norm(P, axis=1, keepdims=True)

    Z = along((1.0 - alpha) * a12)
    az3 = row_angles(Z, X3)
    s1 = np.cos(az3) * np.sin(a12) - (np.cos(a13) * np.sin(alpha * a12)
                                      + np.cos(a23) * np.sin((1 - alpha) * a12))
    M = along(0.5 * a12)
    s2 = np.cos(row_angles(M, X3)) * np.cos(a12 / 2) - 0.5 * (np.cos(a13) + np.cos(a23))
    s3 = np.cos(az3) - (alpha * np.cos(a13) + (1 - alpha) * np.cos(a23))
    s3 = np.where((a13 <= math.pi / 2) & (a23 <= math.pi / 2), s3, np.nan)
    return s1, s2, s3


def normalized_mean(points: Sequence, weights: Optional[Sequence[float]] = None) -> SpherePoint:
    """Weighted Euclidean mean of unit vectors, projected back to the sphere."""
    P = np.vstack([as_coords(p) for p in points])
    w = np.ones(len(P)) if weights is None else np.asarray(weights, dtype=float)
    m = w @ P
    if np.linalg.norm(m) < 1e-15:
        raise GeometryError("weighted mean vanishes; points are not in a hemisphere")
    return SpherePoint(m)


def random_point(rng: np.random.Generator, dim: int) -> SpherePoint:
    """Uniform random point on S^dim."""
    return SpherePoint(rng.standard_normal(dim + 1))


def random_in_cap(rng: np.random.Generator, center, radius: float,
                  space: Optional[ModelSpace] = None, size: Optional[int] = None):
    """Random point(s) within geodesic distance ``radius`` of ``center``.

    Directions are uniform in the tangent space; the arc length is drawn
    uniformly in [0, radius] (not area-uniform, which is fine for testing).
    """
    space = _space_for(space, center)
    c = as_coords(center)
    E = tangent_basis(c)
    n = 1 if size is None else size
    out = np.empty((n, c.size))
    for i in range(n):
        u = rng.standard_normal(E.shape[0])
        u /= np.linalg.norm(u)
        r = rng.uniform(0.0, radius) * space.sqrt_kappa
        out[i] = exp_map(c, r * (u @ E))
    if size is None:
        return SpherePoint(out[0])
    return [SpherePoint(row) for row in out]

"""Brute-force ground truth on S^2: cap grids with local refinement, and a
1D golden-section search for objectives restricted to a geodesic.

Nothing here calls the resolvent solver; the oracle builds its own copy of
the resolvent objective so that the two routes stay independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .functionals import ConvexFunctional, penalty_to_point
from .geometry import (
    GeometryError,
    ModelSpace,
    SpherePoint,
    as_coords,
    normalized_mean,
    tangent_basis,
)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
REFINE_HALF_WIDTH = 20  # local grid is (2 * 20 + 1)^2 points per round


@dataclass(frozen=True)
class GridSpec:
    spacing: float = 0.01
    refinement_rounds: int = 3

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if int(self.refinement_rounds) != self.refinement_rounds or self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be a nonnegative integer")

    @property
    def final_spacing(self) -> float:
        return self.spacing * 10.0 ** (-self.refinement_rounds)


def cap_grid(center, radius: float, spacing: float) -> np.ndarray:
    """Latitude-longitude grid of the cap of angular ``radius`` around ``center`` on S^2.

    Rings are ``spacing`` apart in colatitude and each ring carries about
    2 pi sin(theta) / spacing points, giving roughly uniform area density.
    Enumeration order is fixed.
    """
    c = as_coords(center)
    if c.size != 3:
        raise GeometryError("cap grids are only available on S^2")
    e1, e2 = tangent_basis(c)
    n_rings = int(math.ceil(radius / spacing))
    blocks = [c[None, :]]
    for j in range(1, n_rings + 1):
        theta = min(j * spacing, radius)
        m = max(1, int(math.ceil(2 * math.pi * math.sin(theta) / spacing)))
        phi = np.arange(m) * (2 * math.pi / m)
        ring = (math.cos(theta) * c[None, :]
                + math.sin(theta) * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2))
        blocks.append(ring)
    return np.vstack(blocks)


def _local_grid(center: np.ndarray, spacing: float, half_width: int = REFINE_HALF_WIDTH) -> np.ndarray:
    e1, e2 = tangent_basis(center)
    k = np.arange(-half_width, half_width + 1) * spacing
    U, V = np.meshgrid(k, k, indexing="ij")
    T = U.reshape(-1, 1) * e1 + V.reshape(-1, 1) * e2
    r = np.linalg.norm(T, axis=1, keepdims=True)
    safe = np.where(r > 0, r, 1.0)
    P = np.cos(r) * center + np.sin(r) * T / safe
    return P / np.linalg.norm(P, axis=1, keepdims=True)


def _as_vectorized(objective) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(objective, ConvexFunctional):
        return objective.values
    return lambda Y: np.asarray(objective(Y), dtype=float).reshape(-1)


def _argmin_rows(P: np.ndarray, vals: np.ndarray) -> int:
    vals = np.where(np.isnan(vals), np.inf, vals)
    return int(np.argmin(vals))


def grid_argmin(objective, space: ModelSpace, grid: Optional[GridSpec] = None,
                center=None, radius: Optional[float] = None) -> Tuple[SpherePoint, float]:
    """Minimize ``objective`` over a cap of S^2 by exhaustive grid search plus
    ``grid.refinement_rounds`` local refinements, each 10x finer.

    ``objective`` is a :class:`ConvexFunctional` or a callable mapping an
    (m, 3) array of points to m values. ``spacing`` and ``radius`` are in
    the metric of ``space``. For a functional the default cap is centered at
    the weighted anchor mean and reaches just past the farthest anchor.
    """
    grid = GridSpec() if grid is None else grid
    if space.dim != 2:
        raise GeometryError(f"grid oracle supports S^2 only, got S^{space.dim}")
    sk = space.sqrt_kappa
    if center is None or radius is None:
        if not isinstance(objective, ConvexFunctional) or not objective.anchors:
            raise ValueError("center and radius are required for this objective")
        center, angular_radius = _functional_cap(objective, grid.spacing * sk)
    else:
        angular_radius = radius * sk
    fn = _as_vectorized(objective)
    h = grid.spacing * sk
    P = cap_grid(center, min(angular_radius, math.pi / 2), h)
    vals = fn(P)
    i = _argmin_rows(P, vals)
    best, best_val = P[i], float(vals[i])
    for _ in range(grid.refinement_rounds):
        h /= 10.0
        P = _local_grid(best, h)
        vals = fn(P)
        i = _argmin_rows(P, vals)
        if vals[i] <= best_val:
            best, best_val = P[i], float(vals[i])
    return SpherePoint(best), best_val


def _functional_cap(f: ConvexFunctional, pad: float):
    w = f.weights if f.kind != "custom_combination" else None
    c = normalized_mean(f.anchors, w)
    spread = max(float(np.arccos(np.clip(p.coords @ c.coords, -1.0, 1.0))) for p in f.anchors)
    return c, min(spread + 2 * pad, math.pi / 2 - 1e-9)


def geodesic_golden_section(objective: Callable[[float], float], L: float,
                            tol: float = 1e-8) -> Tuple[float, float]:
    """Golden-section search for the minimizer of a unimodal function on [0, L].

    Returns the best evaluated abscissa and its value once the bracket is
    narrower than ``tol``. The endpoints are evaluated as well, so monotone
    objectives return an endpoint.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if L < 0:
        raise ValueError("interval length must be nonnegative")
    a, b = 0.0, float(L)
    best_t, best_v = a, objective(a)
    vb = objective(b)
    if vb < best_v:
        best_t, best_v = b, vb
    if b - a <= tol:
        return best_t, best_v
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = objective(d)
    for t, v in ((c, fc), (d, fd)):
        if v < best_v:
            best_t, best_v = t, v
    return best_t, best_v


def resolvent_objective_values(f: ConvexFunctional, lam: float, x) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized lam f(y) + tan(theta) sin(theta), theta the angle to x; inf off the domain."""
    cx = as_coords(x)

    def phi(Y):
        Y = np.atleast_2d(Y)
        with np.errstate(invalid="ignore"):
            out = lam * f.values(Y) + penalty_to_point(Y, cx)
        return np.where(np.isfinite(out), out, np.inf)

    return phi


def resolvent_grid_argmin(f: ConvexFunctional, lam: float, x, space: ModelSpace,
                          grid: Optional[GridSpec] = None) -> Tuple[SpherePoint, float]:
    """Grid minimizer of the resolvent objective over the cap spanned by x and the anchors."""
    grid = GridSpec() if grid is None else grid
    pts = [SpherePoint(x)] + list(f.anchors)
    c = normalized_mean(pts)
    spread = max(float(np.arccos(np.clip(p.coords @ c.coords, -1.0, 1.0))) for p in pts)
    sk = space.sqrt_kappa
    radius = min(spread + 2 * grid.spacing * sk, math.pi / 2 - 1e-9) / sk
    return grid_argmin(resolvent_objective_values(f, lam, x), space, grid, center=c, radius=radius)


def single_anchor_resolvent_1d(lam: float, s: float, tol: float = 1e-10) -> Tuple[float, float]:
    """Distance t* from x of the resolvent when f = 1 - cos d(., p), d(x, p) = s (angles).

    The minimizer lies on the geodesic [x, p]; minimizes
    lam (1 - cos(s - t)) + tan t sin t over t in [0, s].
    """
    return geodesic_golden_section(
        lambda t: lam * (1.0 - math.cos(s - t)) + math.tan(t) * math.sin(t), s, tol
    )


def cosine_mean_argmin(f: ConvexFunctional) -> SpherePoint:
    """Exact minimizer of sum w_i (1 - <y, p_i>): the normalized weighted mean."""
    if f.kind != "cosine_mean":
        raise ValueError("closed form only for cosine_mean")
    return normalized_mean(f.anchors, f.weights)


def reference_minimizer(f: ConvexFunctional, space: ModelSpace,
                        grid: Optional[GridSpec] = None) -> Tuple[SpherePoint, float]:
    """Best available independent minimizer of ``f``: closed form for
    ``cosine_mean``, grid search on S^2 otherwise."""
    if f.kind == "cosine_mean":
        u = cosine_mean_argmin(f)
        return u, f(u)
    if space.dim != 2:
        raise GeometryError(f"no independent oracle for {f.kind} on S^{space.dim}")
    return grid_argmin(f, space, grid)

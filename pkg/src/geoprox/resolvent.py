"""Resolvents y -> argmin { lam f(y) + tan(theta) sin(theta) }, theta = sqrt(kappa) d(y, x).

The minimization is carried out numerically by geodesic descent (default)
or, on S^2, by nested golden-section search over a shrinking cap. Step
lengths, tolerances and finite-difference steps are measured in the metric
of the ambient :class:`~geoprox.geometry.ModelSpace`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize, nnls

from .functionals import ConvexFunctional, FunctionalDomainError, penalty_to_point
from .geometry import (
    GeometryError,
    ModelSpace,
    SpherePoint,
    angle,
    as_coords,
    exp_map,
    tangent_basis,
)

METHODS = ("geodesic_descent", "nested_golden_section")

# Domain guard (angles): stay this far inside the barrier / anchor horizon.
PENALTY_MARGIN = 1e-6
ANCHOR_MARGIN = 1e-9

ARMIJO_C1 = 1e-4
BACKTRACK = 0.5
MAX_INITIAL_STEP = 0.1
# FD gradients below this are indistinguishable from rounding noise
GRADIENT_FLOOR = 1e-7
# steepest descent iterations between quasi-Newton polishes
POLISH_EVERY = 200


class ResolventError(RuntimeError):
    """Inner solver failed to reach its tolerance within ``max_iter`` steps."""

    def __init__(self, message: str, best: SpherePoint, residual: float, iterations: int):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class InnerSolverConfig:
    method: str = "geodesic_descent"
    tol: float = 1e-10
    max_iter: int = 10_000
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown inner solver {self.method!r}; expected one of {METHODS}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if not 0 < self.fd_step < 1e-2:
            raise ValueError("fd_step must lie in (0, 1e-2)")


@dataclass(frozen=True, eq=False)
class ResolventResult:
    """Solved resolvent point.

    ``c_value`` is cos(sqrt(kappa) d(point, x)), the cosine of the
    CAT(1)-normalized step, and ``objective`` the value of
    lam f + tan sin at ``point``.
    """

    point: SpherePoint
    c_value: float
    objective: float
    inner_iterations: int
    inner_residual: float
    lam: float
    origin: SpherePoint


class _Objective:
    """lam f(y) + tan(theta) sin(theta) with the domain guard folded in as +inf."""

    def __init__(self, f: ConvexFunctional, lam: float, x: np.ndarray):
        self.f = f
        self.lam = lam
        self.x = x
        self.min_cos_x = math.sin(PENALTY_MARGIN)
        self.min_cos_anchor = math.sin(ANCHOR_MARGIN)
        self.P = f._P
        self.sk = 1.0

    def __call__(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(Y)
        cx = Y @ self.x
        out = self.lam * self.f.values(Y) + penalty_to_point(Y, self.x)
        bad = cx < self.min_cos_x
        if self.P is not None:
            bad |= np.any(Y @ self.P.T <= self.min_cos_anchor, axis=1)
        out = np.where(bad, np.inf, out)
        return out

    def at(self, y: np.ndarray) -> float:
        return float(self(y[None, :])[0])


def _directional_derivatives(obj: _Objective, y: np.ndarray, E: np.ndarray, h: float, sk: float) -> np.ndarray:
    """Central finite differences of obj along the rows of E (unit tangents).

    ``h`` is in the space metric; derivatives are per unit of that metric.
    """
    pts = [exp_map(y, (s * h * sk) * e) for s in (1.0, -1.0) for e in E]
    vals = obj(np.vstack(pts))
    n = E.shape[0]
    return (vals[:n] - vals[n:]) / (2.0 * h)


def _min_norm_element(G: np.ndarray) -> np.ndarray:
    """Smallest-norm point of the convex hull of the rows of G."""
    k = G.shape[0]
    M = 1e3 * max(1.0, float(np.abs(G).max()))
    A = np.vstack([G.T, np.full((1, k), M)])
    b = np.zeros(A.shape[0])
    b[-1] = M
    weights, _ = nnls(A, b)
    total = weights.sum()
    if total == 0.0:
        return G[0]
    return (weights / total) @ G


def _gradient_at(obj: _Objective, z: np.ndarray, E: np.ndarray, h: float, sk: float) -> np.ndarray:
    """FD gradient at a point z near the base point of E, in E's coordinates."""
    Ez = E - np.outer(E @ z, z)
    Ez /= np.linalg.norm(Ez, axis=1, keepdims=True)
    return _directional_derivatives(obj, z, Ez, h, sk)


def _line_search(obj, y, fy, direction, slope, s, tol):
    """Armijo backtracking along exp_y(s sk direction); returns (point, value, step) or None."""
    sk = obj.sk
    while s >= tol * 1e-3:
        trial = exp_map(y, (s * sk) * direction)
        ft = obj.at(trial)
        # strict: ties at the rounding floor would let the iterate drift
        if ft < fy and ft <= fy - ARMIJO_C1 * s * slope:
            return trial, ft, s
        s *= BACKTRACK
    return None


def _sampled_direction_step(obj, y, fy, E, cfg, cap):
    """Gradient-sampling fallback for kinks: descend along the min-norm element
    of gradients sampled on shrinking rings around y."""
    sk = obj.sk
    n = E.shape[0]
    if n == 2:
        th = np.linspace(0.0, 2 * math.pi, 8, endpoint=False)
        dirs = np.cos(th)[:, None] * E[0] + np.sin(th)[:, None] * E[1]
    else:
        dirs = np.vstack([E, -E])
    eps = 1e-3
    while eps >= cfg.tol:
        grads = [_gradient_at(obj, y, E, min(cfg.fd_step, eps / 10), sk)]
        for d in dirs:
            z = exp_map(y, (eps * sk) * d)
            grads.append(_gradient_at(obj, z, E, min(cfg.fd_step, eps / 10), sk))
        G = np.vstack(grads)
        if np.all(np.isfinite(G)):
            v = _min_norm_element(G)
            vn = float(np.linalg.norm(v))
            if vn > 0.0:
                found = _line_search(obj, y, fy, -(v / vn) @ E, vn, min(MAX_INITIAL_STEP, cap, 10 * eps), cfg.tol)
                if found is not None:
                    return found
        eps /= 10.0
    return None


def _chart_polish(obj, y, fy, cfg, sk):
    """BFGS in the exponential chart at y; cures the zig-zag of steepest
    descent in narrow smooth valleys. Returns (y, fy) improved or unchanged."""
    E = tangent_basis(y)

    def point(v):
        return exp_map(y, sk * (v @ E))

    def fun(v):
        val = obj.at(point(v))
        return val if math.isfinite(val) else fy + 1e6

    def jac(v):
        return _gradient_at(obj, point(v), E, cfg.fd_step, sk)

    res = minimize(fun, np.zeros(E.shape[0]), jac=jac, method="BFGS",
                   options={"gtol": GRADIENT_FLOOR, "maxiter": 500})
    z = point(res.x)
    fz = obj.at(z)
    if math.isfinite(fz) and fz < fy:
        return z, fz
    return y, fy


def _descent(obj: _Objective, x: np.ndarray, space: ModelSpace, cfg: InnerSolverConfig):
    sk = space.sqrt_kappa
    obj.sk = sk
    y = np.array(x, dtype=float)
    fy = obj.at(y)
    ratio = None  # last accepted step / gradient norm
    limit_angle = math.pi / 2 - PENALTY_MARGIN
    gnorm = 0.0
    for it in range(1, cfg.max_iter + 1):
        E = tangent_basis(y)
        g = _directional_derivatives(obj, y, E, cfg.fd_step, sk)
        gnorm = float(np.linalg.norm(g))
        if not math.isfinite(gnorm):
            raise ResolventError("non-finite gradient estimate", SpherePoint(y), gnorm, it)
        if gnorm == 0.0:
            return y, fy, it, gnorm
        cap = max((limit_angle - angle(y, x)) / sk, 0.0)
        s = min(MAX_INITIAL_STEP, cap)
        if ratio is not None:
            s = min(s, 2.0 * ratio * gnorm)
        found = _line_search(obj, y, fy, -(g / gnorm) @ E, gnorm, s, cfg.tol)
        sampled = False
        if found is None and gnorm > GRADIENT_FLOOR:
            found = _sampled_direction_step(obj, y, fy, E, cfg, cap)
            sampled = True
        if found is None:
            # no descent available above the resolution floor
            return y, fy, it, gnorm
        y, fy, s = found
        ratio = None if sampled else s / gnorm
        if it % POLISH_EVERY == 0 and not sampled:
            y, fy = _chart_polish(obj, y, fy, cfg, sk)
            ratio = None
            continue
        if s < cfg.tol and not sampled:
            E = tangent_basis(y)
            gnorm = float(np.linalg.norm(_directional_derivatives(obj, y, E, cfg.fd_step, sk)))
            return y, fy, it, gnorm
    raise ResolventError(
        f"geodesic descent did not reach tol={cfg.tol} in {cfg.max_iter} iterations",
        SpherePoint(y), gnorm, cfg.max_iter,
    )


def _nested_golden(obj: _Objective, x: np.ndarray, space: ModelSpace, cfg: InnerSolverConfig):
    from .oracle import geodesic_golden_section

    if space.dim != 2:
        raise GeometryError("nested_golden_section is only available on S^2")
    sk = space.sqrt_kappa
    center = np.array(x, dtype=float)
    radius = (math.pi / 2 - PENALTY_MARGIN) / sk
    rounds = 0
    while True:
        rounds += 1
        E = tangent_basis(center)
        inner_tol = max(radius * 1e-4, cfg.tol * 0.1)

        def point(u, v):
            return exp_map(center, sk * (u * E[0] + v * E[1]))

        def inner(u):
            t, val = geodesic_golden_section(lambda t: obj.at(point(u, t - radius)), 2 * radius, inner_tol)
            return val, t - radius

        tu, _ = geodesic_golden_section(lambda t: inner(t - radius)[0], 2 * radius, inner_tol)
        u = tu - radius
        new = point(u, inner(u)[1])
        if obj.at(new) <= obj.at(center):
            center = new
        if radius < cfg.tol:
            break
        if rounds >= cfg.max_iter:
            raise ResolventError("nested golden section did not shrink below tol",
                                 SpherePoint(center), radius, rounds)
        radius /= 50.0
    y = center
    E = tangent_basis(y)
    g = _directional_derivatives(obj, y, E, cfg.fd_step, sk)
    return y, obj.at(y), rounds, float(np.linalg.norm(g))


def resolve(f: ConvexFunctional, lam: float, x, space: ModelSpace,
            cfg: Optional[InnerSolverConfig] = None) -> ResolventResult:
    """Resolvent of ``lam * f`` at ``x``.

    Minimizes lam f(y) + tan(theta) sin(theta), theta = sqrt(kappa) d(y, x),
    over the open cap of angular radius pi/2 around x.

    Raises
    ------
    FunctionalDomainError
        If ``x`` is not admissible with respect to the anchors of ``f``.
    ResolventError
        If the inner solver exceeds ``cfg.max_iter``; carries the best iterate.
    """
    cfg = InnerSolverConfig() if cfg is None else cfg
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    cx = as_coords(x)
    if cx.size != space.dim + 1:
        raise GeometryError(f"point has {cx.size} coordinates, expected {space.dim + 1}")
    bad = f.domain_violation(cx)
    if bad is not None:
        raise FunctionalDomainError(f"x is not admissible with respect to anchor {bad}", bad)
    obj = _Objective(f, float(lam), cx)
    if cfg.method == "geodesic_descent":
        y, fy, iters, resid = _descent(obj, cx, space, cfg)
    else:
        y, fy, iters, resid = _nested_golden(obj, cx, space, cfg)
    point = SpherePoint(y)
    c = math.cos(angle(point, cx))
    return ResolventResult(point, c, fy, iters, resid, float(lam), SpherePoint(cx))


def resolvent_objective(f: ConvexFunctional, lam: float, x, y) -> float:
    """lam f(y) + tan sin of the normalized angle between y and x (inf outside the domain)."""
    return _Objective(f, float(lam), as_coords(x)).at(as_coords(y))


def stationarity_residual(f: ConvexFunctional, lam: float, x, y, space: ModelSpace,
                          directions: int = 16, fd_step: float = 1e-6) -> float:
    """Smallest one-sided directional derivative of the resolvent objective at y
    over ``directions`` evenly spread tangent directions (per unit of the space metric).

    At the exact minimizer every value is >= 0.
    """
    obj = _Objective(f, float(lam), as_coords(x))
    cy = as_coords(y)
    sk = space.sqrt_kappa
    E = tangent_basis(cy)
    if E.shape[0] == 2:
        th = np.linspace(0.0, 2 * math.pi, directions, endpoint=False)
        dirs = np.cos(th)[:, None] * E[0] + np.sin(th)[:, None] * E[1]
    else:
        dirs = np.vstack([E, -E])
    base = obj.at(cy)
    vals = obj(np.vstack([exp_map(cy, fd_step * sk * d) for d in dirs]))
    return float(np.min((vals - base) / fd_step))


# inequality checks ----------------------------------------------------------

class InequalityReport(NamedTuple):
    lhs: float
    rhs: float
    slack: float
    passed: bool


class FejerReport(NamedTuple):
    """Both resolvent inequalities toward a minimizer ``u`` plus their consequence."""

    gap_lhs: float
    gap_rhs: float
    gap_slack: float
    cosine_lhs: float
    cosine_rhs: float
    cosine_slack: float
    contraction_slack: float
    passed: bool


INEQUALITY_TOL = 1e-6


def check_resolvent_inequality(f, lam: float, mu: float, x, y, rx: ResolventResult,
                               ry: ResolventResult, space: Optional[ModelSpace] = None,
                               tol: float = INEQUALITY_TOL) -> InequalityReport:
    """Two-resolvent cosine inequality

    (lam Cx^2 (1+Cy^2) Cy + mu Cy^2 (1+Cx^2) Cx) cos d(Rx, Ry)
        >= lam Cx^2 (1+Cy^2) cos d(Rx, y) + mu Cy^2 (1+Cx^2) cos d(Ry, x)

    with Cx = cos d(Rx, x), Cy = cos d(Ry, y) and Rx, Ry the resolvents
    of lam f at x and mu f at y. All distances are normalized angles.
    """
    Cx, Cy = rx.c_value, ry.c_value
    D = angle(rx.point, ry.point)
    a = lam * Cx * Cx * (1 + Cy * Cy)
    b = mu * Cy * Cy * (1 + Cx * Cx)
    lhs = (a * Cy + b * Cx) * math.cos(D)
    rhs = a * math.cos(angle(rx.point, y)) + b * math.cos(angle(ry.point, x))
    slack = lhs - rhs
    return InequalityReport(lhs, rhs, slack, slack >= -tol)


def check_first_inequality(f, lam: float, mu: float, x, y, rx: ResolventResult,
                           ry: ResolventResult, space: Optional[ModelSpace] = None,
                           tol: float = INEQUALITY_TOL) -> InequalityReport:
    """(1/Cx^2 + 1) D (Cx cos D - cos d(Ry, x)) >= lam (f(Rx) - f(Ry)) sin D, D = d(Rx, Ry)."""
    Cx = rx.c_value
    D = angle(rx.point, ry.point)
    lhs = (1.0 / (Cx * Cx) + 1.0) * D * (Cx * math.cos(D) - math.cos(angle(ry.point, x)))
    rhs = lam * (f(rx.point) - f(ry.point)) * math.sin(D)
    slack = lhs - rhs
    return InequalityReport(lhs, rhs, slack, slack >= -tol)


def check_fejer_inequality(f, lam: float, x, rx: ResolventResult, u,
                           space: Optional[ModelSpace] = None,
                           tol: float = INEQUALITY_TOL) -> FejerReport:
    """Inequalities of a resolvent step toward a minimizer ``u`` of f:

    (pi/2)(1/C^2 + 1)(C cos d(u, Rx) - cos d(u, x)) >= lam (f(Rx) - f(u))
    C cos d(u, Rx) >= cos d(u, x)

    and the consequence min{cos d(Rx, x), cos d(u, Rx)} >= cos d(u, x).
    """
    C = rx.c_value
    cu_r = math.cos(angle(u, rx.point))
    cu_x = math.cos(angle(u, x))
    gap_lhs = (math.pi / 2) * (1.0 / (C * C) + 1.0) * (C * cu_r - cu_x)
    gap_rhs = lam * (f(rx.point) - f(u))
    cos_lhs, cos_rhs = C * cu_r, cu_x
    contraction = min(C, cu_r) - cu_x
    gap_slack, cos_slack = gap_lhs - gap_rhs, cos_lhs - cos_rhs
    passed = gap_slack >= -tol and cos_slack >= -tol and contraction >= -tol
    return FejerReport(gap_lhs, gap_rhs, gap_slack, cos_lhs, cos_rhs, cos_slack, contraction, passed)

"""Asymptotic centers, the Cesaro-weighted cosine function g and its maximizer,
and tail-window surrogates for limsup/liminf.

Infinite-horizon limits are replaced by extremes over a tail window (the last
quarter of the sequence, at least 8 terms). All distances inside g and the
asymptotic center are normalized angles, so g is the same function of the
point for every curvature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np

from .geometry import (
    GeometryError,
    ModelSpace,
    SpherePoint,
    angle,
    angles,
    as_coords,
    as_point,
    convex_combination,
    exp_map,
    normalized_mean,
    random_in_cap,
    tangent_basis,
)
from .oracle import GridSpec, cap_grid, grid_argmin
from .ppa import PpaTrace, tail_window

TAIL_FRACTION = 0.25
MIN_WINDOW = 8
CHECK_TOL = 1e-9
MULTISTART = 8
MAX_SPACING = 0.05


class GFunction:
    """g(y) = liminf_n (1 / sigma_n) sum_{k<=n} beta_k cos d(y, z_k).

    The liminf is taken over the last ``window`` partial averages.

    Parameters
    ----------
    sequence : sequence of SpherePoint
        The points z_1, ..., z_N.
    betas : sequence of float
        Positive weights, one per point.
    window : int, optional
        Tail window size; defaults to a quarter of N with a floor of 8.
    """

    def __init__(self, sequence: Sequence, betas: Sequence[float], window: Optional[int] = None):
        Z = np.vstack([as_coords(z) for z in sequence]) if len(sequence) else np.empty((0, 0))
        b = np.asarray(betas, dtype=float)
        if len(Z) == 0:
            raise ValueError("g needs a nonempty sequence")
        if b.shape != (len(Z),):
            raise ValueError(f"expected {len(Z)} weights, got shape {b.shape}")
        if not np.all(b > 0) or not np.all(np.isfinite(b)):
            raise ValueError("weights must be positive and finite")
        self.Z = Z
        self.betas = b
        self.sigma = np.cumsum(b)
        self.window = tail_window(len(Z), TAIL_FRACTION, MIN_WINDOW) if window is None else int(window)
        if not 1 <= self.window <= len(Z):
            raise ValueError(f"window must lie in [1, {len(Z)}]")

    @property
    def horizon(self) -> int:
        return len(self.Z)

    @property
    def dim(self) -> int:
        return self.Z.shape[1] - 1

    @classmethod
    def from_trace(cls, trace: PpaTrace, weights: str = "proof",
                   window: Optional[int] = None) -> "GFunction":
        """g built on z_k = x_{k+1}.

        ``weights="proof"`` uses beta_k = lam_k C_k^2 / (1 + C_k^2) with C_k
        the resolvent cosine of step k; ``"uniform"`` uses beta_k = 1.
        """
        if len(trace) == 0:
            raise ValueError("trace has no steps")
        if weights == "proof":
            lam = np.asarray(trace.lambdas)
            c2 = np.asarray(trace.c_values) ** 2
            betas = lam * c2 / (1.0 + c2)
        elif weights == "uniform":
            betas = np.ones(len(trace))
        else:
            raise ValueError(f"unknown weights mode {weights!r}")
        return cls(trace.iterates[1:], betas, window)

    def values(self, Y: np.ndarray) -> np.ndarray:
        """Vectorized g over the rows of Y."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if Y.shape[1] != self.Z.shape[1]:
            raise GeometryError(f"dimension mismatch: points in R^{Y.shape[1]}, sequence in R^{self.Z.shape[1]}")
        cos = np.clip(Y @ self.Z.T, -1.0, 1.0) * self.betas
        avg = np.cumsum(cos, axis=1)[:, -self.window:] / self.sigma[-self.window:]
        return avg.min(axis=1)

    def __call__(self, y) -> float:
        return float(self.values(as_coords(y)[None, :])[0])

    def tail_center(self) -> SpherePoint:
        return normalized_mean(list(self.Z[-self.window:]))


def g_evaluate(gf: GFunction, y, space: Optional[ModelSpace] = None) -> float:
    """Value of g at ``y``; see :class:`GFunction`."""
    c = as_coords(y)
    if space is not None and c.size != space.dim + 1:
        raise GeometryError(f"point in R^{c.size} does not live on S^{space.dim}")
    return gf(c)


def _compass_maximize(fn: Callable[[np.ndarray], np.ndarray], start: np.ndarray,
                      step: float, min_step: float = 1e-10, max_iter: int = 10000) -> np.ndarray:
    """Derivative-free pattern search for a max of ``fn`` on the sphere.

    Polls +-e_i in the tangent space and halves the step when no poll improves.
    """
    x = np.array(start, dtype=float)
    fx = float(fn(x[None, :])[0])
    for _ in range(max_iter):
        if step < min_step:
            break
        E = tangent_basis(x)
        polls = np.vstack([exp_map(x, s * step * e) for e in E for s in (1.0, -1.0)])
        vals = fn(polls)
        i = int(np.argmax(vals))
        if vals[i] > fx:
            x, fx = polls[i], float(vals[i])
        else:
            step *= 0.5
    return x


def _cap_of(Z: np.ndarray, pad: float):
    c = normalized_mean(list(Z))
    spread = float(angles(Z, c.coords).max())
    return c, min(spread + pad, math.pi / 2 - 1e-9)


def g_maximize(gf: GFunction, space: ModelSpace, grid_spacing: float = 0.01,
               multistart: bool = False, seed: int = 0) -> SpherePoint:
    """Maximizer of g.

    On S^2 the cap around the tail is scanned with a grid of angular spacing
    ``grid_spacing`` (at most 0.05) and the best grid point is refined by
    compass search. With ``multistart=True`` any dimension is accepted and
    the best of 8 compass searches from random tail-cap starts is returned;
    that result is not certified by exhaustion.
    """
    if not 0 < grid_spacing <= MAX_SPACING:
        raise ValueError(f"grid_spacing must lie in (0, {MAX_SPACING}]")
    if gf.dim != space.dim:
        raise GeometryError(f"g lives on S^{gf.dim}, space is S^{space.dim}")
    tail = gf.Z[-gf.window:]
    center, radius = _cap_of(tail, 2 * grid_spacing)
    if multistart:
        rng = np.random.default_rng(seed)
        starts = [center.coords] + [p.coords for p in random_in_cap(
            rng, center, radius, ModelSpace(space.dim), size=MULTISTART - 1)]
        best = max((_compass_maximize(gf.values, s, grid_spacing) for s in starts),
                   key=lambda p: float(gf.values(p[None, :])[0]))
        return SpherePoint(best)
    if space.dim != 2:
        raise GeometryError(f"grid maximization supports S^2 only, got S^{space.dim}")
    P = cap_grid(center, radius, grid_spacing)
    vals = gf.values(P)
    start = P[int(np.argmax(vals))]
    return SpherePoint(_compass_maximize(gf.values, start, grid_spacing))


def argmax_cluster_diameter(gf: GFunction, space: ModelSpace, grid_spacing: float = 0.01,
                            tol: float = 1e-9) -> float:
    """Angular diameter of the grid points whose g value is within ``tol`` of
    the grid maximum (S^2 only)."""
    if space.dim != 2:
        raise GeometryError("cluster diameter uses the S^2 grid")
    center, radius = _cap_of(gf.Z[-gf.window:], 2 * grid_spacing)
    P = cap_grid(center, radius, grid_spacing)
    vals = gf.values(P)
    near = P[vals >= vals.max() - tol]
    if len(near) < 2:
        return 0.0
    G = np.clip(near @ near.T, -1.0, 1.0)
    return float(np.arccos(G.min()))


class ConcavityReport(NamedTuple):
    passed: bool
    worst_concavity_slack: float
    worst_lipschitz_slack: float
    trials: int


def g_concavity_check(gf: GFunction, space: ModelSpace, trials: int = 10000, seed: int = 0,
                      radius: Optional[float] = None, tol: float = CHECK_TOL) -> ConcavityReport:
    """Randomized check of concavity and 1-Lipschitz continuity of g.

    Pairs y1, y2 are drawn from a cap around the tail on which every z_k is
    closer than pi/2; ``radius`` overrides the cap radius (angle). Lipschitz
    continuity is measured against the normalized angle between y1 and y2.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    center = gf.tail_center()
    if radius is None:
        spread = float(angles(gf.Z, center.coords).max())
        radius = max(0.0, min(1.0, math.pi / 2 - spread - 1e-3))
    unit = ModelSpace(space.dim)
    Y1 = np.vstack([p.coords for p in random_in_cap(rng, center, radius, unit, size=trials)])
    Y2 = np.vstack([p.coords for p in random_in_cap(rng, center, radius, unit, size=trials)])
    alphas = rng.uniform(0.0, 1.0, size=trials)
    M = np.vstack([convex_combination(a, b, al, unit).coords for a, b, al in zip(Y1, Y2, alphas)])
    g1, g2, gm = gf.values(Y1), gf.values(Y2), gf.values(M)
    conc = gm - (alphas * g1 + (1.0 - alphas) * g2)
    d = np.array([angle(a, b) for a, b in zip(Y1, Y2)])
    lip = d - np.abs(g1 - g2)
    wc, wl = float(conc.min()), float(lip.min())
    return ConcavityReport(wc >= -tol and wl >= -tol, wc, wl, trials)


@dataclass(frozen=True)
class AsymptoticCenterResult:
    center: SpherePoint
    radius: float
    grid_spacing: float
    window: int
    certified: bool = True

    @property
    def spherically_bounded(self) -> bool:
        """Surrogate for inf_y limsup_n d(y, x_n) < pi/2 (normalized)."""
        return self.radius < math.pi / 2


def asymptotic_center(sequence: Sequence, space: ModelSpace, grid_spacing: float = 0.01,
                      window: Optional[int] = None, multistart: bool = False,
                      seed: int = 0) -> AsymptoticCenterResult:
    """Minimizer of the tail-window surrogate of y -> limsup_n d(y, x_n).

    On S^2 this is a cap grid at ``grid_spacing`` radians plus three 10x
    refinements; ``multistart=True`` runs compass searches in any dimension
    and marks the result uncertified. ``radius`` is reported in the metric of
    ``space`` and ``grid_spacing`` as an angle.
    """
    pts = [as_point(p) for p in sequence]
    if len(pts) < 2:
        raise ValueError("asymptotic center needs at least two points")
    Z = np.vstack([p.coords for p in pts])
    if Z.shape[1] != space.dim + 1:
        raise GeometryError("sequence dimension does not match the space")
    w = tail_window(len(Z), TAIL_FRACTION, MIN_WINDOW) if window is None else int(window)
    tail = Z[-w:]

    def tail_max(Y):
        Y = np.atleast_2d(Y)
        out = np.zeros(len(Y))
        for row in tail:
            out = np.maximum(out, angles(Y, row))
        return out

    center, radius = _cap_of(tail, 2 * grid_spacing)
    sk = space.sqrt_kappa
    if multistart:
        rng = np.random.default_rng(seed)
        starts = [center.coords] + [p.coords for p in random_in_cap(
            rng, center, radius, ModelSpace(space.dim), size=MULTISTART - 1)]
        neg = lambda Y: -tail_max(Y)
        best = min((_compass_maximize(neg, s, grid_spacing) for s in starts),
                   key=lambda p: float(tail_max(p)[0]))
        return AsymptoticCenterResult(SpherePoint(best), float(tail_max(best)[0]) / sk,
                                      grid_spacing, w, certified=False)
    if space.dim != 2:
        raise GeometryError(f"grid mode supports S^2 only, got S^{space.dim}")
    best, val = grid_argmin(tail_max, space, GridSpec(grid_spacing / sk, 3),
                            center=center, radius=radius / sk)
    return AsymptoticCenterResult(best, val / sk, grid_spacing, w)


class MonotoneLimitReport(NamedTuple):
    lhs: float
    rhs: float
    discrepancy: float
    passed: bool
    window: int


_BUILTIN_MAPS = {"nonincreasing": math.cos, "nondecreasing": lambda t: t}


def monotone_limit_check(values: Sequence[float], map_kind: str = "nonincreasing",
                         fn: Optional[Callable[[float], float]] = None,
                         window: Optional[int] = None, tol: float = CHECK_TOL) -> MonotoneLimitReport:
    """Tail-window check of f(limsup t_n) against limsup or liminf of f(t_n).

    A continuous nondecreasing f commutes with limsup; a nonincreasing f
    turns it into liminf. The default maps are cos (nonincreasing on
    [0, pi/2]) and the identity.
    """
    if map_kind not in _BUILTIN_MAPS:
        raise ValueError(f"map_kind must be one of {sorted(_BUILTIN_MAPS)}")
    t = np.asarray(values, dtype=float)
    if t.size == 0 or not np.all(np.isfinite(t)):
        raise ValueError("values must be a nonempty list of finite reals")
    f = _BUILTIN_MAPS[map_kind] if fn is None else fn
    w = tail_window(len(t), TAIL_FRACTION, MIN_WINDOW) if window is None else int(window)
    tail = t[-w:]
    ft = np.array([f(v) for v in tail])
    lhs = f(float(tail.max()))
    rhs = float(ft.min() if map_kind == "nonincreasing" else ft.max())
    disc = abs(lhs - rhs)
    return MonotoneLimitReport(lhs, rhs, disc, disc <= tol, w)


def spherical_boundedness(sequence: Sequence, space: ModelSpace, grid_spacing: float = 0.01) -> float:
    """Surrogate of inf_y limsup_n d(y, x_n) in the metric of ``space``."""
    multistart = space.dim != 2
    return asymptotic_center(sequence, space, grid_spacing, multistart=multistart).radius


def g_values_along(gf: GFunction, points: Sequence) -> List[float]:
    return [float(v) for v in gf.values(np.vstack([as_coords(p) for p in points]))]

"""Convex objectives on admissible subsets of the sphere.

Every family is written in terms of the CAT(1)-normalized angle
theta = sqrt(kappa) * d_kappa(y, p) = arccos<y, p>, so a functional is the
same function of the embedded point whatever curvature the ambient
:class:`~geoprox.geometry.ModelSpace` carries.

* ``cosine_mean``        sum_i w_i (1 - cos theta_i)
* ``tan_sin_sum``        sum_i w_i tan(theta_i) sin(theta_i)
* ``max_cosine``         max_i w_i (1 - cos theta_i)
* ``custom_combination`` offset + sum_j c_j g_j for component functionals g_j
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .geometry import (
    Geodesic,
    GeometryError,
    ModelSpace,
    SpherePoint,
    as_coords,
    as_point,
    check_admissible,
    convex_combination,
    normalized_mean,
    random_in_cap,
)

KINDS = ("cosine_mean", "tan_sin_sum", "max_cosine", "custom_combination")
CONVEXITY_TOL = 1e-9
HALF_PI = math.pi / 2


class FunctionalDomainError(ValueError):
    """Evaluation point lies outside the admissible domain of a functional."""

    def __init__(self, message: str, anchor_index: Optional[int] = None):
        super().__init__(message)
        self.anchor_index = anchor_index


def penalty(t: float) -> float:
    """tan(t) sin(t), the barrier kernel of the resolvent, for t in [0, pi/2)."""
    if not 0.0 <= t < HALF_PI:
        raise FunctionalDomainError(f"penalty argument {t!r} outside [0, pi/2)")
    return math.tan(t) * math.sin(t)


def penalty_from_cos(c):
    """tan(t) sin(t) written through c = cos t, i.e. (1 - c^2) / c.

    Vectorized; returns ``inf`` where c <= 0 (t >= pi/2).
    """
    c = np.asarray(c, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(c > 0.0, (1.0 - c * c) / np.where(c > 0.0, c, 1.0), np.inf)
    return out if out.ndim else float(out)


def penalty_derivative(t: float) -> float:
    return math.sin(t) * (1.0 + 1.0 / math.cos(t) ** 2)


def _chords(Y: np.ndarray, P: np.ndarray):
    """Squared chord lengths |y - p|^2 and |y + p|^2 for all row pairs, shape (m, k)."""
    minus = ((Y[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
    plus = ((Y[:, None, :] + P[None, :, :]) ** 2).sum(axis=2)
    return minus, plus


def _penalty_from_chords(minus: np.ndarray, plus: np.ndarray) -> np.ndarray:
    # sin^2 t = |y-p|^2 |y+p|^2 / 4 and cos t = (|y+p|^2 - |y-p|^2) / 4
    c = (plus - minus) / 4.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(c > 0.0, (minus * plus / 4.0) / np.where(c > 0.0, c, 1.0), np.inf)
    return out


def penalty_to_point(Y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """tan(t) sin(t), t the angle between each row of ``Y`` and ``x``; inf for t >= pi/2."""
    minus, plus = _chords(np.atleast_2d(Y), np.atleast_2d(x))
    return _penalty_from_chords(minus, plus)[:, 0]


@dataclass(frozen=True, eq=False)
class ConvexFunctional:
    """A real-valued convex function on an admissible region of S^n.

    For ``custom_combination`` the ``weights`` are the coefficients of
    ``components`` and ``anchors`` is the union of the component anchors.
    """

    kind: str
    anchors: tuple = ()
    weights: tuple = ()
    components: tuple = ()
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}; expected one of {KINDS}")
        weights = tuple(float(w) for w in self.weights)
        if any(not (w > 0 and math.isfinite(w)) for w in weights):
            raise ValueError("weights must be strictly positive and finite")
        if not math.isfinite(self.offset):
            raise ValueError("offset must be finite")
        if self.kind == "custom_combination":
            comps = tuple(self.components)
            if len(comps) != len(weights):
                raise ValueError("custom_combination needs one weight per component")
            anchors = tuple(p for g in comps for p in g.anchors)
            object.__setattr__(self, "components", comps)
        else:
            anchors = tuple(as_point(p) for p in self.anchors)
            if not anchors:
                raise ValueError("a functional needs at least one anchor")
            if len(anchors) != len(weights):
                raise ValueError("anchors and weights must have the same length")
            if self.components:
                raise ValueError(f"{self.kind} takes no components")
        if anchors:
            dims = {p.dim for p in anchors}
            if len(dims) != 1:
                raise ValueError("anchors live on spheres of different dimension")
            if not check_admissible(anchors):
                raise ValueError("anchor set is not admissible (some pairwise distance >= pi/2)")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "_P", np.vstack([p.coords for p in anchors]) if anchors else None)
        object.__setattr__(self, "_w", np.asarray(weights))

    # constructors --------------------------------------------------------

    @classmethod
    def cosine_mean(cls, anchors, weights=None):
        weights = [1.0] * len(anchors) if weights is None else weights
        return cls("cosine_mean", tuple(anchors), tuple(weights))

    @classmethod
    def tan_sin_sum(cls, anchors, weights=None):
        weights = [1.0] * len(anchors) if weights is None else weights
        return cls("tan_sin_sum", tuple(anchors), tuple(weights))

    @classmethod
    def max_cosine(cls, anchors, weights=None):
        weights = [1.0] * len(anchors) if weights is None else weights
        return cls("max_cosine", tuple(anchors), tuple(weights))

    @classmethod
    def combination(cls, components, coefficients=None, offset: float = 0.0):
        coefficients = [1.0] * len(components) if coefficients is None else coefficients
        return cls("custom_combination", (), tuple(coefficients), tuple(components), offset)

    @classmethod
    def constant(cls, value: float = 0.0):
        """f(y) = value everywhere (no anchors, so no domain restriction)."""
        return cls("custom_combination", (), (), (), value)

    @classmethod
    def from_config(cls, cfg: dict) -> "ConvexFunctional":
        allowed = {"kind", "anchors", "weights", "components", "offset"}
        unknown = set(cfg) - allowed
        if unknown:
            raise ValueError(f"unknown functional keys: {sorted(unknown)}")
        kind = cfg.get("kind")
        if kind == "custom_combination":
            comps = [cls.from_config(c) for c in cfg.get("components", [])]
            return cls.combination(comps, cfg.get("weights"), cfg.get("offset", 0.0))
        if "anchors" not in cfg:
            raise ValueError("functional config needs 'anchors'")
        anchors = [SpherePoint(a) for a in cfg["anchors"]]
        weights = cfg.get("weights", [1.0] * len(anchors))
        return cls(kind, tuple(anchors), tuple(weights))

    def to_config(self) -> dict:
        if self.kind == "custom_combination":
            return {
                "kind": self.kind,
                "components": [g.to_config() for g in self.components],
                "weights": list(self.weights),
                "offset": self.offset,
            }
        return {
            "kind": self.kind,
            "anchors": [p.coords.tolist() for p in self.anchors],
            "weights": list(self.weights),
        }

    # evaluation ----------------------------------------------------------

    @property
    def dim(self) -> Optional[int]:
        return self.anchors[0].dim if self.anchors else None

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))

    def values(self, Y: np.ndarray) -> np.ndarray:
        """Vectorized values at the rows of ``Y`` without domain checks.

        Rows outside the domain of a ``tan_sin_sum`` term evaluate to inf.
        """
        Y = np.atleast_2d(Y)
        if self.kind == "custom_combination":
            out = np.full(Y.shape[0], self.offset)
            for c, g in zip(self.weights, self.components):
                out = out + c * g.values(Y)
            return out
        # 1 - cos t = |y - p|^2 / 2, exact to rounding even for tiny t
        minus, plus = _chords(Y, self._P)
        if self.kind == "cosine_mean":
            return (0.5 * minus) @ self._w
        if self.kind == "tan_sin_sum":
            return _penalty_from_chords(minus, plus) @ self._w
        return np.max((0.5 * minus) * self._w, axis=1)

    def __call__(self, y) -> float:
        return float(self.values(as_coords(y)[None, :])[0])

    def domain_violation(self, y) -> Optional[int]:
        """Index of the first anchor at angle >= pi/2 from y, else None."""
        if self._P is None:
            return None
        cos_ = self._P @ as_coords(y)
        bad = np.nonzero(cos_ <= 0.0)[0]
        return int(bad[0]) if bad.size else None

    def lipschitz_bound(self, max_angle: float = HALF_PI) -> float:
        """Lipschitz constant w.r.t. the unit-sphere angle on the region where
        every anchor lies within ``max_angle`` of the evaluation point."""
        if self.kind == "cosine_mean":
            return self.total_weight
        if self.kind == "max_cosine":
            return max(self.weights)
        if self.kind == "tan_sin_sum":
            if max_angle >= HALF_PI:
                return math.inf
            return self.total_weight * penalty_derivative(max_angle)
        return float(sum(c * g.lipschitz_bound(max_angle) for c, g in zip(self.weights, self.components)))

    def sampling_cap(self, space: ModelSpace, margin: float = 1e-3):
        """(center, radius) of a cap whose points are mutually admissible and
        admissible against every anchor. ``radius`` is in the space's metric."""
        if not self.anchors:
            center = SpherePoint(np.eye(space.dim + 1)[0])
            return center, (math.pi / 4 - margin) / space.sqrt_kappa
        center = normalized_mean(self.anchors, self.weights if self.kind != "custom_combination" else None)
        spread = max(float(np.arccos(np.clip(p.coords @ center.coords, -1, 1))) for p in self.anchors)
        r = min(math.pi / 4 - margin, HALF_PI - spread - margin)
        if r <= 0:
            raise ValueError("anchor set leaves no admissible sampling region")
        return center, r / space.sqrt_kappa


def evaluate(f: ConvexFunctional, y, space: Optional[ModelSpace] = None) -> float:
    """Value of ``f`` at ``y``, rejecting points outside the admissible domain.

    Raises
    ------
    FunctionalDomainError
        If y is at distance >= pi/(2 sqrt(kappa)) from some anchor; the
        offending index is stored on ``anchor_index``.
    """
    c = as_coords(y)
    if space is not None and c.size != space.dim + 1:
        raise GeometryError(f"point has {c.size} coordinates, expected {space.dim + 1}")
    if f.dim is not None and c.size != f.dim + 1:
        raise GeometryError(f"point has {c.size} coordinates, functional expects {f.dim + 1}")
    bad = f.domain_violation(c)
    if bad is not None:
        raise FunctionalDomainError(f"point is not admissible with respect to anchor {bad}", bad)
    return f(c)


def geodesic_restriction(f, g: Geodesic, space: Optional[ModelSpace] = None,
                         samples: int = 11) -> list[tuple[float, float]]:
    """Values of ``f`` at ``samples`` equally spaced points of the geodesic ``g``."""
    space = g.space if space is None else space
    ev = _evaluator(f, space)
    return [(t, ev(p)) for t, p in g.sample(samples)]


class ConvexityReport(NamedTuple):
    passed: bool
    worst_violation: float
    trials: int


def _evaluator(f, space) -> Callable:
    if isinstance(f, ConvexFunctional):
        return lambda p: evaluate(f, p, space)
    return lambda p: float(f(p))


def certify_convexity(f: Union[ConvexFunctional, Callable], space: ModelSpace, trials: int = 1000,
                      seed: int = 0, tol: float = CONVEXITY_TOL,
                      center=None, radius: Optional[float] = None) -> ConvexityReport:
    """Randomized check of f(a x (+) (1-a) y) <= a f(x) + (1-a) f(y).

    Points are drawn from an admissible cap (the functional's
    :meth:`~ConvexFunctional.sampling_cap` unless ``center``/``radius`` are
    given). ``worst_violation`` is the largest signed excess of the left
    side over the right side; the check passes when it is <= ``tol``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if center is None or radius is None:
        if not isinstance(f, ConvexFunctional):
            raise ValueError("center and radius are required for a plain callable")
        center, radius = f.sampling_cap(space)
    rng = np.random.default_rng(seed)
    ev = _evaluator(f, space)
    worst = -math.inf
    for _ in range(trials):
        x = random_in_cap(rng, center, radius, space)
        y = random_in_cap(rng, center, radius, space)
        a = float(rng.uniform(0.0, 1.0))
        if x.allclose(y, atol=0.0):
            z = x
        else:
            z = convex_combination(x, y, a, space)
        fx, fy = ev(x), ev(y)
        worst = max(worst, ev(z) - (fy + a * (fx - fy)))
    return ConvexityReport(worst <= tol, worst, trials)


def random_functional(rng: np.random.Generator, kind: str, n_anchors: int, space: ModelSpace,
                      center=None, spread: float = 0.5,
                      weight_range: Sequence[float] = (0.5, 2.0)) -> ConvexFunctional:
    """Random admissible functional with anchors within ``spread`` (angle) of ``center``."""
    if spread >= math.pi / 4:
        raise ValueError("spread must stay below pi/4 to keep anchors admissible")
    if center is None:
        center = SpherePoint(rng.standard_normal(space.dim + 1))
    unit = ModelSpace(space.dim)
    anchors = random_in_cap(rng, center, spread, unit, size=n_anchors)
    weights = rng.uniform(*weight_range, size=n_anchors)
    return ConvexFunctional(kind, tuple(anchors), tuple(weights))

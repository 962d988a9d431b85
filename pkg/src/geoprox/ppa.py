"""Outer proximal point iteration x_{n+1} = R_{lam_n f} x_n with step schedules,
stopping rules, rate bounds and existence certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, List, NamedTuple, Optional, Sequence

import numpy as np

from .functionals import ConvexFunctional, FunctionalDomainError
from .geometry import ModelSpace, SpherePoint, angle, angles, as_point, normalized_mean
from .resolvent import InnerSolverConfig, ResolventError, resolve

SCHEDULE_KINDS = ("constant", "harmonic", "power", "explicit_list")
MONOTONE_TOL = 1e-8
CERTIFICATE_MARGIN = 1e-3
ROUNDING_GUARD = 1e-12
TAIL_FRACTION = 0.25


class PpaError(RuntimeError):
    """Inner solver failure during a run; ``trace`` holds the iterates so far."""

    def __init__(self, message: str, trace: "PpaTrace", step: int):
        super().__init__(message)
        self.trace = trace
        self.step = step


@dataclass(frozen=True)
class StepSchedule:
    """Positive step sizes lam_1, lam_2, ... with divergent sum.

    * ``constant``: lam_n = value
    * ``harmonic``: lam_n = value / n
    * ``power``: lam_n = n^(-value), 0 < value <= 1
    * ``explicit_list``: the given values, the last one repeated past the end;
      requires ``divergent=True`` as the caller's assertion that the intended
      infinite sequence sums to infinity.
    """

    kind: str = "constant"
    value: float = 1.0
    values: Optional[tuple] = None
    divergent: bool = False

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.kind == "explicit_list":
            if not self.values:
                raise ValueError("explicit_list schedule needs a nonempty list of values")
            vals = tuple(float(v) for v in self.values)
            if any(not (v > 0 and math.isfinite(v)) for v in vals):
                raise ValueError("explicit step sizes must be positive and finite")
            if not self.divergent:
                raise ValueError("explicit_list schedule must assert divergent=True")
            object.__setattr__(self, "values", vals)
            return
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError("schedule value must be positive")
        if self.kind == "power" and self.value > 1:
            raise ValueError("power schedule needs exponent 0 < p <= 1 for a divergent sum")

    def __call__(self, n: int) -> float:
        """lam_n for n = 1, 2, ..."""
        if n < 1:
            raise ValueError("steps are indexed from 1")
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "harmonic":
            return float(self.value) / n
        if self.kind == "power":
            return float(n) ** (-self.value)
        return self.values[min(n, len(self.values)) - 1]

    def take(self, count: int) -> List[float]:
        return [self(n) for n in range(1, count + 1)]

    @classmethod
    def from_config(cls, cfg: dict) -> "StepSchedule":
        unknown = set(cfg) - {"kind", "value", "list", "divergent"}
        if unknown:
            raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
        kind = cfg.get("kind", "constant")
        if kind == "explicit_list":
            return cls(kind, values=tuple(cfg.get("list") or ()), divergent=bool(cfg.get("divergent", False)))
        return cls(kind, float(cfg.get("value", 1.0)))


@dataclass(frozen=True)
class RunConfig:
    max_iterations: int = 200
    stop_step_tol: Optional[float] = None
    stop_gap_tol: Optional[float] = None
    reference_minimizer: Optional[SpherePoint] = None
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        for name in ("stop_step_tol", "stop_gap_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive when given")
        if self.stop_gap_tol is not None and self.reference_minimizer is None:
            raise ValueError("stop_gap_tol needs a reference_minimizer")
        if self.reference_minimizer is not None:
            object.__setattr__(self, "reference_minimizer", as_point(self.reference_minimizer))


@dataclass
class PpaTrace:
    """Record of a proximal point run.

    ``iterates`` holds x_1, ..., x_{N+1}; the per-step lists are indexed by
    n - 1 for n = 1..N (so ``step_distances[n-1] = d(x_{n+1}, x_n)``).
    ``f_values`` has one entry per iterate. ``c_values`` are the resolvent
    cosines C_n = cos(sqrt(kappa) d(x_{n+1}, x_n)). Rate bounds and Fejer
    flags are filled only when a reference minimizer is known.
    """

    space: ModelSpace
    iterates: List[SpherePoint] = field(default_factory=list)
    lambdas: List[float] = field(default_factory=list)
    f_values: List[float] = field(default_factory=list)
    step_distances: List[float] = field(default_factory=list)
    sup_step: List[float] = field(default_factory=list)
    c_values: List[float] = field(default_factory=list)
    inner_iterations: List[int] = field(default_factory=list)
    rate_bounds: List[float] = field(default_factory=list)
    fejer_flags: List[bool] = field(default_factory=list)
    reference: Optional[SpherePoint] = None
    reference_value: Optional[float] = None
    stop_reason: str = ""

    def __len__(self) -> int:
        return len(self.step_distances)

    @property
    def final(self) -> SpherePoint:
        return self.iterates[-1]

    @property
    def l_sup(self) -> float:
        """sup_n d(x_{n+1}, x_n) over the recorded steps (0 for an empty trace)."""
        return self.sup_step[-1] if self.sup_step else 0.0

    def distances_to(self, u) -> np.ndarray:
        P = np.vstack([p.coords for p in self.iterates])
        return angles(P, as_point(u).coords) / self.space.sqrt_kappa

    def gaps(self) -> np.ndarray:
        """f(x_{n+1}) - f(u) for n = 1..N; requires a reference."""
        if self.reference_value is None:
            raise ValueError("trace has no reference minimizer")
        return np.asarray(self.f_values[1:]) - self.reference_value

    def _append(self, lam: float, point: SpherePoint, fval: float, c: float, inner: int) -> None:
        d = angle(point, self.iterates[-1]) / self.space.sqrt_kappa
        self.lambdas.append(float(lam))
        self.iterates.append(point)
        self.f_values.append(float(fval))
        self.step_distances.append(d)
        self.sup_step.append(max(d, self.sup_step[-1] if self.sup_step else 0.0))
        self.c_values.append(float(c))
        self.inner_iterations.append(int(inner))


def bound_constants(sup_step: float, space: Optional[ModelSpace] = None):
    """(K, C) with K = 1/cos^2(l) + 1 and C = K pi / 2, l the normalized sup step."""
    l = sup_step * (space.sqrt_kappa if space is not None else 1.0)
    K = 1.0 / math.cos(l) ** 2 + 1.0
    return K, K * math.pi / 2.0


def rate_bound(trace: PpaTrace, u, n: int) -> float:
    """Certified bound on f(x_{n+1}) - inf f:

        (K pi / 2) (1 - cos d(u, x_1)) / sum_{k<=n} lam_k,  K = 1/cos^2(l) + 1,

    with l the sup step of the whole trace and distances normalized to the
    unit sphere.
    """
    if len(trace) == 0:
        raise ValueError("rate bound needs a nonempty trace")
    if not 1 <= n <= len(trace):
        raise ValueError(f"n must lie in [1, {len(trace)}], got {n}")
    _, C = bound_constants(trace.l_sup, trace.space)
    return C * (1.0 - math.cos(angle(u, trace.iterates[0]))) / math.fsum(trace.lambdas[:n])


def _certify(trace: PpaTrace, u: SpherePoint, fu: float) -> None:
    trace.reference, trace.reference_value = u, fu
    N = len(trace)
    if N == 0:
        return
    _, C = bound_constants(trace.l_sup, trace.space)
    head = C * (1.0 - math.cos(angle(u, trace.iterates[0])))
    sums = np.cumsum(trace.lambdas)
    trace.rate_bounds = [float(head / s) for s in sums]
    dist = trace.distances_to(u)
    trace.fejer_flags = [bool(dist[k + 1] <= dist[k] + MONOTONE_TOL) for k in range(N)]


def run_ppa(f: ConvexFunctional, x1, schedule: StepSchedule, space: ModelSpace,
            run_cfg: Optional[RunConfig] = None, inner_cfg: Optional[InnerSolverConfig] = None,
            reference_value: Optional[float] = None) -> PpaTrace:
    """Run x_{n+1} = R_{lam_n f} x_n from ``x1``.

    Stops after ``run_cfg.max_iterations`` steps, or earlier when a step is
    shorter than ``stop_step_tol`` or the gap to the reference falls below
    ``stop_gap_tol``; ``trace.stop_reason`` records which rule fired.

    Raises
    ------
    PpaError
        If a resolvent fails; the partial trace is attached.
    """
    run_cfg = RunConfig() if run_cfg is None else run_cfg
    inner_cfg = InnerSolverConfig() if inner_cfg is None else inner_cfg
    x1 = as_point(x1)
    bad = f.domain_violation(x1.coords)
    if bad is not None:
        raise FunctionalDomainError(f"x1 is not admissible with respect to anchor {bad}", bad)
    trace = PpaTrace(space=space, iterates=[x1], f_values=[f(x1)])
    u = run_cfg.reference_minimizer
    fu = None
    if u is not None:
        fu = f(u) if reference_value is None else float(reference_value)
    x = x1
    trace.stop_reason = "max_iterations"
    for n in range(1, run_cfg.max_iterations + 1):
        lam = schedule(n)
        try:
            r = resolve(f, lam, x, space, inner_cfg)
        except ResolventError as exc:
            trace.stop_reason = "solver_failure"
            if u is not None:
                _certify(trace, u, fu)
            raise PpaError(f"resolvent failed at step {n}: {exc}", trace, n) from exc
        trace._append(lam, r.point, f(r.point), r.c_value, r.inner_iterations)
        x = r.point
        if run_cfg.stop_step_tol is not None and trace.step_distances[-1] < run_cfg.stop_step_tol:
            trace.stop_reason = "step_tol"
            break
        if run_cfg.stop_gap_tol is not None and trace.f_values[-1] - fu < run_cfg.stop_gap_tol:
            trace.stop_reason = "gap_tol"
            break
    if u is not None:
        _certify(trace, u, fu)
    return trace


def iterated_resolvent_run(f: ConvexFunctional, x, n: int, space: ModelSpace,
                           run_cfg: Optional[RunConfig] = None,
                           inner_cfg: Optional[InnerSolverConfig] = None) -> PpaTrace:
    """n applications of the resolvent R_f (constant step 1)."""
    base = RunConfig() if run_cfg is None else run_cfg
    cfg = RunConfig(max_iterations=n, stop_step_tol=base.stop_step_tol,
                    reference_minimizer=base.reference_minimizer, seed=base.seed)
    return run_ppa(f, x, StepSchedule("constant", 1.0), space, cfg, inner_cfg)


class BoundCheck(NamedTuple):
    satisfied: bool
    worst_slack: float
    checked: int


def check_rate_bound(trace: PpaTrace, tol: float = MONOTONE_TOL) -> BoundCheck:
    """gap(n) <= rate_bound(n) + tol for every recorded step."""
    if not trace.rate_bounds:
        raise ValueError("trace has no rate bounds (no reference minimizer)")
    gaps = trace.gaps()
    slack = np.asarray(trace.rate_bounds) - gaps
    worst = float(slack.min())
    return BoundCheck(worst >= -tol, worst, len(gaps))


def check_iterated_bound(trace: PpaTrace, tol: float = MONOTONE_TOL) -> BoundCheck:
    """gap(n) <= C (1 - cos d(u, x_1)) / n for a constant-step-1 trace."""
    if any(lam != 1.0 for lam in trace.lambdas):
        raise ValueError("the C/n form applies to unit steps only")
    if trace.reference is None:
        raise ValueError("trace has no reference minimizer")
    _, C = bound_constants(trace.l_sup, trace.space)
    head = C * (1.0 - math.cos(angle(trace.reference, trace.iterates[0])))
    gaps = trace.gaps()
    n = np.arange(1, len(gaps) + 1)
    slack = head / n - gaps
    worst = float(slack.min()) if len(slack) else 0.0
    return BoundCheck(worst >= -tol, worst, len(gaps))


def check_monotone(trace: PpaTrace, tol: float = MONOTONE_TOL) -> BoundCheck:
    """f(x_{n+1}) <= f(x_n) + tol along the trace."""
    fv = np.asarray(trace.f_values)
    if len(fv) < 2:
        return BoundCheck(True, 0.0, 0)
    slack = fv[:-1] - fv[1:]
    worst = float(slack.min())
    return BoundCheck(worst >= -tol, worst, len(slack))


def check_fejer(trace: PpaTrace, u=None, tol: float = MONOTONE_TOL) -> BoundCheck:
    """d(u, x_{n+1}) <= d(u, x_n) + tol along the trace."""
    u = trace.reference if u is None else u
    if u is None:
        raise ValueError("no minimizer given and the trace has no reference")
    dist = trace.distances_to(u)
    if len(dist) < 2:
        return BoundCheck(True, 0.0, 0)
    slack = dist[:-1] - dist[1:]
    worst = float(slack.min())
    return BoundCheck(worst >= -tol, worst, len(slack))


def tail_window(length: int, fraction: float = TAIL_FRACTION, minimum: int = 1) -> int:
    """Size of the tail window standing in for n -> infinity."""
    return min(length, max(minimum, int(math.ceil(fraction * length))))


class ExistenceReport(NamedTuple):
    spherically_bounded_estimate: float
    sup_step: float
    verdict: bool
    window: int


def existence_certificate(trace: PpaTrace, margin: float = CERTIFICATE_MARGIN,
                          grid_spacing: float = 0.05) -> ExistenceReport:
    """Finite-horizon test of "spherically bounded and sup step < pi/2".

    Both quantities must stay below pi/2 - ``margin``; the default margin of
    1e-3 rejects every two-point oscillation with steps of pi/2 - 1e-3 or more.

    inf_y limsup_n d(y, x_n) is estimated by the smallest tail-window max
    distance over candidate centers: the iterates, their mean and, on S^2,
    a cap grid around the tail. Distances are normalized angles so the
    threshold is pi/2 for every kappa.
    """
    if len(trace.iterates) < 2:
        raise ValueError("existence certificate needs at least two iterates")
    P = np.vstack([p.coords for p in trace.iterates])
    w = tail_window(len(P))
    tail = P[-w:]
    cands = [P]
    try:
        mean = normalized_mean(list(tail))
        cands.append(mean.coords[None, :])
        if trace.space.dim == 2:
            from .oracle import cap_grid
            spread = float(angles(tail, mean.coords).max())
            cands.append(cap_grid(mean, min(spread + grid_spacing, math.pi / 2), grid_spacing))
    except ValueError:
        pass
    C = np.vstack(cands)
    worst = np.zeros(len(C))
    for row in tail:
        worst = np.maximum(worst, angles(C, row))
    estimate = float(worst.min())
    sup = trace.l_sup * trace.space.sqrt_kappa
    # a step of exactly pi/2 - margin must fail despite rounding in the angle
    bound = math.pi / 2 - margin - ROUNDING_GUARD
    return ExistenceReport(estimate / trace.space.sqrt_kappa, trace.l_sup,
                           estimate < bound and sup < bound, w)


def synthetic_trace(points: Sequence, space: ModelSpace, f: Optional[ConvexFunctional] = None) -> PpaTrace:
    """Wrap an arbitrary point sequence as a trace (for certificate tests)."""
    pts = [as_point(p) for p in points]
    fv = (lambda p: f(p)) if f is not None else (lambda p: 0.0)
    trace = PpaTrace(space=space, iterates=[pts[0]], f_values=[fv(pts[0])])
    for p in pts[1:]:
        trace._append(1.0, p, fv(p), math.cos(angle(p, trace.iterates[-1])), 0)
    return trace


def iter_rows(trace: PpaTrace) -> Iterator[dict]:
    """CSV-ready rows: n = 0 describes x_1, row n >= 1 describes step n."""
    has_ref = trace.reference is not None
    dist = trace.distances_to(trace.reference) if has_ref else None
    yield {
        "n": 0, "lambda": None, "f_value": trace.f_values[0], "step_distance": None,
        "dist_to_reference": float(dist[0]) if has_ref else None,
        "rate_bound": None, "fejer_ok": None,
    }
    for k in range(len(trace)):
        yield {
            "n": k + 1,
            "lambda": trace.lambdas[k],
            "f_value": trace.f_values[k + 1],
            "step_distance": trace.step_distances[k],
            "dist_to_reference": float(dist[k + 1]) if has_ref else None,
            "rate_bound": trace.rate_bounds[k] if has_ref else None,
            "fejer_ok": trace.fejer_flags[k] if has_ref else None,
        }

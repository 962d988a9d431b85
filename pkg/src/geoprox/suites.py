"""Seeded randomized property suites behind ``geoprox verify``.

Each suite returns a list of :class:`PropertyResult`, one per property,
recording the trial count and the worst slack (left side minus right side,
so negative values beyond the tolerance are failures).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List

import numpy as np

from .diagnostics import GFunction, asymptotic_center, g_concavity_check, g_maximize
from .functionals import ConvexFunctional, certify_convexity, random_functional
from .geometry import ModelSpace, angle, comparison_slacks, random_in_cap
from .oracle import GridSpec, reference_minimizer
from .ppa import (
    RunConfig,
    StepSchedule,
    check_fejer,
    check_iterated_bound,
    check_monotone,
    check_rate_bound,
    existence_certificate,
    run_ppa,
)
from .resolvent import (
    check_fejer_inequality,
    check_first_inequality,
    check_resolvent_inequality,
    resolve,
)

SUITES = ("geometry", "functionals", "resolvent", "ppa", "diagnostics")
GEOMETRY_TOL = 1e-10
RESOLVENT_TOL = 1e-6
PPA_TOL = 1e-8
REFERENCE_GRID = GridSpec(0.01, 6)


@dataclass
class PropertyResult:
    suite: str
    name: str
    trials: int
    worst_slack: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


class _Tracker:
    def __init__(self, suite: str):
        self.suite = suite
        self.worst: Dict[str, float] = {}
        self.count: Dict[str, int] = {}
        self.tol: Dict[str, float] = {}

    def add(self, name: str, slack: float, tol: float) -> None:
        self.worst[name] = min(self.worst.get(name, math.inf), float(slack))
        self.count[name] = self.count.get(name, 0) + 1
        self.tol[name] = tol

    def results(self) -> List[PropertyResult]:
        return [PropertyResult(self.suite, k, self.count[k], self.worst[k], self.tol[k],
                               self.worst[k] >= -self.tol[k]) for k in self.worst]


def random_triples(rng: np.random.Generator, dim: int, n: int, radius: float = 0.7):
    """n triples, each inside a random cap of angular ``radius`` < pi/4 (pairwise < pi/2)."""
    C = rng.standard_normal((n, dim + 1))
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    out = []
    for _ in range(3):
        V = rng.standard_normal((n, dim + 1))
        V -= np.sum(V * C, axis=1, keepdims=True) * C
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        r = rng.uniform(0.0, radius, size=(n, 1))
        P = np.cos(r) * C + np.sin(r) * V
        out.append(P / np.linalg.norm(P, axis=1, keepdims=True))
    return out


def geometry_suite(trials: int, seed: int) -> List[PropertyResult]:
    rng = np.random.default_rng(seed)
    t = _Tracker("geometry")
    for dim in (2, 4):
        X1, X2, X3 = random_triples(rng, dim, trials)
        s1, s2, s3 = comparison_slacks(X1, X2, X3, rng.uniform(size=trials))
        for name, s in (("sine_weighted", s1), ("midpoint", s2), ("cosine_combination", s3)):
            ok = s[~np.isnan(s)]
            t.worst[f"{name}_S{dim}"] = float(ok.min()) if ok.size else math.inf
            t.count[f"{name}_S{dim}"] = int(ok.size)
            t.tol[f"{name}_S{dim}"] = GEOMETRY_TOL
    return t.results()


def functionals_suite(trials: int, seed: int) -> List[PropertyResult]:
    rng = np.random.default_rng(seed)
    space = ModelSpace(2)
    t = _Tracker("functionals")
    for kind in ("cosine_mean", "tan_sin_sum", "max_cosine"):
        f = random_functional(rng, kind, 3, space, spread=0.5)
        rep = certify_convexity(f, space, trials=trials, seed=int(rng.integers(2**31)))
        t.add(f"geodesic_convexity_{kind}", -rep.worst_violation, 1e-9)
        t.count[f"geodesic_convexity_{kind}"] = rep.trials
    return t.results()


def _reference(f: ConvexFunctional, space: ModelSpace):
    return reference_minimizer(f, space, REFERENCE_GRID)


def resolvent_instance(rng: np.random.Generator, kind: str, space: ModelSpace):
    """Random (f, u, f(u), x, y, lam, mu) with x, y in the functional's sampling cap."""
    f = random_functional(rng, kind, 3, space, spread=0.5)
    u, fu = _reference(f, space)
    center, radius = f.sampling_cap(space)
    x, y = random_in_cap(rng, center, radius, space, size=2)
    lam, mu = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=2))
    return f, u, fu, x, y, float(lam), float(mu)


def resolvent_suite(trials: int, seed: int) -> List[PropertyResult]:
    rng = np.random.default_rng(seed)
    space = ModelSpace(2)
    t = _Tracker("resolvent")
    for i in range(trials):
        kind = ("cosine_mean", "tan_sin_sum")[i % 2]
        f, u, _, x, y, lam, mu = resolvent_instance(rng, kind, space)
        rx, ry = resolve(f, lam, x, space), resolve(f, mu, y, space)
        t.add("first_inequality", check_first_inequality(f, lam, mu, x, y, rx, ry, space).slack, RESOLVENT_TOL)
        t.add("two_resolvent_inequality",
              check_resolvent_inequality(f, lam, mu, x, y, rx, ry, space).slack, RESOLVENT_TOL)
        rx_mu = resolve(f, lam, y, space)
        t.add("equal_step_inequality",
              check_resolvent_inequality(f, lam, lam, x, y, rx, rx_mu, space).slack, RESOLVENT_TOL)
        fj = check_fejer_inequality(f, lam, x, rx, u, space)
        t.add("gap_inequality", fj.gap_slack, RESOLVENT_TOL)
        t.add("cosine_contraction", fj.cosine_slack, RESOLVENT_TOL)
        t.add("min_contraction", fj.contraction_slack, RESOLVENT_TOL)
    return t.results()


def ppa_problem(rng: np.random.Generator, kind: str = "cosine_mean", space: ModelSpace = ModelSpace(2)):
    f = random_functional(rng, kind, 3, space, spread=0.5)
    u, fu = _reference(f, space)
    center, radius = f.sampling_cap(space)
    return f, u, fu, random_in_cap(rng, center, radius, space)


def ppa_suite(trials: int, seed: int, iterations: int = 60) -> List[PropertyResult]:
    rng = np.random.default_rng(seed)
    space = ModelSpace(2)
    t = _Tracker("ppa")
    for i in range(trials):
        f, u, fu, x1 = ppa_problem(rng, ("cosine_mean", "tan_sin_sum")[i % 2], space)
        tr = run_ppa(f, x1, StepSchedule("constant", 1.0), space,
                     RunConfig(iterations, reference_minimizer=u), reference_value=fu)
        t.add("monotone_values", check_monotone(tr).worst_slack, PPA_TOL)
        t.add("rate_bound", check_rate_bound(tr).worst_slack, PPA_TOL)
        t.add("iterated_bound", check_iterated_bound(tr).worst_slack, PPA_TOL)
        t.add("fejer_monotone", check_fejer(tr).worst_slack, PPA_TOL)
        rep = existence_certificate(tr)
        t.add("existence_verdict", 0.0 if rep.verdict else -1.0, 0.0)
    return t.results()


def diagnostics_suite(trials: int, seed: int, runs: int = 2, grid_spacing: float = 0.01) -> List[PropertyResult]:
    rng = np.random.default_rng(seed)
    space = ModelSpace(2)
    t = _Tracker("diagnostics")
    for _ in range(runs):
        f, u, fu, x1 = ppa_problem(rng, "cosine_mean", space)
        tr = run_ppa(f, x1, StepSchedule("constant", 1.0), space, RunConfig(200, reference_minimizer=u))
        gf = GFunction.from_trace(tr)
        rep = g_concavity_check(gf, space, trials, int(rng.integers(2**31)))
        t.add("g_concave", rep.worst_concavity_slack, 1e-9)
        t.add("g_nonexpansive", rep.worst_lipschitz_slack, 1e-9)
        m = g_maximize(gf, space, grid_spacing)
        ac = asymptotic_center(tr.iterates, space, grid_spacing)
        bound = 3 * grid_spacing
        t.add("g_argmax_vs_argmin", bound - angle(m, u), 0.0)
        t.add("center_vs_argmin", bound - angle(ac.center, u), 0.0)
        t.add("center_vs_g_argmax", bound - angle(ac.center, m), 0.0)
    return t.results()


SUITE_FUNCS: Dict[str, Callable[[int, int], List[PropertyResult]]] = {
    "geometry": geometry_suite,
    "functionals": functionals_suite,
    "resolvent": resolvent_suite,
    "ppa": ppa_suite,
    "diagnostics": diagnostics_suite,
}


def run_suite(suite: str, trials: int, seed: int) -> List[PropertyResult]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if suite == "all":
        return [r for name in SUITES for r in SUITE_FUNCS[name](trials, seed)]
    if suite not in SUITE_FUNCS:
        raise ValueError(f"unknown suite {suite!r}")
    return SUITE_FUNCS[suite](trials, seed)

import math

import numpy as np
import pytest

from geoprox.functionals import ConvexFunctional
from geoprox.geometry import GeometryError, ModelSpace, SpherePoint, angle
from geoprox.oracle import (
    GridSpec,
    cap_grid,
    cosine_mean_argmin,
    geodesic_golden_section,
    grid_argmin,
    reference_minimizer,
    resolvent_grid_argmin,
    single_anchor_resolvent_1d,
)

S2 = ModelSpace(2)
E0, E1, E2 = np.eye(3)


def test_grid_spec_validation():
    assert GridSpec().final_spacing == pytest.approx(1e-5)
    with pytest.raises(ValueError):
        GridSpec(0.0)
    with pytest.raises(ValueError):
        GridSpec(0.01, -1)


def test_cap_grid_covers_cap():
    P = cap_grid(E2, 0.3, 0.02)
    d = np.arccos(np.clip(P @ E2, -1, 1))
    assert d.max() <= 0.3 + 1e-12
    assert np.allclose(np.linalg.norm(P, axis=1), 1.0)
    # every point of the cap is within about one spacing of the grid
    rng = np.random.default_rng(0)
    from geoprox.geometry import random_in_cap
    for q in random_in_cap(rng, SpherePoint(E2), 0.3, size=50):
        assert np.arccos(np.clip(P @ q.coords, -1, 1)).min() < 0.02


def test_cap_grid_is_deterministic():
    assert np.array_equal(cap_grid(E0, 0.2, 0.01), cap_grid(E0, 0.2, 0.01))


def test_single_anchor_grid_returns_anchor():
    p = SpherePoint([1, 0.3, -0.2])
    f = ConvexFunctional.cosine_mean([p])
    best, val = grid_argmin(f, S2)
    assert angle(best, p) <= GridSpec().final_spacing
    assert val < 1e-9


def test_constant_resolvent_objective_returns_x():
    x = SpherePoint([0.2, 0.9, 0.3])
    f = ConvexFunctional.combination([ConvexFunctional.cosine_mean([x])], [1e-12])
    best, _ = resolvent_grid_argmin(f, 1.0, x, S2)
    assert angle(best, x) <= 1e-5


def test_three_anchor_grid_matches_normalized_mean():
    a = [SpherePoint([1, 0, 0]), SpherePoint([math.cos(.5), math.sin(.5), 0]),
         SpherePoint([math.cos(.5), 0, math.sin(.5)])]
    f = ConvexFunctional.cosine_mean(a, [1, 1, 1])
    best, _ = grid_argmin(f, S2)
    # value-based location is limited by the quadratic valley: sqrt(rounding)
    assert angle(best, cosine_mean_argmin(f)) <= 2 * GridSpec().final_spacing


def test_golden_section_textbook():
    t, v = geodesic_golden_section(lambda t: (t - 0.3) ** 2, 1.0, 1e-9)
    assert t == pytest.approx(0.3, abs=1e-9)
    t, v = geodesic_golden_section(lambda t: math.tan(t) * math.sin(t), 1.4, 1e-9)
    assert t == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        geodesic_golden_section(lambda t: t, 1.0, 0.0)


def test_golden_vs_grid_single_anchor():
    s, lam = 0.8, 1.0
    t1, _ = single_anchor_resolvent_1d(lam, s, 1e-10)
    x = SpherePoint(E0)
    p = SpherePoint([math.cos(s), math.sin(s), 0])
    best, _ = resolvent_grid_argmin(ConvexFunctional.cosine_mean([p]), lam, x, S2)
    assert angle(best, x) == pytest.approx(t1, abs=2 * 1e-5)
    # stationarity of the 1D objective: lam sin(s - t) = d/dt tan t sin t
    dphi = math.sin(t1) * (1 + 1 / math.cos(t1) ** 2)
    assert lam * math.sin(s - t1) == pytest.approx(dphi, abs=1e-8)


def test_grid_requires_s2():
    f = ConvexFunctional.cosine_mean([np.eye(4)[0]])
    with pytest.raises(GeometryError):
        grid_argmin(f, ModelSpace(3))
    with pytest.raises(GeometryError):
        reference_minimizer(ConvexFunctional.tan_sin_sum([np.eye(4)[0]]), ModelSpace(3))
    u, fu = reference_minimizer(f, ModelSpace(3))
    assert fu == 0.0


def test_grid_in_kappa_metric():
    p = SpherePoint([1, 0.2, 0.1])
    f = ConvexFunctional.cosine_mean([p])
    best, _ = grid_argmin(f, ModelSpace(2, 4.0))
    assert angle(best, p) <= 2 * GridSpec().final_spacing

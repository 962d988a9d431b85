import math

import numpy as np
import pytest
from hypothesis import given, settings

from geoprox.functionals import (
    ConvexFunctional,
    FunctionalDomainError,
    certify_convexity,
    evaluate,
    geodesic_restriction,
    penalty,
    penalty_from_cos,
    penalty_to_point,
    random_functional,
)
from geoprox.geometry import Geodesic, GeometryError, ModelSpace, SpherePoint

from conftest import cap_points

E0, E1, E2 = np.eye(3)
S2 = ModelSpace(2)


def test_penalty_values():
    assert penalty(0.0) == 0.0
    assert penalty(math.pi / 3) == pytest.approx(math.sqrt(3) * math.sqrt(3) / 2)
    with pytest.raises(FunctionalDomainError):
        penalty(math.pi / 2)
    assert penalty_from_cos(0.5) == pytest.approx(1.5)
    assert penalty_from_cos(0.0) == math.inf


def test_penalty_near_zero_is_quadratic():
    # tan t sin t = t^2 + t^4 / 6 + O(t^6)
    for t in (1e-3, 1e-5, 1e-7):
        y = np.array([math.cos(t), math.sin(t), 0.0])
        v = float(penalty_to_point(y, E0)[0])
        assert v == pytest.approx(t * t + t ** 4 / 6, rel=1e-8)


def test_cosine_mean_hand_value():
    q = SpherePoint([0.5, math.sqrt(3) / 2, 0])
    f = ConvexFunctional.cosine_mean([E0, q], [1.0, 2.0])
    y = SpherePoint([math.cos(math.pi / 6), math.sin(math.pi / 6), 0])
    assert f(y) == pytest.approx(3 * (1 - math.cos(math.pi / 6)))
    assert f(E0) == pytest.approx(2 * 0.5)


def test_tan_sin_and_max_cosine_values():
    p = SpherePoint([math.cos(0.3), math.sin(0.3), 0])
    g = ConvexFunctional.tan_sin_sum([E0], [2.0])
    assert g(p) == pytest.approx(2 * math.tan(0.3) * math.sin(0.3), rel=1e-12)
    h = ConvexFunctional.max_cosine([E0, p], [1.0, 3.0])
    y = SpherePoint([math.cos(0.1), math.sin(0.1), 0])
    assert h(y) == pytest.approx(max(1 - math.cos(0.1), 3 * (1 - math.cos(0.2))), rel=1e-12)


def test_combination_and_constant():
    a = ConvexFunctional.cosine_mean([E0])
    b = ConvexFunctional.tan_sin_sum([SpherePoint([1, 0.2, 0])])
    c = ConvexFunctional.combination([a, b], [2.0, 0.5], offset=1.0)
    y = SpherePoint([1, 0.1, 0.1])
    assert c(y) == pytest.approx(1.0 + 2 * a(y) + 0.5 * b(y))
    k = ConvexFunctional.constant(4.0)
    assert k(y) == 4.0 and k.dim is None


@pytest.mark.parametrize("kwargs", [
    dict(kind="nope", anchors=(E0,), weights=(1.0,)),
    dict(kind="cosine_mean", anchors=(E0,), weights=(0.0,)),
    dict(kind="cosine_mean", anchors=(E0, E1), weights=(1.0, 1.0)),
    dict(kind="cosine_mean", anchors=(), weights=()),
    dict(kind="cosine_mean", anchors=(E0,), weights=(1.0, 2.0)),
])
def test_invalid_functionals(kwargs):
    with pytest.raises(ValueError):
        ConvexFunctional(**kwargs)


def test_domain_errors_report_anchor():
    f = ConvexFunctional.cosine_mean([SpherePoint([1, 0.1, 0]), E0])
    with pytest.raises(FunctionalDomainError) as exc:
        evaluate(f, E1 * -1)
    assert exc.value.anchor_index == 0
    with pytest.raises(GeometryError):
        evaluate(f, np.ones(4) / 2)


def test_config_round_trip():
    f = ConvexFunctional.tan_sin_sum([E0, SpherePoint([1, 0.3, 0])], [1.0, 2.0])
    g = ConvexFunctional.from_config(f.to_config())
    y = SpherePoint([1, 0.1, 0.05])
    assert g(y) == pytest.approx(f(y), rel=1e-15)
    with pytest.raises(ValueError):
        ConvexFunctional.from_config({"kind": "cosine_mean", "anchors": [[1, 0, 0]], "extra": 1})


def test_geodesic_restriction_samples():
    f = ConvexFunctional.cosine_mean([E0])
    g = Geodesic(SpherePoint(E0), SpherePoint([1, 1, 0]), S2)
    vals = geodesic_restriction(f, g, samples=5)
    assert [v for _, v in vals] == pytest.approx([1 - math.cos(t) for t, _ in vals])


@pytest.mark.parametrize("kind", ["cosine_mean", "tan_sin_sum", "max_cosine"])
def test_random_functionals_convex(kind):
    rng = np.random.default_rng(7)
    f = random_functional(rng, kind, 4, S2, spread=0.6)
    rep = certify_convexity(f, S2, trials=500, seed=1)
    assert rep.passed, rep


def test_certify_convexity_detects_concave():
    # 1 + cos d(., e0) is concave on the cap
    rep = certify_convexity(lambda p: 1 + float(np.asarray(p) @ E0), S2, trials=300,
                            center=SpherePoint(E0), radius=0.7)
    assert not rep.passed


@settings(max_examples=100)
@given(cap_points(dim=2, radius=0.35, count=3))
def test_vectorized_matches_scalar(pts):
    f = ConvexFunctional.tan_sin_sum(pts[:2], [1.0, 0.5])
    y = pts[2]
    ref = sum(w * math.tan(t) * math.sin(t) for w, t in
              zip((1.0, 0.5), (math.acos(np.clip(p.coords @ y.coords, -1, 1)) for p in pts[:2])))
    assert f(y) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_lipschitz_bound_holds():
    rng = np.random.default_rng(3)
    f = random_functional(rng, "tan_sin_sum", 3, S2, spread=0.4)
    center, radius = f.sampling_cap(S2)
    L = f.lipschitz_bound(0.4 + radius)
    from geoprox.geometry import angle, random_in_cap
    for _ in range(200):
        a, b = random_in_cap(rng, center, radius, S2, size=2)
        assert abs(f(a) - f(b)) <= L * angle(a, b) + 1e-12

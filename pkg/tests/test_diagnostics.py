import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoprox.diagnostics import (
    GFunction,
    argmax_cluster_diameter,
    asymptotic_center,
    g_concavity_check,
    g_evaluate,
    g_maximize,
    monotone_limit_check,
    spherical_boundedness,
)
from geoprox.geometry import GeometryError, ModelSpace, SpherePoint, angle, midpoint
from geoprox.oracle import cap_grid

S2 = ModelSpace(2)
E0, E1, E2 = np.eye(3)
A = SpherePoint(E0)
B = SpherePoint([math.cos(1.0), math.sin(1.0), 0.0])


def test_gfunction_validation():
    with pytest.raises(ValueError):
        GFunction([], [])
    with pytest.raises(ValueError):
        GFunction([A, B], [1.0])
    with pytest.raises(ValueError):
        GFunction([A, B], [1.0, 0.0])
    with pytest.raises(ValueError):
        GFunction([A, B], [1.0, 1.0], window=3)


def test_g_constant_sequences():
    y = SpherePoint([0.3, 0.1, 0.9])
    assert g_evaluate(GFunction([y] * 12, np.ones(12)), y, S2) == pytest.approx(1.0)
    z = SpherePoint([math.cos(math.pi / 3), math.sin(math.pi / 3), 0])
    assert g_evaluate(GFunction([z] * 12, np.ones(12)), A, S2) == pytest.approx(0.5)
    with pytest.raises(GeometryError):
        g_evaluate(GFunction([z] * 12, np.ones(12)), np.eye(4)[0])


def test_g_is_min_over_tail_of_weighted_averages():
    # brute-force reference on a short random sequence
    rng = np.random.default_rng(0)
    Z = [SpherePoint(E2 + 0.3 * rng.standard_normal(3)) for _ in range(20)]
    b = rng.uniform(0.5, 2, 20)
    gf = GFunction(Z, b, window=5)
    y = SpherePoint([0.1, 0.0, 1.0])
    avgs = [sum(b[k] * math.cos(angle(y, Z[k])) for k in range(n)) / sum(b[:n]) for n in range(1, 21)]
    assert gf(y) == pytest.approx(min(avgs[-5:]), rel=1e-12)


def test_g_at_limit_beats_start(three_anchor_trace):
    gf = GFunction.from_trace(three_anchor_trace)
    assert gf(three_anchor_trace.final) >= gf(three_anchor_trace.iterates[0])
    assert 0.0 <= gf(three_anchor_trace.iterates[0]) <= 1.0


def test_proof_weights(three_anchor_trace):
    tr = three_anchor_trace
    gf = GFunction.from_trace(tr, "proof")
    c = tr.c_values[0]
    assert gf.betas[0] == pytest.approx(tr.lambdas[0] * c * c / (1 + c * c))
    assert np.all(GFunction.from_trace(tr, "uniform").betas == 1.0)
    with pytest.raises(ValueError):
        GFunction.from_trace(tr, "other")


def test_g_maximize_constant_and_pair():
    z = SpherePoint([0.2, -0.1, 1.0])
    assert angle(g_maximize(GFunction([z] * 10, np.ones(10)), S2, 0.02), z) <= 0.02
    gf = GFunction([A, B] * 20, np.ones(40))
    m = g_maximize(gf, S2, 0.01)
    # brute force on a fine grid around the geodesic midpoint region
    P = cap_grid(midpoint(A, B), 0.6, 0.002)
    best = P[int(np.argmax(gf.values(P)))]
    assert angle(m, best) <= 0.01
    assert angle(m, midpoint(A, B)) <= 0.01


def test_g_maximize_dimension_handling():
    z = SpherePoint(np.eye(5)[0] + 0.1)
    gf = GFunction([z] * 10, np.ones(10))
    with pytest.raises(GeometryError):
        g_maximize(gf, ModelSpace(4))
    assert angle(g_maximize(gf, ModelSpace(4), 0.05, multistart=True), z) < 1e-6
    with pytest.raises(ValueError):
        g_maximize(gf, ModelSpace(4), 0.1)


def test_concavity_and_lipschitz(three_anchor_trace):
    gf = GFunction.from_trace(three_anchor_trace)
    rep = g_concavity_check(gf, S2, trials=2000, seed=1)
    assert rep.passed, rep
    # y1 = y2 gives equality in both checks
    rep0 = g_concavity_check(gf, S2, trials=50, seed=2, radius=0.0)
    assert abs(rep0.worst_concavity_slack) < 1e-12 and abs(rep0.worst_lipschitz_slack) < 1e-12
    with pytest.raises(ValueError):
        g_concavity_check(gf, S2, trials=0)


def test_nonexpansive_near_admissible_extremes():
    gf = GFunction([A, B] * 20, np.ones(40))
    rep = g_concavity_check(gf, S2, trials=2000, seed=3, radius=math.pi / 2 - 0.5 - 1e-3)
    assert rep.passed


def test_cluster_diameter_singleton(three_anchor_trace):
    gf = GFunction.from_trace(three_anchor_trace)
    assert argmax_cluster_diameter(gf, S2, 0.01) <= 0.02


def test_asymptotic_center_cases(three_anchor, three_anchor_trace):
    seq = [SpherePoint(E2 + np.array([0.5 ** k, 0, 0])) for k in range(40)]
    ac = asymptotic_center(seq, S2)
    assert angle(ac.center, E2) < 1e-4 and ac.radius < 1e-4
    ac = asymptotic_center([A, B] * 20, S2)
    assert angle(ac.center, midpoint(A, B)) <= 0.01
    assert ac.radius == pytest.approx(0.5, abs=1e-6)
    _, u = three_anchor
    ac = asymptotic_center(three_anchor_trace.iterates, S2)
    assert angle(ac.center, u) <= 0.02 and ac.spherically_bounded
    with pytest.raises(ValueError):
        asymptotic_center([A], S2)
    with pytest.raises(GeometryError):
        asymptotic_center([np.eye(4)[0]] * 3, ModelSpace(3))


def test_asymptotic_center_kappa_radius():
    ac = asymptotic_center([A, B] * 20, ModelSpace(2, 4.0))
    assert ac.radius == pytest.approx(0.25, abs=1e-6)
    assert spherical_boundedness([A, B] * 20, S2) == pytest.approx(0.5, abs=1e-6)


def test_multistart_center_higher_dim():
    a, b = np.eye(4)[0], np.r_[math.cos(0.6), math.sin(0.6), 0, 0]
    ac = asymptotic_center([a, b] * 10, ModelSpace(3), multistart=True)
    assert not ac.certified
    assert ac.radius == pytest.approx(0.3, abs=1e-6)


def test_monotone_limit_two_point():
    t = [0.5 + (-1) ** n * 0.1 for n in range(1, 101)]
    rep = monotone_limit_check(t, "nonincreasing")
    assert rep.lhs == pytest.approx(math.cos(0.6)) and rep.passed
    assert monotone_limit_check([0.3] * 20, "nondecreasing").discrepancy == 0.0
    with pytest.raises(ValueError):
        monotone_limit_check([], "nonincreasing")
    with pytest.raises(ValueError):
        monotone_limit_check([1.0], "sideways")


@settings(max_examples=50)
@given(st.lists(st.floats(0, math.pi / 2), min_size=1, max_size=60), st.booleans())
def test_monotone_limit_random(values, decreasing):
    assert monotone_limit_check(values, "nonincreasing" if decreasing else "nondecreasing").passed

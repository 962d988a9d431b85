import math

import numpy as np
import pytest

from geoprox.functionals import ConvexFunctional, FunctionalDomainError
from geoprox.geometry import ModelSpace, SpherePoint, angle
from geoprox.ppa import (
    PpaError,
    RunConfig,
    StepSchedule,
    bound_constants,
    check_fejer,
    check_iterated_bound,
    check_monotone,
    check_rate_bound,
    existence_certificate,
    iter_rows,
    iterated_resolvent_run,
    rate_bound,
    run_ppa,
    synthetic_trace,
)
from geoprox.resolvent import InnerSolverConfig, resolve

S2 = ModelSpace(2)
E0, E1, E2 = np.eye(3)


def test_schedules():
    assert StepSchedule("constant", 2.0).take(3) == [2.0, 2.0, 2.0]
    assert StepSchedule("harmonic", 1.0).take(3) == pytest.approx([1, 1 / 2, 1 / 3])
    assert StepSchedule("power", 0.5).take(4) == pytest.approx([1, 1 / math.sqrt(2), 1 / math.sqrt(3), 0.5])
    s = StepSchedule("explicit_list", values=(1.0, 0.5), divergent=True)
    assert s.take(4) == [1.0, 0.5, 0.5, 0.5]


@pytest.mark.parametrize("kwargs", [
    dict(kind="geometric"),
    dict(kind="constant", value=0.0),
    dict(kind="power", value=1.5),
    dict(kind="explicit_list", values=(1.0,)),
    dict(kind="explicit_list", values=(1.0, -1.0), divergent=True),
])
def test_schedule_validation(kwargs):
    with pytest.raises(ValueError):
        StepSchedule(**kwargs)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(0)
    with pytest.raises(ValueError):
        RunConfig(5, stop_step_tol=0.0)
    with pytest.raises(ValueError):
        RunConfig(5, stop_gap_tol=1e-3)


def test_fixed_point_run(three_anchor):
    p = SpherePoint([0.2, 0.3, 0.9])
    f = ConvexFunctional.cosine_mean([p])
    tr = run_ppa(f, p, StepSchedule(), S2, RunConfig(10, reference_minimizer=p))
    assert all(d == 0.0 for d in tr.step_distances)
    assert all(b == 0.0 for b in tr.rate_bounds)
    assert rate_bound(tr, p, 5) == 0.0


def test_stationary_constants():
    K, C = bound_constants(0.0)
    assert K == 2.0 and C == pytest.approx(math.pi)
    K4, _ = bound_constants(0.5, ModelSpace(2, 4.0))
    assert K4 == pytest.approx(1 / math.cos(1.0) ** 2 + 1)


def test_three_anchor_run_certificates(three_anchor, three_anchor_trace):
    f, u = three_anchor
    tr = three_anchor_trace
    assert len(tr) == 200 and tr.stop_reason == "max_iterations"
    assert angle(tr.final, u) < 1e-4
    assert check_monotone(tr).satisfied
    assert check_fejer(tr).satisfied
    assert check_rate_bound(tr).satisfied
    assert check_iterated_bound(tr).satisfied
    assert all(d < math.pi / 2 for d in tr.step_distances)
    # rate_bound agrees with the stored per-step bounds
    for n in (1, 10, 200):
        assert rate_bound(tr, u, n) == pytest.approx(tr.rate_bounds[n - 1])


def test_rate_bound_errors(three_anchor_trace):
    with pytest.raises(ValueError):
        rate_bound(three_anchor_trace, E0, 0)
    with pytest.raises(ValueError):
        rate_bound(synthetic_trace([E0], S2), E0, 1)


def test_iterated_run_single_step(three_anchor, three_anchor_start):
    f, u = three_anchor
    tr = iterated_resolvent_run(f, three_anchor_start, 1, S2)
    r = resolve(f, 1.0, three_anchor_start, S2)
    assert tr.final.allclose(r.point, atol=0.0)


def test_iterated_bound_halves(three_anchor, three_anchor_trace):
    f, u = three_anchor
    tr = three_anchor_trace
    for n in (10, 50, 100):
        assert rate_bound(tr, u, 2 * n) <= 0.5 * rate_bound(tr, u, n) + 1e-15
        assert n * tr.gaps()[n - 1] <= rate_bound(tr, u, 1) + 1e-8


def test_stop_rules(three_anchor, three_anchor_start):
    f, u = three_anchor
    tr = run_ppa(f, three_anchor_start, StepSchedule(), S2, RunConfig(500, stop_step_tol=1e-6))
    assert tr.stop_reason == "step_tol" and tr.step_distances[-1] < 1e-6 < tr.step_distances[-2]
    tr = run_ppa(f, three_anchor_start, StepSchedule(), S2,
                 RunConfig(500, stop_gap_tol=1e-6, reference_minimizer=u))
    assert tr.stop_reason == "gap_tol" and tr.gaps()[-1] < 1e-6 <= tr.gaps()[-2]


def test_solver_failure_carries_partial_trace(three_anchor, three_anchor_start):
    f, _ = three_anchor
    with pytest.raises(PpaError) as exc:
        run_ppa(f, three_anchor_start, StepSchedule(), S2, RunConfig(5), InnerSolverConfig(max_iter=1))
    assert exc.value.step == 1
    assert len(exc.value.trace.iterates) == 1
    assert exc.value.trace.stop_reason == "solver_failure"


def test_inadmissible_start():
    f = ConvexFunctional.cosine_mean([E0])
    with pytest.raises(FunctionalDomainError):
        run_ppa(f, -E0, StepSchedule(), S2)


def test_schedule_invariance_of_limit(three_anchor, three_anchor_start, three_anchor_trace):
    f, u = three_anchor
    tr = run_ppa(f, three_anchor_start, StepSchedule("power", 0.5), S2, RunConfig(200))
    assert angle(tr.final, three_anchor_trace.final) < 2e-4
    assert angle(tr.final, u) < 2e-4


def test_limit_is_fixed_point(three_anchor, three_anchor_start):
    f, _ = three_anchor
    tol = 1e-9
    tr = run_ppa(f, three_anchor_start, StepSchedule(), S2, RunConfig(500, stop_step_tol=tol))
    r = resolve(f, 1.0, tr.final, S2)
    assert angle(r.point, tr.final) < 10 * tol


def test_existence_certificates(three_anchor_trace):
    p = SpherePoint([0.1, 0.2, 1.0])
    rep = existence_certificate(synthetic_trace([p] * 10, S2))
    assert rep.spherically_bounded_estimate == 0.0 and rep.verdict
    assert existence_certificate(three_anchor_trace).verdict
    hop = synthetic_trace([E0, E1] * 20, S2)
    rep = existence_certificate(hop)
    assert rep.sup_step == pytest.approx(math.pi / 2) and not rep.verdict
    with pytest.raises(ValueError):
        existence_certificate(synthetic_trace([E0], S2))


def test_existence_certificate_kappa_normalized():
    # kappa = 4 steps of pi/4 are pi/2 in the normalized metric
    hop = synthetic_trace([E0, E1] * 20, ModelSpace(2, 4.0))
    rep = existence_certificate(hop)
    assert rep.sup_step == pytest.approx(math.pi / 4) and not rep.verdict


def test_iter_rows_layout(three_anchor_trace):
    rows = list(iter_rows(three_anchor_trace))
    assert len(rows) == 201
    assert rows[0]["n"] == 0 and rows[0]["lambda"] is None
    assert rows[5]["step_distance"] == three_anchor_trace.step_distances[4]
    assert rows[5]["fejer_ok"] is True

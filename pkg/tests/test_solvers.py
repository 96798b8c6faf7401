import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from proxcert.problems import distance_map, make_fixture, make_lasso_instance, orthant_linear_map
from proxcert.setvalued import (
    L1Norm,
    SaddleProblem,
    SetValue,
    SetValuedMap,
    SolutionSet,
    SquaredDistance,
    Zero,
    subdifferential_map,
)
from proxcert.solvers import (
    TRACE_HEADER,
    ForwardBackwardMethod,
    PDHGMMethod,
    ProxPointMethod,
    StepSchedule,
    advance_schedule,
    default_pdhgm_schedule,
    fit_rate,
    forward_backward_step,
    pdhgm_step,
    prox_point_step,
    run_with_monitor,
    step_condition_slacks,
)


# -- single steps ------------------------------------------------------------------

def test_pdhgm_step_scalar_closed_form():
    # G = x^2/2, F* = y^2/2, K = [1], tau = sigma = 1/2, omega = 1 from (1, 1)
    P = SaddleProblem(SquaredDistance([0.0]), SquaredDistance([0.0]), np.array([[1.0]]))
    x, y = pdhgm_step(P, 0.5, 0.5, 1.0, [1.0], [1.0])
    assert x[0] == pytest.approx(1 / 3, abs=1e-15)
    x_bar = 2 * x[0] - 1.0
    assert x_bar == pytest.approx(-1 / 3, abs=1e-15)
    assert y[0] == pytest.approx(5 / 9, abs=1e-15)


def test_pdhgm_step_is_the_implicit_step():
    """0 in W H(u+) + M (u+ - u) with the preconditioner of the method."""
    inst = make_lasso_instance(4, 3, 1.0, seed=2)
    P = inst.problem()
    s = default_pdhgm_schedule(P, "accelerated", gamma=1.0, gamma_tilde=0.5)
    meth = PDHGMMethod(P, s)
    u = np.random.default_rng(0).standard_normal(7)
    for i in (0, 3):
        u_next = meth.step(i, u)
        ops = meth.operators(i)
        target = -ops["M"] @ (u_next - u)
        S = meth.H(u_next)
        Wd = np.diag(ops["W"])
        scaled = SetValue(Wd * S.offset, Wd * S.lo, Wd * S.hi)
        assert scaled.contains(target, tol=1e-10)


def test_prox_point_step_on_distance_map():
    T = distance_map(np.array([[-1.0], [1.0]]))
    u = prox_point_step(T, 0.5, [0.5])
    assert u[0] == pytest.approx((0.5 + 0.5) / 1.5)
    with pytest.raises(NotImplementedError):
        prox_point_step(SetValuedMap(1, lambda u: SetValue(u)), 1.0, [0.0])
    with pytest.raises(ValueError):
        prox_point_step(T, 0.0, [0.5])


def test_orthant_bilinear_resolvent():
    T = orthant_linear_map([[0.0, 1.0], [1.0, 0.0]], "b")
    v = T.resolvent(0.5, np.array([0.5, 0.5]))
    assert np.allclose(v, [1 / 3, 1 / 3])
    a, b = 0.7, 0.6
    assert np.allclose(T.resolvent(0.5, np.array([a, b])), [(4 * a - 2 * b) / 3, (4 * b - 2 * a) / 3])


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 2.0))
def test_orthant_resolvents_satisfy_inclusion(a, b, tau):
    for A in ([[0.0, 1.0], [1.0, 0.0]], [[1.0, 1.0], [1.0, 0.0]]):
        T = orthant_linear_map(A, "t")
        u = np.array([a, b])
        v = T.resolvent(tau, u)
        assert T(v).contains((u - v) / tau, tol=1e-8)


def test_forward_backward_step():
    H0 = subdifferential_map(L1Norm(1, 1.0))
    u = forward_backward_step(H0, lambda u: 2.0 * u, 0.25, [2.0])
    # gradient step 2 - 0.25 * 4 = 1, then soft threshold by 0.25
    assert u[0] == pytest.approx(0.75)


def test_forward_backward_warns_on_large_steps():
    H0 = subdifferential_map(Zero(1))
    with pytest.warns(RuntimeWarning):
        m = ForwardBackwardMethod(H0, lambda u: 3.0 * u, 3.0, 1.0)
    assert m.warnings


# -- schedules ---------------------------------------------------------------------

def test_schedule_validation():
    with pytest.raises(ValueError, match="unknown schedule 'warp'"):
        StepSchedule("warp", 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        StepSchedule("constant", 1.0, 3.0, 1.0)
    with pytest.raises(ValueError):
        StepSchedule("accelerated", 0.5, 0.5, 1.0, gamma_tilde=2.0, gamma=1.0)
    with pytest.raises(ValueError):
        StepSchedule("linear", 0.5, 0.5, 1.0, gamma=1.0, rho=0.0)
    StepSchedule("constant", 1.0, 2.0, 1.0)  # (1 - delta) tau sigma |K|^2 = 1


def test_linear_schedule_is_geometric():
    s = StepSchedule("linear", 0.3, 0.2, 2.0, gamma=1.0, rho=2.0, phi0=1.7)
    assert s.theta == 1.0 + min(2.0 * 0.2, 1.0 * 0.3)
    for N in range(0, 600, 7):
        assert s.phi(N) / (s.theta ** N * s.phi0) == 1.0
    tau, sigma, phi, psi, omega = advance_schedule(s, 5)
    assert omega == pytest.approx(1.0 / s.theta)


def test_accelerated_schedule_relations():
    s = StepSchedule("accelerated", 0.5, 0.5, 1.0, gamma_tilde=0.5, gamma=1.0)
    assert s.phi(0) == pytest.approx(4.0)
    for i in range(50):
        assert s.tau(i) == pytest.approx(s.phi(i) ** -0.5)
        assert s.phi(i + 1) == pytest.approx(s.phi(i) * (1 + 0.5 * s.tau(i)))
        assert s.tau(i) * s.sigma(i) == pytest.approx(0.25)
        _, _, _, _, omega = advance_schedule(s, i)
        assert omega == pytest.approx(s.tau(i + 1) / s.tau(i))
        sl = step_condition_slacks(s, i)
        assert sl["phi_growth"] >= -1e-12 and abs(sl["coupling"]) <= 1e-12 and sl["psi_ratio"] >= -1e-12


def test_constant_schedule_slacks():
    s = StepSchedule("constant", 0.5, 0.5, 2.0)
    _, _, _, _, omega = advance_schedule(s, 0)
    assert omega == 1.0
    assert step_condition_slacks(s, 3)["psi_ratio"] >= 0.0


def test_default_schedule_uses_step_scale():
    P = make_lasso_instance(5, 4, 1.0, seed=1).problem()
    s = default_pdhgm_schedule(P, "constant", step_scale=0.9)
    assert s.tau0 * s.sigma0 * s.K_norm ** 2 == pytest.approx(0.9)
    s = default_pdhgm_schedule(P, "constant", tau0=0.1)
    assert s.tau0 * s.sigma0 * s.K_norm ** 2 == pytest.approx(0.99)


# -- monitor -------------------------------------------------------------------------

def test_prox_point_rate_and_monitor():
    fx = make_fixture("dist_pm1")
    meth = ProxPointMethod(fx.map, 0.5, xi=1.0)
    tr = run_with_monitor(meth, fx.solution_set, [1.04], max_iter=40)
    d = tr.column("dist2_euclid_primal")
    for N in range(len(d)):
        assert d[N] <= 2.0 ** -N * d[0] * (1 + 1e-6)
    assert np.nanmin(tr.column("ci_residual")) >= -1e-12
    assert np.min(tr.column("di_slack")) >= -1e-12


def test_ci_residuals_telescope_into_di_slack():
    inst = make_lasso_instance(5, 4, 1.0, seed=4)
    P = inst.problem()
    s = default_pdhgm_schedule(P, "linear", gamma=0.05, rho=1.0, tau0=0.05, sigma0=0.05)
    sol = SolutionSet.singleton(inst.solution())
    u0 = inst.solution() + np.random.default_rng(1).uniform(-1, 1, 9)
    tr = run_with_monitor(PDHGMMethod(P, s), sol, u0, max_iter=60, stop_tol=0.0)
    ci = tr.column("ci_residual")[:-1]
    di = tr.column("di_slack")
    # sum of the first N step residuals equals the descent slack after N steps
    assert np.allclose(np.cumsum(ci), di[1:], atol=1e-10 * (1 + abs(di).max()))


def test_trace_csv_format():
    fx = make_fixture("dist_pm1")
    tr = run_with_monitor(ProxPointMethod(fx.map, 0.5), fx.solution_set, [1.0], max_iter=5)
    text = tr.to_csv()
    lines = text.splitlines()
    assert lines[0] == ",".join(TRACE_HEADER)
    assert len(lines) == 2  # the start point is already a solution
    assert lines[1].startswith("0,0.5,nan,1,")


def test_divergence_is_detected():
    grow = SetValuedMap(1, lambda u: SetValue(-u), resolvent=lambda tau, u: u / (1 - tau), name="grow")
    tr = run_with_monitor(ProxPointMethod(grow, 0.5), SolutionSet.singleton([0.0]), [1.0], max_iter=100)
    assert tr.diverged


def test_wrong_initial_dimension():
    fx = make_fixture("dist_pm1")
    with pytest.raises(ValueError):
        run_with_monitor(ProxPointMethod(fx.map, 0.5), fx.solution_set, [1.0, 2.0])


# -- rate fitting ----------------------------------------------------------------------

def test_fit_rate_linear_polynomial_finite():
    k = np.arange(1, 400, dtype=float)
    lin = fit_rate(0.9 ** k, iters=k)
    assert lin.kind == "linear" and lin.rate == pytest.approx(0.9) and lin.r2 > 0.999999
    pol = fit_rate(k ** -2.0, iters=k)
    assert pol.kind == "polynomial" and pol.rate == pytest.approx(-2.0)
    fin = fit_rate(np.array([1.0, 0.5, 0.0, 0.0]))
    assert fin.kind == "finite" and fin.finite_at == 2
    assert fin.summary().startswith("rate_kind=finite")
    assert lin.summary().startswith("rate_kind=linear rate=0.9")
    with pytest.raises(ValueError):
        fit_rate(np.array([1.0, 1e-40, 1e-41]), floor=1e-30)


def test_fit_rate_ignores_floor():
    v = np.concatenate([0.5 ** np.arange(60.0), np.full(100, 1e-30)])
    fit = fit_rate(v, window=50, floor=1e-25)
    assert fit.kind == "linear" and fit.rate == pytest.approx(0.5)

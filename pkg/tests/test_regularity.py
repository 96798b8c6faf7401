import numpy as np
import pytest

from proxcert.linalg import NotPSDError
from proxcert.problems import FIXTURE_IDS, make_fixture, make_lasso_instance
from proxcert.regularity import (
    NeighborhoodSpec,
    RegularityQuery,
    check_projection_condition,
    check_psm,
    check_psr,
    conversion_cross_check,
    gap_function_check,
    marginal_psm_check,
    psm_query,
    psr_query,
    recompute_margin,
    revalidate,
    run_query,
)
from proxcert.setvalued import BoxPiece, L1Norm, SolutionSet, subdifferential_map

MAP_FIXTURES = [f for f in FIXTURE_IDS if f not in ("lasso", "tv1d")]
ROWS = [(fid, k) for fid in MAP_FIXTURES for k in range(len(make_fixture(fid).expectations))]


@pytest.mark.parametrize("fid,row", ROWS)
def test_verdict_table(fid, row):
    fx = make_fixture(fid)
    e = fx.expectations[row]
    rep = run_query(fx.query(e))
    assert rep.verdict == e.expected, f"{fid}:{e.name} worst={rep.worst_margin}"
    if rep.verdict == "fail":
        # every reported counterexample re-evaluates to the same margin
        q = fx.query(e)
        for u, w, m in rep.counterexamples:
            if np.isfinite(m):
                assert recompute_margin(q, u, w) == pytest.approx(m, abs=1e-12)


def test_dyadic_counterexample_at_tie_midpoint():
    fx = make_fixture("dist_dyadic", L=12)
    rep = run_query(fx.query(fx.expectations[1]), top_k=50)
    mids = {1.5 * 2.0 ** -k for k in range(1, 13)}
    assert any(float(u[0]) in mids for u, _, _ in rep.counterexamples)


def test_cone_psr_counterexample_on_boundary_curve():
    fx = make_fixture("cone_gamma")
    q = fx.query(fx.expectations[1])
    rep = run_query(q, top_k=1000)
    on_curve = [m for u, _, m in rep.counterexamples if abs(u[1] ** 2 - 0.75 * u[0] ** 2) <= 1e-12]
    assert on_curve
    # on the curve the margin is -gamma (1 - gamma) u1^2
    u = np.array([0.5, np.sqrt(0.75) * 0.5])
    assert recompute_margin(q, u, np.array([0.25, 0.0])) == pytest.approx(-0.25 * 0.25, abs=1e-12)


def test_orthant_partial_margin_closed_form():
    # margin (2 tau - tau^2 - gamma) u1^2 + 2 tau u1 u2 in the interior of the orthant
    fx = make_fixture("orthant_partial", tau=0.5)
    q = fx.query(fx.expectations[0])
    for u in ([0.3, 0.2], [0.1, 0.9], [0.5, 0.0]):
        u = np.array(u)
        w = np.array([u[0] + u[1], u[0]])
        assert recompute_margin(q, u, w) == pytest.approx(0.25 * u[0] ** 2 + u[0] * u[1], abs=1e-14)


def test_empty_values_are_skipped():
    fx = make_fixture("orthant_swap")
    nb = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=5, random_samples=0)
    q = psm_query(fx.map, [0, 0], [0, 0], 0.0, 1.0, 1.0, fx.solution_set, nb)
    rep = check_psm(q)
    assert rep.skipped > 0 and rep.samples_evaluated + rep.skipped == len(nb.samples(fx.solution_set))


def test_query_validation():
    fx = make_fixture("dist_pm1")
    with pytest.raises(ValueError):
        RegularityQuery(fx.map, [1.0], [0.5], (0.9, 1.0, 1.0), fx.solution_set, fx.neighborhood)
    with pytest.raises(NotPSDError):
        RegularityQuery(fx.map, [1.0], [0.0], (0.9, 1.0, -1.0), fx.solution_set, fx.neighborhood)
    with pytest.raises(ValueError):
        RegularityQuery(fx.map, [1.0], [0.0], (0.9, 1.0, 1.0), fx.solution_set, fx.neighborhood, kind="xyz")
    q = psr_query(fx.map, [1.0], [0.0], 2.0, 1.0, 1.0, fx.solution_set, fx.neighborhood)
    with pytest.raises(NotPSDError):
        check_psr(q)


def test_report_text_format_and_worker_determinism():
    fx = make_fixture("dist_pm1")
    q = fx.query(fx.expectations[1])
    a = run_query(q, workers=1).to_text()
    b = run_query(q, workers=4).to_text()
    assert a == b
    head, first = a.splitlines()[:2]
    assert head.startswith("# psm ") and "verdict=fail" in head and "samples=241" in head
    assert first.startswith("u=[") and " margin=" in first
    ok = run_query(fx.query(fx.expectations[0])).to_text()
    assert len(ok.splitlines()) == 1


@pytest.mark.parametrize("fid,row", [("dist_pm1", 0), ("dist_pm1", 1), ("cone_gamma", 0), ("cone_gamma", 1),
                                     ("orthant_swap", 0), ("orthant_swap", 2), ("subspace_mu", 0),
                                     ("orthant_bilinear", 2), ("abs_value", 0), ("ball_indicator", 1)])
def test_slow_path_agrees(fid, row):
    fx = make_fixture(fid)
    e = fx.expectations[row]
    q = fx.query(e)
    # solution sets with box pieces use a one-dimensional search per point, so sample fewer
    slow = revalidate(q, n_points=300 if not q.solution_set.boxes else 40)
    fast = run_query(q, points=None)
    if slow.verdict == "fail":
        assert fast.verdict == "fail"
    if fast.verdict == "pass":
        assert slow.verdict == "pass"


def test_projection_condition():
    rays = SolutionSet(boxes=[BoxPiece([0.0, 0.0], [0.0, np.inf])])
    nb = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=9, random_samples=50)
    assert check_projection_condition(rays, [0, 0], np.eye(2), np.diag([1.0, 3.0]), nb).passed
    skew = np.array([[1.0, 0.9], [0.9, 1.0]])
    assert not check_projection_condition(rays, [0, 0], np.eye(2), skew, nb).passed
    single = SolutionSet.singleton([0.0, 0.0])
    assert check_projection_condition(single, [0, 0], np.eye(2), skew, nb).passed


def test_gap_function_check_on_absolute_value():
    T = subdifferential_map(L1Norm(1, 1.0))
    sol = SolutionSet.singleton([0.0])
    nb = NeighborhoodSpec([0.0], 2.0, grid_points_per_axis=41, random_samples=20)
    gap = lambda u, us: abs(u[0]) - abs(us[0])
    assert gap_function_check(T, 1.0, 0.0, gap, ([0.0], [0.0]), nb, sol).passed
    assert not gap_function_check(T, 1.0, 0.1, gap, ([0.0], [0.0]), nb, sol).passed
    bad = lambda u, us: abs(u[0]) + 1.0
    assert not gap_function_check(T, 1.0, 0.0, bad, ([0.0], [0.0]), nb, sol).passed


def test_marginal_check_on_lasso():
    inst = make_lasso_instance(6, 4, 1.0, seed=3)
    P = inst.problem()
    sol = SolutionSet.singleton(inst.solution())
    nb = NeighborhoodSpec(inst.solution(), 1.0, grid_points_per_axis=3, random_samples=200, seed=1)
    # |x_k| <= 2 (alpha - |q*_k|) / gamma holds on the unit box for gamma = 0.05
    assert marginal_psm_check(P, sol, 0.05, 1.0, nb).passed
    assert not marginal_psm_check(P, sol, 2.0, 1.0, nb).passed
    assert not marginal_psm_check(P, sol, 0.05, 2.5, nb).passed
    wrong = SolutionSet.singleton(inst.solution() + 0.1)
    with pytest.raises(ValueError):
        marginal_psm_check(P, wrong, 0.05, 1.0, nb)


def test_conversion_cross_check_no_contradiction():
    fx = make_fixture("abs_value")
    q = fx.query(fx.expectations[0])
    psm, psr = conversion_cross_check(q, 1.0)
    assert psm.passed and psr is not None and psr.passed
    fx = make_fixture("dist_pm1")
    psm, psr = conversion_cross_check(fx.query(fx.expectations[0]), 1.0)
    assert not psm.passed and psr is None
    with pytest.raises(ValueError):
        conversion_cross_check(q, 0.0)


def test_neighborhood_samples_deterministic_and_admissible():
    nb = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=5, random_samples=30, seed=4,
                          domain_restriction="open positive orthant plus origin")
    a, b = nb.samples(), nb.samples()
    assert np.array_equal(a, b)
    assert all((np.all(p > 0) or np.all(p == 0)) for p in a)
    assert np.array_equal(a[0], [0.0, 0.0])
    with pytest.raises(ValueError):
        NeighborhoodSpec([0.0], -1.0)
    with pytest.raises(ValueError):
        NeighborhoodSpec([0.0], 1.0, domain_restriction="half plane")


def test_large_dimension_grid_falls_back_to_lines():
    nb = NeighborhoodSpec(np.zeros(10), 1.0, grid_points_per_axis=9, random_samples=0, include_special=False)
    pts = nb.samples()
    assert len(pts) < 9 ** 4 and np.max(np.abs(pts)) == 1.0

"""Catalogue of test maps, saddle problems and instance generators.

Each fixture bundles a set-valued map (or saddle problem), its solution set,
a default neighbourhood and a table of expected certifier verdicts. The
verdict table is the regression matrix for the certifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .regularity import NeighborhoodSpec, RegularityQuery
from .setvalued import (
    BallIndicator,
    BoxIndicator,
    BoxPiece,
    DistanceMapSurrogate,
    L1Norm,
    SaddleProblem,
    SetValue,
    SetValuedMap,
    SolutionSet,
    SquaredDistance,
    optimality_residual,
    subdifferential_map,
)

FIXTURE_IDS = ("dist_pm1", "dist_dyadic", "subspace_mu", "cone_gamma", "orthant_swap",
               "orthant_bilinear", "orthant_partial", "ball_indicator", "abs_value", "lasso", "tv1d")


@dataclass
class Expectation:
    """One row of a verdict table: a query and the verdict it must produce."""

    name: str
    kind: str
    triple: tuple
    expected: str
    base_u: np.ndarray | None = None
    base_w: np.ndarray | None = None
    neighborhood: NeighborhoodSpec | None = None
    solution_set: SolutionSet | None = None
    source: str = ""


@dataclass
class Fixture:
    id: str
    map: object
    solution_set: SolutionSet
    neighborhood: NeighborhoodSpec
    base_u: np.ndarray
    base_w: np.ndarray
    expectations: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    notes: str = ""

    def query(self, e: Expectation, slack: float = 1e-9) -> RegularityQuery:
        return RegularityQuery(
            self.map,
            self.base_u if e.base_u is None else e.base_u,
            self.base_w if e.base_w is None else e.base_w,
            e.triple,
            self.solution_set if e.solution_set is None else e.solution_set,
            self.neighborhood if e.neighborhood is None else e.neighborhood,
            e.kind, slack, f"{self.id}:{e.name}",
        )


def _diag(*v):
    return np.diag(np.asarray(v, dtype=float))


# -- distance maps ---------------------------------------------------------------

def distance_map(C) -> SetValuedMap:
    """``T_C(u) = u - P_C(u)`` with ties, and its resolvent.

    The resolvent solves ``v + tau (v - c) = u`` for each ``c in C`` and keeps
    the candidates with ``c in P_C(v)``; the one nearest ``u`` is returned.
    """
    f = DistanceMapSurrogate(C)

    def resolvent(tau, u):
        best = None
        for c in f.C:
            v = (u + tau * c) / (1.0 + tau)
            if any(np.array_equal(c, p) for p in f.projections(v)):
                if best is None or np.linalg.norm(v - u) < np.linalg.norm(best - u):
                    best = v
        if best is None:
            raise RuntimeError("no consistent resolvent candidate")
        return best

    return SetValuedMap(f.n, f.subdiff, resolvent, name="T_C")


def _fixture_dist_pm1(radius: float = 0.05) -> Fixture:
    C = np.array([[-1.0], [1.0]])
    T = distance_map(C)
    nb = NeighborhoodSpec([1.0], radius, grid_points_per_axis=41, random_samples=200, seed=1)
    ex = [
        Expectation("psm gamma=0.9", "psm", (0.9, 1.0, 1.0), "pass", source="published"),
        Expectation("psm gamma=1.0", "psm", (1.0, 1.0, 1.0), "fail", source="published"),
        Expectation("strong Xi=M", "psm", (1.0, 1.0, 1.0), "fail", source="published"),
        Expectation("psr gamma=1", "psr", (1.0, 1.0, 1.0), "pass", source="published"),
    ]
    return Fixture("dist_pm1", T, SolutionSet.finite(C), nb, np.array([1.0]), np.array([0.0]), ex,
                   {"radius": radius})


def _fixture_dist_dyadic(L: int = 20, radius: float = 0.1) -> Fixture:
    if not 0 <= L <= 40:
        raise ValueError("L must lie in [0, 40]")
    pts = np.array([0.0] + [2.0 ** -k for k in range(L + 1)])[:, None]
    T = distance_map(pts)
    mids = [[1.5 * 2.0 ** -k] for k in range(1, L + 1)]
    nb = NeighborhoodSpec([0.0], radius, grid_points_per_axis=41, random_samples=200, seed=2,
                          special_points=mids)
    ex = [Expectation(f"psm gamma={g:g}", "psm", (g, 1.0, 1.0), "fail", source="published")
          for g in (0.0, 0.25, 0.5, 1.0)]
    return Fixture("dist_dyadic", T, SolutionSet.finite(pts), nb, np.array([0.0]), np.array([0.0]),
                   ex, {"L": L, "radius": radius})


# -- two-dimensional examples --------------------------------------------------

def subspace_map(mu: float) -> SetValuedMap:
    """Subdifferential of ``g(x) + (x^2 + y^2) y^2 / 2`` with ``g`` the distance-like kink at ``+-mu``."""

    def T(u):
        x, y = u
        base = x * y * y
        if abs(x) < mu:
            lo = hi = 0.0
        elif x == mu:
            lo, hi = 0.0, 1.0
        elif x == -mu:
            lo, hi = -1.0, 0.0
        elif x > mu:
            lo = hi = 1.0
        else:
            lo = hi = -1.0
        return SetValue([base, 2 * y ** 3 + y * x * x], [lo, 0.0], [hi, 0.0])

    return SetValuedMap(2, T, name="subspace")


def _fixture_subspace_mu(mu: float = 0.5) -> Fixture:
    if mu <= 0:
        raise ValueError("mu must be positive")
    T = subspace_map(mu)
    sol = SolutionSet(boxes=[BoxPiece([-mu, 0.0], [mu, 0.0])])
    nb = NeighborhoodSpec([mu, 0.0], [0.25 * mu, 2.0], grid_points_per_axis=41, random_samples=400, seed=3,
                          special_points=[[mu, 0.01], [mu, -0.01], [0.75 * mu, 1e-3], [1.25 * mu, 1e-3]])
    small_y = [[0.0, 2.0 ** -k] for k in range(1, 12)] + [[mu, 2.0 ** -k] for k in range(1, 12)]
    nb0 = NeighborhoodSpec([0.0, 0.0], [mu, 2.0], grid_points_per_axis=41, random_samples=400, seed=4,
                           special_points=small_y)
    ex = [Expectation(f"psm xi={xi:g}", "psm", (_diag(xi, 0), 1.0, 1.0), "pass", source="published")
          for xi in (0.0, 0.5, 1.0)]
    # near (mu, 0) the y-strong part survives while zeta <= (0.75 mu)^2; it is lost near x = 0
    ex += [Expectation(f"psm zeta={z:g}", "psm", (_diag(0, z), 1.0, 1.0), "pass", source="derived")
           for z in (0.01, 0.1)]
    ex += [Expectation("psm zeta=0.5", "psm", (_diag(0, 0.5), 1.0, 1.0), "fail", source="derived")]
    ex += [Expectation(f"psm zeta={z:g} base 0", "psm", (_diag(0, z), 1.0, 1.0), "fail",
                       base_u=np.zeros(2), base_w=np.zeros(2), neighborhood=nb0, source="published")
           for z in (1e-3, 0.01, 0.1, 0.5)]
    # with the centre at the origin the x-strong part holds for xi=1/2 but not xi=1
    ex += [Expectation("psm xi=0.5 base 0", "psm", (_diag(0.5, 0), 1.0, 1.0), "pass",
                       base_u=np.zeros(2), base_w=np.zeros(2), neighborhood=nb0, source="derived"),
           Expectation("psm xi=1 base 0", "psm", (_diag(1.0, 0), 1.0, 1.0), "fail",
                       base_u=np.zeros(2), base_w=np.zeros(2), neighborhood=nb0, source="derived")]
    return Fixture("subspace_mu", T, sol, nb, np.array([mu, 0.0]), np.zeros(2), ex, {"mu": mu})


def cone_map(gamma: float) -> SetValuedMap:
    def T(u):
        u1, u2 = u
        s = (1 - gamma ** 2) * u1 * u1 - u2 * u2
        if u2 < 0 or s < -1e-12 * max(u1 * u1, 1e-300):
            return SetValue.empty_set(2)
        return SetValue([gamma * u1, math.sqrt(max(s, 0.0))])

    return SetValuedMap(2, T, name="cone")


def _fixture_cone_gamma(gamma: float = 0.5) -> Fixture:
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    T = cone_map(gamma)
    c = math.sqrt(1 - gamma ** 2)
    edge = [[t, c * abs(t)] for t in (-0.9, -0.5, -0.1, 0.1, 0.5, 0.9)]
    nb = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=41, random_samples=400, seed=5,
                          special_points=edge)
    Xi = _diag(gamma, 0)
    ex = [
        Expectation("psm (Xi,I,I)", "psm", (Xi, 1.0, 1.0), "pass", source="published"),
        Expectation("psr (Xi,I,I)", "psr", (Xi, 1.0, 1.0), "fail", source="published"),
        Expectation("psr (2Xi-I,I,I)", "psr", (2 * Xi - np.eye(2), 1.0, 1.0), "pass", source="published"),
    ]
    return Fixture("cone_gamma", T, SolutionSet.singleton([0.0, 0.0]), nb, np.zeros(2), np.zeros(2),
                   ex, {"gamma": gamma})


def orthant_swap_map() -> SetValuedMap:
    def T(u):
        if np.any(u < 0):
            return SetValue.empty_set(2)
        return SetValue([u[1], u[0]])

    return SetValuedMap(2, T, name="orthant_swap")


def _fixture_orthant_swap() -> Fixture:
    T = orthant_swap_map()
    nb = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=41, random_samples=400, seed=6)
    eps = 0.1
    ex = [
        Expectation("psr (I,I,I)", "psr", (1.0, 1.0, 1.0), "pass", source="published"),
        Expectation("psm Xi=0", "psm", (0.0, 1.0, 1.0), "pass", source="published"),
        Expectation("psm Xi=I", "psm", (1.0, 1.0, 1.0), "fail", source="published"),
        Expectation("psm Xi=diag(eps,0)", "psm", (_diag(eps, 0), 1.0, 1.0), "fail", source="published"),
        Expectation("psm Xi=diag(0,eps)", "psm", (_diag(0, eps), 1.0, 1.0), "fail", source="published"),
        Expectation("psm Xi=eps*ones", "psm", (eps * np.ones((2, 2)), 1.0, 1.0), "fail", source="published"),
    ]
    return Fixture("orthant_swap", T, SolutionSet.singleton([0.0, 0.0]), nb, np.zeros(2), np.zeros(2), ex)


def _orthant_normal(u, tol=0.0):
    """Normal cone of the nonnegative orthant at ``u`` as a box, or None outside."""
    if np.any(u < -tol):
        return None
    lo = np.where(u <= tol, -np.inf, 0.0)
    return lo, np.zeros_like(u)


def _qp_resolvent_2d(A: np.ndarray):
    """Resolvent of ``u -> A u + N_{R^2_+}(u)``: enumerate the four active sets.

    ``v`` solves ``min_{v >= 0} <v, A v>/2... `` only when ``A`` is symmetric;
    here the KKT system ``v + tau (A v - lam) = u, lam >= 0, v >= 0, lam_k v_k = 0``
    is solved directly for each active set.
    """

    def resolvent(tau, u):
        cands = []
        for act in ((False, False), (True, False), (False, True), (True, True)):
            fixed = np.array(act)
            free = ~fixed
            v = np.zeros(2)
            B = np.eye(2) + tau * A
            if np.any(free):
                idx = np.flatnonzero(free)
                v[idx] = np.linalg.solve(B[np.ix_(idx, idx)], u[idx])
            lam = (B @ v - u) / tau
            ok = np.all(v >= -1e-14) and np.all(lam[fixed] >= -1e-12) and np.all(np.abs(lam[free]) <= 1e-12)
            if ok:
                cands.append(np.maximum(v, 0.0))
        if not cands:
            raise RuntimeError("resolvent has no solution")
        return min(cands, key=lambda v: (np.linalg.norm(v - u), tuple(v)))

    return resolvent


def orthant_linear_map(A, name: str) -> SetValuedMap:
    """``u -> A u + N_{R^2_+}(u)``."""
    A = np.asarray(A, dtype=float)

    def T(u):
        nc = _orthant_normal(u)
        if nc is None:
            return SetValue.empty_set(2)
        return SetValue(A @ u, nc[0], nc[1])

    return SetValuedMap(2, T, _qp_resolvent_2d(A), name=name)


def _fixture_orthant_bilinear() -> Fixture:
    T = orthant_linear_map([[0.0, 1.0], [1.0, 0.0]], "orthant_bilinear")
    local = SolutionSet.singleton([0.0, 0.0])
    rays = SolutionSet(boxes=[BoxPiece([0.0, 0.0], [0.0, np.inf]), BoxPiece([0.0, 0.0], [np.inf, 0.0])])
    full = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=41, random_samples=400, seed=7,
                            domain_restriction="nonnegative orthant")
    restricted = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=41, random_samples=400, seed=7,
                                  domain_restriction="open positive orthant plus origin")
    ex = [
        Expectation("psr (I,I,I) restricted", "psr", (1.0, 1.0, 1.0), "pass", neighborhood=restricted,
                    source="published"),
        Expectation("psr (I,I,I) full orthant", "psr", (1.0, 1.0, 1.0), "fail", source="published"),
        Expectation("psr (I,I,I) two-ray set", "psr", (1.0, 1.0, 1.0), "pass", solution_set=rays,
                    source="derived"),
        Expectation("psm Xi=0", "psm", (0.0, 1.0, 1.0), "pass", source="published"),
        Expectation("psm Xi=I restricted", "psm", (1.0, 1.0, 1.0), "fail", neighborhood=restricted,
                    source="published"),
    ]
    return Fixture("orthant_bilinear", T, local, full, np.zeros(2), np.zeros(2), ex,
                   notes="global solution set is the two boundary rays; {0} is the localised set")


ORTHANT_PARTIAL_BETA = (3 - math.sqrt(5)) / 2


def _fixture_orthant_partial(tau: float = 0.5) -> Fixture:
    T = orthant_linear_map([[1.0, 1.0], [1.0, 0.0]], "orthant_partial")
    sol = SolutionSet(boxes=[BoxPiece([0.0, 0.0], [0.0, np.inf])])
    nb = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=41, random_samples=400, seed=8,
                          domain_restriction="nonnegative orthant")
    restricted = NeighborhoodSpec([0.0, 0.0], 1.0, grid_points_per_axis=41, random_samples=400, seed=8,
                                  domain_restriction="open positive orthant plus origin")
    gmax = 2 * tau - tau * tau
    ex = [
        Expectation("psm Xi=diag(tau,0) N=2tau", "psm", (_diag(tau, 0), 2 * tau, 1.0), "pass", source="published"),
        Expectation("psm Xi=diag(gmax,0) N=2tau", "psm", (_diag(gmax, 0), 2 * tau, 1.0), "pass",
                    source="derived"),
        Expectation("psm Xi=diag(1.05 gmax,0) N=2tau", "psm", (_diag(1.05 * gmax, 0), 2 * tau, 1.0), "fail",
                    source="derived"),
        Expectation("psr (I,I,I) ray set", "psr", (1.0, 1.0, 1.0), "pass", source="derived"),
        Expectation("psr (I,I/beta,I) origin, restricted", "psr", (1.0, 1.0 / ORTHANT_PARTIAL_BETA, 1.0),
                    "pass", neighborhood=restricted, solution_set=SolutionSet.singleton([0.0, 0.0]),
                    source="published"),
    ]
    return Fixture("orthant_partial", T, sol, nb, np.zeros(2), np.zeros(2), ex, {"tau": tau})


# -- convex building blocks ---------------------------------------------------

def _fixture_ball_indicator(alpha: float = 1.0, q_norm: float = 1.0, angle: float = 0.3) -> Fixture:
    if alpha <= 0 or q_norm <= 0:
        raise ValueError("alpha and |q*| must be positive")
    f = BallIndicator(2, alpha)
    T = subdifferential_map(f)
    e = np.array([math.cos(angle), math.sin(angle)])
    x_star = alpha * e
    q_star = q_norm * e
    gamma = q_norm / (2 * alpha)
    sphere = [alpha * np.array([math.cos(t), math.sin(t)]) for t in np.linspace(0, 2 * math.pi, 73)[:-1]]
    nb = NeighborhoodSpec([0.0, 0.0], alpha, grid_points_per_axis=41, random_samples=400, seed=9,
                          special_points=[-x_star] + sphere)
    ex = [
        Expectation("psm gamma", "psm", (gamma, 1.0, 1.0), "pass", source="published"),
        Expectation("psm 1.05 gamma", "psm", (1.05 * gamma, 1.0, 1.0), "fail", source="published"),
    ]
    return Fixture("ball_indicator", T, SolutionSet.singleton(x_star), nb, x_star, q_star, ex,
                   {"alpha": alpha, "q_norm": q_norm, "gamma": gamma, "angle": angle})


def abs_value_neighborhood(q_star: float, gamma: float, scale: float = 1.0, **kw) -> NeighborhoodSpec:
    """The interval ``[(-1 - q*)/gamma, (1 - q*)/gamma]`` (``scale`` widens it about its centre)."""
    kw.setdefault("grid_points_per_axis", 201)
    kw.setdefault("random_samples", 200)
    return NeighborhoodSpec([-q_star / gamma], scale / gamma, **kw)


def _fixture_abs_value(q_star: float = 0.3, gamma: float = 1.0) -> Fixture:
    if not abs(q_star) < 1:
        raise ValueError("|q*| must be below 1")
    T = subdifferential_map(L1Norm(1, 1.0))
    nb = abs_value_neighborhood(q_star, gamma, special_points=[[(1 - q_star) / gamma], [(-1 - q_star) / gamma]])
    wide = abs_value_neighborhood(q_star, gamma, scale=1.05)
    ex = [
        Expectation("psm gamma", "psm", (gamma, 1.0, 1.0), "pass", source="published"),
        Expectation("psm gamma outside", "psm", (gamma, 1.0, 1.0), "fail", neighborhood=wide, source="published"),
    ]
    return Fixture("abs_value", T, SolutionSet.singleton([0.0]), nb, np.zeros(1), np.array([q_star]), ex,
                   {"q_star": q_star, "gamma": gamma})


# -- Lasso and TV instances ------------------------------------------------------

@dataclass
class LassoInstance:
    K: np.ndarray
    z: np.ndarray
    alpha: float
    mode: str = "strictly_complementary"
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.K.shape[1]

    @property
    def m(self) -> int:
        return self.K.shape[0]

    @property
    def strict_margin(self) -> float:
        return self.alpha - float(np.max(np.abs(self.K.T @ self.z)))

    def problem(self) -> SaddleProblem:
        return SaddleProblem(L1Norm(self.n, self.alpha), SquaredDistance(self.z), self.K)

    def solution(self) -> np.ndarray:
        """``(0, z)``; valid whenever ``|K^T z|_inf <= alpha``."""
        return np.concatenate([np.zeros(self.n), self.z])


def make_lasso_instance(n: int, m: int, alpha: float, seed: int,
                        mode: str = "strictly_complementary", margin: float = 0.2) -> LassoInstance:
    """Random Lasso data with the solution ``x* = 0``.

    ``K`` has i.i.d. uniform[-1, 1] entries and ``z`` is rescaled so that
    ``|K^T z|_inf = (1 - margin) alpha`` (strict mode) or ``= alpha`` (boundary mode).
    """
    if n < 1 or m < 1 or alpha <= 0:
        raise ValueError("need n, m >= 1 and alpha > 0")
    if mode not in ("strictly_complementary", "boundary"):
        raise ValueError(f"unknown Lasso mode {mode!r}")
    target = alpha * (1 - margin) if mode == "strictly_complementary" else alpha
    s = seed
    for _ in range(100):
        rng = np.random.default_rng(s)
        K = rng.uniform(-1.0, 1.0, (m, n))
        z = rng.standard_normal(m)
        g = np.max(np.abs(K.T @ z))
        if g > 1e-12:
            return LassoInstance(K, z * (target / g), float(alpha), mode, seed)
        s += 1_000_003
    raise RuntimeError("could not draw a nondegenerate Lasso instance")


def forward_difference(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("need at least two samples")
    K = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    K[idx, idx] = -1.0
    K[idx, idx + 1] = 1.0
    return K


@dataclass
class TVInstance:
    z: np.ndarray
    alpha: float
    x_ref: np.ndarray
    y_ref: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def K(self) -> np.ndarray:
        return forward_difference(self.n)

    @property
    def flatness(self) -> float:
        return float(np.min(np.abs(self.K @ self.x_ref)))

    def problem(self) -> SaddleProblem:
        m = self.n - 1
        return SaddleProblem(SquaredDistance(self.z), BoxIndicator(-self.alpha * np.ones(m), self.alpha * np.ones(m)),
                             self.K)

    def solution(self) -> np.ndarray:
        return np.concatenate([self.x_ref, self.y_ref])


class OracleFailure(RuntimeError):
    pass


def tv_dual_bvls(z, alpha):
    """Dual solve ``min_{|y|_inf <= alpha} |K^T y - z|^2 / 2`` by bounded least squares."""
    z = np.asarray(z, dtype=float)
    K = forward_difference(z.size)
    m = K.shape[0]
    if alpha == 0:
        return z.copy(), np.zeros(m)
    res = lsq_linear(K.T, z, bounds=(-alpha * np.ones(m), alpha * np.ones(m)), method="bvls", tol=1e-15)
    y = res.x
    return z - K.T @ y, y


def tv_pdhgm(z, alpha, max_iter: int = 1_000_000, tol: float = 1e-11):
    """Reference solve with the constant-step PDHGM, ``tau sigma |K|^2 = 0.99``."""
    from .solvers import pdhgm_step
    z = np.asarray(z, dtype=float)
    n = z.size
    K = forward_difference(n)
    P = SaddleProblem(SquaredDistance(z), BoxIndicator(-alpha * np.ones(n - 1), alpha * np.ones(n - 1)), K)
    L2 = float(np.linalg.norm(K, 2) ** 2)
    tau = sigma = math.sqrt(0.99 / L2)
    x, y = z.copy(), np.zeros(n - 1)
    for k in range(max_iter):
        x, y = pdhgm_step(P, tau, sigma, 1.0, x, y)
        if k % 50 == 0 and optimality_residual(P, np.concatenate([x, y])) <= tol:
            break
    return x, y, optimality_residual(P, np.concatenate([x, y]))


def reference_tv_solution(z, alpha, check_tol: float = 1e-10, agree_tol: float = 1e-8):
    """TV reference by two independent routes that must agree."""
    x1, y1 = tv_dual_bvls(z, alpha)
    x2, y2, res = tv_pdhgm(z, alpha, tol=check_tol)
    if res > check_tol:
        raise OracleFailure(f"PDHGM reference did not reach the residual target ({res:.3e})")
    gap = float(np.max(np.abs(x1 - x2)))
    if gap > 1e-6:
        raise OracleFailure(f"reference solvers disagree by {gap:.3e}")
    if gap > agree_tol:
        raise OracleFailure(f"reference solvers agree only to {gap:.3e}")
    return x1, y1


def make_tv_instance(n: int, alpha: float, seed: int, max_rejections: int = 50,
                     min_flatness: float = 1e-6) -> TVInstance:
    """Strictly increasing data whose denoised solution has no flat region."""
    if n < 3:
        raise ValueError("need n >= 3")
    diagnostics = []
    for attempt in range(max_rejections):
        rng = np.random.default_rng([seed, attempt])
        inc = rng.uniform(0.5, 1.5, n - 1) * (1.0 + attempt)
        z = np.concatenate([[0.0], np.cumsum(inc)])
        x, y = reference_tv_solution(z, alpha)
        flat = float(np.min(np.abs(np.diff(x))))
        if flat > min_flatness:
            return TVInstance(z, float(alpha), x, y, seed)
        diagnostics.append(flat)
    raise RuntimeError(f"TV generator failed after {max_rejections} rejections; flatness {diagnostics[-3:]}")


def tv_instance_from_data(z, alpha) -> TVInstance:
    x, y = reference_tv_solution(z, alpha)
    return TVInstance(np.asarray(z, float), float(alpha), x, y)


# -- catalogue ------------------------------------------------------------------

def make_fixture(fid: str, **params) -> Fixture:
    builders = {
        "dist_pm1": _fixture_dist_pm1,
        "dist_dyadic": _fixture_dist_dyadic,
        "subspace_mu": _fixture_subspace_mu,
        "cone_gamma": _fixture_cone_gamma,
        "orthant_swap": _fixture_orthant_swap,
        "orthant_bilinear": _fixture_orthant_bilinear,
        "orthant_partial": _fixture_orthant_partial,
        "ball_indicator": _fixture_ball_indicator,
        "abs_value": _fixture_abs_value,
        "lasso": _fixture_lasso,
        "tv1d": _fixture_tv1d,
    }
    if fid not in builders:
        raise ValueError(f"unknown fixture {fid!r}")
    return builders[fid](**params)


def _fixture_lasso(n: int = 20, m: int = 15, alpha: float = 1.0, seed: int = 0,
                   mode: str = "strictly_complementary", gamma: float = 0.05, radius: float = 1.0) -> Fixture:
    inst = make_lasso_instance(n, m, alpha, seed, mode)
    P = inst.problem()
    sol = SolutionSet.singleton(inst.solution())
    nb = NeighborhoodSpec(inst.solution(), radius, grid_points_per_axis=3, random_samples=300, seed=seed)
    fx = Fixture("lasso", P, sol, nb, inst.solution(), np.zeros(n + m), [],
                 {"n": n, "m": m, "alpha": alpha, "seed": seed, "mode": mode, "gamma": gamma})
    fx.instance = inst
    return fx


def _fixture_tv1d(n: int = 50, alpha: float = 0.5, seed: int = 0) -> Fixture:
    inst = make_tv_instance(n, alpha, seed)
    P = inst.problem()
    sol = SolutionSet.singleton(inst.solution())
    nb = NeighborhoodSpec(inst.solution(), 0.1, grid_points_per_axis=3, random_samples=100, seed=seed)
    fx = Fixture("tv1d", P, sol, nb, inst.solution(), np.zeros(2 * n - 1), [],
                 {"n": n, "alpha": alpha, "seed": seed})
    fx.instance = inst
    return fx


def reference_solution(obj) -> SolutionSet:
    """Solution set of a fixture or a generated instance."""
    if isinstance(obj, Fixture):
        return obj.solution_set
    if isinstance(obj, LassoInstance):
        if obj.strict_margin < 0:
            raise ValueError("Lasso instance is not of the x* = 0 kind")
        return SolutionSet.singleton(obj.solution())
    if isinstance(obj, TVInstance):
        return SolutionSet.singleton(obj.solution())
    if isinstance(obj, str):
        return make_fixture(obj).solution_set
    raise TypeError(f"no reference solution for {type(obj).__name__}")


# -- instance text format ------------------------------------------------------

def _row(v) -> str:
    return " ".join(format(float(t), ".17g") for t in v)


def serialize_instance(inst) -> str:
    if isinstance(inst, LassoInstance):
        lines = [f"lasso {inst.n} {inst.m} {inst.alpha:.17g}"]
        lines += [_row(r) for r in inst.K]
    elif isinstance(inst, TVInstance):
        lines = [f"tv1d {inst.n} {inst.alpha:.17g}"]
        lines += [_row(r) for r in inst.K]
    else:
        raise TypeError("unsupported instance type")
    lines.append(_row(inst.z))
    return "\n".join(lines) + "\n"


def parse_instance(text: str):
    try:
        return _parse_instance(text)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed instance: {exc}") from None


def _parse_instance(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] == "lasso":
        n, m, alpha = int(head[1]), int(head[2]), float(head[3])
        K = np.array([[float(t) for t in ln.split()] for ln in lines[1:1 + m]])
        z = np.array([float(t) for t in lines[1 + m].split()])
        if K.shape != (m, n) or z.size != m:
            raise ValueError("malformed lasso instance")
        return LassoInstance(K, z, alpha)
    if head[0] == "tv1d":
        n, alpha = int(head[1]), float(head[2])
        K = np.array([[float(t) for t in ln.split()] for ln in lines[1:n]])
        z = np.array([float(t) for t in lines[n].split()])
        if K.shape != (n - 1, n) or not np.array_equal(K, forward_difference(n)) or z.size != n:
            raise ValueError("malformed tv1d instance")
        return tv_instance_from_data(z, alpha)
    raise ValueError(f"unknown instance kind {head[0]!r}")

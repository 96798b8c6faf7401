"""Sampling-based certification of solution-set regularity inequalities.

Two inequalities are checked over a neighbourhood of a base point ``(u_hat, w_hat)``
of the graph of a set-valued map ``T`` with solution set ``A = T^{-1}(w_hat)``:

* partial strong submonotonicity with a triple ``(Xi, N, M)``::

      inf_{u* in A} <N (w - w_hat), u - u*> + |u - u*|^2_{M - Xi}  >=  dist^2_M(u, A)

* partial subregularity with a triple ``(P, N, M)``::

      dist^2_N(w_hat, T(u)) + dist^2_{M - P}(u, A)  >=  dist^2_M(u, A)

The margin at a sample is "left side minus right side". Infima over ``w in T(u)``
and over ``u*`` in interval-product solution sets are exact; only the
quantifier over ``u`` is sampled. A failing report is a genuine
counterexample; a passing report is evidence on the sampled points.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .linalg import PrimalDualVector, as_dense, psd_check, NotPSDError
from .setvalued import (
    SaddleProblem,
    SetValuedMap,
    SolutionSet,
    dist2_to_setvalue,
    eval_H,
    inf_linear_over_setvalue,
    min_dist_element,
    optimality_residual,
)

DEFAULT_SLACK = 1e-9
MAX_GRID = 20000


def _vec(u) -> np.ndarray:
    if isinstance(u, PrimalDualVector):
        return u.flat()
    return np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)


def _fmt(v) -> str:
    v = np.atleast_1d(v)
    return "[" + " ".join(format(float(t), ".17g") for t in v) + "]"


# -- neighbourhoods ----------------------------------------------------------

def _nonneg(u):
    return bool(np.all(u >= 0.0))


def _open_pos_plus_origin(u):
    return bool(np.all(u > 0.0) or np.all(u == 0.0))


DOMAIN_RESTRICTIONS: dict[str, Callable[[np.ndarray], bool]] = {
    "nonnegative orthant": _nonneg,
    "open positive orthant plus origin": _open_pos_plus_origin,
}


@dataclass
class NeighborhoodSpec:
    """An axis-aligned box ``center +- radius`` with a sampling recipe.

    ``radius`` may be a scalar or one value per axis. When the tensor grid
    would exceed ``MAX_GRID`` points it is replaced by grids along each
    coordinate axis and the two main diagonals.
    """

    center: np.ndarray
    radius: float | np.ndarray
    grid_points_per_axis: int = 9
    random_samples: int = 200
    seed: int = 0
    domain_restriction: str | Callable | None = None
    include_special: bool = True
    special_points: Sequence = ()

    def __post_init__(self):
        self.center = _vec(self.center)
        r = np.broadcast_to(np.asarray(self.radius, dtype=float), self.center.shape).copy()
        if np.any(r < 0):
            raise ValueError("radius must be nonnegative")
        self.radius = r
        if self.grid_points_per_axis < 3:
            raise ValueError("grid_points_per_axis must be at least 3")
        if self.random_samples < 0:
            raise ValueError("random_samples must be nonnegative")
        if isinstance(self.domain_restriction, str) and self.domain_restriction not in DOMAIN_RESTRICTIONS:
            raise ValueError(f"unknown domain restriction {self.domain_restriction!r}")

    @property
    def dim(self) -> int:
        return self.center.size

    def admissible(self, u) -> bool:
        u = _vec(u)
        inside = np.all(np.abs(u - self.center) <= self.radius * (1 + 1e-12) + 1e-15)
        if not inside:
            return False
        pred = self.domain_restriction
        if pred is None:
            return True
        fn = DOMAIN_RESTRICTIONS[pred] if isinstance(pred, str) else pred
        return bool(fn(u))

    def _grid(self) -> np.ndarray:
        g = self.grid_points_per_axis
        axes = [c + np.linspace(-r, r, g) for c, r in zip(self.center, self.radius)]
        if g ** self.dim <= MAX_GRID:
            return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, self.dim)
        pts = []
        t = np.linspace(-1.0, 1.0, g)
        for k in range(self.dim):
            for s in t:
                p = self.center.copy()
                p[k] += s * self.radius[k]
                pts.append(p)
        for s in t:
            pts.append(self.center + s * self.radius)
            pts.append(self.center + s * self.radius * np.where(np.arange(self.dim) % 2, -1.0, 1.0))
        return np.array(pts)

    def samples(self, solution_set: SolutionSet | None = None) -> np.ndarray:
        """Deterministic sample list: center, grid, random points, special points."""
        rng = np.random.default_rng(self.seed)
        blocks = [self.center[None, :], self._grid()]
        if self.random_samples:
            blocks.append(self.center + self.radius * rng.uniform(-1.0, 1.0, (self.random_samples, self.dim)))
        if self.include_special:
            special = [_vec(p) for p in self.special_points]
            if solution_set is not None:
                reps = solution_set.representatives(limit=float(np.max(self.radius)) + 1.0)
                for p in reps:
                    special.append(p)
                    special.append(2 * self.center - p)
                # nearest solution-set element to the centre, and its reflection
                for b in solution_set.boxes:
                    p = np.clip(self.center, b.lo, b.hi)
                    special.append(p)
                    special.append(2 * self.center - p)
            if special:
                blocks.append(np.array(special).reshape(-1, self.dim))
        pts = np.vstack(blocks)
        keep = [k for k in range(pts.shape[0]) if self.admissible(pts[k])]
        pts = pts[keep]
        # remove exact duplicates, keep first occurrence order
        _, idx = np.unique(pts, axis=0, return_index=True)
        return pts[np.sort(idx)]


# -- queries and reports -----------------------------------------------------

def _as_map(T) -> SetValuedMap:
    if isinstance(T, SaddleProblem):
        return T.as_map()
    return T


@dataclass
class RegularityQuery:
    """A PSM or PSR question about ``T`` at ``(u_hat, w_hat)``.

    ``triple`` is ``(Xi, N, M)`` for ``kind="psm"`` and ``(P, N, M)`` for
    ``kind="psr"``; entries may be StructuredOperators, arrays or scalars
    (multiples of the identity).
    """

    map: object
    base_u: np.ndarray
    base_w: np.ndarray
    triple: tuple
    solution_set: SolutionSet
    neighborhood: NeighborhoodSpec
    kind: str = "psm"
    slack: float = DEFAULT_SLACK
    description: str = ""

    def __post_init__(self):
        self.map = _as_map(self.map)
        self.base_u = _vec(self.base_u)
        self.base_w = _vec(self.base_w)
        if self.kind not in ("psm", "psr"):
            raise ValueError(f"unknown query kind {self.kind!r}")
        n = self.map.dim
        if self.base_u.size != n or self.base_w.size != n:
            raise ValueError("base point dimension mismatch")
        A, N, M = self.triple
        self.A = as_dense(A, n)
        self.N = as_dense(N, n)
        self.M = as_dense(M, n)
        ok, lam = psd_check(self.M, 1e-12)
        if not ok:
            raise NotPSDError(f"M is not positive semidefinite (min eigenvalue {lam:.3e})")
        S = self.map(self.base_u)
        if not S.contains(self.base_w):
            raise ValueError("base point is not in the graph of the map")

    @property
    def dim(self) -> int:
        return self.map.dim

    def describe(self) -> str:
        name = self.description or getattr(self.map, "name", "map")
        return (f"{self.kind} map={name} base_u={_fmt(self.base_u)} base_w={_fmt(self.base_w)} "
                f"slack={self.slack:.3g}")


@dataclass
class CertificateReport:
    verdict: str
    worst_margin: float
    counterexamples: list
    samples_evaluated: int
    skipped: int = 0
    description: str = ""
    slack: float = DEFAULT_SLACK

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_text(self) -> str:
        head = (f"# {self.description} verdict={self.verdict} worst_margin={self.worst_margin:.17g} "
                f"samples={self.samples_evaluated} skipped={self.skipped}")
        lines = [head]
        for u, w, m in self.counterexamples:
            lines.append(f"u={_fmt(u)} w={_fmt(w)} margin={m:.17g}")
        return "\n".join(lines) + "\n"

    def __str__(self):
        return self.to_text()


def _argmin_linear(piece, c):
    """A minimiser of ``<w, c>`` over the box part of ``piece`` (None if unbounded)."""
    w = piece.offset.copy()
    for k, ck in enumerate(c):
        end = piece.lo[k] if ck > 0 else piece.hi[k] if ck < 0 else (
            np.clip(0.0, piece.lo[k], piece.hi[k]))
        if not np.isfinite(end):
            return None
        w[k] += end
    return w


# -- margins ---------------------------------------------------------------

def _psm_margin_at_w(q: RegularityQuery, u, w) -> float:
    A = q.solution_set
    lhs, _ = A.inf_quadratic(u, q.M - q.A, q.N @ (w - q.base_w))
    return lhs - A.dist2(u, q.M)


def _psr_margin_at_w(q: RegularityQuery, u, w) -> float:
    A = q.solution_set
    r = q.base_w - w
    return float(r @ q.N @ r) + A.dist2(u, q.M - q.A) - A.dist2(u, q.M)


def recompute_margin(q: RegularityQuery, u, w) -> float:
    """Margin of the inequality at a specific pair ``(u, w)``."""
    u, w = _vec(u), _vec(w)
    return _psm_margin_at_w(q, u, w) if q.kind == "psm" else _psr_margin_at_w(q, u, w)


def _push_along_ray(q, u, w, r):
    """Walk ``w + t r`` until the margin is clearly negative; returns (w_t, margin)."""
    t = 1.0
    for _ in range(200):
        wt = w + t * r
        m = _psm_margin_at_w(q, u, wt)
        if m < -1.0:
            return wt, m
        t *= 2.0
    return wt, m


def _psm_point(q: RegularityQuery, u):
    """Worst margin over ``w in T(u)`` for one sample; None if ``T(u)`` is empty."""
    S = q.map(u)
    if S.empty:
        return None
    A = q.solution_set
    NT = q.N.T
    Q = q.M - q.A
    Qs = 0.5 * (Q + Q.T)
    rhs = A.dist2(u, q.M)
    best_m, best_w = np.inf, None
    for P in S.pieces:
        # finite part of A: the infima over w and u* commute and the w-infimum is linear
        for p in A.points:
            d = u - p
            c = NT @ d
            lin = inf_linear_over_setvalue(P, q.base_w, c)
            if lin == -np.inf:
                ray = next(r for r in _piece_directions(P) if r @ c < 0)
                w0 = _argmin_linear_bounded(P, c)
                w, m = _push_along_ray(q, u, w0, ray)
            else:
                w = _argmin_linear(P, c)
                m = _psm_margin_at_w(q, u, w) if w is not None else lin + float(d @ Qs @ d) - rhs
            if m < best_m:
                best_m, best_w = m, w
        if A.boxes:
            verts, dirs = P.extreme_points()
            if verts.shape[0] > 1 << 14:
                raise NotImplementedError("too many vertices in T(u) for box solution sets")
            mn = min_dist_element(P, np.zeros(P.dim))[1]
            cand = list(verts) + ([mn] if mn is not None else [])
            for w in cand:
                m = _psm_margin_at_w(q, u, w)
                if m < best_m:
                    best_m, best_w = m, w
            for r in dirs:
                if A.inf_linear(u, q.N @ r) < -1e-12:
                    w, m = _push_along_ray(q, u, verts[0], r)
                    if m < best_m:
                        best_m, best_w = m, w
    return best_m, best_w


def _piece_directions(P):
    return P.extreme_points()[1]


def _argmin_linear_bounded(P, c):
    """Box-vertex minimiser of ``<w, c>`` ignoring infinite ends (they are handled as rays)."""
    w = P.offset.copy()
    for k, ck in enumerate(c):
        lo, hi = P.lo[k], P.hi[k]
        choice = lo if ck > 0 else hi
        if not np.isfinite(choice):
            choice = lo if np.isfinite(lo) else hi if np.isfinite(hi) else 0.0
        w[k] += choice
    return w


def _psr_point(q: RegularityQuery, u):
    S = q.map(u)
    if S.empty:
        return None
    d2, w = min_dist_element(S, q.base_w, q.N)
    A = q.solution_set
    m = d2 + A.dist2(u, q.M - q.A) - A.dist2(u, q.M)
    return m, w


def _evaluate(q: RegularityQuery, pts: np.ndarray, workers: int = 1):
    fn = _psm_point if q.kind == "psm" else _psr_point

    def run(chunk):
        return [fn(q, u) for u in chunk]

    if workers <= 1 or len(pts) < 2:
        return run(pts)
    chunks = np.array_split(pts, workers)
    out = []
    with ThreadPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(run, chunks):
            out.extend(part)
    return out


def _report(q_desc, pts, results, slack, top_k) -> CertificateReport:
    evaluated, skipped = 0, 0
    rows = []
    for k, (u, res) in enumerate(zip(pts, results)):
        if res is None:
            skipped += 1
            continue
        evaluated += 1
        m, w = res
        rows.append((m, k, u, w))
    worst = min((r[0] for r in rows), default=np.inf)
    verdict = "fail" if worst < -slack else "pass"
    bad = sorted([r for r in rows if r[0] < -slack], key=lambda r: (r[0], r[1]))[:top_k]
    cex = [(np.array(u), np.array(w), float(m)) for m, _, u, w in bad]
    return CertificateReport(verdict, float(worst), cex, evaluated, skipped, q_desc, slack)


def run_query(q: RegularityQuery, workers: int = 1, top_k: int = 10, points=None) -> CertificateReport:
    pts = q.neighborhood.samples(q.solution_set) if points is None else np.atleast_2d(points)
    results = _evaluate(q, pts, workers)
    return _report(q.describe(), pts, results, q.slack, top_k)


def check_psm(q: RegularityQuery, workers: int = 1, top_k: int = 10) -> CertificateReport:
    if q.kind != "psm":
        raise ValueError("query is not a submonotonicity query")
    return run_query(q, workers, top_k)


def check_psr(q: RegularityQuery, workers: int = 1, top_k: int = 10) -> CertificateReport:
    if q.kind != "psr":
        raise ValueError("query is not a subregularity query")
    ok, lam = psd_check(q.M - q.A, 1e-12)
    if not ok:
        raise NotPSDError(f"M - P is not positive semidefinite (min eigenvalue {lam:.3e})")
    return run_query(q, workers, top_k)


def psm_query(T, base_u, base_w, Xi, N, M, sol, nb, slack=DEFAULT_SLACK, description=""):
    return RegularityQuery(T, base_u, base_w, (Xi, N, M), sol, nb, "psm", slack, description)


def psr_query(T, base_u, base_w, P, N, M, sol, nb, slack=DEFAULT_SLACK, description=""):
    return RegularityQuery(T, base_u, base_w, (P, N, M), sol, nb, "psr", slack, description)


# -- independent slow path ------------------------------------------------------

def _dense_selection(S, rng, n_random=8, ray_lengths=(0.5, 2.0, 8.0)):
    """Sample elements of a set value: vertices, random box points and points along rays."""
    out = []
    for P in S.pieces:
        verts, dirs = P.extreme_points()
        out.extend(verts)
        lo = np.where(np.isfinite(P.lo), P.lo, -4.0)
        hi = np.where(np.isfinite(P.hi), P.hi, 4.0)
        lo = np.minimum(lo, hi)
        for _ in range(n_random):
            out.append(P.offset + rng.uniform(lo, hi))
        for r in dirs:
            for t in ray_lengths:
                out.append(verts[0] + t * r)
    return out


def _slow_inf(A: SolutionSet, fn, grid: int = 2001):
    """Minimum of ``fn(u*)`` over the solution set by enumeration and scalar refinement."""
    best = np.inf
    for p in A.points:
        best = min(best, fn(p))
    for b in A.boxes:
        free = np.flatnonzero(b.lo < b.hi)
        lo = np.where(np.isfinite(b.lo), b.lo, b.hi - 50.0)
        hi = np.where(np.isfinite(b.hi), b.hi, b.lo + 50.0)
        base = lo.copy()
        if free.size == 0:
            best = min(best, fn(base))
            continue
        if free.size == 1:
            k = free[0]

            def f1(t):
                v = base.copy()
                v[k] = t
                return fn(v)

            ts = np.linspace(lo[k], hi[k], grid)
            vals = np.array([f1(t) for t in ts])
            j = int(np.argmin(vals))
            a, c = ts[max(j - 1, 0)], ts[min(j + 1, grid - 1)]
            res = minimize_scalar(f1, bounds=(a, c), method="bounded",
                                  options={"xatol": 1e-13 * max(1.0, abs(c))})
            best = min(best, vals[j], float(res.fun), f1(lo[k]), f1(hi[k]))
        else:
            g = max(3, int(round(grid ** (1.0 / free.size))))
            axes = [np.linspace(lo[k], hi[k], g) for k in free]
            for c in itertools.product(*axes):
                v = base.copy()
                v[free] = c
                best = min(best, fn(v))
    return best


def slow_margin(q: RegularityQuery, u, w) -> float:
    """Direct evaluation of the defining inequality at ``(u, w)`` without the exact solvers."""
    A = q.solution_set
    M, N, X = q.M, q.N, q.A

    def dist2(W):
        return _slow_inf(A, lambda p: float((u - p) @ W @ (u - p)))

    if q.kind == "psm":
        g = N @ (w - q.base_w)
        lhs = _slow_inf(A, lambda p: float(g @ (u - p) + (u - p) @ (M - X) @ (u - p)))
        return lhs - dist2(M)
    r = q.base_w - w
    return float(r @ N @ r) + dist2(M - X) - dist2(M)


def revalidate(q: RegularityQuery, n_points: int = 1000, seed: int = 12345,
               tol: float = 1e-7) -> CertificateReport:
    """Re-check a query at fresh random points by brute-force evaluation.

    Returns a report whose verdict uses ``tol`` (absolute, scaled by the size of
    the distances involved) in place of the query slack, because the
    solution-set infima are approximated by sampling here.
    """
    nb = q.neighborhood
    rng = np.random.default_rng(seed)
    rows = []
    evaluated = skipped = 0
    tries = 0
    while evaluated + skipped < n_points and tries < 50 * n_points:
        tries += 1
        u = nb.center + nb.radius * rng.uniform(-1.0, 1.0, nb.dim)
        if not nb.admissible(u):
            continue
        S = q.map(u)
        if S.empty:
            skipped += 1
            continue
        evaluated += 1
        cands = _dense_selection(S, rng)
        if q.kind == "psr":
            # distance from w_hat to T(u): candidates plus the exact projection as a bound from above
            cands = cands + [min_dist_element(S, q.base_w, q.N)[1]]
        scale = 1.0 + float(np.linalg.norm(u - nb.center)) ** 2
        for w in cands:
            m = slow_margin(q, u, w)
            rows.append((m / scale, len(rows), u, w, m))
    worst = min((r[0] for r in rows), default=np.inf)
    verdict = "fail" if worst < -max(tol, q.slack) else "pass"
    bad = sorted([r for r in rows if r[0] < -max(tol, q.slack)], key=lambda r: (r[0], r[1]))[:10]
    cex = [(u, w, float(m)) for _, _, u, w, m in bad]
    return CertificateReport(verdict, float(worst), cex, evaluated, skipped,
                             "revalidate " + q.describe(), max(tol, q.slack))


# -- derived checks ----------------------------------------------------------

def check_projection_condition(A: SolutionSet, u_hat, M, Mp, nb: NeighborhoodSpec,
                               tie_tol: float = 1e-9) -> CertificateReport:
    """Common nearest point of ``A`` under the ``M`` and ``Mp`` seminorms at each sample.

    The margin is minus the distance between the two argmin sets (0 when they meet).
    """
    n = A.dim
    Md, Mpd = as_dense(M, n), as_dense(Mp, n)
    for W, name in ((Md, "M"), (Mpd, "Mp")):
        ok, lam = psd_check(W, 1e-12)
        if not ok:
            raise NotPSDError(f"{name} is not positive semidefinite (min eigenvalue {lam:.3e})")
    pts = nb.samples(A)
    results = []
    for u in pts:
        a1 = A.argmins(u, Md, tie_tol)
        a2 = A.argmins(u, Mpd, tie_tol)
        gap = min(float(np.linalg.norm(p - r)) for p in a1 for r in a2)
        m = 0.0 if gap <= 1e-9 else -gap
        results.append((m, a1[0]))
    return _report(f"projection u_hat={_fmt(u_hat)}", pts, results, 0.0, 10)


def gap_function_check(T, N, Gamma, gap: Callable, base, nb: NeighborhoodSpec,
                       sol: SolutionSet, slack: float = DEFAULT_SLACK) -> CertificateReport:
    """Check ``<w - w_hat, u - u*>_N >= gap(u; u*) + |u - u*|^2_Gamma`` and ``gap(u*; u*) = 0``.

    ``u*`` ranges over the representative elements of ``sol``; ``w`` over the
    extreme selections of ``T(u)``.
    """
    T = _as_map(T)
    n = T.dim
    Nd, Gd = as_dense(N, n), as_dense(Gamma, n)
    u_hat, w_hat = _vec(base[0]), _vec(base[1])
    stars = sol.representatives(limit=float(np.max(nb.radius)) + 1.0)
    norm_err = max(abs(gap(p, p)) for p in stars)
    pts = nb.samples(sol)
    results = []
    for u in pts:
        S = T(u)
        if S.empty:
            results.append(None)
            continue
        best = (np.inf, None)
        for p in stars:
            d = u - p
            c = Nd.T @ d
            rest = gap(u, p) + float(d @ Gd @ d)
            for P in S.pieces:
                lin = inf_linear_over_setvalue(P, w_hat, c)
                w = _argmin_linear(P, c)
                m = lin - rest
                if m < best[0]:
                    best = (m, w if w is not None else P.offset)
        results.append(best)
    rep = _report("gap function", pts, results, slack, 10)
    if norm_err > 1e-12:
        rep.verdict = "fail"
        rep.description += f" normalisation error {norm_err:.3e}"
    return rep


def marginal_psm_check(P: SaddleProblem, sol: SolutionSet, gamma: float, rho: float,
                       nb: NeighborhoodSpec, slack: float = DEFAULT_SLACK) -> CertificateReport:
    """Check the two split inequalities for the primal and dual blocks of a saddle problem.

    For every ``u* = (x*, y*)`` in ``sol`` with ``q* = -K^T y*`` and ``z* = K x*``:
    ``<dG(x) - q*, x - x*> - gamma/2 |x - x*|^2 >= 0`` and
    ``<dF*(y) - z*, y - y*> - rho/2 |y - y*|^2 >= 0`` after taking the
    infimum over ``u*``. The reported margin is the smaller of the two.
    """
    if gamma < 0 or rho < 0:
        raise ValueError("gamma and rho must be nonnegative")
    n, m = P.n, P.m
    stars = sol.representatives()
    for s in stars:
        if optimality_residual(P, s) > 1e-8:
            raise ValueError("solution set element fails the optimality check")
    pts = nb.samples(sol)
    results = []
    for u in pts:
        x, y = u[:n], u[n:]
        gx, fy = P.G.subdiff(x), P.Fstar.subdiff(y)
        if gx.empty or fy.empty:
            results.append(None)
            continue
        mg = mf = np.inf
        for s in stars:
            xs, ys = s[:n], s[n:]
            qs, zs = -P.K.T @ ys, P.K @ xs
            dx, dy = x - xs, y - ys
            mg = min(mg, inf_linear_over_setvalue(gx, qs, dx) - 0.5 * gamma * float(dx @ dx))
            mf = min(mf, inf_linear_over_setvalue(fy, zs, dy) - 0.5 * rho * float(dy @ dy))
        w = np.concatenate([gx.offset, fy.offset])
        results.append((min(mg, mf), w))
    return _report(f"marginal gamma={gamma:g} rho={rho:g}", pts, results, slack, 10)


def conversion_cross_check(q: RegularityQuery, kappa: float, workers: int = 1):
    """Strong submonotonicity ``(Xi=M, N=kappa M, M)`` and, if it holds, the implied
    subregularity ``(P=M, N=kappa^2 M, M)`` on the same samples.

    ``q`` supplies the map, base point, ``M``, solution set and neighbourhood.
    Returns ``(psm_report, psr_report_or_None)``.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    M = q.M
    psm = RegularityQuery(q.map, q.base_u, q.base_w, (M, kappa * M, M), q.solution_set,
                          q.neighborhood, "psm", q.slack, q.description)
    pts = q.neighborhood.samples(q.solution_set)
    r1 = run_query(psm, workers, points=pts)
    if not r1.passed:
        return r1, None
    psr = RegularityQuery(q.map, q.base_u, q.base_w, (M, kappa ** 2 * M, M), q.solution_set,
                          q.neighborhood, "psr", q.slack, q.description)
    return r1, run_query(psr, workers, points=pts)

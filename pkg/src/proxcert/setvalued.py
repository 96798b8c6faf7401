"""Closed-form set-valued calculus.

Values of set-valued maps are stored as ``offset + box + cone(rays)``
(:class:`SetValue`) or as finite unions of such sets (:class:`SetUnion`).
That covers subdifferentials of the separable functions used here, normal
cones of balls and boxes, the saddle operator of a primal-dual problem and
the distance maps ``T_C(u) = u - P_C(u)`` of finite sets. All infima that
the certifier needs over these sets are evaluated exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import lsq_linear

from .linalg import PrimalDualVector, as_dense, psd_sqrt

MEMBERSHIP_TOL = 1e-8
DOMAIN_TOL = 1e-12


def _vec(u) -> np.ndarray:
    if isinstance(u, PrimalDualVector):
        return u.flat()
    return np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]``, either end possibly infinite."""

    lo: float
    hi: float

    def __post_init__(self):
        if np.isnan(self.lo) or np.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(float(v), float(v))

    def inf_linear(self, d: float) -> float:
        """``inf_{w in [lo, hi]} w * d``."""
        if d > 0:
            return self.lo * d
        if d < 0:
            return self.hi * d
        return 0.0

    def contains(self, w: float, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.lo - tol <= w <= self.hi + tol

    def clip(self, w: float) -> float:
        return float(min(max(w, self.lo), self.hi))

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi


class SetValue:
    """The set ``{offset + s + R^T lam : s in box, lam >= 0}`` or the empty set.

    Parameters
    ----------
    offset : array_like
        Base point.
    lo, hi : array_like, optional
        Box bounds for ``s``; default to zeros (a single point).
    rays : array_like, optional
        Rows are recession directions generating a cone.
    empty : bool
        Marks the empty set; all other fields are then ignored.
    """

    def __init__(self, offset, lo=None, hi=None, rays=None, empty: bool = False):
        self.offset = np.atleast_1d(np.asarray(offset, dtype=float)).copy()
        n = self.offset.size
        self.lo = np.zeros(n) if lo is None else np.broadcast_to(np.asarray(lo, float), (n,)).copy()
        self.hi = np.zeros(n) if hi is None else np.broadcast_to(np.asarray(hi, float), (n,)).copy()
        if np.any(self.lo > self.hi):
            raise ValueError("box lower bound exceeds upper bound")
        if rays is None:
            self.rays = np.zeros((0, n))
        else:
            self.rays = np.atleast_2d(np.asarray(rays, dtype=float)).reshape(-1, n).copy()
        self.empty = bool(empty)
        for a in (self.offset, self.lo, self.hi, self.rays):
            a.setflags(write=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def point(cls, w) -> "SetValue":
        return cls(w)

    @classmethod
    def empty_set(cls, n: int) -> "SetValue":
        return cls(np.zeros(n), empty=True)

    @classmethod
    def from_intervals(cls, intervals: Sequence[Interval]) -> "SetValue":
        lo = np.array([iv.lo for iv in intervals], dtype=float)
        hi = np.array([iv.hi for iv in intervals], dtype=float)
        return cls(np.zeros(len(intervals)), lo, hi)

    @property
    def dim(self) -> int:
        return self.offset.size

    @property
    def pieces(self) -> list["SetValue"]:
        return [] if self.empty else [self]

    def intervals(self) -> list[Interval]:
        """Per-coordinate intervals ``offset_k + [lo_k, hi_k]`` (rays ignored)."""
        return [Interval(o + l, o + h) for o, l, h in zip(self.offset, self.lo, self.hi)]

    def shifted(self, v) -> "SetValue":
        if self.empty:
            return self
        return SetValue(self.offset + _vec(v), self.lo, self.hi, self.rays)

    def is_singleton(self) -> bool:
        return (not self.empty) and np.all(self.lo == self.hi) and self.rays.shape[0] == 0

    def __repr__(self):
        if self.empty:
            return f"SetValue(empty, dim={self.dim})"
        return (f"SetValue(offset={self.offset.tolist()}, lo={self.lo.tolist()}, "
                f"hi={self.hi.tolist()}, rays={self.rays.tolist()})")

    # -- queries ----------------------------------------------------------
    def contains(self, w, tol: float = MEMBERSHIP_TOL) -> bool:
        if self.empty:
            return False
        return dist2_to_setvalue(self, w) <= tol * tol

    def extreme_points(self):
        """Vertices of the box part (finite ends only) and the recession directions.

        Infinite box ends become an extra ``+-e_k`` direction anchored at the
        finite end (or at 0 for doubly infinite coordinates).
        """
        n = self.dim
        choices = []
        dirs = [r for r in self.rays]
        for k in range(n):
            lo, hi = self.lo[k], self.hi[k]
            opts = []
            if np.isfinite(lo):
                opts.append(lo)
            if np.isfinite(hi) and hi != lo:
                opts.append(hi)
            if not opts:
                opts.append(0.0)
            if not np.isfinite(lo):
                e = np.zeros(n)
                e[k] = -1.0
                dirs.append(e)
            if not np.isfinite(hi):
                e = np.zeros(n)
                e[k] = 1.0
                dirs.append(e)
            choices.append(opts)
        verts = np.array([self.offset + np.array(c) for c in itertools.product(*choices)])
        return verts, (np.array(dirs) if dirs else np.zeros((0, n)))


class SetUnion:
    """Finite union of :class:`SetValue` pieces (e.g. distance-map ties)."""

    def __init__(self, pieces: Sequence[SetValue], dim: int | None = None):
        ps = [p for p in pieces if not p.empty]
        if dim is None:
            if not pieces:
                raise ValueError("dimension needed for an empty union")
            dim = pieces[0].dim
        self._dim = dim
        self._pieces = ps

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def pieces(self) -> list[SetValue]:
        return list(self._pieces)

    @property
    def empty(self) -> bool:
        return len(self._pieces) == 0

    def contains(self, w, tol: float = MEMBERSHIP_TOL) -> bool:
        return any(p.contains(w, tol) for p in self._pieces)

    def __repr__(self):
        return f"SetUnion({self._pieces!r})"


# -- exact infima over set values ---------------------------------------

def inf_linear_over_setvalue(S, w0, d) -> float:
    """``inf_{w in S} <w - w0, d>``; ``+inf`` for the empty set, ``-inf`` if unbounded."""
    d = _vec(d)
    w0 = _vec(w0)
    best = np.inf
    for P in S.pieces:
        if P.dim != d.size or w0.size != d.size:
            raise ValueError("dimension mismatch")
        if P.rays.shape[0] and np.any(P.rays @ d < 0):
            return -np.inf
        val = float((P.offset - w0) @ d)
        for lo, hi, dk in zip(P.lo, P.hi, d):
            val += Interval(lo, hi).inf_linear(dk)
        best = min(best, val)
    return best


def dist2_to_setvalue(S, target, W=None) -> float:
    """Squared ``W``-weighted distance from ``target`` to ``S`` (``+inf`` if empty).

    Box-only pieces with a diagonal weight use coordinate clipping; otherwise
    the problem is a bounded-variable least-squares fit solved with
    ``scipy.optimize.lsq_linear``.
    """
    return min_dist_element(S, target, W)[0]


def min_dist_element(S, target, W=None):
    """Closest element of ``S`` to ``target`` in the ``W`` seminorm; returns (dist^2, element)."""
    t = _vec(target)
    best, arg = np.inf, None
    for P in S.pieces:
        n = P.dim
        if t.size != n:
            raise ValueError("dimension mismatch")
        Wd = np.eye(n) if W is None else as_dense(W, n)
        diag = np.allclose(Wd, np.diag(np.diag(Wd)), rtol=0, atol=0)
        if P.rays.shape[0] == 0 and diag and np.all(np.diag(Wd) >= 0):
            s = np.clip(t - P.offset, P.lo, P.hi)
            w = P.offset + s
            r = w - t
            val = float(np.sum(np.diag(Wd) * r * r))
        else:
            L = psd_sqrt(Wd)
            R = P.rays
            A = L @ np.hstack([np.eye(n), R.T])
            b = L @ (t - P.offset)
            lb = np.concatenate([P.lo, np.zeros(R.shape[0])])
            ub = np.concatenate([P.hi, np.full(R.shape[0], np.inf)])
            # lsq_linear rejects equal bounds; pin those variables by hand
            fixed = lb == ub
            free = ~fixed
            b_eff = b - A[:, fixed] @ lb[fixed]
            v = lb.copy()
            if np.any(free):
                res = lsq_linear(A[:, free], b_eff, bounds=(lb[free], ub[free]),
                                 method="bvls", tol=1e-14)
                v[free] = res.x
            w = P.offset + v[:n] + R.T @ v[n:]
            r = w - t
            val = float(max(0.0, r @ Wd @ r))
        if val < best:
            best, arg = val, w
    return best, arg


def min_norm_element(S) -> np.ndarray | None:
    """Euclidean minimal-norm element of ``S`` (``None`` if empty)."""
    if not S.pieces:
        return None
    return min_dist_element(S, np.zeros(S.dim))[1]


# -- prox-friendly functions ---------------------------------------------

class ProxFunction:
    """Base class: a function with closed-form prox and subdifferential."""

    convex = True

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.n = int(n)

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, tau: float, x) -> np.ndarray:
        raise NotImplementedError

    def subdiff(self, x) -> SetValue:
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = _vec(x)
        if x.size != self.n:
            raise ValueError(f"expected a vector of length {self.n}, got {x.size}")
        return x


class L1Norm(ProxFunction):
    """``alpha * ||x||_1``."""

    def __init__(self, n: int, alpha: float = 1.0):
        super().__init__(n)
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.alpha = float(alpha)

    def value(self, x):
        return self.alpha * float(np.abs(self._check(x)).sum())

    def prox(self, tau, x):
        x = self._check(x)
        return np.sign(x) * np.maximum(np.abs(x) - tau * self.alpha, 0.0)

    def subdiff(self, x):
        x = self._check(x)
        a = self.alpha
        lo = np.where(x > 0, a, -a)
        hi = np.where(x < 0, -a, a)
        return SetValue(np.zeros(self.n), lo, hi)


class SquaredDistance(ProxFunction):
    """``(c/2) ||x - z||^2``; with ``c = 1`` this is ``||x||^2/2 - <z, x>`` up to a constant."""

    def __init__(self, z, c: float = 1.0):
        z = np.atleast_1d(np.asarray(z, dtype=float)).copy()
        super().__init__(z.size)
        if c < 0:
            raise ValueError("c must be nonnegative")
        self.z = z
        self.c = float(c)

    def value(self, x):
        r = self._check(x) - self.z
        return 0.5 * self.c * float(r @ r)

    def prox(self, tau, x):
        x = self._check(x)
        return (x + tau * self.c * self.z) / (1.0 + tau * self.c)

    def subdiff(self, x):
        return SetValue.point(self.c * (self._check(x) - self.z))


class BallIndicator(ProxFunction):
    """Indicator of the closed Euclidean ball of radius ``alpha`` at the origin."""

    def __init__(self, n: int, alpha: float = 1.0):
        super().__init__(n)
        if alpha <= 0:
            raise ValueError("radius must be positive")
        self.alpha = float(alpha)

    def _boundary_state(self, x):
        r = float(np.linalg.norm(x))
        tol = DOMAIN_TOL * max(1.0, self.alpha)
        if r > self.alpha + tol:
            return "outside"
        if r >= self.alpha - tol:
            return "boundary"
        return "inside"

    def value(self, x):
        return 0.0 if self._boundary_state(self._check(x)) != "outside" else np.inf

    def prox(self, tau, x):
        x = self._check(x)
        r = float(np.linalg.norm(x))
        return x.copy() if r <= self.alpha else x * (self.alpha / r)

    def subdiff(self, x):
        x = self._check(x)
        state = self._boundary_state(x)
        if state == "outside":
            return SetValue.empty_set(self.n)
        if state == "inside":
            return SetValue.point(np.zeros(self.n))
        return SetValue(np.zeros(self.n), rays=x[None, :])


class BoxIndicator(ProxFunction):
    """Indicator of ``prod_k [lo_k, hi_k]``."""

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        lo, hi = np.broadcast_arrays(lo, hi)
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        super().__init__(lo.size)
        self.lo, self.hi = lo.copy(), hi.copy()

    def _tol(self):
        return DOMAIN_TOL * np.maximum(1.0, np.maximum(np.abs(np.where(np.isfinite(self.lo), self.lo, 0)),
                                                       np.abs(np.where(np.isfinite(self.hi), self.hi, 0))))

    def value(self, x):
        x = self._check(x)
        tol = self._tol()
        ok = np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol)
        return 0.0 if ok else np.inf

    def prox(self, tau, x):
        return np.clip(self._check(x), self.lo, self.hi)

    def subdiff(self, x):
        x = self._check(x)
        tol = self._tol()
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            return SetValue.empty_set(self.n)
        at_lo = x <= self.lo + tol
        at_hi = x >= self.hi - tol
        lo = np.where(at_lo, -np.inf, 0.0)
        hi = np.where(at_hi, np.inf, 0.0)
        return SetValue(np.zeros(self.n), lo, hi)


class Zero(ProxFunction):
    """The zero function."""

    def value(self, x):
        self._check(x)
        return 0.0

    def prox(self, tau, x):
        return self._check(x).copy()

    def subdiff(self, x):
        self._check(x)
        return SetValue.point(np.zeros(self.n))


class SeparableCustom(ProxFunction):
    """Separable function given coordinate-wise by scalar callables.

    Parameters
    ----------
    values : sequence of callables
        ``values[k](t)`` is the k-th scalar term.
    subdiffs : sequence of callables
        ``subdiffs[k](t)`` returns ``(lo, hi)`` for the k-th scalar subdifferential,
        or ``None`` outside the domain.
    proxes : sequence of callables, optional
        ``proxes[k](tau, t)``; without them :meth:`prox` is unavailable.
    convex : bool
        Whether every coordinate term is convex.
    """

    def __init__(self, values, subdiffs, proxes=None, convex: bool = True):
        super().__init__(len(values))
        if len(subdiffs) != self.n or (proxes is not None and len(proxes) != self.n):
            raise ValueError("coordinate tables have different lengths")
        self.values, self.subdiffs, self.proxes = list(values), list(subdiffs), proxes
        self.convex = convex

    def value(self, x):
        x = self._check(x)
        return float(sum(f(t) for f, t in zip(self.values, x)))

    def prox(self, tau, x):
        if self.proxes is None:
            raise NotImplementedError("no prox table for this separable function")
        x = self._check(x)
        return np.array([p(tau, t) for p, t in zip(self.proxes, x)], dtype=float)

    def subdiff(self, x):
        x = self._check(x)
        lo, hi = np.empty(self.n), np.empty(self.n)
        for k, (s, t) in enumerate(zip(self.subdiffs, x)):
            iv = s(t)
            if iv is None:
                return SetValue.empty_set(self.n)
            lo[k], hi[k] = iv
        return SetValue(np.zeros(self.n), lo, hi)


class DistanceMapSurrogate(ProxFunction):
    """The map ``T_C(u) = u - P_C(u)`` for a finite set ``C``.

    ``C`` may be nonconvex, so no prox is offered; :meth:`subdiff` returns a
    :class:`SetUnion` with one value per nearest point (ties included).
    """

    convex = False

    def __init__(self, C, tie_rtol: float = 1e-9):
        C = np.asarray(C, dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        if C.shape[0] == 0:
            raise ValueError("C must be nonempty")
        super().__init__(C.shape[1])
        self.C = C
        self.tie_rtol = tie_rtol

    def projections(self, u) -> np.ndarray:
        u = self._check(u)
        d = np.linalg.norm(self.C - u, axis=1)
        dmin = d.min()
        return self.C[d <= dmin * (1 + self.tie_rtol) + 1e-15]

    def value(self, u):
        u = self._check(u)
        return 0.5 * float(np.min(np.sum((self.C - u) ** 2, axis=1)))

    def prox(self, tau, x):
        raise NotImplementedError("prox may be set-valued; use T_C evaluation instead")

    def subdiff(self, u):
        u = self._check(u)
        return SetUnion([SetValue.point(u - p) for p in self.projections(u)], dim=self.n)


def eval_prox(f: ProxFunction, tau: float, x) -> np.ndarray:
    if tau <= 0:
        raise ValueError("step length must be positive")
    return f.prox(tau, x)


def eval_subdiff(f: ProxFunction, x):
    return f.subdiff(x)


# -- set-valued maps -----------------------------------------------------

class SetValuedMap:
    """A map ``u -> T(u)`` on ``R^dim`` returning SetValue or SetUnion values.

    ``resolvent(tau, u)`` is optional and returns ``(I + tau T)^{-1}(u)``.
    """

    def __init__(self, dim: int, fn: Callable, resolvent: Callable | None = None, name: str = ""):
        self.dim = int(dim)
        self._fn = fn
        self._resolvent = resolvent
        self.name = name or getattr(fn, "__name__", "map")

    def __call__(self, u):
        u = _vec(u)
        if u.size != self.dim:
            raise ValueError(f"map on R^{self.dim} evaluated at a vector of length {u.size}")
        return self._fn(u)

    def resolvent(self, tau: float, u) -> np.ndarray:
        if self._resolvent is None:
            raise NotImplementedError(f"no resolvent available for {self.name}")
        return np.asarray(self._resolvent(tau, _vec(u)), dtype=float)

    @property
    def has_resolvent(self) -> bool:
        return self._resolvent is not None

    def __repr__(self):
        return f"SetValuedMap({self.name!r}, dim={self.dim})"


def subdifferential_map(f: ProxFunction) -> SetValuedMap:
    """``u -> ∂f(u)`` with the prox of ``f`` as resolvent when available."""
    res = None if isinstance(f, DistanceMapSurrogate) else (lambda tau, u: f.prox(tau, u))
    return SetValuedMap(f.n, f.subdiff, res, name=type(f).__name__)


@dataclass
class SaddleProblem:
    """``min_x max_y G(x) + <Kx, y> - F*(y)``."""

    G: ProxFunction
    Fstar: ProxFunction
    K: np.ndarray

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        if self.K.shape != (self.Fstar.n, self.G.n):
            raise ValueError(f"K has shape {self.K.shape}, expected {(self.Fstar.n, self.G.n)}")

    @property
    def n(self) -> int:
        return self.G.n

    @property
    def m(self) -> int:
        return self.Fstar.n

    def split(self, u):
        if isinstance(u, PrimalDualVector):
            return u.x, u.y
        v = _vec(u)
        return v[: self.n], v[self.n:]

    def as_map(self) -> SetValuedMap:
        return SetValuedMap(self.n + self.m, lambda u: eval_H(self, u), name="H")


def eval_H(P: SaddleProblem, u) -> SetValue:
    """``H(u) = (∂G(x) + K^T y, ∂F*(y) - K x)`` in box form."""
    x, y = P.split(u)
    if x.size != P.n or y.size != P.m:
        raise ValueError("vector does not match the problem dimensions")
    gx = P.G.subdiff(x)
    fy = P.Fstar.subdiff(y)
    n, m = P.n, P.m
    if gx.empty or fy.empty:
        return SetValue.empty_set(n + m)
    offset = np.concatenate([gx.offset + P.K.T @ y, fy.offset - P.K @ x])
    lo = np.concatenate([gx.lo, fy.lo])
    hi = np.concatenate([gx.hi, fy.hi])
    rays = [np.concatenate([r, np.zeros(m)]) for r in gx.rays]
    rays += [np.concatenate([np.zeros(n), r]) for r in fy.rays]
    return SetValue(offset, lo, hi, np.array(rays) if rays else None)


def optimality_residual(P, u) -> float:
    """``dist(0, H(u))``; ``P`` is a SaddleProblem or a SetValuedMap."""
    S = eval_H(P, u) if isinstance(P, SaddleProblem) else P(u)
    d2 = dist2_to_setvalue(S, np.zeros(S.dim))
    return float(np.sqrt(d2)) if np.isfinite(d2) else np.inf


# -- solution sets ---------------------------------------------------------

@dataclass
class BoxPiece:
    """Axis-aligned product ``prod_k [lo_k, hi_k]``; equal ends pin a coordinate."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float).reshape(-1)
        self.hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ValueError("invalid box piece")


class SolutionSet:
    """A finite point list together with axis-aligned box pieces.

    Parameters
    ----------
    points : array_like, optional
        Rows are isolated elements.
    boxes : sequence of (lo, hi) or BoxPiece, optional
        Product sets; infinite ends are allowed in at most one coordinate per piece.
    """

    def __init__(self, points=None, boxes: Sequence = (), dim: int | None = None):
        if points is not None:
            pts = np.asarray(points, dtype=float)
            if pts.ndim == 1:
                # a flat array is one point unless the dimension says otherwise
                pts = pts.reshape(-1, dim) if dim else pts[None, :]
        else:
            pts = None
        self.boxes = [b if isinstance(b, BoxPiece) else BoxPiece(*b) for b in boxes]
        if dim is None:
            if pts is not None and pts.size:
                dim = pts.shape[1]
            elif self.boxes:
                dim = self.boxes[0].lo.size
            else:
                raise ValueError("empty solution set")
        self.dim = int(dim)
        self.points = np.zeros((0, self.dim)) if pts is None else pts.reshape(-1, self.dim)
        for b in self.boxes:
            if b.lo.size != self.dim:
                raise ValueError("box piece dimension mismatch")
        if self.points.shape[0] == 0 and not self.boxes:
            raise ValueError("empty solution set")

    @classmethod
    def finite(cls, points) -> "SolutionSet":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(points=pts)

    @classmethod
    def singleton(cls, u) -> "SolutionSet":
        u = _vec(u)
        return cls(points=u[None, :])

    @classmethod
    def product(cls, intervals: Sequence[Interval]) -> "SolutionSet":
        lo = [iv.lo for iv in intervals]
        hi = [iv.hi for iv in intervals]
        return cls(boxes=[BoxPiece(lo, hi)])

    def __repr__(self):
        return f"SolutionSet(points={self.points.tolist()}, boxes={[(b.lo.tolist(), b.hi.tolist()) for b in self.boxes]})"

    def representatives(self, limit: float = 1.0) -> np.ndarray:
        """Finite sample of elements: the points and the (clipped) box corners and centres."""
        out = [p for p in self.points]
        for b in self.boxes:
            lo = np.where(np.isfinite(b.lo), b.lo, np.where(np.isfinite(b.hi), b.hi - limit, -limit))
            hi = np.where(np.isfinite(b.hi), b.hi, lo + limit)
            for c in itertools.product(*zip(lo, hi)):
                out.append(np.array(c))
            out.append(0.5 * (lo + hi))
        return np.unique(np.array(out), axis=0)

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = _vec(u)
        if self.points.shape[0] and np.min(np.max(np.abs(self.points - u), axis=1)) <= tol:
            return True
        return any(np.all(u >= b.lo - tol) and np.all(u <= b.hi + tol) for b in self.boxes)

    def inf_quadratic(self, u, Q, g=None) -> tuple[float, np.ndarray]:
        """``inf_{u* in A} [ (u-u*)^T Q (u-u*) + g^T (u-u*) ]`` and a minimising ``u*``."""
        u = _vec(u)
        n = self.dim
        Qd = as_dense(Q, n)
        Qs = 0.5 * (Qd + Qd.T)
        g = np.zeros(n) if g is None else _vec(g)
        best, arg = np.inf, None
        if self.points.shape[0]:
            D = u - self.points
            vals = np.einsum("ij,jk,ik->i", D, Qs, D) + D @ g
            k = int(np.argmin(vals))
            best, arg = float(vals[k]), self.points[k]
        for b in self.boxes:
            # d = u - u*, u* in [lo, hi]  <=>  d in [u - hi, u - lo]
            val, d = min_quadratic_over_box(Qs, g, u - b.hi, u - b.lo)
            if val < best:
                best = val
                arg = None if d is None else u - d
        return best, arg

    def dist2(self, u, M) -> float:
        val, _ = self.inf_quadratic(u, M)
        return max(0.0, val)

    def inf_linear(self, u, g) -> float:
        """``inf_{u* in A} <g, u - u*>``."""
        return self.inf_quadratic(u, np.zeros((self.dim, self.dim)), g)[0]

    def argmins(self, u, M, tol: float = 1e-9) -> list[np.ndarray]:
        """All points of the finite part attaining the weighted distance (within ``tol``),
        plus the box-piece minimisers."""
        u = _vec(u)
        best = self.dist2(u, M)
        out = []
        Md = as_dense(M, self.dim)
        for p in self.points:
            d = u - p
            if d @ Md @ d <= best + tol:
                out.append(p)
        for b in self.boxes:
            val, d = min_quadratic_over_box(0.5 * (Md + Md.T), np.zeros(self.dim), u - b.hi, u - b.lo)
            if val <= best + tol and d is not None:
                out.append(u - d)
        return out


def _unbounded_below(Q, g, lo, hi, k, tol) -> bool:
    """Whether the quadratic decreases without bound along the infinite ends of coordinate ``k``."""
    others = [j for j in range(len(lo)) if j != k]
    for sign, end in ((1.0, hi[k]), (-1.0, lo[k])):
        if np.isfinite(end):
            continue
        qkk = Q[k, k]
        if qkk < -tol:
            return True
        if qkk <= tol:
            # slope along sign*e_k is sign*(g_k + 2 sum_j Q_kj d_j); minimise over the other box
            slope = sign * g[k]
            for j in others:
                c = 2.0 * sign * Q[k, j]
                slope += Interval(lo[j], hi[j]).inf_linear(c)
            if slope < -tol:
                return True
    return False


def min_quadratic_over_box(Q, g, lo, hi) -> tuple[float, np.ndarray | None]:
    """Exact ``min_{lo <= d <= hi} d^T Q d + g^T d`` by enumeration of faces.

    ``Q`` may be indefinite. At most one coordinate may have an infinite
    bound; if the quadratic is unbounded below the result is ``(-inf, None)``.
    The global minimum of a quadratic on a box is a stationary point on some
    face whose restricted Hessian is positive definite, or a vertex, so the
    enumeration is exact up to rounding.
    """
    Q = np.asarray(Q, dtype=float)
    Q = 0.5 * (Q + Q.T)
    g = np.asarray(g, dtype=float).reshape(-1)
    lo = np.asarray(lo, dtype=float).reshape(-1).copy()
    hi = np.asarray(hi, dtype=float).reshape(-1).copy()
    n = g.size
    scale = max(1.0, float(np.abs(Q).max(initial=0.0)), float(np.abs(g).max(initial=0.0)))
    tol = 1e-12 * scale
    inf_coords = [k for k in range(n) if not (np.isfinite(lo[k]) and np.isfinite(hi[k]))]
    if len(inf_coords) > 1:
        raise NotImplementedError("box with more than one unbounded coordinate")
    for k in inf_coords:
        if _unbounded_below(Q, g, lo, hi, k, tol):
            return -np.inf, None
        # bounded: the minimiser lies within a computable range; truncate
        others = [j for j in range(n) if j != k]
        reach = abs(g[k]) + sum(2 * abs(Q[k, j]) * max(abs(lo[j]), abs(hi[j])) for j in others)
        if Q[k, k] > tol:
            R = reach / (2 * Q[k, k]) + 1.0
        else:
            R = 1.0
        anchor = lo[k] if np.isfinite(lo[k]) else (hi[k] if np.isfinite(hi[k]) else 0.0)
        if Q[k, k] <= tol and not (np.isfinite(lo[k]) or np.isfinite(hi[k])):
            lo[k] = hi[k] = 0.0
            continue
        lo[k] = max(lo[k], min(anchor, -R) - 1.0) if not np.isfinite(lo[k]) else lo[k]
        hi[k] = min(hi[k], max(anchor, R) + 1.0) if not np.isfinite(hi[k]) else hi[k]

    def f(d):
        return float(d @ Q @ d + g @ d)

    fixed = lo == hi
    var = np.flatnonzero(~fixed)
    if var.size > 14:
        raise NotImplementedError("too many free coordinates for face enumeration")
    best, arg = np.inf, None
    for states in itertools.product((0, 1, 2), repeat=var.size):
        d = lo.copy()
        free = []
        for j, s in zip(var, states):
            if s == 0:
                d[j] = lo[j]
            elif s == 1:
                d[j] = hi[j]
            else:
                free.append(j)
        if free:
            F = np.array(free)
            QF = Q[np.ix_(F, F)]
            if np.linalg.eigvalsh(QF)[0] <= 1e-14 * scale:
                continue
            B = np.setdiff1d(np.arange(n), F)
            h = g[F] + 2.0 * Q[np.ix_(F, B)] @ d[B]
            dF = np.linalg.solve(QF, -0.5 * h)
            slack = 1e-12 * (1.0 + np.abs(lo[F]) + np.abs(hi[F]))
            if np.any(dF < lo[F] - slack) or np.any(dF > hi[F] + slack):
                continue
            d[F] = np.clip(dF, lo[F], hi[F])
        val = f(d)
        if val < best:
            best, arg = val, d
    return best, arg

"""Block vectors, structured 2x2 block operators and weighted geometry.

Everything here works on small dense problems. A point ``u = (x, y)`` is a
:class:`PrimalDualVector`; block operators of the shape ``[aI, bK^T; cK, dI]``
are :class:`StructuredOperator`. The weighted inner product uses the
convention ``<u, v>_T = <T u, v>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

PSD_CLAMP = 1e-12


class NotPSDError(ValueError):
    """Raised when a quadratic form is negative beyond the clamping band."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PrimalDualVector:
    """A point ``(x, y)`` with fixed primal/dual block sizes.

    ``m == 0`` is allowed and turns the vector into a plain primal vector.
    """

    x: np.ndarray
    y: np.ndarray = ()

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "y", _frozen(self.y))
        if self.x.size < 1:
            raise ValueError("primal block must have at least one entry")

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def m(self) -> int:
        return self.y.size

    @property
    def dims(self) -> tuple[int, int]:
        return self.n, self.m

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_flat(cls, v, n: int) -> "PrimalDualVector":
        v = np.asarray(v, dtype=float).reshape(-1)
        return cls(v[:n], v[n:])

    def _check(self, other: "PrimalDualVector"):
        if not isinstance(other, PrimalDualVector):
            return NotImplemented
        if other.dims != self.dims:
            raise ValueError(f"block dimensions differ: {self.dims} vs {other.dims}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return PrimalDualVector(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return PrimalDualVector(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float):
        return PrimalDualVector(s * self.x, s * self.y)

    __rmul__ = __mul__

    def __neg__(self):
        return PrimalDualVector(-self.x, -self.y)

    def dot(self, other: "PrimalDualVector") -> float:
        self._check(other)
        return float(self.x @ other.x + self.y @ other.y)

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))

    def __repr__(self):
        return f"PrimalDualVector(x={self.x.tolist()}, y={self.y.tolist()})"


@dataclass(frozen=True, eq=False)
class StructuredOperator:
    """The block operator ``[a I, b K^T; c K, d I]`` on ``R^n x R^m``.

    ``K`` is an ``m x n`` array or ``None``; without ``K`` the off-diagonal
    scales must vanish. Combinations that would leave this family raise
    ``ValueError``; use :meth:`to_dense` for an explicit dense form.
    """

    a: float
    d: float
    b: float = 0.0
    c: float = 0.0
    K: np.ndarray | None = None
    n: int = 1
    m: int = 0

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.K is None:
            if self.b != 0.0 or self.c != 0.0:
                raise ValueError("off-diagonal scales need a coupling matrix K")
        else:
            K = np.array(self.K, dtype=float)
            if K.ndim != 2:
                raise ValueError("K must be a matrix")
            K.setflags(write=False)
            object.__setattr__(self, "K", K)
            object.__setattr__(self, "m", K.shape[0])
            object.__setattr__(self, "n", K.shape[1])
        if self.n < 1 or self.m < 0:
            raise ValueError("invalid block dimensions")

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, n: int, m: int = 0, scale: float = 1.0) -> "StructuredOperator":
        return cls(a=scale, d=scale, n=n, m=m)

    @classmethod
    def block_diag(cls, a: float, d: float, n: int, m: int = 0) -> "StructuredOperator":
        return cls(a=a, d=d, n=n, m=m)

    # -- basic properties -------------------------------------------------
    @property
    def dims(self) -> tuple[int, int]:
        return self.n, self.m

    @property
    def dim(self) -> int:
        return self.n + self.m

    def is_self_adjoint(self) -> bool:
        return self.b == self.c

    def adjoint(self) -> "StructuredOperator":
        return StructuredOperator(self.a, self.d, self.c, self.b, self.K, self.n, self.m)

    def apply(self, u):
        """Closed-form ``T u``; accepts a PrimalDualVector or a flat array."""
        if isinstance(u, PrimalDualVector):
            if u.dims != self.dims:
                raise ValueError(f"operator dims {self.dims} vs vector dims {u.dims}")
            x, y = u.x, u.y
            wrap = True
        else:
            v = np.asarray(u, dtype=float).reshape(-1)
            if v.size != self.dim:
                raise ValueError(f"vector of length {v.size} for operator of size {self.dim}")
            x, y = v[: self.n], v[self.n:]
            wrap = False
        tx = self.a * x
        ty = self.d * y
        if self.K is not None:
            if self.b != 0.0:
                tx = tx + self.b * (self.K.T @ y)
            if self.c != 0.0:
                ty = ty + self.c * (self.K @ x)
        if wrap:
            return PrimalDualVector(tx, ty)
        return np.concatenate([tx, ty])

    __call__ = apply

    def to_dense(self) -> np.ndarray:
        n, m = self.n, self.m
        T = np.zeros((n + m, n + m))
        T[:n, :n] = self.a * np.eye(n)
        T[n:, n:] = self.d * np.eye(m)
        if self.K is not None:
            T[:n, n:] = self.b * self.K.T
            T[n:, :n] = self.c * self.K
        return T

    # -- algebra ----------------------------------------------------------
    def _coupling_with(self, other: "StructuredOperator"):
        if self.dims != other.dims:
            raise ValueError(f"operator dims differ: {self.dims} vs {other.dims}")
        if self.K is None:
            return other.K
        if other.K is None or other.K is self.K or np.array_equal(other.K, self.K):
            return self.K
        raise ValueError("operators use different coupling matrices")

    def __add__(self, other):
        if not isinstance(other, StructuredOperator):
            return NotImplemented
        K = self._coupling_with(other)
        return StructuredOperator(self.a + other.a, self.d + other.d, self.b + other.b,
                                  self.c + other.c, K, self.n, self.m)

    def __neg__(self):
        return StructuredOperator(-self.a, -self.d, -self.b, -self.c, self.K, self.n, self.m)

    def __sub__(self, other):
        if not isinstance(other, StructuredOperator):
            return NotImplemented
        return self + (-other)

    def __mul__(self, s: float):
        s = float(s)
        return StructuredOperator(s * self.a, s * self.d, s * self.b, s * self.c,
                                  self.K, self.n, self.m)

    __rmul__ = __mul__

    def __matmul__(self, other):
        """Composition ``self o other`` when it stays in the block family."""
        if not isinstance(other, StructuredOperator):
            return NotImplemented
        K = self._coupling_with(other)
        # K^T K and K K^T terms cannot be expressed in the family
        if self.b * other.c != 0.0 or self.c * other.b != 0.0:
            raise ValueError("composition produces K^T K terms; use to_dense()")
        return StructuredOperator(
            a=self.a * other.a,
            d=self.d * other.d,
            b=self.a * other.b + self.b * other.d,
            c=self.c * other.a + self.d * other.c,
            K=K, n=self.n, m=self.m,
        )

    def __repr__(self):
        return (f"StructuredOperator(a={self.a:g}, b={self.b:g}, c={self.c:g}, d={self.d:g}, "
                f"n={self.n}, m={self.m}, K={'yes' if self.K is not None else 'none'})")


def as_dense(T, dim: int | None = None) -> np.ndarray:
    """Dense square matrix from a StructuredOperator, array or scalar."""
    if isinstance(T, StructuredOperator):
        M = T.to_dense()
    elif np.isscalar(T):
        if dim is None:
            raise ValueError("a scalar weight needs the dimension")
        return float(T) * np.eye(dim)
    else:
        M = np.array(T, dtype=float)
        if M.ndim == 1:
            M = np.diag(M)
    if dim is not None and M.shape != (dim, dim):
        raise ValueError(f"weight of shape {M.shape} for dimension {dim}")
    return M


def _vec(u) -> np.ndarray:
    if isinstance(u, PrimalDualVector):
        return u.flat()
    return np.asarray(u, dtype=float).reshape(-1)


def _check_pair(u, v, T):
    if isinstance(T, StructuredOperator):
        for w in (u, v):
            if isinstance(w, PrimalDualVector) and w.dims != T.dims:
                raise ValueError(f"operator dims {T.dims} vs vector dims {w.dims}")


def weighted_inner_product(u, v, T) -> float:
    """``<T u, v>``."""
    _check_pair(u, v, T)
    uu, vv = _vec(u), _vec(v)
    if uu.size != vv.size:
        raise ValueError("vectors of different length")
    if isinstance(T, StructuredOperator):
        return float(T.apply(uu) @ vv)
    return float(as_dense(T, uu.size) @ uu @ vv)


def weighted_norm(u, T) -> float:
    """``sqrt(<T u, u>)``; small negative forms clamp to zero."""
    q = weighted_inner_product(u, u, T)
    uu = _vec(u)
    if q < -PSD_CLAMP * float(uu @ uu):
        raise NotPSDError(f"operator not PSD at point (quadratic form {q:.3e})")
    return float(np.sqrt(max(0.0, q)))


def dist_weighted_finite(u, A: Sequence, T) -> tuple[float, int]:
    """Weighted distance from ``u`` to a finite set ``A``; returns (distance, argmin index)."""
    if len(A) == 0:
        raise ValueError("distance to an empty set")
    best, idx = np.inf, -1
    for k, a in enumerate(A):
        if isinstance(u, PrimalDualVector):
            diff = u - a
        else:
            diff = _vec(u) - _vec(a)
        dk = weighted_norm(diff, T)
        if dk < best:
            best, idx = dk, k
    return best, idx


def psd_check(T, margin: float = 0.0, dim: int | None = None) -> tuple[bool, float]:
    """Smallest eigenvalue of the symmetric part of ``T`` and whether it is >= -margin."""
    M = as_dense(T, dim)
    S = 0.5 * (M + M.T)
    if S.size == 0:
        return True, 0.0
    lam = float(np.linalg.eigvalsh(S)[0])
    return lam >= -margin, lam


def psd_sqrt(W: np.ndarray) -> np.ndarray:
    """Symmetric square root of the PSD part of ``W`` (negative eigenvalues dropped)."""
    S = 0.5 * (W + W.T)
    lam, V = np.linalg.eigh(S)
    lam = np.clip(lam, 0.0, None)
    return (V * np.sqrt(lam)) @ V.T


def spectral_norm(K, rtol: float = 1e-10, max_iter: int = 10000, seed: int = 0) -> float:
    """``||K||`` by power iteration on ``K^T K``.

    Stops once the eigen-residual ``||K^T K v - lam v||`` drops below ``rtol * lam``.
    """
    K = np.asarray(K, dtype=float)
    if K.size == 0 or not np.any(K):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(K.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = K.T @ (K @ v)
        lam = float(v @ w)
        res = np.linalg.norm(w - lam * v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if res <= rtol * lam:
            break
    # Rayleigh quotient at the final vector
    lam = float(v @ (K.T @ (K @ v)))
    return float(np.sqrt(lam))


def three_point_gap(u_next, u, u_star, M) -> float:
    """Residual of ``<u+ - u, u+ - u*>_M = |u+ - u|^2/2 - |u - u*|^2/2 + |u+ - u*|^2/2``."""
    a = _vec(u_next) - _vec(u)
    lhs = weighted_inner_product(a, _vec(u_next) - _vec(u_star), M)
    Md = as_dense(M, a.size)

    def q(v):
        return float(Md @ v @ v)

    rhs = 0.5 * q(a) - 0.5 * q(_vec(u) - _vec(u_star)) + 0.5 * q(_vec(u_next) - _vec(u_star))
    return lhs - rhs

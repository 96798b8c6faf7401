"""Proximal point, forward-backward and PDHGM iterations with a convergence monitor.

Every method is written as the implicit step ``0 in W H(u+) + V'(u+) + M (u+ - u)``
with a testing operator ``Z``. :func:`run_with_monitor` runs a method and
records, per step, the weighted distances to the solution set together with
the residuals of the per-step inequalities that yield the descent inequality

    1/2 dist^2_{Z_{N+1} M_{N+1}}(u^N, A) <= 1/2 dist^2_{Z_1 M_1}(u^0, A).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import psd_check, spectral_norm
from .setvalued import (
    SaddleProblem,
    SetUnion,
    SetValue,
    SetValuedMap,
    SolutionSet,
    dist2_to_setvalue,
    eval_H,
    optimality_residual,
)

TRACE_HEADER = ["iter", "tau", "sigma", "phi", "psi", "omega", "dist2_euclid_primal",
                "dist2_zm", "ci_residual", "di_slack", "opt_residual"]


# -- step schedules ----------------------------------------------------------

@dataclass
class StepSchedule:
    """Step lengths and testing parameters for the PDHGM.

    Parameters
    ----------
    variant : {"constant", "accelerated", "linear"}
    tau0, sigma0 : float
        Initial primal and dual step lengths.
    gamma_tilde : float
        Acceleration factor (accelerated variant only), ``0 < gamma_tilde <= gamma``.
    gamma, rho : float
        Primal and dual strong submonotonicity constants.
    delta : float
        Lower-bound parameter in (0, 1).
    phi0 : float
        Initial primal testing parameter. The accelerated variant uses
        ``tau_i = phi_i^{-1/2}`` and so derives ``phi0 = tau0^{-2}``.
    K_norm : float
        Operator norm of the coupling matrix.

    The dual testing parameters follow from ``phi_i tau_i = psi_i sigma_i``.
    """

    variant: str
    tau0: float
    sigma0: float
    K_norm: float
    gamma_tilde: float = 0.0
    gamma: float = 0.0
    rho: float = 0.0
    delta: float = 0.5
    phi0: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.variant not in ("constant", "accelerated", "linear"):
            raise ValueError(f"unknown schedule '{self.variant}'")
        if self.tau0 <= 0 or self.sigma0 <= 0:
            raise ValueError("step lengths must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.gamma < 0 or self.rho < 0:
            raise ValueError("gamma and rho must be nonnegative")
        L2 = self.K_norm ** 2
        prod = (1.0 - self.delta) * self.tau0 * self.sigma0 * L2
        if self.variant == "constant":
            if prod > 1.0 * (1 + 1e-12):
                raise ValueError(f"constant schedule needs (1-delta) tau sigma |K|^2 <= 1, got {prod:.6g}")
        elif self.variant == "accelerated":
            if self.gamma_tilde <= 0:
                raise ValueError("accelerated schedule needs gamma_tilde > 0")
            if self.gamma_tilde > self.gamma * (1 + 1e-12):
                raise ValueError("accelerated schedule needs gamma_tilde <= gamma")
            if prod > 1.0 * (1 + 1e-12):
                raise ValueError(f"accelerated schedule needs (1-delta) tau0 sigma0 |K|^2 <= 1, got {prod:.6g}")
            self.phi0 = self.tau0 ** -2
        else:
            if self.gamma <= 0 or self.rho <= 0:
                raise ValueError("linear schedule needs gamma > 0 and rho > 0")
            if self.theta < prod * (1 - 1e-12):
                raise ValueError(f"linear schedule needs theta >= (1-delta) tau sigma |K|^2, got {self.theta:.6g} < {prod:.6g}")
        if self.phi0 <= 0:
            raise ValueError("phi0 must be positive")

    @property
    def theta(self) -> float:
        return 1.0 + min(self.rho * self.sigma0, self.gamma * self.tau0)

    def _accel(self, i: int):
        """Sequences (phi_j, tau_j, sigma_j) for j <= i of the accelerated variant."""
        seq = self._cache.setdefault("accel", [(self.phi0, self.tau0, self.sigma0)])
        while len(seq) <= i:
            phi, tau, sigma = seq[-1]
            phi_n = phi * (1.0 + self.gamma_tilde * tau)
            tau_n = phi_n ** -0.5
            seq.append((phi_n, tau_n, sigma * tau / tau_n))
        return seq

    def phi(self, i: int) -> float:
        if self.variant == "constant":
            return self.phi0
        if self.variant == "linear":
            return self.phi0 * self.theta ** i
        return self._accel(i)[i][0]

    def tau(self, i: int) -> float:
        if self.variant == "accelerated":
            return self._accel(i)[i][1]
        return self.tau0

    def sigma(self, i: int) -> float:
        if self.variant == "accelerated":
            return self._accel(i)[i][2]
        return self.sigma0

    def psi(self, i: int) -> float:
        return self.phi(i) * self.tau(i) / self.sigma(i)


def advance_schedule(s: StepSchedule, i: int):
    """``(tau_i, sigma_{i+1}, phi_i, psi_{i+1}, omega_i)`` for step ``i``."""
    if i < 0:
        raise ValueError("step index must be nonnegative")
    tau, sigma, phi, psi = s.tau(i), s.sigma(i + 1), s.phi(i), s.psi(i + 1)
    omega = phi * tau / (psi * sigma)
    return tau, sigma, phi, psi, omega


def step_condition_slacks(s: StepSchedule, i: int) -> dict:
    """Slacks (>= 0 when satisfied) of the four step-length conditions at step ``i``."""
    L2 = s.K_norm ** 2
    return {
        "phi_growth": s.phi(i) * (1 + s.gamma * s.tau(i)) - s.phi(i + 1),
        "psi_growth": s.psi(i + 1) * (1 + s.rho * s.sigma(i + 1)) - s.psi(i + 2),
        "coupling": -abs(s.phi(i) * s.tau(i) - s.psi(i) * s.sigma(i)),
        "psi_ratio": s.psi(i + 1) / s.psi(i) - (1 - s.delta) * s.tau(i) * s.sigma(i) * L2,
    }


# -- single steps ------------------------------------------------------------

def prox_point_step(T, tau: float, u) -> np.ndarray:
    """``u+ = (I + tau T)^{-1}(u)`` via the resolvent attached to ``T``."""
    if tau <= 0:
        raise ValueError("step length must be positive")
    if not getattr(T, "has_resolvent", False):
        raise NotImplementedError("no resolvent available for this map")
    return T.resolvent(tau, u)


def forward_backward_step(H0, grad_J: Callable, tau: float, u) -> np.ndarray:
    """``u+ = (I + tau H0)^{-1}(u - tau grad_J(u))``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return prox_point_step(H0, tau, u - tau * np.asarray(grad_J(u), dtype=float))


def pdhgm_step(P: SaddleProblem, tau: float, sigma: float, omega: float, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_new = P.G.prox(tau, x - tau * (P.K.T @ y))
    x_bar = omega * (x_new - x) + x_new
    y_new = P.Fstar.prox(sigma, y + sigma * (P.K @ x_bar))
    return x_new, y_new


# -- methods in implicit form -------------------------------------------------

class ProxPointMethod:
    """Basic proximal point method with testing ``Z_{i+1} = phi_i I``, ``phi_{i+1} = phi_i (1 + xi)``."""

    def __init__(self, T: SetValuedMap, tau: float, xi: float = 0.0, phi0: float = 1.0):
        if tau <= 0 or xi < 0 or phi0 <= 0:
            raise ValueError("invalid proximal point parameters")
        self.T, self.tau, self.xi, self.phi0 = T, float(tau), float(xi), float(phi0)
        self.dim = T.dim
        self.n = T.dim
        self.warnings: list[str] = []

    def phi(self, i):
        return self.phi0 * (1.0 + self.xi) ** i

    def params(self, i):
        return self.tau, math.nan, self.phi(i), math.nan, math.nan

    def operators(self, i):
        I = np.eye(self.dim)
        return {"Z": self.phi(i) * I, "M": I, "W": self.tau * I, "Xi": self.xi * I}

    def step(self, i, u):
        return prox_point_step(self.T, self.tau, u)

    def H(self, u):
        return self.T(u)

    def vprime(self, i, u, u_next):
        return None


class ForwardBackwardMethod(ProxPointMethod):
    """Forward-backward splitting for ``H = H0 + grad J``.

    ``L`` is the Lipschitz constant of ``grad J``; ``L tau > 2`` is allowed but
    recorded in :attr:`warnings`.
    """

    def __init__(self, H0: SetValuedMap, grad_J: Callable, L: float, tau: float,
                 xi: float = 0.0, phi0: float = 1.0):
        super().__init__(H0, tau, xi, phi0)
        self.grad_J = grad_J
        self.L = float(L)
        if self.L * self.tau > 2.0:
            msg = f"L*tau = {self.L * self.tau:.6g} exceeds 2"
            self.warnings.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)

    def step(self, i, u):
        return forward_backward_step(self.T, self.grad_J, self.tau, u)

    def H(self, u):
        S = self.T(u)
        g = np.asarray(self.grad_J(u), dtype=float)
        if isinstance(S, SetValue):
            return S.shifted(g)
        return SetUnion([p.shifted(g) for p in S.pieces], dim=S.dim)

    def vprime(self, i, u, u_next):
        return self.tau * (np.asarray(self.grad_J(u), float) - np.asarray(self.grad_J(u_next), float))


class PDHGMMethod:
    """PDHGM on a saddle problem with a :class:`StepSchedule`.

    The testing operator is ``Z_{i+1} = diag(phi_i I, psi_{i+1} I)``, the
    step operator ``W_{i+1} = diag(tau_i I, sigma_{i+1} I)``, and
    ``Z_{i+1} M_{i+1} = [phi_i I, -phi_i tau_i K^T; -phi_i tau_i K, psi_{i+1} I]``.
    """

    def __init__(self, P: SaddleProblem, schedule: StepSchedule):
        self.P, self.s = P, schedule
        self.n, self.m = P.n, P.m
        self.dim = P.n + P.m
        self.warnings: list[str] = []

    def params(self, i):
        return advance_schedule(self.s, i)

    def operators(self, i):
        tau, sigma, phi, psi, omega = advance_schedule(self.s, i)
        n, m, K = self.n, self.m, self.P.K
        M = np.block([[np.eye(n), -tau * K.T], [-(phi * tau / psi) * K, np.eye(m)]])
        Z = np.diag(np.concatenate([np.full(n, phi), np.full(m, psi)]))
        W = np.diag(np.concatenate([np.full(n, tau), np.full(m, sigma)]))
        Xi = np.block([[self.s.gamma * tau * np.eye(n), 2 * tau * K.T],
                       [-2 * sigma * K, self.s.rho * sigma * np.eye(m)]])
        return {"Z": Z, "M": M, "W": W, "Xi": Xi}

    def step(self, i, u):
        tau, sigma, phi, psi, omega = advance_schedule(self.s, i)
        x, y = pdhgm_step(self.P, tau, sigma, omega, u[: self.n], u[self.n:])
        return np.concatenate([x, y])

    def H(self, u):
        return eval_H(self.P, u)

    def vprime(self, i, u, u_next):
        return None


# -- monitor -------------------------------------------------------------------

@dataclass
class IterationTrace:
    """Per-iteration records; ``records[i]`` describes iterate ``u^i``."""

    records: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    diverged: bool = False
    stopped_on_tolerance: bool = False
    notes: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in self.records:
            row = [str(r["iter"])] + [format(float(r[k]), ".17g") for k in TRACE_HEADER[1:]]
            w.writerow(row)
        return buf.getvalue()


def _scale_set(S, W_diag, shift=None):
    """``W S + shift`` for a diagonal ``W``."""
    out = []
    for P in S.pieces:
        off = W_diag * P.offset + (0.0 if shift is None else shift)
        lo, hi = W_diag * P.lo, W_diag * P.hi
        out.append(SetValue(off, np.minimum(lo, hi), np.maximum(lo, hi), P.rays * W_diag))
    return SetUnion(out, dim=S.dim)


def _half_dist2(A: SolutionSet, u, W):
    ok, _ = psd_check(W, 1e-12)
    if not ok:
        return math.nan
    return 0.5 * A.dist2(u, W)


def run_with_monitor(method, sol: SolutionSet, u0, max_iter: int = 10000, stop_tol: float = 1e-12,
                     peb: tuple | None = None, combined_theta: float | None = None,
                     lemma_check: bool = True, keep_iterates: bool = False) -> IterationTrace:
    """Run ``method`` from ``u0`` and record the monitored quantities.

    Parameters
    ----------
    method : ProxPointMethod, ForwardBackwardMethod or PDHGMMethod
    sol : SolutionSet
        Solution set used for all distances.
    peb : (delta, P), optional
        Also record the partial error bound residual and, with
        ``combined_theta``, the combined residual.
    lemma_check : bool
        Record the residual of ``1/2|u+ - u|^2_{ZM} >= 1/2 dist^2(0, H~(u+))``
        in the metric ``Z^T (ZM)^{-1} Z`` whenever ``ZM`` is positive definite.

    Notes
    -----
    ``ci_residual`` is the full per-step condition with the increment
    ``-M(u+ - u)`` as the element of ``W H(u+) + V'(u+)``; it telescopes into
    ``di_slack``. ``ci_m_residual`` is the sufficient condition built from
    ``Xi`` and is stored in the records but not in the CSV.
    """
    u = np.asarray(u0, dtype=float).reshape(-1).copy()
    if u.size != method.dim:
        raise ValueError("initial point has the wrong dimension")
    trace = IterationTrace()
    n = method.n
    primal_w = np.diag(np.concatenate([np.ones(n), np.zeros(method.dim - n)]))

    def ZM_of(i):
        ops = method.operators(i)
        ZM = ops["Z"] @ ops["M"]
        return ops, 0.5 * (ZM + ZM.T)

    ops, ZM = ZM_of(0)
    half_d0 = _half_dist2(sol, u, ZM)
    d2e0 = sol.dist2(u, primal_w)
    i = 0
    while True:
        tau, sigma, phi, psi, omega = method.params(i)
        d2e = sol.dist2(u, primal_w)
        half_d = _half_dist2(sol, u, ZM)
        rec = {"iter": i, "tau": tau, "sigma": sigma, "phi": phi, "psi": psi, "omega": omega,
               "dist2_euclid_primal": d2e, "dist2_euclid": sol.dist2(u, np.eye(method.dim)),
               "dist2_zm": 2 * half_d,
               "ci_residual": math.nan, "ci_m_residual": math.nan, "lemma_residual": math.nan,
               "peb_residual": math.nan, "combined_residual": math.nan,
               "di_slack": half_d0 - half_d, "opt_residual": optimality_residual(method.H, u)}
        if math.isnan(half_d):
            trace.notes.append(f"indefinite metric at iteration {i}")
        trace.records.append(rec)
        if keep_iterates:
            trace.iterates.append(u.copy())
        if rec["opt_residual"] < stop_tol:
            trace.stopped_on_tolerance = True
            break
        if d2e0 > 0 and d2e > 1e6 * d2e0:
            trace.diverged = True
            trace.notes.append(f"divergence at iteration {i}")
            break
        if i >= max_iter:
            break
        u_next = method.step(i, u)
        ops_next, ZM_next = ZM_of(i + 1)
        _fill_step_residuals(method, rec, i, u, u_next, ops, ZM, ZM_next, sol, peb,
                             combined_theta, lemma_check)
        u, ops, ZM = u_next, ops_next, ZM_next
        i += 1
    return trace


def _fill_step_residuals(method, rec, i, u, u_next, ops, ZM, ZM_next, sol, peb, theta, lemma_check):
    Z, M, W, Xi = ops["Z"], ops["M"], ops["W"], ops["Xi"]
    step = u_next - u
    ok_now, _ = psd_check(ZM, 1e-12)
    ok_next, _ = psd_check(ZM_next, 1e-12)
    half_step = 0.5 * float(step @ ZM @ step)
    vp = method.vprime(i, u, u_next)
    # element of W H(u+) + V'(u+) singled out by the implicit step
    h = -M @ step
    if ok_now and ok_next:
        inner, _ = sol.inf_quadratic(u_next, 0.5 * ZM, Z.T @ h)
        rec["ci_residual"] = half_step + inner - 0.5 * sol.dist2(u_next, ZM_next)
        Q = Z @ (M + Xi)
        Q = 0.5 * (Q + Q.T) - ZM_next
        g = None if vp is None else Z.T @ vp
        inner_m, _ = sol.inf_quadratic(u_next, 0.5 * Q, g)
        rec["ci_m_residual"] = half_step + inner_m
        if peb is not None:
            delta, P = peb
            P = np.asarray(P, dtype=float)
            ZP = Z @ P
            ZP = 0.5 * (ZP + ZP.T)
            rec["peb_residual"] = (delta * 2 * half_step + sol.dist2(u_next, ZM_next - ZP)
                                   - sol.dist2(u_next, ZM_next))
            if theta is not None:
                Qc = Z @ (M + Xi + P)
                Qc = 0.5 * (Qc + Qc.T) - ZM_next
                val, _ = sol.inf_quadratic(u_next, 0.5 * Qc)
                rec["combined_residual"] = (1 - delta) * half_step + val
    if lemma_check:
        ok_pd, lam = psd_check(ZM, 0.0)
        if ok_pd and lam > 1e-14:
            Wd = np.diag(W)
            S = _scale_set(method.H(u_next), Wd, vp)
            weight = Z.T @ np.linalg.solve(ZM, Z)
            d2 = dist2_to_setvalue(S, np.zeros(u.size), 0.5 * (weight + weight.T))
            rec["lemma_residual"] = half_step - 0.5 * d2
        else:
            rec["lemma_residual"] = math.nan


# -- rate fitting --------------------------------------------------------------

@dataclass
class RateFit:
    kind: str
    rate: float
    r2: float
    finite_at: int | None = None

    def summary(self) -> str:
        if self.kind == "finite":
            return f"rate_kind=finite rate=0 r2=1 (finite convergence at iteration {self.finite_at})"
        return f"rate_kind={self.kind} rate={self.rate:.17g} r2={self.r2:.17g}"


def _linfit(t, v):
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((v - pred) ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return float(coef[0]), r2


def fit_rate(values, window: int = 200, iters=None, floor: float = 0.0,
             column: str = "dist2_euclid_primal") -> RateFit:
    """Fit ``log v_i`` against ``i`` (linear) and against ``log i`` (polynomial).

    ``values`` is an array or an :class:`IterationTrace`. The last ``window``
    records above ``floor`` are used; entries at or below ``floor`` are treated
    as numerical zero and dropped (an exact zero reports finite convergence).
    """
    if isinstance(values, IterationTrace):
        v = values.column(column)
        it = values.column("iter")
    else:
        v = np.asarray(values, dtype=float)
        it = np.arange(v.size, dtype=float) if iters is None else np.asarray(iters, dtype=float)
    zeros = np.flatnonzero(v == 0.0)
    if zeros.size:
        return RateFit("finite", 0.0, 1.0, int(it[zeros[0]]))
    keep = v > floor
    v, it = v[keep][-window:], it[keep][-window:]
    if v.size < 5:
        raise ValueError("need at least 5 positive records in the fit window")
    logv = np.log(v)
    slope_lin, r2_lin = _linfit(it, logv)
    if np.all(it > 0):
        slope_pol, r2_pol = _linfit(np.log(it), logv)
    else:
        slope_pol, r2_pol = math.nan, -math.inf
    if r2_lin >= r2_pol:
        return RateFit("linear", math.exp(slope_lin), r2_lin)
    return RateFit("polynomial", slope_pol, r2_pol)


def default_pdhgm_schedule(P: SaddleProblem, variant: str, gamma=0.0, rho=0.0, gamma_tilde=0.0,
                           delta: float = 0.5, step_scale: float = 0.99, tau0=None, sigma0=None,
                           seed: int = 0) -> StepSchedule:
    """Schedule with ``tau sigma |K|^2 = step_scale`` unless explicit steps are given."""
    L = spectral_norm(P.K, seed=seed)
    if tau0 is None and sigma0 is None:
        tau0 = sigma0 = math.sqrt(step_scale) / L if L > 0 else 1.0
    elif tau0 is None:
        tau0 = step_scale / (sigma0 * L * L)
    elif sigma0 is None:
        sigma0 = step_scale / (tau0 * L * L)
    return StepSchedule(variant, tau0, sigma0, L, gamma_tilde, gamma, rho, delta)

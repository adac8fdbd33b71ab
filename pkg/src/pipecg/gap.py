"""Rounding-error model for the drift between recursive and true residuals.

In finite precision the residual maintained by a CG recurrence drifts away
from the explicitly computed residual b - A*x. This module implements a
running statistical estimate of that gap for each solver variant:

* classical CG accumulates one local error term per iteration,
* the fused-reduction variant couples the residual gap to the gap on the
  recursively updated A*p product,
* the pipelined variant couples four gaps (residual, A*p vs s, A*u vs w,
  A*q vs z), which is what makes its accuracy loss so much larger.

Per-iteration bound factors are evaluated from vector norms that are one
iteration old (those norms are not available earlier in a pipelined, single
reduction implementation), so every estimate lags the iterate by one
iteration. The factors use the square-root rule of thumb for typical, as
opposed to worst-case, rounding error: a bound of the form c*eps enters the
estimate as sqrt(c)*eps. Matrix 2-norms are replaced by the computable
stand-in theta = sqrt(n)*inf_norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .precond import Preconditioner, identity
from .sparse import CsrMatrix, norm2, spmv

__all__ = [
    "BoundFactors",
    "GapState",
    "ModelConstants",
    "bound_factor_cg",
    "bound_factors_cgcg",
    "bound_factors_pipelined",
    "gap_reset_pipelined",
    "gap_step_cg",
    "gap_step_cgcg",
    "gap_step_pipelined",
    "initial_aux_gap_estimate",
    "initial_gap_estimate",
    "residual_and_gap",
    "true_gap_probe",
]

EPS_BINARY64 = 2.0 ** -52


@dataclass(frozen=True)
class ModelConstants:
    """Problem-level constants of the rounding-error model.

    theta is a computable stand-in for the matrix 2-norm. This library only
    handles symmetric matrices, where the sharp standard bound is
    |A|_2 <= inf_norm, so the default scaling is theta = inf_norm; the
    looser general-matrix form sqrt(n)*inf_norm is available as
    ``norm_scaling="general"``. mu is by default the maximum number of
    nonzeros in any row (``mu_from_row_sums=True`` switches to the maximum
    absolute row sum). zeta is the 2-norm of the right-hand side.
    """

    n: int
    epsilon: float
    theta: float
    mu: float
    zeta: float
    mode: str = "implicit"  # which e_j variant applies: explicit vs implicit M^{-1}
    mu_tilde: float = 0.0
    inv_norm: float = 1.0  # stand-in for the 2-norm of M^{-1} (explicit mode)

    @property
    def sqrt_n(self) -> float:
        return math.sqrt(self.n)

    @classmethod
    def from_problem(
        cls,
        A: CsrMatrix,
        M: Preconditioner | None,
        b: np.ndarray,
        epsilon: float = EPS_BINARY64,
        mu_from_row_sums: bool = False,
        norm_scaling: str = "sym",
    ) -> "ModelConstants":
        if M is None:
            M = identity(A.n)
        if norm_scaling not in ("sym", "general"):
            raise ValueError(f"unknown norm scaling {norm_scaling!r}")
        theta = A.inf_norm if norm_scaling == "sym" else math.sqrt(A.n) * A.inf_norm
        mu = float(A.inf_norm) if mu_from_row_sums else float(A.mu)
        if M.mode == "explicit":
            return cls(
                n=A.n,
                epsilon=epsilon,
                theta=theta,
                mu=mu,
                zeta=norm2(b),
                mode="explicit",
                mu_tilde=float(M.mu_tilde),
                inv_norm=M.inv_norm2_estimate(),
            )
        return cls(n=A.n, epsilon=epsilon, theta=theta, mu=mu, zeta=norm2(b), mode="implicit")


@dataclass(frozen=True)
class GapState:
    """Estimator state used by the pipelined solvers at iteration i.

    f_est, g_est, h_est, j_est estimate the norms of the four coupled gaps
    (residual, A*p vs s, A*u vs w, A*q vs z). The remaining fields cache the
    norms of the previous iteration's vectors (chi = |x|, pi = |p|,
    sigma = |s|, xi = |u|, omega = |w|, phi = |q|, psi = |z|, nu = |m|,
    rho = |r|) plus the norms and coefficients one iteration older still,
    which the cross-iteration bound factors need. Values that are not yet
    defined (before the second iteration) are NaN.
    """

    f_est: float
    g_est: float
    h_est: float
    j_est: float
    chi: float
    pi: float
    sigma: float
    xi: float
    omega: float
    phi: float
    psi: float
    nu: float
    rho: float
    pi_prev: float = math.nan
    sigma_prev: float = math.nan
    phi_prev: float = math.nan
    psi_prev: float = math.nan
    alpha_prev: float = math.nan
    beta_prev: float = math.nan


class BoundFactors(NamedTuple):
    """Per-iteration bound factors; e_g/e_j are NaN until iteration 2."""

    e_f: float
    e_g: float
    e_h: float
    e_j: float


def bound_factors_pipelined(state: GapState, consts: ModelConstants) -> BoundFactors:
    """Bound factors for one pipelined iteration, from cached norms.

    e_f bounds the local error feeding the residual gap, e_g the gap between
    A*p and the recursive s, e_h the gap between A*u and the recursive w,
    and e_j the gap between A*q and the recursive z. e_j comes in two
    variants: one written against the explicitly available preconditioned
    vector m (used when M^{-1} is not formed entrywise), and one using the
    norm of the explicit inverse operator.
    """
    for name in ("chi", "pi", "sigma", "xi", "omega", "phi", "psi", "nu", "rho"):
        if math.isnan(getattr(state, name)):
            raise ValueError(f"gap state is missing the cached norm {name!r} (called before iteration 1)")
    th = consts.theta
    a = abs(state.alpha_prev)
    e_f = th * state.chi + 2.0 * a * th * state.pi + state.rho + 2.0 * a * state.sigma
    e_h = th * state.xi + 2.0 * a * th * state.phi + state.omega + 2.0 * a * state.psi
    if math.isnan(state.pi_prev):
        return BoundFactors(e_f, math.nan, e_h, math.nan)
    bt = abs(state.beta_prev)
    e_g = th * state.xi + 2.0 * bt * th * state.pi_prev + state.omega + 2.0 * bt * state.sigma_prev
    if consts.mode == "explicit":
        e_j = (
            2.0 * bt * th * state.phi_prev
            + ((consts.mu + 2.0 * consts.mu_tilde) * consts.sqrt_n + 2.0) * th * consts.inv_norm * state.omega
            + 2.0 * bt * state.psi_prev
        )
    else:
        e_j = (
            (consts.mu * consts.sqrt_n + 2.0) * th * state.nu
            + 2.0 * bt * th * state.phi_prev
            + 2.0 * bt * state.psi_prev
        )
    return BoundFactors(e_f, e_g, e_h, e_j)


def gap_step_pipelined(
    state: GapState,
    factors: BoundFactors,
    alpha: float,
    beta: float,
    epsilon: float,
) -> GapState:
    """Advance the four coupled gap estimates by one iteration.

    alpha/beta are the coefficients of the iteration the cached norms belong
    to. The update is the nonnegative 4x4 recursion with square-rooted bound
    factors; with nonnegative inputs every component is monotone in the
    previous state.
    """
    a, b = abs(alpha), abs(beta)
    sf = math.sqrt(factors.e_f) * epsilon
    sg = math.sqrt(factors.e_g) * epsilon
    sh = math.sqrt(factors.e_h) * epsilon
    sj = math.sqrt(factors.e_j) * epsilon
    f = state.f_est + a * b * state.g_est + a * state.h_est + sf + a * sg
    g = b * state.g_est + state.h_est + sg
    h = state.h_est + a * b * state.j_est + sh + a * sj
    j = b * state.j_est + sj
    for v in (f, g, h, j):
        if not math.isfinite(v):
            raise FloatingPointError("gap estimate overflowed")
    return replace(state, f_est=f, g_est=g, h_est=h, j_est=j)


def gap_reset_pipelined(
    state: GapState,
    consts: ModelConstants,
    factors: BoundFactors,
    alpha: float,
) -> GapState:
    """Restart the estimates after an explicit residual recomputation.

    Also used on the first iteration, where the recursive quantities have
    just been seeded from explicitly computed vectors. Each term is the
    square-root-rule form of the corresponding fresh round-off bound; only
    e_f and e_h from ``factors`` are consumed.
    """
    eps = consts.epsilon
    ms = consts.mu * consts.sqrt_n
    th = consts.theta
    a = abs(alpha)
    f = (
        eps * math.sqrt((ms + 1.0) * th * state.chi + consts.zeta)
        + eps * math.sqrt(a * ms * th * state.pi)
        + math.sqrt(factors.e_f) * eps
    )
    g = eps * math.sqrt(ms * th * state.pi)
    h = (
        eps * math.sqrt(ms * th * state.xi)
        + eps * math.sqrt(a * ms * th * state.phi)
        + math.sqrt(factors.e_h) * eps
    )
    j = eps * math.sqrt(ms * th * state.phi)
    return replace(state, f_est=f, g_est=g, h_est=h, j_est=j)


# ---------------------------------------------------------------------------
# classical and fused-reduction variants (used for comparison figures)
# ---------------------------------------------------------------------------

def bound_factor_cg(chi: float, pi: float, rho: float, alpha: float, consts: ModelConstants) -> float:
    """Classical CG bound factor: only x and r are updated recursively."""
    return consts.theta * chi + (consts.mu * consts.sqrt_n + 4.0) * abs(alpha) * consts.theta * pi + rho


def gap_step_cg(f_est: float, e_f: float, epsilon: float) -> float:
    """Classical CG accumulates local errors without amplification."""
    return f_est + math.sqrt(e_f) * epsilon


def bound_factors_cgcg(
    chi: float,
    pi: float,
    sigma: float,
    rho: float,
    xi: float,
    pi_prev: float,
    sigma_prev: float,
    alpha: float,
    beta: float,
    consts: ModelConstants,
) -> tuple[float, float]:
    """Bound factors (e_f, e_g) for the fused-reduction variant.

    e_g bounds the local error feeding the gap between A*p and the recursive
    s. When the inverse preconditioner is implicit, the bound is written
    against the explicitly computed u = M^{-1} r (norm xi) instead of the
    unavailable operator norm, mirroring the pipelined e_j variants.
    """
    th = consts.theta
    a, bt = abs(alpha), abs(beta)
    e_f = th * chi + 2.0 * a * th * pi + rho + 2.0 * a * sigma
    if consts.mode == "explicit":
        e_g = (
            2.0 * bt * th * pi_prev
            + ((consts.mu + 2.0 * consts.mu_tilde) * consts.sqrt_n + 2.0) * th * consts.inv_norm * rho
            + 2.0 * bt * sigma_prev
        )
    else:
        e_g = (consts.mu * consts.sqrt_n + 2.0) * th * xi + 2.0 * bt * th * pi_prev + 2.0 * bt * sigma_prev
    return e_f, e_g


def gap_step_cgcg(
    f_est: float,
    g_est: float,
    e_f: float,
    e_g: float,
    alpha: float,
    beta: float,
    epsilon: float,
) -> tuple[float, float]:
    """Advance the coupled (residual, A*p vs s) gap estimates."""
    sf = math.sqrt(e_f) * epsilon
    sg = math.sqrt(e_g) * epsilon
    a, b = abs(alpha), abs(beta)
    return f_est + a * b * g_est + sf + a * sg, b * g_est + sg


def initial_gap_estimate(consts: ModelConstants, chi0: float) -> float:
    """Estimated round-off of the explicit initial residual b - A*x0."""
    return consts.epsilon * math.sqrt((consts.mu * consts.sqrt_n + 1.0) * consts.theta * chi0 + consts.zeta)


def initial_aux_gap_estimate(consts: ModelConstants, pi0: float) -> float:
    """Estimated round-off of an explicitly computed matrix-vector product."""
    return consts.epsilon * math.sqrt(consts.mu * consts.sqrt_n * consts.theta * pi0)


# ---------------------------------------------------------------------------
# instrumentation
# ---------------------------------------------------------------------------

def residual_and_gap(A: CsrMatrix, b: np.ndarray, x: np.ndarray, r: np.ndarray) -> tuple[float, float, np.ndarray]:
    """Fresh true residual norm, gap norm, and the residual vector itself."""
    t = b - spmv(A, x)
    return norm2(t), norm2(t - r), t


def true_gap_probe(A: CsrMatrix, b: np.ndarray, x: np.ndarray, r: np.ndarray) -> float:
    """Norm of (b - A*x) - r, computed fresh. Instrumentation only."""
    if x.shape[0] != A.n or r.shape[0] != A.n:
        raise ValueError("dimension mismatch in gap probe")
    return residual_and_gap(A, b, x, r)[1]

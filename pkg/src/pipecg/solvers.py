"""Conjugate gradient variants with a uniform, fully instrumented trace.

Four solvers share one interface:

* ``solve_cg``      -- classical preconditioned CG (two reduction groups
                       per iteration),
* ``solve_cgcg``    -- the fused-reduction variant with an extra recurrence
                       for s = A*p (one reduction group per iteration),
* ``solve_pcg``     -- the pipelined variant with recurrences for s, w, u,
                       q, z so the single reduction group can overlap the
                       matrix and preconditioner products,
* ``solve_pcg_rr``  -- the pipelined variant plus automated residual
                       replacement driven by the running gap estimate.

All recurrence arithmetic is plain binary64 with no extended-precision
accumulation; the rounding behavior of the recurrences is exactly the
quantity under study, so the solvers must not paper over it. True-residual
probes and norm bookkeeping are pure readouts and never feed back into the
iteration (the replacement step in ``solve_pcg_rr`` is the one deliberate
exception).

Stopping works in two modes: ``tolerance`` stops when the recursive
residual norm drops below ``tol_rel * |b|``; ``stagnation`` (the benchmark
mode) probes the true residual every iteration and stops once it has not
improved for ``stagnation_window`` consecutive iterations, reporting the
iterate that achieved the smallest probed residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace as _dc_replace

import numpy as np

from . import gap as _gap
from .gap import (
    BoundFactors,
    GapState,
    ModelConstants,
    bound_factor_cg,
    bound_factors_cgcg,
    bound_factors_pipelined,
    gap_reset_pipelined,
    gap_step_cg,
    gap_step_cgcg,
    gap_step_pipelined,
    initial_aux_gap_estimate,
    initial_gap_estimate,
    residual_and_gap,
)
from .precond import Preconditioner, identity
from .replacement import (
    REPLACEMENT_PREC_COST,
    REPLACEMENT_SPMV_COST,
    ReplacementPolicy,
    perform_replacement,
    should_replace,
)
from .sparse import CsrMatrix, as_vector, dot, norm2, spmv

__all__ = [
    "BreakdownError",
    "IterationRecord",
    "OpCounts",
    "REDUCTION_GROUPS",
    "SolveOptions",
    "SolveResult",
    "solve_cg",
    "solve_cgcg",
    "solve_pcg",
    "solve_pcg_rr",
]

#: Global reduction groups each variant needs per iteration. Classical CG
#: has two synchronization points; the fused and pipelined variants group
#: their dot products (and any bookkeeping norms) into a single one.
REDUCTION_GROUPS = {"cg": 2, "cgcg": 1, "pcg": 1, "pcgrr": 1}


class BreakdownError(RuntimeError):
    """The iteration collapsed: the matrix is not SPD or round-off was fatal."""


@dataclass(frozen=True, eq=False)
class SolveOptions:
    """Knobs shared by all solvers.

    ``stop_mode`` is "tolerance" or "stagnation". Stagnation mode forces
    true-residual probing and treats a probe as an improvement only when it
    beats the incumbent minimum by the relative margin ``stagnation_rtol``,
    which keeps noise at the attainable-accuracy floor from endlessly
    extending the run. ``x_exact``, when given, adds the A-norm error of
    each iterate to the trace.
    """

    tol_rel: float = 1e-8
    max_iter: int = 50_000
    stop_mode: str = "tolerance"
    stagnation_window: int = 50
    stagnation_rtol: float = 1e-2
    probe_true_residual: bool = False
    epsilon: float = _gap.EPS_BINARY64
    mu_from_row_sums: bool = False
    norm_scaling: str = "sym"
    x_exact: np.ndarray | None = None

    def __post_init__(self):
        if self.tol_rel < 0.0:
            raise ValueError("tol_rel must be nonnegative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be at least 1")
        if self.stop_mode not in ("tolerance", "stagnation"):
            raise ValueError(f"unknown stop mode {self.stop_mode!r}")

    @property
    def probing(self) -> bool:
        return self.probe_true_residual or self.stop_mode == "stagnation"


@dataclass
class IterationRecord:
    """Per-iterate trace entry (index 0 is the initial guess).

    ``estimated_gap_norm`` for the pipelined variants is produced one
    iteration late, so the last iterate's estimate stays None. ``alpha`` and
    ``beta`` are the coefficients computed during the iteration that
    produced the iterate.
    """

    iter: int
    recursive_residual_norm: float
    true_residual_norm: float | None = None
    true_gap_norm: float | None = None
    estimated_gap_norm: float | None = None
    error_anorm: float | None = None
    alpha: float | None = None
    beta: float | None = None
    replaced: bool = False


@dataclass
class GapTraceRow:
    """Estimator internals logged at loop index i of a pipelined solve."""

    i: int
    chi: float
    pi: float
    sigma: float
    xi: float
    omega: float
    phi: float
    psi: float
    nu: float
    rho: float
    rho_next: float
    pi_prev: float
    sigma_prev: float
    phi_prev: float
    psi_prev: float
    alpha_prev: float
    beta_prev: float
    e_f: float
    e_g: float
    e_h: float
    e_j: float
    f_est: float
    g_est: float
    h_est: float
    j_est: float
    reset: bool
    criterion_prev_below: bool
    criterion_cur_above: bool
    fired: bool


@dataclass
class OpCounts:
    """Operation tally of one solve; probes are counted separately."""

    spmv: int = 0
    prec_apply: int = 0
    probe_spmv: int = 0
    reduction_groups_per_iter: int = 0


@dataclass
class SolveResult:
    method: str
    x_final: np.ndarray
    status: str  # converged | stagnated | max_iter
    iterations: list[IterationRecord]
    replacement_count: int = 0
    argmin_true_residual: tuple[int, float] | None = None
    b_norm: float = 0.0
    op_counts: OpCounts = field(default_factory=OpCounts)
    gap_trace: list[GapTraceRow] | None = None

    @property
    def final_record(self) -> IterationRecord:
        return self.iterations[-1]


class _StagnationTracker:
    """Stops a run once the probed true residual stops improving."""

    def __init__(self, window: int, rtol: float):
        self.window = window
        self.rtol = rtol
        self.best_val = math.inf
        self.best_iter = 0
        self.best_x: np.ndarray | None = None
        self.since = 0

    def update(self, it: int, val: float, x: np.ndarray) -> bool:
        if val < self.best_val * (1.0 - self.rtol) or not math.isfinite(self.best_val):
            self.best_val = val
            self.best_iter = it
            self.best_x = x.copy()
            self.since = 0
        else:
            self.since += 1
        return self.since >= self.window


def _probe(A, b, x, r, x_exact, counts) -> tuple[float, float, float | None]:
    counts.probe_spmv += 1
    true_norm, gap_norm, t = residual_and_gap(A, b, x, r)
    err = None
    if x_exact is not None:
        # A-norm of the error via the probe residual: A(x_exact - x) = t up
        # to the round-off already present in b.
        err = math.sqrt(abs(dot(x_exact - x, t)))
    return true_norm, gap_norm, err


def _setup(A: CsrMatrix, M: Preconditioner | None, b, x0, opts: SolveOptions):
    b = as_vector(b, A.n)
    x = np.zeros(A.n) if x0 is None else as_vector(x0, A.n).copy()
    M = identity(A.n) if M is None else M
    if M.n != A.n:
        raise ValueError("preconditioner dimension does not match the matrix")
    consts = ModelConstants.from_problem(
        A, M, b,
        epsilon=opts.epsilon,
        mu_from_row_sums=opts.mu_from_row_sums,
        norm_scaling=opts.norm_scaling,
    )
    return b, x, M, consts, norm2(b)


def _finish(method, x, status, records, counts, tracker, opts, bnorm, replacements=0, gap_trace=None):
    argmin = None
    if tracker is not None and tracker.best_x is not None:
        argmin = (tracker.best_iter, tracker.best_val)
        if opts.stop_mode == "stagnation":
            x = tracker.best_x
    return SolveResult(
        method=method,
        x_final=x,
        status=status,
        iterations=records,
        replacement_count=replacements,
        argmin_true_residual=argmin,
        b_norm=bnorm,
        op_counts=counts,
        gap_trace=gap_trace,
    )


# ---------------------------------------------------------------------------
# classical CG
# ---------------------------------------------------------------------------

def solve_cg(
    A: CsrMatrix,
    M: Preconditioner | None,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    opts: SolveOptions = SolveOptions(),
) -> SolveResult:
    """Classical preconditioned CG with per-iterate instrumentation."""
    b, x, M, consts, bnorm = _setup(A, M, b, x0, opts)
    counts = OpCounts(reduction_groups_per_iter=REDUCTION_GROUPS["cg"])
    tracker = _StagnationTracker(opts.stagnation_window, opts.stagnation_rtol) if opts.probing else None

    r = b - spmv(A, x)
    counts.spmv += 1
    u = M.apply(r)
    counts.prec_apply += 1
    p = u.copy()
    gamma = dot(r, u)

    rec_norm = norm2(r)
    f_est = initial_gap_estimate(consts, norm2(x))
    records = [_first_record(A, b, x, r, rec_norm, f_est, opts, counts, tracker)]
    status = "max_iter"
    for i in range(opts.max_iter):
        if rec_norm == 0.0:
            status = "converged" if opts.stop_mode == "tolerance" else "stagnated"
            break
        s = spmv(A, p)
        counts.spmv += 1
        sp = dot(s, p)
        if sp <= 0.0:
            raise BreakdownError(f"cg: nonpositive curvature (s,p)={sp} at iteration {i}")
        alpha = gamma / sp

        e_f = bound_factor_cg(norm2(x), norm2(p), rec_norm, alpha, consts)
        f_est = gap_step_cg(f_est, e_f, opts.epsilon)

        x = x + alpha * p
        r = r - alpha * s
        u = M.apply(r)
        counts.prec_apply += 1
        gamma_next = dot(r, u)
        if gamma == 0.0:
            raise BreakdownError(f"cg: zero inner product (r,u) at iteration {i}")
        beta = gamma_next / gamma
        p = u + beta * p
        gamma = gamma_next

        rec_norm = norm2(r)
        rec = IterationRecord(i + 1, rec_norm, alpha=alpha, beta=beta, estimated_gap_norm=f_est)
        stop = _instrument(rec, A, b, x, r, opts, counts, tracker)
        records.append(rec)
        if stop:
            status = "stagnated"
            break
        if opts.stop_mode == "tolerance" and rec_norm <= opts.tol_rel * bnorm:
            status = "converged"
            break
    return _finish("cg", x, status, records, counts, tracker, opts, bnorm)


# ---------------------------------------------------------------------------
# fused-reduction (Chronopoulos/Gear style) CG
# ---------------------------------------------------------------------------

def solve_cgcg(
    A: CsrMatrix,
    M: Preconditioner | None,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    opts: SolveOptions = SolveOptions(),
) -> SolveResult:
    """CG with an extra recurrence for s = A*p and one fused reduction."""
    b, x, M, consts, bnorm = _setup(A, M, b, x0, opts)
    counts = OpCounts(reduction_groups_per_iter=REDUCTION_GROUPS["cgcg"])
    tracker = _StagnationTracker(opts.stagnation_window, opts.stagnation_rtol) if opts.probing else None

    r = b - spmv(A, x)
    u = M.apply(r)
    w = spmv(A, u)
    counts.spmv += 2
    counts.prec_apply += 1
    gamma = dot(r, u)
    delta = dot(w, u)

    rec_norm = norm2(r)
    f_est = initial_gap_estimate(consts, norm2(x))
    g_est = math.nan
    records = [_first_record(A, b, x, r, rec_norm, f_est, opts, counts, tracker)]
    p = s = None
    pi = sigma = math.nan
    alpha_prev = gamma_prev = math.nan
    status = "max_iter"
    for i in range(opts.max_iter):
        if rec_norm == 0.0:
            status = "converged" if opts.stop_mode == "tolerance" else "stagnated"
            break
        if i == 0:
            if delta == 0.0:
                raise BreakdownError("cgcg: zero inner product (w,u) at iteration 0")
            beta = 0.0
            alpha = gamma / delta
            p = u.copy()
            s = w.copy()
        else:
            if gamma_prev == 0.0 or gamma == 0.0:
                raise BreakdownError(f"cgcg: zero inner product (r,u) at iteration {i}")
            beta = gamma / gamma_prev
            denom = delta / gamma - beta / alpha_prev
            if denom == 0.0:
                raise BreakdownError(f"cgcg: zero step-length denominator at iteration {i}")
            alpha = 1.0 / denom
            p = u + beta * p
            s = w + beta * s

        pi_prev, sigma_prev = pi, sigma
        chi, xi = norm2(x), norm2(u)
        pi, sigma = norm2(p), norm2(s)
        if i == 0:
            e_f, _ = bound_factors_cgcg(chi, pi, sigma, rec_norm, xi, 0.0, 0.0, alpha, beta, consts)
            g_est = initial_aux_gap_estimate(consts, pi)
            f_est = (
                f_est
                + consts.epsilon * math.sqrt(abs(alpha) * consts.mu * consts.sqrt_n * consts.theta * pi)
                + math.sqrt(e_f) * opts.epsilon
            )
        else:
            e_f, e_g = bound_factors_cgcg(
                chi, pi, sigma, rec_norm, xi, pi_prev, sigma_prev, alpha, beta, consts
            )
            f_est, g_est = gap_step_cgcg(f_est, g_est, e_f, e_g, alpha, beta, opts.epsilon)

        x = x + alpha * p
        r = r - alpha * s
        u = M.apply(r)
        w = spmv(A, u)
        counts.spmv += 1
        counts.prec_apply += 1
        gamma_prev, alpha_prev = gamma, alpha
        gamma = dot(r, u)
        delta = dot(w, u)

        rec_norm = norm2(r)
        rec = IterationRecord(i + 1, rec_norm, alpha=alpha, beta=beta, estimated_gap_norm=f_est)
        stop = _instrument(rec, A, b, x, r, opts, counts, tracker)
        records.append(rec)
        if stop:
            status = "stagnated"
            break
        if opts.stop_mode == "tolerance" and rec_norm <= opts.tol_rel * bnorm:
            status = "converged"
            break
    return _finish("cgcg", x, status, records, counts, tracker, opts, bnorm)


# ---------------------------------------------------------------------------
# pipelined CG (with and without residual replacement)
# ---------------------------------------------------------------------------

def solve_pcg(
    A: CsrMatrix,
    M: Preconditioner | None,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    opts: SolveOptions = SolveOptions(),
) -> SolveResult:
    """Pipelined CG. The gap estimator runs but never feeds back."""
    return _pipelined(A, M, b, x0, opts, policy=None, method="pcg")


def solve_pcg_rr(
    A: CsrMatrix,
    M: Preconditioner | None,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    opts: SolveOptions = SolveOptions(),
    policy: ReplacementPolicy | None = None,
) -> SolveResult:
    """Pipelined CG with automated residual replacement.

    With ``policy.enabled`` False the trace is bitwise identical to
    ``solve_pcg``: the estimator still runs, only the feedback is cut.
    """
    return _pipelined(A, M, b, x0, opts, policy=policy or ReplacementPolicy(), method="pcgrr")


def _pipelined(
    A: CsrMatrix,
    M: Preconditioner | None,
    b: np.ndarray,
    x0: np.ndarray | None,
    opts: SolveOptions,
    policy: ReplacementPolicy | None,
    method: str,
) -> SolveResult:
    b, x, M, consts, bnorm = _setup(A, M, b, x0, opts)
    counts = OpCounts(reduction_groups_per_iter=REDUCTION_GROUPS[method])
    tracker = _StagnationTracker(opts.stagnation_window, opts.stagnation_rtol) if opts.probing else None
    tau = policy.tau if policy is not None else math.nan
    may_replace = policy is not None and policy.enabled

    r = b - spmv(A, x)
    u = M.apply(r)
    w = spmv(A, u)
    counts.spmv += 2
    counts.prec_apply += 1

    rec_norm = norm2(r)
    f_est = initial_gap_estimate(consts, norm2(x))
    g_est = h_est = j_est = math.nan
    records = [_first_record(A, b, x, r, rec_norm, f_est, opts, counts, tracker)]
    gap_trace: list[GapTraceRow] = []

    # norm caches: *_c hold norms of the current x, u, w, r for use one
    # iteration later; pi..nu are refreshed each iteration from the p, s, q,
    # z, m buffers, which still hold the previous iteration's vectors.
    chi_c = xi_c = omega_c = rho_c = math.nan
    pi = sigma = phi = psi = nu = math.nan
    p = s = q = z = m = None
    alpha_prev = beta_prev = gamma_prev = math.nan
    rho_top = rec_norm  # |r_i| at the top of iteration i
    replace_latch = False
    replacements = 0
    status = "max_iter"

    for i in range(opts.max_iter):
        if rec_norm == 0.0:
            status = "converged" if opts.stop_mode == "tolerance" else "stagnated"
            break
        gamma = dot(r, u)
        delta = dot(w, u)
        if i > 0:
            pi_prev, sigma_prev, phi_prev, psi_prev = pi, sigma, phi, psi
            pi, sigma, phi, psi, nu = norm2(p), norm2(s), norm2(q), norm2(z), norm2(m)
            chi, xi, omega, rho = chi_c, xi_c, omega_c, rho_c
        chi_c, xi_c, omega_c, rho_c = norm2(x), norm2(u), norm2(w), rho_top

        m = M.apply(w)
        v = spmv(A, m)
        counts.spmv += 1
        counts.prec_apply += 1

        if i == 0:
            if delta == 0.0:
                raise BreakdownError("pipelined cg: zero inner product (w,u) at iteration 0")
            beta = 0.0
            alpha = gamma / delta
            z = v.copy()
            q = m.copy()
            s = w.copy()
            p = u.copy()
        else:
            if gamma_prev == 0.0 or gamma == 0.0:
                raise BreakdownError(f"pipelined cg: zero inner product (r,u) at iteration {i}")
            beta = gamma / gamma_prev
            denom = delta / gamma - beta / alpha_prev
            if denom == 0.0:
                raise BreakdownError(f"pipelined cg: zero step-length denominator at iteration {i}")
            alpha = 1.0 / denom
            z = v + beta * z
            q = m + beta * q
            s = w + beta * s
            p = u + beta * p

        x = x + alpha * p
        r = r - alpha * s
        u = u - alpha * q
        w = w - alpha * z

        replaced = False
        if i > 0:
            f_prev = f_est
            state = GapState(
                f_est, g_est, h_est, j_est,
                chi, pi, sigma, xi, omega, phi, psi, nu, rho,
                pi_prev, sigma_prev, phi_prev, psi_prev,
                alpha_prev, beta_prev,
            )
            factors = bound_factors_pipelined(state, consts)
            was_reset = i == 1 or replace_latch
            if was_reset:
                state = gap_reset_pipelined(state, consts, factors, alpha_prev)
                replace_latch = False
            else:
                state = gap_step_pipelined(state, factors, alpha_prev, beta_prev, opts.epsilon)
            f_est, g_est, h_est, j_est = state.f_est, state.g_est, state.h_est, state.j_est
            records[i].estimated_gap_norm = f_est

            below_prev = f_prev <= tau * rho if may_replace else False
            above_cur = f_est > tau * rho_top if may_replace else False
            fire = (
                may_replace
                and should_replace(f_prev, rho, f_est, rho_top, tau)
                and (policy.max_replacements is None or replacements < policy.max_replacements)
            )
            if fire:
                r, u, w, s, q, z = perform_replacement(A, M, b, x, p)
                counts.spmv += REPLACEMENT_SPMV_COST
                counts.prec_apply += REPLACEMENT_PREC_COST
                replace_latch = True
                replaced = True
                replacements += 1
            gap_trace.append(GapTraceRow(
                i, chi, pi, sigma, xi, omega, phi, psi, nu, rho, rho_top,
                pi_prev, sigma_prev, phi_prev, psi_prev, alpha_prev, beta_prev,
                factors.e_f, factors.e_g, factors.e_h, factors.e_j,
                f_est, g_est, h_est, j_est, was_reset, below_prev, above_cur, fire,
            ))

        gamma_prev, alpha_prev, beta_prev = gamma, alpha, beta
        rec_norm = norm2(r)
        rho_top = rec_norm
        rec = IterationRecord(i + 1, rec_norm, alpha=alpha, beta=beta, replaced=replaced)
        stop = _instrument(rec, A, b, x, r, opts, counts, tracker)
        records.append(rec)
        if stop:
            status = "stagnated"
            break
        if opts.stop_mode == "tolerance" and rec_norm <= opts.tol_rel * bnorm:
            status = "converged"
            break
    return _finish(method, x, status, records, counts, tracker, opts, bnorm,
                   replacements=replacements, gap_trace=gap_trace)


# ---------------------------------------------------------------------------
# shared bookkeeping
# ---------------------------------------------------------------------------

def _first_record(A, b, x, r, rec_norm, f_est, opts, counts, tracker) -> IterationRecord:
    rec = IterationRecord(0, rec_norm, estimated_gap_norm=f_est)
    _instrument(rec, A, b, x, r, opts, counts, tracker)
    return rec


def _instrument(rec, A, b, x, r, opts, counts, tracker) -> bool:
    """Attach probe data to a record; returns True when stagnation stops."""
    if not opts.probing:
        return False
    true_norm, gap_norm, err = _probe(A, b, x, r, opts.x_exact, counts)
    rec.true_residual_norm = true_norm
    rec.true_gap_norm = gap_norm
    rec.error_anorm = err
    if tracker is None or opts.stop_mode != "stagnation":
        return False
    return tracker.update(rec.iter, true_norm, x)

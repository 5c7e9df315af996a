"""MSE-minimizing power allocation by spectral projected gradient.

The feasible set is ``{p : sum(p) = P_T, p_min <= p_i <= P_max}``. The
objective is strictly convex there, so the minimizer is unique and any
stationary point found is global.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleConstraintsError
from .estimation import EstimationProblem, equal_allocation, error_covariance

__all__ = [
    "OptimizerConfig",
    "OptimizationResult",
    "objective",
    "mse_gradient",
    "project_capped_simplex",
    "projected_gradient_norm",
    "optimize",
    "convergence_gap",
]

log = logging.getLogger(__name__)

_ARMIJO = 1e-4
_MAX_BACKTRACKS = 60
_STALL_WINDOW = 5


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 5000
    g_tol: float = 1e-9
    f_tol: float = 1e-12
    step_rule: str = "armijo"  # or "fixed"
    fixed_step: float = 1.0
    initial: np.ndarray | None = field(default=None, repr=False)
    form: str = "direct"  # objective: "direct" (E) or "circulant_equiv" (E_equiv)

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.g_tol > 0 and self.f_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.step_rule not in ("armijo", "fixed"):
            raise ValueError(f"unknown step rule {self.step_rule!r}")


@dataclass
class OptimizationResult:
    p_opt: np.ndarray
    mse_opt: float
    iterations: int
    converged: bool
    pg_norm: float
    mse_initial: float
    history: list = field(default_factory=list, repr=False)


def objective(problem: EstimationProblem, p, form: str = "direct"):
    """Return ``(E(p), M)``, the MSE and the error covariance it came from."""
    M = error_covariance(problem.covariance(form), p, problem.sigma2, form)
    return float(np.trace(M)) / problem.n, M


def _gradient_from_cov(M, sigma2):
    # dE/dp_i = -(1/(n sigma2)) * ||M e_i||^2
    return -np.sum(M * M, axis=0) / (M.shape[0] * sigma2)


def mse_gradient(problem: EstimationProblem, p, form: str = "direct") -> np.ndarray:
    """Gradient of the windowed MSE with respect to the powers.

    From ``M = (R^{-1} + diag(p)/sigma2)^{-1}``,
    ``dM/dp_i = -M e_i e_i^T M / sigma2``, hence
    ``dE/dp_i = -||M e_i||^2 / (n sigma2)``. Every entry is negative.
    """
    _, M = objective(problem, p, form)
    return _gradient_from_cov(M, problem.sigma2)


def project_capped_simplex(y, total: float, lo: float, hi: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto ``{x : sum x = total, lo <= x <= hi}``.

    The solution is ``clip(y - tau, lo, hi)`` for the scalar ``tau`` where the
    clipped sum hits ``total``. That sum is piecewise linear and
    non-increasing in ``tau`` with kinks at ``y - hi`` and ``y - lo``; bisect
    over the sorted kinks, then solve the bracketing linear piece exactly.
    O(n log n).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if not (n * lo <= total * (1 + 1e-12) and total <= n * hi * (1 + 1e-12)):
        raise InfeasibleConstraintsError(
            f"no point with sum {total} in [{lo}, {hi}]^{n}"
        )

    def clipped_sum(tau):
        return np.clip(y - tau, lo, hi).sum()

    kinks = np.sort(np.concatenate([y - hi, y - lo]))
    # clipped_sum(kinks[0]) = n*hi >= total >= n*lo = clipped_sum(kinks[-1])
    a, b = 0, kinks.size - 1
    while b - a > 1:
        mid = (a + b) // 2
        if clipped_sum(kinks[mid]) >= total:
            a = mid
        else:
            b = mid
    t_lo, t_hi = kinks[a], kinks[b]
    t_mid = 0.5 * (t_lo + t_hi)
    at_hi = y - t_mid >= hi
    at_lo = y - t_mid <= lo
    free = ~(at_hi | at_lo)
    n_free = np.count_nonzero(free)
    if n_free == 0:
        tau = t_lo
    else:
        fixed = hi * np.count_nonzero(at_hi) + lo * np.count_nonzero(at_lo)
        tau = (y[free].sum() + fixed - total) / n_free
        tau = min(max(tau, t_lo), t_hi)
    x = np.clip(y - tau, lo, hi)
    # remove the last few ulps of sum error on the free coordinates
    if n_free:
        x[free] += (total - x.sum()) / n_free
    return x


def projected_gradient_norm(p, g, total, lo, hi) -> float:
    """``||p - P(p - g)||``; zero exactly at constrained stationary points."""
    return float(np.linalg.norm(p - project_capped_simplex(p - g, total, lo, hi)))


def optimize(
    problem: EstimationProblem,
    config: OptimizerConfig | None = None,
    *,
    gradient=None,
) -> OptimizationResult:
    """Minimize the windowed MSE over the feasible power allocations.

    Uses projected gradient steps with Barzilai-Borwein step lengths and
    monotone Armijo backtracking along the projected direction. Stops when
    the projected-gradient norm drops below ``g_tol`` or the objective
    decreases by at most ``f_tol`` over ``_STALL_WINDOW`` iterations. On
    hitting ``max_iterations`` the result comes back with
    ``converged=False``.

    ``gradient(problem, p, form)`` replaces the analytic gradient (probes use
    this for fault injection).
    """
    config = config or OptimizerConfig()
    n, total = problem.n, problem.total_power
    lo, hi = problem.p_min, problem.peak_power
    form = config.form

    if config.initial is None:
        p = equal_allocation(problem)
    else:
        p = project_capped_simplex(config.initial, total, lo, hi)

    f, M = objective(problem, p, form)
    f_init = f
    if n == 1 or total >= n * hi * (1 - 1e-15):
        # a single feasible point
        return OptimizationResult(p, f, 0, True, 0.0, f_init, [f])

    def grad(p, M):
        if gradient is not None:
            return np.asarray(gradient(problem, p, form), dtype=float)
        return _gradient_from_cov(M, problem.sigma2)

    g = grad(p, M)
    pg = projected_gradient_norm(p, g, total, lo, hi)
    alpha = 1.0 / max(np.max(np.abs(g)), 1e-300) if config.step_rule == "armijo" else config.fixed_step
    alpha_min, alpha_max = 1e-12, 1e12
    history = [f]
    converged = False
    it = 0
    while it < config.max_iterations:
        if pg <= config.g_tol:
            converged = True
            break
        d = project_capped_simplex(p - alpha * g, total, lo, hi) - p
        slope = float(g @ d)
        t = 1.0
        f_new, M_new = objective(problem, p + d, form)
        if config.step_rule == "armijo":
            for _ in range(_MAX_BACKTRACKS):
                if f_new <= f + _ARMIJO * t * slope:
                    break
                t *= 0.5
                f_new, M_new = objective(problem, p + t * d, form)
            else:
                # no representable decrease left: objective has stalled
                converged = True
                break
        it += 1
        p_new = p + t * d
        # keep the iterate exactly on the affine constraint
        p_new = np.clip(p_new, lo, hi)
        p_new += (total - p_new.sum()) / n
        g_new = grad(p_new, M_new)
        s, yv = p_new - p, g_new - g
        sy = float(s @ yv)
        alpha = (float(s @ s) / sy) if sy > 0 else alpha_max
        alpha = min(max(alpha, alpha_min), alpha_max)
        if config.step_rule == "fixed":
            alpha = config.fixed_step
        p, f, g = p_new, f_new, g_new
        history.append(f)
        pg = projected_gradient_norm(p, g, total, lo, hi)
        if len(history) > _STALL_WINDOW and history[-1 - _STALL_WINDOW] - f <= config.f_tol:
            converged = True
            break
    else:
        converged = pg <= config.g_tol

    if not converged:
        log.warning(
            "optimizer did not converge for n=%d after %d iterations (pg=%.3g)", n, it, pg
        )
    return OptimizationResult(p, f, it, converged, pg, f_init, history)


def convergence_gap(problem: EstimationProblem, config: OptimizerConfig | None = None) -> float:
    """``E(p_eq) - E(p_opt)``, the optimizer started from equal power."""
    config = config or OptimizerConfig()
    p_eq = equal_allocation(problem)
    e_eq, _ = objective(problem, p_eq, config.form)
    res = optimize(problem, config)
    return e_eq - res.mse_opt

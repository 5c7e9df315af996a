"""Wiener-filter error covariance and windowed MSE for power-controlled samples.

Observations are ``y_i = x_i + z_i`` with ``z_i ~ N(0, sigma2 / p_i)``, already
normalized by ``sqrt(p_i)``; the unnormalized model is never represented.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .acf import DEFAULT_COVERAGE, AcfModel, SamplingGrid, acf_sequence, nyquist_rate
from .errors import ConstraintViolationError, InfeasibleConstraintsError

__all__ = [
    "EstimationProblem",
    "MseReport",
    "FORMS",
    "P_MIN_FRACTION",
    "check_allocation",
    "equal_allocation",
    "error_covariance",
    "mse",
    "mse_equiv",
]

FORMS = ("direct", "inverse_sum", "circulant_equiv")

# powers below P_MIN_FRACTION * P_T / n count as zero (constraint violation)
P_MIN_FRACTION = 1e-12
_SUM_RTOL = 1e-10
_PEAK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class EstimationProblem:
    """ACF, sampling grid, noise variance and power constraints.

    ``total_power`` is P_T (sum of the n per-sample powers) and
    ``peak_power`` is P_max (bound on each one).
    """

    acf: AcfModel
    grid: SamplingGrid
    sigma2: float = 1.0
    total_power: float | None = None
    peak_power: float | None = None

    def __post_init__(self):
        n = self.grid.n
        total = float(n if self.total_power is None else self.total_power)
        peak = float(10 * total / n if self.peak_power is None else self.peak_power)
        for name, value in (("sigma2", self.sigma2), ("total_power", total), ("peak_power", peak)):
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if total > n * peak * (1 + _PEAK_RTOL):
            raise InfeasibleConstraintsError(
                f"total power {total} exceeds n * peak = {n} * {peak}"
            )
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "total_power", total)
        object.__setattr__(self, "peak_power", peak)

    @classmethod
    def sampled(
        cls,
        acf: AcfModel,
        n: int,
        *,
        rate: float | None = None,
        coverage: float = DEFAULT_COVERAGE,
        sigma2: float = 1.0,
        rho: float = 1.0,
        peak_power: float | None = None,
        peak_multiple: float = 10.0,
    ) -> "EstimationProblem":
        """Problem sampled at ``rate`` (default: the model's Nyquist rate).

        Total power is ``rho * n``; the peak defaults to ``peak_multiple * rho``.
        """
        if rate is None:
            rate = nyquist_rate(acf, coverage)
        peak = peak_multiple * rho if peak_power is None else peak_power
        return cls(acf, SamplingGrid.at_rate(rate, n), sigma2, rho * n, peak)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def p_min(self) -> float:
        return P_MIN_FRACTION * self.total_power / self.n

    @cached_property
    def seq(self) -> np.ndarray:
        return acf_sequence(self.acf, self.grid)

    @property
    def r0(self) -> float:
        return float(self.seq[0])

    @cached_property
    def toeplitz(self) -> linalg.ToeplitzCov:
        return linalg.build_toeplitz(self.seq)

    @cached_property
    def circulant(self) -> linalg.CirculantEquiv:
        return linalg.build_circulant_equiv(self.seq)

    def covariance(self, form: str = "direct"):
        if form not in FORMS:
            raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
        return self.circulant if form == "circulant_equiv" else self.toeplitz


@dataclass(frozen=True)
class MseReport:
    mse: float
    per_sample_mse: np.ndarray = field(repr=False)
    which_form: str
    r0: float = 1.0

    @property
    def normalized_mse(self) -> float:
        """MSE in units of the process variance R(0)."""
        return self.mse / self.r0


def check_allocation(problem: EstimationProblem, p) -> np.ndarray:
    """Return ``p`` as a float array, or raise ConstraintViolationError."""
    p = np.asarray(p, dtype=float)
    if p.shape != (problem.n,):
        raise ConstraintViolationError(
            f"allocation must have length {problem.n}, got shape {p.shape}"
        )
    if not np.all(np.isfinite(p)):
        raise ConstraintViolationError("allocation entries must be finite")
    if np.any(p < problem.p_min):
        i = int(np.argmin(p))
        raise ConstraintViolationError(f"power p[{i}] = {p[i]} is not positive")
    if np.any(p > problem.peak_power * (1 + _PEAK_RTOL)):
        i = int(np.argmax(p))
        raise ConstraintViolationError(
            f"power p[{i}] = {p[i]} exceeds peak {problem.peak_power}"
        )
    total = p.sum()
    if abs(total - problem.total_power) > _SUM_RTOL * problem.total_power:
        raise ConstraintViolationError(
            f"allocation sums to {total}, expected {problem.total_power}"
        )
    return p


def equal_allocation(problem: EstimationProblem) -> np.ndarray:
    """Every sample gets ``P_T / n``."""
    level = problem.total_power / problem.n
    if level > problem.peak_power * (1 + _PEAK_RTOL):
        raise InfeasibleConstraintsError(
            f"equal power {level} exceeds peak {problem.peak_power}"
        )
    return np.full(problem.n, level)


def error_covariance(R, p, sigma2: float, form: str = "direct") -> np.ndarray:
    """Wiener error covariance for signal covariance ``R`` and powers ``p``.

    ``form="direct"`` evaluates ``R - R (R + D)^{-1} R`` with
    ``D = diag(sigma2 / p)``; it never inverts ``R`` and stays well behaved
    when some ``p_i`` is tiny. ``form="inverse_sum"`` evaluates
    ``(R^{-1} + D^{-1})^{-1}`` and exists as an independent check.
    No constraint checking beyond ``p > 0``.
    """
    Rd = R.dense if hasattr(R, "dense") else np.asarray(R, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape != (Rd.shape[0],) or np.any(~(p > 0)) or not np.all(np.isfinite(p)):
        raise ConstraintViolationError("powers must be positive, finite, and match R")
    if form == "inverse_sum":
        M = linalg.spd_inverse(linalg.spd_inverse(Rd) + np.diag(p / sigma2))
    elif form in ("direct", "circulant_equiv"):
        A = Rd.copy()
        A[np.diag_indices_from(A)] += sigma2 / p
        M = Rd - Rd @ linalg.spd_solve(A, Rd)
        M = 0.5 * (M + M.T)
    else:
        raise ValueError(f"unknown form {form!r}")
    return M


def _report(problem, p, form):
    M = error_covariance(problem.covariance(form), p, problem.sigma2, form)
    d = np.diag(M).copy()
    return MseReport(float(d.mean()), d, form, problem.r0)


def mse(problem: EstimationProblem, p, form: str = "direct") -> MseReport:
    """Windowed MSE ``trace(M_n) / n`` using the Toeplitz covariance."""
    p = check_allocation(problem, p)
    if form == "circulant_equiv":
        return mse_equiv(problem, p)
    return _report(problem, p, form)


def mse_equiv(problem: EstimationProblem, p) -> MseReport:
    """``trace((C_n^{-1} + D_n^{-1})^{-1}) / n`` with the circulant equivalent C_n."""
    p = check_allocation(problem, p)
    return _report(problem, p, "circulant_equiv")

"""Numerical diagnostics for the Toeplitz/circulant equivalence argument.

Nothing here proves an asymptotic statement. The functions check, at finite
``n``, the inequalities the argument is built from, and measure how fast the
Toeplitz and circulant quantities approach each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import linalg
from .acf import AcfModel, Exponential, SamplingGrid, Tabulated, acf_sequence
from .errors import DiagnosticFailure, NonPositiveEigenvalueError
from .estimation import EstimationProblem, error_covariance
from .optimizer import mse_gradient, objective

__all__ = [
    "EquivalenceReport",
    "equivalence_report",
    "NormRow",
    "NormTable",
    "norm_boundedness_probe",
    "SymmetryResult",
    "cyclic_symmetry_probe",
    "decay_slope",
    "random_problem",
    "random_allocation",
    "ProbeResult",
    "PROBES",
    "run_lemma_suite",
]

INEQUALITY_SLACK = 1e-9
SYMMETRY_RTOL = 1e-12


def _exceeds(lhs, rhs, slack=INEQUALITY_SLACK):
    return lhs > rhs + slack * max(1.0, abs(rhs))


@dataclass(frozen=True)
class EquivalenceReport:
    n: int
    strong_R: float
    strong_C: float
    strong_R_inv: float
    strong_C_inv: float
    strong_L: float
    strong_M: float
    weak_C_R: float
    weak_Cinv_Rinv: float
    weak_L_M: float
    trace_gap: float

    @property
    def inverse_bound(self) -> float:
        """``||C^-1|| ||R^-1|| |C - R|``, bounds ``weak_Cinv_Rinv``."""
        return self.strong_C_inv * self.strong_R_inv * self.weak_C_R

    @property
    def chained_bound(self) -> float:
        """``||L|| ||M|| ||C^-1|| ||R^-1|| |C - R|``, bounds ``weak_L_M``."""
        return self.strong_L * self.strong_M * self.inverse_bound


def equivalence_report(problem: EstimationProblem, p) -> EquivalenceReport:
    """Norms and gaps between the Toeplitz and circulant sides at this ``n``.

    ``M = (R^-1 + D^-1)^-1`` and ``L = (C^-1 + D^-1)^-1``. Raises
    DiagnosticFailure if ``|C^-1 - R^-1| <= ||C^-1|| ||R^-1|| |C - R|`` or
    ``|trace(L - M)| / n <= |L - M|`` fails by more than the slack.
    """
    p = np.asarray(p, dtype=float)
    R, C = problem.toeplitz.dense, problem.circulant.dense
    M = error_covariance(R, p, problem.sigma2)
    L = error_covariance(C, p, problem.sigma2)
    R_inv, C_inv = linalg.spd_inverse(R), linalg.spd_inverse(C)
    eig_R = np.linalg.eigvalsh(R)
    eig_C = problem.circulant.eigenvalues
    rep = EquivalenceReport(
        n=problem.n,
        strong_R=float(eig_R[-1]),
        strong_C=float(eig_C.max()),
        strong_R_inv=float(1 / eig_R[0]),
        strong_C_inv=float(1 / eig_C.min()),
        strong_L=linalg.strong_norm(L),
        strong_M=linalg.strong_norm(M),
        weak_C_R=linalg.weak_norm(C - R),
        weak_Cinv_Rinv=linalg.weak_norm(C_inv - R_inv),
        weak_L_M=linalg.weak_norm(L - M),
        trace_gap=abs(float(np.trace(L - M))) / problem.n,
    )
    if _exceeds(rep.weak_Cinv_Rinv, rep.inverse_bound):
        raise DiagnosticFailure(
            f"n={rep.n}: |C^-1 - R^-1| = {rep.weak_Cinv_Rinv:.6g} exceeds "
            f"||C^-1|| ||R^-1|| |C - R| = {rep.inverse_bound:.6g}"
        )
    if _exceeds(rep.trace_gap, rep.weak_L_M):
        raise DiagnosticFailure(
            f"n={rep.n}: |trace(L - M)|/n = {rep.trace_gap:.6g} exceeds "
            f"|L - M| = {rep.weak_L_M:.6g}"
        )
    return rep


@dataclass(frozen=True)
class NormRow:
    n: int
    strong_R: float
    strong_C: float
    min_eig_R: float
    min_eig_C: float


@dataclass(frozen=True)
class NormTable:
    rows: list
    unbounded: bool

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])


def _growing(values, ratio=1.01):
    if len(values) < 3:
        return False
    a, b, c = values[-3:]
    return b > ratio * a and c > ratio * b


def norm_boundedness_probe(acf: AcfModel, rate: float, n_list) -> NormTable:
    """Strong norms and smallest eigenvalues of R_n and C_n for each n.

    ``unbounded`` is set when either strong norm increases by more than 1% at
    each of the last three ``n``. A heuristic flag only.
    """
    rows = []
    for n in sorted(int(n) for n in n_list):
        seq = acf_sequence(acf, SamplingGrid.at_rate(rate, n))
        eig_R = np.linalg.eigvalsh(scipy.linalg.toeplitz(seq))
        eig_C = linalg.circulant_eigenvalues(linalg.circulant_coefficients(seq))
        rows.append(NormRow(
            n=n,
            strong_R=float(np.max(np.abs(eig_R))),
            strong_C=float(np.max(np.abs(eig_C))),
            min_eig_R=float(eig_R.min()),
            min_eig_C=float(eig_C.min()),
        ))
    unbounded = _growing([r.strong_R for r in rows]) or _growing([r.strong_C for r in rows])
    return NormTable(rows, unbounded)


@dataclass(frozen=True)
class SymmetryResult:
    passed: bool
    max_dev_equiv: float
    max_dev_toeplitz: float
    checked: int


def _rotation_deviation(values):
    values = np.asarray(values)
    return float(np.max(np.abs(values - values[0])) / abs(values[0]))


def cyclic_symmetry_probe(problem: EstimationProblem, p=None, trials: int = 0, seed=0) -> SymmetryResult:
    """Check that E_equiv is invariant under every cyclic rotation of ``p``.

    Checks ``p`` (if given) and ``trials`` random feasible allocations. The
    Toeplitz-form MSE is rotated alongside; its deviation is reported to show
    that the symmetry comes from the circulant substitution.
    """
    rng = np.random.default_rng(seed)
    allocations = [] if p is None else [np.asarray(p, dtype=float)]
    allocations += [random_allocation(rng, problem) for _ in range(trials)]
    dev_e, dev_t = 0.0, 0.0
    for q in allocations:
        rotations = [linalg.rotate_vector(q, i) for i in range(problem.n)]
        e_equiv = [objective(problem, r, "circulant_equiv")[0] for r in rotations]
        e_toep = [objective(problem, r, "direct")[0] for r in rotations]
        dev_e = max(dev_e, _rotation_deviation(e_equiv))
        dev_t = max(dev_t, _rotation_deviation(e_toep))
    return SymmetryResult(dev_e <= SYMMETRY_RTOL, dev_e, dev_t, len(allocations))


def decay_slope(ns, gaps, floor_rtol: float = 0.05) -> float:
    """Least-squares slope of ``log(gap)`` against ``log(n)``.

    If the trailing gaps level off (last two within ``floor_rtol``), the
    floor points are dropped and the slope is fit on the segment before it.
    """
    ns = np.asarray(ns, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    end = gaps.size
    while end > 2 and abs(gaps[end - 1] - gaps[end - 2]) <= floor_rtol * gaps[end - 2]:
        end -= 1
    slope, _ = np.polyfit(np.log(ns[:end]), np.log(gaps[:end]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# randomized instances

def random_problem(rng, n_max: int = 32, n_min: int = 2, *, require_circulant=True) -> EstimationProblem:
    """Random problem with an SPD Toeplitz covariance and P_max = P_T.

    The ACF is either an exponential at a random sampling period or a
    positive mixture of cosines plus a white-noise floor (PSD by construction).
    """
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        if rng.random() < 0.5:
            acf = Exponential(float(rng.uniform(0.2, 3.0)))
            period = float(rng.uniform(0.05, 1.0))
        else:
            m = int(rng.integers(1, 5))
            w = rng.uniform(0.1, 1.0, m)
            omega = rng.uniform(0, math.pi, m)
            k = np.arange(n)
            r = (w[:, None] * np.cos(omega[:, None] * k)).sum(axis=0)
            r[0] += float(rng.uniform(0.05, 0.5))
            acf = Tabulated(1.0, r / r[0])
            period = 1.0
        total = n * float(rng.uniform(0.5, 2.0))
        problem = EstimationProblem(
            acf, SamplingGrid(period, n), float(rng.uniform(0.2, 2.0)), total, total
        )
        if not require_circulant:
            return problem
        try:
            problem.circulant
        except NonPositiveEigenvalueError:
            continue
        return problem


def random_allocation(rng, problem: EstimationProblem, spread: float = 0.1) -> np.ndarray:
    """Random feasible allocation; entries proportional to U(spread, 1)."""
    w = rng.uniform(spread, 1.0, problem.n)
    p = problem.total_power * w / w.sum()
    return np.minimum(p, problem.peak_power)


# ---------------------------------------------------------------------------
# lemma probes

@dataclass
class ProbeResult:
    name: str
    trials: int
    failures: int = 0
    max_deviation: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.failures == 0

    def record(self, ok, deviation, note=None):
        self.max_deviation = max(self.max_deviation, float(deviation))
        if not ok:
            self.failures += 1
            if note and len(self.notes) < 5:
                self.notes.append(note)


def probe_midpoint_convexity(trials, rng, **_):
    """E and E_equiv at the midpoint of two allocations lie strictly below the chord.

    Deviation reported: the largest ``-margin / E`` (negative when all pass).
    """
    res = ProbeResult("midpoint_convexity", trials)
    res.max_deviation = -math.inf
    for _ in range(trials):
        problem = random_problem(rng, 16)
        p, q = random_allocation(rng, problem), random_allocation(rng, problem)
        for form in ("direct", "circulant_equiv"):
            e_p, e_q = objective(problem, p, form)[0], objective(problem, q, form)[0]
            e_mid = objective(problem, 0.5 * (p + q), form)[0]
            margin = 0.5 * (e_p + e_q) - e_mid
            scale = max(e_p, e_q)
            res.record(margin > 1e-14 * scale, -margin / scale, f"{form}: margin {margin:.3g}")
    return res


def probe_line_restriction(trials, rng, **_):
    """Second central difference of ``t -> E(p + t v)`` with ``sum v = 0`` is positive."""
    res = ProbeResult("line_restriction", trials)
    res.max_deviation = -math.inf
    for _ in range(trials):
        problem = random_problem(rng, 16, require_circulant=False)
        p = random_allocation(rng, problem)
        v = rng.standard_normal(problem.n)
        v -= v.mean()
        h = 0.5 * p.min() / np.max(np.abs(v))
        e = [objective(problem, p + s * h * v)[0] for s in (-1, 0, 1)]
        second = e[0] - 2 * e[1] + e[2]
        res.record(second > 1e-13 * e[1], -second / e[1], f"second difference {second:.3g}")
    return res


def probe_cyclic_symmetry(trials, rng, **_):
    """E_equiv is invariant under cyclic rotation of p, to 1e-12 relative."""
    res = ProbeResult("cyclic_symmetry", trials)
    for _ in range(trials):
        problem = random_problem(rng, 16)
        p = random_allocation(rng, problem)
        out = cyclic_symmetry_probe(problem, p)
        res.record(out.passed, out.max_dev_equiv, f"n={problem.n}: deviation {out.max_dev_equiv:.3g}")
    return res


def _random_matrix(rng):
    n = int(rng.integers(2, 33))
    return rng.standard_normal((n, n)), rng.standard_normal((n, n))


def probe_weak_submultiplicative(trials, rng, **_):
    """``|A B| <= ||A|| |B|``. Deviation is ``|AB| / (||A|| |B|)``."""
    res = ProbeResult("weak_submultiplicative", trials)
    for _ in range(trials):
        A, B = _random_matrix(rng)
        lhs = linalg.weak_norm(A @ B)
        rhs = linalg.strong_norm(A) * linalg.weak_norm(B)
        res.record(not _exceeds(lhs, rhs, 1e-12), lhs / rhs, f"{lhs:.6g} > {rhs:.6g}")
    return res


def probe_trace_bound(trials, rng, **_):
    """``|trace(A - B)| / n <= |A - B|``. Deviation is the ratio."""
    res = ProbeResult("trace_bound", trials)
    for _ in range(trials):
        A, B = _random_matrix(rng)
        if rng.random() < 0.5:
            # nearly scalar differences approach equality
            B = A - (1 + 1e-3 * rng.standard_normal()) * np.eye(A.shape[0])
        lhs = abs(np.trace(A - B)) / A.shape[0]
        rhs = linalg.weak_norm(A - B)
        res.record(not _exceeds(lhs, rhs, 1e-12), lhs / rhs, f"{lhs:.6g} > {rhs:.6g}")
    return res


def probe_gradient(trials, rng, gradient=None, **_):
    """Analytic gradient matches central differences to 1e-5 relative.

    Step ``h = 1e-6 * p_i``. Deviation is the worst componentwise relative error.
    """
    gradient = gradient or mse_gradient
    res = ProbeResult("gradient_vs_fd", trials)
    for _ in range(trials):
        problem = random_problem(rng, 16, require_circulant=False)
        p = random_allocation(rng, problem)
        g = np.asarray(gradient(problem, p, "direct"))
        fd = np.empty(problem.n)
        for i in range(problem.n):
            h = 1e-6 * p[i]
            up, dn = p.copy(), p.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (objective(problem, up)[0] - objective(problem, dn)[0]) / (2 * h)
        rel = float(np.max(np.abs(g - fd) / np.abs(fd)))
        res.record(rel <= 1e-5, rel, f"n={problem.n}: relative error {rel:.3g}")
    return res


def probe_equivalence_inequalities(trials, rng, **_):
    """Inverse-gap, trace-gap and chained bounds of :func:`equivalence_report`.

    Deviation is the largest lhs/rhs ratio over the three bounds.
    """
    res = ProbeResult("equivalence_inequalities", trials)
    for _ in range(trials):
        problem = random_problem(rng, 24)
        p = random_allocation(rng, problem)
        try:
            rep = equivalence_report(problem, p)
        except DiagnosticFailure as exc:
            res.record(False, math.inf, str(exc))
            continue
        ratios = [
            _ratio(rep.weak_Cinv_Rinv, rep.inverse_bound),
            _ratio(rep.trace_gap, rep.weak_L_M),
            _ratio(rep.weak_L_M, rep.chained_bound),
        ]
        ok = not _exceeds(rep.weak_L_M, rep.chained_bound)
        res.record(ok, max(ratios), f"n={rep.n}: chained bound violated")
    return res


def _ratio(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return a / b


PROBES = {
    "midpoint_convexity": probe_midpoint_convexity,
    "line_restriction": probe_line_restriction,
    "cyclic_symmetry": probe_cyclic_symmetry,
    "weak_submultiplicative": probe_weak_submultiplicative,
    "trace_bound": probe_trace_bound,
    "gradient_vs_fd": probe_gradient,
    "equivalence_inequalities": probe_equivalence_inequalities,
}


def run_lemma_suite(trials: int = 100, seed: int = 0, gradient=None, probes=None) -> list[ProbeResult]:
    """Run every probe with ``trials`` randomized instances each.

    Each probe gets its own generator derived from ``seed`` so the results do
    not depend on which probes are selected.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    names = list(PROBES) if probes is None else list(probes)
    seeds = np.random.SeedSequence(seed).spawn(len(PROBES))
    by_name = dict(zip(PROBES, seeds))
    return [
        PROBES[name](trials, np.random.default_rng(by_name[name]), gradient=gradient)
        for name in names
    ]

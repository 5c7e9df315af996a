import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import footnote_exponential
from eqpower.acf import Exponential, SamplingGrid, Tabulated
from eqpower.errors import InfeasibleConstraintsError
from eqpower.estimation import EstimationProblem, equal_allocation
from eqpower.lab import random_allocation, random_problem
from eqpower.optimizer import (
    OptimizerConfig,
    convergence_gap,
    mse_gradient,
    objective,
    optimize,
    project_capped_simplex,
)


def central_difference(problem, p, form="direct", rel_step=1e-6):
    fd = np.empty(problem.n)
    for i in range(problem.n):
        h = rel_step * p[i]
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        fd[i] = (objective(problem, up, form)[0] - objective(problem, dn, form)[0]) / (2 * h)
    return fd


def bisection_projection(y, total, lo, hi, iters=200):
    a, b = np.min(y) - hi - 1, np.max(y) - lo + 1
    for _ in range(iters):
        tau = 0.5 * (a + b)
        if np.clip(y - tau, lo, hi).sum() > total:
            a = tau
        else:
            b = tau
    return np.clip(y - 0.5 * (a + b), lo, hi)


def sub_nyquist_n3():
    return EstimationProblem(Exponential(1.0), SamplingGrid(1.0, 3), 1.0, 3.0, 3.0)


class TestGradient:
    def test_scalar(self):
        pr = EstimationProblem(Tabulated(1.0, [1.0]), SamplingGrid(1.0, 1), 1.0, 1.0, 1.0)
        assert mse_gradient(pr, np.array([1.0])) == pytest.approx([-0.25], rel=1e-14)

    def test_matches_finite_differences(self, rng):
        pr = random_problem(rng, 8, n_min=8, require_circulant=False)
        p = random_allocation(rng, pr)
        fd = central_difference(pr, p)
        g = mse_gradient(pr, p)
        assert np.all(np.abs(g - fd) <= 1e-5 * np.abs(fd))

    def test_circulant_form_gradient(self, rng):
        pr = random_problem(rng, 10, n_min=6)
        p = random_allocation(rng, pr)
        fd = central_difference(pr, p, "circulant_equiv")
        g = mse_gradient(pr, p, "circulant_equiv")
        assert np.all(np.abs(g - fd) <= 1e-5 * np.abs(fd))

    def test_equal_allocation_on_circulant_has_equal_components(self):
        pr = footnote_exponential(16)
        g = mse_gradient(pr, np.ones(16), "circulant_equiv")
        assert np.allclose(g, g[0], rtol=1e-12)
        assert np.abs(g - g.mean()).max() <= 1e-14

    def test_strictly_negative(self, rng):
        for _ in range(20):
            pr = random_problem(rng, 16, require_circulant=False)
            assert np.all(mse_gradient(pr, random_allocation(rng, pr)) < 0)


class TestProjection:
    def test_feasible_input_is_fixed(self):
        y = np.array([0.5, 1.5, 1.0])
        assert np.allclose(project_capped_simplex(y, 3.0, 1e-12, 2.0), y)

    def test_simple_shift(self):
        assert np.allclose(project_capped_simplex(np.array([2.0, 2.0]), 2.0, 0.0, 5.0), [1.0, 1.0])

    def test_caps(self):
        x = project_capped_simplex(np.array([10.0, 0.0, 0.0]), 3.0, 0.0, 1.5)
        assert np.allclose(x, [1.5, 0.75, 0.75])

    def test_single_point(self):
        assert np.allclose(project_capped_simplex(np.array([5.0, -3.0]), 4.0, 0.0, 2.0), [2.0, 2.0])

    def test_infeasible(self):
        with pytest.raises(InfeasibleConstraintsError):
            project_capped_simplex(np.zeros(3), 10.0, 0.0, 3.0)

    @settings(max_examples=200, deadline=None)
    @given(
        y=arrays(np.float64, st.integers(1, 40), elements=st.floats(-20, 20)),
        frac=st.floats(0.05, 0.95),
        hi=st.floats(0.5, 5.0),
    )
    def test_against_bisection(self, y, frac, hi):
        n, lo = y.size, 1e-3
        total = lo * n + frac * (hi - lo) * n
        x = project_capped_simplex(y, total, lo, hi)
        assert x.sum() == pytest.approx(total, rel=1e-12)
        assert np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12)
        assert np.allclose(x, bisection_projection(y, total, lo, hi), atol=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(y=arrays(np.float64, 6, elements=st.floats(-5, 5)), seed=st.integers(0, 2**16))
    def test_is_nearest_feasible_point(self, y, seed):
        rng = np.random.default_rng(seed)
        x = project_capped_simplex(y, 3.0, 0.0, 1.0)
        for _ in range(20):
            z = project_capped_simplex(rng.uniform(-2, 2, 6), 3.0, 0.0, 1.0)
            assert np.linalg.norm(y - x) <= np.linalg.norm(y - z) + 1e-12


class TestOptimize:
    def test_single_sample(self):
        pr = EstimationProblem.sampled(Exponential(), 1, rho=2.5)
        res = optimize(pr)
        assert res.p_opt.tolist() == [2.5]
        assert res.iterations == 0 and res.converged

    def test_single_feasible_point(self):
        pr = EstimationProblem(Exponential(), SamplingGrid(0.1, 5), 1.0, 5.0, 1.0)
        res = optimize(pr)
        assert res.iterations == 0 and np.array_equal(res.p_opt, np.ones(5))

    def test_two_samples_equal(self):
        pr = EstimationProblem(Tabulated(1.0, [1.0, 0.5]), SamplingGrid(1.0, 2), 1.0, 3.0, 3.0)
        res = optimize(pr)
        assert np.allclose(res.p_opt, [1.5, 1.5], atol=1e-9)

    def test_three_samples_edge_asymmetry(self):
        res = optimize(sub_nyquist_n3())
        p = res.p_opt
        assert res.converged
        assert p[0] == pytest.approx(p[2], abs=1e-7)
        assert p[0] - p[1] > 1e-3
        assert p.sum() == pytest.approx(3.0, rel=1e-12)

    def test_kkt_interior(self):
        pr = footnote_exponential(24)
        res = optimize(pr)
        g = mse_gradient(pr, res.p_opt)
        assert np.ptp(g) <= 1e-8
        assert res.p_opt.sum() == pytest.approx(24.0, rel=1e-12)

    def test_active_peak_bound(self):
        pr = footnote_exponential(16, peak_power=1.2)
        res = optimize(pr)
        p, g = res.p_opt, mse_gradient(pr, res.p_opt)
        at_cap = p >= 1.2 - 1e-9
        assert res.converged and at_cap.any() and np.all(p <= 1.2 + 1e-12)
        free_level = g[~at_cap].mean()
        assert np.ptp(g[~at_cap]) <= 1e-8
        assert np.all(g[at_cap] <= free_level + 1e-10)

    def test_descent(self):
        res = optimize(footnote_exponential(40))
        assert np.all(np.diff(res.history) <= 0)
        assert res.mse_opt <= res.mse_initial

    def test_unique_from_random_starts(self, rng):
        pr = footnote_exponential(6)
        cfg = dict(g_tol=1e-13, f_tol=1e-18)
        sols = [optimize(pr, OptimizerConfig(initial=random_allocation(rng, pr, 0.3), **cfg)).p_opt
                for _ in range(10)]
        for s in sols[1:]:
            assert np.max(np.abs(s - sols[0])) <= 1e-6

    def test_circulant_objective_optimum_is_equal(self, rng):
        pr = footnote_exponential(12)
        start = random_allocation(rng, pr, 0.3)
        res = optimize(pr, OptimizerConfig(initial=start, form="circulant_equiv", g_tol=1e-13, f_tol=1e-18))
        assert np.allclose(res.p_opt, 1.0, atol=1e-6)

    def test_non_convergence_reported(self):
        res = optimize(footnote_exponential(30), OptimizerConfig(max_iterations=1))
        assert not res.converged
        assert res.iterations == 1

    def test_fixed_step_rule(self):
        pr = footnote_exponential(8)
        res = optimize(pr, OptimizerConfig(step_rule="fixed", fixed_step=50.0, max_iterations=20000, f_tol=1e-18))
        ref = optimize(pr)
        assert res.converged
        assert np.allclose(res.p_opt, ref.p_opt, atol=1e-5)

    def test_injected_gradient_is_used(self):
        pr = footnote_exponential(8)
        calls = []

        def grad(problem, p, form):
            calls.append(1)
            return mse_gradient(problem, p, form)

        optimize(pr, gradient=grad)
        assert calls

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(max_iterations=0)
        with pytest.raises(ValueError):
            OptimizerConfig(g_tol=0)
        with pytest.raises(ValueError):
            OptimizerConfig(step_rule="newton")


class TestConvexity:
    def test_midpoint(self, rng):
        for _ in range(100):
            pr = random_problem(rng, 12)
            p, q = random_allocation(rng, pr), random_allocation(rng, pr)
            for form in ("direct", "circulant_equiv"):
                chord = 0.5 * (objective(pr, p, form)[0] + objective(pr, q, form)[0])
                assert objective(pr, 0.5 * (p + q), form)[0] < chord - 1e-15

    def test_line_restriction(self, rng):
        for _ in range(100):
            pr = random_problem(rng, 12, require_circulant=False)
            p = random_allocation(rng, pr)
            v = rng.standard_normal(pr.n)
            v -= v.mean()
            h = 0.5 * p.min() / np.abs(v).max()
            e = [objective(pr, p + s * h * v)[0] for s in (-1, 0, 1)]
            assert e[0] - 2 * e[1] + e[2] > 0


class TestGap:
    def test_n1(self):
        assert convergence_gap(footnote_exponential(1)) == 0.0

    def test_non_negative(self, rng):
        for _ in range(10):
            pr = random_problem(rng, 10, require_circulant=False)
            assert convergence_gap(pr) >= -1e-12

    def test_exponential_gap_shrinks_with_n(self):
        rel = [convergence_gap(pr) / objective(pr, equal_allocation(pr))[0]
               for pr in map(footnote_exponential, (32, 128, 512))]
        assert rel[0] > rel[1] > rel[2] > 0

import math

import numpy as np
import pytest

from conftest import make_instance, single_link_instance
from netnum.oracle import (
    analytic_single_link,
    finite_diff_grad,
    grid_refine_optimum,
    vertex_lp_optimum,
)
from netnum.problem import ProblemInstance, UtilityParams, objective_grad, objective_value
from netnum.solvers import SolverConfig, run_agm_restart
from netnum.topology import RoutingMatrix


class TestFiniteDiff:
    def test_exact_on_linear_objective(self):
        inst = ProblemInstance(
            RoutingMatrix.from_dense(np.zeros((0, 4))), [], UtilityParams(0.0, 0.0), mu=2.0
        )
        fd = finite_diff_grad(inst, np.array([1.0, 2.0, 3.0, 4.0]))
        np.testing.assert_allclose(fd, -np.ones(4), atol=1e-9)

    def test_stationary_point(self):
        inst = single_link_instance(c=10.0, n_flows=1)
        fd = finite_diff_grad(inst, np.array([10.0]))
        assert abs(fd[0]) < 1e-7

    def test_second_order_convergence(self):
        # halving h shrinks the central-difference error roughly 4x
        inst = single_link_instance(c=10.0, n_flows=2, alpha=2.0, xi=0.5)
        x = np.array([3.0, 4.0])
        g = objective_grad(inst, x)
        err = lambda h: np.abs(finite_diff_grad(inst, x, h=h) - g).max()
        e1, e2 = err(1e-3), err(5e-4)
        assert 2.5 < e1 / e2 < 5.5

    def test_boundary_switches_to_clamped_mode(self):
        inst = single_link_instance(c=10.0, n_flows=2)
        _, modes = finite_diff_grad(inst, np.array([0.0, 5.0]), return_modes=True)
        assert modes == ["clamped", "central"]

    def test_step_validation(self):
        inst = single_link_instance()
        with pytest.raises(ValueError, match="positive"):
            finite_diff_grad(inst, np.array([1.0]), h=0.0)


class TestAnalyticSingleLink:
    def test_mu_two_single_flow(self):
        res = analytic_single_link(10.0, 2.0, 1)
        assert res.x.tolist() == [10.0]
        assert res.value == pytest.approx(-10 + 2 * math.log(2), rel=1e-15)
        assert res.tolerance == 0.0
        assert res.method == "analytic"

    def test_symmetric_split(self):
        res = analytic_single_link(10.0, 2.0, 5)
        np.testing.assert_allclose(res.x, np.full(5, 2.0))

    def test_shifted_mu(self):
        res = analytic_single_link(10.0, 1 + math.e, 1)
        assert res.x.sum() == pytest.approx(9.0, rel=1e-14)

    def test_total_clamped_at_zero(self):
        # ln(mu - 1) > c pushes the stationary total negative; optimum is 0
        res = analytic_single_link(1.0, 1 + math.e**5, 1)
        assert res.x.tolist() == [0.0]

    def test_value_is_a_true_lower_bound(self):
        inst = single_link_instance(c=10.0, n_flows=3)
        res = analytic_single_link(10.0, 2.0, 3)
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = rng.uniform(0, 20, size=3)
            assert objective_value(inst, x) >= res.value - 1e-12
        assert objective_value(inst, res.x) == pytest.approx(res.value, rel=1e-14)

    def test_errors(self):
        with pytest.raises(ValueError, match="mu"):
            analytic_single_link(10.0, 1.0, 1)
        with pytest.raises(ValueError, match="alpha"):
            analytic_single_link(10.0, 2.0, 1, alpha=1.0)
        with pytest.raises(ValueError, match="n_flows"):
            analytic_single_link(10.0, 2.0, 0)


class TestVertexLP:
    def test_three_flows_one_link(self):
        inst = single_link_instance(c=10.0, n_flows=3)
        res = vertex_lp_optimum(inst)
        assert res.value == pytest.approx(10.0, abs=1e-9)
        # ties on the objective resolve to the lexicographically smallest point
        np.testing.assert_allclose(res.x, [0.0, 0.0, 10.0], atol=1e-12)

    def test_serial_links_bind_at_min_capacity(self):
        inst = make_instance([[1.0], [1.0]], [5.0, 10.0])
        res = vertex_lp_optimum(inst)
        assert res.value == pytest.approx(5.0, abs=1e-9)

    def test_empty_problem(self):
        inst = ProblemInstance(
            RoutingMatrix.from_dense(np.zeros((1, 0))), [4.0], UtilityParams(0.0, 0.0)
        )
        res = vertex_lp_optimum(inst)
        assert res.value == 0.0
        assert res.x.shape == (0,)

    def test_cross_shared_instance(self):
        # f0 on link0 (c=10), f1 on link1 (c=7), f2 on both: optimum 17 at x2=0
        dense = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        inst = make_instance(dense, [10.0, 7.0])
        res = vertex_lp_optimum(inst)
        assert res.value == pytest.approx(17.0, abs=1e-9)
        np.testing.assert_allclose(res.x, [10.0, 7.0, 0.0], atol=1e-9)

    def test_guard(self):
        inst = single_link_instance(c=10.0, n_flows=9)
        with pytest.raises(ValueError, match="d <= 8"):
            vertex_lp_optimum(inst)

    def test_unbounded(self):
        dense = np.array([[1.0, 0.0]])  # second flow crosses no link
        inst = make_instance(dense, [5.0])
        with pytest.raises(ValueError, match="unbounded"):
            vertex_lp_optimum(inst)

    def test_alpha_guard(self):
        inst = single_link_instance(alpha=1.0, xi=0.5)
        with pytest.raises(ValueError, match="alpha"):
            vertex_lp_optimum(inst)


class TestGridRefine:
    def test_single_link_matches_analytic(self):
        inst = single_link_instance(c=10.0, n_flows=1)
        res = grid_refine_optimum(inst, tol=1e-6)
        ana = analytic_single_link(10.0, 2.0, 1)
        assert abs(res.x[0] - 10.0) <= 1e-6
        assert abs(res.value - ana.value) <= max(res.tolerance, 1e-12)
        assert res.method == "grid"

    def test_monotone_objective_pins_box_edge(self):
        # no links: utility increases forever, minimum of -U sits at the edge
        inst = ProblemInstance(
            RoutingMatrix.from_dense(np.zeros((0, 1))), [], UtilityParams(1.0, 0.5), mu=2.0
        )
        res = grid_refine_optimum(inst, box=[7.0], tol=1e-6)
        assert res.x[0] == pytest.approx(7.0, abs=1e-9)

    def test_two_symmetric_flows_total(self):
        inst = single_link_instance(c=10.0, n_flows=2)
        res = grid_refine_optimum(inst, tol=1e-6)
        ana = analytic_single_link(10.0, 2.0, 2)
        # the linear-utility valley is flat: the total and the value are
        # pinned down, the split is not
        assert res.x.sum() == pytest.approx(10.0, abs=1e-5)
        assert abs(res.value - ana.value) <= max(res.tolerance, 1e-10)

    def test_two_flows_strictly_concave_symmetric(self):
        inst = single_link_instance(c=10.0, n_flows=2, alpha=1.0, xi=0.5)
        res = grid_refine_optimum(inst, tol=1e-6)
        assert abs(res.x[0] - res.x[1]) <= 1e-5

    def test_guard(self):
        inst = single_link_instance(c=10.0, n_flows=4)
        with pytest.raises(ValueError, match="d <= 3"):
            grid_refine_optimum(inst)

    def test_tol_validation(self):
        with pytest.raises(ValueError, match="tol"):
            grid_refine_optimum(single_link_instance(), tol=0.0)

    def test_stationarity_at_interior_optimum(self):
        for inst in [
            single_link_instance(c=10.0, n_flows=1),
            single_link_instance(c=10.0, n_flows=2, alpha=1.0, xi=0.5),
        ]:
            res = grid_refine_optimum(inst, tol=1e-6)
            limit = max(1e-4, inst.cert.beta_v * 1e-6)
            assert np.linalg.norm(objective_grad(inst, res.x)) <= limit


class TestOracleAgreement:
    def test_grid_vs_analytic_across_mu(self):
        for mu in [1.5, 2.0, 4.0]:
            inst = single_link_instance(c=8.0, n_flows=1, mu=mu)
            grid = grid_refine_optimum(inst, tol=1e-7)
            ana = analytic_single_link(8.0, mu, 1)
            assert abs(grid.value - ana.value) <= max(grid.tolerance, 1e-11)

    def test_feasible_solver_point_never_beats_lp(self):
        inst = single_link_instance(c=10.0, n_flows=3)
        lp = vertex_lp_optimum(inst)
        sol = run_agm_restart(
            inst, SolverConfig("agm_function_restart", iterations=3000, trace_stride=None)
        )
        if sol.meta["final_exact_penalty"] == 0.0:
            assert sol.x_final.sum() <= lp.value + 1e-9

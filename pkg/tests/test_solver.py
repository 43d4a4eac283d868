"""
Tests for the interior-point solver.
"""

import warnings

import numpy as np
import pytest
from scipy.optimize import minimize

from ccrtd_cli.cauchy_stats import UnivariateCauchy
from ccrtd_cli.dispatch_model import AgcUnit, CorrectiveCostTerm
from ccrtd_cli.errors import ConvexityViolationError, InvalidInputError
from ccrtd_cli.program import (
    ConvexProgram,
    LinearRow,
    QuadraticObjective,
    RowTag,
    SeparableObjective,
)
from ccrtd_cli.solver import (
    Multipliers,
    SolverOptions,
    SolverStatus,
    kkt_residuals,
    solve,
)


def quadratic(P, q, r=0.0) -> QuadraticObjective:
    return QuadraticObjective(np.asarray(P, dtype=float), np.asarray(q, dtype=float), r)


class ExpTerm:
    """exp(w) as a separable scalar term."""

    def evaluate(self, w):
        value = np.exp(w)
        return value, value, value


def random_qp(seed: int, n: int = 4, m: int = 5, active: int = 2):
    """A strictly convex QP whose optimum ``x_star`` has ``active`` binding rows."""
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    P = M @ M.T + np.eye(n)
    G = rng.normal(size=(m, n))
    x_star = rng.uniform(-2.0, 2.0, size=n)
    z_star = np.zeros(m)
    z_star[:active] = rng.uniform(0.5, 2.0, size=active)
    h = G @ x_star
    h[active:] += rng.uniform(0.5, 2.0, size=m - active)
    q = -P @ x_star - G.T @ z_star
    return P, q, G, h, x_star


def qp_program(P, q, G, h, variable_order=None, row_order=None) -> ConvexProgram:
    m, n = G.shape
    names = [f"v{i}" for i in range(n)]
    variable_order = list(range(n)) if variable_order is None else list(variable_order)
    row_order = list(range(m)) if row_order is None else list(row_order)
    rows = [
        LinearRow({names[j]: float(G[i, j]) for j in range(n)}, "<=", float(h[i]),
                  RowTag("row", device=str(i)))
        for i in row_order
    ]
    return ConvexProgram.from_rows(
        [names[j] for j in variable_order],
        quadratic(P[np.ix_(variable_order, variable_order)], q[variable_order]),
        rows,
    )


TIGHT = SolverOptions(kkt_tolerance=1e-9, max_iterations=500)


class TestQuadraticPrograms:
    """Test small programs with known optima."""

    def test_single_active_row(self):
        """min (x-3)^2 s.t. x <= 2 stops at x = 2 with objective 1."""
        program = ConvexProgram.from_rows(
            ["x"],
            quadratic([[2.0]], [-6.0], 9.0),
            [LinearRow({"x": 1.0}, "<=", 2.0, RowTag("cap"))],
        )
        solution = solve(program)
        assert solution.status is SolverStatus.OPTIMAL
        assert solution.x[0] == pytest.approx(2.0, abs=1e-6)
        assert solution.objective == pytest.approx(1.0, abs=1e-5)
        assert solution.multipliers.inequality[0] == pytest.approx(2.0, abs=1e-4)
        assert solution.residuals.worst() <= 1e-6
        assert solution.iterations < SolverOptions().max_iterations

    def test_projection_onto_halfspace(self):
        """min (x-1)^2 + (y-2)^2 s.t. x + y <= 2 has optimum (0.5, 1.5)."""
        program = ConvexProgram.from_rows(
            ["x", "y"],
            quadratic(2 * np.eye(2), [-2.0, -4.0], 5.0),
            [LinearRow({"x": 1.0, "y": 1.0}, "<=", 2.0, RowTag("cap"))],
        )
        solution = solve(program)
        assert solution.status is SolverStatus.OPTIMAL
        np.testing.assert_allclose(solution.x, [0.5, 1.5], atol=1e-4)
        assert solution.objective == pytest.approx(0.5, abs=1e-4)
        assert solution.multipliers.inequality[0] == pytest.approx(1.0, abs=1e-3)

    def test_equality_row(self):
        """min x^2 + y^2 s.t. x + y = 2 has optimum (1, 1)."""
        program = ConvexProgram.from_rows(
            ["x", "y"],
            quadratic(2 * np.eye(2), [0.0, 0.0]),
            [LinearRow({"x": 1.0, "y": 1.0}, "==", 2.0, RowTag("sum"))],
            lower=[-10.0, -10.0],
            upper=[10.0, 10.0],
        )
        solution = solve(program)
        assert solution.optimal
        np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-5)
        assert solution.multipliers.equality[0] == pytest.approx(-2.0, abs=1e-3)

    def test_active_bound(self):
        """An unconstrained minimum outside the box lands on the bound."""
        program = ConvexProgram.from_rows(
            ["x"], quadratic([[2.0]], [-10.0]), [], lower=[0.0], upper=[3.0]
        )
        solution = solve(program)
        assert solution.optimal
        assert solution.x[0] == pytest.approx(3.0, abs=1e-5)
        assert solution.multipliers.upper[0] == pytest.approx(4.0, abs=1e-3)

    def test_greater_equal_rows(self):
        """>= rows are handled like their negated <= form."""
        program = ConvexProgram.from_rows(
            ["x", "y"],
            quadratic(2 * np.eye(2), [0.0, 0.0]),
            [LinearRow({"x": 1.0, "y": 2.0}, ">=", 5.0, RowTag("floor"))],
        )
        solution = solve(program)
        assert solution.optimal
        np.testing.assert_allclose(solution.x, [1.0, 2.0], atol=1e-4)

    def test_fixed_variable(self):
        """Variables with equal bounds are held fixed."""
        program = ConvexProgram.from_rows(
            ["x", "y"],
            quadratic(2 * np.eye(2), [0.0, 0.0]),
            [LinearRow({"x": 1.0, "y": 1.0}, "<=", 10.0, RowTag("cap"))],
            lower=[4.0, -5.0],
            upper=[4.0, 5.0],
        )
        solution = solve(program)
        assert solution.optimal
        np.testing.assert_allclose(solution.x, [4.0, 0.0], atol=1e-5)

    def test_rows_without_interior(self):
        """Opposing inequalities that pin a row are promoted to equalities."""
        program = ConvexProgram.from_rows(
            ["x", "y"],
            quadratic(2 * np.eye(2), [0.0, 0.0]),
            [
                LinearRow({"x": 1.0, "y": 1.0}, "<=", 2.0, RowTag("pin", "up")),
                LinearRow({"x": 1.0, "y": 1.0}, ">=", 2.0, RowTag("pin", "down")),
            ],
            lower=[-10.0, -10.0],
            upper=[10.0, 10.0],
        )
        solution = solve(program)
        assert solution.optimal
        np.testing.assert_allclose(solution.x, [1.0, 1.0], atol=1e-5)


class TestSeparableObjective:
    """Test non-quadratic separable terms."""

    def test_matches_scipy(self):
        """x^2 + exp(y) - 3y on a box agrees with a reference optimizer."""
        objective = SeparableObjective(
            np.array([1.0, 0.0]), np.array([0.0, -3.0]), 0.0, ((1, ExpTerm()),)
        )
        program = ConvexProgram.from_rows(
            ["x", "y"],
            objective,
            [LinearRow({"x": 1.0, "y": 1.0}, ">=", 2.0, RowTag("floor"))],
            lower=[-5.0, -5.0],
            upper=[5.0, 5.0],
        )
        solution = solve(program)
        reference = minimize(
            lambda v: v[0] ** 2 + np.exp(v[1]) - 3 * v[1],
            x0=[1.0, 1.0],
            bounds=[(-5, 5), (-5, 5)],
            constraints=[{"type": "ineq", "fun": lambda v: v[0] + v[1] - 2.0}],
            method="SLSQP",
            options={"ftol": 1e-12},
        )
        assert solution.optimal
        np.testing.assert_allclose(solution.x, reference.x, atol=1e-4)

    def test_hessian_is_diagonal(self):
        """Term curvature lands on the diagonal."""
        objective = SeparableObjective(
            np.array([1.0, 0.0]), np.zeros(2), 0.0, ((1, ExpTerm()),)
        )
        np.testing.assert_allclose(objective.hessian(np.array([0.0, 0.0])), np.diag([2.0, 1.0]))


class TestInfeasibility:
    """Test infeasibility detection and certificates."""

    def test_conflicting_row_and_bound(self):
        """A row that contradicts a bound is named in the certificate."""
        program = ConvexProgram.from_rows(
            ["x"],
            quadratic([[2.0]], [0.0]),
            [LinearRow({"x": 1.0}, "<=", 1.0, RowTag("cap"))],
            lower=[2.0],
            upper=[5.0],
        )
        solution = solve(program)
        assert solution.status is SolverStatus.INFEASIBLE
        assert "cap" in solution.certificate
        assert solution.residuals.primal > 0.5

    def test_conflicting_rows(self):
        """Two contradicting rows are both reported."""
        program = ConvexProgram.from_rows(
            ["x", "y"],
            quadratic(2 * np.eye(2), [0.0, 0.0]),
            [
                LinearRow({"x": 1.0, "y": 1.0}, "<=", 1.0, RowTag("low")),
                LinearRow({"x": 1.0, "y": 1.0}, ">=", 3.0, RowTag("high")),
            ],
        )
        solution = solve(program)
        assert solution.status is SolverStatus.INFEASIBLE
        assert set(solution.certificate) >= {"low", "high"}

    def test_inverted_bounds(self):
        """lower > upper is reported without solving."""
        program = ConvexProgram.from_rows(
            ["x"], quadratic([[2.0]], [0.0]), [], lower=[3.0], upper=[1.0]
        )
        solution = solve(program)
        assert solution.status is SolverStatus.INFEASIBLE
        assert solution.certificate == ("lower[x]", "upper[x]")


class TestKktResiduals:
    """Test residual evaluation and solver options."""

    def setup_method(self):
        """Set up test fixtures."""
        self.program = ConvexProgram.from_rows(
            ["x", "y"],
            quadratic(2 * np.eye(2), [-2.0, -4.0], 5.0),
            [LinearRow({"x": 1.0, "y": 1.0}, "<=", 2.0, RowTag("cap"))],
        )

    def test_optimal_residuals_within_tolerance(self):
        """An optimal status means every residual is within tolerance."""
        solution = solve(self.program, SolverOptions(kkt_tolerance=1e-7))
        assert solution.optimal
        assert solution.residuals.worst() <= 1e-7

    def test_exact_kkt_point(self):
        """The analytic KKT point has zero residuals."""
        multipliers = Multipliers(np.zeros(0), np.array([1.0]), np.zeros(2), np.zeros(2))
        residuals = kkt_residuals(self.program, [0.5, 1.5], multipliers)
        assert residuals.worst() == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self):
        """Multipliers of the wrong length are rejected."""
        multipliers = Multipliers(np.zeros(0), np.zeros(2), np.zeros(2), np.zeros(2))
        with pytest.raises(InvalidInputError):
            kkt_residuals(self.program, [0.0, 0.0], multipliers)

    def test_iteration_limit(self):
        """Too few Newton steps end with ITERATION_LIMIT."""
        solution = solve(self.program, SolverOptions(max_iterations=1))
        assert solution.status is SolverStatus.ITERATION_LIMIT

    def test_nonconvex_objective(self):
        """Negative curvature is reported instead of solved."""
        program = ConvexProgram.from_rows(
            ["x"], quadratic([[-2.0]], [0.0]), [], lower=[0.0], upper=[1.0]
        )
        with pytest.raises(ConvexityViolationError):
            solve(program)

    def test_invalid_options(self):
        """Options are validated on construction."""
        with pytest.raises(InvalidInputError):
            SolverOptions(kkt_tolerance=0.0)
        with pytest.raises(InvalidInputError):
            SolverOptions(barrier_reduction=1.5)

    def test_infinite_bounds_do_not_warn(self):
        """Unbounded variables are skipped without arithmetic on infinities."""
        multipliers = Multipliers(np.zeros(0), np.array([1.0]), np.zeros(2), np.zeros(2))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            residuals = kkt_residuals(self.program, [0.5, 1.5], multipliers)
        assert residuals.complementarity == pytest.approx(0.0, abs=1e-12)

    def test_perturbed_point_grows_stationarity(self):
        """Moving away from the optimum shows up in the stationarity residual."""
        multipliers = Multipliers(np.zeros(0), np.array([1.0]), np.zeros(2), np.zeros(2))
        exact = kkt_residuals(self.program, [0.5, 1.5], multipliers)
        moved = kkt_residuals(self.program, [0.2, 1.5], multipliers)
        assert moved.stationarity > exact.stationarity + 0.1


class TestSolverProperties:
    """Test agreement, invariance and determinism on random programs."""

    @pytest.mark.parametrize("seed", range(25))
    def test_random_qp_matches_kkt_point(self, seed):
        """Random QPs with a planted KKT point are solved to that point."""
        P, q, G, h, x_star = random_qp(seed)
        solution = solve(qp_program(P, q, G, h), TIGHT)
        assert solution.status is SolverStatus.OPTIMAL
        np.testing.assert_allclose(solution.x, x_star, atol=1e-6)

    def test_permutation_invariance(self):
        """Reordering variables and rows does not move the solution."""
        P, q, G, h, _ = random_qp(101, n=5, m=7, active=3)
        base = solve(qp_program(P, q, G, h), TIGHT)
        variable_order = [3, 0, 4, 2, 1]
        row_order = [6, 2, 0, 5, 1, 4, 3]
        permuted = solve(qp_program(P, q, G, h, variable_order, row_order), TIGHT)
        assert base.optimal and permuted.optimal
        np.testing.assert_allclose(permuted.x, base.x[variable_order], atol=1e-6)

    def test_deterministic(self):
        """Identical inputs give bit-identical iterates."""
        P, q, G, h, _ = random_qp(7)
        first = solve(qp_program(P, q, G, h))
        second = solve(qp_program(P, q, G, h))
        assert np.array_equal(first.x, second.x)
        assert first.history == second.history
        assert first.iterations == second.iterations

    @pytest.mark.parametrize("seed", [3, 11, 19])
    def test_objective_history_decreases(self, seed):
        """The objective never rises from one barrier stage to the next."""
        P, q, G, h, _ = random_qp(seed)
        solution = solve(qp_program(P, q, G, h), TIGHT)
        history = np.array(solution.history)
        assert len(history) >= 2
        slack = 1e-9 * np.maximum(1.0, np.abs(history[1:]))
        assert np.all(np.diff(history) <= slack)


class TestCorrectiveToy:
    """Solve a three-variable program with a corrective cost term."""

    def setup_method(self):
        """Set up test fixtures."""
        units = (
            AgcUnit("A1", 0, 0, 100, gamma_up=1.0, gamma_down=2.0, participation=0.6),
            AgcUnit("A2", 0, 0, 100, gamma_up=0.5, gamma_down=3.0, participation=0.4),
        )
        self.term = CorrectiveCostTerm.from_fleet(units, UnivariateCauchy(50.0, 5.0), 100.0)
        self.load = 60.0

    def test_matches_grid_search(self):
        """x^2 + y^2 + C(w) with x + y + w = load agrees with a grid search."""
        program = ConvexProgram.from_rows(
            ["x", "y", "w"],
            SeparableObjective(np.array([1.0, 1.0, 0.0]), np.zeros(3), 0.0, ((2, self.term),)),
            [LinearRow({"x": 1.0, "y": 1.0, "w": 1.0}, "==", self.load, RowTag("balance"))],
            lower=[0.0, 0.0, 0.0],
            upper=[np.inf, np.inf, self.term.w_max],
        )
        solution = solve(program, TIGHT)
        assert solution.optimal

        # for fixed w the best split is x = y = (load - w) / 2
        grid = np.linspace(0.0, self.load, 600001)
        values = 0.5 * (self.load - grid) ** 2 + self.term.evaluate(grid)[0]
        best = int(np.argmin(values))
        assert solution.objective == pytest.approx(values[best], abs=1e-4)
        assert solution.x[2] == pytest.approx(grid[best], abs=1e-3)
        assert solution.x[0] == pytest.approx(solution.x[1], abs=1e-6)

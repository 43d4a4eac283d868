"""
Tests for the DC network model and PTDF computation.
"""

import numpy as np
import pytest

from ccrtd_cli.errors import (
    InvalidInputError,
    IslandingError,
    UnbalancedInjectionError,
)
from ccrtd_cli.network import (
    GridModel,
    Line,
    build_ptdf,
    line_flows,
    susceptance_matrices,
)


def triangle(slack: int = 0) -> GridModel:
    return GridModel(3, (Line(0, 1, 0.1), Line(1, 2, 0.1), Line(0, 2, 0.1)), slack)


class TestLine:
    """Test line validation."""

    def test_self_loop(self):
        """A line must join two different buses."""
        with pytest.raises(InvalidInputError):
            Line(1, 1, 0.1)

    def test_non_positive_reactance(self):
        """Reactance must be positive."""
        with pytest.raises(InvalidInputError):
            Line(0, 1, 0.0)

    def test_unlimited_line(self):
        """Lines without a limit report an infinite one."""
        grid = GridModel(2, (Line(0, 1, 0.1), Line(0, 1, 0.2, limit=50.0)))
        np.testing.assert_array_equal(grid.line_limits(), [np.inf, 50.0])

    def test_unknown_bus(self):
        """Lines must stay inside the bus range."""
        with pytest.raises(InvalidInputError):
            GridModel(2, (Line(0, 2, 0.1),))


class TestPtdf:
    """Test PTDF construction."""

    def test_two_bus(self):
        """Injecting at bus 1 sends the full amount back along the line."""
        ptdf = build_ptdf(GridModel(2, (Line(0, 1, 0.1),)))
        np.testing.assert_allclose(ptdf.matrix, [[0.0, -1.0]])

    def test_triangle_split(self):
        """Equal reactances split flow two thirds direct, one third around."""
        ptdf = build_ptdf(triangle())
        np.testing.assert_allclose(ptdf.matrix[:, 1], [-2 / 3, 1 / 3, -1 / 3], atol=1e-12)

    def test_slack_column_zero(self):
        """The slack bus column is identically zero."""
        ptdf = build_ptdf(triangle(slack=2))
        np.testing.assert_array_equal(ptdf.matrix[:, 2], np.zeros(3))

    def test_matches_angle_solution(self):
        """PTDF flows equal flows computed from bus angles."""
        lines = (
            Line(0, 1, 0.1), Line(1, 2, 0.2), Line(2, 3, 0.15), Line(0, 3, 0.3), Line(1, 3, 0.25)
        )
        grid = GridModel(4, lines)
        injections = np.array([-30.0, 10.0, 45.0, -25.0])
        bus_matrix, branch_matrix = susceptance_matrices(grid)
        theta = np.linalg.lstsq(bus_matrix, injections, rcond=None)[0]
        np.testing.assert_allclose(
            line_flows(build_ptdf(grid), injections), branch_matrix @ theta, atol=1e-9
        )

    def test_slack_choice_does_not_change_balanced_flows(self):
        """Balanced injections give the same flows whatever the slack bus."""
        injections = np.array([5.0, -12.0, 7.0])
        np.testing.assert_allclose(
            line_flows(build_ptdf(triangle(0)), injections),
            line_flows(build_ptdf(triangle(1)), injections),
            atol=1e-9,
        )

    def test_islanding(self):
        """Disconnected networks are rejected."""
        with pytest.raises(IslandingError):
            build_ptdf(GridModel(4, (Line(0, 1, 0.1), Line(2, 3, 0.1))))

    def test_single_bus(self):
        """A single bus without lines has an empty PTDF."""
        assert build_ptdf(GridModel(1, ())).shape == (0, 1)

    def test_matrix_read_only(self):
        """The stored matrix cannot be changed in place."""
        ptdf = build_ptdf(triangle())
        with pytest.raises(ValueError):
            ptdf.matrix[0, 0] = 1.0


class TestLineFlows:
    """Test flow evaluation."""

    def setup_method(self):
        """Set up test fixtures."""
        self.ptdf = build_ptdf(triangle())

    def test_unbalanced(self):
        """Injections that do not sum to zero are rejected."""
        with pytest.raises(UnbalancedInjectionError):
            line_flows(self.ptdf, [1.0, 0.0, 0.0])

    def test_wrong_length(self):
        """One injection per bus is required."""
        with pytest.raises(InvalidInputError):
            line_flows(self.ptdf, [1.0, -1.0])

    def test_flow_conservation(self):
        """Net flow out of every bus equals its injection."""
        injections = np.array([-9.0, 4.0, 5.0])
        flows = line_flows(self.ptdf, injections)
        incidence = triangle().incidence().toarray()
        np.testing.assert_allclose(incidence.T @ flows, injections, atol=1e-9)


def random_grid(seed: int) -> GridModel:
    """A connected grid of at most 12 buses: a random tree plus extra lines."""
    rng = np.random.default_rng(seed)
    buses = int(rng.integers(2, 13))
    order = rng.permutation(buses)
    pairs = [(int(order[i]), int(order[rng.integers(0, i)])) for i in range(1, buses)]
    for _ in range(int(rng.integers(0, buses + 1))):
        a, b = rng.choice(buses, size=2, replace=False)
        pairs.append((int(a), int(b)))
    lines = tuple(Line(a, b, float(rng.uniform(0.05, 0.5))) for a, b in pairs)
    return GridModel(buses, lines, int(rng.integers(0, buses)))


class TestRandomGrids:
    """Compare PTDF flows with direct DC power flow solutions."""

    @pytest.mark.parametrize("seed", range(50))
    def test_ptdf_matches_dc_solve(self, seed):
        """PTDF flows equal angle-difference flows on random connected grids."""
        grid = random_grid(seed)
        rng = np.random.default_rng(1000 + seed)
        injections = rng.uniform(-100.0, 100.0, size=grid.bus_count)
        injections -= injections.mean()

        bus_matrix, _ = susceptance_matrices(grid)
        keep = [bus for bus in range(grid.bus_count) if bus != grid.slack_bus]
        theta = np.zeros(grid.bus_count)
        theta[keep] = np.linalg.solve(bus_matrix[np.ix_(keep, keep)], injections[keep])
        direct = np.array(
            [(theta[line.from_bus] - theta[line.to_bus]) / line.reactance for line in grid.lines]
        )

        np.testing.assert_allclose(line_flows(build_ptdf(grid), injections), direct, atol=1e-8)

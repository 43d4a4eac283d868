"""Lossless DC network model and power transfer distribution factors."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from ccrtd_cli.errors import (
    InvalidInputError,
    IslandingError,
    SingularNetworkError,
    UnbalancedInjectionError,
)

logger = logging.getLogger(__name__)

BALANCE_TOLERANCE_MW = 1e-6
# Reduced susceptance matrices above this condition number are rejected
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    reactance: float
    # MW; None means unlimited
    limit: float | None = None

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise InvalidInputError(f"line {self.from_bus}-{self.to_bus} is a self loop")
        if not self.reactance > 0:
            raise InvalidInputError(f"line reactance must be positive, got {self.reactance}")
        if self.limit is not None and not self.limit >= 0:
            raise InvalidInputError(f"line limit must be non-negative, got {self.limit}")

    @property
    def susceptance(self) -> float:
        return 1.0 / self.reactance


@dataclass(frozen=True)
class GridModel:
    """Buses ``0..bus_count-1`` joined by ``lines``; PTDFs are relative to ``slack_bus``."""

    bus_count: int
    lines: tuple[Line, ...]
    slack_bus: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.bus_count < 1:
            raise InvalidInputError(f"grid needs at least one bus, got {self.bus_count}")
        if not 0 <= self.slack_bus < self.bus_count:
            raise InvalidInputError(f"slack bus {self.slack_bus} is not a bus index")
        for index, line in enumerate(self.lines):
            for bus in (line.from_bus, line.to_bus):
                if not 0 <= bus < self.bus_count:
                    raise InvalidInputError(f"line {index} references unknown bus {bus}")

    @property
    def line_count(self) -> int:
        return len(self.lines)

    def line_limits(self) -> np.ndarray:
        """Line limits in MW with ``inf`` for unlimited lines."""
        return np.array(
            [np.inf if line.limit is None else line.limit for line in self.lines], dtype=float
        )

    def incidence(self) -> sparse.csr_matrix:
        """Line-by-bus matrix with +1 at the from bus and -1 at the to bus."""
        rows = np.repeat(np.arange(self.line_count), 2)
        cols = np.array([[line.from_bus, line.to_bus] for line in self.lines], dtype=int).ravel()
        values = np.tile([1.0, -1.0], self.line_count)
        return sparse.csr_matrix((values, (rows, cols)), shape=(self.line_count, self.bus_count))

    def island_count(self) -> int:
        adjacency = abs(self.incidence().T @ self.incidence())
        count, _ = csgraph.connected_components(adjacency, directed=False)
        return count


@dataclass(frozen=True, eq=False)
class PtdfMatrix:
    grid: GridModel
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def susceptance_matrices(grid: GridModel) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(B_bus, B_f)`` so that ``P = B_bus theta`` and ``flows = B_f theta``."""
    incidence = grid.incidence()
    b = np.array([line.susceptance for line in grid.lines], dtype=float)
    branch = sparse.diags(b) @ incidence
    return (incidence.T @ branch).toarray(), branch.toarray()


def build_ptdf(grid: GridModel) -> PtdfMatrix:
    """Compute ``G = B_f B_red^-1`` with a zero column at the slack bus."""
    islands = grid.island_count()
    if islands > 1:
        raise IslandingError(f"network splits into {islands} islands")

    ptdf = np.zeros((grid.line_count, grid.bus_count))
    if grid.line_count == 0:
        return PtdfMatrix(grid, ptdf)

    bus_matrix, branch_matrix = susceptance_matrices(grid)
    keep = np.array([bus for bus in range(grid.bus_count) if bus != grid.slack_bus], dtype=int)
    reduced = bus_matrix[np.ix_(keep, keep)]
    condition = np.linalg.cond(reduced)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularNetworkError(
            f"reduced susceptance matrix is singular (condition {condition:.3g})"
        )
    # Solve B_red' X = B_f' instead of forming the inverse
    ptdf[:, keep] = linalg.solve(reduced, branch_matrix[:, keep].T, assume_a="sym").T
    logger.debug("built %dx%d PTDF matrix", *ptdf.shape)
    return PtdfMatrix(grid, ptdf)


def line_flows(ptdf: PtdfMatrix, injections) -> np.ndarray:
    injections = np.asarray(injections, dtype=float)
    if injections.shape != (ptdf.grid.bus_count,):
        raise InvalidInputError(
            f"expected {ptdf.grid.bus_count} nodal injections, got shape {injections.shape}"
        )
    imbalance = float(np.sum(injections))
    if abs(imbalance) > BALANCE_TOLERANCE_MW:
        raise UnbalancedInjectionError(f"injections sum to {imbalance:.6g} MW, not zero")
    return ptdf.matrix @ injections

"""Containers for convex programs with linear rows.

A ``ConvexProgram`` is the solver's only input: a smooth convex objective,
equality rows ``A x = b``, inequality rows ``G x <= h`` and box bounds. Rows
keep a ``RowTag`` so that solver certificates and model dumps can name the
constraint family, device and period a row came from.
"""

from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Protocol

import numpy as np
from scipy import sparse

from ccrtd_cli.errors import InvalidInputError

Sense = Literal["<=", ">=", "=="]


class RowTag(NamedTuple):
    family: str
    side: str = ""
    device: str = ""
    period: int = 0

    @property
    def name(self) -> str:
        family = f"{self.family}.{self.side}" if self.side else self.family
        if self.device and self.period:
            return f"{family}[{self.device},{self.period}]"
        if self.device or self.period:
            return f"{family}[{self.device or self.period}]"
        return family


@dataclass(frozen=True)
class LinearRow:
    coefficients: dict[str, float]
    sense: Sense
    bound: float
    tag: RowTag

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise InvalidInputError(f"unknown row sense {self.sense!r}")
        if not np.isfinite(self.bound):
            raise InvalidInputError(f"row {self.tag.name} has non-finite bound {self.bound}")

    @property
    def name(self) -> str:
        return self.tag.name

    def activity(self, values: dict[str, float]) -> float:
        return sum(coef * values[var] for var, coef in self.coefficients.items())

    def violation(self, values: dict[str, float]) -> float:
        """Amount by which ``values`` break the row, zero when satisfied."""
        gap = self.activity(values) - self.bound
        if self.sense == "<=":
            return max(gap, 0.0)
        if self.sense == ">=":
            return max(-gap, 0.0)
        return abs(gap)


class Objective(Protocol):
    def value(self, x: np.ndarray) -> float: ...

    def gradient(self, x: np.ndarray) -> np.ndarray: ...

    def hessian(self, x: np.ndarray) -> np.ndarray: ...


class ScalarTerm(Protocol):
    def evaluate(self, w): ...


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """``0.5 x'Px + q'x + r``."""

    P: np.ndarray
    q: np.ndarray
    r: float = 0.0

    def value(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x + self.r)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.P @ x + self.q

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.P, dtype=float)


@dataclass(frozen=True, eq=False)
class SeparableObjective:
    """Diagonal quadratic plus univariate smooth terms on single variables.

    ``terms`` pairs a variable index with an object whose ``evaluate(w)``
    returns ``(value, first derivative, second derivative)``.
    """

    quadratic: np.ndarray
    linear: np.ndarray
    constant: float = 0.0
    terms: tuple[tuple[int, ScalarTerm], ...] = ()

    def value(self, x: np.ndarray) -> float:
        total = float(self.quadratic @ (x * x) + self.linear @ x + self.constant)
        for index, term in self.terms:
            total += float(term.evaluate(x[index])[0])
        return total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        grad = 2.0 * self.quadratic * x + self.linear
        for index, term in self.terms:
            grad[index] += float(term.evaluate(x[index])[1])
        return grad

    def hessian(self, x: np.ndarray) -> np.ndarray:
        diagonal = 2.0 * self.quadratic.astype(float)
        for index, term in self.terms:
            diagonal[index] += float(term.evaluate(x[index])[2])
        return np.diag(diagonal)


@dataclass(frozen=True, eq=False)
class ConvexProgram:
    variables: tuple[str, ...]
    objective: Objective
    eq_matrix: sparse.csr_matrix
    eq_rhs: np.ndarray
    eq_names: tuple[str, ...]
    ineq_matrix: sparse.csr_matrix
    ineq_rhs: np.ndarray
    ineq_names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray
    rows: tuple[LinearRow, ...] = field(default=(), repr=False)

    def __post_init__(self):
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise InvalidInputError("variable names must be unique")
        checks = (
            ("eq_matrix", self.eq_matrix.shape, (len(self.eq_rhs), n)),
            ("ineq_matrix", self.ineq_matrix.shape, (len(self.ineq_rhs), n)),
            ("eq_names", (len(self.eq_names),), (len(self.eq_rhs),)),
            ("ineq_names", (len(self.ineq_names),), (len(self.ineq_rhs),)),
            ("lower", self.lower.shape, (n,)),
            ("upper", self.upper.shape, (n,)),
        )
        for name, got, expected in checks:
            if got != expected:
                raise InvalidInputError(f"{name} has shape {got}, expected {expected}")

    @property
    def size(self) -> int:
        return len(self.variables)

    @property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.variables)}

    @property
    def row_count(self) -> int:
        return len(self.eq_rhs) + len(self.ineq_rhs)

    @classmethod
    def from_rows(
        cls,
        variables,
        objective: Objective,
        rows,
        lower=None,
        upper=None,
    ) -> "ConvexProgram":
        """Stack tagged rows into sparse matrices; ``>=`` rows are negated into ``<=``."""
        variables = tuple(variables)
        rows = tuple(rows)
        index = {name: i for i, name in enumerate(variables)}
        eq, ineq = _RowStack(), _RowStack()

        for row in rows:
            unknown = set(row.coefficients) - index.keys()
            if unknown:
                raise InvalidInputError(f"row {row.name} uses unknown variables {sorted(unknown)}")
            sign = -1.0 if row.sense == ">=" else 1.0
            target = eq if row.sense == "==" else ineq
            target.add(
                {index[var]: sign * coef for var, coef in row.coefficients.items()},
                sign * row.bound,
                row.name,
            )

        n = len(variables)
        return cls(
            variables=variables,
            objective=objective,
            eq_matrix=eq.matrix(n),
            eq_rhs=np.array(eq.rhs, dtype=float),
            eq_names=tuple(eq.names),
            ineq_matrix=ineq.matrix(n),
            ineq_rhs=np.array(ineq.rhs, dtype=float),
            ineq_names=tuple(ineq.names),
            lower=np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float),
            upper=np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float),
            rows=rows,
        )

    def describe(self) -> dict:
        """Plain-data view of variables and rows for model dumps."""
        return {
            "variables": [
                {
                    "name": name,
                    "lower": None if np.isinf(lo) else float(lo),
                    "upper": None if np.isinf(hi) else float(hi),
                }
                for name, lo, hi in zip(self.variables, self.lower, self.upper)
            ],
            "rows": [
                {
                    "name": row.name,
                    "family": row.tag.family,
                    "sense": row.sense,
                    "bound": float(row.bound),
                    "coefficients": {k: float(v) for k, v in row.coefficients.items()},
                }
                for row in self.rows
            ],
        }


class _RowStack:
    def __init__(self):
        self.data: list[float] = []
        self.row_ids: list[int] = []
        self.col_ids: list[int] = []
        self.rhs: list[float] = []
        self.names: list[str] = []

    def add(self, coefficients: dict[int, float], bound: float, name: str):
        row = len(self.rhs)
        for col, value in coefficients.items():
            if value != 0.0:
                self.row_ids.append(row)
                self.col_ids.append(col)
                self.data.append(value)
        self.rhs.append(bound)
        self.names.append(name)

    def matrix(self, n: int) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.data, (self.row_ids, self.col_ids)), shape=(len(self.rhs), n)
        )

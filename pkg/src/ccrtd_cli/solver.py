"""Interior-point solver for smooth convex programs with linear rows.

Phase one solves an elastic LP to detect infeasibility and a max-margin LP
to find a strictly interior start. Phase two runs a log-barrier Newton
method, handling equality rows through KKT system solves.
"""

import logging
from dataclasses import dataclass, field

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        def __format__(self, format_spec: str) -> str:
            return str(self.value).__format__(format_spec)

import numpy as np
from scipy import linalg, sparse
from scipy.optimize import linprog

from ccrtd_cli.errors import CcrtdError, ConvexityViolationError, InvalidInputError
from ccrtd_cli.program import ConvexProgram

logger = logging.getLogger(__name__)

FRACTION_TO_BOUNDARY = 0.99
ARMIJO = 1e-4
MAX_BACKTRACKS = 60
KKT_REGULARIZATION = 1e-12
NEGATIVE_CURVATURE = 1e-8
MIN_INTERIOR_MARGIN = 1e-9
MAX_PROMOTIONS = 10
# Newton decrement, relative to the barrier value, that ends a barrier stage
CENTERING_TOLERANCE = 1e-10
# Relative slack for barrier values that agree up to rounding
ROUNDOFF = 1e-14


class SolverStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class SolverOptions:
    kkt_tolerance: float = 1e-6
    max_iterations: int = 200
    barrier_reduction: float = 0.2
    initial_barrier: float = 1.0
    backtracking: float = 0.5

    def __post_init__(self):
        if not self.kkt_tolerance > 0:
            raise InvalidInputError(f"KKT tolerance must be positive, got {self.kkt_tolerance}")
        if self.max_iterations < 1:
            raise InvalidInputError(f"iteration limit must be positive, got {self.max_iterations}")
        if not self.initial_barrier > 0:
            raise InvalidInputError("initial barrier weight must be positive")
        for name in ("barrier_reduction", "backtracking"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise InvalidInputError(f"{name} must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class Multipliers:
    equality: np.ndarray
    inequality: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def zeros(cls, program: ConvexProgram) -> "Multipliers":
        return cls(
            np.zeros(len(program.eq_rhs)),
            np.zeros(len(program.ineq_rhs)),
            np.zeros(program.size),
            np.zeros(program.size),
        )


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    primal: float
    complementarity: float

    def worst(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity)


@dataclass(frozen=True, eq=False)
class Solution:
    x: np.ndarray
    objective: float
    status: SolverStatus
    multipliers: Multipliers
    residuals: KktResiduals
    iterations: int
    certificate: tuple[str, ...] = ()
    history: tuple[float, ...] = field(default=())

    @property
    def optimal(self) -> bool:
        return self.status is SolverStatus.OPTIMAL


def _max_or_zero(values) -> float:
    values = np.asarray(values, dtype=float)
    return float(np.max(values)) if values.size else 0.0


def kkt_residuals(program: ConvexProgram, x, multipliers: Multipliers) -> KktResiduals:
    """KKT residuals of ``x`` for ``min f`` s.t. ``Ax = b``, ``Gx <= h``, ``l <= x <= u``.

    Stationarity is ``||grad f + A'lam + G'mu - z_l + z_u||_inf`` divided by
    ``max(1, ||grad f||_inf)``; primal is the largest row or bound violation;
    complementarity is the largest ``|mu_i * slack_i|`` over rows and finite bounds.
    """
    x = np.asarray(x, dtype=float)
    shapes = (
        (x.shape, (program.size,)),
        (multipliers.equality.shape, (len(program.eq_rhs),)),
        (multipliers.inequality.shape, (len(program.ineq_rhs),)),
        (multipliers.lower.shape, (program.size,)),
        (multipliers.upper.shape, (program.size,)),
    )
    for got, expected in shapes:
        if got != expected:
            raise InvalidInputError(f"dimension mismatch: got {got}, expected {expected}")

    gradient = program.objective.gradient(x)
    residual = (
        gradient
        + program.eq_matrix.T @ multipliers.equality
        + program.ineq_matrix.T @ multipliers.inequality
        - multipliers.lower
        + multipliers.upper
    )
    stationarity = _max_or_zero(np.abs(residual)) / max(1.0, _max_or_zero(np.abs(gradient)))

    slack = program.ineq_rhs - program.ineq_matrix @ x
    finite_lower = np.isfinite(program.lower)
    finite_upper = np.isfinite(program.upper)
    primal = max(
        _max_or_zero(np.abs(program.eq_matrix @ x - program.eq_rhs)),
        _max_or_zero(-slack),
        _max_or_zero(program.lower[finite_lower] - x[finite_lower]),
        _max_or_zero(x[finite_upper] - program.upper[finite_upper]),
        0.0,
    )
    complementarity = max(
        _max_or_zero(np.abs(multipliers.inequality * slack)),
        _max_or_zero(
            np.abs(multipliers.lower[finite_lower] * (x - program.lower)[finite_lower])
        ),
        _max_or_zero(
            np.abs(multipliers.upper[finite_upper] * (program.upper - x)[finite_upper])
        ),
    )
    return KktResiduals(stationarity, primal, complementarity)


@dataclass
class _Rows:
    """All constraints as ``A x = b`` and ``G x <= h`` with provenance per row.

    Provenance entries are ``(kind, index)`` where kind is one of ``eq``,
    ``ineq``, ``lower``, ``upper`` or ``fixed``.
    """

    A: sparse.csr_matrix
    b: np.ndarray
    eq_origin: list[tuple[str, int]]
    G: sparse.csr_matrix
    h: np.ndarray
    ineq_origin: list[tuple[str, int]]

    @classmethod
    def normalize(cls, program: ConvexProgram) -> "_Rows":
        n = program.size
        identity = sparse.identity(n, format="csr")
        fixed = np.isfinite(program.lower) & (program.lower == program.upper)
        lower = np.flatnonzero(np.isfinite(program.lower) & ~fixed)
        upper = np.flatnonzero(np.isfinite(program.upper) & ~fixed)
        fixed = np.flatnonzero(fixed)

        return cls(
            A=sparse.vstack([program.eq_matrix, identity[fixed]], format="csr"),
            b=np.concatenate([program.eq_rhs, program.lower[fixed]]),
            eq_origin=[("eq", i) for i in range(len(program.eq_rhs))]
            + [("fixed", int(i)) for i in fixed],
            G=sparse.vstack(
                [program.ineq_matrix, -identity[lower], identity[upper]], format="csr"
            ),
            h=np.concatenate([program.ineq_rhs, -program.lower[lower], program.upper[upper]]),
            ineq_origin=[("ineq", i) for i in range(len(program.ineq_rhs))]
            + [("lower", int(i)) for i in lower]
            + [("upper", int(i)) for i in upper],
        )

    def promote(self, rows: np.ndarray):
        """Move inequality ``rows`` into the equality block."""
        keep = np.setdiff1d(np.arange(len(self.h)), rows)
        self.A = sparse.vstack([self.A, self.G[rows]], format="csr")
        self.b = np.concatenate([self.b, self.h[rows]])
        self.eq_origin += [self.ineq_origin[i] for i in rows]
        self.G = self.G[keep]
        self.h = self.h[keep]
        self.ineq_origin = [self.ineq_origin[i] for i in keep]

    def multipliers(self, program: ConvexProgram, nu: np.ndarray, mu: np.ndarray) -> Multipliers:
        result = Multipliers.zeros(program)
        targets = {
            "eq": result.equality,
            "ineq": result.inequality,
            "lower": result.lower,
            "upper": result.upper,
        }
        for origin, values in ((self.eq_origin, nu), (self.ineq_origin, mu)):
            for (kind, i), value in zip(origin, values):
                if kind == "fixed":
                    result.upper[i] += max(value, 0.0)
                    result.lower[i] += max(-value, 0.0)
                else:
                    targets[kind][i] += value
        return result


def _bound_pairs(program: ConvexProgram) -> list[tuple[float | None, float | None]]:
    return [
        (None if np.isinf(lo) else float(lo), None if np.isinf(hi) else float(hi))
        for lo, hi in zip(program.lower, program.upper)
    ]


def _elastic_phase(program: ConvexProgram, tolerance: float) -> tuple[np.ndarray, list[str]]:
    """Minimize total row violation under hard bounds; return ``(x, conflicting rows)``."""
    n = program.size
    m_eq, m_in = len(program.eq_rhs), len(program.ineq_rhs)
    cost = np.concatenate([np.zeros(n), np.ones(2 * m_eq + m_in)])
    eye_eq = sparse.identity(m_eq, format="csr")
    A_eq = sparse.hstack(
        [program.eq_matrix, eye_eq, -eye_eq, sparse.csr_matrix((m_eq, m_in))], format="csr"
    )
    A_ub = sparse.hstack(
        [
            program.ineq_matrix,
            sparse.csr_matrix((m_in, 2 * m_eq)),
            -sparse.identity(m_in, format="csr"),
        ],
        format="csr",
    )
    bounds = _bound_pairs(program) + [(0.0, None)] * (2 * m_eq + m_in)
    result = linprog(
        cost,
        A_ub=A_ub if m_in else None,
        b_ub=program.ineq_rhs if m_in else None,
        A_eq=A_eq if m_eq else None,
        b_eq=program.eq_rhs if m_eq else None,
        bounds=bounds,
        method="highs",
    )
    if result.status != 0:
        raise CcrtdError(f"phase-one LP failed: {result.message}")

    x = result.x[:n]
    if result.fun <= tolerance:
        return x, []

    violation: dict[str, float] = {}
    elastic = result.x[n:]
    eq_violation = elastic[:m_eq] + elastic[m_eq : 2 * m_eq]
    duals = (
        (program.eq_names, eq_violation, result.eqlin.marginals if m_eq else []),
        (program.ineq_names, elastic[2 * m_eq :], result.ineqlin.marginals if m_in else []),
    )
    for names, amounts, marginals in duals:
        for name, amount, marginal in zip(names, amounts, marginals):
            if amount > tolerance or abs(marginal) > tolerance:
                violation[name] = max(violation.get(name, 0.0), float(amount))
    for i, name in enumerate(program.variables):
        if result.lower.marginals[i] > tolerance:
            violation.setdefault(f"lower[{name}]", 0.0)
        if result.upper.marginals[i] < -tolerance:
            violation.setdefault(f"upper[{name}]", 0.0)
    certificate = sorted(violation, key=lambda name: (-violation[name], name))
    logger.info("elastic phase leaves %.6g total violation", result.fun)
    return x, certificate


def _interior_point(rows: _Rows, n: int) -> np.ndarray:
    """Maximize a common slack margin ``t <= 1``; promote rows with no interior."""
    for _ in range(MAX_PROMOTIONS):
        m_in, m_eq = len(rows.h), len(rows.b)
        cost = np.zeros(n + 1)
        cost[-1] = -1.0
        A_ub = sparse.hstack([rows.G, np.ones((m_in, 1))], format="csr") if m_in else None
        A_eq = sparse.hstack([rows.A, sparse.csr_matrix((m_eq, 1))], format="csr")
        result = linprog(
            cost,
            A_ub=A_ub,
            b_ub=rows.h if m_in else None,
            A_eq=A_eq if m_eq else None,
            b_eq=rows.b if m_eq else None,
            bounds=[(None, None)] * n + [(None, 1.0)],
            method="highs",
        )
        if result.status != 0:
            raise CcrtdError(f"interior-start LP failed: {result.message}")
        margin = result.x[-1]
        if not m_in or margin >= MIN_INTERIOR_MARGIN:
            return result.x[:n]

        binding = np.flatnonzero(result.ineqlin.marginals < -MIN_INTERIOR_MARGIN)
        if binding.size == 0:
            slack = rows.h - rows.G @ result.x[:n]
            binding = np.flatnonzero(slack <= MIN_INTERIOR_MARGIN)
        logger.debug("promoting %d rows without interior to equalities", binding.size)
        rows.promote(binding)
    raise CcrtdError("could not find a strictly interior starting point")


def _check_convexity(hessian: np.ndarray):
    diagonal = np.diag(hessian)
    if np.count_nonzero(hessian - np.diag(diagonal)) == 0:
        lowest = float(np.min(diagonal)) if diagonal.size else 0.0
    else:
        lowest = float(np.min(linalg.eigvalsh(0.5 * (hessian + hessian.T))))
    if lowest < -NEGATIVE_CURVATURE:
        raise ConvexityViolationError(f"objective Hessian has eigenvalue {lowest:.3g}")


def _newton_direction(kkt: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return linalg.solve(kkt, rhs, assume_a="sym")
    except (linalg.LinAlgError, ValueError):
        logger.debug("KKT matrix is singular, falling back to least squares")
        return linalg.lstsq(kkt, rhs)[0]


def _barrier_value(program: ConvexProgram, G, h: np.ndarray, point: np.ndarray,
                   weight: float) -> float:
    slack = h - G @ point
    if np.any(slack <= 0.0):
        return np.inf
    return program.objective.value(point) - weight * float(np.sum(np.log(slack)))


def solve(program: ConvexProgram, opts: SolverOptions = SolverOptions()) -> Solution:
    """Solve ``program`` to KKT optimality with a primal barrier method.

    Every Newton step also predicts multipliers for the full step
    ``x + dx``; the solve ends as soon as that prediction meets the KKT
    tolerance. A barrier stage ends when the Newton decrement is negligible
    or the line search can no longer make progress; a centered point that
    already meets the tolerance is accepted as it is.
    """
    n = program.size
    tol = opts.kkt_tolerance

    bad_bounds = np.flatnonzero(program.lower > program.upper)
    if bad_bounds.size:
        names = program.variables
        certificate = tuple(
            label for i in bad_bounds for label in (f"lower[{names[i]}]", f"upper[{names[i]}]")
        )
        x = np.where(np.isfinite(program.lower), program.lower, 0.0)
        return _finish(program, x, SolverStatus.INFEASIBLE, Multipliers.zeros(program), 0,
                       certificate)

    x, certificate = _elastic_phase(program, tol)
    if certificate:
        logger.warning("program is infeasible; conflicting rows: %s", ", ".join(certificate[:5]))
        return _finish(program, x, SolverStatus.INFEASIBLE, Multipliers.zeros(program), 0,
                       tuple(certificate))

    rows = _Rows.normalize(program)
    x = _interior_point(rows, n)
    G, h, A, b = rows.G, rows.h, rows.A, rows.b
    m_eq = len(b)
    regularization = -KKT_REGULARIZATION * np.eye(m_eq)
    A_dense = A.toarray()

    mu = opts.initial_barrier
    nu = np.zeros(m_eq)
    z = mu / (h - G @ x)
    iterations = 0
    history: list[float] = []
    status = SolverStatus.ITERATION_LIMIT

    while True:
        _check_convexity(program.objective.hessian(x))
        centered = False
        while iterations < opts.max_iterations:
            slack = h - G @ x
            inverse = 1.0 / slack
            gradient = program.objective.gradient(x) + mu * (G.T @ inverse)
            curvature = G.T @ sparse.diags(mu * inverse**2) @ G
            hessian = program.objective.hessian(x) + curvature.toarray()

            kkt = np.block([[hessian, A_dense.T], [A_dense, regularization]])
            step = _newton_direction(kkt, np.concatenate([-gradient, b - A @ x]))
            dx, step_nu = step[:n], step[n:]
            iterations += 1

            # row multipliers linearized at the full step stay positive while |ratio| < 1
            ratio = (G @ dx) * inverse
            if np.all(np.abs(ratio) < 1.0):
                trial, trial_z = x + dx, mu * inverse * (1.0 + ratio)
                residuals = kkt_residuals(
                    program, trial, rows.multipliers(program, step_nu, trial_z)
                )
                if residuals.worst() <= tol:
                    x, nu, z = trial, step_nu, trial_z
                    status = SolverStatus.OPTIMAL
                    break

            decrement = float(dx @ hessian @ dx)
            current = _barrier_value(program, G, h, x, mu)
            if 0.5 * decrement <= CENTERING_TOLERANCE * max(1.0, abs(current)):
                nu = step_nu
                centered = True
                break

            growth = G @ dx
            ratios = slack[growth > 0] / growth[growth > 0]
            alpha = min(1.0, FRACTION_TO_BOUNDARY * float(np.min(ratios, initial=np.inf)))
            decrease = ARMIJO * float(gradient @ dx)
            noise = ROUNDOFF * max(1.0, abs(current))
            for _ in range(MAX_BACKTRACKS):
                if _barrier_value(program, G, h, x + alpha * dx, mu) <= (
                    current + alpha * decrease + noise
                ):
                    break
                alpha *= opts.backtracking
            else:
                logger.debug("line search made no progress at barrier weight %.3g", mu)
                centered = True
                break
            x = x + alpha * dx
            nu = step_nu

        if status is SolverStatus.OPTIMAL:
            history.append(program.objective.value(x))
            logger.debug("optimal at barrier weight %.3g after %d iterations", mu, iterations)
            break
        if not centered:
            logger.warning("iteration limit %d reached", opts.max_iterations)
            break

        z = mu / (h - G @ x)
        history.append(program.objective.value(x))
        residuals = kkt_residuals(program, x, rows.multipliers(program, nu, z))
        logger.debug(
            "barrier %.3g: objective %.10g, stationarity %.3g, primal %.3g, complementarity %.3g",
            mu, history[-1], residuals.stationarity, residuals.primal, residuals.complementarity,
        )
        if residuals.worst() <= tol:
            status = SolverStatus.OPTIMAL
            break
        if mu <= 0.5 * tol:
            logger.warning("solver stalled with KKT residual %.3g", residuals.worst())
            break
        mu = max(mu * opts.barrier_reduction, 0.5 * tol)

    multipliers = rows.multipliers(program, nu, z)
    return _finish(program, x, status, multipliers, iterations, (), tuple(history))


def _finish(
    program: ConvexProgram,
    x: np.ndarray,
    status: SolverStatus,
    multipliers: Multipliers,
    iterations: int,
    certificate: tuple[str, ...] = (),
    history: tuple[float, ...] = (),
) -> Solution:
    return Solution(
        x=x,
        objective=program.objective.value(x),
        status=status,
        multipliers=multipliers,
        residuals=kkt_residuals(program, x, multipliers),
        iterations=iterations,
        certificate=certificate,
        history=history,
    )

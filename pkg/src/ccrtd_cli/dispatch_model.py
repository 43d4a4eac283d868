"""Chance-constrained real-time dispatch model.

Builds the convex program for one horizon: quadratic generation cost plus
the closed-form expected AGC corrective cost, and every probabilistic
constraint turned into a deterministic linear row through the Cauchy
quantile. Costs held by the domain types are per period in dollars; the
system-file loader converts hourly prices before they get here.

Variable names are ``ps[unit,t]``, ``pa[unit,t]``, ``pw[farm,t]`` and
``w[t]`` with 1-based periods.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from ccrtd_cli.cauchy_stats import (
    MultivariateCauchy,
    UnivariateCauchy,
    linear_combination,
    quantile,
)
from ccrtd_cli.errors import (
    CcrtdError,
    DomainError,
    InfeasibleConfigError,
    InvalidInputError,
)
from ccrtd_cli.network import GridModel, PtdfMatrix, build_ptdf
from ccrtd_cli.program import ConvexProgram, LinearRow, RowTag, SeparableObjective

logger = logging.getLogger(__name__)

PARTICIPATION_TOLERANCE = 1e-9


def ps(unit: str, t: int) -> str:
    return f"ps[{unit},{t}]"


def pa(unit: str, t: int) -> str:
    return f"pa[{unit},{t}]"


def pw(farm: str, t: int) -> str:
    return f"pw[{farm},{t}]"


def w(t: int) -> str:
    return f"w[{t}]"


@dataclass(frozen=True)
class HorizonConfig:
    periods: int
    minutes: float
    initial_outputs: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.periods < 1:
            raise InvalidInputError(f"horizon needs at least one period, got {self.periods}")
        if not self.minutes > 0:
            raise InvalidInputError(f"period length must be positive, got {self.minutes}")


@dataclass(frozen=True)
class NonAgcUnit:
    name: str
    bus: int
    p_min: float
    p_max: float
    # MW/min; None means unlimited
    ramp_up: float | None = None
    ramp_down: float | None = None
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.a < 0:
            raise InvalidInputError(f"unit {self.name}: quadratic cost must be >= 0")
        for ramp in (self.ramp_up, self.ramp_down):
            if ramp is not None and ramp < 0:
                raise InvalidInputError(f"unit {self.name}: ramp rates must be >= 0")

    def cost(self, output):
        return self.a * np.square(output) + self.b * np.asarray(output) + self.c


@dataclass(frozen=True)
class AgcUnit(NonAgcUnit):
    gamma_up: float = 0.0
    gamma_down: float = 0.0
    participation: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 <= self.participation <= 1.0:
            raise InvalidInputError(
                f"unit {self.name}: participation factor must be in [0, 1], "
                f"got {self.participation}"
            )
        if self.gamma_up < 0 or self.gamma_down < 0:
            raise InvalidInputError(f"unit {self.name}: regulation prices must be >= 0")


@dataclass(frozen=True)
class WindFarm:
    name: str
    bus: int


@dataclass(frozen=True, eq=False)
class WindForecastPeriod:
    dist: MultivariateCauchy
    caps: np.ndarray
    total_cap: float

    def __post_init__(self):
        caps = np.array(self.caps, dtype=float, ndmin=1)
        if caps.shape != (self.dist.dim,):
            raise InvalidInputError(
                f"forecast has {self.dist.dim} farms but {caps.shape[0]} caps"
            )
        if np.any(caps < 0):
            raise InvalidInputError("wind farm caps must be non-negative")
        if not self.total_cap > 0:
            raise InvalidInputError(f"total wind bound must be positive, got {self.total_cap}")
        caps.setflags(write=False)
        object.__setattr__(self, "caps", caps)

    def independent(self) -> "WindForecastPeriod":
        return WindForecastPeriod(self.dist.diagonal(), self.caps, self.total_cap)


@dataclass(frozen=True)
class RiskLevels:
    """Allowed violation probabilities: AGC capacity, AGC ramp, reserve, lines."""

    delta: float
    beta: float
    epsilon: float
    eta: float

    def __post_init__(self):
        for name in ("delta", "beta", "epsilon", "eta"):
            value = getattr(self, name)
            if not 0.0 < value < 0.5:
                raise DomainError(f"risk level {name} must be in (0, 0.5), got {value}")

    def scaled(self, factor: float) -> "RiskLevels":
        return RiskLevels(
            self.delta * factor, self.beta * factor, self.epsilon * factor, self.eta * factor
        )


@dataclass(frozen=True)
class CorrectiveCostTerm:
    """Expected AGC regulation cost of one period as a function of scheduled wind.

    ``value(w) = A + B w - (C s / 2) ln(1 + z^2) + C (w - m) atan(z)`` with
    ``z = (w - m) / s`` for the aggregate wind law ``Cauchy(m, s)``.
    """

    A: float
    B: float
    C: float
    location: float
    scale: float
    w_max: float

    @classmethod
    def from_fleet(
        cls, units: Sequence[AgcUnit], aggregate: UnivariateCauchy, w_max: float
    ) -> "CorrectiveCostTerm":
        up = sum(u.participation * u.gamma_up for u in units)
        down = sum(u.participation * u.gamma_down for u in units)
        mu, sigma = aggregate.location, aggregate.scale
        at_zero = np.arctan(-mu / sigma)
        at_max = np.arctan((w_max - mu) / sigma)
        log_zero = np.log1p((mu / sigma) ** 2)
        log_max = np.log1p(((w_max - mu) / sigma) ** 2)
        B = -(up * at_zero + down * at_max) / np.pi
        A = sigma / (2.0 * np.pi) * (up * log_zero + down * log_max) - mu * B
        return cls(float(A), float(B), (up + down) / np.pi, mu, sigma, w_max)

    def evaluate(self, w):
        """Return ``(value, first derivative, second derivative)`` without a domain check."""
        offset = np.asarray(w, dtype=float) - self.location
        z = offset / self.scale
        arctan = np.arctan(z)
        value = (
            self.A
            + self.B * np.asarray(w, dtype=float)
            - 0.5 * self.C * self.scale * np.log1p(z * z)
            + self.C * offset * arctan
        )
        gradient = self.B + self.C * arctan
        curvature = self.C * self.scale / (offset * offset + self.scale * self.scale)
        return value, gradient, curvature


def corrective_cost(term: CorrectiveCostTerm, w: float) -> tuple[float, float, float]:
    slack = 1e-9 * max(1.0, term.w_max)
    if not -slack <= w <= term.w_max + slack:
        raise DomainError(f"scheduled wind {w} is outside [0, {term.w_max}]")
    value, gradient, curvature = term.evaluate(w)
    return float(value), float(gradient), float(curvature)


@dataclass(frozen=True)
class ModelOptions:
    # Cross-period ramp rows carry the stochastic quantile
    aprr: bool = True
    # Line rows include the AGC response to wind deviations
    affine_lines: bool = True


@dataclass(frozen=True, eq=False)
class DispatchProblem:
    grid: GridModel
    horizon: HorizonConfig
    units: tuple[NonAgcUnit, ...]
    agc_units: tuple[AgcUnit, ...]
    farms: tuple[WindFarm, ...]
    # periods x buses, MW
    loads: np.ndarray
    forecasts: tuple[WindForecastPeriod, ...]
    risk: RiskLevels
    reserve_up: np.ndarray
    reserve_down: np.ndarray

    def __post_init__(self):
        T = self.horizon.periods
        for name in ("units", "agc_units", "farms", "forecasts"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        loads = np.array(self.loads, dtype=float, ndmin=2)
        if loads.shape != (T, self.grid.bus_count):
            raise InvalidInputError(
                f"loads must be {T}x{self.grid.bus_count}, got {loads.shape}"
            )
        object.__setattr__(self, "loads", loads)
        for name in ("reserve_up", "reserve_down"):
            values = np.array(getattr(self, name), dtype=float, ndmin=1)
            if values.shape != (T,):
                raise InvalidInputError(f"{name} must have {T} entries, got {values.shape}")
            if np.any(values < 0):
                raise InvalidInputError(f"{name} must be non-negative")
            object.__setattr__(self, name, values)

        if len(self.forecasts) != T:
            raise InvalidInputError(f"expected {T} forecast periods, got {len(self.forecasts)}")
        if not self.farms:
            raise InvalidInputError("at least one wind farm is required")
        for t, forecast in enumerate(self.forecasts, start=1):
            if forecast.dist.dim != len(self.farms):
                raise InvalidInputError(
                    f"forecast period {t} covers {forecast.dist.dim} farms, "
                    f"expected {len(self.farms)}"
                )
        if not self.agc_units:
            raise InvalidInputError("at least one AGC unit is required")
        total = sum(u.participation for u in self.agc_units)
        if abs(total - 1.0) > PARTICIPATION_TOLERANCE:
            raise InvalidInputError(f"participation factors sum to {total}, not 1")

        names = [d.name for d in (*self.units, *self.agc_units, *self.farms)]
        if len(set(names)) != len(names):
            raise InvalidInputError("device names must be unique")
        for device in (*self.units, *self.agc_units, *self.farms):
            if not 0 <= device.bus < self.grid.bus_count:
                raise InvalidInputError(f"device {device.name} sits on unknown bus {device.bus}")
        missing = [
            u.name for u in (*self.units, *self.agc_units)
            if u.name not in self.horizon.initial_outputs
        ]
        if missing:
            raise InvalidInputError(f"initial outputs missing for {', '.join(missing)}")

    @property
    def periods(self) -> int:
        return self.horizon.periods

    @property
    def alphas(self) -> np.ndarray:
        return np.array([u.participation for u in self.agc_units], dtype=float)

    def aggregate(self, t: int) -> UnivariateCauchy:
        """Aggregate wind law of 0-based period ``t``."""
        return aggregate_wind(self.forecasts[t])

    def variables(self) -> list[str]:
        names = []
        for t in range(1, self.periods + 1):
            names += [ps(u.name, t) for u in self.units]
            names += [pa(u.name, t) for u in self.agc_units]
            names += [pw(f.name, t) for f in self.farms]
            names.append(w(t))
        return names


@dataclass(frozen=True)
class CompactChanceConstraint:
    """``Pr[A'u + B'y <= D] >= 1 - risk`` (``sense="<="``) or the ``>=`` mirror."""

    coefficients: dict[str, float]
    random: np.ndarray
    bound: float
    risk: float
    sense: Literal["<=", ">="]
    tag: RowTag

    def __post_init__(self):
        if not 0.0 < self.risk < 0.5:
            raise DomainError(f"risk level must be in (0, 0.5), got {self.risk}")
        if self.sense not in ("<=", ">="):
            raise InvalidInputError(f"chance constraints use <= or >=, got {self.sense!r}")


def aggregate_wind(forecast: WindForecastPeriod) -> UnivariateCauchy:
    return linear_combination(forecast.dist, np.ones(forecast.dist.dim))


def generation_cost(units: Sequence[NonAgcUnit], outputs) -> float:
    """Sum of quadratic generation costs; ``outputs`` is units x periods."""
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    if outputs.shape[0] != len(units):
        raise InvalidInputError(f"expected outputs for {len(units)} units, got {outputs.shape[0]}")
    return float(sum(np.sum(unit.cost(row)) for unit, row in zip(units, outputs)))


def convert_chance_row(c: CompactChanceConstraint, dist: MultivariateCauchy) -> LinearRow:
    """Deterministic equivalent of a compact chance constraint.

    With ``Y = B'y`` the row is ``A'u <= D - Q_Y(1 - risk)`` for ``<=`` and
    ``A'u >= D - Q_Y(risk)`` for ``>=``. A zero ``B`` raises
    ``DegenerateDistributionError``; callers emit a plain row instead.
    """
    combined = linear_combination(dist, c.random)
    level = 1.0 - c.risk if c.sense == "<=" else c.risk
    return LinearRow(dict(c.coefficients), c.sense, c.bound - quantile(combined, level), c.tag)


def _ramp_rows(
    coefficients: dict[str, float], up: float | None, down: float | None, shift: float,
    family: str, device: str, t: int,
) -> list[LinearRow]:
    """``-down - shift <= expr <= up - shift`` with unlimited sides dropped."""
    rows = []
    if up is not None:
        rows.append(LinearRow(coefficients, "<=", up - shift, RowTag(family, "up", device, t)))
    if down is not None:
        rows.append(
            LinearRow(coefficients, ">=", -down - shift, RowTag(family, "down", device, t))
        )
    return rows


def build_power_balance(problem: DispatchProblem) -> list[LinearRow]:
    rows = []
    for t in range(1, problem.periods + 1):
        coefficients = {ps(u.name, t): 1.0 for u in problem.units}
        coefficients |= {pa(u.name, t): 1.0 for u in problem.agc_units}
        coefficients |= {pw(f.name, t): 1.0 for f in problem.farms}
        rows.append(
            LinearRow(coefficients, "==", float(problem.loads[t - 1].sum()),
                      RowTag("balance", period=t))
        )
        link = {w(t): 1.0} | {pw(f.name, t): -1.0 for f in problem.farms}
        rows.append(LinearRow(link, "==", 0.0, RowTag("wind_total", period=t)))
    return rows


def build_generation_limits(problem: DispatchProblem) -> dict[str, tuple[float, float]]:
    bounds = {}
    for unit in (*problem.units, *problem.agc_units):
        if unit.p_min > unit.p_max:
            raise InfeasibleConfigError(
                f"unit {unit.name}: minimum output {unit.p_min} exceeds maximum {unit.p_max}"
            )
    for t in range(1, problem.periods + 1):
        forecast = problem.forecasts[t - 1]
        for unit in problem.units:
            bounds[ps(unit.name, t)] = (unit.p_min, unit.p_max)
        for unit in problem.agc_units:
            bounds[pa(unit.name, t)] = (unit.p_min, unit.p_max)
        for farm, cap in zip(problem.farms, forecast.caps):
            bounds[pw(farm.name, t)] = (0.0, float(cap))
        bounds[w(t)] = (0.0, forecast.total_cap)
    return bounds


def build_agc_capacity_rows(problem: DispatchProblem) -> list[LinearRow]:
    """Realized AGC output ``p - alpha (w~ - w)`` stays inside its limits."""
    rows = []
    K = len(problem.farms)
    for t in range(1, problem.periods + 1):
        dist = problem.forecasts[t - 1].dist
        for unit in problem.agc_units:
            alpha = unit.participation
            if alpha == 0.0:
                continue
            coefficients = {pa(unit.name, t): 1.0, w(t): alpha}
            random = np.full(K, -alpha)
            for sense, bound, side in (("<=", unit.p_max, "up"), (">=", unit.p_min, "down")):
                chance = CompactChanceConstraint(
                    coefficients, random, bound, problem.risk.delta, sense,
                    RowTag("agc_capacity", side, unit.name, t),
                )
                rows.append(convert_chance_row(chance, dist))
    return rows


def build_nonagc_ramp_rows(problem: DispatchProblem) -> list[LinearRow]:
    rows = []
    minutes = problem.horizon.minutes
    for unit in problem.units:
        up = None if unit.ramp_up is None else unit.ramp_up * minutes
        down = None if unit.ramp_down is None else unit.ramp_down * minutes
        initial = problem.horizon.initial_outputs[unit.name]
        rows += _ramp_rows({ps(unit.name, 1): 1.0}, up, down, -initial, "ramp", unit.name, 1)
        for t in range(2, problem.periods + 1):
            coefficients = {ps(unit.name, t): 1.0, ps(unit.name, t - 1): -1.0}
            rows += _ramp_rows(coefficients, up, down, 0.0, "ramp", unit.name, t)
    return rows


def build_agc_ramp_rows(
    problem: DispatchProblem, options: ModelOptions = ModelOptions()
) -> list[LinearRow]:
    """AGC ramp rows; period one is anchored deterministically at the initial output.

    Later periods bound the realized change
    ``dp + alpha dw - alpha (w~_t - w~_{t-1})`` using the joint law of two
    consecutive periods (block-diagonal scale). Without APRR the random
    part is replaced by its location.
    """
    rows = []
    minutes = problem.horizon.minutes
    K = len(problem.farms)
    for unit in problem.agc_units:
        up = None if unit.ramp_up is None else unit.ramp_up * minutes
        down = None if unit.ramp_down is None else unit.ramp_down * minutes
        initial = problem.horizon.initial_outputs[unit.name]
        rows += _ramp_rows({pa(unit.name, 1): 1.0}, up, down, -initial, "agc_ramp", unit.name, 1)

        alpha = unit.participation
        for t in range(2, problem.periods + 1):
            coefficients = {pa(unit.name, t): 1.0, pa(unit.name, t - 1): -1.0}
            if alpha == 0.0:
                rows += _ramp_rows(coefficients, up, down, 0.0, "agc_ramp", unit.name, t)
                continue
            coefficients |= {w(t): alpha, w(t - 1): -alpha}
            previous, current = problem.forecasts[t - 2].dist, problem.forecasts[t - 1].dist
            if not options.aprr:
                drift = alpha * (np.sum(previous.location) - np.sum(current.location))
                rows += _ramp_rows(coefficients, up, down, drift, "agc_ramp", unit.name, t)
                continue
            joint = MultivariateCauchy.block_diagonal([previous, current])
            random = np.concatenate([np.full(K, alpha), np.full(K, -alpha)])
            for sense, bound, side in (("<=", up, "up"), (">=", down, "down")):
                if bound is None:
                    continue
                chance = CompactChanceConstraint(
                    coefficients, random, bound if sense == "<=" else -bound,
                    problem.risk.beta, sense, RowTag("agc_ramp", side, unit.name, t),
                )
                rows.append(convert_chance_row(chance, joint))
    return rows


def build_reserve_rows(problem: DispatchProblem) -> list[LinearRow]:
    """AGC headroom and floor cover wind deviations plus the reserve margins."""
    rows = []
    K = len(problem.farms)
    p_max = sum(u.p_max for u in problem.agc_units)
    p_min = sum(u.p_min for u in problem.agc_units)
    for t in range(1, problem.periods + 1):
        coefficients = {w(t): 1.0} | {pa(u.name, t): 1.0 for u in problem.agc_units}
        dist = problem.forecasts[t - 1].dist
        limits = (
            ("<=", p_max - problem.reserve_up[t - 1], "up"),
            (">=", p_min + problem.reserve_down[t - 1], "down"),
        )
        for sense, bound, side in limits:
            chance = CompactChanceConstraint(
                coefficients, np.full(K, -1.0), float(bound), problem.risk.epsilon, sense,
                RowTag("reserve", side, period=t),
            )
            rows.append(convert_chance_row(chance, dist))
    return rows


def line_sensitivities(
    problem: DispatchProblem, ptdf: PtdfMatrix, options: ModelOptions = ModelOptions()
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(recourse, wind)``: per-line ``sum_j G_lj alpha_j`` and the L x K
    coefficients of realized farm outputs in the line flows."""
    G = ptdf.matrix
    farm_columns = G[:, [f.bus for f in problem.farms]]
    if not options.affine_lines:
        return np.zeros(G.shape[0]), farm_columns
    recourse = G[:, [u.bus for u in problem.agc_units]] @ problem.alphas
    return recourse, farm_columns - recourse[:, None]


def build_transmission_rows(
    problem: DispatchProblem, ptdf: PtdfMatrix, options: ModelOptions = ModelOptions()
) -> list[LinearRow]:
    rows = []
    G = ptdf.matrix
    recourse, wind = line_sensitivities(problem, ptdf, options)
    limits = problem.grid.line_limits()
    for l in range(problem.grid.line_count):
        if np.isinf(limits[l]):
            continue
        device = f"line{l}"
        deterministic = not np.any(np.abs(wind[l]) > 1e-12)
        for t in range(1, problem.periods + 1):
            coefficients: dict[str, float] = {}
            for unit in problem.units:
                key = ps(unit.name, t)
                coefficients[key] = coefficients.get(key, 0.0) + G[l, unit.bus]
            for unit in problem.agc_units:
                key = pa(unit.name, t)
                coefficients[key] = coefficients.get(key, 0.0) + G[l, unit.bus]
            coefficients[w(t)] = float(recourse[l])
            load_flow = float(G[l] @ problem.loads[t - 1])

            bounds = (("<=", limits[l] + load_flow, "up"), (">=", -limits[l] + load_flow, "down"))
            for sense, bound, side in bounds:
                tag = RowTag("line", side, device, t)
                if deterministic:
                    rows.append(LinearRow(coefficients, sense, bound, tag))
                    continue
                chance = CompactChanceConstraint(
                    coefficients, wind[l], bound, problem.risk.eta, sense, tag
                )
                rows.append(convert_chance_row(chance, problem.forecasts[t - 1].dist))
    return rows


def corrective_terms(problem: DispatchProblem) -> list[CorrectiveCostTerm]:
    return [
        CorrectiveCostTerm.from_fleet(problem.agc_units, problem.aggregate(t), f.total_cap)
        for t, f in enumerate(problem.forecasts)
    ]


def assemble(problem: DispatchProblem, options: ModelOptions = ModelOptions()) -> ConvexProgram:
    """Build the full convex program for ``problem``."""
    variables = problem.variables()
    index = {name: i for i, name in enumerate(variables)}
    n = len(variables)

    quadratic, linear = np.zeros(n), np.zeros(n)
    constant = 0.0
    for t in range(1, problem.periods + 1):
        for unit in problem.units:
            quadratic[index[ps(unit.name, t)]] = unit.a
            linear[index[ps(unit.name, t)]] = unit.b
            constant += unit.c
        for unit in problem.agc_units:
            quadratic[index[pa(unit.name, t)]] = unit.a
            linear[index[pa(unit.name, t)]] = unit.b
            constant += unit.c
    terms = tuple(
        (index[w(t)], term) for t, term in enumerate(corrective_terms(problem), start=1)
    )
    objective = SeparableObjective(quadratic, linear, constant, terms)

    ptdf = build_ptdf(problem.grid)
    rows = [
        *build_power_balance(problem),
        *build_nonagc_ramp_rows(problem),
        *build_agc_capacity_rows(problem),
        *build_agc_ramp_rows(problem, options),
        *build_reserve_rows(problem),
        *build_transmission_rows(problem, ptdf, options),
    ]
    bounds = build_generation_limits(problem)
    lower = np.array([bounds[name][0] for name in variables])
    upper = np.array([bounds[name][1] for name in variables])

    program = ConvexProgram.from_rows(variables, objective, rows, lower, upper)
    expected = problem.periods * (
        len(problem.units) + len(problem.agc_units) + len(problem.farms) + 1
    )
    if program.size != expected:
        raise CcrtdError(f"internal: assembled {program.size} variables, expected {expected}")
    logger.info(
        "assembled %d variables, %d equality and %d inequality rows",
        program.size, len(program.eq_rhs), len(program.ineq_rhs),
    )
    return program


@dataclass(frozen=True, eq=False)
class DispatchSchedule:
    """Scheduled MW per device and period (rows are devices, columns periods)."""

    unit_names: tuple[str, ...]
    agc_names: tuple[str, ...]
    farm_names: tuple[str, ...]
    non_agc: np.ndarray
    agc: np.ndarray
    wind: np.ndarray
    total_wind: np.ndarray

    @property
    def periods(self) -> int:
        return self.total_wind.shape[0]

    def check_against(self, problem: DispatchProblem):
        expected = (
            tuple(u.name for u in problem.units),
            tuple(u.name for u in problem.agc_units),
            tuple(f.name for f in problem.farms),
        )
        if (self.unit_names, self.agc_names, self.farm_names) != expected:
            raise InvalidInputError("schedule devices do not match the system")
        if self.periods != problem.periods:
            raise InvalidInputError(
                f"schedule has {self.periods} periods, system horizon has {problem.periods}"
            )


def extract_schedule(problem: DispatchProblem, program: ConvexProgram, x) -> DispatchSchedule:
    index = program.index
    T = range(1, problem.periods + 1)

    def grid(names, var):
        return np.array([[x[index[var(n, t)]] for t in T] for n in names], dtype=float).reshape(
            len(names), problem.periods
        )

    units = tuple(u.name for u in problem.units)
    agc = tuple(u.name for u in problem.agc_units)
    farms = tuple(f.name for f in problem.farms)
    return DispatchSchedule(
        unit_names=units,
        agc_names=agc,
        farm_names=farms,
        non_agc=grid(units, ps),
        agc=grid(agc, pa),
        wind=grid(farms, pw),
        total_wind=np.array([x[index[w(t)]] for t in T], dtype=float),
    )


def objective_breakdown(problem: DispatchProblem, schedule: DispatchSchedule) -> dict[str, float]:
    """Generation cost, expected corrective cost and their total for a schedule."""
    generation = generation_cost(problem.units, schedule.non_agc) + generation_cost(
        problem.agc_units, schedule.agc
    )
    corrective = sum(
        float(term.evaluate(schedule.total_wind[t])[0])
        for t, term in enumerate(corrective_terms(problem))
    )
    return {
        "generation_cost": generation,
        "corrective_cost": corrective,
        "total_cost": generation + corrective,
    }

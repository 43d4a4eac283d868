"""Monte Carlo validation of a dispatch schedule.

Scenarios draw realized farm outputs for the whole horizon at once from the
block-diagonal joint law, so each period is exactly its forecast law and
consecutive periods follow the joint model used by the ramp rows. AGC
units respond through the affine rule ``p~ = p - alpha (w~ - w)``.
"""

import logging
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel

from ccrtd_cli.cauchy_stats import MultivariateCauchy, sample
from ccrtd_cli.dispatch_model import AgcUnit, DispatchProblem, DispatchSchedule, generation_cost
from ccrtd_cli.errors import InvalidInputError, NotApplicableError
from ccrtd_cli.network import PtdfMatrix, build_ptdf

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 10_000
# Realized quantities may exceed a limit by this much (MW) before counting as a violation
VIOLATION_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    # samples x periods x farms, MW
    wind: np.ndarray
    seed: int
    clipped: bool = False

    @property
    def size(self) -> int:
        return self.wind.shape[0]

    @property
    def totals(self) -> np.ndarray:
        return self.wind.sum(axis=2)

    @property
    def mode(self) -> str:
        return "clipped" if self.clipped else "unclipped"


class ViolationRate(BaseModel):
    family: str
    side: str
    device: str = ""
    period: int
    rate: float
    standard_error: float
    samples: int


class LineSecurity(BaseModel):
    line: int
    index: float
    period_average: float


class CostEstimate(BaseModel):
    generation_cost: float
    corrective_cost: float
    corrective_standard_error: float
    total_cost: float


class SecurityReport(BaseModel):
    samples: int
    seed: int
    mode: str
    ramping_index: list[float] | None = None
    ramping_average: float | None = None
    lines: list[LineSecurity] = []
    family_maxima: dict[str, ViolationRate] = {}
    rates: list[ViolationRate] = []
    cost: CostEstimate | None = None
    passed: bool = True


def draw_scenarios(
    problem: DispatchProblem, n: int, seed: int, clip: bool = False, workers: int = 1
) -> ScenarioSet:
    joint = MultivariateCauchy.block_diagonal([f.dist for f in problem.forecasts])
    wind = sample(joint, n, seed, workers).reshape(n, problem.periods, len(problem.farms))
    if clip:
        caps = np.array([f.caps for f in problem.forecasts])
        wind = np.clip(wind, 0.0, caps)
    logger.info("drew %d %s scenarios with seed %d", n, "clipped" if clip else "unclipped", seed)
    return ScenarioSet(wind, seed, clip)


def realize_agc(schedule: DispatchSchedule, wind_totals, agc_units) -> np.ndarray:
    """Realized AGC outputs, samples x units x periods."""
    totals = np.atleast_2d(np.asarray(wind_totals, dtype=float))
    alphas = np.array([u.participation for u in agc_units], dtype=float)
    deviation = totals - schedule.total_wind
    return schedule.agc[None, :, :] - alphas[None, :, None] * deviation[:, None, :]


def _ramp_limits(unit: AgcUnit, minutes: float) -> tuple[float, float]:
    up = np.inf if unit.ramp_up is None else unit.ramp_up * minutes
    down = np.inf if unit.ramp_down is None else unit.ramp_down * minutes
    return up, down


def ramping_security_index(
    problem: DispatchProblem, schedule: DispatchSchedule, scenarios: ScenarioSet
) -> np.ndarray:
    """Fraction of scenarios with enough AGC ramping for each transition ``t-1 -> t``."""
    if problem.periods < 2:
        raise NotApplicableError("ramping index needs at least two periods")
    realized = realize_agc(schedule, scenarios.totals, problem.agc_units)
    change = np.diff(realized, axis=2)
    sufficient = np.ones((scenarios.size, problem.periods - 1), dtype=bool)
    for j, unit in enumerate(problem.agc_units):
        up, down = _ramp_limits(unit, problem.horizon.minutes)
        sufficient &= change[:, j, :] <= up + VIOLATION_TOLERANCE
        sufficient &= change[:, j, :] >= -down - VIOLATION_TOLERANCE
    return sufficient.mean(axis=0)


def realized_flows(
    problem: DispatchProblem, schedule: DispatchSchedule, scenarios: ScenarioSet,
    ptdf: PtdfMatrix,
) -> np.ndarray:
    """Line flows under realized wind and AGC response, samples x periods x lines."""
    D = problem.grid.bus_count

    def placement(devices) -> np.ndarray:
        matrix = np.zeros((D, len(devices)))
        for i, device in enumerate(devices):
            matrix[device.bus, i] = 1.0
        return matrix

    units, agc, farms = placement(problem.units), placement(problem.agc_units), placement(
        problem.farms
    )
    realized = realize_agc(schedule, scenarios.totals, problem.agc_units)
    flows = np.empty((scenarios.size, problem.periods, problem.grid.line_count))
    for t in range(problem.periods):
        fixed = units @ schedule.non_agc[:, t] - problem.loads[t]
        injections = fixed + realized[:, :, t] @ agc.T + scenarios.wind[:, t, :] @ farms.T
        flows[:, t, :] = injections @ ptdf.matrix.T
    return flows


def _line_secure(problem: DispatchProblem, flows: np.ndarray, line: int) -> np.ndarray:
    if not 0 <= line < problem.grid.line_count:
        raise InvalidInputError(f"unknown line {line}")
    limit = problem.grid.line_limits()[line]
    return np.abs(flows[:, :, line]) <= limit + VIOLATION_TOLERANCE


def transmission_security_index(
    problem: DispatchProblem, schedule: DispatchSchedule, scenarios: ScenarioSet,
    ptdf: PtdfMatrix, line: int, flows: np.ndarray | None = None,
) -> float:
    """Fraction of scenarios in which ``line`` stays within its limit in every period."""
    if flows is None:
        flows = realized_flows(problem, schedule, scenarios, ptdf)
    return float(np.all(_line_secure(problem, flows, line), axis=1).mean())


def line_period_security(
    problem: DispatchProblem, flows: np.ndarray, line: int
) -> np.ndarray:
    """Per-period fraction of scenarios with ``line`` within its limit."""
    return _line_secure(problem, flows, line).mean(axis=0)


def _rate(family: str, side: str, device: str, period: int, violated: np.ndarray) -> ViolationRate:
    n = violated.size
    rate = float(np.count_nonzero(violated)) / n
    return ViolationRate(
        family=family, side=side, device=device, period=period, rate=rate,
        standard_error=float(np.sqrt(rate * (1.0 - rate) / n)), samples=n,
    )


def chance_violation_rates(
    problem: DispatchProblem, schedule: DispatchSchedule, scenarios: ScenarioSet,
    flows: np.ndarray | None = None,
) -> list[ViolationRate]:
    """Empirical violation frequency of every probabilistic statement."""
    schedule.check_against(problem)
    tol = VIOLATION_TOLERANCE
    totals = scenarios.totals
    realized = realize_agc(schedule, totals, problem.agc_units)
    rates = []

    for j, unit in enumerate(problem.agc_units):
        up, down = _ramp_limits(unit, problem.horizon.minutes)
        for t in range(problem.periods):
            rates.append(_rate("agc_capacity", "up", unit.name, t + 1,
                               realized[:, j, t] > unit.p_max + tol))
            rates.append(_rate("agc_capacity", "down", unit.name, t + 1,
                               realized[:, j, t] < unit.p_min - tol))
        for t in range(1, problem.periods):
            change = realized[:, j, t] - realized[:, j, t - 1]
            if np.isfinite(up):
                rates.append(_rate("agc_ramp", "up", unit.name, t + 1, change > up + tol))
            if np.isfinite(down):
                rates.append(_rate("agc_ramp", "down", unit.name, t + 1, change < -down - tol))

    p_max = sum(u.p_max for u in problem.agc_units)
    p_min = sum(u.p_min for u in problem.agc_units)
    for t in range(problem.periods):
        scheduled = schedule.agc[:, t].sum()
        shortfall = schedule.total_wind[t] - totals[:, t]
        rates.append(_rate("reserve", "up", "", t + 1,
                           shortfall + problem.reserve_up[t] > p_max - scheduled + tol))
        rates.append(_rate("reserve", "down", "", t + 1,
                           -shortfall + problem.reserve_down[t] > scheduled - p_min + tol))

    if problem.grid.line_count:
        if flows is None:
            flows = realized_flows(problem, schedule, scenarios, build_ptdf(problem.grid))
        limits = problem.grid.line_limits()
        for l in np.flatnonzero(np.isfinite(limits)):
            for t in range(problem.periods):
                rates.append(_rate("line", "up", f"line{l}", t + 1,
                                   flows[:, t, l] > limits[l] + tol))
                rates.append(_rate("line", "down", f"line{l}", t + 1,
                                   flows[:, t, l] < -limits[l] - tol))
    return rates


def family_maxima(rates: list[ViolationRate]) -> dict[str, ViolationRate]:
    maxima: dict[str, ViolationRate] = {}
    for rate in rates:
        if rate.family not in maxima or rate.rate > maxima[rate.family].rate:
            maxima[rate.family] = rate
    return maxima


def risk_level_for(problem: DispatchProblem, family: str) -> float:
    return {
        "agc_capacity": problem.risk.delta,
        "agc_ramp": problem.risk.beta,
        "reserve": problem.risk.epsilon,
        "line": problem.risk.eta,
    }[family]


def meets_risk_levels(problem: DispatchProblem, rates: list[ViolationRate]) -> bool:
    """True when every rate is within three binomial standard errors of its risk level."""
    for rate in rates:
        level = risk_level_for(problem, rate.family)
        if rate.rate > level + 3.0 * np.sqrt(level * (1.0 - level) / rate.samples):
            return False
    return True


def mc_expected_cost(
    problem: DispatchProblem, schedule: DispatchSchedule, scenarios: ScenarioSet
) -> CostEstimate:
    """Generation cost plus the sampled AGC regulation cost.

    Regulation is charged only for realized totals inside ``[0, W_max]``.
    """
    up = sum(u.participation * u.gamma_up for u in problem.agc_units)
    down = sum(u.participation * u.gamma_down for u in problem.agc_units)
    totals = scenarios.totals
    w_max = np.array([f.total_cap for f in problem.forecasts])
    deviation = totals - schedule.total_wind
    inside = (totals >= 0.0) & (totals <= w_max)
    per_scenario = np.sum(
        inside * (up * np.maximum(-deviation, 0.0) + down * np.maximum(deviation, 0.0)), axis=1
    )
    generation = generation_cost(problem.units, schedule.non_agc) + generation_cost(
        problem.agc_units, schedule.agc
    )
    corrective = float(per_scenario.mean())
    spread = float(per_scenario.std(ddof=1)) if scenarios.size > 1 else 0.0
    return CostEstimate(
        generation_cost=generation,
        corrective_cost=corrective,
        corrective_standard_error=spread / np.sqrt(scenarios.size),
        total_cost=generation + corrective,
    )


def evaluate_schedule(
    problem: DispatchProblem,
    schedule: DispatchSchedule,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    clip: bool = False,
    workers: int = 1,
) -> SecurityReport:
    """Draw scenarios and collect every index, rate and cost statistic."""
    schedule.check_against(problem)
    scenarios = draw_scenarios(problem, samples, seed, clip, workers)
    ptdf = build_ptdf(problem.grid)
    flows = realized_flows(problem, schedule, scenarios, ptdf)

    ramping = None
    if problem.periods >= 2:
        ramping = ramping_security_index(problem, schedule, scenarios)
    lines = [
        LineSecurity(
            line=l,
            index=transmission_security_index(problem, schedule, scenarios, ptdf, l, flows),
            period_average=float(line_period_security(problem, flows, l).mean()),
        )
        for l in range(problem.grid.line_count)
    ]
    rates = chance_violation_rates(problem, schedule, scenarios, flows)
    report = SecurityReport(
        samples=samples,
        seed=seed,
        mode=scenarios.mode,
        ramping_index=None if ramping is None else [float(v) for v in ramping],
        ramping_average=None if ramping is None else float(ramping.mean()),
        lines=lines,
        family_maxima=family_maxima(rates),
        rates=rates,
        cost=mc_expected_cost(problem, schedule, scenarios),
        passed=meets_risk_levels(problem, rates),
    )
    logger.info("validation %s", "passed" if report.passed else "failed")
    return report

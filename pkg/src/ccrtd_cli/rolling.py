"""Rolling-horizon driver: solve a T-period window, commit its first period, slide."""

import logging
from dataclasses import dataclass, field

import pandas as pd

from ccrtd_cli.config import SystemFile
from ccrtd_cli.csv_io import schedule_frame
from ccrtd_cli.dispatch_model import DispatchSchedule, ModelOptions, assemble, extract_schedule
from ccrtd_cli.errors import InvalidInputError, WindowInfeasibleError
from ccrtd_cli.solver import SolverOptions, solve

logger = logging.getLogger(__name__)


def first_period(schedule: DispatchSchedule) -> DispatchSchedule:
    return DispatchSchedule(
        unit_names=schedule.unit_names,
        agc_names=schedule.agc_names,
        farm_names=schedule.farm_names,
        non_agc=schedule.non_agc[:, :1],
        agc=schedule.agc[:, :1],
        wind=schedule.wind[:, :1],
        total_wind=schedule.total_wind[:1],
    )


@dataclass
class RollingResult:
    committed: list[DispatchSchedule] = field(default_factory=list)
    objectives: list[float] = field(default_factory=list)

    @property
    def windows(self) -> int:
        return len(self.committed)

    def trajectory(self) -> pd.DataFrame:
        """Committed outputs with the window each period came from."""
        frames = [
            schedule_frame(step, first_period=w).assign(window=w)
            for w, step in enumerate(self.committed, start=1)
        ]
        frame = pd.concat(frames, ignore_index=True)
        return frame[["window", "period", "kind", "device", "mw"]]


def run_rolling(
    system: SystemFile,
    windows: int,
    options: ModelOptions = ModelOptions(),
    solver_options: SolverOptions = SolverOptions(),
    risk_scale: float = 1.0,
    independent_farms: bool = False,
) -> RollingResult:
    """Commit period one of ``windows`` successive solves.

    Each committed output anchors the ramp rows of the next window.
    """
    if windows < 1:
        raise InvalidInputError(f"need at least one window, got {windows}")
    needed = windows + system.horizon.periods - 1
    if needed > system.available_periods:
        raise InvalidInputError(
            f"{windows} windows of {system.horizon.periods} periods need {needed} periods "
            f"of data, the system file has {system.available_periods}"
        )

    result = RollingResult()
    anchors = dict(system.horizon.initial_outputs)
    for window in range(windows):
        problem = system.to_problem(window, risk_scale, independent_farms, anchors)
        program = assemble(problem, options)
        solution = solve(program, solver_options)
        if not solution.optimal:
            raise WindowInfeasibleError(window + 1, solution.status.value,
                                        list(solution.certificate))
        committed = first_period(extract_schedule(problem, program, solution.x))
        result.committed.append(committed)
        result.objectives.append(solution.objective)
        anchors = dict(zip(committed.unit_names, committed.non_agc[:, 0]))
        anchors |= dict(zip(committed.agc_names, committed.agc[:, 0]))
        logger.info("window %d committed, objective %.2f", window + 1, solution.objective)
    return result

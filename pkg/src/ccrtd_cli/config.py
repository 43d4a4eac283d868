"""System file schema.

The system file is JSON in MW, minutes and hourly prices. ``SystemFile``
validates it completely; ``to_problem`` is the only way to turn it into a
``DispatchProblem`` and converts hourly prices to per-period dollars.
"""

import logging
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ccrtd_cli.cauchy_stats import MultivariateCauchy
from ccrtd_cli.dispatch_model import (
    AgcUnit,
    DispatchProblem,
    HorizonConfig,
    NonAgcUnit,
    RiskLevels,
    WindFarm,
    WindForecastPeriod,
)
from ccrtd_cli.errors import CcrtdError, InvalidInputError
from ccrtd_cli.network import GridModel, Line

logger = logging.getLogger(__name__)


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LineSpec(_Spec):
    from_bus: int = Field(ge=0)
    to_bus: int = Field(ge=0)
    reactance: float = Field(gt=0)
    limit: float | None = Field(default=None, ge=0)


class GridSpec(_Spec):
    buses: int = Field(ge=1)
    slack: int = Field(default=0, ge=0)
    lines: list[LineSpec] = []


class UnitSpec(_Spec):
    name: str
    bus: int = Field(ge=0)
    p_min: float
    p_max: float
    ramp_up: float | None = Field(default=None, ge=0)
    ramp_down: float | None = Field(default=None, ge=0)
    a: float = Field(default=0.0, ge=0)
    b: float = 0.0
    c: float = 0.0

    @model_validator(mode="after")
    def _limits_ordered(self):
        if self.p_min > self.p_max:
            raise ValueError(f"p_min {self.p_min} exceeds p_max {self.p_max}")
        return self


class AgcUnitSpec(UnitSpec):
    participation: float | Literal["proportional"] = "proportional"
    gamma_up: float | None = Field(default=None, ge=0)
    gamma_down: float | None = Field(default=None, ge=0)


class WindFarmSpec(_Spec):
    name: str
    bus: int = Field(ge=0)
    capacity: float = Field(gt=0)


class ForecastSpec(_Spec):
    mu: list[float]
    sigma: list[list[float]]
    caps: list[float] | None = None
    w_bar: float | None = Field(default=None, gt=0)


class RiskSpec(_Spec):
    delta: float = Field(gt=0, lt=0.5)
    beta: float = Field(gt=0, lt=0.5)
    epsilon: float = Field(gt=0, lt=0.5)
    eta: float = Field(gt=0, lt=0.5)


class ReserveSpec(_Spec):
    r_plus: float | list[float] = 0.0
    r_minus: float | list[float] = 0.0


class HorizonSpec(_Spec):
    periods: int = Field(ge=1)
    minutes: float = Field(gt=0)
    initial_outputs: dict[str, float] = {}


class PriceSpec(_Spec):
    gamma_up: float = Field(ge=0)
    gamma_down: float = Field(ge=0)


class SystemFile(_Spec):
    grid: GridSpec
    units: list[UnitSpec] = []
    agc_units: list[AgcUnitSpec] = Field(min_length=1)
    wind_farms: list[WindFarmSpec] = Field(min_length=1)
    # periods x buses, MW
    loads: list[list[float]]
    forecasts: list[ForecastSpec]
    risk: RiskSpec
    reserves: ReserveSpec = ReserveSpec()
    horizon: HorizonSpec
    prices: PriceSpec

    @model_validator(mode="after")
    def _cross_references(self):
        buses = self.grid.buses
        if self.grid.slack >= buses:
            raise ValueError(f"slack bus {self.grid.slack} is not one of {buses} buses")
        for i, line in enumerate(self.grid.lines):
            if max(line.from_bus, line.to_bus) >= buses:
                raise ValueError(f"line {i} references a bus outside 0..{buses - 1}")
            if line.from_bus == line.to_bus:
                raise ValueError(f"line {i} is a self loop")
        devices = [*self.units, *self.agc_units, *self.wind_farms]
        names = [d.name for d in devices]
        if len(set(names)) != len(names):
            raise ValueError("device names must be unique")
        for device in devices:
            if device.bus >= buses:
                raise ValueError(f"device {device.name} sits on bus {device.bus} of {buses}")

        shares = [u.participation for u in self.agc_units]
        proportional = [s == "proportional" for s in shares]
        if any(proportional) and not all(proportional):
            raise ValueError("participation must be all numbers or all 'proportional'")
        if not any(proportional):
            if any(s < 0 or s > 1 for s in shares):
                raise ValueError("participation factors must be in [0, 1]")
            if abs(sum(shares) - 1.0) > 1e-9:
                raise ValueError(f"participation factors sum to {sum(shares)}, not 1")

        for t, row in enumerate(self.loads):
            if len(row) != buses:
                raise ValueError(f"loads row {t} has {len(row)} entries, expected {buses}")
        K = len(self.wind_farms)
        for t, forecast in enumerate(self.forecasts):
            if len(forecast.mu) != K or any(len(r) != K for r in forecast.sigma):
                raise ValueError(f"forecast {t} must cover {K} farms")
            if len(forecast.sigma) != K:
                raise ValueError(f"forecast {t} scale matrix must be {K}x{K}")
            if forecast.caps is not None and len(forecast.caps) != K:
                raise ValueError(f"forecast {t} caps must have {K} entries")
            try:
                MultivariateCauchy(forecast.mu, forecast.sigma)
            except CcrtdError as e:
                raise ValueError(f"forecast {t}: {e}") from e

        if self.available_periods < self.horizon.periods:
            raise ValueError(
                f"horizon needs {self.horizon.periods} periods of loads and forecasts, "
                f"got {self.available_periods}"
            )
        for name in ("r_plus", "r_minus"):
            value = getattr(self.reserves, name)
            if isinstance(value, list) and len(value) < self.available_periods:
                raise ValueError(f"reserves.{name} needs {self.available_periods} entries")
            if np.any(np.asarray(value) < 0):
                raise ValueError(f"reserves.{name} must be non-negative")
        missing = [u.name for u in (*self.units, *self.agc_units)
                   if u.name not in self.horizon.initial_outputs]
        if missing:
            raise ValueError(f"horizon.initial_outputs is missing {', '.join(missing)}")
        return self

    @property
    def available_periods(self) -> int:
        return min(len(self.loads), len(self.forecasts))

    @classmethod
    def load(cls, path: str | Path) -> "SystemFile":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise InvalidInputError(f"cannot read system file {path}: {e}") from e
        return cls.parse(text)

    @classmethod
    def parse(cls, text: str) -> "SystemFile":
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            raise InvalidInputError(describe_validation_error(e)) from e

    def participations(self) -> list[float]:
        if self.agc_units[0].participation == "proportional":
            total = sum(u.p_max for u in self.agc_units)
            return [u.p_max / total for u in self.agc_units]
        return [float(u.participation) for u in self.agc_units]

    def grid_model(self) -> GridModel:
        return GridModel(
            bus_count=self.grid.buses,
            lines=tuple(
                Line(line.from_bus, line.to_bus, line.reactance, line.limit)
                for line in self.grid.lines
            ),
            slack_bus=self.grid.slack,
        )

    def to_problem(
        self,
        start: int = 0,
        risk_scale: float = 1.0,
        independent_farms: bool = False,
        initial_outputs: dict[str, float] | None = None,
    ) -> DispatchProblem:
        """Dispatch problem for periods ``[start, start + T)`` of the file.

        Hourly prices are scaled by ``minutes / 60``.
        """
        T = self.horizon.periods
        if start < 0 or start + T > self.available_periods:
            raise InvalidInputError(
                f"periods {start + 1}..{start + T} exceed the {self.available_periods} "
                "periods in the system file"
            )
        hours = self.horizon.minutes / 60.0

        def unit_fields(spec: UnitSpec) -> dict:
            return dict(
                name=spec.name, bus=spec.bus, p_min=spec.p_min, p_max=spec.p_max,
                ramp_up=spec.ramp_up, ramp_down=spec.ramp_down,
                a=spec.a * hours, b=spec.b * hours, c=spec.c * hours,
            )

        units = tuple(NonAgcUnit(**unit_fields(u)) for u in self.units)
        agc_units = tuple(
            AgcUnit(
                **unit_fields(u),
                gamma_up=hours * (self.prices.gamma_up if u.gamma_up is None else u.gamma_up),
                gamma_down=hours * (
                    self.prices.gamma_down if u.gamma_down is None else u.gamma_down
                ),
                participation=alpha,
            )
            for u, alpha in zip(self.agc_units, self.participations())
        )

        capacities = [f.capacity for f in self.wind_farms]
        forecasts = []
        for spec in self.forecasts[start : start + T]:
            caps = capacities if spec.caps is None else spec.caps
            forecast = WindForecastPeriod(
                MultivariateCauchy(spec.mu, spec.sigma),
                np.array(caps, dtype=float),
                float(sum(caps)) if spec.w_bar is None else spec.w_bar,
            )
            forecasts.append(forecast.independent() if independent_farms else forecast)

        def reserve(value) -> np.ndarray:
            if isinstance(value, list):
                return np.array(value[start : start + T], dtype=float)
            return np.full(T, float(value))

        risk = RiskLevels(
            self.risk.delta, self.risk.beta, self.risk.epsilon, self.risk.eta
        ).scaled(risk_scale)

        return DispatchProblem(
            grid=self.grid_model(),
            horizon=HorizonConfig(
                T, self.horizon.minutes, dict(initial_outputs or self.horizon.initial_outputs)
            ),
            units=units,
            agc_units=agc_units,
            farms=tuple(WindFarm(f.name, f.bus) for f in self.wind_farms),
            loads=np.array(self.loads[start : start + T], dtype=float),
            forecasts=tuple(forecasts),
            risk=risk,
            reserve_up=reserve(self.reserves.r_plus),
            reserve_down=reserve(self.reserves.r_minus),
        )


def describe_validation_error(error: ValidationError) -> str:
    """One ``dotted.path: message`` line per failing field."""
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "invalid system file:\n" + "\n".join(lines)

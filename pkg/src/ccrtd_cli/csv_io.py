"""CSV files: schedules, reports, PTDF dumps and fit samples."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from ccrtd_cli.dispatch_model import DispatchSchedule
from ccrtd_cli.errors import InvalidInputError
from ccrtd_cli.network import PtdfMatrix
from ccrtd_cli.validation import SecurityReport

logger = logging.getLogger(__name__)

SCHEDULE_COLUMNS = ["period", "kind", "device", "mw"]
DEVICE_KINDS = ("non_agc", "agc", "wind")
TOTAL_KIND = "wind_total"


def schedule_frame(schedule: DispatchSchedule, first_period: int = 1) -> pd.DataFrame:
    records = []
    groups = (
        ("non_agc", schedule.unit_names, schedule.non_agc),
        ("agc", schedule.agc_names, schedule.agc),
        ("wind", schedule.farm_names, schedule.wind),
    )
    for t in range(schedule.periods):
        period = first_period + t
        for kind, names, values in groups:
            records += [(period, kind, name, float(values[i, t])) for i, name in enumerate(names)]
        records.append((period, TOTAL_KIND, "", float(schedule.total_wind[t])))
    return pd.DataFrame.from_records(records, columns=SCHEDULE_COLUMNS)


def write_schedule(schedule: DispatchSchedule, path: str | Path):
    schedule_frame(schedule).to_csv(path, index=False)


def _read_csv(path: str | Path, **kwargs) -> pd.DataFrame:
    try:
        return pd.read_csv(path, **kwargs)
    except FileNotFoundError as e:
        raise InvalidInputError(f"file not found: {path}") from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InvalidInputError(f"{path}: malformed CSV: {e}") from e


def read_schedule(path: str | Path) -> DispatchSchedule:
    frame = _read_csv(path, keep_default_na=False)
    missing = [c for c in SCHEDULE_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidInputError(f"{path}: missing columns {', '.join(missing)}")

    periods = pd.to_numeric(frame["period"], errors="coerce")
    values = pd.to_numeric(frame["mw"], errors="coerce")
    known = frame["kind"].isin((*DEVICE_KINDS, TOTAL_KIND))
    bad = frame.index[periods.isna() | values.isna() | ~known]
    if len(bad):
        # header is line 1
        raise InvalidInputError(f"{path}: line {int(bad[0]) + 2}: malformed schedule row")
    frame = frame.assign(period=periods.astype(int), mw=values.astype(float))

    first = int(frame["period"].min())
    T = int(frame["period"].max()) - first + 1

    def block(kind: str) -> tuple[tuple[str, ...], np.ndarray]:
        rows = frame[frame["kind"] == kind]
        names = tuple(dict.fromkeys(rows["device"].astype(str)))
        grid = np.full((len(names), T), np.nan)
        for _, row in rows.iterrows():
            grid[names.index(str(row["device"])), row["period"] - first] = row["mw"]
        if np.isnan(grid).any():
            raise InvalidInputError(f"{path}: {kind} rows do not cover every period")
        return names, grid

    unit_names, non_agc = block("non_agc")
    agc_names, agc = block("agc")
    farm_names, wind = block("wind")
    _, total = block(TOTAL_KIND)
    if total.shape[0] != 1:
        raise InvalidInputError(f"{path}: expected one {TOTAL_KIND} row per period")
    return DispatchSchedule(
        unit_names=unit_names,
        agc_names=agc_names,
        farm_names=farm_names,
        non_agc=non_agc,
        agc=agc,
        wind=wind,
        total_wind=total[0],
    )


def read_samples(path: str | Path) -> np.ndarray:
    """Numeric samples, one per row; an optional header row is skipped."""
    frame = _read_csv(path, header=None, dtype=str, skip_blank_lines=True)
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    if len(numeric) and numeric.iloc[0].isna().all():
        numeric = numeric.iloc[1:]
    bad = numeric.index[numeric.isna().any(axis=1)]
    if len(bad):
        raise InvalidInputError(f"{path}: line {int(bad[0]) + 1}: non-numeric sample")
    return numeric.to_numpy(dtype=float)


def write_ptdf(ptdf: PtdfMatrix, path: str | Path):
    frame = pd.DataFrame(
        ptdf.matrix,
        index=pd.Index([f"line{l}" for l in range(ptdf.shape[0])], name="line"),
        columns=[f"bus{b}" for b in range(ptdf.shape[1])],
    )
    frame.to_csv(path)


def write_metrics(metrics: dict, path: str | Path):
    pd.DataFrame({"metric": list(metrics), "value": list(metrics.values())}).to_csv(
        path, index=False
    )


def security_frame(report: SecurityReport, inputs: dict[str, str]) -> pd.DataFrame:
    records = [("input", name, 0, value, None, None) for name, value in inputs.items()]
    records += [
        ("seed", "", 0, report.seed, None, None),
        ("samples", "", 0, report.samples, None, None),
        ("mode", "", 0, report.mode, None, None),
        ("passed", "", 0, report.passed, None, None),
    ]
    if report.ramping_index is not None:
        records += [
            ("ramping_index", "", t, value, None, report.samples)
            for t, value in enumerate(report.ramping_index, start=2)
        ]
        records.append(("ramping_average", "", 0, report.ramping_average, None, report.samples))
    for line in report.lines:
        records.append(("transmission_index", f"line{line.line}", 0, line.index, None,
                        report.samples))
        records.append(("transmission_period_average", f"line{line.line}", 0,
                        line.period_average, None, report.samples))
    for family, rate in report.family_maxima.items():
        records.append((f"max_violation:{family}", rate.device, rate.period, rate.rate,
                        rate.standard_error, rate.samples))
    records += [
        (f"violation:{r.family}.{r.side}", r.device, r.period, r.rate, r.standard_error,
         r.samples)
        for r in report.rates
    ]
    if report.cost is not None:
        records += [
            ("generation_cost", "", 0, report.cost.generation_cost, None, None),
            ("corrective_cost", "", 0, report.cost.corrective_cost,
             report.cost.corrective_standard_error, report.samples),
            ("total_cost", "", 0, report.cost.total_cost, None, None),
        ]
    frame = pd.DataFrame.from_records(
        records, columns=["metric", "device", "period", "value", "standard_error", "samples"]
    )
    # rows without a sample count stay empty
    frame["samples"] = pd.to_numeric(frame["samples"]).astype("Int64")
    return frame


def write_security_report(report: SecurityReport, path: str | Path, inputs: dict[str, str]):
    security_frame(report, inputs).to_csv(path, index=False)


def write_trajectory(frames: list[pd.DataFrame], path: str | Path):
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)

import json
import logging
import sys
import time
from pathlib import Path

import click
import yaml
from rich.console import Console
from rich.logging import RichHandler
from scipy import stats

from ccrtd_cli.cauchy_stats import fit_mv_cauchy, histogram_rmse, pdf_uni
from ccrtd_cli.config import SystemFile
from ccrtd_cli.csv_io import (
    read_samples,
    read_schedule,
    write_metrics,
    write_ptdf,
    write_schedule,
    write_security_report,
    write_trajectory,
)
from ccrtd_cli.dispatch_model import (
    ModelOptions,
    assemble,
    extract_schedule,
    objective_breakdown,
)
from ccrtd_cli.errors import (
    CcrtdError,
    DegenerateDistributionError,
    DomainError,
    InfeasibleConfigError,
    InvalidInputError,
    IslandingError,
    NotPositiveDefiniteError,
    SingularNetworkError,
    WindowInfeasibleError,
)
from ccrtd_cli.formatters import OutputConfig, get_output_formatter
from ccrtd_cli.network import build_ptdf
from ccrtd_cli.rolling import run_rolling
from ccrtd_cli.solver import SolverOptions, SolverStatus, solve
from ccrtd_cli.validation import DEFAULT_SAMPLES, evaluate_schedule

# Log to stderr so stdout carries only command results
logging.basicConfig(
    level=logging.WARNING,
    format="%(message)s",
    datefmt="[%X]",
    handlers=[
        RichHandler(
            console=Console(stderr=True),
            rich_tracebacks=True,
            markup=True,
            show_time=True,
            show_path=False,
        )
    ],
)

logger = logging.getLogger(__name__)

# Status lines and other non-essential output
console_err = Console(stderr=True)

EXIT_SUCCESS = 0
EXIT_CLI_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_VALIDATION_FAILED = 3
EXIT_INPUT_ERROR = 4

RATE_COLUMNS = ["family", "side", "device", "period", "rate", "standard_error", "samples"]

# Errors caused by the user's files or flags rather than by the program
INPUT_ERRORS = (
    InvalidInputError,
    DomainError,
    DegenerateDistributionError,
    NotPositiveDefiniteError,
    IslandingError,
    SingularNetworkError,
    InfeasibleConfigError,
)


def exit_with_code(code: int, message: str = "", quiet: bool = False):
    """Exit with appropriate code and message."""
    if message and not quiet:
        if code == EXIT_SUCCESS:
            print(message)
        else:
            print(message, file=sys.stderr)
    sys.exit(code)


class CcrtdGroup(click.Group):
    """Click group that reports usage errors with ``EXIT_INPUT_ERROR``.

    Click's own usage exit code is 2, which this tool reserves for infeasibility.
    """

    def main(self, *args, standalone_mode: bool = True, **kwargs):
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
        except click.exceptions.Abort:
            if not standalone_mode:
                raise
            exit_with_code(EXIT_CLI_ERROR, "Aborted")
        except click.ClickException as e:
            if not standalone_mode:
                raise
            e.show()
            sys.exit(EXIT_INPUT_ERROR if isinstance(e, click.UsageError) else EXIT_CLI_ERROR)
        if not standalone_mode:
            return rv
        # click hands back the exit code of --help and similar early exits
        sys.exit(rv if isinstance(rv, int) else EXIT_SUCCESS)


class Session:
    """Options shared by every subcommand."""

    def __init__(self, output_config: OutputConfig):
        self.output_config = output_config
        self.formatter = get_output_formatter(output_config)

    @property
    def quiet(self) -> bool:
        return self.output_config.quiet

    def status(self, message: str):
        if not self.quiet:
            console_err.print(message)

    def emit(self, result, title: str):
        self.formatter.write(self.formatter.format_result(result, title))

    def emit_list(self, items: list, title: str, columns: list[str]):
        self.formatter.write(self.formatter.format_list(items, title, columns))

    def fail(self, code: int, message: str):
        self.formatter.format_error(message)
        sys.exit(code)


def run_guarded(session: Session, action):
    """Run ``action`` and map library errors onto exit codes."""
    try:
        return action()
    except WindowInfeasibleError as e:
        session.fail(EXIT_INFEASIBLE, str(e))
    except INPUT_ERRORS as e:
        session.fail(EXIT_INPUT_ERROR, str(e))
    except CcrtdError as e:
        session.fail(EXIT_CLI_ERROR, str(e))
    except KeyboardInterrupt:
        exit_with_code(EXIT_CLI_ERROR, "Interrupted by user", session.quiet)
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        exit_with_code(EXIT_CLI_ERROR, f"Fatal error: {e}", session.quiet)


def model_options(no_aprr: bool, no_affine_lines: bool) -> ModelOptions:
    return ModelOptions(aprr=not no_aprr, affine_lines=not no_affine_lines)


solver_flags = [
    click.option("--tolerance", type=float, default=1e-6, show_default=True,
                 help="KKT tolerance of the interior-point solver"),
    click.option("--max-iter", type=int, default=500, show_default=True,
                 help="Newton iteration limit"),
]
model_flags = [
    click.option("--risk-scale", type=float, default=1.0, show_default=True,
                 help="Multiply every risk level by this factor"),
    click.option("--no-aprr", is_flag=True,
                 help="Drop the stochastic term of the cross-period AGC ramp rows"),
    click.option("--no-affine-lines", is_flag=True,
                 help="Ignore the AGC response in the line rows"),
    click.option("--independent-farms", is_flag=True,
                 help="Dispatch as if wind farms were independent (diagonal scale matrices)"),
]


def apply(options):
    def decorator(func):
        for option in reversed(options):
            func = option(func)
        return func

    return decorator


@click.group(cls=CcrtdGroup)
@click.option("--verbose", "-v", is_flag=True, help="Show progress information on stderr")
@click.option("--quiet", "-q", is_flag=True, help="Suppress all non-essential output")
@click.option("--debug", is_flag=True, help="Enable debug logging (solver iterations)")
@click.option(
    "-o",
    "--output",
    type=click.Choice(["json", "pretty", "table", "yaml"]),
    default="pretty",
    help="Output format of the command result",
)
@click.option("-f", "--output-file", type=click.Path(), help="Write the result to a file")
@click.pass_context
def main(ctx, verbose: bool, quiet: bool, debug: bool, output: str, output_file: str | None):
    """Chance-constrained real-time dispatch with Cauchy wind forecast errors.

    \b
      ccrtd dispatch --system example_system.json --out run/
      ccrtd validate --system example_system.json --schedule run/schedule.csv
      ccrtd rolling --system example_system.json --windows 4
      ccrtd fit --data errors.csv --out forecast.json
      ccrtd ptdf --system example_system.json
    """
    if debug:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("Debug logging enabled")
    elif verbose:
        logging.getLogger().setLevel(logging.INFO)
    elif quiet:
        logging.getLogger().setLevel(logging.ERROR)
    else:
        logging.getLogger().setLevel(logging.WARNING)

    ctx.obj = Session(OutputConfig(output, quiet, verbose, output_file))


@main.command()
@click.option("--system", "system_path", type=click.Path(), required=True,
              help="System file (JSON)")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for schedule.csv and dispatch_report.csv")
@click.option("--dump-model", type=click.Path(dir_okay=False),
              help="Write variables and rows of the assembled model as YAML")
@apply(model_flags)
@apply(solver_flags)
@click.pass_obj
def dispatch(
    session: Session, system_path: str, out_dir: str, dump_model: str | None,
    risk_scale: float, no_aprr: bool, no_affine_lines: bool, independent_farms: bool,
    tolerance: float, max_iter: int,
):
    """Solve one dispatch horizon and write the schedule."""

    def action():
        started = time.perf_counter()
        system = SystemFile.load(system_path)
        problem = system.to_problem(0, risk_scale, independent_farms)
        program = assemble(problem, model_options(no_aprr, no_affine_lines))
        if dump_model:
            Path(dump_model).write_text(
                yaml.safe_dump(program.describe(), default_flow_style=False, sort_keys=False)
            )
        session.status(f"Solving {program.size} variables, {program.row_count} rows")
        solution = solve(program, SolverOptions(kkt_tolerance=tolerance, max_iterations=max_iter))
        return system, problem, program, solution, time.perf_counter() - started

    system, problem, program, solution, elapsed = run_guarded(session, action)
    if solution.status is SolverStatus.INFEASIBLE:
        session.fail(EXIT_INFEASIBLE, "dispatch is infeasible; conflicting rows: "
                     + ", ".join(solution.certificate))
    if solution.status is not SolverStatus.OPTIMAL:
        session.fail(EXIT_CLI_ERROR, f"solver stopped with status {solution.status.value} "
                     f"after {solution.iterations} iterations")

    schedule = extract_schedule(problem, program, solution.x)
    summary = {
        "status": solution.status.value,
        "objective": solution.objective,
        **objective_breakdown(problem, schedule),
        "iterations": solution.iterations,
        "wall_time_s": round(elapsed, 3),
        "variables": program.size,
        "equality_rows": len(program.eq_rhs),
        "inequality_rows": len(program.ineq_rhs),
        "kkt_residual": solution.residuals.worst(),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_schedule(schedule, out / "schedule.csv")
    write_metrics(
        {"system": system_path, "risk_scale": risk_scale, "aprr": not no_aprr,
         "affine_lines": not no_affine_lines, "independent_farms": independent_farms,
         **summary},
        out / "dispatch_report.csv",
    )
    session.status(f"Schedule written to {out / 'schedule.csv'}")
    session.emit(summary, "Dispatch")


@main.command()
@click.option("--system", "system_path", type=click.Path(), required=True,
              help="System file (JSON)")
@click.option("--schedule", "schedule_path", type=click.Path(), required=True,
              help="Schedule CSV written by dispatch")
@click.option("--samples", type=click.IntRange(min=2), default=DEFAULT_SAMPLES,
              show_default=True, help="Number of Monte Carlo scenarios")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True,
              help="Random seed")
@click.option("--clip", is_flag=True, help="Clamp realized wind to [0, farm cap]")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Sampling threads (results do not depend on this)")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              default="security_report.csv", show_default=True, help="Report CSV")
@click.option("--rates", "show_rates", is_flag=True,
              help="Print the violation rate of every chance row instead of the summary")
@click.pass_obj
def validate(
    session: Session, system_path: str, schedule_path: str, samples: int, seed: int,
    clip: bool, workers: int, out_path: str, show_rates: bool,
):
    """Monte Carlo check of a schedule against the chance constraints."""

    def action():
        system = SystemFile.load(system_path)
        problem = system.to_problem()
        schedule = read_schedule(schedule_path)
        return evaluate_schedule(problem, schedule, samples, seed, clip, workers)

    report = run_guarded(session, action)
    write_security_report(
        report, out_path,
        {"system": system_path, "schedule": schedule_path, "clip": str(clip)},
    )
    if show_rates:
        session.emit_list(report.rates, "Violation rates", RATE_COLUMNS)
    else:
        session.emit(
            {
                "passed": report.passed,
                "mode": report.mode,
                "samples": report.samples,
                "seed": report.seed,
                "ramping_index": report.ramping_index,
                "ramping_average": report.ramping_average,
                "lines": report.lines,
                "family_maxima": report.family_maxima,
                "cost": report.cost,
            },
            "Security",
        )
    if not report.passed:
        exit_with_code(EXIT_VALIDATION_FAILED, "Validation failed: risk levels exceeded",
                       session.quiet)


@main.command()
@click.option("--system", "system_path", type=click.Path(), required=True,
              help="System file (JSON)")
@click.option("--windows", type=click.IntRange(min=1), required=True,
              help="Number of windows to roll")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for trajectory.csv")
@apply(model_flags)
@apply(solver_flags)
@click.pass_obj
def rolling(
    session: Session, system_path: str, windows: int, out_dir: str, risk_scale: float,
    no_aprr: bool, no_affine_lines: bool, independent_farms: bool, tolerance: float,
    max_iter: int,
):
    """Roll the dispatch window forward, committing only its first period."""

    def action():
        system = SystemFile.load(system_path)
        return run_rolling(
            system, windows, model_options(no_aprr, no_affine_lines),
            SolverOptions(kkt_tolerance=tolerance, max_iterations=max_iter),
            risk_scale, independent_farms,
        )

    result = run_guarded(session, action)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory([result.trajectory()], out / "trajectory.csv")
    session.emit({"windows": result.windows, "objectives": result.objectives}, "Rolling")


@main.command()
@click.option("--data", "data_path", type=click.Path(), required=True,
              help="CSV of forecast errors, one sample per row")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Forecast block JSON to write")
@click.option("--bins", type=click.IntRange(min=2), default=50, show_default=True,
              help="Histogram bins for the RMSE comparison")
@click.pass_obj
def fit(session: Session, data_path: str, out_path: str, bins: int):
    """Fit a multivariate Cauchy law to forecast errors."""

    def action():
        samples = read_samples(data_path)
        result = fit_mv_cauchy(samples)
        quality = []
        for k in range(samples.shape[1]):
            column = samples[:, k]
            marginal = result.distribution.marginal(k)
            mean, std = stats.norm.fit(column)
            quality.append({
                "column": k,
                "cauchy_rmse": histogram_rmse(lambda x: pdf_uni(marginal, x), column, bins),
                "gaussian_rmse": histogram_rmse(
                    lambda x: stats.norm.pdf(x, mean, std), column, bins
                ),
            })
        return result, quality

    result, quality = run_guarded(session, action)
    dist = result.distribution
    block = {"mu": dist.location.tolist(), "sigma": dist.scale_matrix.tolist()}
    Path(out_path).write_text(json.dumps(block, indent=2) + "\n")
    if not result.converged:
        logger.warning("fit did not converge in %d iterations", result.iterations)
    session.emit(
        {
            "converged": result.converged,
            "iterations": result.iterations,
            "log_likelihood": result.log_likelihood,
            **block,
            "fit_quality": quality,
        },
        "Fit",
    )


@main.command()
@click.option("--system", "system_path", type=click.Path(), required=True,
              help="System file (JSON)")
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="CSV file to write (default: stdout)")
@click.pass_obj
def ptdf(session: Session, system_path: str, out_path: str | None):
    """Dump the PTDF matrix of the system's network as CSV."""
    matrix = run_guarded(session, lambda: build_ptdf(SystemFile.load(system_path).grid_model()))
    write_ptdf(matrix, out_path or sys.stdout)
    if out_path:
        session.status(f"PTDF written to {out_path}")


if __name__ == "__main__":
    main()

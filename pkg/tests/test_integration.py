"""
Integration tests for the complete CLI functionality.
"""

import json

import numpy as np
import pandas as pd
import pytest
import yaml
from click.testing import CliRunner
from scipy import stats

from ccrtd_cli.ccrtd import EXIT_SUCCESS, main

from tests.systems import EXAMPLE_SYSTEM, write_system


def report_value(frame: pd.DataFrame, metric: str):
    return frame.loc[frame["metric"] == metric, "value"].item()


class TestDispatchAndValidate:
    """Dispatch a system, then check the schedule by Monte Carlo."""

    def setup_method(self):
        """Set up test fixtures."""
        self.runner = CliRunner()

    def test_dispatch_writes_outputs(self, tmp_path):
        """Dispatch writes the schedule, the report and the model dump."""
        system = write_system(tmp_path / "system.json")
        model = tmp_path / "model.yaml"
        result = self.runner.invoke(
            main,
            ["-q", "dispatch", "--system", str(system), "--out", str(tmp_path / "run"),
             "--dump-model", str(model)],
        )
        assert result.exit_code == EXIT_SUCCESS, result.output

        schedule = pd.read_csv(tmp_path / "run" / "schedule.csv")
        assert set(schedule["kind"]) == {"non_agc", "agc", "wind", "wind_total"}
        assert sorted(schedule["period"].unique()) == [1, 2]

        # generation meets load net of the scheduled wind
        for period, rows in schedule.groupby("period"):
            supplied = rows.loc[rows["kind"].isin(["non_agc", "agc"]), "mw"].sum()
            wind = rows.loc[rows["kind"] == "wind_total", "mw"].item()
            load = [150, 152][period - 1]
            assert supplied + wind == pytest.approx(load, abs=1e-4)

        metrics = pd.read_csv(tmp_path / "run" / "dispatch_report.csv")
        assert report_value(metrics, "status") == "optimal"

        dump = yaml.safe_load(model.read_text())
        families = {row["family"] for row in dump["rows"]}
        assert {"balance", "agc_capacity", "reserve", "line"} <= families
        names = {v["name"] for v in dump["variables"]}
        assert {"w[1]", "pa[A1,1]", "pw[W1,2]"} <= names

    def test_validate_optimal_schedule(self, tmp_path):
        """The optimal schedule passes the Monte Carlo check."""
        system = write_system(tmp_path / "system.json")
        run = tmp_path / "run"
        dispatched = self.runner.invoke(
            main, ["-q", "dispatch", "--system", str(system), "--out", str(run)]
        )
        assert dispatched.exit_code == EXIT_SUCCESS, dispatched.output

        report_path = tmp_path / "security.csv"
        result = self.runner.invoke(
            main,
            ["-q", "-o", "json", "validate", "--system", str(system),
             "--schedule", str(run / "schedule.csv"), "--samples", "20000",
             "--seed", "0", "--out", str(report_path)],
        )
        assert result.exit_code == EXIT_SUCCESS, result.output
        summary = json.loads(result.output)
        assert summary["passed"] is True
        assert summary["mode"] == "unclipped"
        assert len(summary["lines"]) == 3

        report = pd.read_csv(report_path)
        assert str(report_value(report, "passed")) == "True"
        assert int(report_value(report, "samples")) == 20000
        assert (report["metric"] == "transmission_index").sum() == 3
        maxima = report[report["metric"].str.startswith("max_violation:")]
        assert (maxima["value"].astype(float) <= 0.05 + 3 * np.sqrt(0.05 * 0.95 / 20000)).all()

    def test_clipped_validation(self, tmp_path):
        """--clip switches the scenario mode and keeps indices in [0, 1]."""
        system = write_system(tmp_path / "system.json")
        run = tmp_path / "run"
        self.runner.invoke(main, ["-q", "dispatch", "--system", str(system), "--out", str(run)])
        report_path = tmp_path / "security.csv"
        result = self.runner.invoke(
            main,
            ["-q", "validate", "--system", str(system), "--schedule", str(run / "schedule.csv"),
             "--samples", "2000", "--clip", "--out", str(report_path)],
        )
        assert result.exit_code in (0, 3)
        report = pd.read_csv(report_path)
        assert report_value(report, "mode") == "clipped"
        ramping = report.loc[report["metric"] == "ramping_index", "value"].astype(float)
        assert ((ramping >= 0) & (ramping <= 1)).all()

    @pytest.mark.parametrize(
        "flags",
        [["--no-aprr"], ["--no-affine-lines"], ["--independent-farms"], ["--risk-scale", "0.5"]],
    )
    def test_model_variants(self, tmp_path, flags):
        """Every model variant solves and is recorded in the report."""
        system = write_system(tmp_path / "system.json")
        result = self.runner.invoke(
            main, ["-q", "dispatch", "--system", str(system), "--out", str(tmp_path), *flags]
        )
        assert result.exit_code == EXIT_SUCCESS, result.output
        metrics = pd.read_csv(tmp_path / "dispatch_report.csv")
        assert report_value(metrics, "status") == "optimal"


class TestRollingCommand:
    """Test the rolling command end to end."""

    def setup_method(self):
        """Set up test fixtures."""
        self.runner = CliRunner()

    def test_trajectory(self, tmp_path):
        """One committed period per window lands in trajectory.csv."""
        system = write_system(tmp_path / "system.json")
        result = self.runner.invoke(
            main,
            ["-q", "-o", "json", "rolling", "--system", str(system), "--windows", "3",
             "--out", str(tmp_path)],
        )
        assert result.exit_code == EXIT_SUCCESS, result.output
        assert json.loads(result.output)["windows"] == 3

        trajectory = pd.read_csv(tmp_path / "trajectory.csv")
        assert list(trajectory.columns) == ["window", "period", "kind", "device", "mw"]
        assert sorted(trajectory["window"].unique()) == [1, 2, 3]
        assert (trajectory["window"] == trajectory["period"]).all()


class TestFitCommand:
    """Test the fit command end to end."""

    def setup_method(self):
        """Set up test fixtures."""
        self.runner = CliRunner()

    def test_fit_recovers_parameters(self, tmp_path):
        """A fitted forecast block is close to the generating law."""
        mu = np.array([2.0, -1.0])
        sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
        samples = stats.multivariate_t(loc=mu, shape=sigma, df=1).rvs(
            size=4000, random_state=np.random.default_rng(5)
        )
        data = tmp_path / "errors.csv"
        pd.DataFrame(samples, columns=["w1", "w2"]).to_csv(data, index=False)
        out = tmp_path / "forecast.json"

        result = self.runner.invoke(
            main, ["-q", "-o", "json", "fit", "--data", str(data), "--out", str(out)]
        )
        assert result.exit_code == EXIT_SUCCESS, result.output

        block = json.loads(out.read_text())
        np.testing.assert_allclose(block["mu"], mu, atol=0.1)
        np.testing.assert_allclose(block["sigma"], sigma, atol=0.1)

        summary = json.loads(result.output)
        assert summary["converged"] is True
        assert [q["column"] for q in summary["fit_quality"]] == [0, 1]
        assert all(np.isfinite(q["cauchy_rmse"]) for q in summary["fit_quality"])

    def test_fit_bad_data(self, tmp_path):
        """Non-numeric samples are input errors."""
        data = tmp_path / "errors.csv"
        data.write_text("w1\n1.0\nabc\n")
        result = self.runner.invoke(
            main, ["fit", "--data", str(data), "--out", str(tmp_path / "f.json")]
        )
        assert result.exit_code == 4
        assert "line 3" in result.output


class TestExampleSystem:
    """Run the bundled example system through dispatch and validation."""

    def setup_method(self):
        """Set up test fixtures."""
        self.runner = CliRunner()

    def test_dispatch_and_validate(self, tmp_path):
        """The example dispatches and its violation rates stay near the risk levels."""
        result = self.runner.invoke(
            main, ["-q", "dispatch", "--system", str(EXAMPLE_SYSTEM), "--out", str(tmp_path)]
        )
        assert result.exit_code == EXIT_SUCCESS, result.output
        schedule = pd.read_csv(tmp_path / "schedule.csv")
        assert schedule["period"].max() == 12
        dispatch_report = pd.read_csv(tmp_path / "dispatch_report.csv")
        assert report_value(dispatch_report, "status") == "optimal"
        assert float(report_value(dispatch_report, "kkt_residual")) <= 1e-6

        report_path = tmp_path / "security.csv"
        result = self.runner.invoke(
            main,
            ["-q", "validate", "--system", str(EXAMPLE_SYSTEM),
             "--schedule", str(tmp_path / "schedule.csv"), "--samples", "20000",
             "--out", str(report_path)],
        )
        assert result.exit_code in (0, 3)
        report = pd.read_csv(report_path)
        maxima = report[report["metric"].str.startswith("max_violation:")]
        assert len(maxima) > 0
        assert (maxima["value"].astype(float) <= 0.02 + 5 * np.sqrt(0.02 * 0.98 / 20000)).all()
        assert float(report_value(report, "total_cost")) > 0

# Copyright 2026 Epiflows Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
import io
import os
import json
import contextlib
import tempfile

import numpy as np
import pandas as pd

from testflows.core import *
from testflows.asserts import error, raises

from epiflows.covid.cli import main, argparser, config_from_args, PLOT_COLUMNS, METHODS_VERSION
from epiflows.covid.config import ConfigError, RunConfig, load_config

from helpers import series, noisy_counts, write_csv, write_series

KINK = [t if t <= 30 else 60 - t for t in range(1, 61)]

PARAMS = """\
[params]
beta = 0.8
mu = 0.5
Z = 5.1
D = 3.5
alpha = 0.5

[init]
N = 875000
E = 10
"""


def read_json(directory, name):
    with open(os.path.join(directory, name), encoding="utf-8") as fd:
        return json.load(fd)


def write_text(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as fd:
        fd.write(text)
    return path


@TestScenario
def check_changepoint_report(self):
    """Check the files of a change-point report."""
    with tempfile.TemporaryDirectory() as directory:
        data = write_series(directory, series(KINK))
        output = os.path.join(directory, "report")

        with When("I run the changepoint command"):
            status = main(["changepoint", "--data", data, "--forecast", "5", "--output", output])

        with Then("it succeeds and writes every report file"):
            assert status == 0, error()
            manifest = read_json(output, "manifest.json")
            assert sorted(manifest["files"]) == [
                "changepoint_fitted.csv",
                "changepoint_forecast.csv",
                "config.json",
                "plot_changepoint.csv",
                "summary.json",
            ], error()
            assert manifest["command"] == "changepoint", error()
            assert manifest["report_format"] == "1", error()
            assert manifest["methods"] == METHODS_VERSION, error()

        with And("the plot data is tidy"):
            plot = pd.read_csv(os.path.join(output, "plot_changepoint.csv"))
            assert list(plot.columns) == PLOT_COLUMNS, error()
            assert set(plot["series"]) == {"observed", "fitted", "forecast"}, error()

        with And("the summary has the change-point dates"):
            summary = read_json(output, "summary.json")["sections"]["changepoint"]
            assert summary["model"] == "linear", error()
            assert summary["locations"] == [30], error()
            assert summary["dates"] == ["2020-03-30"], error()
            assert len(summary["forecasts"]) == 5, error()


@TestScenario
def check_reproducible_report(self):
    """Check that repeated runs write byte-identical reports."""
    with tempfile.TemporaryDirectory() as directory:
        data = write_series(directory, noisy_counts(T=60, seed=2))
        output = os.path.join(directory, "report")
        argv = ["countts", "--data", data, "--paths", "1000", "--forecast", "3", "--seed", "5", "--output", output]

        assert main(argv) == 0, error()
        first = read_json(output, "manifest.json")
        assert main(argv) == 0, error()
        second = read_json(output, "manifest.json")

    assert first == second, error()
    assert first["seed"] == 5, error()


@TestScenario
def check_invalid_inputs(self):
    """Check that invalid inputs exit with status 2 before writing anything."""
    with tempfile.TemporaryDirectory() as directory:
        output = os.path.join(directory, "report")

        with By("using an empty incidence file"):
            empty = write_text(directory, "empty.csv", "")
            assert main(["changepoint", "--data", empty, "--output", output]) == 2, error()
            assert not os.path.exists(output), error()

        with By("leaving out the data file"):
            assert main(["changepoint", "--output", output]) == 2, error()

        with By("using a missing data file"):
            missing = os.path.join(directory, "missing.csv")
            assert main(["countts", "--data", missing, "--output", output]) == 2, error()

        with By("giving no command"):
            assert main([]) == 2, error()

        assert not os.path.exists(output), error()


@TestScenario
def check_version(self):
    """Check the version flag."""
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        assert main(["--version"]) == 0, error()
    assert f"methods {METHODS_VERSION}" in out.getvalue(), error()


@TestScenario
def check_flags_override_config(self):
    """Check that command line flags override configuration file values."""
    with tempfile.TemporaryDirectory() as directory:
        data = write_series(directory, series(KINK))
        path = write_text(
            directory, "run.toml", '[changepoint]\nforecast = 3\nmodel = "linear"\n\n[rt]\nn_steps = 500\n'
        )
        args = argparser().parse_args(["changepoint", "--config", path, "--data", data, "--model", "constant", "--lambda", "12"])
        config = config_from_args(args)

    assert config.command == "changepoint", error()
    assert config.data == data, error()
    assert config.changepoint.model == "constant", error()
    assert config.changepoint.lambda_T == 12, error()
    assert config.changepoint.forecast == 3, error()
    assert config.rt.n_steps == 500, error()
    assert config.use_stash, error()


@TestScenario
def check_config(self):
    """Check configuration parsing and validation."""
    config = RunConfig.from_dict({"command": "rt", "seed": 3, "rt": {"method": "cori", "window": 5}})
    assert config.rt.window == 5, error()
    assert RunConfig.from_dict(json.loads(config.to_json())) == config, error()

    with raises(ConfigError):
        RunConfig.from_dict({"colour": "red"})
    with raises(ConfigError):
        RunConfig.from_dict({"rt": {"steps": 10}})

    with By("naming the offending field"):
        try:
            RunConfig.from_dict({"command": "rt", "rt": {"n_steps": 100, "burn_in": 100}}).validate()
        except ConfigError as exc:
            assert exc.field == "rt.burn_in", error()
        else:
            assert False, error()

    with tempfile.TemporaryDirectory() as directory:
        path = write_text(directory, "bad.toml", "command = [")
        with raises(ConfigError):
            load_config(path)


@TestScenario
def check_simulate(self):
    """Check a deterministic single-population simulation."""
    with tempfile.TemporaryDirectory() as directory:
        params = write_text(directory, "params.toml", PARAMS)
        output = os.path.join(directory, "report")
        status = main(
            ["simulate", "--model", "seir1", "--params", params, "--horizon", "30", "--deterministic", "--output", output]
        )
        assert status == 0, error()

        trajectories = pd.read_csv(os.path.join(output, "simulate_trajectories.csv"))
        assert set(trajectories["compartment"]) == {"S", "E", "Ir", "Iu"}, error()
        assert trajectories["day"].max() == 30, error()

        recorded = pd.read_csv(os.path.join(output, "simulate_recorded.csv"))
        assert len(recorded) == 30, error()
        assert np.all(recorded["recorded"] >= 0), error()


@TestScenario
def check_stashed_analysis(self):
    """Check that a second run reuses the stashed sampler result."""
    with tempfile.TemporaryDirectory() as directory:
        data = write_series(directory, noisy_counts(T=40, seed=6))
        output = os.path.join(directory, "report")
        argv = ["rt", "--method", "mcmc1", "--data", data, "--n-steps", "300", "--burn-in", "50", "--output", output]

        assert main(argv) == 0, error()
        first = read_json(output, "summary.json")
        assert len(os.listdir(os.path.join(output, "stash"))) == 1, error()

        assert main(argv) == 0, error()
        assert read_json(output, "summary.json") == first, error()

        assert main(argv + ["--no-stash"]) == 0, error()
        assert read_json(output, "summary.json") == first, error()

    estimates = first["sections"]["rt_mcmc1"]["estimates"]
    assert len(estimates) > 0, error()


@TestScenario
def check_stash_follows_column(self):
    """Check that reading the local cases column does not reuse the all-cases result."""
    total = noisy_counts(T=40, seed=6)
    local = noisy_counts(T=40, seed=11)
    rows = [
        (d.strftime("%Y-%m-%d"), int(a), min(int(b), int(a)))
        for d, a, b in zip(total.dates, total.cases, local.cases)
    ]

    with tempfile.TemporaryDirectory() as directory:
        data = write_csv(directory, "cases.csv", rows, header="date,cases,local")
        output = os.path.join(directory, "report")
        argv = ["rt", "--method", "mcmc1", "--data", data, "--n-steps", "300", "--burn-in", "50", "--output", output]

        with When("I estimate from all cases"):
            assert main(argv) == 0, error()
            everything = read_json(output, "summary.json")["sections"]["rt_mcmc1"]

        with And("I estimate from local cases only into the same directory"):
            assert main(argv + ["--local-only"]) == 0, error()
            local_only = read_json(output, "summary.json")["sections"]["rt_mcmc1"]

        with Then("each column has its own stash entry and result"):
            assert len(os.listdir(os.path.join(output, "stash"))) == 2, error()
            assert local_only != everything, error()


@TestScenario
def check_report_all(self):
    """Check that report-all runs every analysis the inputs allow."""
    with tempfile.TemporaryDirectory() as directory:
        data = write_series(directory, noisy_counts(T=90, seed=3))
        config = write_text(
            directory, "run.toml", "[rt]\nn_steps = 500\nburn_in = 100\n\n[countts]\npaths = 1000\n"
        )
        output = os.path.join(directory, "report")
        status = main(["report-all", "--config", config, "--data", data, "--output", output])

        assert status in (0, 3), error()
        summary = read_json(output, "summary.json")
        names = set(summary["sections"]) | {f["analysis"] for f in summary["failures"]}
        assert names == {"changepoint", "countts", "rt_mcmc1", "rt_bettencourt", "rt_cori"}, error()
        assert (status == 3) == bool(summary["failures"]), error()


@TestFeature
@Name("cli")
def feature(self):
    """Check the command line interface and the report bundle."""
    for scenario in loads(current_module(), Scenario):
        scenario()

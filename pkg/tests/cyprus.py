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
import os
import datetime

import numpy as np

from testflows.core import *
from testflows.asserts import error

from epiflows.covid import (
    Intervention,
    Model3Observations,
    EnsembleConfig,
    isolate_detect,
    forecast_cpt,
    fit_mle,
    detect_interventions,
    predict_counts,
    fit_model3,
    sweep_model3,
    fortnight_periods,
    mcmc_model1,
    cori_rt,
    eakf_model2,
    load_series,
    load_district_series,
    default_mobility,
    default_populations,
)


def day(month, d):
    return datetime.date(2020, month, d)


def near(date, expected, days):
    return abs((date - expected).days) <= days


@TestScenario
def check_changepoints_linear(self):
    """Check the change-points of the continuous piecewise-linear fit."""
    result = isolate_detect(self.context.series, "linear")
    dates = result.dates()
    note(f"change-points {[d.isoformat() for d in dates]}")

    assert len(dates) == 3, error()
    for date, expected in zip(dates, (day(3, 23), day(4, 2), day(4, 17))):
        assert near(date, expected, 2), error()

    with By("forecasting one week ahead"):
        forecasts = forecast_cpt(result, 7)
        for pi in forecasts:
            assert abs(pi.point - 2) <= 1, error()
            assert pi.upper <= 10, error()


@TestScenario
def check_changepoints_constant(self):
    """Check the change-points and jumps of the piecewise-constant fit."""
    result = isolate_detect(self.context.series, "constant")
    dates = result.dates()
    note(f"change-points {[d.isoformat() for d in dates]} jumps {result.jumps}")

    assert len(dates) == 5, error()
    expected = (day(3, 11), day(3, 25), day(4, 2), day(4, 14), day(5, 1))
    for date, e in zip(dates, expected):
        assert near(date, e, 2), error()
    for jump, e in zip(result.jumps, (10.56, 23.21, -9.67, -17.24, -4.95)):
        assert abs(jump - e) <= 0.5, error()


def counts_window(series):
    return series.window(day(3, 4), day(5, 31))


@TestScenario
def check_countts_fit(self):
    """Check the log-linear fits with and without interventions."""
    y = counts_window(self.context.series)

    with By("fitting without interventions"):
        report = fit_mle(y)
        e = report.estimates
        for name, expected in (("d", -0.003), ("a1", 0.547), ("b1", 0.451)):
            assert abs(e[name] - expected) <= 0.05, error()
        assert abs(report.bic - 615.766) <= 1, error()

    with And("searching for additive outliers"):
        detected = detect_interventions(y, "ao")
        assert sorted(iv.time for iv in detected) == [10, 23], error()

    with And("fitting the detected outliers"):
        report = fit_mle(y, [Intervention(10, "ao"), Intervention(23, "ao")])
        e = report.estimates
        for name, expected in (("d", -0.007), ("a1", 0.779), ("b1", 0.211)):
            assert abs(e[name] - expected) <= 0.05, error()
        assert abs(e["gamma1"] - 1.643) <= 0.05, error()
        assert abs(e["gamma2"] - 1.102) <= 0.05, error()
        assert abs(report.bic - 576.643) <= 1, error()

    with And("covering the following week"):
        realized = [4, 6, 1, 0, 5, 5, 1]
        forecasts = predict_counts(report, y, 7, seed=1, n_paths=10000)
        for pi, count in zip(forecasts, realized):
            assert pi.lower <= count <= pi.upper, error()


@TestScenario
def check_model3_fit(self):
    """Check the peaks and the prediction errors of the seven-state model."""
    observations = Model3Observations.from_series(self.context.series)
    fit = fit_model3(observations, gamma_inv=3.0)

    _, value, date = fit.trajectory.peak("E")
    note(f"peak E {value:.1f} on {date}")
    assert abs(value - 173) <= 0.15 * 173 and near(date, day(3, 21), 3), error()

    _, value, date = fit.trajectory.peak("I")
    note(f"peak I {value:.1f} on {date}")
    assert abs(value - 136) <= 0.15 * 136 and near(date, day(3, 26), 3), error()

    assert fit.relative_errors()["recovered"] <= 0.01, error()

    with By("predicting the last week from a shorter fit"):
        short = fit_model3(observations.head(observations.T - 7), gamma_inv=3.0)
        assert short.relative_errors(observations)["recovered"] <= 0.009, error()


@TestScenario
def check_model3_sweep(self):
    """Check that protection and transmission rates peak at a latent time of three days."""
    entries = sweep_model3(Model3Observations.from_series(self.context.series))
    zeta = [entry.fit.params.zeta for entry in entries]
    beta = [entry.fit.params.beta for entry in entries]

    assert entries[int(np.argmax(zeta))].gamma_inv == 3.0, error()
    assert entries[int(np.argmax(beta))].gamma_inv == 3.0, error()


@TestScenario
def check_mcmc(self):
    """Check the period-wise sampler against the published medians."""
    data = self.context.series
    periods = fortnight_periods(data, start=day(3, 4), count=6)
    estimates = mcmc_model1(data, periods, seed=1).estimates

    assert abs(estimates[0].median - 4.47) <= 0.2 * 4.47, error()
    assert abs(estimates[3].median - 0.38) <= 0.2 * 0.38, error()
    for k, expected in ((0, 0.0), (3, 0.87), (4, 0.69), (5, 0.67)):
        assert abs(estimates[k].prob_below_one - expected) <= 0.1, error()


@TestScenario
def check_cori(self):
    """Check that weekly medians are below one after the first of May."""
    for estimate in cori_rt(self.context.series):
        if estimate.period.start_date >= day(5, 1) and estimate.status == "ok":
            assert estimate.median < 1, error()


@TestScenario
def check_eakf(self):
    """Check that the district assimilation ends below one."""
    path = os.environ.get("CYPRUS_DISTRICTS")
    if not path:
        skip("CYPRUS_DISTRICTS is not set")
        return

    names, M = default_mobility()
    result = eakf_model2(load_district_series(path, names), M, default_populations(), EnsembleConfig(), seed=1, districts=names)
    assert result.estimates[-1].median < 1, error()


@TestFeature
@Name("cyprus")
def feature(self):
    """Check the analyses on the published Cyprus dataset."""
    path = os.environ.get("CYPRUS_DATA")
    if not path:
        skip("CYPRUS_DATA is not set")
        return

    self.context.series = load_series(path)
    for scenario in loads(current_module(), Scenario):
        scenario()

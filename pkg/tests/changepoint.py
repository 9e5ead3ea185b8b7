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
import math

import numpy as np

from testflows.core import *
from testflows.asserts import error, raises

from epiflows.covid import (
    ValidationError,
    SignalModel,
    IdConfig,
    cusum_contrast,
    isolate_detect,
    fit_segments,
    forecast_cpt,
)

from helpers import series


@TestOutline(Scenario)
@Examples("model", [("constant", Name("constant")), ("linear", Name("linear"))])
def check_constant_series(self, model):
    """Check that a constant series has no change-points."""
    result = isolate_detect(series([5] * 60), model)
    assert result.K == 0, error()
    assert np.allclose(result.fitted, 5.0), error()


@TestScenario
def check_noiseless_step(self):
    """Check exact recovery of a noiseless step."""
    x = [0] * 30 + [10] * 30
    result = isolate_detect(series(x), SignalModel.PiecewiseConstant)

    assert result.locations == [30], error()
    assert np.array_equal(result.fitted, np.array(x, dtype=float)), error()
    assert result.jumps == [10.0], error()
    assert result.dates()[0].isoformat() == "2020-03-30", error()


@TestScenario
def check_noiseless_kink(self):
    """Check exact recovery of a noiseless kink and continuity of the fit."""
    t = np.arange(1, 61)
    x = np.where(t <= 30, t, 60 - t)
    result = isolate_detect(series(x), SignalModel.ContinuousPiecewiseLinear)

    assert result.locations == [30], error()
    assert np.allclose(result.fitted, x, atol=1e-8), error()

    with By("checking continuity at every change-point"):
        for left, right in zip(result.segment_params[:-1], result.segment_params[1:]):
            r = left.end
            assert abs(float(left.value(r)) - float(right.value(r))) < 1e-9, error()


@TestScenario
def check_detection_order(self):
    """Check the order and the intervals of detections for change-points at 38 and 77."""
    x = [0] * 38 + [5] * 39 + [12] * 23
    result = isolate_detect(series(x), "constant", IdConfig(lambda_T=10))

    detections = [(e.side, e.start, e.end, e.argmax) for e in result.trace if e.detected]
    note(f"detections {detections}")

    with Then("77 is isolated first by the left interval starting at 71"):
        assert detections[0] == ("left", 71, 100, 77), error()

    with And("38 is isolated next by the right interval ending at 40"):
        assert detections[1] == ("right", 1, 40, 38), error()

    assert len(detections) == 2, error()
    assert result.locations == [38, 77], error()

    with By("checking that no interval is tested twice"):
        tested = [(e.start, e.end) for e in result.trace]
        assert len(tested) == len(set(tested)), error()


@TestScenario
def check_cusum_contrast(self):
    """Check the CUSUM contrast against a brute-force single-split scan."""
    rng = np.random.default_rng(5)
    for n in (2, 7, 20, 50):
        x = rng.poisson(4.0, size=n).astype(float)
        expected = []
        for b in range(1, n):
            left, right = x[:b].sum(), x[b:].sum()
            expected.append(abs(math.sqrt((n - b) / (n * b)) * left - math.sqrt(b / (n * (n - b))) * right))
        assert np.allclose(cusum_contrast(x), expected, atol=1e-10), error()


@TestScenario
def check_fit_segments(self):
    """Check segment refits."""
    x = series([1, 2, 3, 10, 11, 12])

    fitted, segments = fit_segments(x, [], "constant")
    assert np.allclose(fitted, 6.5), error()
    assert len(segments) == 1, error()

    fitted, segments = fit_segments(x, [3], "constant")
    assert np.allclose(fitted, [2, 2, 2, 11, 11, 11]), error()
    assert [(s.start, s.end) for s in segments] == [(1, 3), (4, 6)], error()

    with raises(ValidationError):
        fit_segments(x, [3, 3], "constant")
    with raises(ValidationError):
        fit_segments(x, [6], "constant")


@TestScenario
def check_forecast_constant(self):
    """Check a flat final segment forecast with a zero-width interval."""
    result = isolate_detect(series([10] * 30 + [3] * 30), "constant")
    forecasts = forecast_cpt(result, 5)

    assert len(forecasts) == 5, error()
    for pi in forecasts:
        assert pi.point == 3.0, error()
        assert pi.lower == pi.upper == 3.0, error()
    assert result.forecasts == forecasts, error()


@TestScenario
def check_forecast_linear(self):
    """Check extrapolation of a final segment with slope -1."""
    t = np.arange(1, 31)
    x = np.where(t <= 20, t, 40 - t)
    result = isolate_detect(series(x), "linear")
    assert result.locations == [20], error()

    forecasts = forecast_cpt(result, 5, level=0.9)
    for h, pi in enumerate(forecasts, 1):
        assert abs(pi.point - (10 - h)) < 1e-6, error()
        assert pi.upper - pi.lower < 1e-5, error()
        assert pi.level == 0.9, error()


@TestScenario
def check_forecast_truncated(self):
    """Check that forecasts are truncated at zero."""
    t = np.arange(1, 31)
    x = np.where(t <= 20, t, 40 - t)
    forecasts = forecast_cpt(isolate_detect(series(x), "linear"), 14)

    assert forecasts[-1].point == 0.0, error()
    assert all(pi.lower >= 0 for pi in forecasts), error()


@TestScenario
def check_noisy_signal(self):
    """Check detection near the true locations of a noisy step signal."""
    rng = np.random.default_rng(11)
    truth = np.concatenate([np.full(40, 5.0), np.full(40, 25.0), np.full(40, 10.0)])
    x = np.maximum(np.rint(truth + rng.normal(0.0, 1.0, size=truth.size)), 0)
    result = isolate_detect(series(x), "constant", IdConfig(lambda_T=10, zeta_T=10.0))

    assert result.threshold == 10.0, error()
    assert result.K == 2, error()
    assert abs(result.locations[0] - 40) <= 2, error()
    assert abs(result.locations[1] - 80) <= 2, error()
    note(f"sigma={result.sigma:.3f}")

    with By("raising the threshold above every contrast"):
        assert isolate_detect(series(x), "constant", IdConfig(zeta_T=1000.0)).K == 0, error()


@TestScenario
def check_preconditions(self):
    """Check input validation."""
    with raises(ValidationError):
        isolate_detect(series([1] * 15), "linear")
    with raises(ValidationError):
        isolate_detect(series([1] * 30), "quadratic")
    with raises(ValidationError):
        IdConfig(lambda_T=1)
    with raises(ValidationError):
        IdConfig(zeta_T=-1.0)
    with raises(ValidationError):
        forecast_cpt(isolate_detect(series([1] * 30), "constant"), 0)


@TestFeature
@Name("changepoint")
def feature(self):
    """Check isolate-detect change-point estimation."""
    for scenario in loads(current_module(), Scenario):
        scenario()

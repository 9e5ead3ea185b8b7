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
import tempfile

import numpy as np

from testflows.core import *
from testflows.asserts import error, raises

from epiflows.covid import (
    ValidationError,
    MissingColumnError,
    NonIntegerCountError,
    NegativeCountError,
    DateGapError,
    LengthMismatchError,
    DomainError,
    SeriesSchema,
    RngSeed,
    PredictionInterval,
    DISTRICTS,
    relative_error,
    load_series,
    save_series,
    load_mobility,
    default_mobility,
    default_populations,
)

from helpers import series, write_csv


@TestScenario
def check_load_series(self):
    """Check loading a three day incidence file."""
    with tempfile.TemporaryDirectory() as directory:
        path = write_csv(directory, "cases.csv", [("2020-03-01", 1), ("2020-03-02", 0), ("2020-03-03", 2)])
        s = load_series(path)

    assert s.T == 3, error()
    assert list(s.cases) == [1, 0, 2], error()
    assert s.start_date == datetime.date(2020, 3, 1), error()
    assert s.end_date == datetime.date(2020, 3, 3), error()
    assert s.recovered is None and s.deaths is None, error()
    assert s.label == "cases", error()


@TestOutline(Scenario)
@Examples(
    "rows header exception",
    [
        ([("2020-03-01", 1), ("2020-03-03", 2)], "date,cases", DateGapError, Name("date gap")),
        ([("2020-03-01", 1), ("2020-03-02", 2)], "date,count", MissingColumnError, Name("missing column")),
        ([("2020-03-01", 1.5), ("2020-03-02", 2)], "date,cases", NonIntegerCountError, Name("non-integer count")),
        ([("2020-03-01", 1), ("2020-03-02", -2)], "date,cases", NegativeCountError, Name("negative count")),
        ([], "date,cases", ValidationError, Name("no rows")),
    ],
)
def check_invalid_file(self, rows, header, exception):
    """Check that invalid incidence files are rejected with a named error."""
    with tempfile.TemporaryDirectory() as directory:
        path = write_csv(directory, "cases.csv", rows, header=header)
        with raises(exception):
            load_series(path)


@TestScenario
def check_empty_file(self):
    """Check that an empty file is a validation error."""
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "empty.csv")
        open(path, "w").close()
        with raises(ValidationError):
            load_series(path)


@TestScenario
def check_local_schema(self):
    """Check selecting locally-acquired cases through the schema."""
    with tempfile.TemporaryDirectory() as directory:
        path = write_csv(
            directory,
            "cases.csv",
            [("2020-03-01", 3, 1), ("2020-03-02", 5, 2)],
            header="date,cases,local",
        )
        s = load_series(path, SeriesSchema.local())

    assert list(s.cases) == [1, 2], error()
    assert s.label == "local", error()


@TestScenario
def check_save_and_load(self):
    """Check that a saved series with recovered and deaths loads back equal."""
    s = series([1, 4, 2, 0], recovered=[0, 1, 1, 2], deaths=[0, 0, 1, 0], label="cases")
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "cases.csv")
        save_series(s, path)
        loaded = load_series(path)
    assert loaded == s, error()


@TestScenario
def check_window(self):
    """Check windows by index and by date and the first case index."""
    s = series([0, 0, 3, 1, 0, 2])

    assert s.first_case() == 3, error()
    assert series([0, 0]).first_case() is None, error()

    w = s.window(3, 5)
    assert list(w.cases) == [3, 1, 0], error()
    assert w.start_date == datetime.date(2020, 3, 3), error()
    assert s.window(datetime.date(2020, 3, 4)) == s.window(4), error()
    assert list(s.cumulative()) == [0, 0, 3, 4, 4, 6], error()

    with raises(ValidationError):
        s.window(5, 7)


@TestScenario
def check_series_validation(self):
    """Check count validation of in-memory series."""
    with raises(NegativeCountError):
        series([1, -1])
    with raises(NonIntegerCountError):
        series([1, float("nan")])
    with raises(LengthMismatchError):
        series([1, 2], recovered=[1])


@TestOutline(Scenario)
@Examples(
    "pred obs expected",
    [
        ([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 0.0, Name("identical")),
        ([0.0, 0.0], [3.0, 4.0], 1.0, Name("zero prediction")),
    ],
)
def check_relative_error(self, pred, obs, expected):
    """Check relative error values."""
    assert abs(relative_error(pred, obs) - expected) < 1e-12, error()


@TestScenario
def check_relative_error_errors(self):
    """Check relative error preconditions."""
    with raises(LengthMismatchError):
        relative_error([1.0], [1.0, 2.0])
    with raises(DomainError):
        relative_error([1.0, 2.0], [0.0, 0.0])


@TestScenario
def check_seed_derivation(self):
    """Check that derived seeds are reproducible and distinct."""
    seed = RngSeed(42)

    assert seed.derive("mcmc", 0) == RngSeed(42).derive("mcmc", 0), error()
    assert seed.derive("mcmc", 0) != seed.derive("mcmc", 1), error()

    a = seed.derive("replicate", 3).generator().random(5)
    b = seed.derive("replicate", 3).generator().random(5)
    assert np.array_equal(a, b), error()

    with raises(ValidationError):
        RngSeed(-1)


@TestScenario
def check_prediction_interval(self):
    """Check that a prediction interval must contain its point forecast."""
    pi = PredictionInterval(horizon_day=1, point=2.0, lower=1.0, upper=3.0, level=0.95)
    assert pi.to_dict()["point"] == 2.0, error()

    with raises(ValidationError):
        PredictionInterval(horizon_day=1, point=4.0, lower=1.0, upper=3.0, level=0.95)


@TestScenario
def check_district_fixtures(self):
    """Check the bundled mobility matrix and populations."""
    names, M = default_mobility()
    populations = default_populations()

    assert names == DISTRICTS, error()
    assert M.shape == (5, 5), error()
    assert np.all(np.diag(M) == 0), error()
    assert np.all(populations > 0), error()

    with tempfile.TemporaryDirectory() as directory:
        path = write_csv(
            directory, "mobility.csv", [("A", 0, 1), ("B", 2, 3)], header="district,A,B"
        )
        with raises(ValidationError):
            load_mobility(path, districts=("A", "B"))


@TestFeature
@Name("series")
def feature(self):
    """Check incidence series, inputs and shared types."""
    for scenario in loads(current_module(), Scenario):
        scenario()

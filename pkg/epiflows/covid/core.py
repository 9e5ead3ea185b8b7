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
import math
import hashlib
import logging
import datetime

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

__all__ = [
    "ToolkitError",
    "ValidationError",
    "MissingColumnError",
    "NonIntegerCountError",
    "NegativeCountError",
    "DateGapError",
    "LengthMismatchError",
    "DomainError",
    "EstimationError",
    "IntegrationError",
    "IncidenceSeries",
    "SeriesSchema",
    "RngSeed",
    "PredictionInterval",
    "as_generator",
    "relative_error",
    "load_series",
    "save_series",
    "load_district_series",
    "load_mobility",
    "load_populations",
    "default_mobility",
    "default_populations",
    "DISTRICTS",
]

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

DISTRICTS = ("Nicosia", "Limassol", "Larnaca", "Paphos", "Ammochostos")


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    pass


class ValidationError(ToolkitError, ValueError):
    """Invalid argument or input."""

    pass


class MissingColumnError(ValidationError):
    """Required column is missing from an input file."""

    pass


class NonIntegerCountError(ValidationError):
    """Count column contains a non-integer value."""

    pass


class NegativeCountError(ValidationError):
    """Count column contains a negative value."""

    pass


class DateGapError(ValidationError):
    """Dates are not consecutive calendar days."""

    pass


class LengthMismatchError(ValidationError):
    """Series that must be aligned have different lengths."""

    pass


class DomainError(ToolkitError, ValueError):
    """Quantity is mathematically undefined for the given input."""

    pass


class EstimationError(ToolkitError, RuntimeError):
    """Estimator failed.

    :param best: best iterate or partial result, default: `None`
    :param residual: objective value at `best`, default: `None`
    """

    def __init__(self, message, best=None, residual=None):
        super(EstimationError, self).__init__(message)
        self.best = best
        self.residual = residual


class IntegrationError(ToolkitError, RuntimeError):
    """Compartmental integration failed."""

    pass


def _counts(values, name, required=True):
    """Convert values into a read-only int64 array of counts."""
    if values is None:
        if required:
            raise ValidationError(f"'{name}' is required")
        return None
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"'{name}' must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise NonIntegerCountError(f"'{name}' contains missing or non-finite values")
    if np.any(arr != np.round(arr)):
        t = int(np.flatnonzero(arr != np.round(arr))[0]) + 1
        raise NonIntegerCountError(f"'{name}' has a non-integer count at t={t}")
    if np.any(arr < 0):
        t = int(np.flatnonzero(arr < 0)[0]) + 1
        raise NegativeCountError(f"'{name}' has a negative count at t={t}")
    arr = arr.astype(np.int64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class IncidenceSeries:
    """Dated daily counts.

    Time is addressed by the integer index t = 1..T where t = 1 is `start_date`.
    Optional `recovered` and `deaths` are `None` when absent, never zeros.
    """

    start_date: datetime.date
    cases: np.ndarray
    recovered: Optional[np.ndarray] = None
    deaths: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        start = pd.Timestamp(self.start_date).date()
        object.__setattr__(self, "start_date", start)
        cases = _counts(self.cases, "cases")
        if len(cases) < 1:
            raise ValidationError("series must have at least one day")
        object.__setattr__(self, "cases", cases)
        for name in ("recovered", "deaths"):
            values = _counts(getattr(self, name), name, required=False)
            if values is not None and len(values) != len(cases):
                raise LengthMismatchError(
                    f"'{name}' has {len(values)} values but 'cases' has {len(cases)}"
                )
            object.__setattr__(self, name, values)

    def __len__(self):
        return len(self.cases)

    def __eq__(self, other):
        if not isinstance(other, IncidenceSeries):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return np.array_equal(a, b)

        return (
            self.start_date == other.start_date
            and self.label == other.label
            and same(self.cases, other.cases)
            and same(self.recovered, other.recovered)
            and same(self.deaths, other.deaths)
        )

    __hash__ = None

    @property
    def T(self):
        """Number of days."""
        return len(self.cases)

    @property
    def end_date(self):
        return self.date_of(self.T)

    @property
    def dates(self):
        """Calendar dates of t = 1..T."""
        return pd.date_range(self.start_date, periods=self.T, freq="D")

    def date_of(self, t):
        """Return calendar date of the 1-based index `t`."""
        return self.start_date + datetime.timedelta(days=int(t) - 1)

    def index_of(self, date):
        """Return 1-based index of `date` (may fall outside 1..T)."""
        return (pd.Timestamp(date).date() - self.start_date).days + 1

    def window(self, first=None, last=None, label=None):
        """Return sub-series for the 1-based inclusive index range [first, last].

        Dates are accepted in place of indices.
        """
        first = 1 if first is None else first
        last = self.T if last is None else last
        if not isinstance(first, (int, np.integer)):
            first = self.index_of(first)
        if not isinstance(last, (int, np.integer)):
            last = self.index_of(last)
        if not 1 <= first <= last <= self.T:
            raise ValidationError(
                f"window [{first}, {last}] is outside of [1, {self.T}]"
            )
        sl = slice(first - 1, last)
        return IncidenceSeries(
            start_date=self.date_of(first),
            cases=self.cases[sl],
            recovered=None if self.recovered is None else self.recovered[sl],
            deaths=None if self.deaths is None else self.deaths[sl],
            label=self.label if label is None else label,
        )

    def cumulative(self, name="cases"):
        """Return cumulative sum of the `name` counts as float array."""
        values = getattr(self, name)
        if values is None:
            raise ValidationError(f"series has no '{name}' counts")
        return np.cumsum(values).astype(float)

    def first_case(self):
        """Return 1-based index of the first day with a positive count or `None`."""
        nonzero = np.flatnonzero(self.cases > 0)
        return int(nonzero[0]) + 1 if len(nonzero) else None

    def to_frame(self):
        """Return series as a data frame indexed by date."""
        data = {"cases": self.cases}
        if self.recovered is not None:
            data["recovered"] = self.recovered
        if self.deaths is not None:
            data["deaths"] = self.deaths
        frame = pd.DataFrame(data, index=self.dates)
        frame.index.name = "date"
        return frame


@dataclass(frozen=True)
class SeriesSchema:
    """Column mapping used to read and write incidence files.

    Choosing between sampling date and symptom-onset files, or between all
    and locally-acquired cases, is a matter of pointing `cases` at the column.
    """

    date: str = "date"
    cases: str = "cases"
    recovered: Optional[str] = "recovered"
    deaths: Optional[str] = "deaths"
    label: str = ""

    @classmethod
    def local(cls, column="local"):
        """Schema reading locally-acquired cases."""
        return cls(cases=column, label="local")


def _derive_seed(seed, keys):
    digest = hashlib.sha256(repr((int(seed),) + tuple(keys)).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(frozen=True)
class RngSeed:
    """Seed of every stochastic operation.

    Identical seed and inputs produce bit-identical outputs. Child seeds are
    derived by hashing, forming the tree command -> module -> replicate.
    """

    seed: int = 0

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", seed)

    def derive(self, *keys):
        """Return child seed for `keys`."""
        return RngSeed(_derive_seed(self.seed, keys))

    def generator(self):
        """Return a fresh generator for this seed."""
        return np.random.Generator(np.random.PCG64(self.seed))


def as_generator(seed):
    """Return generator for an `RngSeed`, an integer or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, RngSeed):
        return seed.generator()
    if seed is None:
        raise ValidationError("a seed is required")
    return RngSeed(seed).generator()


@dataclass(frozen=True)
class PredictionInterval:
    """Forecast with an interval for one horizon day."""

    horizon_day: int
    point: float
    lower: float
    upper: float
    level: float
    simultaneous: bool = False

    def __post_init__(self):
        if int(self.horizon_day) < 1:
            raise ValidationError("horizon_day must be >= 1")
        if not 0 < self.level < 1:
            raise ValidationError("level must be in (0, 1)")
        if not self.lower <= self.point <= self.upper:
            raise ValidationError(
                f"interval [{self.lower}, {self.upper}] does not contain {self.point}"
            )

    def to_dict(self):
        return {
            "horizon_day": int(self.horizon_day),
            "point": float(self.point),
            "lower": float(self.lower),
            "upper": float(self.upper),
            "level": float(self.level),
            "simultaneous": bool(self.simultaneous),
        }


def relative_error(pred, obs):
    """Relative error sqrt(sum (y - x)^2 / sum x^2) of predictions `pred`
    against observations `obs`.
    """
    pred = np.asarray(pred, dtype=float)
    obs = np.asarray(obs, dtype=float)
    if pred.shape != obs.shape or pred.ndim != 1:
        raise LengthMismatchError(
            f"prediction and observation lengths differ ({pred.shape} != {obs.shape})"
        )
    if len(obs) < 1:
        raise ValidationError("series must not be empty")
    denom = float(np.sum(obs ** 2))
    if denom == 0:
        raise DomainError("relative error is undefined for all-zero observations")
    return math.sqrt(float(np.sum((pred - obs) ** 2)) / denom)


def _read_csv(path):
    try:
        return pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ValidationError(f"'{path}' is empty")


def _dates(frame, column, path):
    if column not in frame.columns:
        raise MissingColumnError(f"'{path}' has no '{column}' column")
    try:
        dates = pd.to_datetime(frame[column], format="%Y-%m-%d")
    except (ValueError, TypeError) as e:
        raise ValidationError(f"'{path}' has an unparsable date: {e}")
    steps = dates.diff().dropna().dt.days
    if len(steps) and not np.all(steps == 1):
        row = int(np.flatnonzero(steps.values != 1)[0]) + 1
        raise DateGapError(
            f"'{path}' dates are not consecutive after {dates.iloc[row - 1].date()}"
        )
    return dates


def load_series(path, schema=None):
    """Load and validate an incidence file.

    :param path: CSV file path
    :param schema: column mapping, default: `SeriesSchema()`
    """
    schema = schema or SeriesSchema()
    frame = _read_csv(path)
    if frame.empty:
        raise ValidationError(f"'{path}' has no rows")
    dates = _dates(frame, schema.date, path)
    if schema.cases not in frame.columns:
        raise MissingColumnError(f"'{path}' has no '{schema.cases}' column")

    def optional(column):
        if column is None or column not in frame.columns:
            return None
        return frame[column].values

    series = IncidenceSeries(
        start_date=dates.iloc[0].date(),
        cases=frame[schema.cases].values,
        recovered=optional(schema.recovered),
        deaths=optional(schema.deaths),
        label=schema.label or os.path.splitext(os.path.basename(str(path)))[0],
    )
    logger.debug(f"loaded {series.T} days from '{path}' starting {series.start_date}")
    return series


def save_series(series, path, schema=None):
    """Write `series` in the format read by `load_series`."""
    schema = schema or SeriesSchema()
    frame = pd.DataFrame(
        {
            schema.date: [d.strftime("%Y-%m-%d") for d in series.dates],
            schema.cases: series.cases,
        }
    )
    if series.recovered is not None and schema.recovered:
        frame[schema.recovered] = series.recovered
    if series.deaths is not None and schema.deaths:
        frame[schema.deaths] = series.deaths
    frame.to_csv(path, index=False)


def load_district_series(path, districts=DISTRICTS, date_column="date"):
    """Load a wide file with one count column per district.

    :return: dict mapping district name to `IncidenceSeries`
    """
    frame = _read_csv(path)
    dates = _dates(frame, date_column, path)
    series = {}
    for name in districts:
        if name not in frame.columns:
            raise MissingColumnError(f"'{path}' has no '{name}' column")
        series[name] = IncidenceSeries(
            start_date=dates.iloc[0].date(), cases=frame[name].values, label=name
        )
    return series


def load_mobility(path, districts=DISTRICTS):
    """Load a square mobility matrix; `M[i, j]` is daily travel from i to j."""
    frame = pd.read_csv(path, index_col=0)
    names = [str(c) for c in frame.columns]
    if [str(i) for i in frame.index] != names:
        raise ValidationError(f"'{path}' row and column districts differ")
    if districts is not None and tuple(names) != tuple(districts):
        raise ValidationError(f"'{path}' districts {names} != {list(districts)}")
    matrix = frame.values.astype(float)
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
        raise ValidationError(f"'{path}' entries must be finite and non-negative")
    if np.any(np.diag(matrix) != 0):
        raise ValidationError(f"'{path}' diagonal must be zero")
    return tuple(names), matrix


def load_populations(path, districts=DISTRICTS):
    """Load district populations with columns `district, population`."""
    frame = _read_csv(path)
    for column in ("district", "population"):
        if column not in frame.columns:
            raise MissingColumnError(f"'{path}' has no '{column}' column")
    populations = dict(zip(frame["district"].astype(str), frame["population"].astype(float)))
    missing = [d for d in districts if d not in populations]
    if missing:
        raise ValidationError(f"'{path}' has no population for {missing}")
    values = np.array([populations[d] for d in districts])
    if np.any(values <= 0):
        raise ValidationError(f"'{path}' populations must be positive")
    return values


def default_mobility():
    """Fixture mobility matrix shipped with the package (not census data)."""
    return load_mobility(os.path.join(DATA_DIR, "mobility.csv"))


def default_populations():
    """Fixture district populations shipped with the package (not census data)."""
    return load_populations(os.path.join(DATA_DIR, "populations.csv"))

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
import logging

from enum import Enum
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy import stats

from .core import (
    ValidationError,
    EstimationError,
    PredictionInterval,
)

__all__ = [
    "SignalModel",
    "IdConfig",
    "Segment",
    "TraceEntry",
    "ChangePointResult",
    "cusum_contrast",
    "linear_contrast",
    "estimate_sigma",
    "isolate_detect",
    "fit_segments",
    "forecast_cpt",
]

logger = logging.getLogger(__name__)

#: threshold constants C in zeta = C * sigma * sqrt(2 log T)
THRESHOLD_CONSTANT = {"constant": 1.1, "linear": 1.4}


class SignalModel(Enum):
    """Signal underlying the observed series."""

    PiecewiseConstant = "constant"
    ContinuousPiecewiseLinear = "linear"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(
                f"unknown signal model '{value}', expected 'constant' or 'linear'"
            )

    @property
    def min_length(self):
        """Shortest interval on which the contrast is defined."""
        return 2 if self is SignalModel.PiecewiseConstant else 3


@dataclass(frozen=True)
class IdConfig:
    """Isolate-detect settings.

    :param lambda_T: expansion step in days, default: `10`
    :param zeta_T: threshold or `"auto"`, default: `"auto"`
    :param sigma: explicit noise scale, default: `None` (median absolute deviation)
    """

    lambda_T: int = 10
    zeta_T: Union[float, str] = "auto"
    sigma: Optional[float] = None

    def __post_init__(self):
        if int(self.lambda_T) != self.lambda_T or self.lambda_T < 2:
            raise ValidationError("lambda_T must be an integer >= 2")
        if isinstance(self.zeta_T, str):
            if self.zeta_T != "auto":
                raise ValidationError("zeta_T must be a positive number or 'auto'")
        elif not self.zeta_T > 0:
            raise ValidationError("zeta_T must be positive")
        if self.sigma is not None and not self.sigma > 0:
            raise ValidationError("explicit sigma must be positive")


@dataclass(frozen=True)
class Segment:
    """Fitted segment on the 1-based inclusive range [start, end].

    The fitted value at `t` is `level + slope * (t - start)`.
    """

    start: int
    end: int
    level: float
    slope: float = 0.0

    def value(self, t):
        return self.level + self.slope * (np.asarray(t, dtype=float) - self.start)

    def to_dict(self):
        return {
            "start": self.start,
            "end": self.end,
            "level": self.level,
            "slope": self.slope,
        }


@dataclass(frozen=True)
class TraceEntry:
    """One tested interval of the isolate-detect schedule."""

    side: str
    start: int
    end: int
    argmax: int
    contrast: float
    detected: bool


@dataclass
class ChangePointResult:
    series: object
    model: SignalModel
    locations: List[int]
    fitted: np.ndarray
    segment_params: List[Segment]
    threshold: float
    sigma: float
    trace: List[TraceEntry] = field(default_factory=list)
    forecasts: List[PredictionInterval] = field(default_factory=list)

    @property
    def K(self):
        return len(self.locations)

    @property
    def jumps(self):
        """Consecutive differences of segment levels (constant model)."""
        levels = [s.value(s.start) for s in self.segment_params]
        return [float(b - a) for a, b in zip(levels[:-1], levels[1:])]

    def dates(self):
        return [self.series.date_of(r) for r in self.locations]


def cusum_contrast(x):
    """Absolute CUSUM statistics for every split of `x`.

    Element `b - 1` is the contrast between x[:b] and x[b:] for b = 1..n-1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 2:
        return np.zeros(0)
    csum = np.cumsum(x)
    left_len = np.arange(1, n, dtype=float)
    right_len = n - left_len
    left = csum[:-1]
    right = csum[-1] - left
    return np.abs(
        np.sqrt(right_len / (n * left_len)) * left
        - np.sqrt(left_len / (n * right_len)) * right
    )


def linear_contrast(x):
    """Absolute contrasts for a kink in a continuous linear signal.

    Element `b - 2` is the contrast for a kink at local position b = 2..n-1,
    the normalised projection of `x` on the hinge (t - b)_+ after removing
    the linear trend.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 3:
        return np.zeros(0)
    t = np.arange(1, n + 1, dtype=float)
    trend = np.column_stack([np.ones(n), t])
    q, _ = np.linalg.qr(trend)
    knots = np.arange(2, n, dtype=float)
    hinges = np.maximum(t[:, None] - knots[None, :], 0.0)
    hinges -= q @ (q.T @ hinges)
    norms = np.linalg.norm(hinges, axis=0)
    residual = x - q @ (q.T @ x)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.abs(residual @ hinges) / norms


def estimate_sigma(x, model):
    """Gaussian-scaled median absolute deviation of first (constant model)
    or second (linear model) differences.
    """
    model = SignalModel.parse(model)
    x = np.asarray(x, dtype=float)
    if model is SignalModel.PiecewiseConstant:
        d, scale = np.diff(x), math.sqrt(2.0)
    else:
        d, scale = np.diff(x, n=2), math.sqrt(6.0)
    if len(d) == 0:
        raise ValidationError("series too short to estimate noise scale")
    mad = float(np.median(np.abs(d - np.median(d))))
    floor = 1e-6 * (1.0 + float(np.max(np.abs(x))))
    return max(1.4826 * mad / scale, floor)


def _contrast(x, model):
    if model is SignalModel.PiecewiseConstant:
        return cusum_contrast(x), 1
    return linear_contrast(x), 2


def _schedule(s, e, lam):
    """Right- and left-expanding intervals R1, L1, R2, L2, ... of [s, e]."""
    count = math.ceil((e - s + 1) / lam)
    for j in range(1, count + 1):
        yield "right", s, min(s + j * lam - 1, e)
        yield "left", max(e - j * lam + 1, s), e


def isolate_detect(series, model, cfg=None):
    """Estimate change-point locations by isolate-detect.

    Intervals expand by `cfg.lambda_T` alternately from the left and right
    end of the current search range. The first interval whose maximum contrast
    exceeds the threshold yields a change-point at the argmax; the search then
    continues on the rest of the range beyond that interval's moving endpoint.
    Intervals already examined without detection are not retested.

    :param series: incidence series
    :param model: signal model
    :param cfg: settings, default: `IdConfig()`
    """
    model = SignalModel.parse(model)
    cfg = cfg or IdConfig()
    x = series.cases.astype(float)
    T = len(x)
    lam = int(cfg.lambda_T)

    if T < 2 * lam:
        raise ValidationError(f"series of {T} days is shorter than 2 * lambda_T = {2 * lam}")

    sigma = float(cfg.sigma) if cfg.sigma is not None else estimate_sigma(x, model)
    if cfg.zeta_T == "auto":
        threshold = THRESHOLD_CONSTANT[model.value] * sigma * math.sqrt(2.0 * math.log(T))
    else:
        threshold = float(cfg.zeta_T)

    logger.debug(f"{model.value} model: sigma={sigma:.6g} threshold={threshold:.6g}")

    locations, trace, examined = [], [], set()
    ranges = [(1, T)]

    while ranges:
        s, e = ranges.pop()
        while e - s + 1 >= model.min_length:
            detection = None
            for side, a, b in _schedule(s, e, lam):
                if b - a + 1 < model.min_length or (a, b) in examined:
                    continue
                examined.add((a, b))
                contrast, offset = _contrast(x[a - 1 : b], model)
                if not np.all(np.isfinite(contrast)):
                    raise EstimationError(
                        f"non-finite contrast on [{a}, {b}]", best=sorted(locations)
                    )
                k = int(np.argmax(contrast))
                value = float(contrast[k])
                argmax = a - 1 + k + offset
                detected = value > threshold
                trace.append(TraceEntry(side, a, b, argmax, value, detected))
                if detected:
                    detection = (side, a, b, argmax)
                    break
            if detection is None:
                break
            side, a, b, r = detection
            logger.debug(f"change-point at t={r} in {side} interval [{a}, {b}]")
            locations.append(r)
            if side == "right":
                s = b
            else:
                e = a

    locations = sorted(set(locations))
    fitted, segments = fit_segments(series, locations, model)
    logger.info(f"{model.value} model: {len(locations)} change-points at {locations}")

    return ChangePointResult(
        series=series,
        model=model,
        locations=locations,
        fitted=fitted,
        segment_params=segments,
        threshold=threshold,
        sigma=sigma,
        trace=trace,
    )


def _check_locations(locations, T):
    locations = [int(r) for r in locations]
    for r in locations:
        if not 1 <= r <= T - 1:
            raise ValidationError(f"change-point {r} is outside of [1, {T - 1}]")
    if any(b <= a for a, b in zip(locations[:-1], locations[1:])):
        raise ValidationError(f"change-points {locations} must be strictly increasing")
    return locations


def fit_segments(series, locations, model):
    """Least-squares refit of the signal given change-point `locations`.

    Segments are [1, r1], [r1 + 1, r2], ..., [rK + 1, T].

    :return: fitted values, list of `Segment`
    """
    model = SignalModel.parse(model)
    x = series.cases.astype(float) if hasattr(series, "cases") else np.asarray(series, float)
    T = len(x)
    locations = _check_locations(locations, T)
    bounds = list(zip([1] + [r + 1 for r in locations], locations + [T]))

    fitted = np.empty(T)
    segments = []

    if model is SignalModel.PiecewiseConstant:
        for a, b in bounds:
            level = float(np.mean(x[a - 1 : b]))
            fitted[a - 1 : b] = level
            segments.append(Segment(a, b, level))
        return fitted, segments

    t = np.arange(1, T + 1, dtype=float)
    design = np.column_stack(
        [np.ones(T), t] + [np.maximum(t - r, 0.0) for r in locations]
    )
    coef, *_ = np.linalg.lstsq(design, x, rcond=None)
    fitted = design @ coef
    slope = coef[1]
    for k, (a, b) in enumerate(bounds):
        if k > 0:
            slope += coef[1 + k]
        level = float(coef[0] + coef[1] * a + sum(
            coef[2 + i] * max(a - r, 0.0) for i, r in enumerate(locations)
        ))
        segments.append(Segment(a, b, level, float(slope)))
    return fitted, segments


def forecast_cpt(result, horizon, level=0.95):
    """Forecast by extrapolating the final segment.

    Intervals use the final-segment residual variance with Gaussian quantiles.
    Point forecasts and bounds are truncated below at 0.

    :param result: change-point result
    :param horizon: number of days
    :param level: interval level, default: `0.95`
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    if not 0 < level < 1:
        raise ValidationError("level must be in (0, 1)")

    last = result.segment_params[-1]
    x = result.series.cases.astype(float)
    T = len(x)
    n = last.end - last.start + 1
    residual = x[last.start - 1 :] - result.fitted[last.start - 1 :]
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    t_seg = np.arange(last.start, last.end + 1, dtype=float)

    if result.model is SignalModel.ContinuousPiecewiseLinear:
        if n < 2:
            raise EstimationError(f"final segment of {n} day(s) is too short")
        s2 = float(np.sum(residual ** 2)) / max(n - 2, 1)
        tbar = float(np.mean(t_seg))
        sxx = float(np.sum((t_seg - tbar) ** 2))
    else:
        if n < 1:
            raise EstimationError("final segment is empty")
        s2 = float(np.var(residual, ddof=1)) if n > 1 else 0.0

    forecasts = []
    for h in range(1, horizon + 1):
        t = T + h
        point = float(last.value(t))
        if result.model is SignalModel.ContinuousPiecewiseLinear:
            leverage = 1.0 / n + (t - tbar) ** 2 / sxx
        else:
            leverage = 1.0 / n
        half = z * math.sqrt(s2 * (1.0 + leverage))
        forecasts.append(
            PredictionInterval(
                horizon_day=h,
                point=max(point, 0.0),
                lower=max(point - half, 0.0),
                upper=max(point + half, 0.0),
                level=level,
            )
        )
    result.forecasts = forecasts
    return forecasts

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
import datetime

from enum import Enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import signal, special, stats

from .core import (
    ValidationError,
    LengthMismatchError,
    RngSeed,
    DISTRICTS,
)
from .compartmental import (
    CYPRUS_POPULATION,
    Model1Params,
    MetaRng,
    IuMobility,
    delay_pmf,
    run_model1_batch,
    _model2_step,
)

__all__ = [
    "BetaPrior",
    "PriorSpec",
    "Period",
    "RtEstimate",
    "McmcResult",
    "EnsembleConfig",
    "EakfResult",
    "effective_r",
    "default_priors",
    "fortnight_periods",
    "weekly_windows",
    "mcmc_model1",
    "COLLAPSED_VARIANCE",
    "eakf_update",
    "eakf_model2",
    "bettencourt_rt",
    "serial_interval_weights",
    "cori_rt",
]

logger = logging.getLogger(__name__)

OK = "ok"
INSUFFICIENT_SIGNAL = "insufficient-signal"
UNDEFINED = "undefined"

LOCKDOWN_DATE = datetime.date(2020, 3, 24)


def effective_r(alpha, beta, mu, D):
    """Effective reproduction number of model 1.

    Reported infections transmit at rate beta for D days, undocumented ones
    at the reduced rate mu * beta. Accepts arrays.
    """
    alpha, beta, mu, D = (np.asarray(v, dtype=float) for v in (alpha, beta, mu, D))
    r = alpha * beta * D + (1.0 - alpha) * mu * beta * D
    return float(r) if r.ndim == 0 else r


class BetaPrior(str, Enum):
    Gamma = "gamma"
    Exponential = "exponential"


@dataclass(frozen=True)
class PriorSpec:
    """Prior of one sampling period.

    :param alpha_shape1: first shape of the Beta prior on the reporting rate
    :param alpha_shape2: second shape of the Beta prior on the reporting rate
    :param beta_prior: `gamma` for Gamma(3/2, scale 3/2), `exponential` for Exponential(1)
    :param init_max: upper end of the uniform integer prior on E and Iu
    """

    alpha_shape1: float = 2.0
    alpha_shape2: float = 2.0
    beta_prior: BetaPrior = BetaPrior.Gamma
    init_max: int = 10

    def __post_init__(self):
        if not (self.alpha_shape1 > 0 and self.alpha_shape2 > 0):
            raise ValidationError("Beta prior shapes must be positive")
        object.__setattr__(self, "beta_prior", BetaPrior(self.beta_prior))
        if int(self.init_max) < 0:
            raise ValidationError("init_max must be >= 0")

    def alpha_distribution(self):
        return stats.beta(self.alpha_shape1, self.alpha_shape2)

    def beta_distribution(self):
        if self.beta_prior is BetaPrior.Gamma:
            return stats.gamma(a=1.5, scale=1.5)
        return stats.expon(scale=1.0)

    def to_dict(self):
        return {
            "alpha_shape1": self.alpha_shape1,
            "alpha_shape2": self.alpha_shape2,
            "beta_prior": self.beta_prior.value,
            "init_max": int(self.init_max),
        }


def default_priors(n_periods=6):
    """Reporting-rate priors progressively skewed towards 1.

    Beta(2, 2) in the first fortnight, Beta(3, 2) in the next two and
    Beta(4, 2) afterwards. The transmission rate has a Gamma prior in the
    first fortnight and an Exponential(1) prior afterwards.
    """
    priors = []
    for k in range(int(n_periods)):
        shape1 = 2.0 if k == 0 else (3.0 if k < 3 else 4.0)
        beta_prior = BetaPrior.Gamma if k == 0 else BetaPrior.Exponential
        priors.append(PriorSpec(alpha_shape1=shape1, alpha_shape2=2.0, beta_prior=beta_prior))
    return priors


@dataclass(frozen=True)
class Period:
    """Days `first`..`last` (1-based, inclusive) of a series."""

    first: int
    last: int
    start_date: datetime.date
    end_date: datetime.date

    @property
    def days(self):
        return self.last - self.first + 1

    @classmethod
    def of(cls, series, first, last):
        return cls(first=first, last=last, start_date=series.date_of(first), end_date=series.date_of(last))

    def to_dict(self):
        return {"start": self.start_date.isoformat(), "end": self.end_date.isoformat()}


def _first_index(series, start):
    if start is None:
        return 1
    if isinstance(start, datetime.date):
        return series.index_of(start)
    return int(start)


def fortnight_periods(series, start=None, count=6, length=14):
    """Consecutive `count` periods of `length` days starting at `start`.

    The last period is truncated when the series ends early.

    :param start: first day, 1-based index or date, default: first day of the series
    """
    first = _first_index(series, start)
    if not 1 <= first <= series.T:
        raise ValidationError(f"period start {start} is outside of the series")
    periods = []
    for _ in range(int(count)):
        if first > series.T:
            break
        last = min(first + int(length) - 1, series.T)
        periods.append(Period.of(series, first, last))
        first = last + 1
    return periods


def weekly_windows(series, start=2, length=7):
    """Consecutive full windows of `length` days starting at `start`."""
    first = _first_index(series, start)
    windows = []
    while first + length - 1 <= series.T:
        windows.append(Period.of(series, first, first + length - 1))
        first += length
    return windows


def _check_partition(periods, T):
    if not periods:
        raise ValidationError("at least one period is required")
    for k, period in enumerate(periods):
        if not 1 <= period.first <= period.last <= T:
            raise ValidationError(f"period {k + 1} is outside of the series")
        if k and period.first != periods[k - 1].last + 1:
            raise ValidationError(f"period {k + 1} does not follow period {k}")


@dataclass
class RtEstimate:
    """Posterior summary of the effective reproduction number over a period.

    The posterior is stored as `samples`, as `grid` with `masses`, or as
    Gamma `shape` and `rate`.
    """

    period: Period
    median: float
    lower: float
    upper: float
    prob_below_one: float
    mean: float = float("nan")
    mode: float = float("nan")
    level: float = 0.95
    status: str = OK
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    grid: Optional[np.ndarray] = field(default=None, repr=False)
    masses: Optional[np.ndarray] = field(default=None, repr=False)
    shape: Optional[float] = None
    rate: Optional[float] = None

    def __post_init__(self):
        if self.status == OK and not (self.lower <= self.median <= self.upper):
            raise ValidationError("RtEstimate requires lower <= median <= upper")

    @property
    def ci95(self):
        return (self.lower, self.upper)

    @classmethod
    def undefined(cls, period, status=UNDEFINED, level=0.95):
        nan = float("nan")
        return cls(period=period, median=nan, lower=nan, upper=nan, prob_below_one=nan, level=level, status=status)

    @classmethod
    def from_samples(cls, period, samples, level=0.95):
        samples = np.asarray(samples, dtype=float)
        tail = (1.0 - level) / 2.0
        lower, median, upper = np.quantile(samples, [tail, 0.5, 1.0 - tail])
        return cls(
            period=period,
            median=float(median),
            lower=float(lower),
            upper=float(upper),
            prob_below_one=float(np.mean(samples < 1.0)),
            mean=float(np.mean(samples)),
            level=level,
            samples=samples,
        )

    @classmethod
    def from_grid(cls, period, grid, masses, level=0.95):
        grid = np.asarray(grid, dtype=float)
        masses = np.asarray(masses, dtype=float)
        cdf = np.cumsum(masses)
        tail = (1.0 - level) / 2.0
        at = lambda q: float(grid[min(int(np.searchsorted(cdf, q * cdf[-1])), len(grid) - 1)])
        return cls(
            period=period,
            median=at(0.5),
            lower=at(tail),
            upper=at(1.0 - tail),
            prob_below_one=float(np.sum(masses[grid < 1.0])),
            mean=float(np.sum(grid * masses)),
            mode=float(grid[np.argmax(masses)]),
            level=level,
            grid=grid,
            masses=masses,
        )

    @classmethod
    def from_gamma(cls, period, shape, rate, level=0.95):
        dist = stats.gamma(a=shape, scale=1.0 / rate)
        tail = (1.0 - level) / 2.0
        return cls(
            period=period,
            median=float(dist.ppf(0.5)),
            lower=float(dist.ppf(tail)),
            upper=float(dist.ppf(1.0 - tail)),
            prob_below_one=float(dist.cdf(1.0)),
            mean=float(shape / rate),
            mode=float(max(shape - 1.0, 0.0) / rate),
            level=level,
            shape=float(shape),
            rate=float(rate),
        )

    def recompute_prob_below_one(self):
        """P(R < 1) from the stored posterior."""
        if self.samples is not None:
            return float(np.mean(self.samples < 1.0))
        if self.grid is not None:
            return float(np.sum(self.masses[self.grid < 1.0]))
        if self.shape is not None:
            return float(stats.gamma(a=self.shape, scale=1.0 / self.rate).cdf(1.0))
        return float("nan")

    def to_dict(self, samples=False):
        d = {
            "start": self.period.start_date.isoformat(),
            "end": self.period.end_date.isoformat(),
            "status": self.status,
            "median": self.median,
            "lower": self.lower,
            "upper": self.upper,
            "level": self.level,
            "prob_below_one": self.prob_below_one,
            "mean": self.mean,
        }
        if samples and self.samples is not None:
            d["samples"] = self.samples.tolist()
        return d


@dataclass
class McmcResult:
    periods: List[Period]
    priors: List[PriorSpec]
    estimates: List[RtEstimate]
    alpha: List[np.ndarray]
    beta: List[np.ndarray]
    acceptance: List[float]


def _gaussian_loglik(expected, observed, variance):
    """Independent Gaussian log-likelihood summed over the last axis."""
    if np.all(np.isinf(variance)):
        return np.zeros(expected.shape[:-1])
    return -0.5 * np.sum((observed - expected) ** 2 / variance + np.log(2.0 * np.pi * variance), axis=-1)


def observation_variance(y):
    """Observation variance max(1, y^2 / 4)."""
    y = np.asarray(y, dtype=float)
    return np.maximum(1.0, y ** 2 / 4.0)


def mcmc_model1(
    data,
    periods=None,
    priors=None,
    seed=0,
    n_steps=10000,
    burn_in=2000,
    mu=0.5,
    Z=5.1,
    D=3.5,
    tau_d=6.0,
    a=1.85,
    N=CYPRUS_POPULATION,
    obs_variance=None,
    fixed=None,
    chunk=2000,
    level=0.95,
):
    """Period-wise posterior of the reporting and transmission rates of model 1.

    Each period runs an independence sampler whose proposal is the prior,
    so acceptance depends on the likelihood ratio only. Candidates are scored
    by deterministic model-1 trajectories pushed through the reporting
    delay, with independent Gaussian errors of variance max(1, y^2 / 4).
    The end-of-period compartments and the pending reports of accepted
    samples form the initial-state proposal of the next period.

    :param data: daily cases starting three days before the first case
    :param periods: contiguous `Period`s, default: six fortnights from day 1
    :param priors: one `PriorSpec` per period, default: `default_priors()`
    :param obs_variance: override of the observation variance, `inf` flattens the likelihood
    :param fixed: frozen values, keys `alpha`, `beta`, `E`, `Iu`
    """
    if periods is None:
        periods = fortnight_periods(data)
    periods = list(periods)
    _check_partition(periods, data.T)
    priors = list(priors) if priors is not None else default_priors(len(periods))
    if len(priors) != len(periods):
        raise LengthMismatchError("one prior per period is required")
    n_steps, burn_in = int(n_steps), int(burn_in)
    if not 0 <= burn_in < n_steps:
        raise ValidationError("burn_in must be in [0, n_steps)")
    fixed = dict(fixed or {})
    unknown = set(fixed) - {"alpha", "beta", "E", "Iu"}
    if unknown:
        raise ValidationError(f"unknown fixed parameters {sorted(unknown)}")

    seed = seed if isinstance(seed, RngSeed) else RngSeed(seed)
    pmf = delay_pmf(a, tau_d)
    K = len(pmf) - 1
    cases = np.asarray(data.cases, dtype=float)

    result = McmcResult(periods=periods, priors=priors, estimates=[], alpha=[], beta=[], acceptance=[])
    cloud = None
    for k, (period, prior) in enumerate(zip(periods, priors)):
        rng = seed.derive("mcmc", k).generator()
        alpha = np.full(n_steps, float(fixed["alpha"])) if "alpha" in fixed else prior.alpha_distribution().rvs(size=n_steps, random_state=rng)
        beta = np.full(n_steps, float(fixed["beta"])) if "beta" in fixed else prior.beta_distribution().rvs(size=n_steps, random_state=rng)

        if cloud is None:
            init = np.zeros((4, n_steps))
            for row, name in ((1, "E"), (3, "Iu")):
                init[row] = float(fixed[name]) if name in fixed else rng.integers(0, int(prior.init_max) + 1, size=n_steps)
            init[0] = N - init[1] - init[3]
            tails = np.zeros((n_steps, K))
        else:
            states, pending = cloud
            pick = rng.integers(0, states.shape[1], size=n_steps)
            init, tails = states[:, pick], pending[pick]

        observed = cases[period.first - 1:period.last]
        if obs_variance is None:
            variance = observation_variance(observed)
        else:
            variance = np.broadcast_to(np.asarray(obs_variance, dtype=float), observed.shape)

        loglik = np.empty(n_steps)
        end_states = np.empty((4, n_steps))
        end_tails = np.empty((n_steps, K))
        for lo in range(0, n_steps, int(chunk)):
            sl = slice(lo, min(lo + int(chunk), n_steps))
            p = Model1Params(beta=beta[sl], mu=mu, Z=Z, D=D, alpha=alpha[sl], tau_d=tau_d, a=a)
            states, flux = run_model1_batch(init[:, sl], p, N, period.days, check=False)
            history = np.concatenate([tails[sl], flux], axis=-1)
            expected = signal.lfilter(pmf, [1.0], history, axis=-1)[:, K:]
            loglik[sl] = _gaussian_loglik(expected, observed, variance)
            # candidates leaving [0, N] are never accepted
            loglik[sl][np.any(states > N * (1.0 + 1e-9), axis=(0, 1))] = -np.inf
            end_states[:, sl] = states[-1]
            end_tails[sl] = history[:, history.shape[1] - K:]

        u = np.log(rng.random(n_steps))
        chain = np.empty(n_steps, dtype=np.int64)
        current, accepted = 0, 0
        chain[0] = 0
        for i in range(1, n_steps):
            if u[i] < loglik[i] - loglik[current]:
                current = i
                accepted += 1
            chain[i] = current
        kept = chain[burn_in:]
        rate = accepted / max(n_steps - 1, 1)
        if rate < 0.01:
            logger.warning(f"period {k + 1} acceptance rate {rate:.4f} is below 1%")
        logger.info(f"period {k + 1} ({period.start_date}..{period.end_date}) acceptance rate {rate:.3f}")

        r = effective_r(alpha[kept], beta[kept], mu, D)
        result.estimates.append(RtEstimate.from_samples(period, np.atleast_1d(r), level=level))
        result.alpha.append(alpha[kept])
        result.beta.append(beta[kept])
        result.acceptance.append(rate)
        cloud = (end_states[:, kept], end_tails[kept])
    return result


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble size and the uniform ranges members are initialized from.

    Members may drift outside of the ranges after updates.
    """

    n_members: int = 300
    mu: Tuple[float, float] = (0.2, 1.0)
    theta: Tuple[float, float] = (1.0, 1.75)
    Z: Tuple[float, float] = (3.5, 5.5)
    D: Tuple[float, float] = (3.0, 4.0)
    beta_pre: Tuple[float, float] = (0.1, 1.5)
    beta_post: Tuple[float, float] = (0.0, 0.8)
    alpha: Tuple[float, float] = (0.3, 1.0)
    seed_range: Tuple[float, float] = (0.0, 5.0)
    lead_days: int = 7
    inflation: float = 1.01
    lockdown: Optional[datetime.date] = LOCKDOWN_DATE
    tau_d: float = 6.0
    a: float = 1.85
    iu_mobility: str = IuMobility.PRINTED

    RANGES = ("mu", "theta", "Z", "D", "beta_pre", "beta_post", "alpha", "seed_range")

    def __post_init__(self):
        if int(self.n_members) < 100:
            raise ValidationError("n_members must be >= 100")
        for name in self.RANGES:
            lo, hi = (float(v) for v in getattr(self, name))
            if not lo <= hi:
                raise ValidationError(f"range '{name}' must have lower <= upper")
            object.__setattr__(self, name, (lo, hi))
        if self.inflation < 1:
            raise ValidationError("inflation must be >= 1")
        if int(self.lead_days) < 0:
            raise ValidationError("lead_days must be >= 0")
        object.__setattr__(self, "iu_mobility", IuMobility.parse(self.iu_mobility))


#: predicted-observation variance below which the ensemble counts as collapsed
COLLAPSED_VARIANCE = 1e-12


def eakf_update(prior_obs, obs, obs_var, variables=None):
    """Adjust an ensemble to a single scalar observation.

    The observed quantity is shifted and contracted so that its ensemble
    mean and variance equal the Gaussian posterior ones; every row of
    `variables` is then moved by regression on the observed quantity.
    A prior without spread (variance below `COLLAPSED_VARIANCE`) is left
    unchanged.

    :param prior_obs: ensemble of the observed quantity, shape (m,)
    :param obs: observation
    :param obs_var: observation error variance, `inf` leaves the ensemble unchanged
    :param variables: optional ensemble of state and parameters, shape (n, m)
    :return: adjusted observed ensemble, adjusted variables (or `None`)
    """
    h = np.asarray(prior_obs, dtype=float)
    V = None if variables is None else np.array(variables, dtype=float)
    if not np.isfinite(obs_var):
        return h.copy(), V
    pr_mean = np.mean(h)
    pr_var = np.var(h, ddof=1)
    if not pr_var >= COLLAPSED_VARIANCE:
        return h.copy(), V
    po_var = 1.0 / (1.0 / pr_var + 1.0 / obs_var)
    po_mean = po_var * (pr_mean / pr_var + obs / obs_var)
    adjusted = np.sqrt(po_var / pr_var) * (h - pr_mean) + po_mean
    increment = adjusted - h
    if V is not None:
        centered = h - pr_mean
        cov = (V - V.mean(axis=1, keepdims=True)) @ centered / (len(h) - 1)
        V = V + np.outer(cov / pr_var, increment)
    return adjusted, V


@dataclass
class EakfResult:
    districts: Tuple[str, ...]
    dates: List[datetime.date]
    estimates: List[RtEstimate]
    daily_r: np.ndarray = field(repr=False)
    parameters: Dict[str, np.ndarray] = field(repr=False)
    collapses: int = 0


ENSEMBLE_PARAMETERS = ("mu", "theta", "Z", "D", "beta", "alpha")

# physically valid bounds per ensemble parameter row
_PARAMETER_BOUNDS = np.array(
    [[0.01, 1.0], [0.0, np.inf], [0.5, np.inf], [0.5, np.inf], [0.0, np.inf], [0.01, 1.0]]
)


def _physical(x, params, N):
    x = np.clip(x, 0.0, N[None])
    params = np.clip(params, _PARAMETER_BOUNDS[:, :1], _PARAMETER_BOUNDS[:, 1:])
    return x, params


def _align(data, districts):
    if set(data) != set(districts):
        raise ValidationError("per-district data must cover every district of the mobility matrix")
    series = [data[name] for name in districts]
    first = series[0]
    for s in series[1:]:
        if s.start_date != first.start_date or s.T != first.T:
            raise LengthMismatchError("district series must share start date and length")
    return first, np.array([s.cases for s in series], dtype=float)


def eakf_model2(data, mobility, populations, cfg=None, seed=0, districts=DISTRICTS, level=0.95):
    """Weekly effective reproduction number by ensemble assimilation of model 2.

    Every member carries compartments, populations, parameters
    (mu, theta, Z, D, beta, alpha) and its pending reports. Each day the
    ensemble is inflated, forecast one stochastic day, and adjusted
    district by district to the recorded cases.

    Inflation is applied to every member before the forecast of every day.
    A district whose predicted reports agree across all members carries no
    spread for the observation to act on: its adjustment is skipped for the
    day and counted in `collapses`, while the inflated spread of compartments
    and parameters is kept for the following days.

    :param data: dict of district name to `IncidenceSeries`
    :param mobility: daily travellers matrix, `M[i, j]` from i to j
    :param populations: district populations
    """
    cfg = cfg or EnsembleConfig()
    districts = tuple(districts)
    M = np.asarray(mobility, dtype=float)
    n = len(districts)
    if M.shape != (n, n):
        raise LengthMismatchError("mobility matrix does not match the districts")
    populations = np.asarray(populations, dtype=float)
    if populations.shape != (n,):
        raise LengthMismatchError("populations do not match the districts")
    reference, observed = _align(data, districts)
    totals = observed.sum(axis=0)
    if not np.any(totals > 0):
        raise ValidationError("no recorded case in the data")
    first_case = int(np.flatnonzero(totals > 0)[0])
    offset = first_case - int(cfg.lead_days)
    days = reference.T - offset
    start = reference.start_date + datetime.timedelta(days=offset)

    seed = seed if isinstance(seed, RngSeed) else RngSeed(seed)
    rng = seed.derive("eakf", "init").generator()
    m = int(cfg.n_members)
    uniform = lambda bounds, size=m: rng.uniform(bounds[0], bounds[1], size=size)
    params = np.array(
        [uniform(cfg.mu), uniform(cfg.theta), uniform(cfg.Z), uniform(cfg.D), uniform(cfg.beta_pre), uniform(cfg.alpha)]
    )
    x = np.zeros((4, n, m))
    x[1] = uniform(cfg.seed_range, (n, m))
    x[3] = uniform(cfg.seed_range, (n, m))
    N = np.repeat(populations[:, None], m, axis=1)
    x[0] = N - x[1] - x[3]
    # delay pmf in reverse lag order: pending[..., -1 - k] was reported k days ago
    weights = delay_pmf(cfg.a, cfg.tau_d)[::-1]
    pending = np.zeros((n, m, len(weights)))
    rngs = MetaRng.from_seed(seed.derive("eakf", "forecast"), n)
    P = len(ENSEMBLE_PARAMETERS)

    daily_r = np.full((reference.T, m), np.nan)
    collapses = 0
    for step in range(days):
        day = start + datetime.timedelta(days=step)
        if cfg.lockdown is not None and day == cfg.lockdown:
            params[4] = uniform(cfg.beta_post)
            logger.info(f"transmission rate members re-drawn on {day}")

        for block in (x, params):
            mean = block.mean(axis=-1, keepdims=True)
            block[...] = mean + cfg.inflation * (block - mean)
        x, params = _physical(x, params, N)

        p = Model1Params(
            beta=params[4], mu=params[0], Z=params[2], D=params[3], alpha=params[5], tau_d=cfg.tau_d, a=cfg.a
        )
        x, reported, N = _model2_step(x, N, M, params[1], p, rngs, cfg.iu_mobility, districts, check=False)
        pending = np.concatenate([pending[..., 1:], np.rint(reported)[..., None]], axis=-1)

        t = offset + step
        if t < 0:
            continue
        for i in range(n):
            predicted = pending[i] @ weights
            y = observed[i, t]
            if not np.var(predicted, ddof=1) >= COLLAPSED_VARIANCE:
                collapses += 1
                logger.debug(f"ensemble collapsed for {districts[i]} on {day}")
                continue
            V = np.concatenate([x.reshape(4 * n, m), params, pending.reshape(n * len(weights), m)])
            _, V = eakf_update(predicted, y, float(observation_variance(y)), V)
            x = V[: 4 * n].reshape(4, n, m)
            params = V[4 * n: 4 * n + P]
            pending = np.maximum(V[4 * n + P:].reshape(pending.shape), 0.0)
        x, params = _physical(x, params, N)
        daily_r[t] = effective_r(params[5], params[4], params[0], params[3])

    if collapses:
        logger.warning(f"ensemble collapsed {collapses} times")
    estimates = []
    for window in weekly_windows(reference, start=first_case + 1):
        rows = slice(window.first - 1, window.last)
        estimates.append(RtEstimate.from_samples(window, daily_r[rows].mean(axis=0), level=level))
    logger.info(f"assimilated {days} days into {m} members, {len(estimates)} weekly estimates")
    return EakfResult(
        districts=districts,
        dates=list(reference.dates.date),
        estimates=estimates,
        daily_r=daily_r,
        parameters=dict(zip(ENSEMBLE_PARAMETERS, params)),
        collapses=collapses,
    )


def bettencourt_rt(data, window=7, D=3.5, grid=None, level=0.95):
    """Daily posterior of R on a grid from Poisson likelihoods of the last `window` days.

    The expected count under R is k_{t-1} * exp((R - 1) / D). Days whose
    previous count is zero carry no information; a window without
    information gives an `insufficient-signal` estimate.
    """
    window = int(window)
    if window < 1:
        raise ValidationError("window must be >= 1")
    if not D > 0:
        raise ValidationError("D must be positive")
    grid = np.linspace(0.0, 12.0, 1201) if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.min() > 0 or grid.max() < 6:
        raise ValidationError("grid must cover [0, R_max] with R_max >= 6")
    k = np.asarray(data.cases, dtype=float)
    if data.T < 2:
        raise ValidationError("at least two days are required")

    loglik = np.zeros((data.T, len(grid)))
    informative = np.zeros(data.T, dtype=bool)
    growth = np.exp((grid - 1.0) / D)
    for t in range(1, data.T):
        if k[t - 1] > 0:
            loglik[t] = stats.poisson.logpmf(k[t], k[t - 1] * growth)
            informative[t] = True

    estimates = []
    for t in range(1, data.T):
        lo = max(1, t - window + 1)
        period = Period.of(data, t + 1, t + 1)
        if not informative[lo:t + 1].any():
            estimates.append(RtEstimate.undefined(period, INSUFFICIENT_SIGNAL, level))
            continue
        total = loglik[lo:t + 1].sum(axis=0)
        masses = np.exp(total - special.logsumexp(total))
        estimates.append(RtEstimate.from_grid(period, grid, masses, level))
    return estimates


def serial_interval_weights(mean=6.48, sd=3.83, max_days=None, tail=1e-6):
    """Daily serial-interval weights w_1, w_2, ... of a Gamma distribution.

    w_s is the probability of an interval in (s - 1, s]; weights are
    normalized to sum to one.
    """
    if not (mean > 0 and sd > 0):
        raise ValidationError("serial interval mean and sd must be positive")
    dist = stats.gamma(a=(mean / sd) ** 2, scale=sd ** 2 / mean)
    S = int(max_days) if max_days is not None else max(int(math.ceil(dist.ppf(1.0 - tail))), 1)
    w = np.diff(dist.cdf(np.arange(0, S + 1)))
    return w / w.sum()


def cori_rt(data, mean=6.48, sd=3.83, window=7, a0=1.0, b0=0.2, start=2, level=0.95):
    """Weekly Gamma posterior of R given total infectiousness.

    Over each window the posterior is Gamma(a0 + sum I, rate b0 + sum Lambda)
    with Lambda_t = sum_s w_s I_{t-s}.
    """
    window = int(window)
    if data.T < window + 2:
        raise ValidationError(f"at least {window + 2} days are required")
    if not (a0 > 0 and b0 > 0):
        raise ValidationError("Gamma prior parameters must be positive")
    w = serial_interval_weights(mean, sd)
    incidence = np.asarray(data.cases, dtype=float)
    # Lambda_t uses I_{t-1}, I_{t-2}, ...
    infectiousness = signal.lfilter(np.concatenate([[0.0], w]), [1.0], incidence)

    estimates = []
    for period in weekly_windows(data, start=start, length=window):
        rows = slice(period.first - 1, period.last)
        total = float(infectiousness[rows].sum())
        if total <= 0:
            estimates.append(RtEstimate.undefined(period, UNDEFINED, level))
            continue
        estimates.append(RtEstimate.from_gamma(period, a0 + incidence[rows].sum(), b0 + total, level))
    return estimates

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

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize, signal, special, stats
from scipy.stats import qmc

from .core import (
    ValidationError,
    LengthMismatchError,
    EstimationError,
    IntegrationError,
    IncidenceSeries,
    RngSeed,
    DISTRICTS,
    as_generator,
    relative_error,
)

__all__ = [
    "Model1Params",
    "SeirState",
    "MetaState",
    "MetaRng",
    "SeirqpdState",
    "Model3Params",
    "Model3Observations",
    "Model3Trajectory",
    "Model3Fit",
    "FitDiagnostics",
    "SweepEntry",
    "SiState",
    "Model1Run",
    "Model2Run",
    "delay_pmf",
    "expected_recordings",
    "run_model1_batch",
    "step_model1",
    "run_model1",
    "simulate_model1",
    "step_model2",
    "simulate_model2",
    "recovery_rate",
    "integrate_model3",
    "fit_model3",
    "sweep_model3",
    "step_model4",
    "IuMobility",
    "CYPRUS_POPULATION",
    "SEIR",
    "SEIRQPD",
]

logger = logging.getLogger(__name__)

#: population used for the whole-island models
CYPRUS_POPULATION = 875000

#: Model-3 compartment order
SEIRQPD = ("S", "P", "E", "I", "Q", "R", "D")

#: Model-1 compartment order
SEIR = ("S", "E", "Ir", "Iu")


def _positive(name, value, strict=True):
    value = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(value)) or np.any(value <= 0 if strict else value < 0):
        raise ValidationError(f"'{name}' must be {'positive' if strict else 'non-negative'}")


@dataclass(frozen=True)
class Model1Params:
    """Parameters of the stochastic SEIR model with undocumented infections.

    Fields may be arrays of equal shape to describe an ensemble.

    :param beta: transmission rate (1/day)
    :param mu: relative transmissibility of undocumented infections
    :param Z: latency period (days)
    :param D: infectious period (days)
    :param alpha: reporting rate
    :param tau_d: mean reporting delay (days), default: `6.0`
    :param a: reporting delay Gamma shape, default: `1.85`
    """

    beta: float
    mu: float = 0.5
    Z: float = 5.1
    D: float = 3.5
    alpha: float = 0.5
    tau_d: float = 6.0
    a: float = 1.85

    def __post_init__(self):
        _positive("beta", self.beta, strict=False)
        for name in ("mu", "Z", "D", "alpha", "tau_d", "a"):
            _positive(name, getattr(self, name))
        for name in ("alpha", "mu"):
            if np.any(np.asarray(getattr(self, name)) > 1):
                raise ValidationError(f"'{name}' must be <= 1")

    def delay_distribution(self):
        """Reporting delay distribution Gamma(a, tau_d / a)."""
        return stats.gamma(a=self.a, scale=self.tau_d / self.a)


@dataclass(frozen=True)
class SeirState:
    """Susceptible, exposed, reported and undocumented infectious persons."""

    S: float
    E: float
    Ir: float
    Iu: float
    N: float

    def __post_init__(self):
        if not self.N > 0:
            raise ValidationError("population N must be positive")
        for name in SEIR:
            value = getattr(self, name)
            if value < 0 or value > self.N:
                raise ValidationError(f"compartment {name}={value} is outside of [0, N]")

    @classmethod
    def seeded(cls, N, E=0.0, Ir=0.0, Iu=0.0):
        """State with all remaining persons susceptible."""
        return cls(S=N - E - Ir - Iu, E=E, Ir=Ir, Iu=Iu, N=N)

    def array(self):
        return np.array([self.S, self.E, self.Ir, self.Iu], dtype=float)


def delay_pmf(a=1.85, tau_d=6.0, tail=1e-6):
    """Probabilities p_k that a report is recorded k >= 1 days later when
    the delay is Gamma(a, tau_d / a) rounded up to whole days.

    Element 0 is zero. The support ends where the tail mass drops below `tail`.
    """
    dist = stats.gamma(a=a, scale=tau_d / a)
    K = max(int(math.ceil(dist.ppf(1.0 - tail))), 1)
    cdf = dist.cdf(np.arange(0, K + 1))
    pmf = np.diff(cdf)
    return np.concatenate([[0.0], pmf])


def expected_recordings(flux, pmf):
    """Expected daily recordings from daily reported-infection `flux`.

    `flux[..., d]` infections reported on day d + 1 are recorded on day
    d + 1 + k with probability `pmf[k]`; recordings past the last day are dropped.
    """
    flux = np.asarray(flux, dtype=float)
    return signal.lfilter(np.asarray(pmf, dtype=float), [1.0], flux, axis=-1)


def _model1_terms(x, beta, mu, Z, D, alpha, N):
    S, E, Ir, Iu = np.maximum(x, 0.0)
    return np.stack(
        [
            beta * S * Ir / N,
            mu * beta * S * Iu / N,
            alpha * E / Z,
            (1.0 - alpha) * E / Z,
            Ir / D,
            Iu / D,
        ]
    )


def _model1_derivative(terms):
    infect, infect_u, report, unreport, recover, recover_u = terms
    return np.stack(
        [
            -infect - infect_u,
            infect + infect_u - report - unreport,
            report - recover,
            unreport - recover_u,
        ]
    )


def _sample(means, rng):
    means = np.maximum(means, 0.0)
    return means if rng is None else rng.poisson(means).astype(float)


def _check_bounds(x, N):
    if np.any(x > N * (1.0 + 1e-9)):
        raise IntegrationError("a compartment exceeds the population")


RK4 = ((0.0, 1.0), (0.5, 2.0), (0.5, 2.0), (1.0, 1.0))


def _model1_step(x, p, N, rng=None, check=True):
    """One stochastic RK4 day of model 1 on array state `x` of shape (4, ...)."""
    total = np.zeros_like(x)
    reported = np.zeros(x.shape[1:])
    k = np.zeros_like(x)
    for c, w in RK4:
        terms = _sample(_model1_terms(x + c * k, p.beta, p.mu, p.Z, p.D, p.alpha, N), rng)
        k = _model1_derivative(terms)
        total += w * k
        reported += w * terms[2]
    x = np.maximum(x + total / 6.0, 0.0)
    if check:
        _check_bounds(x, N)
    return x, reported / 6.0


def run_model1_batch(x0, p, N, days, rng=None, check=True):
    """Propagate model-1 state arrays for `days` days.

    :param x0: initial states of shape (4, ...)
    :param p: `Model1Params`, fields broadcastable against the batch shape
    :param N: population
    :param days: number of days
    :param rng: generator for stochastic mode, default: `None` (deterministic)
    :param check: raise `IntegrationError` when a compartment exceeds `N`, default: `True`
    :return: states of shape (days + 1, 4, ...), reported flux of shape (..., days)
    """
    x = np.asarray(x0, dtype=float)
    states = [x]
    flux = []
    for _ in range(int(days)):
        x, reported = _model1_step(x, p, N, rng, check)
        states.append(x)
        flux.append(reported)
    flux = np.moveaxis(np.array(flux), 0, -1) if flux else np.zeros(x.shape[1:] + (0,))
    return np.array(states), flux


def step_model1(state, p, seed=None, deterministic=False):
    """Advance model 1 by one day.

    Every right-hand-side term is replaced by a Poisson draw with that mean at
    each RK4 stage (or by its mean when `deterministic`). Compartments are
    clipped at 0.

    :return: next `SeirState`, new reported infections
    """
    rng = None if deterministic else as_generator(seed)
    x, reported = _model1_step(state.array(), p, state.N, rng)
    reported = float(reported) if deterministic else int(np.rint(reported))
    return SeirState(*x.tolist(), N=state.N), reported


@dataclass
class Model1Run:
    """Model-1 simulation with its diagnostics.

    `recorded[t - 1]` is the number of infections recorded on day t.
    """

    start_date: datetime.date
    states: np.ndarray
    new_reported: np.ndarray
    recorded: np.ndarray
    dropped: float
    deterministic: bool = False

    @property
    def series(self):
        if self.deterministic:
            raise ValidationError("deterministic runs have non-integer recordings")
        return IncidenceSeries(start_date=self.start_date, cases=self.recorded, label="model1")


def _schedule(recorded, day, n, p, rng):
    """Record `n` infections reported on `day` after rounded-up Gamma delays.

    :return: number of recordings falling beyond the horizon
    """
    if n <= 0:
        return 0
    days = day + np.ceil(rng.gamma(shape=p.a, scale=p.tau_d / p.a, size=n)).astype(np.int64)
    inside = days <= len(recorded)
    np.add.at(recorded, days[inside] - 1, 1)
    return int(np.sum(~inside))


def run_model1(
    p,
    init,
    horizon,
    seed=None,
    deterministic=False,
    start_date=datetime.date(2020, 3, 1),
):
    """Simulate model 1 and its reporting delay for `horizon` days.

    In deterministic mode Poisson draws are replaced by their means and
    recordings are the expected values under the discretised delay.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")

    if deterministic:
        states, flux = run_model1_batch(init.array(), p, init.N, horizon)
        recorded = expected_recordings(flux, delay_pmf(p.a, p.tau_d))
        return Model1Run(
            start_date=start_date,
            states=states,
            new_reported=flux,
            recorded=recorded,
            dropped=float(np.sum(flux) - np.sum(recorded)),
            deterministic=True,
        )

    rng = as_generator(seed)
    x = init.array()
    states = [x]
    new_reported = np.zeros(horizon, dtype=np.int64)
    recorded = np.zeros(horizon, dtype=np.int64)
    dropped = 0
    for day in range(1, horizon + 1):
        x, reported = _model1_step(x, p, init.N, rng)
        states.append(x)
        new_reported[day - 1] = int(np.rint(reported))
        dropped += _schedule(recorded, day, new_reported[day - 1], p, rng)

    if dropped:
        logger.debug(f"{dropped} recordings fall beyond day {horizon}")
    return Model1Run(
        start_date=start_date,
        states=np.array(states),
        new_reported=new_reported,
        recorded=recorded,
        dropped=dropped,
    )


def simulate_model1(p, init, horizon, seed, start_date=datetime.date(2020, 3, 1)):
    """Return daily recorded cases of a stochastic model-1 run.

    Each new reported infection is recorded ceil(delay) days later with
    delay ~ Gamma(a, tau_d / a).
    """
    return run_model1(p, init, horizon, seed=seed, start_date=start_date).series


class IuMobility:
    """Travel terms of the undocumented infectious compartment.

    `PRINTED` moves exposed persons with denominators N_j - Iu_j, as the
    model equations are usually written; `UNDOCUMENTED` moves undocumented
    infectious persons with denominators N_j - Ir_j.
    """

    PRINTED = "printed"
    UNDOCUMENTED = "undocumented"

    @classmethod
    def parse(cls, value):
        if value not in (cls.PRINTED, cls.UNDOCUMENTED):
            raise ValidationError(f"unknown undocumented mobility scheme '{value}'")
        return value


@dataclass(frozen=True)
class MetaState:
    """Per-district model-1 compartments connected by daily travel.

    `mobility[i, j]` is the daily number of persons travelling from
    district i to district j; `theta` scales all travel.
    """

    S: np.ndarray
    E: np.ndarray
    Ir: np.ndarray
    Iu: np.ndarray
    N: np.ndarray
    mobility: np.ndarray
    theta: float = 1.0
    districts: Tuple[str, ...] = DISTRICTS

    def __post_init__(self):
        for name in SEIR + ("N",):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        M = np.asarray(self.mobility, dtype=float)
        object.__setattr__(self, "mobility", M)
        object.__setattr__(self, "districts", tuple(self.districts))
        n = len(self.N)
        if len(self.districts) != n:
            raise LengthMismatchError(f"{len(self.districts)} district names for {n} districts")
        for name in SEIR:
            value = getattr(self, name)
            if value.shape != (n,):
                raise LengthMismatchError(f"'{name}' must have {n} entries")
            if np.any(value < 0) or np.any(value > self.N):
                raise ValidationError(f"'{name}' is outside of [0, N]")
        if np.any(self.N <= 0):
            raise ValidationError("district populations must be positive")
        if M.shape != (n, n):
            raise LengthMismatchError(f"mobility must be {n}x{n}")
        if np.any(M < 0) or np.any(np.diag(M) != 0):
            raise ValidationError("mobility must be non-negative with zero diagonal")
        if not self.theta >= 1:
            raise ValidationError("theta must be >= 1")

    @classmethod
    def seeded(cls, N, mobility, theta=1.0, E=None, Ir=None, Iu=None, districts=DISTRICTS):
        """State with all remaining persons susceptible."""
        N = np.asarray(N, dtype=float)
        zeros = np.zeros_like(N)
        E = zeros if E is None else np.asarray(E, dtype=float)
        Ir = zeros if Ir is None else np.asarray(Ir, dtype=float)
        Iu = zeros if Iu is None else np.asarray(Iu, dtype=float)
        return cls(S=N - E - Ir - Iu, E=E, Ir=Ir, Iu=Iu, N=N, mobility=mobility, theta=theta, districts=districts)

    def array(self):
        return np.stack([self.S, self.E, self.Ir, self.Iu])

    def district(self, i):
        """Model-1 state of district `i`."""
        return SeirState(self.S[i], self.E[i], self.Ir[i], self.Iu[i], N=self.N[i])


@dataclass
class MetaRng:
    """One generator per district plus one for travel draws."""

    districts: List[np.random.Generator]
    mobility: np.random.Generator

    @classmethod
    def from_seed(cls, seed, n):
        seed = seed if isinstance(seed, RngSeed) else RngSeed(seed)
        return cls(
            districts=[seed.derive("district", i).generator() for i in range(n)],
            mobility=seed.derive("mobility").generator(),
        )


def _expand(values, extra):
    values = np.asarray(values, dtype=float)
    return values.reshape(values.shape + (1,) * extra)


def _model2_step(x, N, M, theta, p, rngs=None, iu_mobility=IuMobility.PRINTED, districts=DISTRICTS, check=True):
    """One RK4 day of model 2 on arrays of shape (4, n, ...).

    :return: next state, reported flux per district, next populations
    """
    n = M.shape[0]
    extra = x.ndim - 2
    Mb = _expand(M, extra)
    sources = M.sum(axis=1) > 0
    travel = bool(np.any(M > 0))

    def sample_infection(terms):
        if rngs is None:
            return np.maximum(terms, 0.0)
        return np.stack(
            [rngs.districts[i].poisson(np.maximum(terms[:, i], 0.0)) for i in range(n)], axis=1
        ).astype(float)

    def flows(xs):
        S, E, Ir, Iu = np.maximum(xs, 0.0)
        den_r = N - Ir
        den_u = N - Iu
        bad = np.any(den_r <= 0, axis=tuple(range(1, den_r.ndim))) & sources
        if iu_mobility == IuMobility.PRINTED:
            bad |= np.any(den_u <= 0, axis=tuple(range(1, den_u.ndim))) & sources
        if np.any(bad):
            name = districts[int(np.flatnonzero(bad)[0])]
            raise IntegrationError(f"non-positive travel denominator in district {name}")
        rate_r = theta * Mb / den_r[:, None]
        if iu_mobility == IuMobility.PRINTED:
            undocumented = theta * Mb / den_u[:, None] * E[:, None]
        else:
            undocumented = rate_r * Iu[:, None]
        F = np.stack([rate_r * S[:, None], rate_r * E[:, None], undocumented])
        F = np.maximum(F, 0.0)
        if rngs is not None:
            F = rngs.mobility.poisson(F).astype(float)
        # flows[c, j, i] travel from j to i
        return F.sum(axis=1) - F.sum(axis=2)

    total = np.zeros_like(x)
    reported = np.zeros(x.shape[1:])
    k = np.zeros_like(x)
    for c, w in RK4:
        xs = x + c * k
        terms = sample_infection(_model1_terms(xs, p.beta, p.mu, p.Z, p.D, p.alpha, N))
        k = _model1_derivative(terms)
        if travel:
            net = flows(xs)
            k = k + np.stack([net[0], net[1], np.zeros_like(net[0]), net[2]])
        total += w * k
        reported += w * terms[2]

    x = np.maximum(x + total / 6.0, 0.0)
    if check:
        _check_bounds(x, N)
    N = N + theta * _expand(M.sum(axis=0) - M.sum(axis=1), extra)
    if np.any(N <= 0):
        raise IntegrationError("a district population became non-positive")
    return x, reported / 6.0, N


def step_model2(state, p, seed=None, deterministic=False, iu_mobility=IuMobility.PRINTED):
    """Advance model 2 by one day.

    Each unique right-hand-side term, infection terms per district and travel
    terms per district pair, is a Poisson draw at every RK4 stage. Reported
    infectious persons do not travel. Populations follow the deterministic
    balance N_i += theta * (inflow_i - outflow_i).

    :param seed: `RngSeed`, integer or `MetaRng`
    :return: next `MetaState`, new reported infections per district
    """
    iu_mobility = IuMobility.parse(iu_mobility)
    n = len(state.N)
    rngs = None
    if not deterministic:
        rngs = seed if isinstance(seed, MetaRng) else MetaRng.from_seed(seed, n)
    x, reported, N = _model2_step(
        state.array(), state.N, state.mobility, state.theta, p, rngs, iu_mobility, state.districts
    )
    reported = reported if deterministic else np.rint(reported).astype(np.int64)
    next_state = MetaState(
        S=x[0], E=x[1], Ir=x[2], Iu=x[3], N=N,
        mobility=state.mobility, theta=state.theta, districts=state.districts,
    )
    return next_state, reported


@dataclass
class Model2Run:
    """Model-2 simulation; arrays are indexed [..., district, day]."""

    start_date: datetime.date
    districts: Tuple[str, ...]
    states: np.ndarray
    populations: np.ndarray
    new_reported: np.ndarray
    recorded: np.ndarray
    dropped: float
    deterministic: bool = False

    @property
    def series(self):
        """Recorded cases per district."""
        if self.deterministic:
            raise ValidationError("deterministic runs have non-integer recordings")
        return {
            name: IncidenceSeries(start_date=self.start_date, cases=self.recorded[i], label=name)
            for i, name in enumerate(self.districts)
        }


def simulate_model2(
    p,
    init,
    horizon,
    seed=None,
    deterministic=False,
    iu_mobility=IuMobility.PRINTED,
    start_date=datetime.date(2020, 3, 1),
):
    """Simulate model 2 with per-district reporting delays.

    District i draws from `seed.derive("district", i)`, so with no travel
    every district reproduces a model-1 run seeded the same way.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    iu_mobility = IuMobility.parse(iu_mobility)
    n = len(init.N)
    rngs = None if deterministic else (seed if isinstance(seed, MetaRng) else MetaRng.from_seed(seed, n))

    x, N = init.array(), init.N
    states, populations, flux = [x], [N], []
    recorded = np.zeros((n, horizon), dtype=np.int64)
    dropped = 0
    for day in range(1, horizon + 1):
        x, reported, N = _model2_step(x, N, init.mobility, init.theta, p, rngs, iu_mobility, init.districts)
        states.append(x)
        populations.append(N)
        if deterministic:
            flux.append(reported)
            continue
        reported = np.rint(reported).astype(np.int64)
        flux.append(reported)
        for i in range(n):
            dropped += _schedule(recorded[i], day, reported[i], p, rngs.districts[i])

    flux = np.array(flux).T
    if deterministic:
        recorded = expected_recordings(flux, delay_pmf(p.a, p.tau_d))
        dropped = float(np.sum(flux) - np.sum(recorded))
    return Model2Run(
        start_date=start_date,
        districts=init.districts,
        states=np.array(states),
        populations=np.array(populations),
        new_reported=flux,
        recorded=recorded,
        dropped=dropped,
        deterministic=deterministic,
    )


@dataclass(frozen=True)
class SeirqpdState:
    """Susceptible, protected, exposed, infectious, quarantined, recovered
    and closed (dead) persons."""

    S: float
    P: float
    E: float
    I: float
    Q: float
    R: float
    D: float

    def __post_init__(self):
        for name in SEIRQPD:
            if getattr(self, name) < 0:
                raise ValidationError(f"compartment {name} must be non-negative")

    @property
    def N(self):
        return float(sum(getattr(self, name) for name in SEIRQPD))

    def array(self):
        return np.array([getattr(self, name) for name in SEIRQPD], dtype=float)


@dataclass(frozen=True)
class Model3Params:
    """Parameters of the seven-state model.

    :param zeta: protection rate (1/day)
    :param beta: transmission rate (1/day)
    :param gamma_inv: latent time (days)
    :param delta_inv: time to quarantine (days)
    :param lambda123: logistic cure rate parameters
    :param kappa: mortality rate, constant or one value per day
    """

    zeta: float
    beta: float
    gamma_inv: float
    delta_inv: float
    lambda123: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    kappa: Union[float, Sequence[float]] = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lambda123", tuple(float(v) for v in self.lambda123))
        if len(self.lambda123) != 3:
            raise ValidationError("lambda123 must have three values")
        if self.zeta < 0 or self.beta < 0:
            raise ValidationError("zeta and beta must be non-negative")
        if not self.gamma_inv > 0 or not self.delta_inv > 0:
            raise ValidationError("gamma_inv and delta_inv must be positive")
        if any(v < 0 for v in self.lambda123):
            raise ValidationError("lambda1, lambda2 and lambda3 must be non-negative")
        if np.any(np.asarray(self.kappa, dtype=float) < 0):
            raise ValidationError("kappa must be non-negative")

    @property
    def gamma(self):
        return 1.0 / self.gamma_inv

    @property
    def delta(self):
        return 1.0 / self.delta_inv

    def kappa_at(self, t):
        kappa = np.asarray(self.kappa, dtype=float)
        if kappa.ndim == 0:
            return float(kappa)
        return float(kappa[min(max(int(math.floor(t)), 0), len(kappa) - 1)])

    def to_dict(self):
        kappa = np.asarray(self.kappa, dtype=float)
        return {
            "zeta": self.zeta,
            "beta": self.beta,
            "gamma_inv": self.gamma_inv,
            "delta_inv": self.delta_inv,
            "lambda1": self.lambda123[0],
            "lambda2": self.lambda123[1],
            "lambda3": self.lambda123[2],
            "kappa": float(kappa) if kappa.ndim == 0 else kappa.tolist(),
        }


def recovery_rate(t, lambda123):
    """Logistic cure rate lambda1 / (1 + exp(-lambda2 (t - lambda3)))."""
    l1, l2, l3 = lambda123
    if l1 < 0 or l2 < 0 or l3 < 0:
        raise ValidationError("lambda1, lambda2 and lambda3 must be non-negative")
    return l1 * special.expit(l2 * (np.asarray(t, dtype=float) - l3))


@dataclass
class Model3Trajectory:
    """Daily model-3 states; `states[k]` is day `t[k]` after `start_date`."""

    t: np.ndarray
    states: np.ndarray
    start_date: Optional[datetime.date] = None

    def __getitem__(self, name):
        return self.states[:, SEIRQPD.index(name)]

    @property
    def N(self):
        return self.states.sum(axis=1)

    def date_of(self, t):
        if self.start_date is None:
            return None
        return self.start_date + datetime.timedelta(days=int(round(t)))

    def peak(self, name):
        """Day, value and date of the maximum of compartment(s) `name`
        (`"E+I"` sums compartments)."""
        values = sum(self[part] for part in name.split("+"))
        k = int(np.argmax(values))
        return float(self.t[k]), float(values[k]), self.date_of(self.t[k])

    def state(self, k):
        return SeirqpdState(*self.states[k].tolist())


def _model3_rhs(p, N):
    zeta, beta, gamma, delta = p.zeta, p.beta, p.gamma, p.delta

    def rhs(t, y):
        S, P, E, I, Q, R, D = y
        infect = beta * S * I / N
        cure = float(recovery_rate(t, p.lambda123))
        kappa = p.kappa_at(t)
        return [
            -infect - zeta * S,
            zeta * S,
            infect - gamma * E,
            gamma * E - delta * I,
            delta * I - (cure + kappa) * Q,
            cure * Q,
            kappa * Q,
        ]

    return rhs


def integrate_model3(p, init, horizon, rtol=1e-10, atol=1e-8, start_date=None):
    """Integrate the seven-state model with adaptive RK45 and return daily
    states for days 0..horizon."""
    horizon = int(horizon)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    y0 = init.array()
    N = float(y0.sum())
    if not N > 0:
        raise ValidationError("population must be positive")
    t_eval = np.arange(0, horizon + 1, dtype=float)
    res = integrate.solve_ivp(
        _model3_rhs(p, N), (0.0, float(horizon)), y0, method="RK45", t_eval=t_eval, rtol=rtol, atol=atol
    )
    if not res.success:
        raise IntegrationError(f"RK45 integration failed: {res.message}")
    return Model3Trajectory(t=res.t, states=res.y.T, start_date=start_date)


@dataclass
class Model3Observations:
    """Observed active (quarantined), recovered and closed cases."""

    start_date: datetime.date
    Q: np.ndarray
    R: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.Q, self.R, self.D = (np.asarray(v, dtype=float) for v in (self.Q, self.R, self.D))
        if not len(self.Q) == len(self.R) == len(self.D):
            raise LengthMismatchError("Q, R and D must have equal lengths")
        if len(self.Q) < 2:
            raise ValidationError("at least two observations are required")

    @property
    def T(self):
        return len(self.Q)

    @classmethod
    def from_series(cls, series):
        """Active = cumulative cases - cumulative recovered - cumulative deaths."""
        if series.recovered is None or series.deaths is None:
            raise ValidationError("recovered and deaths counts are required")
        cases = series.cumulative("cases")
        recovered = series.cumulative("recovered")
        deaths = series.cumulative("deaths")
        return cls(start_date=series.start_date, Q=cases - recovered - deaths, R=recovered, D=deaths)

    @classmethod
    def from_trajectory(cls, trajectory, start_date=datetime.date(2020, 3, 1)):
        """Noiseless observations of a model trajectory."""
        return cls(start_date=start_date, Q=trajectory["Q"], R=trajectory["R"], D=trajectory["D"])

    def head(self, n):
        return Model3Observations(self.start_date, self.Q[:n], self.R[:n], self.D[:n])


@dataclass
class FitDiagnostics:
    costs: List[float]
    statuses: List[int]
    nfev: int
    best_start: int
    message: str


#: fitted model-3 variables and their default bounds
MODEL3_VARIABLES = (
    ("zeta", 0.0, 1.0),
    ("beta", 0.0, 5.0),
    ("delta_inv", 0.5, 30.0),
    ("lambda1", 0.0, 1.0),
    ("lambda2", 0.0, 2.0),
    ("lambda3", 0.0, None),
    ("kappa", 0.0, 0.05),
    ("E0", 0.0, 200.0),
    ("I0", 0.0, 200.0),
)


@dataclass
class Model3Fit:
    params: Model3Params
    init: SeirqpdState
    observations: Model3Observations
    trajectory: Model3Trajectory
    cost: float
    diagnostics: FitDiagnostics

    @property
    def N(self):
        return self.init.N

    def predict(self, horizon):
        """Trajectory from the first observed day to `horizon` days past the last."""
        return integrate_model3(
            self.params, self.init, self.observations.T - 1 + int(horizon),
            start_date=self.observations.start_date,
        )

    def relative_errors(self, observations=None):
        """Relative errors of active, recovered and closed cases against
        `observations` (default: the fitted data), predicting as needed."""
        observations = observations or self.observations
        trajectory = self.predict(max(observations.T - self.observations.T, 0) + 1)
        n = observations.T
        errors = {}
        for key, name in (("active", "Q"), ("recovered", "R"), ("deaths", "D")):
            observed = getattr(observations, name)
            if np.any(observed != 0):
                errors[key] = relative_error(trajectory[name][:n], observed)
        return errors


def _model3_from_vector(v, gamma_inv, obs, N):
    zeta, beta, delta_inv, l1, l2, l3, kappa, E0, I0 = v
    params = Model3Params(
        zeta=zeta, beta=beta, gamma_inv=gamma_inv, delta_inv=delta_inv,
        lambda123=(l1, l2, l3), kappa=kappa,
    )
    Q0, R0, D0 = obs.Q[0], obs.R[0], obs.D[0]
    S0 = N - E0 - I0 - Q0 - R0 - D0
    init = SeirqpdState(S=S0, P=0.0, E=E0, I=I0, Q=Q0, R=R0, D=D0)
    return params, init


def fit_model3(
    data,
    gamma_inv=3.0,
    N=CYPRUS_POPULATION,
    n_starts=8,
    seed=0,
    bounds=None,
    x0=None,
    rtol=1e-8,
    atol=1e-8,
):
    """Fit the seven-state model to observed active, recovered and closed cases.

    Least squares over (zeta, beta, delta_inv, lambda1, lambda2, lambda3,
    kappa, E0, I0) with the latent time fixed; E and I are hidden. Starts are
    a Latin hypercube over the bounds.

    :param data: `Model3Observations` or series with recovered and deaths
    :param gamma_inv: fixed latent time (days), default: `3.0`
    :param N: population, default: `CYPRUS_POPULATION`
    :param n_starts: number of starts, default: `8`
    :param seed: seed of the start design
    :param bounds: mapping of variable name to (lower, upper) overrides
    :param x0: additional start vector
    """
    obs = data if isinstance(data, Model3Observations) else Model3Observations.from_series(data)
    if not gamma_inv > 0:
        raise ValidationError("gamma_inv must be positive")
    horizon = obs.T - 1
    t_eval = np.arange(0, obs.T, dtype=float)

    names = [name for name, _, _ in MODEL3_VARIABLES]
    lo = np.array([low for _, low, _ in MODEL3_VARIABLES], dtype=float)
    hi = np.array([2.0 * obs.T if high is None else high for _, _, high in MODEL3_VARIABLES], dtype=float)
    for name, (low, high) in dict(bounds or {}).items():
        if name not in names:
            raise ValidationError(f"unknown model-3 variable '{name}'")
        lo[names.index(name)], hi[names.index(name)] = low, high
    if np.any(lo >= hi):
        raise ValidationError("every lower bound must be below its upper bound")

    observed = np.concatenate([obs.Q, obs.R, obs.D])
    failed = np.full(observed.shape, 1e6)

    def residual(v):
        try:
            params, init = _model3_from_vector(v, gamma_inv, obs, N)
        except ValidationError:
            return failed
        res = integrate.solve_ivp(
            _model3_rhs(params, N), (0.0, float(horizon)), init.array(),
            method="RK45", t_eval=t_eval, rtol=rtol, atol=atol,
        )
        if not res.success or res.y.shape[1] != obs.T:
            return failed
        Q, R, D = res.y[4], res.y[5], res.y[6]
        return np.concatenate([Q, R, D]) - observed

    seed = seed if isinstance(seed, RngSeed) else RngSeed(seed)
    sampler = qmc.LatinHypercube(d=len(names), seed=seed.derive("model3", "starts").generator())
    starts = list(qmc.scale(sampler.random(n_starts), lo, hi))
    if x0 is not None:
        starts.append(np.clip(np.asarray(x0, dtype=float), lo, hi))

    best, costs, statuses, nfev = None, [], [], 0
    for k, start in enumerate(starts):
        res = optimize.least_squares(
            residual, start, bounds=(lo, hi), method="trf", x_scale="jac",
            diff_step=1e-6, xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=400 * len(names),
        )
        costs.append(float(res.cost))
        statuses.append(int(res.status))
        nfev += int(res.nfev)
        logger.debug(f"gamma_inv={gamma_inv} start {k}: cost={res.cost:.6g} status={res.status}")
        if np.isfinite(res.cost) and (best is None or res.cost < best[1].cost):
            best = (k, res)

    if best is None:
        raise EstimationError("every start failed", best=None, residual=None)
    k, res = best
    if res.status <= 0:
        raise EstimationError(
            f"least squares did not converge: {res.message}", best=res.x.tolist(), residual=float(res.cost)
        )
    if sum(s > 0 for s in statuses) < len(statuses):
        logger.warning(f"{len(statuses) - sum(s > 0 for s in statuses)} of {len(statuses)} starts did not converge")

    params, init = _model3_from_vector(res.x, gamma_inv, obs, N)
    trajectory = integrate_model3(params, init, horizon, start_date=obs.start_date)
    logger.info(f"model 3 fit gamma_inv={gamma_inv}: cost={res.cost:.6g} {params.to_dict()}")
    return Model3Fit(
        params=params,
        init=init,
        observations=obs,
        trajectory=trajectory,
        cost=float(res.cost),
        diagnostics=FitDiagnostics(costs=costs, statuses=statuses, nfev=nfev, best_start=k, message=str(res.message)),
    )


@dataclass
class SweepEntry:
    gamma_inv: float
    fit: Model3Fit

    @property
    def peak(self):
        """Day, size and date of the peak of E(t) + I(t)."""
        return self.fit.trajectory.peak("E+I")

    def to_dict(self):
        day, value, date = self.peak
        return dict(
            gamma_inv=self.gamma_inv,
            cost=self.fit.cost,
            peak_infected=value,
            peak_date=None if date is None else date.isoformat(),
            **self.fit.params.to_dict(),
        )


def sweep_model3(data, gamma_invs=range(1, 8), **kwargs):
    """Refit the seven-state model for each fixed latent time."""
    return [SweepEntry(float(g), fit_model3(data, gamma_inv=float(g), **kwargs)) for g in gamma_invs]


@dataclass(frozen=True)
class SiState:
    """Susceptible and infectious persons of the SI model."""

    S: float
    I: float
    N: Optional[float] = None

    def __post_init__(self):
        if self.S < 0 or self.I < 0:
            raise ValidationError("S and I must be non-negative")
        if self.N is None:
            object.__setattr__(self, "N", float(self.S + self.I))
        if not self.N > 0:
            raise ValidationError("population N must be positive")


def step_model4(state, beta, D, dt=1.0, substeps=10):
    """Deterministic SI update over `dt` days by RK4 sub-steps."""
    if beta < 0 or not D > 0:
        raise ValidationError("beta must be non-negative and D positive")
    N = state.N

    def f(y):
        S, I = y
        infect = beta * S * I / N
        return np.array([-infect, infect - I / D])

    y = np.array([state.S, state.I], dtype=float)
    h = dt / substeps
    for _ in range(substeps):
        k1 = f(y)
        k2 = f(y + h / 2.0 * k1)
        k3 = f(y + h / 2.0 * k2)
        k4 = f(y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    y = np.maximum(y, 0.0)
    return SiState(S=float(y[0]), I=float(y[1]), N=N)

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
import dataclasses

from enum import Enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize, signal, special, stats

from .core import (
    ValidationError,
    LengthMismatchError,
    EstimationError,
    IncidenceSeries,
    PredictionInterval,
    as_generator,
)

__all__ = [
    "InterventionType",
    "InterventionKind",
    "Intervention",
    "LogLinCountModel",
    "FitReport",
    "filter_intensity",
    "loglik_and_score",
    "fit_mle",
    "detect_interventions",
    "predict_counts",
    "simulate_loglin",
]

logger = logging.getLogger(__name__)

#: default decay of transient shifts
TS_DELTA = 0.8

#: stability margin flagging boundary solutions
BOUNDARY = 0.999


class InterventionType(str, Enum):
    """How an intervention effect evolves after it occurs."""

    AO = "ao"  # additive outlier, one day
    TS = "ts"  # transient shift, geometric decay
    LS = "ls"  # level shift, permanent


@dataclass(frozen=True)
class InterventionKind:
    """Intervention type with its decay (transient shifts only)."""

    type: InterventionType
    delta: float = TS_DELTA

    def __post_init__(self):
        if isinstance(self.type, str) and not isinstance(self.type, InterventionType):
            try:
                object.__setattr__(self, "type", InterventionType(self.type.lower()))
            except ValueError:
                raise ValidationError(f"unknown intervention kind '{self.type}'")
        if self.type is InterventionType.TS and not 0 < self.delta < 1:
            raise ValidationError("transient shift decay must be inside (0, 1)")

    @classmethod
    def parse(cls, text, delta=TS_DELTA):
        """Parse comma separated kinds such as `"ao,ts,ls"`."""
        if isinstance(text, str):
            text = [part for part in text.split(",") if part.strip()]
        kinds = []
        for part in text:
            kind = part if isinstance(part, cls) else cls(str(part).strip().lower(), delta)
            if kind not in kinds:
                kinds.append(kind)
        if not kinds:
            raise ValidationError("at least one intervention kind is required")
        return tuple(kinds)

    @property
    def name(self):
        return self.type.name

    def covariate(self, time, t):
        """Effect pattern at days `t` of an intervention at `time`."""
        t = np.asarray(t)
        if self.type is InterventionType.AO:
            return (t == time).astype(float)
        if self.type is InterventionType.LS:
            return (t >= time).astype(float)
        return np.where(t >= time, self.delta ** np.maximum(t - time, 0), 0.0)

    def __str__(self):
        if self.type is InterventionType.TS:
            return f"TS({self.delta:g})"
        return self.name


AO = InterventionKind(InterventionType.AO)
TS = InterventionKind(InterventionType.TS)
LS = InterventionKind(InterventionType.LS)


@dataclass(frozen=True)
class Intervention:
    """Intervention of `kind` at day `time` (1-based) with effect `size`."""

    time: int
    kind: InterventionKind = AO
    size: float = 0.0
    statistic: Optional[float] = None
    p_value: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.kind, (str, InterventionType)):
            object.__setattr__(self, "kind", InterventionKind(self.kind))

    def to_dict(self):
        return {
            "time": int(self.time),
            "kind": str(self.kind),
            "size": float(self.size),
            "statistic": self.statistic,
            "p_value": self.p_value,
        }


def _stable(a1, b1):
    return abs(a1) < 1 and abs(a1 + b1) < 1


@dataclass(frozen=True)
class LogLinCountModel:
    """Log-linear Poisson autoregression with feedback

        nu_t = d + a1 nu_(t-1) + b1 log(1 + X_(t-1)) + sum_k gamma_k W_k(t)

    with lambda_t = exp(nu_t). The pre-sample term log(1 + X_0) equals `nu0`;
    `nu0=None` resolves to log(mean + 1) of the filtered series.
    """

    d: float
    a1: float
    b1: float
    interventions: Tuple[Intervention, ...] = ()
    nu0: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "interventions", tuple(self.interventions))
        if not _stable(self.a1, self.b1):
            raise ValidationError(
                f"(a1, b1) = ({self.a1}, {self.b1}) is outside of |a1| < 1, |a1 + b1| < 1"
            )

    @property
    def theta(self):
        return np.array([self.d, self.a1, self.b1] + [iv.size for iv in self.interventions])


def _counts_of(series):
    if isinstance(series, IncidenceSeries):
        return series.cases.astype(float)
    return np.asarray(series, dtype=float)


def _covariates(interventions, T, t=None):
    t = np.arange(1, T + 1) if t is None else t
    W = np.zeros((len(t), len(interventions)))
    for k, iv in enumerate(interventions):
        W[:, k] = iv.kind.covariate(iv.time, t)
    return W


def _filter(theta, y, W, nu0):
    d, a1, b1 = theta[:3]
    K = W.shape[1]
    logy_prev = np.concatenate([[nu0], np.log1p(y[:-1])])
    u = d + b1 * logy_prev + W @ theta[3 : 3 + K]
    nu = signal.lfilter([1.0], [1.0, -a1], u, zi=[a1 * nu0])[0]
    return nu, logy_prev


def _loglik_score(theta, y, W, nu0, estimate_nu0=False):
    """Log-likelihood, score, intensity derivatives, intensities and nu."""
    theta = np.asarray(theta, dtype=float)
    if estimate_nu0:
        nu0 = theta[-1]
    a1, b1 = theta[1], theta[2]
    nu, logy_prev = _filter(theta, y, W, nu0)
    nu_prev = np.concatenate([[nu0], nu[:-1]])
    lam = np.exp(np.minimum(nu, 700.0))
    ll = float(np.sum(y * nu - lam - special.gammaln(y + 1.0)))

    columns = [np.ones_like(y), nu_prev, logy_prev, W]
    zi = np.zeros(3 + W.shape[1])
    if estimate_nu0:
        extra = np.zeros_like(y)
        extra[0] = b1
        columns.append(extra)
        zi = np.append(zi, a1)
    Z = np.column_stack(columns)
    D = signal.lfilter([1.0], [1.0, -a1], Z, axis=0, zi=zi[None, :])[0]
    score = D.T @ (y - lam)
    return ll, score, D, lam, nu


def _resolve_nu0(nu0, y):
    return float(math.log(np.mean(y) + 1.0)) if nu0 is None else float(nu0)


def filter_intensity(model, series):
    """Return log-intensities nu_1..nu_T of `model` along the observed `series`.

    Exponentiate the result to get the intensities.
    """
    y = _counts_of(series)
    for iv in model.interventions:
        if not 1 <= iv.time <= len(y):
            raise ValidationError(f"intervention time {iv.time} is outside of [1, {len(y)}]")
    W = _covariates(model.interventions, len(y))
    nu, _ = _filter(model.theta, y, W, _resolve_nu0(model.nu0, y))
    return nu


def loglik_and_score(theta, series, interventions=(), nu0=None, estimate_nu0=False):
    """Poisson log-likelihood and its analytic gradient.

    :param theta: (d, a1, b1, gamma_1, ..., gamma_K[, nu0])
    :param series: observed counts
    :param interventions: intervention times and kinds (sizes are taken from `theta`)
    :param nu0: initial log-intensity, default: log(mean + 1)
    :param estimate_nu0: last element of `theta` is `nu0`, default: `False`
    """
    y = _counts_of(series)
    W = _covariates(interventions, len(y))
    ll, score, *_ = _loglik_score(theta, y, W, _resolve_nu0(nu0, y), estimate_nu0)
    return ll, score


def _sech2(x):
    return 1.0 / np.cosh(x) ** 2


def _atanh(x):
    return np.arctanh(np.clip(x, -1 + 1e-9, 1 - 1e-9))


class _Parametrization:
    """Map unconstrained optimizer variables to model parameters inside the
    stability region, honouring frozen parameters.
    """

    def __init__(self, K, fixed=None, estimate_nu0=False):
        self.fixed = {k: float(v) for k, v in dict(fixed or {}).items()}
        unknown = set(self.fixed) - {"d", "a1", "b1"}
        if unknown:
            raise ValidationError(f"only d, a1 and b1 can be fixed, got {sorted(unknown)}")
        self.names = ["d", "a1", "b1"] + [f"gamma{k + 1}" for k in range(K)]
        if estimate_nu0:
            self.names.append("nu0")
        self.free = [n for n in self.names if n not in self.fixed]
        self.index = {n: i for i, n in enumerate(self.names)}
        a1, b1 = self.fixed.get("a1"), self.fixed.get("b1")
        if a1 is not None and b1 is not None and not _stable(a1, b1):
            raise ValidationError(f"fixed (a1, b1) = ({a1}, {b1}) is not stable")
        if b1 is not None and a1 is None and abs(b1) >= 2:
            raise ValidationError(f"fixed b1 = {b1} leaves no stable a1")
        if a1 is not None and abs(a1) >= 1:
            raise ValidationError(f"fixed a1 = {a1} is not stable")

    def _a1_bounds(self):
        b1 = self.fixed["b1"]
        return max(-1.0, -1.0 - b1), min(1.0, 1.0 - b1)

    def natural(self, phi):
        """Return parameters and the Jacobian d(parameters)/d(phi)."""
        theta = np.empty(len(self.names))
        J = np.zeros((len(self.names), len(self.free)))
        value = dict(zip(self.free, phi))
        col = {n: i for i, n in enumerate(self.free)}

        for name in self.names:
            if name in ("a1", "b1"):
                continue
            if name in col:
                theta[self.index[name]] = value[name]
                J[self.index[name], col[name]] = 1.0
            else:
                theta[self.index[name]] = self.fixed[name]

        ia, ib = self.index["a1"], self.index["b1"]
        a1_free, b1_free = "a1" in col, "b1" in col
        if a1_free and b1_free:
            u, v = value["a1"], value["b1"]
            theta[ia] = np.tanh(u)
            theta[ib] = np.tanh(v) - np.tanh(u)
            J[ia, col["a1"]] = _sech2(u)
            J[ib, col["a1"]] = -_sech2(u)
            J[ib, col["b1"]] = _sech2(v)
        elif a1_free:
            lo, hi = self._a1_bounds()
            u = value["a1"]
            theta[ia] = lo + (hi - lo) * (1.0 + np.tanh(u)) / 2.0
            theta[ib] = self.fixed["b1"]
            J[ia, col["a1"]] = (hi - lo) / 2.0 * _sech2(u)
        elif b1_free:
            v = value["b1"]
            theta[ia] = self.fixed["a1"]
            theta[ib] = np.tanh(v) - self.fixed["a1"]
            J[ib, col["b1"]] = _sech2(v)
        else:
            theta[ia], theta[ib] = self.fixed["a1"], self.fixed["b1"]
        return theta, J

    def unconstrained(self, theta):
        """Inverse of `natural` for a point inside the stability region."""
        theta = dict(zip(self.names, theta))
        phi = []
        for name in self.free:
            if name == "a1":
                if "b1" in self.fixed:
                    lo, hi = self._a1_bounds()
                    phi.append(_atanh(2.0 * (theta["a1"] - lo) / (hi - lo) - 1.0))
                else:
                    phi.append(_atanh(theta["a1"]))
            elif name == "b1":
                phi.append(_atanh(theta["a1"] + theta["b1"]))
            else:
                phi.append(theta[name])
        return np.array(phi, dtype=float)

    def starts(self, y, nu0):
        """Starting points for the multi-start search."""
        level = math.log(np.mean(y) + 1.0)
        starts = []
        for a1, b1 in ((0.3, 0.4), (0.5, 0.4), (0.05, 0.05)):
            a1 = self.fixed.get("a1", a1)
            b1 = self.fixed.get("b1", b1)
            if not _stable(a1, b1):
                b1 = 0.0 if _stable(a1, 0.0) else -a1
            d = self.fixed.get("d", level * (1.0 - a1 - b1))
            theta = [d, a1, b1] + [0.0] * (len(self.names) - 3)
            if self.names[-1] == "nu0":
                theta[-1] = nu0
            phi = self.unconstrained(theta)
            if not any(np.allclose(phi, other) for other in starts):
                starts.append(phi)
        return starts


@dataclass
class FitReport:
    """Maximum-likelihood fit of a `LogLinCountModel`."""

    model: LogLinCountModel
    names: List[str]
    free: List[str]
    theta: np.ndarray
    estimates: Dict[str, float]
    std_errors: Dict[str, float]
    loglik: float
    bic: float
    n_params: int
    T: int
    fitted_means: np.ndarray
    nu: np.ndarray
    nu0: float
    estimate_nu0: bool = False
    fixed: Dict[str, float] = field(default_factory=dict)
    converged: bool = True
    boundary: bool = False

    @property
    def interventions(self):
        return self.model.interventions

    def summary(self):
        """Fitted equation with standard errors in parentheses."""

        def term(name, value):
            se = self.std_errors.get(name)
            se = "fixed" if se is None else f"{se:.3f}"
            return f"{value:.3f} ({se})"

        e = self.estimates
        text = (
            f"nu_t = {term('d', e['d'])} + {term('a1', e['a1'])} nu_(t-1)"
            f" + {term('b1', e['b1'])} log(1 + X_(t-1))"
        )
        for k, iv in enumerate(self.interventions):
            name = f"gamma{k + 1}"
            if iv.kind.type is InterventionType.AO:
                pattern = f"I(t={iv.time})"
            elif iv.kind.type is InterventionType.LS:
                pattern = f"I(t>={iv.time})"
            else:
                pattern = f"{iv.kind.delta:g}^(t-{iv.time}) I(t>={iv.time})"
            text += f" + {term(name, e[name])} {pattern}"
        return text + f"\nlog-likelihood = {self.loglik:.3f}, BIC = {self.bic:.3f}"

    def to_dict(self):
        return {
            "estimates": dict(self.estimates),
            "std_errors": dict(self.std_errors),
            "loglik": self.loglik,
            "bic": self.bic,
            "n_params": self.n_params,
            "T": self.T,
            "nu0": self.nu0,
            "converged": self.converged,
            "boundary": self.boundary,
            "interventions": [iv.to_dict() for iv in self.interventions],
        }


def _observed_information(theta, free_idx, y, W, nu0, estimate_nu0):
    """Negative numerical Hessian of the log-likelihood from central
    differences of the analytic score."""
    n = len(free_idx)
    H = np.zeros((n, n))
    for i, k in enumerate(free_idx):
        h = 1e-5 * (1.0 + abs(theta[k]))
        up, down = theta.copy(), theta.copy()
        up[k] += h
        down[k] -= h
        s_up = _loglik_score(up, y, W, nu0, estimate_nu0)[1]
        s_down = _loglik_score(down, y, W, nu0, estimate_nu0)[1]
        H[i] = (s_up[free_idx] - s_down[free_idx]) / (2.0 * h)
    return -(H + H.T) / 2.0


def fit_mle(
    series,
    interventions=(),
    fixed=None,
    estimate_nu0=False,
    nu0=None,
):
    """Fit the log-linear model by conditional Poisson maximum likelihood.

    :param series: observed counts
    :param interventions: interventions with known times and kinds
    :param fixed: parameters held fixed, e.g. `{"a1": 0.0, "b1": 0.0}`
    :param estimate_nu0: estimate the initial log-intensity jointly, default: `False`
    :param nu0: initial log-intensity when not estimated, default: log(mean + 1)
    """
    y = _counts_of(series)
    T = len(y)
    if T < 10:
        raise ValidationError(f"at least 10 observations are required, got {T}")
    interventions = tuple(
        iv if isinstance(iv, Intervention) else Intervention(*iv) for iv in interventions
    )
    for iv in interventions:
        if not 1 <= iv.time <= T:
            raise ValidationError(f"intervention time {iv.time} is outside of [1, {T}]")

    W = _covariates(interventions, T)
    nu0 = _resolve_nu0(nu0, y)
    par = _Parametrization(len(interventions), fixed, estimate_nu0)

    def objective(phi):
        theta, J = par.natural(phi)
        ll, score, *_ = _loglik_score(theta, y, W, nu0, estimate_nu0)
        return -ll, -(J.T @ score)

    best = None
    for start in par.starts(y, nu0):
        res = optimize.minimize(
            objective, start, jac=True, method="BFGS", options={"gtol": 1e-7, "maxiter": 2000}
        )
        logger.debug(f"start {np.round(start, 3)}: -loglik={res.fun:.6f} {res.message}")
        if best is None or res.fun < best.fun:
            best = res

    theta, J = par.natural(best.x)
    ll, score, D, lam, nu = _loglik_score(theta, y, W, nu0, estimate_nu0)
    estimates = {n: float(v) for n, v in zip(par.names, theta)}
    gradient = J.T @ score
    converged = bool(best.success) or float(np.max(np.abs(gradient), initial=0.0)) < 1e-3

    if not converged or not np.isfinite(ll):
        raise EstimationError(
            f"log-likelihood maximisation did not converge: {best.message}",
            best=estimates,
            residual=-ll,
        )
    if not _stable(theta[1], theta[2]):
        raise EstimationError(
            "fit reached the edge of the stability region", best=estimates, residual=-ll
        )

    boundary = abs(theta[1]) > BOUNDARY or abs(theta[1] + theta[2]) > BOUNDARY
    if boundary:
        logger.warning(f"boundary solution a1={theta[1]:.4f}, a1+b1={theta[1] + theta[2]:.4f}")

    free_idx = [par.index[n] for n in par.free]
    std_errors = {}
    if free_idx:
        info = _observed_information(theta, free_idx, y, W, nu0, estimate_nu0)
        try:
            cov = np.linalg.inv(info)
        except np.linalg.LinAlgError:
            logger.warning("observed information is singular, using pseudo-inverse")
            cov = np.linalg.pinv(info)
        var = np.diag(cov)
        for name, v in zip(par.free, var):
            std_errors[name] = float(math.sqrt(v)) if v > 0 else float("nan")

    n_params = len(par.free)
    fitted = tuple(
        dataclasses.replace(iv, size=estimates[f"gamma{k + 1}"])
        for k, iv in enumerate(interventions)
    )
    model = LogLinCountModel(
        d=estimates["d"],
        a1=estimates["a1"],
        b1=estimates["b1"],
        interventions=fitted,
        nu0=estimates.get("nu0", nu0),
    )
    report = FitReport(
        model=model,
        names=list(par.names),
        free=list(par.free),
        theta=theta,
        estimates=estimates,
        std_errors=std_errors,
        loglik=ll,
        bic=-2.0 * ll + n_params * math.log(T),
        n_params=n_params,
        T=T,
        fitted_means=lam,
        nu=nu,
        nu0=estimates.get("nu0", nu0),
        estimate_nu0=estimate_nu0,
        fixed=dict(par.fixed),
        converged=converged,
        boundary=boundary,
    )
    logger.info(f"fitted {n_params} parameters: loglik={ll:.3f} BIC={report.bic:.3f}")
    return report


def _score_scan(report, y, kinds, exclude):
    """Score statistics for adding one intervention at every candidate."""
    T = len(y)
    W = _covariates(report.interventions, T)
    _, _, D, lam, _ = _loglik_score(report.theta, y, W, report.nu0, report.estimate_nu0)
    free_idx = [report.names.index(n) for n in report.free]
    Df = D[:, free_idx]

    t = np.arange(1, T + 1)
    candidates = [
        (time, kind)
        for time in range(3, T - 1)
        for kind in kinds
        if (time, kind) not in exclude
    ]
    if not candidates:
        return None, 0
    Wc = np.column_stack([kind.covariate(time, t) for time, kind in candidates])
    Dc = signal.lfilter([1.0], [1.0, -report.theta[1]], Wc, axis=0)

    U = Dc.T @ (y - lam)
    I_ff = (Df * lam[:, None]).T @ Df
    I_cf = (Dc * lam[:, None]).T @ Df
    I_cc = np.sum(Dc ** 2 * lam[:, None], axis=0)
    if Df.shape[1]:
        eff = I_cc - np.sum((I_cf @ np.linalg.pinv(I_ff)) * I_cf, axis=1)
    else:
        eff = I_cc
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(eff > 1e-12, U ** 2 / eff, 0.0)
    k = int(np.argmax(stat))
    time, kind = candidates[k]
    return (time, kind, float(stat[k])), len(candidates)


def detect_interventions(
    series,
    kinds=(AO,),
    level=0.05,
    max_interventions=10,
    fixed=None,
    estimate_nu0=False,
):
    """Iterative intervention detection.

    Starting from the fit without interventions, compute the score statistic
    for one additional intervention at each candidate day 3..T-2 and kind,
    add the most significant one when its Bonferroni-adjusted p-value is
    below `level`, refit all parameters jointly and repeat.

    :return: detected interventions with sizes from the final joint fit
    """
    if not 0 < level < 1:
        raise ValidationError("level must be in (0, 1)")
    kinds = InterventionKind.parse(kinds) if not isinstance(kinds, InterventionKind) else (kinds,)
    y = _counts_of(series)

    detected = []
    report = fit_mle(y, detected, fixed=fixed, estimate_nu0=estimate_nu0)
    while len(detected) < max_interventions:
        exclude = {(iv.time, iv.kind) for iv in detected}
        best, m = _score_scan(report, y, kinds, exclude)
        if best is None:
            break
        time, kind, stat = best
        p_value = float(stats.chi2.sf(stat, df=1))
        adjusted = min(1.0, p_value * m)
        logger.debug(f"best candidate {kind} at t={time}: score={stat:.3f} p_adj={adjusted:.3g}")
        if adjusted >= level:
            break
        detected.append(Intervention(time, kind, statistic=stat, p_value=adjusted))
        report = fit_mle(y, detected, fixed=fixed, estimate_nu0=estimate_nu0)

    detected = [
        dataclasses.replace(iv, size=fitted.size)
        for iv, fitted in zip(detected, report.interventions)
    ]
    logger.info(f"detected {len(detected)} interventions: {[(str(iv.kind), iv.time) for iv in detected]}")
    return detected


def _simultaneous(paths, level):
    """Smallest marginal level whose pointwise band holds `level` of whole paths."""

    def band(marginal):
        lo = np.quantile(paths, (1.0 - marginal) / 2.0, axis=0, method="inverted_cdf")
        hi = np.quantile(paths, (1.0 + marginal) / 2.0, axis=0, method="inverted_cdf")
        return lo, hi

    def coverage(marginal):
        lo, hi = band(marginal)
        return float(np.mean(np.all((paths >= lo) & (paths <= hi), axis=1)))

    low, high = level, 1.0
    if coverage(low) >= level:
        return band(low)
    for _ in range(30):
        mid = (low + high) / 2.0
        if coverage(mid) >= level:
            high = mid
        else:
            low = mid
    return band(high)


def predict_counts(
    report,
    series,
    horizon,
    level=0.95,
    seed=0,
    n_paths=10000,
    simultaneous=True,
):
    """Forecast counts by simulating `n_paths` future trajectories.

    :param report: `FitReport` or `LogLinCountModel`
    :param series: counts the model was fitted to
    :param horizon: number of days
    :param level: interval level, default: `0.95`
    :param seed: `RngSeed`, integer or generator
    :param n_paths: number of simulated paths, default: `10000`
    :param simultaneous: joint band over the whole horizon, default: `True`
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    if n_paths < 1000:
        raise ValidationError("n_paths must be >= 1000")
    if not 0 < level < 1:
        raise ValidationError("level must be in (0, 1)")
    model = getattr(report, "model", report)
    y = _counts_of(series)
    if isinstance(report, FitReport) and report.T != len(y):
        raise LengthMismatchError(f"model was fitted to {report.T} days, got {len(y)}")
    T = len(y)
    rng = as_generator(seed)

    nu = filter_intensity(model, y)
    future = _covariates(model.interventions, T, t=np.arange(T + 1, T + horizon + 1))
    shift = future @ np.array([iv.size for iv in model.interventions]) if model.interventions else np.zeros(horizon)

    paths = np.empty((n_paths, horizon))
    nu_prev = np.full(n_paths, nu[-1])
    x_prev = np.full(n_paths, y[-1])
    for h in range(horizon):
        nu_h = model.d + model.a1 * nu_prev + model.b1 * np.log1p(x_prev) + shift[h]
        paths[:, h] = rng.poisson(np.exp(np.minimum(nu_h, 700.0)))
        nu_prev, x_prev = nu_h, paths[:, h]

    point = paths.mean(axis=0)
    if simultaneous:
        lower, upper = _simultaneous(paths, level)
    else:
        lower = np.quantile(paths, (1.0 - level) / 2.0, axis=0, method="inverted_cdf")
        upper = np.quantile(paths, (1.0 + level) / 2.0, axis=0, method="inverted_cdf")

    return [
        PredictionInterval(
            horizon_day=h + 1,
            point=float(point[h]),
            lower=float(min(lower[h], point[h])),
            upper=float(max(upper[h], point[h])),
            level=level,
            simultaneous=simultaneous,
        )
        for h in range(horizon)
    ]


def simulate_loglin(model, T, seed=0, burn_in=50, start_date=datetime.date(2020, 3, 1)):
    """Simulate `T` days of the log-linear model.

    Intervention times refer to the returned days 1..T.
    """
    T = int(T)
    if T < 1:
        raise ValidationError("T must be >= 1")
    rng = as_generator(seed)
    W = _covariates(model.interventions, T)
    shift = W @ np.array([iv.size for iv in model.interventions]) if model.interventions else np.zeros(T)
    shift = np.concatenate([np.zeros(burn_in), shift])

    nu_prev = model.nu0 if model.nu0 is not None else model.d / (1.0 - model.a1 - model.b1)
    logy_prev = nu_prev
    counts = np.empty(burn_in + T, dtype=np.int64)
    for t in range(burn_in + T):
        nu = model.d + model.a1 * nu_prev + model.b1 * logy_prev + shift[t]
        counts[t] = rng.poisson(math.exp(min(nu, 700.0)))
        nu_prev, logy_prev = nu, math.log1p(counts[t])

    return IncidenceSeries(start_date=start_date, cases=counts[burn_in:], label="simulated")

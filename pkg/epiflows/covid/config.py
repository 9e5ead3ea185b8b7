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
import sys
import json
import datetime
import dataclasses

from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .core import ValidationError, DISTRICTS
from .changepoint import SignalModel
from .count_ts import InterventionKind
from .compartmental import (
    CYPRUS_POPULATION,
    IuMobility,
    Model1Params,
    SeirState,
    MetaState,
    Model3Params,
    SeirqpdState,
)
from .rt_inference import PriorSpec, default_priors

__all__ = [
    "ConfigError",
    "ChangepointConfig",
    "CountTsConfig",
    "SimulateConfig",
    "Seirqpd3Config",
    "RtConfig",
    "RunConfig",
    "load_config",
    "load_params",
    "default_output",
]

#: environment variable with the default output directory
OUTPUT_DIR_ENV = "EPIFLOWS_OUTPUT_DIR"

COMMANDS = ("changepoint", "countts", "simulate", "fit-seirqpd", "rt", "report-all")
SIMULATE_MODELS = ("seir1", "meta2", "seirqpd3")
RT_METHODS = ("mcmc1", "eakf2", "bettencourt", "cori")


class ConfigError(ValidationError):
    """Invalid configuration value."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def default_output():
    return os.environ.get(OUTPUT_DIR_ENV, "./report")


def _date(field, value):
    if value is None:
        return None
    try:
        return datetime.date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(field, f"'{value}' is not a YYYY-MM-DD date") from None


def _check(field, condition, message):
    if not condition:
        raise ConfigError(field, message)


def _level(field, value):
    _check(field, 0 < value < 1, "must be in (0, 1)")


@dataclass
class ChangepointConfig:
    model: str = "linear"
    lambda_T: int = 10
    threshold: Union[float, str] = "auto"
    forecast: int = 7
    level: float = 0.95

    def validate(self, prefix="changepoint"):
        try:
            SignalModel.parse(self.model)
        except ValidationError as exc:
            raise ConfigError(f"{prefix}.model", str(exc)) from None
        _check(f"{prefix}.lambda_T", int(self.lambda_T) == self.lambda_T and self.lambda_T >= 2, "must be an integer >= 2")
        if isinstance(self.threshold, str):
            _check(f"{prefix}.threshold", self.threshold == "auto", "must be a positive number or 'auto'")
        else:
            _check(f"{prefix}.threshold", self.threshold > 0, "must be positive")
        _check(f"{prefix}.forecast", self.forecast >= 0, "must be >= 0")
        _level(f"{prefix}.level", self.level)


@dataclass
class CountTsConfig:
    detect: str = "ao"
    level: float = 0.05
    max_interventions: int = 10
    delta: float = 0.8
    forecast: int = 7
    forecast_level: float = 0.95
    paths: int = 10000
    first: Optional[str] = None
    last: Optional[str] = None

    def validate(self, prefix="countts"):
        if self.detect:
            try:
                InterventionKind.parse(self.detect, self.delta)
            except ValidationError as exc:
                raise ConfigError(f"{prefix}.detect", str(exc)) from None
        _level(f"{prefix}.level", self.level)
        _check(f"{prefix}.max_interventions", self.max_interventions >= 0, "must be >= 0")
        _check(f"{prefix}.delta", 0 < self.delta < 1, "must be in (0, 1)")
        _check(f"{prefix}.forecast", self.forecast >= 0, "must be >= 0")
        _level(f"{prefix}.forecast_level", self.forecast_level)
        _check(f"{prefix}.paths", self.paths >= 1000, "must be >= 1000")
        first, last = _date(f"{prefix}.first", self.first), _date(f"{prefix}.last", self.last)
        if first and last:
            _check(f"{prefix}.last", first <= last, "must not precede first")


@dataclass
class SimulateConfig:
    model: str = "seir1"
    params: Optional[str] = None
    horizon: int = 60
    reps: int = 1
    deterministic: bool = False
    iu_mobility: str = IuMobility.PRINTED
    start_date: str = "2020-03-01"

    def validate(self, prefix="simulate"):
        _check(f"{prefix}.model", self.model in SIMULATE_MODELS, f"must be one of {', '.join(SIMULATE_MODELS)}")
        _check(f"{prefix}.horizon", self.horizon >= 1, "must be >= 1")
        _check(f"{prefix}.reps", self.reps >= 1, "must be >= 1")
        _check(
            f"{prefix}.iu_mobility",
            self.iu_mobility in (IuMobility.PRINTED, IuMobility.UNDOCUMENTED),
            "must be 'printed' or 'undocumented'",
        )
        _date(f"{prefix}.start_date", self.start_date)


@dataclass
class Seirqpd3Config:
    gamma_inv: float = 3.0
    sweep: bool = False
    sweep_values: List[float] = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
    n_starts: int = 8
    population: float = CYPRUS_POPULATION
    nested: List[str] = field(default_factory=list)
    predict_until: Optional[str] = None

    def validate(self, prefix="seirqpd3"):
        _check(f"{prefix}.gamma_inv", self.gamma_inv > 0, "must be positive")
        _check(f"{prefix}.sweep_values", all(v > 0 for v in self.sweep_values), "values must be positive")
        _check(f"{prefix}.n_starts", self.n_starts >= 1, "must be >= 1")
        _check(f"{prefix}.population", self.population > 0, "must be positive")
        for k, value in enumerate(self.nested):
            _date(f"{prefix}.nested[{k}]", value)
        _date(f"{prefix}.predict_until", self.predict_until)


@dataclass
class RtConfig:
    method: str = "mcmc1"
    start: Optional[str] = None
    periods: int = 6
    n_steps: int = 10000
    burn_in: int = 2000
    priors: List[dict] = field(default_factory=lambda: [p.to_dict() for p in default_priors(6)])
    members: int = 300
    lockdown: Optional[str] = "2020-03-24"
    iu_mobility: str = IuMobility.PRINTED
    window: int = 7
    D: float = 3.5
    si_mean: float = 6.48
    si_sd: float = 3.83
    level: float = 0.95
    dump_samples: bool = False

    def validate(self, prefix="rt"):
        _check(f"{prefix}.method", self.method in RT_METHODS, f"must be one of {', '.join(RT_METHODS)}")
        _date(f"{prefix}.start", self.start)
        _check(f"{prefix}.periods", self.periods >= 1, "must be >= 1")
        _check(f"{prefix}.n_steps", self.n_steps >= 1, "must be >= 1")
        _check(f"{prefix}.burn_in", 0 <= self.burn_in < self.n_steps, "must be in [0, n_steps)")
        _check(f"{prefix}.priors", len(self.priors) >= self.periods, "needs one prior per period")
        for k, prior in enumerate(self.priors):
            try:
                PriorSpec(**prior)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{prefix}.priors[{k}]", str(exc)) from None
        _check(f"{prefix}.members", self.members >= 100, "must be >= 100")
        _date(f"{prefix}.lockdown", self.lockdown)
        _check(
            f"{prefix}.iu_mobility",
            self.iu_mobility in (IuMobility.PRINTED, IuMobility.UNDOCUMENTED),
            "must be 'printed' or 'undocumented'",
        )
        _check(f"{prefix}.window", self.window >= 1, "must be >= 1")
        _check(f"{prefix}.D", self.D > 0, "must be positive")
        _check(f"{prefix}.si_mean", self.si_mean > 0, "must be positive")
        _check(f"{prefix}.si_sd", self.si_sd > 0, "must be positive")
        _level(f"{prefix}.level", self.level)

    def prior_specs(self):
        return [PriorSpec(**prior) for prior in self.priors[: self.periods]]


#: command table name -> block attribute and type
BLOCKS = {
    "changepoint": ("changepoint", ChangepointConfig),
    "countts": ("countts", CountTsConfig),
    "simulate": ("simulate", SimulateConfig),
    "seirqpd3": ("seirqpd3", Seirqpd3Config),
    "rt": ("rt", RtConfig),
}


@dataclass
class RunConfig:
    """Configuration of one toolkit run.

    Top-level values select the command, the inputs, the seed and the output
    directory; each command reads its own parameter block.
    """

    command: str = "report-all"
    seed: int = 0
    output: str = field(default_factory=default_output)
    data: Optional[str] = None
    districts: Optional[str] = None
    mobility: Optional[str] = None
    populations: Optional[str] = None
    local_only: bool = False
    local_column: str = "local"
    use_stash: bool = True
    changepoint: ChangepointConfig = field(default_factory=ChangepointConfig)
    countts: CountTsConfig = field(default_factory=CountTsConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    seirqpd3: Seirqpd3Config = field(default_factory=Seirqpd3Config)
    rt: RtConfig = field(default_factory=RtConfig)

    @classmethod
    def from_dict(cls, d):
        """Build configuration from nested dictionaries; unknown keys are errors."""
        d = dict(d)
        kwargs = {}
        top = {f.name for f in dataclasses.fields(cls)} - set(BLOCKS)
        for name, value in d.items():
            if name in BLOCKS:
                attr, block = BLOCKS[name]
                if not isinstance(value, dict):
                    raise ConfigError(name, "must be a table")
                known = {f.name for f in dataclasses.fields(block)}
                unknown = sorted(set(value) - known)
                if unknown:
                    raise ConfigError(f"{name}.{unknown[0]}", "unknown setting")
                kwargs[attr] = block(**value)
            elif name in top:
                kwargs[name] = value
            else:
                raise ConfigError(name, "unknown setting")
        return cls(**kwargs)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        """Canonical serialization."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def merge(self, **overrides):
        """Return copy with top-level values replaced; `None` values are ignored."""
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def validate(self):
        """Range-check every setting and raise `ConfigError` naming the offending field."""
        _check("command", self.command in COMMANDS, f"must be one of {', '.join(COMMANDS)}")
        _check("seed", isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64, "must be a 64-bit unsigned integer")
        _check("output", bool(self.output), "must not be empty")
        for name in ("data", "districts", "mobility", "populations"):
            path = getattr(self, name)
            if path is not None:
                _check(name, os.path.isfile(path), f"'{path}' is not a file")
        if self.simulate.params is not None:
            _check("simulate.params", os.path.isfile(self.simulate.params), f"'{self.simulate.params}' is not a file")
        for attr, _ in BLOCKS.values():
            getattr(self, attr).validate(prefix=attr)

        needs_data = self.command in ("changepoint", "countts", "fit-seirqpd", "report-all") or (
            self.command == "rt" and self.rt.method != "eakf2"
        )
        _check("data", not needs_data or self.data is not None, f"'{self.command}' requires a data file")
        if self.command == "rt" and self.rt.method == "eakf2":
            _check("districts", self.districts is not None, "'eakf2' requires a per-district data file")
        if self.command == "simulate":
            _check("simulate.params", self.simulate.params is not None, "'simulate' requires a parameter file")
        return self


def load_config(path):
    """Read a TOML configuration file."""
    try:
        with open(path, "rb") as fd:
            d = tomllib.load(fd)
    except OSError as exc:
        raise ConfigError("config", f"can't read '{path}': {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"'{path}' is not valid TOML: {exc}") from None
    return RunConfig.from_dict(d)


def _table(d, name, path):
    table = d.get(name)
    if not isinstance(table, dict):
        raise ConfigError(name, f"'{path}' has no [{name}] table")
    return table


def load_params(path, model, populations=None, mobility=None, districts=DISTRICTS):
    """Read model parameters and the initial state from a TOML file with
    `[params]` and `[init]` tables.

    :param model: `seir1`, `meta2` or `seirqpd3`
    :param populations: district populations for `meta2` without `init.N`
    :param mobility: mobility matrix for `meta2`
    :return: parameters, initial state
    """
    with open(path, "rb") as fd:
        try:
            d = tomllib.load(fd)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("params", f"'{path}' is not valid TOML: {exc}") from None
    params, init = _table(d, "params", path), _table(d, "init", path)
    try:
        if model == "seirqpd3":
            return Model3Params(**params), SeirqpdState(**init)
        p = Model1Params(**params)
        if model == "seir1":
            return p, SeirState.seeded(**init)
        if model == "meta2":
            init = dict(init)
            N = init.pop("N", None)
            N = np.asarray(populations if N is None else N, dtype=float)
            return p, MetaState.seeded(N=N, mobility=mobility, districts=districts, **init)
    except TypeError as exc:
        raise ConfigError("params", f"'{path}': {exc}") from None
    raise ConfigError("simulate.model", f"unknown model '{model}'")

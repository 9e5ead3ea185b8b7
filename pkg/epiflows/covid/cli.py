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
import math
import hashlib
import logging
import argparse
import datetime
import dataclasses

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from .core import (
    ToolkitError,
    ValidationError,
    EstimationError,
    IntegrationError,
    RngSeed,
    SeriesSchema,
    DISTRICTS,
    load_series,
    load_district_series,
    load_mobility,
    load_populations,
    default_mobility,
    default_populations,
)
from .changepoint import IdConfig, SignalModel, isolate_detect, forecast_cpt
from .count_ts import InterventionKind, fit_mle, detect_interventions, predict_counts
from .compartmental import (
    SEIR,
    SEIRQPD,
    Model3Observations,
    run_model1,
    simulate_model2,
    integrate_model3,
    fit_model3,
    sweep_model3,
)
from .rt_inference import (
    EnsembleConfig,
    fortnight_periods,
    mcmc_model1,
    eakf_model2,
    bettencourt_rt,
    cori_rt,
)
from .config import RunConfig, load_config, load_params
from .stash import stashed

__all__ = ["main", "run", "emit_plot_data", "ReportBundle", "REPORT_FORMAT_VERSION", "METHODS_VERSION"]

logger = logging.getLogger(__name__)

#: version of the report bundle layout
REPORT_FORMAT_VERSION = "1"

#: version of the analysis methods; bumped when an estimator changes its results
METHODS_VERSION = "1"

PLOT_COLUMNS = ["x", "series", "y", "lower", "upper"]

#: analyses whose results are stashed between runs
STASHED = ("seirqpd3", "rt_mcmc1", "rt_eakf2")


def _plain(value):
    """Convert results to JSON-compatible values; NaN becomes `None`."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    if isinstance(value, (datetime.date, pd.Timestamp)):
        return value.isoformat()[:10]
    return value


def _sha1(path):
    digest = hashlib.sha1()
    with open(path, "rb") as fd:
        for chunk in iter(lambda: fd.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _content_sha1(frame):
    """Digest of loaded values, independent of the file they came from."""
    return hashlib.sha1(pd.util.hash_pandas_object(frame, index=True).values.tobytes()).hexdigest()


def _day(start, t):
    """Date of 1-based day `t` counted from `start`."""
    return (start + datetime.timedelta(days=int(t) - 1)).isoformat()


def _plot(series, x, y, lower=None, upper=None):
    return {"x": x, "series": series, "y": y, "lower": lower, "upper": upper}


@dataclass
class Inputs:
    """Input files loaded and validated before anything is written."""

    series: object = None
    district_series: Optional[dict] = None
    districts: tuple = DISTRICTS
    mobility: Optional[np.ndarray] = None
    populations: Optional[np.ndarray] = None
    digests: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def load(cls, config):
        inputs = cls()
        schema = SeriesSchema.local(config.local_column) if config.local_only else SeriesSchema()
        if config.data is not None:
            inputs.series = load_series(config.data, schema)
        if config.mobility is not None:
            inputs.districts, inputs.mobility = load_mobility(config.mobility)
        if config.districts is not None:
            inputs.district_series = load_district_series(config.districts, inputs.districts)
        if config.populations is not None:
            inputs.populations = load_populations(config.populations, inputs.districts)

        needs_network = (
            config.districts is not None
            or (config.command == "simulate" and config.simulate.model == "meta2")
        )
        if needs_network:
            if inputs.mobility is None:
                inputs.districts, inputs.mobility = default_mobility()
            if inputs.populations is None:
                inputs.populations = default_populations()
        for name in ("data", "districts", "mobility", "populations"):
            path = getattr(config, name)
            if path is not None:
                inputs.digests[name] = _sha1(path)
        if config.command == "simulate" and config.simulate.params is not None:
            inputs.digests["params"] = _sha1(config.simulate.params)
        # the stash key must follow the column actually read, not only the file
        if inputs.series is not None:
            inputs.digests["series"] = _content_sha1(inputs.series.to_frame())
        for name, s in (inputs.district_series or {}).items():
            inputs.digests[f"series.{name}"] = _content_sha1(s.to_frame())
        return inputs


def _changepoint(config, inputs, seed):
    cfg = config.changepoint
    series = inputs.series
    threshold = cfg.threshold if isinstance(cfg.threshold, str) else float(cfg.threshold)
    result = isolate_detect(series, cfg.model, IdConfig(lambda_T=int(cfg.lambda_T), zeta_T=threshold))
    forecasts = forecast_cpt(result, cfg.forecast, cfg.level) if cfg.forecast else []

    dates = [_day(series.start_date, t) for t in range(1, series.T + 1)]
    fitted = [
        {"date": d, "observed": int(x), "fitted": float(f)}
        for d, x, f in zip(dates, series.cases, result.fitted)
    ]
    forecast = [dict(date=_day(series.start_date, series.T + pi.horizon_day), **pi.to_dict()) for pi in forecasts]
    plot = [_plot("observed", row["date"], row["observed"]) for row in fitted]
    plot += [_plot("fitted", row["date"], row["fitted"]) for row in fitted]
    plot += [_plot("forecast", row["date"], row["point"], row["lower"], row["upper"]) for row in forecast]

    summary = {
        "model": result.model.value,
        "threshold": result.threshold,
        "sigma": result.sigma,
        "locations": result.locations,
        "dates": result.dates(),
        "segments": [s.to_dict() for s in result.segment_params],
        "forecasts": forecast,
    }
    if result.model is SignalModel.PiecewiseConstant:
        summary["jumps"] = result.jumps
    return {
        "summary": summary,
        "tables": {"changepoint_fitted": fitted, "changepoint_forecast": forecast},
        "plots": {"changepoint": plot},
    }


def _countts(config, inputs, seed):
    cfg = config.countts
    series = inputs.series
    if cfg.first or cfg.last:
        series = series.window(
            datetime.date.fromisoformat(cfg.first) if cfg.first else None,
            datetime.date.fromisoformat(cfg.last) if cfg.last else None,
        )
    base = fit_mle(series)
    detected = []
    if cfg.detect:
        kinds = InterventionKind.parse(cfg.detect, cfg.delta)
        detected = detect_interventions(series, kinds, cfg.level, cfg.max_interventions)
    report = fit_mle(series, detected) if detected else base
    forecasts = []
    if cfg.forecast:
        forecasts = predict_counts(
            report, series, cfg.forecast, cfg.forecast_level, seed=seed.derive("forecast"), n_paths=cfg.paths
        )

    fitted = [
        {"date": _day(series.start_date, t + 1), "observed": int(x), "fitted_base": float(b), "fitted": float(f)}
        for t, (x, b, f) in enumerate(zip(series.cases, base.fitted_means, report.fitted_means))
    ]
    forecast = [dict(date=_day(series.start_date, series.T + pi.horizon_day), **pi.to_dict()) for pi in forecasts]
    plot = [_plot("observed", row["date"], row["observed"]) for row in fitted]
    plot += [_plot("fitted", row["date"], row["fitted"]) for row in fitted]
    plot += [_plot("forecast", row["date"], row["point"], row["lower"], row["upper"]) for row in forecast]
    return {
        "summary": {
            "start": series.start_date,
            "end": series.end_date,
            "no_interventions": base.to_dict(),
            "fit": report.to_dict(),
            "equation": report.summary(),
            "forecasts": forecast,
        },
        "tables": {"countts_fitted": fitted, "countts_forecast": forecast},
        "plots": {"countts": plot},
    }


def _simulate(config, inputs, seed):
    cfg = config.simulate
    start = datetime.date.fromisoformat(cfg.start_date)
    p, init = load_params(
        cfg.params, cfg.model, populations=inputs.populations, mobility=inputs.mobility, districts=inputs.districts
    )
    reps = 1 if cfg.deterministic or cfg.model == "seirqpd3" else int(cfg.reps)

    rows, recorded = [], []
    for r in range(reps):
        replicate = seed.derive("replicate", r)
        if cfg.model == "seir1":
            run = run_model1(p, init, cfg.horizon, seed=replicate, deterministic=cfg.deterministic, start_date=start)
            states = run.states
            names = SEIR
            recorded += [
                {"replicate": r, "district": "", "day": d + 1, "new_reported": float(n), "recorded": float(c)}
                for d, (n, c) in enumerate(zip(run.new_reported, run.recorded))
            ]
        elif cfg.model == "meta2":
            run = simulate_model2(
                p, init, cfg.horizon, seed=replicate, deterministic=cfg.deterministic,
                iu_mobility=cfg.iu_mobility, start_date=start,
            )
            states = run.states.reshape(run.states.shape[0], -1)
            names = [f"{c}.{d}" for c in SEIR for d in run.districts]
            recorded += [
                {"replicate": r, "district": name, "day": d + 1, "new_reported": float(n), "recorded": float(c)}
                for i, name in enumerate(run.districts)
                for d, (n, c) in enumerate(zip(run.new_reported[i], run.recorded[i]))
            ]
        else:
            states = integrate_model3(p, init, cfg.horizon, start_date=start).states
            names = SEIRQPD
        rows += [
            {"day": day, "compartment": name, "value": float(states[day, k]), "replicate": r}
            for day in range(states.shape[0])
            for k, name in enumerate(names)
        ]

    frame = pd.DataFrame(rows)
    stats = frame.groupby(["compartment", "day"], sort=False)["value"]
    mean, lower, upper = stats.mean(), stats.quantile(0.025), stats.quantile(0.975)
    plot = [
        _plot(name, day, float(mean[(name, day)]), float(lower[(name, day)]), float(upper[(name, day)]))
        for (name, day) in mean.index
    ]
    final = frame[frame["day"] == frame["day"].max()].groupby("compartment", sort=False)["value"].mean()
    return {
        "summary": {
            "model": cfg.model,
            "horizon": cfg.horizon,
            "reps": reps,
            "deterministic": cfg.deterministic,
            "final_mean": final.to_dict(),
        },
        "tables": {"simulate_trajectories": rows, "simulate_recorded": recorded},
        "plots": {"simulate": plot},
    }


def _seirqpd3(config, inputs, seed):
    cfg = config.seirqpd3
    series = inputs.series
    observations = Model3Observations.from_series(series)
    kwargs = dict(N=cfg.population, n_starts=cfg.n_starts, seed=seed)

    fit = fit_model3(observations, gamma_inv=cfg.gamma_inv, **kwargs)
    extra = 0
    if cfg.predict_until:
        until = datetime.date.fromisoformat(cfg.predict_until)
        extra = max((until - series.end_date).days, 0)
    trajectory = fit.predict(extra)

    peaks = {}
    for name in ("E", "I", "E+I"):
        day, value, date = trajectory.peak(name)
        peaks[name] = {"day": day, "value": value, "date": date}

    nested = []
    for end in cfg.nested:
        end = datetime.date.fromisoformat(end)
        n = series.index_of(end)
        nested_fit = fit_model3(observations.head(n), gamma_inv=cfg.gamma_inv, **kwargs)
        nested.append(
            {
                "end": end,
                "params": nested_fit.params.to_dict(),
                "relative_errors": nested_fit.relative_errors(observations),
            }
        )

    sweep = []
    if cfg.sweep:
        sweep = [entry.to_dict() for entry in sweep_model3(observations, cfg.sweep_values, **kwargs)]

    rows, plot = [], []
    for k in range(len(trajectory.t)):
        date = _day(series.start_date, k + 1)
        for name in SEIRQPD:
            rows.append({"date": date, "compartment": name, "fitted": float(trajectory[name][k])})
        for name in ("Q", "R", "D"):
            plot.append(_plot(f"fitted {name}", date, float(trajectory[name][k])))
    for k in range(observations.T):
        date = _day(series.start_date, k + 1)
        for name in ("Q", "R", "D"):
            plot.append(_plot(f"observed {name}", date, float(getattr(observations, name)[k])))

    return {
        "summary": {
            "gamma_inv": cfg.gamma_inv,
            "params": fit.params.to_dict(),
            "init": dataclasses.asdict(fit.init),
            "cost": fit.cost,
            "peaks": peaks,
            "relative_errors": fit.relative_errors(),
            "diagnostics": dataclasses.asdict(fit.diagnostics),
            "nested": nested,
            "sweep": sweep,
        },
        "tables": {"seirqpd3_trajectory": rows, "seirqpd3_sweep": sweep},
        "plots": {"seirqpd3": plot},
    }


def _rt(method):
    def analysis(config, inputs, seed):
        cfg = config.rt
        if method == "mcmc1":
            series = inputs.series
            first = series.first_case()
            if first is None:
                raise ValidationError("the data has no recorded case")
            data = series.window(max(first - 3, 1))
            start = datetime.date.fromisoformat(cfg.start) if cfg.start else None
            periods = fortnight_periods(data, start=start, count=cfg.periods)
            result = mcmc_model1(
                data, periods, cfg.prior_specs()[: len(periods)], seed=seed,
                n_steps=cfg.n_steps, burn_in=cfg.burn_in, level=cfg.level,
            )
            estimates = result.estimates
            extra = {
                "acceptance": result.acceptance,
                "alpha_median": [float(np.median(a)) for a in result.alpha],
                "beta_median": [float(np.median(b)) for b in result.beta],
            }
        elif method == "eakf2":
            ensemble = EnsembleConfig(
                n_members=cfg.members,
                lockdown=datetime.date.fromisoformat(cfg.lockdown) if cfg.lockdown else None,
                iu_mobility=cfg.iu_mobility,
            )
            result = eakf_model2(
                inputs.district_series, inputs.mobility, inputs.populations, ensemble,
                seed=seed, districts=inputs.districts, level=cfg.level,
            )
            estimates = result.estimates
            extra = {"collapses": result.collapses}
        elif method == "bettencourt":
            estimates = bettencourt_rt(inputs.series, cfg.window, cfg.D, level=cfg.level)
            extra = {}
        else:
            estimates = cori_rt(inputs.series, cfg.si_mean, cfg.si_sd, cfg.window, level=cfg.level)
            extra = {}

        table = [est.to_dict() for est in estimates]
        plot = [_plot(method, row["start"], row["median"], row["lower"], row["upper"]) for row in table]
        summary = dict(method=method, estimates=[est.to_dict(samples=cfg.dump_samples) for est in estimates], **extra)
        return {"summary": summary, "tables": {f"rt_{method}": table}, "plots": {f"rt_{method}": plot}}

    return analysis


def _analyses(config, inputs):
    if config.command == "changepoint":
        return [("changepoint", _changepoint)]
    if config.command == "countts":
        return [("countts", _countts)]
    if config.command == "simulate":
        return [("simulate", _simulate)]
    if config.command == "fit-seirqpd":
        return [("seirqpd3", _seirqpd3)]
    if config.command == "rt":
        return [(f"rt_{config.rt.method}", _rt(config.rt.method))]
    analyses = [("changepoint", _changepoint), ("countts", _countts)]
    if inputs.series.recovered is not None and inputs.series.deaths is not None:
        analyses.append(("seirqpd3", _seirqpd3))
    analyses += [
        ("rt_mcmc1", _rt("mcmc1")),
        ("rt_bettencourt", _rt("bettencourt")),
        ("rt_cori", _rt("cori")),
    ]
    if inputs.district_series is not None:
        analyses.append(("rt_eakf2", _rt("eakf2")))
    return analyses


@dataclass
class ReportBundle:
    """Report written to `directory`: manifest, configuration, summary and CSV files."""

    directory: str
    config: RunConfig
    sections: Dict[str, dict]
    failures: List[dict] = field(default_factory=list)
    files: Dict[str, str] = field(default_factory=dict)
    manifest: Optional[dict] = None

    @property
    def command(self):
        return self.config.command

    def path(self, name):
        return os.path.join(self.directory, name)

    def _write_text(self, name, text):
        with open(self.path(name), "w", encoding="utf-8", newline="\n") as fd:
            fd.write(text)
        self.files[name] = _sha1(self.path(name))

    def _write_frame(self, name, frame):
        frame.to_csv(self.path(name), index=False)
        self.files[name] = _sha1(self.path(name))

    def write(self):
        os.makedirs(self.directory, exist_ok=True)
        for section in self.sections.values():
            for name, records in section["tables"].items():
                if not records:
                    continue
                self._write_frame(f"{name}.csv", pd.DataFrame.from_records(records))
        emit_plot_data(self)
        summary = {
            "command": self.command,
            "sections": {name: section["summary"] for name, section in self.sections.items()},
            "failures": self.failures,
        }
        self._write_text("summary.json", json.dumps(_plain(summary), sort_keys=True, indent=2) + "\n")
        self._write_text("config.json", self.config.to_json() + "\n")

        files = dict(sorted(self.files.items()))
        manifest_hash = hashlib.sha1("".join(f"{k}:{v}\n" for k, v in files.items()).encode()).hexdigest()
        self.manifest = {
            "command": self.command,
            "config_hash": stashed.hash(self.config.to_json()),
            "version": __version__,
            "report_format": REPORT_FORMAT_VERSION,
            "methods": METHODS_VERSION,
            "seed": self.config.seed,
            "files": files,
            "manifest_hash": manifest_hash,
        }
        with open(self.path("manifest.json"), "w", encoding="utf-8", newline="\n") as fd:
            fd.write(json.dumps(self.manifest, sort_keys=True, indent=2) + "\n")
        logger.info(f"wrote {len(files) + 1} files to {self.directory}")
        return self


def emit_plot_data(bundle):
    """Write one tidy `plot_<name>.csv` per plot with columns x, series, y, lower, upper.

    :return: dict of plot name to file path
    """
    os.makedirs(bundle.directory, exist_ok=True)
    paths = {}
    for section in bundle.sections.values():
        for name, rows in section["plots"].items():
            frame = pd.DataFrame.from_records(rows, columns=PLOT_COLUMNS)
            bundle._write_frame(f"plot_{name}.csv", frame)
            paths[name] = bundle.path(f"plot_{name}.csv")
    return paths


def run(config):
    """Run the configured command and write its report bundle.

    Inputs are validated and loaded before anything is written. Under
    `report-all` an estimation or integration failure of one analysis is
    recorded in the summary and the remaining analyses still run.

    :return: `ReportBundle`
    """
    config.validate()
    inputs = Inputs.load(config)
    seed = RngSeed(config.seed)
    stash_path = os.path.join(config.output, "stash")

    sections, failures = {}, []
    for name, analysis in _analyses(config, inputs):
        logger.info(f"running {name}")
        try:
            if name in STASHED:
                block = config.seirqpd3 if name == "seirqpd3" else config.rt
                key = stashed.hash(
                    name, dataclasses.asdict(block), sorted(inputs.digests.items()), config.seed, METHODS_VERSION
                )
                with stashed(name, key=key, path=stash_path, use_stash=config.use_stash) as stash:
                    stash(_plain(analysis(config, inputs, seed.derive(name))))
                sections[name] = stash.value
            else:
                sections[name] = _plain(analysis(config, inputs, seed.derive(name)))
        except (EstimationError, IntegrationError) as exc:
            if config.command != "report-all":
                raise
            logger.error(f"{name} failed: {exc}")
            failures.append({"analysis": name, "error": type(exc).__name__, "message": str(exc)})

    return ReportBundle(directory=config.output, config=config, sections=sections, failures=failures).write()


def _threshold(text):
    return text if text == "auto" else float(text)


def argparser():
    """Command line argument parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="file.toml", help="configuration file")
    common.add_argument("--output", metavar="dir", help="report directory, default: $EPIFLOWS_OUTPUT_DIR or ./report")
    common.add_argument("--seed", type=int, help="top-level seed")
    common.add_argument("--log-level", choices=("debug", "info", "warning", "error"), default=None)
    common.add_argument("-v", "--verbose", action="store_true", help="shorthand for --log-level info")
    common.add_argument("--no-stash", action="store_true", help="recompute stashed analyses")

    def inputs(parser, districts=False, mobility=False):
        parser.add_argument("--data", metavar="file.csv", help="daily incidence file")
        parser.add_argument("--local-only", action="store_const", const=True, help="use locally-acquired cases")
        if districts:
            parser.add_argument("--districts", metavar="file.csv", help="per-district daily cases")
        if mobility:
            parser.add_argument("--mobility", metavar="m.csv", help="mobility matrix")
            parser.add_argument("--populations", metavar="p.csv", help="district populations")

    parser = argparse.ArgumentParser(prog="epiflows-covid", description="COVID-19 incidence analysis toolkit")
    parser.add_argument("--version", action="store_true", help="print version and exit")
    commands = parser.add_subparsers(dest="command")

    p = commands.add_parser("changepoint", parents=[common], help="change-point segmentation and forecast")
    inputs(p)
    p.add_argument("--model", dest="changepoint.model", choices=[m.value for m in SignalModel])
    p.add_argument("--lambda", dest="changepoint.lambda_T", type=int)
    p.add_argument("--threshold", dest="changepoint.threshold", type=_threshold)
    p.add_argument("--forecast", dest="changepoint.forecast", type=int)
    p.add_argument("--level", dest="changepoint.level", type=float)

    p = commands.add_parser("countts", parents=[common], help="count time series with interventions")
    inputs(p)
    p.add_argument("--detect", dest="countts.detect", help="intervention kinds, e.g. ao,ts,ls")
    p.add_argument("--level", dest="countts.level", type=float)
    p.add_argument("--forecast", dest="countts.forecast", type=int)
    p.add_argument("--paths", dest="countts.paths", type=int)
    p.add_argument("--first", dest="countts.first", metavar="YYYY-MM-DD")
    p.add_argument("--last", dest="countts.last", metavar="YYYY-MM-DD")

    p = commands.add_parser("simulate", parents=[common], help="simulate a compartmental model")
    p.add_argument("--mobility", metavar="m.csv", help="mobility matrix")
    p.add_argument("--populations", metavar="p.csv", help="district populations")
    p.add_argument("--model", dest="simulate.model", choices=("seir1", "meta2", "seirqpd3"))
    p.add_argument("--params", dest="simulate.params", metavar="file.toml")
    p.add_argument("--horizon", dest="simulate.horizon", type=int)
    p.add_argument("--reps", dest="simulate.reps", type=int)
    p.add_argument("--deterministic", dest="simulate.deterministic", action="store_const", const=True)

    p = commands.add_parser("fit-seirqpd", parents=[common], help="fit the seven-state model")
    inputs(p)
    p.add_argument("--gamma-inv", dest="seirqpd3.gamma_inv", type=float)
    p.add_argument("--sweep", dest="seirqpd3.sweep", action="store_const", const=True)
    p.add_argument("--n-starts", dest="seirqpd3.n_starts", type=int)
    p.add_argument("--nested", dest="seirqpd3.nested", action="append", metavar="YYYY-MM-DD")
    p.add_argument("--predict-until", dest="seirqpd3.predict_until", metavar="YYYY-MM-DD")

    p = commands.add_parser("rt", parents=[common], help="effective reproduction number")
    inputs(p, districts=True, mobility=True)
    p.add_argument("--method", dest="rt.method", choices=("mcmc1", "eakf2", "bettencourt", "cori"))
    p.add_argument("--start", dest="rt.start", metavar="YYYY-MM-DD")
    p.add_argument("--n-steps", dest="rt.n_steps", type=int)
    p.add_argument("--burn-in", dest="rt.burn_in", type=int)
    p.add_argument("--members", dest="rt.members", type=int)
    p.add_argument("--window", dest="rt.window", type=int)
    p.add_argument("--dump-samples", dest="rt.dump_samples", action="store_const", const=True)

    p = commands.add_parser("report-all", parents=[common], help="run every analysis")
    inputs(p, districts=True, mobility=True)
    return parser


TOP_LEVEL = ("data", "districts", "mobility", "populations", "local_only", "seed", "output")


def config_from_args(args):
    """Configuration file values overridden by command line flags."""
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {name: getattr(args, name, None) for name in TOP_LEVEL}
    overrides["command"] = args.command
    if args.no_stash:
        overrides["use_stash"] = False
    config = config.merge(**overrides)
    blocks = {}
    for dest, value in vars(args).items():
        if "." not in dest or value is None:
            continue
        block, name = dest.split(".", 1)
        blocks.setdefault(block, {})[name] = value
    for block, values in blocks.items():
        config = dataclasses.replace(config, **{block: dataclasses.replace(getattr(config, block), **values)})
    return config


def main(argv=None):
    """Command line entry point; returns the exit status."""
    parser = argparser()
    args = parser.parse_args(argv)
    if args.version:
        print(f"epiflows.covid {__version__} (report format {REPORT_FORMAT_VERSION}, methods {METHODS_VERSION})")
        return 0
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2

    level = args.log_level or ("info" if args.verbose else "warning")
    logging.basicConfig(level=level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        bundle = run(config_from_args(args))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(bundle.directory)
    if bundle.failures:
        print(f"error: {len(bundle.failures)} analyses failed, see summary.json", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())

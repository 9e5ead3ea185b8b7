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

from epiflows.covid import IncidenceSeries, LogLinCountModel, simulate_loglin

START = datetime.date(2020, 3, 1)


def series(cases, start=START, recovered=None, deaths=None, label="test"):
    """Incidence series from plain lists."""
    return IncidenceSeries(start_date=start, cases=cases, recovered=recovered, deaths=deaths, label=label)


def noisy_counts(T=60, seed=1):
    """Stationary log-linear counts with a mean of about 3.5 a day."""
    return simulate_loglin(LogLinCountModel(d=0.5, a1=0.3, b1=0.3), T, seed=seed)


def write_csv(directory, name, rows, header="date,cases"):
    """Write `rows` (tuples) under `header` and return the file path."""
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as fd:
        fd.write(header + "\n")
        for row in rows:
            fd.write(",".join(str(v) for v in row) + "\n")
    return path


def write_series(directory, s, name="cases.csv"):
    """Write series `s` as an incidence file."""
    rows = [(d.strftime("%Y-%m-%d"), int(x)) for d, x in zip(s.dates, s.cases)]
    return write_csv(directory, name, rows)


def rk4(f, y0, days, dt=1.0):
    """Fixed-step RK4 reference integration, returns states for days 0..days."""
    y = np.asarray(y0, dtype=float)
    out = [y]
    steps = int(round(1.0 / dt))
    t = 0.0
    for _ in range(days):
        for _ in range(steps):
            k1 = f(t, y)
            k2 = f(t + dt / 2, y + dt / 2 * k1)
            k3 = f(t + dt / 2, y + dt / 2 * k2)
            k4 = f(t + dt, y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        out.append(y)
    return np.array(out)

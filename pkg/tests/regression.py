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
from testflows.core import *


@TestModule
def regression(self):
    """Epiflows - COVID-19 toolkit regression suite."""
    Feature(run=load("series", "feature"))
    Feature(run=load("changepoint", "feature"))
    Feature(run=load("count_ts", "feature"))
    Feature(run=load("compartmental", "feature"))
    Feature(run=load("rt_inference", "feature"))
    Feature(run=load("stash", "feature"))
    Feature(run=load("cli", "feature"))
    Feature(run=load("cyprus", "feature"))


if main():
    Module(run=regression)

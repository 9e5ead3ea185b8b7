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
import subprocess

HERE = os.path.dirname(os.path.abspath(__file__))


def test_regression():
    """Run the testflows regression suite under pytest."""
    result = subprocess.run([sys.executable, os.path.join(HERE, "regression.py"), "-o", "short"], cwd=HERE)
    assert result.returncode == 0

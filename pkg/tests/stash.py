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
import tempfile

import numpy as np

from testflows.core import *
from testflows.asserts import error, raises

from epiflows.covid import ValidationError, StashError, stashed

from helpers import series


class SimpleClass:
    def __init__(self):
        self.x = 1

    def __eq__(self, other):
        return isinstance(other, self.__class__) and other.x == self.x


PLAIN_VALUES = [
    ("str", "hello there"),
    ("int", 1234),
    ("float", 12345.3234234),
    ("dict", {"a": "b"}),
    ("list", [1, "a", 3.3]),
]

OBJECT_VALUES = [
    ("tuple", (-1, "hello", {"a": 1})),
    ("class", SimpleClass),
    ("object", SimpleClass()),
]


@TestOutline(Scenario)
@Examples(
    "encoder use_stash",
    [
        (stashed.encoder.json, True, Name("json")),
        (stashed.encoder.pickle, True, Name("pickle")),
        (stashed.encoder.jsonpickle, True, Name("jsonpickle")),
        (stashed.encoder.jsonpickle, False, Name("jsonpickle no stash")),
    ],
)
def check_values(self, encoder, use_stash):
    """Check stashing values using different encoders."""
    values = PLAIN_VALUES if encoder is stashed.encoder.json else PLAIN_VALUES + OBJECT_VALUES

    with tempfile.TemporaryDirectory() as directory:
        for name, value in values:
            with By(f"stashing {name}"):
                with stashed(name, path=directory, encoder=encoder, use_stash=use_stash) as stash:
                    stash(value)
                assert stash.value == value, error()

            with And(f"reading {name} back"):
                with stashed(name, path=directory, encoder=encoder, use_stash=use_stash) as stash:
                    stash(value)
                assert stash.value == value, error()
                assert stash.was_empty is not use_stash, error()


@TestScenario
def check_body_skipped(self):
    """Check that the body of the with block is skipped when the value is stashed."""
    calls = []

    def compute(value):
        calls.append(value)
        return value

    with tempfile.TemporaryDirectory() as directory:
        with stashed("value", key="k", path=directory) as stash:
            stash(compute(1))
        assert calls == [1], error()
        assert os.path.exists(os.path.join(directory, "value.k.stash")), error()

        with stashed("value", key="k", path=directory) as stash:
            stash(compute(2))
        assert calls == [1], error()
        assert stash.value == 1, error()

        with By("turning the stash off"):
            with stashed("value", key="k", path=directory, use_stash=False) as stash:
                stash(compute(3))
            assert calls == [1, 3], error()
            assert stash.value == 3, error()


@TestScenario
def check_numpy_values(self):
    """Check stashing arrays and incidence series with jsonpickle."""
    value = {"samples": np.linspace(0.0, 1.0, 11), "series": series([1, 2, 3])}

    with tempfile.TemporaryDirectory() as directory:
        with stashed("arrays", path=directory) as stash:
            stash(value)
        with stashed("arrays", path=directory) as stash:
            stash(None)

    assert not stash.was_empty, error()
    assert np.array_equal(stash.value["samples"], value["samples"]), error()
    assert stash.value["series"] == value["series"], error()


@TestScenario
def check_empty_with_clause(self):
    """Check that a with block that stashes nothing has no value."""
    with tempfile.TemporaryDirectory() as directory:
        with stashed("empty with", path=directory) as stash:
            pass

    with raises(ValueError):
        stash.value


@TestScenario
def check_using_hash(self):
    """Check using stashed.hash to get a unique stash key."""
    assert stashed.hash([1, 2, 3]) == stashed.hash([1, 2, 3]), error()
    assert stashed.hash([1, 2, 3]) != stashed.hash([3, 2, 3]), error()

    with tempfile.TemporaryDirectory() as directory:
        with stashed("value", key=stashed.hash([1, 2, 3]), path=directory) as stash:
            stash("hello there")
        value1 = stash.value

        with stashed("value", key=stashed.hash([1, 2, 3]), path=directory) as stash2:
            stash2("hello there2")
        assert value1 == stash2.value, error()

        with stashed("value", key=stashed.hash([3, 2, 3]), path=directory) as stash3:
            stash3("hello there2")
        assert stash3.value == "hello there2", error()


@TestScenario
def check_invalid_stash(self):
    """Check errors for unreadable stash files and invalid names."""
    with tempfile.TemporaryDirectory() as directory:
        with open(os.path.join(directory, "broken.stash"), "w") as fd:
            fd.write("not a stash")
        with raises(StashError):
            with stashed("broken", path=directory) as stash:
                stash(1)

        with stashed("other", path=directory, encoder=stashed.encoder.json) as stash:
            stash(1)
        with raises(StashError):
            with stashed("other", path=directory, encoder=stashed.encoder.pickle) as stash:
                stash(1)

    with raises(ValidationError):
        stashed("...")


@TestFeature
@Name("stash")
def feature(self):
    """Check stashing of expensive results."""
    for scenario in loads(current_module(), Scenario):
        scenario()

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
import re
import os
import sys
import json
import base64
import pickle
import hashlib
import logging
import tempfile
import weakref
import threading

import jsonpickle
import jsonpickle.ext.numpy as jsonpickle_numpy

from .core import ToolkitError, ValidationError

__all__ = ["stashed", "Hash", "StashError"]

logger = logging.getLogger(__name__)

jsonpickle_numpy.register_handlers()


class StashRegistry:
    def __init__(self):
        self.lock = threading.Lock()
        self.book = weakref.WeakValueDictionary()

    def __enter__(self):
        self.lock.acquire()
        return self

    def __exit__(self, exc_type, exc_value, exc_tb):
        self.lock.release()


StashLock = threading.Lock
stash_registry = StashRegistry()


def make_filename(name):
    """Make valid file name."""
    name = re.sub(r"[^0-9a-zA-Z._-]", "_", str(name))
    if not name.strip("._"):
        raise ValidationError(f"can't convert '{name}' to a stash file name")
    return name


class StashError(ToolkitError):
    """Stash file can't be read or value can't be encoded."""

    pass


class StashValueFound(Exception):
    """Exception raised to skip the body
    of a `with` block when the value is stashed.
    """

    pass


class JsonEncoder:
    name = "json"

    @staticmethod
    def dumps(value):
        return json.dumps(value, sort_keys=True)

    @staticmethod
    def loads(text):
        return json.loads(text)


class JsonPickleEncoder:
    name = "jsonpickle"

    @staticmethod
    def dumps(value):
        return jsonpickle.encode(value, keys=True)

    @staticmethod
    def loads(text):
        return jsonpickle.decode(text, keys=True)


class PickleEncoder:
    name = "pickle"

    @staticmethod
    def dumps(value):
        return base64.b64encode(pickle.dumps(value)).decode("ascii")

    @staticmethod
    def loads(text):
        return pickle.loads(base64.b64decode(text))


class Hash:
    """Class that provides hashing for any object the encoder can encode."""

    def __init__(self, encoder=pickle):
        self._encoder = encoder

    @staticmethod
    def encoder(encoder):
        """Return hash object with custom encoder."""
        return Hash(encoder=encoder)

    def __call__(self, *args, **kwargs):
        """Return hash of the arguments."""
        data = self._encoder.dumps([args, kwargs])
        if isinstance(data, str):
            data = data.encode("utf-8")
        return hashlib.sha1(data).hexdigest()


class stashed:
    """Context manager for stashed results."""

    class encoder:
        """Available encoders."""

        pass

    def __init__(self, name, key=None, path=None, encoder=None, use_stash=True):
        """Stash a result so that later runs with the same key reuse it.

        Stash files have format:

            <path>/<name>.<key>.stash

        When the file exists the body of the `with` block is skipped
        and `value` returns the stored result.

        :param name: name of the stashed value
        :param key: stash key, usually `stashed.hash(...)` of the inputs, default: None
        :param path: stash directory, default: `./stash`
        :param encoder: value encoder, default: jsonpickle
        :param use_stash: use stash, default: `True`
        """
        self.name = make_filename(name)
        self.key = None if key is None else make_filename(str(key).lower())
        self.encoder = encoder if encoder is not None else stashed.encoder.jsonpickle
        self.path = os.path.normpath(path if path is not None else os.path.join(os.getcwd(), "stash"))
        self._open = False
        self._is_used = bool(use_stash)
        self._was_empty = True

        filename = self.name
        if self.key is not None:
            filename += "." + self.key
        self.filename = os.path.join(self.path, filename + ".stash")

        with stash_registry:
            lock = stash_registry.book.get(self.filename)
            if lock is None:
                lock = StashLock()
                stash_registry.book[self.filename] = lock
            self._lock = lock

    def _check_stash(self):
        """Check stash."""
        if not self.is_used or not os.path.exists(self.filename):
            return
        try:
            with open(self.filename, "r", encoding="utf-8") as fd:
                document = json.load(fd)
            if document.get("encoder") != self.encoder.name:
                raise StashError(f"stash {self.filename} uses encoder '{document.get('encoder')}'")
            self._value = self.encoder.loads(document["value"])
        except (OSError, ValueError, KeyError) as exc:
            raise StashError(f"can't read stash {self.filename}: {exc}") from exc
        self._was_empty = False
        logger.debug(f"reusing stashed {self.name} from {self.filename}")

    def __skip__(self, *args):
        sys.settrace(self._trace)
        raise StashValueFound()

    def __enter__(self):
        self._open = True
        self._lock.acquire()
        try:
            self._check_stash()
        except BaseException:
            self._lock.release()
            self._open = False
            raise

        if hasattr(self, "_value"):
            self._trace = sys.gettrace()
            sys.settrace(self.__skip__)

        return self

    def __call__(self, value):
        """Stash value."""
        if not self._open:
            raise RuntimeError("stash is closed; use `with` statement")

        if hasattr(self, "_value"):
            raise ValueError("value already set")

        self._value = value

        if not self.is_used:
            return

        try:
            document = {"name": self.name, "key": self.key, "encoder": self.encoder.name,
                "value": self.encoder.dumps(value)}
        except Exception as exc:
            raise StashError(f"{self.name} can't be encoded: {exc}") from exc

        os.makedirs(self.path, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as file:
            json.dump(document, file)
        os.replace(tmp, self.filename)

    def __exit__(self, exc_type, exc_value, exc_tb):
        try:
            if exc_value is not None:
                if isinstance(exc_value, StashValueFound):
                    return True
                return False
        finally:
            self._lock.release()
            self._open = False

    @property
    def is_used(self):
        """Return True if stash is used."""
        return self._is_used

    @property
    def was_empty(self):
        """Return True if stash was empty."""
        return self._was_empty

    @property
    def value(self):
        """Stashed value."""
        if hasattr(self, "_value"):
            return self._value
        raise ValueError("not found")


# available encoders
stashed.encoder.json = JsonEncoder
stashed.encoder.jsonpickle = JsonPickleEncoder
stashed.encoder.pickle = PickleEncoder

# set hash
stashed.hash = Hash()

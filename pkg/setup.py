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
from setuptools import setup

with open("README.md", "r", encoding="utf-8") as fd:
    long_description = fd.read()

setup(
    name="epiflows.covid",
    version="1.0.0",
    description="Epiflows - COVID-19 incidence analysis toolkit",
    author="Epiflows Authors",
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: POSIX :: Linux",
        "Topic :: Scientific/Engineering :: Medical Science Apps.",
    ],
    python_requires=">=3.8",
    license="Apache-2.0",
    packages=[
        "epiflows.covid",
    ],
    package_data={"epiflows.covid": ["data/*.csv"]},
    zip_safe=False,
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.8",
        "pandas>=1.4",
        "jsonpickle>=2.0",
        "tomli>=1.1; python_version<'3.11'",
    ],
    extras_require={"dev": ["testflows.core>=1.7", "testflows.asserts"]},
    entry_points={"console_scripts": ["epiflows-covid=epiflows.covid.cli:main"]},
)

#!/usr/bin/env python

# PySatNet
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


try:
    from setuptools import setup
except ImportError:
    from distutils.core import setup


setup(
    name='PySatNet',
    version='1',
    description='Attention CNNs for satellite land-cover classification on a numpy autodiff engine',
    long_description='Baseline, CBAM and balanced spatial/spectral attention networks with their training '
                     'and evaluation machinery, built on a small reverse-mode autodiff library.',
    author='PySatNet developers',
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    packages=[
        'pysatnet',
        'pysatnet.analyzers',
        'pysatnet.attention',
        'pysatnet.core',
        'pysatnet.datasets',
        'pysatnet.models',
        'pysatnet.regularization',
        'pysatnet.training',
        'pysatnet.utils',
    ],
    python_requires='>=3.8',
    install_requires=[
        "numpy>=1.20",
        "pandas",
        "click",
        "pyyaml",
        "tabulate",
        "Pillow",
        "python-dotenv",
        "sentry_sdk",
    ],
    entry_points={
        'console_scripts': ['pysatnet=pysatnet.cli:CliMain'],
    },
)

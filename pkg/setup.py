#!/usr/bin/env python

import os
import sys

from setuptools import setup


def setup_package():
    src_path = os.path.dirname(os.path.abspath(sys.argv[0]))
    old_path = os.getcwd()
    os.chdir(src_path)
    sys.path.insert(0, src_path)

    try:
        os.environ["__IN-SETUP"] = "1"  # ensures only version is imported
        from cognatesim import __version__ as version

        # See also setup.cfg
        setup(
            name="cognatesim",
            version=version,
            packages=["cognatesim"],
            license="BSD-3-Clause",
            extras_require={"testing": ["pytest>=2.7", "pytest-cov"]},
            install_requires=[
                "numpy>=1.17",
                "pandas>=0.23",
                "scipy>=1.4",
                "dendropy>=4.5",
            ],
            entry_points={"console_scripts": ["cognatesim = cognatesim.cli:main"]},
        )
    finally:
        del sys.path[0]
        os.chdir(old_path)
    return


if __name__ == "__main__":
    setup_package()

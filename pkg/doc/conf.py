# Sphinx configuration for the cognatesim documentation.

import os
import re
import sys

sys.path.insert(0, os.path.abspath(".."))

import sphinx_rtd_theme  # noqa
from cognatesim import __version__ as release  # noqa

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.viewcode",
    "numpydoc",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"
exclude_patterns = ["_build"]

project = "cognatesim"
version = re.match(r"^\d+(\.\d+)*", release).group()

# `Tree`, `numpy.ndarray` and friends resolve without an explicit role
default_role = "any"
pygments_style = "sphinx"
numpydoc_show_class_members = False

html_theme = "sphinx_rtd_theme"
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
html_static_path = []
htmlhelp_basename = "cognatesimdoc"

intersphinx_mapping = {
    "python": ("https://docs.python.org/3/", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "pandas": ("https://pandas.pydata.org/pandas-docs/stable/", None),
}

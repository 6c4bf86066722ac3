# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

sys.path.insert(0, os.path.abspath("../src"))


# -- Project information -----------------------------------------------------

project = "PyConformalTrain"
copyright = "2024, PyConformalTrain developers"
author = "PyConformalTrain developers"

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
]

# -- Options for HTML output -------------------------------------------------

html_theme = "alabaster"

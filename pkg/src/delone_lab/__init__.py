"""Numerical laboratory for Delone-Bernoulli random Schroedinger operators.

Submodules:

* :mod:`~delone_lab.geometry`: Delone point sets and their transformations.
* :mod:`~delone_lab.hamiltonian`: grid operators with bumps and Bernoulli couplings.
* :mod:`~delone_lab.spectral`: eigensolvers and resolvent estimates.
* :mod:`~delone_lab.msa`: good boxes and good-scale Monte Carlo.
* :mod:`~delone_lab.ilse`: initial length-scale estimate and its constants.
* :mod:`~delone_lab.ucp`: one-dimensional unique continuation and lifting.
* :mod:`~delone_lab.cli`: the ``delone-lab`` command.
"""

__version__ = "0.1.0"

from .geometry import PointSet, Window, make_window, verify_delone  # noqa: E402
from .hamiltonian import GridSpec, SingleSitePotential  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .model import Model  # noqa: E402

__all__ = ["BACKEND", "GridSpec", "Model", "PointSet", "SingleSitePotential", "Window",
           "__version__", "make_window", "verify_delone"]

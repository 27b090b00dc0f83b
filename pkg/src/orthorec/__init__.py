"""Up- and downdating recurrence matrices and pencils of discrete orthogonal
polynomials and rational functions."""
from ._kernels import BACKEND

__version__ = "0.1.0"

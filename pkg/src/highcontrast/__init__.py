"""Numerical toolkit for one-dimensional high-contrast periodic operators.

The fibre operators of a periodic medium whose middle component has
stiffness ``eps**2`` are studied through explicit boundary triples on a
three-edge cycle, their M-matrices and Krein-type resolvent formulae, and
compared with a delta-prime Kronig-Penney effective model.
"""

from .core import (
    CellParams,
    EdgeFunction,
    Quasimomentum,
    SpectralPoint,
    StateVector,
    inner,
    make_cell,
    quasimomentum,
    spectral_point,
)
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"

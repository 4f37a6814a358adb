"""Gaussian free fields, the spherical model and the spin O(N) model on
discrete tori.

The package is organised in layers: ``lattice`` (geometry), ``spectral``
(eigenvalues and the real Hartley eigenbasis of the torus Laplacian),
``greens`` (Green's functions), ``mass`` (mass equation and regimes),
``samplers``, ``analysis`` and ``experiments``. ``cli`` exposes all of it on
the command line.

Convention: the Laplacian is ``-Δf(x) = 2d f(x) - Σ_{y~x} f(y)`` with no
``1/(2d)`` factor, so the critical inverse temperature in d = 3 is
``G_{Z^3}(0,0) ≈ 0.2527``.
"""

from .errors import ConfigError, DomainError, SchemaError
from .lattice import TorusLattice
from .spectral import SpectrumTable, build_spectrum, eigenvalue, from_modes, to_modes
from .greens import (
    GreenTable,
    dirichlet_green,
    harmonic_extension,
    massive_green,
    rw_green_oracle,
    zd_green,
    zd_green_series,
    zero_average_green,
)
from .mass import ModelParams, Regime, beta_c, solve_torus_mass, solve_zd_mass

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "SchemaError",
    "TorusLattice",
    "SpectrumTable",
    "build_spectrum",
    "eigenvalue",
    "to_modes",
    "from_modes",
    "GreenTable",
    "massive_green",
    "zero_average_green",
    "dirichlet_green",
    "harmonic_extension",
    "rw_green_oracle",
    "zd_green",
    "zd_green_series",
    "ModelParams",
    "Regime",
    "beta_c",
    "solve_torus_mass",
    "solve_zd_mass",
]

"""Mass equation and temperature regimes.

On the torus the mass ``m_n²`` attached to an inverse temperature β is the
unique positive root of

    Σ_w 1/(m² + η_w) = β n^d,        i.e. G_{Λ_n, m²}(0, 0) = β,

and on Z^d the analogous ``G_{Z^d, m²}(0, 0) = β``, solvable only for
β < β_c(d) = G_{Z^d}(0, 0).
"""

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize

from .errors import DomainError
from .greens import zd_green
from .lattice import TorusLattice
from .spectral import eigenvalue_grid


@lru_cache(maxsize=None)
def beta_c(d):
    """Critical inverse temperature ``G_{Z^d}(0,0)``; +inf for d <= 2."""
    if d <= 2:
        return np.inf
    return zd_green(d, 0.0)


class Regime(str, enum.Enum):
    HIGH_T = "HighT"
    CRITICAL = "Critical"
    LOW_T = "LowT"


TOL_C_FACTOR = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Lattice plus inverse temperature; the regime is derived from β_c(d)
    with tolerance ``tol_c = 1e-9 β_c``."""

    lattice: TorusLattice
    beta: float

    def __post_init__(self):
        if not self.beta >= 0:
            raise DomainError(f"beta must be nonnegative, got {self.beta}")

    @property
    def beta_c(self):
        return beta_c(self.lattice.dim)

    @property
    def tol_c(self):
        bc = self.beta_c
        return TOL_C_FACTOR * bc if np.isfinite(bc) else 0.0

    @property
    def regime(self):
        bc = self.beta_c
        if not np.isfinite(bc) or self.beta < bc - self.tol_c:
            return Regime.HIGH_T
        if self.beta > bc + self.tol_c:
            return Regime.LOW_T
        return Regime.CRITICAL


@dataclass(frozen=True)
class MassSolution:
    m_squared: float
    residual: float
    iterations: int
    bracket: tuple


def _spectrum_groups(lattice):
    eig, mult = np.unique(eigenvalue_grid(lattice), return_counts=True)
    return eig, mult.astype(float)


def solve_torus_mass(params, beta=None):
    """Solve ``G_{Λ_n, m²}(0,0) = β`` for m² > 0.

    Accepts a ``ModelParams`` or ``(lattice, beta)``. Bisection (geometric
    midpoints while the bracket spans decades) down to a relative width of
    1e-14, followed by three Newton steps with the exact derivative.
    """
    if beta is None:
        lattice, beta = params.lattice, params.beta
    else:
        lattice = params
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    eig, mult = _spectrum_groups(lattice)
    V = float(lattice.volume)

    def F(m2):
        return float(np.dot(mult, 1.0 / (m2 + eig))) / V - beta

    def dF(m2):
        return -float(np.dot(mult, 1.0 / (m2 + eig) ** 2)) / V

    lo = 0.5 / (beta * V)
    hi = 2.0 * max(4.0 * lattice.dim, 1.0 / beta)
    while F(lo) <= 0:
        lo *= 0.5
    while F(hi) >= 0:
        hi *= 2.0
    bracket = (lo, hi)
    it = 0
    while hi - lo > 1e-14 * hi and it < 2000:
        mid = np.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if F(mid) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    m2 = 0.5 * (lo + hi)
    for _ in range(3):
        step = F(m2) / dF(m2)
        if m2 - step > 0:
            m2 -= step
        it += 1
    res = abs(F(m2))
    return MassSolution(float(m2), float(res), it, bracket)


def solve_zd_mass(d, beta):
    """Solve ``G_{Z^d, m²}(0,0) = β``; requires β < β_c(d) for d >= 3."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    bc = beta_c(d)
    if beta >= bc:
        raise DomainError(f"no positive-mass solution for beta={beta} >= beta_c={bc}")

    def F(u):
        return zd_green(d, float(np.exp(u)), None) - beta

    hi = np.log(2.0 / beta)
    lo = np.log(1e-3)
    while F(lo) < 0:
        lo -= 10.0
        if lo < -690:
            raise DomainError("mass below floating point range")
    u = optimize.brentq(F, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.exp(u))

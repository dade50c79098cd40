"""Potentials, parameters and coordinate maps of the two-barrier composite model.

Two 1D particles of masses ``m1`` and ``m2`` hit the barriers ``alpha*V(x1)``
and ``3*V(x2)`` while bound to each other by a Gaussian well ``U(x2 - x1)``.
Everything here is analytic and vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

#: Gaussian well widths giving one, two and four bound states with ``A = 2``.
WELL_WIDTHS = {1: 1.0, 2: 1.961, 4: 3.162}

#: Coefficient of the barrier felt by the second particle.
SECOND_BARRIER = 3.0

#: Reference values used by the reproduction runs.
DEFAULT_PRESET = {
    "well_depth": 2.0,
    "m1": 1.0,
    "m2": 1.0,
    "rbar": -55.0,
    "sigma_R": 3.0,
    "e_cm": 1.0,
}

#: Bound-state energies of the intraparticle Hamiltonian for each preset.
REFERENCE_BOUND_ENERGIES = {
    1: (-0.955,),
    2: (-1.377, -0.372),
    4: (-1.590, -0.856, -0.308, -0.012),
}

#: Initial energy expectations of the reference wave packets.
REFERENCE_INITIAL_ENERGIES = {1: 0.05911, 2: -0.3631, 4: -0.5766}


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of one scenario (atomic units).

    ``well_width`` defaults to the preset width for ``n_channels``.
    """

    alpha: float = 3.0
    n_channels: int = 1
    well_depth: float = 2.0
    well_width: float | None = None
    m1: float = 1.0
    m2: float = 1.0
    rbar: float = -55.0
    sigma_R: float = 3.0
    e_cm: float = 1.0
    M: float = field(init=False)
    mu: float = field(init=False)

    def __post_init__(self):
        if self.n_channels not in WELL_WIDTHS:
            raise ValueError(f"n_channels must be one of {sorted(WELL_WIDTHS)}, got {self.n_channels}")
        if self.well_width is None:
            object.__setattr__(self, "well_width", WELL_WIDTHS[self.n_channels])
        for name in ("well_depth", "well_width", "m1", "m2", "sigma_R"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        for name in ("alpha", "rbar", "e_cm"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.e_cm < 0:
            raise ValueError(f"e_cm must be non-negative, got {self.e_cm}")
        object.__setattr__(self, "M", self.m1 + self.m2)
        object.__setattr__(self, "mu", self.m1 * self.m2 / (self.m1 + self.m2))

    @property
    def k_cm(self) -> float:
        """Mean center-of-mass momentum of the incident packet."""
        return math.sqrt(2.0 * self.M * self.e_cm)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


def preset_params(n_channels: int, alpha: float) -> ModelParams:
    """Parameters of the reference scenario for ``N = n_channels``."""
    return ModelParams(alpha=alpha, n_channels=n_channels, **DEFAULT_PRESET)


def barrier_v(x):
    """Barrier preceded by a well, ``x * exp(-x**2)``."""
    x = np.asarray(x, dtype=float)
    return x * np.exp(-x * x)


def barrier_v_prime(x):
    x = np.asarray(x, dtype=float)
    return (1.0 - 2.0 * x * x) * np.exp(-x * x)


def coupling_u(params: ModelParams, rho):
    """Attractive Gaussian coupling ``-A exp(-rho**2 / r_N**2)``."""
    rho = np.asarray(rho, dtype=float)
    return -params.well_depth * np.exp(-(rho / params.well_width) ** 2)


def coupling_u_prime(params: ModelParams, rho):
    rho = np.asarray(rho, dtype=float)
    r2 = params.well_width ** 2
    return 2.0 * params.well_depth * rho / r2 * np.exp(-rho * rho / r2)


def to_cm(params: ModelParams, x1, x2):
    """Particle coordinates to (center of mass, relative)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return (params.m1 * x1 + params.m2 * x2) / params.M, x2 - x1


def from_cm(params: ModelParams, R, rho):
    """(center of mass, relative) to particle coordinates."""
    R = np.asarray(R, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return R - params.mu / params.m1 * rho, R + params.mu / params.m2 * rho


def momenta_from_cm(params: ModelParams, P_R, P_rho):
    """Canonical momenta conjugate to (x1, x2) from those conjugate to (R, rho)."""
    P_R = np.asarray(P_R, dtype=float)
    P_rho = np.asarray(P_rho, dtype=float)
    return params.m1 / params.M * P_R - P_rho, params.m2 / params.M * P_R + P_rho


def momenta_to_cm(params: ModelParams, p1, p2):
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    return p1 + p2, (params.m1 * p2 - params.m2 * p1) / params.M


def barrier_pair(params: ModelParams, x1, x2):
    """The two barrier terms ``alpha*V(x1) + 3*V(x2)`` without the coupling."""
    return params.alpha * barrier_v(x1) + SECOND_BARRIER * barrier_v(x2)


def omega_cartesian(params: ModelParams, x1, x2):
    """Full 2D potential in particle coordinates."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return barrier_pair(params, x1, x2) + coupling_u(params, x2 - x1)


def omega_cm(params: ModelParams, R, rho):
    """Full 2D potential in (center of mass, relative) coordinates."""
    x1, x2 = from_cm(params, R, rho)
    return omega_cartesian(params, x1, x2)


def classical_force(params: ModelParams, x1, x2):
    """Analytic ``(-dOmega/dx1, -dOmega/dx2)``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    du = coupling_u_prime(params, x2 - x1)
    f1 = -params.alpha * barrier_v_prime(x1) + du
    f2 = -SECOND_BARRIER * barrier_v_prime(x2) - du
    return f1, f2


def classical_force_cm(params: ModelParams, R, rho):
    """Analytic ``(-dOmega/dR, -dOmega/drho)``."""
    x1, x2 = from_cm(params, R, rho)
    f1, f2 = classical_force(params, x1, x2)
    return f1 + f2, -params.mu / params.m1 * f1 + params.mu / params.m2 * f2

"""Uniform periodic grids shared by the eigensolver and the propagator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CARTESIAN = "cartesian"
CM_RELATIVE = "cm_relative"
FRAMES = (CARTESIAN, CM_RELATIVE)


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``x_min + i*dx`` for ``i < n_points``; ``x_max`` itself is excluded."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 64:
            raise ValueError(f"n_points must be >= 64, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def extent(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in numpy FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def is_pow2(self) -> bool:
        return self.n_points & (self.n_points - 1) == 0

    def index_of(self, value: float) -> int:
        return int(round((value - self.x_min) / self.dx))

    def contains_zero_symmetrically(self) -> bool:
        """True when ``0`` is a grid point and the grid is its own mirror image up to the periodic end."""
        i0 = (0.0 - self.x_min) / self.dx
        return math.isclose(self.x_min, -self.x_max) and self.n_points % 2 == 0 and abs(i0 - round(i0)) < 1e-9

    def same_as(self, other: "Grid1D") -> bool:
        return (
            self.n_points == other.n_points
            and math.isclose(self.x_min, other.x_min, abs_tol=1e-12)
            and math.isclose(self.x_max, other.x_max, abs_tol=1e-12)
        )


@dataclass(frozen=True)
class Grid2D:
    """Product of two uniform grids tagged with the coordinate frame they sample.

    In the ``cm_relative`` frame ``axis0`` is ``R`` and ``axis1`` is ``rho``;
    in the ``cartesian`` frame they are ``x1`` and ``x2``.
    """

    axis0: Grid1D
    axis1: Grid1D
    frame: str = CM_RELATIVE

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"frame must be one of {FRAMES}, got {self.frame!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.axis0.n_points, self.axis1.n_points)

    @property
    def dA(self) -> float:
        return self.axis0.dx * self.axis1.dx

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis0.x, self.axis1.x, indexing="ij")

    def kinetic_masses(self, params) -> tuple[float, float]:
        if self.frame == CM_RELATIVE:
            return params.M, params.mu
        return params.m1, params.m2

    def kinetic_energy(self, params) -> np.ndarray:
        """Kinetic energy on the 2D wavenumber grid (FFT order)."""
        m0, m1 = self.kinetic_masses(params)
        return self.axis0.k[:, None] ** 2 / (2.0 * m0) + self.axis1.k[None, :] ** 2 / (2.0 * m1)

    def particle_coordinates(self, params) -> tuple[np.ndarray, np.ndarray]:
        """``(x1, x2)`` at every grid point regardless of frame."""
        a, b = self.mesh()
        if self.frame == CARTESIAN:
            return a, b
        from .model import from_cm

        return from_cm(params, a, b)

    def metadata(self) -> dict:
        return {
            "frame": self.frame,
            "axis0": [self.axis0.x_min, self.axis0.x_max, self.axis0.n_points],
            "axis1": [self.axis1.x_min, self.axis1.x_max, self.axis1.n_points],
        }

    @classmethod
    def from_metadata(cls, meta: dict) -> "Grid2D":
        return cls(Grid1D(*meta["axis0"]), Grid1D(*meta["axis1"]), meta["frame"])


def default_tdse_grid() -> Grid2D:
    return Grid2D(Grid1D(-130.0, 90.0, 2048), Grid1D(-24.0, 24.0, 256), CM_RELATIVE)


def default_eigen_grid() -> Grid1D:
    return Grid1D(-150.0, 150.0, 2048)

"""Classical counterpart: Forest-Ruth trajectories and Wigner-sampled ensembles.

Integration runs in (R, rho) with ``H = P_R^2/(2M) + P_rho^2/(2 mu) + Omega``.
The ensemble kernel is compiled with numba; :func:`forest_ruth` is a plain
numpy version of the same composition used for single states and tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .io import write_density
from .model import (
    REFERENCE_INITIAL_ENERGIES,
    SECOND_BARRIER,
    ModelParams,
    classical_force_cm,
    from_cm,
    momenta_from_cm,
    omega_cartesian,
    omega_cm,
)
from .tdse import COLUMNS, ObservableSeries, SHIFT

_THETA = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
#: Forest-Ruth drift and kick coefficients (drift first, four drifts, three kicks).
DRIFT_COEFFS = (0.5 * _THETA, 0.5 * (1.0 - _THETA), 0.5 * (1.0 - _THETA), 0.5 * _THETA)
KICK_COEFFS = (_THETA, 1.0 - 2.0 * _THETA, _THETA)

# exp(-64) makes barrier and coupling forces vanish beyond these arguments
_CUTOFF = 8.0

QUADRANTS = ("I", "II", "III", "IV")


@dataclass
class PhaseSpacePoint:
    R: float
    rho: float
    P_R: float
    P_rho: float

    def as_array(self) -> np.ndarray:
        return np.array([self.R, self.rho, self.P_R, self.P_rho])


@dataclass
class EnsembleConfig:
    n_particles: int = 10 ** 6
    seed: int = 0
    sigma_rho: float = 1.5
    dt: float = 5e-3
    window: float = 100.0
    bins: int = 512

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if not self.sigma_rho > 0:
            raise ValueError("sigma_rho must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass
class PhaseSpaceEnsemble:
    R: np.ndarray
    rho: np.ndarray
    P_R: np.ndarray
    P_rho: np.ndarray
    seed: int | None = None
    t: float = 0.0

    def __len__(self):
        return len(self.R)

    def copy(self) -> "PhaseSpaceEnsemble":
        return PhaseSpaceEnsemble(self.R.copy(), self.rho.copy(), self.P_R.copy(), self.P_rho.copy(),
                                  self.seed, self.t)


def classical_hamiltonian(point, params: ModelParams):
    """``P_R^2/(2M) + P_rho^2/(2 mu) + Omega(R, rho)``; vectorizes over array fields."""
    return (np.asarray(point.P_R) ** 2 / (2.0 * params.M) + np.asarray(point.P_rho) ** 2 / (2.0 * params.mu)
            + omega_cm(params, point.R, point.rho))


def classical_hamiltonian_cartesian(params: ModelParams, x1, x2, p1, p2):
    return (np.asarray(p1) ** 2 / (2.0 * params.m1) + np.asarray(p2) ** 2 / (2.0 * params.m2)
            + omega_cartesian(params, x1, x2))


def forest_ruth(q, p, dt: float, force, inv_mass, n_steps: int = 1):
    """Fourth-order Forest-Ruth composition for separable ``H = p^2/2m + V(q)``.

    ``q`` and ``p`` are sequences of arrays (one per degree of freedom),
    ``force(*q)`` returns the matching sequence of forces. Returns new lists.
    """
    q = [np.array(x, dtype=float) for x in q]
    p = [np.array(x, dtype=float) for x in p]
    for _ in range(n_steps):
        for j in range(3):
            for i in range(len(q)):
                q[i] = q[i] + DRIFT_COEFFS[j] * dt * inv_mass[i] * p[i]
            f = force(*q)
            for i in range(len(p)):
                p[i] = p[i] + KICK_COEFFS[j] * dt * f[i]
        for i in range(len(q)):
            q[i] = q[i] + DRIFT_COEFFS[3] * dt * inv_mass[i] * p[i]
    return q, p


def symplectic_step(point: PhaseSpacePoint, dt: float, params: ModelParams, force=None) -> PhaseSpacePoint:
    """One Forest-Ruth step of the model Hamiltonian in (R, rho).

    ``force(R, rho) -> (F_R, F_rho)`` replaces the model force if given.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    force = force or (lambda R, rho: classical_force_cm(params, R, rho))
    (R, rho), (P_R, P_rho) = forest_ruth(
        (point.R, point.rho), (point.P_R, point.P_rho), dt, force, (1.0 / params.M, 1.0 / params.mu)
    )
    return PhaseSpacePoint(R[()], rho[()], P_R[()], P_rho[()])


@njit(cache=True)
def _kick_forces(R, rho, alpha, beta, depth, inv_r2, c1, c2):
    x1 = R - c1 * rho
    x2 = R + c2 * rho
    f1 = 0.0
    f2 = 0.0
    if abs(x1) < _CUTOFF:
        f1 = -alpha * (1.0 - 2.0 * x1 * x1) * math.exp(-x1 * x1)
    if abs(x2) < _CUTOFF:
        f2 = -beta * (1.0 - 2.0 * x2 * x2) * math.exp(-x2 * x2)
    s = rho * rho * inv_r2
    if s < _CUTOFF * _CUTOFF:
        du = 2.0 * depth * rho * inv_r2 * math.exp(-s)
        f1 += du
        f2 -= du
    return f1 + f2, -c1 * f1 + c2 * f2


@njit(cache=True)
def _integrate_kernel(R, rho, P_R, P_rho, n_steps, dt, alpha, beta, depth, inv_r2, c1, c2,
                      inv_M, inv_mu, a1, a2, a3, a4, b1, b2, b3):
    for j in range(R.shape[0]):
        r = R[j]
        q = rho[j]
        pr = P_R[j]
        pq = P_rho[j]
        for _ in range(n_steps):
            r += a1 * dt * inv_M * pr
            q += a1 * dt * inv_mu * pq
            fr, fq = _kick_forces(r, q, alpha, beta, depth, inv_r2, c1, c2)
            pr += b1 * dt * fr
            pq += b1 * dt * fq
            r += a2 * dt * inv_M * pr
            q += a2 * dt * inv_mu * pq
            fr, fq = _kick_forces(r, q, alpha, beta, depth, inv_r2, c1, c2)
            pr += b2 * dt * fr
            pq += b2 * dt * fq
            r += a3 * dt * inv_M * pr
            q += a3 * dt * inv_mu * pq
            fr, fq = _kick_forces(r, q, alpha, beta, depth, inv_r2, c1, c2)
            pr += b3 * dt * fr
            pq += b3 * dt * fq
            r += a4 * dt * inv_M * pr
            q += a4 * dt * inv_mu * pq
        R[j] = r
        rho[j] = q
        P_R[j] = pr
        P_rho[j] = pq


def integrate(ensemble: PhaseSpaceEnsemble, params: ModelParams, n_steps: int, dt: float) -> PhaseSpaceEnsemble:
    """Advance every particle ``n_steps`` Forest-Ruth steps in place."""
    a = DRIFT_COEFFS
    b = KICK_COEFFS
    for name in ("R", "rho", "P_R", "P_rho"):
        arr = getattr(ensemble, name)
        if arr.dtype != np.float64 or not arr.flags.c_contiguous:
            setattr(ensemble, name, np.ascontiguousarray(arr, dtype=np.float64))
    _integrate_kernel(
        ensemble.R, ensemble.rho, ensemble.P_R, ensemble.P_rho, int(n_steps), float(dt),
        float(params.alpha), SECOND_BARRIER, float(params.well_depth), 1.0 / params.well_width ** 2,
        params.mu / params.m1, params.mu / params.m2, 1.0 / params.M, 1.0 / params.mu,
        a[0], a[1], a[2], a[3], b[0], b[1], b[2],
    )
    ensemble.t += n_steps * dt
    return ensemble


def quadrant_of(x1: float, x2: float) -> str:
    if x1 > 0 and x2 > 0:
        return "I"
    if x1 < 0 and x2 > 0:
        return "II"
    if x1 < 0 and x2 < 0:
        return "III"
    return "IV"


def diagonal_launch_point(params: ModelParams, energy: float | None = None) -> PhaseSpacePoint:
    """Both particles at ``Rbar`` with equal momenta giving total energy ``energy``.

    ``energy`` defaults to the reference initial energy for ``n_channels``.
    """
    if energy is None:
        energy = REFERENCE_INITIAL_ENERGIES[params.n_channels]
    kinetic = energy - float(omega_cartesian(params, params.rbar, params.rbar))
    if kinetic < 0:
        raise ValueError("initial energy is below the potential at the launch point")
    # p1 = p2 = p with p^2 (1/(2 m1) + 1/(2 m2)) = kinetic
    p = math.sqrt(kinetic / (0.5 / params.m1 + 0.5 / params.m2))
    return PhaseSpacePoint(params.rbar, 0.0, 2.0 * p, (params.m1 * p - params.m2 * p) / params.M)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray  # columns R, rho, P_R, P_rho
    energies: np.ndarray
    params: ModelParams

    @property
    def final(self) -> PhaseSpacePoint:
        return PhaseSpacePoint(*self.states[-1])

    def particle_positions(self):
        return from_cm(self.params, self.states[:, 0], self.states[:, 1])

    @property
    def final_quadrant(self) -> str:
        x1, x2 = from_cm(self.params, self.states[-1, 0], self.states[-1, 1])
        return quadrant_of(float(x1), float(x2))

    def relative_energy_drift(self) -> float:
        return float(np.max(np.abs(self.energies - self.energies[0])) / abs(self.energies[0]))


def single_trajectory(params: ModelParams, t_final: float = 150.0, dt: float = 1e-3,
                      start: PhaseSpacePoint | None = None, record_every: float = 0.5) -> TrajectoryRecord:
    """Integrate one trajectory (by default the diagonal launch) and record it."""
    start = start or diagonal_launch_point(params)
    ens = PhaseSpaceEnsemble(*(np.array([v]) for v in (start.R, start.rho, start.P_R, start.P_rho)))
    n_total = int(round(t_final / dt))
    chunk = max(1, int(round(record_every / dt)))
    times, states = [0.0], [start.as_array()]
    done = 0
    while done < n_total:
        n = min(chunk, n_total - done)
        integrate(ens, params, n, dt)
        done += n
        times.append(done * dt)
        states.append(np.array([ens.R[0], ens.rho[0], ens.P_R[0], ens.P_rho[0]]))
    states = np.array(states)
    energies = classical_hamiltonian(PhaseSpacePoint(*states.T), params)
    return TrajectoryRecord(np.array(times), states, energies, params)


def wigner_sample(config: EnsembleConfig, params: ModelParams) -> PhaseSpaceEnsemble:
    """Independent normal draws matching the Gaussian Wigner function of the initial packet."""
    rng = np.random.default_rng(config.seed)
    n = config.n_particles
    s2 = math.sqrt(2.0)
    R = rng.normal(params.rbar, params.sigma_R / s2, n)
    rho = rng.normal(0.0, config.sigma_rho / s2, n)
    P_R = rng.normal(params.k_cm, 1.0 / (s2 * params.sigma_R), n)
    P_rho = rng.normal(0.0, 1.0 / (s2 * config.sigma_rho), n)
    return PhaseSpaceEnsemble(R, rho, P_R, P_rho, seed=config.seed)


def region_counts(ensemble: PhaseSpaceEnsemble, params: ModelParams) -> dict:
    """Integer particle counts in the quadrant and shifted regions."""
    x1, x2 = from_cm(params, ensemble.R, ensemble.rho)
    return {
        "P_T": int(np.count_nonzero((x1 > 0) & (x2 > 0))),
        "P_D": int(np.count_nonzero(((x1 < 0) & (x2 > 0)) | ((x1 > 0) & (x2 < 0)))),
        "P_R": int(np.count_nonzero((x1 < 0) & (x2 < 0))),
        "p_t": int(np.count_nonzero((x1 > SHIFT) & (x2 > SHIFT))),
        "p_d": int(np.count_nonzero(((x1 < -SHIFT) & (x2 > SHIFT)) | ((x1 > SHIFT) & (x2 < -SHIFT)))),
        "p_r": int(np.count_nonzero((x1 < -SHIFT) & (x2 < -SHIFT))),
        "II": int(np.count_nonzero((x1 < 0) & (x2 > 0))),
        "IV": int(np.count_nonzero((x1 > 0) & (x2 < 0))),
    }


def _observe(ensemble: PhaseSpaceEnsemble, params: ModelParams) -> tuple:
    n = len(ensemble)
    c = region_counts(ensemble, params)
    p = [c[k] / n for k in ("P_T", "P_D", "P_R", "p_t", "p_d", "p_r")]
    p_s = (n - c["p_t"] - c["p_d"] - c["p_r"]) / n
    return (ensemble.t, 1.0, *p, p_s, 0.0)


@dataclass
class EnsembleResult:
    series: ObservableSeries
    histogram: np.ndarray  # particle counts per (x1, x2) bin
    window: float
    bins: int
    overflow: int
    counts: dict
    final: PhaseSpaceEnsemble
    initial_energy: np.ndarray
    final_energy: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_particles(self) -> int:
        return len(self.final)

    @property
    def density(self) -> np.ndarray:
        """Normalized probability density (per unit area) over the histogram window."""
        width = 2.0 * self.window / self.bins
        return self.histogram / (self.n_particles * width * width)

    def probabilities(self) -> dict:
        n = self.n_particles
        return {k: v / n for k, v in self.counts.items()}

    def energy_drift(self) -> np.ndarray:
        """Per-particle ``|H(t) - H(0)| / max(|H(0)|, 1)``."""
        return np.abs(self.final_energy - self.initial_energy) / np.maximum(np.abs(self.initial_energy), 1.0)

    def series_csv(self, path, metadata: dict | None = None):
        from .io import write_csv

        rows = [r + ("classical",) for r in self.series.records]
        return write_csv(path, COLUMNS + ("tag",), rows, metadata)

    def export_density(self, path, log_scale: bool = False, metadata: dict | None = None, floor: float = 1e-30):
        density = self.density
        if log_scale:
            density = np.log10(np.maximum(density, floor))
        meta = dict(metadata or {})
        meta.update({
            "frame": "cartesian",
            "axis0": [-self.window, self.window, self.bins],
            "axis1": [-self.window, self.window, self.bins],
            "cells": "histogram bins; axis values are bin edges",
            "time": self.final.t,
            "log_scale": log_scale,
            "kind": "classical",
            "overflow": self.overflow,
            "n_particles": self.n_particles,
        })
        return write_density(path, density, meta)


def run_ensemble(ensemble: PhaseSpaceEnsemble, params: ModelParams, t_final: float = 150.0, dt: float = 5e-3,
                 record_every: float | None = None, window: float = 100.0, bins: int = 512) -> EnsembleResult:
    """Integrate a copy of ``ensemble`` to ``t_final`` and histogram the final positions.

    Probabilities are exact fractions of the ensemble; particles outside the
    histogram window are reported as ``overflow`` but still counted.
    """
    ens = ensemble.copy()
    e0 = classical_hamiltonian(ens, params)
    n_total = int(round((t_final - ens.t) / dt))
    chunk = n_total if not record_every else max(1, int(round(record_every / dt)))
    series = ObservableSeries(include_absorbed=False)
    series.append(_observe(ens, params))
    done = 0
    while done < n_total:
        n = min(chunk, n_total - done)
        integrate(ens, params, n, dt)
        done += n
        series.append(_observe(ens, params))
    e1 = classical_hamiltonian(ens, params)
    x1, x2 = from_cm(params, ens.R, ens.rho)
    hist, _, _ = np.histogram2d(x1, x2, bins=bins, range=[[-window, window], [-window, window]])
    overflow = len(ens) - int(hist.sum())
    return EnsembleResult(series, hist.astype(np.int64), window, bins, overflow, region_counts(ens, params),
                          ens, e0, e1, {"dt": dt, "seed": ensemble.seed})


def cartesian_trajectory(params: ModelParams, start: PhaseSpacePoint, t_final: float, dt: float):
    """Integrate in particle coordinates; returns the final state mapped back to (R, rho)."""
    from .model import classical_force, momenta_to_cm, to_cm

    x1, x2 = from_cm(params, start.R, start.rho)
    p1, p2 = momenta_from_cm(params, start.P_R, start.P_rho)
    n = int(round(t_final / dt))
    (x1, x2), (p1, p2) = forest_ruth(
        (x1, x2), (p1, p2), dt, lambda a, b: classical_force(params, a, b), (1.0 / params.m1, 1.0 / params.m2), n
    )
    R, rho = to_cm(params, x1, x2)
    P_R, P_rho = momenta_to_cm(params, p1, p2)
    return PhaseSpacePoint(float(R), float(rho), float(P_R), float(P_rho))

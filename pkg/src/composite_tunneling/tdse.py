"""Split-operator propagation of the composite wave packet.

The default frame is (R, rho) with kinetic masses ``M`` and ``mu``, so the
kinetic propagator is diagonal on the 2D FFT grid. Quadrant probabilities
are always taken over particle-coordinate regions, mapped into whichever
frame the grid samples.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .grids import CARTESIAN, CM_RELATIVE, Grid1D, Grid2D, default_tdse_grid
from .io import write_csv, write_density
from .model import ModelParams, omega_cartesian

COLUMNS = ("t", "norm", "P_T", "P_D", "P_R", "p_t", "p_d", "p_r", "p_s", "absorbed")
REGIONS = ("P_T", "P_D", "P_R", "p_t", "p_d", "p_r")
SHIFT = 3.0

#: Largest potential phase ``dt * max|V|`` accepted per step.
MAX_POTENTIAL_PHASE = 0.5

_UNIT_MASSES = ModelParams()
_WORKERS = os.cpu_count() or 1


class NormIncreaseError(RuntimeError):
    """The propagated norm grew, which a unitary-plus-absorber scheme cannot do."""


@dataclass
class AbsorbingMask:
    """Per-step damping factors in ``[0, 1]``; exactly 1 away from the edges."""

    values: np.ndarray
    width0: float
    width1: float
    profile: str = "cos2"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all((v >= 0.0) & (v <= 1.0)):
            raise ValueError("absorbing mask values must lie in [0, 1]")
        self.values = v


#: Exponent applied to the per-step ``sin^2`` ramp; 1 gives the bare ramp.
ABSORBER_POWER = 0.1


def _edge_ramp(axis: Grid1D, width: float, power: float) -> np.ndarray:
    n = axis.n_points
    i = np.arange(n)
    dist = np.minimum(i, n - 1 - i) * axis.dx
    ramp = np.ones(n)
    if width > 0:
        inside = dist < width
        ramp[inside] = np.sin(0.5 * np.pi * dist[inside] / width) ** (2.0 * power)
    return ramp


def absorbing_mask(grid: Grid2D, width0: float = 15.0, width1: float = 6.0,
                   power: float = ABSORBER_POWER) -> AbsorbingMask:
    """``(sin^2)^power`` ramps of the given widths on both edges of each axis.

    The mask multiplies the wavefunction every step, so the bare ``sin^2``
    ramp acts as a steep absorbing wall; a small ``power`` spreads the
    absorption over the whole layer and keeps reflection low.
    """
    for w, axis in ((width0, grid.axis0), (width1, grid.axis1)):
        if w < 0 or 2 * w >= axis.extent:
            raise ValueError(f"absorber width {w} does not fit an axis of extent {axis.extent}")
    if not power > 0:
        raise ValueError("absorber power must be positive")
    values = _edge_ramp(grid.axis0, width0, power)[:, None] * _edge_ramp(grid.axis1, width1, power)[None, :]
    return AbsorbingMask(values, width0, width1, profile=f"sin2^{power:g}")


def no_absorber(grid: Grid2D) -> AbsorbingMask:
    return AbsorbingMask(np.ones(grid.shape), 0.0, 0.0, profile="none")


@dataclass
class Wavefunction2D:
    psi: np.ndarray
    grid: Grid2D
    t: float = 0.0
    absorbed: float = 0.0
    absorbed_regions: np.ndarray = field(default_factory=lambda: np.zeros(len(REGIONS)))

    def density(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density()) * self.grid.dA)

    def copy(self) -> "Wavefunction2D":
        return Wavefunction2D(self.psi.copy(), self.grid, self.t, self.absorbed, self.absorbed_regions.copy())

    def conj(self) -> "Wavefunction2D":
        out = self.copy()
        out.psi = np.conj(out.psi)
        return out

    def overlap(self, other: "Wavefunction2D") -> complex:
        return complex(np.vdot(self.psi, other.psi) * self.grid.dA)


@dataclass
class ObservableSeries:
    """Time-stamped observables, one row per record in ``COLUMNS`` order."""

    records: list = field(default_factory=list)
    include_absorbed: bool = True

    def append(self, row):
        self.records.append(tuple(float(v) for v in row))

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        j = COLUMNS.index(name)
        return np.array([r[j] for r in self.records])

    def last(self) -> dict:
        return dict(zip(COLUMNS, self.records[-1]))

    def at(self, t: float) -> dict:
        times = self.column("t")
        j = int(np.argmin(np.abs(times - t)))
        return dict(zip(COLUMNS, self.records[j]))

    def to_csv(self, path, metadata: dict | None = None):
        return write_csv(path, COLUMNS, self.records, metadata)


@functools.lru_cache(maxsize=8)
def _region_weights(grid: Grid2D, m1: float, m2: float, subsamples: int) -> np.ndarray:
    """Fraction of each grid cell inside the six regions, by sub-cell sampling."""
    params = ModelParams(m1=m1, m2=m2)
    a, b = grid.mesh()
    offsets = ((np.arange(subsamples) + 0.5) / subsamples - 0.5)
    weights = np.zeros((len(REGIONS),) + grid.shape)
    for oa in offsets * grid.axis0.dx:
        for ob in offsets * grid.axis1.dx:
            if grid.frame == CARTESIAN:
                x1, x2 = a + oa, b + ob
            else:
                from .model import from_cm

                x1, x2 = from_cm(params, a + oa, b + ob)
            weights[0] += (x1 > 0) & (x2 > 0)
            weights[1] += ((x1 < 0) & (x2 > 0)) | ((x1 > 0) & (x2 < 0))
            weights[2] += (x1 < 0) & (x2 < 0)
            weights[3] += (x1 > SHIFT) & (x2 > SHIFT)
            weights[4] += ((x1 < -SHIFT) & (x2 > SHIFT)) | ((x1 > SHIFT) & (x2 < -SHIFT))
            weights[5] += (x1 < -SHIFT) & (x2 < -SHIFT)
    weights /= subsamples ** 2
    weights.setflags(write=False)
    return weights


def region_weights(grid: Grid2D, params: ModelParams | None = None, subsamples: int = 4) -> np.ndarray:
    params = params or _UNIT_MASSES
    return _region_weights(grid, params.m1, params.m2, subsamples)


def region_probabilities(wf: Wavefunction2D, params: ModelParams | None = None) -> np.ndarray:
    """Interior probability in each of ``REGIONS``."""
    w = region_weights(wf.grid, params).reshape(len(REGIONS), -1)
    return w @ wf.density().ravel() * wf.grid.dA


def quadrant_probabilities(wf: Wavefunction2D, params: ModelParams | None = None):
    """``(P_T, P_D, P_R)``: probability in quadrant I, quadrants II+IV and quadrant III."""
    p = region_probabilities(wf, params)
    return float(p[0]), float(p[1]), float(p[2])


def shifted_probabilities(wf: Wavefunction2D, params: ModelParams | None = None):
    """``(p_t, p_d, p_r, p_s)`` with region boundaries moved to ``+-3``; ``p_s`` is the remainder of the norm."""
    p = region_probabilities(wf, params)
    p_t, p_d, p_r = float(p[3]), float(p[4]), float(p[5])
    return p_t, p_d, p_r, wf.norm() - p_t - p_d - p_r


def potential_on_grid(params: ModelParams, grid: Grid2D) -> np.ndarray:
    x1, x2 = grid.particle_coordinates(params)
    return omega_cartesian(params, x1, x2)


def ground_state_on(params: ModelParams, axis: Grid1D) -> tuple[float, np.ndarray]:
    """Internal ground state solved directly on a propagation axis."""
    from .eigen1d import solve_bound_states

    states = solve_bound_states(params, axis, n_states=1)
    return float(states.energies[0]), states.wavefunctions[0]


def build_initial_state(params: ModelParams, phi_g: np.ndarray | None = None, grid: Grid2D | None = None,
                        phi_grid: Grid1D | None = None) -> Wavefunction2D:
    """``C phi_g(rho) exp(-(R - Rbar)^2 / (2 sigma_R^2) + i sqrt(2 M E_cm) R)`` with unit norm.

    ``phi_g`` defaults to the ground state solved on the grid's ``rho`` axis.
    When it is tabulated on a different grid, pass ``phi_grid`` and it is
    interpolated with a cubic spline.
    """
    grid = grid or default_tdse_grid()
    if phi_g is None:
        if grid.frame != CM_RELATIVE:
            raise ValueError("pass phi_g and phi_grid for a cartesian grid")
        _, phi_g = ground_state_on(params, grid.axis1)
        phi_grid = grid.axis1
    phi_g = np.asarray(phi_g, dtype=float)
    if grid.frame == CM_RELATIVE and phi_grid is None:
        if phi_g.shape != (grid.axis1.n_points,):
            raise ValueError("phi_g does not match the rho axis; pass phi_grid")
        phi_grid = grid.axis1

    if grid.frame == CM_RELATIVE and phi_grid.same_as(grid.axis1):
        R = grid.axis0.x
        envelope = np.exp(-((R - params.rbar) ** 2) / (2.0 * params.sigma_R ** 2) + 1j * params.k_cm * R)
        psi = envelope[:, None] * phi_g[None, :]
    else:
        if phi_grid is None:
            raise ValueError("phi_grid is required to interpolate phi_g")
        spline = CubicSpline(phi_grid.x, phi_g)
        a, b = grid.mesh()
        if grid.frame == CARTESIAN:
            from .model import to_cm

            R, rho = to_cm(params, a, b)
        else:
            R, rho = a, b
        inside = (rho >= phi_grid.x_min) & (rho <= phi_grid.x[-1])
        phi = np.where(inside, spline(np.clip(rho, phi_grid.x_min, phi_grid.x[-1])), 0.0)
        psi = phi * np.exp(-((R - params.rbar) ** 2) / (2.0 * params.sigma_R ** 2) + 1j * params.k_cm * R)

    psi = psi.astype(complex)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dA)
    dens = np.abs(psi) ** 2
    edge = max(dens[0].max(), dens[-1].max(), dens[:, 0].max(), dens[:, -1].max())
    if edge > 1e-12:
        raise ValueError(f"initial packet is clipped by the grid (edge density {edge:.2e})")
    return Wavefunction2D(psi, grid, 0.0)


def energy_expectation(wf: Wavefunction2D, params: ModelParams, potential: np.ndarray | None = None) -> float:
    """``<H>`` with the kinetic part evaluated in momentum space."""
    grid = wf.grid
    if potential is None:
        potential = potential_on_grid(params, grid)
    spectrum = np.abs(scipy.fft.fft2(wf.psi, workers=_WORKERS)) ** 2
    kinetic = float(np.sum(spectrum * grid.kinetic_energy(params)) / np.sum(spectrum))
    dens = wf.density()
    return kinetic + float(np.sum(dens * potential) / np.sum(dens))


class SplitOperator:
    """Strang splitting ``exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)`` followed by the absorber.

    Precomputes the phase arrays for one grid, potential and time step.
    ``potential`` overrides the model potential (any real array on the grid).
    """

    def __init__(self, params: ModelParams, grid: Grid2D, dt: float, mask: AbsorbingMask | None = None,
                 potential: np.ndarray | None = None):
        if not (math.isfinite(dt) and dt > 0):
            raise ValueError(f"dt must be positive, got {dt}")
        self.params = params
        self.grid = grid
        self.dt = float(dt)
        self.potential = potential_on_grid(params, grid) if potential is None else np.asarray(potential, float)
        if self.potential.shape != grid.shape:
            raise ValueError("potential does not match the grid")
        vmax = float(np.max(np.abs(self.potential)))
        if dt * vmax > MAX_POTENTIAL_PHASE:
            raise ValueError(f"dt={dt} gives potential phase {dt * vmax:.3f} > {MAX_POTENTIAL_PHASE} per step")
        self.half_phase = np.exp(-0.5j * self.dt * self.potential)
        self.kinetic_phase = np.exp(-1j * self.dt * grid.kinetic_energy(params))
        self.mask = mask if mask is not None else no_absorber(grid)

        loss = 1.0 - self.mask.values ** 2
        self._absorb_idx = np.flatnonzero(loss > 0)
        self._absorb_loss = loss.ravel()[self._absorb_idx]
        self._absorb_masked = self.mask.values.ravel()[self._absorb_idx]
        weights = region_weights(grid, params).reshape(len(REGIONS), -1)
        self._absorb_weights = np.ascontiguousarray(weights[:, self._absorb_idx]) * grid.dA

    def step(self, wf: Wavefunction2D) -> Wavefunction2D:
        """Advance ``wf`` by one step in place and return it."""
        psi = wf.psi
        psi *= self.half_phase
        psi = scipy.fft.fft2(psi, overwrite_x=True, workers=_WORKERS)
        psi *= self.kinetic_phase
        psi = scipy.fft.ifft2(psi, overwrite_x=True, workers=_WORKERS)
        psi *= self.half_phase
        if self._absorb_idx.size:
            flat = psi.reshape(-1)
            edge = flat[self._absorb_idx]
            lost = (edge.real ** 2 + edge.imag ** 2) * self._absorb_loss
            wf.absorbed += float(lost.sum()) * self.grid.dA
            wf.absorbed_regions += self._absorb_weights @ lost
            flat[self._absorb_idx] = edge * self._absorb_masked
        wf.psi = psi
        wf.t += self.dt
        return wf

    def observe(self, wf: Wavefunction2D, include_absorbed: bool = True) -> tuple:
        norm = wf.norm()
        p = region_probabilities(wf, self.params)
        total = norm
        if include_absorbed:
            p = p + wf.absorbed_regions
            total = norm + wf.absorbed
        p_s = total - p[3] - p[4] - p[5]
        return (wf.t, norm, p[0], p[1], p[2], p[3], p[4], p[5], p_s, wf.absorbed)

    def propagate(self, wf: Wavefunction2D, t_final: float, record_every: float | None = None,
                  include_absorbed: bool = True, callback=None) -> ObservableSeries:
        """Step ``wf`` (in place) to ``t_final``, recording observables every ``record_every``.

        With ``include_absorbed`` the region probabilities add the probability
        removed by the absorber inside that region, so they keep counting flux
        that has left the grid; otherwise they are interior integrals only.
        """
        n_steps = int(round((t_final - wf.t) / self.dt))
        if n_steps < 0:
            raise ValueError("t_final is before the current time")
        every = n_steps if not record_every else max(1, int(round(record_every / self.dt)))
        if record_every and not math.isclose(every * self.dt, record_every, rel_tol=1e-9):
            raise ValueError(f"record_every={record_every} is not a multiple of dt={self.dt}")
        series = ObservableSeries(include_absorbed=include_absorbed)
        series.append(self.observe(wf, include_absorbed))
        last_norm = series.records[-1][1]
        t0 = wf.t
        for i in range(1, n_steps + 1):
            self.step(wf)
            wf.t = t0 + i * self.dt
            if i % every == 0 or i == n_steps:
                row = self.observe(wf, include_absorbed)
                if row[1] > last_norm * (1.0 + 1e-8):
                    raise NormIncreaseError(f"norm rose from {last_norm} to {row[1]} at t={wf.t}")
                last_norm = row[1]
                series.append(row)
                if callback is not None:
                    callback(wf, row)
        return series


def step(wf: Wavefunction2D, dt: float, params: ModelParams, mask: AbsorbingMask | None = None) -> Wavefunction2D:
    """One split-operator step on a copy of ``wf``."""
    return SplitOperator(params, wf.grid, dt, mask).step(wf.copy())


def propagate(wf: Wavefunction2D, t_final: float, record_every: float, params: ModelParams,
              mask: AbsorbingMask | None = None, dt: float = 0.02, include_absorbed: bool = True):
    """Propagate a copy of ``wf``; returns ``(series, final wavefunction)``."""
    wf = wf.copy()
    series = SplitOperator(params, wf.grid, dt, mask).propagate(wf, t_final, record_every, include_absorbed)
    return series, wf


def default_target_grid(grid: Grid2D, params: ModelParams) -> Grid2D:
    """Grid in the other frame covering the image of ``grid``."""
    a0, a1 = grid.axis0, grid.axis1
    corners_a = np.array([a0.x_min, a0.x_max, a0.x_min, a0.x_max])
    corners_b = np.array([a1.x_min, a1.x_min, a1.x_max, a1.x_max])
    from .model import from_cm, to_cm

    if grid.frame == CM_RELATIVE:
        u, v = from_cm(params, corners_a, corners_b)
        lo, hi = float(min(u.min(), v.min())), float(max(u.max(), v.max()))
        spacing = min(a0.dx, a1.dx)
        n = 1 << int(math.ceil(math.log2((hi - lo) / spacing)))
        axis = Grid1D(lo, hi, n)
        return Grid2D(axis, axis, CARTESIAN)
    u, v = to_cm(params, corners_a, corners_b)
    spacing = min(a0.dx, a1.dx)
    axes = []
    for lo, hi in ((float(u.min()), float(u.max())), (float(v.min()), float(v.max()))):
        n = 1 << int(math.ceil(math.log2((hi - lo) / spacing)))
        axes.append(Grid1D(lo, hi, max(n, 64)))
    return Grid2D(axes[0], axes[1], CM_RELATIVE)


def convert_density(density: np.ndarray, grid: Grid2D, params: ModelParams, target: Grid2D | None = None):
    """Resample a density into the other frame with cubic splines.

    The (R, rho) <-> (x1, x2) map has unit Jacobian, so densities transform
    as scalars. Returns ``(density, target_grid)``.
    """
    from .model import from_cm, to_cm

    target = target or default_target_grid(grid, params)
    if target.frame == grid.frame:
        raise ValueError("target grid is in the same frame")
    a, b = target.mesh()
    if grid.frame == CM_RELATIVE:
        u, v = to_cm(params, a, b)
    else:
        u, v = from_cm(params, a, b)
    coords = np.array([(u - grid.axis0.x_min) / grid.axis0.dx, (v - grid.axis1.x_min) / grid.axis1.dx])
    out = ndimage.map_coordinates(np.asarray(density, float), coords, order=3, mode="constant", cval=0.0)
    return out, target


def export_density(wf: Wavefunction2D, path, frame: str | None = None, params: ModelParams | None = None,
                   log_scale: bool = False, target: Grid2D | None = None, metadata: dict | None = None,
                   floor: float = 1e-30):
    """Write ``|psi|^2`` (optionally ``log10``) with its grid description."""
    params = params or _UNIT_MASSES
    density = wf.density()
    grid = wf.grid
    if frame is not None and frame != grid.frame:
        density, grid = convert_density(density, grid, params, target)
    if log_scale:
        density = np.log10(np.maximum(density, floor))
    meta = dict(metadata or {})
    meta.update(grid.metadata())
    meta.update({"time": wf.t, "log_scale": log_scale, "kind": "quantum"})
    return write_density(path, density, meta)

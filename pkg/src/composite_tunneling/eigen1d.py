"""Internal-motion spectrum, form factors, transition matrix elements and
multichannel effective potentials of the two-particle model.

Bound states come from a dense Fourier-grid Hamiltonian on a periodic
uniform grid. All quadratures use the same grid and treat the periodic end
point ``x_min`` as the symmetric average of ``-L`` and ``+L``, so parity
identities hold to rounding error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .grids import Grid1D, default_eigen_grid
from .model import ModelParams, coupling_u

EVEN = "even"
ODD = "odd"
ALLOWED = "allowed"
FORBIDDEN = "forbidden"

#: Sup-norm below which a tabulated barrier combination counts as identically zero.
ZERO_THRESHOLD = 1e-12

#: Bound states must decay below this fraction of their peak in the edge band.
EDGE_TOLERANCE = 1e-6
EDGE_BAND = 0.025


class GridTooNarrowError(ValueError):
    """The grid clips a state or the potential it is asked to resolve."""


class UnderResolvedError(ValueError):
    """Too few grid points per local wavelength."""


@dataclass
class BoundStateSet:
    """Bound eigenpairs of ``-1/(2 mu) d^2/drho^2 + U(rho)``, energies ascending.

    ``wavefunctions[n]`` is real with unit norm on ``grid``.
    """

    energies: np.ndarray
    wavefunctions: np.ndarray
    parities: list[str]
    grid: Grid1D

    def __len__(self):
        return len(self.energies)

    @property
    def ground(self) -> np.ndarray:
        return self.wavefunctions[0]

    def to_csv(self, path, metadata: dict | None = None):
        from .io import write_csv

        rows = [(n, float(e), p) for n, (e, p) in enumerate(zip(self.energies, self.parities))]
        write_csv(path, ("index", "E", "parity"), rows, metadata)


@dataclass
class ContinuumState:
    """Unbound internal state at positive energy, box-normalized on ``grid``.

    Multiplying ``wavefunction`` by ``delta_norm_factor`` gives the
    normalization ``<k|k'> = delta(k - k')`` with ``k = sqrt(2 mu E)``.
    """

    energy: float
    parity: str
    wavefunction: np.ndarray
    grid: Grid1D
    delta_norm_factor: float
    phase_shift: float = math.nan
    metadata: dict = field(default_factory=dict)

    @property
    def delta_normalized(self) -> np.ndarray:
        return self.wavefunction * self.delta_norm_factor


def mirror_index(n: int) -> np.ndarray:
    """Index map ``x -> -x`` on a symmetric periodic grid."""
    return (-np.arange(n)) % n


def _require_symmetric(grid: Grid1D):
    if not grid.contains_zero_symmetrically():
        raise ValueError("grid must be symmetric about 0 with an even number of points")


def parity_of(phi: np.ndarray, grid: Grid1D) -> str:
    _require_symmetric(grid)
    overlap = float(np.sum(phi * phi[mirror_index(grid.n_points)]))
    return EVEN if overlap >= 0 else ODD


def symmetrize(phi: np.ndarray, parity: str) -> np.ndarray:
    flipped = phi[mirror_index(len(phi))]
    return 0.5 * (phi + flipped) if parity == EVEN else 0.5 * (phi - flipped)


def kinetic_matrix(grid: Grid1D, mass: float) -> np.ndarray:
    """Dense periodic spectral kinetic operator ``F^-1 diag(k^2/2m) F``."""
    n = grid.n_points
    t_k = grid.k ** 2 / (2.0 * mass)
    # first row of the circulant matrix
    row = np.real(np.fft.ifft(t_k))
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return row[idx]


def _potential_on(params: ModelParams, grid: Grid1D, potential) -> np.ndarray:
    if potential is None:
        return coupling_u(params, grid.x)
    if callable(potential):
        return np.asarray(potential(grid.x), dtype=float)
    values = np.asarray(potential, dtype=float)
    if values.shape != (grid.n_points,):
        raise ValueError("tabulated potential does not match the grid")
    return values


def _edge_amplitude(phi: np.ndarray) -> float:
    n = len(phi)
    band = max(1, int(math.ceil(EDGE_BAND * n)))
    edge = np.concatenate([phi[:band], phi[-band:]])
    return float(np.max(np.abs(edge)) / np.max(np.abs(phi)))


def solve_bound_states(params: ModelParams, grid: Grid1D | None = None, potential=None,
                       n_states: int | None = None) -> BoundStateSet:
    """All negative-energy eigenstates of the intraparticle Hamiltonian.

    ``potential`` overrides the Gaussian coupling of ``params`` and may be a
    callable or an array tabulated on ``grid``; it must be even. With
    ``n_states`` only the lowest bound states are solved and checked.
    """
    grid = grid or default_eigen_grid()
    _require_symmetric(grid)
    u = _potential_on(params, grid, potential)
    scale = max(float(np.max(np.abs(u))), 1e-300)
    if max(abs(u[0]), abs(u[-1])) >= 1e-12 * scale:
        raise GridTooNarrowError(
            f"potential not negligible at the grid edge ({max(abs(u[0]), abs(u[-1])):.3e})"
        )
    h = kinetic_matrix(grid, params.mu)
    h[np.diag_indices_from(h)] += u
    try:
        if n_states is None:
            energies, vectors = scipy.linalg.eigh(h, subset_by_value=(-np.inf, 0.0))
        else:
            energies, vectors = scipy.linalg.eigh(h, subset_by_index=(0, n_states - 1))
            keep = energies < 0
            energies, vectors = energies[keep], vectors[:, keep]
    except scipy.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc

    dx = grid.dx
    states, parities = [], []
    for j in range(len(energies)):
        phi = vectors[:, j]
        parity = parity_of(phi, grid)
        phi = symmetrize(phi, parity)
        phi = phi / math.sqrt(np.sum(phi * phi) * dx)
        # sign convention: even states positive at 0, odd states rising through 0
        i0 = grid.index_of(0.0)
        ref = phi[i0] if parity == EVEN else phi[i0 + 1]
        if ref < 0:
            phi = -phi
        edge = _edge_amplitude(phi)
        if edge > EDGE_TOLERANCE:
            raise GridTooNarrowError(
                f"bound state {j} (E={energies[j]:.6f}) has edge amplitude {edge:.2e}; widen the grid"
            )
        states.append(phi)
        parities.append(parity)
    wavefunctions = np.array(states) if states else np.zeros((0, grid.n_points))
    return BoundStateSet(np.asarray(energies), wavefunctions, parities, grid)


def box_continuum_state(params: ModelParams, grid: Grid1D, parity: str = ODD, potential=None) -> ContinuumState:
    """Lowest positive-energy box eigenstate of the requested parity.

    Stands in for a low-lying continuum state; its energy is set by the box.
    """
    _require_symmetric(grid)
    u = _potential_on(params, grid, potential)
    h = kinetic_matrix(grid, params.mu)
    h[np.diag_indices_from(h)] += u
    energies, vectors = scipy.linalg.eigh(h)
    for e, phi in zip(energies, vectors.T):
        if e <= 0 or parity_of(phi, grid) != parity:
            continue
        phi = symmetrize(phi, parity)
        phi = phi / math.sqrt(np.sum(phi * phi) * grid.dx)
        i0 = grid.index_of(0.0)
        ref = phi[i0] if parity == EVEN else phi[i0 + 1]
        if ref < 0:
            phi = -phi
        k = math.sqrt(2.0 * params.mu * e)
        amplitude = _asymptotic_amplitude(phi, grid, k)
        return ContinuumState(
            float(e), parity, phi, grid, (1.0 / math.sqrt(math.pi)) / amplitude,
            metadata={"source": "box eigenstate", "energy": float(e), "k": k},
        )
    raise RuntimeError(f"no positive-energy {parity} state on this grid")


def _asymptotic_amplitude(phi: np.ndarray, grid: Grid1D, k: float) -> float:
    """Amplitude ``A`` of ``A sin(k rho + delta)`` fitted on the outer quarter of the grid."""
    x = grid.x
    sel = x > 0.5 * grid.x_max
    design = np.column_stack([np.sin(k * x[sel]), np.cos(k * x[sel])])
    coef, *_ = np.linalg.lstsq(design, phi[sel], rcond=None)
    return float(np.hypot(*coef))


def continuum_state(params: ModelParams, energy: float, parity: str, grid: Grid1D | None = None,
                    potential=None) -> ContinuumState:
    """Scattering eigenfunction at ``energy > 0`` with definite parity.

    Integrates the radial equation outward from ``rho = 0`` with an adaptive
    Runge-Kutta scheme and mirrors the result onto the negative half.
    """
    if not energy > 0:
        raise ValueError(f"continuum energy must be positive, got {energy}")
    if parity not in (EVEN, ODD):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    grid = grid or default_eigen_grid()
    _require_symmetric(grid)
    u = _potential_on(params, grid, potential)
    if potential is None:
        u_fun = lambda r: coupling_u(params, r)  # noqa: E731
    elif callable(potential):
        u_fun = potential
    else:
        u_fun = lambda r: np.interp(r, grid.x, u)  # noqa: E731

    k_local = math.sqrt(2.0 * params.mu * (energy - min(0.0, float(np.min(u)))))
    if 2.0 * math.pi / (k_local * grid.dx) < 8.0:
        raise UnderResolvedError(
            f"E={energy} needs dx <= {2 * math.pi / (8 * k_local):.4g}, grid has {grid.dx:.4g}"
        )

    two_mu = 2.0 * params.mu

    def rhs(r, y):
        return [y[1], two_mu * (float(u_fun(r)) - energy) * y[0]]

    i0 = grid.index_of(0.0)
    r_pos = np.append(grid.x[i0:], grid.x_max)
    y0 = [1.0, 0.0] if parity == EVEN else [0.0, 1.0]
    sol = solve_ivp(rhs, (0.0, grid.x_max), y0, t_eval=r_pos, method="DOP853", rtol=1e-12, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"continuum integration failed: {sol.message}")
    values, derivs = sol.y[0], sol.y[1]

    n = grid.n_points
    phi = np.empty(n)
    phi[i0:] = values[:-1]
    sign = 1.0 if parity == EVEN else -1.0
    idx_neg = np.arange(1, i0)
    phi[idx_neg] = sign * phi[mirror_index(n)[idx_neg]]
    # x_min is the periodic image of x_max = +L
    phi[0] = values[-1] if parity == EVEN else 0.0

    k = math.sqrt(two_mu * energy)
    edge_phi, edge_dphi = values[-1], derivs[-1]
    raw_amplitude = math.hypot(edge_phi, edge_dphi / k)
    phase = math.atan2(k * edge_phi, edge_dphi) - k * grid.x_max
    phase_shift = (phase + (0.0 if parity == ODD else -0.5 * math.pi)) % math.pi

    norm = math.sqrt(np.sum(phi * phi) * grid.dx)
    phi /= norm
    box_amplitude = raw_amplitude / norm
    return ContinuumState(
        float(energy), parity, phi, grid, (1.0 / math.sqrt(math.pi)) / box_amplitude, phase_shift,
        metadata={
            "source": "outward integration",
            "k": k,
            "edge_log_derivative": float(edge_dphi / edge_phi) if edge_phi != 0 else math.inf,
            "normalization": "box; multiply by delta_norm_factor for delta(k-k')",
        },
    )


def _quadrature_phase(grid: Grid1D, p) -> np.ndarray:
    """``exp(i p x)`` weights with the periodic end point symmetrized."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    x = grid.x
    phase = np.exp(1j * p[:, None] * x[None, :])
    if grid.contains_zero_symmetrically():
        phase[:, 0] = np.cos(p * grid.x_max)
    return phase


def _same_grid(a: np.ndarray, b: np.ndarray, grid: Grid1D):
    if a.shape != (grid.n_points,) or b.shape != (grid.n_points,):
        raise ValueError("wavefunctions are not tabulated on the given grid")


def form_factor(phi_n: np.ndarray, phi_np: np.ndarray, p, grid: Grid1D):
    """``F(p) = integral exp(i p rho) conj(phi_np) phi_n drho``. Vectorized over ``p``."""
    phi_n = np.asarray(phi_n)
    phi_np = np.asarray(phi_np)
    _same_grid(phi_n, phi_np, grid)
    out = _quadrature_phase(grid, p) @ (np.conj(phi_np) * phi_n) * grid.dx
    return out[0] if np.ndim(p) == 0 else out


def barrier_fourier(values: np.ndarray, kappa, qgrid: Grid1D):
    """``(1/2pi) integral exp(i kappa q) V(q) dq`` for ``V`` tabulated on ``qgrid``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (qgrid.n_points,):
        raise ValueError("barrier is not tabulated on qgrid")
    out = _quadrature_phase(qgrid, kappa) @ values * qgrid.dx / (2.0 * math.pi)
    return out[0] if np.ndim(kappa) == 0 else out


def w_matrix_element(phi_n, phi_np, k, kp, V1, V2, params: ModelParams, grid: Grid1D, qgrid: Grid1D):
    """Transition amplitude ``<k' n'| V1 + V2 |n k>`` via form factors.

    ``V1`` and ``V2`` are barrier values tabulated on ``qgrid``; ``k`` and
    ``kp`` broadcast against each other.
    """
    delta = np.asarray(k, dtype=float) - np.asarray(kp, dtype=float)
    flat = np.atleast_1d(delta).ravel()
    f1 = form_factor(phi_n, phi_np, params.mu / params.m1 * flat, grid)
    f2 = form_factor(phi_n, phi_np, -params.mu / params.m2 * flat, grid)
    out = np.atleast_1d(f1) * barrier_fourier(V1, flat, qgrid) + np.atleast_1d(f2) * barrier_fourier(V2, flat, qgrid)
    out = np.atleast_1d(out).reshape(np.shape(delta))
    return out[()] if np.ndim(delta) == 0 else out


def _parity_label(state, grid: Grid1D | None) -> str:
    if isinstance(state, str):
        if state not in (EVEN, ODD):
            raise ValueError(f"unknown parity {state!r}")
        return state
    if isinstance(state, ContinuumState):
        return state.parity
    if grid is None:
        raise ValueError("a grid is needed to infer parity from an array")
    return parity_of(np.asarray(state), grid)


def classify_transition(phi_n, phi_np, V1, V2, grid: Grid1D | None = None) -> str:
    """Selection rule for identical particles.

    Same-parity transitions see ``V1 + V2``, opposite-parity ones ``V1 - V2``;
    the transition is forbidden when that combination vanishes on the
    tabulation. ``phi_n``/``phi_np`` may be parity labels or arrays on ``grid``.
    """
    p_n = _parity_label(phi_n, grid)
    p_np = _parity_label(phi_np, grid)
    V1 = np.asarray(V1, dtype=float)
    V2 = np.asarray(V2, dtype=float)
    combined = V1 + V2 if p_n == p_np else V1 - V2
    return FORBIDDEN if float(np.max(np.abs(combined))) < ZERO_THRESHOLD else ALLOWED


def _as_function(V, qgrid: Grid1D | None) -> Callable:
    if callable(V):
        return V
    if qgrid is None:
        raise ValueError("tabulated barriers need their qgrid")
    values = np.asarray(V, dtype=float)
    return lambda q: np.interp(q, qgrid.x, values, left=0.0, right=0.0)


def effective_potential(phi_n, phi_np, V1, V2, R, params: ModelParams, grid: Grid1D,
                        qgrid: Grid1D | None = None):
    """Channel-coupling potential ``Z_{n n'}(R)``, vectorized over ``R``.

    Barriers are callables of the particle coordinate or arrays on ``qgrid``.
    """
    phi_n = np.asarray(phi_n)
    phi_np = np.asarray(phi_np)
    _same_grid(phi_n, phi_np, grid)
    v1 = _as_function(V1, qgrid)
    v2 = _as_function(V2, qgrid)
    R_arr = np.atleast_1d(np.asarray(R, dtype=float))
    rho = grid.x
    weights = np.full(grid.n_points, grid.dx)
    overlap = np.conj(phi_n) * phi_np
    integrand = overlap[None, :] * (
        v1(R_arr[:, None] - params.mu / params.m1 * rho[None, :])
        + v2(R_arr[:, None] + params.mu / params.m2 * rho[None, :])
    )
    if grid.contains_zero_symmetrically():
        # periodic end point counts as the average of -L and +L
        end = overlap[0] * 0.5 * (
            v1(R_arr - params.mu / params.m1 * grid.x_min) + v2(R_arr + params.mu / params.m2 * grid.x_min)
            + v1(R_arr - params.mu / params.m1 * grid.x_max) + v2(R_arr + params.mu / params.m2 * grid.x_max)
        )
        integrand[:, 0] = end
    z = integrand @ weights
    band = max(1, int(math.ceil(EDGE_BAND * grid.n_points)))
    edge = np.abs(integrand[:, :band]).sum(axis=1) + np.abs(integrand[:, -band:]).sum(axis=1)
    # relative to the largest integrand magnitude over all requested R
    scale = float(np.abs(integrand).sum(axis=1).max()) * grid.dx
    clipped = edge * grid.dx > 1e-8 * scale
    if np.any(clipped):
        warnings.warn("effective potential integrand is clipped by the rho grid", RuntimeWarning, stacklevel=2)
    if np.isrealobj(phi_n) and np.isrealobj(phi_np):
        z = np.real(z)
    return z[0] if np.ndim(R) == 0 else z


def effective_potential_curve(phi_n, phi_np, V1, V2, R_samples: Sequence[float], params: ModelParams,
                              grid: Grid1D, qgrid: Grid1D | None = None) -> np.ndarray:
    """``(R, Z)`` rows for plotting."""
    R_samples = np.asarray(R_samples, dtype=float)
    z = effective_potential(phi_n, phi_np, V1, V2, R_samples, params, grid, qgrid)
    return np.column_stack([R_samples, z])

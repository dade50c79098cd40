import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from composite_tunneling.model import (
    ModelParams,
    barrier_v,
    barrier_v_prime,
    classical_force,
    classical_force_cm,
    coupling_u,
    from_cm,
    momenta_from_cm,
    momenta_to_cm,
    omega_cartesian,
    omega_cm,
    preset_params,
    to_cm,
)

finite = st.floats(-8.0, 8.0, allow_nan=False)


def test_default_masses():
    p = ModelParams()
    assert p.M == 2.0 and p.mu == 0.5
    assert p.k_cm == pytest.approx(2.0)


@pytest.mark.parametrize("kwargs", [{"sigma_R": -1.0}, {"well_depth": 0.0}, {"well_width": -2.0},
                                    {"n_channels": 3}, {"m1": 0.0}])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_preset_widths():
    assert [preset_params(n, 3.0).well_width for n in (1, 2, 4)] == [1.0, 1.961, 3.162]


def test_barrier_values():
    assert barrier_v(0.0) == 0.0
    x = 1 / math.sqrt(2)
    assert barrier_v(x) == pytest.approx(0.42888, abs=1e-5)
    assert barrier_v_prime(x) == pytest.approx(0.0, abs=1e-15)


@given(finite)
def test_barrier_odd_coupling_even(x):
    p = preset_params(2, 3.0)
    assert barrier_v(-x) == -barrier_v(x)
    assert coupling_u(p, -x) == coupling_u(p, x)


def test_coupling_limits():
    p = preset_params(1, 3.0)
    assert coupling_u(p, 0.0) == -2.0
    assert abs(coupling_u(p, 40.0)) < 1e-300


def test_omega_examples():
    p = preset_params(1, 3.0)
    assert omega_cartesian(p, 0.0, 0.0) == -2.0
    assert omega_cartesian(p, -55.0, -55.0) == pytest.approx(-2.0, abs=1e-300)
    assert omega_cm(p, 0.0, 2.0) == pytest.approx(coupling_u(p, 2.0), abs=1e-15)


@given(finite, finite)
def test_omega_cm_matches_cartesian(R, rho):
    p = preset_params(4, -3.0)
    x1, x2 = from_cm(p, R, rho)
    assert omega_cm(p, R, rho) == pytest.approx(omega_cartesian(p, x1, x2), abs=1e-14)


@given(finite, st.floats(-4, 4), st.floats(0.1, 3))
def test_alpha_linearity(x, alpha, lam):
    p = preset_params(2, alpha)
    q = p.with_(alpha=lam * alpha)
    diff = omega_cartesian(q, x, 0.3) - omega_cartesian(p, x, 0.3)
    assert diff == pytest.approx((lam - 1) * alpha * barrier_v(x), abs=1e-12)


def test_diagonal_force_examples():
    for alpha in (3.0, -3.0):
        p = preset_params(1, alpha)
        f1, f2 = classical_force(p, 0.0, 0.0)
        assert (f1, f2) == pytest.approx((-alpha, -3.0))
        x = 0.7
        f1, f2 = classical_force(p, x, x)
        assert f1 == pytest.approx((2 * alpha * x * x - alpha) * math.exp(-x * x))
        assert f2 == pytest.approx((6 * x * x - 3) * math.exp(-x * x))


@pytest.mark.parametrize("n,alpha", [(1, 3.0), (2, -3.0), (4, 3.0)])
def test_force_matches_finite_difference(n, alpha, rng):
    p = preset_params(n, alpha)
    x1, x2 = rng.uniform(-5, 5, (2, 1000))
    h = 1e-5
    fd1 = -(omega_cartesian(p, x1 + h, x2) - omega_cartesian(p, x1 - h, x2)) / (2 * h)
    fd2 = -(omega_cartesian(p, x1, x2 + h) - omega_cartesian(p, x1, x2 - h)) / (2 * h)
    f1, f2 = classical_force(p, x1, x2)
    scale = np.maximum(np.abs(np.stack([f1, f2])), 1.0)
    assert np.max(np.abs(np.stack([f1 - fd1, f2 - fd2])) / scale) < 1e-6


def test_cm_force_chain_rule(rng):
    p = preset_params(2, -3.0)
    R, rho = rng.uniform(-4, 4, (2, 200))
    h = 1e-5
    fR, frho = classical_force_cm(p, R, rho)
    assert np.allclose(fR, -(omega_cm(p, R + h, rho) - omega_cm(p, R - h, rho)) / (2 * h), atol=1e-8)
    assert np.allclose(frho, -(omega_cm(p, R, rho + h) - omega_cm(p, R, rho - h)) / (2 * h), atol=1e-8)


@given(finite, finite, st.floats(0.5, 3.0), st.floats(0.5, 3.0))
@settings(max_examples=50)
def test_coordinate_maps_invert(x1, x2, m1, m2):
    p = ModelParams(m1=m1, m2=m2)
    R, rho = to_cm(p, x1, x2)
    assert rho == pytest.approx(x2 - x1, abs=1e-12)
    assert R == pytest.approx((m1 * x1 + m2 * x2) / (m1 + m2), abs=1e-12)
    y1, y2 = from_cm(p, R, rho)
    assert (y1, y2) == pytest.approx((x1, x2), abs=1e-12)
    P_R, P_rho = momenta_to_cm(p, x1, x2)
    assert momenta_from_cm(p, P_R, P_rho) == pytest.approx((x1, x2), abs=1e-12)


def test_equal_mass_momentum_map():
    p = ModelParams()
    p1, p2 = momenta_from_cm(p, 3.0, 0.5)
    assert (p1, p2) == pytest.approx((1.5 - 0.5, 1.5 + 0.5))

"""Grid construction, differential stencils, and quadrature."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capflow.grid import (
    boundary_integrate,
    build_grid,
    fill_ghost,
    gradient,
    hessian,
    integrate,
    sin_power_antiderivative,
    unit_ball_volume,
    unit_sphere_area,
)
from capflow.oracle import CapSpec, cap_phi, cap_phi_derivatives, convergence_order


def test_build_grid_node_layout():
    g = build_grid("axisym", 2, 128, 0)
    assert g.dbeta == pytest.approx((math.pi / 2) / (128 - 0.5))
    assert g.beta[0] == pytest.approx(0.5 * g.dbeta)
    # the last node sits exactly on the contact circle
    assert g.beta[-1] == pytest.approx(math.pi / 2, abs=1e-15)
    assert np.all(np.diff(g.beta) > 0)


def test_build_grid_full2d_layout():
    g = build_grid("full2d", 2, 64, 48)
    assert g.alpha.shape == (48,)
    assert g.dalpha == pytest.approx(2 * math.pi / 48)
    assert g.alpha[0] == 0.0


def test_build_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        build_grid("axisym", 2, 4, 0)
    with pytest.raises(ValueError):
        build_grid("full2d", 3, 64, 64)
    with pytest.raises(ValueError):
        build_grid("full2d", 2, 64, 17)
    with pytest.raises(ValueError):
        build_grid("spectral", 2, 64, 0)


def test_reference_measure_constants():
    assert unit_sphere_area(1) == pytest.approx(2 * math.pi, rel=1e-15)
    assert unit_sphere_area(2) == pytest.approx(4 * math.pi, rel=1e-15)
    assert unit_sphere_area(3) == pytest.approx(2 * math.pi**2, rel=1e-15)
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)


def test_sin_power_antiderivative_closed_forms():
    x = np.linspace(0.0, math.pi / 2, 7)
    np.testing.assert_allclose(sin_power_antiderivative(0, x), x, rtol=1e-15)
    np.testing.assert_allclose(sin_power_antiderivative(1, x), 1 - np.cos(x), rtol=1e-15)
    assert sin_power_antiderivative(2, math.pi / 2) == pytest.approx(math.pi / 4, rel=1e-14)
    # against a dense trapezoid sum for a higher power
    t = np.linspace(0.0, 1.1, 400_001)
    ref = np.trapezoid(np.sin(t) ** 4, t)
    assert sin_power_antiderivative(4, 1.1) == pytest.approx(ref, abs=1e-11)


def test_gradient_axisym_cosine():
    errs = []
    for nb in (128, 256):
        g = build_grid("axisym", 2, nb, 0)
        df = gradient(np.cos(g.beta), g)
        errs.append(float(np.max(np.abs(df + np.sin(g.beta)))))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.7)


def test_gradient_full2d_mixed_mode():
    g = build_grid("full2d", 2, 96, 64)
    f = np.sin(g.beta)[:, None] * np.cos(g.alpha)[None, :]
    df = gradient(f, g)
    d_beta = np.cos(g.beta)[:, None] * np.cos(g.alpha)[None, :]
    # alpha component of the surface gradient carries a 1/sin(beta) factor
    d_alpha = -np.sin(g.alpha)[None, :] * np.ones_like(g.beta)[:, None]
    assert float(np.max(np.abs(df[..., 0] - d_beta))) < 5e-4
    # alpha spacing is coarser (2 pi / 64), so its centered-difference error
    # (dalpha^2 / 6) |f'''| sits near 1.6e-3
    assert float(np.max(np.abs(df[..., 1] - d_alpha))) < 2.5e-3


def test_hessian_axisym_cosine():
    g = build_grid("axisym", 2, 256, 0)
    T = hessian(np.cos(g.beta), g)
    # cos(beta) is the restriction of a linear function; its spherical
    # hessian is -cos(beta) times the identity
    assert float(np.max(np.abs(T[:, 0] + np.cos(g.beta)))) < 2e-4
    assert float(np.max(np.abs(T[:, 1] + np.cos(g.beta)))) < 2e-4


def test_hessian_full2d_diagonal():
    g = build_grid("full2d", 2, 96, 64)
    f = np.cos(g.beta)[:, None] * np.ones_like(g.alpha)[None, :]
    T = hessian(f, g)
    c = np.cos(g.beta)[:, None] * np.ones_like(g.alpha)[None, :]
    assert float(np.max(np.abs(T[..., 0] + c))) < 5e-4
    assert float(np.max(np.abs(T[..., 1]))) < 5e-4
    assert float(np.max(np.abs(T[..., 2] + c))) < 5e-4


def test_hessian_trace_matches_flux_laplacian():
    # independent check: trace of the hessian against a conservative
    # divergence-form Laplacian built from interface fluxes
    g = build_grid("axisym", 2, 256, 0)
    f = np.exp(0.3 * np.cos(g.beta))
    T = hessian(f, g)
    trace = T[:, 0] + T[:, 1]

    gf = fill_ghost(f, math.pi / 2, g)  # mirror extension, zero slope
    ext = np.concatenate([f, [gf.ghost]])
    h = g.dbeta
    edges = g.beta_edges
    flux = np.empty(g.n_beta + 1)
    flux[0] = 0.0
    for j in range(1, g.n_beta):
        flux[j] = math.sin(edges[j]) * (f[j] - f[j - 1]) / h
    flux[-1] = math.sin(edges[-1]) * (ext[-1] - f[-2]) / (2 * h)
    lap = (flux[1:] - flux[:-1]) / g.cell_mass
    # mirror extension only matches f where the true slope vanishes, so
    # compare away from the contact ring
    assert float(np.max(np.abs(trace[:-2] - lap[:-2]))) < 2e-3


def test_gradient_convergence_order():
    errs = []
    for nb in (32, 64, 128, 256):
        g = build_grid("axisym", 2, nb, 0)
        df = gradient(np.cos(g.beta), g)
        errs.append(float(np.max(np.abs(df + np.sin(g.beta)))))
    order = convergence_order(np.array(errs))
    assert 1.8 <= order <= 2.2


def test_integrate_constant_is_exact():
    for n, exact in ((2, 2 * math.pi), (3, math.pi**2)):
        g = build_grid("axisym", n, 128, 0)
        assert integrate(1.0, g) == pytest.approx(exact, rel=1e-13)
    g = build_grid("full2d", 2, 64, 32)
    assert integrate(np.ones((64, 32)), g) == pytest.approx(2 * math.pi, rel=1e-13)


def test_integrate_smooth_integrand():
    g = build_grid("axisym", 2, 2048, 0)
    # integral of cos(beta) over the hemisphere with measure sin(beta)
    assert integrate(np.cos(g.beta), g) == pytest.approx(math.pi, abs=1e-6)


def test_integrate_separates_alpha_modes():
    g2 = build_grid("full2d", 2, 96, 48)
    gax = build_grid("axisym", 2, 96, 0)
    h = np.exp(0.2 * np.cos(g2.beta))
    f = h[:, None] * np.sin(g2.alpha)[None, :] ** 2
    # trapezoid over a full period integrates sin^2 exactly: mean 1/2
    expected = 0.5 * integrate(np.exp(0.2 * np.cos(gax.beta)), gax)
    assert integrate(f, g2) == pytest.approx(expected, rel=1e-13)


def test_boundary_integrate_values():
    g = build_grid("axisym", 2, 128, 0)
    assert boundary_integrate(1.0, g) == pytest.approx(2 * math.pi, abs=1e-9)
    g3 = build_grid("axisym", 3, 128, 0)
    assert boundary_integrate(1.0, g3) == pytest.approx(4 * math.pi, abs=1e-9)
    g2 = build_grid("full2d", 2, 64, 32)
    f = np.cos(g2.alpha) ** 2
    assert boundary_integrate(f, g2) == pytest.approx(math.pi, abs=1e-9)


def test_fill_ghost_mirror_at_right_angle():
    g = build_grid("axisym", 2, 64, 0)
    rng = np.random.default_rng(0)
    phi = rng.normal(size=64)
    gf = fill_ghost(phi, math.pi / 2, g)
    # neutral wetting: zero contact slope, plain mirror extension
    assert gf.slope == pytest.approx(0.0, abs=1e-15)
    assert gf.ghost == pytest.approx(phi[-2], rel=1e-15)


def test_fill_ghost_slope_axisym():
    g = build_grid("axisym", 2, 64, 0)
    phi = np.zeros(64)
    gf = fill_ghost(phi, math.pi / 3, g)
    # flat graph: v = 1 at the ring, so the slope is exactly cot(theta)
    assert gf.slope == pytest.approx(1 / math.tan(math.pi / 3), rel=1e-14)
    # the ghost realizes that slope through the centered difference
    centered = (gf.ghost - phi[-2]) / (2 * g.dbeta)
    assert centered == pytest.approx(gf.slope, rel=1e-13)


def test_fill_ghost_consistent_with_cap_profile():
    # ghost extrapolation against the true profile continued past the ring
    spec = CapSpec(theta=math.pi / 3, r=1.0)
    errs = []
    for nb in (64, 128, 256):
        g = build_grid("axisym", 2, nb, 0)
        phi = np.asarray(cap_phi(spec, g.beta))
        gf = fill_ghost(phi, spec.theta, g)
        true_ghost = float(cap_phi(spec, math.pi / 2 + g.dbeta))
        errs.append(abs(gf.ghost - true_ghost))
    assert errs[0] < 1e-5
    assert convergence_order(np.array(errs)) >= 2.0


def test_full2d_matches_axisym_on_symmetric_data():
    spec = CapSpec(theta=math.pi / 3, r=1.0)
    gax = build_grid("axisym", 2, 64, 0)
    g2 = build_grid("full2d", 2, 64, 16)
    phi_ax = np.asarray(cap_phi(spec, gax.beta))
    phi_2d = phi_ax[:, None] * np.ones(16)[None, :]
    d_ax = gradient(fill_ghost(phi_ax, spec.theta, gax), gax)
    d_2d = gradient(fill_ghost(phi_2d, spec.theta, g2), g2)
    assert float(np.max(np.abs(d_2d[..., 0] - d_ax[:, None]))) < 1e-13
    assert float(np.max(np.abs(d_2d[..., 1]))) < 1e-13
    T_ax = hessian(fill_ghost(phi_ax, spec.theta, gax), gax)
    T_2d = hessian(fill_ghost(phi_2d, spec.theta, g2), g2)
    assert float(np.max(np.abs(T_2d[..., 0] - T_ax[:, 0][:, None]))) < 1e-12
    assert float(np.max(np.abs(T_2d[..., 2] - T_ax[:, 1][:, None]))) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_gradient_of_constant_vanishes(seed):
    rng = np.random.default_rng(seed)
    c = float(rng.uniform(-5, 5))
    g = build_grid("axisym", 2, 32, 0)
    df = gradient(fill_ghost(np.full(32, c), math.pi / 2, g), g)
    assert float(np.max(np.abs(df))) < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_integrate_is_linear_and_positive(seed):
    rng = np.random.default_rng(seed)
    g = build_grid("axisym", 2, 48, 0)
    f1 = rng.normal(size=48)
    f2 = rng.normal(size=48)
    a, b = rng.normal(size=2)
    lhs = integrate(a * f1 + b * f2, g)
    rhs = a * integrate(f1, g) + b * integrate(f2, g)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert integrate(np.abs(f1) + 0.1, g) > 0

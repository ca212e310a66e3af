"""Closed-form cap profiles, reference functionals, and order estimation."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from capflow.grid import build_grid
from capflow.oracle import (
    CapSpec,
    cap_functionals,
    cap_gradient,
    cap_graph,
    cap_hessian,
    cap_phi,
    cap_phi_derivatives,
    cap_radius_from_point,
    cap_rho,
    cap_wetting_energy_constant,
    convergence_order,
    ellipsoid_curvatures,
    ellipsoid_graph,
)


def test_cap_rho_reference_points():
    spec = CapSpec(theta=math.pi / 3, r=1.0)
    assert cap_rho(spec, math.pi / 2) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    assert cap_rho(spec, 0.0) == pytest.approx(0.5, rel=1e-15)
    # neutral angle: the graph is the unit upper hemisphere
    hemi = CapSpec(theta=math.pi / 2, r=1.0)
    b = np.linspace(0, math.pi / 2, 11)
    np.testing.assert_allclose(cap_rho(hemi, b), 1.0, rtol=1e-15)


def test_cap_points_lie_on_the_sphere():
    # every profile point is at distance r from the center at height -r cos(theta)
    for theta in (0.4, math.pi / 3, math.pi / 2, 2.2, 2.9):
        for r in (0.5, 1.0, 2.0):
            spec = CapSpec(theta=theta, r=r)
            b = np.linspace(0.0, math.pi / 2, 401)
            rho = np.asarray(cap_rho(spec, b))
            x = rho * np.sin(b)
            z = rho * np.cos(b)
            dist = np.sqrt(x**2 + (z + r * math.cos(theta)) ** 2)
            np.testing.assert_allclose(dist, r, rtol=1e-14)


def test_cap_radius_from_point_inverts_profile():
    for theta in (0.5, math.pi / 2, 2.4):
        spec = CapSpec(theta=theta, r=1.3)
        b = np.linspace(0.0, math.pi / 2, 57)
        rho = np.asarray(cap_rho(spec, b))
        r = cap_radius_from_point(theta, rho, rho * np.cos(b))
        np.testing.assert_allclose(r, 1.3, rtol=1e-13)


def test_cap_phi_derivatives_boundary_values():
    for theta in (0.6, math.pi / 3, math.pi / 2, 2.0):
        spec = CapSpec(theta=theta, r=1.7)
        dphi, ddphi = cap_phi_derivatives(spec, math.pi / 2)
        assert float(dphi) == pytest.approx(1 / math.tan(theta), abs=1e-14)
        assert float(ddphi) == pytest.approx(0.0, abs=1e-13)


def test_cap_phi_derivatives_match_finite_differences():
    spec = CapSpec(theta=math.pi / 3, r=1.0)
    b = np.linspace(0.05, math.pi / 2 - 0.05, 301)
    h = 1e-5
    dphi, ddphi = cap_phi_derivatives(spec, b)
    fd1 = (np.asarray(cap_phi(spec, b + h)) - np.asarray(cap_phi(spec, b - h))) / (2 * h)
    fd2 = (np.asarray(cap_phi(spec, b + h)) - 2 * np.asarray(cap_phi(spec, b))
           + np.asarray(cap_phi(spec, b - h))) / h**2
    np.testing.assert_allclose(dphi, fd1, atol=1e-9)
    np.testing.assert_allclose(ddphi, fd2, atol=1e-5)


def test_cap_functionals_reference_values():
    f = cap_functionals(CapSpec(theta=math.pi / 2, r=1.0), 2)
    assert f.area == pytest.approx(2 * math.pi, rel=1e-13)
    assert f.volume == pytest.approx(2 * math.pi / 3, rel=1e-13)
    assert f.wetted_area == pytest.approx(math.pi, rel=1e-13)
    assert f.boundary_length == pytest.approx(2 * math.pi, rel=1e-13)
    for q in f.quermass:
        assert q == pytest.approx(2 * math.pi / 3, rel=1e-13)

    f3 = cap_functionals(CapSpec(theta=math.pi / 3, r=1.0), 2)
    for q in f3.quermass:
        assert q == pytest.approx(5 * math.pi / 24, rel=1e-13)
    f3b = cap_functionals(CapSpec(theta=math.pi / 3, r=2.0), 2)
    assert f3b.quermass[0] == pytest.approx(5 * math.pi / 3, rel=1e-13)
    assert f3b.quermass[1] == pytest.approx(5 * math.pi / 6, rel=1e-13)
    assert f3b.quermass[2] == pytest.approx(5 * math.pi / 12, rel=1e-13)


def test_cap_functionals_scaling():
    spec1 = CapSpec(theta=1.1, r=1.0)
    lam = 2.0
    spec2 = CapSpec(theta=1.1, r=lam)
    for n in (2, 3):
        f1 = cap_functionals(spec1, n)
        f2 = cap_functionals(spec2, n)
        assert f2.area == pytest.approx(lam**n * f1.area, rel=1e-14)
        assert f2.volume == pytest.approx(lam ** (n + 1) * f1.volume, rel=1e-14)
        for k in range(n + 2):
            assert f2.quermass[k] == pytest.approx(
                lam ** (n + 1 - k) * f1.quermass[k], rel=1e-14)


def test_cap_wetting_energy_constant():
    # n = 2 closed form against direct integration
    for theta in (0.5, math.pi / 3, math.pi / 2, 2.0, 2.7):
        c = math.cos(theta)
        closed = math.pi * (1 - c) ** 2 * (2 + c) / 3
        assert cap_wetting_energy_constant(theta, 2) == pytest.approx(closed, rel=1e-13)
    # n = 3 neutral angle: half the unit-ball measure of B^4 times ... check by quad
    def integrand(beta, theta, n):
        rho = float(cap_rho(CapSpec(theta=theta, r=1.0), beta))
        return rho ** (n + 1) * math.sin(beta) ** (n - 1)

    for n, theta in ((3, math.pi / 2), (3, 1.0), (2, 2.0)):
        omega = 2 * math.pi if n == 2 else 4 * math.pi
        val, _ = quad(integrand, 0, math.pi / 2, args=(theta, n), epsabs=1e-13)
        b_quad = omega * val / (n + 1)
        assert cap_wetting_energy_constant(theta, n) == pytest.approx(b_quad, rel=1e-10)
    assert cap_wetting_energy_constant(math.pi / 2, 3) == pytest.approx(
        math.pi**2 / 4, rel=1e-12)


def test_cap_graph_matches_profile_on_grid():
    g = build_grid("axisym", 2, 64, 0)
    spec = CapSpec(theta=math.pi / 3, r=1.0)
    phi = cap_graph(spec, g)
    np.testing.assert_allclose(np.exp(phi), cap_rho(spec, g.beta), rtol=1e-14)
    assert np.exp(phi[-1]) == pytest.approx(math.sqrt(3) / 2, rel=1e-13)

    g2 = build_grid("full2d", 2, 48, 16)
    phi2 = cap_graph(spec, g2)
    assert phi2.shape == (48, 16)
    assert float(np.max(np.abs(phi2 - phi2[:, :1]))) == 0.0


def test_cap_gradient_hessian_match_finite_differences():
    spec = CapSpec(theta=math.pi / 3, r=1.0)
    g = build_grid("axisym", 2, 512, 0)
    dphi = cap_gradient(spec, g)
    hess = cap_hessian(spec, g)
    b = g.beta
    h = 1e-6
    fd1 = (np.asarray(cap_phi(spec, b + h)) - np.asarray(cap_phi(spec, b - h))) / (2 * h)
    np.testing.assert_allclose(dphi, fd1, atol=1e-9)
    d_exact, dd_exact = cap_phi_derivatives(spec, b)
    np.testing.assert_allclose(hess[:, 0], dd_exact, atol=1e-13)
    cot = np.cos(b) / np.sin(b)
    np.testing.assert_allclose(hess[:, 1], cot * d_exact, atol=1e-13)


def test_ellipsoid_graph_and_curvatures():
    g = build_grid("axisym", 2, 256, 0)
    # eps = 0 degenerates to the unit sphere
    np.testing.assert_allclose(ellipsoid_graph(0.0, g), 0.0, atol=1e-15)
    k1, k2 = ellipsoid_curvatures(0.0, g.beta)
    np.testing.assert_allclose(k1, 1.0, rtol=1e-14)
    np.testing.assert_allclose(k2, 1.0, rtol=1e-14)

    # implicit surface x^2 + (1 + eps) z^2 = 1: check the graph satisfies it
    eps = 0.4
    rho = np.exp(ellipsoid_graph(eps, g))
    x = rho * np.sin(g.beta)
    z = rho * np.cos(g.beta)
    np.testing.assert_allclose(x**2 + (1 + eps) * z**2, 1.0, rtol=1e-13)

    # meridian curvature from the standard parametric formula, independently
    a = 1.0
    c = 1.0 / math.sqrt(1 + eps)
    k1e, k2e = ellipsoid_curvatures(eps, g.beta)
    t = np.arctan2(x / a, z / c)
    denom = (a * np.cos(t)) ** 2 + (c * np.sin(t)) ** 2
    k_mer = a * c / denom**1.5
    k_par = c / (a * np.sqrt(denom))
    np.testing.assert_allclose(np.sort(np.stack([k1e, k2e]), axis=0),
                               np.sort(np.stack([k_mer, k_par]), axis=0), rtol=1e-11)


def test_convergence_order_examples():
    assert convergence_order(np.array([1e-2, 2.5e-3, 6.25e-4])) == pytest.approx(2.0, abs=1e-12)
    assert convergence_order(np.array([1e-3, 1e-3])) == pytest.approx(0.0, abs=1e-12)
    assert math.isinf(convergence_order(np.array([1e-3, 0.0])))
    with pytest.raises(ValueError):
        convergence_order(np.array([1e-3]))


def test_convergence_order_with_spacings():
    hs = np.array([0.1, 0.05, 0.02])
    errs = 3.0 * hs**2
    assert convergence_order(errs, spacings=hs) == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(ValueError):
        convergence_order(errs, spacings=np.array([0.1, 0.05]))


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.15, max_value=2.99),
       st.floats(min_value=0.2, max_value=3.0))
def test_cap_rho_window(theta, r):
    # rho stays inside [r min(1, ...), r] bounds of the profile
    spec = CapSpec(theta=theta, r=r)
    b = np.linspace(0.0, math.pi / 2, 101)
    rho = np.asarray(cap_rho(spec, b))
    assert np.all(rho > 0)
    assert np.all(rho <= r * (1 + abs(math.cos(theta))) + 1e-12)
    # profile height at the ring equals r sin(theta)
    assert rho[-1] == pytest.approx(r * math.sin(theta), rel=1e-12)

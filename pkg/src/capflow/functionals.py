"""Integral functionals of capillary graphs.

Areas, the enclosed volume, the capillary quermassintegrals V_{k, theta}, the
Minkowski-formula residuals, scale-invariant inequality ratios, reference
constants of the model cap family, and least-squares cap fitting.

Conventions.  The wetting energy constant b_theta is the enclosed volume of
the unit cap; V_k of a cap of radius r equals b_theta r^{n+1-k} for every k,
which is the equality case of all the inequalities quantified here.  The
quermassintegral chain couples interior curvature integrals with boundary
curvature integrals of the contact ring viewed inside the supporting
hyperplane:

    V_{k+1} = [ integral_Sigma H_k dA
                - (cos(theta) sin^k(theta) / n) *
                  integral_{boundary} H^ring_{k-1} ds ] / (n + 1).

In axisym mode the ring is a round sphere of radius R_b and the boundary
integrals collapse to Omega_{n-1} R_b^{n-k}; in full2d mode k = 2 needs the
ring length and k = 3 the curve curvature, done by finite differences of the
radial profile (exposed but not acceptance-grade).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .geometry import (
    GeometryField,
    RadialGraph,
    boundary_diagnostics,
    geometry,
)
from .grid import integrate, unit_ball_volume, unit_sphere_area
from .oracle import cap_radius_from_point


@dataclass(frozen=True)
class ReferenceConstants:
    """Closed-form data of the model cap family at one contact angle."""

    theta: float
    n: int
    b_theta: float
    cap_sphere_area: float
    cap_disc_area: float


def reference_constants(theta: float, n: int) -> ReferenceConstants:
    """Constants of the unit cap: volume b_theta, spherical area, wetted disc area.

    n = 2 uses closed forms; higher n integrates the defining 1d profiles
    adaptively to absolute tolerance 1e-10.  (The closed antiderivative route
    in the oracle module is the independent cross-check.)
    """
    if not 0.0 < theta < math.pi:
        raise ValueError(f"theta must lie in (0, pi), got {theta}")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    c = math.cos(theta)
    if n == 2:
        b = math.pi * (1.0 - c) ** 2 * (2.0 + c) / 3.0
        sphere = 2 * math.pi * (1.0 - c)
    else:
        val, _ = quad(lambda z: (1.0 - z * z) ** (n / 2), c, 1.0, epsabs=1e-10, epsrel=1e-12)
        b = unit_ball_volume(n) * val
        ring, _ = quad(lambda t: math.sin(t) ** (n - 1), 0.0, theta, epsabs=1e-10, epsrel=1e-12)
        sphere = unit_sphere_area(n - 1) * ring
    disc = unit_ball_volume(n) * math.sin(theta) ** n
    return ReferenceConstants(
        theta=theta, n=n, b_theta=b, cap_sphere_area=sphere, cap_disc_area=disc
    )


def area_weights(rg: RadialGraph, geom: GeometryField | None = None) -> np.ndarray:
    """Quadrature weights against the surface measure dA = rho^n v d(sigma)."""
    if geom is None:
        geom = geometry(rg)
    return rg.grid.weights * geom.rho**rg.grid.n * geom.v


def surface_area(rg: RadialGraph, geom: GeometryField | None = None) -> float:
    if geom is None:
        geom = geometry(rg)
    return integrate(geom.rho**rg.grid.n * geom.v, rg.grid)


def enclosed_volume(rg: RadialGraph) -> float:
    """Volume of the region between the graph and the supporting hyperplane."""
    n = rg.grid.n
    return integrate(np.exp((n + 1) * rg.phi), rg.grid) / (n + 1)


def _ring_radii(rg: RadialGraph) -> np.ndarray | float:
    return np.exp(rg.phi[-1])


def boundary_length(rg: RadialGraph) -> float:
    """Measure of the contact ring; arclength of the radial curve in full2d."""
    R = _ring_radii(rg)
    if rg.grid.mode == "axisym":
        return unit_sphere_area(rg.grid.n - 1) * float(R) ** (rg.grid.n - 1)
    dR = (np.roll(R, -1) - np.roll(R, 1)) / (2 * rg.grid.dalpha)
    return float(np.sum(np.sqrt(R * R + dR * dR)) * rg.grid.dalpha)


def wetted_area(rg: RadialGraph) -> float:
    """Area enclosed by the contact ring in the supporting hyperplane.

    Green's theorem for a radial curve gives the exact identity
    area = (1/2) integral R(alpha)^2 d(alpha), which the periodic rule
    evaluates spectrally; in axisym mode this is the round-disc formula.
    """
    R = _ring_radii(rg)
    if rg.grid.mode == "axisym":
        return unit_ball_volume(rg.grid.n) * float(R) ** rg.grid.n
    return float(0.5 * np.sum(R * R) * rg.grid.dalpha)


def _boundary_curvature_integral(rg: RadialGraph, j: int) -> float:
    """integral over the contact ring of H^ring_j ds, the ring seen inside the hyperplane.

    Axisym rings are round spheres of radius R_b, so the integral is
    Omega_{n-1} R_b^{n-1-j} exactly.  Full2d supports j = 0 (length) and
    j = 1 (curve curvature by finite differences).
    """
    R = _ring_radii(rg)
    n = rg.grid.n
    if rg.grid.mode == "axisym":
        return unit_sphere_area(n - 1) * float(R) ** (n - 1 - j)
    if j == 0:
        return boundary_length(rg)
    if j == 1:
        da = rg.grid.dalpha
        dR = (np.roll(R, -1) - np.roll(R, 1)) / (2 * da)
        d2R = (np.roll(R, -1) - 2 * R + np.roll(R, 1)) / da**2
        g = R * R + dR * dR
        kappa = (R * R + 2 * dR * dR - R * d2R) / g**1.5
        return float(np.sum(kappa * np.sqrt(g)) * da)
    raise ValueError(f"full2d boundary curvature order must be 0 or 1, got {j}")


def quermassintegral(
    rg: RadialGraph, k: int, geom: GeometryField | None = None
) -> float:
    """The capillary quermassintegral V_{k, theta}, k = 0 .. n+1."""
    n = rg.grid.n
    if not 0 <= k <= n + 1:
        raise ValueError(f"k must lie in 0..{n + 1}, got {k}")
    if k == 0:
        return enclosed_volume(rg)
    if geom is None:
        geom = geometry(rg)
    cos_t, sin_t = math.cos(rg.theta), math.sin(rg.theta)
    if k == 1:
        return (surface_area(rg, geom) - cos_t * wetted_area(rg)) / (n + 1)
    dA = area_weights(rg, geom)
    interior = float(np.sum(dA * geom.Hk[..., k - 1]))
    ring = _boundary_curvature_integral(rg, k - 2)
    return (interior - (cos_t * sin_t ** (k - 1) / n) * ring) / (n + 1)


def quermassintegrals(rg: RadialGraph, geom: GeometryField | None = None) -> tuple[float, ...]:
    if geom is None:
        geom = geometry(rg)
    return tuple(quermassintegral(rg, k, geom) for k in range(rg.grid.n + 2))


def minkowski_residual(
    rg: RadialGraph, k: int, geom: GeometryField | None = None
) -> float:
    """Defect of the k-th Minkowski identity, k = 1 .. n.

    For every capillary graph (solution of the flow or not) the identity
    integral H_{k-1} (1 + cos(theta) nu_e) dA = integral H_k u dA holds, so
    the returned number is pure discretization error.
    """
    n = rg.grid.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    if geom is None:
        geom = geometry(rg)
    dA = area_weights(rg, geom)
    lhs = float(np.sum(dA * geom.Hk[..., k - 1] * (1.0 + math.cos(rg.theta) * geom.nu_e)))
    rhs = float(np.sum(dA * geom.Hk[..., k] * geom.u))
    return lhs - rhs


@dataclass(frozen=True)
class CapFit:
    """Axis-constrained cap fit: radius, weighted rms residual, center height."""

    r: float
    rms: float
    center_height: float


def fit_cap(rg: RadialGraph, geom: GeometryField | None = None) -> CapFit:
    """Best-fit cap of the family |x - r cos(theta) e| = r, by area-weighted
    least squares in the single parameter r.

    Each Gauss-Newton step solves the one-dimensional normal equation in
    closed form; the starting value averages the exact per-node radii, so on
    exact caps the iteration is already converged at machine precision.
    """
    if geom is None:
        geom = geometry(rg)
    W = area_weights(rg, geom)
    z = geom.position[..., -1]
    norm2 = np.sum(geom.position**2, axis=-1)
    c = math.cos(rg.theta)

    r = float(np.sum(W * cap_radius_from_point(rg.theta, np.sqrt(norm2), z)) / np.sum(W))
    for _ in range(50):
        q = np.sqrt(norm2 + 2 * r * c * z + (r * c) ** 2)
        d = q - r
        dd = (c * z + r * c * c) / q - 1.0
        step = -float(np.sum(W * d * dd) / np.sum(W * dd * dd))
        r += step
        if abs(step) <= 1e-15 * abs(r):
            break
    q = np.sqrt(norm2 + 2 * r * c * z + (r * c) ** 2)
    rms = float(np.sqrt(np.sum(W * (q - r) ** 2) / np.sum(W)))
    return CapFit(r=r, rms=rms, center_height=-r * c)


@dataclass(frozen=True)
class CapFitFree:
    """Diagnostic cap fit with a free axial center offset."""

    r: float
    center_height: float
    rms: float


def fit_cap_free(rg: RadialGraph, geom: GeometryField | None = None) -> CapFitFree:
    """Least-squares sphere with free radius and free center height on the axis.

    Diagnostic only: the constrained fit is the one the convergence theory
    speaks about; comparing the two separates radial error from axial drift.
    """
    if geom is None:
        geom = geometry(rg)
    W = area_weights(rg, geom)
    z = geom.position[..., -1]
    norm2 = np.sum(geom.position**2, axis=-1)

    base = fit_cap(rg, geom)
    r, zc = base.r, base.center_height
    for _ in range(50):
        q = np.sqrt(norm2 - 2 * zc * z + zc * zc)
        d = q - r
        j_r = -np.ones_like(q)
        j_z = (zc - z) / q
        a11 = float(np.sum(W * j_r * j_r))
        a12 = float(np.sum(W * j_r * j_z))
        a22 = float(np.sum(W * j_z * j_z))
        b1 = -float(np.sum(W * j_r * d))
        b2 = -float(np.sum(W * j_z * d))
        det = a11 * a22 - a12 * a12
        if det <= 0.0:
            break
        dr = (a22 * b1 - a12 * b2) / det
        dz = (a11 * b2 - a12 * b1) / det
        r += dr
        zc += dz
        if abs(dr) <= 1e-15 * abs(r) and abs(dz) <= 1e-15 * (abs(zc) + abs(r)):
            break
    q = np.sqrt(norm2 - 2 * zc * z + zc * zc)
    rms = float(np.sqrt(np.sum(W * (q - r) ** 2) / np.sum(W)))
    return CapFitFree(r=r, center_height=zc, rms=rms)


@dataclass(frozen=True)
class FunctionalReport:
    """Snapshot of every reported functional of one graph at one time."""

    t: float
    area: float
    boundary_length: float
    wetted_area: float
    H_integral: float
    V: tuple[float, ...]
    mink_residual: tuple[float, ...]
    static_residual: float
    iso_ratio: float
    af_ratio: tuple[float, ...]
    minkowski_gap: float
    min_u: float
    min_kappa: float
    max_H: float
    bc_residual: float
    grad_mu_ubar: float
    grad_mu_H: float
    fitted_cap: CapFit


def inequality_ratios(
    report: FunctionalReport, constants: ReferenceConstants
) -> tuple[float, tuple[float, ...], float]:
    """Scale-invariant inequality indicators (iso_ratio, af_ratio, minkowski_gap).

    af_ratio[k] = (V_k / b)^{1/(n+1-k)} / (V_0 / b)^{1/(n+1)} for k = 1 .. n;
    iso_ratio is the k = 1 entry; minkowski_gap is the defect of

        integral H dA - sin(theta) cos(theta) |boundary|
            >= n (n+1) b^{2/(n+1)} V_0^{(n-1)/(n+1)}.

    All three are exactly balanced on caps.
    """
    n = constants.n
    b = constants.b_theta
    base = (report.V[0] / b) ** (1.0 / (n + 1))
    af = tuple(
        (report.V[k] / b) ** (1.0 / (n + 1 - k)) / base for k in range(1, n + 1)
    )
    lhs = report.H_integral - math.sin(constants.theta) * math.cos(constants.theta) * report.boundary_length
    rhs = n * (n + 1) * b ** (2.0 / (n + 1)) * report.V[0] ** ((n - 1.0) / (n + 1))
    return af[0], af, lhs - rhs


def functional_report(
    rg: RadialGraph,
    t: float = 0.0,
    geom: GeometryField | None = None,
    constants: ReferenceConstants | None = None,
) -> FunctionalReport:
    """Assemble the full report for one graph."""
    if geom is None:
        geom = geometry(rg)
    if constants is None:
        constants = reference_constants(rg.theta, rg.grid.n)
    n = rg.grid.n
    dA = area_weights(rg, geom)
    V = quermassintegrals(rg, geom)
    mink = tuple(minkowski_residual(rg, k, geom) for k in range(1, n + 1))
    diag = boundary_diagnostics(rg, geom)
    fit = fit_cap(rg, geom)
    partial = FunctionalReport(
        t=t,
        area=surface_area(rg, geom),
        boundary_length=boundary_length(rg),
        wetted_area=wetted_area(rg),
        H_integral=float(np.sum(dA * geom.H)),
        V=V,
        mink_residual=mink,
        static_residual=float(np.max(np.abs(geom.static_residual))),
        iso_ratio=math.nan,
        af_ratio=(),
        minkowski_gap=math.nan,
        min_u=float(np.min(geom.u)),
        min_kappa=float(np.min(geom.kappa)),
        max_H=float(np.max(geom.H)),
        bc_residual=diag.bc_defect,
        grad_mu_ubar=diag.grad_mu_ubar,
        grad_mu_H=diag.grad_mu_H,
        fitted_cap=fit,
    )
    iso, af, gap = inequality_ratios(partial, constants)
    return dataclasses.replace(partial, iso_ratio=iso, af_ratio=af, minkowski_gap=gap)

"""Closed-form reference states: spherical caps and an ellipsoid family.

Everything in this module is independent of the finite-difference machinery.
The cap profile, its derivatives, and its geometric functionals come from
elementary closed forms, so these states can certify the discrete operators.

A cap of contact angle theta and radius r is the sphere of radius r centered
at height -r cos(theta) on the symmetry axis, intersected with the upper half
space.  Its radial profile over the hemisphere is

    rho(beta) = r (-cos(theta) cos(beta) + w(beta)),
    w(beta) = sqrt(1 - cos^2(theta) sin^2(beta)),

and phi = log rho has the remarkably compact derivatives

    phi'  = cos(theta) sin(beta) / w,
    phi'' = cos(theta) cos(beta) / w^3,

with v = sqrt(1 + phi'^2) = 1 / w.  Both principal curvatures equal 1/r in
exact arithmetic, which is what makes the cap a useful oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Grid, sin_power_antiderivative, unit_ball_volume, unit_sphere_area


@dataclass(frozen=True)
class CapSpec:
    """A spherical cap: contact angle theta in (0, pi), radius r > 0."""

    theta: float
    r: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < math.pi:
            raise ValueError(f"theta must lie in (0, pi), got {self.theta}")
        if not self.r > 0.0:
            raise ValueError(f"r must be positive, got {self.r}")

    @property
    def center_height(self) -> float:
        return -self.r * math.cos(self.theta)


def cap_rho(spec: CapSpec, beta: np.ndarray | float) -> np.ndarray | float:
    """Radial profile of the cap at polar angle beta."""
    c = math.cos(spec.theta)
    beta = np.asarray(beta, dtype=float)
    w = np.sqrt(1.0 - (c * np.sin(beta)) ** 2)
    return spec.r * (-c * np.cos(beta) + w)


def cap_phi(spec: CapSpec, beta: np.ndarray | float) -> np.ndarray | float:
    """Log-radial profile phi = log rho of the cap."""
    return np.log(cap_rho(spec, beta))


def cap_phi_derivatives(spec: CapSpec, beta: np.ndarray | float):
    """Closed-form (phi', phi'') of the cap profile.

    These satisfy the capillary boundary condition exactly at beta = pi/2,
    where phi' = cot(theta) and phi'' = 0.
    """
    c = math.cos(spec.theta)
    beta = np.asarray(beta, dtype=float)
    w = np.sqrt(1.0 - (c * np.sin(beta)) ** 2)
    return c * np.sin(beta) / w, c * np.cos(beta) / w**3


def cap_graph(spec: CapSpec, grid: Grid) -> np.ndarray:
    """Sample phi = log rho of the cap on a grid (broadcast over alpha in full2d)."""
    phi_beta = cap_phi(spec, grid.beta)
    if grid.mode == "axisym":
        return np.asarray(phi_beta, dtype=float)
    return np.broadcast_to(phi_beta[:, None], grid.field_shape).copy()


def cap_gradient(spec: CapSpec, grid: Grid) -> np.ndarray:
    """Exact orthonormal-frame gradient of the cap graph, shaped like gradient()."""
    dphi, _ = cap_phi_derivatives(spec, grid.beta)
    if grid.mode == "axisym":
        return np.asarray(dphi, dtype=float)
    out = np.zeros(grid.field_shape + (2,))
    out[..., 0] = dphi[:, None]
    return out


def cap_hessian(spec: CapSpec, grid: Grid) -> np.ndarray:
    """Exact orthonormal-frame Hessian of the cap graph, shaped like hessian()."""
    dphi, d2phi = cap_phi_derivatives(spec, grid.beta)
    parallel = (grid.cos_beta / grid.sin_beta) * dphi
    if grid.mode == "axisym":
        return np.stack([np.asarray(d2phi), parallel], axis=-1)
    out = np.zeros(grid.field_shape + (3,))
    out[..., 0] = d2phi[:, None]
    out[..., 2] = parallel[:, None]
    return out


def cap_wetting_energy_constant(theta: float, n: int) -> float:
    """The constant b such that the cap of radius r encloses volume b * r^{n+1}.

    b = |B^n| * integral_{cos theta}^{1} (1 - z^2)^{n/2} dz.  For n = 2 this
    reduces to pi (1 - cos theta)^2 (2 + cos theta) / 3; general n is done
    with the sine-power antiderivative after z = cos(t).
    """
    if not 0.0 < theta < math.pi:
        raise ValueError(f"theta must lie in (0, pi), got {theta}")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    c = math.cos(theta)
    if n == 2:
        return math.pi * (1.0 - c) ** 2 * (2.0 + c) / 3.0
    # z = cos(t) turns the integrand into sin^{n+1}(t) on [0, theta].
    return unit_ball_volume(n) * float(sin_power_antiderivative(n + 1, theta))


@dataclass(frozen=True)
class CapFunctionals:
    """Exact geometric functionals of one spherical cap."""

    area: float
    boundary_length: float
    wetted_area: float
    volume: float
    quermass: tuple[float, ...]


def cap_functionals(spec: CapSpec, n: int) -> CapFunctionals:
    """Closed-form area, boundary measures, and quermassintegrals V_0 .. V_{n+1}.

    The cap is the equality case of the capillary quermassintegral chain:
    V_k = b_theta * r^{n+1-k} for every k, with b_theta the wetting-energy
    constant of the unit cap.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    theta, r = spec.theta, spec.r
    area = r**n * unit_sphere_area(n - 1) * float(sin_power_antiderivative(n - 1, theta))
    ring = r * math.sin(theta)
    boundary_length = unit_sphere_area(n - 1) * ring ** (n - 1)
    wetted = unit_ball_volume(n) * ring**n
    b = cap_wetting_energy_constant(theta, n)
    quermass = tuple(b * r ** (n + 1 - k) for k in range(n + 2))
    return CapFunctionals(
        area=area,
        boundary_length=boundary_length,
        wetted_area=wetted,
        volume=quermass[0],
        quermass=quermass,
    )


def cap_radius_from_point(theta: float, norm_x: np.ndarray | float, z: np.ndarray | float):
    """Radius of the cap through a point, solving |x - r cos(theta) e| = r.

    With the cap center at height -r cos(theta), the quadratic in r has the
    single positive root

        r = (cos(theta) z + sqrt(cos^2(theta) z^2 + sin^2(theta) |x|^2))
            / sin^2(theta),

    where |x| is the Euclidean norm of the point and z its height.
    """
    if not 0.0 < theta < math.pi:
        raise ValueError(f"theta must lie in (0, pi), got {theta}")
    c, s = math.cos(theta), math.sin(theta)
    norm_x = np.asarray(norm_x, dtype=float)
    z = np.asarray(z, dtype=float)
    return (c * z + np.sqrt((c * z) ** 2 + (s * norm_x) ** 2)) / (s * s)


def ellipsoid_graph(eps: float, grid: Grid) -> np.ndarray:
    """Log-radial profile of the axisymmetric ellipsoid x^2 + ... + (1+eps) z^2 = 1.

    As a radial graph over the hemisphere this is
    rho(beta) = 1 / sqrt(1 + eps cos^2 beta).  At theta = pi/2 it meets the
    floor orthogonally, so it is a valid capillary graph for that angle.
    """
    if eps <= -1.0:
        raise ValueError(f"eps must exceed -1, got {eps}")
    rho = 1.0 / np.sqrt(1.0 + eps * grid.cos_beta**2)
    phi = np.log(rho)
    if grid.mode == "axisym":
        return phi
    return np.broadcast_to(phi[:, None], grid.field_shape).copy()


def ellipsoid_curvatures(eps: float, beta: np.ndarray | float):
    """Exact principal curvatures (meridian, parallel) of the ellipsoid graph.

    With semi-axes a = 1 (horizontal) and c = 1/sqrt(1+eps) (vertical), the
    point of the graph at polar angle beta corresponds to the parameter t
    with sin t = rho sin beta, cos t = rho cos beta / c, and

        kappa_meridian = a c / w^3,   kappa_parallel = c / (a w),
        w = sqrt(a^2 cos^2 t + c^2 sin^2 t).

    Signs follow the convention that the unit sphere has curvature +1.
    """
    beta = np.asarray(beta, dtype=float)
    c = 1.0 / math.sqrt(1.0 + eps)
    rho = 1.0 / np.sqrt(1.0 + eps * np.cos(beta) ** 2)
    sin_t = rho * np.sin(beta)
    cos_t = rho * np.cos(beta) / c
    w = np.sqrt(cos_t**2 + (c * sin_t) ** 2)
    return c / w**3, c / w


def convergence_order(
    errors: np.ndarray, ratio: float = 2.0, spacings: np.ndarray | None = None
) -> float:
    """Least-squares slope of log(error) against log(h).

    ``errors`` is ordered from coarse to fine; by default the spacing is
    assumed to shrink by ``ratio`` each level, or pass the actual
    ``spacings`` when the refinement is not an exact geometric sequence.
    Identical errors give order 0.0.  Any nonpositive entry means the
    sequence is not a convergence study at all and the result is +inf as
    an explicit flag.
    """
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or errors.size < 2:
        raise ValueError(f"need a 1d sequence of at least 2 errors, got shape {errors.shape}")
    if np.any(errors <= 0.0) or not np.all(np.isfinite(errors)):
        return math.inf
    if spacings is None:
        if ratio <= 1.0:
            raise ValueError(f"refinement ratio must exceed 1, got {ratio}")
        log_h = -np.arange(errors.size) * math.log(ratio)
    else:
        spacings = np.asarray(spacings, dtype=float)
        if spacings.shape != errors.shape:
            raise ValueError(f"spacings shape {spacings.shape} does not match errors shape {errors.shape}")
        if np.any(spacings <= 0.0):
            raise ValueError("spacings must be positive")
        log_h = np.log(spacings)
    log_e = np.log(errors)
    slope = np.polyfit(log_h, log_e, 1)[0]
    return float(slope)

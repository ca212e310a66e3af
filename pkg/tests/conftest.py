"""Shared helpers for the capflow test suite."""
from __future__ import annotations

import math

import numpy as np

from capflow.flow import perturbation_field
from capflow.geometry import RadialGraph, geometry
from capflow.grid import build_grid
from capflow.oracle import CapSpec, cap_graph


def cap_rg(theta: float, r: float = 1.0, mode: str = "axisym", n: int = 2,
           n_beta: int = 128, n_alpha: int = 0) -> RadialGraph:
    """Exact spherical-cap graph on a fresh grid."""
    grid = build_grid(mode, n, n_beta, n_alpha)
    phi = cap_graph(CapSpec(theta=theta, r=r), grid)
    return RadialGraph(grid=grid, phi=phi, theta=theta)


def random_graph(theta: float, seed: int, mode: str = "axisym", n: int = 2,
                 n_beta: int = 256, n_alpha: int = 0, eps: float = 0.05,
                 modes: int = 3, r: float = 1.0) -> RadialGraph:
    """Random star-shaped graph: cap base plus a boundary-compatible bump."""
    grid = build_grid(mode, n, n_beta, n_alpha)
    phi = cap_graph(CapSpec(theta=theta, r=r), grid)
    phi = phi + perturbation_field(grid, theta, eps, modes, seed)
    return RadialGraph(grid=grid, phi=phi, theta=theta)


def random_convex_graph(theta: float, seed: int, mode: str = "axisym",
                        n: int = 2, n_beta: int = 256, n_alpha: int = 0,
                        eps: float = 0.08, modes: int = 3) -> RadialGraph:
    """Random strictly convex graph, halving the bump size until convex."""
    grid = build_grid(mode, n, n_beta, n_alpha)
    base = cap_graph(CapSpec(theta=theta, r=1.0), grid)
    for _ in range(12):
        rg = RadialGraph(grid=grid, phi=base + perturbation_field(grid, theta, eps, modes, seed),
                         theta=theta)
        if float(np.min(geometry(rg).kappa)) > 0.0:
            return rg
        eps *= 0.5
    raise RuntimeError(f"no convex sample for theta={theta}, seed={seed}")


def hemisphere_exact(n: int = 2, n_beta: int = 128) -> RadialGraph:
    return cap_rg(math.pi / 2, 1.0, "axisym", n, n_beta)

"""Volume-preserving curvature flow toward spherical caps.

Evolves a star-shaped capillary graph by the normal speed

    f = n (1 + cos(theta) <nu, e>) - H u,

discretized in flux form on the (beta, alpha) grid and integrated with
Heun's method under an explicit parabolic time-step bound.  A Lagrange
multiplier removes the component of f that changes enclosed volume, so
the discrete flow preserves V_0 to time-integration accuracy and can
settle onto the cap family instead of sliding along it.

`run` drives a whole trajectory: it emits functional reports on a fixed
time cadence, tracks the monotonicity monitors for the quermassintegrals,
and classifies the outcome as converged, not converged, or aborted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RadialGraph, geometry, scalar_rhs
from .grid import Grid, build_grid, unit_ball_volume, unit_sphere_area
from .functionals import (
    FunctionalReport,
    ReferenceConstants,
    functional_report,
    quermassintegral,
    reference_constants,
)
from .oracle import CapSpec, cap_graph

logger = logging.getLogger(__name__)

_MAX_KERNEL_STEPS = 200_000_000


class FlowDiverged(RuntimeError):
    """Raised by `step` when the update produces non-finite values."""


@dataclass(frozen=True)
class InitialSpec:
    """Initial surface: an exact cap, optionally with a seeded perturbation.

    The perturbation is built from modes whose beta-derivative vanishes at
    the contact ring (and, in the full grid, whose alpha-derivative vanishes
    there too), so the capillary boundary condition holds at t = 0 up to
    discretization error.  `eps` is the max-norm amplitude added to phi.
    """

    kind: str = "cap"
    r: float = 1.0
    eps: float = 0.1
    modes: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("cap", "perturbed_cap"):
            raise ValueError(f"unknown initial kind {self.kind!r}")
        if not (self.r > 0):
            raise ValueError(f"cap radius must be positive, got {self.r}")
        if self.kind == "perturbed_cap":
            if not (self.eps >= 0):
                raise ValueError(f"perturbation amplitude must be >= 0, got {self.eps}")
            if self.modes < 1:
                raise ValueError(f"need at least one perturbation mode, got {self.modes}")


@dataclass(frozen=True)
class FlowConfig:
    """Full description of one flow run."""

    theta: float
    mode: str = "axisym"
    n: int = 2
    n_beta: int = 128
    n_alpha: int = 0
    initial: InitialSpec = field(default_factory=InitialSpec)
    dt_safety: float = 0.4
    t_max: float = 50.0
    stop_tol: float = 1e-7
    mono_tol_rel: float = 1e-8
    report_dt: float = 0.1
    conserve_volume: bool = True
    use_kernel: bool = True

    def __post_init__(self) -> None:
        if not (0 < self.theta < math.pi):
            raise ValueError(f"theta out of (0, pi): {self.theta}")
        if self.mode not in ("axisym", "full2d"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "full2d" and self.n != 2:
            raise ValueError(f"full2d mode requires n = 2, got n = {self.n}")
        if not (0 < self.dt_safety <= 1):
            raise ValueError(f"dt_safety must lie in (0, 1], got {self.dt_safety}")
        if not (self.t_max >= 0):
            raise ValueError(f"t_max must be >= 0, got {self.t_max}")
        if not (self.stop_tol > 0):
            raise ValueError(f"stop_tol must be positive, got {self.stop_tol}")
        if not (self.report_dt > 0):
            raise ValueError(f"report_dt must be positive, got {self.report_dt}")
        if not (self.mono_tol_rel >= 0):
            raise ValueError(f"mono_tol_rel must be >= 0, got {self.mono_tol_rel}")

    def build_grid(self) -> Grid:
        return build_grid(self.mode, self.n, self.n_beta, self.n_alpha)


@dataclass(frozen=True)
class Baseline:
    """Initial-time quantities the monitors compare against."""

    V: tuple[float, ...]
    min_u: float
    min_ubar: float
    min_kappa: float
    max_H: float
    c0_estimate: float
    bc_residual: float


@dataclass(frozen=True)
class MonitorRecord:
    """Health snapshot attached to each reported state."""

    volume_drift: float
    v1_increase_events: int
    vk_increase_events: tuple[int, ...]
    min_u: float
    min_kappa: float
    max_H: float
    static_residual: float
    bc_residual: float
    max_F: float
    run_min_u: float
    run_min_kappa: float
    run_max_H: float


@dataclass(frozen=True)
class FlowState:
    """One reported point on the trajectory."""

    rg: RadialGraph
    t: float
    step: int
    dt_last: float
    monitors: MonitorRecord


@dataclass(frozen=True)
class RunResult:
    config: FlowConfig
    status: str
    states: tuple[FlowState, ...]
    reports: tuple[FunctionalReport, ...]
    baseline: Baseline
    constants: ReferenceConstants

    @property
    def final_state(self) -> FlowState:
        return self.states[-1]

    @property
    def final_report(self) -> FunctionalReport:
        return self.reports[-1]


def perturbation_field(grid: Grid, theta: float, eps: float, modes: int, seed: int) -> np.ndarray:
    """Boundary-compatible perturbation of phi with max-norm eps.

    Axisym modes are cos(2 m beta): even at the pole and with vanishing
    slope at beta = pi/2, so the contact-angle condition of the base cap
    survives unchanged.  The full grid adds nonaxisymmetric modes under a
    sin^l(beta) cos^2(beta) envelope, which kills both the alpha-dependence
    and its beta-slope at the ring.
    """
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, size=modes)
    axi = np.zeros_like(grid.beta)
    for m, c in enumerate(coeffs, start=1):
        axi += c * np.cos(2 * m * grid.beta)
    if grid.mode == "axisym":
        delta = axi
    else:
        delta = np.repeat(axi[:, None], grid.n_alpha, axis=1)
        envelope = np.sin(grid.beta) ** 2 * np.cos(grid.beta) ** 2
        for ell in range(1, modes + 1):
            amp = rng.uniform(-1.0, 1.0)
            phase = rng.uniform(0.0, 2 * math.pi)
            delta += amp * envelope[:, None] * np.cos(ell * grid.alpha[None, :] + phase)
    peak = float(np.max(np.abs(delta)))
    if peak > 0:
        delta *= eps / peak
    return delta


def build_initial(config: FlowConfig, grid: Grid | None = None) -> RadialGraph:
    """Realize config.initial on the run's grid."""
    if grid is None:
        grid = config.build_grid()
    spec = config.initial
    phi = cap_graph(CapSpec(theta=config.theta, r=spec.r), grid)
    if spec.kind == "perturbed_cap" and spec.eps > 0:
        phi = phi + perturbation_field(grid, config.theta, spec.eps, spec.modes, spec.seed)
    return RadialGraph(grid=grid, phi=phi, theta=config.theta)


def projected_rhs(rg: RadialGraph, conserve_volume: bool = True) -> np.ndarray:
    """Normal speed with the volume-changing mean removed.

    The multiplier is the area-average of f in the measure rho^(n+1) sigma,
    which is exactly d V_0 / dt per unit speed, so subtracting it makes the
    discrete flow volume-preserving stage by stage.
    """
    F = scalar_rhs(rg)
    if conserve_volume:
        wv = rg.grid.weights * np.exp((rg.grid.n + 1) * rg.phi)
        F = F - float(np.sum(wv * F) / np.sum(wv))
    return F


def stable_dt(rg: RadialGraph, dt_safety: float = 0.4) -> float:
    """Explicit parabolic bound dt <= safety * min(h^2 / (2 n D)).

    The stiffest term of the speed is (1/v) Delta_sigma phi / rho with
    diffusivity D = 1 / (rho v) in sigma-coordinates, so the bound scales
    with the squared angular spacing times min(rho v).
    """
    if not (0 < dt_safety <= 1):
        raise ValueError(f"dt_safety must lie in (0, 1], got {dt_safety}")
    gf = geometry(rg)
    spacing = rg.grid.sigma_spacing()
    rho_v = np.exp(rg.phi) * gf.v
    return dt_safety * float(np.min(spacing**2 * rho_v)) / (2 * rg.grid.n)


def step(
    rg: RadialGraph,
    dt: float,
    conserve_volume: bool = True,
    rhs0: np.ndarray | None = None,
) -> RadialGraph:
    """One Heun step of size dt; raises FlowDiverged on non-finite output."""
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    F0 = projected_rhs(rg, conserve_volume) if rhs0 is None else rhs0
    phi_star = rg.phi + dt * F0
    if not np.all(np.isfinite(phi_star)):
        raise FlowDiverged("predictor produced non-finite phi")
    F1 = projected_rhs(rg.with_phi(phi_star), conserve_volume)
    phi_new = rg.phi + 0.5 * dt * (F0 + F1)
    if not np.all(np.isfinite(phi_new)):
        raise FlowDiverged("corrector produced non-finite phi")
    return rg.with_phi(phi_new)


def euler_step(rg: RadialGraph, dt: float, conserve_volume: bool = True) -> RadialGraph:
    """Single forward-Euler step, kept for time-accuracy comparisons."""
    F0 = projected_rhs(rg, conserve_volume)
    phi_new = rg.phi + dt * F0
    if not np.all(np.isfinite(phi_new)):
        raise FlowDiverged("Euler step produced non-finite phi")
    return rg.with_phi(phi_new)


def monitor(
    report: FunctionalReport,
    baseline: Baseline,
    events: tuple[int, ...],
    run_extrema: tuple[float, float, float],
    max_F: float,
) -> MonitorRecord:
    """Assemble the health record for one reported state."""
    drift = abs(report.V[0] - baseline.V[0]) / abs(baseline.V[0])
    return MonitorRecord(
        volume_drift=drift,
        v1_increase_events=events[0],
        vk_increase_events=events,
        min_u=report.min_u,
        min_kappa=report.min_kappa,
        max_H=report.max_H,
        static_residual=report.static_residual,
        bc_residual=report.bc_residual,
        max_F=max_F,
        run_min_u=run_extrema[0],
        run_min_kappa=run_extrema[1],
        run_max_H=run_extrema[2],
    )


def _baseline_from_report(rg: RadialGraph, report: FunctionalReport) -> Baseline:
    gf = geometry(rg)
    min_ubar = float(np.min(gf.ubar))
    c0 = (1.0 - abs(math.cos(rg.theta))) * min_ubar
    return Baseline(
        V=report.V,
        min_u=report.min_u,
        min_ubar=min_ubar,
        min_kappa=report.min_kappa,
        max_H=report.max_H,
        c0_estimate=c0,
        bc_residual=report.bc_residual,
    )


def _vk_monitors(rg: RadialGraph, gf) -> np.ndarray:
    n = rg.grid.n
    return np.array([quermassintegral(rg, k, geom=gf) for k in range(1, n + 1)])


class _NumpyAdvancer:
    """Reference inner loop, mirroring the compiled kernel's contract."""

    def __init__(self, config: FlowConfig, rg: RadialGraph, mono_tol: np.ndarray) -> None:
        self.config = config
        self.rg = rg
        self.mono_tol = mono_tol
        self.t = 0.0
        self.steps = 0
        self.dt_last = 0.0
        self.events = np.zeros(rg.grid.n, dtype=np.int64)
        self.extrema = np.array([np.inf, np.inf, -np.inf])
        gf = geometry(rg)
        self.vk_prev = _vk_monitors(rg, gf)

    def advance(self, until_t: float) -> tuple[float, int]:
        """Returns (max_F, flag) with flags matching the kernel module."""
        from . import _kernels as K

        cfg = self.config
        while True:
            F = projected_rhs(self.rg, cfg.conserve_volume)
            max_F = float(np.max(np.abs(F)))
            if not np.isfinite(max_F):
                return max_F, K.FLAG_NONFINITE
            if max_F < cfg.stop_tol:
                return max_F, K.FLAG_CONVERGED
            if self.t >= cfg.t_max:
                return max_F, K.FLAG_TMAX
            if self.t >= until_t:
                return max_F, K.FLAG_TICK

            dt = stable_dt(self.rg, cfg.dt_safety)
            try:
                self.rg = step(self.rg, dt, cfg.conserve_volume, rhs0=F)
            except FlowDiverged:
                return max_F, K.FLAG_NONFINITE
            self.t += dt
            self.steps += 1
            self.dt_last = dt

            gf = geometry(self.rg)
            self.extrema[0] = min(self.extrema[0], float(np.min(gf.u)))
            self.extrema[1] = min(self.extrema[1], float(np.min(gf.kappa)))
            self.extrema[2] = max(self.extrema[2], float(np.max(gf.H)))
            vk = _vk_monitors(self.rg, gf)
            self.events += vk > self.vk_prev + self.mono_tol
            self.vk_prev = vk


class _KernelAdvancer:
    """Drives the numba kernel with the same contract as _NumpyAdvancer."""

    def __init__(self, config: FlowConfig, rg: RadialGraph, mono_tol: np.ndarray) -> None:
        g = rg.grid
        n = g.n
        self.config = config
        self.grid = g
        self.phi = rg.phi.copy()
        self.mono_tol = mono_tol
        self.t = 0.0
        self.steps = 0
        self.dt_last = 0.0
        self.events = np.zeros(n, dtype=np.int64)
        self.extrema = np.array([np.inf, np.inf, -np.inf])
        gf = geometry(rg)
        self.vk_prev = _vk_monitors(rg, gf)
        self.sin_if = np.sin(g.beta_edges[1:-1]) ** (n - 1)
        self.cotb = np.cos(g.beta) / np.sin(g.beta)
        self.comb_nm1 = np.array([math.comb(n - 1, k) for k in range(n)], dtype=float)
        self.comb_n = np.array([math.comb(n, k) for k in range(n + 1)], dtype=float)

    @property
    def rg(self) -> RadialGraph | None:
        if not np.all(np.isfinite(self.phi)):
            return None
        return RadialGraph(grid=self.grid, phi=self.phi.copy(), theta=self.config.theta)

    def advance(self, until_t: float) -> tuple[float, int]:
        from . import _kernels as K

        cfg = self.config
        g = self.grid
        t, did, dt_last, max_F, flag = K.axisym_advance(
            self.phi,
            self.t,
            until_t,
            cfg.t_max,
            g.n,
            g.dbeta,
            cfg.theta,
            g.sin_beta,
            g.cos_beta,
            self.cotb,
            self.sin_if,
            g.cell_mass,
            g.weights,
            cfg.dt_safety,
            cfg.stop_tol,
            cfg.conserve_volume,
            self.comb_nm1,
            self.comb_n,
            unit_ball_volume(g.n),
            unit_sphere_area(g.n - 1),
            self.mono_tol,
            self.vk_prev,
            self.events,
            self.extrema,
            _MAX_KERNEL_STEPS,
        )
        self.t = t
        self.steps += did
        if did > 0:
            self.dt_last = dt_last
        return float(max_F), int(flag)


def run(config: FlowConfig) -> RunResult:
    """Integrate the flow to convergence, t_max, or breakdown.

    Reports are emitted at t = 0 and then at the first accepted step past
    each multiple of report_dt (steps are never shortened to land on the
    cadence exactly); the terminal state is always reported.
    """
    from . import _kernels as K

    grid = config.build_grid()
    rg0 = build_initial(config, grid)
    constants = reference_constants(config.theta, config.n)

    gf0 = geometry(rg0)
    report0 = functional_report(rg0, 0.0, geom=gf0, constants=constants)
    baseline = _baseline_from_report(rg0, report0)
    if baseline.bc_residual > 0.1:
        logger.warning(
            "initial data is far from the contact-angle condition (residual %.3g); proceeding anyway",
            baseline.bc_residual,
        )
    mono_tol = config.mono_tol_rel * np.abs(np.asarray(baseline.V[1 : config.n + 1]))

    if config.use_kernel and config.mode == "axisym":
        adv: _NumpyAdvancer | _KernelAdvancer = _KernelAdvancer(config, rg0, mono_tol)
    else:
        adv = _NumpyAdvancer(config, rg0, mono_tol)

    F0 = projected_rhs(rg0, config.conserve_volume)
    max_F0 = float(np.max(np.abs(F0)))
    states: list[FlowState] = []
    reports: list[FunctionalReport] = []

    def emit(rg: RadialGraph, t: float, max_F: float) -> None:
        gf = geometry(rg)
        rep = functional_report(rg, t, geom=gf, constants=constants)
        extrema = (
            min(adv.extrema[0], rep.min_u),
            min(adv.extrema[1], rep.min_kappa),
            max(adv.extrema[2], rep.max_H),
        )
        rec = monitor(rep, baseline, tuple(int(e) for e in adv.events), extrema, max_F)
        states.append(FlowState(rg=rg, t=t, step=adv.steps, dt_last=adv.dt_last, monitors=rec))
        reports.append(rep)

    emit(rg0, 0.0, max_F0)

    status = None
    next_tick = config.report_dt
    while status is None:
        t_before = adv.t
        max_F, flag = adv.advance(next_tick)
        if flag == K.FLAG_CONVERGED:
            status = "converged"
        elif flag == K.FLAG_TMAX:
            status = "not_converged"
        elif flag == K.FLAG_NONFINITE:
            status = "aborted"
            logger.error("flow aborted at t=%.6g after %d steps: non-finite state", adv.t, adv.steps)
        elif adv.t <= t_before:
            status = "aborted"
            logger.error("flow stalled at t=%.6g after %d steps", adv.t, adv.steps)
        if adv.steps > 0 and (status is not None or adv.t >= next_tick):
            rg_cur = adv.rg
            if rg_cur is not None:
                emit(rg_cur, adv.t, max_F)
        while next_tick <= adv.t:
            next_tick += config.report_dt
    return RunResult(
        config=config,
        status=status,
        states=tuple(states),
        reports=tuple(reports),
        baseline=baseline,
        constants=constants,
    )

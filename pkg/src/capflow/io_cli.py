"""Configuration parsing, serialized outputs, and the command-line driver.

The config format is deliberately flat: UTF-8 text, one `key = value` per
statement, statements separated by newlines or `;`, comments start with
`#`.  Unknown keys are hard errors.  Angles always carry an explicit
`deg` or `rad` unit.  All outputs of one invocation land in a single
directory together with exactly one manifest describing them.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .flow import FlowConfig, FlowState, InitialSpec, RunResult, build_initial, run, step, stable_dt
from .functionals import functional_report, minkowski_residual, reference_constants, surface_area
from .geometry import RadialGraph, geometry
from .grid import Grid, build_grid, gradient, hessian
from .oracle import CapSpec, cap_graph, convergence_order, ellipsoid_curvatures, ellipsoid_graph
from .flow import perturbation_field


class ConfigError(ValueError):
    """Raised for malformed or contradictory run configuration."""


_CONFIG_KEYS = (
    "theta",
    "mode",
    "n",
    "n_beta",
    "n_alpha",
    "initial",
    "dt_safety",
    "t_max",
    "stop_tol",
    "mono_tol_rel",
    "report_dt",
    "conserve_volume",
    "use_kernel",
)

_INITIAL_KEYS = ("r", "eps", "modes", "seed")

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True, "false": False, "no": False, "off": False, "0": False}


def _parse_angle(raw: str, key: str) -> float:
    parts = raw.split()
    if len(parts) != 2 or parts[1] not in ("deg", "rad"):
        raise ConfigError(f"{key} needs an explicit unit, e.g. '{key} = 90 deg' or '{key} = 1.2 rad', got {raw!r}")
    try:
        value = float(parts[0])
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} value {parts[0]!r}") from exc
    return math.radians(value) if parts[1] == "deg" else value


def _parse_bool(raw: str, key: str) -> bool:
    try:
        return _BOOL_WORDS[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"cannot parse boolean {key} value {raw!r}") from None


def _parse_initial(raw: str) -> InitialSpec:
    parts = raw.split()
    if not parts:
        raise ConfigError("empty initial specification")
    kind = parts[0]
    kwargs: dict[str, float | int | str] = {}
    for item in parts[1:]:
        if "=" not in item:
            raise ConfigError(f"initial parameter {item!r} is not of the form key=value")
        k, _, v = item.partition("=")
        if k not in _INITIAL_KEYS:
            raise ConfigError(f"unknown initial parameter {k!r} (known: {', '.join(_INITIAL_KEYS)})")
        try:
            kwargs[k] = int(v) if k in ("modes", "seed") else float(v)
        except ValueError as exc:
            raise ConfigError(f"cannot parse initial parameter {item!r}") from exc
    try:
        return InitialSpec(kind=kind, **kwargs)  # type: ignore[arg-type]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _statements(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for stmt in line.split(";"):
            stmt = stmt.strip()
            if stmt:
                yield lineno, stmt


def parse_config(text: str, extra_keys: tuple[str, ...] = ()) -> tuple[FlowConfig, dict[str, str]]:
    """Parse config text into a validated FlowConfig.

    `extra_keys` names additional keys some subcommands understand (the
    sweep's theta list); their raw values are returned in the dict.
    Everything else unknown is a hard error.
    """
    seen: dict[str, str] = {}
    extras: dict[str, str] = {}
    for lineno, stmt in _statements(text):
        if "=" not in stmt:
            raise ConfigError(f"line {lineno}: statement {stmt!r} is not of the form key = value")
        key, _, raw = stmt.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key in extra_keys:
            extras[key] = raw
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        seen[key] = raw

    if "theta" not in seen:
        raise ConfigError("missing theta (e.g. 'theta = 90 deg')")

    kwargs: dict[str, object] = {"theta": _parse_angle(seen.pop("theta"), "theta")}
    for key, raw in seen.items():
        if key == "mode":
            kwargs[key] = raw
        elif key in ("n", "n_beta", "n_alpha"):
            try:
                kwargs[key] = int(raw)
            except ValueError as exc:
                raise ConfigError(f"cannot parse integer {key} value {raw!r}") from exc
        elif key in ("dt_safety", "t_max", "stop_tol", "mono_tol_rel", "report_dt"):
            try:
                kwargs[key] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"cannot parse {key} value {raw!r}") from exc
        elif key in ("conserve_volume", "use_kernel"):
            kwargs[key] = _parse_bool(raw, key)
        elif key == "initial":
            kwargs[key] = _parse_initial(raw)
    try:
        config = FlowConfig(**kwargs)  # type: ignore[arg-type]
        config.build_grid()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config, extras


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def timeseries_header(n: int) -> str:
    cols = ["t", "dt", "max_F"]
    cols += [f"V{k}" for k in range(n + 2)]
    cols += [f"mink_res_{k}" for k in range(1, n + 1)]
    cols += ["static_res", "iso_ratio"]
    cols += [f"af_ratio_{k}" for k in range(1, n + 1)]
    cols += ["mink_gap", "min_u", "min_kappa", "max_H", "bc_res", "r_fit", "rms_fit"]
    return ",".join(cols)


def write_timeseries(result: RunResult, path: str) -> None:
    """Write one CSV row per reported state, full double precision.

    Rows carry no wall-clock data, so identical configs on identical code
    produce byte-identical files.
    """
    if not result.states:
        raise ValueError("empty trajectory")
    n = result.config.n
    lines = [timeseries_header(n)]
    for state, rep in zip(result.states, result.reports):
        row = [rep.t, state.dt_last, state.monitors.max_F]
        row += list(rep.V)
        row += list(rep.mink_residual[:n])
        row += [rep.static_residual, rep.iso_ratio]
        row += list(rep.af_ratio[:n])
        row += [rep.minkowski_gap, rep.min_u, rep.min_kappa, rep.max_H, rep.bc_residual]
        row += [rep.fitted_cap.r, rep.fitted_cap.rms]
        lines.append(",".join(_fmt(x) for x in row))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write time series to {path}: {exc}") from exc


def write_snapshot(rg: RadialGraph, t: float, path: str) -> None:
    """Plain-text surface dump, format `capflow-snapshot v1`.

    Line 2 is `mode n N_beta N_alpha theta t`; each following line is one
    node: `beta alpha phi x y z` in the full grid, `beta phi x z` in the
    axisymmetric one.  phi is written with 17 significant digits so the
    read side reproduces it bit for bit.
    """
    g = rg.grid
    rho = np.exp(rg.phi)
    lines = ["capflow-snapshot v1", f"{g.mode} {g.n} {g.n_beta} {g.n_alpha} {_fmt(rg.theta)} {_fmt(t)}"]
    if g.mode == "axisym":
        for j in range(g.n_beta):
            b = g.beta[j]
            x = rho[j] * math.sin(b)
            z = rho[j] * math.cos(b)
            lines.append(f"{_fmt(b)} {_fmt(rg.phi[j])} {_fmt(x)} {_fmt(z)}")
    else:
        for j in range(g.n_beta):
            b = g.beta[j]
            for i in range(g.n_alpha):
                a = g.alpha[i]
                r = rho[j, i]
                x = r * math.sin(b) * math.cos(a)
                y = r * math.sin(b) * math.sin(a)
                z = r * math.cos(b)
                lines.append(f"{_fmt(b)} {_fmt(a)} {_fmt(rg.phi[j, i])} {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write snapshot to {path}: {exc}") from exc


def read_snapshot(path: str) -> tuple[RadialGraph, float]:
    """Inverse of write_snapshot; phi round-trips bit-exactly."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read snapshot from {path}: {exc}") from exc
    if not lines or lines[0] != "capflow-snapshot v1":
        raise ConfigError(f"{path}: not a capflow-snapshot v1 file")
    head = lines[1].split()
    if len(head) != 6:
        raise ConfigError(f"{path}: malformed snapshot header line {lines[1]!r}")
    mode, n, n_beta, n_alpha = head[0], int(head[1]), int(head[2]), int(head[3])
    theta, t = float(head[4]), float(head[5])
    grid = build_grid(mode, n, n_beta, n_alpha)
    body = lines[2:]
    expected = n_beta * (n_alpha if mode == "full2d" else 1)
    if len(body) != expected:
        raise ConfigError(f"{path}: expected {expected} node lines, found {len(body)}")
    if mode == "axisym":
        phi = np.array([float(line.split()[1]) for line in body])
    else:
        phi = np.array([float(line.split()[2]) for line in body]).reshape(n_beta, n_alpha)
    return RadialGraph(grid=grid, phi=phi, theta=theta), t


@dataclass(frozen=True)
class RunManifest:
    """Provenance note written next to every batch of output files."""

    command: str
    config_text: str
    version: str
    grid: str
    started: str
    finished: str
    status: str
    outputs: tuple[str, ...]


def write_manifest(manifest: RunManifest, path: str) -> None:
    lines = [
        "capflow-manifest v1",
        f"command: {manifest.command}",
        f"version: {manifest.version}",
        f"grid: {manifest.grid}",
        f"started: {manifest.started}",
        f"finished: {manifest.finished}",
        f"status: {manifest.status}",
        "outputs: " + ", ".join(manifest.outputs),
        "config:",
    ]
    lines += ["  " + ln for ln in manifest.config_text.splitlines()]
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write manifest to {path}: {exc}") from exc


class _Reporter:
    """Accumulates JSON-lines verdicts; mirrors them to stdout unless quiet."""

    def __init__(self, out_dir: str, quiet: bool) -> None:
        self.path = os.path.join(out_dir, "verdicts.jsonl")
        self.quiet = quiet
        self.lines: list[str] = []
        self.failures = 0

    def verdict(self, **fields: object) -> None:
        line = json.dumps(fields, sort_keys=True)
        self.lines.append(line)
        if not self.quiet:
            print(line)
        if fields.get("pass") is False:
            self.failures += 1

    def flush(self) -> None:
        with open(self.path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.lines:
                fh.write(line + "\n")


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _out_dir(args: argparse.Namespace) -> str:
    out = args.out or os.environ.get("CAPFLOW_OUT") or "capflow_out"
    os.makedirs(out, exist_ok=True)
    return out


def _grid_desc(config: FlowConfig) -> str:
    if config.mode == "axisym":
        return f"axisym n={config.n} n_beta={config.n_beta}"
    return f"full2d n={config.n} n_beta={config.n_beta} n_alpha={config.n_alpha}"


def _random_graph(grid: Grid, theta: float, eps: float, modes: int, seed: int) -> RadialGraph:
    """BC-compatible random star-shaped graph around the unit cap."""
    phi = cap_graph(CapSpec(theta=theta, r=1.0), grid)
    phi = phi + perturbation_field(grid, theta, eps, modes, seed)
    return RadialGraph(grid=grid, phi=phi, theta=theta)


def _random_convex_graph(grid: Grid, theta: float, seed: int, eps: float = 0.08, modes: int = 3) -> RadialGraph:
    """Shrink the perturbation until the sample is strictly convex."""
    for _ in range(12):
        rg = _random_graph(grid, theta, eps, modes, seed)
        if geometry(rg).strictly_convex:
            return rg
        eps *= 0.5
    return RadialGraph(grid=grid, phi=cap_graph(CapSpec(theta=theta, r=1.0), grid), theta=theta)


def _cmd_run(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    config_text = _read_config(args)
    config, _ = parse_config(config_text)
    if args.seed is not None:
        config = _override_seed(config, args.seed)
    started = _now()
    result = run(config)
    finished = _now()
    rep = _Reporter(out, args.quiet)

    csv_path = os.path.join(out, "timeseries.csv")
    snap_path = os.path.join(out, "final_state.txt")
    write_timeseries(result, csv_path)
    final = result.final_state
    write_snapshot(final.rg, final.t, snap_path)
    rep.verdict(
        check="run",
        status=result.status,
        t_end=final.t,
        steps=final.step,
        max_F=final.monitors.max_F,
        volume_drift=final.monitors.volume_drift,
        r_fit=result.final_report.fitted_cap.r,
        rms_fit=result.final_report.fitted_cap.rms,
        **{"pass": result.status == "converged"},
    )
    rep.flush()
    manifest = RunManifest(
        command="run",
        config_text=config_text,
        version=__version__,
        grid=_grid_desc(config),
        started=started,
        finished=finished,
        status=result.status,
        outputs=("timeseries.csv", "final_state.txt", "verdicts.jsonl"),
    )
    write_manifest(manifest, os.path.join(out, "manifest.txt"))
    if not args.quiet:
        print(f"{result.status}: t={final.t:.6g} steps={final.step} max|F|={final.monitors.max_F:.3g}")
    return 0 if result.status == "converged" else 1


def _override_seed(config: FlowConfig, seed: int) -> FlowConfig:
    import dataclasses

    return dataclasses.replace(config, initial=dataclasses.replace(config.initial, seed=seed))


def _read_config(args: argparse.Namespace) -> str:
    if args.config is None:
        raise ConfigError("this subcommand requires --config PATH")
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc


def _cmd_check_identities(args: argparse.Namespace) -> int:
    """Minkowski identity residuals on randomized capillary graphs."""
    out = _out_dir(args)
    rep = _Reporter(out, args.quiet)
    base_seed = args.seed if args.seed is not None else 0
    thetas_deg = (30.0, 60.0, 90.0, 120.0, 150.0)
    graphs_per_theta = 4
    started = _now()
    for n in (2, 3):
        grid = build_grid("axisym", n, 512, 0)
        tol = 1e-5
        for theta_deg in thetas_deg:
            theta = math.radians(theta_deg)
            for i in range(graphs_per_theta):
                seed = base_seed + 1000 * i + int(theta_deg)
                rg = _random_graph(grid, theta, eps=0.08, modes=3, seed=seed)
                gf = geometry(rg)
                area = surface_area(rg, geom=gf)
                for k in range(1, n + 1):
                    res = abs(minkowski_residual(rg, k, geom=gf)) / area
                    rep.verdict(
                        check="minkowski_identity",
                        n=n,
                        theta_deg=theta_deg,
                        seed=seed,
                        k=k,
                        residual=res,
                        tol=tol,
                        **{"pass": bool(res < tol)},
                    )
    rep.flush()
    _write_check_manifest(args, out, "check-identities", started, rep)
    return 0 if rep.failures == 0 else 1


def _cmd_check_inequalities(args: argparse.Namespace) -> int:
    """Isoperimetric-type ratios on convex samples, theta <= 90 deg."""
    out = _out_dir(args)
    rep = _Reporter(out, args.quiet)
    base_seed = args.seed if args.seed is not None else 0
    started = _now()
    tol = 1e-6
    for theta_deg in (30.0, 60.0, 90.0):
        theta = math.radians(theta_deg)
        grid2 = build_grid("axisym", 2, 256, 0)
        const2 = reference_constants(theta, 2)
        grid3 = build_grid("axisym", 3, 256, 0)
        const3 = reference_constants(theta, 3)
        for i in range(10):
            seed = base_seed + 100 * i + int(theta_deg)
            rg = _random_convex_graph(grid2, theta, seed)
            r2 = functional_report(rg, constants=const2)
            rep.verdict(
                check="iso_ratio",
                n=2,
                theta_deg=theta_deg,
                seed=seed,
                ratio=r2.iso_ratio,
                tol=tol,
                **{"pass": bool(r2.iso_ratio >= 1 - tol)},
            )
            rg3 = _random_convex_graph(grid3, theta, seed)
            r3 = functional_report(rg3, constants=const3)
            gap_scale = max(abs(r3.H_integral), 1.0)
            ok = (
                r3.af_ratio[0] >= 1 - tol
                and r3.af_ratio[1] >= 1 - tol
                and r3.minkowski_gap >= -tol * gap_scale
            )
            rep.verdict(
                check="af_and_minkowski",
                n=3,
                theta_deg=theta_deg,
                seed=seed,
                af_ratio_1=r3.af_ratio[0],
                af_ratio_2=r3.af_ratio[1],
                minkowski_gap=r3.minkowski_gap,
                tol=tol,
                **{"pass": bool(ok)},
            )
    rep.flush()
    _write_check_manifest(args, out, "check-inequalities", started, rep)
    return 0 if rep.failures == 0 else 1


def _cmd_convergence_study(args: argparse.Namespace) -> int:
    """Spatial orders on the ellipsoid oracle, temporal order via Richardson."""
    out = _out_dir(args)
    rep = _Reporter(out, args.quiet)
    started = _now()
    eps = 0.5
    theta = math.pi / 2
    sizes = (32, 64, 128, 256)
    errs_grad, errs_hess, errs_H = [], [], []
    for nb in sizes:
        grid = build_grid("axisym", 2, nb, 0)
        rg = RadialGraph(grid=grid, phi=ellipsoid_graph(eps, grid), theta=theta)
        beta = grid.beta
        denom = 1.0 + eps * np.cos(beta) ** 2
        dphi_exact = eps * np.sin(beta) * np.cos(beta) / denom
        ddphi_exact = eps * (np.cos(2 * beta) * denom + eps * np.sin(2 * beta) ** 2 / 2) / denom**2
        gf = geometry(rg)
        errs_grad.append(float(np.max(np.abs(gf.grad - dphi_exact))))
        errs_hess.append(float(np.max(np.abs(gf.hess[:, 0] - ddphi_exact))))
        k_m, k_p = ellipsoid_curvatures(eps, grid.beta)
        H_exact = k_m + (grid.n - 1) * k_p
        errs_H.append(float(np.max(np.abs(gf.H - H_exact))))
    hs = [1.0 / (nb - 0.5) for nb in sizes]
    for name, errs in (("gradient", errs_grad), ("hessian", errs_hess), ("mean_curvature", errs_H)):
        order = convergence_order(errs, spacings=hs)
        rep.verdict(
            check="spatial_order",
            operator=name,
            order=order,
            errors=errs,
            tol="[1.8, 2.2]",
            **{"pass": bool(1.8 <= order <= 2.2)},
        )

    # Temporal order: fixed grid, fixed horizon, halved steps, Richardson
    # against a much finer reference.
    cfg = FlowConfig(
        theta=math.pi / 3,
        n_beta=48,
        initial=InitialSpec(kind="perturbed_cap", r=1.0, eps=0.08, modes=2, seed=5),
    )
    rg0 = build_initial(cfg)
    dt0 = stable_dt(rg0, 0.8)
    n_steps = 16
    ref = rg0
    refine = 16
    for _ in range(n_steps * refine):
        ref = step(ref, dt0 / refine)
    errs_t = []
    dts = []
    for level in range(3):
        dt = dt0 / 2**level
        state = rg0
        for _ in range(n_steps * 2**level):
            state = step(state, dt)
        errs_t.append(float(np.max(np.abs(state.phi - ref.phi))))
        dts.append(dt)
    order_t = convergence_order(errs_t, spacings=dts)
    rep.verdict(
        check="temporal_order",
        integrator="heun",
        order=order_t,
        errors=errs_t,
        tol="[1.8, 2.2]",
        **{"pass": bool(1.8 <= order_t <= 2.2)},
    )
    rep.flush()
    _write_check_manifest(args, out, "convergence-study", started, rep)
    return 0 if rep.failures == 0 else 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    """Run the same config across a grid of contact angles."""
    out = _out_dir(args)
    config_text = _read_config(args)
    config, extras = parse_config(config_text, extra_keys=("sweep_theta",))
    if "sweep_theta" not in extras:
        raise ConfigError("sweep needs a 'sweep_theta' key, e.g. 'sweep_theta = 45 deg, 90 deg'")
    thetas = []
    for item in extras["sweep_theta"].split(","):
        thetas.append(_parse_angle(item.strip(), "sweep_theta"))
    if args.seed is not None:
        config = _override_seed(config, args.seed)
    import dataclasses

    rep = _Reporter(out, args.quiet)
    started = _now()
    worst = 0
    for theta in thetas:
        sub = dataclasses.replace(config, theta=theta)
        tag = f"theta_{math.degrees(theta):g}"
        sub_dir = os.path.join(out, tag)
        os.makedirs(sub_dir, exist_ok=True)
        t0 = _now()
        result = run(sub)
        t1 = _now()
        write_timeseries(result, os.path.join(sub_dir, "timeseries.csv"))
        final = result.final_state
        write_snapshot(final.rg, final.t, os.path.join(sub_dir, "final_state.txt"))
        write_manifest(
            RunManifest(
                command=f"sweep:{tag}",
                config_text=config_text,
                version=__version__,
                grid=_grid_desc(sub),
                started=t0,
                finished=t1,
                status=result.status,
                outputs=("timeseries.csv", "final_state.txt"),
            ),
            os.path.join(sub_dir, "manifest.txt"),
        )
        rep.verdict(
            check="sweep_run",
            theta_deg=math.degrees(theta),
            status=result.status,
            t_end=final.t,
            r_fit=result.final_report.fitted_cap.r,
            **{"pass": result.status == "converged"},
        )
        if result.status != "converged":
            worst = 1
    rep.flush()
    _write_check_manifest(args, out, "sweep", started, rep)
    return worst


def _write_check_manifest(args: argparse.Namespace, out: str, command: str, started: str, rep: _Reporter) -> None:
    config_text = ""
    if args.config is not None:
        try:
            config_text = _read_config(args)
        except ConfigError:
            config_text = ""
    write_manifest(
        RunManifest(
            command=command,
            config_text=config_text,
            version=__version__,
            grid="",
            started=started,
            finished=_now(),
            status="pass" if rep.failures == 0 else "fail",
            outputs=("verdicts.jsonl",),
        ),
        os.path.join(out, "manifest.txt"),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capflow", description="capillary cap flow driver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("run", _cmd_run),
        ("check-identities", _cmd_check_identities),
        ("check-inequalities", _cmd_check_inequalities),
        ("convergence-study", _cmd_convergence_study),
        ("sweep", _cmd_sweep),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="path to config text file")
        p.add_argument("--out", default=None, help="output directory (default $CAPFLOW_OUT or ./capflow_out)")
        p.add_argument("--seed", type=int, default=None, help="override the perturbation RNG seed")
        p.add_argument("--quiet", action="store_true", help="suppress stdout chatter")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Every command takes its parameters from an optional ``key = value`` config
file and from flags; flags win. Artifacts are written atomically into the
output directory (``--output-dir``, else ``$DQSD_OUTPUT_DIR``, else
``./dqsd_out``). Exit status: 0 success, 1 numerical failure, 2 bad config.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from . import bridge, dqop_flow, sd_flow, specfun, steady_annular, steady_dimple
from .domain import DiskDomain, DomainError, DomainTooSmall, FlowTrace, cell_centers

OUTPUT_ENV = "DQSD_OUTPUT_DIR"
DEFAULT_OUTPUT = "dqsd_out"

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# --- artifact writers ------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.15g}"


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def write_json(path: Path, obj: dict) -> None:
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# --- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class Param:
    type: Callable[[str], Any]
    default: Any = None
    help: str = ""


def _float_list(s) -> list:
    if isinstance(s, (list, tuple)):
        return [float(x) for x in s]
    return [float(x) for x in str(s).split(",") if x.strip()]


def _scheme(s: str) -> str:
    if s not in ("semi_implicit", "minmove"):
        raise ValueError("scheme must be semi_implicit or minmove")
    return s


DOMAIN_PARAMS = {
    "epsilon": Param(float, 0.01, "interface parameter"),
    "R0": Param(float, 1.0, "disk radius"),
    "delta": Param(float, 0.1, "collar width"),
}

COMMANDS: dict[str, dict[str, Param]] = {
    "steady-annular": {
        **DOMAIN_PARAMS,
        "q0": Param(float, None, "rescaled effective radius r0/epsilon"),
        "r0": Param(float, None, "effective radius (alternative to q0)"),
        "grid_n": Param(int, 2048, "profile samples (cell centers)"),
    },
    "steady-dimple": {
        **DOMAIN_PARAMS,
        "u_center": Param(float, None, "center value u(0)"),
        "u_bar": Param(float, None, "mean mass (alternative)"),
        "r0": Param(float, None, "effective radius (alternative)"),
        "grid_n": Param(int, 2048, "profile samples (cell centers)"),
    },
    "evolve-sd": {
        "shape": Param(str, "cos2", "circle or cosK (radial perturbation of mode K)"),
        "amp": Param(float, 0.05, "perturbation amplitude"),
        "radius": Param(float, 1.0, "base radius"),
        "N": Param(int, 256, "markers"),
        "dt": Param(float, 1e-3, "time step"),
        "T": Param(float, 1.0, "final time"),
        "output_cadence": Param(int, 10, "steps between trace samples"),
        "scheme": Param(_scheme, "semi_implicit", "semi_implicit or minmove"),
    },
    "evolve-dqop": {
        **DOMAIN_PARAMS,
        "init": Param(str, "annular", "annular, dimple, relax or constant"),
        "r0": Param(float, 0.5, "effective radius of the initial state"),
        "u_center": Param(float, 1.0, "dimple center value"),
        "u_bar": Param(float, -0.5, "value for init=constant"),
        "grid_n": Param(int, 2048, "cells"),
        "tau": Param(float, 1e-3, "time step"),
        "T": Param(float, 0.1, "final time"),
        "active_set_tol": Param(float, 1e-9, "complementarity tolerance"),
        "mobility": Param(str, "arithmetic", "face mobility averaging"),
        "output_cadence": Param(int, 1, "steps between trace samples"),
    },
    "bridge-sweep": {
        "epsilons": Param(_float_list, [0.04, 0.02, 0.01], "comma-separated epsilons"),
        "r0": Param(float, 0.5, "circle radius"),
        "R0": Param(float, 1.0, "disk radius"),
        "delta": Param(float, 0.1, "collar width"),
        "separation": Param(float, bridge.BRIDGE_SEPARATION, "scale-separation factor"),
    },
    "specfun-check": {
        "n": Param(int, 200, "sample points"),
        "x_min": Param(float, 0.1, "smallest argument"),
        "x_max": Param(float, 500.0, "largest argument"),
        "nicholson": Param(int, 0, "1 to add the Nicholson-integral residual columns"),
    },
}

SUMMARY_NAME = {
    "steady-annular": "annular",
    "steady-dimple": "dimple",
    "evolve-sd": "sd",
    "evolve-dqop": "dqop",
    "bridge-sweep": "bridge",
    "specfun-check": "specfun",
}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    output_dir: Path = Path(DEFAULT_OUTPUT)

    def domain(self, separation: float = 10.0) -> DiskDomain:
        p = self.params
        return DiskDomain(p["R0"], p["delta"], p["epsilon"], separation)


def read_config_file(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqsd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--output-dir", help=f"artifact directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
        for key, prm in params.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None, help=prm.help)
    return parser


def parse_config(args: Sequence[str], config_file: Optional[str] = None) -> RunConfig:
    """Validated run configuration; raises ConfigError naming the offending key."""
    parser = _build_parser()
    ns, extra = parser.parse_known_args(list(args))
    if extra:
        raise ConfigError(f"unrecognized arguments: {' '.join(extra)}")
    if ns.command is None:
        raise ConfigError("missing command\n" + parser.format_usage())
    table = COMMANDS[ns.command]
    raw = {}
    cfg_path = config_file or ns.config
    if cfg_path:
        raw.update(read_config_file(cfg_path))
    unknown = sorted(set(raw) - set(table))
    if unknown:
        raise ConfigError(f"unknown key(s) for {ns.command}: {', '.join(unknown)}")
    for key in table:
        v = getattr(ns, key)
        if v is not None:
            raw[key] = v
    params = {}
    for key, prm in table.items():
        if key in raw:
            try:
                params[key] = prm.type(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            params[key] = prm.default
    out = ns.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    cfg = RunConfig(ns.command, params, Path(out))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    p = cfg.params
    try:
        if "epsilon" in p:
            cfg.domain()
        if cfg.command == "bridge-sweep":
            for e in p["epsilons"]:
                DiskDomain(p["R0"], p["delta"], e, p["separation"])
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.command == "steady-annular" and (p["q0"] is None) == (p["r0"] is None):
        raise ConfigError("steady-annular needs exactly one of q0, r0")
    if cfg.command == "steady-dimple":
        given = [k for k in ("u_center", "u_bar", "r0") if p[k] is not None]
        if len(given) > 1:
            raise ConfigError(f"steady-dimple takes one of u_center, u_bar, r0 (got {given})")
        if not given:
            raise ConfigError("steady-dimple needs one of u_center, u_bar, r0")
    if cfg.command == "evolve-sd":
        if p["shape"] != "circle" and not (p["shape"].startswith("cos") and p["shape"][3:].isdigit()):
            raise ConfigError(f"bad value for shape: {p['shape']!r}")
    if cfg.command == "evolve-dqop" and p["init"] not in ("annular", "dimple", "relax", "constant"):
        raise ConfigError(f"bad value for init: {p['init']!r}")
    for key in ("grid_n", "N", "n", "output_cadence"):
        if key in p and p[key] is not None and p[key] < 1:
            raise ConfigError(f"{key} must be positive")
    for key in ("dt", "T", "tau"):
        if key in p and not p[key] > 0:
            raise ConfigError(f"{key} must be positive")


# --- commands ---------------------------------------------------------------


def _summary(items: dict) -> str:
    return " ".join(f"{k}={_fmt(v) if isinstance(v, (int, float, np.floating)) else v}" for k, v in items.items())


def _cmd_steady_annular(cfg: RunConfig) -> str:
    p = cfg.params
    dom = cfg.domain()
    q0 = p["q0"] if p["q0"] is not None else p["r0"] / dom.epsilon
    sol = steady_annular.solve_annular(q0, dom)
    r = cell_centers(p["grid_n"], dom.R0)
    prof = steady_annular.annular_profile(sol, r)
    meta = sol.to_dict()
    meta.update(mean_mass=sol.mean_mass(), energy=sol.energy())
    write_json(cfg.output_dir / "annular.json", meta)
    write_csv(cfg.output_dir / "annular_profile.csv", ("r", "u"), zip(prof.grid, prof.values))
    return _summary({"lambda": sol.lam, "qm": sol.qm, "qp": sol.qp, "E": meta["energy"]})


def _cmd_steady_dimple(cfg: RunConfig) -> str:
    p = cfg.params
    dom = cfg.domain()
    if p["u_center"] is not None:
        sol = steady_dimple.solve_dimple_from_center(p["u_center"], dom)
    elif p["u_bar"] is not None:
        sol = steady_dimple.solve_dimple_from_mean(p["u_bar"], dom)
    else:
        sol = steady_dimple.solve_dimple_from_radius(p["r0"], dom)
    r = cell_centers(p["grid_n"], dom.R0)
    prof = steady_dimple.dimple_profile(sol, r)
    meta = sol.to_dict()
    write_json(cfg.output_dir / "dimple.json", meta)
    write_csv(cfg.output_dir / "dimple_profile.csv", ("r", "u"), zip(prof.grid, prof.values))
    return _summary({"lambda": sol.lam, "r_plus": sol.r_plus, "r0": sol.r0, "E": meta["energy"]})


def _initial_curve(p) -> sd_flow.ClosedCurve:
    if p["shape"] == "circle":
        return sd_flow.ClosedCurve.circle(p["radius"], p["N"])
    return sd_flow.perturbed_circle(p["amp"], int(p["shape"][3:]), p["N"], p["radius"])


def _cmd_evolve_sd(cfg: RunConfig) -> str:
    p = cfg.params
    curve0 = _initial_curve(p)
    if p["scheme"] == "semi_implicit":
        curve, trace = sd_flow.sd_evolve(curve0, p["T"], p["dt"], cadence=p["output_cadence"])
        info = dict(trace.info)
    else:
        curve, trace = _minmove_evolve(curve0, p)
        info = dict(trace.info)
    write_csv(cfg.output_dir / "sd_curve.csv", ("x", "y"), curve.markers)
    write_csv(cfg.output_dir / "sd_trace.csv", sd_flow.TRACE_COLUMNS, trace.rows)
    a0 = trace.rows[0][2]
    info.update(initial_area=a0, final_length=trace.rows[-1][1], scheme=p["scheme"])
    write_json(cfg.output_dir / "sd_summary.json", info)
    return _summary(
        {
            "final_radius": info["limit_radius"],
            "area_radius": math.sqrt(abs(a0) / math.pi),
            "k_osc": trace.rows[-1][3],
            "max_area_drift": max(abs(r[2] / a0 - 1.0) for r in trace.rows),
        }
    )


def _minmove_evolve(curve0: sd_flow.ClosedCurve, p):
    n = p["N"]
    th = 2 * math.pi * np.arange(n) / n
    rho = curve0.radial_samples(th)
    trace = FlowTrace(sd_flow.TRACE_COLUMNS)

    def record(t, rho):
        g = sd_flow.curve_geometry(sd_flow.ClosedCurve.from_radial(rho), "polygon")
        trace.record(t, g.length, g.area, g.k_osc, g.iso_ratio)

    steps = max(1, int(round(p["T"] / p["dt"])))
    record(0.0, rho)
    for m in range(1, steps + 1):
        rho = sd_flow.sd_minmove_step(rho, p["dt"])
        if m % p["output_cadence"] == 0 or m == steps:
            record(m * p["dt"], rho)
    curve = sd_flow.ClosedCurve.from_radial(rho)
    X = curve.markers
    trace.info.update(
        limit_radius=float(np.hypot(*(X - X.mean(axis=0)).T).mean()),
        converged=bool(trace.rows[-1][3] < 1e-8),
        steps=steps,
    )
    return curve, trace


def _dqop_initial(cfg: RunConfig) -> dqop_flow.RadialProfile:
    p = cfg.params
    dom = cfg.domain()
    n = p["grid_n"]
    if p["init"] == "annular":
        return dqop_flow.cell_profile(bridge.lift_solution(p["r0"], dom).u, dom, n)
    if p["init"] == "dimple":
        return dqop_flow.cell_profile(steady_dimple.solve_dimple_from_center(p["u_center"], dom).u, dom, n)
    if p["init"] == "constant":
        inner = dom.inner_radius
        c = p["u_bar"]
        return dqop_flow.cell_profile(lambda r: np.where(r < inner, c, -1.0), dom, n)
    return relaxation_profile(p["r0"], dom, n)


def relaxation_profile(r0: float, domain: DiskDomain, n: int, bump: float = 1.05):
    """Annular profile of radius bump*r0, affinely squeezed toward -1 to carry the mass of radius r0."""
    big = steady_annular.solve_annular_radius(bump * r0, domain)
    r = cell_centers(n, domain.R0)
    V = r * (domain.R0 / n)
    u = big.u(r)
    target = 0.5 * bridge.radius_to_mass(r0, domain.R0) * domain.R0**2
    s = (target + V.sum()) / float(np.dot(V, u + 1.0))
    return dqop_flow.RadialProfile(r, -1.0 + s * (u + 1.0), domain)


def _cmd_evolve_dqop(cfg: RunConfig) -> str:
    p = cfg.params
    u0 = _dqop_initial(cfg)
    opts = dqop_flow.SolverOptions(mobility=p["mobility"], active_set_tol=p["active_set_tol"])
    state, trace = dqop_flow.dqop_evolve(u0, p["T"], p["tau"], opts, cadence=p["output_cadence"])
    write_csv(
        cfg.output_dir / "dqop_profile.csv", ("r", "u", "w"), zip(state.profile.grid, state.u, state.w)
    )
    write_csv(cfg.output_dir / "dqop_trace.csv", dqop_flow.TRACE_COLUMNS, trace.rows)
    E = trace.column("E")
    info = dict(trace.info)
    info.update(E_initial=E[0], E_final=E[-1], time=state.time)
    write_json(cfg.output_dir / "dqop_summary.json", info)
    return _summary({"E": E[-1], "ubar": trace.rows[-1][3], "mass_drift": info["mass_drift"], "steps": info["steps"]})


def _cmd_bridge_sweep(cfg: RunConfig) -> str:
    p = cfg.params
    rows = bridge.bridge_sweep(p["epsilons"], p["r0"], p["R0"], p["delta"], p["separation"])
    write_csv(cfg.output_dir / "bridge_sweep.csv", bridge.SWEEP_COLUMNS, rows)
    errs = [r[4] for r in rows]
    out = {"max_abs_err": max(errs)}
    if len(rows) > 1:
        out["order"] = bridge.fitted_order([r[0] for r in rows], errs)
    return _summary(out)


SPECFUN_COLUMNS = ("x", "j0", "j1", "y0", "y1", "m0", "m1", "theta0", "theta1", "cross_residual")


def _cmd_specfun_check(cfg: RunConfig) -> str:
    p = cfg.params
    if not 0 < p["x_min"] < p["x_max"]:
        raise ConfigError("need 0 < x_min < x_max")
    xs = np.geomspace(p["x_min"], p["x_max"], p["n"])
    rows = []
    worst = 0.0
    for x in xs:
        b = specfun.jy(float(x))
        m0, t0 = specfun.polar(0, float(x))
        m1, t1 = specfun.polar(1, float(x))
        ref = 2.0 / (math.pi * x)
        cross = abs(m0 * m1 * math.sin(t0 - t1) - ref) / ref
        row = [x, b.j0, b.j1, b.y0, b.y1, m0, m1, t0, t1, cross]
        if p["nicholson"]:
            row += [
                abs(specfun.nicholson_modulus_sq(0, float(x)) / m0**2 - 1.0),
                abs(specfun.nicholson_modulus_sq(1, float(x)) / m1**2 - 1.0),
            ]
        worst = max(worst, cross)
        rows.append(row)
    header = SPECFUN_COLUMNS + (("nicholson0_residual", "nicholson1_residual") if p["nicholson"] else ())
    write_csv(cfg.output_dir / "specfun_check.csv", header, rows)
    return _summary({"max_cross_residual": worst})


HANDLERS = {
    "steady-annular": _cmd_steady_annular,
    "steady-dimple": _cmd_steady_dimple,
    "evolve-sd": _cmd_evolve_sd,
    "evolve-dqop": _cmd_evolve_dqop,
    "bridge-sweep": _cmd_bridge_sweep,
    "specfun-check": _cmd_specfun_check,
}


def run(config: RunConfig) -> int:
    try:
        line = HANDLERS[config.command](config)
    except ConfigError as exc:
        print(f"dqsd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, DomainTooSmall) as exc:
        # parameters that cannot fit in the disk are a configuration problem
        print(f"dqsd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"dqsd: {config.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{config.command}: {line}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        _build_parser().print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"dqsd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse help or usage errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    return run(cfg)


# Fixed set of invocations reproducing the main artifacts; used to check
# that repeated runs are byte-identical.
ACCEPTANCE_SCRIPT = (
    ["specfun-check", "--n", "50"],
    ["steady-annular", "--q0", "100", "--epsilon", "0.005", "--R0", "1", "--delta", "0.1", "--grid-n", "1024"],
    ["steady-dimple", "--u-center", "1", "--epsilon", "0.01", "--R0", "1", "--grid-n", "1024"],
    ["bridge-sweep", "--epsilons", "0.04,0.02,0.01", "--r0", "0.5"],
    ["evolve-sd", "--shape", "cos2", "--amp", "0.05", "--N", "64", "--T", "0.05", "--dt", "1e-3"],
    ["evolve-dqop", "--init", "relax", "--grid-n", "256", "--T", "0.01", "--tau", "1e-3"],
)


def run_acceptance_script(output_dir) -> list[int]:
    """Run every command of ACCEPTANCE_SCRIPT into ``output_dir``; return exit codes."""
    codes = []
    for args in ACCEPTANCE_SCRIPT:
        codes.append(main(list(args) + ["--output-dir", str(output_dir)]))
    return codes


if __name__ == "__main__":
    sys.exit(main())

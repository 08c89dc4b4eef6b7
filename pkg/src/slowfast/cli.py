"""Command-line entry point.

    slowfast <analyze|sweep|simulate|entry-exit> --config <path> [--out <dir>]

``--config`` takes a YAML file or the name of a bundled preset (see
``slowfast presets``). Each run writes its artifacts plus ``manifest.yaml``,
the fully resolved config, into the output directory. Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import io
from .config import COMMANDS, ConfigError, dump_manifest, load_config
from .errors import (
    BlowUpError,
    ConfigurationError,
    ExplosionNotDetectedError,
    InvalidInputError,
    InvasionInfeasibleError,
    NoExitError,
    SlowFastError,
    StiffnessError,
)
from .gspt import classify_regime, entry_exit_point, relaxation_feasible, slow_fast_curves
from .kinetics import ModelParams, coexistence_state, equilibria, fold_point, stability_thresholds
from .odesim import bifurcation_sweep, detect_limit_cycle, integrate, locate_explosion_window
from .pde import make_initial_condition, measure_front_speed, simulate
from .waves import tw_eigen_analysis

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Failure(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def preset_names() -> list[str]:
    root = resources.files("slowfast") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def read_config_text(ref: str) -> tuple[str, str]:
    path = Path(ref)
    if path.is_file():
        return path.read_text(), str(path)
    name = ref[:-5] if ref.endswith(".yaml") else ref
    if name in preset_names():
        res = resources.files("slowfast") / "presets" / f"{name}.yaml"
        return res.read_text(), f"preset:{name}"
    raise _Failure(EXIT_CONFIG, f"config {ref!r} is neither a file nor a preset ({', '.join(preset_names())})")


def _params(cfg: dict) -> ModelParams:
    return ModelParams(**cfg["params"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_analyze(cfg: dict, out: Path) -> None:
    p = _params(cfg)
    opts = cfg["analyze"]
    rows: list[tuple] = []
    add = lambda *r: rows.append(r)  # noqa: E731

    for name in ("alpha", "beta", "gamma", "delta", "epsilon", "d"):
        add("param", name, getattr(p, name))
    add("param", "allee_regime", p.allee_regime)
    for eq in equilibria(p):
        add("equilibrium", f"{eq.kind}.u", eq.u)
        add("equilibrium", f"{eq.kind}.v", eq.v)
        add("equilibrium", f"{eq.kind}.stability", eq.stability)
        for k, z in enumerate(eq.eigenvalues):
            add("equilibrium", f"{eq.kind}.eig{k}", complex(z))
    if not p.coexistence_feasible:
        add("note", "coexistence", "no coexistence equilibrium")

    th = stability_thresholds(p.alpha, p.beta, p.gamma)
    add("threshold", "delta_T", th.delta_T)
    add("threshold", "delta_H", th.delta_H)
    geo = fold_point(p)
    add("fold", "u_f", geo.fold_u)
    add("fold", "v_f", geo.fold_v)
    add("fold", "transcritical_v", geo.transcritical_v)

    try:
        curves = slow_fast_curves(p)
        add("curves", "delta_star", curves.delta_star)
        add("curves", "delta_H_eps", curves.delta_H(p.epsilon))
        add("curves", "delta_c_eps", curves.delta_c(p.epsilon))
        regime = classify_regime(p, p.epsilon, simulate=opts["locate_relaxation"])
        add("regime", "label", regime.label)
        add("regime", "description", regime.description)
        add("regime", "delta_ro", regime.delta_ro)
    except ArithmeticError as exc:
        add("regime", "label", f"unavailable: {exc}")

    if p.coexistence_feasible:
        add("relaxation", "feasible", relaxation_feasible(p))
    else:
        add("relaxation", "feasible", "not applicable")

    try:
        tw = tw_eigen_analysis(p, opts["tw_speed"])
        add("wave", "c_min", tw.c_min)
        add("wave", "c", tw.c)
        add("wave", "type", tw.wave_type)
        for k, z in enumerate(tw.eig_Q1):
            add("wave", f"Q1.eig{k}", z)
        for k, z in enumerate(tw.eig_Qstar or ()):
            add("wave", f"Qstar.eig{k}", z)
    except InvasionInfeasibleError as exc:
        add("wave", "c_min", f"none: {exc}")

    io.write_csv(out / "report.csv", ("section", "quantity", "value"), rows)


def cmd_sweep(cfg: dict, out: Path) -> None:
    p = _params(cfg)
    s = cfg["sweep"]
    if not s["delta_min"] < s["delta_max"]:
        raise _Failure(EXIT_CONFIG, f"empty delta range [{s['delta_min']}, {s['delta_max']}]")
    if s["n"] < 2:
        raise _Failure(EXIT_CONFIG, "sweep.n must be at least 2")
    kwargs = {"tol": s["tol"]}
    if s["transient"] is not None:
        kwargs["transient"] = s["transient"]
    if s["max_time"] is not None:
        kwargs["max_time"] = s["max_time"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = bifurcation_sweep(
            p, (s["delta_min"], s["delta_max"]), s["n"], p.epsilon,
            continuation=s["continuation"], y0=s["y0"], **kwargs,
        )
    table = []
    for r in rows:
        kind = r.type if not r.error else f"failed({r.error.split(':')[0]})"
        table.append((r.delta, r.epsilon, kind, r.period, r.u_min, r.u_max, r.v_min, r.v_max))
    io.write_csv(out / "sweep.csv", ("delta", "epsilon", "type", "period", "u_min", "u_max", "v_min", "v_max"), table)
    if s["locate_explosion"]:
        try:
            w = locate_explosion_window(p, p.epsilon)
            erow = [(w.epsilon, w.delta_lo, w.delta_hi, w.width, "detected")]
        except ExplosionNotDetectedError as exc:
            erow = [(p.epsilon, math.nan, math.nan, math.nan, f"not detected: {exc}")]
        io.write_csv(out / "explosion.csv", ("epsilon", "delta_lo", "delta_hi", "width", "status"), erow)


def _simulate_ode(p: ModelParams, o: dict, out: Path) -> None:
    deltas = o["deltas"] or [p.delta]
    summary = []
    for k, delta in enumerate(deltas):
        q = p.replace(delta=delta)
        tag = f"_{k}" if o["deltas"] else ""
        if o["cycle"]:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                c = detect_limit_cycle(q, o["y0"], tol=o["tol"], coords=o["coords"])
            summary.append((delta, c.type, c.period, c.u_min, c.u_max, c.v_min, c.v_max))
            if c.orbit.size:
                io.write_columns(out / f"cycle{tag}.csv", {"t": c.orbit_times, "u": c.orbit[:, 0], "v": c.orbit[:, 1]})
        else:
            t_eval = np.linspace(0.0, o["t_end"], o["samples"])
            tr = integrate(q, o["y0"], o["t_end"], o["tol"], coords=o["coords"], t_eval=t_eval)
            io.write_columns(out / f"trajectory{tag}.csv", {"t": tr.times, "u": tr.states[:, 0], "v": tr.states[:, 1]})
    if summary:
        io.write_csv(out / "cycles.csv", ("delta", "type", "period", "u_min", "u_max", "v_min", "v_max"), summary)


def _simulate_pde(p: ModelParams, kind: str, o: dict, out: Path) -> None:
    dims = 1 if kind == "pde1d" else 2
    nx, ny = o["nx"], o["ny"]
    if nx < 1 or (dims == 2 and (ny is None or ny < 1)):
        raise _Failure(EXIT_CONFIG, f"grid must have at least one cell per axis (nx={nx}, ny={ny})")
    if dims == 1 and ny is not None:
        raise _Failure(EXIT_CONFIG, "pde1d takes no ny")
    ic = dict(o["ic"])
    ic_kind = ic.pop("kind") or ("step_1d" if dims == 1 else "elliptic_2d")
    if (ic_kind == "step_1d") != (dims == 1):
        raise _Failure(EXIT_CONFIG, f"initial condition {ic_kind!r} does not match kind {kind!r}")
    field0 = make_initial_condition(ic_kind, nx=nx, ny=ny if dims == 2 else None, dx=o["dx"], p=p, **ic)
    res = simulate(field0, p, o["dt"], o["t_end"], o["snapshot_every"], tiles=o["tiles"])

    snap_dir = out / "snapshots"
    for k, f in enumerate(res.snapshots):
        for species in ("u", "v"):
            z = getattr(f, species)
            if o["format"] == "pgm":
                io.write_pgm(snap_dir / f"{species}_{k:06d}.pgm", z)
            else:
                io.write_grid_csv(snap_dir / f"{species}_{k:06d}.csv", z)
    io.write_csv(snap_dir / "index.csv", ("index", "t"), [(k, f.t) for k, f in enumerate(res.snapshots)])
    av = res.averages
    io.write_columns(out / "averages.csv", {"t": av.t, "mean_u": av.mean_u, "mean_v": av.mean_v})

    front = o["front"]
    if front is not None and dims == 1:
        level = front["level"]
        if level is None:
            level = 0.5 * coexistence_state(p)[1 if front["species"] == "v" else 0]
        fr = measure_front_speed(res.snapshots, front["species"], level, x_max=front["x_max"])
        text = io.csv_text(("t", "x_front"), zip(fr.t, fr.x_front))
        text += io.csv_text(("speed", "residual"), [(fr.speed, fr.residual)])
        io.atomic_write_text(out / "front.csv", text)


def cmd_simulate(cfg: dict, out: Path) -> None:
    p = _params(cfg)
    s = cfg["simulate"]
    if s["kind"] == "ode":
        _simulate_ode(p, s["ode"], out)
    else:
        _simulate_pde(p, s["kind"], s["pde"], out)


def cmd_entry_exit(cfg: dict, out: Path) -> None:
    p = _params(cfg)
    geo = fold_point(p)
    v1 = cfg["entry_exit"]["v1"]
    v1 = geo.fold_v if v1 is None else v1
    sol = entry_exit_point(p, v1)
    rows = [
        ("u_max", geo.fold_u),
        ("v1", sol.v1),
        ("v0", sol.v0),
        ("transcritical_v", sol.tc),
        ("residual", sol.residual),
    ]
    io.write_csv(out / "entry_exit.csv", ("quantity", "value"), rows)


HANDLERS = {
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "entry-exit": cmd_entry_exit,
}


# ---------------------------------------------------------------------------
# main
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slowfast", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML config file or preset name")
        sp.add_argument("--out", default=None, help="output directory (default: ./out-<command>)")
    sub.add_parser("presets", help="list bundled presets")
    return ap


def run(command: str, config_ref: str, out_dir: str | None) -> int:
    text, source = read_config_text(config_ref)
    try:
        cfg = load_config(text, command, source)
    except ConfigError as exc:
        raise _Failure(EXIT_CONFIG, str(exc)) from None
    out = Path(out_dir) if out_dir else Path(f"out-{command}")
    out.mkdir(parents=True, exist_ok=True)
    try:
        HANDLERS[command](cfg, out)
    except (NoExitError, InvalidInputError, InvasionInfeasibleError) as exc:
        raise _Failure(EXIT_CONFIG, f"{type(exc).__name__}: {exc}") from None
    except (StiffnessError, BlowUpError, ConfigurationError) as exc:
        raise _Failure(EXIT_NUMERIC, f"{type(exc).__name__}: {exc}") from None
    except (SlowFastError, ArithmeticError) as exc:
        raise _Failure(EXIT_NUMERIC, f"{type(exc).__name__}: {exc}") from None
    io.atomic_write_text(out / "manifest.yaml", dump_manifest(cfg))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(preset_names()))
        return EXIT_OK
    try:
        code = run(args.command, args.config, args.out)
    except _Failure as exc:
        print(f"slowfast: error: {exc}", file=sys.stderr)
        return exc.code
    print(f"slowfast: wrote {args.out or f'out-{args.command}'}")
    return code


if __name__ == "__main__":
    sys.exit(main())

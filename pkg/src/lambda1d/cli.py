"""Command-line harness: figure reproduction, sweeps, CSV emission.

Subcommands
-----------
population   excited-state population curve with the two reference decays
sweep        emission probabilities and cloning fidelity versus packet width
scatter      single-photon scattering summary for one ground state
epr          photon-pair construction: mode overlap, concurrence, entropy
noise        multiplicative loss/dephasing degradation factors

Every run is deterministic: the same configuration produces byte-identical
output files.  Values are written with 9 significant digits, comma
separated, LF line endings; files are written to a temporary sibling and
atomically renamed, so failed runs leave nothing behind.

Configuration precedence: command-line flags > ``--config`` file (UTF-8
``key=value`` lines, ``#`` comments) > built-in defaults.  The defaults
reproduce the published operating points (resonant carrier, gamma = c = 1).

Exit codes: 0 success, 2 invalid input or configuration, 3 a produced
result failed an internal tolerance check.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import PhysicalParams, default_grid, make_exponential_wavepacket, overlap
from .dynamics import evolve, excited_population, reabsorption_signature, solve_analytic, TimeSeries
from .twophoton import cloning_fidelity as _fidelity_closed
from .scattering import (
    GROUND_COUPLED,
    GROUND_DECOUPLED,
    monochromatic_transfer_check,
    passage_time,
    scatter_single_photon,
)
from .analysis import (
    NoiseParams,
    build_epr_state,
    concurrence,
    entanglement_entropy,
    noise_degradation,
    sweep_delta,
)

__all__ = ["main", "RunConfig"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_TOLERANCE = 3


@dataclass
class RunConfig:
    """Merged configuration of one subcommand run."""

    command: str
    out: Optional[str] = None
    delta: float = 2.0
    detuning: float = 0.0
    tmax: float = 6.0
    dr: float = 1e-3
    points: int = 201
    solver: str = "step"
    delta_min: float = 0.05
    delta_max: float = 12.0
    mode: str = "closed_form"
    delta_long: float = 0.001
    detuning_long: float = 0.0
    ground: str = GROUND_COUPLED
    beta: float = 1.0
    dephasing: float = 0.1


_FLOAT_KEYS = {
    "delta", "detuning", "tmax", "dr", "delta_min", "delta_max",
    "delta_long", "detuning_long", "beta", "dephasing",
}
_INT_KEYS = {"points"}
_STR_KEYS = {"solver", "mode", "ground", "out"}


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_config_file(path: str) -> dict:
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key in _FLOAT_KEYS:
            values[key] = float(value)
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _STR_KEYS:
            values[key] = value
        else:
            raise ValueError(f"{path}:{lineno}: unknown configuration key {key!r}")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lambda1d",
        description="Single-photon dynamics of a lambda emitter in a one-way waveguide",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--out", help="output CSV path")

    p = sub.add_parser("population", help="excited-state population curve")
    common(p)
    p.add_argument("--delta", type=float, help="packet width in units of gamma (default 2)")
    p.add_argument("--detuning", type=float, help="carrier detuning in units of gamma (default 0)")
    p.add_argument("--tmax", type=float, help="final time in units of 1/gamma (default 6)")
    p.add_argument("--dr", type=float, help="grid spacing in units of c/gamma (default 1e-3)")
    p.add_argument("--points", type=int, help="output rows (default 201)")
    p.add_argument("--solver", choices=["step", "analytic"], help="solver (default step)")

    p = sub.add_parser("sweep", help="probabilities and fidelity versus packet width")
    common(p)
    p.add_argument("--delta-min", type=float, help="lower width bound (default 0.05)")
    p.add_argument("--delta-max", type=float, help="upper width bound (default 12)")
    p.add_argument("--points", type=int, help="sweep points (default 240)")
    p.add_argument("--mode", choices=["closed_form", "numeric"], help="evaluation mode")
    p.add_argument("--dr", type=float, help="grid spacing for numeric mode (default 4e-3)")

    p = sub.add_parser("scatter", help="ground-state scattering summary")
    common(p)
    p.add_argument("--delta-long", type=float, help="drive packet width (default 0.001)")
    p.add_argument("--detuning-long", type=float, help="drive detuning (default 0)")
    p.add_argument("--ground", choices=[GROUND_COUPLED, GROUND_DECOUPLED], help="atom ground state")
    p.add_argument("--dr", type=float, help="grid spacing (default 0.01)")

    p = sub.add_parser("epr", help="photon-pair entanglement summary")
    common(p)
    p.add_argument("--delta-long", type=float, help="long-photon width (default 0.001)")
    p.add_argument("--dr", type=float, help="grid spacing for the overlap integral (default 0.01)")

    p = sub.add_parser("noise", help="loss/dephasing degradation factors")
    common(p)
    p.add_argument("--beta", type=float, help="guided-mode fraction (default 1)")
    p.add_argument("--dephasing", type=float, help="pure dephasing rate in units of gamma (default 0.1)")
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    defaults = RunConfig(command=args.command)
    if args.command == "population":
        defaults.dr = 1e-3
    elif args.command == "sweep":
        defaults.points = 240
        defaults.dr = 4e-3
    elif args.command in ("scatter", "epr"):
        defaults.dr = 0.01

    file_values = {}
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)

    known = {f.name for f in fields(RunConfig)}
    for key, value in file_values.items():
        if key not in known:
            raise ValueError(f"unknown configuration key {key!r}")
        setattr(defaults, key, value)
    for key in known:
        cli_value = getattr(args, key, None)
        if cli_value is not None and key != "command":
            setattr(defaults, key, cli_value)
    return defaults


def _validate(cfg: RunConfig) -> None:
    if cfg.command in ("population", "sweep", "scatter", "epr") and not cfg.out:
        raise ValueError("--out PATH is required for this subcommand")
    if cfg.command == "population":
        if cfg.delta <= 0:
            raise ValueError(f"delta must be positive, got {cfg.delta}")
        if cfg.tmax < 0:
            raise ValueError(f"tmax must be nonnegative, got {cfg.tmax}")
        if cfg.dr <= 0:
            raise ValueError(f"dr must be positive, got {cfg.dr}")
        if cfg.points < 1:
            raise ValueError(f"points must be >= 1, got {cfg.points}")
    elif cfg.command == "sweep":
        if not (0 < cfg.delta_min <= cfg.delta_max):
            raise ValueError(f"need 0 < delta-min <= delta-max, got [{cfg.delta_min}, {cfg.delta_max}]")
        if cfg.points < 1:
            raise ValueError(f"points must be >= 1, got {cfg.points}")
    elif cfg.command in ("scatter", "epr"):
        if cfg.delta_long <= 0:
            raise ValueError(f"delta-long must be positive, got {cfg.delta_long}")
    elif cfg.command == "noise":
        NoiseParams(cfg.beta, cfg.dephasing)  # validates ranges


class ToleranceError(RuntimeError):
    """A produced result violated an internal tolerance check."""


def _cmd_population(cfg: RunConfig) -> None:
    params = PhysicalParams(delta_spec=cfg.delta, detuning=cfg.detuning)
    if cfg.tmax == 0.0:
        rows = [(0.0, 1.0, 1.0, 1.0)]
        _write_csv(cfg.out, ["t_gamma", "rho_ee", "exp_minus_t", "exp_minus_2t"], rows)
        print("population: single row at t=0 (tmax=0)")
        return

    grid = default_grid(params, t_max=cfg.tmax, dr=cfg.dr)
    packet = make_exponential_wavepacket(params, grid)
    dt = grid.dr / params.c
    n_steps = int(round(cfg.tmax / dt))
    stride = max(1, int(round(n_steps / max(1, cfg.points - 1))))

    if cfg.solver == "step":
        state = evolve(params, packet, n_steps * dt)
        times = state.rho_series.times[::stride]
        rho = state.rho_series.values[::stride]
        series = TimeSeries(state.rho_series.times, state.rho_series.values)
    else:
        idx = np.arange(0, n_steps + 1, stride)
        times = idx * dt
        rho = np.array([excited_population(solve_analytic(params, packet, float(t))) for t in times])
        series = TimeSeries(times, rho)

    if np.any(rho < -1e-9) or np.any(rho > 1.0 + 1e-6):
        raise ToleranceError("population left the physical range [0, 1]")
    if np.any(rho < np.exp(-2.0 * params.gamma * times) - 1e-3):
        raise ToleranceError("population dropped below the twice-spontaneous lower bound")

    rows = [
        (g * t, r, math.exp(-g * t), math.exp(-2.0 * g * t))
        for t, r, g in zip(times, rho, [params.gamma] * len(times))
    ]
    _write_csv(cfg.out, ["t_gamma", "rho_ee", "exp_minus_t", "exp_minus_2t"], rows)

    sig = reabsorption_signature(series, params.gamma)
    if sig.detected:
        print(
            f"population: reabsorption signature detected (min decay rate "
            f"{_fmt(sig.min_rate)} gamma, exceeds spontaneous curve: {sig.above_spontaneous})"
        )
    else:
        print(f"population: no reabsorption signature (min decay rate {_fmt(sig.min_rate)} gamma)")


def _cmd_sweep(cfg: RunConfig) -> None:
    table = sweep_delta(
        (cfg.delta_min, cfg.delta_max),
        cfg.points,
        cfg.mode,
        dr=cfg.dr,
    )
    bad = [r for r in table.rows if r.error]
    header = ["delta_over_gamma", "p_aa", "p_ab", "fidelity"]
    if cfg.mode == "numeric":
        header.append("numeric_gap")
        rows = [(r.delta_over_gamma, r.p_aa, r.p_ab, r.fidelity,
                 r.numeric_gap if r.numeric_gap is not None else math.nan) for r in table.rows]
    else:
        rows = [(r.delta_over_gamma, r.p_aa, r.p_ab, r.fidelity) for r in table.rows]
    _write_csv(cfg.out, header, rows)

    for r in bad:
        print(f"sweep: row delta={_fmt(r.delta_over_gamma)} failed: {r.error}", file=sys.stderr)
    if bad:
        raise ToleranceError(f"{len(bad)} sweep row(s) failed")
    if cfg.mode == "closed_form":
        worst = max(abs(r.p_aa + r.p_ab - 1.0) for r in table.rows)
        if worst > 1e-9:
            raise ToleranceError(f"closed-form rows violate p_aa + p_ab = 1 by {worst}")
    else:
        worst = max(r.numeric_gap for r in table.rows)
        if worst > 5e-3:
            raise ToleranceError(f"numeric rows deviate from the closed form by {worst}")
        print(f"sweep: worst numeric gap {_fmt(worst)}")
    best = max(table.rows, key=lambda r: r.p_aa)
    print(f"sweep: max p_aa = {_fmt(best.p_aa)} at delta/gamma = {_fmt(best.delta_over_gamma)}")


def _cmd_scatter(cfg: RunConfig) -> None:
    params = PhysicalParams(delta_spec=cfg.delta_long, detuning=cfg.detuning_long)
    grid = default_grid(params, t_max=2.0, dr=cfg.dr)
    packet = make_exponential_wavepacket(params, grid)
    t = passage_time(params)
    res = scatter_single_photon(params, packet, cfg.ground, t)

    items: List[Tuple[str, float]] = [
        ("delta_over_gamma", cfg.delta_long),
        ("detuning_over_gamma", cfg.detuning_long),
        ("residual_a", res.residual_a),
        ("b_norm", res.b_norm),
        ("excited_residual", res.excited_norm),
        ("norm_total", res.norm_total),
        ("transfer_fidelity", res.transfer_fidelity),
    ]
    if cfg.ground == GROUND_COUPLED:
        ovl = overlap(res.phi_b_out, packet)
        items.append(("transfer_phase_rad", float(np.angle(ovl))))
    _write_csv(cfg.out, ["key", "value"], [(k, v) for k, v in items])
    for k, v in items:
        print(f"scatter: {k} = {_fmt(v)}")
    if cfg.ground == GROUND_DECOUPLED and abs(res.residual_a - 1.0) > 1e-6:
        raise ToleranceError("transparent scattering did not conserve the input")
    if abs(res.norm_total - 1.0) > 1e-6:
        raise ToleranceError(f"single-excitation norm ledger off by {abs(res.norm_total - 1.0)}")


def _cmd_epr(cfg: RunConfig) -> None:
    params_long = PhysicalParams(delta_spec=cfg.delta_long)
    params_short = PhysicalParams(delta_spec=params_long.gamma)
    grid = default_grid(params_long, t_max=1.0, dr=cfg.dr)
    short = make_exponential_wavepacket(params_short, grid)
    long_ = make_exponential_wavepacket(params_long, grid)
    mode_overlap = overlap(short, long_)

    report = monochromatic_transfer_check(params_long, dr=cfg.dr)
    phase = -report.overlap_b_in / abs(report.overlap_b_in)
    state = build_epr_state(transfer_phase=phase, mode_overlap=mode_overlap)
    conc = concurrence(state)
    ent = entanglement_entropy(state)

    items = [
        ("delta_long_over_gamma", cfg.delta_long),
        ("mode_overlap", abs(mode_overlap)),
        ("transfer_phase_rad", float(np.angle(report.overlap_b_in))),
        ("transfer_fidelity", report.transfer_fidelity),
        ("concurrence", conc),
        ("entropy_bits", ent),
    ]
    _write_csv(cfg.out, ["key", "value"], [(k, v) for k, v in items])
    for k, v in items:
        print(f"epr: {k} = {_fmt(v)}")
    if not (-1e-9 <= conc <= 1.0 + 1e-9):
        raise ToleranceError(f"concurrence {conc} outside [0, 1]")


def _cmd_noise(cfg: RunConfig) -> None:
    noise = NoiseParams(cfg.beta, cfg.dephasing)
    factor = noise_degradation(noise)
    optimal = _fidelity_closed(PhysicalParams(delta_spec=2.0))
    items = [
        ("beta", cfg.beta),
        ("dephasing_over_gamma", cfg.dephasing),
        ("degradation_factor", factor),
        ("degraded_fidelity", factor * optimal),
        ("degraded_concurrence", factor * 1.0),
    ]
    if cfg.out:
        _write_csv(cfg.out, ["key", "value"], [(k, v) for k, v in items])
    for k, v in items:
        print(f"noise: {k} = {_fmt(v)}")


_DISPATCH = {
    "population": _cmd_population,
    "sweep": _cmd_sweep,
    "scatter": _cmd_scatter,
    "epr": _cmd_epr,
    "noise": _cmd_noise,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        _validate(cfg)
    except (ValueError, OSError) as exc:
        print(f"lambda1d: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        _DISPATCH[cfg.command](cfg)
    except ToleranceError as exc:
        print(f"lambda1d: tolerance check failed: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except ValueError as exc:
        print(f"lambda1d: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

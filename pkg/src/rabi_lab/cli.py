"""Command-line front end.

Subcommands map one-to-one onto the library sweeps: spectrum (single
point), parity (coupling sweep), wavefunction (real-space export),
converge (truncation study), phase-diagram (onset boundaries).  Options
may come from flags or from a flat key=value config file; flags win and
the manifest records where every effective value came from.

Exit codes: 0 success, 2 configuration or I/O error, 3 solver failure,
4 sentinel failure (results are still written, flagged).
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .eigensolve import (
    DEGENERACY_RTOL,
    NORM_TOL,
    ORTHO_TOL,
    RESIDUAL_RTOL,
    SolverError,
)
from .io import write_manifest, write_table
from .model import ModelParams, Truncation, critical_coupling
from .parity import DEFAULT_EPS_PAR, pair_report, parity_expectation
from .position import (
    DEFAULT_STEP,
    PositionGrid,
    position_wavefunction,
    symmetry_defect,
)
from .sweeps import (
    SENTINEL_THRESHOLD,
    convergence_sweep,
    coupling_sweep,
    grid_values,
    phase_boundary_scan,
    solve_point,
    tail_population,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SENTINEL = 4


class ConfigError(ValueError):
    """Bad or conflicting run configuration."""


@dataclass(frozen=True)
class GridSpec:
    """Inclusive uniform range parsed from start:stop:step."""

    start: float
    stop: float
    step: float

    def values(self):
        return grid_values(self.start, self.stop, self.step)

    def canonical(self) -> str:
        return ":".join(repr(float(x)) for x in (self.start, self.stop, self.step))


@dataclass
class ResolvedConfig:
    command: str
    values: dict
    provenance: dict

    def canonical_config(self) -> dict:
        out = {}
        for key, value in self.values.items():
            if value is None:
                continue
            if isinstance(value, GridSpec):
                out[key] = value.canonical()
            elif isinstance(value, list):
                out[key] = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                # repr is the shortest exact round-trip form
                out[key] = repr(value)
            elif isinstance(value, int):
                out[key] = str(value)
            else:
                out[key] = str(value)
        return out


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parse_int_list(text: str, key: str) -> list:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise ConfigError(f"{key}: expected a comma-separated integer list, got {text!r}")
    return [_parse_int(part, key) for part in items]


def _parse_scalar_or_range(text: str, key: str):
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: ranges use start:stop:step, got {text!r}")
        start, stop, step = (_parse_float(p, key) for p in parts)
        try:
            spec = GridSpec(start, stop, step)
            spec.values()
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        return spec
    return _parse_float(text, key)


def _parse_str(text: str, key: str) -> str:
    return text


# key -> parser(text, key)
_PARSERS = {
    "delta": _parse_float,
    "g": _parse_scalar_or_range,
    "g_over_gc": _parse_scalar_or_range,
    "n_trunc": _parse_int,
    "levels": _parse_int,
    "eps_par": _parse_float,
    "truncs": _parse_int_list,
    "ref": _parse_int,
    "delta_grid": _parse_scalar_or_range,
    "pairs": _parse_int_list,
    "xi_max": _parse_float,
    "xi_step": _parse_float,
    "workers": _parse_int,
    "out": _parse_str,
    "format": _parse_str,
}

_DEFAULTS = {
    "spectrum": {"n_trunc": 1000, "levels": 8, "eps_par": DEFAULT_EPS_PAR, "format": "csv"},
    "parity": {
        "n_trunc": 1000,
        "levels": 8,
        "eps_par": DEFAULT_EPS_PAR,
        "format": "csv",
        "workers": None,
    },
    "wavefunction": {
        "n_trunc": 1000,
        "levels": 2,
        "xi_step": DEFAULT_STEP,
        "format": "csv",
    },
    "converge": {
        "n_trunc": None,
        "g_over_gc": GridSpec(0.0, 6.0, 0.05),
        "truncs": [200, 400, 1000],
        "ref": 2000,
        "levels": 8,
        "format": "csv",
        "workers": None,
    },
    "phase-diagram": {
        "g_over_gc": GridSpec(0.0, 2.5, 0.01),
        "pairs": [0, 1],
        "n_trunc": 1000,
        "eps_par": DEFAULT_EPS_PAR,
        "format": "csv",
        "workers": None,
    },
}

_COMMAND_KEYS = {
    "spectrum": ("delta", "g", "g_over_gc", "n_trunc", "levels", "eps_par", "out", "format"),
    "parity": (
        "delta",
        "g",
        "g_over_gc",
        "n_trunc",
        "levels",
        "eps_par",
        "out",
        "format",
        "workers",
    ),
    "wavefunction": (
        "delta",
        "g",
        "g_over_gc",
        "n_trunc",
        "levels",
        "xi_max",
        "xi_step",
        "out",
        "format",
    ),
    "converge": (
        "delta",
        "g",
        "g_over_gc",
        "truncs",
        "ref",
        "levels",
        "out",
        "format",
        "workers",
    ),
    "phase-diagram": (
        "delta_grid",
        "pairs",
        "g_over_gc",
        "n_trunc",
        "eps_par",
        "out",
        "format",
        "workers",
    ),
}

_HELP = {
    "delta": "level splitting (dimensionless, >= 0)",
    "g": "coupling, absolute units; scalar or start:stop:step",
    "g_over_gc": "coupling in units of g_c; scalar or start:stop:step",
    "n_trunc": "Fock-space cutoff (photon numbers 0 .. n_trunc-1)",
    "levels": "number of lowest levels to report",
    "eps_par": "irregularity threshold on 1 - |<P>|",
    "truncs": "comma-separated candidate truncations",
    "ref": "reference truncation for convergence differences",
    "delta_grid": "delta range start:stop:step",
    "pairs": "comma-separated pair indices",
    "xi_max": "half-width of the position grid (default: fits the coupling)",
    "xi_step": "position grid step",
    "workers": "process count for grid points (0 = cpu count)",
    "out": "output directory for tables and manifest",
    "format": "table format: csv or json",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rabi-lab",
        description="Exact diagonalization and parity diagnostics for the quantum Rabi model",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for command, keys in _COMMAND_KEYS.items():
        p = sub.add_parser(command, help=f"{command} job")
        p.add_argument("--config", default=None, help="flat key=value config file")
        for key in keys:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None, help=_HELP[key])
    return parser


def _read_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key}")
        values[key] = value
    return values


def parse_config(argv: Optional[list] = None) -> ResolvedConfig:
    """Parse argv plus optional config file into one resolved configuration.

    Precedence: command-line flag, then config file, then built-in
    default.  A coupling given both as g and as g_over_gc is rejected no
    matter which source each came from.
    """
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise ConfigError("missing command")
    command = args.command
    keys = _COMMAND_KEYS[command]
    file_values = _read_config_file(args.config) if args.config else {}
    for key in file_values:
        if key not in keys:
            raise ConfigError(f"config file key {key!r} is not valid for {command}")
    values: dict = {}
    provenance: dict = {}
    for key in keys:
        flag_raw = getattr(args, key)
        if flag_raw is not None:
            values[key] = _PARSERS[key](flag_raw, key)
            provenance[key] = "flag"
        elif key in file_values:
            values[key] = _PARSERS[key](file_values[key], key)
            provenance[key] = "file"
        else:
            values[key] = _DEFAULTS[command].get(key)
            provenance[key] = "default"
    _validate(command, values, provenance)
    return ResolvedConfig(command=command, values=values, provenance=provenance)


def _require(values: dict, key: str) -> None:
    if values.get(key) is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")


def _validate(command: str, values: dict, provenance: dict) -> None:
    if command in ("spectrum", "parity", "wavefunction", "converge"):
        _require(values, "delta")
        if values["delta"] < 0:
            raise ConfigError(f"delta must be >= 0, got {values['delta']}")
        g, ratio = values.get("g"), values.get("g_over_gc")
        if g is not None and ratio is not None:
            raise ConfigError(
                f"coupling given twice: g (from {provenance['g']}) "
                f"and g_over_gc (from {provenance['g_over_gc']}); set exactly one"
            )
        if g is None and ratio is None:
            raise ConfigError("set a coupling with --g or --g-over-gc")
        scalar_only = command in ("spectrum", "wavefunction")
        chosen = g if g is not None else ratio
        if scalar_only and isinstance(chosen, GridSpec):
            raise ConfigError(f"{command} takes a scalar coupling, not a range")
    if command == "phase-diagram":
        _require(values, "delta_grid")
        if not isinstance(values["delta_grid"], GridSpec):
            values["delta_grid"] = GridSpec(values["delta_grid"], values["delta_grid"], 1.0)
        if not isinstance(values["g_over_gc"], GridSpec):
            raise ConfigError("phase-diagram needs a g_over_gc range start:stop:step")
        if not values["pairs"] or min(values["pairs"]) < 0:
            raise ConfigError(f"pairs must be non-negative, got {values['pairs']}")
    if values.get("n_trunc") is not None and values["n_trunc"] < 2:
        raise ConfigError(f"n_trunc must be >= 2, got {values['n_trunc']}")
    if values.get("levels") is not None and values["levels"] < 1:
        raise ConfigError(f"levels must be >= 1, got {values['levels']}")
    if command in ("spectrum", "parity") and values["levels"] % 2:
        raise ConfigError(f"levels must be even for {command}, got {values['levels']}")
    if values.get("eps_par") is not None and not 0 < values["eps_par"] < 1:
        raise ConfigError(f"eps_par must be in (0, 1), got {values['eps_par']}")
    if values.get("format") not in (None, "csv", "json"):
        raise ConfigError(f"format must be csv or json, got {values['format']!r}")
    if values.get("workers") is not None and values["workers"] < 0:
        raise ConfigError(f"workers must be >= 0, got {values['workers']}")
    if command == "converge":
        if not values["truncs"]:
            raise ConfigError("truncs must not be empty")
        if min(values["truncs"]) < 2:
            raise ConfigError(f"every candidate truncation must be >= 2, got {values['truncs']}")
        if values["ref"] < max(values["truncs"]):
            raise ConfigError(
                f"ref {values['ref']} is below the largest candidate {max(values['truncs'])}"
            )
    _require(values, "out")


def _coupling_grid(values: dict) -> tuple[dict, float]:
    """Sweep kwargs selecting the coupling axis, plus the scalar g if any."""
    g, ratio = values.get("g"), values.get("g_over_gc")
    if g is not None:
        if isinstance(g, GridSpec):
            return {"g_grid": g.values()}, float("nan")
        return {"g_grid": [float(g)]}, float(g)
    if isinstance(ratio, GridSpec):
        return {"ratio_grid": ratio.values()}, float("nan")
    gc = critical_coupling(values["delta"])
    return {"ratio_grid": [float(ratio)]}, float(ratio) * gc


def _manifest_skeleton(cfg: ResolvedConfig, t0: float) -> dict:
    return {
        "tool": {"name": "rabi-lab", "version": __version__},
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "command": cfg.command,
        "config": cfg.canonical_config(),
        "config_provenance": dict(cfg.provenance),
        "solver_tolerances": {
            "residual_rtol": RESIDUAL_RTOL,
            "norm_tol": NORM_TOL,
            "ortho_tol": ORTHO_TOL,
            "degeneracy_rtol": DEGENERACY_RTOL,
            "sentinel_threshold": SENTINEL_THRESHOLD,
        },
        "wall_time_s": time.perf_counter() - t0,
    }


def _finish(
    cfg: ResolvedConfig, out_dir: Path, files: list, extra: dict, failures, t0: float
) -> int:
    manifest = _manifest_skeleton(cfg, t0)
    manifest.update(extra)
    manifest["files"] = files
    manifest["sentinel"] = {
        "all_passed": not failures,
        "failures": failures,
    }
    write_manifest(out_dir, manifest)
    if failures:
        print(
            "sentinel failure: retained states leak past 0.9 * n_trunc; "
            "raise n_trunc (details in manifest.json)",
            file=sys.stderr,
        )
        return EXIT_SENTINEL
    return EXIT_OK


def _ext(values: dict) -> str:
    return "csv" if values.get("format", "csv") == "csv" else "json"


def _run_point_table(cfg: ResolvedConfig, out_dir: Path, name: str, t0: float) -> int:
    values = cfg.values
    kwargs, _ = _coupling_grid(values)
    result = coupling_sweep(
        values["delta"],
        n_levels=values["levels"],
        trunc=Truncation(values["n_trunc"]),
        eps_par=values["eps_par"],
        workers=values.get("workers"),
        **kwargs,
    )
    entry = write_table(
        out_dir / f"{name}.{_ext(values)}", result.columns, result.rows, values["format"]
    )
    return _finish(
        cfg, out_dir, [entry], {"sweep": result.meta}, result.meta["sentinel_failures"], t0
    )


def _run_wavefunction(cfg: ResolvedConfig, out_dir: Path, t0: float) -> int:
    values = cfg.values
    _, g = _coupling_grid(values)
    params = ModelParams(values["delta"], g)
    trunc = Truncation(values["n_trunc"])
    spectrum = solve_point(params, trunc, values["levels"])
    if tail_population(spectrum.eigenvectors, trunc) >= SENTINEL_THRESHOLD:
        # unconverged amplitudes would contaminate every exported value
        return _finish(cfg, out_dir, [], {}, [0], t0)
    if values.get("xi_max") is not None:
        grid = PositionGrid(values["xi_max"], values["xi_step"])
    else:
        grid = PositionGrid.default_for(params.g, values["xi_step"])
    files = []
    summary = []
    fmt = values["format"]
    for level in range(values["levels"]):
        vec = spectrum.eigenvectors[:, level]
        wf = position_wavefunction(vec, grid, trunc)
        rows = list(zip(grid.xi.tolist(), wf.psi_plus.tolist(), wf.psi_minus.tolist()))
        files.append(
            write_table(
                out_dir / f"wavefunction_level{level}.{_ext(values)}",
                ("xi", "psi_plus", "psi_minus"),
                rows,
                fmt,
            )
        )
        energy = float(spectrum.eigenvalues[level])
        summary.append(
            (
                level,
                energy,
                energy + params.g * params.g,
                parity_expectation(vec, trunc),
                symmetry_defect(wf),
                wf.quadrature_norm(),
            )
        )
    files.append(
        write_table(
            out_dir / f"wavefunction_summary.{_ext(values)}",
            ("level", "energy", "energy_shifted", "parity", "symmetry_defect", "quadrature_norm"),
            summary,
            fmt,
        )
    )
    return _finish(
        cfg,
        out_dir,
        files,
        {"grid": {"xi_max": grid.xi_max, "step": grid.step, "npoints": grid.npoints}},
        [],
        t0,
    )


def _run_converge(cfg: ResolvedConfig, out_dir: Path, t0: float) -> int:
    values = cfg.values
    kwargs, _ = _coupling_grid(values)
    result = convergence_sweep(
        values["delta"],
        trunc_list=values["truncs"],
        ref_trunc=values["ref"],
        n_levels=values["levels"],
        workers=values.get("workers"),
        **kwargs,
    )
    entry = write_table(
        out_dir / f"converge.{_ext(values)}", result.columns, result.rows, values["format"]
    )
    return _finish(
        cfg, out_dir, [entry], {"sweep": result.meta}, result.meta["sentinel_failures"], t0
    )


def _run_phase_diagram(cfg: ResolvedConfig, out_dir: Path, t0: float) -> int:
    values = cfg.values
    result = phase_boundary_scan(
        values["delta_grid"].values(),
        values["pairs"],
        ratio_grid=values["g_over_gc"].values(),
        eps_par=values["eps_par"],
        trunc=Truncation(values["n_trunc"]),
        workers=values.get("workers"),
    )
    entry = write_table(
        out_dir / f"phase_diagram.{_ext(values)}", result.columns, result.rows, values["format"]
    )
    return _finish(cfg, out_dir, [entry], {"sweep": result.meta}, [], t0)


def run_job(cfg: ResolvedConfig) -> int:
    """Execute one resolved job; returns the process exit code."""
    t0 = time.perf_counter()
    out_dir = Path(cfg.values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.command == "spectrum":
        return _run_point_table(cfg, out_dir, "spectrum", t0)
    if cfg.command == "parity":
        return _run_point_table(cfg, out_dir, "parity", t0)
    if cfg.command == "wavefunction":
        return _run_wavefunction(cfg, out_dir, t0)
    if cfg.command == "converge":
        return _run_converge(cfg, out_dir, t0)
    if cfg.command == "phase-diagram":
        return _run_phase_diagram(cfg, out_dir, t0)
    raise ConfigError(f"unknown command {cfg.command!r}")  # pragma: no cover


def main(argv: Optional[list] = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return run_job(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

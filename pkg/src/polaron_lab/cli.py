"""Configuration-driven command line: one JSON config in, files out.

Each subcommand maps onto one library module.  A run writes its payload
files first (atomically, through a temp file and rename) and a
manifest.json last, so any directory holding a manifest is a finished
job re-runnable from the recorded configuration.

Exit codes: 0 success, 1 bad configuration or out-of-range request,
2 numerical non-convergence.
"""

import argparse
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import __version__, branch, budget, froehlich, pekar, perturb
from .errors import ConvergenceError, PolaronLabError, ValidationError
from .grid import DEFAULT_GRID_SPEC, FLOAT_FMT, Grid, GridFunction, write_csv

SUBCOMMANDS = ("pekar", "branch", "perturb", "froehlich", "scan", "budget")


# ---------------------------------------------------------------- output


def _fmt(x) -> str:
    x = float(x)
    if not np.isfinite(x):
        raise ValidationError("cli", "output", f"non-finite value {x!r} in output")
    return format(x, FLOAT_FMT)


def _json_text(obj) -> str:
    """Serialize with sorted keys and 17-significant-digit floats.

    json.dump hardwires repr() for floats; the output contract fixes the
    digit count, so walk the tree by hand.
    """
    out = []

    def emit(o, indent: int):
        pad = "  " * indent
        if isinstance(o, dict):
            if not o:
                out.append("{}")
                return
            out.append("{\n")
            items = sorted(o.items())
            for i, (k, v) in enumerate(items):
                if not isinstance(k, str):
                    raise ValidationError("cli", "output", f"non-string key {k!r}")
                out.append(pad + "  " + json.dumps(k) + ": ")
                emit(v, indent + 1)
                out.append(",\n" if i + 1 < len(items) else "\n")
            out.append(pad + "}")
        elif isinstance(o, (list, tuple)):
            if not o:
                out.append("[]")
                return
            out.append("[\n")
            for i, v in enumerate(o):
                out.append(pad + "  ")
                emit(v, indent + 1)
                out.append(",\n" if i + 1 < len(o) else "\n")
            out.append(pad + "]")
        elif isinstance(o, bool):
            out.append("true" if o else "false")
        elif isinstance(o, (int, np.integer)):
            out.append(str(int(o)))
        elif isinstance(o, (float, np.floating)):
            out.append(_fmt(o))
        elif isinstance(o, str):
            out.append(json.dumps(o))
        elif o is None:
            out.append("null")
        else:
            raise ValidationError("cli", "output", f"cannot serialize {type(o).__name__}")

    emit(obj, 0)
    out.append("\n")
    return "".join(out)


def _write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".part-")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_profile(f: GridFunction, path: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".part-")
    os.close(fd)
    try:
        write_csv(f, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(c) for c in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------- config intake


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValidationError("cli", "config", f"cannot read {path}: {exc}") from None
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError("cli", "config", f"invalid JSON in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("cli", "config", "top level must be a JSON object")
    return cfg


def _check_keys(cfg: dict, allowed: set) -> None:
    allowed = allowed | {"subcommand", "output_dir"}
    for key in cfg:
        if key not in allowed:
            raise ValidationError("cli", key, "unknown configuration key")


def _get_potential(cfg: dict) -> pekar.Potential:
    spec = cfg.get("potential")
    if spec is None:
        return pekar.Potential("zero")
    if not isinstance(spec, dict):
        raise ValidationError("cli", "potential", "expected an object like {\"kind\": ...}")
    return pekar.Potential.from_spec(spec)


def _get_measure(cfg: dict) -> perturb.TestMeasure:
    spec = cfg.get("measure")
    if not isinstance(spec, dict):
        raise ValidationError("cli", "measure", "missing or malformed measure spec")
    return perturb.TestMeasure.from_spec(spec)


def _get_grid(cfg: dict) -> Grid:
    spec = cfg.get("grid", DEFAULT_GRID_SPEC)
    if not isinstance(spec, dict):
        raise ValidationError("cli", "grid", "expected an object like {\"half_width\": ..., \"points\": ...}")
    return Grid.from_spec(spec)


def _get_fock(cfg: dict) -> froehlich.FockConfig:
    spec = cfg.get("fock", {})
    if not isinstance(spec, dict):
        raise ValidationError("cli", "fock", "expected an object of Fock-sector parameters")
    return froehlich.FockConfig.from_spec(spec)


def _float_scalar(cfg: dict, key: str) -> float:
    v = cfg.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError("cli", key, "expected a number")
    v = float(v)
    if not np.isfinite(v):
        raise ValidationError("cli", key, "must be finite")
    return v


def _float_list(cfg: dict, key: str) -> list:
    vals = cfg.get(key)
    if not isinstance(vals, list) or not vals:
        raise ValidationError("cli", key, "expected a nonempty array of numbers")
    out = []
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(float(v)):
            raise ValidationError("cli", key, f"non-numeric entry {v!r}")
        out.append(float(v))
    return out


def _potential_spec(V: pekar.Potential) -> dict:
    return {"kind": V.kind, "amplitude": V.amplitude, "width": V.width}


def _measure_spec(W: perturb.TestMeasure) -> dict:
    return {"kind": W.kind, "center": W.center, "width": W.width}


def _grid_spec(g: Grid) -> dict:
    return {"half_width": g.half_width, "points": g.points}


def _fock_spec(c: froehlich.FockConfig) -> dict:
    return {
        "L": c.L,
        "modes": c.modes,
        "phonon_cap": c.phonon_cap,
        "electron_points": c.electron_points,
        "dim_cap": c.dim_cap,
        "coupling": c.coupling,
    }


# ------------------------------------------------------------- runners


def _run_pekar(cfg: dict, out_dir: str) -> dict:
    _check_keys(cfg, {"potential", "grid"})
    V = _get_potential(cfg)
    g = _get_grid(cfg)
    res = pekar.minimize(V, g)
    record = {
        "energy": res.energy,
        "lambda": res.multiplier,
        "residual": res.el_residual,
        "iterations": res.iterations,
    }
    _write_atomic(os.path.join(out_dir, "pekar.json"), _json_text(record))
    _write_profile(res.u, os.path.join(out_dir, "profile.csv"))
    return {"potential": _potential_spec(V), "grid": _grid_spec(g)}


def _run_branch(cfg: dict, out_dir: str) -> dict:
    _check_keys(cfg, {"potential", "grid", "lambda_grid", "profiles"})
    V = _get_potential(cfg)
    g = _get_grid(cfg)
    lg = cfg.get("lambda_grid")
    if not isinstance(lg, dict):
        raise ValidationError("cli", "lambda_grid", "expected {\"start\": ..., \"stop\": ..., \"count\": ...}")
    for key in lg:
        if key not in {"start", "stop", "count"}:
            raise ValidationError("cli", key, "unknown lambda_grid key")
    try:
        start = float(lg["start"])
        stop = float(lg["stop"])
        count = int(lg["count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError("cli", "lambda_grid", f"bad entry: {exc}") from None
    if count < 1:
        raise ValidationError("cli", "lambda_grid", f"count must be positive, got {count}")
    if count > 1 and start == stop:
        raise ValidationError("cli", "lambda_grid", "start and stop coincide")
    profiles = cfg.get("profiles", False)
    if not isinstance(profiles, bool):
        raise ValidationError("cli", "profiles", "expected true or false")

    lambdas = np.sort(np.linspace(start, stop, count))
    curve = branch.trace_branch(V, lambdas, g)
    rows = [(p.lam, p.norm2_sq) for p in curve.points]
    _write_atomic(os.path.join(out_dir, "branch.csv"), _csv_text("lambda,norm2_sq", rows))
    if profiles:
        for i, p in enumerate(curve.points):
            _write_profile(p.u, os.path.join(out_dir, f"profile_{i:04d}.csv"))
    return {
        "potential": _potential_spec(V),
        "grid": _grid_spec(g),
        "lambda_grid": {"start": start, "stop": stop, "count": count},
        "profiles": profiles,
    }


def _run_perturb(cfg: dict, out_dir: str) -> dict:
    _check_keys(cfg, {"potential", "measure", "deltas", "grid"})
    V = _get_potential(cfg)
    W = _get_measure(cfg)
    g = _get_grid(cfg)
    deltas = _float_list(cfg, "deltas")
    for d in deltas:
        # surface bad deltas before any minimization runs
        if d == 0.0 or abs(d) > 0.25:
            raise ValidationError("cli", "deltas", f"delta {d!r} outside the bracketed range (0 < |delta| <= 0.25)")
    rows = []
    for d in deltas:
        upper, quotient, lower = perturb.bracket_check(V, W, d, g)
        rows.append((d, upper, quotient, lower))
    _write_atomic(os.path.join(out_dir, "bracket.csv"), _csv_text("delta,upper,quotient,lower", rows))
    pairing = None if V.is_zero else perturb.hf_derivative(V, W, g)
    _write_atomic(os.path.join(out_dir, "perturb.json"), _json_text({"pairing": pairing}))
    return {
        "potential": _potential_spec(V),
        "measure": _measure_spec(W),
        "deltas": deltas,
        "grid": _grid_spec(g),
    }


def _run_froehlich(cfg: dict, out_dir: str) -> dict:
    _check_keys(cfg, {"alpha", "potential", "fock"})
    alpha = _float_scalar(cfg, "alpha")
    V = _get_potential(cfg)
    fc = _get_fock(cfg)
    H = froehlich.build_hamiltonian(alpha, V, fc)
    gs = froehlich.ground_state(H)
    rho = froehlich.electron_density(gs, fc)
    record = {
        "alpha": gs.alpha,
        "energy": gs.energy,
        "residual": gs.residual,
        "ritz_gap": gs.ritz_gap,
        "iterations": gs.iterations,
    }
    _write_atomic(os.path.join(out_dir, "froehlich.json"), _json_text(record))
    _write_atomic(
        os.path.join(out_dir, "density.csv"),
        _csv_text("x,value", zip(rho.nodes, rho.values)),
    )
    return {"alpha": alpha, "potential": _potential_spec(V), "fock": _fock_spec(fc)}


def _run_scan(cfg: dict, out_dir: str) -> dict:
    _check_keys(cfg, {"alphas", "potential", "measure", "fock", "grid"})
    alphas = _float_list(cfg, "alphas")
    V = _get_potential(cfg)
    W = _get_measure(cfg)
    fc = _get_fock(cfg)
    g = _get_grid(cfg)
    rows = froehlich.convergence_scan(alphas, V, W, fc, g)
    failed = [r for r in rows if r.error is not None]
    if failed:
        detail = "; ".join(f"alpha={r.alpha:g}: {r.error}" for r in failed)
        raise ConvergenceError(f"scan rows failed: {detail}")
    table = [
        (r.alpha, r.E, r.E_over_alpha2, r.pairing, r.pekar_e, r.pekar_pairing, r.ansatz_energy)
        for r in rows
    ]
    _write_atomic(
        os.path.join(out_dir, "scan.csv"),
        _csv_text("alpha,E,E_over_alpha2,pairing,pekar_e,pekar_pairing,ansatz_energy", table),
    )
    return {
        "alphas": alphas,
        "potential": _potential_spec(V),
        "measure": _measure_spec(W),
        "fock": _fock_spec(fc),
        "grid": _grid_spec(g),
    }


def _run_budget(cfg: dict, out_dir: str) -> dict:
    _check_keys(cfg, {"operation", "exponents"})
    op = cfg.get("operation", "optimize")
    if op == "optimize":
        if "exponents" in cfg:
            raise ValidationError("cli", "exponents", "only valid with operation \"orders\"")
        ev = budget.optimize().vector
    elif op == "orders":
        spec = cfg.get("exponents")
        if not isinstance(spec, dict):
            raise ValidationError("cli", "exponents", "missing or malformed exponent spec")
        ev = budget.ExponentVector.from_spec(spec)
    else:
        raise ValidationError("cli", "operation", f"expected \"orders\" or \"optimize\", got {op!r}")
    rep = budget.term_orders(ev)
    exponents = {"d": str(ev.d), "k": str(ev.k), "p": str(ev.p), "e": str(ev.e)}
    record = {
        "exponents": exponents,
        "orders": {name: str(v) for name, v in rep.orders.items()},
        "max_order": str(rep.max_order),
        "binding": list(rep.binding),
    }
    _write_atomic(os.path.join(out_dir, "budget.json"), _json_text(record))
    return {"operation": op, "exponents": exponents}


_RUNNERS = {
    "pekar": _run_pekar,
    "branch": _run_branch,
    "perturb": _run_perturb,
    "froehlich": _run_froehlich,
    "scan": _run_scan,
    "budget": _run_budget,
}


def run(subcommand: str, config_path: str, out_override: Optional[str] = None) -> None:
    """Execute one subcommand from a JSON configuration file.

    Payload files land in the output directory first; manifest.json is
    written last and records the resolved configuration, so its presence
    marks a completed run.
    """
    if subcommand not in _RUNNERS:
        raise ValidationError("cli", "subcommand", f"unknown subcommand {subcommand!r}")
    cfg = _load_config(config_path)
    declared = cfg.get("subcommand")
    if declared is not None and declared != subcommand:
        raise ValidationError(
            "cli", "subcommand", f"config declares {declared!r} but {subcommand!r} was requested"
        )
    out_dir = out_override if out_override is not None else cfg.get("output_dir", "out")
    if not isinstance(out_dir, str) or not out_dir:
        raise ValidationError("cli", "output_dir", "expected a nonempty path")
    os.makedirs(out_dir, exist_ok=True)
    resolved = _RUNNERS[subcommand](cfg, out_dir)
    resolved["subcommand"] = subcommand
    resolved["output_dir"] = out_dir
    manifest = {
        "config": resolved,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _write_atomic(os.path.join(out_dir, "manifest.json"), _json_text(manifest))


class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors; argparse's default exit
    # status 2 would collide with the non-convergence code
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: {message}")


def main(argv=None) -> int:
    parser = _Parser(
        prog="polaron-lab",
        description="Run one polaron-lab computation from a JSON configuration.",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides the configuration)")
    args = parser.parse_args(argv)
    try:
        run(args.subcommand, args.config, args.out)
    except ConvergenceError as exc:
        print(f"polaron-lab: did not converge: {exc}", file=sys.stderr)
        return 2
    except PolaronLabError as exc:
        print(f"polaron-lab: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

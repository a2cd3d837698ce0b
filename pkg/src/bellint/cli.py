"""Command-line front end: sn, sweep, etamin, simulate, asymptote.

Exit codes: 0 success, 1 usage error, 2 numerical or statistical failure.
Output files contain lossless (round-trip exact) floats; the console shows
six decimals.  A plain key = value config file can preset any flag of the
chosen subcommand; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .aggregation import asymptotic_s, s_n
from .loss import NoViolationError, eta_min, s_n_eta
from .optimize import (
    AngleVector,
    OptimizerConfig,
    angles_from_settings,
    reference_angles,
    settings_from_angles,
    sweep,
)
from .quantum import reference_settings, werner_state
from .simulate import ExperimentConfig, InsufficientDataError, run_experiment

__all__ = ["main"]

USAGE_EXIT = 1
FAILURE_EXIT = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        raise _UsageError(message)


def _fmt(x: float) -> str:
    """Lossless float text for files (shortest round-trip form)."""
    return repr(float(x))


def _display(x: float) -> str:
    return f"{x:.6f}"


def _write_text(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _settings_from_source(source: str):
    if source == "reference":
        return reference_settings()
    payload = json.loads(Path(source).read_text(encoding="utf-8"))
    angles = AngleVector(np.asarray(payload["angles"], dtype=float))
    return settings_from_angles(angles)


def _settings_payload(settings) -> dict:
    angles = angles_from_settings(settings)
    return {
        "angles": [float(a) for a in angles.angles],
        "bloch": [[float(c) for c in s.bloch] for s in settings],
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_sn(args) -> int:
    settings = _settings_from_source(args.settings_source)
    value = s_n_eta(werner_state(args.v), settings, args.n, args.eta)
    print(f"S_N(n={args.n}, v={args.v}, eta={args.eta}) = {_display(value.s)}")
    if args.out:
        payload = {"n": args.n, "v": args.v, "eta": args.eta, "s": value.s,
                   "settings": _settings_payload(settings)}
        _write_text(args.out, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_sweep(args) -> int:
    if not args.v:
        raise _UsageError("sweep needs at least one --v (or a config file entry)")
    v_list = sorted({float(tok) for chunk in args.v for tok in chunk.split(",")})
    cfg = OptimizerConfig(starts=args.starts, seed=args.seed, n_cap=args.n_cap)
    cells = sweep(v_list, args.n_max, eta=args.eta, cfg=cfg, optimize=args.optimize)

    header = ["n", "v", "s", "converged"]
    for i in range(1, 5):
        header += [f"theta{i}", f"phi{i}"]
    lines = [",".join(header)]
    any_ok = False
    for cell in cells:
        if cell.result is not None:
            any_ok = any_ok or cell.ok
            angles = cell.result.best_angles.angles
            row = [str(cell.n), _fmt(cell.v), _fmt(cell.result.best_s.s),
                   "true" if cell.ok else "false"]
            row += [_fmt(a) for a in angles]
        else:
            row = [str(cell.n), _fmt(cell.v), "", "false"] + [""] * 8
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    if not any_ok:
        print("error: every sweep cell failed", file=sys.stderr)
        return FAILURE_EXIT
    return 0


def _cmd_etamin(args) -> int:
    if not args.n_list:
        raise _UsageError("etamin needs at least one --n-list (or a config file entry)")
    n_values = [int(tok) for chunk in args.n_list for tok in chunk.split(",")]
    if any(n < 1 for n in n_values):
        raise _UsageError("every n must be >= 1")
    settings = reference_settings()
    state = werner_state(args.v)
    rows = []
    for n in n_values:
        try:
            res = eta_min(state, settings, n, tol=args.tol)
            rows.append((n, res.eta_min, res.iterations))
            print(f"{n},{_display(res.eta_min)},{res.iterations}")
        except NoViolationError:
            rows.append((n, None, 0))
            print(f"{n},none,0")
    if args.out:
        lines = ["n,eta_min,iterations"]
        for n, value, iters in rows:
            lines.append(f"{n},{'none' if value is None else _fmt(value)},{iters}")
        _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_simulate(args) -> int:
    if args.runs < 1:
        raise _UsageError("--runs must be >= 1")
    delay_chunks = args.delays if args.delays else ["6,7,8,9,10"]
    delays = tuple(int(tok) for chunk in delay_chunks for tok in chunk.split(","))
    cfg = ExperimentConfig(n=args.n, v=args.v, eta=args.eta, tau=args.tau,
                           path_delays=delays, runs=args.runs, seed=args.seed,
                           ambiguity_required=args.ambiguity)
    log_handle = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        report = run_experiment(cfg, bootstrap_b=args.bootstrap,
                                bootstrap_seed=args.bootstrap_seed,
                                log_file=log_handle)
    finally:
        if log_handle is not None:
            log_handle.close()
    print(f"s_hat = {_display(report.s_hat)} +/- {_display(report.stderr)}")
    print(f"postselection_rate = {_display(report.postselection_rate)} "
          f"({report.kept_runs}/{report.total_runs} runs kept)")
    if args.out:
        _write_text(args.out, json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def _cmd_asymptote(args) -> int:
    value = asymptotic_s(werner_state(args.v), reference_settings())
    print(f"S_inf(v={args.v}) = {_display(value.s)}")
    return 0


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="bellint",
                     description="Bell nonlocality from aggregate detector intensities.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = {"formatter_class": argparse.ArgumentDefaultsHelpFormatter}

    p = sub.add_parser("sn", help="evaluate S_N at fixed settings", **common)
    p.add_argument("--n", type=int, default=1, help="pairs per run")
    p.add_argument("--v", type=float, default=1.0, help="visibility")
    p.add_argument("--eta", type=float, default=1.0, help="detection efficiency")
    p.add_argument("--settings-source", default="reference",
                   help="'reference' or path to a JSON file with 8 angles")
    p.add_argument("--out", default=None, help="write result JSON here")
    p.add_argument("--config", default=None, help="key = value preset file")
    p.set_defaults(fn=_cmd_sn)

    p = sub.add_parser("sweep", help="S_N over a grid of (v, n)", **common)
    p.add_argument("--v", action="append", default=None,
                   help="visibility, repeatable or comma separated")
    p.add_argument("--n-max", type=int, default=18, help="largest pair count")
    p.add_argument("--eta", type=float, default=1.0, help="detection efficiency")
    p.add_argument("--optimize", action="store_true",
                   help="minimize over settings per cell (default: reference settings)")
    p.add_argument("--starts", type=int, default=32, help="optimizer starts per cell")
    p.add_argument("--seed", type=int, default=0, help="optimizer master seed")
    p.add_argument("--n-cap", type=int, default=24, help="hard cap on --n-max")
    p.add_argument("--out", default=None, help="write CSV here (default stdout)")
    p.add_argument("--config", default=None, help="key = value preset file")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("etamin", help="critical detection efficiency", **common)
    p.add_argument("--n-list", action="append", default=None,
                   help="pair counts, repeatable or comma separated")
    p.add_argument("--v", type=float, default=1.0, help="visibility")
    p.add_argument("--tol", type=float, default=1e-10, help="bisection tolerance")
    p.add_argument("--out", default=None, help="write CSV here")
    p.add_argument("--config", default=None, help="key = value preset file")
    p.set_defaults(fn=_cmd_etamin)

    p = sub.add_parser("simulate", help="event-level Monte Carlo", **common)
    p.add_argument("--n", type=int, default=3, help="pairs per run")
    p.add_argument("--v", type=float, default=1.0, help="visibility")
    p.add_argument("--eta", type=float, default=1.0, help="detection efficiency")
    p.add_argument("--tau", type=float, default=1.0, help="pulse period")
    p.add_argument("--delays", action="append", default=None,
                   help="path delays in units of tau (default 6,7,8,9,10)")
    p.add_argument("--runs", type=int, default=10000, help="total runs")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--ambiguity", action=argparse.BooleanOptionalAction, default=True,
                   help="require pairing ambiguity in postselection")
    p.add_argument("--bootstrap", type=int, default=1000, help="bootstrap resamples")
    p.add_argument("--bootstrap-seed", type=int, default=0, help="bootstrap seed")
    p.add_argument("--out", default=None, help="write summary JSON here")
    p.add_argument("--log", default=None, help="write per-run JSON lines here")
    p.add_argument("--config", default=None, help="key = value preset file")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("asymptote", help="macroscopic limit of S_N", **common)
    p.add_argument("--v", type=float, default=1.0, help="visibility")
    p.add_argument("--config", default=None, help="key = value preset file")
    p.set_defaults(fn=_cmd_asymptote)

    return parser


def _load_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


_LIST_FLAGS = {"v", "n_list", "delays"}
_INT_FLAGS = {"n", "n_max", "n_cap", "starts", "seed", "runs", "bootstrap",
              "bootstrap_seed"}
_FLOAT_FLAGS = {"eta", "tol", "tau"}
_BOOL_FLAGS = {"optimize", "ambiguity"}


def _coerce_config(key: str, value: str, command: str):
    if key in _BOOL_FLAGS:
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise _UsageError(f"config key {key}: expected a boolean, got {value!r}")
    if key in _INT_FLAGS:
        return int(value)
    if key == "v" and command != "sweep":
        return float(value)
    if key in _FLOAT_FLAGS:
        return float(value)
    if key in _LIST_FLAGS:
        return [value]
    return value


def _apply_config(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    if getattr(args, "config", None) is None:
        return args
    presets = _load_config_file(args.config)
    explicit = {tok.split("=", 1)[0].lstrip("-").replace("-", "_")
                for tok in argv if tok.startswith("--")}
    valid = set(vars(args))
    for key, value in presets.items():
        if key not in valid or key in ("config", "fn", "command"):
            raise _UsageError(f"unknown config key {key!r} for this subcommand")
        if key in explicit:
            continue
        try:
            setattr(args, key, _coerce_config(key, value, args.command))
        except ValueError as exc:
            raise _UsageError(f"config key {key}: {exc}")
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config(args, argv)
        return args.fn(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (InsufficientDataError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE_EXIT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE_EXIT


if __name__ == "__main__":
    sys.exit(main())

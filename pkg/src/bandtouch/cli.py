"""Command-line front end: ``bandtouch {fis,evolve,phase,sweep,oracle-check}``.

Exit status is 0 on success, 2 for invalid arguments and 3 for numerical
failures (degenerate projections, gap collapse, vanishing amplitudes).  The
fully resolved configuration is printed to stderr as JSON before any work.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import _io, plotting
from .dynamics import (
    DEFAULT_DT,
    DEFAULT_EPSILON,
    DEFAULT_LAMBDA0,
    DEFAULT_LAMBDA_INF,
    PROTOCOL_KINDS,
    Protocol,
    evolve,
    rk4_oracle_evolve,
    split_phase_analysis,
    transition_probability,
)
from .errors import BandTouchError
from .fis import fis_profile
from .models import FAMILIES, model_from_dict
from .sweep import AXES, MEASURES, SweepSpec, default_workers, run_sweep, table_text

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_REQUIRED = {
    "gl": ("n", "delta1"),
    "gp": ("n", "delta2"),
    "pw": ("m", "delta_re"),
    "poly": ("coeffs", "delta1"),
    "graphene_quadratic": ("hopping", "lattice"),
    "graphene_tb": ("hopping", "lattice"),
}
_DELTA_FIELD = {"gl": "delta1", "gp": "delta2", "pw": "delta_re", "poly": "delta1"}


class UsageError(Exception):
    """Invalid flag value or combination; ``flag`` names the culprit."""

    def __init__(self, flag, message):
        super().__init__(f"argument {flag}: {message}")
        self.flag = flag


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------


def _positive(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not (np.isfinite(x) and x > 0):
        raise argparse.ArgumentTypeError(f"must be a finite number > 0, got {text!r}")
    return x


def _positive_int(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text!r}")
    return x


def _finite(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}") from None
    if not np.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be finite, got {text!r}")
    return x


def parse_range(text):
    """``min:max:steps`` -> (min, max, steps)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected min:max:steps, got {text!r}")
    try:
        lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected min:max:steps, got {text!r}") from None
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise argparse.ArgumentTypeError(f"range bounds must be finite, got {text!r}")
    if steps < 1:
        raise argparse.ArgumentTypeError(f"steps must be >= 1, got {text!r}")
    if steps > 1 and not lo < hi:
        raise argparse.ArgumentTypeError(f"need min < max, got {text!r}")
    return lo, hi, steps


def _coeffs(text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(np.isfinite(vals)):
        raise argparse.ArgumentTypeError("coefficients must be finite")
    return vals


def _measures(text):
    vals = tuple(dict.fromkeys(x.strip() for x in text.split(",") if x.strip()))
    bad = [v for v in vals if v not in MEASURES]
    if not vals or bad:
        raise argparse.ArgumentTypeError(f"expected a comma-separated subset of {MEASURES}, got {text!r}")
    return vals


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _model_parent():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=sorted(FAMILIES), help="model family")
    g.add_argument("--config", help="ModelSpec JSON file (alternative to --model and its flags)")
    g.add_argument("--n", type=_positive_int, help="exponent of gl / gp")
    g.add_argument("--delta1", type=_positive, help="gl coupling; also the poly coupling")
    g.add_argument("--delta2", type=_positive, help="gp gap parameter")
    g.add_argument("--m", type=_positive, help="pw mass")
    g.add_argument("--delta-re", type=_finite, help="pw coupling, real part")
    g.add_argument("--delta-im", type=_finite, default=None, help="pw coupling, imaginary part (default 0)")
    g.add_argument("--hopping", type=_positive, help="graphene hopping h")
    g.add_argument("--lattice", type=_positive, help="graphene lattice constant a")
    g.add_argument("--coeffs", type=_coeffs, help="poly coefficients a1,a2,... of g(lam)/lam")
    return p


def _protocol_parent(default_kind="pl2"):
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("protocol")
    g.add_argument("--protocol", choices=[k for k in PROTOCOL_KINDS if k != "custom"], default=default_kind)
    g.add_argument("--c", type=_positive, help="driving speed, lam = c t")
    g.add_argument("--dt", type=_positive, default=DEFAULT_DT)
    g.add_argument("--lambda0", type=_positive, default=DEFAULT_LAMBDA0, help="pl1 half-width")
    g.add_argument("--lambda-inf", type=_positive, default=DEFAULT_LAMBDA_INF, help="stand-in for infinity")
    g.add_argument("--epsilon", type=_positive, default=DEFAULT_EPSILON, help="offset from the touching point")
    return p


def _output_parent():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("output")
    g.add_argument("--out", help="data file (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--plot-script", help="also write a gnuplot script reading --out")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandtouch",
        description="Nonadiabatic transitions of driven two-level systems with a band-touching point.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    model, out = _model_parent(), _output_parent()

    p = sub.add_parser("fis", parents=[model, out], help="fidelity susceptibility profile")
    p.add_argument("--range", type=parse_range, default=(-3.0, 3.0, 601), help="lambda grid min:max:steps")

    p = sub.add_parser("evolve", parents=[model, _protocol_parent(), out], help="Crank-Nicolson drive")
    p.add_argument("--sample-every", type=_positive_int, default=100)
    p.add_argument("--initial", choices=("ground", "excited"), default="ground")

    sub.add_parser("phase", parents=[model, _protocol_parent(), out], help="split-evolution phase analysis")

    p = sub.add_parser("sweep", parents=[model, _protocol_parent(), out], help="parameter sweep")
    p.add_argument("--axis", choices=AXES, default="delta")
    p.add_argument("--range", type=parse_range, required=True, help="axis grid min:max:steps")
    p.add_argument("--measure", type=_measures, default=("p",), help="comma-separated subset of p,delta_phi")
    p.add_argument("--threads", type=_positive_int, default=None, help="worker threads")

    p = sub.add_parser("oracle-check", parents=[model, _protocol_parent(), out],
                       help="compare Crank-Nicolson with the RK4 oracle")
    p.add_argument("--dt-oracle", type=_positive, default=None, help="RK4 step, at most dt/5 (default dt/5)")
    p.add_argument("--tolerance", type=_positive, default=1e-5, help="allowed |P_cn - P_rk4|")
    return parser


def _join_range(argv):
    # "--range -2:2:10" would otherwise be read as an unknown option
    out, i = [], 0
    while i < len(argv):
        if argv[i] == "--range" and i + 1 < len(argv):
            out.append("--range=" + argv[i + 1])
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


# ---------------------------------------------------------------------------
# Resolution
# ---------------------------------------------------------------------------


def _flag(field):
    return "--" + field.replace("_", "-")


def resolve_model(args, fill=None):
    """Build the ModelSpec from flags or ``--config``.

    ``fill(family)`` returns values for swept fields, which need no flag.
    """
    given = {f: getattr(args, f) for f in ("n", "delta1", "delta2", "m", "delta_re", "delta_im",
                                           "hopping", "lattice", "coeffs")}
    if args.config:
        if args.model:
            raise UsageError("--config", "cannot be combined with --model")
        extra = [_flag(f) for f, v in given.items() if v is not None]
        if extra:
            raise UsageError("--config", f"cannot be combined with {', '.join(extra)}")
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError("--config", f"cannot read {args.config}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError("--config", f"invalid JSON in {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("--config", "expected a JSON object")
        if fill is not None:
            data = {**data, **fill(data.get("family"))}
        try:
            return model_from_dict(data)
        except (ValueError, TypeError) as exc:
            raise UsageError("--config", str(exc)) from None
    if not args.model:
        raise UsageError("--model", "a model is required (or use --config)")
    family = args.model
    data = {"family": family, **{k: v for k, v in given.items() if v is not None}}
    if fill is not None:
        data.update(fill(family))
    for f in _REQUIRED[family]:
        if data.get(f) is None:
            raise UsageError(_flag(f), f"required for --model {family}")
    allowed = set(_REQUIRED[family]) | ({"delta_im"} if family == "pw" else set())
    for f, v in given.items():
        if v is not None and f not in allowed:
            raise UsageError(_flag(f), f"not used by --model {family}")
    try:
        return model_from_dict(data)
    except (ValueError, TypeError) as exc:
        raise UsageError("--model", str(exc)) from None


def resolve_protocol(args, c=None):
    c = args.c if c is None else c
    if c is None:
        raise UsageError("--c", "driving speed is required")
    if not args.epsilon < args.lambda0 < args.lambda_inf:
        raise UsageError("--epsilon", "need epsilon < lambda0 < lambda-inf")
    return Protocol(args.protocol, c, lambda0=args.lambda0, lambda_inf=args.lambda_inf,
                    epsilon=args.epsilon, dt=args.dt)


def _check_outputs(args):
    if args.plot_script:
        if not args.out:
            raise UsageError("--plot-script", "needs --out so the script has a data file to read")
        if args.format != "csv":
            raise UsageError("--plot-script", "needs --format csv")
    for flag, path in (("--out", args.out), ("--plot-script", args.plot_script)):
        if path and not Path(path).resolve().parent.is_dir():
            raise UsageError(flag, f"directory of {path} does not exist")


def _emit(args, text):
    if args.out:
        _io.write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _write_plot(args, script):
    if args.plot_script:
        _io.write_text(args.plot_script, script)


def _image_name(args):
    return str(Path(args.out).with_suffix(".png"))


def _grid(rng):
    lo, hi, steps = rng
    return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])


def _log_config(config):
    sys.stderr.write(_io.json_text(config))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_fis(args):
    model = resolve_model(args)
    lo, hi, steps = args.range
    if steps < 3:
        raise UsageError("--range", "fis needs at least 3 steps")
    _check_outputs(args)
    _log_config({"command": "fis", "model": model.to_dict(), "range": [lo, hi, steps],
                 "out": args.out, "format": args.format, "plot_script": args.plot_script})
    prof = fis_profile(model, lo, hi, steps)
    _emit(args, prof.to_csv() if args.format == "csv" else prof.to_json())
    _write_plot(args, plotting.fis_script(args.out, _image_name(args)) if args.plot_script else "")
    if args.out:
        print(_io.json_text({"mfp": prof.mfp, "mgp": prof.mgp, "chi_at_zero": prof.chi_at_zero}), end="")
    return EXIT_OK


def _cmd_evolve(args):
    model = resolve_model(args)
    protocol = resolve_protocol(args)
    _check_outputs(args)
    _log_config({"command": "evolve", "model": model.to_dict(), "protocol": protocol.to_dict(),
                 "sample_every": args.sample_every, "initial": args.initial,
                 "out": args.out, "format": args.format, "plot_script": args.plot_script})
    traj = evolve(model, protocol, sample_every=args.sample_every, initial=args.initial)
    p = transition_probability(traj)
    if args.format == "csv":
        text = traj.to_csv()
    else:
        text = _io.json_text({
            "transition_probability": p,
            "model": model.to_dict(),
            "protocol": protocol.to_dict(),
            "t": list(traj.t),
            "lambda": list(traj.lam),
            "p_ground": list(traj.p_ground),
            "p_excited": list(traj.p_excited),
        })
    _emit(args, text)
    _write_plot(args, plotting.evolve_script(args.out, _image_name(args)) if args.plot_script else "")
    if args.out:
        print(_io.json_text({"transition_probability": p}), end="")
    else:
        sys.stderr.write(f"transition_probability {_io.fmt(p)}\n")
    return EXIT_OK


def _cmd_phase(args):
    if args.protocol != "pl2":
        raise UsageError("--protocol", "phase analysis needs pl2")
    if args.plot_script:
        raise UsageError("--plot-script", "phase writes a single record; plot a sweep with --measure p,delta_phi")
    model = resolve_model(args)
    protocol = resolve_protocol(args)
    _check_outputs(args)
    _log_config({"command": "phase", "model": model.to_dict(), "protocol": protocol.to_dict(),
                 "out": args.out, "format": args.format})
    dec = split_phase_analysis(model, protocol)
    if args.format == "json":
        text = dec.to_json()
    else:
        names = ["alpha_plus", "alpha_minus", "beta_pp", "beta_pm", "beta_mp", "beta_mm"]
        header, row = [], []
        for name in names:
            z = getattr(dec, name)
            header += [f"{name}_re", f"{name}_im"]
            row += [z.real, z.imag]
        header += ["delta_phi", "p_reconstructed", "p_direct"]
        row += [dec.delta_phi, dec.p_reconstructed, dec.p_direct]
        text = _io.csv_text(header, [row])
    _emit(args, text)
    return EXIT_OK


def _sweep_fill(axis, first):
    def fill(family):
        if axis == "delta":
            if family not in _DELTA_FIELD:
                raise UsageError("--axis", f"family {family!r} has no delta axis")
            return {_DELTA_FIELD[family]: first}
        if axis == "exponent":
            if family not in ("gl", "gp"):
                raise UsageError("--axis", f"family {family!r} has no exponent axis")
            return {"n": int(first)}
        return {}
    return fill


def _cmd_sweep(args):
    values = _grid(args.range)
    if args.axis == "exponent" and not np.all((values == np.round(values)) & (values >= 1)):
        raise UsageError("--range", "exponent values must be integers >= 1")
    if args.axis in ("delta", "speed") and not np.all(values > 0):
        raise UsageError("--range", f"{args.axis} values must be > 0")
    c = None
    if args.axis == "speed":
        if args.c is not None:
            raise UsageError("--c", "cannot be combined with --axis speed")
        c = float(values[0])
    model = resolve_model(args, _sweep_fill(args.axis, float(values[0])))
    protocol = resolve_protocol(args, c)
    if "delta_phi" in args.measure and protocol.kind != "pl2":
        raise UsageError("--measure", "delta_phi needs --protocol pl2")
    try:
        spec = SweepSpec(model, args.axis, tuple(float(v) for v in values), protocol, frozenset(args.measure))
    except ValueError as exc:
        raise UsageError("--range", str(exc)) from None
    workers = args.threads if args.threads is not None else default_workers()
    _check_outputs(args)
    _log_config({"command": "sweep", **spec.to_dict(), "threads": workers,
                 "out": args.out, "format": args.format, "plot_script": args.plot_script})
    result = run_sweep(spec, workers)
    _emit(args, table_text(result, args.format))
    if args.plot_script:
        _write_plot(args, plotting.sweep_script(args.out, _image_name(args), args.axis,
                                                "delta_phi" in spec.measure))
    return EXIT_OK


def _cmd_oracle(args):
    if args.plot_script:
        raise UsageError("--plot-script", "oracle-check writes no table")
    model = resolve_model(args)
    protocol = resolve_protocol(args)
    dt_oracle = args.dt_oracle if args.dt_oracle is not None else protocol.dt / 5.0
    _check_outputs(args)
    _log_config({"command": "oracle-check", "model": model.to_dict(), "protocol": protocol.to_dict(),
                 "dt_oracle": dt_oracle, "tolerance": args.tolerance,
                 "out": args.out, "format": args.format})
    try:
        ref = rk4_oracle_evolve(model, protocol, dt_oracle=dt_oracle)
    except ValueError as exc:
        raise UsageError("--dt-oracle", str(exc)) from None
    cn = evolve(model, protocol)
    p_cn, p_rk4 = transition_probability(cn), transition_probability(ref)
    report = {
        "p_cn": p_cn,
        "p_rk4": p_rk4,
        "abs_diff": abs(p_cn - p_rk4),
        "norm_drift_cn": float(np.max(np.abs(np.linalg.norm(cn.psi, axis=1) - 1.0))),
        "norm_drift_rk4": float(np.max(np.abs(np.linalg.norm(ref.psi, axis=1) - 1.0))),
        "tolerance": args.tolerance,
        "passed": abs(p_cn - p_rk4) <= args.tolerance,
    }
    if args.format == "json":
        text = _io.json_text(report)
    else:
        keys = list(report)
        text = _io.csv_text(keys, [[float(report[k]) for k in keys]])
    _emit(args, text)
    if not report["passed"]:
        sys.stderr.write(f"bandtouch: error: |P_cn - P_rk4| = {report['abs_diff']:.3g} exceeds "
                         f"--tolerance {args.tolerance:g}\n")
        return EXIT_NUMERIC
    return EXIT_OK


_COMMANDS = {
    "fis": _cmd_fis,
    "evolve": _cmd_evolve,
    "phase": _cmd_phase,
    "sweep": _cmd_sweep,
    "oracle-check": _cmd_oracle,
}


def run_command(args) -> int:
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"bandtouch {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except BandTouchError as exc:
        sys.stderr.write(f"bandtouch {args.command}: error: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        sys.stderr.write(f"bandtouch {args.command}: error: argument --out: {exc}\n")
        return EXIT_USAGE


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_range(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``voldens {simulate,oracle,estimate,experiment,validate-kernel}``.

Exit codes: 0 success, 1 argument error, 2 numeric or domain failure,
3 I/O failure.

Config files (``--config``) are flat ``key = value`` text; ``#`` starts a
comment. Keys are flag names without dashes (``h``, ``grid_points``), model
parameters as ``param.<name>``, and a polynomial kernel as
``kernel.coeffs = 1,0,-3,0,3,0,-1`` (optionally ``kernel.name``). Command-line
flags override file values.
"""

import argparse
import csv
import io
import os
import sys
import tempfile
import warnings

import numpy as np

from . import __version__
from .deconv import MIN_BANDWIDTH, DeconvKernel, RegimeWarning, bandwidth_schedule, default_grid, estimate
from .experiments import SUITES, ExperimentConfig, default_config, run_suite
from .kernels import KERNELS, KernelSpec, validate_condition_w
from .observe import ObservationSeries
from .simmodel import MODELS, log_sigma2_density, make_model, observe, simulate_path

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgError(message)


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__}: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    conv.__name__ = f"positive {kind.__name__}"
    return conv


def _unit_interval(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _keyvalue(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key!r} must be numeric") from None


def _grid_triplet(text):
    parts = text.replace(",", ":").split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected MIN:MAX:POINTS")
    return float(parts[0]), float(parts[1]), int(parts[2])


def _common(p):
    p.add_argument("--seed", type=_nonneg_int, help="root seed (default 0; suites keep their own)")
    p.add_argument("--threads", type=_nonneg_int, default=1, help="worker cap, 0 = auto")
    p.add_argument("--config", help="flat key=value file; flags override it")


def _grid_flags(p):
    p.add_argument("--grid", type=_grid_triplet, help="MIN:MAX:POINTS")
    p.add_argument("--grid-min", type=float)
    p.add_argument("--grid-max", type=float)
    p.add_argument("--grid-points", type=_positive(int), default=101)


def _model_flags(p):
    p.add_argument("--model", choices=sorted(MODELS), default="expou")
    p.add_argument("--param", type=_keyvalue, action="append", default=[],
                   metavar="KEY=VALUE")


def build_parser():
    parser = _Parser(prog="voldens", allow_abbrev=False,
                     description="Volatility density estimation by deconvolution.")
    parser.add_argument("--version", action="version", version=f"voldens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", allow_abbrev=False, help="simulate increments")
    _common(p)
    _model_flags(p)
    p.add_argument("--n", type=_positive(int), required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--delta", type=_positive(float), help="sampling gap")
    g.add_argument("--delta-exp", type=_unit_interval, help="gap = n**-delta_exp")
    p.add_argument("--fine-factor", type=_positive(int), default=50)
    p.add_argument("--output", required=True)

    p = sub.add_parser("oracle", allow_abbrev=False, help="true density of log sigma^2")
    _common(p)
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--output", required=True)

    p = sub.add_parser("estimate", allow_abbrev=False, help="estimate the density")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--h", type=_positive(float))
    p.add_argument("--gamma", type=_positive(float))
    p.add_argument("--delta", type=_unit_interval)
    p.add_argument("--kernel", default="poly3")
    p.add_argument("--variant", choices=("ecf", "direct"), default="ecf")
    _grid_flags(p)
    p.add_argument("--output", required=True)

    p = sub.add_parser("experiment", allow_abbrev=False, help="run an experiment suite")
    _common(p)
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--output-dir", required=True)

    p = sub.add_parser("validate-kernel", allow_abbrev=False, help="check a kernel")
    _common(p)
    p.add_argument("--kernel", default="poly3")
    return parser


# ---------------------------------------------------------------- config

def read_config(path):
    """Parse a flat ``key = value`` file into a dict of strings."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ArgError(f"{path}:{lineno}: expected key = value")
            out[key.strip()] = value.strip()
    return out


def _apply_config(parser, argv, cfg):
    """Re-parse with config values as defaults for the chosen subcommand."""
    sub = parser._subparsers._group_actions[0].choices[argv.command]
    dests = {a.dest: a for a in sub._actions}
    defaults, extra = {}, {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if key.startswith("param.") or key.startswith("kernel."):
            extra[key] = value
        elif dest in dests and dest not in ("help", "config"):
            action = dests[dest]
            if action.type is not None and action.nargs is None:
                try:
                    value = action.type(value)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise ArgError(f"config {key}: {exc}") from None
            defaults[dest] = value
        elif argv.command == "experiment":
            extra[key] = value
        else:
            raise ArgError(f"config: unknown key {key!r}")
    return defaults, extra


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    extra = {}
    if getattr(args, "config", None):
        cfg = read_config(args.config)
        defaults, extra = _apply_config(parser, args, cfg)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    args.extra = extra
    return args


def _register_config_kernel(extra):
    coeffs = extra.pop("kernel.coeffs", None)
    name = extra.pop("kernel.name", "custom")
    if coeffs is None:
        return
    try:
        c = [float(v) for v in coeffs.split(",")]
        spec = KernelSpec.from_polynomial(c, name=name)
    except ValueError as exc:
        raise ArgError(f"config kernel.coeffs: {exc}") from None
    KERNELS[name] = lambda: spec


def _model_from(args):
    params = {k[len("param."):]: float(v) for k, v in args.extra.items() if k.startswith("param.")}
    params.update(dict(args.param))
    try:
        return make_model(args.model, **params)
    except (TypeError, ValueError) as exc:
        raise ArgError(f"--param: {exc}") from None


# ---------------------------------------------------------------- output

def _fmt(v):
    return format(float(v), ".17g")


def _meta_lines(command, args, **extra):
    skip = {"output", "output_dir", "extra", "config", "command", "threads"}
    lines = [f"# voldens {__version__}", f"# command={command}"]
    for k in sorted(vars(args)):
        if k in skip:
            continue
        v = getattr(args, k)
        if isinstance(v, list):
            v = ",".join(f"{a}={b:g}" if isinstance(b, float) else str(a) for a, b in v) \
                if v and isinstance(v[0], tuple) else ",".join(map(str, v))
        lines.append(f"# {k}={v}")
    for k, v in sorted(args.extra.items()):
        lines.append(f"# {k}={v}")
    for k, v in extra.items():
        lines.append(f"# {k}={v}")
    return lines


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".voldens-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(meta, header, rows):
    buf = io.StringIO()
    for line in meta:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_observations(path):
    """Read a CSV with ``#`` metadata; returns (ObservationSeries, metadata dict)."""
    meta, body = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    reader = csv.DictReader(body)
    fields = reader.fieldnames or []
    rows = list(reader)
    try:
        Delta = float(meta.get("Delta", 1.0))
        if "increment" in fields:
            x = np.array([float(r["increment"]) for r in rows])
            return ObservationSeries.from_increments(x, Delta), meta
        if "log_square" in fields:
            y = np.array([float(r["log_square"]) for r in rows])
            return ObservationSeries.from_log_squares(y, Delta), meta
    except (ValueError, TypeError) as exc:
        raise OSError(f"{path}: malformed observation file ({exc})") from None
    raise OSError(f"{path}: needs an 'increment' or 'log_square' column")


def _grid(args, fallback):
    if args.grid is not None:
        lo, hi, pts = args.grid
    elif args.grid_min is not None or args.grid_max is not None:
        if args.grid_min is None or args.grid_max is None:
            raise ArgError("--grid-min and --grid-max must be given together")
        lo, hi, pts = args.grid_min, args.grid_max, args.grid_points
    else:
        return fallback(args.grid_points)
    if not lo < hi or pts < 2:
        raise ArgError("--grid: need MIN < MAX and at least 2 points")
    return np.linspace(lo, hi, pts)


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    model = _model_from(args)
    if args.delta is None and args.delta_exp is None:
        raise ArgError("one of --delta or --delta-exp is required")
    Delta = args.delta if args.delta is not None else float(args.n) ** -args.delta_exp
    seed = 0 if args.seed is None else args.seed
    path = simulate_path(model, args.n * Delta, Delta / args.fine_factor, seed)
    obs = observe(path, Delta, args.n)
    with np.errstate(divide="ignore"):
        logsq = np.log(obs.increments ** 2)
    rows = [(i + 1, _fmt(x), _fmt(y)) for i, (x, y) in enumerate(zip(obs.increments, logsq))]
    meta = _meta_lines("simulate", args, Delta=_fmt(Delta), dropped=obs.dropped)
    _atomic_write(args.output, _csv_text(meta, ("i", "increment", "log_square"), rows))
    print(f"simulated {model.name}: n={args.n} Delta={Delta:.6g} dropped={obs.dropped} -> {args.output}")


def cmd_oracle(args):
    model = _model_from(args)
    if model.point_mass is not None:
        raise ValueError(f"model {model.name!r} has no density (point mass)")

    def fallback(points):
        q = model.to_log_sigma2(model.law.ppf(np.array([1e-3, 1 - 1e-3])))
        return np.linspace(q[0], q[1], points)

    grid = _grid(args, fallback)
    f = log_sigma2_density(model, grid)
    rows = [(_fmt(x), _fmt(v)) for x, v in zip(grid, f)]
    meta = _meta_lines("oracle", args)
    _atomic_write(args.output, _csv_text(meta, ("x", "f_true"), rows))
    print(f"oracle {model.name}: {grid.size} points -> {args.output}")


def cmd_estimate(args):
    _register_config_kernel(args.extra)
    if args.kernel not in KERNELS:
        raise ArgError(f"--kernel: unknown kernel {args.kernel!r}")
    if args.h is not None and (args.gamma is not None or args.delta is not None):
        raise ArgError("--h excludes --gamma/--delta")
    obs, _ = read_observations(args.input)
    if obs.transformed.size == 0:
        raise ValueError("no usable observations after dropping zero increments")
    regime = ""
    if args.h is not None:
        if args.h < MIN_BANDWIDTH:
            raise ArgError(f"--h: must be >= {MIN_BANDWIDTH} (1/phi_k overflows below), got {args.h:g}")
        h = args.h
    elif args.gamma is not None and args.delta is not None:
        sched = bandwidth_schedule(obs.n, args.delta, args.gamma, warn=False)
        h = sched.h
        regime = str(sched.in_regime)
        if not sched.in_regime:
            print(f"warning: gamma={args.gamma:g} <= 4/delta={4 / args.delta:g}; "
                  "outside the consistency regime", file=sys.stderr)
    else:
        raise ArgError("give --h, or both --gamma and --delta")
    kernel = DeconvKernel(h, args.kernel)
    grid = _grid(args, lambda pts: default_grid(obs, h, pts))
    est = estimate(obs, kernel, grid, args.variant)
    extra = dict(n=obs.n, dropped=obs.dropped, Delta=_fmt(obs.Delta), h_used=_fmt(h),
                 gamma0=_fmt(kernel.gamma0))
    if regime:
        extra["in_regime"] = regime
    meta = _meta_lines("estimate", args, **extra)
    rows = [(_fmt(x), _fmt(v)) for x, v in zip(est.grid, est.values)]
    _atomic_write(args.output, _csv_text(meta, ("x", "f_hat"), rows))
    print(f"estimated on {grid.size} points (h={h:.6g}, n={obs.n}, dropped={obs.dropped}) -> {args.output}")


_CONFIG_FIELDS = {
    "model": str, "n_schedule": "ints", "delta": float, "gamma": float, "h": float,
    "kernel": str, "grid": "floats", "replicates": int, "seed": int, "variant": str,
    "fine_factor": int, "h_schedule": "floats", "x_points": "floats",
}


def _experiment_config(args):
    cfg = default_config(args.suite)
    params = dict(cfg.params)
    values = {}
    for key, raw in args.extra.items():
        if key.startswith("param."):
            params[key[len("param."):]] = float(raw)
            continue
        kind = _CONFIG_FIELDS.get(key)
        if kind is None:
            raise ArgError(f"config: unknown key {key!r}")
        try:
            if kind == "ints":
                values[key] = tuple(int(v) for v in raw.split(","))
            elif kind == "floats":
                values[key] = tuple(float(v) for v in raw.split(","))
            else:
                values[key] = kind(raw)
        except ValueError:
            raise ArgError(f"config {key}: cannot parse {raw!r}") from None
    fields = {**vars(cfg), **values, "params": params, "threads": args.threads}
    if args.seed is not None:
        fields["seed"] = args.seed
    try:
        return ExperimentConfig(**fields)
    except ValueError as exc:
        raise ArgError(f"config: {exc}") from None


def cmd_experiment(args):
    _register_config_kernel(args.extra)
    config = _experiment_config(args)
    report = run_suite(args.suite, config, args.output_dir)
    for name, c in report.criteria.items():
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] {args.suite}.{name}")
    print(f"wrote {args.suite}.csv and {args.suite}_summary.json to {args.output_dir}")


def cmd_validate_kernel(args):
    _register_config_kernel(args.extra)
    if args.kernel not in KERNELS:
        raise ArgError(f"--kernel: unknown kernel {args.kernel!r}")
    report = validate_condition_w(KERNELS[args.kernel]())
    print(report)
    return EXIT_OK if report.passed else EXIT_NUMERIC


COMMANDS = {
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "estimate": cmd_estimate,
    "experiment": cmd_experiment,
    "validate-kernel": cmd_validate_kernel,
}


def _join_grid(argv):
    """``--grid -3:3:7`` would read as an option; rewrite it as ``--grid=-3:3:7``."""
    out, it = [], iter(argv)
    for a in it:
        if a == "--grid":
            out.append("--grid=" + next(it, ""))
        else:
            out.append(a)
    return out


def main(argv=None):
    argv = _join_grid(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            status = COMMANDS[args.command](args)
        return EXIT_OK if status is None else status
    except ArgError as exc:
        print(f"voldens: argument error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OSError as exc:
        print(f"voldens: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"voldens: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

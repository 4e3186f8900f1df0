"""``oamfid`` command-line tool.

Subcommands::

    probability   outcome probability at one angle or over an angle range
    fidelity      mutual-information fidelity of a strategy
    sweep         fidelity tables over photon number, loss, efficiency or dark counts
    simulate      seeded trials -> posterior -> summary for a list of trial counts
    bayes         posterior and summary for recorded counts
    fit           fringe fit of a CSV data file

Every command writes its result to ``--out`` (default stdout) as CSV or JSON
and a run manifest next to it (``<out>.manifest.json``, or stderr when the
result goes to stdout).  Feeding a manifest back through ``--config`` replays
the run.  Relative ``--out`` paths resolve against ``$OAMFID_OUTPUT_DIR`` when
it is set.

Exit codes: 0 success, 2 usage, 3 parse, 4 accuracy, 5 fit, 6 degenerate data.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .bayes import (
    RNG_ALGORITHM,
    CombinedLikelihood,
    ExperimentalLikelihood,
    IdealLikelihood,
    TrialSample,
    posterior_from_counts,
    simulate_trials,
    summarize,
)
from .errors import (
    AccuracyError,
    ContractError,
    DegenerateError,
    DomainError,
    FitError,
    ParseError,
)
from .fidelity import fidelity_sweep, mutual_information
from .probmodels import InterferometerConfig, NoiseModel, Outcome, Strategy, binary_probabilities
from .quadrature import QuadratureGrid
from .signalfit import DataPoint, fit_signal, poisson_error_bar

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_ACCURACY, EXIT_FIT, EXIT_DEGENERATE = 0, 2, 3, 4, 5, 6
OUTPUT_DIR_ENV = "OAMFID_OUTPUT_DIR"
BUNDLED_FIT_DATA = "synthetic_fringe.csv"

# manifest/bookkeeping keys that are not run parameters
_META_KEYS = {"command", "out", "config", "handler"}


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------------
# formatting


def _num(value):
    """Shortest round-trip text for floats; ints and strings pass through."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return "" if value is None else str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_num(v) for v in row])
    return buf.getvalue()


def to_json(payload) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=False, allow_nan=False) + "\n"


def _table(columns, rows, fmt):
    if fmt == "csv":
        return to_csv(columns, rows)
    return to_json({"columns": list(columns), "rows": [dict(zip(columns, r)) for r in rows]})


# ----------------------------------------------------------------------------
# parsing helpers


def _float_list(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def read_csv_rows(path, schemas):
    """Read a headed CSV and return ``(schema, [(line_number, cells), ...])``.

    ``schemas`` lists acceptable header tuples; the first one that is a subset
    of the file's header wins.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("file is empty", line=1) from None
    schema = next((s for s in schemas if set(s) <= set(header)), None)
    if schema is None:
        expected = " or ".join(",".join(s) for s in schemas)
        raise ParseError(f"header {','.join(header)!r} does not match {expected}", line=1)
    index = [header.index(c) for c in schema]
    rows = []
    for raw in reader:
        lineno = reader.line_num
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(raw)}", line=lineno)
        try:
            cells = tuple(float(raw[i]) for i in index)
        except ValueError:
            raise ParseError(f"non-numeric field in {raw!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in cells):
            raise ParseError(f"non-finite field in {raw!r}", line=lineno)
        rows.append((lineno, cells))
    return schema, rows


def load_fit_data(path) -> list[DataPoint]:
    schema, rows = read_csv_rows(
        path, [("theta", "zero_fraction", "sigma"), ("theta", "zero_count", "trials")]
    )
    points = []
    for lineno, row in rows:
        try:
            if schema[1] == "zero_fraction":
                points.append(DataPoint(*row))
            else:
                theta, k, m = row
                if k != int(k) or m != int(m):
                    raise DomainError("counts must be integers")
                sigma = poisson_error_bar(int(k), int(m))
                points.append(DataPoint(theta, k / m, sigma))
        except DomainError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return points


def load_trial_samples(path) -> list[TrialSample]:
    _, rows = read_csv_rows(path, [("theta", "zero_count", "trials")])
    samples = []
    for lineno, (theta, k, m) in rows:
        try:
            samples.append(TrialSample(theta, m, k))
        except DomainError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return samples


# ----------------------------------------------------------------------------
# shared argument groups


def _add_output(p, default_format):
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=default_format)
    p.add_argument("--config", default=None,
                   help="JSON file of default parameters (a run manifest is accepted)")


def _add_config(p, default_n=1.0, default_l=1):
    p.add_argument("--n", type=float, default=default_n, help="mean photon number N")
    p.add_argument("--l", type=int, default=default_l, help="OAM quantum number")


def _add_noise(p):
    p.add_argument("--t-a", type=float, default=1.0, help="path-A transmissivity")
    p.add_argument("--t-b", type=float, default=1.0, help="path-B transmissivity")
    p.add_argument("--eta", type=float, default=1.0, help="detection efficiency")
    p.add_argument("--dark-rate", type=float, default=0.0, help="mean dark counts per gate")


def _add_grid(p):
    p.add_argument("--grid-exponent", type=int, default=12,
                   help="Simpson grid has 2**k + 1 nodes (default 12)")


def _add_likelihood(p):
    p.add_argument("--model", choices=("ideal", "combined", "experimental"), default="experimental")
    _add_config(p, default_n=1.0, default_l=2)
    p.add_argument("--a", type=float, default=0.911, help="fringe amplitude (experimental)")
    p.add_argument("--ne", type=float, default=4.11, help="effective photons (experimental)")
    p.add_argument("--offset", type=float, default=0.0, help="angle offset (experimental)")
    p.add_argument("--t", type=float, default=1.0, help="balanced transmissivity (combined)")
    p.add_argument("--eta", type=float, default=1.0, help="detection efficiency (combined)")
    p.add_argument("--dark-rate", type=float, default=0.0, help="dark counts per gate (combined)")
    p.add_argument("--level", type=float, default=0.95, help="HPD credibility level")
    p.add_argument("--full-domain", action="store_true",
                   help="posterior on [-pi, pi] instead of the fundamental branch")
    p.add_argument("--posterior-dir", default=None,
                   help="directory for one posterior CSV per trial count")
    _add_grid(p)


def _noise(args):
    return NoiseModel(args.t_a, args.t_b, args.eta, args.dark_rate)


def _grid(args, lo=-math.pi, hi=math.pi):
    if not 1 <= args.grid_exponent <= 24:
        raise UsageError("--grid-exponent must lie in [1, 24]")
    return QuadratureGrid.simpson(lo=lo, hi=hi, exponent=args.grid_exponent)


def _likelihood(args):
    if args.model == "ideal":
        return IdealLikelihood(InterferometerConfig(args.n, args.l))
    if args.model == "combined":
        return CombinedLikelihood(InterferometerConfig(args.n, args.l),
                                  NoiseModel(args.t, args.t, args.eta, args.dark_rate))
    return ExperimentalLikelihood(args.a, args.ne, args.offset, args.l)


# ----------------------------------------------------------------------------
# commands; each returns (text, extra_manifest_fields)


def cmd_probability(args):
    strategy = Strategy.parse(args.strategy)
    outcome = Outcome.parse(args.outcome) if args.outcome else strategy.outcomes[0]
    if outcome not in strategy.outcomes:
        raise UsageError(f"outcome {outcome.value!r} is not produced by {strategy.value!r} detection")
    ranged = args.theta_min is not None or args.theta_max is not None
    if args.theta is not None and ranged:
        raise UsageError("give either --theta or --theta-min/--theta-max, not both")
    if ranged:
        if args.theta_min is None or args.theta_max is None or args.points < 2:
            raise UsageError("a theta range needs --theta-min, --theta-max and --points >= 2")
        thetas = np.linspace(args.theta_min, args.theta_max, args.points)
    else:
        thetas = np.array([0.0 if args.theta is None else args.theta])
    if args.degrees:
        thetas = np.deg2rad(thetas)
    config = InterferometerConfig(args.n, args.l)
    pair = binary_probabilities(strategy, thetas, config, _noise(args))
    probs = pair[strategy.outcomes.index(outcome)]
    rows = list(zip(thetas.tolist(), np.asarray(probs).tolist()))
    return _table(("theta", "probability"), rows, args.format), {}


def cmd_fidelity(args):
    strategy = Strategy.parse(args.strategy)
    result = mutual_information(strategy, InterferometerConfig(args.n, args.l), _noise(args),
                                grid=_grid(args), tolerance=args.tolerance,
                                fold_period=args.fold_period)
    record = result.to_dict()
    if args.format == "csv":
        return to_csv(list(record), [list(record.values())]), {"grid_size": result.grid_size}
    return to_json(record), {"grid_size": result.grid_size}


def _strategies(text, default):
    text = text or default
    if text == "both":
        return [Strategy.Z, Strategy.PARITY]
    return [Strategy.parse(text)]


def cmd_sweep(args):
    kind = args.kind
    grid = _grid(args)
    noise = _noise(args)
    if kind == "photon":
        strategies = _strategies(args.strategy, "both")
        axis, names = "mean_photons", ["mean_photons"]
        ranges = [np.arange(args.n_min, args.n_max + 1e-9, args.n_step).tolist()]
    elif kind == "loss":
        strategies = _strategies(args.strategy, "z")
        axis, names = "loss", ["loss_a", "loss_b"]
        losses = np.linspace(0.0, args.loss_max, args.points).tolist()
        ranges = [losses, losses]
    elif kind == "efficiency":
        strategies = _strategies(args.strategy, "z")
        axis, names = "efficiency", ["efficiency"]
        ranges = [np.linspace(args.eta_min, args.eta_max, args.points).tolist()]
    else:
        strategies = _strategies(args.strategy, "z")
        axis, names = "dark", ["dark_rate", "mean_photons"]
        ranges = [args.rates, np.arange(args.n_min, args.n_max + 1e-9, args.n_step).tolist()]

    columns = list(names)
    per_strategy = []
    for strategy in strategies:
        points = fidelity_sweep(strategy, axis, ranges, mean_photons=args.n,
                                quantum_number=args.l, noise=noise, grid=grid,
                                workers=args.workers)
        per_strategy.append(points)
        if len(strategies) == 1:
            columns += ["bits", "estimated_error"]
        else:
            columns += [f"{strategy.value}_bits", f"{strategy.value}_error"]
    rows = []
    for i, point in enumerate(per_strategy[0]):
        row = [point.coords[n] for n in names]
        for points in per_strategy:
            row += [points[i].result.bits, points[i].result.estimated_error]
        rows.append(row)
    return _table(columns, rows, args.format), {"grid_size": grid.size}


def _posterior_grid(args, model):
    if args.full_domain:
        return _grid(args)
    return _grid(args, 0.0, math.pi / (2 * model.quantum_number))


def _estimate(samples, model, args, seed=None):
    grid = _posterior_grid(args, model)
    summaries, tables, files = [], [], []
    if args.posterior_dir:
        Path(args.posterior_dir).mkdir(parents=True, exist_ok=True)
    for i, sample in enumerate(samples):
        post = posterior_from_counts(sample, model, grid=grid)
        summary = summarize(post, args.level)
        summaries.append(summary.to_dict())
        rows = [(sample.trials, sample.zero_count, t, d)
                for t, d in zip(post.nodes.tolist(), post.density.tolist())]
        tables.extend(rows)
        if args.posterior_dir:
            path = Path(args.posterior_dir) / f"posterior_{i:02d}_M{sample.trials}.csv"
            path.write_text(to_csv(("theta", "density"), [r[2:] for r in rows]), encoding="utf-8")
            files.append(str(path))
    columns = ("trials", "zero_count", "theta", "density")
    if args.format == "csv":
        return to_csv(columns, tables), {"grid_size": grid.size}
    payload = {
        "rng_algorithm": RNG_ALGORITHM if seed is not None else None,
        "samples": [s.to_dict() for s in samples],
        "summaries": summaries,
    }
    if files:
        payload["posterior_files"] = files
    return to_json(payload), {"grid_size": grid.size}


def cmd_simulate(args):
    model = _likelihood(args)
    if any(m < 0 for m in args.trials):
        raise UsageError("--trials values must be >= 0")
    samples = [simulate_trials(args.theta_star, m, model, args.seed, replication=i)
               for i, m in enumerate(args.trials)]
    return _estimate(samples, model, args, seed=args.seed)


def cmd_bayes(args):
    model = _likelihood(args)
    if args.data:
        samples = load_trial_samples(args.data)
    else:
        if not args.trials or args.zero_counts is None or len(args.trials) != len(args.zero_counts):
            raise UsageError("give --data, or matching --trials and --zero-counts lists")
        samples = [TrialSample(args.theta_star, m, k) for m, k in zip(args.trials, args.zero_counts)]
    return _estimate(samples, model, args)


def cmd_fit(args):
    if args.data is None:
        with resources.as_file(resources.files("oamfidelity") / "data" / BUNDLED_FIT_DATA) as path:
            points = load_fit_data(path)
    else:
        points = load_fit_data(args.data)
    try:
        report = fit_signal(points, args.l, parametrization=args.parametrization)
    except ContractError as exc:
        raise FitError(f"precondition failed: {exc}") from None
    record = report.to_dict()
    if args.format == "csv":
        flat = {**record["model"], **{k: v for k, v in record.items()
                                      if k not in ("model", "covariance", "parameter_names")}}
        return to_csv(list(flat), [list(flat.values())]), {}
    return to_json(record), {}


# ----------------------------------------------------------------------------
# parser and driver


def build_parser():
    parser = argparse.ArgumentParser(prog="oamfid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = sub.choices

    p = sub.add_parser("probability", help="outcome probability versus angle")
    p.add_argument("--strategy", default="z", choices=("z", "parity"))
    p.add_argument("--outcome", default=None, choices=("zero", "nonzero", "even", "odd"))
    _add_config(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--theta-min", type=float, default=None)
    p.add_argument("--theta-max", type=float, default=None)
    p.add_argument("--points", type=int, default=401)
    p.add_argument("--degrees", action="store_true", help="angles given in degrees")
    _add_noise(p)
    _add_output(p, "csv")
    p.set_defaults(handler=cmd_probability)

    p = sub.add_parser("fidelity", help="mutual-information fidelity")
    p.add_argument("--strategy", default="z", choices=("z", "parity"))
    _add_config(p)
    _add_noise(p)
    _add_grid(p)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--fold-period", action="store_true", help="integrate over one period only")
    _add_output(p, "json")
    p.set_defaults(handler=cmd_fidelity)

    p = sub.add_parser("sweep", help="fidelity tables")
    p.add_argument("--kind", choices=("photon", "loss", "efficiency", "dark"), default="photon")
    p.add_argument("--strategy", default=None, choices=("z", "parity", "both"))
    _add_config(p, default_n=3.0)
    p.add_argument("--n-min", type=float, default=1.0)
    p.add_argument("--n-max", type=float, default=20.0)
    p.add_argument("--n-step", type=float, default=1.0)
    p.add_argument("--points", type=int, default=51)
    p.add_argument("--loss-max", type=float, default=1.0)
    p.add_argument("--eta-min", type=float, default=0.05)
    p.add_argument("--eta-max", type=float, default=1.0)
    p.add_argument("--rates", type=_float_list, default=[1e-8, 1e-6, 1e-4, 1e-2])
    p.add_argument("--workers", type=int, default=1)
    _add_noise(p)
    _add_grid(p)
    _add_output(p, "csv")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("simulate", help="simulate trials and estimate the angle")
    p.add_argument("--theta-star", type=float, default=0.0698)
    p.add_argument("--trials", type=_int_list, default=[200, 500, 1000])
    p.add_argument("--seed", type=int, default=0)
    _add_likelihood(p)
    _add_output(p, "json")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("bayes", help="posterior from recorded counts")
    p.add_argument("--data", default=None, help="CSV with columns theta,zero_count,trials")
    p.add_argument("--theta-star", type=float, default=None, help="true angle, if known")
    p.add_argument("--trials", type=_int_list, default=None)
    p.add_argument("--zero-counts", type=_int_list, default=None)
    _add_likelihood(p)
    _add_output(p, "json")
    p.set_defaults(handler=cmd_bayes)

    p = sub.add_parser("fit", help="fit the Z-detection fringe")
    p.add_argument("--data", default=None,
                   help="CSV theta,zero_fraction,sigma or theta,zero_count,trials "
                        "(default: bundled synthetic data set)")
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--parametrization", choices=("amplitude", "background"), default="amplitude")
    _add_output(p, "json")
    p.set_defaults(handler=cmd_fit)
    return parser


def _load_config(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"config {path} must hold a JSON object")
    return data.get("parameters", data)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = _load_config(args.config)
        subparser = parser.commands[args.command]
        known = set(vars(subparser.parse_args([])))
        unknown = set(config) - known
        if unknown:
            raise ParseError(f"unknown config keys: {', '.join(sorted(unknown))}")
        subparser.set_defaults(**{k: v for k, v in config.items() if k not in _META_KEYS})
        args = parser.parse_args(argv)
    return args


def _resolve_out(out):
    if out is None:
        return None
    path = Path(out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.isoformat()


def make_manifest(args, extra):
    params = {k: v for k, v in vars(args).items() if k not in _META_KEYS}
    return {
        "command": args.command,
        "parameters": _jsonable(params),
        "seed": getattr(args, "seed", None),
        "grid_size": extra.get("grid_size"),
        "tool_version": __version__,
        "kernel_backend": kernels.BACKEND,
        "rng_algorithm": RNG_ALGORITHM if args.command == "simulate" else None,
        "timestamp": _timestamp(),
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except ParseError as exc:
        print(f"oamfid: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)

    try:
        text, extra = args.handler(args)
    except (UsageError, ContractError, DomainError) as exc:
        print(f"oamfid {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"oamfid {args.command}: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except AccuracyError as exc:
        print(f"oamfid {args.command}: accuracy error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except FitError as exc:
        best = "" if exc.best is None else f" (best iterate {list(exc.best)})"
        print(f"oamfid {args.command}: fit error: {exc}{best}", file=sys.stderr)
        return EXIT_FIT
    except DegenerateError as exc:
        print(f"oamfid {args.command}: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE

    manifest = to_json(make_manifest(args, extra))
    out = _resolve_out(args.out)
    if out is None:
        sys.stdout.write(text)
        sys.stderr.write(manifest)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        with open(out.with_name(out.name + ".manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

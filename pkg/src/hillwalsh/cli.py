"""``hillwalsh`` command line: delta, sweep, chart, interlace, validate.

Errors are reported on stderr as one line, ``ERROR <code>: <message>``, with
exit status 2 for usage problems, 3 for a singular sampling matrix, 4 for
other numerical failures, 5 for I/O and 1 for failed validation checks.
"""

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .discriminant import (
    DIRECT_K,
    RECURSIVE_K,
    TRIANGULAR_K,
    NumericError,
    SingularityError,
    discriminant_direct,
    discriminant_recursive,
    discriminant_triangular,
)
from .excitation import HillProblem, parse_excitation
from .io import (
    fmt,
    to_json,
    write_curves_csv,
    write_grid_csv,
    write_json,
    write_pgm,
    grid_csv,
)
from .oracles import IntegrationError, lyapunov_terms, monodromy
from .stability import (
    DEFAULT_CHART_K,
    DEFAULT_TOL,
    Axis,
    classify,
    default_workers,
    grid_scan,
    interlacing_scan,
    transition_contours,
)

EXIT_CHECK, EXIT_USAGE, EXIT_SINGULAR, EXIT_NUMERIC, EXIT_IO = 1, 2, 3, 4, 5
METHODS = ("recursive", "triangular", "direct", "monodromy", "lyapunov", "all")

DEFAULTS = {
    "tau": 2.0 * math.pi,
    "excitation": "cos",
    "k": None,  # per command
    "method": "recursive",
    "tol": DEFAULT_TOL,
    "workers": None,
    "steps": 1 << 14,
}


class CliError(Exception):
    def __init__(self, code, tag, message):
        super().__init__(message)
        self.code = code
        self.tag = tag


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, "usage", message)


def _common(p, ranges=False):
    p.add_argument("--config", help="JSON file with defaults for any of these flags")
    p.add_argument("--tau", type=float, help="period (default 2*pi)")
    p.add_argument("--excitation", help="cos | cossum[:1x1,1x2] | square:hi,lo,duty | "
                   "const:c | table:<path>")
    p.add_argument("-k", type=int, dest="k", help="order exponent (2**k samples)")
    p.add_argument("--tol", type=float, help="classification tolerance")
    if ranges:
        p.add_argument("--alpha-range", help="lo:hi:n")
        p.add_argument("--beta-range", help="lo:hi:n")
        p.add_argument("--workers", type=int, help="processes (default $HILLWALSH_WORKERS or 1)")


def build_parser():
    p = _Parser(prog="hillwalsh", description="Discriminant of Hill's equation "
                "x'' + (alpha + beta p(t)) x = 0 by Walsh-function recursion.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    d = sub.add_parser("delta", help="discriminant at one (alpha, beta)")
    _common(d)
    d.add_argument("--alpha", type=float)
    d.add_argument("--beta", type=float)
    d.add_argument("--method", choices=METHODS)
    d.add_argument("--steps", type=int, help="RK4 steps for the monodromy oracle")
    d.add_argument("--json", action="store_true", help="print one JSON object")

    for name, text in (("sweep", "alpha-beta grid as CSV"),
                       ("chart", "grid CSV, PGM chart and transition curves")):
        s = sub.add_parser(name, help=text)
        _common(s, ranges=True)
        s.add_argument("--method", choices=("recursive", "monodromy"))
        s.add_argument("--steps", type=int, help="RK4 steps when --method monodromy")
        s.add_argument("--out", help="output file (sweep) or directory (chart)")

    i = sub.add_parser("interlace", help="roots of Delta = +-2 along alpha at fixed beta")
    _common(i)
    i.add_argument("--beta", type=float)
    i.add_argument("--alpha-range", help="lo:hi[:n] (n ignored)")
    i.add_argument("--method", choices=("recursive", "monodromy"))
    i.add_argument("--steps", type=int)
    i.add_argument("--root-tol", type=float, default=1e-10)
    i.add_argument("--out", help="JSON output file (default stdout)")

    v = sub.add_parser("validate", help="run oracle cross-checks")
    v.add_argument("--config", help=argparse.SUPPRESS)
    v.add_argument("--emit-fixtures", metavar="DIR", help="write oracle fixtures as JSON")
    v.add_argument("--debug-wrong-scale", type=float, default=1.0, metavar="FACTOR",
                   help="negative control: scale the triangular path's off-diagonals")
    return p


def resolve(args):
    """Merge CLI flags over the optional JSON config over built-in defaults."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise CliError(EXIT_IO, "io", f"cannot read config: {exc}")
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_USAGE, "config", f"bad JSON in {args.config}: {exc}")
        if not isinstance(cfg, dict):
            raise CliError(EXIT_USAGE, "config", "config must be a JSON object")
        cfg = {key.replace("-", "_"): val for key, val in cfg.items()}
    known = set(vars(args)) - {"command", "config"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise CliError(EXIT_USAGE, "config", f"unknown config keys: {', '.join(unknown)}")
    merged = {key: None for key in vars(args)}
    merged.update({key: val for key, val in DEFAULTS.items() if key in known or key == "k"})
    merged.update(cfg)
    for key, val in vars(args).items():
        if val is not None:
            merged[key] = val
    return argparse.Namespace(**merged)


def _problem(cfg, alpha=None, beta=None):
    try:
        ex = parse_excitation(str(cfg.excitation))
        return HillProblem(
            float(cfg.alpha if alpha is None else alpha),
            float(cfg.beta if beta is None else beta),
            float(cfg.tau),
            ex,
        )
    except (ValueError, TypeError) as exc:
        raise CliError(EXIT_USAGE, "usage", str(exc))


def _axis(text, name):
    if text is None:
        raise CliError(EXIT_USAGE, "usage", f"--{name} lo:hi:n is required")
    try:
        return Axis.parse(str(text))
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "usage", f"--{name}: {exc}")


def _need(cfg, *names):
    for n in names:
        if getattr(cfg, n, None) is None:
            raise CliError(EXIT_USAGE, "usage", f"--{n.replace('_', '-')} is required")


def _k(cfg, default, bounds):
    k = default if cfg.k is None else int(cfg.k)
    if not bounds[0] <= k <= bounds[1]:
        raise CliError(EXIT_USAGE, "usage", f"-k {k} outside [{bounds[0]}, {bounds[1]}]")
    return k


def cmd_delta(cfg, out):
    _need(cfg, "alpha", "beta")
    pr = _problem(cfg)
    k = _k(cfg, 12, RECURSIVE_K)
    method = cfg.method
    wanted = ["recursive", "triangular", "direct", "monodromy", "lyapunov"] \
        if method == "all" else [method]
    rows = []
    for m in wanted:
        row = {"method": m}
        if m == "recursive":
            r = discriminant_recursive(pr, k)
            row.update(order=k, delta=r.delta)
        elif m in ("triangular", "direct"):
            fn, rng = (discriminant_triangular, TRIANGULAR_K) if m == "triangular" \
                else (discriminant_direct, DIRECT_K)
            if not rng[0] <= k <= rng[1]:
                if method != "all":
                    raise CliError(EXIT_USAGE, "usage",
                                   f"{m} supports k in [{rng[0]}, {rng[1]}], got {k}")
                row.update(order=k, skipped=f"k outside [{rng[0]}, {rng[1]}]")
            else:
                r = fn(pr, k)
                row.update(order=k, delta=r.delta, **r.info)
        elif m == "monodromy":
            res = monodromy(pr, int(cfg.steps))
            row.update(order=res.steps, delta=res.trace, det=res.det)
        else:
            lt = lyapunov_terms(pr, n_max=3)
            row.update(order=3, delta=lt.delta, terms=lt.terms)
        if "delta" in row:
            row["class"] = classify(row["delta"], cfg.tol).value
        rows.append(row)
    record = {"problem": pr.describe(), "singular": False, "results": rows}
    computed = [r for r in rows if "delta" in r]
    if len(computed) > 1:
        base = computed[0]["delta"]
        record["gaps_vs_recursive"] = {
            r["method"]: abs(r["delta"] - base) for r in computed[1:]
        }
    if getattr(cfg, "json", False):
        out.write(to_json(record))
        return 0
    for r in rows:
        parts = [f"method={r['method']}", f"order={r['order']}"]
        if "delta" in r:
            parts += [f"delta={fmt(r['delta'])}", f"class={r['class']}"]
            if "det" in r:
                parts.append(f"det={fmt(r['det'])}")
            if "condition" in r:
                parts.append(f"condition={fmt(r['condition'])}")
        else:
            parts.append(f"skipped={r['skipped']!r}")
        out.write(" ".join(parts) + "\n")
    for m, gap in record.get("gaps_vs_recursive", {}).items():
        out.write(f"gap {m}-recursive={fmt(gap)}\n")
    return 0


def _scan(cfg):
    a_axis = _axis(cfg.alpha_range, "alpha-range")
    b_axis = _axis(cfg.beta_range, "beta-range")
    method = cfg.method
    if method not in ("recursive", "monodromy"):
        raise CliError(EXIT_USAGE, "usage", f"scans support recursive|monodromy, got {method}")
    k = _k(cfg, DEFAULT_CHART_K, RECURSIVE_K)
    ex = _problem(cfg, 0.0, 0.0).excitation
    try:
        workers = default_workers() if cfg.workers is None else int(cfg.workers)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, "usage", str(exc))
    if workers < 1:
        raise CliError(EXIT_USAGE, "usage", "--workers must be >= 1")
    steps = int(cfg.steps) if cfg.method == "monodromy" else 1 << 12
    return grid_scan(ex, float(cfg.tau), a_axis, b_axis, k=k, tol=float(cfg.tol),
                     workers=workers, method=method, steps=steps)


def _log_singular(grid, err):
    if grid.singular_count:
        err.write(f"WARNING singular: {grid.singular_count} cells hit the singularity "
                  "guard and are marked Singular\n")


def cmd_sweep(cfg, out, err):
    grid = _scan(cfg)
    _log_singular(grid, err)
    if cfg.out:
        write_grid_csv(grid, cfg.out)
    else:
        out.write(grid_csv(grid))
    return 0


def cmd_chart(cfg, out, err):
    if not cfg.out:
        raise CliError(EXIT_USAGE, "usage", "--out DIR is required for chart")
    grid = _scan(cfg)
    _log_singular(grid, err)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    curves = transition_contours(grid)
    paths = [
        write_grid_csv(grid, outdir / "grid.csv"),
        write_pgm(grid, outdir / "chart.pgm"),
        write_curves_csv(curves, outdir / "curves.csv"),
    ]
    if curves.skipped_cells:
        err.write(f"WARNING contour: {curves.skipped_cells} cells skipped (non-finite)\n")
    for p in paths:
        out.write(f"wrote {p}\n")
    return 0


def cmd_interlace(cfg, out):
    _need(cfg, "beta", "alpha_range")
    parts = str(cfg.alpha_range).split(":")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except (ValueError, IndexError):
        raise CliError(EXIT_USAGE, "usage", "--alpha-range must be lo:hi[:n]")
    if not hi > lo:
        raise CliError(EXIT_USAGE, "usage", "--alpha-range needs lo < hi")
    method = cfg.method if cfg.method in ("recursive", "monodromy") else None
    if method is None:
        raise CliError(EXIT_USAGE, "usage", "interlace supports recursive|monodromy")
    pr = _problem(cfg, 0.0, cfg.beta)
    k = _k(cfg, 14, RECURSIVE_K)
    rep = interlacing_scan(pr.excitation, pr.tau, pr.beta, (lo, hi), k=k,
                           root_tol=float(cfg.root_tol), method=method,
                           steps=int(cfg.steps))
    if cfg.out:
        write_json(rep.as_dict(), cfg.out)
        out.write(f"wrote {cfg.out}\n")
    else:
        out.write(to_json(rep.as_dict()))
    return 0


def cmd_validate(cfg, out):
    from .validation import fixture_records, run_checks

    checks = run_checks(scale=float(cfg.debug_wrong_scale))
    width = max(len(c.name) for c in checks)
    for c in checks:
        out.write(f"{'PASS' if c.ok else 'FAIL'}  {c.name:<{width}}  "
                  f"err={fmt(c.error)} tol={fmt(c.tol)}  {c.detail}\n")
    if cfg.emit_fixtures:
        d = Path(cfg.emit_fixtures)
        d.mkdir(parents=True, exist_ok=True)
        for name, rec in fixture_records().items():
            write_json(rec, d / f"{name}.json")
            out.write(f"wrote {d / (name + '.json')}\n")
    failed = [c for c in checks if not c.ok]
    if failed:
        worst = max(failed, key=lambda c: c.ratio)
        raise CliError(EXIT_CHECK, "check",
                       f"{len(failed)} check(s) failed; worst: {worst.name} "
                       f"err={fmt(worst.error)} tol={fmt(worst.tol)} ({worst.detail})")
    return 0


def main(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        if args.command == "delta":
            return cmd_delta(cfg, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, err)
        if args.command == "chart":
            return cmd_chart(cfg, out, err)
        if args.command == "interlace":
            return cmd_interlace(cfg, out)
        return cmd_validate(cfg, out)
    except CliError as exc:
        err.write(f"ERROR {exc.tag}: {exc}\n")
        return exc.code
    except SingularityError as exc:
        err.write(f"ERROR singular: {exc} (alpha + beta*p_n = -2**(2k+2)/tau**2)\n")
        return EXIT_SINGULAR
    except (NumericError, IntegrationError, FloatingPointError, ArithmeticError) as exc:
        err.write(f"ERROR numeric: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        err.write(f"ERROR io: {exc}\n")
        return EXIT_IO
    except ValueError as exc:
        err.write(f"ERROR usage: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

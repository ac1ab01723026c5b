"""Command line entry point: ``modevcm {simulate,fit,report}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .design import StructureError
from .io import DataError, load_csv, model_report, read_records, standardize, write_records
from .selection import SelectionError, SelectionGrids, tune_and_fit
from .simulation import METHODS, Scenario, run_monte_carlo

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

_FIT_SETTINGS = {"VCEM": ("modal", "l2"), "BSE_L1": ("ls", "l1"), "BSE_L2": ("ls", "l2")}

log = logging.getLogger("modevcm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text):
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("grid values must be positive")
    return vals


def _ints(text):
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}") from None
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError("knot counts must be nonnegative")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modevcm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def grid_flags(p):
        p.add_argument("--lambda-grid", type=_floats, default=None,
                       help="comma-separated penalty levels (both steps)")
        p.add_argument("--kn-grid", type=_ints, default=None, help="candidate interior knot counts")
        p.add_argument("--h-grid-len", type=int, default=100, help="bandwidth grid length l")

    sim = sub.add_parser("simulate", help="Monte Carlo SV/SC/SZ study")
    sim.add_argument("--config", type=Path, help="JSON scenario file; flags override it")
    sim.add_argument("--model", type=int, choices=(1, 2))
    sim.add_argument("--case", type=int, choices=(1, 2, 3, 4))
    sim.add_argument("--p", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--method", action="append", choices=METHODS,
                     help="repeatable; default all three")
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--out", type=Path, required=True, help="record file (.jsonl)")
    grid_flags(sim)

    fit = sub.add_parser("fit", help="fit a CSV data set")
    fit.add_argument("--csv", type=Path, required=True)
    fit.add_argument("--response", required=True)
    fit.add_argument("--index", required=True)
    fit.add_argument("--covariates", default=None, help="comma-separated; default all others")
    fit.add_argument("--method", choices=METHODS, default="VCEM")
    fit.add_argument("--no-standardize", action="store_true")
    fit.add_argument("--out", type=Path, required=True)
    grid_flags(fit)

    rep = sub.add_parser("report", help="render saved record files as tables")
    rep.add_argument("files", type=Path, nargs="+")
    rep.add_argument("--out", type=Path, default=None)
    return parser


def _grids(args) -> SelectionGrids:
    kw = {"h_grid_len": args.h_grid_len}
    if args.kn_grid:
        kw["kn_candidates"] = args.kn_grid
    if args.lambda_grid:
        kw["lambda1_grid"] = kw["lambda2_grid"] = args.lambda_grid
    return SelectionGrids(**kw)


def _grids_meta(g: SelectionGrids) -> dict:
    return {"h_grid_len": g.h_grid_len, "kn_candidates": list(g.kn_candidates),
            "lambda1_grid": g.lambda1_grid, "lambda2_grid": g.lambda2_grid, "degree": g.degree}


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


_ECHO_KEYS = ("method", "csv", "response", "index", "standardize", "bandwidth", "knots",
              "lambda2", "grids")


def _echo(meta) -> str:
    if meta.get("kind") == "simulation":
        keep = {k: meta[k] for k in ("scenario", "grids", "methods") if k in meta}
    else:
        keep = {k: meta[k] for k in _ECHO_KEYS if k in meta}
    return "# " + json.dumps(keep, sort_keys=True)


def render_simulation(rows, meta=None) -> str:
    lines = [_echo(meta)] if meta else []
    lines += [f"{'p':>4} {'Case':>4} {'Method':<8} {'SV':>7} {'SC':>7} {'SZ':>8}"]
    for r in rows:
        lines.append(f"{r['p']:>4} {r['case']:>4} {r['method']:<8} "
                     f"{r['SV']:>7.3f} {r['SC']:>7.3f} {r['SZ']:>8.3f}")
    return "\n".join(lines) + "\n"


def _cell(row):
    if row["label"] == "varying":
        return "V"
    if row["label"] == "zero":
        return "0"
    return f"{row['constant']:.3f}"


def render_fits(reports) -> str:
    """Table of labels (V / 0 / constant value) with one column per fit."""
    names = [r["variable"] for r in reports[0][1] if r["variable"] != "(intercept)"]
    methods = [m["method"] for m, _ in reports]
    width = max(8, *(len(m) for m in methods))
    lines = [_echo(m) for m, _ in reports]
    lines += [f"{'Variable':<10}" + "".join(f"{m:>{width + 1}}" for m in methods)]
    cells = [{r["variable"]: _cell(r) for r in rows} for _, rows in reports]
    for name in names:
        lines.append(f"{name:<10}" + "".join(f"{c.get(name, '-'):>{width + 1}}" for c in cells))
    lines.append(f"{'MSE':<10}" + "".join(f"{m['mse']:>{width + 1}.3f}" for m, _ in reports))
    return "\n".join(lines) + "\n"


def render_files(paths) -> str:
    loaded = [read_records(p) for p in paths]
    kinds = {(meta or {}).get("kind") for meta, _ in loaded}
    if kinds == {"simulation"}:
        return "".join(render_simulation(rows, meta) for meta, rows in loaded)
    if kinds == {"fit"}:
        return render_fits(loaded)
    raise DataError(f"cannot render a mix of record kinds: {sorted(map(str, kinds))}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _scenario(args) -> Scenario:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read scenario config {args.config}: {err}") from None
    flags = {"model": args.model, "error_case": args.case, "p": args.p, "n": args.n,
             "replications": args.reps, "seed": args.seed}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    try:
        return Scenario(**cfg)
    except (TypeError, ValueError) as err:
        raise UsageError(f"invalid scenario: {err}") from None


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    grids = _grids(args)
    methods = tuple(args.method) if args.method else METHODS
    report = run_monte_carlo(scenario, methods, grids, n_jobs=args.jobs)
    rows = report.records()
    meta = {"kind": "simulation", "scenario": rows[0]["scenario"], "methods": list(methods),
            "grids": _grids_meta(grids)}
    write_records(args.out, rows, meta)
    text = render_simulation(rows, meta)
    args.out.with_suffix(".txt").write_text(text)
    sys.stdout.write(text)
    log.info("wall clock %.1fs", report.wall_clock)
    for m, fails in report.failures.items():
        if fails:
            log.warning("%s: %d failed replications excluded", m, len(fails))
    return EXIT_OK


def cmd_fit(args) -> int:
    table = load_csv(args.csv)
    covs = [c.strip() for c in args.covariates.split(",")] if args.covariates else None
    data = standardize(table, args.response, args.index, covs, scale=not args.no_standardize)
    grids = _grids(args)
    loss, norm = _FIT_SETTINGS[args.method]
    model = tune_and_fit(data, grids, loss=loss, norm=norm)
    rep = model_report(model, data, args.method)
    rows = rep.pop("variables")
    meta = {"kind": "fit", **rep, "csv": args.csv.name, "response": args.response,
            "index": args.index, "standardize": not args.no_standardize,
            "grids": _grids_meta(grids), "lambda2": model.info["config"].lambda2,
            "lambda1": list(model.info["config"].lambda1_for(data.p))}
    write_records(args.out, rows, meta)
    text = render_fits([(meta, rows)])
    args.out.with_suffix(".txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    for p in args.files:
        if not p.exists():
            raise UsageError(f"no such report file: {p}")
    text = render_files(args.files)
    if args.out:
        args.out.write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    commands = {"simulate": cmd_simulate, "fit": cmd_fit, "report": cmd_report}
    try:
        return commands[args.command](args)
    except UsageError as err:
        print(f"modevcm: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, StructureError, OSError) as err:
        print(f"modevcm: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, SelectionError, ArithmeticError) as err:
        print(f"modevcm: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

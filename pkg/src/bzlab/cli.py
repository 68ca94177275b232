"""Command-line entry point.

Commands: compute (single observables), sweep (convergence studies from a
config file), plot (CSV -> SVG), make-refs (reference cache), and
validate-schemes (smearing moment orders). Exit codes: 0 success, 2 usage or
validation, 3 numerical failure, 4 I/O failure.
"""

import argparse
import csv
import sys

from . import parallel
from .errors import (BzlabError, ConfigError, NoRootError,
                     NonFiniteIntegrandError, SchemeOrderError, UnmetBudgetError)
from .interp import energy_interp, fit_spline, select_bands, solve_fermi_interp
from .quadrature import LevelSetQuadConfig, make_grid
from .reference import (CASES, MissingReferenceError, compute_reference,
                        default_refs_path, ensure_references, get_case, write_refs)
from .smearing import ALL_SCHEME_NAMES, moment, scheme_by_name, validate_order
from .smeared import (band_energies, extrapolated_energy, smeared_energy,
                      smeared_entropy, solve_fermi)
from .study import fit_slope, read_config, run_sweep, write_records
from .svgplot import PlotSpec, build_series, render_svg

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_NUMERICAL_ERRORS = (NoRootError, UnmetBudgetError, SchemeOrderError,
                     NonFiniteIntegrandError, MissingReferenceError)


def _fmt(x):
    return "%.12g" % x


def cmd_compute(args):
    case = get_case(args.case)
    model = case.model()
    n_el = case.n_electrons if args.N is None else args.N
    if args.method == "smear":
        if args.sigma is None or args.sigma <= 0.0:
            raise ValueError("--sigma must be given and positive for the smearing method")
        scheme = scheme_by_name(args.scheme, cold_a=args.cold_a)
        grid = make_grid(model.d, args.L)
        energies = band_energies(model, grid)
        fermi = solve_fermi(model, scheme, grid, args.sigma, n_el, energies=energies)
        energy = smeared_energy(model, scheme, grid, args.sigma, fermi, energies=energies)
        entropy = smeared_entropy(model, scheme, grid, args.sigma, fermi, energies=energies)
        extrap = extrapolated_energy(energy, entropy, args.sigma, scheme.declared_order)
        print(f"fermi={_fmt(fermi)} energy={_fmt(energy)} "
              f"entropy={_fmt(entropy)} extrapolated={_fmt(extrap)}")
    else:
        if args.p is None or args.q is None:
            raise ValueError("--p and --q are required for the interpolation method")
        cfg = LevelSetQuadConfig(abs_tol=args.abs_tol)
        grid = make_grid(model.d, args.L)
        energies = band_energies(model, grid)
        refs = ensure_references([args.case], path=args.refs, make=args.make_refs) \
            if args.use_refs else None
        cutoff = (refs[args.case].fermi if refs else energies.max()) + 1.0
        bands = select_bands(energies, cutoff)
        shaped = [energies[:, b].reshape((args.L,) * model.d) for b in bands]
        splines_q = [fit_spline(s, args.q, band=b) for s, b in zip(shaped, bands)]
        fermi = solve_fermi_interp(splines_q, n_el, cfg)
        splines_p = splines_q if args.p == args.q else \
            [fit_spline(s, args.p, band=b) for s, b in zip(shaped, bands)]
        energy = energy_interp(splines_p, splines_q, fermi, cfg)
        print(f"fermi={_fmt(fermi)} energy={_fmt(energy)}")
    return EXIT_OK


def _print_interp_summary(records, config):
    for obs in ("fermi", "energy"):
        recs = [r for r in records if r.observable == obs]
        if len(recs) >= 3:
            fit = fit_slope(recs, "L", window=(0, len(recs)))
            slope = "%.2f" % fit.slope if fit.ok else "n/a"
            print(f"{obs} p={config.p} q={config.q} slope={slope}")


def _print_smear_summary(records, config):
    l_max = max(config.L_list)
    for obs in ("fermi", "energy", "energy_extrapolated"):
        for sigma in config.sigma_list:
            tail = [r for r in records
                    if r.observable == obs and r.sigma == sigma and r.L == l_max]
            if tail:
                print(f"{obs} scheme={config.scheme} sigma={sigma:g} "
                      f"limit_error={_fmt(tail[0].abs_error)}")
        series = [r for r in records if r.observable == obs and r.L == l_max]
        if len(series) >= 3:
            fit = fit_slope(series, "sigma", window=(0, len(series)))
            if fit.ok:
                print(f"{obs} scheme={config.scheme} sigma-slope={fit.slope:.2f}")


def cmd_sweep(args):
    config = read_config(args.config)
    parallel.set_threads(args.threads)
    refs = ensure_references([config.case_id], path=args.refs,
                             make=args.make_refs, tol=args.ref_tol)
    records = run_sweep(config, refs)
    for r in records:
        r.wall_ms = 0.0  # timings vary run to run; sweep CSVs must be byte-stable
    write_records(records, args.out)
    if config.method == "interp":
        _print_interp_summary(records, config)
    else:
        _print_smear_summary(records, config)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_plot(args):
    with open(args.csv, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    spec = PlotSpec(x=args.x, series_keys=tuple(args.series.split(",")) if args.series else (),
                    y=args.y, loglog=not args.linear, title=args.title)
    series, dropped = build_series(rows, spec)
    if dropped:
        print(f"warning: dropped {dropped} non-positive points from log axes",
              file=sys.stderr)
    svg = render_svg(series, spec)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    print(f"wrote {args.out} ({len(series)} series)")
    return EXIT_OK


def cmd_make_refs(args):
    cases = args.cases.split(",") if args.cases else sorted(CASES)
    rows = [compute_reference(c, tol=args.tol) for c in cases]
    write_refs(rows, args.out)
    for r in rows:
        print(f"{r.case_id}: fermi={_fmt(r.fermi)} energy={_fmt(r.energy)} tol={r.tol:g}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_validate_schemes(args):
    failed = False
    for name in ALL_SCHEME_NAMES:
        scheme = scheme_by_name(name, cold_a=args.cold_a)
        try:
            p = validate_order(scheme)
        except SchemeOrderError as exc:
            print(f"{name}: FAIL ({exc})")
            failed = True
            continue
        m_next = moment(scheme, p + 1)
        print(f"{name}: order={p} M_{p + 1}={_fmt(m_next)}")
    if failed:
        raise SchemeOrderError("scheme order validation failed")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="bzlab",
                                     description="Brillouin-zone integration toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="compute observables for one parameter set")
    p.add_argument("--case", required=True, choices=sorted(CASES))
    p.add_argument("--method", required=True, choices=("smear", "interp"))
    p.add_argument("--scheme", default="gauss")
    p.add_argument("--sigma", type=float)
    p.add_argument("--L", type=int, default=64)
    p.add_argument("--N", type=float, help="electron pairs per cell (default: case value)")
    p.add_argument("--p", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--cold-a", type=float, default=None)
    p.add_argument("--abs-tol", type=float, default=1e-6)
    p.add_argument("--refs", default=None)
    p.add_argument("--use-refs", action="store_true",
                   help="read the reference cache to pre-select interpolated bands")
    p.add_argument("--make-refs", action="store_true")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("sweep", help="run a convergence sweep from a config file")
    p.add_argument("config")
    p.add_argument("--out", default="records.csv")
    p.add_argument("--refs", default=None)
    p.add_argument("--make-refs", action="store_true",
                   help="compute missing reference values instead of failing")
    p.add_argument("--ref-tol", type=float, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render a log-log SVG from a records CSV")
    p.add_argument("csv")
    p.add_argument("--x", default="L", choices=("L", "sigma"))
    p.add_argument("--y", default="abs_error")
    p.add_argument("--series", default="scheme,sigma")
    p.add_argument("--linear", action="store_true", help="linear axes instead of log-log")
    p.add_argument("--title", default="")
    p.add_argument("--out", default="plot.svg")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("make-refs", help="compute and cache reference values")
    p.add_argument("--cases", default=None, help="comma-separated case ids (default: all)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_make_refs)

    p = sub.add_parser("validate-schemes", help="verify smearing orders from moments")
    p.add_argument("--cold-a", type=float, default=None)
    p.set_defaults(func=cmd_validate_schemes)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    if getattr(args, "out", None) is None and args.command == "make-refs":
        args.out = default_refs_path()
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit codes: 0 success, 2 invalid input or unwritable output, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings

from .dynamics import NumericalError
from .experiments import (
    FIGURES,
    ExperimentSpec,
    ValidationError,
    ep_report,
    reproduce,
    run_experiment,
    run_sweep,
    write_ep_csv,
)
from .linalg import LinAlgError
from .metrics import pt_symmetry_check
from .spectra import NoExceptionalPointError, spectrum_sweep

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chiralbell", description="Chiral Bell-state transfer around exceptional points.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="experiment JSON file")
        sp.add_argument("--out", help="output path (overrides the config's 'output')")
        return sp

    s = common(sub.add_parser("simulate", help="one propagation around the loop; writes a time series"))
    s.add_argument("--steps", type=_positive_int, help="number of time steps (default 20 per unit time)")
    s.add_argument("--stride", type=_positive_int, default=1, help="write every n-th step")

    s = common(sub.add_parser("sweep", help="final metrics over the config's sweep grid"))
    s.add_argument("--steps", type=_positive_int)
    s.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")

    common(sub.add_parser("spectrum", help="16 Liouvillian eigenvalues over a sweep of g or gamma"))

    s = common(sub.add_parser("ep", help="exceptional-point location for several q"))
    s.add_argument("--q", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    s.add_argument("--gamma-max", type=float, help="upper end of the gamma search bracket")

    common(sub.add_parser("ptcheck", help="classify base_config against the PT-symmetry conditions"), True)

    s = sub.add_parser("reproduce", help="run the built-in experiments behind a figure")
    s.add_argument("figure", help=f"one of {', '.join(FIGURES)}")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--steps", type=_positive_int)
    s.add_argument("--jobs", type=_positive_int, default=1)
    s.add_argument("--stride", type=_positive_int, default=10, help="time-series row stride")
    return p


def _load(args) -> ExperimentSpec:
    spec = ExperimentSpec.load(args.config)
    if getattr(args, "out", None):
        d = spec.to_dict()
        d["output"] = args.out
        spec = ExperimentSpec.from_dict(d)
    return spec


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "reproduce":
        for r in reproduce(args.figure, args.out, steps=args.steps, jobs=args.jobs, stride=args.stride):
            print(r.line() if hasattr(r, "line") else f"{args.figure}: spectrum over {r.variable}, {len(r.grid)} points")
        return EXIT_OK

    spec = _load(args)
    if cmd == "simulate":
        if spec.sweep is not None:
            raise ValidationError("config has a sweep; use the 'sweep' subcommand")
        print(run_experiment(spec, steps=args.steps, stride=args.stride).line())
    elif cmd == "sweep":
        if spec.sweep is None:
            raise ValidationError("config has no sweep")
        print(run_sweep(spec, steps=args.steps, jobs=args.jobs).line())
    elif cmd == "spectrum":
        if spec.sweep is None or spec.sweep.section != "base_config" or spec.sweep.field_name not in ("g", "gamma"):
            raise ValidationError("spectrum needs a sweep over base_config.g or base_config.gamma")
        sw = spectrum_sweep(spec.base_config, spec.sweep.field_name, spec.sweep.grid)
        sw.to_csv(spec.output)
        print(f"{spec.name}: {len(sw.grid)} spectra, {int(sw.near_defective.sum())} near-defective -> {spec.output}")
    elif cmd == "ep":
        results = ep_report(args.q, spec.base_config, gamma_max=args.gamma_max)
        for r in results:
            print(f"q={r.q:g} gamma_EP={r.gamma_EP:.12g} branch={r.branch} order={r.order} gap={r.residual_gap:.3g}")
        if args.out:
            write_ep_csv(args.out, results)
    elif cmd == "ptcheck":
        rep = pt_symmetry_check(spec.base_config)
        status = "PT-symmetric" if rep.is_pt_symmetric else "not PT-symmetric"
        extra = "" if rep.is_pt_symmetric else "; violated: " + ", ".join(rep.violated_conditions)
        print(f"{status} (n1 + n2 = {rep.occupation_sum:.12g}){extra}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    warnings.simplefilter("default")
    try:
        return _dispatch(args)
    except (NumericalError, LinAlgError, NoExceptionalPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

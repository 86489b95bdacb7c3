"""Command-line interface: ``test``, ``simulate``, ``diag``, ``are`` and ``power``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import powerlab
from .ellipgen import SCENARIOS, RngStream, scenario
from .errors import InvalidInputError, NumericalFailureError
from .signcore import EstimationConfig, ss_test
from .simharness import (
    SimulationCell,
    condition_diagnostics,
    diagnostics_dict,
    render_report,
    run_suite,
    grid_cells,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _load_csv(path: str, header: bool) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc


def _cmd_test(args) -> int:
    X = _load_csv(args.input, args.header)
    cfg = EstimationConfig(tol=args.tol, max_iter=args.max_iter, mode=args.mode)
    out = ss_test(X, args.alpha, cfg)
    if not out.converged:
        print("warning: fixed-point iteration did not converge; statistic reported anyway", file=sys.stderr)
    if args.output == "json":
        print(json.dumps(out.to_dict(), indent=2))
    else:
        for key, value in out.to_dict().items():
            print(f"{key:>10}: {value}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.grid:
        cells = grid_cells(reps=args.reps, seed=args.seed, mode=args.mode, eta=args.eta, alpha=args.alpha)
    else:
        missing = [f"--{k}" for k in ("scenario", "n", "p") if getattr(args, k) is None]
        if missing:
            raise InvalidInputError(f"simulate needs {', '.join(missing)} (or --grid)")
        eta = 0.0 if args.pattern == "null" else args.eta
        spec = scenario(args.scenario, args.n, args.p, args.pattern, eta=eta)
        spec = replace(spec, calibration=args.calibration)
        cells = [SimulationCell(spec, reps=args.reps, alpha=args.alpha, mode=args.mode, seed=args.seed)]
    if args.grid and args.calibration != "frobenius":
        cells = [replace(c, scenario=replace(c.scenario, calibration=args.calibration)) for c in cells]
    report = run_suite(cells, parallelism=args.threads)
    sys.stdout.write(render_report(report, args.format))
    if report.total_failures:
        print(f"warning: {report.total_failures} failed replication(s) excluded from rates", file=sys.stderr)
    return EXIT_OK


def _cmd_diag(args) -> int:
    diag = condition_diagnostics(args.p, args.rho, args.n)
    print(json.dumps(diagnostics_dict(diag), indent=2))
    return EXIT_OK


def _emit(result: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(result, indent=2))
    else:
        width = max(len(k) for k in result)
        for key, value in result.items():
            print(f"{key:<{width}}  {value}")


def _cmd_are(args) -> int:
    if args.nu is not None:
        result = {"nu": args.nu, "are": powerlab.are_rn_pa_t(args.nu)}
    elif args.family is not None:
        if args.p is None:
            raise InvalidInputError("--family needs --p")
        rng = RngStream(args.seed)
        result = {
            "family": args.family,
            "p": args.p,
            "draws": args.draws,
            "seed": args.seed,
            "are": powerlab.are_rn_pa_mc(args.family, args.p, args.draws, rng),
        }
    else:
        raise InvalidInputError("are needs --nu or --family")
    _emit(result, args.format)
    return EXIT_OK


_POWER_KEYS = {
    "n": int, "p": int, "alpha": float, "c0": float, "tr_r2": float, "zeta": float,
    "tau1_sq": float, "tau2_sq": float, "second_moment": float, "regime": str,
}


def _parse_params(items: Sequence[str]) -> dict:
    params = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or key not in _POWER_KEYS:
            raise InvalidInputError(f"bad parameter {item!r}; known keys: {', '.join(_POWER_KEYS)}")
        try:
            params[key] = _POWER_KEYS[key](value)
        except ValueError as exc:
            raise InvalidInputError(f"bad value for {key}: {value!r}") from exc
    return params


def _cmd_power(args) -> int:
    params = _parse_params(args.params)
    regime = params.pop("regime", "tau1_dominant")
    for key in ("n", "p"):
        if key not in params:
            raise InvalidInputError(f"power needs {key}=<int>")
    if "c0" not in params:
        params["c0"] = powerlab.chi_inverse_moment(params["p"])
    spec = powerlab.PowerSpec(**params)
    result = {"formula": args.formula, "n": spec.n, "p": spec.p, "alpha": spec.alpha, "c0": spec.c0}
    if args.formula == "ss":
        result["drift"] = powerlab.drift_ss(spec)
        result["power"] = powerlab.asymptotic_power_ss(spec)
    elif args.formula == "pa":
        result["drift"] = powerlab.drift_pa(spec)
        result["power"] = powerlab.asymptotic_power_pa(spec)
    else:
        result["regime"] = regime
        result["power"] = powerlab.asymptotic_power_wpl_special(spec, regime)
        result["are_rn_wpl"] = powerlab.are_rn_wpl(spec, regime)
    _emit(result, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spatialsign", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="run the spatial-sign test on a CSV sample")
    t.add_argument("--input", required=True, help="CSV file, one observation per row")
    t.add_argument("--header", action="store_true", help="skip a header line")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--mode", choices=("exact", "plugin"), default="exact")
    t.add_argument("--tol", type=float, default=1e-8)
    t.add_argument("--max-iter", type=int, default=200)
    t.add_argument("--output", choices=("text", "json"), default="text")
    t.set_defaults(func=_cmd_test)

    s = sub.add_parser("simulate", help="Monte Carlo size/power for one scenario cell or the full grid")
    s.add_argument("--scenario", choices=SCENARIOS)
    s.add_argument("--n", type=int)
    s.add_argument("--p", type=int)
    s.add_argument("--pattern", choices=("null", "dense", "sparse"), default="null")
    s.add_argument("--eta", type=float, default=0.03)
    s.add_argument("--calibration", choices=("frobenius", "trace"), default="frobenius")
    s.add_argument("--reps", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--mode", choices=("exact", "plugin"), default="plugin")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json", "table"), default="csv")
    s.add_argument("--grid", action="store_true", help="all scenarios, n in {50,100}, p in {200,400,1000}")
    s.set_defaults(func=_cmd_simulate)

    d = sub.add_parser("diag", help="condition ratios for an AR(1) correlation")
    d.add_argument("--p", type=int, required=True)
    d.add_argument("--rho", type=float, required=True)
    d.add_argument("--n", type=int, required=True)
    d.set_defaults(func=_cmd_diag)

    a = sub.add_parser("are", help="efficiency relative to PA (closed form or Monte Carlo)")
    a.add_argument("--nu", type=float)
    a.add_argument("--family", choices=("normal", "mvt4", "mixture_normal"))
    a.add_argument("--p", type=int)
    a.add_argument("--draws", type=int, default=100_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--format", choices=("json", "table"), default="json")
    a.set_defaults(func=_cmd_are)

    w = sub.add_parser("power", help="asymptotic power formulas")
    w.add_argument("--formula", choices=("ss", "pa", "wpl"), required=True)
    w.add_argument("--params", nargs="*", default=[], metavar="KEY=VALUE")
    w.add_argument("--format", choices=("json", "table"), default="json")
    w.set_defaults(func=_cmd_power)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``enkbf-dp <study> [options]``.

Exit status 0 on success, 1 when the oracle or round-trip check misses its
tolerance, 2 on invalid configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from ._backend import BACKEND
from .errors import ConfigError, InvalidArgumentError

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG = 0, 1, 2

# flag -> config key
_OVERRIDES = {
    "seed": "seed",
    "jobs": "jobs",
    "dim": "D_override",
    "alpha": "alpha",
    "dt": "dt",
    "particles": "J",
    "kappa_const": "kappa_constant",
    "replicates": "replicates",
    "tau": "tau",
    "grid_points": "grid_points",
    "sign_convention": "sign_convention",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat YAML file of key: value settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory (default results/<study>)")
    common.add_argument("--jobs", type=int, help="worker processes for replicates")
    common.add_argument("--n", type=float, nargs="+", metavar="N", help="sample size(s)")
    common.add_argument("--dim", type=int, help="fixed truncation D instead of D(n)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--particles", type=int, help="ensemble size J")
    common.add_argument("--kappa-const", type=float, help="discrepancy constant C")
    common.add_argument("--replicates", type=int)
    common.add_argument("--tau", type=float, help="oracle target time")
    common.add_argument("--grid-points", type=int)
    common.add_argument("--sign-convention", choices=["roundtrip", "paper"])
    common.add_argument("--noise-free", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="enkbf-dp", description="Early-stopped ensemble Kalman-Bucy inversion studies.")
    sub = parser.add_subparsers(dest="study", required=True, parser_class=_Parser)
    helps = {
        "oracle": "compare the ensemble with the closed-form Gaussian posterior",
        "contraction": "error of the stopped ensemble mean across n",
        "coverage": "frequentist coverage of ensemble credible bands",
        "figure1": "coefficient and potential panels with bands (CSV + SVG)",
        "roundtrip": "noise-free pull-back of a known potential under grid refinement",
    }
    for name in ex.STUDIES:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _overrides(args) -> dict:
    out = {}
    for flag, key in _OVERRIDES.items():
        val = getattr(args, flag)
        if val is not None:
            out[key] = val
    if args.n is not None:
        out["n_list"] = sorted(args.n)
        out["n"] = max(args.n)
    if args.noise_free:
        out["noise_free"] = True
    return out


def run(study: str, spec: ex.ExperimentSpec) -> tuple[dict, int]:
    if study == "oracle":
        report = ex.run_oracle_check(spec)
        summary = {k: v for k, v in report.items() if k != "table"}
        return summary, EXIT_OK if report["passed"] else EXIT_TOLERANCE
    if study == "roundtrip":
        summary = ex.run_roundtrip_suite(spec)
        return summary, EXIT_OK if summary["passed"] else EXIT_TOLERANCE
    if study == "contraction":
        return ex.run_contraction_study(spec)[1], EXIT_OK
    if study == "coverage":
        return ex.run_coverage_study(spec)[1], EXIT_OK
    return ex.run_figure1(spec)[1], EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        file_values = ex.load_config_file(args.config) if args.config else {}
        overrides = _overrides(args)
        overrides["output_dir"] = args.out if args.out is not None else file_values.get(
            "output_dir", Path("results") / args.study
        )
        spec = ex.resolve_spec(args.study, file_values, overrides)
    except (ConfigError, InvalidArgumentError, OSError) as exc:
        print(f"enkbf-dp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ex.write_kv(out / "resolved_config.txt", {**spec.flat(), "backend": BACKEND})
    try:
        summary, code = run(args.study, spec)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"enkbf-dp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for k, v in summary.items():
        print(f"{k}: {ex.format_value(v)}")
    return code


if __name__ == "__main__":
    sys.exit(main())

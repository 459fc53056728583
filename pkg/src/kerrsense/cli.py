"""Command-line entry point.

Each subcommand names an experiment; flags control input config, output
location/format, Fock dimension policy, and parallelism.  Exit codes:
0 success, 1 computation error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, default_config, parse_config
from .dynamics import IntegrationError, NoInteriorMinimumError
from .fock import TruncationError

_EXPERIMENT_HELP = {
    "fig1": "V_min(t) traces over kerr plus the optimal-squeezing table",
    "fig2": "sensitivity maps over (delta, epsilon) at fixed Kt",
    "fig3": "sensitivities vs Kt per loss rate, with Wigner snapshots",
    "scaling": "F_Q(N) series and slope fits per epsilon",
    "loss-robustness": "per-gamma maxima of the sensitivities over Kt",
    "custom": "cross product of the config axes (config file required)",
    "wigner": "Wigner function of one prepared state (JSON output)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerrsense",
        description=(
            "Squeezed Kerr oscillator: squeezing dynamics, displacement "
            "sensitivities, and phase-space snapshots"
        ),
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name, help_text in _EXPERIMENT_HELP.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument(
            "--config", type=Path, default=None, help="config file of key = value lines"
        )
        sp.add_argument(
            "--out",
            type=Path,
            default=None,
            help="output path (default: 'output' config key, else <experiment>.<format>)",
        )
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument(
            "--dim", default="auto", help="Fock dimension: positive integer or 'auto'"
        )
        sp.add_argument("--threads", type=int, default=1, help="worker threads for grid points")
        sp.add_argument(
            "--with-k3",
            action="store_true",
            dest="with_k3",
            help="also compute the third-order moment sensitivity column",
        )
    return parser


def _parse_dim(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        dim = int(text)
    except ValueError:
        raise ConfigError(f"--dim must be an integer or 'auto', got {text!r}") from None
    if dim < 2:
        raise ConfigError(f"--dim must be at least 2, got {dim}")
    return dim


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = parse_config(args.config.read_text(), experiment=args.experiment)
        else:
            cfg = default_config(args.experiment)
        dim = _parse_dim(args.dim)
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        result = harness.run_experiment(
            cfg, dim=dim, threads=args.threads, with_k3=args.with_k3
        )
        if args.out is not None:
            out = args.out
        elif cfg.output is not None:
            out = Path(cfg.output)
        elif args.experiment == "wigner":
            out = Path("wigner.json")
        else:
            out = Path(f"{args.experiment}.{args.format}")
        written = harness.emit(result, out, fmt=args.format)
        for path in written:
            print(path)
        return 0
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (
        TruncationError,
        NoInteriorMinimumError,
        IntegrationError,
        harness.ScalingFitError,
        harness.SensitivityOrderingError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end for the experiment families."""

import argparse
import sys

from .errors import ConfigError
from .experiments import (ExperimentSpec, cdf_cluster, de_error, sweep_users,
                          validate, write_rows)
from .scenario import load_config


def _int_list(text):
    return tuple(int(part) for part in text.split(",") if part.strip())


def _add_common(parser):
    parser.add_argument("--config", default=None, help="scenario file, key = value lines")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config field")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, default=2000,
                        help="Monte Carlo trials per drop")
    parser.add_argument("--drops", type=int, default=50,
                        help="network drops per sweep point")
    parser.add_argument("--out", default="results.csv")
    parser.add_argument("--precoder", default="mrt",
                        choices=["mrt", "fpzf", "mrzf", "all"])
    parser.add_argument("--scheme", default="noma",
                        choices=["noma", "oma", "both"])
    parser.add_argument("--sic", default="imperfect",
                        choices=["perfect", "imperfect", "both"])


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfnoma",
        description="Downlink rate experiments for cell-free massive MIMO "
                    "with power-domain NOMA",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep-users", help="sum rate versus number of users")
    _add_common(p)
    p.add_argument("--users", type=_int_list, default=(),
                   help="comma-separated user counts (default: step of 2K up "
                        "to twice the coherence interval)")
    p.add_argument("--estimator", default="closed-form",
                   choices=["closed-form", "monte-carlo", "both"])

    p = sub.add_parser("cdf", help="per-cluster rate distribution")
    _add_common(p)

    p = sub.add_parser("de-error", help="deterministic-equivalent relative "
                                        "error along an antenna axis")
    _add_common(p)
    p.add_argument("--antennas", type=_int_list, default=(8, 16, 24, 32, 40),
                   help="comma-separated antenna counts, each a multiple of K")

    p = sub.add_parser("validate", help="run the property suite")
    _add_common(p)
    return parser


def _expand(choice, all_values):
    key = {"all": all_values, "both": all_values}.get(choice)
    return key if key is not None else (choice,)


def spec_from_args(args) -> ExperimentSpec:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    cfg = load_config(args.config, overrides)
    return ExperimentSpec(
        kind=args.command,
        config=cfg,
        seed=args.seed,
        drops=args.drops,
        trials=args.trials,
        out=args.out,
        precoders=_expand(args.precoder, ("mrt", "fpzf", "mrzf")),
        schemes=_expand(args.scheme, ("noma", "oma")),
        sics=_expand(args.sic, ("perfect", "imperfect")),
        users_axis=getattr(args, "users", ()),
        antennas_axis=getattr(args, "antennas", (8, 16, 24, 32, 40)),
        estimator=getattr(args, "estimator", "closed-form"),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "sweep-users":
        rows = sweep_users(spec)
    elif args.command == "cdf":
        spec.kind = "cdf-cluster"
        rows = cdf_cluster(spec)
    elif args.command == "de-error":
        rows = de_error(spec)
    else:
        rows, ok = validate(spec)
        write_rows(spec.out, rows, spec)
        print(f"wrote {len(rows)} rows to {spec.out}")
        return 0 if ok else 1

    write_rows(spec.out, rows, spec)
    print(f"wrote {len(rows)} rows to {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end for the experiment runner."""

from __future__ import annotations

import argparse
import math
import sys

from . import experiments, games, lsa


def _cmd_run(args) -> int:
    spec = experiments.load_config(args.config)
    rows = experiments.run_experiment(spec)
    for row in rows:
        print(f"{row.experiment} K={row.K} {row.variant}: "
              f"utility={row.mean_utility:.6g} bit/J, "
              f"power={row.mean_tx_power:.6g} W over {row.trials} trials")
    return 0


def _cmd_target_sinr(args) -> int:
    gamma = games.target_sinr(args.packet_len)
    print(f"target SINR for M={args.packet_len}: {gamma:.6f} "
          f"({10 * math.log10(gamma):.4f} dB)")
    return 0


def _cmd_lsa_predict(args) -> int:
    spec = experiments.load_config(args.config)
    path = experiments.run_lsa_prediction(spec)
    print(f"wrote {path}")
    return 0


def _cmd_social_sinr(args) -> int:
    inputs = lsa.LsaInputs(alpha=args.alpha, noise_half_psd=0.5e-9,
                           gamma_target=0.0, p_max=1.0, K=1,
                           inv_cdf=lambda y: 1.0, packet_len=args.packet_len)
    gamma = lsa.social_optimum_sinr(inputs, args.packet_len)
    print(f"social-optimum SINR for M={args.packet_len}, alpha={args.alpha}: "
          f"{gamma:.6f} ({10 * math.log10(gamma):.4f} dB)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eecdma",
        description="Energy-efficient CDMA uplink resource allocation "
                    "experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config")
    p_run.set_defaults(func=_cmd_run)

    p_ts = sub.add_parser("target-sinr",
                          help="print the common target SINR for a packet "
                               "length")
    p_ts.add_argument("--packet-len", type=int, required=True)
    p_ts.set_defaults(func=_cmd_target_sinr)

    p_lsa = sub.add_parser("lsa-predict",
                           help="write the large-system profile prediction "
                                "for a profile experiment config")
    p_lsa.add_argument("config")
    p_lsa.set_defaults(func=_cmd_lsa_predict)

    p_soc = sub.add_parser("social-sinr",
                           help="print the social-optimum equal-SINR target")
    p_soc.add_argument("--alpha", type=float, required=True)
    p_soc.add_argument("--packet-len", type=int, required=True)
    p_soc.set_defaults(func=_cmd_social_sinr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

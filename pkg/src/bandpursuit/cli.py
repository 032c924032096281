"""Command-line front end: band profiles, single recoveries, experiment sweeps."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .recovery import PursuitParams, bloomp, bomp, omp

_PURSUITS = {"omp": omp, "bomp": bomp, "bloomp": bloomp}


def _add_ensemble_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--ensemble", required=True, choices=("paraxial", "frame"),
        help="measurement ensemble",
    )
    parser.add_argument("--n", type=int, required=True, help="number of measurements")
    parser.add_argument("--m", type=int, required=True, help="grid length")
    parser.add_argument("--f", type=int, required=True, help="refinement / redundancy factor")
    parser.add_argument("--r", type=int, default=None, help="frame rows (frame ensemble)")


def _check_ensemble(args) -> None:
    if args.ensemble == "frame":
        if args.r is None:
            raise SystemExit("error: the frame ensemble requires --r")
        if args.m != args.r * args.f:
            raise SystemExit(
                f"error: frame grid length must equal r*f = {args.r * args.f}, got --m {args.m}"
            )


def _cmd_coherence(args) -> int:
    _check_ensemble(args)
    table = harness.band_profile(
        args.ensemble,
        n=args.n,
        f=args.f,
        m=args.m,
        r=args.r,
        realizations=args.realizations,
        base_seed=args.seed,
    )
    harness.emit_csv(table, args.out)
    print(f"wrote band profile ({len(table)} rows) to {args.out}")
    return 0


def _cmd_recover(args) -> int:
    _check_ensemble(args)
    config = harness.ExperimentConfig(
        ensemble=args.ensemble,
        n=args.n,
        f=args.f,
        m=args.m if args.ensemble == "paraxial" else None,
        r=args.r,
        sparsity=args.s,
        separation_rl=args.sep_rl,
        dynamic_range=args.dr,
        relative_noise=args.noise,
        algorithms=(args.alg,),
        eta=args.eta,
        trials=1,
        base_seed=args.seed,
        sweep_param="relative_noise",
        sweep_values=(args.noise,),
    )
    record = harness.run_trial(config, 0)[0]
    if record.error is not None:
        raise SystemExit(f"error: trial failed: {record.error}")

    a, cbands, _psi, x, b, _e = harness.trial_data(config, 0)
    params = PursuitParams(sparsity=config.sparsity, bands=cbands)
    result = _PURSUITS[args.alg](a, b, params)

    rows = [
        ("true", int(i), float(amp.real), float(amp.imag))
        for i, amp in zip(x.support, x.amplitudes)
    ]
    if result.estimate is not None:
        rows += [
            ("estimated", int(i), float(amp.real), float(amp.imag))
            for i, amp in zip(result.estimate.support, result.estimate.amplitudes)
        ]
    harness.emit_csv(rows, args.out)
    print(
        f"{args.alg}: success={record.success} rel_err={record.relative_error:.4g} "
        f"termination={record.termination}; wrote {args.out}"
    )
    return 0


def _cmd_experiment(args) -> int:
    config = harness.parse_config_file(args.config)
    summary = harness.run_experiment(config, workers=args.workers)
    harness.emit_csv(summary, args.out)
    print(
        f"ran {len(config.sweep_values)} sweep values x {config.trials} trials "
        f"(eta={summary.eta_used}); wrote {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandpursuit",
        description="Sparse recovery benchmarks for coherent sensing matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_coh = sub.add_parser("coherence", help="averaged coherence band profile")
    _add_ensemble_flags(p_coh)
    p_coh.add_argument("--realizations", type=int, required=True)
    p_coh.add_argument("--seed", type=int, required=True)
    p_coh.add_argument("--out", required=True)
    p_coh.set_defaults(func=_cmd_coherence)

    p_rec = sub.add_parser("recover", help="single recovery trial")
    _add_ensemble_flags(p_rec)
    p_rec.add_argument("--alg", required=True, choices=("omp", "bomp", "bloomp"))
    p_rec.add_argument("--s", type=int, required=True, help="sparsity")
    p_rec.add_argument("--dr", type=float, required=True, help="dynamic range")
    p_rec.add_argument("--sep-rl", type=float, required=True, dest="sep_rl",
                       help="minimum separation in Rayleigh lengths")
    p_rec.add_argument("--noise", type=float, required=True, help="relative noise level")
    p_rec.add_argument("--eta", type=float, required=True, help="band threshold")
    p_rec.add_argument("--seed", type=int, required=True)
    p_rec.add_argument("--out", required=True)
    p_rec.set_defaults(func=_cmd_recover)

    p_exp = sub.add_parser("experiment", help="Monte Carlo sweep from a config file")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", required=True)
    p_exp.add_argument("--workers", type=int, default=1)
    p_exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

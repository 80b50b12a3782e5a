"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, RunConfig, config_help, load_config, parse_tau_list
from .engine import DegenerateWeightError
from .rates import QuadratureError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spinquant",
        description="Monte Carlo of spin reorientation by coherence-guided scattering.",
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key = value config file (empty/absent: defaults)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
        sp.add_argument("--seed", type=int, help="override master_seed")
        sp.add_argument("--out", help="override output_dir")
        sp.add_argument("--backend", choices=["auto", "native", "python"], default=None)

    run = sub.add_parser("run", help="run one experiment", epilog=config_help(),
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    common(run)

    sweep = sub.add_parser("sweep", help="run one experiment per tau_c_over_period value")
    common(sweep)
    sweep.add_argument("--ratios", required=True, help="comma-separated t_c/(2pi/omega) values")

    dos = sub.add_parser("dos", help="write density-of-states curves rho_bar(theta, tau)")
    dos.add_argument("--tau-list", default="pi,2pi,3pi,4pi,5pi,6pi,7pi,8pi,9pi,10pi",
                     help="comma-separated coherence times, e.g. 'pi,2pi,10pi'")
    dos.add_argument("--n-theta", type=int, default=181)
    dos.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    return p


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1", "threads")
    return cfg.check()


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from . import runner

    try:
        if args.command == "dos":
            taus = parse_tau_list(args.tau_list)
            if args.n_theta < 2:
                raise ConfigError("--n-theta must be >= 2", "n_theta")
            target = "/dev/stdout" if args.out == "-" else args.out
            runner.write_dos_csv(target, taus, args.n_theta)
            return 0
        cfg = _load(args)
        backend = None if args.backend in (None, "auto") else args.backend
        if args.command == "run":
            m = runner.run_experiment(cfg, threads=args.threads, backend=backend)
            print(f"wrote {len(m['outputs'])} files to {cfg.output_dir}")
        else:
            try:
                ratios = [float(x) for x in args.ratios.split(",") if x.strip()]
            except ValueError:
                raise ConfigError(f"--ratios: cannot parse {args.ratios!r}", "ratios") from None
            if not ratios or any(not r > 0 for r in ratios):
                raise ConfigError("--ratios must be positive numbers", "ratios")
            runner.run_sweep(cfg, ratios, threads=args.threads, backend=backend)
            print(f"wrote {len(ratios)} runs under {cfg.output_dir}")
        return 0
    except (ConfigError, FileNotFoundError) as e:
        print(f"spinquant: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, QuadratureError, DegenerateWeightError, ArithmeticError) as e:
        print(f"spinquant: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

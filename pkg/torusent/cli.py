"""
Command line front end:

    sim entropy  --map {cat|elliptic|shift|haar} --N <int> --partition <spec> --steps <int> --out <dir> [--seed <int>]
    sim freeness --map ... --N ... --partition ... --nmax <int> --samples <int> --rmax <int> --seed <int> --out <dir>
    sim fstats   --map ... --N ... --partition ... --mmax <int> --variant {P|Q} --out <dir>
    sim verify   [--suite {fast|full}] --out <dir>

--partition may be repeated. Values from --config <file.json> are overridden
by flags given on the command line.

Exit codes: 0 success, 1 config error, 2 invariant failure, 3 resource ceiling.
"""
import argparse
import logging
import sys

from torusent import __version__
from torusent.errors import ConfigError, InvariantViolation, ResourceCeilingError
from torusent.harness import RUNNERS, ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_RESOURCE = 0, 1, 2, 3


def _common(parser):
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")


def _system(parser):
    parser.add_argument("--map", choices=["cat", "elliptic", "shift", "haar"])
    parser.add_argument("--N", type=int, help="Hilbert space dimension")
    parser.add_argument("--partition", action="append", dest="partitions",
                        help="'equal:K' or 'sizes:d1,d2,...'; may be repeated")
    parser.add_argument("--centering", choices=["printed", "traceless"],
                        help="Q_j = P_j - 1/K (printed) or P_j - d_j/N (traceless)")


def build_parser():
    parser = argparse.ArgumentParser(prog="sim", description="Linear entropy production and free-independence "
                                                             "tests for quantized torus maps.")
    parser.add_argument("--version", action="version", version="torusent " + __version__)
    sub = parser.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("entropy", help="linear entropy I[n] of the measured evolution")
    _system(p)
    p.add_argument("--steps", type=int, dest="n_max")
    p.add_argument("--window", type=int, help="steps per slope window")
    _common(p)

    p = sub.add_parser("freeness", help="sampled correlation functions C[n] and decay fit")
    _system(p)
    p.add_argument("--nmax", type=int, dest="n_max")
    p.add_argument("--samples", type=int, dest="samples_per_n")
    p.add_argument("--rmax", type=int, dest="r_max")
    p.add_argument("--jobs", type=int, dest="n_jobs")
    _common(p)

    p = sub.add_parser("fstats", help="statistics of F(m, j) = U^m P_j or U^m Q_j")
    _system(p)
    p.add_argument("--mmax", type=int)
    p.add_argument("--variant", choices=["P", "Q"])
    _common(p)

    p = sub.add_parser("verify", help="invariant suite and oracle cross-checks")
    p.add_argument("--suite", choices=["fast", "full"])
    p.add_argument("--inject-fault", choices=["skip-measurement"], dest="inject_fault")
    _common(p)

    return parser


def make_config(args):
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "verbose", "quiet")}
    return config.updated(**overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        config = make_config(args).validate()
        if config.experiment == "verify":
            suite, manifest = RUNNERS["verify"](config, quiet=not args.verbose)
            if not suite.passed:
                logger.error("Invariant failures: %s", ", ".join(suite.failing))
                return EXIT_INVARIANT
        else:
            manifest = RUNNERS[config.experiment](config, quiet=not args.verbose)
            failed = [name for name, ok in manifest.invariants.items() if not ok]
            if failed:
                logger.error("Invariant failures: %s", ", ".join(failed))
                return EXIT_INVARIANT
        logger.info("Wrote %d files to %s", len(manifest.artifacts), config.out)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except InvariantViolation as e:
        logger.error("Invariant violation: %s", e)
        return EXIT_INVARIANT
    except ResourceCeilingError as e:
        logger.error("Resource ceiling: %s", e)
        return EXIT_RESOURCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
